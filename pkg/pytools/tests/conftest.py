import subprocess
import sys
from pathlib import Path

import pytest

REPO = Path(__file__).resolve().parents[2]


def run_engine(args):
    """Invoke the distval CLI out of process (file-format contract only)."""
    return subprocess.run(
        [sys.executable, "-m", "distval.cli", *args],
        capture_output=True,
        text=True,
        check=False,
    )


@pytest.fixture(scope="session")
def xor_explain_json(tmp_path_factory):
    out = tmp_path_factory.mktemp("inputs") / "xor.json"
    proc = run_engine(
        ["explain", "--game", str(REPO / "specs" / "xor.json"), "--out", str(out)]
    )
    assert proc.returncode == 0, proc.stderr
    return out


@pytest.fixture(scope="session")
def gaussian_explain_json(tmp_path_factory):
    import json

    spec = tmp_path_factory.mktemp("inputs") / "gaussian.json"
    payoffs = {
        "": {"mu": 0.0, "sigma": 1.0},
        "0": {"mu": 1.0, "sigma": 1.5},
        "1": {"mu": -0.5, "sigma": 1.0},
        "0,1": {"mu": 0.5, "sigma": 0.5},
    }
    spec.write_text(
        json.dumps(
            {"game": {"kind": "table", "n_players": 2, "family": "gaussian", "payoffs": payoffs}}
        )
    )
    out = spec.parent / "gaussian_result.json"
    proc = run_engine(["explain", "--game", str(spec), "--out", str(out)])
    assert proc.returncode == 0, proc.stderr
    return out


@pytest.fixture(scope="session")
def categorical_explain_json(tmp_path_factory):
    out = tmp_path_factory.mktemp("inputs") / "linear.json"
    proc = run_engine(
        [
            "explain",
            "--game", str(REPO / "specs" / "linear_softmax_demo.json"),
            "--out", str(out),
        ]
    )
    assert proc.returncode == 0, proc.stderr
    return out


@pytest.fixture(scope="session")
def fidelity_csv(tmp_path_factory):
    out = tmp_path_factory.mktemp("inputs") / "trace.csv"
    proc = run_engine(
        [
            "fidelity",
            "--game", str(REPO / "specs" / "fidelity_synthetic.json"),
            "--fidelity-classes", "0,1",
            "--out", str(out),
        ]
    )
    assert proc.returncode == 0, proc.stderr
    return out
