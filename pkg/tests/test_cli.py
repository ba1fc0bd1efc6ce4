import json
from pathlib import Path

import jsonschema

from distval import cli

REPO = Path(__file__).resolve().parents[1]
XOR_SPEC = str(REPO / "specs" / "xor.json")
FIDELITY_SPEC = str(REPO / "specs" / "fidelity_synthetic.json")
LINEAR_SPEC = str(REPO / "specs" / "linear_softmax_demo.json")
EXPLAIN_SCHEMA = json.loads((REPO / "schemas" / "explain_result.schema.json").read_text())
VERIFY_SCHEMA = json.loads((REPO / "schemas" / "verify_report.schema.json").read_text())


def run(argv):
    return cli.main(argv)


def test_explain_xor_json(tmp_path, capsys):
    out = tmp_path / "xor.json"
    assert run(["explain", "--game", XOR_SPEC, "--out", str(out)]) == 0
    assert capsys.readouterr().out == ""  # stdout silent unless --out -
    payload = json.loads(out.read_text())
    jsonschema.validate(payload, EXPLAIN_SCHEMA)
    for entry in payload["results"]:
        assert entry["distribution"]["q_plus"] == 0.5
        assert entry["distribution"]["q_minus"] == 0.5
        assert entry["stats"]["importance"] == 1.0
        assert entry["stats"]["expectation"] == [0]


def test_explain_stream_mode(capsys):
    assert run(["explain", "--game", XOR_SPEC, "--out", "-"]) == 0
    payload = json.loads(capsys.readouterr().out)
    jsonschema.validate(payload, EXPLAIN_SCHEMA)


def test_explain_mc_seed_byte_identical(tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    for out in (a, b):
        assert (
            run(
                [
                    "explain",
                    "--game", LINEAR_SPEC,
                    "--mode", "mc",
                    "--samples", "5000",
                    "--seed", "7",
                    "--out", str(out),
                ]
            )
            == 0
        )
    assert a.read_bytes() == b.read_bytes()


def test_explain_mc_thread_count_invariance(tmp_path):
    a = tmp_path / "t1.json"
    b = tmp_path / "t8.json"
    for out, threads in ((a, "1"), (b, "8")):
        assert (
            run(
                [
                    "explain",
                    "--game", LINEAR_SPEC,
                    "--mode", "mc",
                    "--samples", "20000",
                    "--seed", "11",
                    "--threads", threads,
                    "--out", str(out),
                ]
            )
            == 0
        )
    assert a.read_bytes() == b.read_bytes()


def test_explain_sampled_mode(tmp_path):
    out = tmp_path / "sampled.json"
    code = run(
        [
            "explain",
            "--game", LINEAR_SPEC,
            "--mode", "sampled",
            "--samples", "50",
            "--seeds", "200",
            "--seed", "3",
            "--player", "0",
            "--out", str(out),
        ]
    )
    assert code == 0
    payload = json.loads(out.read_text())
    jsonschema.validate(payload, EXPLAIN_SCHEMA)


def test_explain_csv_flattening(tmp_path):
    out = tmp_path / "res.csv"
    assert run(["explain", "--game", LINEAR_SPEC, "--format", "csv", "--out", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "player,from,to,prob"
    # 4 players x 3x3 matrix, diagonal included
    assert len(lines) == 1 + 4 * 9


def test_malformed_spec_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"game": {"kind": "table", "n_players": 2, "family": "bernoulli", "payoffs": {}}}')
    out = tmp_path / "never.json"
    assert run(["explain", "--game", str(bad), "--out", str(out)]) == 2
    assert not out.exists()
    assert capsys.readouterr().err.strip()


def test_missing_samples_exit_2():
    assert run(["explain", "--game", XOR_SPEC, "--mode", "mc"]) == 2


def test_bridge_start_failure_exit_3(tmp_path):
    spec = tmp_path / "bridge.json"
    spec.write_text(
        json.dumps(
            {
                "game": {
                    "kind": "bridge",
                    "command": ["/nonexistent/model-server"],
                    "n_players": 2,
                    "family": "categorical",
                    "d": 3,
                }
            }
        )
    )
    assert run(["explain", "--game", str(spec)]) == 3


def test_numeric_failure_exit_4(monkeypatch, tmp_path):
    import distval.marginals as marg

    orig = marg._sigma_diff
    monkeypatch.setattr(marg, "_sigma_diff", lambda p, q: -orig(p, q))
    out = tmp_path / "never.json"
    assert run(["explain", "--game", LINEAR_SPEC, "--out", str(out)]) == 4


def test_verify_small_suite_exit_0(tmp_path):
    out = tmp_path / "verify.json"
    code = run(
        [
            "verify",
            "--suite", "prop1_ii,prop1_iii,marginal_consistency",
            "--trials", "10",
            "--out", str(out),
        ]
    )
    assert code == 0
    payload = json.loads(out.read_text())
    jsonschema.validate(payload, VERIFY_SCHEMA)
    assert all(r["status"] == "pass" for r in payload["reports"])


def test_verify_loo_not_applicable_exit_0(tmp_path):
    out = tmp_path / "verify.json"
    code = run(
        [
            "verify",
            "--suite", "prop1_iv",
            "--structure", "loo",
            "--trials", "5",
            "--out", str(out),
        ]
    )
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["reports"][0]["status"] == "not_applicable"


def test_verify_mutation_exit_1(monkeypatch, tmp_path):
    import distval.marginals as marg

    orig = marg._sigma_diff
    monkeypatch.setattr(marg, "_sigma_diff", lambda p, q: -orig(p, q))
    out = tmp_path / "verify.json"
    code = run(
        ["verify", "--suite", "marginal_consistency", "--trials", "5", "--out", str(out)]
    )
    assert code == 1
    payload = json.loads(out.read_text())
    jsonschema.validate(payload, VERIFY_SCHEMA)
    assert payload["reports"][0]["status"] == "fail"


def test_fidelity_zero_steps(tmp_path):
    out = tmp_path / "trace.csv"
    code = run(
        [
            "fidelity",
            "--game", FIDELITY_SPEC,
            "--fidelity-classes", "0,1",
            "--steps", "0",
            "--out", str(out),
        ]
    )
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "step,scheme,removed_player,p_c1,p_c2"
    assert len(lines) == 1 + 3  # one step-0 row per scheme


def test_fidelity_full_trace(tmp_path):
    out = tmp_path / "trace.csv"
    code = run(
        [
            "fidelity",
            "--game", FIDELITY_SPEC,
            "--fidelity-classes", "0,1",
            "--out", str(out),
        ]
    )
    assert code == 0
    lines = out.read_text().strip().splitlines()[1:]
    rows = [line.split(",") for line in lines]
    by_scheme = {}
    for step, scheme, removed, p1, p2 in rows:
        by_scheme.setdefault(scheme, []).append((int(step), removed, float(p1), float(p2)))
    assert set(by_scheme) == {"A", "B", "C"}
    a = by_scheme["A"]
    assert a[0][0] == 0 and a[0][1] == ""
    assert a[1][2] < a[0][2]  # P(c1) drops at the first removal
    assert a[1][3] > a[0][3]  # P(c2) rises
    endpoints = {scheme[-1][2:] for scheme in by_scheme.values()}
    assert len(endpoints) == 1  # common endpoint across schemes


def test_fidelity_invalid_classes_exit_2():
    assert run(["fidelity", "--game", FIDELITY_SPEC, "--fidelity-classes", "1,1"]) == 2
    assert run(["fidelity", "--game", XOR_SPEC, "--fidelity-classes", "0,1"]) == 2


def test_enumerate_structure(tmp_path):
    out = tmp_path / "structure.json"
    assert run(["enumerate-structure", "--game", XOR_SPEC, "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["kind"] == "shapley"
    assert payload["efficient"] is True
    assert payload["symmetric"] is True
    assert payload["tables"]["0"] == {"": 0.5, "1": 0.5}


def test_enumerate_structure_custom_from_spec(tmp_path):
    spec = tmp_path / "custom.json"
    spec.write_text(
        json.dumps(
            {
                "game": {"kind": "xor"},
                "structure": {
                    "kind": "custom",
                    "tables": {"0": {"1": 1.0}, "1": {"0": 1.0}},
                },
            }
        )
    )
    out = tmp_path / "structure.json"
    assert run(["enumerate-structure", "--game", str(spec), "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["kind"] == "custom"
    assert payload["tables"]["0"] == {"1": 1.0}


def test_structure_flag_overrides_spec(tmp_path):
    out = tmp_path / "v.json"
    assert run(["explain", "--game", XOR_SPEC, "--structure", "loo", "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["provenance"]["structure"] == "leave_one_out"
    assert payload["results"][0]["distribution"]["q_minus"] == 1.0


def test_weights_file_structure(tmp_path):
    weights = tmp_path / "weights.json"
    weights.write_text("[1.0, 0.0]")
    out = tmp_path / "v.json"
    code = run(
        [
            "explain",
            "--game", XOR_SPEC,
            "--structure", f"weights:{weights}",
            "--out", str(out),
        ]
    )
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["provenance"]["structure"] == "size_weighted"
    # all mass on the empty coalition: the marginal is v({i}) - v({})
    assert payload["results"][0]["distribution"]["q_plus"] == 1.0


def test_dumps_17g_round_trip():
    vals = [0.1, 1 / 3, 1e-17, 123456789.123456789, 5e-324]
    text = cli.dumps_17g({"vals": vals})
    back = json.loads(text)["vals"]
    assert back == vals
