import json

import pytest

from distval_tools import PlotJob, SchemaError, render
from distval_tools.cli import main as plot_main


def test_importance_bars_from_xor(xor_explain_json, tmp_path):
    out = tmp_path / "importance.png"
    render(PlotJob(str(xor_explain_json), "importance_bars", str(out)))
    assert out.exists() and out.stat().st_size > 0


def test_heatmap_from_categorical(categorical_explain_json, tmp_path):
    out = tmp_path / "heatmap.png"
    render(PlotJob(str(categorical_explain_json), "heatmap", str(out)))
    assert out.exists() and out.stat().st_size > 0


def test_heatmap_rejects_bernoulli(xor_explain_json, tmp_path):
    with pytest.raises(SchemaError):
        render(PlotJob(str(xor_explain_json), "heatmap", str(tmp_path / "x.png")))


def test_gaussian_density(gaussian_explain_json, tmp_path):
    out = tmp_path / "density.png"
    render(PlotJob(str(gaussian_explain_json), "gaussian_density", str(out)))
    assert out.exists() and out.stat().st_size > 0


def test_fidelity_curves(fidelity_csv, tmp_path):
    out = tmp_path / "curves.png"
    render(PlotJob(str(fidelity_csv), "fidelity_curves", str(out)))
    assert out.exists() and out.stat().st_size > 0


def test_render_does_not_modify_input(xor_explain_json, tmp_path):
    before = xor_explain_json.read_bytes()
    render(PlotJob(str(xor_explain_json), "importance_bars", str(tmp_path / "a.png")))
    assert xor_explain_json.read_bytes() == before


def test_schema_mismatch_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nope": []}))
    out = tmp_path / "x.png"
    code = plot_main(["--input", str(bad), "--kind", "importance_bars", "--out", str(out)])
    assert code == 2
    assert not out.exists()


def test_diagonal_only_heatmap(tmp_path):
    # An all-diagonal matrix (null player) must still render.
    payload = {
        "provenance": {"version": "x", "spec_hash": "0" * 64, "game_kind": "table",
                        "family": "categorical", "n_players": 1, "structure": "shapley",
                        "mode": "exact", "seed": 0},
        "results": [
            {
                "player": 0,
                "family": "categorical",
                "distribution": {"d": 3, "transition": [[0.2, 0, 0], [0, 0.3, 0], [0, 0, 0.5]]},
                "stats": {"importance": 0.0, "expectation": [0, 0, 0]},
            }
        ],
    }
    src = tmp_path / "diag.json"
    src.write_text(json.dumps(payload))
    out = tmp_path / "diag.png"
    render(PlotJob(str(src), "heatmap", str(out)))
    assert out.exists()
