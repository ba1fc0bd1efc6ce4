"""Secondary acceptance: bridge equivalence and the render contract."""
import json
import sys

import numpy as np

from distval_tools import PlotJob, render


def test_bridge_equivalence_native_vs_stdio(tmp_path):
    # The same linear-softmax model explained natively and via the stdio
    # bridge must produce distributional values equal within 1e-10.
    from distval import build_bridge_game, build_game, exact_value, make_shapley, parse_game_spec

    rng = np.random.default_rng(808)
    obj = {
        "kind": "linear_softmax",
        "weights": rng.normal(0, 1, (4, 3)).tolist(),
        "bias": rng.normal(0, 0.5, 3).tolist(),
        "input": rng.normal(0, 1, 4).tolist(),
        "baseline": rng.normal(0, 0.2, 4).tolist(),
    }
    params = tmp_path / "model.json"
    params.write_text(json.dumps(obj))
    native = build_game(parse_game_spec(obj))
    bridged = build_bridge_game(
        [sys.executable, "-m", "distval_tools.linear_demo", str(params)],
        4,
        "categorical",
        d=3,
    )
    try:
        p = make_shapley(4)
        worst = 0.0
        for i in range(4):
            vn = exact_value(native, p, i)
            vb = exact_value(bridged, p, i)
            worst = max(worst, float(np.abs(vn.transition - vb.transition).max()))
        assert worst <= 1e-10
        print(f"ACCEPTANCE bridge-equivalence: PASS (max entry gap {worst:.2e})")
    finally:
        bridged.bridge.close()


def test_render_contract(xor_explain_json, fidelity_csv, tmp_path):
    # The plot emitter consumes the XOR explain JSON and the fidelity CSV
    # without schema errors and produces image files.
    bars = tmp_path / "xor_importance.png"
    curves = tmp_path / "fidelity.png"
    render(PlotJob(str(xor_explain_json), "importance_bars", str(bars)))
    render(PlotJob(str(fidelity_csv), "fidelity_curves", str(curves)))
    assert bars.stat().st_size > 0
    assert curves.stat().st_size > 0
    print("ACCEPTANCE render-contract: PASS (XOR JSON and fidelity CSV rendered)")
