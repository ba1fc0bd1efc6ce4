import json
import sys
from pathlib import Path

import numpy as np
import pytest

from distval import (
    BridgeStartFailure,
    Coalition,
    MixtureGame,
    OracleFailure,
    ProtocolViolation,
    SpecValidation,
    build_bridge_game,
    build_game,
    exact_value,
    export_table_spec,
    make_shapley,
    masked_input,
    parse_game_spec,
    query_payoff,
)

CHILD = str(Path(__file__).with_name("bridge_child.py"))


def test_xor_spec():
    g = build_game(parse_game_spec({"kind": "xor"}))
    assert query_payoff(g, Coalition.empty(2)).pi == 0.0
    assert query_payoff(g, Coalition.from_members([0], 2)).pi == 1.0
    assert query_payoff(g, Coalition.from_members([1], 2)).pi == 1.0
    assert query_payoff(g, Coalition.full(2)).pi == 0.0


def linear_spec_obj(n=3, d=3, seed=0, baseline=None, groups=None):
    rng = np.random.default_rng(seed)
    n_features = n if groups is None else sum(len(g) for g in groups)
    obj = {
        "kind": "linear_softmax",
        "weights": rng.normal(0, 1, (n_features, d)).tolist(),
        "bias": rng.normal(0, 1, d).tolist(),
        "input": rng.normal(0, 1, n_features).tolist(),
    }
    if baseline is not None:
        obj["baseline"] = baseline
    if groups is not None:
        obj["groups"] = groups
    return obj


def test_linear_softmax_grand_and_empty():
    obj = linear_spec_obj()
    g = build_game(parse_game_spec(obj))
    w = np.asarray(obj["weights"])
    b = np.asarray(obj["bias"])
    x = np.asarray(obj["input"])
    grand = query_payoff(g, Coalition.full(3))
    assert np.array_equal(np.asarray(grand.theta), x @ w + b)
    empty = query_payoff(g, Coalition.empty(3))
    assert np.array_equal(np.asarray(empty.theta), np.zeros(3) @ w + b)


def test_linear_softmax_baseline_vector():
    baseline = [0.5, -1.0, 2.0]
    obj = linear_spec_obj(baseline=baseline)
    g = build_game(parse_game_spec(obj))
    w = np.asarray(obj["weights"])
    b = np.asarray(obj["bias"])
    empty = query_payoff(g, Coalition.empty(3))
    assert np.array_equal(np.asarray(empty.theta), np.asarray(baseline) @ w + b)


def test_linear_softmax_groups():
    groups = [[0, 1], [2], [3, 4]]
    obj = linear_spec_obj(groups=groups)
    spec = parse_game_spec(obj)
    assert spec.n_players == 3
    g = build_game(spec)
    w = np.asarray(obj["weights"])
    b = np.asarray(obj["bias"])
    x = np.asarray(obj["input"])
    got = query_payoff(g, Coalition.from_members([0], 3))
    masked = np.zeros(5)
    masked[[0, 1]] = x[[0, 1]]
    assert np.array_equal(np.asarray(got.theta), masked @ w + b)


def test_masked_input_matches_manual():
    x = np.arange(4.0)
    baseline = np.full(4, -1.0)
    c = Coalition.from_members([1, 3], 4)
    assert np.array_equal(masked_input(x, baseline, c), [-1.0, 1.0, -1.0, 3.0])


def test_table_round_trip():
    obj = {
        "kind": "table",
        "n_players": 2,
        "family": "bernoulli",
        "payoffs": {"": {"pi": 0.0}, "0": {"pi": 1.0}, "1": {"pi": 1.0}, "0,1": {"pi": 0.0}},
    }
    g = build_game(parse_game_spec(obj))
    assert export_table_spec(g) == obj


def test_table_validation_errors():
    base = {
        "kind": "table",
        "n_players": 2,
        "family": "bernoulli",
        "payoffs": {"": {"pi": 0.0}, "0": {"pi": 1.0}, "1": {"pi": 1.0}},
    }
    with pytest.raises(SpecValidation):  # missing key "0,1"
        parse_game_spec(base)
    bad_key = dict(base, payoffs={**base["payoffs"], "1,0": {"pi": 0.0}})
    with pytest.raises(SpecValidation):
        parse_game_spec(bad_key)
    bad_pi = dict(base, payoffs={**base["payoffs"], "0,1": {"pi": 7.0}})
    with pytest.raises(SpecValidation):
        parse_game_spec(bad_pi)


def test_mixture_spec():
    obj = {
        "kind": "mixture",
        "pi": 0.25,
        "first": {"kind": "xor"},
        "second": {"kind": "xor"},
    }
    g = build_game(parse_game_spec(obj))
    assert isinstance(g, MixtureGame)
    assert g.pi == 0.25
    with pytest.raises(SpecValidation):
        parse_game_spec(dict(obj, second=linear_spec_obj()))


# ---------------------------------------------------------------------------
# Bridge
# ---------------------------------------------------------------------------


def bridge_cmd(*args):
    return [sys.executable, CHILD, *args]


def test_bridge_constant_game_is_null():
    g = build_bridge_game(bridge_cmd("fixed"), 3, "categorical", d=3)
    try:
        p = make_shapley(3)
        for i in range(3):
            v = exact_value(g, p, i)
            assert abs(v.p_zero - 1.0) <= 1e-12
    finally:
        g.bridge.close()


def test_bridge_matches_native(tmp_path):
    obj = linear_spec_obj(n=3, d=3, seed=42, baseline=[0.1, -0.2, 0.3])
    params = tmp_path / "model.json"
    params.write_text(json.dumps(obj))
    native = build_game(parse_game_spec(obj))
    bridged = build_bridge_game(bridge_cmd("linear", str(params)), 3, "categorical", d=3)
    try:
        p = make_shapley(3)
        for i in range(3):
            vn = exact_value(native, p, i)
            vb = exact_value(bridged, p, i)
            assert np.abs(vn.transition - vb.transition).max() <= 1e-10
    finally:
        bridged.bridge.close()


def test_bridge_masking_bit_equivalent(tmp_path):
    obj = linear_spec_obj(n=4, d=3, seed=7, baseline=[1.0, 0.0, -1.0, 0.5])
    params = tmp_path / "model.json"
    params.write_text(json.dumps(obj))
    native = build_game(parse_game_spec(obj))
    bridged = build_bridge_game(bridge_cmd("linear", str(params)), 4, "categorical", d=3)
    try:
        rng = np.random.default_rng(0)
        for _ in range(100):
            mask = int(rng.integers(0, 16))
            c = Coalition(mask, 4)
            assert native.payoff(c).theta == bridged.payoff(c).theta
    finally:
        bridged.bridge.close()


def test_bridge_wrong_d_is_protocol_violation():
    g = build_bridge_game(bridge_cmd("wrong-d"), 2, "categorical", d=3)
    try:
        with pytest.raises(ProtocolViolation):
            query_payoff(g, Coalition.empty(2))
    finally:
        g.bridge.close()


def test_bridge_tolerates_out_of_order_ids():
    g = build_bridge_game(bridge_cmd("extra-replies"), 2, "categorical", d=3)
    try:
        got = query_payoff(g, Coalition.from_members([0], 2))
        assert got.theta == (0.1, 0.1, 0.1)
    finally:
        g.bridge.close()


def test_bridge_model_error_becomes_oracle_failure():
    g = build_bridge_game(bridge_cmd("error-on", "0,1"), 2, "categorical", d=3)
    try:
        query_payoff(g, Coalition.empty(2))  # fine
        with pytest.raises(OracleFailure, match="model exploded"):
            query_payoff(g, Coalition.full(2))
    finally:
        g.bridge.close()


def test_bridge_start_failure():
    with pytest.raises(BridgeStartFailure):
        build_bridge_game(["/nonexistent/binary"], 2, "categorical", d=3)
