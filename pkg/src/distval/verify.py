"""Independent oracles and the executable property suite.

Oracles here are deliberately naive (direct summation over explicit subsets,
no log-space tricks, no shared code with the optimized paths) so a bug in
one implementation cannot cancel against the same bug in the other.

Tolerances are centralized in TOLERANCES, one entry per property:
  prop1_i     expectation of the distributional value equals the standard
              value of each class-probability game (exhaustive enumeration)
  prop1_ii    null players get an exact point mass at zero
  prop1_iii   mixture games mix the value PMFs with the mixture weight
  prop1_iv    for efficient structures the expectations sum to
              E[v(full)] - E[v(empty)]
  prop1_v     symmetric players get identical values under symmetric structures
  marginal_consistency   categorical joint has softmax marginals
  oracle_tv   analytic categorical joint matches the shared-Gumbel sampler
  efficiency_structure / symmetry_structure   the structure predicates
              classify the standard constructions correctly
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DistvalError, InvalidClasses, OutOfRange, TooManyPlayers
from .games import (
    BernoulliParams,
    CategoricalParams,
    Coalition,
    GaussianParams,
    MixtureGame,
    StochasticGame,
    enumeration_limit,
)
from .marginals import softmax
from .structures import (
    CoalitionStructure,
    is_efficient,
    is_symmetric,
    make_custom,
    make_leave_one_out,
    make_random_order,
    make_shapley,
    make_size_weighted,
)
from .values import (
    BernoulliValue,
    CategoricalValue,
    GaussianValue,
    exact_value,
    exact_values,
    expectation,
    importance,
)

TOLERANCES = {
    "prop1_i": 1e-10,
    "prop1_ii": 1e-12,
    "prop1_iii": 1e-12,
    "prop1_iv": 1e-10,
    "prop1_v": 1e-12,
    "marginal_consistency": 1e-9,
    "oracle_tv": 0.005,
    "efficiency_structure": 0.0,
    "symmetry_structure": 0.0,
}

PROPERTY_IDS = tuple(TOLERANCES)


@dataclass
class PropertyReport:
    """Outcome of one property over all its trials."""

    property_id: str
    status: str  # "pass" | "fail" | "not_applicable"
    max_deviation: float
    tolerance: float
    witness: dict | None = None

    def to_json(self) -> dict:
        dev = self.max_deviation
        if not math.isfinite(dev):
            dev = 1.7976931348623157e308  # strict JSON has no Infinity
        return {
            "property": self.property_id,
            "status": self.status,
            "max_dev": dev,
            "tol": self.tolerance,
            "witness": self.witness,
        }


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


def oracle_standard_value(u, p: CoalitionStructure, i: int) -> float:
    """Standard value by exhaustive enumeration of explicit subsets.

    u maps Coalition -> float. Intentionally uses itertools combinations and
    plain summation; shares no code with the distributional expectation path.
    """
    n = p.n_players
    cap = enumeration_limit()
    if n > cap:
        raise TooManyPlayers(f"n={n} exceeds exact-enumeration limit {cap}")
    others = [j for j in range(n) if j != i]
    total = 0.0
    for size in range(n):
        for combo in itertools.combinations(others, size):
            s = Coalition.from_members(combo, n)
            prob = p.pmf(i, s)
            if prob:
                s_with = Coalition.from_members(combo + (i,), n)
                total += prob * (u(s_with) - u(s))
    return total


def oracle_categorical_joint(alpha, beta, samples: int, rng) -> np.ndarray:
    """Empirical joint of (argmax(alpha+eps), argmax(beta+eps)), shared Gumbel eps."""
    if samples < 1:
        raise OutOfRange(f"samples must be >= 1, got {samples}")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    d = alpha.size
    counts = np.zeros((d, d), dtype=np.int64)
    remaining = samples
    while remaining > 0:
        block = min(remaining, 250_000)
        eps = rng.gumbel(size=(block, d))
        wi = np.argmax(alpha + eps, axis=1)  # ties -> lowest index
        wo = np.argmax(beta + eps, axis=1)
        np.add.at(counts, (wi, wo), 1)
        remaining -= block
    return counts / samples


def tv_distance(a: np.ndarray, b: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(a) - np.asarray(b)).sum())


def class_probability_game(game, c: int):
    """The scalar game u_c(S) tracking class c's probability (or pi, or mu)."""
    if game.kind == "bernoulli":
        return lambda s: game.payoff(s).pi
    if game.kind == "gaussian":
        return lambda s: game.payoff(s).mu
    return lambda s: float(softmax(game.payoff(s).theta)[c])


def mean_payoff_vector(game, s: Coalition) -> np.ndarray:
    """E[v(S)] as a vector: [pi], [mu], or the softmax class probabilities."""
    if isinstance(game, MixtureGame):
        return game.pi * mean_payoff_vector(game.first, s) + (
            1.0 - game.pi
        ) * mean_payoff_vector(game.second, s)
    p = game.payoff(s)
    if game.kind == "bernoulli":
        return np.asarray([p.pi])
    if game.kind == "gaussian":
        return np.asarray([p.mu])
    return softmax(p.theta)


# ---------------------------------------------------------------------------
# Random instances
# ---------------------------------------------------------------------------


def random_table_game(
    rng: np.random.Generator, family: str, n: int, d: int = 3
) -> StochasticGame:
    """A random exact game of the given family (explicit payoff table)."""
    masks = range(1 << n)
    if family == "bernoulli":
        table = {m: BernoulliParams(float(rng.uniform())) for m in masks}
    elif family == "gaussian":
        table = {
            m: GaussianParams(float(rng.normal()), float(np.abs(rng.normal(0.5, 0.5))))
            for m in masks
        }
    else:
        table = {
            m: CategoricalParams(tuple(rng.normal(0.0, 1.5, d))) for m in masks
        }
    return StochasticGame(
        n, family, lambda c: table[c.mask], d=d if family == "categorical" else None
    )


def null_player_game(
    rng: np.random.Generator, family: str, n: int, i: int, d: int = 3
) -> StochasticGame:
    """Random game whose payoff ignores player i entirely."""
    base = random_table_game(rng, family, n, d)
    drop = ~(1 << i)

    def oracle(c: Coalition):
        return base.payoff(Coalition(c.mask & drop, n))

    return StochasticGame(n, family, oracle, d=base.d)


def duplicated_player_game(
    rng: np.random.Generator, family: str, n: int, i: int, j: int, d: int = 3
) -> StochasticGame:
    """Random game where players i and j are interchangeable."""
    base = random_table_game(rng, family, n, d)
    bit_i, bit_j = 1 << i, 1 << j

    def oracle(c: Coalition):
        # Canonical form: membership of {i, j} only matters through its count.
        count = bool(c.mask & bit_i) + bool(c.mask & bit_j)
        mask = c.mask & ~(bit_i | bit_j)
        if count >= 1:
            mask |= bit_i
        if count == 2:
            mask |= bit_j
        return base.payoff(Coalition(mask, n))

    return StochasticGame(n, family, oracle, d=base.d)


def _value_entry_gap(v1, v2) -> float:
    """Max absolute difference between two values of the same family."""
    if isinstance(v1, BernoulliValue):
        return max(
            abs(v1.q_plus - v2.q_plus),
            abs(v1.q_minus - v2.q_minus),
            abs(v1.q_zero - v2.q_zero),
        )
    if isinstance(v1, CategoricalValue):
        return float(np.abs(v1.transition - v2.transition).max())
    keys = {}
    for sign, v in ((1.0, v1), (-1.0, v2)):
        for w, mean, sd in v.components:
            key = (round(mean, 9), round(sd, 9))
            keys[key] = keys.get(key, 0.0) + sign * w
    gap = max((abs(x) for x in keys.values()), default=0.0)
    gap = max(gap, max(abs(a - b) for a, b in zip(v1.sign_pmf, v2.sign_pmf)))
    return gap


def _mix_values(pi: float, v1, v2):
    if isinstance(v1, BernoulliValue):
        return BernoulliValue(
            pi * v1.q_plus + (1 - pi) * v2.q_plus,
            pi * v1.q_minus + (1 - pi) * v2.q_minus,
            pi * v1.q_zero + (1 - pi) * v2.q_zero,
        )
    if isinstance(v1, CategoricalValue):
        return CategoricalValue(pi * v1.transition + (1 - pi) * v2.transition)
    comps: dict[tuple[float, float], float] = {}
    for w_scale, v in ((pi, v1), (1 - pi, v2)):
        for w, mean, sd in v.components:
            comps[(mean, sd)] = comps.get((mean, sd), 0.0) + w_scale * w
    sign = tuple(
        pi * a + (1 - pi) * b for a, b in zip(v1.sign_pmf, v2.sign_pmf)
    )
    return GaussianValue(tuple((w, m, s) for (m, s), w in sorted(comps.items())), sign)


# ---------------------------------------------------------------------------
# Property trials
# ---------------------------------------------------------------------------

_FAMILIES_CYCLE = ("bernoulli", "gaussian", "categorical")


def _trial_rng(seed: int, prop: str, trial: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence((int(seed) & 0xFFFFFFFF, PROPERTY_IDS.index(prop), trial))
    )


def _trial_prop1_i(seed: int, trial: int):
    from .builders import xor_game

    rng = _trial_rng(seed, "prop1_i", trial)
    if trial == 0:
        game = xor_game()
        p = make_shapley(2)
        dev = 0.0
        for i in range(2):
            got = expectation(exact_value(game, p, i))
            want = oracle_standard_value(class_probability_game(game, 0), p, i)
            dev = max(dev, abs(got - want))
        return dev, {"case": "xor"}
    n = int(rng.integers(2, 7))
    d = int(rng.integers(2, 6))
    game = random_table_game(rng, "categorical", n, d)
    p = make_shapley(n)
    dev = 0.0
    for i in range(n):
        got = expectation(exact_value(game, p, i))
        for c in range(d):
            want = oracle_standard_value(class_probability_game(game, c), p, i)
            dev = max(dev, abs(float(got[c]) - want))
    return dev, {"n": n, "d": d}


def _trial_prop1_ii(seed: int, trial: int):
    rng = _trial_rng(seed, "prop1_ii", trial)
    family = _FAMILIES_CYCLE[trial % 3]
    n = int(rng.integers(2, 7))
    i = int(rng.integers(0, n))
    game = null_player_game(rng, family, n, i)
    p = make_shapley(n)
    v = exact_value(game, p, i)
    if isinstance(v, BernoulliValue):
        dev = max(v.q_plus, v.q_minus, abs(1.0 - v.q_zero))
    elif isinstance(v, CategoricalValue):
        off = v.transition - np.diag(np.diag(v.transition))
        dev = max(float(np.abs(off).max()), abs(1.0 - v.p_zero))
    else:
        dirac0 = sum(w for w, mean, sd in v.components if mean == 0.0 and sd == 0.0)
        extra = max(
            (max(abs(mean), sd) for _, mean, sd in v.components), default=0.0
        )
        dev = max(abs(1.0 - dirac0), extra, abs(1.0 - v.sign_pmf[1]))
    return dev, {"family": family, "n": n, "player": i}


def _trial_prop1_iii(seed: int, trial: int):
    rng = _trial_rng(seed, "prop1_iii", trial)
    family = _FAMILIES_CYCLE[trial % 3]
    n = int(rng.integers(2, 6))
    d = int(rng.integers(2, 6))
    pi = float(rng.uniform())
    g1 = random_table_game(rng, family, n, d)
    g2 = random_table_game(rng, family, n, d)
    mix = MixtureGame(pi, g1, g2)
    p = make_shapley(n)
    dev = 0.0
    for i in range(n):
        direct = exact_value(mix, p, i)
        combined = _mix_values(pi, exact_value(g1, p, i), exact_value(g2, p, i))
        dev = max(dev, _value_entry_gap(direct, combined))
    return dev, {"family": family, "n": n, "pi": pi}


def _random_order_structure(rng: np.random.Generator, n: int):
    import math as _math

    n_perms = min(int(rng.integers(2, 5)), _math.factorial(n))
    perms = set()
    while len(perms) < n_perms:
        perms.add(tuple(int(x) for x in rng.permutation(n)))
    probs = rng.dirichlet(np.ones(len(perms)))
    perms = sorted(perms)
    table = {perm: float(pr) for perm, pr in zip(perms, probs)}
    total = sum(table.values())
    last = perms[-1]
    table[last] += 1.0 - total  # exact re-normalization against float drift
    return make_random_order(n, table)


def _trial_prop1_iv(seed: int, trial: int, structure_kind: str | None = None):
    rng = _trial_rng(seed, "prop1_iv", trial)
    if structure_kind in ("loo", "leave_one_out"):
        return None, {"reason": "leave_one_out structure is not efficient"}
    family = _FAMILIES_CYCLE[trial % 3]
    n = int(rng.integers(2, 7))
    d = int(rng.integers(2, 6))
    game = random_table_game(rng, family, n, d)
    p = make_shapley(n) if trial % 2 == 0 else _random_order_structure(rng, n)
    full = Coalition.full(n)
    empty = Coalition.empty(n)
    want = mean_payoff_vector(game, full) - mean_payoff_vector(game, empty)
    got = np.zeros_like(want)
    for i in range(n):
        e = expectation(exact_value(game, p, i))
        got = got + (np.asarray([e]) if np.isscalar(e) else np.asarray(e))
    dev = float(np.abs(got - want).max())
    return dev, {"family": family, "n": n, "structure": p.kind}


def _trial_prop1_v(seed: int, trial: int):
    rng = _trial_rng(seed, "prop1_v", trial)
    family = _FAMILIES_CYCLE[trial % 3]
    n = int(rng.integers(3, 7))
    i, j = 0, 1
    game = duplicated_player_game(rng, family, n, i, j)
    if trial % 2 == 0:
        p = make_shapley(n)
    else:
        p = make_size_weighted(n, [float(x) for x in rng.uniform(0.05, 1.0, n)])
    dev = _value_entry_gap(exact_value(game, p, i), exact_value(game, p, j))
    return dev, {"family": family, "n": n, "structure": p.kind}


def _trial_marginal_consistency(seed: int, trial: int):
    from .marginals import categorical_mc

    rng = _trial_rng(seed, "marginal_consistency", trial)
    d = int(rng.integers(2, 13))
    alpha = rng.normal(0.0, 2.0, d)
    beta = rng.normal(0.0, 2.0, d)
    joint = categorical_mc(alpha, beta).joint
    dev = max(
        float(np.abs(joint.sum(axis=1) - softmax(alpha)).max()),
        float(np.abs(joint.sum(axis=0) - softmax(beta)).max()),
    )
    return dev, {"d": d}


_TV_DIMS = (2, 3, 5, 10)


def _trial_oracle_tv(seed: int, trial: int, tv_samples: int = 1_000_000):
    from .marginals import categorical_mc

    rng = _trial_rng(seed, "oracle_tv", trial)
    d = _TV_DIMS[trial % len(_TV_DIMS)]
    alpha = rng.normal(0.0, 1.5, d)
    beta = rng.normal(0.0, 1.5, d)
    analytic = categorical_mc(alpha, beta).joint
    empirical = oracle_categorical_joint(alpha, beta, tv_samples, rng)
    return tv_distance(analytic, empirical), {"d": d, "samples": tv_samples}


def _trial_efficiency_structure(seed: int, trial: int):
    rng = _trial_rng(seed, "efficiency_structure", trial)
    n = int(rng.integers(2, 7))
    case = trial % 3
    if case == 0:
        rep = is_efficient(make_shapley(n))
        ok = rep.efficient
        label = "shapley"
    elif case == 1:
        rep = is_efficient(_random_order_structure(rng, n))
        ok = rep.efficient
        label = "random_order"
    else:
        rep = is_efficient(make_leave_one_out(n))
        ok = (not rep.efficient) and abs(rep.grand_sum - n) < 1e-9 if n > 1 else rep.efficient
        label = "leave_one_out"
    return (0.0 if ok else 1.0), {"structure": label, "n": n}


def _trial_symmetry_structure(seed: int, trial: int):
    rng = _trial_rng(seed, "symmetry_structure", trial)
    n = int(rng.integers(2, 7))
    case = trial % 3
    if case == 0:
        ok = is_symmetric(make_shapley(n))
        label = "shapley"
    elif case == 1:
        p = make_size_weighted(n, [float(x) for x in rng.uniform(0.05, 1.0, n)])
        ok = is_symmetric(p)
        label = "size_weighted"
    else:
        tables = {0: {"": 1.0}}
        rest = Coalition.from_members([0], n).key()
        for i in range(1, n):
            tables[i] = {"": 0.25, rest: 0.75}
        ok = not is_symmetric(make_custom(n, tables))
        label = "custom_asymmetric"
    return (0.0 if ok else 1.0), {"structure": label, "n": n}


def run_property_suite(
    selection=None,
    seed: int = 0,
    trials: int = 100,
    tv_samples: int = 1_000_000,
    threads: int = 1,
    structure_kind: str | None = None,
) -> list[PropertyReport]:
    """Run the selected properties; reports are sorted by property id.

    Deterministic given seed: every trial owns an RNG stream derived from
    (seed, property, trial), and aggregation is order-independent.
    """
    chosen = list(PROPERTY_IDS) if selection is None else list(selection)
    for name in chosen:
        if name not in PROPERTY_IDS:
            raise OutOfRange(f"unknown property {name!r}")
    runners = {
        "prop1_i": (_trial_prop1_i, trials),
        "prop1_ii": (_trial_prop1_ii, trials),
        "prop1_iii": (_trial_prop1_iii, trials),
        "prop1_iv": (
            lambda s, t: _trial_prop1_iv(s, t, structure_kind),
            trials,
        ),
        "prop1_v": (_trial_prop1_v, trials),
        "marginal_consistency": (_trial_marginal_consistency, max(trials, 1)),
        "oracle_tv": (
            lambda s, t: _trial_oracle_tv(s, t, tv_samples),
            len(_TV_DIMS) * max(1, trials // 20),
        ),
        "efficiency_structure": (_trial_efficiency_structure, trials),
        "symmetry_structure": (_trial_symmetry_structure, trials),
    }
    reports = []
    for name in sorted(set(chosen)):
        fn, n_trials = runners[name]

        def one(t: int, fn=fn):
            try:
                return fn(seed, t)
            except DistvalError as exc:
                # A hard numeric error inside a trial is a property failure,
                # not a crash: record it with an infinite deviation.
                return math.inf, {"error": f"{type(exc).__name__}: {exc}"}

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                outcomes = list(pool.map(one, range(n_trials)))
        else:
            outcomes = [one(t) for t in range(n_trials)]
        if all(dev is None for dev, _ in outcomes):
            reports.append(
                PropertyReport(name, "not_applicable", 0.0, TOLERANCES[name], outcomes[0][1])
            )
            continue
        max_dev = -1.0
        witness = None
        for t, (dev, info) in enumerate(outcomes):
            if dev is not None and dev > max_dev:
                max_dev = dev
                witness = {"trial": t, **info}
        tol = TOLERANCES[name]
        status = "pass" if max_dev <= tol else "fail"
        reports.append(
            PropertyReport(name, status, max_dev, tol, witness if status == "fail" else None)
        )
    return reports


# ---------------------------------------------------------------------------
# Rank discrepancy (aggregation bias)
# ---------------------------------------------------------------------------


@dataclass
class RankReport:
    """Feature orderings induced by iota versus the absolute-sum heuristic."""

    iota: list
    iota_abs: list
    order_iota: list
    order_abs: list
    rankings_differ: bool
    top_differs: bool
    degenerate_abs: bool


def rank_discrepancy(game, p: CoalitionStructure) -> RankReport:
    """Compare rankings by overall importance versus summed absolute values."""
    values = exact_values(game, p)
    iota = [float(importance(v)) for v in values]
    iota_abs = []
    for v in values:
        e = expectation(v)
        e = np.atleast_1d(np.asarray(e, dtype=float))
        iota_abs.append(float(np.abs(e).sum()))
    order_iota = sorted(range(len(iota)), key=lambda i: (-iota[i], i))
    order_abs = sorted(range(len(iota_abs)), key=lambda i: (-iota_abs[i], i))
    return RankReport(
        iota=iota,
        iota_abs=iota_abs,
        order_iota=order_iota,
        order_abs=order_abs,
        rankings_differ=order_iota != order_abs,
        top_differs=order_iota[0] != order_abs[0],
        degenerate_abs=max(iota_abs) < 1e-9 < max(iota),
    )


# ---------------------------------------------------------------------------
# Fidelity harness
# ---------------------------------------------------------------------------

SCHEMES = ("A", "B", "C")


@dataclass
class FidelityStep:
    step: int
    removed_player: int | None
    p_c1: float
    p_c2: float


@dataclass
class FidelityTrace:
    """Class probabilities of (c1, c2) under cumulative player removal."""

    scheme: str
    c1: int
    c2: int
    order: list
    steps: list = field(default_factory=list)


def _scheme_scores(values, c1: int, c2: int, scheme: str):
    if scheme == "A":
        return [float(v.transition[c1, c2]) for v in values]
    if scheme == "B":
        return [float(expectation(v)[c1]) for v in values]
    return [-float(expectation(v)[c2]) for v in values]


def fidelity_trace(
    game,
    values,
    c1: int,
    c2: int,
    scheme: str,
    steps: int,
) -> FidelityTrace:
    """Remove players in the scheme's descending-score order, tracking P(c1), P(c2)."""
    if game.kind != "categorical":
        raise InvalidClasses("fidelity traces require a categorical game")
    d = game.d
    if c1 == c2 or not (0 <= c1 < d) or not (0 <= c2 < d):
        raise InvalidClasses(f"classes ({c1}, {c2}) invalid for d={d}")
    if scheme not in SCHEMES:
        raise OutOfRange(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    n = game.n_players
    if steps < 0 or steps > n:
        raise OutOfRange(f"steps must lie in [0, {n}], got {steps}")
    scores = _scheme_scores(values, c1, c2, scheme)
    order = sorted(range(n), key=lambda i: (-scores[i], i))
    trace = FidelityTrace(scheme, c1, c2, order[:steps])
    mask = (1 << n) - 1
    probs = softmax(game.payoff(Coalition(mask, n)).theta)
    trace.steps.append(FidelityStep(0, None, float(probs[c1]), float(probs[c2])))
    for t in range(steps):
        mask &= ~(1 << order[t])
        probs = softmax(game.payoff(Coalition(mask, n)).theta)
        trace.steps.append(
            FidelityStep(t + 1, order[t], float(probs[c1]), float(probs[c2]))
        )
    return trace


def make_fidelity_demo_spec(seed: int = 7) -> dict:
    """A 10-feature, 3-class linear-softmax game whose top scheme-A feature
    carries the dominant c2 -> c1 transition: removing it must strictly
    decrease P(c1) and strictly increase P(c2)."""
    rng = np.random.default_rng(seed)
    n, d = 10, 3
    w = rng.normal(0.0, 0.25, (n, d))
    w[0] = (3.0, -3.0, 0.0)
    return {
        "kind": "linear_softmax",
        "weights": [[float(x) for x in row] for row in w],
        "bias": [0.0, 0.0, 0.0],
        "input": [1.0] * n,
        "baseline": [0.0] * n,
    }
