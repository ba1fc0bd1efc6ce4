"""Distributional values: mixtures of marginal-contribution laws over coalitions.

``exact_value`` enumerates the coalition lattice and mixes the analytic
per-coalition distributions; ``mc_value`` is the Rao-Blackwellized estimator
(random coalitions or permutations, analytic per-coalition laws); and
``mc_value_sampled`` is the nested-sampling estimator for black-box
categorical oracles under noise sharing.

Monte Carlo determinism: samples are drawn in fixed-size batches, each batch
from an RNG stream derived from (seed, batch index [, player]); batches
reduce to exact integer coalition counts, so results are bit-identical for
any worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import OracleFailure, OutOfRange, SpecValidation, UnsupportedFamily
from .games import Coalition, Game, MixtureGame
from .marginals import bernoulli_mc, categorical_mc, gaussian_mc
from .structures import (
    CoalitionStructure,
    LeaveOneOutStructure,
    RandomOrderStructure,
    ShapleyStructure,
    SizeWeightedStructure,
)

_MERGE_TOL = 1e-12
_VALUE_TOL = 1e-10
BATCH_SIZE = 8192


@dataclass(frozen=True)
class BernoulliValue:
    """Three-point PMF on {+1, -1, 0}; both signed atoms may carry mass."""

    q_plus: float
    q_minus: float
    q_zero: float

    def __post_init__(self) -> None:
        if -_MERGE_TOL <= self.q_zero < 0.0:
            object.__setattr__(self, "q_zero", 0.0)
        total = self.q_plus + self.q_minus + self.q_zero
        ok = abs(total - 1.0) <= _VALUE_TOL and all(
            0.0 <= q <= 1.0 for q in (self.q_plus, self.q_minus, self.q_zero)
        )
        if not ok:
            raise OutOfRange(f"invalid Bernoulli value {self}")


@dataclass(frozen=True)
class GaussianValue:
    """Gaussian mixture plus the PMF of the variance-direction tracker.

    components: tuple of (weight, mean, sd), merged on (mean, sd) and sorted.
    sign_pmf: probabilities of sign(sigma_with - sigma_without) in (-1, 0, +1) order.
    """

    components: tuple[tuple[float, float, float], ...]
    sign_pmf: tuple[float, float, float]


@dataclass(frozen=True)
class CategoricalValue:
    """Transition matrix Q[r, s] = P(flip from class s to class r)."""

    transition: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.transition, dtype=float)
        if t.ndim != 2 or t.shape[0] != t.shape[1] or t.shape[0] < 2:
            raise OutOfRange(f"transition matrix must be square with d >= 2, got {t.shape}")
        t.setflags(write=False)
        object.__setattr__(self, "transition", t)
        total = float(t.sum())
        if abs(total - 1.0) > _VALUE_TOL or float(t.min()) < 0.0:
            raise OutOfRange(f"invalid transition matrix (mass {total!r})")

    @property
    def d(self) -> int:
        return self.transition.shape[0]

    @property
    def p_zero(self) -> float:
        return float(np.trace(self.transition))


Value = BernoulliValue | GaussianValue | CategoricalValue


class Transition(NamedTuple):
    from_class: int
    to_class: int
    probability: float


class FlipAway(NamedTuple):
    from_class: int
    probability: float


@dataclass(frozen=True)
class ValueStats:
    """Derived statistics of one distributional value."""

    importance: float
    expectation: tuple[float, ...]
    variance: float | None
    entropy: float | None
    mode_change: Transition | None
    flip_away: FlipAway | None


@dataclass(frozen=True)
class MCResult:
    """Monte Carlo estimate with per-entry standard errors.

    stderr layout mirrors the value: dict of atom SEs for Bernoulli,
    (d, d) array for categorical, component/sign SEs for Gaussian.
    """

    value: Value
    stderr: object
    samples: int


def _marginal_terms(game: Game, c_with: Coalition, c_without: Coalition):
    """Per-coalition marginal law as weighted terms; mixtures mix at this level."""
    if isinstance(game, MixtureGame):
        out = []
        for w, mc in _marginal_terms(game.first, c_with, c_without):
            out.append((game.pi * w, mc))
        for w, mc in _marginal_terms(game.second, c_with, c_without):
            out.append(((1.0 - game.pi) * w, mc))
        return out
    pw = game.payoff(c_with)
    po = game.payoff(c_without)
    if game.kind == "bernoulli":
        return [(1.0, bernoulli_mc(pw.pi, po.pi))]
    if game.kind == "gaussian":
        return [(1.0, gaussian_mc(pw.mu, pw.sigma, po.mu, po.sigma))]
    return [(1.0, categorical_mc(pw.theta, po.theta))]


def _merge_components(acc: dict[tuple[float, float], float]):
    """Collapse (mean, sd) keys agreeing within tolerance; deterministic order."""
    merged: list[list[float]] = []
    for (mean, sd), w in sorted(acc.items()):
        if (
            merged
            and abs(mean - merged[-1][1]) <= _MERGE_TOL
            and abs(sd - merged[-1][2]) <= _MERGE_TOL
        ):
            merged[-1][0] += w
        else:
            merged.append([w, mean, sd])
    return tuple((w, mean, sd) for w, mean, sd in merged)


def _check_pair(game: Game, structure: CoalitionStructure, i: int) -> None:
    if structure.n_players != game.n_players:
        raise SpecValidation(
            f"structure over {structure.n_players} players used with "
            f"{game.n_players}-player game"
        )
    if i < 0 or i >= game.n_players:
        raise OutOfRange(f"player {i} outside [0, {game.n_players})")


_EXACT_CHUNK = 512


def _acc_bernoulli(game, i, items):
    qp = 0.0
    qm = 0.0
    for p, s in items:
        for w, mc in _marginal_terms(game, s.insert(i), s):
            qp += p * w * mc.q_plus
            qm += p * w * mc.q_minus
    return qp, qm


def _acc_gaussian(game, i, items):
    comps: dict[tuple[float, float], float] = {}
    minus = 0.0
    plus = 0.0
    for p, s in items:
        for w, mc in _marginal_terms(game, s.insert(i), s):
            key = (mc.mean, mc.sd)
            comps[key] = comps.get(key, 0.0) + p * w
            if mc.sign_tracker < 0:
                minus += p * w
            elif mc.sign_tracker > 0:
                plus += p * w
    return comps, minus, plus


def _acc_categorical(game, i, items, d):
    t = np.zeros((d, d))
    for p, s in items:
        for w, mc in _marginal_terms(game, s.insert(i), s):
            t += (p * w) * mc.joint
    return t


def exact_value(
    game: Game,
    structure: CoalitionStructure,
    i: int,
    limit: int | None = None,
    threads: int = 1,
) -> Value:
    """Exact mixture of per-coalition marginal distributions under p^i.

    Coalitions are processed in fixed-size chunks and partial results fold in
    chunk order, so the output is identical for any thread count.
    """
    _check_pair(game, structure, i)
    support = list(structure.support(i, limit))
    # Chunk boundaries are fixed regardless of thread count so the fold
    # order, and hence the result, never depends on the worker pool.
    chunks = [
        support[k : k + _EXACT_CHUNK] for k in range(0, max(len(support), 1), _EXACT_CHUNK)
    ]

    def run(acc):
        if threads > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                return list(pool.map(acc, chunks))
        return [acc(chunk) for chunk in chunks]

    if game.kind == "bernoulli":
        parts = run(lambda items: _acc_bernoulli(game, i, items))
        qp = 0.0
        qm = 0.0
        for part_qp, part_qm in parts:
            qp += part_qp
            qm += part_qm
        return BernoulliValue(qp, qm, 1.0 - qp - qm)
    if game.kind == "gaussian":
        parts = run(lambda items: _acc_gaussian(game, i, items))
        comps: dict[tuple[float, float], float] = {}
        minus = 0.0
        plus = 0.0
        for part_comps, part_minus, part_plus in parts:
            for key, w in part_comps.items():
                comps[key] = comps.get(key, 0.0) + w
            minus += part_minus
            plus += part_plus
        return GaussianValue(_merge_components(comps), (minus, 1.0 - minus - plus, plus))
    parts = run(lambda items: _acc_categorical(game, i, items, game.d))
    t = np.zeros((game.d, game.d))
    for part in parts:
        t += part
    return CategoricalValue(t)


def exact_values(
    game: Game, structure: CoalitionStructure, limit: int | None = None, threads: int = 1
):
    return [
        exact_value(game, structure, i, limit, threads) for i in range(game.n_players)
    ]


# ---------------------------------------------------------------------------
# Rao-Blackwellized Monte Carlo
# ---------------------------------------------------------------------------


def _batch_rng(seed: int, batch: int, player: int | None = None) -> np.random.Generator:
    entropy = (int(seed) & 0xFFFFFFFF, batch) if player is None else (
        int(seed) & 0xFFFFFFFF,
        batch,
        player,
    )
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _permutation_batch_masks(structure, rng, size: int, players) -> dict[int, np.ndarray]:
    """Predecessor masks per player from one batch of sampled permutations."""
    n = structure.n_players
    if isinstance(structure, ShapleyStructure):
        perms = np.tile(np.arange(n), (size, 1))
        perms = rng.permuted(perms, axis=1)
    else:
        probs = structure._probs
        idx = rng.choice(len(structure._perms), size=size, p=probs / probs.sum())
        perms = np.asarray(structure._perms, dtype=np.int64)[idx]
    bits = np.int64(1) << perms.astype(np.int64)
    prefix = np.cumsum(bits, axis=1) - bits  # strictly-earlier elements
    inv = np.argsort(perms, axis=1, kind="stable")
    masks_all = np.take_along_axis(prefix, inv, axis=1)
    return {i: masks_all[:, i] for i in players}


def _independent_batch_masks(structure, seed, batch, size, players):
    """Per-player coalition draws for non-permutation structure kinds."""
    n = structure.n_players
    out = {}
    for i in players:
        rng = _batch_rng(seed, batch, player=i)
        if isinstance(structure, LeaveOneOutStructure):
            mask = ((1 << n) - 1) & ~(1 << i)
            out[i] = np.full(size, mask, dtype=np.int64)
        elif isinstance(structure, SizeWeightedStructure):
            sizes = rng.choice(n, size=size, p=structure._size_probs)
            others = np.asarray([j for j in range(n) if j != i], dtype=np.int64)
            order = np.argsort(rng.random((size, n - 1)), axis=1)
            permuted_bits = (np.int64(1) << others)[order]
            take = np.arange(n - 1)[None, :] < sizes[:, None]
            out[i] = (permuted_bits * take).sum(axis=1)
        else:  # custom or any tabular structure
            items = sorted((c.mask, p) for p, c in structure.support(i))
            masks = np.asarray([m for m, _ in items], dtype=np.int64)
            probs = np.asarray([p for _, p in items], dtype=float)
            idx = rng.choice(len(masks), size=size, p=probs / probs.sum())
            out[i] = masks[idx]
    return out


def _count_batches(game, structure, players, samples, seed, threads):
    n = structure.n_players
    if n > 63:
        return _count_batches_bign(structure, players, samples, seed)
    permutation_kind = isinstance(structure, (ShapleyStructure, RandomOrderStructure))
    n_batches = (samples + BATCH_SIZE - 1) // BATCH_SIZE

    def one_batch(b: int):
        size = min(BATCH_SIZE, samples - b * BATCH_SIZE)
        if permutation_kind:
            rng = _batch_rng(seed, b)
            masks = _permutation_batch_masks(structure, rng, size, players)
        else:
            masks = _independent_batch_masks(structure, seed, b, size, players)
        out = {}
        for i in players:
            uniq, cnt = np.unique(masks[i], return_counts=True)
            out[i] = (uniq, cnt)
        return out

    counts: dict[int, dict[int, int]] = {i: {} for i in players}
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            batch_results = list(pool.map(one_batch, range(n_batches)))
    else:
        batch_results = [one_batch(b) for b in range(n_batches)]
    for res in batch_results:
        for i in players:
            uniq, cnt = res[i]
            tab = counts[i]
            for m, c in zip(uniq.tolist(), cnt.tolist()):
                tab[m] = tab.get(m, 0) + c
    return counts


def _count_batches_bign(structure, players, samples, seed):
    counts: dict[int, dict[int, int]] = {i: {} for i in players}
    n_batches = (samples + BATCH_SIZE - 1) // BATCH_SIZE
    for b in range(n_batches):
        size = min(BATCH_SIZE, samples - b * BATCH_SIZE)
        for i in players:
            rng = _batch_rng(seed, b, player=i)
            tab = counts[i]
            for _ in range(size):
                m = structure.sample(i, rng).mask
                tab[m] = tab.get(m, 0) + 1
    return counts


def _se_from_moments(sums, sumsq, n):
    mean = sums / n
    if n < 2:
        return np.zeros_like(mean)
    var = (sumsq - n * mean * mean) / (n - 1)
    return np.sqrt(np.maximum(var, 0.0) / n)


def _finalize_player(game, structure, i, counts, samples):
    n = structure.n_players
    masks = sorted(counts)
    cnt = np.asarray([counts[m] for m in masks], dtype=float)
    terms = [
        _marginal_terms(game, Coalition(m, n).insert(i), Coalition(m, n)) for m in masks
    ]
    if game.kind == "bernoulli":
        ent = np.asarray(
            [
                [
                    sum(w * mc.q_plus for w, mc in tl),
                    sum(w * mc.q_minus for w, mc in tl),
                    sum(w * mc.q_zero for w, mc in tl),
                ]
                for tl in terms
            ]
        )
        sums = cnt @ ent
        sumsq = cnt @ (ent * ent)
        qp, qm, _ = (sums / samples).tolist()
        se = _se_from_moments(sums, sumsq, samples)
        value = BernoulliValue(qp, qm, 1.0 - qp - qm)
        stderr = {"q_plus": float(se[0]), "q_minus": float(se[1]), "q_zero": float(se[2])}
        return MCResult(value, stderr, samples)
    if game.kind == "categorical":
        joints = np.stack(
            [sum(w * mc.joint for w, mc in tl) for tl in terms]
        )
        sums = np.tensordot(cnt, joints, axes=1)
        sumsq = np.tensordot(cnt, joints * joints, axes=1)
        value = CategoricalValue(sums / samples)
        return MCResult(value, _se_from_moments(sums, sumsq, samples), samples)
    # Gaussian: the per-coalition law contributes its (mean, sd) key with the
    # term weight (an indicator for plain games, fractional for mixtures).
    comp_sums: dict[tuple[float, float], float] = {}
    comp_sumsq: dict[tuple[float, float], float] = {}
    sign_sums = np.zeros(3)
    sign_sumsq = np.zeros(3)
    for c, tl in zip(cnt, terms):
        for w, mc in tl:
            key = (mc.mean, mc.sd)
            comp_sums[key] = comp_sums.get(key, 0.0) + c * w
            comp_sumsq[key] = comp_sumsq.get(key, 0.0) + c * w * w
            sign_sums[mc.sign_tracker + 1] += c * w
            sign_sumsq[mc.sign_tracker + 1] += c * w * w
    merged: list[list[float]] = []
    for (mean, sd), s1 in sorted(comp_sums.items()):
        s2 = comp_sumsq[(mean, sd)]
        if (
            merged
            and abs(mean - merged[-1][2]) <= _MERGE_TOL
            and abs(sd - merged[-1][3]) <= _MERGE_TOL
        ):
            merged[-1][0] += s1
            merged[-1][1] += s2
        else:
            merged.append([s1, s2, mean, sd])
    components = tuple((s1 / samples, mean, sd) for s1, _, mean, sd in merged)
    comp_se = tuple(
        float(_se_from_moments(np.asarray([s1]), np.asarray([s2]), samples)[0])
        for s1, s2, _, _ in merged
    )
    sign_pmf = sign_sums / samples
    sign_se = _se_from_moments(sign_sums, sign_sumsq, samples)
    value = GaussianValue(
        components, (float(sign_pmf[0]), float(sign_pmf[1]), float(sign_pmf[2]))
    )
    stderr = {"components": comp_se, "sign_pmf": tuple(float(x) for x in sign_se)}
    return MCResult(value, stderr, samples)


def mc_value(
    game: Game,
    structure: CoalitionStructure,
    player: int | None = None,
    *,
    samples: int,
    seed: int = 0,
    threads: int = 1,
):
    """Rao-Blackwellized Monte Carlo estimate of the distributional value.

    Draws coalitions (one per player per permutation for permutation-based
    structures) and averages analytic per-coalition laws. Returns one
    MCResult for a single player, or a list over all players.
    """
    if samples < 1:
        raise OutOfRange(f"samples must be >= 1, got {samples}")
    players = list(range(game.n_players)) if player is None else [player]
    for i in players:
        _check_pair(game, structure, i)
    counts = _count_batches(game, structure, players, samples, seed, threads)
    results = [
        _finalize_player(game, structure, i, counts[i], samples) for i in players
    ]
    return results if player is None else results[0]


def mc_value_sampled(
    outcome_oracle,
    structure: CoalitionStructure,
    i: int,
    d: int,
    *,
    coalition_samples: int,
    seed_count: int,
    seed: int = 0,
) -> CategoricalValue:
    """Nested-sampling estimator: k coalitions x r shared seeds, empirical joint.

    outcome_oracle(coalition, noise_seed) -> class label in [0, d); it must be
    deterministic in both arguments. Payoffs at S and S u i are evaluated
    under the same noise seed, which is what zeroes null players.
    """
    if seed_count < 1:
        raise OutOfRange(f"seed_count must be >= 1, got {seed_count}")
    if coalition_samples < 1:
        raise OutOfRange(f"coalition_samples must be >= 1, got {coalition_samples}")
    structure._check_player(i)
    rng = np.random.default_rng(np.random.SeedSequence((int(seed) & 0xFFFFFFFF, 0xC0A1)))
    noise_seeds = rng.integers(0, 2**63 - 1, size=seed_count)
    counts = np.zeros((d, d), dtype=np.int64)
    for _ in range(coalition_samples):
        s = structure.sample(i, rng)
        s_with = s.insert(i)
        with_labels = np.empty(seed_count, dtype=np.int64)
        without_labels = np.empty(seed_count, dtype=np.int64)
        for t, ns in enumerate(noise_seeds):
            with_labels[t] = outcome_oracle(s_with, int(ns))
            without_labels[t] = outcome_oracle(s, int(ns))
        if with_labels.min() < 0 or with_labels.max() >= d or without_labels.min() < 0 or without_labels.max() >= d:
            raise OracleFailure("outcome oracle returned a label outside [0, d)")
        np.add.at(counts, (with_labels, without_labels), 1)
    return CategoricalValue(counts / (coalition_samples * seed_count))


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


def importance(value: Value) -> float:
    """Probability that the player changes the outcome at all: 1 - q(0)."""
    if isinstance(value, BernoulliValue):
        return 1.0 - value.q_zero
    if isinstance(value, GaussianValue):
        dirac0 = sum(w for w, mean, sd in value.components if mean == 0.0 and sd == 0.0)
        return 1.0 - dirac0
    return 1.0 - value.p_zero


def expectation(value: Value):
    """Mean of the distributional value; recovers the standard value."""
    if isinstance(value, BernoulliValue):
        return value.q_plus - value.q_minus
    if isinstance(value, GaussianValue):
        return sum(w * mean for w, mean, _ in value.components)
    q = value.transition
    return np.asarray(q.sum(axis=1) - q.sum(axis=0))


def bernoulli_variance(value: BernoulliValue) -> float:
    mean = value.q_plus - value.q_minus
    return (value.q_plus + value.q_minus) - mean * mean


def gaussian_variance(value: GaussianValue) -> float:
    mean = expectation(value)
    second = sum(w * (sd * sd + m * m) for w, m, sd in value.components)
    return second - mean * mean


def entropy(value: Value) -> float:
    """Shannon entropy (nats) over the difference-set atoms; 0 log 0 = 0."""
    if isinstance(value, GaussianValue):
        raise UnsupportedFamily("entropy over the difference set is undefined for Gaussian mixtures")
    if isinstance(value, BernoulliValue):
        atoms = [value.q_plus, value.q_minus, value.q_zero]
    else:
        q = value.transition
        atoms = [q[r, s] for r in range(value.d) for s in range(value.d) if r != s]
        atoms.append(value.p_zero)
    return -sum(p * math.log(p) for p in atoms if p > 0.0)


def mode_change(value: CategoricalValue) -> Transition:
    """Largest single transition (the mode of the value disregarding 0)."""
    q = value.transition
    d = value.d
    best = None
    for s in range(d):
        for r in range(d):
            if r == s:
                continue
            p = float(q[r, s])
            if best is None or p > best.probability:
                best = Transition(s, r, p)
    return best


def flip_away(value: CategoricalValue) -> FlipAway:
    """Class the player most probably flips the prediction away from."""
    q = value.transition
    col = q.sum(axis=0)
    best = None
    for s in range(value.d):
        p = float(col[s] - q[s, s])
        if best is None or p > best.probability:
            best = FlipAway(s, p)
    return best


def top_transitions(value: CategoricalValue, k: int) -> list[Transition]:
    """k largest nonzero off-diagonal transitions, descending, lex tie-break."""
    if k < 1:
        raise OutOfRange(f"k must be >= 1, got {k}")
    q = value.transition
    d = value.d
    entries = [
        Transition(s, r, float(q[r, s]))
        for s in range(d)
        for r in range(d)
        if r != s and q[r, s] > 0.0
    ]
    entries.sort(key=lambda t: (-t.probability, t.from_class, t.to_class))
    return entries[:k]


def format_transition(t: Transition, labels=None, digits: int = 4) -> str:
    """Readable "from -> to: p" line, with optional class labels."""
    src = labels[t.from_class] if labels else str(t.from_class)
    dst = labels[t.to_class] if labels else str(t.to_class)
    return f"{src} -> {dst}: {t.probability:.{digits}f}"


def summarize(value: Value) -> ValueStats:
    """All derived statistics for one value, family-appropriate fields only."""
    if isinstance(value, BernoulliValue):
        return ValueStats(
            importance=importance(value),
            expectation=(expectation(value),),
            variance=bernoulli_variance(value),
            entropy=entropy(value),
            mode_change=None,
            flip_away=None,
        )
    if isinstance(value, GaussianValue):
        return ValueStats(
            importance=importance(value),
            expectation=(expectation(value),),
            variance=gaussian_variance(value),
            entropy=None,
            mode_change=None,
            flip_away=None,
        )
    return ValueStats(
        importance=importance(value),
        expectation=tuple(float(x) for x in expectation(value)),
        variance=None,
        entropy=entropy(value),
        mode_change=mode_change(value),
        flip_away=flip_away(value),
    )
