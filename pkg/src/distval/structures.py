"""Coalition structures: the per-player distributions p^i over subsets of the rest.

Closed-form kinds (shapley, leave_one_out, size_weighted) evaluate their PMF
lazily from the coalition size; random_order and custom kinds hold explicit
tables validated at construction. Sampling takes an explicit numpy Generator
so callers own parallel stream partitioning.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadPermutation,
    IndexOutOfRange,
    InvalidWeights,
    NotNormalized,
    SelfMembership,
    TooManyPlayers,
)
from .games import Coalition, enumerate_subsets, enumeration_limit

_TABLE_TOL = 1e-12
PREDICATE_TOL = 1e-10


class CoalitionStructure:
    """Base: per-player PMFs over coalitions of the other players."""

    kind: str = "abstract"

    def __init__(self, n_players: int, known_efficient=None, known_symmetric=None):
        if n_players < 1:
            raise IndexOutOfRange(f"n_players must be positive, got {n_players}")
        self.n_players = int(n_players)
        self.known_efficient = known_efficient
        self.known_symmetric = known_symmetric

    def _check_player(self, i: int) -> None:
        if i < 0 or i >= self.n_players:
            raise IndexOutOfRange(f"player {i} outside [0, {self.n_players})")

    def pmf(self, i: int, coalition: Coalition) -> float:
        raise NotImplementedError

    def support(self, i: int, limit: int | None = None):
        """Coalitions S with pmf(i, S) > 0, in a deterministic order.

        Closed-form kinds enumerate the full lattice (gated by the exact
        enumeration limit); tabular kinds iterate their stored support.
        """
        self._check_player(i)
        for c in enumerate_subsets(self.n_players, i, limit):
            p = self.pmf(i, c)
            if p > 0.0:
                yield p, c

    def sample(self, i: int, rng: np.random.Generator) -> Coalition:
        raise NotImplementedError


class ShapleyStructure(CoalitionStructure):
    """p^i(S) = 1 / (n * C(n-1, |S|)): uniform over sizes, uniform within size."""

    kind = "shapley"

    def __init__(self, n_players: int):
        super().__init__(n_players, known_efficient=True, known_symmetric=True)

    def pmf(self, i: int, coalition: Coalition) -> float:
        self._check_player(i)
        if i in coalition:
            return 0.0
        n = self.n_players
        return 1.0 / (n * math.comb(n - 1, len(coalition)))

    def size_pmf(self, k: int) -> float:
        return 1.0 / self.n_players

    def sample(self, i: int, rng: np.random.Generator) -> Coalition:
        self._check_player(i)
        perm = rng.permutation(self.n_players)
        return _predecessors(perm, i)


class LeaveOneOutStructure(CoalitionStructure):
    """Point mass on [n] \\ {i} for every player."""

    kind = "leave_one_out"

    def __init__(self, n_players: int):
        super().__init__(
            n_players,
            known_efficient=(n_players == 1),
            known_symmetric=True,
        )

    def pmf(self, i: int, coalition: Coalition) -> float:
        self._check_player(i)
        full_minus_i = ((1 << self.n_players) - 1) & ~(1 << i)
        return 1.0 if coalition.mask == full_minus_i else 0.0

    def support(self, i: int, limit: int | None = None):
        self._check_player(i)
        full_minus_i = ((1 << self.n_players) - 1) & ~(1 << i)
        yield 1.0, Coalition(full_minus_i, self.n_players)

    def sample(self, i: int, rng: np.random.Generator) -> Coalition:
        self._check_player(i)
        full_minus_i = ((1 << self.n_players) - 1) & ~(1 << i)
        return Coalition(full_minus_i, self.n_players)


class SizeWeightedStructure(CoalitionStructure):
    """Semivalue-style structure: pmf(i, S) = pbar(|S|), normalized over the lattice."""

    kind = "size_weighted"

    def __init__(self, n_players: int, weights):
        super().__init__(n_players, known_efficient=None, known_symmetric=True)
        w = [float(x) for x in weights]
        if len(w) != n_players:
            raise InvalidWeights(
                f"need one weight per size 0..{n_players - 1}, got {len(w)}"
            )
        if any(x < 0 for x in w):
            raise InvalidWeights("size weights must be nonnegative")
        # Normalizer in log space: sampling stays usable for n well beyond the
        # exact-enumeration cap.
        log_terms = [
            math.log(x) + _log_comb(n_players - 1, k) if x > 0 else -math.inf
            for k, x in enumerate(w)
        ]
        log_z = _logsumexp(log_terms)
        if log_z == -math.inf:
            raise InvalidWeights("size weights carry no mass")
        self._log_pbar = [
            (math.log(x) - log_z) if x > 0 else -math.inf for x in w
        ]
        self._size_probs = np.exp(
            np.asarray(log_terms, dtype=float) - log_z
        )
        self._size_probs /= self._size_probs.sum()

    def size_pmf(self, k: int) -> float:
        return float(self._size_probs[k])

    def pbar(self, k: int) -> float:
        return math.exp(self._log_pbar[k])

    def pmf(self, i: int, coalition: Coalition) -> float:
        self._check_player(i)
        if i in coalition:
            return 0.0
        return self.pbar(len(coalition))

    def sample(self, i: int, rng: np.random.Generator) -> Coalition:
        self._check_player(i)
        k = int(rng.choice(self.n_players, p=self._size_probs))
        others = [j for j in range(self.n_players) if j != i]
        chosen = rng.choice(len(others), size=k, replace=False)
        return Coalition.from_members((others[t] for t in chosen), self.n_players)


class RandomOrderStructure(CoalitionStructure):
    """Structure induced by a shared PMF over player permutations."""

    kind = "random_order"

    def __init__(self, n_players: int, perm_pmf):
        super().__init__(n_players, known_efficient=True, known_symmetric=None)
        perms = []
        probs = []
        total = 0.0
        for perm, prob in perm_pmf.items():
            perm = tuple(int(x) for x in perm)
            if sorted(perm) != list(range(n_players)):
                raise BadPermutation(f"{perm} is not a permutation of [0, {n_players})")
            prob = float(prob)
            if prob < 0.0 or prob > 1.0:
                raise NotNormalized(f"permutation probability {prob} outside [0, 1]")
            perms.append(perm)
            probs.append(prob)
            total += prob
        if abs(total - 1.0) > _TABLE_TOL:
            raise NotNormalized(f"permutation PMF sums to {total!r}, not 1")
        self._perms = perms
        self._probs = np.asarray(probs, dtype=float)
        # Per-player tables mask -> probability; predecessors are the
        # strictly-earlier elements of the permutation.
        tables: list[dict[int, float]] = [dict() for _ in range(n_players)]
        for perm, prob in zip(perms, probs):
            before = 0
            for j in perm:
                tables[j][before] = tables[j].get(before, 0.0) + prob
                before |= 1 << j
        self._tables = tables

    def pmf(self, i: int, coalition: Coalition) -> float:
        self._check_player(i)
        return self._tables[i].get(coalition.mask, 0.0)

    def support(self, i: int, limit: int | None = None):
        self._check_player(i)
        for mask in sorted(self._tables[i]):
            p = self._tables[i][mask]
            if p > 0.0:
                yield p, Coalition(mask, self.n_players)

    def sample(self, i: int, rng: np.random.Generator) -> Coalition:
        self._check_player(i)
        idx = int(rng.choice(len(self._perms), p=self._probs))
        return _predecessors(np.asarray(self._perms[idx]), i)


class CustomStructure(CoalitionStructure):
    """Explicit per-player tables coalition-key -> probability."""

    kind = "custom"

    def __init__(self, n_players: int, tables):
        super().__init__(n_players, known_efficient=None, known_symmetric=None)
        parsed: list[dict[int, float]] = []
        for i in range(n_players):
            if i not in tables and str(i) not in tables:
                raise NotNormalized(f"player {i} has no table (absent mass)")
            raw = tables[i] if i in tables else tables[str(i)]
            row: dict[int, float] = {}
            total = 0.0
            for key, prob in raw.items():
                c = (
                    key
                    if isinstance(key, Coalition)
                    else Coalition.from_key(str(key), n_players)
                )
                if i in c:
                    raise SelfMembership(f"player {i} appears in its own key {c.key()!r}")
                prob = float(prob)
                if prob < 0.0 or prob > 1.0:
                    raise NotNormalized(f"probability {prob} outside [0, 1]")
                row[c.mask] = row.get(c.mask, 0.0) + prob
                total += prob
            if abs(total - 1.0) > _TABLE_TOL:
                raise NotNormalized(f"player {i} table sums to {total!r}, not 1")
            parsed.append(row)
        self._tables = parsed

    def pmf(self, i: int, coalition: Coalition) -> float:
        self._check_player(i)
        return self._tables[i].get(coalition.mask, 0.0)

    def support(self, i: int, limit: int | None = None):
        self._check_player(i)
        for mask in sorted(self._tables[i]):
            p = self._tables[i][mask]
            if p > 0.0:
                yield p, Coalition(mask, self.n_players)

    def table(self, i: int) -> dict[int, float]:
        self._check_player(i)
        return dict(self._tables[i])

    def sample(self, i: int, rng: np.random.Generator) -> Coalition:
        self._check_player(i)
        masks = sorted(self._tables[i])
        probs = np.asarray([self._tables[i][m] for m in masks], dtype=float)
        idx = int(rng.choice(len(masks), p=probs / probs.sum()))
        return Coalition(masks[idx], self.n_players)


def make_shapley(n: int) -> ShapleyStructure:
    return ShapleyStructure(n)


def make_leave_one_out(n: int) -> LeaveOneOutStructure:
    return LeaveOneOutStructure(n)


def make_size_weighted(n: int, weights) -> SizeWeightedStructure:
    return SizeWeightedStructure(n, weights)


def make_random_order(n: int, perm_pmf) -> RandomOrderStructure:
    return RandomOrderStructure(n, perm_pmf)


def make_custom(n: int, tables) -> CustomStructure:
    return CustomStructure(n, tables)


def sample_coalition(p: CoalitionStructure, i: int, rng: np.random.Generator) -> Coalition:
    return p.sample(i, rng)


@dataclass
class EfficiencyReport:
    """Outcome of the exact efficiency check; lists violating coalitions."""

    efficient: bool
    grand_sum: float
    violations: list = field(default_factory=list)
    tolerance: float = PREDICATE_TOL


def is_efficient(
    p: CoalitionStructure, limit: int | None = None, tol: float = PREDICATE_TOL
) -> EfficiencyReport:
    """Exact check of the two efficiency conditions over the lattice."""
    n = p.n_players
    cap = enumeration_limit(limit)
    if n > cap:
        raise TooManyPlayers(f"n={n} exceeds exact-enumeration limit {cap}")
    full = (1 << n) - 1
    grand = sum(
        p.pmf(i, Coalition(full & ~(1 << i), n)) for i in range(n)
    )
    violations = []
    if abs(grand - 1.0) > tol:
        violations.append(("grand", grand, 1.0))
    for mask in range(1, full):
        s = Coalition(mask, n)
        lhs = sum(p.pmf(i, Coalition(mask & ~(1 << i), n)) for i in s)
        rhs = sum(p.pmf(j, s) for j in range(n) if j not in s)
        if abs(lhs - rhs) > tol:
            violations.append((s.key(), lhs, rhs))
    return EfficiencyReport(not violations, grand, violations, tol)


def is_symmetric(
    p: CoalitionStructure, limit: int | None = None, tol: float = PREDICATE_TOL
) -> bool:
    """True iff pmf(i, S) depends on |S| only, checked exactly over the lattice."""
    n = p.n_players
    cap = enumeration_limit(limit)
    if n > cap:
        raise TooManyPlayers(f"n={n} exceeds exact-enumeration limit {cap}")
    by_size: dict[int, tuple[float, float]] = {}
    for i in range(n):
        for c in enumerate_subsets(n, i, cap):
            v = p.pmf(i, c)
            lo, hi = by_size.get(len(c), (v, v))
            by_size[len(c)] = (min(lo, v), max(hi, v))
    return all(hi - lo <= tol for lo, hi in by_size.values())


def uniform_permutation_pmf(n: int) -> dict[tuple[int, ...], float]:
    """The uniform PMF over all n! orders (random-order form of the Shapley value)."""
    mass = 1.0 / math.factorial(n)
    return {perm: mass for perm in itertools.permutations(range(n))}


def _predecessors(perm, i: int) -> Coalition:
    n = len(perm)
    mask = 0
    for j in perm:
        if j == i:
            break
        mask |= 1 << int(j)
    return Coalition(mask, n)


def _log_comb(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _logsumexp(xs) -> float:
    m = max(xs, default=-math.inf)
    if m == -math.inf:
        return -math.inf
    return m + math.log(sum(math.exp(x - m) for x in xs))
