"""Players, coalitions, payoff parameters, and the stochastic-game oracle.

Coalitions are fixed-width bitmasks over ``n_players`` bit positions; all
analytic paths manipulate masks and never materialize noise. The payoff
oracle of a game is memoized on the coalition mask and must be
deterministic: identical coalitions yield bit-identical parameters.
"""
from __future__ import annotations

import math
import os
import threading
from dataclasses import dataclass
from typing import Callable, Iterator, Union

from .errors import (
    AlreadyMember,
    IndexOutOfRange,
    NegativeSigma,
    NonFinite,
    OracleFailure,
    OutOfRange,
    SpecValidation,
    TooManyPlayers,
)

DEFAULT_ENUM_LIMIT = 20
ENUM_LIMIT_ENV = "DISTVAL_ENUM_LIMIT"

FAMILIES = ("bernoulli", "gaussian", "categorical")


def enumeration_limit(override: int | None = None) -> int:
    """Exact-enumeration cap on n; env DISTVAL_ENUM_LIMIT overrides the default."""
    if override is not None:
        return int(override)
    raw = os.environ.get(ENUM_LIMIT_ENV)
    return int(raw) if raw else DEFAULT_ENUM_LIMIT


@dataclass(frozen=True)
class Coalition:
    """Subset of players, canonically ordered, serializable to a stable key."""

    mask: int
    n_players: int

    def __post_init__(self) -> None:
        if self.n_players < 1:
            raise IndexOutOfRange(f"n_players must be positive, got {self.n_players}")
        if self.mask < 0 or self.mask >> self.n_players:
            raise IndexOutOfRange(
                f"mask {self.mask:#x} has bits outside [0, {self.n_players})"
            )

    @classmethod
    def from_members(cls, members, n_players: int) -> "Coalition":
        mask = 0
        for i in members:
            i = int(i)
            if i < 0 or i >= n_players:
                raise IndexOutOfRange(f"player {i} outside [0, {n_players})")
            mask |= 1 << i
        return cls(mask, n_players)

    @classmethod
    def empty(cls, n_players: int) -> "Coalition":
        return cls(0, n_players)

    @classmethod
    def full(cls, n_players: int) -> "Coalition":
        return cls((1 << n_players) - 1, n_players)

    @classmethod
    def from_key(cls, key: str, n_players: int) -> "Coalition":
        """Parse the stable key format: ascending comma-joined indices, "" = empty."""
        key = key.strip()
        if not key:
            return cls.empty(n_players)
        return cls.from_members((int(tok) for tok in key.split(",")), n_players)

    def members(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n_players) if self.mask >> i & 1)

    def __iter__(self) -> Iterator[int]:
        return iter(self.members())

    def __contains__(self, i: int) -> bool:
        return 0 <= i < self.n_players and bool(self.mask >> i & 1)

    def __len__(self) -> int:
        return bin(self.mask).count("1")

    @property
    def size(self) -> int:
        return len(self)

    def key(self) -> str:
        """Stable serialization: ascending comma-joined indices; "" for the empty set."""
        return ",".join(str(i) for i in self.members())

    def insert(self, i: int) -> "Coalition":
        if i < 0 or i >= self.n_players:
            raise IndexOutOfRange(f"player {i} outside [0, {self.n_players})")
        if self.mask >> i & 1:
            raise AlreadyMember(f"player {i} already in coalition {{{self.key()}}}")
        return Coalition(self.mask | 1 << i, self.n_players)

    def drop(self, i: int) -> "Coalition":
        if i not in self:
            raise IndexOutOfRange(f"player {i} not in coalition {{{self.key()}}}")
        return Coalition(self.mask & ~(1 << i), self.n_players)


def coalition_insert(c: Coalition, i: int) -> Coalition:
    """Return c with player i added; c is unchanged."""
    return c.insert(i)


def enumerate_subsets(
    n: int, excluded: int, limit: int | None = None
) -> Iterator[Coalition]:
    """All 2^(n-1) subsets of [n] \\ {excluded}, in ascending-bitmask order."""
    cap = enumeration_limit(limit)
    if n > cap:
        raise TooManyPlayers(f"n={n} exceeds exact-enumeration limit {cap}")
    if excluded < 0 or excluded >= n:
        raise IndexOutOfRange(f"excluded player {excluded} outside [0, {n})")
    others = [i for i in range(n) if i != excluded]
    for sub in range(1 << (n - 1)):
        mask = 0
        rest = sub
        t = 0
        while rest:
            if rest & 1:
                mask |= 1 << others[t]
            rest >>= 1
            t += 1
        yield Coalition(mask, n)


@dataclass(frozen=True)
class BernoulliParams:
    """Success probability of a binary payoff."""

    pi: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.pi <= 1.0):
            raise OutOfRange(f"Bernoulli pi must lie in [0, 1], got {self.pi}")


@dataclass(frozen=True)
class GaussianParams:
    """Mean and scale of a Gaussian payoff; sigma = 0 denotes a Dirac."""

    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.mu) or not math.isfinite(self.sigma):
            raise NonFinite(f"Gaussian parameters must be finite, got {self}")
        if self.sigma < 0.0:
            raise NegativeSigma(f"sigma must be nonnegative, got {self.sigma}")


@dataclass(frozen=True)
class CategoricalParams:
    """Natural parameters (logits) of a d-way categorical payoff."""

    theta: tuple[float, ...]

    def __post_init__(self) -> None:
        theta = tuple(float(t) for t in self.theta)
        object.__setattr__(self, "theta", theta)
        if len(theta) < 2:
            raise OutOfRange(f"categorical payoff needs d >= 2, got d={len(theta)}")
        if not all(math.isfinite(t) for t in theta):
            raise NonFinite("categorical natural parameters must be finite")

    @property
    def d(self) -> int:
        return len(self.theta)


PayoffParams = Union[BernoulliParams, GaussianParams, CategoricalParams]

_PARAM_CLASS = {
    "bernoulli": BernoulliParams,
    "gaussian": GaussianParams,
    "categorical": CategoricalParams,
}


class StochasticGame:
    """A stochastic cooperative game: a deterministic oracle Coalition -> PayoffParams.

    The oracle is memoized on the coalition bitmask (exact enumeration queries
    each coalition up to n times) and is safe to query concurrently.
    """

    def __init__(
        self,
        n_players: int,
        kind: str,
        oracle: Callable[[Coalition], PayoffParams],
        d: int | None = None,
    ) -> None:
        if kind not in FAMILIES:
            raise SpecValidation(f"unknown payoff family {kind!r}")
        if n_players < 1:
            raise SpecValidation(f"n_players must be positive, got {n_players}")
        if kind == "categorical":
            if d is None or d < 2:
                raise SpecValidation("categorical games need d >= 2")
        elif d is not None:
            raise SpecValidation(f"family {kind!r} takes no d")
        self.n_players = int(n_players)
        self.kind = kind
        self.d = int(d) if d is not None else None
        self._oracle = oracle
        self._cache: dict[int, PayoffParams] = {}
        self._lock = threading.Lock()

    def payoff(self, c: Coalition) -> PayoffParams:
        if c.n_players != self.n_players:
            raise SpecValidation(
                f"coalition over {c.n_players} players queried on {self.n_players}-player game"
            )
        with self._lock:
            hit = self._cache.get(c.mask)
        if hit is not None:
            return hit
        from .errors import DistvalError

        try:
            params = self._oracle(c)
        except DistvalError:
            raise
        except Exception as exc:  # noqa: BLE001 - diagnostics forwarded
            raise OracleFailure(f"payoff oracle failed on {{{c.key()}}}: {exc}") from exc
        expected = _PARAM_CLASS[self.kind]
        if not isinstance(params, expected):
            raise OracleFailure(
                f"oracle returned {type(params).__name__} for a {self.kind} game"
            )
        if self.kind == "categorical" and params.d != self.d:
            raise OracleFailure(
                f"oracle returned d={params.d} parameters, game declares d={self.d}"
            )
        with self._lock:
            return self._cache.setdefault(c.mask, params)


class MixtureGame:
    """Probabilistic mixture of two same-family games: v' with probability pi, else v''.

    Per-coalition marginal-contribution joints mix with weights (pi, 1 - pi);
    the wrapper makes that convolution property executable.
    """

    def __init__(self, pi: float, first, second) -> None:
        if not (0.0 <= pi <= 1.0):
            raise OutOfRange(f"mixture weight must lie in [0, 1], got {pi}")
        if first.kind != second.kind or first.n_players != second.n_players:
            raise SpecValidation("mixture components must share family and n_players")
        if first.kind == "categorical" and first.d != second.d:
            raise SpecValidation("categorical mixture components must share d")
        self.pi = float(pi)
        self.first = first
        self.second = second
        self.n_players = first.n_players
        self.kind = first.kind
        self.d = first.d if first.kind == "categorical" else None


Game = Union[StochasticGame, MixtureGame]


def query_payoff(g: StochasticGame, c: Coalition) -> PayoffParams:
    """Oracle access with the game-core determinism contract."""
    return g.payoff(c)
