"""Closed-form distributions of a single stochastic marginal contribution.

Per payoff family, the joint law of (v(S u i), v(S)) under shared noise
collapses to a small analytic object:

* Bernoulli: a three-point PMF on {+1, -1, 0} where at most one of the two
  signed atoms carries mass (coupled uniform threshold noise).
* Gaussian: a single Gaussian N(mu_with - mu_without, |sigma_with - sigma_without|^2)
  plus a sign tracker for the direction of the scale change.
* Categorical: the full d x d joint of (argmax(alpha + eps), argmax(beta + eps))
  under shared Gumbel noise, computed in O(d^2) total via prefix/suffix
  log-sums. In the nu-sorted indexing the joint is upper triangular.

All log-sums are max-shifted; nonnegative per-index contributions c_k are
accumulated with compensated summation so partial sums never suffer the
cancellation a difference of prefix sums would.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NegativeSigma, NonFinite, NormalizationFailure, OutOfRange

_SUM_TOL = 1e-9
_CLAMP_TOL = -1e-15


@dataclass(frozen=True)
class BernoulliMC:
    """PMF of one Bernoulli marginal contribution over {+1, -1, 0}."""

    q_plus: float
    q_minus: float
    q_zero: float


@dataclass(frozen=True)
class GaussianMC:
    """One Gaussian marginal contribution plus the variance-direction tracker."""

    mean: float
    sd: float
    sign_tracker: int


@dataclass(frozen=True)
class CategoricalMC:
    """Joint law of (with-i class, without-i class) in the original indexing.

    joint[r, s] = P(v(S u i) = r, v(S) = s). Row sums are softmax(alpha),
    column sums softmax(beta); total mass is 1.
    """

    joint: np.ndarray

    def __post_init__(self) -> None:
        self.joint.setflags(write=False)

    @property
    def d(self) -> int:
        return self.joint.shape[0]

    def no_change(self) -> float:
        return float(np.trace(self.joint))


def bernoulli_mc(pi_with: float, pi_without: float) -> BernoulliMC:
    """Marginal contribution of coupled Bernoulli payoffs (shared uniform noise)."""
    for name, p in (("pi_with", pi_with), ("pi_without", pi_without)):
        if not (0.0 <= p <= 1.0):
            raise OutOfRange(f"{name} must lie in [0, 1], got {p}")
    m = min(pi_with, pi_without)
    big = max(pi_with, pi_without)
    # 1 - (M - m) keeps q_zero exactly 1 whenever the two parameters coincide.
    return BernoulliMC(pi_with - m, pi_without - m, 1.0 - (big - m))


def gaussian_mc(
    mu_with: float, sigma_with: float, mu_without: float, sigma_without: float
) -> GaussianMC:
    """Marginal contribution of coupled Gaussian payoffs (shared standard normal)."""
    if sigma_with < 0.0 or sigma_without < 0.0:
        raise NegativeSigma(
            f"sigmas must be nonnegative, got {sigma_with}, {sigma_without}"
        )
    diff = sigma_with - sigma_without
    sign = 0 if diff == 0.0 else (1 if diff > 0.0 else -1)
    return GaussianMC(mu_with - mu_without, abs(diff), sign)


def _sigmoid(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _sigma_diff(p: float, q: float) -> float:
    """sigma(p) - sigma(q) for p >= q, stable for large same-sign arguments.

    Uses sigma(p) - sigma(q) = sigma(p) * sigma(-q) * (1 - e^(q-p)); the
    product form never cancels, and expm1 keeps the last factor exact for
    nearly equal arguments (ties give exactly 0).
    """
    return _sigmoid(p) * _sigmoid(-q) * -math.expm1(q - p)


def nu_sort_order(alpha, beta) -> np.ndarray:
    """Stable order of classes by descending nu = alpha - beta (ties keep index order)."""
    nu = np.asarray(alpha, dtype=float) - np.asarray(beta, dtype=float)
    return np.argsort(-nu, kind="stable")


def _validated(alpha, beta) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(alpha, dtype=float)
    b = np.asarray(beta, dtype=float)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise OutOfRange(f"alpha and beta must be equal-length vectors, got {a.shape}, {b.shape}")
    if a.size < 2:
        raise OutOfRange(f"need d >= 2 classes, got d={a.size}")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise NonFinite("alpha and beta must be finite")
    return a, b


def _sorted_pieces(alpha, beta):
    """Shared setup: gauge-shifted, nu-sorted parameters and their log-sums."""
    a_raw, b_raw = _validated(alpha, beta)
    # Softmax gauge: shifting alpha or beta by a constant leaves the joint
    # unchanged, so shift both to max 0 and keep every exp() bounded.
    a0 = a_raw - a_raw.max()
    b0 = b_raw - b_raw.max()
    order = np.argsort(-(a0 - b0), kind="stable")
    a = a0[order]
    b = b0[order]
    nu = a - b
    d = a.size
    abar = _prefix_logsumexp(a)          # abar[k] = lse(a[0..k])
    bbar = _suffix_logsumexp(b)          # bbar[k] = lse(b[k+1..d-1]), k < d-1
    gaps = bbar - abar[: d - 1]
    sig_diff = np.array(
        [_sigma_diff(gaps[k] + nu[k], gaps[k] + nu[k + 1]) for k in range(d - 1)]
    )
    return order, a, b, nu, abar, bbar, sig_diff


def _diagonal(a, b, abar, bbar) -> np.ndarray:
    """No-change probabilities 1 / (e^(abar_r - a_r) + e^(bbar_r - b_r)).

    Evaluated as exp(-logsumexp(x, y)); both the two-factor sigmoid form and
    the raw reciprocal can overflow for large in-vector spreads.
    """
    d = a.size
    diag = np.empty(d)
    for r in range(d - 1):
        x = abar[r] - a[r]
        y = bbar[r] - b[r]
        m = x if x > y else y
        diag[r] = math.exp(-(m + math.log(math.exp(x - m) + math.exp(y - m))))
    diag[d - 1] = math.exp(a[d - 1] - abar[d - 1])
    return diag


def categorical_mc(alpha, beta) -> CategoricalMC:
    """Joint distribution of coupled categorical payoffs under shared Gumbel noise."""
    order, a, b, nu, abar, bbar, sig_diff = _sorted_pieces(alpha, beta)
    d = a.size
    with np.errstate(over="ignore", invalid="ignore"):
        c = np.exp(-bbar - abar[: d - 1]) * sig_diff
    # A zero sigma-difference (tie, or honest underflow) caps every entry
    # contribution of this k below ~1e-323, since a_r <= abar_k and
    # b_s <= bbar_k; the factored inf * 0 is then exactly 0. A genuine
    # factor overflow against positive mass stays non-finite and surfaces
    # as a NormalizationFailure below.
    c[sig_diff == 0.0] = 0.0
    q = np.zeros((d, d))
    for r in range(d - 1):
        a_r = a[r]
        run = 0.0
        comp = 0.0
        for s in range(r + 1, d):
            # Kahan-compensated running sum of the nonnegative c_k.
            y = c[s - 1] - comp
            t = run + y
            comp = (t - run) - y
            run = t
            q[r, s] = math.exp(a_r + b[s]) * run
    q[np.diag_indices(d)] = _diagonal(a, b, abar, bbar)
    np.maximum(q, 0.0, out=q)
    total = float(q.sum())
    if not math.isfinite(total) or abs(total - 1.0) > _SUM_TOL:
        raise NormalizationFailure(
            f"categorical joint mass {total!r} deviates from 1 beyond {_SUM_TOL}"
        )
    q /= total
    out = np.zeros((d, d))
    out[np.ix_(order, order)] = q
    return CategoricalMC(out)


def categorical_no_change(alpha, beta) -> float:
    """P(v(S u i) = v(S)) without materializing off-diagonal entries; O(d log d)."""
    order, a, b, nu, abar, bbar, sig_diff = _sorted_pieces(alpha, beta)
    diag = float(np.sum(_diagonal(a, b, abar, bbar)))
    # Total off-diagonal mass sums to sum_k sig_diff_k: each c_k contributes
    # exp(abar_k + bbar_k) across the pairs (r <= k < s) straddling it.
    total = diag + float(np.sum(sig_diff))
    if not math.isfinite(total) or abs(total - 1.0) > _SUM_TOL:
        raise NormalizationFailure(
            f"categorical joint mass {total!r} deviates from 1 beyond {_SUM_TOL}"
        )
    return diag / total


def _prefix_logsumexp(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    running_max = -math.inf
    running_sum = 0.0
    for k, v in enumerate(x):
        if v > running_max:
            running_sum = running_sum * math.exp(running_max - v) + 1.0 if running_max > -math.inf else 1.0
            running_max = v
        else:
            running_sum += math.exp(v - running_max)
        out[k] = running_max + math.log(running_sum)
    return out


def _suffix_logsumexp(x: np.ndarray) -> np.ndarray:
    d = x.size
    out = np.empty(d - 1)
    running_max = -math.inf
    running_sum = 0.0
    for k in range(d - 1, 0, -1):
        v = x[k]
        if v > running_max:
            running_sum = running_sum * math.exp(running_max - v) + 1.0 if running_max > -math.inf else 1.0
            running_max = v
        else:
            running_sum += math.exp(v - running_max)
        out[k - 1] = running_max + math.log(running_sum)
    return out


def softmax(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    z = x - x.max()
    e = np.exp(z)
    return e / e.sum()
