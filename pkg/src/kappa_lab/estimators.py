"""Sample-based concentration estimators and tail-exponent fits."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distributions import Sample, _cut_pareto_formula, kappa_pareto
from .errors import DomainError, ResolutionError

__all__ = [
    "EstimatorKind",
    "FitMethod",
    "KappaEstimate",
    "TailFit",
    "top_k_count",
    "top_share",
    "empirical_threshold",
    "kappa_hat_q",
    "kappa_hat_h",
    "kappa_h_second_derivative",
    "default_hill_k",
    "hill_estimator",
    "pareto_mle",
    "plugin_kappa",
    "plugin_kappa_from_sample",
    "stochastic_alpha_kappa",
    "min_alpha_kappa",
]


class EstimatorKind(str, enum.Enum):
    NAIVE_Q = "naive_q"
    FROZEN_H = "frozen_h"
    PLUG_IN = "plug_in"
    STOCHASTIC_ALPHA = "stochastic_alpha"
    MIN_ALPHA = "min_alpha"


class FitMethod(str, enum.Enum):
    HILL = "hill"
    PARETO_MLE = "pareto_mle"


@dataclass(frozen=True)
class KappaEstimate:
    """One estimator output.

    ``threshold`` is the empirical cut ĥ(q) for the naive estimator, the fixed
    ``h`` for the frozen-threshold one, and the fitted h(q) for plug-in. The
    model-based kinds (stochastic and minimum exponent) carry no sample, so
    ``threshold`` and ``n`` are ``None`` there. ``clamped`` is set when a
    plug-in value fell outside [0, 1] and was clipped.
    """

    value: float
    threshold: float | None
    q: float | None
    n: int | None
    kind: EstimatorKind
    clamped: bool = False

    def __post_init__(self):
        if not (0.0 <= self.value <= 1.0):
            raise DomainError(f"estimate {self.value!r} outside [0, 1]")
        if self.n is not None and self.n < 1:
            raise DomainError(f"sample size must be >= 1, got {self.n}")


@dataclass(frozen=True)
class TailFit:
    alpha_hat: float
    lambda_hat: float
    k_used: int
    method: FitMethod
    n: int

    def __post_init__(self):
        if not self.alpha_hat > 0.0:
            raise DomainError(f"fitted exponent must be positive, got {self.alpha_hat!r}")
        if not 1 <= self.k_used <= self.n:
            raise DomainError(f"k_used={self.k_used} outside [1, n={self.n}]")


def _values(sample) -> np.ndarray:
    if isinstance(sample, Sample):
        return sample.values
    return Sample(sample).values


def _check_q(q: float) -> None:
    if not 0.0 < q < 1.0:
        raise DomainError(f"q must lie in (0, 1), got {q!r}")


def top_k_count(n: int, q: float) -> int:
    """k = floor(q*n), guarded against q*n landing a hair below an integer."""
    _check_q(q)
    k = math.floor(q * n)
    if k + 1 <= q * n * (1.0 + 1e-12):
        k += 1
    if k < 1:
        raise ResolutionError(
            f"quantile below resolution: q*n = {q * n:.6g} < 1 (q={q!r}, n={n})"
        )
    return k


def top_share(x: np.ndarray, k: int) -> tuple[float, float]:
    """Share of the ``k`` largest values in the total, plus the (k+1)-th largest.

    Uses a single partial selection; the k selected values are then sorted
    ascending before summation so the result does not depend on the order the
    selection happens to leave them in. Requires ``1 <= k < len(x)``.
    """
    n = x.size
    part = np.partition(x, n - k - 1)
    top = np.sort(part[n - k:])
    return float(top.sum() / x.sum()), float(part[n - k - 1])


def empirical_threshold(sample, q: float) -> float:
    """ĥ(q): smallest observed h with at most q*n values strictly above it.

    This is the ``n - floor(q*n)``-th smallest value; with ties, fewer than
    floor(q*n) values may exceed it.
    """
    x = _values(sample)
    k = top_k_count(x.size, q)
    if k >= x.size:
        raise ResolutionError(f"q={q!r} leaves no value below the threshold (n={x.size})")
    return float(np.partition(x, x.size - k - 1)[x.size - k - 1])


def kappa_hat_q(sample, q: float) -> KappaEstimate:
    x = _values(sample)
    k = top_k_count(x.size, q)
    if k >= x.size:
        raise ResolutionError(f"q={q!r} leaves no value below the threshold (n={x.size})")
    value, thr = top_share(x, k)
    return KappaEstimate(value, thr, q, x.size, EstimatorKind.NAIVE_Q)


def kappa_hat_h(sample, h: float) -> KappaEstimate:
    if not h > 0.0:
        raise DomainError(f"threshold h must be positive, got {h!r}")
    x = _values(sample)
    value = float(x[x > h].sum() / x.sum())
    return KappaEstimate(value, float(h), None, x.size, EstimatorKind.FROZEN_H)


def kappa_h_second_derivative(sample, h: float, y: float) -> float:
    """d²/dy² of the frozen-threshold share after appending observation ``y``.

    With A the sum above ``h`` and S the total: above the threshold the share
    is 1 - (S - A)/(S + y), below it A/(S + y).
    """
    x = _values(sample)
    s = float(x.sum())
    a = float(x[x > h].sum())
    if y > h:
        return -2.0 * (s - a) / (s + y) ** 3
    return 2.0 * a / (s + y) ** 3


def default_hill_k(n: int) -> int:
    """floor(n**(2/3)), kept inside [2, n-1]."""
    return max(2, min(n - 1, int(math.floor(n ** (2.0 / 3.0) + 1e-9))))


def hill_estimator(sample, k: int | None = None) -> TailFit:
    x = _values(sample)
    n = x.size
    if k is None:
        k = default_hill_k(n)
    if not 2 <= k < n:
        raise DomainError(f"Hill needs 2 <= k < n, got k={k}, n={n}")
    part = np.partition(x, n - k - 1)
    anchor = part[n - k - 1]
    logs = np.log(part[n - k:] / anchor)
    denom = float(np.sort(logs).sum())
    if not denom > 0.0:
        raise DomainError("top order statistics are all tied; Hill estimate undefined")
    alpha_hat = k / denom
    lambda_hat = float(anchor) * (k / n) ** (1.0 / alpha_hat)
    return TailFit(alpha_hat, lambda_hat, k, FitMethod.HILL, n)


def pareto_mle(sample, x_min: float) -> TailFit:
    if not x_min > 0.0:
        raise DomainError(f"x_min must be positive, got {x_min!r}")
    x = _values(sample)
    if np.any(x < x_min):
        raise DomainError(f"value {float(x.min())!r} lies below x_min={x_min!r}")
    denom = float(np.log(x / x_min).sum())
    if not denom > 0.0:
        raise DomainError("all values equal x_min; exponent is unbounded")
    return TailFit(x.size / denom, float(x_min), x.size, FitMethod.PARETO_MLE, x.size)


def plugin_kappa(fit: TailFit, mean_hat: float, q: float) -> KappaEstimate:
    """Closed-form share evaluated at fitted (alpha, lambda) and estimated mean.

    Values outside [0, 1] are clipped and flagged rather than rejected.
    """
    if not fit.alpha_hat > 1.0:
        raise DomainError(
            f"infinite-mean fit: alpha_hat={fit.alpha_hat:.6g} <= 1, share undefined"
        )
    _check_q(q)
    if not mean_hat > 0.0:
        raise DomainError(f"mean_hat must be positive, got {mean_hat!r}")
    raw = _cut_pareto_formula(fit.alpha_hat, fit.lambda_hat, mean_hat, q)
    value = min(max(raw, 0.0), 1.0)
    threshold = fit.lambda_hat * q ** (-1.0 / fit.alpha_hat)
    return KappaEstimate(value, threshold, q, fit.n, EstimatorKind.PLUG_IN, clamped=value != raw)


def plugin_kappa_from_sample(sample, q: float, k: int | None = None) -> KappaEstimate:
    """Hill fit on the top ``k`` values, sample mean as the mean estimate."""
    x = _values(sample)
    return plugin_kappa(hill_estimator(x, k), float(x.mean()), q)


def stochastic_alpha_kappa(
    alphas: Sequence[float], weights: Sequence[float], q: float
) -> KappaEstimate:
    """Share averaged over a distribution of plausible exponents."""
    if len(alphas) == 0:
        raise DomainError("need at least one exponent")
    if len(alphas) != len(weights):
        raise DomainError(f"{len(alphas)} exponents but {len(weights)} weights")
    if any(w < 0.0 for w in weights) or abs(math.fsum(weights) - 1.0) > 1e-12:
        raise DomainError(f"weights must be a probability vector, got {list(weights)}")
    _check_q(q)
    value = math.fsum(w * kappa_pareto(a, q) for a, w in zip(alphas, weights))
    return KappaEstimate(min(value, 1.0), None, q, None, EstimatorKind.STOCHASTIC_ALPHA)


def min_alpha_kappa(alphas: Sequence[float], q: float) -> KappaEstimate:
    if len(alphas) == 0:
        raise DomainError("need at least one exponent")
    for a in alphas:
        kappa_pareto(a, 0.5)  # domain check on every exponent
    _check_q(q)
    return KappaEstimate(kappa_pareto(min(alphas), q), None, q, None, EstimatorKind.MIN_ALPHA)
