"""Sampling laws and their population concentration values.

Three laws are supported: exact Pareto, lognormal, and finite mixtures of
Paretos. Every sampler draws from ``numpy.random.PCG64`` seeded with a
64-bit integer, so a ``(spec, n, seed)`` triple always yields the same
values on every platform.

Population quantities (``kappa_*``) are the share of the total expectation
held by the top ``q`` fraction of the population.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import DomainError, InconsistencyError, NumericError

__all__ = [
    "ParetoParams",
    "LognormalParams",
    "MixtureSpec",
    "DistributionSpec",
    "Sample",
    "spec_from_dict",
    "pareto_inverse_cdf",
    "make_rng",
    "draw",
    "sample",
    "theoretical_threshold",
    "kappa_pareto",
    "kappa_h_pareto",
    "kappa_cut_pareto",
    "kappa_second_derivative",
    "mixture_tail_probability",
    "mixture_threshold",
    "kappa_mixture",
]

SEED_MASK = (1 << 64) - 1


def _check_alpha(alpha: float) -> None:
    if not (alpha > 1.0) or not math.isfinite(alpha):
        raise DomainError(f"alpha must satisfy alpha > 1 (finite mean), got {alpha!r}")


def _check_q(q: float, *, closed_right: bool = False) -> None:
    ok = 0.0 < q <= 1.0 if closed_right else 0.0 < q < 1.0
    if not ok:
        interval = "(0, 1]" if closed_right else "(0, 1)"
        raise DomainError(f"q must lie in {interval}, got {q!r}")


@dataclass(frozen=True)
class ParetoParams:
    alpha: float
    x_min: float = 1.0

    def __post_init__(self):
        _check_alpha(self.alpha)
        if not (self.x_min > 0.0) or not math.isfinite(self.x_min):
            raise DomainError(f"x_min must be positive, got {self.x_min!r}")

    @property
    def mean(self) -> float:
        return self.alpha * self.x_min / (self.alpha - 1.0)

    def to_dict(self) -> dict:
        return {"law": "pareto", "alpha": self.alpha, "x_min": self.x_min}


@dataclass(frozen=True)
class LognormalParams:
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not (self.sigma > 0.0) or not math.isfinite(self.sigma):
            raise DomainError(f"sigma must be positive, got {self.sigma!r}")
        if not math.isfinite(self.mu):
            raise DomainError(f"mu must be finite, got {self.mu!r}")

    @property
    def mean(self) -> float:
        return math.exp(self.mu + 0.5 * self.sigma**2)

    def to_dict(self) -> dict:
        return {"law": "lognormal", "mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True)
class MixtureSpec:
    """Finite mixture of Pareto laws.

    Use :meth:`unit_mean` to build the usual form where every component has
    expectation one (``x_min = (alpha - 1) / alpha``).
    """

    weights: tuple[float, ...]
    components: tuple[ParetoParams, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "components", tuple(self.components))
        if not self.components:
            raise DomainError("a mixture needs at least one component")
        if len(self.weights) != len(self.components):
            raise DomainError(
                f"{len(self.weights)} weights for {len(self.components)} components"
            )
        if any(not (w >= 0.0) for w in self.weights):
            raise DomainError(f"mixture weights must be nonnegative, got {self.weights}")
        if abs(math.fsum(self.weights) - 1.0) > 1e-12:
            raise DomainError(f"mixture weights must sum to 1, got {math.fsum(self.weights)!r}")

    @classmethod
    def unit_mean(cls, weights: Sequence[float], alphas: Sequence[float]) -> "MixtureSpec":
        comps = []
        for a in alphas:
            _check_alpha(a)
            comps.append(ParetoParams(a, (a - 1.0) / a))
        return cls(tuple(weights), tuple(comps))

    @property
    def alphas(self) -> tuple[float, ...]:
        return tuple(c.alpha for c in self.components)

    @property
    def mean_alpha(self) -> float:
        return math.fsum(w * a for w, a in zip(self.weights, self.alphas))

    @property
    def mean(self) -> float:
        return math.fsum(w * c.mean for w, c in zip(self.weights, self.components))

    def to_dict(self) -> dict:
        return {
            "law": "mixture",
            "weights": list(self.weights),
            "components": [c.to_dict() for c in self.components],
        }


DistributionSpec = Union[ParetoParams, LognormalParams, MixtureSpec]


def spec_from_dict(d: dict) -> DistributionSpec:
    """Inverse of the ``to_dict`` methods."""
    law = d.get("law")
    if law == "pareto":
        return ParetoParams(float(d["alpha"]), float(d["x_min"]))
    if law == "lognormal":
        return LognormalParams(float(d["mu"]), float(d["sigma"]))
    if law == "mixture":
        return MixtureSpec(
            tuple(d["weights"]), tuple(spec_from_dict(c) for c in d["components"])
        )
    raise DomainError(f"unknown law {law!r}")


@dataclass(frozen=True, eq=False)
class Sample:
    values: np.ndarray
    seed: int | None = None
    spec: DistributionSpec | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 1:
            raise DomainError("a sample needs at least one value")
        if not np.all(v > 0.0):
            raise DomainError("sample values must be strictly positive")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size

    @property
    def n(self) -> int:
        return self.values.size

    def scaled(self, c: float) -> "Sample":
        return Sample(self.values * c, self.seed, None)


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator for a 64-bit seed (wrapped modulo 2**64)."""
    return np.random.Generator(np.random.PCG64(int(seed) & SEED_MASK))


def _open_uniform(rng: np.random.Generator, n: int) -> np.ndarray:
    # 1 - U with U in [0, 1) lies in (0, 1]; zero would map to an infinite draw
    return 1.0 - rng.random(n)


def pareto_inverse_cdf(u, alpha: float, x_min: float):
    """x_min * u**(-1/alpha), the quantile at survival probability ``u``."""
    return x_min * np.power(u, -1.0 / alpha)


def draw(spec: DistributionSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Raw draw of ``n`` values from ``spec`` using ``rng``; no Sample wrapper."""
    if isinstance(spec, ParetoParams):
        return pareto_inverse_cdf(_open_uniform(rng, n), spec.alpha, spec.x_min)
    if isinstance(spec, LognormalParams):
        return np.exp(spec.mu + spec.sigma * rng.standard_normal(n))
    if isinstance(spec, MixtureSpec):
        idx = rng.choice(len(spec.components), size=n, p=np.asarray(spec.weights))
        alphas = np.array(spec.alphas)[idx]
        x_mins = np.array([c.x_min for c in spec.components])[idx]
        return x_mins * np.power(_open_uniform(rng, n), -1.0 / alphas)
    raise DomainError(f"unsupported distribution spec {spec!r}")


def sample(spec: DistributionSpec, n: int, seed: int) -> Sample:
    if n < 1:
        raise DomainError(f"sample size must be at least 1, got {n}")
    return Sample(draw(spec, int(n), make_rng(seed)), int(seed) & SEED_MASK, spec)


def theoretical_threshold(params: ParetoParams, q: float) -> float:
    _check_q(q)
    return params.x_min * q ** (-1.0 / params.alpha)


def kappa_pareto(alpha: float, q: float) -> float:
    _check_alpha(alpha)
    _check_q(q, closed_right=True)
    return q ** ((alpha - 1.0) / alpha)


def kappa_h_pareto(params: ParetoParams, h: float) -> float:
    """Population share above a fixed threshold ``h``: (x_min/h)**(alpha-1)."""
    if not h > 0.0:
        raise DomainError(f"threshold must be positive, got {h!r}")
    if h <= params.x_min:
        return 1.0
    return (params.x_min / h) ** (params.alpha - 1.0)


def kappa_cut_pareto(alpha: float, lam: float, mean: float, q: float) -> float:
    """Top-``q`` share when only the tail above some cut-point is Pareto.

    The caller supplies the population ``mean``; the body of the law below
    the cut-point is never modelled. Raises ``InconsistencyError`` when the
    implied share exceeds one.
    """
    _check_alpha(alpha)
    _check_q(q)
    if not lam > 0.0:
        raise DomainError(f"scale lambda must be positive, got {lam!r}")
    if not mean > 0.0:
        raise DomainError(f"mean must be positive, got {mean!r}")
    value = _cut_pareto_formula(alpha, lam, mean, q)
    if value > 1.0:
        raise InconsistencyError(
            f"share {value:.6g} > 1: mean {mean!r} is too small for a tail with "
            f"alpha={alpha!r}, lambda={lam!r} at q={q!r}"
        )
    return value


def _cut_pareto_formula(alpha: float, lam: float, mean: float, q: float) -> float:
    return alpha / (alpha - 1.0) * (lam / mean) * q ** ((alpha - 1.0) / alpha)


def kappa_second_derivative(alpha: float, q: float) -> float:
    """Second derivative of ``kappa_pareto`` in alpha.

    With L = ln q, d2/dalpha2 q**(1 - 1/alpha) = q**(1 - 1/alpha) * L * (L - 2*alpha) / alpha**4.
    Both L and L - 2*alpha are negative for q < 1, so the result is positive.
    """
    _check_alpha(alpha)
    _check_q(q)
    log_q = math.log(q)
    return q ** ((alpha - 1.0) / alpha) * log_q * (log_q - 2.0 * alpha) / alpha**4


def mixture_tail_probability(mix: MixtureSpec, h: float) -> float:
    """P(X > h) for the mixture."""
    total = []
    for w, c in zip(mix.weights, mix.components):
        total.append(w if h < c.x_min else w * (c.x_min / h) ** c.alpha)
    return math.fsum(total)


def mixture_threshold(mix: MixtureSpec, q: float, rtol: float = 1e-12) -> float:
    """Solve P(X > h) = q for h by bisection.

    The bracket starts at the smallest ``x_min`` (tail mass one) and its upper
    end doubles until the tail mass falls to ``q`` or below.
    """
    _check_q(q)
    lo = min(c.x_min for c in mix.components)
    hi = 2.0 * lo
    for _ in range(2100):
        if mixture_tail_probability(mix, hi) <= q:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise NumericError(f"could not bracket the q={q!r} threshold")
    if not math.isfinite(hi):
        raise NumericError(f"threshold for q={q!r} overflows")
    # invariant: P(X > lo) > q >= P(X > hi)
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if mixture_tail_probability(mix, mid) > q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def kappa_mixture(mix: MixtureSpec, q: float) -> float:
    """Top-``q`` share of a Pareto mixture.

    Components whose ``x_min`` lies above the threshold contribute their whole
    mean. For unit-mean mixtures the denominator is exactly one.
    """
    _check_q(q, closed_right=True)
    if q == 1.0:
        return 1.0
    h = mixture_threshold(mix, q)
    parts = []
    for w, c in zip(mix.weights, mix.components):
        if h <= c.x_min:
            parts.append(w * c.mean)
        else:
            parts.append(w * c.alpha * c.x_min**c.alpha * h ** (1.0 - c.alpha) / (c.alpha - 1.0))
    return min(1.0, math.fsum(parts) / mix.mean)
