"""Reproducible Monte Carlo engine and the concentration-bias experiments.

Every run ``i`` of an experiment draws from its own generator seeded with
``derive_run_seed(master_seed, i)``. Runs are split into contiguous blocks
and may execute on several threads, but each result lands in slot ``i`` of a
preallocated array, so summaries are bit-identical for any thread count.
Only one sample per worker is alive at a time.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .distributions import (
    DistributionSpec,
    MixtureSpec,
    ParetoParams,
    draw,
    kappa_h_pareto,
    kappa_mixture,
    kappa_pareto,
    make_rng,
    theoretical_threshold,
)
from .errors import DomainError, MonteCarloError
from .estimators import top_k_count, top_share

__all__ = [
    "REFERENCE_KAPPA",
    "REFERENCE_BIAS_TABLE",
    "reference_bias_points",
    "McSummary",
    "SuperAddRecord",
    "ScalingFit",
    "CorrRecord",
    "ConvergenceRecord",
    "MixtureBiasRecord",
    "derive_run_seed",
    "derive_run_seeds",
    "resolve_threads",
    "run_parallel",
    "mc_kappa_bias",
    "bias_table",
    "mc_superadditivity",
    "mc_monotone_convergence",
    "fit_bias_scaling",
    "mc_kappa_sum_dependence",
    "mc_mixture_bias",
]

# Published top-1% share for alpha=1.1 Pareto and the naive estimator's
# Monte Carlo mean / median / std at each sample size.
REFERENCE_KAPPA = 0.657933
REFERENCE_BIAS_TABLE = (
    (10**3, 0.405235, 0.367698, 0.160244),
    (10**4, 0.485916, 0.458449, 0.117917),
    (10**5, 0.539028, 0.516415, 0.0931362),
    (10**6, 0.581384, 0.555997, 0.0853593),
    (10**7, 0.591506, 0.575262, 0.0601528),
    (10**8, 0.606513, 0.593667, 0.0461397),
)


def reference_bias_points(kappa: float = REFERENCE_KAPPA) -> list[tuple[int, float]]:
    """(n, kappa - mean) pairs from the reference table."""
    return [(n, kappa - mean) for n, mean, _, _ in REFERENCE_BIAS_TABLE]


Sampler = Callable[[DistributionSpec, int, np.random.Generator], np.ndarray]

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _splitmix64(z: np.ndarray) -> np.ndarray:
    # finalizer of SplitMix64 (Steele, Lea, Flood 2014); a bijection on uint64
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


def _as_u64(v) -> np.ndarray:
    if isinstance(v, (int, np.integer)):
        return np.array(int(v) & 0xFFFFFFFFFFFFFFFF, dtype=np.uint64)
    return np.asarray(v, dtype=np.uint64)


def derive_run_seeds(master_seeds, run_indices) -> np.ndarray:
    """Vectorised :func:`derive_run_seed`; arguments broadcast against each other.

    seed = mix(mix(master) + GOLDEN * (index + 1)) modulo 2**64, where mix is
    the SplitMix64 finalizer. For a fixed master the map is injective in the
    index, and for a fixed index it is injective in the master, because every
    step is a bijection on 64-bit words.
    """
    master = _as_u64(master_seeds)
    idx = _as_u64(run_indices)
    with np.errstate(over="ignore"):
        return _splitmix64(_splitmix64(master) + _GOLDEN * (idx + np.uint64(1)))


def derive_run_seed(master_seed: int, run_index: int) -> int:
    return int(derive_run_seeds(master_seed, run_index))


def resolve_threads(threads: int | None) -> int:
    """0 or None means one worker per CPU."""
    if threads is None or threads == 0:
        return os.cpu_count() or 1
    if threads < 0:
        raise DomainError(f"thread count must be >= 0, got {threads}")
    return int(threads)


def run_parallel(
    task: Callable[[int], Sequence[float] | float],
    runs: int,
    width: int,
    threads: int | None = 1,
    context: str = "",
) -> np.ndarray:
    """Evaluate ``task(i)`` for i in range(runs) into a (runs, width) array.

    Blocks of consecutive run indices go to a thread pool; row ``i`` always
    holds ``task(i)`` whatever the thread count. A failing run raises
    :class:`MonteCarloError` naming the run index and ``context``.
    """
    out = np.empty((runs, width), dtype=np.float64)
    workers = min(resolve_threads(threads), runs)

    def work(lo: int, hi: int) -> None:
        for i in range(lo, hi):
            try:
                out[i] = task(i)
            except Exception as exc:
                raise MonteCarloError(f"run {i} failed ({context}): {exc}") from exc

    if workers <= 1:
        work(0, runs)
        return out
    bounds = np.linspace(0, runs, 4 * workers + 1).astype(int)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(work, lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        for f in futures:
            f.result()
    return out


def _context(spec, n) -> str:
    label = spec.to_dict() if hasattr(spec, "to_dict") else spec
    return f"spec={label!r}, n={n}"


@dataclass(frozen=True)
class McSummary:
    """Summary of one estimator across independent runs.

    ``frozen_mean`` is the mean of the fixed-threshold estimator at the
    population threshold h(q); it is only filled in for Pareto specs.
    """

    mean: float
    median: float
    std: float
    runs: int
    n: int
    q: float
    frozen_mean: float | None = None

    @property
    def std_error(self) -> float:
        return self.std / math.sqrt(self.runs)


def _std(vals: np.ndarray) -> float:
    # identical values must give exactly 0, which the two-pass formula can miss
    if vals.min() == vals.max():
        return 0.0
    return float(vals.std(ddof=1))


def _check_runs(runs: int, minimum: int = 2) -> None:
    if runs < minimum:
        raise DomainError(f"need at least {minimum} runs, got {runs}")


def mc_kappa_bias(
    spec: DistributionSpec,
    q: float,
    n: int,
    runs: int,
    master_seed: int,
    threads: int | None = 1,
    sampler: Sampler = draw,
) -> McSummary:
    _check_runs(runs)
    k = top_k_count(n, q)
    if k >= n:
        raise DomainError(f"q={q!r} leaves no value below the threshold at n={n}")
    h = theoretical_threshold(spec, q) if isinstance(spec, ParetoParams) else None

    def task(i):
        x = sampler(spec, n, make_rng(derive_run_seed(master_seed, i)))
        share, _ = top_share(x, k)
        frozen = float(x[x > h].sum() / x.sum()) if h is not None else math.nan
        return share, frozen

    res = run_parallel(task, runs, 2, threads, _context(spec, n))
    vals = res[:, 0]
    return McSummary(
        mean=float(vals.mean()),
        median=float(np.median(vals)),
        std=_std(vals),
        runs=runs,
        n=n,
        q=q,
        frozen_mean=float(res[:, 1].mean()) if h is not None else None,
    )


def bias_table(
    spec: DistributionSpec,
    q: float,
    sizes: Sequence[int],
    runs: int | Sequence[int],
    master_seed: int,
    threads: int | None = 1,
) -> list[McSummary]:
    """:func:`mc_kappa_bias` over a grid of sample sizes.

    Each row is seeded by ``derive_run_seed(master_seed, n)``, so a row only
    depends on its own ``n`` and not on its position in the grid.
    """
    if isinstance(runs, int):
        runs = [runs] * len(sizes)
    if len(runs) != len(sizes):
        raise DomainError(f"{len(runs)} run counts for {len(sizes)} sample sizes")
    return [
        mc_kappa_bias(spec, q, n, r, derive_run_seed(master_seed, n), threads)
        for n, r in zip(sizes, runs)
    ]


@dataclass(frozen=True)
class SuperAddRecord:
    """Both sides of the aggregation inequality.

    ``weights`` are n_i/n when every part has the same law, else the Monte
    Carlo means of S_i/S. ``gap`` is the mean of the per-run paired
    differences, which equals ``e_kappa_full - weighted_avg_parts``.
    """

    e_kappa_full: float
    weighted_avg_parts: float
    gap: float
    z_score: float
    std_error: float
    part_means: tuple[float, ...]
    weights: tuple[float, ...]
    sizes: tuple[int, ...]
    runs: int
    q: float


def mc_superadditivity(
    specs: Sequence[DistributionSpec],
    sizes: Sequence[int],
    q: float,
    runs: int,
    master_seed: int,
    threads: int | None = 1,
    sampler: Sampler = draw,
) -> SuperAddRecord:
    specs = list(specs)
    sizes = [int(s) for s in sizes]
    if len(specs) != len(sizes) or not specs:
        raise DomainError("specs and sizes must be nonempty and of equal length")
    _check_runs(runs)
    ks = [top_k_count(s, q) for s in sizes]
    total = sum(sizes)
    k_full = top_k_count(total, q)
    m = len(sizes)
    for s, k in zip(sizes + [total], ks + [k_full]):
        if k >= s:
            raise DomainError(f"q={q!r} leaves no value below the threshold at n={s}")

    def task(i):
        rng = make_rng(derive_run_seed(master_seed, i))
        parts = [sampler(sp, s, rng) for sp, s in zip(specs, sizes)]
        merged = np.concatenate(parts)
        s_all = merged.sum()
        row = [top_share(merged, k_full)[0]]
        row += [top_share(p, k)[0] for p, k in zip(parts, ks)]
        row += [p.sum() / s_all for p in parts]
        return row

    res = run_parallel(task, runs, 1 + 2 * m, threads, _context(specs, sizes))
    full = res[:, 0]
    part_k = res[:, 1 : 1 + m]
    shares = res[:, 1 + m :]
    if all(sp == specs[0] for sp in specs):
        w = np.array(sizes, dtype=np.float64) / total
    else:
        w = shares.mean(axis=0)
    if m == 1:
        w = np.ones(1)
    diffs = full - part_k @ w
    gap = float(diffs.mean())
    se = _std(diffs) / math.sqrt(runs)
    z = gap / se if se > 0.0 else 0.0
    part_means = part_k.mean(axis=0)
    return SuperAddRecord(
        e_kappa_full=float(full.mean()),
        weighted_avg_parts=float(part_means @ w),
        gap=gap,
        z_score=float(z),
        std_error=se,
        part_means=tuple(float(v) for v in part_means),
        weights=tuple(float(v) for v in w),
        sizes=tuple(sizes),
        runs=runs,
        q=q,
    )


@dataclass(frozen=True)
class ConvergenceRecord:
    """Mean frozen-threshold share per sample size.

    ``points`` holds (n, mean, std_error). ``kappa_h`` is the population value
    when the law has a closed form, otherwise ``None``.
    """

    h: float
    runs: int
    points: tuple[tuple[int, float, float], ...]
    kappa_h: float | None

    @property
    def means(self) -> list[float]:
        return [p[1] for p in self.points]


def _population_kappa_h(spec, h: float) -> float | None:
    if isinstance(spec, ParetoParams):
        return kappa_h_pareto(spec, h)
    if isinstance(spec, MixtureSpec):
        parts = []
        for w, c in zip(spec.weights, spec.components):
            parts.append(w * kappa_h_pareto(c, h) * c.mean)
        return math.fsum(parts) / spec.mean
    return None


def mc_monotone_convergence(
    spec: DistributionSpec,
    h: float,
    sizes: Sequence[int],
    runs: int,
    master_seed: int,
    threads: int | None = 1,
    sampler: Sampler = draw,
) -> ConvergenceRecord:
    sizes = [int(s) for s in sizes]
    if len(sizes) < 3 or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise DomainError(f"need at least 3 strictly increasing sizes, got {sizes}")
    if not h > 0.0:
        raise DomainError(f"threshold h must be positive, got {h!r}")
    _check_runs(runs)
    points = []
    for n in sizes:
        seed = derive_run_seed(master_seed, n)

        def task(i, n=n, seed=seed):
            x = sampler(spec, n, make_rng(derive_run_seed(seed, i)))
            return x[x > h].sum() / x.sum()

        vals = run_parallel(task, runs, 1, threads, _context(spec, n))[:, 0]
        points.append((n, float(vals.mean()), _std(vals) / math.sqrt(runs)))
    return ConvergenceRecord(h, runs, tuple(points), _population_kappa_h(spec, h))


@dataclass(frozen=True)
class ScalingFit:
    """Log-log least-squares fit of bias = c * n**(-exponent)."""

    c_hat: float
    exponent_hat: float
    r_squared: float
    points: tuple[tuple[float, float], ...]

    def predict(self, n: float) -> float:
        return self.c_hat * n ** (-self.exponent_hat)


def fit_bias_scaling(points: Sequence[tuple[float, float]]) -> ScalingFit:
    pts = [(float(n), float(b)) for n, b in points]
    if len(pts) < 3:
        raise DomainError(f"need at least 3 (n, bias) points, got {len(pts)}")
    if len({n for n, _ in pts}) != len(pts):
        raise DomainError("sample sizes must be distinct")
    bad = [(n, b) for n, b in pts if not b > 0.0]
    if bad:
        raise DomainError(f"nonpositive bias at {bad}: the estimator overshot the population value")
    if any(not n > 0.0 for n, _ in pts):
        raise DomainError("sample sizes must be positive")
    x = np.log([n for n, _ in pts])
    y = np.log([b for _, b in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0.0 else 1.0
    return ScalingFit(float(math.exp(intercept)), float(-slope), r2, tuple(pts))


@dataclass(frozen=True)
class CorrRecord:
    """Dependence between the naive estimate and the sample total.

    ``bucket_means`` rows are (decile, lowest total, highest total, mean
    estimate, run count), deciles ordered by total. ``degenerate`` is set when
    either series is constant, in which case both correlations are 0.
    """

    pearson: float
    spearman: float
    spearman_z: float
    pearson_z: float
    bucket_means: tuple[tuple[int, float, float, float, int], ...]
    runs: int
    n: int
    q: float
    degenerate: bool = False


def _fisher_z(r: float, m: int) -> float:
    r = min(max(r, -1.0 + 1e-15), 1.0 - 1e-15)
    return math.atanh(r) * math.sqrt(max(m - 3, 1))


def mc_kappa_sum_dependence(
    spec: DistributionSpec,
    q: float,
    n: int,
    runs: int,
    master_seed: int,
    threads: int | None = 1,
    buckets: int = 10,
    sampler: Sampler = draw,
) -> CorrRecord:
    _check_runs(runs, 100)
    if buckets < 2:
        raise DomainError(f"need at least 2 buckets, got {buckets}")
    k = top_k_count(n, q)

    def task(i):
        x = sampler(spec, n, make_rng(derive_run_seed(master_seed, i)))
        return top_share(x, k)[0], x.sum()

    res = run_parallel(task, runs, 2, threads, _context(spec, n))
    kap, tot = res[:, 0], res[:, 1]
    degenerate = bool(np.ptp(kap) == 0.0 or np.ptp(tot) == 0.0)
    if degenerate:
        pearson = spearman = 0.0
    else:
        pearson = float(stats.pearsonr(kap, tot)[0])
        spearman = float(stats.spearmanr(kap, tot)[0])
    order = np.argsort(tot, kind="stable")
    rows = []
    for b, idx in enumerate(np.array_split(order, buckets)):
        rows.append((b + 1, float(tot[idx].min()), float(tot[idx].max()), float(kap[idx].mean()), int(idx.size)))
    return CorrRecord(
        pearson=pearson,
        spearman=spearman,
        spearman_z=0.0 if degenerate else _fisher_z(spearman, runs),
        pearson_z=0.0 if degenerate else _fisher_z(pearson, runs),
        bucket_means=tuple(rows),
        runs=runs,
        n=n,
        q=q,
        degenerate=degenerate,
    )


@dataclass(frozen=True)
class MixtureBiasRecord:
    """Monte Carlo naive estimate on a mixture next to the population values.

    ``weighted_component_kappa`` is sum(w_i * kappa(alpha_i)) and
    ``mean_alpha_kappa`` is kappa at the weighted mean exponent.
    """

    mc_mean: float
    mc_std_error: float
    population_mixture_kappa: float
    weighted_component_kappa: float
    mean_alpha_kappa: float
    runs: int
    n: int
    q: float


def mc_mixture_bias(
    mix: MixtureSpec,
    q: float,
    n: int,
    runs: int,
    master_seed: int,
    threads: int | None = 1,
) -> MixtureBiasRecord:
    summary = mc_kappa_bias(mix, q, n, runs, master_seed, threads)
    weighted = math.fsum(w * kappa_pareto(a, q) for w, a in zip(mix.weights, mix.alphas))
    return MixtureBiasRecord(
        mc_mean=summary.mean,
        mc_std_error=summary.std_error,
        population_mixture_kappa=kappa_mixture(mix, q),
        weighted_component_kappa=weighted,
        mean_alpha_kappa=kappa_pareto(mix.mean_alpha, q),
        runs=runs,
        n=n,
        q=q,
    )
