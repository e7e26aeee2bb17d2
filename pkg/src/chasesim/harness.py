"""Deterministic Monte Carlo harness: replica execution, escape-probability
sweeps, Wilson intervals, curve-crossing estimation, and a two-sample
chi-squared comparator.

Reproducibility contract: every replica's generator is seeded from the
entropy tuple (base seed, experiment context, replica index), so results
are identical no matter how replicas are scheduled across workers, and
adding grid points or sizes to a sweep never changes existing rows.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy import stats
from scipy.special import ndtri

from .graphs import build_torus
from .process import ESCAPED, ProcessParams, run_band_experiment

SEED_SCHEME = "sseq-philox-v1"

_WILSON_Z = float(ndtri(0.975))


class NoCrossing(ValueError):
    pass


class MultipleCrossings(ValueError):
    pass


class DegenerateSupport(ValueError):
    pass


class SweepRowError(RuntimeError):
    """A simulation failure, tagged with the sweep row that caused it."""


def _float_bits(x: float) -> int:
    return int(np.float64(x).view(np.uint64))


def _entropy(base_seed, *context) -> tuple:
    out = []
    for part in (base_seed, *context):
        if isinstance(part, (tuple, list)):
            out.extend(int(p) for p in part)
        elif isinstance(part, float):
            out.append(_float_bits(part))
        elif isinstance(part, str):
            out.extend(part.encode())
        else:
            out.append(int(part))
    return tuple(out)


def replica_rng(base_seed, replica: int, context=()) -> np.random.Generator:
    """Generator for one replica; the stream depends only on the entropy
    tuple, never on scheduling."""
    seq = np.random.SeedSequence(_entropy(base_seed, *context, replica))
    return np.random.Generator(np.random.Philox(seq))


def _run_chunk(task, base_seed, context, indices):
    return [task(rng=replica_rng(base_seed, i, context)) for i in indices]


def resolve_workers(workers=None) -> int:
    if workers is None:
        workers = int(os.environ.get("CHASESIM_WORKERS", "1"))
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    return workers


def run_replicas(task, n: int, base_seed, context=(), workers=None) -> list:
    """Run `task(rng=...)` n times on independent streams; outcome i is
    seeded by (base_seed, *context, i). Output order is by replica index
    and identical for any worker count."""
    if n < 1:
        raise ValueError(f"need n >= 1 replicas, got {n}")
    workers = resolve_workers(workers)
    if workers == 1:
        return _run_chunk(task, base_seed, context, range(n))
    chunk = max(1, math.ceil(n / (workers * 4)))
    spans = [range(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]
    out: list = [None] * n
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for span, results in zip(
                spans, pool.map(partial(_run_chunk, task, base_seed, context), spans)):
            out[span.start:span.stop] = results
    return out


def wilson_interval(successes: int, n: int, z: float = _WILSON_Z) -> tuple:
    """Wilson 95% score interval; well behaved at p_hat near 0 and 1."""
    if n <= 0:
        raise ValueError("need at least one trial")
    p_hat = successes / n
    denom = 1.0 + z * z / n
    center = (p_hat + z * z / (2 * n)) / denom
    half = (z / denom) * math.sqrt(p_hat * (1 - p_hat) / n + z * z / (4 * n * n))
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == n else min(1.0, center + half)
    return lo, hi


@dataclass(frozen=True)
class EstimateRow:
    value: float
    L: int
    n: int
    escaped: int
    p_hat: float
    ci_low: float
    ci_high: float


def escape_probability(L: int, p: ProcessParams, n: int, base_seed,
                       geometry: str = "cylinder", workers=None) -> EstimateRow:
    """Escape frequency of the band experiment on an L x L grid with a
    Wilson 95% interval. The replica streams depend on (L, lambda, alpha,
    geometry), so grid rows never share randomness."""
    g = build_torus(L, geometry)
    context = (L, _float_bits(p.lam), _float_bits(p.alpha), geometry)
    task = partial(run_band_experiment, g, p)
    outcomes = run_replicas(task, n, base_seed, context=context, workers=workers)
    escaped = sum(1 for o in outcomes if o.status == ESCAPED)
    lo, hi = wilson_interval(escaped, n)
    return EstimateRow(value=math.nan, L=L, n=n, escaped=escaped,
                       p_hat=escaped / n, ci_low=lo, ci_high=hi)


@dataclass(frozen=True)
class SweepSpec:
    vary: str                 # "lambda" | "alpha"
    fixed_value: float
    grid: tuple
    sizes: tuple
    samples_per_point: int
    base_seed: int
    geometry: str = "cylinder"
    family: str = "torus-band"

    def __post_init__(self):
        if self.family != "torus-band":
            raise ValueError(f"unknown sweep family {self.family!r}")
        if self.vary not in ("lambda", "alpha"):
            raise ValueError(f"vary must be 'lambda' or 'alpha', got {self.vary!r}")
        if self.geometry not in ("cylinder", "torus"):
            raise ValueError(f"unknown geometry {self.geometry!r}")
        object.__setattr__(self, "grid", tuple(float(v) for v in self.grid))
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        if len(self.grid) < 1 or any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("grid must be nonempty and strictly increasing")
        if not self.sizes:
            raise ValueError("need at least one size")
        if self.samples_per_point < 1:
            raise ValueError("samples_per_point must be >= 1")

    def params_at(self, value: float) -> ProcessParams:
        if self.vary == "lambda":
            return ProcessParams(value, self.fixed_value)
        return ProcessParams(self.fixed_value, value)


def sweep(spec: SweepSpec, workers=None) -> list:
    """One EstimateRow per (size, grid value), sizes outermost."""
    rows = []
    for L in spec.sizes:
        for value in spec.grid:
            try:
                row = escape_probability(L, spec.params_at(value),
                                         spec.samples_per_point, spec.base_seed,
                                         geometry=spec.geometry, workers=workers)
            except Exception as exc:
                raise SweepRowError(
                    f"row (L={L}, {spec.vary}={value}) failed: {exc}") from exc
            rows.append(EstimateRow(value=value, L=L, n=row.n, escaped=row.escaped,
                                    p_hat=row.p_hat, ci_low=row.ci_low,
                                    ci_high=row.ci_high))
    return rows


_CSV_COLUMNS = ("vary", "value", "L", "n", "escaped", "p_hat",
                "ci_low", "ci_high", "seed_scheme")


def sweep_csv(spec: SweepSpec, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_CSV_COLUMNS)
    for r in rows:
        writer.writerow([spec.vary, repr(r.value), r.L, r.n, r.escaped,
                         repr(r.p_hat), repr(r.ci_low), repr(r.ci_high),
                         SEED_SCHEME])
    return buf.getvalue()


def parse_sweep_csv(text: str) -> list:
    reader = csv.DictReader(io.StringIO(text))
    missing = set(_CSV_COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"sweep CSV missing columns: {sorted(missing)}")
    return [EstimateRow(value=float(rec["value"]), L=int(rec["L"]),
                        n=int(rec["n"]), escaped=int(rec["escaped"]),
                        p_hat=float(rec["p_hat"]), ci_low=float(rec["ci_low"]),
                        ci_high=float(rec["ci_high"]))
            for rec in reader]


@dataclass(frozen=True)
class CrossingEstimate:
    pairwise_crossings: tuple  # (L1, L2, crossing value)
    point_estimate: float
    spread: float


def _pair_crossing(grid, diffs, pair) -> float:
    """Location where the piecewise-linear difference curve changes sign;
    exactly one sign change is required."""
    signs = [(i, d) for i, d in enumerate(diffs) if d != 0.0]
    if len(signs) < 2:
        raise NoCrossing(f"difference curve for sizes {pair} never changes sign")
    changes = [(signs[j], signs[j + 1]) for j in range(len(signs) - 1)
               if signs[j][1] * signs[j + 1][1] < 0]
    if not changes:
        raise NoCrossing(f"difference curve for sizes {pair} never changes sign")
    if len(changes) > 1:
        raise MultipleCrossings(
            f"difference curve for sizes {pair} changes sign "
            f"{len(changes)} times; refine the grid or add samples")
    (i, di), (j, dj) = changes[0]
    if j == i + 1:
        return grid[i] + (grid[j] - grid[i]) * di / (di - dj)
    # the curve sits exactly on zero between i and j; report the middle
    zeros = grid[i + 1:j]
    return float(np.median(zeros))


def estimate_crossing(rows) -> CrossingEstimate:
    """Crossing of consecutive-size escape curves under linear
    interpolation; the point estimate is the median over size pairs."""
    by_size: dict = {}
    for r in rows:
        by_size.setdefault(r.L, {})[r.value] = r.p_hat
    sizes = sorted(by_size)
    if len(sizes) < 2:
        raise ValueError("need at least two sizes to intersect curves")
    grids = [tuple(sorted(by_size[L])) for L in sizes]
    if any(g != grids[0] for g in grids) or len(grids[0]) < 2:
        raise ValueError("sizes must share one grid with at least two points")
    grid = grids[0]
    crossings = []
    for l1, l2 in zip(sizes, sizes[1:]):
        diffs = [by_size[l1][v] - by_size[l2][v] for v in grid]
        crossings.append((l1, l2, _pair_crossing(grid, diffs, (l1, l2))))
    values = [c for (_, _, c) in crossings]
    return CrossingEstimate(pairwise_crossings=tuple(crossings),
                            point_estimate=float(np.median(values)),
                            spread=float(max(values) - min(values)))


@dataclass(frozen=True)
class CompareReport:
    chi2: float
    dof: int
    p_value: float
    passed: bool
    n_bins: int = 0


def distribution_compare(samples_a, samples_b, min_bin: int = 8,
                         significance: float = 0.01) -> CompareReport:
    """Two-sample chi-squared over a pooled adaptive binning: integer
    support is merged left to right until each pooled bin holds at least
    min_bin expected counts for the smaller sample."""
    a = np.asarray(list(samples_a))
    b = np.asarray(list(samples_b))
    if len(a) == 0 or len(b) == 0:
        raise ValueError("both sample sets must be nonempty")
    values = np.unique(np.concatenate([a, b]))
    if len(values) < 2:
        raise DegenerateSupport("all samples share a single value")
    count_a = np.array([(a == v).sum() for v in values], dtype=float)
    count_b = np.array([(b == v).sum() for v in values], dtype=float)
    n_a, n_b, n = len(a), len(b), len(a) + len(b)
    threshold = min_bin * n / min(n_a, n_b)
    bins_a, bins_b = [], []
    acc_a = acc_b = acc = 0.0
    for ca, cb in zip(count_a, count_b):
        acc_a += ca
        acc_b += cb
        acc += ca + cb
        if acc >= threshold:
            bins_a.append(acc_a)
            bins_b.append(acc_b)
            acc_a = acc_b = acc = 0.0
    if acc > 0:
        if bins_a:
            bins_a[-1] += acc_a
            bins_b[-1] += acc_b
        else:
            bins_a, bins_b = [acc_a], [acc_b]
    if len(bins_a) < 2:
        raise DegenerateSupport("support too thin to form two pooled bins")
    bins_a = np.asarray(bins_a)
    bins_b = np.asarray(bins_b)
    pooled = (bins_a + bins_b) / n
    chi2 = float((((bins_a - n_a * pooled) ** 2) / (n_a * pooled)).sum()
                 + (((bins_b - n_b * pooled) ** 2) / (n_b * pooled)).sum())
    dof = len(bins_a) - 1
    p_value = float(stats.chi2.sf(chi2, dof))
    return CompareReport(chi2=chi2, dof=dof, p_value=p_value,
                         passed=p_value >= significance, n_bins=len(bins_a))
