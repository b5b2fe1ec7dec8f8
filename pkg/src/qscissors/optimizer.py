"""Intensity sweeps and 1-D maximization of fidelity or preparation rate."""

from __future__ import annotations

import cmath
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .optics import DetectorModel
from .pipeline import (
    NO_EVENT_THRESHOLD,
    SchemeConfig,
    TargetQubit,
    ideal_fidelity,
    run_branches,
)

OBJECTIVES = ("fidelity", "rate")
REFINE_TOL = 1e-4
TIE_TOL = 1e-6

INV_PHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class ScanSpec:
    """Uniform |alpha|^2 grid for one target and one detector setting.

    ``base`` supplies everything but the coherent amplitude; the amplitude
    phase always follows ``arg(target.c1)``.
    """

    target: TargetQubit = TargetQubit()
    base: SchemeConfig = field(default_factory=SchemeConfig)
    alpha_sq_range: tuple[float, float] = (0.0, 16.0)
    grid_points: int = 161
    objective: str = "fidelity"

    def __post_init__(self):
        lo, hi = self.alpha_sq_range
        if not (0 <= lo < hi):
            raise ValueError(f"alpha_sq_range {self.alpha_sq_range} must satisfy 0 <= lo < hi")
        if self.grid_points < 2:
            raise ValueError("grid_points must be at least 2")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")

    def grid(self) -> np.ndarray:
        return np.linspace(*self.alpha_sq_range, self.grid_points)

    def config_at(self, alpha_sq: float) -> SchemeConfig:
        phase = cmath.phase(complex(self.target.c1)) if self.target.c1 != 0 else 0.0
        return replace(self.base, alpha=math.sqrt(alpha_sq) * cmath.exp(1j * phase))

    @classmethod
    def for_ratio(cls, ratio: float, eta: float, **kw) -> "ScanSpec":
        d = DetectorModel(eta)
        base = kw.pop("base", SchemeConfig())
        return cls(target=TargetQubit.from_ratio(ratio), base=replace(base, eta1=d, eta2=d, eta3=d), **kw)


@dataclass(frozen=True)
class OptimumPoint:
    alpha_sq: float
    fidelity: float
    probability: float
    rate: float

    @property
    def no_event(self) -> bool:
        return math.isnan(self.fidelity)

    def value(self, objective: str) -> float:
        """Objective value; no-event points score 0 for rate and are excluded for fidelity."""
        if objective == "rate":
            return 0.0 if self.no_event else self.rate
        return -math.inf if self.no_event else self.fidelity


def evaluate(spec: ScanSpec, alpha_sq: float) -> OptimumPoint:
    r = run_branches(spec.config_at(alpha_sq), spec.target)
    if r.no_event:
        return OptimumPoint(float(alpha_sq), math.nan, r.probability, r.rate)
    return OptimumPoint(float(alpha_sq), r.fidelity, r.probability, r.rate)


def worker_count() -> int:
    """Worker cap from ``QSD_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("QSD_THREADS", "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise ValueError("QSD_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def map_points(fn: Callable, items: Sequence, workers: Optional[int]):
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def scan(spec: ScanSpec, workers: Optional[int] = None) -> list[OptimumPoint]:
    """Evaluate the grid in increasing |alpha|^2 order."""
    return map_points(lambda x: evaluate(spec, x), list(spec.grid()), workers)


def golden_section_max(f: Callable[[float], float], a: float, b: float,
                       tol: float = REFINE_TOL) -> float:
    """Argmax of a unimodal ``f`` on [a, b] to within ``tol``."""
    a, b = min(a, b), max(a, b)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return c if fc >= fd else d


def _local_max_indices(values: np.ndarray) -> tuple[list[int], list[int]]:
    """Interior and boundary local maxima; plateaus report their first index."""
    n = len(values)
    interior, boundary = [], []
    for i in range(n):
        v = values[i]
        if not np.isfinite(v):
            continue
        left = values[i - 1] if i > 0 else -np.inf
        right = values[i + 1] if i < n - 1 else -np.inf
        left = -np.inf if not np.isfinite(left) else left
        right = -np.inf if not np.isfinite(right) else right
        if v > left and v >= right:
            (boundary if i in (0, n - 1) else interior).append(i)
    return interior, boundary


def _rank(points: list[OptimumPoint], objective: str) -> list[OptimumPoint]:
    best_first = sorted(points, key=lambda p: (-p.value(objective), -p.rate, p.alpha_sq))
    # within TIE_TOL of the best objective, prefer the higher rate
    if len(best_first) > 1:
        top = best_first[0].value(objective)
        tied = [p for p in best_first if top - p.value(objective) <= TIE_TOL]
        rest = [p for p in best_first if top - p.value(objective) > TIE_TOL]
        best_first = sorted(tied, key=lambda p: -p.rate) + rest
    return best_first


def maximize(spec: ScanSpec, workers: Optional[int] = None) -> list[OptimumPoint]:
    """Every local maximum of the objective over the range, best first.

    A coarse grid brackets each interior maximum, which golden-section search
    then refines. Without any interior maximum the best range endpoint is
    returned instead (e.g. the vacuum target peaks at |alpha|^2 = 0).
    """
    grid = spec.grid()
    points = scan(spec, workers)
    values = np.array([p.value(spec.objective) for p in points])
    if not np.any(np.isfinite(values)) or all(p.no_event for p in points):
        raise RuntimeError("no heralding event anywhere in the scanned range")
    interior, boundary = _local_max_indices(values)
    picks = interior or sorted(boundary, key=lambda i: -values[i])[:1]

    def objective(x: float) -> float:
        return evaluate(spec, x).value(spec.objective)

    found: list[OptimumPoint] = []
    for i in picks:
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        x = golden_section_max(objective, lo, hi)
        best = evaluate(spec, x)
        if best.value(spec.objective) < points[i].value(spec.objective):
            best = points[i]
        if all(abs(best.alpha_sq - f.alpha_sq) > REFINE_TOL for f in found):
            found.append(best)
    return _rank(found, spec.objective)


@dataclass(frozen=True)
class CurveRow:
    ratio: float
    rank: int
    alpha_sq: float
    fidelity: float
    probability: float
    rate: float


def optimum_curve(ratios: Sequence[float], eta: float, workers: Optional[int] = None,
                  **spec_kw) -> list[CurveRow]:
    """Fidelity-optimal intensity per target ratio; rank 1 is the global optimum."""
    rows = []
    for ratio in ratios:
        spec = ScanSpec.for_ratio(ratio, eta, objective="fidelity", **spec_kw)
        for rank, p in enumerate(maximize(spec, workers), start=1):
            rows.append(CurveRow(float(ratio), rank, p.alpha_sq, p.fidelity, p.probability, p.rate))
    return rows


@dataclass(frozen=True)
class CompareRow:
    ratio: float
    alpha_sq: float
    f_experimental: float
    f_ideal: float


def compare_ideal(ratios: Sequence[float], eta: float,
                  alpha_sq_range: tuple[float, float] = (0.0, 4.0), grid_points: int = 401,
                  workers: Optional[int] = None, base: Optional[SchemeConfig] = None) -> list[CompareRow]:
    """Experimental vs ideal-scissors fidelity on a common |alpha|^2 grid."""
    rows = []
    for ratio in ratios:
        kw = {} if base is None else {"base": base}
        spec = ScanSpec.for_ratio(ratio, eta, alpha_sq_range=alpha_sq_range, grid_points=grid_points, **kw)
        for p in scan(spec, workers):
            ideal = ideal_fidelity(spec.config_at(p.alpha_sq).alpha, spec.target)
            rows.append(CompareRow(float(ratio), p.alpha_sq, p.fidelity, ideal))
    return rows


def calibrate_rep_rate(cfg: SchemeConfig, published_rate: float) -> float:
    """Pulse rate that turns the anchor's success probability into ``published_rate``."""
    if not published_rate > 0:
        raise ValueError("published_rate must be positive")
    prob = run_branches(cfg).probability
    if prob < NO_EVENT_THRESHOLD:
        raise ValueError("anchor configuration has zero success probability")
    return published_rate / prob
