"""Discretized partially observed functional data.

Curves share one grid on [0, 1]. A curve is a row of ``values`` with NaN at
unobserved points; the boolean ``mask`` row marks its observed set. Integrals
are trapezoid sums and the measure of a set of grid points is the sum of their
quadrature weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import StructuralError


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def trapezoid_weights(points: np.ndarray) -> np.ndarray:
    """Composite trapezoid weights for an increasing set of nodes."""
    h = np.diff(points)
    w = np.zeros_like(points, dtype=float)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


@dataclass(frozen=True, eq=False)
class Grid:
    """Shared discretization of the domain with trapezoid weights."""

    points: np.ndarray
    quad_weights: np.ndarray = field(default=None)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise StructuralError("a grid needs at least 2 points")
        if not np.all(np.diff(pts) > 0):
            raise StructuralError("grid points must be strictly increasing")
        if pts[0] < 0 or pts[-1] > 1:
            raise StructuralError("grid points must lie in [0, 1]")
        w = trapezoid_weights(pts) if self.quad_weights is None else np.asarray(self.quad_weights, float)
        if w.shape != pts.shape:
            raise StructuralError("quad_weights must match points")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "quad_weights", _frozen(w))

    @classmethod
    def uniform(cls, size: int = 100, start: float = 0.0, stop: float = 1.0) -> "Grid":
        return cls(np.linspace(start, stop, size))

    def __len__(self) -> int:
        return self.points.size

    @property
    def spacing(self) -> float:
        """Largest gap between consecutive points."""
        return float(np.max(np.diff(self.points)))

    @property
    def length(self) -> float:
        return float(self.points[-1] - self.points[0])

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return np.array_equal(self.points, other.points) and np.array_equal(
            self.quad_weights, other.quad_weights
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class PartialCurve:
    """One curve: values (NaN where unobserved) and its observation mask."""

    values: np.ndarray
    mask: np.ndarray

    @property
    def observed(self) -> np.ndarray:
        return self.mask

    @property
    def missing(self) -> np.ndarray:
        return ~self.mask


@dataclass(frozen=True, eq=False)
class FunctionalSample:
    """``n`` partially observed curves on a common grid.

    ``values`` is an ``(n, T)`` array with NaN at unobserved points. If ``mask``
    is omitted it is taken to be the non-NaN pattern of ``values``. The
    constructor only checks shapes; use :func:`validate_sample` for the full
    set of invariants.
    """

    grid: Grid
    values: np.ndarray
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        vals = np.atleast_2d(np.asarray(self.values, dtype=float))
        if vals.ndim != 2 or vals.shape[1] != len(self.grid):
            raise StructuralError(
                f"values must have shape (n, {len(self.grid)}), got {vals.shape}"
            )
        mask = ~np.isnan(vals) if self.mask is None else np.asarray(self.mask, dtype=bool)
        if mask.shape != vals.shape:
            raise StructuralError("mask must have the same shape as values")
        object.__setattr__(self, "values", _frozen(vals))
        object.__setattr__(self, "mask", _frozen(mask))

    @classmethod
    def from_complete(cls, grid: Grid, values: np.ndarray) -> "FunctionalSample":
        vals = np.asarray(values, dtype=float)
        return cls(grid, vals, np.ones(vals.shape, dtype=bool))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def __len__(self) -> int:
        return self.n

    def curve(self, i: int) -> PartialCurve:
        return PartialCurve(self.values[i], self.mask[i])

    @property
    def curves(self) -> list[PartialCurve]:
        return [self.curve(i) for i in range(self.n)]

    @property
    def avail_count(self) -> np.ndarray:
        """q(t): number of curves observed at each grid point."""
        return self.mask.sum(axis=0)

    def avail_index(self, t: int) -> np.ndarray:
        """Indices of the curves observed at grid index ``t``."""
        return np.flatnonzero(self.mask[:, t])

    @property
    def complete(self) -> np.ndarray:
        """Boolean flag per curve: observed at every grid point."""
        return self.mask.all(axis=1)

    def filled(self, fill: float = 0.0) -> np.ndarray:
        """Values with unobserved entries replaced by ``fill``."""
        return np.where(self.mask, self.values, fill)

    def with_mask(self, mask: np.ndarray) -> "FunctionalSample":
        """Restrict the sample to ``mask`` (which should be a subset of the current mask)."""
        mask = np.asarray(mask, dtype=bool) & self.mask
        return FunctionalSample(self.grid, np.where(mask, self.values, np.nan), mask)

    def subset(self, idx) -> "FunctionalSample":
        idx = np.asarray(idx, dtype=int)
        return FunctionalSample(self.grid, self.values[idx], self.mask[idx])

    def __eq__(self, other):
        if not isinstance(other, FunctionalSample):
            return NotImplemented
        return (
            self.grid == other.grid
            and np.array_equal(self.mask, other.mask)
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    __hash__ = None


def _check_len(mask: np.ndarray, grid: Grid) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (len(grid),):
        raise StructuralError(f"mask length {mask.shape} does not match grid length {len(grid)}")
    return mask


def measure(mask: np.ndarray, grid: Grid) -> float:
    """Quadrature-weighted length of the observed set."""
    mask = _check_len(mask, grid)
    return float(np.sum(grid.quad_weights[mask]))


def overlap_mask(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise StructuralError("masks have different lengths")
    return a & b


def distance_row(sample: FunctionalSample, i: int, rms: bool = False) -> np.ndarray:
    """Mean L2 distance from curve ``i`` to every curve; NaN where undefined.

    The distance is ``sqrt(integral of squared difference over the overlap)``
    divided by the overlap measure. With ``rms=True`` the denominator is the
    square root of the measure instead. Overlaps with fewer than two grid
    points give NaN, as does the diagonal.
    """
    if not 0 <= i < sample.n:
        raise IndexError(f"curve index {i} out of range for n={sample.n}")
    w = sample.grid.quad_weights
    overlap = sample.mask & sample.mask[i]
    diff = np.where(overlap, sample.values - sample.values[i], 0.0)
    num = np.sum(w * diff * diff, axis=1)
    lam = np.sum(np.where(overlap, w, 0.0), axis=1)
    ok = overlap.sum(axis=1) >= 2
    ok[i] = False
    denom = np.sqrt(lam) if rms else lam
    out = np.full(sample.n, np.nan)
    out[ok] = np.sqrt(num[ok]) / denom[ok]
    return out


def distance_matrix(sample: FunctionalSample, rms: bool = False) -> np.ndarray:
    """All pairwise mean L2 distances (NaN where undefined, NaN on the diagonal)."""
    return np.vstack([distance_row(sample, i, rms) for i in range(sample.n)])


def mean_l2_distance(sample: FunctionalSample, i: int, j: int, rms: bool = False) -> float | None:
    """Mean L2 distance between curves ``i`` and ``j``, or ``None`` if undefined."""
    if i == j:
        raise ValueError("mean_l2_distance needs two different curves")
    if not 0 <= j < sample.n:
        raise IndexError(f"curve index {j} out of range for n={sample.n}")
    d = distance_row(sample, i, rms)[j]
    return None if np.isnan(d) else float(d)


@dataclass
class SampleReport:
    n: int
    observed_measure: np.ndarray
    min_avail: int
    complete: list[int]
    coverage_gaps: list[int]
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_sample(sample: FunctionalSample) -> SampleReport:
    """Check the sample invariants and summarize its observation pattern.

    Never raises; problems are collected in ``violations``. Grid points that no
    curve observes are listed in ``coverage_gaps`` (they cannot be reconstructed).
    """
    violations = []
    vals, mask = sample.values, sample.mask
    bad_obs = mask & ~np.isfinite(vals)
    for i in np.flatnonzero(bad_obs.any(axis=1)):
        violations.append(f"curve {i}: non-finite value at an observed point")
    bad_missing = ~mask & ~np.isnan(vals)
    for i in np.flatnonzero(bad_missing.any(axis=1)):
        violations.append(f"curve {i}: value present at an unobserved point")
    for i in np.flatnonzero(~mask.any(axis=1)):
        violations.append(f"curve {i}: empty observed set")
    q = sample.avail_count
    gaps = np.flatnonzero(q == 0).tolist()
    if gaps:
        violations.append(f"{len(gaps)} grid point(s) observed by no curve (reconstruction coverage gap)")
    w = sample.grid.quad_weights
    return SampleReport(
        n=sample.n,
        observed_measure=mask.astype(float) @ w,
        min_avail=int(q.min()) if q.size else 0,
        complete=np.flatnonzero(sample.complete).tolist(),
        coverage_gaps=gaps,
        violations=violations,
    )
