"""Integrated functional depths for partially observed curves.

Two univariate depths are available: the Fraiman-Muniz depth ``1 - |1/2 - F(x)|``
and the two-curve band depth, computed here by exact pair counting so that
ties (and the pointwise extremes) are handled correctly. The integrated depth
of a curve is the q(t)-weighted average of the pointwise depth over its
observed set, where q(t) is the number of curves observed at t.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import EmptyCurve, EmptySection, StructuralError
from .fdcore import FunctionalSample


class DepthKind(enum.Enum):
    FM = "fm"
    MBD2 = "mbd2"

    @property
    def code(self) -> int:
        return _kernels.FM if self is DepthKind.FM else _kernels.MBD2

    @classmethod
    def parse(cls, kind) -> "DepthKind":
        if isinstance(kind, cls):
            return kind
        return cls(str(kind).lower())


@dataclass(frozen=True)
class PointwiseCounts:
    below: int
    tied: int
    total: int

    @property
    def above(self) -> int:
        return self.total - self.below - self.tied


def pointwise_counts(sample: FunctionalSample, t: int, x: float, members=None) -> PointwiseCounts:
    """Counts of the values observed at grid index ``t`` below and equal to ``x``.

    ``members`` optionally restricts the count to a subset of curve indices.
    """
    avail = sample.mask[:, t]
    if members is not None:
        keep = np.zeros(sample.n, dtype=bool)
        keep[np.asarray(list(members), dtype=int)] = True
        avail = avail & keep
    vals = sample.values[avail, t]
    if vals.size == 0:
        raise EmptySection(f"no curve observed at grid index {t}")
    return PointwiseCounts(int(np.sum(vals < x)), int(np.sum(vals == x)), int(vals.size))


def univariate_depth(kind, counts: PointwiseCounts) -> float:
    """Depth of a point given its empirical counts.

    For ``MBD2`` this is the share of the ``C(total, 2)`` bands spanned by two
    distinct sample values that contain the point; a single value has depth 1.
    """
    kind = DepthKind.parse(kind)
    if counts.total < 1:
        raise EmptySection("depth of a point in an empty sample")
    return float(_kernels.depth_from_counts(kind.code, counts.below, counts.tied, counts.total))


def _member_flags(n: int, J) -> np.ndarray:
    flags = np.zeros(n, dtype=bool)
    idx = np.asarray(list(J), dtype=int)
    if idx.size:
        if idx.min() < 0 or idx.max() >= n:
            raise IndexError("member index out of range")
        flags[idx] = True
    return flags


def _check_focal(sample: FunctionalSample, i: int):
    if not 0 <= i < sample.n:
        raise IndexError(f"curve index {i} out of range for n={sample.n}")
    if not sample.mask[i].any():
        raise EmptyCurve(f"curve {i} has no observed points")


def poifd(sample: FunctionalSample, i: int, kind=DepthKind.MBD2) -> float:
    """Partially observed integrated depth of curve ``i`` in the whole sample."""
    kind = DepthKind.parse(kind)
    _check_focal(sample, i)
    flags = np.ones(sample.n, dtype=bool)
    return float(_kernels.poifd_members(
        sample.values, sample.mask, sample.grid.quad_weights, i, flags, kind.code))


def poifd_subset(sample: FunctionalSample, i: int, J, kind=DepthKind.MBD2) -> float:
    """Depth of curve ``i`` within the sub-sample ``J`` plus ``i``; 0 if ``J`` is empty."""
    kind = DepthKind.parse(kind)
    _check_focal(sample, i)
    flags = _member_flags(sample.n, J)
    if flags[i]:
        raise ValueError("the focal curve must not be a member of J")
    if not flags.any():
        return 0.0
    return float(_kernels.poifd_members(
        sample.values, sample.mask, sample.grid.quad_weights, i, flags, kind.code))


def ifd(sample: FunctionalSample, i: int, kind=DepthKind.MBD2, weight=None) -> float:
    """Integrated depth for fully observed samples.

    ``weight`` is a weight function on the grid (defaults to constant 1) and
    is normalized to integrate to one.
    """
    kind = DepthKind.parse(kind)
    if not sample.mask.all():
        raise StructuralError("ifd requires a fully observed sample")
    if not 0 <= i < sample.n:
        raise IndexError(f"curve index {i} out of range for n={sample.n}")
    qw = sample.grid.quad_weights
    if weight is None:
        weight = np.ones(len(sample.grid))
    weight = np.asarray(weight, dtype=float)
    x = sample.values[i]
    below = np.sum(sample.values < x, axis=0)
    tied = np.sum(sample.values == x, axis=0)
    # q(t) = n everywhere, so the q-weighting of the partial version cancels;
    # it is kept (and summed sequentially) so both agree to the last bit
    num = den = 0.0
    for t in range(len(sample.grid)):
        d = _kernels.depth_from_counts(kind.code, int(below[t]), int(tied[t]), sample.n)
        wt = float(qw[t]) * float(weight[t])
        num += wt * d * sample.n
        den += wt * sample.n
    return num / den


def poifd_all(sample: FunctionalSample, kind=DepthKind.MBD2) -> np.ndarray:
    """Depth of every curve; NaN for curves with no observed point."""
    kind = DepthKind.parse(kind)
    flags = np.ones(sample.n, dtype=bool)
    out = np.full(sample.n, np.nan)
    for i in range(sample.n):
        if sample.mask[i].any():
            out[i] = _kernels.poifd_members(
                sample.values, sample.mask, sample.grid.quad_weights, i, flags, kind.code)
    return out
