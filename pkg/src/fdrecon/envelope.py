"""Depth-guarded envelope selection for an incomplete focal curve.

Candidates are the other curves restricted to the focal curve's observed set,
swept from nearest to farthest in mean L2 distance. Each outer iteration seeds
a batch with the nearest remaining candidate and admits every further
candidate that either strictly enlarges the part of the focal curve bracketed
by the batch, or observes grid points not yet covered by the accepted members
and the batch. The batch joins the envelope when it does not lower the depth
of the focal curve; either way it leaves the candidate pool. The loop stops
when fewer than two candidates remain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels
from .depth import DepthKind
from .errors import EmptyCurve, NoCandidates
from .fdcore import FunctionalSample, distance_row

REASONS = {
    _kernels.SEED: "seed",
    _kernels.ENVELOPMENT: "envelopment",
    _kernels.COVERAGE: "coverage",
    _kernels.BOTH: "envelopment+coverage",
}


@dataclass(frozen=True)
class EnvelopeConfig:
    coverage_fallback: bool = False
    rms_distance: bool = False


@dataclass(frozen=True)
class Admission:
    index: int
    distance: float
    reason: str
    envelopment_gain: float
    new_coverage: int

    @property
    def by_envelopment(self) -> bool:
        return "envelopment" in self.reason

    @property
    def by_coverage(self) -> bool:
        return "coverage" in self.reason


@dataclass(frozen=True)
class IterationRecord:
    batch: tuple[Admission, ...]
    accepted: bool
    depth_before: float
    depth_after: float

    @property
    def indices(self) -> list[int]:
        return [a.index for a in self.batch]


@dataclass(frozen=True, eq=False)
class Envelope:
    """Selected members of a focal curve's envelope with the selection trace.

    ``trace`` is assembled lazily from the raw per-candidate arrays returned
    by the selection loop.
    """

    focal: int
    members: tuple[int, ...]
    member_distance: tuple[float, ...]
    final_depth: float
    enveloped_measure: float
    fallback_members: frozenset = field(default_factory=frozenset)
    kind: DepthKind = DepthKind.MBD2
    raw: tuple | None = field(default=None, repr=False)

    @property
    def empty(self) -> bool:
        return not self.members

    def __len__(self) -> int:
        return len(self.members)

    @property
    def n_iterations(self) -> int:
        return 0 if self.raw is None else int(self.raw[7].size)

    @cached_property
    def trace(self) -> tuple[IterationRecord, ...]:
        if self.raw is None:
            return ()
        order, dist, batch_of, admit_pos, reason, env_gain, cov_gain, accepted, d_before, d_after = self.raw
        trace = []
        for it in range(accepted.size):
            ks = np.flatnonzero(batch_of == it)
            ks = ks[np.argsort(admit_pos[ks])]
            batch = tuple(
                Admission(int(order[k]), float(dist[k]), REASONS[int(reason[k])],
                          float(env_gain[k]), int(cov_gain[k]))
                for k in ks
            )
            trace.append(IterationRecord(batch, bool(accepted[it]), float(d_before[it]), float(d_after[it])))
        return tuple(trace)

    def admissions(self) -> list[Admission]:
        """Admission records of the members, in envelope order."""
        return [a for rec in self.trace if rec.accepted for a in rec.batch]


def enveloped_measure(sample: FunctionalSample, i: int, N) -> float:
    """Measure of the points of curve ``i``'s observed set bracketed by the curves in ``N``.

    At each point only the members of ``N`` observed there take part in the
    pointwise min/max; points where none is observed do not count.
    """
    idx = np.asarray(list(N), dtype=int)
    if idx.size == 0:
        raise ValueError("enveloped_measure needs a non-empty set of curves")
    vals = np.where(sample.mask[idx], sample.values[idx], np.nan)
    seen = sample.mask[idx].any(axis=0)
    with np.errstate(invalid="ignore"):
        lo = np.nanmin(np.where(seen, vals, 0.0), axis=0)
        hi = np.nanmax(np.where(seen, vals, 0.0), axis=0)
    x = sample.values[i]
    inside = sample.mask[i] & seen & (lo <= x) & (x <= hi)
    return float(np.sum(sample.grid.quad_weights[inside]))


def candidate_order(sample: FunctionalSample, i: int, config: EnvelopeConfig = EnvelopeConfig(),
                    distances=None) -> tuple[np.ndarray, np.ndarray]:
    """Candidate indices sorted by distance to curve ``i`` (ties by index), and their distances.

    Curves with undefined distance are dropped unless ``coverage_fallback`` is
    set, in which case they are appended last with a sentinel distance of
    twice the largest finite candidate distance.
    """
    d = distance_row(sample, i, config.rms_distance) if distances is None else np.asarray(distances)
    others = np.array([j for j in range(sample.n) if j != i], dtype=np.int64)
    dj = d[others]
    finite = ~np.isnan(dj)
    defined = others[finite]
    # stable sort keeps ascending index among equal distances
    order = defined[np.argsort(dj[finite], kind="stable")]
    dist = d[order]
    if config.coverage_fallback:
        extra = others[~finite]
        if extra.size:
            sentinel = 2.0 * dist.max() if dist.size and dist.max() > 0 else 1.0
            order = np.concatenate([order, extra])
            dist = np.concatenate([dist, np.full(extra.size, sentinel)])
    return order, dist


def build_envelope(sample: FunctionalSample, i: int, kind=DepthKind.MBD2,
                   config: EnvelopeConfig = EnvelopeConfig(), distances=None) -> Envelope:
    """Select the envelope of curve ``i``.

    ``distances`` may carry a precomputed distance row for curve ``i``.
    Raises :class:`NoCandidates` when no other curve has a defined distance.
    An empty result (no batch accepted) is returned as a valid, empty envelope.
    """
    kind = DepthKind.parse(kind)
    if not 0 <= i < sample.n:
        raise IndexError(f"curve index {i} out of range for n={sample.n}")
    if sample.mask[i].sum() < 2:
        raise EmptyCurve(f"curve {i} has fewer than 2 observed points")
    d = distance_row(sample, i, config.rms_distance) if distances is None else np.asarray(distances)
    if not np.any(~np.isnan(np.delete(d, i))):
        raise NoCandidates(f"no curve has a defined distance to curve {i}")
    order, dist = candidate_order(sample, i, config, d)

    raw = _kernels.build_envelope(
        sample.values, sample.mask, sample.grid.quad_weights, i, order, kind.code)
    batch_of, admit_pos, _, _, _, accepted, _, d_after = raw
    admitted = np.flatnonzero(batch_of >= 0)
    admitted = admitted[accepted[batch_of[admitted]]]
    ks = admitted[np.lexsort((admit_pos[admitted], batch_of[admitted]))]
    members = order[ks].tolist()
    final_depth = float(d_after[np.flatnonzero(accepted)[-1]]) if accepted.any() else 0.0
    fallback = set(order[np.isnan(d[order])].tolist())
    return Envelope(
        focal=i,
        members=tuple(members),
        member_distance=tuple(dist[ks].tolist()),
        final_depth=final_depth,
        enveloped_measure=enveloped_measure(sample, i, members) if members else 0.0,
        fallback_members=frozenset(m for m in members if m in fallback),
        kind=kind,
        raw=(order, dist) + tuple(raw),
    )
