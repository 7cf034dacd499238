"""Filling missing fragments from an envelope with exponential weights.

At a grid point t the estimate is the weighted mean of the envelope members
observed at t, with weight ``exp(-theta * d_j / delta)`` where ``d_j`` is the
member's mean L2 distance to the focal curve and ``delta`` the smallest such
distance. One ``theta`` is shared by the whole sample and chosen on a grid by
minimizing the squared distance between each curve's observed part and its
in-sample reconstruction.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .depth import DepthKind
from .envelope import Envelope, EnvelopeConfig, build_envelope
from .errors import EmptyCurve, NoCandidates, NoEnvelope
from .fdcore import FunctionalSample, measure

log = logging.getLogger(__name__)

DEFAULT_THETA_GRID = (0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0)
DELTA_FLOOR = 1e-12


@dataclass(frozen=True)
class ReconstructConfig:
    theta_grid: tuple = DEFAULT_THETA_GRID
    theta: float | None = None
    fallback_mean: bool = False
    envelope: EnvelopeConfig = field(default_factory=EnvelopeConfig)
    workers: int = 1

    def __post_init__(self):
        grid = tuple(float(v) for v in self.theta_grid)
        if not grid or min(grid) < 0:
            raise ValueError("theta_grid must be non-empty and non-negative")
        object.__setattr__(self, "theta_grid", grid)
        if self.theta is not None and self.theta < 0:
            raise ValueError("theta must be non-negative")


@dataclass
class ReconstructionResult:
    focal: int
    filled_values: np.ndarray
    computable_obs_mask: np.ndarray
    theta: float
    delta: float
    coverage_fraction: float
    envelope: Envelope | None
    status: str = "ok"
    message: str = ""
    fallback_values: np.ndarray | None = None

    @property
    def filled_mask(self) -> np.ndarray:
        return ~np.isnan(self.filled_values)


def envelope_delta(envelope: Envelope) -> float:
    if envelope.empty:
        raise NoEnvelope(f"curve {envelope.focal} has an empty envelope")
    return max(min(envelope.member_distance), DELTA_FLOOR)


def _raw_weights(distances, avail: np.ndarray, theta: float, delta: float):
    # rescaling each column by the weight of its nearest available member
    # leaves the normalized weights unchanged and avoids underflow when
    # theta / delta is huge
    d = np.asarray(distances, dtype=float)[:, None]
    dmin = np.min(np.where(avail, d, np.inf), axis=0)
    some = np.isfinite(dmin)
    shift = np.where(avail, d - np.where(some, dmin, 0.0), 0.0)
    return np.where(avail, np.exp(-theta * shift / delta), 0.0), some


def pointwise_weights(distances, avail: np.ndarray, theta: float, delta: float) -> np.ndarray:
    """Normalized exponential weights, one column per grid point.

    ``avail`` is a (members, points) boolean array. Columns with no available
    member are all zero.
    """
    w, _ = _raw_weights(distances, avail, theta, delta)
    tot = w.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(tot > 0, w / tot, 0.0)


def _weighted_mean(vals: np.ndarray, avail: np.ndarray, distances, theta: float, delta: float) -> np.ndarray:
    w, some = _raw_weights(distances, avail, theta, delta)
    x = np.where(avail, vals, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        est = (w * x).sum(axis=0) / w.sum(axis=0)
    lo = np.min(np.where(avail, vals, np.inf), axis=0)
    hi = np.max(np.where(avail, vals, -np.inf), axis=0)
    # a weighted mean lies in [lo, hi]; clipping only removes rounding spill
    return np.where(some, np.clip(est, lo, hi), np.nan)


def reconstruct_with_theta(sample: FunctionalSample, envelope: Envelope, theta: float,
                           target_mask=None) -> np.ndarray:
    """Estimate curve ``envelope.focal`` on ``target_mask`` (default: its missing set).

    Returns a length-T array, NaN outside the target and where no envelope
    member is observed.
    """
    if theta < 0:
        raise ValueError("theta must be non-negative")
    delta = envelope_delta(envelope)
    i = envelope.focal
    target = ~sample.mask[i] if target_mask is None else np.asarray(target_mask, dtype=bool)
    idx = np.asarray(envelope.members, dtype=int)
    out = np.full(len(sample.grid), np.nan)
    if target.any():
        out[target] = _weighted_mean(
            sample.values[idx][:, target], sample.mask[idx][:, target],
            envelope.member_distance, theta, delta)
    return out


def computable_obs_set(sample: FunctionalSample, envelope: Envelope) -> np.ndarray:
    """Part of the focal observed set where at least one envelope member is observed."""
    i = envelope.focal
    if envelope.empty:
        return np.zeros(len(sample.grid), dtype=bool)
    idx = np.asarray(envelope.members, dtype=int)
    return sample.mask[i] & sample.mask[idx].any(axis=0)


class _InSampleFit:
    """Per-curve pieces needed to score theta values on the observed part."""

    def __init__(self, sample: FunctionalSample, envelope: Envelope, rms: bool):
        idx = np.asarray(envelope.members, dtype=int)
        obs = computable_obs_set(sample, envelope)
        self.usable = obs.sum() >= 2
        w = sample.grid.quad_weights[obs]
        lam = w.sum()
        self.w = w
        self.norm = lam if rms else lam * lam
        self.x = sample.values[envelope.focal, obs]
        avail = sample.mask[idx][:, obs]
        self.xm = np.where(avail, sample.values[idx][:, obs], 0.0)
        d = np.asarray(envelope.member_distance, dtype=float)[:, None]
        dmin = np.min(np.where(avail, d, np.inf), axis=0)
        self.scaled = np.where(avail, (d - dmin) / envelope_delta(envelope), np.inf)

    def losses(self, thetas: np.ndarray) -> np.ndarray:
        # theta * inf would give nan at theta = 0, so mask explicitly
        with np.errstate(invalid="ignore"):
            w = np.where(np.isinf(self.scaled), 0.0, np.exp(-thetas[:, None, None] * self.scaled))
        est = (w * self.xm).sum(axis=1) / w.sum(axis=1)
        r = self.x - est
        return np.sum(self.w * r * r, axis=1) / self.norm


def theta_objective(sample: FunctionalSample, envelopes, theta_grid, rms: bool = False) -> np.ndarray:
    """Sum over curves of the squared distance between observed and in-sample fitted parts, per theta."""
    fits = [_InSampleFit(sample, e, rms) for e in envelopes if e is not None and not e.empty]
    fits = [f for f in fits if f.usable]
    if not fits:
        raise NoEnvelope("no curve has a non-empty envelope to tune theta on")
    thetas = np.asarray(theta_grid, dtype=float)
    total = np.zeros(thetas.size)
    for f in fits:
        total += f.losses(thetas)
    return total


def tune_theta(sample: FunctionalSample, envelopes, theta_grid=DEFAULT_THETA_GRID, rms: bool = False) -> float:
    """Grid minimizer of :func:`theta_objective`; ties go to the smallest value."""
    grid = np.asarray(sorted(float(v) for v in theta_grid))
    if grid.size == 0 or grid[0] < 0:
        raise ValueError("theta_grid must be non-empty and non-negative")
    obj = theta_objective(sample, envelopes, grid, rms)
    return float(grid[int(np.argmin(obj))])


def _envelope_task(args):
    sample, i, kind, env_config = args
    try:
        return build_envelope(sample, i, kind, env_config), None
    except (NoCandidates, EmptyCurve) as exc:
        return None, exc


def build_envelopes(sample: FunctionalSample, indices, kind=DepthKind.MBD2,
                    config: EnvelopeConfig = EnvelopeConfig(), workers: int = 1):
    """Envelopes for several focal curves; failures come back as exceptions in the second list."""
    tasks = [(sample, int(i), DepthKind.parse(kind), config) for i in indices]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(_envelope_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        out = [_envelope_task(t) for t in tasks]
    return [e for e, _ in out], [err for _, err in out]


def pointwise_mean(sample: FunctionalSample) -> np.ndarray:
    """Mean of the values observed at each grid point (NaN where none is)."""
    q = sample.avail_count
    s = sample.filled(0.0).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(q > 0, s / q, np.nan)


def reconstruct_sample(sample: FunctionalSample, kind=DepthKind.MBD2,
                       config: ReconstructConfig = ReconstructConfig()):
    """Reconstruct every incomplete curve of ``sample``.

    Returns ``(results, completed)`` where ``results`` holds one
    :class:`ReconstructionResult` per incomplete curve (in index order) and
    ``completed`` is the sample with every computable missing value filled.
    Observed values are never modified. Per-curve failures are reported via
    ``status`` and do not stop the batch.
    """
    kind = DepthKind.parse(kind)
    T = len(sample.grid)
    incomplete = np.flatnonzero(~sample.complete)
    if incomplete.size == 0:
        return [], sample

    envelopes, errors = build_envelopes(sample, incomplete, kind, config.envelope, config.workers)

    if config.theta is not None:
        theta = float(config.theta)
    else:
        try:
            theta = tune_theta(sample, envelopes, config.theta_grid, config.envelope.rms_distance)
        except NoEnvelope:
            log.warning("no usable envelope for theta tuning; using theta=0")
            theta = 0.0

    fallback = pointwise_mean(sample) if config.fallback_mean else None
    values = sample.values.copy()
    mask = sample.mask.copy()
    results = []
    for i, env, err in zip(incomplete, envelopes, errors):
        i = int(i)
        missing = ~sample.mask[i]
        miss_measure = measure(missing, sample.grid)
        filled = np.full(T, np.nan)
        delta = np.nan
        status, message = "ok", ""
        if err is not None:
            status = "no_candidates" if isinstance(err, NoCandidates) else "empty_curve"
            message = str(err)
        elif env.empty:
            status, message = "empty_envelope", f"curve {i}: no batch was accepted"
        else:
            delta = envelope_delta(env)
            filled = reconstruct_with_theta(sample, env, theta, missing)
        got = ~np.isnan(filled)
        coverage = measure(got, sample.grid) / miss_measure if miss_measure > 0 else 1.0
        if status == "ok" and not got[missing].all():
            status = "partial"
            message = f"{int(np.sum(missing & ~got))} missing point(s) not covered by the envelope"
        fb = None
        if fallback is not None:
            fb = np.where(missing & ~got, fallback, np.nan)
        obs_hat = computable_obs_set(sample, env) if env is not None else np.zeros(T, dtype=bool)
        results.append(ReconstructionResult(
            focal=i, filled_values=filled, computable_obs_mask=obs_hat, theta=theta,
            delta=float(delta), coverage_fraction=float(coverage), envelope=env,
            status=status, message=message, fallback_values=fb))
        values[i, got] = filled[got]
        mask[i, got] = True
        if fb is not None:
            extra = ~np.isnan(fb)
            values[i, extra] = fb[extra]
            mask[i, extra] = True
    return results, FunctionalSample(sample.grid, values, mask)

