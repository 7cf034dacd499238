"""Gaussian-process samples and missing-completely-at-random corruption.

Curves are ``X_i = mu + eps_i`` where ``mu`` is one draw from a centered
periodic-kernel process ``sigma * exp(-2 sin(pi|s-t|)^2 / ell^2)`` and the
``eps_i`` are independent draws from ``alpha * exp(-beta |s-t|)``.

All randomness comes from Philox generators keyed by a seed plus optional
integer keys (e.g. a replicate index), so replicates are independent and
reproducible regardless of the order or process they are generated in.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .fdcore import FunctionalSample, Grid

JITTER_START = 1e-10
JITTER_MAX = 1e-6


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for the substream ``(seed, *keys)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class GPParams:
    alpha: float = 1.0
    beta: float = 2.0
    sigma: float = 3.0
    ell: float = 0.5
    jitter: float = JITTER_START

    def __post_init__(self):
        if self.alpha < 0 or self.sigma < 0 or self.jitter < 0:
            raise ConfigError("alpha, sigma and jitter must be non-negative")
        if self.beta <= 0 or self.ell <= 0:
            raise ConfigError("beta and ell must be positive")


class Mechanism(enum.Enum):
    RANDOM_INTERVALS = "intervals"
    RANDOM_POINTS = "points"

    @classmethod
    def parse(cls, value) -> "Mechanism":
        if isinstance(value, cls):
            return value
        v = str(value).lower().replace("_", "").replace("-", "").replace(" ", "")
        aliases = {"intervals": cls.RANDOM_INTERVALS, "randomintervals": cls.RANDOM_INTERVALS,
                   "points": cls.RANDOM_POINTS, "randompoints": cls.RANDOM_POINTS}
        if v not in aliases:
            raise ConfigError(f"unknown missing-data mechanism {value!r}")
        return aliases[v]


@dataclass(frozen=True)
class MissingSpec:
    """Corruption settings.

    ``c_percent`` is the share of curves left complete, ``p_percent`` the
    observed share of each corrupted curve and ``m`` the number of observed
    intervals (intervals mechanism only).
    """

    mechanism: Mechanism = Mechanism.RANDOM_POINTS
    c_percent: float = 0.0
    p_percent: float = 50.0
    m: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mechanism", Mechanism.parse(self.mechanism))
        if not 0 <= self.c_percent <= 100:
            raise ConfigError("c_percent must be in [0, 100]")
        if not 0 < self.p_percent <= 100:
            raise ConfigError("p_percent must be in (0, 100]")
        if int(self.m) != self.m or self.m < 1:
            raise ConfigError("m must be a positive integer")


def exponential_kernel(t: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    return alpha * np.exp(-beta * np.abs(t[:, None] - t[None, :]))


def periodic_kernel(t: np.ndarray, sigma: float, ell: float) -> np.ndarray:
    s = np.sin(np.pi * np.abs(t[:, None] - t[None, :]))
    return sigma * np.exp(-2.0 * s**2 / ell**2)


def cholesky_factor(K: np.ndarray, jitter: float = JITTER_START, max_jitter: float = JITTER_MAX) -> np.ndarray:
    """Lower Cholesky factor of ``K`` with diagonal jitter escalated by 10x as needed.

    Jitter is relative to the largest diagonal entry. A zero matrix yields a
    zero factor.
    """
    scale = float(np.max(np.diag(K)))
    if scale == 0.0:
        return np.zeros_like(K)
    eye = np.eye(K.shape[0])
    rel = jitter
    while True:
        try:
            return np.linalg.cholesky(K + rel * scale * eye)
        except np.linalg.LinAlgError:
            rel *= 10
            if rel > max_jitter * (1 + 1e-9):
                raise NumericalError("kernel matrix is not positive definite even with maximal jitter") from None


def gp_mean(grid: Grid, params: GPParams, rng: np.random.Generator) -> np.ndarray:
    L = cholesky_factor(periodic_kernel(grid.points, params.sigma, params.ell), params.jitter)
    return L @ rng.standard_normal(len(grid))


def gp_sample(n: int, grid: Grid, params: GPParams = GPParams(), seed=0, mean: np.ndarray | None = None,
              return_mean: bool = False):
    """Draw ``n`` complete curves sharing one random periodic mean.

    ``seed`` is an integer or a ``numpy.random.Generator``. Pass ``mean`` to
    hold the mean function fixed instead of drawing it.
    """
    if n < 1:
        raise ConfigError("n must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    T = len(grid)
    mu = gp_mean(grid, params, rng) if mean is None else np.asarray(mean, dtype=float)
    if params.alpha == 0:
        X = np.tile(mu, (n, 1))
    else:
        L = cholesky_factor(exponential_kernel(grid.points, params.alpha, params.beta), params.jitter)
        X = mu + rng.standard_normal((n, T)) @ L.T
    sample = FunctionalSample.from_complete(grid, X)
    return (sample, mu) if return_mean else sample


def _rng_for(spec: MissingSpec, rng) -> np.random.Generator:
    return make_rng(spec.seed) if rng is None else rng


def _corrupted_rows(n: int, c_percent: float, rng: np.random.Generator) -> np.ndarray:
    n_complete = int(round(c_percent / 100 * n))
    return np.sort(rng.permutation(n)[: n - n_complete])


def _check_complete(sample: FunctionalSample):
    if not sample.mask.all():
        raise ConfigError("corruption mechanisms expect a fully observed sample")


def check_feasible(spec: MissingSpec, T: int) -> None:
    """Raise :class:`ConfigError` if ``spec`` cannot be realized on a grid of ``T`` points."""
    if spec.p_percent == 100:
        return
    if spec.mechanism is Mechanism.RANDOM_POINTS:
        keep = int(round(spec.p_percent / 100 * T))
        if keep < 2:
            raise ConfigError(f"p={spec.p_percent}% keeps {keep} of {T} grid points; need at least 2")
        return
    m = int(spec.m)
    K = int(round(spec.p_percent / 100 * (T - 1)))
    if K < max(2, m) or T - K - (m - 1) < 0:
        raise ConfigError(f"cannot place {m} disjoint intervals covering {spec.p_percent}% of {T} points")


def random_points_masks(n: int, T: int, spec: MissingSpec, rng=None) -> np.ndarray:
    rng = _rng_for(spec, rng)
    mask = np.ones((n, T), dtype=bool)
    if spec.p_percent == 100:
        return mask
    check_feasible(spec, T)
    keep = int(round(spec.p_percent / 100 * T))
    for i in _corrupted_rows(n, spec.c_percent, rng):
        row = np.zeros(T, dtype=bool)
        row[rng.choice(T, size=keep, replace=False)] = True
        mask[i] = row
    return mask


def _interval_row(u: np.ndarray, target: float, T: int, m: int) -> np.ndarray:
    """One mask with ``m`` separated runs; ``u`` are sorted uniforms placing the gaps.

    An interior grid point carries one spacing of weight and an end point
    half of one, so a run touching an end of the grid loses half a spacing.
    The point count ``K`` is therefore chosen so that ``K - ends/2`` is the
    integer closest to ``target``; since touching ends only become more
    likely as ``K`` grows, the fixed point is reached in a few steps.
    """
    K = int(round(target))
    for _ in range(4):
        free = T - K - (m - 1)
        breaks = np.rint(u * free).astype(int)
        gaps = np.diff(np.concatenate([[0], breaks, [free]]))
        ends = int(gaps[0] == 0) + int(gaps[-1] == 0)
        K_next = int(round(target + ends / 2))
        if K_next == K or T - K_next - (m - 1) < 0:
            break
        K = K_next
    runs = np.full(m, K // m)
    runs[: K % m] += 1
    gaps[1:m] += 1
    row = np.zeros(T, dtype=bool)
    pos = 0
    for k in range(m):
        pos += gaps[k]
        row[pos: pos + runs[k]] = True
        pos += runs[k]
    return row


def random_intervals_masks(n: int, T: int, spec: MissingSpec, rng=None) -> np.ndarray:
    """Masks with ``m`` disjoint observed runs covering ``p%`` of the grid.

    Works in grid-cell units: about ``p% * (T - 1)`` observed points, split
    into ``m`` runs of (nearly) equal length; the unobserved points are spread
    over the ``m + 1`` gaps by uniform stick-breaking with break points
    snapped to the nearest integer, keeping at least one unobserved point
    between consecutive runs. The realized measure is within half a grid
    spacing of ``p%``.
    """
    rng = _rng_for(spec, rng)
    mask = np.ones((n, T), dtype=bool)
    if spec.p_percent == 100:
        return mask
    m = int(spec.m)
    target = spec.p_percent / 100 * (T - 1)
    check_feasible(spec, T)
    for i in _corrupted_rows(n, spec.c_percent, rng):
        mask[i] = _interval_row(np.sort(rng.uniform(0.0, 1.0, m)), target, T, m)
    return mask


def apply_random_points(sample: FunctionalSample, spec: MissingSpec, rng=None) -> FunctionalSample:
    """Keep a uniform random subset of ``round(p% * T)`` points on ``(100 - c)%`` of the curves."""
    _check_complete(sample)
    return sample.with_mask(random_points_masks(sample.n, len(sample.grid), spec, rng))


def apply_random_intervals(sample: FunctionalSample, spec: MissingSpec, rng=None) -> FunctionalSample:
    """Observe ``(100 - c)%`` of the curves on ``m`` random disjoint intervals of total share ``p%``."""
    _check_complete(sample)
    return sample.with_mask(random_intervals_masks(sample.n, len(sample.grid), spec, rng))


def corrupt(sample: FunctionalSample, spec: MissingSpec, rng=None) -> FunctionalSample:
    if spec.mechanism is Mechanism.RANDOM_POINTS:
        return apply_random_points(sample, spec, rng)
    return apply_random_intervals(sample, spec, rng)
