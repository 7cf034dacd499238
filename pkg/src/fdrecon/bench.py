"""Monte-Carlo benchmark: simulate, corrupt, reconstruct, score.

A benchmark runs a grid of missing-data cells (m, c, p) times a number of
replicates. Replicate ``r`` draws its complete GP sample from the substream
``(seed, 0, r)``, shared by all cells, and its masks from ``(seed, 1, r, cell)``,
so results do not depend on the worker count or the execution order.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .depth import DepthKind
from .envelope import EnvelopeConfig
from .errors import ConfigError, FDReconError
from .fdcore import FunctionalSample, Grid
from .reconstruct import DEFAULT_THETA_GRID, ReconstructConfig, reconstruct_sample
from .simgen import GPParams, Mechanism, MissingSpec, check_feasible, corrupt, gp_mean, gp_sample, make_rng

POOLINGS = ("pooled", "per_curve", "per_curve_median")
FAIL_SHARE = 0.10


@dataclass(frozen=True)
class BenchConfig:
    n: int = 200
    T: int = 100
    replicates: int = 100
    alpha: float = 1.0
    beta: float = 2.0
    sigma: float = 3.0
    ell: float = 0.5
    mechanism: Mechanism = Mechanism.RANDOM_POINTS
    c_values: tuple = (0.0,)
    p_values: tuple = (25.0, 50.0, 75.0)
    m_values: tuple = (1,)
    depth_kind: DepthKind = DepthKind.MBD2
    theta_grid: tuple = DEFAULT_THETA_GRID
    seed: int = 0
    workers: int = 1
    pooling: str = "pooled"
    fix_mean: bool = False
    fallback_mean: bool = False
    coverage_fallback: bool = False
    rms_distance: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mechanism", Mechanism.parse(self.mechanism))
        object.__setattr__(self, "depth_kind", DepthKind.parse(self.depth_kind))
        for name in ("c_values", "p_values", "theta_grid"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        object.__setattr__(self, "m_values", tuple(int(v) for v in self.m_values))
        if self.replicates < 1 or self.n < 2 or self.T < 2 or self.workers < 1:
            raise ConfigError("replicates, workers must be >= 1 and n, T >= 2")
        if self.pooling not in POOLINGS:
            raise ConfigError(f"pooling must be one of {POOLINGS}")
        if not self.c_values or not self.p_values or not self.m_values or not self.theta_grid:
            raise ConfigError("c, p, m and theta grids must be non-empty")
        # building these validates the GP and missing-data parameters
        self.gp_params
        for spec in self.cells():
            check_feasible(spec, self.T)

    @property
    def gp_params(self) -> GPParams:
        return GPParams(alpha=self.alpha, beta=self.beta, sigma=self.sigma, ell=self.ell)

    def cells(self) -> list[MissingSpec]:
        ms = self.m_values if self.mechanism is Mechanism.RANDOM_INTERVALS else (1,)
        return [MissingSpec(self.mechanism, c, p, m, self.seed)
                for m, c, p in itertools.product(ms, self.c_values, self.p_values)]

    def recon_config(self) -> ReconstructConfig:
        return ReconstructConfig(
            theta_grid=self.theta_grid, fallback_mean=self.fallback_mean,
            envelope=EnvelopeConfig(self.coverage_fallback, self.rms_distance))

    def to_text(self) -> str:
        """Flat ``key = value`` rendering, readable by :meth:`from_text`."""
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ", ".join(_fmt(x) for x in v)
            elif isinstance(v, (Mechanism, DepthKind)):
                v = v.value
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = _fmt(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, **overrides) -> "BenchConfig":
        """Parse ``key = value`` lines; ``#`` starts a comment. Lists are comma separated."""
        known = {f.name: f for f in fields(cls)}
        aliases = {"c": "c_values", "p": "p_values", "m": "m_values", "kind": "depth_kind"}
        kw = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = aliases.get(key, key)
            if key not in known:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            kw[key] = _coerce(known[key].default, value, lineno)
        kw.update(overrides)
        return cls(**kw)

    @classmethod
    def from_file(cls, path, **overrides) -> "BenchConfig":
        return cls.from_text(Path(path).read_text(encoding="utf-8"), **overrides)

    def digest(self) -> str:
        """Hash of the result-determining settings (the worker count is excluded)."""
        text = "\n".join(l for l in self.to_text().splitlines() if not l.startswith("workers"))
        return hashlib.sha256(text.encode()).hexdigest()


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, float) else str(x)


def _coerce(default, value: str, lineno: int):
    try:
        if isinstance(default, bool):
            if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(value)
            return value.lower() in ("true", "1", "yes")
        if isinstance(default, tuple):
            return tuple(float(v) for v in value.split(",") if v.strip())
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
        return value
    except ValueError:
        raise ConfigError(f"line {lineno}: bad value {value!r}") from None


def mse_missing(original: FunctionalSample, reconstructed: FunctionalSample, results,
                pooling: str = "pooled") -> float:
    """Quadrature-weighted mean squared error over the filled missing points.

    ``pooled`` pools all filled points of all curves; ``per_curve`` averages
    per-curve MSEs; ``per_curve_median`` takes their median. Returns NaN when
    nothing was filled.
    """
    if original.grid != reconstructed.grid:
        raise ValueError("samples live on different grids")
    w = original.grid.quad_weights
    num = den = 0.0
    per_curve = []
    for r in results:
        filled = ~np.isnan(r.filled_values)
        if r.fallback_values is not None:
            filled |= ~np.isnan(r.fallback_values)
        if not filled.any():
            continue
        i = r.focal
        e = reconstructed.values[i, filled] - original.values[i, filled]
        s = float(np.sum(w[filled] * e * e))
        m = float(np.sum(w[filled]))
        num += s
        den += m
        per_curve.append(s / m)
    if den == 0:
        return math.nan
    if pooling == "pooled":
        return num / den
    if pooling == "per_curve":
        return float(np.mean(per_curve))
    if pooling == "per_curve_median":
        return float(np.median(per_curve))
    raise ValueError(f"unknown pooling {pooling!r}")


@dataclass
class ReplicateOutcome:
    cell: int
    replicate: int
    mse: float
    coverage: float
    failed_curves: int
    error: str = ""
    seconds: float = 0.0

    @property
    def failed(self) -> bool:
        return bool(self.error)


def run_replicate(config: BenchConfig, cell: int, replicate: int) -> ReplicateOutcome:
    t0 = time.perf_counter()
    spec = config.cells()[cell]
    grid = Grid.uniform(config.T)
    try:
        mean = gp_mean(grid, config.gp_params, make_rng(config.seed, 2)) if config.fix_mean else None
        full = gp_sample(config.n, grid, config.gp_params, make_rng(config.seed, 0, replicate), mean=mean)
        part = corrupt(full, spec, make_rng(config.seed, 1, replicate, cell))
        results, completed = reconstruct_sample(part, config.depth_kind, config.recon_config())
        mse = mse_missing(full, completed, results, config.pooling)
        cov = float(np.mean([r.coverage_fraction for r in results])) if results else 1.0
        failed = sum(r.status not in ("ok", "partial") for r in results)
        err = "" if math.isfinite(mse) or not results else "no filled points"
        if not results:
            mse = math.nan
            err = "no incomplete curves"
    except FDReconError as exc:
        mse, cov, failed, err = math.nan, math.nan, 0, f"{type(exc).__name__}: {exc}"
    return ReplicateOutcome(cell, replicate, mse, cov, failed, err, time.perf_counter() - t0)


def _replicate_task(args):
    return run_replicate(*args)


@dataclass
class CellResult:
    spec: MissingSpec
    mse: np.ndarray
    coverage: np.ndarray
    errors: list[str]
    seconds: float

    @property
    def n_failed(self) -> int:
        return sum(bool(e) for e in self.errors)

    @property
    def flagged(self) -> bool:
        return self.n_failed > FAIL_SHARE * len(self.errors)

    @property
    def median_mse(self) -> float:
        ok = self.mse[np.isfinite(self.mse)]
        if self.flagged or ok.size == 0:
            return math.nan
        return float(np.median(ok))

    @property
    def mean_coverage(self) -> float:
        ok = self.coverage[np.isfinite(self.coverage)]
        return float(np.mean(ok)) if ok.size else math.nan

    @property
    def label(self) -> str:
        s = f"c={_num(self.spec.c_percent)} p={_num(self.spec.p_percent)}"
        if self.spec.mechanism is Mechanism.RANDOM_INTERVALS:
            s = f"m={self.spec.m} " + s
        return s


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


@dataclass
class BenchResult:
    config: BenchConfig
    cells: list[CellResult]
    seconds: float = 0.0
    outcomes: list[ReplicateOutcome] = field(default_factory=list, repr=False)

    def cell(self, c=None, p=None, m=None) -> CellResult:
        for cr in self.cells:
            s = cr.spec
            if (c is None or s.c_percent == c) and (p is None or s.p_percent == p) and (m is None or s.m == m):
                return cr
        raise KeyError((c, p, m))


def run_benchmark(config: BenchConfig, workers: int | None = None) -> BenchResult:
    """Run every (cell, replicate) pair and aggregate per-cell medians."""
    workers = config.workers if workers is None else workers
    t0 = time.perf_counter()
    cells = config.cells()
    tasks = [(config, k, r) for k in range(len(cells)) for r in range(config.replicates)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            outcomes = list(ex.map(_replicate_task, tasks))
    else:
        outcomes = [_replicate_task(t) for t in tasks]
    out = []
    for k, spec in enumerate(cells):
        rows = [o for o in outcomes if o.cell == k]
        out.append(CellResult(
            spec=spec,
            mse=np.array([o.mse for o in rows]),
            coverage=np.array([o.coverage for o in rows]),
            errors=[o.error for o in rows],
            seconds=sum(o.seconds for o in rows),
        ))
    return BenchResult(config, out, time.perf_counter() - t0, outcomes)


def _fmt_cell(x: float, digits=None) -> str:
    if not math.isfinite(x):
        return "NA"
    return repr(float(x)) if digits is None else f"{x:.{digits}f}"


def emit_table(result: BenchResult) -> tuple[str, str]:
    """Results as (CSV text, aligned text table): one row per method variant, one column per cell."""
    method = f"Depth-based ({result.config.depth_kind.value})"
    labels = [c.label for c in result.cells]
    values = [c.median_mse for c in result.cells]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method"] + labels)
    w.writerow([method] + [_fmt_cell(v) for v in values])
    cells = [_fmt_cell(v, 3) for v in values]
    widths = [max(len(a), len(b)) for a, b in zip(labels, cells)]
    mw = max(len("Method"), len(method))
    lines = [
        "  ".join(["Method".ljust(mw)] + [a.rjust(k) for a, k in zip(labels, widths)]),
        "  ".join([method.ljust(mw)] + [b.rjust(k) for b, k in zip(cells, widths)]),
    ]
    return buf.getvalue(), "\n".join(lines) + "\n"


def replicate_csv(result: BenchResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["mechanism", "m", "c", "p", "replicate", "mse", "coverage", "failed_curves", "error"])
    cells = result.config.cells()
    for o in result.outcomes:
        s = cells[o.cell]
        w.writerow([s.mechanism.value, s.m, _num(s.c_percent), _num(s.p_percent), o.replicate,
                    _fmt_cell(o.mse), _fmt_cell(o.coverage), o.failed_curves, o.error])
    return buf.getvalue()


def config_dict(config: BenchConfig) -> dict:
    d = asdict(config)
    d["mechanism"] = config.mechanism.value
    d["depth_kind"] = config.depth_kind.value
    return d
