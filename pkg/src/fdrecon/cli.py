"""Command-line entry point: ``fdrecon <subcommand> ...``.

Each run writes its outputs plus exactly one JSON run manifest recording the
argument vector, the resolved settings, input and output hashes and tool
versions. ``fdrecon replay MANIFEST`` re-executes a manifest and, with
``--check``, verifies that the outputs come out byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import platform
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .bench import BenchConfig, config_dict, emit_table, replicate_csv, run_benchmark
from .csvio import format_float, read_csv, write_csv
from .depth import DepthKind, poifd_all
from .envelope import EnvelopeConfig, build_envelope
from .errors import (ConfigError, EmptyCurve, EmptySection, FDReconError, MalformedCSV, NoCandidates,
                     NoEnvelope, NumericalError, StructuralError)
from .fdcore import FunctionalSample, Grid, measure
from .reconstruct import DEFAULT_THETA_GRID, ReconstructConfig, reconstruct_sample
from .simgen import GPParams, MissingSpec, corrupt, gp_sample, make_rng

log = logging.getLogger("fdrecon")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_CSV = 3
EXIT_CONFIG = 4
EXIT_NUMERICAL = 5
EXIT_IO = 6
EXIT_DATA = 7
EXIT_MISMATCH = 8

# options whose values are output locations; replay may redirect them
OUTPUT_OPTIONS = ("--out", "--report", "--mean-out", "--out-dir", "--manifest")


class ReplayMismatch(Exception):
    pass


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _versions() -> dict:
    import numba

    return {"fdrecon": __version__, "numpy": np.__version__, "numba": numba.__version__,
            "python": platform.python_version()}


def _default_workers() -> int:
    raw = os.environ.get("FDRECON_WORKERS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"FDRECON_WORKERS must be an integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError("FDRECON_WORKERS must be at least 1")
    return value


def _floats(text: str) -> tuple:
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


class _Run:
    """Collects what a subcommand read and wrote, for the manifest."""

    def __init__(self, args, argv):
        self.args = args
        self.argv = list(argv)
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, str] = {}
        self.config: dict = {}
        self.seed = getattr(args, "seed", None)

    def read(self, path) -> FunctionalSample:
        self.inputs[str(path)] = _sha256(path)
        return read_csv(path)

    def wrote(self, role: str, path):
        self.outputs[role] = str(path)

    def manifest_path(self) -> Path:
        if getattr(self.args, "manifest", None):
            return Path(self.args.manifest)
        if getattr(self.args, "out_dir", None):
            return Path(self.args.out_dir) / "manifest.json"
        if getattr(self.args, "out", None):
            return Path(str(self.args.out) + ".manifest.json")
        return Path(f"fdrecon-{self.args.command}.manifest.json")

    def write_manifest(self) -> Path:
        path = self.manifest_path()
        doc = {
            "subcommand": self.args.command,
            "argv": self.argv,
            "config": self.config,
            "seed": self.seed,
            "inputs": self.inputs,
            "outputs": {role: {"path": p, "sha256": _sha256(p)} for role, p in sorted(self.outputs.items())},
            "versions": _versions(),
        }
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _write_text(path, text: str):
    Path(path).write_text(text, encoding="utf-8")


def _emit(run: _Run, text: str, role: str):
    """Write ``text`` to ``--out`` when given, otherwise to stdout."""
    out = getattr(run.args, "out", None)
    if out:
        _write_text(out, text)
        run.wrote(role, out)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- subcommands

def cmd_simulate(run: _Run):
    a = run.args
    params = GPParams(alpha=a.alpha, beta=a.beta, sigma=a.sigma, ell=a.ell)
    grid = Grid.uniform(a.T)
    sample, mu = gp_sample(a.n, grid, params, make_rng(a.seed), return_mean=True)
    write_csv(sample, a.out)
    run.wrote("sample", a.out)
    if a.mean_out:
        write_csv(FunctionalSample.from_complete(grid, mu[None, :]), a.mean_out)
        run.wrote("mean", a.mean_out)
    run.config = {"n": a.n, "T": a.T, "alpha": a.alpha, "beta": a.beta, "sigma": a.sigma, "ell": a.ell,
                  "jitter": params.jitter, "grid": "uniform[0,1]"}


def cmd_corrupt(run: _Run):
    a = run.args
    sample = run.read(a.input)
    spec = MissingSpec(a.mechanism, a.c, a.p, a.m, a.seed)
    out = corrupt(sample, spec)
    write_csv(out, a.out)
    run.wrote("sample", a.out)
    run.config = {"mechanism": spec.mechanism.value, "c_percent": spec.c_percent,
                  "p_percent": spec.p_percent, "m": spec.m}


def cmd_depth(run: _Run):
    a = run.args
    sample = run.read(a.input)
    kind = DepthKind.parse(a.depth_kind)
    depths = poifd_all(sample, kind)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "depth", "observed_measure"])
    for i in range(sample.n):
        d = "" if math.isnan(depths[i]) else format_float(depths[i])
        w.writerow([i, d, format_float(measure(sample.mask[i], sample.grid))])
    _emit(run, buf.getvalue(), "depth")
    run.config = {"depth_kind": kind.value}


def cmd_envelope(run: _Run):
    a = run.args
    sample = run.read(a.input)
    kind = DepthKind.parse(a.depth_kind)
    config = EnvelopeConfig(coverage_fallback=a.coverage_fallback, rms_distance=a.rms_distance)
    env = build_envelope(sample, a.focal, kind, config)
    members = set(env.members)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "position", "index", "distance", "reason", "envelopment_gain",
                "new_coverage", "batch_accepted", "member", "depth_before", "depth_after"])
    for it, rec in enumerate(env.trace):
        for pos, adm in enumerate(rec.batch):
            w.writerow([it, pos, adm.index, format_float(adm.distance), adm.reason,
                        format_float(adm.envelopment_gain), adm.new_coverage,
                        int(rec.accepted), int(adm.index in members),
                        format_float(rec.depth_before), format_float(rec.depth_after)])
    _emit(run, buf.getvalue(), "envelope")
    log.info("curve %d: %d member(s), depth %.6g, enveloped measure %.6g",
             a.focal, len(env), env.final_depth, env.enveloped_measure)
    run.config = {"depth_kind": kind.value, "focal": a.focal, "coverage_fallback": a.coverage_fallback,
                  "rms_distance": a.rms_distance}


def _json_float(x):
    return None if x is None or not math.isfinite(x) else float(x)


def cmd_reconstruct(run: _Run):
    a = run.args
    sample = run.read(a.input)
    kind = DepthKind.parse(a.depth_kind)
    config = ReconstructConfig(
        theta_grid=a.theta_grid, theta=a.theta, fallback_mean=a.fallback_mean,
        envelope=EnvelopeConfig(coverage_fallback=a.coverage_fallback, rms_distance=a.rms_distance),
        workers=a.workers)
    report = a.report or str(a.out) + ".report.jsonl"
    run.config = {"depth_kind": kind.value, "theta": a.theta, "theta_grid": list(config.theta_grid),
                  "fallback_mean": a.fallback_mean, "coverage_fallback": a.coverage_fallback,
                  "rms_distance": a.rms_distance, "workers": a.workers}
    if sample.mask.all():
        log.warning("no missing data")
        shutil.copyfile(a.input, a.out)
        _write_text(report, "")
    else:
        results, completed = reconstruct_sample(sample, kind, config)
        write_csv(completed, a.out)
        lines = []
        for r in results:
            env = r.envelope
            lines.append(json.dumps({
                "focal": r.focal,
                "status": r.status,
                "message": r.message,
                "theta": r.theta,
                "delta": _json_float(r.delta),
                "coverage_fraction": r.coverage_fraction,
                "members": list(env.members) if env is not None else [],
                "member_distance": list(env.member_distance) if env is not None else [],
                "filled_points": int(np.sum(r.filled_mask)),
                "fallback_points": 0 if r.fallback_values is None else int(np.sum(~np.isnan(r.fallback_values))),
            }, sort_keys=True))
        _write_text(report, "".join(line + "\n" for line in lines))
        if results:
            run.config["theta_selected"] = results[0].theta
        bad = [r for r in results if r.status != "ok"]
        if bad:
            log.warning("%d of %d curve(s) not fully reconstructed; see %s", len(bad), len(results), report)
    run.wrote("sample", a.out)
    run.wrote("report", report)


def cmd_bench(run: _Run):
    a = run.args
    overrides = {"workers": a.workers}
    if a.seed is not None:
        overrides["seed"] = a.seed
    if a.replicates is not None:
        overrides["replicates"] = a.replicates
    config = BenchConfig.from_file(a.config, **overrides)
    run.inputs[str(a.config)] = _sha256(a.config)
    run.seed = config.seed
    out_dir = Path(a.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = run_benchmark(config)
    table_csv, table_txt = emit_table(result)
    _write_text(out_dir / "results.csv", table_csv)
    _write_text(out_dir / "replicates.csv", replicate_csv(result))
    run.wrote("results", out_dir / "results.csv")
    run.wrote("replicates", out_dir / "replicates.csv")
    sys.stdout.write(table_txt)
    for cell in result.cells:
        if cell.flagged:
            log.warning("cell %s: %d of %d replicates failed", cell.label, cell.n_failed, len(cell.errors))
    log.info("%d replicate(s) in %.1f s", len(result.outcomes), result.seconds)
    run.config = config_dict(config)
    run.config["digest"] = config.digest()


class _Filled:
    def __init__(self, focal, filled_values):
        self.focal = focal
        self.filled_values = filled_values


def cmd_plot(run: _Run):
    from .plot import emit_plot

    a = run.args
    sample = run.read(a.input)
    truth = run.read(a.truth) if a.truth else None
    recs = []
    if a.filled:
        if a.focal is None:
            raise ConfigError("--filled needs --focal")
        filled = run.read(a.filled)
        if filled.grid != sample.grid or filled.n != sample.n:
            raise StructuralError("--filled does not match the input sample")
        vals = np.where(~sample.mask[a.focal] & filled.mask[a.focal], filled.values[a.focal], np.nan)
        recs.append(_Filled(a.focal, vals))
    if truth is not None and (truth.grid != sample.grid or truth.n != sample.n):
        raise StructuralError("--truth does not match the input sample")
    emit_plot(sample, recs, a.out, truth=truth, focal=a.focal, title=a.title)
    run.wrote("plot", a.out)
    run.config = {"focal": a.focal, "title": a.title}


def cmd_replay(args) -> int:
    doc = json.loads(Path(args.manifest_file).read_text(encoding="utf-8"))
    for path, digest in doc["inputs"].items():
        if _sha256(path) != digest:
            raise ReplayMismatch(f"input {path} changed since the recorded run")
    argv = list(doc["argv"])
    if not args.check:
        return main(argv)
    with tempfile.TemporaryDirectory() as tmp:
        redirected = {}
        for k, tok in enumerate(argv[:-1]):
            if tok in OUTPUT_OPTIONS:
                new = str(Path(tmp) / f"{k}_{Path(argv[k + 1]).name}")
                redirected[argv[k + 1]] = new
                argv[k + 1] = new
        code = main(argv)
        if code != EXIT_OK:
            return code
        for role, rec in doc["outputs"].items():
            path = rec["path"]
            new = next((path.replace(old, nw, 1) for old, nw in redirected.items()
                        if path == old or path.startswith(old.rstrip("/") + "/") or path.startswith(old + ".")),
                       None)
            if new is None:
                new = path
            if _sha256(new) != rec["sha256"]:
                raise ReplayMismatch(f"output {role!r} differs from the recorded run")
    sys.stderr.write("replay: outputs identical\n")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fdrecon", description="Depth-based reconstruction of partially observed curves.")
    p.add_argument("--version", action="version", version=f"fdrecon {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed_default=0):
        sp.add_argument("--seed", type=int, default=seed_default, help="master seed")
        sp.add_argument("--manifest", help="manifest path (default: next to the main output)")

    def kind(sp):
        sp.add_argument("--depth-kind", choices=[k.value for k in DepthKind], default="mbd2")

    def env_flags(sp):
        sp.add_argument("--coverage-fallback", action="store_true",
                        help="also consider curves with no usable overlap, after all others")
        sp.add_argument("--rms-distance", action="store_true",
                        help="normalize the L2 distance by the square root of the overlap length")

    sp = sub.add_parser("simulate", help="draw complete GP curves on a uniform grid")
    sp.add_argument("--n", type=_positive_int, default=200)
    sp.add_argument("--T", type=int, default=100)
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--beta", type=float, default=2.0)
    sp.add_argument("--sigma", type=float, default=3.0)
    sp.add_argument("--ell", type=float, default=0.5)
    sp.add_argument("--out", required=True)
    sp.add_argument("--mean-out", help="also write the drawn mean function")
    common(sp)

    sp = sub.add_parser("corrupt", help="remove values from a complete sample")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--mechanism", default="points", help="points or intervals")
    sp.add_argument("--c", type=float, default=0.0, help="percent of curves left complete")
    sp.add_argument("--p", type=float, default=50.0, help="observed percent of each corrupted curve")
    sp.add_argument("--m", type=int, default=1, help="observed intervals per curve (intervals only)")
    common(sp)

    sp = sub.add_parser("depth", help="depth of every curve")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", help="CSV path (default: stdout)")
    kind(sp)
    common(sp)

    sp = sub.add_parser("envelope", help="envelope selection trace for one curve")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--focal", type=int, required=True)
    sp.add_argument("--out", help="CSV path (default: stdout)")
    kind(sp)
    env_flags(sp)
    common(sp)

    sp = sub.add_parser("reconstruct", help="fill the missing parts of every curve")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--report", help="JSON-lines report (default: OUT.report.jsonl)")
    kind(sp)
    grp = sp.add_mutually_exclusive_group()
    grp.add_argument("--theta", type=float, help="fixed weight sharpness")
    grp.add_argument("--theta-grid", type=_floats, default=DEFAULT_THETA_GRID,
                     help="comma-separated candidate values")
    sp.add_argument("--fallback-mean", action="store_true",
                    help="fill points no envelope member observes with the cross-sectional mean")
    env_flags(sp)
    sp.add_argument("--workers", type=_positive_int, default=None)
    common(sp)

    sp = sub.add_parser("bench", help="Monte-Carlo benchmark from a key = value config file")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--replicates", type=_positive_int, help="override the config value")
    sp.add_argument("--workers", type=_positive_int, default=None)
    common(sp, seed_default=None)

    sp = sub.add_parser("plot", help="SVG of a curve, its truth and its reconstruction")
    sp.add_argument("--in", dest="input", required=True, help="partially observed sample")
    sp.add_argument("--out", required=True)
    sp.add_argument("--focal", type=int)
    sp.add_argument("--filled", help="completed sample from `reconstruct`")
    sp.add_argument("--truth", help="complete sample")
    sp.add_argument("--title")
    common(sp)

    sp = sub.add_parser("replay", help="re-run a recorded manifest")
    sp.add_argument("manifest_file")
    sp.add_argument("--check", action="store_true",
                    help="write to a scratch directory and compare output hashes")
    return p


COMMANDS = {
    "simulate": cmd_simulate,
    "corrupt": cmd_corrupt,
    "depth": cmd_depth,
    "envelope": cmd_envelope,
    "reconstruct": cmd_reconstruct,
    "bench": cmd_bench,
    "plot": cmd_plot,
}


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, MalformedCSV):
        return EXIT_CSV
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    if isinstance(exc, (StructuralError, EmptyCurve, EmptySection, NoCandidates, NoEnvelope, IndexError)):
        return EXIT_DATA
    if isinstance(exc, ReplayMismatch):
        return EXIT_MISMATCH
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_INTERNAL


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not logging.getLogger().handlers:
        logging.basicConfig(format="fdrecon: %(levelname)s: %(message)s", stream=sys.stderr)
    log.setLevel(logging.INFO if args.verbose else logging.WARNING)
    try:
        if args.command == "replay":
            return cmd_replay(args)
        if hasattr(args, "workers") and args.workers is None:
            args.workers = _default_workers()
        run = _Run(args, argv)
        COMMANDS[args.command](run)
        run.write_manifest()
        return EXIT_OK
    except (FDReconError, ReplayMismatch, OSError, IndexError, ValueError) as exc:
        if isinstance(exc, ValueError) and not isinstance(exc, FDReconError):
            code = EXIT_CONFIG
        else:
            code = _exit_code(exc)
        sys.stderr.write(f"fdrecon: error [{type(exc).__name__}]: {exc}\n")
        return code


if __name__ == "__main__":
    sys.exit(main())
