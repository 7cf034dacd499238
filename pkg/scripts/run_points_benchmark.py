"""Run the random-points benchmark and compare medians with reference values.

    python scripts/run_points_benchmark.py [--config scripts/points_c0.cfg] [--replicates 20] [--workers 4]
"""

import argparse
import os
from pathlib import Path

from fdrecon.bench import BenchConfig, emit_table, replicate_csv, run_benchmark

HERE = Path(__file__).parent
REFERENCE = {(0.0, 25.0): 0.259, (0.0, 50.0): 0.168, (0.0, 75.0): 0.143, (75.0, 50.0): 0.138}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=HERE / "points_c0.cfg")
    ap.add_argument("--replicates", type=int)
    ap.add_argument("--workers", type=int, default=int(os.environ.get("FDRECON_WORKERS", os.cpu_count() or 1)))
    ap.add_argument("--out-dir", type=Path)
    args = ap.parse_args()

    overrides = {"workers": args.workers}
    if args.replicates:
        overrides["replicates"] = args.replicates
    config = BenchConfig.from_file(args.config, **overrides)
    result = run_benchmark(config)
    csv_text, table = emit_table(result)
    print(table)

    print(f"\n{'cell':<14}{'median':>9}{'reference':>11}{'rel':>9}")
    for cell in result.cells:
        key = (float(cell.spec.c_percent), float(cell.spec.p_percent))
        if key in REFERENCE:
            ref = REFERENCE[key]
            print(f"{cell.label:<14}{cell.median_mse:9.4f}{ref:11.3f}{(cell.median_mse - ref) / ref:+9.1%}")
    print(f"\n{result.seconds:.1f} s with {config.workers} worker(s)")

    if args.out_dir:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        (args.out_dir / "results.csv").write_text(csv_text)
        (args.out_dir / "replicates.csv").write_text(replicate_csv(result))


if __name__ == "__main__":
    main()
