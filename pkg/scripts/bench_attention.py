"""Time the attention policies and print a throughput table.

Thin wrapper over refguide.bench.run_bench for desk use; the ``refguide
bench`` subcommand emits the same data as JSON.

Usage:
    python3 scripts/bench_attention.py
    python3 scripts/bench_attention.py --grid 128x64x64x8 --iterations 200
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from refguide.bench import DEFAULT_BENCH_GRID, run_bench


def parse_grid(text: str):
    cells = []
    for part in text.split(","):
        dims = tuple(int(p) for p in part.lower().split("x"))
        if len(dims) != 4:
            raise argparse.ArgumentTypeError(f"expected LxDxVxB cells, got {part!r}")
        cells.append(dims)
    return tuple(cells)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--grid", type=parse_grid, default=DEFAULT_BENCH_GRID)
    parser.add_argument("--iterations", type=int, default=100)
    parser.add_argument("--warmup", type=int, default=10)
    parser.add_argument("--precision", choices=("f32", "f64"), default="f32")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    report = run_bench(
        grid=args.grid, iterations=args.iterations, warmup=args.warmup,
        precision=args.precision, seed=args.seed,
    )
    print(f"build: {report.build}; precision {report.precision}; "
          f"{report.iterations} iterations after {report.warmup} warmup")
    header = f"{'cell (LxDxVxB)':>16} {'policy':>8} {'median ms':>10} {'calls/s':>12} {'cache bytes':>12}"
    print(header)
    for cell in report.cells:
        shape = f"{cell['length']}x{cell['d']}x{cell['d_v']}x{cell['batch']}"
        print(
            f"{shape:>16} {cell['policy']:>8} {cell['median_seconds'] * 1e3:>10.3f} "
            f"{cell['calls_per_second']:>12.0f} {cell['cache_reused_bytes']:>12}"
        )
    for note in report.expectation_violations:
        print(f"note: {note}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
