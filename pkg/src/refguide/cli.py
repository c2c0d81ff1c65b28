"""Command-line driver: check, sweep, generate, bench.

Exit codes are a stable contract: 0 success (and suite pass), 1 equivalence
check failure, 2 usage or configuration error, 3 I/O error. ``check`` and
``bench`` print their report as a single JSON document on stdout (and write
it under --out); human-oriented status lines go to stderr so stdout stays
machine-parseable.
"""

import argparse
import json
import sys
from pathlib import Path

from .artifacts import write_json, write_pgm, write_raw, write_sweep_csv
from .bench import run_bench
from .config import PRESETS, ConfigError, parse_config
from .oracle import run_equivalence_suite
from .pipeline import generate_batch, trajectory_distance


def _floats(text: str):
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _cells(text: str, width: int, shape_word: str):
    cells = []
    for part in text.split(","):
        dims = part.lower().split("x")
        if len(dims) != width or not all(p.isdigit() and int(p) > 0 for p in dims):
            raise argparse.ArgumentTypeError(f"expected {shape_word} cells like 64x32x32, got {part!r}")
        cells.append(tuple(int(p) for p in dims))
    return tuple(cells)


def _grid3(text: str):
    return _cells(text, 3, "LxDxV")


def _grid4(text: str):
    return _cells(text, 4, "LxDxVxB")


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON config file; flags override its keys")
    common.add_argument("--seed", type=int, metavar="N", help="master seed (weights N, noise N+1, suite N)")
    common.add_argument("--preset", choices=PRESETS, help="reference-strength preset")
    common.add_argument("--out", dest="out_dir", metavar="DIR", help="output directory (default: out)")
    common.add_argument("--precision", choices=("f32", "f64"), help="working float width (default: f32)")

    parser = argparse.ArgumentParser(
        prog="refguide",
        description="Reference-guided attention kernels, equivalence checking, and a toy batch generator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser(
        "check", parents=[common],
        help="certify the blend kernels against the brute-force attention oracle",
    )
    check.add_argument("--trials", type=int, metavar="N", help="trials per grid cell (default: 20)")
    check.add_argument("--grid", type=_grid3, metavar="LxDxV,...", help="shape cells to test")
    check.add_argument("--threshold", type=float, metavar="X", help="max relative error bound")
    check.add_argument("--stress-scale", dest="stress_scale", type=float, metavar="X",
                       help="query scale for the large-logit trials (default: 100)")
    check.add_argument("--stress-trials", dest="stress_trials", type=int, metavar="N",
                       help="large-logit trials per cell (default: 5)")
    check.add_argument("--corrupt-kernel", dest="corrupt_kernel", type=float, metavar="DELTA",
                       help="test hook: perturb one coefficient entry by DELTA; a nonzero value must fail the suite")

    sweep = sub.add_parser(
        "sweep", parents=[common],
        help="generate one batch per strength and record per-step distances to the reference",
    )
    sweep.add_argument("--strengths", dest="sweep_strengths", type=_floats, metavar="C1,C2,...",
                       help="strengths to sweep (default: -0.3,0.2,0.35); "
                            "write --strengths=-0.3,... when the list starts with a minus")
    sweep.add_argument("--dup-noise", dest="duplicate_noise", action="store_true", default=None,
                       help="give the first guided sample the reference's initial noise")

    sub.add_parser("generate", parents=[common],
                   help="run one batch and write final latents as raw f32 + PGM")

    bench = sub.add_parser("bench", parents=[common],
                           help="time plain, concat, and rfg attention over a shape grid")
    bench.add_argument("--grid", dest="bench_grid", type=_grid4, metavar="LxDxVxB,...",
                       help="bench cells (default: 64x64x64x8,256x64x64x8)")
    bench.add_argument("--iterations", type=int, metavar="N", help="timed iterations per cell (default: 100)")
    bench.add_argument("--warmup", type=int, metavar="N", help="untimed iterations per cell (default: 10)")

    return parser


_OVERRIDE_KEYS = (
    "seed", "preset", "out_dir", "precision",
    "trials", "grid", "threshold", "stress_scale", "stress_trials", "corrupt_kernel",
    "sweep_strengths", "duplicate_noise",
    "bench_grid", "iterations", "warmup",
)


def _out_dir(cfg) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_check(cfg) -> int:
    report = run_equivalence_suite(
        seed=cfg.check_seed,
        grid=cfg.check_grid,
        trials_per_cell=cfg.trials,
        threshold=cfg.threshold,
        precision=cfg.precision,
        stress_scale=cfg.stress_scale,
        stress_trials_per_cell=cfg.stress_trials,
        corrupt_coefficient=cfg.corrupt_kernel,
    )
    payload = report.to_dict()
    write_json(_out_dir(cfg) / "check_report.json", payload)
    print(json.dumps(payload, indent=2))
    status = "PASS" if report.passed else "FAIL"
    print(
        f"check {status}: max_rel_error={report.max_rel_error:.3e} "
        f"(threshold {report.threshold:.1e}), {report.total_trials} trials",
        file=sys.stderr,
    )
    if not report.passed and report.worst is not None:
        print(
            f"worst case: identity={report.worst['identity']} cell={report.worst['cell']} "
            f"stream_key={report.worst['stream_key']} error={report.worst['error']:.3e}",
            file=sys.stderr,
        )
    return 0 if report.passed else 1


def _cmd_sweep(cfg) -> int:
    rows = []
    for c in cfg.sweep_strengths:
        pipeline_cfg = cfg.pipeline_config(strength_override=c)
        traj = generate_batch(pipeline_cfg)
        distances = {i: trajectory_distance(traj, i) for i in range(1, pipeline_cfg.batch)}
        for t in range(pipeline_cfg.steps + 1):
            for i in sorted(distances):
                rows.append((c, t, i, distances[i][t]))
    path = write_sweep_csv(_out_dir(cfg) / "sweep.csv", rows)
    print(f"wrote {path} ({len(rows)} rows)")
    return 0


def _cmd_generate(cfg) -> int:
    pipeline_cfg = cfg.pipeline_config()
    traj = generate_batch(pipeline_cfg)
    out = _out_dir(cfg)
    for i in range(pipeline_cfg.batch):
        final = traj.final[i]
        write_raw(out / f"sample_{i}.raw", final)
        write_pgm(out / f"sample_{i}.pgm", final)
    write_json(out / "config.json", cfg.to_dict())
    print(f"wrote {pipeline_cfg.batch} samples (raw + sidecar + pgm) and config.json to {out}")
    return 0


def _cmd_bench(cfg) -> int:
    report = run_bench(
        grid=cfg.bench_grid,
        iterations=cfg.iterations,
        warmup=cfg.warmup,
        precision=cfg.precision,
        seed=cfg.check_seed,
    )
    payload = report.to_dict()
    write_json(_out_dir(cfg) / "bench_report.json", payload)
    print(json.dumps(payload, indent=2))
    for note in report.expectation_violations:
        print(f"note: {note}", file=sys.stderr)
    return 0


_COMMANDS = {
    "check": _cmd_check,
    "sweep": _cmd_sweep,
    "generate": _cmd_generate,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    overrides = {k: v for k, v in vars(args).items() if k in _OVERRIDE_KEYS and v is not None}
    try:
        cfg = parse_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        return _COMMANDS[args.command](cfg)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
