"""Brute-force attention oracle and the kernel equivalence suite.

The naive functions here recompute attention with explicit Python loops over
``math.exp`` in 64-bit floats. They share no arithmetic code with the numpy
kernels in :mod:`refguide.kernels`; that independence is the point, so keep
numpy expressions out of the naive paths.

``run_equivalence_suite`` draws seeded random inputs over a grid of shapes and
checks, per trial:

* rank-1 matrix blend vs brute-force concatenated attention (the headline
  equivalence, reported as ``max_rel_error``),
* fast concatenated attention vs the brute-force oracle,
* matrix blend vs fast concatenated attention,
* guidance (residual) form vs the matrix blend,
* bitwise boundary identities (strength 0, strength 1, single-reference
  multi blend),
* coefficient entries strictly inside (0, 1).

Each cell also runs trials with queries scaled by ``stress_scale`` to push
logits far from the origin; those are held to a proportionally looser bound
and accounted separately, since the error of the exponential-ratio
coefficient grows with logit magnitude.

Per-trial errors are normalized by the largest magnitude among the compared
outputs and the two branch attentions. Rounding error of every identity is
bounded by a small multiple of machine epsilon times that branch scale,
whereas the blended output itself can cancel arbitrarily close to zero (a
single-entry output hits this a few times per thousand draws), which would
turn an ulp-level absolute deviation into an unbounded ratio and fail
correct kernels at random.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import (
    attention,
    build_rank1_coefficient,
    concat_attention,
    concat_coefficient_vector,
    guidance_form,
    rfg_attention,
    rfg_matrix,
    rfg_multi,
)
from .linalg import ShapeError
from .rng import stream

DEFAULT_GRID = tuple(
    (length, d, d_v)
    for length in (1, 2, 4, 8, 16, 64)
    for d in (1, 4, 32)
    for d_v in (1, 4, 32)
)

PRECISION_DTYPES = {"f32": np.float32, "f64": np.float64}
PRECISION_THRESHOLDS = {"f32": 1e-5, "f64": 1e-10}


def _as_rows(a) -> list:
    return np.asarray(a, dtype=np.float64).tolist()


def naive_attention(q, k, v, d=None) -> np.ndarray:
    """Loop-based scaled dot-product attention in 64-bit Python floats."""
    q_rows, k_rows, v_rows = _as_rows(q), _as_rows(k), _as_rows(v)
    width = len(q_rows[0])
    if len(k_rows[0]) != width:
        raise ShapeError(f"q width {width} does not match k width {len(k_rows[0])}")
    if len(v_rows) != len(k_rows):
        raise ShapeError(f"k has {len(k_rows)} rows but v has {len(v_rows)}")
    scale = 1.0 / math.sqrt(width if d is None else d)
    d_v = len(v_rows[0])
    out = []
    for q_row in q_rows:
        logits = [sum(qt * kt for qt, kt in zip(q_row, k_row)) * scale for k_row in k_rows]
        m = max(logits)
        weights = [math.exp(x - m) for x in logits]
        total = sum(weights)
        probs = [w / total for w in weights]
        out.append([sum(p * v_row[c] for p, v_row in zip(probs, v_rows)) for c in range(d_v)])
    return np.array(out, dtype=np.float64)


def naive_concat_attention(q, k_ref, v_ref, k_self, v_self, d=None) -> np.ndarray:
    """Brute-force attention over reference keys/values stacked ahead of self."""
    k_all = _as_rows(k_ref) + _as_rows(k_self)
    v_all = _as_rows(v_ref) + _as_rows(v_self)
    if len(k_all) != len(v_all):
        raise ShapeError("stacked k and v row counts differ")
    return naive_attention(q, k_all, v_all, d=d)


def naive_coefficient_vector(q, k_ref, k_self, d=None) -> np.ndarray:
    """Loop-based reference-partition weight per query row, unclipped."""
    q_rows, ref_rows, self_rows = _as_rows(q), _as_rows(k_ref), _as_rows(k_self)
    width = len(q_rows[0])
    scale = 1.0 / math.sqrt(width if d is None else d)
    out = []
    for q_row in q_rows:
        ref_logits = [sum(qt * kt for qt, kt in zip(q_row, k_row)) * scale for k_row in ref_rows]
        self_logits = [sum(qt * kt for qt, kt in zip(q_row, k_row)) * scale for k_row in self_rows]
        m = max(max(ref_logits), max(self_logits))
        num = sum(math.exp(x - m) for x in ref_logits)
        den = num + sum(math.exp(x - m) for x in self_logits)
        out.append(num / den)
    return np.array(out, dtype=np.float64)


def max_rel_error(a, b) -> float:
    """Worst entrywise deviation, relative to the larger matrix magnitude.

    max |a - b| divided by max(max|a|, max|b|, 1e-12); the floor makes the
    all-zero comparison return 0 instead of dividing by zero.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"cannot compare shapes {a.shape} and {b.shape}")
    scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))), 1e-12)
    return float(np.max(np.abs(a - b))) / scale


IDENTITY_NAMES = (
    "matrix_vs_oracle",
    "concat_vs_oracle",
    "matrix_vs_concat",
    "guidance_vs_matrix",
)


@dataclass
class EquivalenceReport:
    """Deterministic summary of one equivalence-suite run (no timings)."""

    precision: str
    seed: int
    grid: tuple
    trials_per_cell: int
    stress_trials_per_cell: int
    stress_scale: float
    threshold: float
    stress_threshold: float
    total_trials: int = 0
    max_rel_error: float = 0.0
    stress_max_rel_error: float = 0.0
    identity_errors: dict = field(default_factory=dict)
    exact_failures: int = 0
    range_violations: int = 0
    coefficient_min: float = math.inf
    coefficient_max: float = -math.inf
    worst: dict | None = None
    passed: bool = False

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "seed": self.seed,
            "grid": [list(cell) for cell in self.grid],
            "trials_per_cell": self.trials_per_cell,
            "stress_trials_per_cell": self.stress_trials_per_cell,
            "stress_scale": self.stress_scale,
            "threshold": self.threshold,
            "stress_threshold": self.stress_threshold,
            "total_trials": self.total_trials,
            "max_rel_error": self.max_rel_error,
            "stress_max_rel_error": self.stress_max_rel_error,
            "identity_errors": self.identity_errors,
            "exact_failures": self.exact_failures,
            "range_violations": self.range_violations,
            "coefficient_min": self.coefficient_min,
            "coefficient_max": self.coefficient_max,
            "worst": self.worst,
            "passed": self.passed,
        }


def _draw_inputs(gen, length, d, d_v, dtype, scale):
    q = gen.uniform(-1.0, 1.0, (length, d))
    if scale != 1.0:
        q = q * scale
    k_ref = gen.uniform(-1.0, 1.0, (length, d))
    v_ref = gen.uniform(-1.0, 1.0, (length, d_v))
    k_self = gen.uniform(-1.0, 1.0, (length, d))
    v_self = gen.uniform(-1.0, 1.0, (length, d_v))
    return tuple(a.astype(dtype) for a in (q, k_ref, v_ref, k_self, v_self))


def run_equivalence_suite(
    seed: int = 0,
    grid=DEFAULT_GRID,
    trials_per_cell: int = 20,
    threshold: float | None = None,
    precision: str = "f32",
    stress_scale: float = 100.0,
    stress_trials_per_cell: int = 5,
    corrupt_coefficient: float = 0.0,
) -> EquivalenceReport:
    """Certify the blend kernels against the brute-force oracle.

    ``corrupt_coefficient`` is a test hook: a nonzero value is added to one
    coefficient entry before the matrix blend, which must make the suite
    fail and record the offending trial in ``report.worst``.
    """
    if precision not in PRECISION_DTYPES:
        raise ValueError(f"precision must be one of {sorted(PRECISION_DTYPES)}, got {precision!r}")
    if trials_per_cell < 1:
        raise ValueError("trials_per_cell must be at least 1")
    if stress_trials_per_cell < 0:
        raise ValueError("stress_trials_per_cell must be nonnegative")
    grid = tuple((int(l), int(d), int(d_v)) for l, d, d_v in grid)
    if not grid:
        raise ValueError("grid must contain at least one (L, d, d_v) cell")
    dtype = PRECISION_DTYPES[precision]
    if threshold is None:
        threshold = PRECISION_THRESHOLDS[precision]

    report = EquivalenceReport(
        precision=precision,
        seed=int(seed),
        grid=grid,
        trials_per_cell=int(trials_per_cell),
        stress_trials_per_cell=int(stress_trials_per_cell),
        stress_scale=float(stress_scale),
        threshold=float(threshold),
        stress_threshold=float(threshold) * float(stress_scale),
        identity_errors={
            name: {"standard": 0.0, "stress": 0.0} for name in IDENTITY_NAMES
        },
    )

    worst_ratio = -math.inf
    for cell_index, (length, d, d_v) in enumerate(grid):
        for trial in range(trials_per_cell + stress_trials_per_cell):
            stressed = trial >= trials_per_cell
            gen = stream(seed, cell_index, trial)
            q, k_ref, v_ref, k_self, v_self = _draw_inputs(
                gen, length, d, d_v, dtype, stress_scale if stressed else 1.0
            )
            report.total_trials += 1

            c_vec = concat_coefficient_vector(q, k_ref, k_self)
            report.coefficient_min = min(report.coefficient_min, float(c_vec.min()))
            report.coefficient_max = max(report.coefficient_max, float(c_vec.max()))
            report.range_violations += int(np.count_nonzero(~((c_vec > 0.0) & (c_vec < 1.0))))

            coeff = build_rank1_coefficient(c_vec, d_v)
            if corrupt_coefficient:
                coeff = coeff.copy()
                coeff[0, 0] += dtype(corrupt_coefficient)

            fast_concat = concat_attention(q, k_ref, v_ref, k_self, v_self)
            blended = rfg_matrix(q, k_ref, v_ref, k_self, v_self, coeff)
            guided = guidance_form(q, k_ref, v_ref, k_self, v_self, coeff)
            oracle = naive_concat_attention(q, k_ref, v_ref, k_self, v_self)
            self_branch = attention(q, k_self, v_self)
            ref_branch = attention(q, k_ref, v_ref)

            guard = max(
                float(np.max(np.abs(ref_branch))),
                float(np.max(np.abs(self_branch))),
                float(np.max(np.abs(oracle))),
                1e-12,
            )

            def deviation(a, b):
                return float(np.max(np.abs(np.asarray(a, np.float64) - np.asarray(b, np.float64)))) / guard

            errors = {
                "matrix_vs_oracle": deviation(blended, oracle),
                "concat_vs_oracle": deviation(fast_concat, oracle),
                "matrix_vs_concat": deviation(blended, fast_concat),
                "guidance_vs_matrix": deviation(guided, blended),
            }
            bucket = "stress" if stressed else "standard"
            limit = report.stress_threshold if stressed else report.threshold
            for name, err in errors.items():
                report.identity_errors[name][bucket] = max(report.identity_errors[name][bucket], err)
                ratio = err / limit
                if ratio > worst_ratio:
                    worst_ratio = ratio
                    report.worst = {
                        "identity": name,
                        "error": err,
                        "cell": [length, d, d_v],
                        "trial": trial,
                        "stressed": stressed,
                        "stream_key": [int(seed), cell_index, trial],
                        "threshold": limit,
                    }

            exact_checks = (
                np.array_equal(rfg_attention(q, k_ref, v_ref, k_self, v_self, 0.0), self_branch),
                np.array_equal(rfg_attention(q, k_ref, v_ref, k_self, v_self, 1.0), ref_branch),
                np.array_equal(
                    rfg_multi(q, [(0.35, k_ref, v_ref)], k_self, v_self),
                    rfg_attention(q, k_ref, v_ref, k_self, v_self, 0.35),
                ),
            )
            report.exact_failures += sum(1 for ok in exact_checks if not ok)

    report.max_rel_error = max(
        report.identity_errors[name]["standard"] for name in IDENTITY_NAMES
    )
    report.stress_max_rel_error = max(
        report.identity_errors[name]["stress"] for name in IDENTITY_NAMES
    )
    report.passed = (
        report.max_rel_error <= report.threshold
        and report.stress_max_rel_error <= report.stress_threshold
        and report.exact_failures == 0
        and report.range_violations == 0
    )
    return report
