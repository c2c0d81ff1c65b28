"""Shared test setup.

BLAS thread pools are pinned to one thread before numpy loads: the regression
digests assert bitwise-identical results run to run, and threaded reductions
can reorder floating-point sums. Hypothesis runs derandomized so the suite is
reproducible in CI.
"""

import os

for var in ("OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "OMP_NUM_THREADS"):
    os.environ.setdefault(var, "1")

from hypothesis import settings

settings.register_profile("repro", deadline=None, max_examples=50, derandomize=True)
settings.load_profile("repro")
