"""Numerical tolerances used across the package.

Every threshold that decides pass/fail or triggers an error lives here so
that tests and the CLI agree on a single set of numbers.
"""

# matrix-core
SYMMETRY_TOL = 1e-12
SPECTRAL_NORM_RTOL = 1e-10
EIG_SYM_RTOL = 1e-9
EIG_GENERAL_ATOL = 1e-8
LYAPUNOV_RESIDUAL_RTOL = 1e-10
PINV_TOL = 1e-10
RANK_TOL = 1e-12
MAX_DIM = 16
JACOBI_MAX_SWEEPS = 100
QR_MAX_ITER_PER_EIG = 60

# system-model
MATCHING_TOL = 1e-8

# controller
GUARD_FACTOR = 1e-9  # barrier guard = GUARD_FACTOR * bound**2
PROJECTION_EPS = 0.1

# closed-loop-sim
DEFAULT_DT = 1e-3
DT_MIN = 1e-6
DEFAULT_DECIMATION = 10
VTHETA_STEP_RTOL = 1e-8
VPHI_SLACK = 1e-6
KHAT_NORM_SLACK = 1e-9

# feasibility
RHO_FRACTION = 0.95

# cli-io
GRADCHECK_RTOL = 1e-6
CSV_DIGITS = 17
