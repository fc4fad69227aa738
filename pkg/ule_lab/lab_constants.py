# Numerical constants for the ULE laboratory
#
# Adjust these values to tune tolerances and defaults of the experiments.
# Each constant is documented with its effect on the computations.

RATE_CAP = 50.0
# Decay rate (natural-log units per site) reported for a vector with fewer than
# three off-center entries above the floor. Keeps the uniform minimum well defined.

DEFAULT_FLOOR = 1e-12
# Magnitude below which eigenvector and kernel entries are treated as numerical zero
# by the decay fits. Below eigensolver noise, above denormal territory.

DEFAULT_WEIGHT_CUT = 1e-12
# Remaining exponent mass 2^(-I-1) below which the product defining h(t) is truncated.
# The truncated tail is always bounded analytically and included in the result.

ORTHONORMALITY_TOL = 1e-10
# Maximum |<v_i, v_j> - delta_ij| accepted from the eigensolver.

RESIDUAL_TOL = 1e-10
# Relative residual bound ||Hv - lambda v||_inf / (||diag||_inf + 2 hopping) per pair.

ENVELOPE_SLACK = 1e-9
# Relative slack of the certified envelope scan: |u(n)| <= c e^(-r|n-m|) (1 + slack).

DEFAULT_EPS_GRID = (0.05, 0.1, 0.2)
# Coupling constants of the standard scaling study. Single-point commands use the
# first entry; sweeps sort the grid.

DEFAULT_WINDOW_SIZE = 128
# Default operator window size N.

DEFAULT_TOL = 1e-8
# Interior eigenvalue mismatch at which the dressed-potential iteration stops.

DEFAULT_MAX_ITER = 100
# Maximum number of corrective steps of the dressed-potential iteration.

DEFAULT_DAMPING = 1.0
# Initial damping of the dressed-potential update. Halved whenever the residual grows.

MIN_DAMPING = 1.0 / 1024
# Damping below which the iteration gives up and reports non-convergence.

DEFAULT_M = 2
# Growth exponent m of the distal construction (n_k^3 <= n_{k+1} <= n_k^(3m)).

DEFAULT_K_LAYERS = 4
# Number of periodic layers summed when evaluating the potential on a window.

POESCHEL_SEPARATION = 16
# Constant in the separation bound |d_i - d_{i+k}| >= 1 / (16 |k|) of the dyadic example.

DYNLOC_SAMPLE_TIMES = (0.0, 1.0, 10.0, 100.0)
# Times at which evolution amplitudes are spot-checked against the dominating kernel.

DOMINANCE_TOL = 1e-12
# Allowed excess of a sampled evolution amplitude over the dominating kernel.

THREADS_ENV_VAR = 'ULE_LAB_THREADS'
# Optional environment variable capping the number of sweep worker threads.

MAX_ELEMENT_BITS = 1 << 16
# Largest bit length of a chain element generated from a growth pattern. Power patterns
# reach it after a handful of steps (cube from 2: depth 11).


def default_interior_margin(size: int) -> int:
    """Default interior margin for a window of the given size (N / 8)."""
    return max(1, size // 8)
