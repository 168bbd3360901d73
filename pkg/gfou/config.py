import os
from pathlib import Path


CACHE_DIR = Path(os.environ["GFOU_CACHE_DIR"]) if os.environ.get("GFOU_CACHE_DIR") else None
MODEL_FORMAT_VERSION = 1

# Gaussian mass beyond |x| = 12 is below 1e-30
TRUNCATION_RADIUS = 12.0
PANEL_WIDTH = 1.0
DEFAULT_ORDER = 32
GRID_GRADING = 3.0

# spectral truncation policy
COMPARISON_K_1D = 30
COMPARISON_K_2D = 20
MAX_K_2D = 40
NODES_PER_MODE = 10
TAIL_WARNING = 0.01

SEMIGROUP_MIN_T = 1e-3
SEMIGROUP_CHUNK = 256

# Bessel K cosh-integral: tau in [0, 30], panels of width 0.25
BESSEL_TAU_MAX = 30.0
BESSEL_PANEL = 0.25
BESSEL_POINTS = 20

# extension semigroup quadrature in tau = log t
EXTENSION_TAU = (-30.0, 10.0)
EXTENSION_PANEL = 0.5
EXTENSION_POINTS = 16
EXTENSION_TOL = 1e-6

# Neumann trace ladder and energy y-grid
TRACE_LADDER_MAX = 1e-2
TRACE_CONVERGENCE = 0.05
ENERGY_Y_MIN = 1e-8
ENERGY_DECAY = 12.0

# derivation formula checks
DERIVATIVE_STEP = 1e-3
PLATEAU_GRADIENT = 1e-10

# comparison budget
CALIBRATION_FACTOR = 3.0
CALIBRATION_FLOOR = 1e-8
DOMINATION_SLACK = 1e-3
STAR_RESOLUTION = 600
DOMINATION_RESOLUTION = 800

# Green's kernel
KERNEL_MARGIN = 0.5
KERNEL_DIAGONAL = 1e-3

CSV_DIGITS = 17
MIN_RESOLUTION = 64
