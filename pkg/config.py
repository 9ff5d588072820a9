import os
from pathlib import Path
from dotenv import dotenv_values
from simple_logging import get_basic_logger


ENV_FILE = Path.cwd() / ".env"

# Values from .env, overridden by the process environment
settings = {
    **dotenv_values(ENV_FILE),
    **{key: value for key, value in os.environ.items() if key.startswith("DEBIAS_")},
}

# Creates a logging object to use
log = get_basic_logger(settings.get("DEBIAS_LOG_LEVEL") or "INFO")

SCHEMA_VERSION = "1.0"

DEFAULT_ALPHA = 0.05
DEFAULT_TAU = 1.0
DEFAULT_BOOTSTRAP_REPLICATES = 500
DEFAULT_SEED = int(settings.get("DEBIAS_SEED") or 42)

DEFAULT_GRID_SIZE_1D = 512
DEFAULT_GRID_SIZE_2D = 128
GRID_PADDING_BANDWIDTHS = 3.0

# Weighted band: points with p_h below this fraction of max(p_h) are skipped
WEIGHTED_BAND_FLOOR = 0.05
REPLICATE_DROP_BUDGET = 0.10
DEGENERATE_POINT_BUDGET = 0.05
RIDGE = 1e-10

DEFAULT_CV_FOLDS = 5
DEFAULT_CV_REPEATS = 10
DEFAULT_TRIALS = 200


def get_thread_count() -> int:
    """Number of worker processes to use. DEBIAS_THREADS wins over the CPU count.

    Returns:
        int: Worker count, at least 1
    """
    override = settings.get("DEBIAS_THREADS")
    if override:
        try:
            return max(1, int(override))
        except ValueError:
            log.warning(f"Ignoring non-integer DEBIAS_THREADS={override!r}")

    return max(1, os.cpu_count() or 1)
