# config.py
import os
import logging
from typing import Dict, Any

from dotenv import load_dotenv

from exceptions import ConfigError

# Load environment variables from .env file if it exists
load_dotenv()

logger = logging.getLogger(__name__)


def _env_bool(name: str, default: str) -> bool:
    return os.getenv(name, default).lower() in ("1", "true", "yes", "on")


# Application constants
APP_NAME = "pulsetrace"
PROFILES = ("full", "test")
VARIANTS = ("framewise", "cgru")

# Numeric settings
NUMERIC_CONFIG = {
    # float32 for training/inference, float64 for gradient checks
    "dtype": os.getenv("PULSETRACE_DTYPE", "float32"),
    # 0 means "leave the BLAS default alone"
    "threads": int(os.getenv("PULSETRACE_THREADS", "0")),
}

# Training defaults
TRAINING_CONFIG = {
    "epochs": int(os.getenv("PULSETRACE_EPOCHS", "100")),
    "learning_rate": float(os.getenv("PULSETRACE_LR", "1e-4")),
    "lambda": float(os.getenv("PULSETRACE_LAMBDA", "1e-6")),
    "seed": int(os.getenv("PULSETRACE_SEED", "0")),
    "profile": os.getenv("PULSETRACE_PROFILE", "full"),
    "variant": os.getenv("PULSETRACE_VARIANT", "cgru"),
    "augment": _env_bool("PULSETRACE_AUGMENT", "true"),
    "checkpoint_every": int(os.getenv("PULSETRACE_CHECKPOINT_EVERY", "10")),
    "split_fractions": (0.6, 0.2, 0.2),
}

# CyclicLoss and period detection
LOSS_CONFIG = {
    "sqrt_epsilon": 1e-12,
    "min_period": 8,
    # fraction of the trace's peak-to-trough range
    "peak_prominence": 0.25,
}

ADAM_CONFIG = {
    "beta1": 0.9,
    "beta2": 0.999,
    "epsilon": 1e-8,
}

# Synthetic phantom population
PHANTOM_CONFIG = {
    "frame_rate": float(os.getenv("PULSETRACE_FRAME_RATE", "47.0")),
    "pixel_pitch": {"full": 0.0625, "test": 0.125},
    "frame_size": {"full": 128, "test": 64},
    "d0_range": (3.0, 6.0),
    "amplitude_range": (0.2, 0.6),
    "period_range": (15, 30),
    "length_range": (21, 126),
    "training_length": 125,
    "drift_range": (0.0, 0.3),
    "speckle_strength": 0.6,
    "gain_jitter": 0.05,
}

# Evaluation and benchmark
EVAL_CONFIG = {
    "ks_alpha": 0.05,
    "ks_comparisons": 7,
    "realtime_fps": 47.0,
    "reference_fps": 289.0,
    "bench_frames": int(os.getenv("PULSETRACE_BENCH_FRAMES", "500")),
    "bench_warmup": int(os.getenv("PULSETRACE_BENCH_WARMUP", "50")),
}

LOG_CONFIG = {
    "level": os.getenv("PULSETRACE_LOG_LEVEL", "INFO"),
    "log_dir": os.getenv("PULSETRACE_LOG_DIR", ""),
    "environment": os.getenv("ENVIRONMENT", "development"),
}


def apply_thread_cap() -> None:
    """Cap BLAS/OpenMP pools. Only effective before numpy is first imported."""
    threads = NUMERIC_CONFIG["threads"]
    if threads <= 0:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(threads))


def worker_count() -> int:
    threads = NUMERIC_CONFIG["threads"]
    return threads if threads > 0 else (os.cpu_count() or 1)


def validate_config() -> bool:
    """
    Validate the configuration.

    Returns:
        bool: True if config is valid, raises ConfigError otherwise
    """
    if NUMERIC_CONFIG["dtype"] not in ("float32", "float64"):
        raise ConfigError(f"PULSETRACE_DTYPE must be float32 or float64, got {NUMERIC_CONFIG['dtype']!r}")
    if NUMERIC_CONFIG["threads"] < 0:
        raise ConfigError("PULSETRACE_THREADS must be >= 0")
    if TRAINING_CONFIG["profile"] not in PROFILES:
        raise ConfigError(f"unknown profile {TRAINING_CONFIG['profile']!r}, expected one of {PROFILES}")
    if TRAINING_CONFIG["variant"] not in VARIANTS:
        raise ConfigError(f"unknown variant {TRAINING_CONFIG['variant']!r}, expected one of {VARIANTS}")
    if TRAINING_CONFIG["epochs"] < 1:
        raise ConfigError("epochs must be >= 1")
    if TRAINING_CONFIG["lambda"] < 0:
        raise ConfigError("lambda must be >= 0")
    return True


def display_config() -> Dict[str, Any]:
    """
    Get a flat view of the configuration for display/logging.

    Returns:
        Dict[str, Any]: Configuration snapshot
    """
    return {
        "app_name": APP_NAME,
        "numeric": dict(NUMERIC_CONFIG),
        "training": dict(TRAINING_CONFIG),
        "loss": dict(LOSS_CONFIG),
        "adam": dict(ADAM_CONFIG),
        "phantom": dict(PHANTOM_CONFIG),
        "eval": dict(EVAL_CONFIG),
    }


# Validate configuration on import
validate_config()
logger.debug(f"Configuration loaded: {display_config()}")
