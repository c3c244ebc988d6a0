"""Configuration settings for the application"""

import os
import math
from pathlib import Path
from typing import Optional
from dotenv import load_dotenv

load_dotenv()

# Project paths
PROJECT_ROOT = Path(__file__).parent.parent
OUTPUT_DIR = Path(os.getenv("GRASSFIELD_OUTPUT_DIR", str(PROJECT_ROOT / "output")))

# Numerical tolerances (binary64 throughout)
ORTHONORMAL_TOL = float(os.getenv("GRASSFIELD_ORTHONORMAL_TOL", "1e-10"))
TANGENT_TOL = float(os.getenv("GRASSFIELD_TANGENT_TOL", "1e-8"))
SINGULAR_TOL = float(os.getenv("GRASSFIELD_SINGULAR_TOL", "1e-12"))
WEIGHT_TOL = float(os.getenv("GRASSFIELD_WEIGHT_TOL", "1e-8"))
DUPLICATE_TOL = float(os.getenv("GRASSFIELD_DUPLICATE_TOL", "1e-9"))
ZERO_SCORE_TOL = float(os.getenv("GRASSFIELD_ZERO_SCORE_TOL", "1e-12"))
VOLUME_TOL = 1e-9
JITTER = 1e-12

# Campaign defaults
DEFAULT_ALPHA = 0.80
DEFAULT_THETA_REF = math.pi / 15
DEFAULT_MAX_LEVELS = 50
DEFAULT_BUDGET = 200
DEFAULT_SEED = 0
MAX_STOCHASTIC_DIM = 6

# External solver exchange
EXCHANGE_TIMEOUT = float(os.getenv("GRASSFIELD_EXCHANGE_TIMEOUT", "3600"))
EXCHANGE_POLL_INTERVAL = float(os.getenv("GRASSFIELD_EXCHANGE_POLL", "0.5"))

# Results files (relative to a run's output directory)
SAMPLES_CSV = "samples.csv"
MESH_POINTS_CSV = "mesh_points.csv"
MESH_SIMPLICES_CSV = "mesh_simplices.csv"
SCORES_CSV = "scores.csv"
ERRORS_CSV = "errors.csv"
CONVERGENCE_CSV = "convergence.csv"
SUMMARY_JSON = "summary.json"
AUDIT_LOG = "audit.ndjson"
RUN_CONFIG_JSON = "run_config.json"
SNAPSHOT_DIR = "snapshots"
MESH_HTML = "mesh.html"
CONVERGENCE_HTML = "convergence.html"
SUMMARY_SCHEMA_VERSION = 1


def env_seed() -> Optional[int]:
    """Seed override from GRASSFIELD_SEED, if set"""
    value = os.getenv("GRASSFIELD_SEED")
    if value is None or value.strip() == "":
        return None
    return int(value)
