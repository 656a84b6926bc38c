"""
Configuration settings for the Schwinger fractal-ansatz toolkit.
"""
import os
from dotenv import load_dotenv

# Load environment variables from .env file if it exists
load_dotenv()

BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

# Storage
CACHE_DIR = os.getenv("SCHWINGER_CACHE_DIR", os.path.join(BASE_DIR, "cache"))
OUTPUT_DIR = os.getenv("SCHWINGER_OUTPUT_DIR", os.path.join(BASE_DIR, "results"))
CODE_VERSION = "1.0.0"

# Logging Configuration
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_FILE = os.getenv("LOG_FILE", os.path.join(BASE_DIR, "logs", "schwinger.log"))

# Eigensolver
SOLVER_TOL = float(os.getenv("SOLVER_TOL", "1e-10"))
SOLVER_MAX_ITER = int(os.getenv("SOLVER_MAX_ITER", "20000"))  # total matvec budget
KRYLOV_DIM = int(os.getenv("KRYLOV_DIM", "40"))
DENSE_LIMIT = int(os.getenv("DENSE_LIMIT", "20000"))
DEGENERACY_GAP = 1e-10
ESTIMATE_GAP = os.getenv("ESTIMATE_GAP", "True").lower() == "true"
GAP_MAX_CYCLES = int(os.getenv("GAP_MAX_CYCLES", "20"))

# Matrix-free operator
BOND_TABLE_LIMIT = int(os.getenv("BOND_TABLE_LIMIT", str(1 << 20)))  # precompute hops below this size
MATVEC_WORKERS = int(os.getenv("MATVEC_WORKERS", "1"))  # 1 = strictly sequential

# Fractal ansatz
WEIGHT_CONVERGENCE_TOL = float(os.getenv("WEIGHT_CONVERGENCE_TOL", "1e-3"))
DEFAULT_SEED = int(os.getenv("DEFAULT_SEED", "0"))

# Qubism
QUBISM_EXPONENT = 0.2

# Fractal codec
CODEC_RANGE_SIZE = int(os.getenv("CODEC_RANGE_SIZE", "4"))
CODEC_DOMAIN_STRIDE = int(os.getenv("CODEC_DOMAIN_STRIDE", "4"))
CODEC_S_MAX = float(os.getenv("CODEC_S_MAX", "0.9"))
CODEC_ITERATIONS = int(os.getenv("CODEC_ITERATIONS", "12"))
