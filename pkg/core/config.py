import os

from dotenv import load_dotenv

load_dotenv()

BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

ENV = os.getenv("ENV", "dev").lower()
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()

_seed = os.getenv("CHAINSMR_SEED")
CHAINSMR_SEED = int(_seed) if _seed not in (None, "") else None

DEFAULT_DELTA = int(os.getenv("CHAINSMR_DELTA", 10))
DEFAULT_TAU = int(os.getenv("CHAINSMR_TAU", 4 * DEFAULT_DELTA))
BACKOFF_FACTOR = int(os.getenv("CHAINSMR_BACKOFF_FACTOR", 5))
ASYNC_REORDER = int(os.getenv("CHAINSMR_REORDER", 8))
SWEEP_WORKERS = int(os.getenv("CHAINSMR_WORKERS", os.cpu_count() or 1))
OUT_DIR = os.getenv("CHAINSMR_OUT", os.path.join(BASE_DIR, "out"))
MAX_EVENTS = int(os.getenv("CHAINSMR_MAX_EVENTS", 20_000_000))

if DEFAULT_DELTA < 1:
    raise ValueError("CHAINSMR_DELTA must be at least 1 tick")
if BACKOFF_FACTOR < 1:
    raise ValueError("CHAINSMR_BACKOFF_FACTOR must be positive")
