import os
from dotenv import load_dotenv

load_dotenv()

MAX_ITER = int(os.getenv("LIEPAIR_MAX_ITER", "64"))
DEFAULT_SEED = int(os.getenv("LIEPAIR_SEED", "0"))
RANDOM_TABLES = int(os.getenv("LIEPAIR_RANDOM_TABLES", "10"))
RANDOM_CONTRACTIONS = int(os.getenv("LIEPAIR_RANDOM_CONTRACTIONS", "20"))
REPORT_DIR = os.getenv("LIEPAIR_REPORT_DIR", "runs")
LOG_LEVEL = os.getenv("LIEPAIR_LOG_LEVEL", "WARNING")
