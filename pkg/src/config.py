"""
Configuration module for the APDS downlink simulator.
All configurable parameters are centralized here.
"""

import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# ===========================
# Project Paths
# ===========================
PROJECT_ROOT = Path(__file__).parent.parent
DATA_DIR = PROJECT_ROOT / "data"
SCENARIO_DIR = DATA_DIR / "scenarios"
REFERENCE_SCENARIO = SCENARIO_DIR / "reference.json"

# Default directory for CSV output (overridden by --out)
OUTPUT_DIR = Path(os.getenv("APDS_OUTPUT_DIR", "results"))

# ===========================
# Reference Scenario Parameters
# ===========================
LINK_RATE_BPS = 10_000_000  # 10 Mbps downlink
FRAME_DURATION_US = 5_000  # 5 ms frame
NUM_FRAMES = 2_000  # 10 s of simulated time
QUEUE_CAPACITY = 100  # packets per connection
INTERRUPT_THRESHOLD = 50  # eta, frames without service before a BE is elevated

# WPF weights: demand term / interrupt term
BE_WEIGHTS = (0.6, 0.4)  # demand, interrupt
NRT_WEIGHTS = (0.6, 0.4)  # demand, interrupt

# ===========================
# Baseline Configuration
# ===========================
# Share of B_total given to each class as DFPQ quantum
DFPQ_CLASS_WEIGHTS = {
    "UGS": 0.30,
    "ERT_VR": 0.25,
    "RT_VR": 0.20,
    "NRT_VR": 0.15,
    "BE": 0.10,
}

# ===========================
# Run Configuration
# ===========================
DEFAULT_SEED = int(os.getenv("APDS_SEED", "2024"))
DEFAULT_WINDOW = int(os.getenv("APDS_WINDOW", "20"))  # frames per metric window
DEFAULT_SCHEDULERS = ["apds", "fifo", "dfpq"]
UNSUPPORTED_SCHEDULERS = ["scsa"]

# ===========================
# Logging Configuration
# ===========================
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_FILE = os.getenv("APDS_LOG_FILE", "")  # Empty string disables the file handler
