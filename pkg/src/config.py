"""Configuration management for the fedtalora project.

This module provides centralized, process-level settings for the simulator.
It handles environment variables, file paths, and the desk-scale defaults
that experiment configs fall back to.

The module loads configuration from environment variables (optionally from a
`.env` file) and provides default values for everything else. Experiment
configs themselves are YAML documents handled by `src.fedsim.config`.
"""
import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

VERSION = "0.4.0"

# Base paths
ROOT_DIR = Path(__file__).parent.parent
CONFIGS_DIR = ROOT_DIR / "configs"
OUTPUT_DIR = Path(os.getenv("FEDTALORA_OUTPUT_DIR", str(ROOT_DIR / "runs")))

# Logging
LOG_LEVEL = os.getenv("FEDTALORA_LOG_LEVEL", "INFO").upper()

# Parallel client workers (results never depend on this value)
DEFAULT_WORKERS = int(os.getenv("FEDTALORA_WORKERS", "1"))

# Federation defaults, scaled down from 10 clients / 10 tasks / 30 rounds / 5 epochs
DEFAULT_NUM_CLIENTS = 4
DEFAULT_NUM_TASKS = 5
DEFAULT_ROUNDS = 5
DEFAULT_LOCAL_EPOCHS = 2
DEFAULT_BATCH_SIZE = 32
DEFAULT_SEEDS = (1993, 1996, 1997)

# Dual learning rates: representation (LoRA) slower than classifier head
DEFAULT_LR_LORA = 0.005
DEFAULT_LR_HEAD = 0.05

# LoRA
DEFAULT_RANK = 4
DEFAULT_LORA_INIT_STD = 0.02

# Synthetic dataset
DEFAULT_NUM_CLASSES = 10
DEFAULT_INPUT_DIM = 16
DEFAULT_TRAIN_PER_CLASS = 200
DEFAULT_TEST_PER_CLASS = 50
DEFAULT_SEPARATION = 4.0
DEFAULT_NOISE = 1.0
DEFAULT_VAL_FRACTION = 0.2

# Tiny transformer
DEFAULT_DEPTH = 4
DEFAULT_DIM = 32
DEFAULT_FFN_DIM = 64
DEFAULT_NUM_TOKENS = 4

# Partitioning
QUANTITY_MAX_ATTEMPTS = 1000
DIRICHLET_IID_BETA = 1e6

# Tolerances used by the identity suite
EXACTNESS_TOL = 1e-10
NULL_RESIDUAL_TOL = 1e-12
