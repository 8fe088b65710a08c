"""
Central configuration for defaults, file layouts and experiment constants.
"""
from pathlib import Path

# Artifact files
MODEL_SUFFIX = ".mmae"
FORMAT_VERSION = 1
MODEL_MAGIC = "#mmae-model"
CODES_MAGIC = "#mmae-codes"
MANIFEST_END = "#end-manifest"

# Run directory layout
RUN_CONFIG_FILE = "config.json"
TRAIN_LOG_FILE = "train_log.csv"
CURVES_FILE = "curves.csv"
REPORTS_FILE = "reports.csv"
PARTITION_FILE = "partition_prd.csv"
ACCURACY_FILE = "accuracy.csv"
LOCK_FILE = ".lock"
DEFAULT_OUTPUT_DIR = Path("runs")

# Random streams
BIT_GENERATOR = "PCG64"

# Training defaults (no optimizer settings are published; declared, not inferred)
DEFAULT_LR = 0.01
DEFAULT_BATCH_SIZE = 64
DEFAULT_PRETRAIN_EPOCHS = 50
DEFAULT_MULTIMODAL_EPOCHS = 100
DEFAULT_FINE_TUNE_EPOCHS = 100
DEFAULT_LAMBDA = 1e-4
DEFAULT_SEED = 0

# Gradient checking
FD_STEP = 1e-5
GRADCHECK_TOLERANCE = 1e-6
GRADCHECK_CASES = 20

# Wavelet baseline
DEFAULT_WAVELET_ORDER = 4
DEFAULT_WAVELET_LEVELS = 5

# DEAP preprocessed container layout
DEAP_PARTICIPANTS = 32
DEAP_VIDEOS = 40
DEAP_CHANNELS = 40
DEAP_SAMPLE_RATE = 128
DEAP_TRIAL_SAMPLES = 8064  # 63 s at 128 Hz
DEAP_FILE_PATTERN = "s{participant:02d}.dat"
RATING_NAMES = ("valence", "arousal", "dominance", "liking")
RATING_MIN, RATING_MAX = 1.0, 9.0
RATING_THRESHOLD = 5.0

# Channel indices in the preprocessed layout
EEG_CHANNELS = (0, 16)  # Fp1, Fp2
EMG_CHANNELS = (34, 35)  # zygomaticus, trapezius
SEGMENT_DIM = 896
TRIM_SAMPLES = 0

# Modalities
EEG = "eeg"
EMG = "emg"
MODALITIES = (EEG, EMG)

# Architecture rows: (pathway hidden dim, joint dim) with DWT thresholds and nominal CR
ARCHITECTURE_ROWS = [
    {"pathway_dim": 896, "joint_dim": 806, "dwt_eeg": 0.025, "dwt_emg": 0.019, "cr": 10},
    {"pathway_dim": 896, "joint_dim": 716, "dwt_eeg": 0.05, "dwt_emg": 0.04, "cr": 20},
    {"pathway_dim": 896, "joint_dim": 627, "dwt_eeg": 0.085, "dwt_emg": 0.06, "cr": 30},
    {"pathway_dim": 896, "joint_dim": 537, "dwt_eeg": 0.13, "dwt_emg": 0.10, "cr": 40},
    {"pathway_dim": 896, "joint_dim": 448, "dwt_eeg": 0.29, "dwt_emg": 0.51, "cr": 50},
    {"pathway_dim": 440, "joint_dim": 358, "dwt_eeg": 0.66, "dwt_emg": 0.64, "cr": 60},
    {"pathway_dim": 440, "joint_dim": 268, "dwt_eeg": 0.75, "dwt_emg": 0.69, "cr": 70},
    {"pathway_dim": 440, "joint_dim": 179, "dwt_eeg": 0.83, "dwt_emg": 0.74, "cr": 80},
    {"pathway_dim": 380, "joint_dim": 89, "dwt_eeg": 0.92, "dwt_emg": 0.78, "cr": 90},
]

PARTITIONS = [0.5, 0.6, 0.75, 0.9]
CLASSIFY_PARTITION = 0.75
CLASS_LABELS = ("low", "high")

# CLI exit codes
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4
EXIT_FORMAT = 5
