"""
Soundscape Noise Filter Constants
Fixed properties of the detection method: data conventions, canonical bands,
index thresholds, the rain baseline and the cicada band rule.
"""

# ─────────────────────────────────────────────
# Data Conventions
# ─────────────────────────────────────────────

CANONICAL_SAMPLE_RATE = 22050
SEGMENT_SECONDS = 10.0
PCM16_SCALE = 32768.0
PCM16_MAX = 32767

# ─────────────────────────────────────────────
# Frequency Bands
# ─────────────────────────────────────────────

# (name, low Hz, high Hz), ascending
CANONICAL_BANDS = [
    ("0_500", 0.0, 500.0),
    ("500_1k", 500.0, 1000.0),
    ("1k_3k", 1000.0, 3000.0),
    ("3k_5k", 3000.0, 5000.0),
    ("5k_7k", 5000.0, 7000.0),
    ("7k_9k", 7000.0, 9000.0),
    ("9k_11k", 9000.0, 11000.0),
]

HIGHPASS_CUTOFF_HZ = 1000.0

# Where rain is most prominent for the double-threshold baseline
RAIN_BAND = ("rain", 600.0, 1200.0)

# ─────────────────────────────────────────────
# Acoustic Indices
# ─────────────────────────────────────────────

INDEX_CONFIG = {
    "cover_thresholds": {
        "low": 0.0001,
        "med": 0.0003,
    },
    "bgn_histogram_bins": 100,
    "ssnr_group_seconds": 0.1,
    "snr_flat_sentinel": 1e9,
}

# Per-band index names, in emission order
BAND_INDEX_NAMES = [
    "aci",
    "spectral_entropy",
    "snr",
    "isnr",
    "ssnr",
    "psd",
    "cvr_low",
    "cvr_med",
]

WHOLE_INDEX_NAMES = [
    "temporal_entropy",
    "spectral_entropy",
    "bgn",
    "bgn_std",
]

RAIN_INDEX_NAMES = [
    "rain_psd",
    "rain_snr",
    "rain_isnr",
    "rain_ssnr",
]

# ─────────────────────────────────────────────
# MFCCs
# ─────────────────────────────────────────────

MFCC_CONFIG = {
    "n_coefficients": 33,
    "n_filters": 33,
    "log_floor": 1e-10,
    "fmin_hz": 0.0,
    "fmin_highpass_hz": 1000.0,
    "fmax_hz": 11025.0,
}

# ─────────────────────────────────────────────
# Feature Sets
# ─────────────────────────────────────────────

FEATURE_SET_IDS = [
    "Indices",
    "FreqIndices",
    "MFCCs",
    "MFCCsNoDelta",
    "All",
    "AllNoDelta",
    "CFSSubset",
]

# ─────────────────────────────────────────────
# Rain Baseline (double threshold)
# ─────────────────────────────────────────────

BEDOYA_CONFIG = {
    "band": RAIN_BAND,
    # y(x) = a*x^2 + b*x
    "psd_poly": {"a": 3e-5, "b": -3e-5},
    # z(x) = c + d*x
    "snr_poly": {"c": 0.64, "d": 0.01},
    "default_steps": 51,
}

# ─────────────────────────────────────────────
# Cicada Chorus Band Rule
# ─────────────────────────────────────────────

CICADA_RULES = {
    "min_mean_pmf": 0.0125,
    "max_rsd_percent": 70.0,
    "min_band_bins": 2,
    "min_frames": 10,
    "edge_margin_bins": 0.5,
}

# ─────────────────────────────────────────────
# Labels
# ─────────────────────────────────────────────

POSITIVE_LABEL = "positive"
NEGATIVE_LABEL = "negative"
LABELS = [NEGATIVE_LABEL, POSITIVE_LABEL]

MODEL_KINDS = ["naive-bayes", "knn", "tree", "random-forest"]
MODEL_FILE_MAGIC = "NGMODEL v1"
