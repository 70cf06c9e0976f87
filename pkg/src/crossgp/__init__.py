"""Cross-day glycemic control prediction from daily external-activity features."""

__version__ = "0.1.0"

FEATURE_NAMES: tuple[str, ...] = (
    "tir",
    "tbr",
    "tar",
    "correction_bolus",
    "meal",
    "meal_bolus",
    "total_bolus",
)
CLASS_NAMES: tuple[str, ...] = ("Good", "Moderate", "Poor")
N_FEATURES = len(FEATURE_NAMES)
N_CLASSES = len(CLASS_NAMES)
