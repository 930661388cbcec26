"""Dataset-level detection of label-flipping poisoning.

A meta-learner maps data-complexity measures of a training set to the clean
accuracy a model trained on it should reach. A gap between that estimate and
the cross-validated accuracy actually observed signals flipped labels.
"""
from .data import Dataset, load_csv, save_csv
from .detector import Verdict, detect

__all__ = ["Dataset", "Verdict", "detect", "load_csv", "save_csv"]
__version__ = "0.1.0"
