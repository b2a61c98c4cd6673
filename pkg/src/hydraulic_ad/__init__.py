"""Semi-supervised anomaly detection for hydraulic condition monitoring."""

from .autoencoder import DeepAutoencoder
from .base import BaseDetector, load_detector, save_detector
from .classical import LocalOutlierFactor, OneClassSVM, RobustCovariance
from .dataset import Dataset, generate_synthetic, load_dataset, write_dataset
from .evaluation import SplitSpec, compare, confusion, metrics, split
from .features import FeatureTable, Scaler, extract_features, extract_table
from .helm import HELM
from .isolation_forest import IsolationForest

__version__ = "0.1.0"

__all__ = [
    "BaseDetector", "Dataset", "DeepAutoencoder", "FeatureTable", "HELM", "IsolationForest",
    "LocalOutlierFactor", "OneClassSVM", "RobustCovariance", "Scaler", "SplitSpec",
    "compare", "confusion", "extract_features", "extract_table", "generate_synthetic",
    "load_dataset", "load_detector", "metrics", "save_detector", "split", "write_dataset",
]
