"""Input checks shared by the estimators."""
import numpy as np
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import ParameterError
from .geometry import Partition


def check_sites(X, min_samples=1):
    """Finite float array of shape (n, 2)."""
    X = check_array(X, dtype=float, ensure_min_samples=min_samples)
    if X.shape[1] != 2:
        raise ParameterError(f"sites must have two columns, got {X.shape[1]}")
    return X


def check_sites_values(X, y, min_samples=2):
    X, y = check_X_y(X, y, dtype=float, y_numeric=True, ensure_min_samples=min_samples)
    if X.shape[1] != 2:
        raise ParameterError(f"sites must have two columns, got {X.shape[1]}")
    return X, y


def as_partition(part):
    return part if isinstance(part, Partition) else Partition(np.asarray(part, float))


__all__ = ["as_partition", "check_is_fitted", "check_sites", "check_sites_values"]
