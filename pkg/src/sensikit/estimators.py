"""Scikit-learn style front end for the single-sample rank estimators.

The rank-based indices need nothing but an (X, y) sample, so they slot into
the usual fit/transform pattern: fitting scores every feature and transform
keeps the features whose index clears a threshold.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_is_fitted, check_X_y

from .ranks import chatterjee_xi, rank_sobol, tie_columns


def rank_sobol_scores(X, y) -> np.ndarray:
    """Per-feature first-order Sobol' scores; usable as a score_func."""
    X, y = check_X_y(X, y, y_numeric=True)
    return np.array([rank_sobol(X[:, i], y) for i in range(X.shape[1])])


def rank_cvm_scores(X, y) -> np.ndarray:
    """Per-feature CDF-ratio (Cramer-von-Mises) scores; usable as a score_func."""
    X, y = check_X_y(X, y, y_numeric=True)
    return np.array([chatterjee_xi(X[:, i], y) for i in range(X.shape[1])])


class RankSensitivityAnalysis(SelectorMixin, BaseEstimator):
    """Estimate first-order sensitivity indices from a single data sample.

    Ranks each feature column, pairs every observation with its next-rank
    neighbor and turns the neighbor products into variance-based (Sobol')
    or CDF-based (Cramer-von-Mises) indices. No paired design or model
    access is required, and one sample serves all features.

    Parameters
    ----------
    method : {"sobol", "cvm"}, default="sobol"
        Index family: variance ratio or CDF-comparison ratio.
    threshold : float or None, default=None
        When set, transform() keeps features with index >= threshold;
        when None all features are kept.

    Attributes
    ----------
    indices_ : ndarray of shape (n_features,)
        Estimated first-order index per feature.
    tie_columns_ : list of int
        1-based positions of feature columns containing tied values
        (ranks then depend on row order; indices remain defined).
    n_features_in_ : int
    """

    def __init__(self, method: str = "sobol", threshold: Optional[float] = None):
        self.method = method
        self.threshold = threshold

    def fit(self, X, y):
        if self.method not in ("sobol", "cvm"):
            raise ValueError(f"method must be 'sobol' or 'cvm', got {self.method!r}")
        X, y = check_X_y(X, y, y_numeric=True)
        stat = rank_sobol if self.method == "sobol" else chatterjee_xi
        self.indices_ = np.array([stat(X[:, i], y) for i in range(X.shape[1])])
        self.tie_columns_ = tie_columns(X)
        self.n_features_in_ = X.shape[1]
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "indices_")
        if self.threshold is None:
            return np.ones_like(self.indices_, dtype=bool)
        return self.indices_ >= self.threshold
