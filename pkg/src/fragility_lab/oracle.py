"""Minimum-distance (1-nearest-neighbour) classifier and its exact flip radius."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .datagen import Dataset
from .exceptions import DimensionError, DomainError


@dataclass(frozen=True)
class OracleDecision:
    predicted_class: int
    nearest_index: int
    distance: float


def _distances(points: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.sqrt(((points - x) ** 2).sum(axis=1))


class MinDistanceClassifier(ClassifierMixin, BaseEstimator):
    """Assigns the label of the closest training point (exhaustive search).

    Ties go to the lowest training index.
    """

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.points_ = X
        self.labels_ = y
        self.classes_ = np.unique(y)
        self.n_features_in_ = X.shape[1]
        return self

    def kneighbor(self, x):
        check_is_fitted(self, "points_")
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n_features_in_,):
            raise DimensionError(f"expected a vector of dimension {self.n_features_in_}, got shape {x.shape}")
        dist = _distances(self.points_, x)
        idx = int(np.argmin(dist))
        return idx, float(dist[idx])

    def predict(self, X):
        check_is_fitted(self, "points_")
        X = check_array(X)
        return np.array([self.labels_[self.kneighbor(x)[0]] for x in X])


def min_distance_classify(dataset: Dataset, x) -> OracleDecision:
    if len(dataset) == 0:
        raise DomainError("dataset is empty")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (dataset.d,):
        raise DimensionError(f"expected a vector of dimension {dataset.d}, got shape {x.shape}")
    dist = _distances(dataset.inputs, x)
    idx = int(np.argmin(dist))
    return OracleDecision(int(dataset.labels[idx]), idx, float(dist[idx]))


def oracle_flip(dataset: Dataset, index: int):
    """``(radius, nearest_cross_class_index)`` for training point ``index``.

    The radius is half the distance to the nearest point of another class;
    moving past it along the segment toward that point flips the
    minimum-distance rule, and no shorter move can.
    """
    labels = dataset.labels
    if np.unique(labels).size < 2:
        raise DomainError("flip radius needs at least two classes")
    if not 0 <= index < len(dataset):
        raise DomainError(f"point index {index} out of range")
    other = np.flatnonzero(labels != labels[index])
    dist = _distances(dataset.inputs[other], dataset.inputs[index])
    k = int(np.argmin(dist))
    return float(dist[k]) / 2.0, int(other[k])


def oracle_flip_radius(dataset: Dataset, index: int) -> float:
    return oracle_flip(dataset, index)[0]


def min_cross_class_distance(dataset: Dataset) -> float:
    """Smallest distance between points of different classes."""
    best = np.inf
    for c in np.unique(dataset.labels):
        mine = dataset.inputs[dataset.labels == c]
        rest = dataset.inputs[dataset.labels != c]
        # chunked to bound memory for 2^14-point hypercubes
        for start in range(0, mine.shape[0], 256):
            block = mine[start:start + 256]
            sq = (block**2).sum(1)[:, None] + (rest**2).sum(1)[None, :] - 2.0 * block @ rest.T
            best = min(best, float(np.sqrt(max(sq.min(), 0.0))))
    return best
