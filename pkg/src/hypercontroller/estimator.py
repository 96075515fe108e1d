"""Recursive ridge regression on windows of past rewards.

Each predictor keeps the regularized normal-equation sums

    V = lam * I + sum_k xi_k xi_k^T        (s x s)
    B = sum_k reward_k * xi_k^T            (1 x s)

and the coefficient vector ``G`` solving ``V G = B^T``. Predictions are the
inner product ``G^T xi``. :class:`RidgeModel` is the lightweight object the
controller stores per (dimension, context, action); the scikit-learn style
classes at the bottom wrap the same arithmetic for pipeline use.
"""

from __future__ import annotations

from collections import deque

import numpy as np
from scipy.linalg import solve_triangular
from scipy.linalg.lapack import dposv
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from ._validation import check_finite_scalar, check_positive_int, check_positive_real, check_square, check_vector


def _cholesky(V: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(V)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError("matrix is not symmetric positive definite") from None


def invert_spd(V) -> np.ndarray:
    """Invert a symmetric positive definite matrix via its Cholesky factor.

    Raises
    ------
    numpy.linalg.LinAlgError
        If the factorization detects a non positive definite input.
    """
    V = check_square(V, "V")
    if not np.allclose(V, V.T, rtol=1e-12, atol=0.0):
        raise np.linalg.LinAlgError("matrix is not symmetric")
    L = _cholesky(V)
    Linv = solve_triangular(L, np.eye(V.shape[0]), lower=True)
    inv = Linv.T @ Linv
    return (inv + inv.T) / 2


def spd_solve(V: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``V x = b`` for SPD ``V`` (Cholesky factor and substitution in one LAPACK call)."""
    _, x, info = dposv(V, b, lower=1)
    if info > 0:
        raise np.linalg.LinAlgError("matrix is not symmetric positive definite")
    if info < 0:
        raise ValueError(f"invalid argument {-info} to the Cholesky solver")
    return x


class RidgeModel:
    """One recursive ridge predictor with window length ``s``.

    A fresh model is ``(lam * I, 0, 0)`` and predicts 0 for every input.
    """

    __slots__ = ("V", "B", "G", "n_updates", "visits")

    def __init__(self, V, B, G, n_updates: int = 0, visits=None):
        self.V = V
        self.B = B
        self.G = G
        self.n_updates = n_updates
        self.visits = [] if visits is None else list(visits)

    @classmethod
    def fresh(cls, s: int, lam: float = 1.0) -> "RidgeModel":
        return cls(lam * np.eye(s), np.zeros(s), np.zeros(s))

    @property
    def s(self) -> int:
        return self.B.shape[0]

    def update(self, xi, reward: float, t: int | None = None) -> "RidgeModel":
        """Absorb one ``(xi, reward)`` pair in place and return ``self``."""
        xi = check_vector(xi, self.s, "xi")
        reward = check_finite_scalar(reward, "reward")
        V = self.V + np.outer(xi, xi)
        self.V = (V + V.T) / 2
        self.B = self.B + reward * xi
        self.G = spd_solve(self.V, self.B)
        self.n_updates += 1
        if t is not None:
            self.visits.append(int(t))
        return self

    def predict(self, xi) -> float:
        xi = check_vector(xi, self.s, "xi")
        return float(self.G @ xi)

    def copy(self) -> "RidgeModel":
        return RidgeModel(self.V.copy(), self.B.copy(), self.G.copy(), self.n_updates, self.visits)

    def to_dict(self) -> dict:
        return {
            "V": self.V.tolist(),
            "B": self.B.tolist(),
            "G": self.G.tolist(),
            "n_updates": self.n_updates,
            "visits": list(self.visits),
        }

    @classmethod
    def from_dict(cls, doc: dict, s: int) -> "RidgeModel":
        V = np.asarray(doc["V"], dtype=float)
        B = np.asarray(doc["B"], dtype=float)
        G = np.asarray(doc["G"], dtype=float)
        if V.shape != (s, s) or B.shape != (s,) or G.shape != (s,):
            raise ValueError(f"model arrays do not match window length s={s}")
        if not (np.all(np.isfinite(V)) and np.all(np.isfinite(B)) and np.all(np.isfinite(G))):
            raise ValueError("model arrays contain non-finite entries")
        n = doc["n_updates"]
        if not isinstance(n, int) or n < 0:
            raise ValueError("n_updates must be a non-negative integer")
        return cls(V, B, G, n, doc.get("visits", []))


def ridge_update(model: RidgeModel, xi, reward: float) -> RidgeModel:
    """Return a new model that has absorbed ``(xi, reward)``; ``model`` is untouched."""
    return model.copy().update(xi, reward)


def predict(model: RidgeModel, xi) -> float:
    return model.predict(xi)


def batch_ridge(Z: np.ndarray, X: np.ndarray, lam: float) -> np.ndarray:
    """Closed-form ridge coefficients from stacked data.

    ``Z`` is ``(n, s)`` with one regressor window per row and ``X`` the
    ``n`` targets. Solved as an augmented least-squares problem rather than
    through the normal equations.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    X = np.asarray(X, dtype=float).ravel()
    s = Z.shape[1]
    A = np.vstack([Z, np.sqrt(lam) * np.eye(s)])
    y = np.concatenate([X, np.zeros(s)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return coef


class RecursiveRidgeRegressor(RegressorMixin, BaseEstimator):
    """Ridge regression without intercept, fitted incrementally.

    ``partial_fit`` absorbs rows one at a time with exactly the update the
    controller uses, so ``coef_`` after any sequence of calls equals the
    batch ridge solution on all rows seen.

    Parameters
    ----------
    lam : float, default=1.0
        Ridge penalty; must be positive.
    """

    def __init__(self, lam: float = 1.0):
        self.lam = lam

    def _reset(self, n_features: int):
        self.model_ = RidgeModel.fresh(n_features, check_positive_real(self.lam, "lam"))

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True)
        self._reset(X.shape[1])
        return self._absorb(X, y)

    def partial_fit(self, X, y):
        first = not hasattr(self, "model_")
        X, y = validate_data(self, X, y, y_numeric=True, reset=first)
        if first:
            self._reset(X.shape[1])
        return self._absorb(X, y)

    def _absorb(self, X, y):
        for row, target in zip(X, y):
            self.model_.update(row, target)
        self.coef_ = self.model_.G.copy()
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = validate_data(self, X, reset=False)
        return X @ self.model_.G

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.regressor_tags.poor_score = True
        return tags


class RewardWindow(TransformerMixin, BaseEstimator):
    """Turn a reward series into lagged windows ``(X[t-s], ..., X[t-1])``.

    ``transform`` on a length-``n`` series returns an ``(n - s, s)`` array
    whose row ``k`` is the window preceding ``series[k + s]``; pair it with
    ``target(series)`` to regress each reward on its window.
    """

    def __init__(self, s: int = 1):
        self.s = s

    def fit(self, X, y=None):
        check_positive_int(self.s, "s")
        self.n_features_in_ = 1
        return self

    def _series(self, X):
        arr = np.asarray(X, dtype=float).ravel()
        if not np.all(np.isfinite(arr)):
            raise ValueError("reward series contains non-finite entries")
        if arr.shape[0] <= self.s:
            raise ValueError(f"need more than s={self.s} rewards, got {arr.shape[0]}")
        return arr

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        arr = self._series(X)
        return np.lib.stride_tricks.sliding_window_view(arr, self.s)[:-1].copy()

    def target(self, X):
        return self._series(X)[self.s:].copy()


class RingBuffer:
    """Fixed-capacity window of the most recent rewards, oldest first."""

    def __init__(self, capacity: int, items=()):
        self.capacity = check_positive_int(capacity, "capacity")
        self._items = deque(items, maxlen=self.capacity)

    def append(self, value: float):
        self._items.append(float(value))

    @property
    def full(self) -> bool:
        return len(self._items) == self.capacity

    def __len__(self):
        return len(self._items)

    def to_array(self) -> np.ndarray:
        return np.fromiter(self._items, dtype=float, count=len(self._items))

    def to_list(self) -> list[float]:
        return list(self._items)
