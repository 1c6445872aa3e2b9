"""scikit-learn style front end.

Each sample is one experimental cell described by three tokens
``(word_class, cue, probe)``; the target is its acceptance proportion.

>>> from hqem.estimator import HamiltonianQEM, dataset_to_xy
>>> from hqem.io import bundled_observations
>>> X, y = dataset_to_xy(bundled_observations())
>>> model = HamiltonianQEM(levels=3).fit(X, y)            # doctest: +SKIP
>>> model.predict(X[:4])                                  # doctest: +SKIP
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, column_or_1d

from . import fit as _fit
from .io import ObservedDataset
from .model import (CUES, DRIVER_NAMES, PROBES, WORD_CLASSES, Cue, ModelParams, Probe,
                    WordClass, predict_table)


def check_cells(X) -> np.ndarray:
    """Validate cell descriptors and return integer indices, shape (n, 3).

    Accepts strings (``"HFC"``, ``"L1"``, ``"L123"``) or the corresponding
    enum members, as an array, list of tuples or a DataFrame with columns
    ``word_class, cue, probe``.
    """
    if hasattr(X, "columns") and {"word_class", "cue", "probe"} <= set(X.columns):
        X = X[["word_class", "cue", "probe"]]
    X = check_array(X, dtype=object, ensure_2d=True)
    if X.shape[1] != 3:
        raise ValueError(f"X must have 3 columns (word_class, cue, probe), got {X.shape[1]}")
    out = np.empty(X.shape, dtype=np.intp)
    lookups = ((WordClass, WORD_CLASSES), (Cue, CUES), (Probe, PROBES))
    for j, (enum_type, members) in enumerate(lookups):
        for i, token in enumerate(X[:, j]):
            try:
                out[i, j] = members.index(enum_type(getattr(token, "value", token)))
            except ValueError:
                raise ValueError(f"row {i}: unknown {enum_type.__name__} token {token!r}") from None
    return out


def all_cells() -> np.ndarray:
    """The 64 cells in canonical order as an (64, 3) array of string tokens."""
    return np.array([(wc.value, c.value, p.value)
                     for wc in WORD_CLASSES for c in CUES for p in PROBES], dtype=object)


def dataset_to_xy(obs: ObservedDataset):
    X = all_cells()
    return X, np.asarray(obs.proportions, dtype=float).reshape(-1)


class HamiltonianQEM(RegressorMixin, BaseEstimator):
    """Fit the eight Hamiltonian drivers to acceptance proportions.

    Parameters
    ----------
    grid_min, grid_max : float
        Initial bounds for every driver on the level-0 grid.
    grid_points : int
        Points per axis on each grid level.
    levels : int
        Number of grid refinement levels.
    shrink : float
        Factor applied to the grid half-width after each level.
    refine : bool
        Polish the grid incumbent with Nelder-Mead.
    g, t1, t2 : float
        Initial gist weight and stage durations, held fixed.
    start : ModelParams or None
        If given, skip the grid and refine from this point.
    n_jobs : int
        Threads used for grid evaluation.

    Attributes
    ----------
    params_ : ModelParams
    rmse_ : float
    n_evaluations_ : int
    trajectory_ : list of (level, rmse)
    """

    def __init__(self, grid_min=-1.0, grid_max=1.0, grid_points=3, levels=5, shrink=0.5,
                 refine=True, g=0.5, t1=math.pi / 2, t2=math.pi / 2, start=None, n_jobs=1):
        self.grid_min = grid_min
        self.grid_max = grid_max
        self.grid_points = grid_points
        self.levels = levels
        self.shrink = shrink
        self.refine = refine
        self.g = g
        self.t1 = t1
        self.t2 = t2
        self.start = start
        self.n_jobs = n_jobs

    def _observed(self, X, y):
        idx = check_cells(X)
        y = column_or_1d(np.asarray(y, dtype=float))
        if len(y) != len(idx):
            raise ValueError(f"X has {len(idx)} rows but y has {len(y)}")
        if np.any(~np.isfinite(y)) or np.any((y < 0) | (y > 1)):
            raise ValueError("targets must be proportions in [0, 1]")
        observed = np.zeros((4, 4, 4))
        mask = np.zeros((4, 4, 4), bool)
        for (a, b, c), value in zip(idx, y):
            if mask[a, b, c]:
                raise ValueError(f"duplicate cell {WORD_CLASSES[a].value},{CUES[b].value},{PROBES[c].value}")
            observed[a, b, c] = value
            mask[a, b, c] = True
        return observed, mask

    def fit(self, X, y):
        observed, mask = self._observed(X, y)
        fixed = {"g": self.g, "t1": self.t1, "t2": self.t2}
        if self.start is not None:
            start = self.start.with_values(**fixed)
            result = _fit.refine(observed, start, mask=mask)
        else:
            spec = _fit.GridSpec.uniform(DRIVER_NAMES, self.grid_min, self.grid_max,
                                         self.grid_points, self.levels, self.shrink)
            result = _fit.fit(observed, spec, fixed, refine_result=self.refine,
                              n_jobs=self.n_jobs, mask=mask)
        self.params_ = result.params
        self.rmse_ = result.rmse
        self.n_evaluations_ = result.evaluations
        self.trajectory_ = result.trajectory
        self.n_features_in_ = 3
        return self

    def predict(self, X):
        """Acceptance probability for each (word_class, cue, probe) row."""
        check_is_fitted(self, "params_")
        idx = check_cells(X)
        table = predict_table(self.params_).probabilities
        return table[idx[:, 0], idx[:, 1], idx[:, 2]]

    def predict_table(self):
        check_is_fitted(self, "params_")
        return predict_table(self.params_)

    @classmethod
    def from_params(cls, params: ModelParams):
        """An already-fitted estimator carrying fixed parameters."""
        est = cls(g=params.g, t1=params.t1, t2=params.t2)
        est.params_ = params
        est.rmse_ = float("nan")
        est.n_evaluations_ = 0
        est.trajectory_ = []
        est.n_features_in_ = 3
        return est
