"""Least-squares fitting of the model to observed acceptance proportions.

The objective is the RMSE over the 64 probability cells. A multi-resolution
Cartesian grid locates a basin and Nelder-Mead polishes the incumbent.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .io import ObservedDataset
from .model import DRIVER_NAMES, PARAM_NAMES, ModelParams, PredictionTable, predict_array

log = logging.getLogger(__name__)


class SchemaError(ValueError):
    """Prediction and observation tables do not cover the same cells."""


class ConfigurationError(ValueError):
    """Invalid fitting configuration."""


def _as_cells(obj, what):
    if isinstance(obj, PredictionTable):
        arr = obj.probabilities
    elif isinstance(obj, ObservedDataset):
        arr = obj.proportions
    else:
        arr = np.asarray(obj, dtype=float)
    if arr.shape != (4, 4, 4):
        raise SchemaError(f"{what} must cover the 64 (class, cue, probe) cells, got shape {arr.shape}")
    return arr


def rmse(pred, obs) -> float:
    """Root mean squared error over the 64 probability cells (UF cells excluded)."""
    diff = _as_cells(pred, "prediction") - _as_cells(obs, "observation")
    return math.sqrt(float(np.mean(diff * diff)))


# -- objective ----------------------------------------------------------------

_DOMAIN = {"g": (-1.0, 1.0), "t1": (0.0, math.inf), "t2": (0.0, math.inf)}


class Objective:
    """RMSE as a function of a subset of the flat parameter vector.

    Parameters
    ----------
    observed : array_like, shape (4, 4, 4)
    base : ModelParams
        Supplies the values of all parameters that are not free.
    free : sequence of str
        Names from :data:`hqem.model.PARAM_NAMES`.
    mask : array_like of bool, shape (4, 4, 4), optional
        Cells entering the objective; all 64 by default.
    """

    def __init__(self, observed, base: ModelParams, free=DRIVER_NAMES, mask=None,
                 chunk_size=2048, n_jobs=1):
        self.observed = _as_cells(observed, "observation")
        self.mask = np.ones((4, 4, 4), bool) if mask is None else np.asarray(mask, bool)
        if self.mask.shape != (4, 4, 4) or not self.mask.any():
            raise ConfigurationError("mask must select at least one of the 64 cells")
        free = tuple(free)
        unknown = [n for n in free if n not in PARAM_NAMES]
        if unknown:
            raise ConfigurationError(f"unknown parameter names: {unknown}")
        if not free:
            raise ConfigurationError("no free parameters to fit")
        if len(set(free)) != len(free):
            raise ConfigurationError("duplicate free parameter names")
        self.free = free
        self.index = np.array([PARAM_NAMES.index(n) for n in free])
        self.base = base.to_vector()
        self.chunk_size = int(chunk_size)
        self.n_jobs = int(n_jobs)
        self.evaluations = 0

    def full(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        theta = np.broadcast_to(self.base, (len(x), len(self.base))).copy()
        theta[:, self.index] = x
        return theta

    def params(self, x) -> ModelParams:
        return ModelParams.from_vector(self.full(x)[0])

    def _chunk(self, theta):
        ok = np.ones(len(theta), bool)
        for name, (lo, hi) in _DOMAIN.items():
            col = theta[:, PARAM_NAMES.index(name)]
            ok &= (col >= lo) & (col <= hi) if name == "g" else (col > lo) & (col < hi)
        out = np.full(len(theta), np.inf)
        if ok.any():
            diff = predict_array(theta[ok]) - self.observed
            out[ok] = np.sqrt(np.mean(diff[:, self.mask] ** 2, axis=-1))
        return out

    def batch(self, x) -> np.ndarray:
        """RMSE for each row of ``x`` (shape (B, len(free)))."""
        theta = self.full(x)
        self.evaluations += len(theta)
        chunks = [theta[i:i + self.chunk_size] for i in range(0, len(theta), self.chunk_size)]
        if self.n_jobs > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(self.n_jobs) as pool:
                parts = list(pool.map(self._chunk, chunks))
        else:
            parts = [self._chunk(c) for c in chunks]
        return np.concatenate(parts)

    def __call__(self, x) -> float:
        return float(self.batch(np.asarray(x, dtype=float)[None, :])[0])


# -- grid search --------------------------------------------------------------

@dataclass(frozen=True)
class GridAxis:
    name: str
    lower: float
    upper: float
    points: int = 3

    def __post_init__(self):
        if self.name not in PARAM_NAMES:
            raise ConfigurationError(f"unknown parameter '{self.name}'")
        if not self.lower < self.upper:
            raise ConfigurationError(f"{self.name}: lower bound must be below upper bound")
        if self.points < 2:
            raise ConfigurationError(f"{self.name}: need at least 2 grid points")


@dataclass(frozen=True)
class GridSpec:
    """Cartesian grid over the free parameters, refined around the incumbent.

    After each level every axis is re-centred on the incumbent with its
    half-width multiplied by ``shrink``.
    """

    axes: tuple[GridAxis, ...]
    levels: int = 5
    shrink: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        if not self.axes:
            raise ConfigurationError("grid has no free parameters")
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise ConfigurationError("duplicate grid axes")
        if self.levels < 1:
            raise ConfigurationError("refinement_levels must be >= 1")
        if not 0.0 < self.shrink < 1.0:
            raise ConfigurationError("shrink factor must lie in (0, 1)")

    @classmethod
    def uniform(cls, names=DRIVER_NAMES, lower=-1.0, upper=1.0, points=3, levels=5, shrink=0.5):
        return cls(tuple(GridAxis(n, lower, upper, points) for n in names), levels, shrink)

    @property
    def names(self):
        return tuple(a.name for a in self.axes)


@dataclass
class FitResult:
    params: ModelParams
    rmse: float
    evaluations: int
    trajectory: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"params": self.params.to_dict(), "rmse": self.rmse, "evaluations": self.evaluations}


def _base_params(fixed) -> ModelParams:
    if fixed is None:
        return ModelParams.zero()
    if isinstance(fixed, ModelParams):
        return fixed
    vec = ModelParams.zero().to_vector()
    for name, value in dict(fixed).items():
        if name not in PARAM_NAMES:
            raise ConfigurationError(f"unknown fixed parameter '{name}'")
        vec[PARAM_NAMES.index(name)] = value
    return ModelParams.from_vector(vec)


def _clip_to_domain(name, lo, hi):
    dlo, dhi = _DOMAIN.get(name, (-math.inf, math.inf))
    if name != "g" and dlo == 0.0:
        dlo = 1e-9
    return max(lo, dlo), min(hi, dhi)


def grid_search(obs, spec: GridSpec | None = None, fixed=None, *, mask=None, n_jobs=1,
                chunk_size=2048) -> FitResult:
    """Exhaustive multi-resolution grid search.

    Parameters
    ----------
    obs : ObservedDataset or array_like (4, 4, 4)
    spec : GridSpec, optional
        Defaults to the eight drivers on ``[-1, 1]``, 3 points, 5 levels.
    fixed : ModelParams or dict, optional
        Values of the parameters not on the grid (``g``, ``t1``, ``t2`` by
        default 0.5, pi/2, pi/2).

    Ties within a level go to the lexicographically smallest grid index
    vector; a later level replaces the incumbent only on strict improvement.
    """
    spec = spec or GridSpec.uniform()
    objective = Objective(obs, _base_params(fixed), spec.names, mask=mask,
                          chunk_size=chunk_size, n_jobs=n_jobs)
    bounds = [(a.lower, a.upper) for a in spec.axes]
    best_x, best_f = None, math.inf
    trajectory = []
    for level in range(spec.levels):
        nodes = [np.linspace(lo, hi, a.points) for a, (lo, hi) in zip(spec.axes, bounds)]
        grid = np.stack(np.meshgrid(*nodes, indexing="ij"), axis=-1).reshape(-1, len(nodes))
        values = objective.batch(grid)
        k = int(np.argmin(values))  # first minimum in C order
        if values[k] < best_f:
            best_x, best_f = grid[k].copy(), float(values[k])
        trajectory.append((level, best_f))
        log.info("grid level %d: rmse %.6f (%d evaluations)", level, best_f, objective.evaluations)

        bounds = []
        for a, centre in zip(spec.axes, best_x):
            half = 0.5 * (a.upper - a.lower) * spec.shrink ** (level + 1)
            bounds.append(_clip_to_domain(a.name, centre - half, centre + half))
    if not math.isfinite(best_f):
        raise ConfigurationError("no grid point lies inside the parameter domain")
    return FitResult(objective.params(best_x), best_f, objective.evaluations, trajectory)


# -- simplex refinement -------------------------------------------------------

def refine(obs, start: ModelParams, free=DRIVER_NAMES, *, mask=None, max_evaluations=5000,
           xatol=1e-6, fatol=1e-10, step=0.1) -> FitResult:
    """Nelder-Mead polish of ``start`` over the ``free`` parameters.

    The initial simplex offsets each free parameter by ``step`` (absolute;
    a relative simplex collapses on near-zero couplings). The simplex is
    restarted from its best vertex, with a ten times smaller step, until a
    restart no longer improves the RMSE by more than ``fatol`` or the
    evaluation budget is spent. The result is never worse than ``start``.
    """
    objective = Objective(obs, start, free, mask=mask)
    x = start.to_vector()[objective.index]
    f = objective(x)
    trajectory = [(0, f)]
    restart = 0
    while objective.evaluations < max_evaluations:
        restart += 1
        h = max(step * 0.1 ** (restart - 1), 10 * xatol)
        simplex = np.vstack([x, x + h * np.eye(len(x))])
        res = minimize(objective, x, method="Nelder-Mead", options={
            "xatol": xatol, "fatol": fatol, "initial_simplex": simplex,
            "maxfev": max_evaluations - objective.evaluations,
        })
        improved = res.fun < f
        gain = f - res.fun
        if improved:
            x, f = np.asarray(res.x, dtype=float), float(res.fun)
        trajectory.append((restart, f))
        log.debug("simplex restart %d: rmse %.3g", restart, f)
        if not improved or gain <= fatol:
            break
    return FitResult(objective.params(x), f, objective.evaluations, trajectory)


def fit(obs, spec: GridSpec | None = None, fixed=None, *, refine_result=True, n_jobs=1,
        mask=None) -> FitResult:
    """Grid search followed (optionally) by simplex refinement."""
    spec = spec or GridSpec.uniform()
    coarse = grid_search(obs, spec, fixed, mask=mask, n_jobs=n_jobs)
    if not refine_result:
        return coarse
    polished = refine(obs, coarse.params, spec.names, mask=mask)
    trajectory = coarse.trajectory + [("refine", polished.rmse)]
    return FitResult(polished.params, polished.rmse,
                     coarse.evaluations + polished.evaluations, trajectory)
