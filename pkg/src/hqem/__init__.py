"""Hamiltonian quantum episodic memory (QEM) model for three-list source memory."""

from .estimator import HamiltonianQEM
from .fit import FitResult, GridAxis, GridSpec, grid_search, refine, rmse
from .io import ObservedDataset, bundled_observations, bundled_params, load_observations, load_params
from .model import (Basis, Cue, ModelParams, PredictionTable, Probe, WordClass,
                    acceptance_probability, cue_hamiltonian, final_state, initial_state,
                    predict_table, probe_hamiltonian, projector, sequential_acceptance,
                    trace_evolution, uf_decomposition, unpacking_factor)

__version__ = "0.1.0"
