"""Hamiltonian quantum episodic memory model for the three-list paradigm.

The belief state lives on the ordered basis (V1, V2, V3, G, N): one verbatim
dimension per studied list, a shared gist dimension and a non-related
dimension. A cue Hamiltonian evolves the initial state for ``t1``, then the
probe Hamiltonian for ``t2``; the acceptance probability is the squared norm
of the probe's projection of the final state.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from . import qlin

PROB_SLACK = 1e-12


class Basis(enum.IntEnum):
    V1 = 0
    V2 = 1
    V3 = 2
    G = 3
    N = 4


class WordClass(str, enum.Enum):
    HFC = "HFC"
    HFA = "HFA"
    LFC = "LFC"
    LFA = "LFA"


class Cue(str, enum.Enum):
    L1 = "L1"
    L2 = "L2"
    L3 = "L3"
    L4 = "L4"  # unstudied (distractor) list


class Probe(str, enum.Enum):
    L1Q = "L1"
    L2Q = "L2"
    L3Q = "L3"
    L123Q = "L123"


WORD_CLASSES = tuple(WordClass)
CUES = tuple(Cue)
PROBES = tuple(Probe)
SINGLE_PROBES = (Probe.L1Q, Probe.L2Q, Probe.L3Q)

#: Order of the flat parameter vector used by the vectorised routines.
PARAM_NAMES = (
    "nu", "nu_prime", "gamma",
    "gamma_prime_HFC", "gamma_prime_HFA", "gamma_prime_LFC", "gamma_prime_LFA",
    "kappa", "g", "t1", "t2",
)
DRIVER_NAMES = PARAM_NAMES[:8]


class ModelDomainError(ValueError):
    """A parameter or input lies outside the model's domain."""


class DegenerateDenominatorError(ArithmeticError):
    """A ratio was requested whose denominator is (numerically) zero."""


def _as_word_class(value) -> WordClass:
    return value if isinstance(value, WordClass) else WordClass(value)


def _as_cue(value) -> Cue:
    return value if isinstance(value, Cue) else Cue(value)


def _as_probe(value) -> Probe:
    return value if isinstance(value, Probe) else Probe(value)


@dataclass(frozen=True)
class ModelParams:
    """Driver and timing parameters.

    ``gamma_prime`` holds one gist <-> non-related coupling per word class;
    the other drivers are shared by all classes.
    """

    nu: float
    nu_prime: float
    gamma: float
    gamma_prime: Mapping[WordClass, float]
    kappa: float
    g: float = 0.5
    t1: float = math.pi / 2
    t2: float = math.pi / 2

    def __post_init__(self):
        gp = {_as_word_class(k): float(v) for k, v in dict(self.gamma_prime).items()}
        missing = [wc.value for wc in WORD_CLASSES if wc not in gp]
        if missing:
            raise ModelDomainError(f"gamma_prime missing word classes: {', '.join(missing)}")
        object.__setattr__(self, "gamma_prime", gp)
        for name in ("nu", "nu_prime", "gamma", "kappa", "g", "t1", "t2"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ModelDomainError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if not all(math.isfinite(v) for v in gp.values()):
            raise ModelDomainError("gamma_prime entries must be finite")
        if not -1.0 <= self.g <= 1.0:
            raise ModelDomainError(f"g must lie in [-1, 1], got {self.g}")
        if self.t1 <= 0 or self.t2 <= 0:
            raise ModelDomainError("stage durations t1, t2 must be positive")

    @classmethod
    def zero(cls, g=0.5, **kwargs) -> ModelParams:
        """All drivers zero: the Hamiltonians only add phases."""
        return cls(0.0, 0.0, 0.0, {wc: 0.0 for wc in WORD_CLASSES}, 0.0, g=g, **kwargs)

    def to_vector(self) -> np.ndarray:
        gp = self.gamma_prime
        return np.array([
            self.nu, self.nu_prime, self.gamma,
            gp[WordClass.HFC], gp[WordClass.HFA], gp[WordClass.LFC], gp[WordClass.LFA],
            self.kappa, self.g, self.t1, self.t2,
        ])

    @classmethod
    def from_vector(cls, x) -> ModelParams:
        x = [float(v) for v in x]
        if len(x) != len(PARAM_NAMES):
            raise ModelDomainError(f"expected {len(PARAM_NAMES)} values, got {len(x)}")
        return cls(
            nu=x[0], nu_prime=x[1], gamma=x[2],
            gamma_prime=dict(zip(WORD_CLASSES, x[3:7])),
            kappa=x[7], g=x[8], t1=x[9], t2=x[10],
        )

    def to_dict(self) -> dict:
        return {
            "nu": self.nu,
            "nu_prime": self.nu_prime,
            "gamma": self.gamma,
            "gamma_prime": {wc.value: self.gamma_prime[wc] for wc in WORD_CLASSES},
            "kappa": self.kappa,
            "g": self.g,
            "t1": self.t1,
            "t2": self.t2,
        }

    def with_values(self, **changes) -> ModelParams:
        return replace(self, **changes)


# -- states, operators, projectors -------------------------------------------

def initial_state(g=0.5):
    """Initial belief amplitudes ``[a, a, a, g/sqrt2, 1/sqrt2]``, ``a = sqrt((1-g^2)/6)``.

    Accepts a scalar or an array of ``g`` values (returns shape ``g.shape + (5,)``).
    """
    g = np.asarray(g, dtype=float)
    if np.any(~np.isfinite(g)) or np.any(np.abs(g) > 1.0):
        raise ModelDomainError("g must lie in [-1, 1]")
    verbatim = np.sqrt((1.0 - g * g) / 6.0)
    return np.stack(
        [verbatim, verbatim, verbatim, g / math.sqrt(2.0), np.full_like(g, 1.0 / math.sqrt(2.0))],
        axis=-1,
    ).astype(complex)


def cue_hamiltonian(cue, nu, nu_prime, gamma, gamma_prime):
    """Stage-one Hamiltonian for a cue from list L1..L4.

    ``gamma_prime`` is the already-resolved scalar for the word class. Driver
    arguments may be arrays; they broadcast to a stack of matrices.
    """
    cue = _as_cue(cue)
    nu, nu_prime, gamma, gamma_prime = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (nu, nu_prime, gamma, gamma_prime)))
    H = np.zeros(nu.shape + (5, 5))
    G, N = Basis.G, Basis.N
    if cue is Cue.L4:
        H[..., range(5), range(5)] = (-1.0, -1.0, -1.0, -1.0, 1.0)
        for j in range(3):
            H[..., j, N] = H[..., N, j] = nu_prime
    else:
        i = CUES.index(cue)
        diag = [-1.0] * 5
        diag[i] = diag[G] = 1.0
        H[..., range(5), range(5)] = diag
        for j in range(3):
            if j != i:
                H[..., i, j] = H[..., j, i] = nu
                H[..., j, G] = H[..., G, j] = gamma
        H[..., i, N] = H[..., N, i] = nu_prime
    H[..., G, N] = H[..., N, G] = gamma_prime
    return H


def probe_hamiltonian(probe, nu, nu_prime, gamma, gamma_prime, kappa):
    """Stage-two Hamiltonian: the matching cue operator with drivers scaled by ``kappa``.

    The union probe sums the three attenuated single-list operators.
    """
    probe = _as_probe(probe)
    kappa = np.asarray(kappa, dtype=float)
    scaled = [kappa * np.asarray(x, dtype=float) for x in (nu, nu_prime, gamma, gamma_prime)]
    if probe is Probe.L123Q:
        H1, H2, H3 = (cue_hamiltonian(c, *scaled) for c in (Cue.L1, Cue.L2, Cue.L3))
        return H1 + H2 + H3
    return cue_hamiltonian(CUES[PROBES.index(probe)], *scaled)


_PROJECTOR_DIAGONALS = {
    Probe.L1Q: (1, 0, 0, 1, 0),
    Probe.L2Q: (0, 1, 0, 1, 0),
    Probe.L3Q: (0, 0, 1, 1, 0),
    Probe.L123Q: (1, 1, 1, 1, 0),
}
# (probe, basis) acceptance mask, used by the vectorised path
_PROJECTOR_MASK = np.array([_PROJECTOR_DIAGONALS[p] for p in PROBES], dtype=float)


def projector(probe) -> np.ndarray:
    """Diagonal 0/1 projector onto the accepting subspace of a probe."""
    return np.diag(np.array(_PROJECTOR_DIAGONALS[_as_probe(probe)], dtype=float))


# -- single-cell predictions ---------------------------------------------------

def _drivers(word_class, p: ModelParams):
    return p.nu, p.nu_prime, p.gamma, p.gamma_prime[_as_word_class(word_class)]


def cue_stage_state(word_class, cue, p: ModelParams):
    """Belief state at the end of the cue stage."""
    H = cue_hamiltonian(cue, *_drivers(word_class, p))
    return qlin.apply(qlin.propagator(H, p.t1), initial_state(p.g))


def _probe_propagator(word_class, probe, p: ModelParams, t):
    H = probe_hamiltonian(probe, *_drivers(word_class, p), p.kappa)
    return qlin.propagator(H, t)


def final_state(word_class, cue, probe, p: ModelParams):
    """State after both Schroedinger stages for one (class, cue, probe) cell."""
    psi = cue_stage_state(word_class, cue, p)
    return qlin.apply(_probe_propagator(word_class, probe, p, p.t2), psi)


def _checked_probability(value):
    value = float(value)
    if not -PROB_SLACK <= value <= 1.0 + PROB_SLACK:
        raise ArithmeticError(f"probability {value!r} outside [0, 1]; propagation is not unitary")
    return min(max(value, 0.0), 1.0)


def _accepted_mass(probe, psi):
    mask = np.array(_PROJECTOR_DIAGONALS[_as_probe(probe)], dtype=float)
    return float(np.sum(mask * np.abs(psi) ** 2))


def acceptance_probability(word_class, cue, probe, p: ModelParams) -> float:
    """p(probe? | cue) for one word class."""
    return _checked_probability(_accepted_mass(probe, final_state(word_class, cue, probe, p)))


def _union_denominator(value):
    if value <= 1e-12:
        raise DegenerateDenominatorError(f"union acceptance probability {value!r} is ~0")
    return value


def unpacking_factor(word_class, cue, p: ModelParams) -> float:
    """Sum of the three single-list acceptances over the union acceptance."""
    singles = sum(acceptance_probability(word_class, cue, pr, p) for pr in SINGLE_PROBES)
    union = _union_denominator(acceptance_probability(word_class, cue, Probe.L123Q, p))
    return singles / union


def uf_decomposition(word_class, cue, p: ModelParams):
    """Split ``UF - 1`` into a verbatim balance and a gist balance.

    The verbatim term compares, for each list i, the V_i amplitude after the
    L_i? probe with the V_i amplitude after the union probe; the gist term
    compares the summed single-probe G weights with the union G weight. Both
    are normalised by the union acceptance, so ``1 + verbatim + gist == UF``.

    Returns
    -------
    (verbatim_balance, gist_balance)
    """
    union_psi = np.abs(final_state(word_class, cue, Probe.L123Q, p)) ** 2
    singles = [np.abs(final_state(word_class, cue, pr, p)) ** 2 for pr in SINGLE_PROBES]
    denom = _union_denominator(float(union_psi[:4].sum()))
    verbatim = sum(singles[i][i] - union_psi[i] for i in range(3))
    gist = sum(s[Basis.G] for s in singles) - union_psi[Basis.G]
    return float(verbatim / denom), float(gist / denom)


def sequential_acceptance(word_class, cue, first, second, p: ModelParams):
    """Two single-list queries asked in sequence, each with its own probe stage.

    After the cue stage the state evolves under the first probe's Hamiltonian
    for ``t2``, is projected on "yes" and renormalised, then evolves under the
    second probe's Hamiltonian for ``t2`` and is projected again.

    Returns
    -------
    (p_first, p_second_given_first_yes, p_joint)
    """
    first, second = _as_probe(first), _as_probe(second)
    if first not in SINGLE_PROBES or second not in SINGLE_PROBES:
        raise ModelDomainError("sequential queries take single-list probes (L1, L2, L3)")
    psi = cue_stage_state(word_class, cue, p)
    psi = qlin.apply(_probe_propagator(word_class, first, p, p.t2), psi)
    projected = projector(first) @ psi
    p_first = _checked_probability(np.vdot(projected, projected).real)
    if p_first <= 1e-12:
        raise DegenerateDenominatorError("cannot condition on a first answer with zero probability")
    psi = projected / math.sqrt(p_first)
    psi = qlin.apply(_probe_propagator(word_class, second, p, p.t2), psi)
    p_second = _checked_probability(_accepted_mass(second, psi))
    return p_first, p_second, p_first * p_second


def trace_evolution(word_class, cue, p: ModelParams, steps_per_stage=100):
    """Acceptance probabilities over both stages, sampled for plotting.

    Stage one samples ``steps_per_stage`` times on ``[0, t1]``; stage two
    samples ``steps_per_stage`` times on ``(t1, t1 + t2]``, each probe
    evolving under its own Hamiltonian from the shared cue-stage state.

    Returns
    -------
    ndarray, shape (2 * steps_per_stage, 5)
        Columns ``t, p_L1, p_L2, p_L3, p_L123``.
    """
    steps = int(steps_per_stage)
    if steps < 2:
        raise ModelDomainError("steps_per_stage must be >= 2")
    psi0 = initial_state(p.g)
    H_c = cue_hamiltonian(cue, *_drivers(word_class, p))

    t_stage1 = np.linspace(0.0, p.t1, steps)
    t_stage1[-1] = p.t1
    stage1 = qlin.apply(qlin.propagator(H_c, t_stage1), psi0)
    weights1 = np.abs(stage1) ** 2 @ _PROJECTOR_MASK.T

    psi1 = cue_stage_state(word_class, cue, p)
    dt = p.t2 * np.arange(1, steps + 1) / steps
    dt[-1] = p.t2
    weights2 = np.empty((steps, 4))
    for k, probe in enumerate(PROBES):
        U = qlin.propagator(probe_hamiltonian(probe, *_drivers(word_class, p), p.kappa), dt)
        weights2[:, k] = np.abs(qlin.apply(U, psi1)) ** 2 @ _PROJECTOR_MASK[k]

    t = np.concatenate([t_stage1, p.t1 + dt])
    weights = np.clip(np.vstack([weights1, weights2]), 0.0, 1.0)
    return np.column_stack([t, weights])


# -- full tables -------------------------------------------------------------

def final_states_array(theta):
    """Final belief states for many parameter vectors.

    Parameters
    ----------
    theta : array_like, shape (B, 11)
        Rows ordered as :data:`PARAM_NAMES`.

    Returns
    -------
    ndarray, shape (B, 4, 4, 4, 5)
        Indexed ``[batch, word_class, cue, probe, basis]``.
    """
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    if theta.shape[-1] != len(PARAM_NAMES):
        raise ModelDomainError(f"theta must have {len(PARAM_NAMES)} columns")
    nu, nu_p, gam = (theta[:, k, None] for k in range(3))
    gp = theta[:, 3:7]
    kappa = theta[:, 7, None]
    g, t1, t2 = theta[:, 8], theta[:, 9], theta[:, 10]
    if np.any(t1 <= 0) or np.any(t2 <= 0):
        raise ModelDomainError("stage durations must be positive")

    # (B, class, cue|probe, 5, 5)
    H_cue = np.stack([cue_hamiltonian(c, nu, nu_p, gam, gp) for c in CUES], axis=2)
    H_probe = np.stack([probe_hamiltonian(pr, nu, nu_p, gam, gp, kappa) for pr in PROBES], axis=2)
    U_cue = qlin.propagator(H_cue, t1[:, None, None])
    U_probe = qlin.propagator(H_probe, t2[:, None, None])

    psi1 = qlin.apply(U_cue, initial_state(g)[:, None, None, :])
    return np.einsum("bwpij,bwcj->bwcpi", U_probe, psi1)


def predict_array(theta):
    """Vectorised acceptance probabilities, shape (B, 4, 4, 4) ``[batch, class, cue, probe]``."""
    final = final_states_array(theta)
    probs = np.einsum("bwcpi,pi->bwcp", np.abs(final) ** 2, _PROJECTOR_MASK)
    if np.any(probs < -PROB_SLACK) or np.any(probs > 1.0 + PROB_SLACK):
        raise ArithmeticError("probability outside [0, 1]; propagation is not unitary")
    return np.clip(probs, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class PredictionTable:
    """All 64 acceptance probabilities and 16 unpacking factors.

    ``probabilities`` is indexed ``[word_class, cue, probe]`` in enum order.
    """

    probabilities: np.ndarray
    params: ModelParams | None = field(default=None, compare=False)

    def __post_init__(self):
        arr = np.array(self.probabilities, dtype=float)
        if arr.shape != (4, 4, 4):
            raise ValueError(f"expected shape (4, 4, 4), got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "probabilities", arr)

    @property
    def unpacking(self) -> np.ndarray:
        """Unpacking factors, shape (4, 4) ``[word_class, cue]``."""
        union = self.probabilities[..., 3]
        if np.any(union <= 1e-12):
            raise DegenerateDenominatorError("union acceptance probability is ~0")
        return self.probabilities[..., :3].sum(axis=-1) / union

    def probability(self, word_class, cue, probe) -> float:
        return float(self.probabilities[
            WORD_CLASSES.index(_as_word_class(word_class)),
            CUES.index(_as_cue(cue)),
            PROBES.index(_as_probe(probe)),
        ])

    def uf(self, word_class, cue) -> float:
        return float(self.unpacking[WORD_CLASSES.index(_as_word_class(word_class)),
                                    CUES.index(_as_cue(cue))])

    def cells(self):
        """Yield ``(word_class, cue, probe, probability)`` in canonical order."""
        for a, wc in enumerate(WORD_CLASSES):
            for b, cue in enumerate(CUES):
                for c, probe in enumerate(PROBES):
                    yield wc, cue, probe, float(self.probabilities[a, b, c])


def predict_table(p: ModelParams) -> PredictionTable:
    """Predict every (class, cue, probe) cell for one parameter set."""
    return PredictionTable(predict_array(p.to_vector()[None, :])[0], params=p)
