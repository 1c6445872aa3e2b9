import math

import numpy as np
import pytest
from scipy.linalg import expm

from hqem.io import bundled_observations, bundled_params
from hqem.model import ModelParams

# Predicted block of the published results table, indexed [class][probe][cue]
# with classes HFC, HFA, LFC, LFA and probe rows L1?, L2?, L3?, L123?.
PUBLISHED_PRED = {
    "HFC": [[.45, .36, .36, .20], [.36, .45, .36, .20], [.36, .36, .45, .20], [.53, .53, .53, .23]],
    "HFA": [[.49, .39, .39, .19], [.39, .49, .39, .19], [.39, .39, .49, .19], [.57, .57, .57, .22]],
    "LFC": [[.49, .39, .39, .19], [.39, .49, .39, .19], [.39, .39, .49, .19], [.57, .57, .57, .22]],
    "LFA": [[.57, .47, .47, .18], [.47, .57, .47, .18], [.47, .47, .57, .18], [.64, .64, .64, .21]],
}
PUBLISHED_UF = {
    "HFC": [2.18, 2.18, 2.18, 2.70],
    "HFA": [2.24, 2.24, 2.24, 2.65],
    "LFC": [2.24, 2.24, 2.24, 2.64],
    "LFA": [2.35, 2.35, 2.35, 2.52],
}
PUBLISHED_RMSE = 0.054737


def published_pred_array():
    """(class, cue, probe) layout of PUBLISHED_PRED."""
    return np.array([np.array(PUBLISHED_PRED[c]).T for c in ("HFC", "HFA", "LFC", "LFA")])


def published_uf_array():
    return np.array([PUBLISHED_UF[c] for c in ("HFC", "HFA", "LFC", "LFA")])


def literal_cue_matrices(nu, nup, ga, gp):
    """The four cue Hamiltonians written out entry by entry."""
    H1 = [[1, nu, nu, 0, nup],
          [nu, -1, 0, ga, 0],
          [nu, 0, -1, ga, 0],
          [0, ga, ga, 1, gp],
          [nup, 0, 0, gp, -1]]
    H2 = [[-1, nu, 0, ga, 0],
          [nu, 1, nu, 0, nup],
          [0, nu, -1, ga, 0],
          [ga, 0, ga, 1, gp],
          [0, nup, 0, gp, -1]]
    H3 = [[-1, 0, nu, ga, 0],
          [0, -1, nu, ga, 0],
          [nu, nu, 1, 0, nup],
          [ga, ga, 0, 1, gp],
          [0, 0, nup, gp, -1]]
    H4 = [[-1, 0, 0, 0, nup],
          [0, -1, 0, 0, nup],
          [0, 0, -1, 0, nup],
          [0, 0, 0, -1, gp],
          [nup, nup, nup, gp, 1]]
    return [np.array(h, dtype=float) for h in (H1, H2, H3, H4)]


def oracle_probability(p: ModelParams, word_class, cue_index, probe_index):
    """Acceptance probability via literal matrices and scipy's Pade expm."""
    gp = p.gamma_prime[word_class]
    cues = literal_cue_matrices(p.nu, p.nu_prime, p.gamma, gp)
    k = p.kappa
    probes = literal_cue_matrices(k * p.nu, k * p.nu_prime, k * p.gamma, k * gp)[:3]
    probes.append(probes[0] + probes[1] + probes[2])
    a = math.sqrt((1 - p.g ** 2) / 6)
    psi0 = np.array([a, a, a, p.g / math.sqrt(2), 1 / math.sqrt(2)], dtype=complex)
    psi = expm(-1j * probes[probe_index] * p.t2) @ expm(-1j * cues[cue_index] * p.t1) @ psi0
    mask = [(1, 0, 0, 1, 0), (0, 1, 0, 1, 0), (0, 0, 1, 1, 0), (1, 1, 1, 1, 0)][probe_index]
    return float(np.sum(np.array(mask) * np.abs(psi) ** 2))


def random_symmetric(rng, n=None, low=-1.0, high=1.0):
    shape = (5, 5) if n is None else (n, 5, 5)
    R = rng.uniform(low, high, shape)
    return np.triu(R) + np.swapaxes(np.triu(R, 1), -1, -2)


def random_theta(rng, n):
    """n random parameter vectors: drivers and g in [-1, 1], t1 = t2 = pi/2."""
    theta = np.empty((n, 11))
    theta[:, :9] = rng.uniform(-1, 1, (n, 9))
    theta[:, 9:] = math.pi / 2
    return theta


@pytest.fixture(scope="session")
def table3():
    return bundled_params()


@pytest.fixture(scope="session")
def observed():
    return bundled_observations()


@pytest.fixture
def rng():
    return np.random.default_rng(20180705)


# -- acceptance report ----------------------------------------------------------

_ACCEPTANCE_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_LINES] = []


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion.

    Call ``criterion(number, ok, detail)``; a test that errors out before
    recording is reported as FAIL.
    """
    lines = request.config.stash[_ACCEPTANCE_LINES]
    recorded = []

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        recorded.append(line)
        lines.append(line)
        print(line)
        return ok

    yield record
    if not recorded:
        lines.append(f"criterion {request.node.name}: FAIL  (error before a result was recorded)")


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
