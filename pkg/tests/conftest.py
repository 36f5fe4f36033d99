import os

import numpy as np
import pytest

from scvx_nlmesh import bundled_config, load_config
from scvx_nlmesh.dynamics import CR3BP, MEE, Derivatives

MU_EM = 1.21506683e-2


class LTI:
    """x' = s (A0 x + c0) + B0 T, a linear test system with the model interface."""

    name = "lti"

    def __init__(self, a0, b0, c0):
        self.a0, self.b0, self.c0 = a0, b0, c0

    def singular_mask(self, x):
        return np.zeros(np.atleast_2d(x).shape[0], dtype=bool)

    def derivatives(self, x, thrust, s, order=1):
        n = x.shape[0]
        drift = x @ self.a0.T + self.c0
        f = s[:, None] * drift + thrust @ self.b0.T
        a = s[:, None, None] * self.a0 if order >= 1 else None
        h = np.zeros((n, 6, 6, 6)) if order >= 2 else None
        return Derivatives(f, a, np.broadcast_to(self.b0, (n, 6, 3)), drift, h)


def random_lti(rng):
    return LTI(rng.normal(0, 0.6, (6, 6)), rng.normal(0, 1.0, (6, 3)), rng.normal(0, 0.3, 6))


def random_cr3bp_states(rng, n):
    """States well away from both primaries."""
    out = []
    while len(out) < n:
        r = rng.uniform([-1.4, -1.2, -0.4], [1.4, 1.2, 0.4])
        d1 = np.linalg.norm(r - [-MU_EM, 0, 0])
        d2 = np.linalg.norm(r - [1 - MU_EM, 0, 0])
        if d1 > 0.15 and d2 > 0.05:
            out.append(np.concatenate([r, rng.uniform(-0.8, 0.8, 3)]))
    return np.array(out)


def random_mee_states(rng, n):
    p = rng.uniform(0.5, 3.0, n)
    ecc = rng.uniform(0.0, 0.6, n)
    om = rng.uniform(0, 2 * np.pi, n)
    hk = rng.uniform(-0.4, 0.4, (n, 2))
    L = rng.uniform(-np.pi, 3 * np.pi, n)
    return np.column_stack([p, ecc * np.cos(om), ecc * np.sin(om), hk, L])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def cr3bp():
    return CR3BP(MU_EM)


@pytest.fixture(scope="session")
def mee():
    return MEE(1.0)


@pytest.fixture(scope="session")
def halo_config():
    return load_config(bundled_config("cr3bp_halo"))


@pytest.fixture(scope="session")
def halo_problem(halo_config):
    return halo_config.problem()


def extended_enabled():
    return os.environ.get("SCVX_EXTENDED", "") not in ("", "0")


# acceptance lines, echoed again in the terminal summary
ACCEPTANCE_LINES = []


def _criterion_key(line):
    tag = line.split()[1]
    digits = "".join(ch for ch in tag if ch.isdigit())
    return int(digits or 0), line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=_criterion_key):
            terminalreporter.write_line(line)
