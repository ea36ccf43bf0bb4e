import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile("ci")

# scripts/ holds the fixture generators that tests replay against
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "scripts"))


def simulate_arma(c, phi, theta, innovations, burn=0):
    """Forward simulation of x_t = c + sum phi_i x_{t-i} + sum theta_j e_{t-j} + e_t.

    Plain loop with zero pre-sample values; independent of the package code.
    """
    e = np.asarray(innovations, dtype=float)
    x = np.zeros(e.size)
    for t in range(e.size):
        v = c + e[t]
        for i, ph in enumerate(phi, start=1):
            if t - i >= 0:
                v += ph * x[t - i]
        for j, th in enumerate(theta, start=1):
            if t - j >= 0:
                v += th * e[t - j]
        x[t] = v
    return x[burn:]


@pytest.fixture
def fixtures_dir():
    return Path(__file__).parent / "fixtures"
