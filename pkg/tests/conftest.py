import numpy as np
import pytest

from sensing.design import Design, DyadicPoint
from sensing.wavelet_basis import daubechies, haar


def _step(h, size):
    """Periodized one-level analysis matrices (low, high) for a signal of length `size`."""
    L = len(h) // 2
    g = np.array([(-1) ** n * h[2 * L - 1 - n] for n in range(2 * L)])
    low = np.zeros((size // 2, size))
    high = np.zeros((size // 2, size))
    for k in range(size // 2):
        for n in range(2 * L):
            m = (2 * k + n - (L - 1)) % size
            low[k, m] += h[n]
            high[k, m] += g[n]
    return low, high


def analysis_matrix(spec, level):
    """
    Rows map level-`level` scaling coefficients to (alpha_{j0}, beta_{j0}, ...,
    beta_{level-1}) in pyramid order, built from explicit filter matrices.
    """
    h = np.asarray(spec.low_pass_filter, dtype=float)
    current = np.eye(2 ** level)
    details = []
    for j in range(level, spec.j0, -1):
        low, high = _step(h, 2 ** j)
        details.append(high @ current)
        current = low @ current
    return np.vstack([current] + details[::-1])


@pytest.fixture
def dense_analysis():
    return analysis_matrix


@pytest.fixture
def haar_spec():
    return haar(0)


@pytest.fixture
def db2_spec():
    return daubechies(2, 2)


@pytest.fixture
def db4_spec():
    return daubechies(4, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def make_design():
    """Design from (numerator, level) pairs plus whole grids given as (level, lo, hi), lo <= x < hi."""
    def build(points=(), grids=()):
        design = Design(DyadicPoint.of(m, i) for m, i in points)
        for level, lo, hi in grids:
            for m in range(2 ** level):
                if lo <= m / 2 ** level < hi:
                    design.add(DyadicPoint.of(m, level))
        return design
    return build
