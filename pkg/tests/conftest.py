import numpy as np
import pytest

from ellipsoidal_sme.geometry import Ellipsoid


def random_spsd(rng, n, rank=None, cond=1e3):
    """Random SPSD matrix of the given rank with eigenvalues in ``[1/cond, 1]``."""
    rank = n if rank is None else rank
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    w = np.zeros(n)
    w[:rank] = np.exp(rng.uniform(-np.log(cond), 0.0, size=rank))
    M = (Q * w) @ Q.T
    return 0.5 * (M + M.T)


def random_ellipsoid(rng, n, rank=None, cond=1e2):
    rank = n if rank is None else rank
    P = random_spsd(rng, n, rank, cond)
    return Ellipsoid(rng.standard_normal(n), P, float(rng.uniform(0.5, 2.0)), rank)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
