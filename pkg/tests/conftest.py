import numpy as np
import pytest

from kdslab.spacetime import (
    BlackHoleParams,
    find_horizons,
    resolve_extension,
    transition_functions,
)


@pytest.fixture(scope="session")
def sds_params():
    """Schwarzschild-de Sitter baseline (M0=1, Lambda=0.06, a=0)."""
    return resolve_extension(BlackHoleParams(m0=1.0, lam=0.06, a=0.0))


@pytest.fixture(scope="session")
def kerr_params():
    """Slowly rotating configuration used across tests."""
    return resolve_extension(BlackHoleParams(m0=1.0, lam=0.06, a=0.05))


@pytest.fixture(scope="session")
def sds_horizons(sds_params):
    return find_horizons(sds_params)


@pytest.fixture(scope="session")
def sds_transition(sds_params):
    return transition_functions(sds_params)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)


def bisect_root(fn, lo, hi, tol=1e-12, max_iter=200):
    """Plain bisection oracle, independent of the package's root finding."""
    f_lo, f_hi = fn(lo), fn(hi)
    assert f_lo * f_hi < 0, "oracle bracket does not straddle a root"
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = fn(mid)
        if f_lo * f_mid <= 0:
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)
