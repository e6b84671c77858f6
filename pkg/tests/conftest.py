import numpy as np
import pytest

from avbeam.fields import make_preset
from avbeam.distribution import rapidity_cap, delta_ensemble


@pytest.fixture(scope="session")
def dipole():
    return make_preset("normal-dipole", b0=1.0)


@pytest.fixture(scope="session")
def bench_ensemble():
    """Transverse rapidity cap boosted to E = 10 (the dipole benchmark)."""
    return rapidity_cap(2000, r0=np.arccosh(10.0), r_cap=0.005, seed=11,
                        axis=1, aspect=(0.0, 1.0, 1.0))


@pytest.fixture(scope="session")
def small_cap():
    """Mildly boosted isotropic cap for cheap structural checks."""
    return rapidity_cap(400, r0=0.5, r_cap=0.05, seed=3)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260823)


def random_hyperboloid(rng, n=1, boost=1.0):
    v = rng.normal(scale=boost, size=(n, 3))
    y0 = np.sqrt(1.0 + np.sum(v * v, axis=1))
    out = np.column_stack([y0, v])
    return out[0] if n == 1 else out


@pytest.fixture(scope="session")
def delta_at_rest():
    return delta_ensemble()
