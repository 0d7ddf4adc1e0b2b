import numpy as np
import pytest

from hjmetric import HamiltonianSpec, PotentialSpec, TorusEnvironment
from hjmetric.hamiltonian import TrigSum


def make_constant_spec(v: float, n_phys: int = 2, seed: int = 0) -> HamiltonianSpec:
    env = TorusEnvironment.still(n_phys=n_phys, seed=seed)
    return HamiltonianSpec(env=env, form="eikonal", potential=PotentialSpec("constant", v))


def make_sine_spec(seed: int = 0) -> HamiltonianSpec:
    """1D periodic realization with V(x) = |sin(pi x)| at omega = 0."""
    env = TorusEnvironment.line(seed=seed)
    return HamiltonianSpec(env=env, form="eikonal", potential=PotentialSpec("single_cosine_1d", 1.0))


def make_quasiperiodic_spec(seed: int = 0, lam=None) -> HamiltonianSpec:
    from hjmetric import GOLDEN_RATIO

    env = TorusEnvironment.quasiperiodic_2d(lam=GOLDEN_RATIO if lam is None else lam, seed=seed)
    return HamiltonianSpec(env=env, form="eikonal", potential=PotentialSpec("product_quasiperiodic"))


def make_drift_spec(b=(0.4, 0.0), v: float = 1.0, seed: int = 0) -> HamiltonianSpec:
    env = TorusEnvironment.still(n_phys=2, seed=seed)
    drift = tuple(TrigSum(c0=float(bi)) for bi in b)
    return HamiltonianSpec(
        env=env, form="eikonal_drift", potential=PotentialSpec("constant", v), drift=drift
    )


@pytest.fixture
def constant_spec():
    return make_constant_spec(1.0)


@pytest.fixture
def free_spec():
    return make_constant_spec(0.0)


@pytest.fixture
def sine_spec():
    return make_sine_spec()


@pytest.fixture
def quasi_spec():
    return make_quasiperiodic_spec()


@pytest.fixture
def omega0():
    def _make(spec):
        return spec.env.sample_omega(0)

    return _make


def zero_omega(spec):
    from hjmetric import OmegaPoint

    return OmegaPoint(np.zeros(spec.env.dim))
