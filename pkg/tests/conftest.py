import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci",
    max_examples=60,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def ou_setup():
    from sdekoopman import get_model
    return get_model("ou")


@pytest.fixture(scope="session")
def quadratic_setup():
    from sdekoopman import get_model
    return get_model("quadratic", sigma=0.3)


@pytest.fixture(scope="session")
def linear2d_setup():
    from sdekoopman import get_model
    return get_model("linear2d")


@pytest.fixture(scope="session")
def langevin_setup():
    from sdekoopman import get_model
    return get_model("langevin")


@pytest.fixture(scope="session")
def quadratic_solution(quadratic_setup):
    """Solved collocation system for the quadratic model at sigma = 0.3."""
    from sdekoopman import GaussianKernel, make_grid, solve_system
    s = quadratic_setup
    grid = make_grid(s.domain, s.grid_spec)
    kern = GaussianKernel(s.lengthscale)
    sol, asys, cond = solve_system(s.system, s.decomp, s.eigenpair, kern, grid, s.gamma)
    return sol, asys, cond


def rng(seed=0):
    return np.random.default_rng(seed)
