import numpy as np
import pytest

from foliation_energy import build_scenario, disintegrate


@pytest.fixture(scope="session")
def small_scenarios():
    """One reduced-resolution instance of every built-in scenario kind."""
    return {
        "circle": build_scenario("circle", fibers=12, points=48),
        "ellipse": build_scenario("ellipse", lam=1.5, fibers=12, points=48),
        "ellipse_dirac": build_scenario("ellipse_dirac", lam=1.5, fibers=12, points=48),
        "square": build_scenario("square", grid=12),
        "graph": build_scenario("graph", count=24),
    }


@pytest.fixture(scope="session")
def small_disintegrations(small_scenarios):
    return {kind: disintegrate(s) for kind, s in small_scenarios.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(20240814)
