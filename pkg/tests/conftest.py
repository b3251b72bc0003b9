import numpy as np
import pytest

from ballorbits import catalog as cat
from ballorbits import geometry as geo
from ballorbits import orbits as orb


@pytest.fixture(scope="session")
def e1():
    return geo.basis_boundary_point(1)


@pytest.fixture(scope="session")
def e1_q2():
    return geo.basis_boundary_point(2)


@pytest.fixture(scope="session")
def disc_auto(e1):
    """Disc automorphism with repelling point +1, dilation 3."""
    return cat.hyperbolic_selfmap(e1, 3.0)


@pytest.fixture(scope="session")
def blaschke():
    """b(z) = z (z - 1/3)/(1 - z/3): fixes 0 and 1, dilation 3 at 1."""
    return cat.blaschke_product([0.0, 1.0 / 3.0])


@pytest.fixture(scope="session")
def cleared_blaschke(blaschke, e1):
    cleared, conj = cat.ensure_pole_clearance(blaschke, e1)
    return cleared, conj


@pytest.fixture(scope="session")
def blaschke_orbit(cleared_blaschke, e1):
    cleared, _ = cleared_blaschke
    return orb.construct_backward_orbit(cleared, e1, 3.0)


@pytest.fixture(scope="session")
def auto_orbit(disc_auto, e1):
    return orb.construct_backward_orbit(disc_auto, e1, 3.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(2024)


def random_interior(rng, q, scale=0.85):
    v = rng.normal(size=q) + 1j * rng.normal(size=q)
    v *= rng.uniform(0.05, scale) / np.linalg.norm(v)
    return geo.ball_point(v)
