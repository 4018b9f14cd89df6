import pytest

from insulopt.geometry import (
    InsulationDistribution,
    PolygonalDomain,
    build_transversal_field,
)
from insulopt.fem import ProblemData
from insulopt.meshing import triangulate_bulk

SQUARE = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
LSHAPE = [(0.0, 0.0), (1.0, 0.0), (1.0, 0.5), (0.5, 0.5), (0.5, 1.0), (0.0, 1.0)]
# two consecutive reflex corners make the bisector field rotate backwards
# along the notch floor, so the layer map inverts at finite thickness
NOTCHED = [(0.0, 0.0), (6.0, 0.0), (6.0, 4.0), (4.0, 1.2), (2.0, 1.2),
           (0.0, 4.0)]


@pytest.fixture
def square_all_insulated():
    return PolygonalDomain(SQUARE, ["insulated"] * 4)


@pytest.fixture
def square_bisector(square_all_insulated):
    return build_transversal_field(square_all_insulated, "bisector")


@pytest.fixture
def lshape_all_insulated():
    return PolygonalDomain(LSHAPE, ["insulated"] * 6)


def pseudo1d_domain():
    """Left Dirichlet, top/bottom Neumann, right insulated."""
    return PolygonalDomain(
        SQUARE, ["neumann", "insulated", "neumann", "dirichlet"])


def pseudo1d_setup(h=1 / 32):
    domain = pseudo1d_domain()
    field = build_transversal_field(domain, "facet_normal")
    mesh = triangulate_bulk(domain, h)
    data = ProblemData(f=0.0, g=0.0, u_D=1.0)
    return domain, field, mesh, data


def constant_dist(field, value):
    return InsulationDistribution.constant(field, value)
