import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from insulopt.errors import NoConvergence, NonpositiveWeight, UnknownLabel
from insulopt.fem import (
    ProblemData,
    apply_dirichlet,
    assemble_boundary_mass,
    assemble_load,
    assemble_neumann,
    assemble_stiffness,
    boundary_l1,
    dirichlet_nodes,
    solve_spd,
)
from insulopt.geometry import (
    FacetLabel,
    InsulationDistribution,
    PolygonalDomain,
    build_transversal_field,
)
from insulopt.meshing import TriMesh, insulated_chain, triangulate_bulk
from insulopt.robin_solver import solve_limit

from conftest import pseudo1d_domain, pseudo1d_setup


def unit_right_triangle_mesh():
    domain = PolygonalDomain([(0, 0), (1, 0), (0, 1)], ["insulated"] * 3)
    return TriMesh(
        domain=domain,
        nodes=np.array([(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]),
        tris=np.array([[0, 1, 2]]),
        region=np.zeros(1, dtype=np.uint8),
        boundary_edges=np.array([(0, 1), (1, 2), (2, 0)]),
        boundary_facet=np.array([0, 1, 2]),
        node_facet_param={0: {0: 0.0, 2: 1.0}, 1: {0: 1.0, 1: 0.0},
                          2: {1: 1.0, 2: 0.0}},
        n_bulk_nodes=3,
        n_bulk_tris=1,
    )


def test_element_stiffness_unit_right_triangle():
    # hand integration of P1 gradients: (1/2) [[2,-1,-1],[-1,1,0],[-1,0,1]]
    mesh = unit_right_triangle_mesh()
    K = assemble_stiffness(mesh, 1.0).toarray()
    expected = 0.5 * np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]])
    assert np.allclose(K, expected, atol=1e-15)


def test_stiffness_scales_with_coefficient():
    mesh = unit_right_triangle_mesh()
    K1 = assemble_stiffness(mesh, 1.0).toarray()
    K2 = assemble_stiffness(mesh, 2.0).toarray()
    assert np.allclose(K2, 2 * K1, atol=1e-15)


def test_stiffness_kernel_contains_constants(lshape_all_insulated):
    mesh = triangulate_bulk(lshape_all_insulated, 0.2)
    K = assemble_stiffness(mesh, 1.0)
    c = np.full(len(mesh.nodes), 3.7)
    assert np.abs(K @ c).max() <= 1e-12


def test_boundary_mass_single_edge():
    domain = pseudo1d_domain()
    mesh = triangulate_bulk(domain, 2.0)  # no refinement: edges = facets
    edges = mesh.boundary_edges_of(FacetLabel.INSULATED)
    M = assemble_boundary_mass(mesh, edges, lambda fid, lam: np.ones_like(lam))
    a, b, _ = edges[0]
    sub = M[np.ix_([a, b], [a, b])].toarray()
    assert np.allclose(sub, np.array([[2, 1], [1, 2]]) / 6.0, atol=1e-15)
    lumped = assemble_boundary_mass(
        mesh, edges, lambda fid, lam: np.ones_like(lam), lumped=True)
    assert np.allclose(lumped.diagonal()[[a, b]], [0.5, 0.5], atol=1e-15)


def test_boundary_mass_rejects_nonpositive_weight():
    domain = pseudo1d_domain()
    mesh = triangulate_bulk(domain, 2.0)
    edges = mesh.boundary_edges_of(FacetLabel.INSULATED)
    with pytest.raises(NonpositiveWeight):
        assemble_boundary_mass(mesh, edges, lambda fid, lam: np.zeros_like(lam))


def test_load_sums_to_source_integral(square_all_insulated):
    mesh = triangulate_bulk(square_all_insulated, 0.3)
    load = assemble_load(mesh, 1.0)
    assert load.sum() == pytest.approx(1.0, rel=1e-14)


def test_neumann_sums_to_flux_integral():
    domain, field, mesh, _ = pseudo1d_setup(h=0.25)
    data = ProblemData(g=1.0)
    vec = assemble_neumann(mesh, data)
    assert vec.sum() == pytest.approx(2.0, rel=1e-14)  # two unit facets


def test_neumann_unknown_facet_label():
    domain, field, mesh, _ = pseudo1d_setup(h=0.5)
    data = ProblemData(g={1: 1.0})  # facet 1 is insulated, not Neumann
    with pytest.raises(UnknownLabel):
        data.validate(domain)


def test_dirichlet_elimination_zero_value_keeps_rhs():
    mesh = unit_right_triangle_mesh()
    K = assemble_stiffness(mesh, 1.0)
    b = np.array([1.0, 2.0, 3.0])
    sys = apply_dirichlet(K, b, {0: 0.0})
    assert np.allclose(sys.rhs, b[sys.free], atol=0)
    assert list(sys.free) == [1, 2]


def test_solve_identity():
    A = sp.identity(5, format="csr")
    b = np.array([1.0, -2.0, 3.0, 0.5, 0.0])
    assert np.allclose(solve_spd(A, b), b, atol=1e-12)


def test_solve_tridiagonal_chain():
    # 1D Laplacian, 3 interior nodes, ends fixed at zero, unit middle load:
    # direct elimination gives u = (0.5, 1.0, 0.5)
    A = sp.csr_matrix(np.array([[2.0, -1.0, 0.0],
                                [-1.0, 2.0, -1.0],
                                [0.0, -1.0, 2.0]]))
    b = np.array([0.0, 1.0, 0.0])
    assert np.allclose(solve_spd(A, b, tol=1e-14), [0.5, 1.0, 0.5], atol=1e-12)


def test_solve_indefinite_raises():
    A = sp.csr_matrix(np.diag([1.0, -1.0]))
    with pytest.raises(NoConvergence):
        solve_spd(A, np.array([1.0, 1.0]))


def test_boundary_l1_total_length():
    domain, field, mesh, _ = pseudo1d_setup(h=0.25)
    chain = insulated_chain(mesh, field)
    u = np.ones(len(mesh.nodes))
    assert boundary_l1(chain, u) == pytest.approx(1.0, rel=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.floats(-7, 7).filter(lambda a: abs(a) > 1e-6))
def test_boundary_l1_absolutely_homogeneous(alpha):
    domain, field, mesh, _ = pseudo1d_setup(h=0.25)
    chain = insulated_chain(mesh, field)
    rng = np.random.default_rng(42)
    u = rng.standard_normal(len(mesh.nodes))
    assert boundary_l1(chain, alpha * u) == pytest.approx(
        abs(alpha) * boundary_l1(chain, u), rel=1e-12)


def test_galerkin_residual_of_robin_solve():
    domain, field, mesh, data = pseudo1d_setup(h=1 / 16)
    dist = InsulationDistribution.constant(field, 1.0)
    from insulopt.robin_solver import robin_operator

    A, _ = robin_operator(mesh, field, dist)
    b = assemble_load(mesh, data.f) + assemble_neumann(mesh, data)
    sys = apply_dirichlet(A, b, dirichlet_nodes(mesh, data))
    x = solve_spd(sys.matrix, sys.rhs, tol=1e-11)
    res = np.linalg.norm(sys.matrix @ x - sys.rhs)
    assert res <= 1e-11 * np.linalg.norm(sys.rhs)


def test_energy_monotone_under_refinement():
    # nested P1 spaces: the discrete minimum energy decreases with h
    domain = pseudo1d_domain()
    field = build_transversal_field(domain, "facet_normal")
    data = ProblemData(f=1.0, g=0.0, u_D=0.0)
    energies = []
    for h in (0.5, 0.25, 0.125, 0.0625):
        mesh = triangulate_bulk(domain, h)
        dist = InsulationDistribution.constant(field, 1.0)
        _, rep = solve_limit(mesh, field, dist, data, tol=1e-12)
        energies.append(rep.total)
    assert all(a > b for a, b in zip(energies, energies[1:]))


def test_robin_operator_symmetric_spd():
    domain, field, mesh, data = pseudo1d_setup(h=1 / 8)
    from insulopt.geometry import InsulationDistribution
    from insulopt.robin_solver import robin_operator

    dist = InsulationDistribution.constant(field, 1.0)
    A, _ = robin_operator(mesh, field, dist)
    asym = abs(A - A.T).max()
    assert asym <= 1e-12 * abs(A).max()
