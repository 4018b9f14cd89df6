"""Limit problem: Robin condition (k.n) d du/dn + u = 0 on the insulated part.

Minimizes 1/2|grad v|^2 + 1/2 |((k.n)d)^{-1/2} v|^2_{GI} - (f,v) - <g,v>
subject to v = u_D on the Dirichlet part.
"""
from __future__ import annotations

import numpy as np

from .errors import MeshMismatch, NonpositiveWeight
from .fem import (
    apply_dirichlet,
    assemble_boundary_mass,
    assemble_load,
    assemble_neumann,
    assemble_stiffness,
    dirichlet_nodes,
    eval_E_limit,
    lumped_boundary_diagonal,
    solve_spd,
)
from .geometry import FacetLabel
from .meshing import BULK, insulated_chain


def robin_operator(mesh, field, dist, quadrature="consistent"):
    """Stiffness plus the Robin interface term with weight 1/((k.n) d).

    The consistent variant integrates the weight with 3-point Gauss per edge;
    the lumped variant uses the nodal rule w_j/(kn_j d_j) and turns nodes
    with d_j = 0 into hard zero constraints (the limit of the penalization).
    Returns (matrix, extra zero-constrained nodes).
    """
    domain = mesh.domain
    K = assemble_stiffness(mesh, 1.0)
    if quadrature == "consistent":
        def w(fid, lam):
            kn = field.k_dot_n(fid, lam)
            ci = domain.component_of_facet(fid)
            comp = domain.insulated_components[ci]
            coords = comp.facet_offsets[fid] + lam * domain.lengths[fid]
            d = dist.value_at(ci, coords)
            if np.any(kn * d <= 0):
                raise NonpositiveWeight(
                    f"(k.n) d <= 0 on insulated facet {fid}")
            return 1.0 / (kn * d)

        edges = mesh.boundary_edges_of(FacetLabel.INSULATED)
        M = assemble_boundary_mass(mesh, edges, w)
        return K + M, []
    if quadrature == "lumped":
        chain = insulated_chain(mesh, field)
        dvals = np.concatenate([
            dist.value_at(ci, cc.coords)
            for ci, cc in enumerate(chain.components)])
        if np.any(dvals < 0):
            raise NonpositiveWeight("negative thickness on the insulated part")
        nz = dvals > 0
        weight = np.zeros_like(dvals)
        weight[nz] = 1.0 / (chain.kn[nz] * dvals[nz])
        M = lumped_boundary_diagonal(mesh, _subchain(chain, nz), weight[nz])
        zero_nodes = [int(n) for n in chain.nodes[~nz]]
        return K + M, zero_nodes
    raise ValueError("quadrature must be 'consistent' or 'lumped'")


class _SubChain:
    def __init__(self, nodes, weights):
        self.nodes = nodes
        self.weights = weights


def _subchain(chain, mask):
    return _SubChain(chain.nodes[mask], chain.weights[mask])


def solve_limit(mesh, field, dist, data, tol=1e-10, max_iter=None,
                robin_quadrature="consistent"):
    """Solve the limit problem on a bulk mesh; returns (u, EnergyReport)."""
    if np.any(mesh.region != BULK):
        raise MeshMismatch("solve_limit expects a bulk mesh without a layer")
    data.validate(mesh.domain)
    if robin_quadrature == "consistent" and _min_thickness(mesh, dist) <= 0:
        raise NonpositiveWeight("thickness must be positive on the insulated part")
    A, zero_nodes = robin_operator(mesh, field, dist, robin_quadrature)
    b = assemble_load(mesh, data.f) + assemble_neumann(mesh, data)
    fixed = dirichlet_nodes(mesh, data)
    for nd in zero_nodes:
        fixed.setdefault(nd, 0.0)
    if fixed:
        sys = apply_dirichlet(A, b, fixed)
        x = solve_spd(sys.matrix, sys.rhs, tol=tol, max_iter=max_iter)
        u = sys.expand(x)
    else:
        u = solve_spd(A, b, tol=tol, max_iter=max_iter)
    report = eval_E_limit(mesh, u, field, dist, data,
                          interface=("lumped" if robin_quadrature == "lumped"
                                     else "consistent"))
    return u, report


def _min_thickness(mesh, dist):
    lo = np.inf
    for ci, cc in enumerate(insulated_chain(mesh).components):
        lo = min(lo, float(np.min(dist.value_at(ci, cc.coords))))
    return lo
