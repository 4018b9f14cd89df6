"""P1 finite elements: assembly, boundary quadrature, and energies.

All solvers share this layer.  Boundary integrals on the insulated part come
in two flavors deliberately: a consistent 3-point Gauss edge quadrature for
the Robin interface term (keeps O(h^2) accuracy), and a lumped nodal rule
w_j = half-sum of adjacent edge lengths for the L1 trace norm, which makes
the non-smooth term separable and the thickness-elimination algebra exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.sparse as sp

from .errors import (
    MeshMismatch,
    NoConvergence,
    NonpositiveWeight,
    UnknownLabel,
)
from .geometry import FacetLabel
from .meshing import BULK, LAYER, LAYER_TOP

# 3-point Gauss on [0,1] (degree 5), used for weighted edge mass matrices
_EDGE_GX = np.array([0.5 - np.sqrt(15) / 10, 0.5, 0.5 + np.sqrt(15) / 10])
_EDGE_GW = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])


@dataclass
class ProblemData:
    """Heat source f (constant or per-bulk-triangle), Neumann flux g and
    Dirichlet temperature u_D as per-facet constants (scalar = all facets
    of that class)."""

    f: float | np.ndarray = 0.0
    g: float | dict = 0.0
    u_D: float | dict = 0.0

    def facet_value(self, spec, fid):
        if isinstance(spec, dict):
            if fid not in spec:
                raise UnknownLabel(f"no value configured for facet {fid}")
            return float(spec[fid])
        return float(spec)

    def validate(self, domain):
        for spec, label in ((self.g, FacetLabel.NEUMANN),
                            (self.u_D, FacetLabel.DIRICHLET)):
            if isinstance(spec, dict):
                valid = set(domain.facet_ids(label))
                for fid in spec:
                    if fid not in valid:
                        raise UnknownLabel(
                            f"facet {fid} is not labeled {label.value}")


@dataclass
class EnergyReport:
    terms: dict
    total: float
    diagnostics: dict = dc_field(default_factory=dict)


@dataclass
class ReducedSystem:
    """Symmetric elimination of Dirichlet constraints."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    free: np.ndarray
    fixed: np.ndarray
    fixed_values: np.ndarray
    n: int

    def expand(self, x_free):
        u = np.zeros(self.n)
        u[self.free] = x_free
        u[self.fixed] = self.fixed_values
        return u


def _tri_geometry(mesh):
    p = mesh.nodes[mesh.tris]
    x, y = p[..., 0], p[..., 1]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area2 = x[:, 0] * b[:, 0] + x[:, 1] * b[:, 1] + x[:, 2] * b[:, 2]
    return b, c, 0.5 * area2


def assemble_stiffness(mesh, coeff=1.0):
    """P1 stiffness with a piecewise-constant per-region coefficient.

    ``coeff`` is a scalar or a {region: value} mapping over {BULK, LAYER}.
    """
    if isinstance(coeff, dict):
        cvals = np.array([coeff.get(int(r), 0.0) for r in mesh.region])
    else:
        cvals = np.full(len(mesh.tris), float(coeff))
    if np.any(cvals < 0):
        raise ValueError("stiffness coefficient must be non-negative")
    b, c, area = _tri_geometry(mesh)
    n = len(mesh.nodes)
    scale = cvals / (4.0 * area)
    rows, cols, vals = [], [], []
    for i in range(3):
        for j in range(3):
            rows.append(mesh.tris[:, i])
            cols.append(mesh.tris[:, j])
            vals.append(scale * (b[:, i] * b[:, j] + c[:, i] * c[:, j]))
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n))
    return A.tocsr()


def assemble_mass(mesh, region=None):
    """Consistent P1 mass matrix, optionally restricted to one region."""
    b, c, area = _tri_geometry(mesh)
    mask = np.ones(len(mesh.tris), bool) if region is None else (mesh.region == region)
    n = len(mesh.nodes)
    local = np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]) / 12.0
    rows, cols, vals = [], [], []
    tris = mesh.tris[mask]
    ar = area[mask]
    for i in range(3):
        for j in range(3):
            rows.append(tris[:, i])
            cols.append(tris[:, j])
            vals.append(ar * local[i, j])
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n))
    return A.tocsr()


def assemble_load(mesh, f):
    """Load vector of the bulk heat source (exact for per-triangle f)."""
    _, _, area = _tri_geometry(mesh)
    load = np.zeros(len(mesh.nodes))
    bulk = np.where(mesh.region == BULK)[0]
    if isinstance(f, np.ndarray):
        if len(f) not in (len(mesh.tris), mesh.n_bulk_tris):
            raise MeshMismatch("per-triangle source length does not match mesh")
        fvals = f[bulk] if len(f) == len(mesh.tris) else f
    else:
        fvals = np.full(len(bulk), float(f))
    contrib = fvals * area[bulk] / 3.0
    for i in range(3):
        np.add.at(load, mesh.tris[bulk, i], contrib)
    return load


def assemble_neumann(mesh, data):
    """Boundary flux vector over the Neumann facets."""
    vec = np.zeros(len(mesh.nodes))
    for a, b, fid in mesh.boundary_edges_of(FacetLabel.NEUMANN):
        g = data.facet_value(data.g, fid)
        L = float(np.hypot(*(mesh.nodes[b] - mesh.nodes[a])))
        vec[a] += 0.5 * g * L
        vec[b] += 0.5 * g * L
    return vec


def _edge_weight_values(mesh, edges, weight):
    """Evaluate a boundary weight at the Gauss points of each edge."""
    out = []
    for a, b, fid in edges:
        la = mesh.node_facet_param[a][fid]
        lb = mesh.node_facet_param[b][fid]
        lam = la + (lb - la) * _EDGE_GX
        out.append(weight(fid, lam))
    return out


def assemble_boundary_mass(mesh, edges, weight, lumped=False):
    """Weighted edge mass matrix sum_e int_e w phi_i phi_j ds.

    ``edges`` is a list of (node_a, node_b, facet_id); ``weight`` maps
    (facet_id, local parameters) to positive values.  The lumped variant is
    the row-sum diagonal of the consistent matrix.
    """
    n = len(mesh.nodes)
    rows, cols, vals = [], [], []
    wq_all = _edge_weight_values(mesh, edges, weight)
    for (a, b, fid), wq in zip(edges, wq_all):
        if np.any(wq <= 0):
            raise NonpositiveWeight(f"boundary weight <= 0 on facet {fid}")
        L = float(np.hypot(*(mesh.nodes[b] - mesh.nodes[a])))
        phia = 1.0 - _EDGE_GX
        phib = _EDGE_GX
        maa = L * float(np.sum(_EDGE_GW * wq * phia * phia))
        mab = L * float(np.sum(_EDGE_GW * wq * phia * phib))
        mbb = L * float(np.sum(_EDGE_GW * wq * phib * phib))
        rows += [a, a, b, b]
        cols += [a, b, a, b]
        vals += [maa, mab, mab, mbb]
    M = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    if lumped:
        diag = np.asarray(M.sum(axis=1)).ravel()
        return sp.diags(diag).tocsr()
    return M


def lumped_boundary_diagonal(mesh, chain, nodal_weight):
    """Diagonal boundary operator diag_j = w_j * nodal_weight_j on the
    insulated chain (the nodal rule paired with the L1 trace norm)."""
    n = len(mesh.nodes)
    diag = np.zeros(n)
    diag[chain.nodes] = chain.weights * nodal_weight
    return sp.diags(diag).tocsr()


def apply_dirichlet(A, b, fixed_values):
    """Symmetric elimination; ``fixed_values`` maps node -> value."""
    n = A.shape[0]
    fixed = np.array(sorted(fixed_values), dtype=int)
    vals = np.array([fixed_values[i] for i in fixed])
    mask = np.ones(n, bool)
    mask[fixed] = False
    free = np.where(mask)[0]
    A_ff = A[free][:, free].tocsr()
    b_f = b[free] - A[free][:, fixed] @ vals
    return ReducedSystem(matrix=A_ff, rhs=b_f, free=free, fixed=fixed,
                         fixed_values=vals, n=n)


def solve_spd(A, b, tol=1e-10, max_iter=None):
    """Jacobi-preconditioned conjugate gradients for SPD systems."""
    n = len(b)
    if n == 0:
        return np.zeros(0)
    max_iter = max_iter or 10 * n
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n)
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise NoConvergence("matrix is not positive definite (diagonal)")
    x = np.zeros(n)
    r = b.copy()
    z = r / diag
    p = z.copy()
    rz = float(r @ z)
    for _ in range(max_iter):
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0:
            raise NoConvergence("matrix is not positive definite (pAp <= 0)")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= tol * bnorm:
            return x
        z = r / diag
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NoConvergence(
        f"CG did not reach {tol:g} relative residual in {max_iter} iterations")


# ---------------------------------------------------------------------------
# Boundary L1 trace norm and energy evaluators
# ---------------------------------------------------------------------------

def boundary_l1(chain, u):
    """Lumped L1 trace norm sum_j w_j |u_j| over the insulated chain."""
    return float(np.sum(chain.weights * np.abs(u[chain.nodes])))


def _source_term(mesh, u, data):
    return float(assemble_load(mesh, data.f) @ u)


def _neumann_term(mesh, u, data):
    return float(assemble_neumann(mesh, data) @ u)


def _dirichlet_violation(mesh, u, data):
    worst = 0.0
    for a, b, fid in mesh.boundary_edges_of(FacetLabel.DIRICHLET):
        ud = data.facet_value(data.u_D, fid)
        worst = max(worst, abs(u[a] - ud), abs(u[b] - ud))
    return worst


def eval_E_limit(mesh, u, field, dist, data, interface="consistent"):
    """Energy of the vanished-layer limit problem.

    total = 1/2 |grad u|^2 + 1/2 int_GI u^2 / ((k.n) d) - (f,u) - <g,u>.
    ``interface`` selects the consistent Gauss rule or the lumped nodal rule
    for the interface term (the latter matches the reduced functional's
    algebra exactly).
    """
    from .meshing import insulated_chain

    K = assemble_stiffness(mesh, 1.0)
    grad = 0.5 * float(u @ (K @ u))
    domain = mesh.domain
    if interface == "consistent":
        def w(fid, lam):
            kn = field.k_dot_n(fid, lam)
            comp = domain.component_of_facet(fid)
            compobj = domain.insulated_components[comp]
            coords = compobj.facet_offsets[fid] + lam * domain.lengths[fid]
            d = dist.value_at(comp, coords)
            return 1.0 / (kn * d)

        edges = mesh.boundary_edges_of(FacetLabel.INSULATED)
        M = assemble_boundary_mass(mesh, edges, w)
        iface = 0.5 * float(u @ (M @ u))
    elif interface == "lumped":
        chain = insulated_chain(mesh, field)
        dvals = np.concatenate([
            dist.value_at(ci, cc.coords)
            for ci, cc in enumerate(chain.components)])
        uj = u[chain.nodes]
        nz = dvals > 0
        if np.any(uj[~nz] != 0):
            iface = np.inf  # zero thickness forces a zero trace
        else:
            iface = 0.5 * float(np.sum(
                chain.weights[nz] * uj[nz] ** 2 / (chain.kn[nz] * dvals[nz])))
    else:
        raise ValueError("interface must be 'consistent' or 'lumped'")
    source = _source_term(mesh, u, data)
    neum = _neumann_term(mesh, u, data)
    total = grad + iface - source - neum
    return EnergyReport(
        terms={"grad": grad, "interface": iface, "source": source,
               "neumann": neum},
        total=total,
        diagnostics={"dirichlet_violation": _dirichlet_violation(mesh, u, data)},
    )


def eval_E_eps(mesh, u, eps, data):
    """Energy of the thin-layer problem on a glued mesh."""
    if mesh.extrusion is None:
        raise MeshMismatch("eval_E_eps needs an extruded mesh")
    K_bulk = assemble_stiffness(mesh, {BULK: 1.0, LAYER: 0.0})
    K_layer = assemble_stiffness(mesh, {BULK: 0.0, LAYER: 1.0})
    grad_bulk = 0.5 * float(u @ (K_bulk @ u))
    grad_layer = 0.5 * eps * float(u @ (K_layer @ u))
    source = _source_term(mesh, u, data)
    neum = _neumann_term(mesh, u, data)
    total = grad_bulk + grad_layer - source - neum
    zero_violation = 0.0
    top = mesh.marker_edges(LAYER_TOP)
    if len(top):
        zero_violation = float(np.abs(u[np.unique(top)]).max())
    return EnergyReport(
        terms={"grad": grad_bulk, "grad_layer_scaled": grad_layer,
               "source": source, "neumann": neum},
        total=total,
        diagnostics={
            "dirichlet_violation": _dirichlet_violation(mesh, u, data),
            "zero_trace_violation": zero_violation,
        },
    )


def eval_I(mesh, u, m, data, chain=None):
    """Reduced objective 1/2 |grad u|^2 - (f,u) + (1/2m) |u|_{1,GI}^2 - <g,u>."""
    from .meshing import insulated_chain

    if chain is None:
        chain = insulated_chain(mesh)
    K = assemble_stiffness(mesh, 1.0)
    grad = 0.5 * float(u @ (K @ u))
    l1 = boundary_l1(chain, u)
    bdry = l1 * l1 / (2.0 * m)
    source = _source_term(mesh, u, data)
    neum = _neumann_term(mesh, u, data)
    total = grad + bdry - source - neum
    return EnergyReport(
        terms={"grad": grad, "boundary_l1_sq": bdry, "source": source,
               "neumann": neum},
        total=total,
        diagnostics={"boundary_l1": l1,
                     "dirichlet_violation": _dirichlet_violation(mesh, u, data)},
    )


def dirichlet_nodes(mesh, data):
    """Fixed node -> value map from the Dirichlet facets."""
    fixed = {}
    for a, b, fid in mesh.boundary_edges_of(FacetLabel.DIRICHLET):
        ud = data.facet_value(data.u_D, fid)
        fixed[int(a)] = ud
        fixed[int(b)] = ud
    return fixed


def zero_trace_nodes(mesh):
    """Nodes on the outer layer boundary (hard zero constraint)."""
    top = mesh.marker_edges(LAYER_TOP)
    return [int(i) for i in np.unique(top)] if len(top) else []
