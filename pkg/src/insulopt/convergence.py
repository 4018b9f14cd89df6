"""Vanishing-layer convergence harness.

Sweeps the layer thickness scale eps, compares the thin-layer energies
against the limit problem, and builds admissible competitors from the limit
solution via the fiber cutoff 1 - t/(eps*d(s)).  Also checks the boundary
Lebesgue limit (1/eps) int_{layer} a |v|^p -> int_{GI} (k.n) d a |v|^p ds.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import MeshMismatch
from .fem import eval_E_eps
from .geometry import (
    _GAUSS_W,
    _GAUSS_X,
    _facet_subsegments,
    _layer_integrand_coeffs,
    layer_area,
    transversal_mass,
)
from .layer_solver import solve_eps
from .meshing import extrude_layer, triangulate_bulk
from .robin_solver import solve_limit

_T_GX, _T_GW = np.polynomial.legendre.leggauss(6)

SANDWICH_SLACK = 1e-12
EQUICOERCIVITY_FACTOR = 10.0


def recovery_sequence(u, glued):
    """Admissible thin-layer competitor built from a bulk field.

    Bulk nodes copy ``u``; the fiber node at level l of n_t carries
    u(base) * (1 - l/n_t), the nodal cutoff 1 - t/(eps*d(s)); the outer
    layer boundary value is exactly zero.
    """
    ext = glued.extrusion
    if ext is None:
        raise MeshMismatch("recovery_sequence needs a glued mesh")
    if len(u) != glued.n_bulk_nodes:
        raise MeshMismatch("bulk field does not match the glued mesh prefix")
    v = np.zeros(len(glued.nodes))
    v[:glued.n_bulk_nodes] = u
    n_t = ext.n_t
    for fibers in ext.fiber_nodes:
        for row in fibers:
            base = u[row[0]]
            for lev in range(1, n_t + 1):
                v[row[lev]] = base * (n_t - lev) / n_t
    return v


@dataclass
class GammaSweepRow:
    eps: float
    energy_solution: float
    energy_recovery: float
    gap_solution: float
    gap_recovery: float
    equicoercivity: float
    layer_area_over_eps: float
    poincare_ratio: float


@dataclass
class GammaSweepReport:
    rows: list
    energy_limit: float
    weighted_mass: float
    orders_solution: list = dc_field(default_factory=list)
    orders_recovery: list = dc_field(default_factory=list)
    fields: list = dc_field(default_factory=list)

    def csv_rows(self):
        header = ("eps,energy_solution,energy_recovery,gap_solution,"
                  "gap_recovery,equicoercivity,layer_area_over_eps,"
                  "poincare_ratio")
        lines = [header]
        for r in self.rows:
            lines.append(",".join(
                f"{x:.17g}" for x in (
                    r.eps, r.energy_solution, r.energy_recovery,
                    r.gap_solution, r.gap_recovery, r.equicoercivity,
                    r.layer_area_over_eps, r.poincare_ratio)))
        lines.append(f"# energy_limit,{self.energy_limit:.17g}")
        lines.append(f"# weighted_mass,{self.weighted_mass:.17g}")
        return lines


def _observed_orders(eps_list, gaps):
    orders = []
    for i in range(len(eps_list) - 1):
        ratio = eps_list[i] / eps_list[i + 1]
        if abs(ratio - 2.0) > 1e-9 or gaps[i + 1] <= 0 or gaps[i] <= 0:
            orders.append(np.nan)
        else:
            orders.append(float(np.log2(gaps[i] / gaps[i + 1])))
    return orders


def gamma_sweep(domain, field, dist, data, eps_list, h, n_t, tol=1e-10,
                keep_fields=False):
    """Solve the thin-layer problem over a decreasing eps list and compare
    both the solutions and the recovery competitors against the limit.

    With ``keep_fields`` the report carries (eps, glued mesh, solution)
    triples for serialization.
    """
    eps_list = list(eps_list)
    if any(e2 >= e1 for e1, e2 in zip(eps_list, eps_list[1:])) or eps_list[-1] <= 0:
        raise ValueError("eps_list must be positive and strictly decreasing")
    bulk = triangulate_bulk(domain, h)
    u_lim, rep_lim = solve_limit(bulk, field, dist, data, tol=tol)
    e_lim = rep_lim.total

    rows = []
    fields = []
    for eps in eps_list:
        glued = extrude_layer(bulk, field, dist, eps, n_t)
        u_eps, rep_eps = solve_eps(glued, eps, data, tol=tol)
        v_rec = recovery_sequence(u_lim, glued)
        rep_rec = eval_E_eps(glued, v_rec, eps, data)
        e_sol, e_rec = rep_eps.total, rep_rec.total
        if keep_fields:
            fields.append((eps, glued, u_eps))
        assert e_sol <= e_rec + SANDWICH_SLACK, (
            f"discrete minimality violated at eps={eps}: "
            f"{e_sol} > {e_rec}")
        rows.append(GammaSweepRow(
            eps=eps,
            energy_solution=e_sol,
            energy_recovery=e_rec,
            gap_solution=abs(e_sol - e_lim),
            gap_recovery=abs(e_rec - e_lim),
            equicoercivity=rep_eps.diagnostics["equicoercivity"],
            layer_area_over_eps=layer_area(field, dist, eps) / eps,
            poincare_ratio=rep_eps.diagnostics["poincare_max_ratio"],
        ))

    monitor = [r.equicoercivity for r in rows]
    assert max(monitor) <= EQUICOERCIVITY_FACTOR * monitor[0], (
        "equi-coercivity monitor grew more than "
        f"{EQUICOERCIVITY_FACTOR}x over the sweep")

    report = GammaSweepReport(
        rows=rows,
        energy_limit=e_lim,
        weighted_mass=transversal_mass(field, dist),
        orders_solution=_observed_orders(eps_list, [r.gap_solution for r in rows]),
        orders_recovery=_observed_orders(eps_list, [r.gap_recovery for r in rows]),
        fields=fields,
    )
    return report


def layer_integral(field, dist, eps, p=1, a=None, v=None):
    """(1/eps) int_{layer} a |v|^p dx by exact fiber quadrature.

    ``v`` maps point arrays (n,2) to values, ``a`` maps global arc
    coordinates to values; both default to 1.  ``a`` is extended constantly
    along fibers.
    """
    domain = field.domain
    total = 0.0
    for ci, comp in enumerate(domain.insulated_components):
        for fid, off, brk in _facet_subsegments(domain, dist, ci):
            L = domain.lengths[fid]
            fstart = domain.facet_arc_start[fid]
            for lo, hi in zip(brk[:-1], brk[1:]):
                half = 0.5 * (hi - lo)
                mid = 0.5 * (lo + hi)
                coords = mid + half * _GAUSS_X
                lam = (coords - off) / L
                A, B = _layer_integrand_coeffs(field, fid, lam)
                d = dist.value_at(ci, coords)
                T = eps * d
                base = domain.facet_point(fid, lam)
                k = field.k_at(fid, lam)
                arc = fstart + lam * L
                aval = np.ones_like(coords) if a is None else \
                    np.asarray([a(s) for s in arc], dtype=float)
                inner = np.zeros_like(coords)
                for gx, gw in zip(_T_GX, _T_GW):
                    t = 0.5 * T * (gx + 1.0)
                    pts = base + t[:, None] * k
                    vv = np.ones(len(pts)) if v is None else \
                        np.asarray(v(pts), dtype=float)
                    inner += gw * np.abs(vv) ** p * (A + t * B) * 0.5 * T
                total += half * float(np.dot(_GAUSS_W, aval * inner))
    return total / eps


def boundary_integral(field, dist, p=1, a=None, v=None):
    """int_{GI} (k.n) d a |v|^p ds, the limit of ``layer_integral``."""
    domain = field.domain
    total = 0.0
    for ci, comp in enumerate(domain.insulated_components):
        for fid, off, brk in _facet_subsegments(domain, dist, ci):
            L = domain.lengths[fid]
            fstart = domain.facet_arc_start[fid]
            for lo, hi in zip(brk[:-1], brk[1:]):
                half = 0.5 * (hi - lo)
                mid = 0.5 * (lo + hi)
                coords = mid + half * _GAUSS_X
                lam = (coords - off) / L
                kn = field.k_dot_n(fid, lam)
                d = dist.value_at(ci, coords)
                pts = domain.facet_point(fid, lam)
                arc = fstart + lam * L
                aval = np.ones_like(coords) if a is None else \
                    np.asarray([a(s) for s in arc], dtype=float)
                vv = np.ones(len(pts)) if v is None else \
                    np.asarray(v(pts), dtype=float)
                total += half * float(np.dot(
                    _GAUSS_W, kn * d * aval * np.abs(vv) ** p))
    return total


MIN_LEBESGUE_ORDER = 0.9


def lebesgue_limit_check(v, a, dist, field, eps_list, p=1):
    """Convergence table of the vanishing-layer Lebesgue limit.

    Returns rows (eps, scaled integral, limit, error); under eps-halving the
    observed order must be at least 0.9 unless the errors are at rounding
    level.
    """
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    limit = boundary_integral(field, dist, p=p, a=a, v=v)
    rows = []
    for eps in eps_list:
        val = layer_integral(field, dist, eps, p=p, a=a, v=v)
        rows.append((eps, val, limit, abs(val - limit)))
    errs = [r[3] for r in rows]
    for i in range(len(eps_list) - 1):
        if abs(eps_list[i] / eps_list[i + 1] - 2.0) > 1e-9:
            continue
        if errs[i] < 1e-13 or errs[i + 1] < 1e-13:
            continue
        order = np.log2(errs[i] / errs[i + 1])
        assert order >= MIN_LEBESGUE_ORDER, (
            f"observed order {order:.3f} below {MIN_LEBESGUE_ORDER} "
            f"between eps={eps_list[i]} and {eps_list[i+1]}")
    return rows
