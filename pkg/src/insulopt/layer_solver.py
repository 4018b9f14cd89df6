"""Thin-layer transmission problem on the glued mesh.

Conductivity 1 in the bulk and eps in the layer, zero trace on the outer
layer boundary, natural conditions on the fiber sides; flux continuity
across the insulated interface is automatic in conforming P1.
"""
from __future__ import annotations

import numpy as np

from .errors import MeshMismatch
from .fem import (
    apply_dirichlet,
    assemble_load,
    assemble_mass,
    assemble_neumann,
    assemble_stiffness,
    dirichlet_nodes,
    eval_E_eps,
    solve_spd,
    zero_trace_nodes,
)
from .meshing import BULK, LAYER

POINCARE_SLACK = 0.05


def solve_eps(mesh, eps, data, tol=1e-10, max_iter=None):
    """Solve the transmission problem; returns (u, EnergyReport).

    The report's diagnostics carry the equi-coercivity norms and the worst
    fiber ratio of the point-wise Poincare inequality.
    """
    if mesh.extrusion is None:
        raise MeshMismatch("solve_eps expects a glued mesh from extrude_layer")
    if abs(mesh.extrusion.eps - eps) > 1e-14 * max(1.0, eps):
        raise MeshMismatch(
            f"mesh extruded at eps={mesh.extrusion.eps}, solver called with {eps}")
    data.validate(mesh.domain)
    A = assemble_stiffness(mesh, {BULK: 1.0, LAYER: eps})
    b = assemble_load(mesh, data.f) + assemble_neumann(mesh, data)
    fixed = {nd: 0.0 for nd in zero_trace_nodes(mesh)}
    fixed.update(dirichlet_nodes(mesh, data))
    sys = apply_dirichlet(A, b, fixed)
    x = solve_spd(sys.matrix, sys.rhs, tol=tol, max_iter=max_iter)
    u = sys.expand(x)

    report = eval_E_eps(mesh, u, eps, data)
    report.diagnostics.update(equicoercivity_norms(mesh, u, eps))
    report.diagnostics["poincare_max_ratio"] = poincare_fiber_check(mesh, u)
    return u, report


def equicoercivity_norms(mesh, u, eps):
    """|u|^2_W + |grad u|^2_W + (1/eps)|u|^2_S + eps |grad u|^2_S and the sum."""
    M_bulk = assemble_mass(mesh, BULK)
    M_layer = assemble_mass(mesh, LAYER)
    K_bulk = assemble_stiffness(mesh, {BULK: 1.0, LAYER: 0.0})
    K_layer = assemble_stiffness(mesh, {BULK: 0.0, LAYER: 1.0})
    l2_bulk = float(u @ (M_bulk @ u))
    h1_bulk = float(u @ (K_bulk @ u))
    l2_layer = float(u @ (M_layer @ u))
    h1_layer = float(u @ (K_layer @ u))
    total = l2_bulk + h1_bulk + l2_layer / eps + eps * h1_layer
    return {
        "l2_bulk_sq": l2_bulk,
        "h1_bulk_sq": h1_bulk,
        "l2_layer_sq_over_eps": l2_layer / eps,
        "h1_layer_sq_scaled": eps * h1_layer,
        "equicoercivity": total,
    }


def poincare_fiber_check(mesh, u):
    """Worst ratio |u(t_i)|^2 / ((T - t_i) * int_{t_i}^{T} |du/dk|^2).

    Along each fiber the solution is piecewise linear on mesh edges, so the
    directional derivative is exact per segment; values <= 1 certify the
    point-wise inequality (with the full gradient it only gets easier).
    """
    ext = mesh.extrusion
    worst = 0.0
    for fibers in ext.fiber_nodes:
        for row in fibers:
            vals = u[row]
            ts = ext.layer_t[row]
            dt = np.diff(ts)
            if np.any(dt <= 0):
                continue  # zero-height fiber
            slopes = np.diff(vals) / dt
            tail = np.concatenate([
                np.cumsum((slopes**2 * dt)[::-1])[::-1], [0.0]])
            T = ts[-1]
            for i in range(len(row) - 1):
                rhs = (T - ts[i]) * tail[i]
                if rhs <= 0:
                    if abs(vals[i]) > 1e-14:
                        worst = max(worst, np.inf)
                    continue
                worst = max(worst, vals[i] ** 2 / rhs)
    return worst
