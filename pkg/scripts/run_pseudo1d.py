#!/usr/bin/env python3
"""Pseudo-1D benchmark: all three formulations against closed forms.

Left side held at temperature 1, right side insulated with uniform
thickness, no source.  The limit problem, the thin-layer problem at several
eps, and the reduced problem all evaluate to 1/(2(1+c)) analytically.
"""
import argparse

import numpy as np

from insulopt import (
    InsulationDistribution,
    PolygonalDomain,
    ProblemData,
    build_transversal_field,
    extrude_layer,
    solve_eps,
    solve_limit,
    solve_reduced,
    triangulate_bulk,
)
from insulopt.thickness import reconstruct_distribution


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--h", type=float, default=1 / 32)
    ap.add_argument("--c", type=float, default=1.0, help="uniform thickness")
    ap.add_argument("--mass", type=float, default=1.0)
    args = ap.parse_args()

    domain = PolygonalDomain(
        [(0, 0), (1, 0), (1, 1), (0, 1)],
        ["neumann", "insulated", "neumann", "dirichlet"])
    field = build_transversal_field(domain, "facet_normal")
    mesh = triangulate_bulk(domain, args.h)
    data = ProblemData(f=0.0, g=0.0, u_D=1.0)

    c = args.c
    dist = InsulationDistribution.constant(field, c)
    u, rep = solve_limit(mesh, field, dist, data, tol=1e-13)
    exact = 1 / (2 * (1 + c))
    print(f"limit problem:    E = {rep.total:.12f}   exact {exact:.12f}")

    for eps in (0.2, 0.1, 0.05):
        glued = extrude_layer(mesh, field, dist, eps, 4)
        _, rep_eps = solve_eps(glued, eps, data, tol=1e-13)
        print(f"thin layer eps={eps:<5}: E = {rep_eps.total:.12f}   "
              f"(analytically eps-independent)")

    m = args.mass
    u_red, rep_red = solve_reduced(mesh, m, data, method="alternating",
                                   tol=1e-13)
    d_opt = reconstruct_distribution(mesh, u_red, m, field)
    dvals = np.concatenate(d_opt.component_values)
    print(f"reduced problem:  I = {rep_red.total:.12f}   "
          f"exact {1 / (2 * (1 + m)):.12f}")
    print(f"optimal thickness on the insulated side: "
          f"min {dvals.min():.9f}  max {dvals.max():.9f}  (exact {m})")


if __name__ == "__main__":
    main()
