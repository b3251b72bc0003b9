#!/usr/bin/env python3
"""Finite-distance experiment: construction orbit vs Newton-preimage orbit.

Builds the anchor-chain orbit, restarts an independent preimage march from
a seed displaced by a chosen Kobayashi offset, and reports the distance
profile, its plateau, and the recovered index shift with its certified
bound.
"""

import argparse

import numpy as np

from ballorbits import analysis as ana
from ballorbits import catalog as cat
from ballorbits import cli as blcli
from ballorbits import geometry as geo
from ballorbits import orbits as orb


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--map", default="blaschke:a=1/3")
    ap.add_argument("--zeta", default="1")
    ap.add_argument("--offset", type=float, default=0.05)
    ap.add_argument("--kmax", type=int, default=40)
    args = ap.parse_args()

    f = blcli.parse_mapspec(args.map)
    zeta = geo.boundary_point(blcli.parse_point(args.zeta), q=f.q)
    lam = cat.estimate_dilation(f, zeta).lam_hat
    cleared, _ = cat.ensure_pole_clearance(f, zeta)

    res = orb.construct_backward_orbit(cleared, zeta, lam,
                                       orb.OrbitParams(k_max=args.kmax))
    x0 = res.orbit.points[0]
    seed = geo.apply(geo.mobius_involution(geo.ball_point(x0.coords)),
                     geo.ball_point([np.tanh(args.offset / 2.0) * 1j]
                                    + [0.0] * (f.q - 1)))
    newton = orb.backward_orbit_via_preimages(cleared, seed, zeta,
                                              len(res.orbit) - 1,
                                              lam_hint=lam)
    print(f"construction orbit: length {len(res.orbit)}, "
          f"sigma {res.sigma_hat:.8g}")
    print(f"preimage orbit:     length {len(newton.orbit)}, "
          f"sigma {newton.sigma_hat:.8g}")

    comp = ana.orbit_distance_profile(res.orbit, newton.orbit)
    print(f"direct profile: head {comp.direct[0]:.6g} -> "
          f"tail {comp.direct[-1]:.6g} (plateau: {comp.plateau})")
    shift = ana.shift_recovery(res.orbit, newton.orbit)
    print(f"index shift alpha = {shift.alpha}, sup distance after shift "
          f"C = {shift.c_star:.6g}")
    print(f"certified direct bound C + |alpha| sigma = "
          f"{shift.certified_bound:.6g} >= observed max "
          f"{shift.direct_max:.6g}")


if __name__ == "__main__":
    main()
