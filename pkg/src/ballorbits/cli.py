"""Command-line interface.

Exit codes: 0 success, 1 check/invariant failure, 2 input error,
3 numerical non-convergence.  Complex numbers are written `re,im`
everywhere; points in B^q separate coordinates with `;`.  All floats print
with 15 significant digits.  The sampling seed comes from --seed, else the
BALLORBITS_SEED environment variable, else 12345.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from fractions import Fraction

import numpy as np

from . import acceptance, analysis as ana, catalog as cat, geometry as geo
from . import orbits as orb
from .errors import (ConfigError, DomainError, InvariantViolation,
                     NumericalError)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def fmt(x) -> str:
    return f"{float(x):.15g}"


# ---------------------------------------------------------------------------
# value parsing
# ---------------------------------------------------------------------------

def parse_real(text: str) -> float:
    text = text.strip()
    try:
        if "/" in text:
            return float(Fraction(text))
        return float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot parse number {text!r}") from exc


def parse_complex(text: str) -> complex:
    parts = text.strip().split(",")
    if len(parts) == 1:
        return complex(parse_real(parts[0]), 0.0)
    if len(parts) == 2:
        return complex(parse_real(parts[0]), parse_real(parts[1]))
    raise ConfigError(f"complex numbers are written re,im -- got {text!r}")


def parse_point(text: str) -> np.ndarray:
    coords = [parse_complex(c) for c in text.strip().split(";") if c.strip()]
    if not coords:
        raise ConfigError(f"empty point {text!r}")
    return np.array(coords, dtype=complex)


def parse_complex_list(text: str) -> list[complex]:
    return [parse_complex(tok) for tok in text.replace(";", " ").split()]


# ---------------------------------------------------------------------------
# map specifications
# ---------------------------------------------------------------------------

_INLINE_KINDS = ("blaschke", "mobius", "hyperbolic", "parabolic")


def parse_mapspec(spec: str) -> cat.SelfMap:
    """Inline `kind:key=val,key=val` for leaf kinds, or a spec-file path.

    Every parsed map is spot-checked to actually map samples into the ball.
    """
    if ":" in spec and not os.path.exists(spec):
        f = _parse_inline(spec)
    elif os.path.exists(spec):
        f = _parse_specfile(spec)
    else:
        raise ConfigError(f"map spec {spec!r}: no such file and not inline "
                          f"syntax kind:key=val")
    ok, worst, witness = cat.self_map_check(f, 500,
                                            np.random.default_rng(0))
    if not ok:
        raise ConfigError(
            f"map spec {spec!r} is not a self-map of the ball: "
            f"|f(z)| = {1.0 - worst:.6g} at z = {np.round(witness, 6)}")
    return f


def _parse_inline(spec: str) -> cat.SelfMap:
    kind, _, rest = spec.partition(":")
    kind = kind.strip()
    # commas separate key=val items, but also appear inside re,im values:
    # a piece without '=' continues the previous value
    items: list[str] = []
    for piece in rest.split(","):
        if "=" in piece or not items:
            items.append(piece)
        else:
            items[-1] += "," + piece
    kv = {}
    for item in items:
        if not item.strip():
            continue
        key, _, val = item.partition("=")
        if not val:
            raise ConfigError(f"inline map spec needs key=val, got {item!r}")
        kv[key.strip()] = val.strip()
    if kind == "blaschke":
        if "a" in kv:  # shorthand for z (z - a)/(1 - a z)
            return cat.blaschke_product([0.0, parse_real(kv["a"])])
        return cat.blaschke_product(
            [parse_complex(c) for c in kv["factors"].split(";")],
            theta=parse_real(kv.get("theta", "0")))
    if kind == "mobius":
        return cat.disc_mobius(parse_complex(kv["a"]),
                               parse_real(kv.get("theta", "0")))
    if kind == "hyperbolic":
        zeta = geo.boundary_point(parse_point(kv.get("zeta", "1")))
        return cat.hyperbolic_selfmap(zeta, parse_real(kv["lam"]))
    if kind == "parabolic":
        zeta = geo.boundary_point(parse_point(kv.get("zeta", "1")))
        b = parse_complex_list(kv["b"]) if "b" in kv else None
        return cat.parabolic_selfmap(zeta, b, parse_real(kv.get("t", "0")))
    raise ConfigError(
        f"inline kind {kind!r} not supported (one of {_INLINE_KINDS}); use "
        "a spec file for composite maps")


def _parse_specfile(path: str) -> cat.SelfMap:
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read map spec file {path!r}")
    if "map" not in cp:
        raise ConfigError(f"map spec file {path!r} needs a [map] section")
    return _build_section(cp, "map")


def _build_section(cp, section: str) -> cat.SelfMap:
    if section not in cp:
        raise ConfigError(f"missing section [{section}]")
    opts = cp[section]
    kind = opts.get("kind")
    if kind is None:
        raise ConfigError(f"section [{section}] needs kind = ...")
    if kind == "mobius":
        return cat.disc_mobius(parse_complex(opts.get("a", "0,0")),
                               parse_real(opts.get("theta", "0")))
    if kind == "blaschke":
        return cat.blaschke_product(parse_complex_list(opts["factors"]),
                                    theta=parse_real(opts.get("theta", "0")))
    if kind == "ball_automorphism":
        sub = opts.get("subtype", "hyperbolic")
        zeta = geo.boundary_point(parse_point(opts.get("zeta", "1,0")))
        if sub == "hyperbolic":
            return cat.hyperbolic_selfmap(zeta, parse_real(opts["lam"]))
        if sub == "parabolic":
            b = parse_complex_list(opts["b"]) if "b" in opts else None
            return cat.parabolic_selfmap(zeta, b,
                                         parse_real(opts.get("t", "0")))
        if sub == "unitary":
            rows = [parse_complex_list(r)
                    for r in opts["matrix"].strip().splitlines()]
            return cat.catalog_build("ball_automorphism", subtype="unitary",
                                     matrix=np.array(rows, dtype=complex))
        raise ConfigError(f"unknown automorphism subtype {sub!r}")
    if kind == "warped_product":
        phi = _build_section(cp, f"{section}.phi")
        return cat.warped_product(phi, parse_complex(opts.get("c", "0.5,0")),
                                  q=int(opts.get("q", "2")))
    if kind == "conjugate":
        inner = _build_section(cp, f"{section}.inner")
        conj = _build_section(cp, f"{section}.conjugator")
        if conj.kind != "ball_automorphism":
            raise ConfigError("conjugator must be a ball_automorphism")
        return cat.conjugate_map(inner, conj.params[0])
    if kind == "compose":
        return cat.compose_maps(_build_section(cp, f"{section}.outer"),
                                _build_section(cp, f"{section}.inner"))
    if kind == "iterate":
        return cat.iterate_map(_build_section(cp, f"{section}.base"),
                               int(opts["power"]))
    raise ConfigError(f"unknown map kind {kind!r}")


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("BALLORBITS_SEED")
    return int(env) if env else 12345


def _zeta_for(f: cat.SelfMap, args) -> geo.BoundaryPoint:
    return geo.boundary_point(parse_point(args.zeta), q=f.q)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_geometry(args) -> int:
    if args.query == "dist":
        z = geo.ball_point(parse_point(args.points[0]))
        w = geo.ball_point(parse_point(args.points[1]))
        print(fmt(geo.kob_dist(z, w)))
    elif args.query == "horo":
        z = geo.ball_point(parse_point(args.points[0]))
        zeta = geo.boundary_point(parse_point(args.zeta), q=z.q)
        print(fmt(geo.horofunction(z, zeta)))
    elif args.query == "horosphere":
        z = geo.ball_point(parse_point(args.points[0]))
        zeta = geo.boundary_point(parse_point(args.zeta), q=z.q)
        inside, margin = geo.horosphere_contains(
            z, geo.Horosphere(center=zeta, radius=args.radius))
        print(f"{'inside' if inside else 'outside'} margin={fmt(margin)}")
    elif args.query == "koranyi":
        z = geo.ball_point(parse_point(args.points[0]))
        zeta = geo.boundary_point(parse_point(args.zeta), q=z.q)
        inside, margin = geo.koranyi_contains(
            z, geo.KoranyiRegion(vertex=zeta, amplitude=args.amplitude))
        print(f"{'inside' if inside else 'outside'} margin={fmt(margin)}")
    elif args.query == "tube":
        z = geo.ball_point(parse_point(args.points[0]))
        zeta = geo.boundary_point(parse_point(args.zeta), q=z.q)
        d, s_star = geo.dist_to_geodesic(z, zeta)
        print(f"dist={fmt(d)} s_star={fmt(s_star)}")
    else:
        raise ConfigError(f"unknown geometry query {args.query!r}")
    return EXIT_OK


def cmd_dilation(args) -> int:
    f = parse_mapspec(args.map)
    zeta = _zeta_for(f, args)
    if not cat.is_boundary_fixed(f, zeta):
        print(f"zeta={args.zeta} is not a K-limit fixed point")
        return EXIT_CHECK_FAILED
    est = cat.estimate_dilation(f, zeta)
    print(f"lambda_hat={fmt(est.lam_hat)}")
    print(f"tail_infimum={fmt(np.exp(est.tail_infimum))}")
    print(f"extrapolated={fmt(np.exp(est.extrapolated))}")
    if est.jacobian_check is not None:
        print(f"jacobian_check={fmt(est.jacobian_check)}")
    return EXIT_OK


def _orbit_params(args) -> orb.OrbitParams:
    return orb.OrbitParams(k_min=args.kmin, k_max=args.kmax,
                           n_max=args.nmax, eps_sigma=args.eps_sigma,
                           mode=args.mode)


def cmd_orbit(args) -> int:
    f = parse_mapspec(args.map)
    zeta = _zeta_for(f, args)
    if args.lam is not None:
        lam = args.lam
    else:
        lam = cat.estimate_dilation(f, zeta).lam_hat
    cleared, conj = cat.ensure_pole_clearance(f, zeta)
    res = orb.construct_backward_orbit(cleared, zeta, lam,
                                       _orbit_params(args))
    csv_text = orb.orbit_csv(res.orbit)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)
    if args.svg:
        with open(args.svg, "w") as fh:
            fh.write(orb.orbit_svg(res.orbit))
    print(f"mode={res.mode} length={len(res.orbit)} "
          f"sigma_hat={fmt(res.sigma_hat)} "
          f"final_dist_to_zeta={fmt(res.dist_zeta[-1])} "
          f"conjugation={conj.label}")
    return EXIT_OK if res.accepted else EXIT_CHECK_FAILED


def read_orbit_csv(path, zeta: geo.BoundaryPoint) -> orb.OrbitSegment:
    """Rebuild an orbit segment from its CSV dump.

    Rows whose coordinates have saturated to the sphere (margin below the
    coordinate guard) are dropped: CSV carries 15 significant digits, so
    only the coordinate-representable window round-trips.
    """
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    header = lines[0].split(",")
    q = sum(1 for c in header if c.startswith("re_z"))
    pts = []
    base = None
    for ln in lines[1:]:
        cells = ln.split(",")
        j = int(cells[0])
        coords = np.array([float(cells[1 + i]) + 1j * float(cells[1 + q + i])
                           for i in range(q)])
        if 1.0 - np.linalg.norm(coords) < geo.BOUNDARY_GUARD:
            break
        if base is None:
            base = j
        pts.append(geo.with_reference(geo.ball_point(coords), zeta))
    if len(pts) < 4:
        raise ConfigError(f"orbit CSV {path!r} has too few usable rows")
    return orb.OrbitSegment(points=tuple(pts), zeta=zeta, lam=float("nan"),
                            map_label=path, base_index=base)


def cmd_compare(args) -> int:
    if args.csv_a or args.csv_b:
        if not (args.csv_a and args.csv_b):
            raise ConfigError("CSV comparison needs both --csv-a and --csv-b")
        zeta = geo.boundary_point(parse_point(args.zeta))
        xi = read_orbit_csv(args.csv_a, zeta)
        eta = read_orbit_csv(args.csv_b, zeta)
        comp = ana.orbit_distance_profile(xi, eta,
                                          eps_plateau=args.eps_plateau)
        shift = ana.shift_recovery(xi, eta)
        print(f"window={len(comp.direct)} "
              f"direct_max={fmt(comp.direct.max())} "
              f"shifted_max={fmt(comp.c_bound)} plateau={comp.plateau}")
        print(f"alpha={shift.alpha} c_star={fmt(shift.c_star)} "
              f"certified_bound={fmt(shift.certified_bound)}")
        return EXIT_OK if comp.plateau else EXIT_CHECK_FAILED
    if args.map is None:
        raise ConfigError("compare needs a map spec or two CSVs")
    f = parse_mapspec(args.map)
    zeta = _zeta_for(f, args)
    lam = args.lam if args.lam is not None else \
        cat.estimate_dilation(f, zeta).lam_hat
    cleared, _ = cat.ensure_pole_clearance(f, zeta)
    res = orb.construct_backward_orbit(cleared, zeta, lam,
                                       _orbit_params(args))
    x0 = res.orbit.points[0]
    offset = geo.ball_point([np.tanh(args.offset / 2.0) * 1j]
                            if f.q == 1 else
                            [np.tanh(args.offset / 2.0) * 1j]
                            + [0.0] * (f.q - 1))
    seed_pt = geo.apply(geo.mobius_involution(geo.ball_point(x0.coords)),
                        offset)
    newton = orb.backward_orbit_via_preimages(cleared, seed_pt, zeta,
                                              len(res.orbit) - 1,
                                              lam_hint=lam)
    comp = ana.orbit_distance_profile(res.orbit, newton.orbit,
                                      eps_plateau=args.eps_plateau)
    shift = ana.shift_recovery(res.orbit, newton.orbit)
    print(f"window={len(comp.direct)} direct_max={fmt(comp.direct.max())} "
          f"shifted_max={fmt(comp.c_bound)} plateau={comp.plateau}")
    print(f"alpha={shift.alpha} c_star={fmt(shift.c_star)} "
          f"certified_bound={fmt(shift.certified_bound)}")
    return EXIT_OK if comp.plateau else EXIT_CHECK_FAILED


def cmd_validate_premodel(args) -> int:
    f = parse_mapspec(args.map)
    cp = configparser.ConfigParser()
    if not cp.read(args.premodel):
        raise ConfigError(f"cannot read premodel file {args.premodel!r}")
    if "premodel" not in cp:
        raise ConfigError("premodel file needs a [premodel] section")
    opts = cp["premodel"]
    base_dim = int(opts.get("base_dim", "1"))
    repelling = geo.boundary_point(parse_point(opts.get("repelling", "1,0")))
    tau = geo.hyperbolic_automorphism(repelling, parse_real(opts["lam"]))
    ell_kind = opts.get("ell", "embed_first")
    if ell_kind == "identity":
        pm = ana.PreModel(base_dim=base_dim, ell=lambda w: w, tau=tau,
                          repelling=repelling, label="identity")
    elif ell_kind == "embed_first":
        pm = ana.embedded_disc_premodel(tau, f.q, repelling)
    else:
        raise ConfigError(f"unknown intertwiner kind {ell_kind!r}")
    zeta = _zeta_for(f, args)
    lam = args.lam
    report = ana.premodel_validate(
        f, pm, zeta, lam=lam,
        rng=np.random.default_rng(_seed(args)))
    print(report.render())
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_suite(args) -> int:
    text, passed = acceptance.run_suite(_seed(args))
    sys.stdout.write(text)
    return EXIT_OK if passed else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ballorbits",
        description="Backward orbits and boundary geometry of holomorphic "
                    "self-maps of the complex unit ball")
    p.add_argument("--seed", type=int, default=None,
                   help="sampling seed (default: $BALLORBITS_SEED or 12345)")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("geometry", help="distance / horofunction / region queries")
    g.add_argument("query", choices=["dist", "horo", "horosphere", "koranyi",
                                     "tube"])
    g.add_argument("points", nargs="+", help="points as re,im;re,im")
    g.add_argument("--zeta", default="1,0", help="boundary point")
    g.add_argument("--radius", type=float, default=1.0,
                   help="horosphere radius")
    g.add_argument("--amplitude", "--M", dest="amplitude", type=float,
                   default=2.0, help="Koranyi amplitude")
    g.set_defaults(func=cmd_geometry)

    d = sub.add_parser("dilation", help="estimate the boundary dilation")
    d.add_argument("map")
    d.add_argument("--zeta", required=True)
    d.set_defaults(func=cmd_dilation)

    o = sub.add_parser("orbit", help="construct a backward orbit, emit CSV")
    o.add_argument("map")
    o.add_argument("--zeta", required=True)
    o.add_argument("--lambda", dest="lam", type=float, default=None)
    o.add_argument("--kmin", type=int, default=1)
    o.add_argument("--kmax", type=int, default=40)
    o.add_argument("--nmax", type=int, default=100000)
    o.add_argument("--eps-sigma", type=float, default=1e-3)
    o.add_argument("--mode", choices=["single-tail", "cluster"],
                   default="single-tail")
    o.add_argument("--out", default=None, help="CSV output path")
    o.add_argument("--svg", default=None, help="orbit trace SVG path")
    o.set_defaults(func=cmd_orbit)

    c = sub.add_parser("compare",
                       help="construction orbit vs Newton-preimage orbit, "
                            "or two orbit CSV files")
    c.add_argument("map", nargs="?", default=None)
    c.add_argument("--csv-a", default=None, help="first orbit CSV")
    c.add_argument("--csv-b", default=None, help="second orbit CSV")
    c.add_argument("--zeta", required=True)
    c.add_argument("--lambda", dest="lam", type=float, default=None)
    c.add_argument("--offset", type=float, default=0.05,
                   help="Kobayashi offset of the perturbed seed")
    c.add_argument("--eps-plateau", type=float, default=1e-2)
    c.add_argument("--kmin", type=int, default=1)
    c.add_argument("--kmax", type=int, default=40)
    c.add_argument("--nmax", type=int, default=100000)
    c.add_argument("--eps-sigma", type=float, default=1e-3)
    c.add_argument("--mode", choices=["single-tail", "cluster"],
                   default="single-tail")
    c.set_defaults(func=cmd_compare)

    v = sub.add_parser("validate-premodel",
                       help="check an intertwining triple against a map")
    v.add_argument("map")
    v.add_argument("premodel", help="premodel spec file")
    v.add_argument("--zeta", required=True)
    v.add_argument("--lambda", dest="lam", type=float, default=None)
    v.set_defaults(func=cmd_validate_premodel)

    s = sub.add_parser("suite", help="run the acceptance battery")
    s.set_defaults(func=cmd_suite)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InvariantViolation as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
