"""Catalog of holomorphic self-maps of B^q.

Maps are immutable descriptions (kind + parameters + children); evaluation,
Jacobians and the boundary-adapted stepping all dispatch on the kind.  The
adapted step is what lets forward iteration run exactly against a boundary
fixed point: each structured kind propagates (delta, tail, margin) by a
closed cancellation-free recursion.

Kinds
-----
mobius           disc automorphism e^{i theta} (z - a)/(1 - conj(a) z)
blaschke         finite product z^(m) prod (z - a_i)/(1 - conj(a_i) z)
ball_automorphism  wraps a geometry.Automorphism (hyperbolic/parabolic/unitary)
warped_product   (z1, z') -> (phi(z1), c z') for a disc map phi
conjugate        h o f o h^{-1} for an automorphism h
compose          outer o inner
iterate          f^n
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .errors import (ConfigError, DilationOutOfScope, DomainError,
                     DimensionMismatch, NumericalError)
from .geometry import BallPoint, BoundaryPoint, herm, sq_norm
from .sampling import sample_ball, sample_shell


@dataclass(frozen=True)
class SelfMap:
    q: int
    kind: str
    params: tuple = ()
    children: tuple = ()
    conjugator: geo.Automorphism | None = None
    boundary_fixed: tuple = ()   # ((coords, dilation), ...), analytic metadata
    interior_fixed: np.ndarray | None = None
    label: str = ""

    def __call__(self, z):
        return evaluate(self, z)


@dataclass(frozen=True)
class BrfpReport:
    zeta: BoundaryPoint
    dilation: float
    residuals: np.ndarray          # |f(probe) - zeta| along Koranyi probes
    step_profile: np.ndarray       # d(s) samples whose tail gives log(dilation)


@dataclass(frozen=True)
class DynamicsClass:
    tag: str                       # "interior-fixed-point" | "denjoy-wolff-boundary"
    witness: np.ndarray
    cloud: np.ndarray              # forward-iterate accumulation samples


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def _freeze(arr):
    a = np.asarray(arr, dtype=complex).copy()
    a.flags.writeable = False
    return a


def disc_mobius(a, theta: float = 0.0) -> SelfMap:
    a = complex(a)
    if abs(a) >= 1.0:
        raise ConfigError("mobius parameter must satisfy |a| < 1")
    return _finish_blaschke((a,), float(theta), kind="mobius")


def blaschke_product(factors, theta: float = 0.0) -> SelfMap:
    facs = tuple(complex(a) for a in factors)
    if not facs:
        raise ConfigError("blaschke product needs at least one factor")
    if any(abs(a) >= 1.0 for a in facs):
        raise ConfigError("blaschke factors must satisfy |a| < 1")
    return _finish_blaschke(facs, float(theta), kind="blaschke")


def _finish_blaschke(facs, theta, kind) -> SelfMap:
    fixed = []
    real_rigid = all(abs(a.imag) == 0.0 for a in facs) and theta == 0.0
    if real_rigid:
        # real factors and no rotation: +1 is always fixed, -1 iff odd degree
        lam_plus = sum((1.0 + a.real) / (1.0 - a.real) for a in facs)
        fixed.append((_freeze([1.0]), float(lam_plus)))
        if len(facs) % 2 == 1:
            lam_minus = sum((1.0 - a.real) / (1.0 + a.real) for a in facs)
            fixed.append((_freeze([-1.0]), float(lam_minus)))
    interior = _freeze([0.0]) if any(a == 0 for a in facs) else None
    return SelfMap(q=1, kind=kind, params=(facs, theta),
                   boundary_fixed=tuple(fixed), interior_fixed=interior,
                   label=f"{kind}({', '.join(f'{a:g}' for a in facs)})")


def ball_automorphism(aut: geo.Automorphism,
                      boundary_fixed=()) -> SelfMap:
    return SelfMap(q=aut.q, kind="ball_automorphism", params=(aut,),
                   boundary_fixed=tuple(boundary_fixed),
                   label=aut.label or "automorphism")


def hyperbolic_selfmap(zeta: BoundaryPoint, lam: float) -> SelfMap:
    aut = geo.hyperbolic_automorphism(zeta, lam)
    return ball_automorphism(
        aut, boundary_fixed=((_freeze(zeta.coords), float(lam)),))


def parabolic_selfmap(zeta: BoundaryPoint, b, t: float) -> SelfMap:
    aut = geo.parabolic_automorphism(zeta, b, t)
    return ball_automorphism(
        aut, boundary_fixed=((_freeze(zeta.coords), 1.0),))


def warped_product(phi: SelfMap, c, q: int = 2) -> SelfMap:
    """(z1, z') -> (phi(z1), c z'); Schwarz-Pick admissibility enforced."""
    if phi.q != 1:
        raise ConfigError("warped product needs a disc map in the first slot")
    if q < 2:
        raise ConfigError("warped product needs q >= 2")
    c = complex(c)
    phi0 = abs(complex(evaluate(phi, np.zeros(1, dtype=complex))[0]))
    bound = (1.0 - phi0) / (1.0 + phi0)
    if abs(c) ** 2 > bound + 1e-15:
        raise ConfigError(
            f"warped factor |c|^2 = {abs(c)**2:.6g} exceeds admissible "
            f"bound {bound:.6g}")
    fixed = tuple((_freeze(np.concatenate([zc, np.zeros(q - 1)])), lam)
                  for zc, lam in phi.boundary_fixed)
    interior = None
    if phi.interior_fixed is not None and abs(c) < 1.0:
        interior = _freeze(np.concatenate([phi.interior_fixed,
                                           np.zeros(q - 1)]))
    return SelfMap(q=q, kind="warped_product", params=(c,), children=(phi,),
                   boundary_fixed=fixed, interior_fixed=interior,
                   label=f"warped({phi.label}, c={c:g})")


def conjugate_map(f: SelfMap, h: geo.Automorphism) -> SelfMap:
    """h o f o h^{-1}."""
    if f.q != h.q:
        raise DimensionMismatch("conjugator dimension mismatch")
    fixed = []
    for zc, lam in f.boundary_fixed:
        image = geo.apply_raw(h, np.asarray(zc))
        image = image / np.linalg.norm(image)
        fixed.append((_freeze(image), lam))
    interior = None
    if f.interior_fixed is not None:
        interior = _freeze(geo.apply_raw(h, np.asarray(f.interior_fixed)))
    return SelfMap(q=f.q, kind="conjugate", children=(f,), conjugator=h,
                   boundary_fixed=tuple(fixed), interior_fixed=interior,
                   label=f"conj({f.label})")


def compose_maps(outer: SelfMap, inner: SelfMap) -> SelfMap:
    if outer.q != inner.q:
        raise DimensionMismatch("composition dimension mismatch")
    return SelfMap(q=outer.q, kind="compose", children=(outer, inner),
                   label=f"{outer.label}o{inner.label}")


def iterate_map(base: SelfMap, power: int) -> SelfMap:
    if power < 1:
        raise ConfigError("iterate power must be >= 1")
    fixed = tuple((zc, lam ** power) for zc, lam in base.boundary_fixed)
    return SelfMap(q=base.q, kind="iterate", params=(int(power),),
                   children=(base,), boundary_fixed=fixed,
                   interior_fixed=base.interior_fixed,
                   label=f"{base.label}^{power}")


def callable_map(fn, q: int, label: str = "callable") -> SelfMap:
    """Wrap a raw evaluator (..., q) -> (..., q); Jacobians fall back to
    finite differences and there is no boundary-adapted stepping."""
    return SelfMap(q=q, kind="callable", params=(fn,), label=label)


_KIND_BUILDERS = {
    "mobius": lambda p: disc_mobius(p["a"], p.get("theta", 0.0)),
    "blaschke": lambda p: blaschke_product(p["factors"], p.get("theta", 0.0)),
}


def catalog_build(kind: str, **params) -> SelfMap:
    """Uniform keyword entry point used by the CLI spec parser."""
    if kind in _KIND_BUILDERS:
        return _KIND_BUILDERS[kind](params)
    if kind == "ball_automorphism":
        sub = params.get("subtype", "hyperbolic")
        zeta = params["zeta"]
        if not isinstance(zeta, BoundaryPoint):
            zeta = geo.boundary_point(zeta)
        if sub == "hyperbolic":
            return hyperbolic_selfmap(zeta, float(params["lam"]))
        if sub == "parabolic":
            return parabolic_selfmap(zeta, params.get("b"), params.get("t", 0.0))
        if sub == "unitary":
            return ball_automorphism(
                geo.unitary_automorphism(params["matrix"]))
        raise ConfigError(f"unknown automorphism subtype {sub!r}")
    if kind == "warped_product":
        return warped_product(params["phi"], params["c"], params.get("q", 2))
    if kind == "conjugate":
        return conjugate_map(params["inner"], params["conjugator"])
    if kind == "compose":
        return compose_maps(params["outer"], params["inner"])
    if kind == "iterate":
        return iterate_map(params["base"], params["power"])
    raise ConfigError(f"unknown map kind {kind!r}")


# ---------------------------------------------------------------------------
# evaluation / Jacobian
# ---------------------------------------------------------------------------

def evaluate(f: SelfMap, z):
    """Evaluate on raw coordinates, broadcasting over leading axes."""
    z = np.asarray(z, dtype=complex)
    if f.kind in ("mobius", "blaschke"):
        facs, theta = f.params
        z1 = z[..., 0]
        out = np.full_like(z1, np.exp(1j * theta))
        for a in facs:
            out = out * (z1 - a) / (1.0 - np.conj(a) * z1)
        return out[..., None]
    if f.kind == "ball_automorphism":
        return geo.apply_raw(f.params[0], z)
    if f.kind == "warped_product":
        c, = f.params
        first = evaluate(f.children[0], z[..., :1])
        return np.concatenate([first, c * z[..., 1:]], axis=-1)
    if f.kind == "conjugate":
        h = f.conjugator
        return geo.apply_raw(h, evaluate(f.children[0],
                                         geo.apply_raw(geo.inverse(h), z)))
    if f.kind == "compose":
        return evaluate(f.children[0], evaluate(f.children[1], z))
    if f.kind == "iterate":
        out = z
        for _ in range(f.params[0]):
            out = evaluate(f.children[0], out)
        return out
    if f.kind == "callable":
        return np.asarray(f.params[0](z), dtype=complex)
    raise ConfigError(f"unknown map kind {f.kind!r}")


def jacobian(f: SelfMap, z) -> np.ndarray:
    """Complex q x q Jacobian at a single point."""
    z = geo.as_vector(z, f.q)
    if f.kind in ("mobius", "blaschke"):
        facs, theta = f.params
        z1 = z[0]
        vals = [(z1 - a) / (1.0 - np.conj(a) * z1) for a in facs]
        ders = [(1.0 - abs(a) ** 2) / (1.0 - np.conj(a) * z1) ** 2 for a in facs]
        total = 0.0 + 0.0j
        for i in range(len(facs)):
            prod = ders[i]
            for j, v in enumerate(vals):
                if j != i:
                    prod = prod * v
            total += prod
        return np.array([[np.exp(1j * theta) * total]], dtype=complex)
    if f.kind == "ball_automorphism":
        return _automorphism_jacobian(f.params[0], z)
    if f.kind == "warped_product":
        c, = f.params
        j = np.zeros((f.q, f.q), dtype=complex)
        j[0, 0] = jacobian(f.children[0], z[:1])[0, 0]
        for i in range(1, f.q):
            j[i, i] = c
        return j
    if f.kind == "conjugate":
        h = f.conjugator
        hinv = geo.inverse(h)
        w = geo.apply_raw(hinv, z)
        return (_automorphism_jacobian(h, evaluate(f.children[0], w))
                @ jacobian(f.children[0], w)
                @ _automorphism_jacobian(hinv, z))
    if f.kind == "compose":
        inner_val = evaluate(f.children[1], z)
        return jacobian(f.children[0], inner_val) @ jacobian(f.children[1], z)
    if f.kind == "iterate":
        j = np.eye(f.q, dtype=complex)
        cur = z
        for _ in range(f.params[0]):
            j = jacobian(f.children[0], cur) @ j
            cur = evaluate(f.children[0], cur)
        return j
    if f.kind == "callable":
        return jacobian_fd(f, z)
    raise ConfigError(f"unknown map kind {f.kind!r}")


def _automorphism_jacobian(g: geo.Automorphism, z) -> np.ndarray:
    """d(U phi_a)/dz: for phi_a,  J v = (phi_a(z) <v,a> - P v - s Q v)/(1-<z,a>)."""
    a = g.center
    aa = sq_norm(a)
    q = g.q
    if aa < 1e-32:
        return -np.asarray(g.unitary)
    s = np.sqrt(1.0 - aa)
    phi_z = geo.mobius_shift(a, z)
    den = 1.0 - herm(z, a)
    cols = []
    for i in range(q):
        v = np.zeros(q, dtype=complex)
        v[i] = 1.0
        proj = (herm(v, a) / aa) * a
        orth = v - proj
        cols.append((phi_z * herm(v, a) - proj - s * orth) / den)
    return np.asarray(g.unitary) @ np.stack(cols, axis=1)


def jacobian_fd(f: SelfMap, z, h: float = 1e-6) -> np.ndarray:
    """Central finite differences, the independent cross-check for jacobian()."""
    z = geo.as_vector(z, f.q)
    cols = []
    for i in range(f.q):
        e = np.zeros(f.q, dtype=complex)
        e[i] = h
        cols.append((evaluate(f, z + e) - evaluate(f, z - e)) / (2.0 * h))
    return np.stack(cols, axis=1)


# ---------------------------------------------------------------------------
# boundary-adapted stepping
# ---------------------------------------------------------------------------

def adapted_step(f: SelfMap, p: BallPoint) -> BallPoint | None:
    """One application of f on a boundary-adapted point, or None when the
    map structure cannot keep the defect representation exact."""
    if p.ref is None:
        return None
    out = _astep(f, p.ref, complex(p.delta), p.tail(), float(p.margin))
    if out is None:
        return None
    ref, delta, tail, margin = out
    return geo.boundary_adapted_point(ref, delta, tail=tail, margin=margin)


def _astep(f: SelfMap, ref, delta, tail, margin):
    if f.kind in ("mobius", "blaschke"):
        return _blaschke_astep(f, ref, delta, margin)
    if f.kind == "ball_automorphism":
        aut = f.params[0]
        p = geo.boundary_adapted_point(ref, delta, tail=tail, margin=margin)
        out = geo._stage_apply(aut.stages, p) if aut.stages else None
        if out is None:
            return None
        return out.ref, complex(out.delta), out.tail(), float(out.margin)
    if f.kind == "warped_product":
        c, = f.params
        if np.abs(ref[1:]).max() > 1e-14:   # boundary point must be (+-1, 0)
            return None
        tail_sq = sq_norm(tail)
        m1 = margin + tail_sq
        sub = _astep(f.children[0], ref[:1], delta, np.zeros(1, complex), m1)
        if sub is None:
            return None
        ref1, delta1, _, m1_new = sub
        new_ref = np.concatenate([ref1, np.zeros(f.q - 1, dtype=complex)])
        new_tail = c * tail
        new_margin = m1_new - abs(c) ** 2 * tail_sq
        return new_ref, delta1, new_tail, max(new_margin, 5e-324)
    if f.kind == "conjugate":
        h = f.conjugator
        p = geo.boundary_adapted_point(ref, delta, tail=tail, margin=margin)
        p1 = geo._stage_apply(geo.inverse(h).stages, p)
        if p1 is None:
            return None
        mid = _astep(f.children[0], p1.ref, complex(p1.delta), p1.tail(),
                     float(p1.margin))
        if mid is None:
            return None
        p2 = geo.boundary_adapted_point(mid[0], mid[1], tail=mid[2],
                                        margin=mid[3])
        p3 = geo._stage_apply(h.stages, p2)
        if p3 is None:
            return None
        return p3.ref, complex(p3.delta), p3.tail(), float(p3.margin)
    if f.kind == "compose":
        mid = _astep(f.children[1], ref, delta, tail, margin)
        if mid is None:
            return None
        return _astep(f.children[0], *mid)
    if f.kind == "iterate":
        cur = (ref, delta, tail, margin)
        for _ in range(f.params[0]):
            cur = _astep(f.children[0], *cur)
            if cur is None:
                return None
        return cur
    return None


def _blaschke_astep(f: SelfMap, ref, delta, margin):
    """Defect recursion for real-coefficient Blaschke products at ref = +-1.

    Per factor u = (z - a)/(1 - a z):
        at +1:  1 - u = (1+a) d / ((1-a) + a d),        d = 1 - z
        at -1:  1 - (-u) = (1-a) d~ / ((1+a) - a d~),   d~ = 1 + z
    and one-minus values multiply as om(uv) = om_u + om_v - om_u om_v.
    """
    facs, theta = f.params
    if theta != 0.0 or any(a.imag != 0.0 for a in facs):
        return None
    at_plus = geo._same_direction(ref, np.array([1.0 + 0.0j]), geo.FIX_TOL)
    at_minus = geo._same_direction(ref, np.array([-1.0 + 0.0j]), geo.FIX_TOL)
    if not (at_plus or at_minus):
        return None
    if at_minus and len(facs) % 2 == 0:
        return None
    om_prod = None
    m_prod = None
    for a in facs:
        ar = a.real
        if at_plus:
            den = (1.0 - ar) + ar * delta
            om = (1.0 + ar) * delta / den
        else:
            den = (1.0 + ar) - ar * delta
            om = (1.0 - ar) * delta / den
        m_fac = (1.0 - ar * ar) * margin / abs(den) ** 2
        if om_prod is None:
            om_prod, m_prod = om, m_fac
        else:
            om_prod = om_prod + om - om_prod * om
            m_prod = m_prod + m_fac - m_prod * m_fac
    return ref, om_prod, np.zeros_like(ref), float(m_prod)


def step_point(f: SelfMap, p: BallPoint) -> BallPoint:
    """f(p) as a BallPoint: adapted when possible, raw coordinates otherwise."""
    out = adapted_step(f, p)
    if out is not None:
        return out
    coords = evaluate(f, p.coords)
    n = np.linalg.norm(coords)
    if 1.0 - n < geo.BOUNDARY_GUARD:
        raise NumericalError(
            "iterate reached the numerical boundary and this map has no "
            "structured stepping; rebuild it from catalog kinds")
    return geo.ball_point(coords)


# ---------------------------------------------------------------------------
# checks and estimates
# ---------------------------------------------------------------------------

def self_map_check(f: SelfMap, n_samples: int = 10000, rng=None):
    """(ok, worst_margin, witness): samples uniform-in-radius plus a
    near-sphere shell and reports min(1 - |f(z)|)."""
    if rng is None:
        rng = np.random.default_rng(0)
    n_shell = max(n_samples // 10, 8)
    pts = np.concatenate([sample_ball(rng, f.q, n_samples),
                          sample_shell(rng, f.q, n_shell)], axis=0)
    vals = evaluate(f, pts)
    margins = 1.0 - np.sqrt(sq_norm(vals))
    i = int(np.argmin(margins))
    worst = float(margins[i])
    return worst > 0.0, worst, pts[i]


def koranyi_probes(zeta: BoundaryPoint, s_values, offsets=(0.0, 0.15, -0.15)):
    """Probe sequences approaching zeta inside K(zeta, 2): the radius plus
    tangentially displaced copies (complex-tangent displacement for q = 1)."""
    from .sampling import _axial_transport
    probes = []
    for off in offsets:
        seq = []
        for s in s_values:
            if off == 0.0:
                seq.append(geo._axis_point(zeta, float(s)))
            else:
                if zeta.q == 1:
                    u_vec = 1j * off * zeta.coords
                else:
                    direction = np.zeros(zeta.q, dtype=complex)
                    direction[1] = 1.0
                    frame = geo.unitary_taking(
                        geo.basis_boundary_point(zeta.q).coords, zeta.coords)
                    u_vec = off * (frame @ direction)
                u = geo.boundary_adapted_point(
                    zeta.coords, 1.0 - herm(u_vec, zeta.coords),
                    tail=u_vec - herm(u_vec, zeta.coords) * zeta.coords)
                seq.append(_axial_transport(zeta, float(s), u))
        probes.append(seq)
    return probes


def is_boundary_fixed(f: SelfMap, zeta: BoundaryPoint, tol: float = 1e-8) -> bool:
    """K-limit test: |f(z_i) - zeta| -> 0 along three Koranyi probe sequences."""
    s_values = np.arange(4.0, 24.01, 2.0)
    for seq in koranyi_probes(zeta, s_values):
        res = []
        for p in seq:
            try:
                fp = step_point(f, p)
            except NumericalError:
                break
            res.append(geo.dist_to_zeta(fp, zeta))
        if len(res) < 4:
            return False
        res = np.array(res)
        if res[-1] > tol or res[-1] > res[0]:
            return False
    return True


@dataclass(frozen=True)
class DilationEstimate:
    lam_hat: float
    s_grid: np.ndarray
    profile: np.ndarray
    tail_infimum: float
    extrapolated: float
    jacobian_check: float | None


def estimate_dilation(f: SelfMap, zeta: BoundaryPoint,
                      s_max: float = 30.0, ds: float = 0.5) -> DilationEstimate:
    """Radial estimate of the boundary dilation at a fixed point zeta.

    Samples d(s) = kob(0, gamma(s)) - kob(0, f(gamma(s))) on a grid, takes
    the tail infimum and sharpens it by Richardson extrapolation in e^{-s}
    (the decay rate of every catalog map).  The liminf defining the dilation
    is over all approaches to zeta but is attained radially for the maps
    built here; the Jacobian cross-check below guards that assumption.
    """
    structured = adapted_step(f, geo._axis_point(zeta, 2.0)) is not None
    if not structured:
        s_max = min(s_max, 16.0)
    grid = np.arange(1.0, s_max + 1e-9, ds)
    prof = np.empty(len(grid))
    for i, s in enumerate(grid):
        p = geo._axis_point(zeta, float(s))
        fp = step_point(f, p)
        prof[i] = s - geo.kob_dist_origin(fp)
    if prof[-1] > 23.0 and prof[-1] - prof[-4] > 1.0:
        raise DilationOutOfScope(
            "radial profile diverges: super-repelling point (dilation = inf)")
    tail = prof[-8:]
    tail_inf = float(tail.min())
    rho = np.exp(-ds)
    extrap = float((prof[-1] - rho * prof[-2]) / (1.0 - rho))
    extrap_prev = float((prof[-2] - rho * prof[-3]) / (1.0 - rho))
    log_lam = extrap
    if abs(extrap - tail_inf) > 0.05 * (1.0 + abs(tail_inf)) \
            or abs(extrap - extrap_prev) > 0.01 * (1.0 + abs(extrap)):
        log_lam = tail_inf
    if log_lam <= 1e-6:
        raise DilationOutOfScope(
            f"dilation log = {log_lam:.3e} is not distinguishable from a "
            "non-repelling point")
    jac_check = None
    try:
        vals = []
        for s in (8.0, 10.0, 12.0):
            z = geo._axis_point(zeta, s).coords
            vals.append(abs(herm(jacobian(f, z) @ zeta.coords, zeta.coords)))
        r = np.exp(-2.0)
        jac_check = float((vals[2] - r * vals[1]) / (1.0 - r))
    except Exception:
        pass
    return DilationEstimate(lam_hat=float(np.exp(log_lam)), s_grid=grid,
                            profile=prof, tail_infimum=tail_inf,
                            extrapolated=extrap, jacobian_check=jac_check)


def certify_brfp(f: SelfMap, zeta: BoundaryPoint) -> BrfpReport:
    if not is_boundary_fixed(f, zeta):
        raise DomainError("zeta is not a K-limit fixed point of this map")
    est = estimate_dilation(f, zeta)
    s_values = np.arange(4.0, 24.01, 2.0)
    res = []
    for p in koranyi_probes(zeta, s_values)[0]:
        res.append(geo.dist_to_zeta(step_point(f, p), zeta))
    return BrfpReport(zeta=zeta, dilation=est.lam_hat,
                      residuals=np.array(res), step_profile=est.profile)


# ---------------------------------------------------------------------------
# forward dynamics
# ---------------------------------------------------------------------------

def _seed_cloud(q: int) -> np.ndarray:
    pts = []
    for i in range(6):
        v = np.zeros(q, dtype=complex)
        v[i % q] = (0.25 + 0.08 * i) * np.exp(1j * (0.9 * i + 0.3))
        if q > 1:
            v[(i + 1) % q] += 0.15 * np.exp(-1j * 0.7 * i)
        pts.append(v)
    return np.stack(pts)


def _interior_fixed_newton(f: SelfMap, seed, tol=1e-12, max_iter=60):
    z = geo.as_vector(seed, f.q).astype(complex)
    eye = np.eye(f.q, dtype=complex)
    for _ in range(max_iter):
        r = evaluate(f, z) - z
        if np.linalg.norm(r) < tol:
            if np.linalg.norm(z) < 1.0 - 1e-9:
                return z
            return None
        try:
            step = np.linalg.solve(jacobian(f, z) - eye, -r)
        except np.linalg.LinAlgError:
            return None
        z_new = z + step
        n = np.linalg.norm(z_new)
        if n > 1.0 - 1e-12:
            z_new *= (1.0 - 1e-9) / n
        z = z_new
    return None


def classify_dynamics(f: SelfMap, n_max: int = 2000) -> DynamicsClass:
    """Iterate a deterministic sample cloud forward and classify the limit.

    The returned `cloud` is an accumulation-set proxy (the iterate tail),
    standing in for the forward limit manifold; transients are discarded.
    """
    cloud = _seed_cloud(f.q)
    history = [cloud.copy()]
    for it in range(n_max):
        cloud = evaluate(f, cloud)
        history.append(cloud.copy())
        if len(history) > 60:
            history.pop(0)
        mean = cloud.mean(axis=0)
        spread = np.max(np.sqrt(sq_norm(cloud - mean)))
        if spread < 1e-10 and np.linalg.norm(mean) < 1.0 - 1e-6:
            stationary = np.linalg.norm(evaluate(f, mean) - mean)
            if stationary < 1e-8:
                refined = _interior_fixed_newton(f, mean)
                witness = refined if refined is not None else mean
                return DynamicsClass("interior-fixed-point", _freeze(witness),
                                     _freeze(cloud))
        norms = np.sqrt(sq_norm(cloud))
        if norms.min() > 1.0 - 1e-9:
            dirs = cloud / norms[:, None]
            if np.max(np.sqrt(sq_norm(dirs - dirs[0]))) < 1e-5:
                return DynamicsClass("denjoy-wolff-boundary",
                                     _freeze(dirs.mean(axis=0)),
                                     _freeze(cloud))
    for seed in [np.zeros(f.q, dtype=complex)] + list(_seed_cloud(f.q)):
        fixed = _interior_fixed_newton(f, seed)
        if fixed is not None:
            # recurrent but bounded dynamics (e.g. elliptic rotations): the
            # iterate tail is the best available stand-in for the limit set
            return DynamicsClass("interior-fixed-point", _freeze(fixed),
                                 _freeze(np.concatenate(history)))
    raise NumericalError(
        f"dynamics undecided after {n_max} iterations: cloud spread "
        f"{np.max(np.sqrt(sq_norm(cloud - cloud.mean(axis=0)))):.3e}")


def ensure_pole_clearance(f: SelfMap, zeta: BoundaryPoint,
                          clearance: float = 0.1, max_doublings: int = 20):
    """Conjugate f so that its forward-limit witness set stays outside the
    closed unit horosphere at zeta.

    Returns (conjugated map, conjugating automorphism); the conjugator is an
    axial translation fixing +-zeta, so zeta stays fixed with the same
    dilation (verified).  Translation length doubles until the transported
    witness cloud has horofunction > clearance.
    """
    dyn = classify_dynamics(f)
    if dyn.tag == "denjoy-wolff-boundary":
        if np.linalg.norm(np.asarray(dyn.witness) - zeta.coords) < 1e-6:
            raise DomainError(
                "the Denjoy-Wolff point coincides with zeta; zeta cannot be "
                "repelling there")
        return f, geo.identity_automorphism(f.q)
    witness_pts = np.concatenate([dyn.cloud, dyn.witness[None, :]])
    witness_pts = witness_pts[np.sqrt(sq_norm(witness_pts)) < 1.0 - 1e-9]
    if len(witness_pts) == 0:
        return f, geo.identity_automorphism(f.q)
    horos = geo.horo_raw(witness_pts, zeta.coords)
    min_h = float(horos.min())
    if min_h > clearance:
        return f, geo.identity_automorphism(f.q)
    t = 0.1
    for _ in range(max_doublings):
        h = geo.axis_translation(zeta, t)
        moved = geo.apply_raw(h, witness_pts)
        if float(geo.horo_raw(moved, zeta.coords).min()) > clearance:
            cleared = conjugate_map(f, h)
            lam_before = estimate_dilation(f, zeta).lam_hat
            lam_after = estimate_dilation(cleared, zeta).lam_hat
            if abs(lam_after - lam_before) > 1e-6 * max(1.0, lam_before):
                raise NumericalError(
                    f"pole clearance changed the dilation: {lam_before!r} "
                    f"-> {lam_after!r}")
            return cleared, h
        t *= 2.0
    raise NumericalError(
        f"pole clearance not achieved after {max_doublings} doublings")
