"""Hyperbolic geometry of the complex unit ball B^q.

Distance normalisation: every routine here uses the Kobayashi distance
scaled so that

    kob_dist(0, z) = log((1 + |z|) / (1 - |z|)).

Under this scaling the horofunction of a boundary point zeta has the closed
form log(|1 - <z, zeta>|^2 / (1 - |z|^2)), the radial points
((L^k - 1)/(L^k + 1)) zeta sit exactly on the horosphere boundary
{horofunction = -k log L}, and the axial automorphism with boundary
dilation L translates its axis by log L.  See README "Metric convention"
for why these three facts pin the scaling down.

Points very close to the sphere are the whole reason this module exists,
so `BallPoint` can carry, next to raw coordinates, the pair

    delta  = 1 - <z, ref>      (complex defect against a boundary point)
    margin = 1 - |z|^2         (squared distance to the sphere)

computed without subtractive cancellation.  All distance/horofunction
routines prefer those fields when available; coordinates alone stop being
usable roughly at 1 - |z| ~ 1e-14 and are rejected there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, DomainError, NumericalError

# Coordinate-only points closer to the sphere than this are rejected: every
# formula divides by 1 - |z|^2, which subtraction can no longer resolve.
BOUNDARY_GUARD = 1e-14
# |1 - |zeta|| tolerance for boundary points.
BOUNDARY_TOL = 1e-12
# "This automorphism fixes zeta" tolerance used by adapted code paths.
FIX_TOL = 1e-10
# Horofunction values inside this band count as "on the horosphere".
HOROSPHERE_BAND = 1e-13


# ---------------------------------------------------------------------------
# raw vector helpers (broadcast over leading axes, complex dtype)
# ---------------------------------------------------------------------------

def herm(z, w):
    """Hermitian inner product sum_i z_i conj(w_i), linear in the first slot."""
    return np.sum(np.asarray(z) * np.conj(w), axis=-1)


def sq_norm(z):
    return herm(z, z).real


def as_vector(coords, q=None):
    v = np.atleast_1d(np.asarray(coords, dtype=complex))
    if v.ndim != 1:
        raise DomainError(f"expected a coordinate vector, got shape {v.shape}")
    if q is not None and v.shape[0] != q:
        raise DimensionMismatch(f"expected dimension {q}, got {v.shape[0]}")
    return v


def mobius_shift(a, z):
    """The involutive automorphism phi_a applied to z (broadcast in z).

    phi_a exchanges a and 0; phi_0 is the antipodal map -id, which is its
    continuous limit as a -> 0.
    """
    a = np.asarray(a, dtype=complex)
    z = np.asarray(z, dtype=complex)
    aa = sq_norm(a)
    if aa >= 1.0:
        raise DomainError("mobius center must lie strictly inside the ball")
    if aa < 1e-32:
        return -z
    s = np.sqrt(1.0 - aa)
    proj = (herm(z, a) / aa)[..., None] * a
    orth = z - proj
    return (a - proj - s * orth) / (1.0 - herm(z, a))[..., None]


def unitary_taking(u, v):
    """A unitary mapping unit vector u to unit vector v.

    Acts as the identity on the orthogonal complement of span{u, v}; when u
    is a unimodular multiple c*v it multiplies the complex line C v by 1/c.
    """
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    q = u.shape[0]
    if np.linalg.norm(u - v) < 1e-14:
        return np.eye(q, dtype=complex)
    c = herm(u, v)
    u_perp = u - c * v
    s2 = np.linalg.norm(u_perp)
    if s2 < 1e-14:
        return np.eye(q, dtype=complex) + (1.0 / c - 1.0) * np.outer(v, np.conj(v))
    b2 = u_perp / s2
    basis = np.stack([v, b2], axis=1)  # q x 2
    m = np.array([[np.conj(c), s2], [-s2, c]], dtype=complex)
    return np.eye(q, dtype=complex) + basis @ (m - np.eye(2)) @ basis.conj().T


def project_unitary(w):
    """Nearest unitary matrix (polar factor)."""
    u, _, vt = np.linalg.svd(w)
    return u @ vt


# ---------------------------------------------------------------------------
# points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BallPoint:
    """A point of B^q: coordinates plus a trusted margin 1 - |z|^2.

    `ref`/`delta`, when set, make the point usable arbitrarily close to the
    boundary point `ref`: delta = 1 - <z, ref> held without cancellation.
    """

    coords: np.ndarray
    margin: float
    ref: np.ndarray | None = None
    delta: complex | None = None

    @property
    def q(self) -> int:
        return self.coords.shape[0]

    def norm(self) -> float:
        return float(np.sqrt(max(1.0 - self.margin, 0.0)))

    def tail(self, ref=None) -> np.ndarray:
        """Component orthogonal to the reference boundary direction."""
        r = self.ref if ref is None else ref
        return self.coords - herm(self.coords, r) * r


def ball_point(coords, q=None) -> BallPoint:
    """Validated interior point from raw coordinates."""
    v = as_vector(coords, q)
    n = np.linalg.norm(v)
    if not np.isfinite(n):
        raise DomainError("non-finite coordinates")
    if 1.0 - n < BOUNDARY_GUARD:
        raise DomainError(
            f"point with 1 - |z| = {1.0 - n:.3e} is numerically on the sphere"
        )
    v = v.copy()
    v.flags.writeable = False
    return BallPoint(coords=v, margin=float(1.0 - n * n))


def boundary_adapted_point(ref, delta, tail=None, margin=None) -> BallPoint:
    """Interior point given by its defect against a boundary point.

    coords = (1 - delta) * ref + tail with tail orthogonal to ref.  The
    margin is derived cancellation-free as 2 Re delta - |delta|^2 - |tail|^2
    unless supplied.  No sphere guard: that is the point of this constructor.
    """
    refv = as_vector(np.asarray(ref.coords if isinstance(ref, BoundaryPoint) else ref))
    delta = complex(delta)
    if tail is None:
        tail = np.zeros_like(refv)
    else:
        tail = as_vector(tail, refv.shape[0])
    if margin is None:
        margin = 2.0 * delta.real - abs(delta) ** 2 - sq_norm(tail)
    margin = float(margin)
    if margin <= 0.0:
        raise DomainError(f"adapted point has nonpositive margin {margin:.3e}")
    coords = (1.0 - delta) * refv + tail
    coords.flags.writeable = False
    return BallPoint(coords=coords, margin=margin, ref=refv, delta=delta)


def with_reference(p: BallPoint, zeta: "BoundaryPoint") -> BallPoint:
    """Attach boundary-adapted data (computed from coordinates) to a point."""
    d = 1.0 - herm(p.coords, zeta.coords)
    return BallPoint(coords=p.coords, margin=p.margin, ref=zeta.coords,
                     delta=complex(d))


@dataclass(frozen=True)
class BoundaryPoint:
    coords: np.ndarray

    @property
    def q(self) -> int:
        return self.coords.shape[0]


def boundary_point(coords, q=None) -> BoundaryPoint:
    v = as_vector(coords, q)
    n = np.linalg.norm(v)
    if abs(n - 1.0) > BOUNDARY_TOL:
        raise DomainError(f"|zeta| = {n!r} is not on the unit sphere")
    v = (v / n).copy()
    v.flags.writeable = False
    return BoundaryPoint(coords=v)


def basis_boundary_point(q: int, axis: int = 0) -> BoundaryPoint:
    e = np.zeros(q, dtype=complex)
    e[axis] = 1.0
    return boundary_point(e)


def _same_direction(u, v, tol=1e-12) -> bool:
    return bool(np.linalg.norm(np.asarray(u) - np.asarray(v)) <= tol)


# ---------------------------------------------------------------------------
# Kobayashi distance and horofunctions
# ---------------------------------------------------------------------------

def _kob_from_components(n_val: complex, m_z: float, m_w: float) -> float:
    """Distance from 1 - <z,w> and the two margins (stable near the sphere).

    Coincident points give the quotient 1 up to a few ulps; anything above
    1 - 1e-14 is collapsed to distance zero (resolution floor ~2e-7 of this
    path; close moderate pairs take the involution path instead).
    """
    d_quot = m_z * m_w / abs(n_val) ** 2
    if d_quot > 1.0 - 1e-14:
        return 0.0
    rho = np.sqrt(1.0 - d_quot)
    return float(np.log((1.0 + rho) ** 2 / d_quot))


def kob_dist(z: BallPoint, w: BallPoint) -> float:
    """Kobayashi distance, kob_dist(0, z) = log((1+|z|)/(1-|z|)).

    Point pairs sharing a boundary reference go through defect arithmetic
    (exact arbitrarily close to the sphere) unless the defect expansion of
    1 - <z,w> itself cancels, which only happens near the opposite pole
    -ref where raw coordinates are accurate; everything else evaluates the
    norm of the Mobius involution centred at z applied to w.
    """
    if z.q != w.q:
        raise DimensionMismatch(f"dimensions {z.q} != {w.q}")
    if (z.ref is not None and w.ref is not None
            and _same_direction(z.ref, w.ref)):
        tz = z.tail()
        tw = w.tail(z.ref)
        n_val = (z.delta + np.conj(w.delta) - z.delta * np.conj(w.delta)
                 - herm(tz, tw))
        scale = (abs(z.delta) + abs(w.delta) + abs(z.delta * w.delta)
                 + np.linalg.norm(tz) * np.linalg.norm(tw) + 1e-300)
        if abs(n_val) >= 1e-6 * scale:
            d = _kob_from_components(n_val, z.margin, w.margin)
            # d == 0 can mean "below this path's ~2e-7 resolution"; let the
            # involution resolve it when coordinates still can
            if d != 0.0 or min(z.margin, w.margin) < 1e-6:
                return d
    rho = float(np.sqrt(sq_norm(mobius_shift(z.coords, w.coords))))
    if rho < 0.95:
        return float(np.log1p(2.0 * rho / (1.0 - rho)))
    n_val = 1.0 - herm(z.coords, w.coords)
    return _kob_from_components(n_val, z.margin, w.margin)


def kob_dist_origin(z: BallPoint) -> float:
    n = z.norm()
    return float(np.log((1.0 + n) ** 2 / z.margin))


def kob_matrix(points_a, points_b) -> np.ndarray:
    """Pairwise distances between two lists of points sharing one reference.

    Vectorised version of the stable path of `kob_dist`; every point must
    carry the same `ref`.
    """
    ref = points_a[0].ref
    da = np.array([p.delta for p in points_a], dtype=complex)
    db = np.array([p.delta for p in points_b], dtype=complex)
    ta = np.stack([p.tail(ref) for p in points_a])
    tb = np.stack([p.tail(ref) for p in points_b])
    ma = np.array([p.margin for p in points_a])
    mb = np.array([p.margin for p in points_b])
    n_val = (da[:, None] + np.conj(db)[None, :]
             - da[:, None] * np.conj(db)[None, :]
             - np.einsum("ik,jk->ij", ta, np.conj(tb)))
    d_quot = np.minimum(ma[:, None] * mb[None, :] / np.abs(n_val) ** 2, 1.0)
    rho = np.sqrt(np.maximum(1.0 - d_quot, 0.0))
    out = np.log((1.0 + rho) ** 2 / d_quot)
    out[d_quot > 1.0 - 1e-14] = 0.0
    return out


def horofunction(z: BallPoint, zeta: BoundaryPoint) -> float:
    """log(|1 - <z, zeta>|^2 / (1 - |z|^2)); z in E_0(zeta, R) iff < log R."""
    if z.q != zeta.q:
        raise DimensionMismatch(f"dimensions {z.q} != {zeta.q}")
    if z.ref is not None and _same_direction(z.ref, zeta.coords):
        return float(np.log(abs(z.delta) ** 2 / z.margin))
    d = 1.0 - herm(z.coords, zeta.coords)
    return float(np.log(abs(d) ** 2 / z.margin))


def horofunction_limit(z: BallPoint, zeta: BoundaryPoint, s: float = 30.0) -> float:
    """The defining limit form lim_{w->zeta} [k(z,w) - k(0,w)], truncated at
    the axis point gamma(s).  Cross-check only; the closed form is exact."""
    w = geodesic_point(zeta, s)
    return kob_dist(z, w) - s


def horo_raw(z, zeta_coords, margin=None):
    """Vectorised horofunction on raw coordinate arrays (..., q)."""
    z = np.asarray(z, dtype=complex)
    if margin is None:
        margin = 1.0 - sq_norm(z)
    d = 1.0 - herm(z, zeta_coords)
    return np.log(np.abs(d) ** 2 / margin)


def dist_to_zeta(z: BallPoint, zeta: BoundaryPoint) -> float:
    """Euclidean distance |z - zeta|, stable for adapted points."""
    if z.ref is not None and _same_direction(z.ref, zeta.coords):
        return float(np.sqrt(abs(z.delta) ** 2 + sq_norm(z.tail())))
    return float(np.linalg.norm(z.coords - zeta.coords))


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Horosphere:
    """E_0(center, R) = {horofunction(., center) < log R}, pole at 0."""

    center: BoundaryPoint
    radius: float

    def __post_init__(self):
        if not self.radius > 0.0:
            raise DomainError("horosphere radius must be positive")


@dataclass(frozen=True)
class KoranyiRegion:
    """K(vertex, M) = {kob(0,z) + horofunction(z, vertex) < 2 log M}."""

    vertex: BoundaryPoint
    amplitude: float

    def __post_init__(self):
        if not self.amplitude > 1.0:
            raise DomainError("Koranyi amplitude must exceed 1")


@dataclass(frozen=True)
class GeodesicTube:
    """A(gamma, L): points within distance L of the ray from 0 to `target`."""

    target: BoundaryPoint
    width: float

    def __post_init__(self):
        if not self.width > 0.0:
            raise DomainError("tube width must be positive")


def horosphere_contains(z: BallPoint, sphere: Horosphere):
    """(inside, margin): margin = log R - horofunction, positive inside."""
    m = np.log(sphere.radius) - horofunction(z, sphere.center)
    return bool(m > 0.0), float(m)


def koranyi_functional(z: BallPoint, vertex: BoundaryPoint) -> float:
    return kob_dist_origin(z) + horofunction(z, vertex)


def koranyi_contains(z: BallPoint, region: KoranyiRegion):
    """(inside, margin): margin = 2 log M - [kob(0,z) + horofunction]."""
    m = 2.0 * np.log(region.amplitude) - koranyi_functional(z, region.vertex)
    return bool(m > 0.0), float(m)


def tube_contains(z: BallPoint, tube: GeodesicTube):
    d, _ = dist_to_geodesic(z, tube.target)
    m = tube.width - d
    return bool(m > 0.0), float(m)


# ---------------------------------------------------------------------------
# the radial geodesic
# ---------------------------------------------------------------------------

def _axis_point(zeta: BoundaryPoint, s: float) -> BallPoint:
    """Point of the complete axis geodesic through +-zeta at signed arclength s."""
    if abs(s) > 700.0:
        raise DomainError(f"axis parameter s = {s} exceeds float range")
    u = np.exp(-s)
    delta = 2.0 * u / (1.0 + u)
    margin = 4.0 * u / (1.0 + u) ** 2
    return boundary_adapted_point(zeta.coords, delta, margin=margin)


def geodesic_point(zeta: BoundaryPoint, s: float) -> BallPoint:
    """gamma(s) = ((e^s - 1)/(e^s + 1)) zeta; kob(0, gamma(s)) = s, s >= 0."""
    if s < 0.0:
        raise DomainError("geodesic parameter must be nonnegative")
    return _axis_point(zeta, s)


def dist_to_geodesic(z: BallPoint, zeta: BoundaryPoint,
                     tol: float = 1e-10, max_iter: int = 200):
    """inf_{s >= 0} kob(z, gamma(s)) with its argmin.

    Coarse unit-step bracketing followed by golden-section; the distance as
    a function of s is smooth and unimodal.
    """
    zq = with_reference(z, zeta) if z.ref is None else z

    def g(s):
        return kob_dist(zq, _axis_point(zeta, s))

    s_cap = max(4.0, 2.0 * kob_dist_origin(z) + 4.0)
    grid = np.arange(0.0, s_cap + 1.0, 1.0)
    vals = [g(s) for s in grid]
    i = int(np.argmin(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    if lo == hi:  # argmin at an edge of a length-1 grid
        hi = lo + 1.0

    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = g(c), g(d)
    it = 0
    while b - a > tol:
        it += 1
        if it > max_iter:
            raise NumericalError("geodesic distance search did not converge")
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = g(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = g(d)
    s_star = max(0.5 * (a + b), 0.0)
    return g(s_star), float(s_star)


# ---------------------------------------------------------------------------
# automorphisms
# ---------------------------------------------------------------------------

# Stage descriptors let structured automorphisms act on boundary-adapted
# points by exact recursions in (delta, tail, margin):
#   ("axial", zeta_coords, c)      z |-> -phi_{c zeta}(z), fixes +-zeta
#   ("unitary", V)                 z |-> V z
#   ("mobius", a_coords)           z |-> phi_a(z)
#   ("parabolic", zeta, b, t, R)   Heisenberg translation fixing zeta
#                                  (R rotates zeta to e_1 for Siegel coords)

@dataclass(frozen=True)
class Automorphism:
    """Ball automorphism in normal form z -> unitary @ phi_center(z)."""

    center: np.ndarray
    unitary: np.ndarray
    stages: tuple = ()
    label: str = ""

    @property
    def q(self) -> int:
        return self.center.shape[0]


def _aut(center, unitary, stages=(), label="") -> Automorphism:
    center = np.asarray(center, dtype=complex).copy()
    unitary = np.asarray(unitary, dtype=complex).copy()
    center.flags.writeable = False
    unitary.flags.writeable = False
    return Automorphism(center=center, unitary=unitary, stages=tuple(stages),
                        label=label)


def identity_automorphism(q: int) -> Automorphism:
    # phi_0 = -id, so the identity's unitary part is -I.
    return _aut(np.zeros(q, dtype=complex), -np.eye(q, dtype=complex),
                label="id")


def mobius_involution(a: BallPoint) -> Automorphism:
    """The involution exchanging a and 0 (phi_0 is the antipodal map)."""
    if 1.0 - a.norm() < BOUNDARY_GUARD:
        raise DomainError("involution center numerically on the sphere")
    return _aut(a.coords, np.eye(a.q, dtype=complex),
                stages=(("mobius", a.coords),), label="involution")


def unitary_automorphism(v) -> Automorphism:
    v = np.asarray(v, dtype=complex)
    q = v.shape[0]
    return _aut(np.zeros(q, dtype=complex), -v, stages=(("unitary", v),),
                label="unitary")


def hyperbolic_automorphism(zeta: BoundaryPoint, lam: float) -> Automorphism:
    """Automorphism fixing +-zeta with boundary dilation lam at zeta.

    It translates the axis geodesic by log(lam) away from zeta (toward
    -zeta, its attracting fixed point) and maps each horosphere E(zeta, R)
    onto E(zeta, lam R).
    """
    if not lam > 1.0:
        raise DomainError("hyperbolic automorphism needs dilation > 1")
    c = (lam - 1.0) / (lam + 1.0)
    q = zeta.q
    return _aut(c * zeta.coords, -np.eye(q, dtype=complex),
                stages=(("axial", zeta.coords, c),),
                label=f"hyperbolic(lam={lam:g})")


def axis_translation(zeta: BoundaryPoint, t: float) -> Automorphism:
    """Axial automorphism moving 0 to gamma(-t): horofunction shifts by +t."""
    if t == 0.0:
        return identity_automorphism(zeta.q)
    if t > 0.0:
        return hyperbolic_automorphism(zeta, float(np.exp(t)))
    c = np.tanh(t / 2.0)
    return _aut(c * zeta.coords, -np.eye(zeta.q, dtype=complex),
                stages=(("axial", zeta.coords, c),),
                label=f"axial(t={t:g})")


# --- Siegel half-space model, used for parabolic automorphisms ------------

def _cayley(z):
    z = np.asarray(z, dtype=complex)
    return np.concatenate([
        np.atleast_1d(1j * (1.0 + z[0]) / (1.0 - z[0])),
        z[1:] / (1.0 - z[0]),
    ])


def _inv_cayley(w):
    w = np.asarray(w, dtype=complex)
    return np.concatenate([
        np.atleast_1d((w[0] - 1j) / (w[0] + 1j)),
        2j * w[1:] / (w[0] + 1j),
    ])


def _heisenberg(w, b, t):
    w = np.asarray(w, dtype=complex)
    return np.concatenate([
        np.atleast_1d(w[0] + t + 2j * herm(w[1:], b) + 1j * sq_norm(b)),
        w[1:] + b,
    ])


def parabolic_automorphism(zeta: BoundaryPoint, b, t: float) -> Automorphism:
    """Heisenberg translation fixing only zeta (dilation 1 there).

    Parameters are the Siegel-model translation (b, t) in the frame where
    zeta sits at e_1; each horosphere E(zeta, R) is mapped onto itself.
    """
    q = zeta.q
    b = np.zeros(max(q - 1, 0), dtype=complex) if b is None \
        else as_vector(b, q - 1) if q > 1 else np.zeros(0, dtype=complex)
    t = float(t)
    rot = unitary_taking(zeta.coords, basis_boundary_point(q).coords)

    def action(z):
        return rot.conj().T @ _inv_cayley(_heisenberg(_cayley(rot @ z), b, t))

    def action_inv(z):
        return rot.conj().T @ _inv_cayley(_heisenberg(_cayley(rot @ z), -b, -t))

    center = action_inv(np.zeros(q, dtype=complex))
    unitary = _linear_part(lambda v: action(mobius_shift(center, v)), q)
    return _aut(center, unitary,
                stages=(("parabolic", zeta.coords, b, t, rot),),
                label=f"parabolic(|b|={np.linalg.norm(b):g}, t={t:g})")


def _linear_part(fn, q):
    """Matrix of a map known to be linear, sampled on the basis."""
    cols = []
    for i in range(q):
        e = np.zeros(q, dtype=complex)
        e[i] = 0.5
        cols.append(fn(e) / 0.5)
    return project_unitary(np.stack(cols, axis=1))


# --- applying automorphisms ------------------------------------------------

def apply_raw(g: Automorphism, z):
    """Action on raw coordinate arrays (..., q)."""
    out = mobius_shift(g.center, z)
    return np.einsum("ij,...j->...i", g.unitary, out)


def _margin_through(g: Automorphism, coords, margin):
    return float((1.0 - sq_norm(g.center)) * margin
                 / abs(1.0 - herm(coords, g.center)) ** 2)


def _stage_apply(stages, p: BallPoint) -> BallPoint | None:
    """Run a stage chain on an adapted point; None if a stage cannot keep
    the boundary-defect representation exact."""
    ref = p.ref
    delta = p.delta
    tail = p.tail()
    margin = p.margin
    for st in stages:
        kind = st[0]
        if kind == "axial":
            zeta_c, c = st[1], st[2]
            if _same_direction(zeta_c, ref, FIX_TOL):
                cc = c
            elif _same_direction(-zeta_c, ref, FIX_TOL):
                cc = -c
            else:
                return None
            den = (1.0 - cc) + cc * delta
            delta = (1.0 + cc) * delta / den
            tail = np.sqrt(1.0 - cc * cc) * tail / den
            margin = (1.0 - cc * cc) * margin / abs(den) ** 2
        elif kind == "unitary":
            v = st[1]
            new_ref = v @ ref
            new_ref = new_ref / np.linalg.norm(new_ref)
            tail = v @ tail
            ref = new_ref
        elif kind == "mobius":
            if sq_norm(st[1]) < 1e-32:  # phi_0 = -id
                ref = -ref
                tail = -tail
            else:
                return None
        elif kind == "parabolic":
            zeta_c, b, t, rot = st[1], st[2], st[3], st[4]
            if not _same_direction(zeta_c, ref, FIX_TOL):
                return None
            tail_e1 = rot @ tail
            w_tan = tail_e1[1:] / delta
            w1 = 1j * (2.0 - delta) / delta
            w1n = w1 + t + 2j * herm(w_tan, b) + 1j * sq_norm(b)
            delta_new = 2j / (w1n + 1j)
            margin = margin * abs(delta_new / delta) ** 2
            tail_e1 = np.concatenate([np.zeros(1, dtype=complex),
                                      (w_tan + b) * delta_new])
            tail = rot.conj().T @ tail_e1
            delta = delta_new
        else:
            return None
    return boundary_adapted_point(ref, delta, tail=tail, margin=margin)


def apply(g: Automorphism, p: BallPoint) -> BallPoint:
    """Apply an automorphism to a point, preserving boundary-adapted data
    whenever the stage chain supports it."""
    if p.q != g.q:
        raise DimensionMismatch(f"dimensions {p.q} != {g.q}")
    if p.ref is not None and g.stages:
        out = _stage_apply(g.stages, p)
        if out is not None:
            return out
    coords = apply_raw(g, p.coords)
    coords.flags.writeable = False
    return BallPoint(coords=coords, margin=_margin_through(g, p.coords, p.margin))


def inverse(g: Automorphism) -> Automorphism:
    stages = tuple(_invert_stage(st) for st in reversed(g.stages))
    return _aut(g.unitary @ g.center, g.unitary.conj().T, stages=stages,
                label=f"inv({g.label})" if g.label else "")


def _invert_stage(st):
    kind = st[0]
    if kind == "axial":
        return ("axial", st[1], -st[2])
    if kind == "unitary":
        return ("unitary", st[1].conj().T)
    if kind == "mobius":
        return st
    if kind == "parabolic":
        return ("parabolic", st[1], -st[2], -st[3], st[4])
    raise DomainError(f"unknown stage {kind!r}")


def compose(g2: Automorphism, g1: Automorphism) -> Automorphism:
    """Normal form of z -> g2(g1(z))."""
    if g1.q != g2.q:
        raise DimensionMismatch("cannot compose automorphisms of different q")
    q = g1.q
    center = mobius_shift(g1.center, g1.unitary.conj().T @ g2.center)
    unitary = _linear_part(
        lambda v: apply_raw(g2, apply_raw(g1, mobius_shift(center, v))), q)
    return _aut(center, unitary, stages=g1.stages + g2.stages,
                label=f"{g2.label}*{g1.label}" if g1.label or g2.label else "")


def boundary_image(g: Automorphism, zeta: BoundaryPoint) -> np.ndarray:
    """Continuous extension of g to the sphere (the formulas are rational
    with nonvanishing denominator on the closed ball)."""
    return apply_raw(g, zeta.coords)


def fixes_boundary_point(g: Automorphism, zeta: BoundaryPoint,
                         tol: float = FIX_TOL) -> bool:
    return bool(np.linalg.norm(boundary_image(g, zeta) - zeta.coords) <= tol)


def automorphism_dilation(g: Automorphism, zeta: BoundaryPoint) -> float:
    """Exact boundary dilation of g at a fixed boundary point.

    For g = U phi_a,   lim (1-|g z|)/(1-|z|) = (1-|a|^2)/|1-<zeta,a>|^2,
    i.e. exp(-horofunction(a, zeta)); independent of the unitary part.
    """
    if not fixes_boundary_point(g, zeta, tol=1e-8):
        raise DomainError("dilation requested at a non-fixed boundary point")
    return float((1.0 - sq_norm(g.center))
                 / abs(1.0 - herm(zeta.coords, g.center)) ** 2)


def normalizing_automorphism(a: BallPoint, zeta: BoundaryPoint):
    """Automorphism g with g(a) = 0 and g(zeta) = zeta, plus its dilation.

    Built as axial-hyperbolic composed with a Heisenberg parabolic: the
    parabolic slides a along its horosphere onto the axis through zeta, the
    hyperbolic then pulls that axis point to the origin.  The dilation at
    zeta is exp(-horofunction(a, zeta)) exactly.
    """
    q = zeta.q
    if a.q != q:
        raise DimensionMismatch(f"dimensions {a.q} != {q}")
    rot = unitary_taking(zeta.coords, basis_boundary_point(q).coords)
    w = _cayley(rot @ a.coords)
    b = -w[1:]
    t = -float(w[0].real)
    if np.linalg.norm(b) < 1e-15 and abs(t) < 1e-15:
        parab = identity_automorphism(q)
    else:
        parab = parabolic_automorphism(zeta, b, t)
    mu = float(np.exp(-horofunction(a, zeta)))
    r = (mu - 1.0) / (mu + 1.0)
    if abs(r) < 1e-16:
        hyper = identity_automorphism(q)
    else:
        hyper = _aut(r * zeta.coords, -np.eye(q, dtype=complex),
                     stages=(("axial", zeta.coords, r),),
                     label="axial")
    g = compose(hyper, parab)
    resid = np.linalg.norm(apply_raw(g, a.coords))
    if resid > 1e-10:
        raise NumericalError(
            f"normalizing automorphism residual |g(a)| = {resid:.3e}")
    return g, mu
