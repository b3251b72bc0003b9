"""Orbit comparison, region equivalence, tube covering, pre-model checks.

Report convention: every check renders as one line
    CHECK <name> PASS|FAIL margin=<float>
with margin > 0 meaning the check passed with that much room.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import catalog as cat
from . import geometry as geo
from .errors import DomainError, InvariantViolation, NumericalError
from .geometry import BoundaryPoint
from .orbits import OrbitSegment, orbit_diagnostics
from .sampling import tube_samples


def fmt(x: float) -> str:
    return f"{x:.15g}"


@dataclass(frozen=True)
class CheckLine:
    name: str
    passed: bool
    margin: float

    def render(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"CHECK {self.name} {status} margin={fmt(self.margin)}"


def render_report(lines) -> str:
    return "\n".join(line.render() for line in lines)


# ---------------------------------------------------------------------------
# orbit comparison (finite-distance property)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrbitComparison:
    indices: np.ndarray
    direct: np.ndarray             # kob(x_n, y_n)
    shifted: np.ndarray            # inf_m kob(x_n, y_m)
    plateau: bool
    c_bound: float                 # max of the shifted profile
    eps_plateau: float


def _with_refs(seg: OrbitSegment) -> OrbitSegment:
    """Ensure every point carries the orbit's boundary reference (points
    from coordinate-only code paths may lack one)."""
    if all(p.ref is not None for p in seg.points):
        return seg
    pts = tuple(p if p.ref is not None else geo.with_reference(p, seg.zeta)
                for p in seg.points)
    return OrbitSegment(points=pts, zeta=seg.zeta, lam=seg.lam,
                        map_label=seg.map_label, base_index=seg.base_index,
                        chain_tol=seg.chain_tol)


def _require_same_target(xi: OrbitSegment, eta: OrbitSegment):
    if np.linalg.norm(xi.zeta.coords - eta.zeta.coords) > 1e-9:
        raise DomainError(
            "orbits converge to different boundary points: "
            f"{np.round(xi.zeta.coords, 6)} vs {np.round(eta.zeta.coords, 6)}")
    for seg in (xi, eta):
        _, _, dz = orbit_diagnostics(seg)
        if not (dz[-1] < 0.2 and dz[-1] <= dz[0] + 1e-12):
            raise DomainError(
                f"orbit {seg.map_label!r} shows no convergence toward its "
                f"boundary point (tail distance {dz[-1]:.3g})")


def orbit_distance_profile(xi: OrbitSegment, eta: OrbitSegment,
                           eps_plateau: float = 1e-2) -> OrbitComparison:
    """Direct and shifted distance profiles over the common index window.

    The shifted profile inf_m kob(x_n, y_m) runs over all available indices
    of eta; it is nondecreasing in n and bounded by the direct profile.
    The plateau verdict holds when the last quarter of the direct profile
    moves by less than eps_plateau.
    """
    xi, eta = _with_refs(xi), _with_refs(eta)
    _require_same_target(xi, eta)
    lo = max(xi.base_index, eta.base_index)
    hi = min(xi.base_index + len(xi) - 1, eta.base_index + len(eta) - 1)
    if hi - lo < 3:
        raise DomainError("orbits share too short an index window")
    idx = np.arange(lo, hi + 1)
    dmat = geo.kob_matrix([xi.point(n) for n in idx], list(eta.points))
    direct = np.array([dmat[i, n - eta.base_index]
                       for i, n in enumerate(idx)])
    shifted = dmat.min(axis=1)
    quarter = max(len(direct) // 4, 2)
    window = direct[-quarter:]
    plateau = bool(window.max() - window.min() < eps_plateau)
    return OrbitComparison(indices=idx, direct=direct, shifted=shifted,
                           plateau=plateau, c_bound=float(shifted.max()),
                           eps_plateau=eps_plateau)


@dataclass(frozen=True)
class ShiftResult:
    alpha: int
    c_star: float                  # sup_n kob(x_n, y_{n+alpha})
    certified_bound: float         # c_star + |alpha| * step tail of eta
    direct_max: float


def shift_recovery(xi: OrbitSegment, eta: OrbitSegment,
                   c: float | None = None) -> ShiftResult:
    """Recover an index shift alpha with kob(x_n, y_{n+alpha}) < C for all n
    in the window, certifying direct <= C + |alpha| * step(eta)."""
    xi, eta = _with_refs(xi), _with_refs(eta)
    comp = orbit_distance_profile(xi, eta)
    if c is None:
        c = comp.c_bound + 1e-12
    idx = comp.indices
    eta_steps, _, _ = orbit_diagnostics(eta)
    sigma = float(eta_steps.max()) if len(eta_steps) else 0.0
    span = len(eta) - 1
    best = None
    for alpha in range(-span, span + 1):
        ns = [n for n in idx
              if eta.base_index <= n + alpha < eta.base_index + len(eta)]
        if len(ns) < max(len(idx) // 2, 2):
            continue
        sup = max(geo.kob_dist(xi.point(n), eta.point(n + alpha)) for n in ns)
        if sup < c + 1e-9 and (best is None or sup < best[1]
                               or (sup == best[1] and abs(alpha) < abs(best[0]))):
            best = (alpha, sup)
    if best is None:
        raise NumericalError(
            f"no index shift keeps the orbits within C = {c:.6g}; the "
            "shifted-profile bound does not transfer, check the inputs")
    alpha, c_star = best
    certified = c_star + abs(alpha) * sigma
    direct_max = float(comp.direct.max())
    if direct_max > certified + 1e-9:
        raise InvariantViolation(
            f"direct profile max {direct_max:.6g} exceeds certified bound "
            f"{certified:.6g}")
    return ShiftResult(alpha=alpha, c_star=float(c_star),
                       certified_bound=float(certified),
                       direct_max=direct_max)


# ---------------------------------------------------------------------------
# region equivalence and tube covering
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegionReport:
    tube_functional_max: float     # max Koranyi functional over tube samples
    violations: int                # samples with functional > 2L + 1e-9
    n_samples: int
    tail_start: int | None         # first index with the sequence in K(zeta,M)
    l_hat: float | None            # empirical tube width containing the tail
    lines: tuple


def region_equivalence_check(seq_points, zeta: BoundaryPoint, width: float,
                             amplitude: float,
                             s_values=None) -> RegionReport:
    """Forward implication of the region equivalence, plus an empirical
    converse constant.

    (a) every sample of A(gamma, width) has Koranyi functional <= 2*width
        (+1e-9 slack); a violation is an invariant failure;
    (b) for a sequence eventually inside K(zeta, amplitude), reports the
        empirical width containing its tail (the converse direction's
        constant is not computed analytically; see README).
    """
    samples = tube_samples(zeta, width, s_values=s_values)
    functional = np.array([geo.koranyi_functional(p, zeta) for p in samples])
    bound = 2.0 * width + 1e-9
    violations = int(np.sum(functional > bound))
    lines = [CheckLine("tube_in_koranyi", violations == 0,
                       float(bound - functional.max()))]
    if violations:
        raise InvariantViolation(
            f"{violations} tube samples violate the Koranyi functional "
            f"bound 2L: worst {functional.max():.9g} vs {2 * width:.9g}")
    tail_start = None
    l_hat = None
    if seq_points:
        region = geo.KoranyiRegion(vertex=zeta, amplitude=amplitude)
        inside = [geo.koranyi_contains(p, region)[0] for p in seq_points]
        for i in range(len(inside)):
            if all(inside[i:]):
                tail_start = i
                break
        if tail_start is not None:
            tail = seq_points[tail_start:]
            l_hat = max(geo.dist_to_geodesic(p, zeta)[0] for p in tail)
            lines.append(CheckLine("sequence_tail_in_tube", True, float(l_hat)))
    return RegionReport(tube_functional_max=float(functional.max()),
                        violations=violations, n_samples=len(samples),
                        tail_start=tail_start, l_hat=l_hat,
                        lines=tuple(lines))


@dataclass(frozen=True)
class TubeCoveringReport:
    r_hat: float                   # empirical covering radius
    c_hat: float                   # max distance of orbit points to gamma
    sigma_hat: float               # orbit step tail
    bound: float                   # width + 3*c_hat + sigma_hat
    ok: bool
    n_samples: int


def tube_covering_check(eta: OrbitSegment, zeta: BoundaryPoint, width: float,
                        s_values=None, tol: float = 1e-6
                        ) -> TubeCoveringReport:
    """Checks that the tube A(gamma, width) lies within a bounded Kobayashi
    distance of the orbit: R_hat <= width + 3*C_hat + sigma_hat (+tol)."""
    eta = _with_refs(eta)
    if width > 0.0:
        samples = tube_samples(zeta, width, s_values=s_values)
    else:
        if s_values is None:
            s_values = np.arange(1.0, 30.001, 1.0)
        samples = [geo.geodesic_point(zeta, float(s)) for s in s_values]
    dmat = geo.kob_matrix(samples, list(eta.points))
    r_hat = float(dmat.min(axis=1).max())
    c_hat = max(geo.dist_to_geodesic(p, zeta)[0] for p in eta.points)
    steps, _, _ = orbit_diagnostics(eta)
    sigma = float(steps.max()) if len(steps) else 0.0
    bound = width + 3.0 * c_hat + sigma + tol
    ok = r_hat <= bound
    if not ok:
        raise InvariantViolation(
            f"tube covering radius {r_hat:.6g} exceeds bound {bound:.6g}")
    return TubeCoveringReport(r_hat=r_hat, c_hat=float(c_hat),
                              sigma_hat=sigma, bound=float(bound), ok=ok,
                              n_samples=len(samples))


# ---------------------------------------------------------------------------
# bounded-step intertwining triples
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PreModel:
    """Triple (base dimension, intertwiner, base automorphism).

    `ell` maps B^k holomorphically into B^q, `tau` is a hyperbolic
    automorphism of B^k with repelling boundary point `repelling`, and the
    triple claims f o ell = ell o tau with backward tau-orbits carried to
    the target boundary point.
    """

    base_dim: int
    ell: object                    # callable (..., k) -> (..., q)
    tau: geo.Automorphism
    repelling: BoundaryPoint
    label: str = ""


@dataclass(frozen=True)
class PremodelReport:
    lines: tuple
    passed: bool

    def render(self) -> str:
        return render_report(self.lines)


def premodel_validate(f: cat.SelfMap, pm: PreModel, zeta: BoundaryPoint,
                      lam: float | None = None, n_samples: int = 1000,
                      rng=None,
                      intertwine_tol: float = 1e-8,
                      dilation_tol: float = 1e-4) -> PremodelReport:
    """Four checks: (i) the square commutes on samples, (ii) the base
    dilation matches the dilation of f at zeta, (iii) backward base orbits
    are carried to zeta, (iv) the intertwiner has K-limit zeta at the
    repelling point."""
    if rng is None:
        rng = np.random.default_rng(7)
    if lam is None:
        lam = cat.estimate_dilation(f, zeta).lam_hat
    lines = []

    from .sampling import sample_ball
    w = sample_ball(rng, pm.base_dim, n_samples, r_max=0.95)
    lhs = cat.evaluate(f, np.asarray(pm.ell(w)))
    rhs = np.asarray(pm.ell(geo.apply_raw(pm.tau, w)))
    resid = float(np.max(np.sqrt(geo.sq_norm(lhs - rhs))))
    lines.append(CheckLine("intertwining", resid < intertwine_tol,
                           intertwine_tol - resid))

    lam_tau = geo.automorphism_dilation(pm.tau, pm.repelling)
    lines.append(CheckLine("base_dilation", abs(lam_tau - lam) < dilation_tol,
                           dilation_tol - abs(lam_tau - lam)))

    tau_inv = geo.inverse(pm.tau)
    x = np.full(pm.base_dim, 0.25 + 0.1j, dtype=complex)
    res_seq = []
    for _ in range(30):
        x = geo.apply_raw(tau_inv, x)
        res_seq.append(float(np.linalg.norm(
            np.asarray(pm.ell(x[None, :]))[0] - zeta.coords)))
    backward_ok = res_seq[-1] < 1e-5 and res_seq[-1] < res_seq[0]
    lines.append(CheckLine("backward_orbit_to_zeta", backward_ok,
                           1e-5 - res_seq[-1]))

    klim_ok = True
    worst = 0.0
    for seq in cat.koranyi_probes(pm.repelling, np.arange(4.0, 20.01, 2.0)):
        res = [float(np.linalg.norm(
            np.asarray(pm.ell(p.coords[None, :]))[0] - zeta.coords))
            for p in seq]
        worst = max(worst, res[-1])
        if res[-1] > 1e-5 or res[-1] > res[0]:
            klim_ok = False
    lines.append(CheckLine("intertwiner_k_limit", klim_ok, 1e-5 - worst))

    return PremodelReport(lines=tuple(lines),
                          passed=all(l.passed for l in lines))


def identity_premodel(f: cat.SelfMap, zeta: BoundaryPoint,
                      lam: float) -> PreModel:
    """(B^q, id, f) for f itself an automorphism: the trivial valid triple."""
    if f.kind != "ball_automorphism":
        raise DomainError("identity premodel needs an automorphism map")
    return PreModel(base_dim=f.q, ell=lambda w: w, tau=f.params[0],
                    repelling=zeta, label="identity")


def embedded_disc_premodel(phi_aut: geo.Automorphism, q: int,
                           repelling: BoundaryPoint) -> PreModel:
    """ell(w) = (w, 0, ..., 0) with a disc automorphism base."""
    def ell(w):
        w = np.asarray(w, dtype=complex)
        pad = np.zeros(w.shape[:-1] + (q - 1,), dtype=complex)
        return np.concatenate([w, pad], axis=-1)

    return PreModel(base_dim=1, ell=ell, tau=phi_aut, repelling=repelling,
                    label="embedded-disc")
