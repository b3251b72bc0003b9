"""Backward orbits against a boundary repelling fixed point.

Two independent builders:

* the anchor construction: forward-iterate the radial anchor points r_k
  until they first leave the closed unit horosphere, then read the stored
  iterates backward (an exact backward chain of f);
* a damped-Newton preimage march, used as the cross-check orbit.

All deep work runs on boundary-adapted points (see geometry), so anchors
like r_40 for dilation 3 -- whose raw coordinates round to the sphere --
stay exactly representable.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from . import catalog as cat
from . import geometry as geo
from .errors import DomainError, NumericalError
from .geometry import BallPoint, BoundaryPoint


@dataclass(frozen=True)
class StoppingRecord:
    k: int
    n: int                      # first index with f^n(r_k) outside closed E_0
    exit_point: BallPoint
    exit_margin: float          # horofunction of the exit point (> 0)
    capped: bool


@dataclass(frozen=True)
class OrbitSegment:
    """Finite backward orbit: f(points[j+1]) = points[j] (+ base_index for
    bilateral extensions; index n = base_index + j, larger = deeper)."""

    points: tuple
    zeta: BoundaryPoint
    lam: float
    map_label: str = ""
    base_index: int = 0
    chain_tol: float = 0.0

    def __len__(self):
        return len(self.points)

    @property
    def indices(self):
        return range(self.base_index, self.base_index + len(self.points))

    def point(self, n: int) -> BallPoint:
        return self.points[n - self.base_index]


@dataclass(frozen=True)
class OrbitParams:
    k_min: int = 1
    k_max: int = 40
    n_max: int = 100000
    eps_sigma: float = 1e-3
    rho_cluster: float = 0.1
    tol_cluster: float = 1e-6
    dist_depth: int = 25
    dist_target: float = 1e-4
    mode: str = "single-tail"

    def __post_init__(self):
        if self.k_min > self.k_max:
            raise DomainError("k_min must not exceed k_max")
        if min(self.eps_sigma, self.rho_cluster, self.tol_cluster,
               self.dist_target) <= 0.0:
            raise DomainError("orbit tolerances must be positive")
        if self.mode not in ("single-tail", "cluster"):
            raise DomainError(f"unknown orbit mode {self.mode!r}")


@dataclass(frozen=True)
class BackwardOrbitResult:
    orbit: OrbitSegment
    steps: np.ndarray              # d_j = kob(z_j, z_{j+1})
    sigma_hat: float               # tail step
    horos: np.ndarray
    dist_zeta: np.ndarray
    mode: str
    accepted: bool
    report: tuple = ()


# ---------------------------------------------------------------------------
# anchors and stopping times
# ---------------------------------------------------------------------------

def radial_anchor(zeta: BoundaryPoint, lam: float, k: int) -> BallPoint:
    """r_k = ((lam^k - 1)/(lam^k + 1)) zeta, carried in defect form so that
    horofunction(r_k, zeta) = -k log(lam) holds to machine precision."""
    if not lam > 1.0:
        raise DomainError("anchors need dilation > 1")
    if k < 0:
        raise DomainError("anchor index must be nonnegative")
    if k * np.log(lam) > 700.0:
        raise DomainError("anchor underflows double precision: k log(lam) > 700")
    lk = lam ** k
    return geo.boundary_adapted_point(zeta.coords, 2.0 / (lk + 1.0),
                                      margin=4.0 * lk / (lk + 1.0) ** 2)


def _forward_until_exit(f: cat.SelfMap, start: BallPoint,
                        zeta: BoundaryPoint, n_max: int):
    """Iterates [start, f(start), ...] up to the first point with positive
    horofunction (strict exit from the closed unit horosphere)."""
    pts = [start]
    p = start
    for n in range(n_max):
        h = geo.horofunction(p, zeta)
        if h > geo.HOROSPHERE_BAND:
            return pts, n, False
        p = cat.step_point(f, p)
        pts.append(p)
    return pts, n_max, True


def stopping_time(f: cat.SelfMap, r_k: BallPoint, zeta: BoundaryPoint,
                  n_max: int = 100000, k: int | None = None) -> StoppingRecord:
    """First n with f^n(r_k) outside the closed horosphere E_0(zeta, 1).

    Exit is strict: horofunction values within 1e-13 of zero count as
    inside, so automorphism chains stop at exactly n = k + 1.
    """
    pts, n, capped = _forward_until_exit(f, r_k, zeta, n_max)
    exit_pt = pts[n] if not capped else pts[-1]
    return StoppingRecord(k=k if k is not None else -1, n=n,
                          exit_point=exit_pt,
                          exit_margin=float(geo.horofunction(exit_pt, zeta)),
                          capped=capped)


def harvest_chain(f: cat.SelfMap, r_k: BallPoint, record: StoppingRecord,
                  zeta: BoundaryPoint, lam: float) -> OrbitSegment:
    """The backward chain z_j = f^{n(k)-j}(r_k), j = 0..n(k).

    Points are the stored forward iterates, so re-evaluating f on z_{j+1}
    reproduces z_j bit for bit; the chain tolerance is exactly zero.
    """
    if record.capped:
        raise DomainError("cannot harvest a capped stopping record")
    pts, n, capped = _forward_until_exit(f, r_k, zeta, record.n + 1)
    if capped or n != record.n:
        raise NumericalError("stopping record does not reproduce")
    chain = tuple(reversed(pts[: n + 1]))
    return OrbitSegment(points=chain, zeta=zeta, lam=lam,
                        map_label=f.label, chain_tol=0.0)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def orbit_diagnostics(seg: OrbitSegment):
    pts = seg.points
    steps = np.array([geo.kob_dist(pts[j], pts[j + 1])
                      for j in range(len(pts) - 1)])
    horos = np.array([geo.horofunction(p, seg.zeta) for p in pts])
    dz = np.array([geo.dist_to_zeta(p, seg.zeta) for p in pts])
    return steps, horos, dz


def verify_backward(seg: OrbitSegment, f: cat.SelfMap) -> float:
    """Max Euclidean residual |f(z_{j+1}) - z_j| over the chain."""
    worst = 0.0
    for j in range(len(seg.points) - 1):
        img = cat.step_point(f, seg.points[j + 1])
        worst = max(worst, float(np.linalg.norm(img.coords
                                                - seg.points[j].coords)))
    return worst


def analyze_orbit(seg: OrbitSegment, lam: float, params: OrbitParams,
                  mode: str) -> BackwardOrbitResult:
    steps, horos, dz = orbit_diagnostics(seg)
    report = []
    ok = True
    if len(steps) == 0:
        return BackwardOrbitResult(seg, steps, float("nan"), horos, dz, mode,
                                   False, ("empty chain",))
    if np.any(np.diff(steps) < -1e-12):
        ok = False
        report.append("step profile not monotone")
    sigma = float(steps[-1])
    if abs(sigma - np.log(lam)) > params.eps_sigma:
        ok = False
        report.append(f"step tail {sigma:.6g} vs log lam {np.log(lam):.6g}")
    if np.any(np.diff(horos) > 1e-12):
        ok = False
        report.append("horofunction not decreasing with depth")
    depth = min(params.dist_depth, len(dz) - 1)
    if dz[depth] > params.dist_target:
        ok = False
        report.append(
            f"distance to zeta at depth {depth} is "
            f"{dz[depth]:.3g} (target {params.dist_target:g})")
    return BackwardOrbitResult(orbit=seg, steps=steps, sigma_hat=sigma,
                               horos=horos, dist_zeta=dz, mode=mode,
                               accepted=ok, report=tuple(report))


# ---------------------------------------------------------------------------
# the construction
# ---------------------------------------------------------------------------

def construct_backward_orbit(f: cat.SelfMap, zeta: BoundaryPoint, lam: float,
                             params: OrbitParams | None = None
                             ) -> BackwardOrbitResult:
    """Backward orbit with step -> log(lam) converging to zeta.

    single-tail mode returns the longest anchor chain whose diagnostics
    pass; cluster mode mimics the depthwise limit extraction: for each
    depth j it clusters the candidates f^{n(k)-j}(r_k) over k in the
    Kobayashi metric and takes the largest cluster's medoid, falling back
    to single-tail when the medoid chain is not backward within tolerance.
    """
    if params is None:
        params = OrbitParams()
    if not lam > 1.0:
        raise DomainError("construction needs dilation > 1")

    chains: dict[int, OrbitSegment] = {}
    per_k = []
    for k in range(params.k_min, params.k_max + 1):
        r_k = radial_anchor(zeta, lam, k)
        rec = stopping_time(f, r_k, zeta, params.n_max, k=k)
        if rec.capped:
            per_k.append((k, "capped"))
            continue
        if rec.n <= k:
            per_k.append((k, f"stopping time {rec.n} <= k"))
            continue
        chains[k] = harvest_chain(f, r_k, rec, zeta, lam)
        per_k.append((k, f"n(k)={rec.n}"))

    if not chains:
        raise NumericalError(
            "no anchor chain could be harvested; per-k report: "
            + "; ".join(f"k={k}: {msg}" for k, msg in per_k))

    if params.mode == "cluster":
        result = _cluster_orbit(chains, zeta, lam, params, f)
        if result is not None:
            return result
        per_k.append((-1, "cluster residual too large; fell back to single-tail"))

    best = None
    for k in sorted(chains):
        res = analyze_orbit(chains[k], lam, params, "single-tail")
        if res.accepted and (best is None
                             or len(res.orbit) >= len(best.orbit)):
            best = res
    if best is None:
        deepest = chains[max(chains)]
        res = analyze_orbit(deepest, lam, params, "single-tail")
        raise NumericalError(
            "no chain passed the orbit diagnostics; deepest chain report: "
            + "; ".join(res.report)
            + " | per-k: " + "; ".join(f"k={k}: {m}" for k, m in per_k))
    return BackwardOrbitResult(orbit=best.orbit, steps=best.steps,
                               sigma_hat=best.sigma_hat, horos=best.horos,
                               dist_zeta=best.dist_zeta, mode=best.mode,
                               accepted=True,
                               report=tuple(f"k={k}: {m}" for k, m in per_k))


def _cluster_orbit(chains, zeta, lam, params, f):
    k_all = sorted(chains)
    depth_max = min(len(chains[k]) - 1 for k in k_all[-5:])
    medoids = []
    for j in range(depth_max + 1):
        cands = [chains[k].points[j] for k in k_all
                 if k >= j and len(chains[k]) > j]
        if len(cands) < 2:
            return None
        clusters: list[list[int]] = []
        for i, p in enumerate(cands):
            for cl in clusters:
                if geo.kob_dist(p, cands[cl[0]]) < params.rho_cluster:
                    cl.append(i)
                    break
            else:
                clusters.append([i])
        big = max(clusters, key=len)
        dmat = geo.kob_matrix([cands[i] for i in big],
                              [cands[i] for i in big])
        medoids.append(cands[big[int(np.argmin(dmat.sum(axis=1)))]])
    for j in range(1, len(medoids)):
        img = cat.step_point(f, medoids[j])
        if np.linalg.norm(img.coords - medoids[j - 1].coords) > params.tol_cluster:
            return None
    seg = OrbitSegment(points=tuple(medoids), zeta=zeta, lam=lam,
                       map_label=f.label, chain_tol=params.tol_cluster)
    res = analyze_orbit(seg, lam, params, "cluster")
    return res if res.accepted else None


# ---------------------------------------------------------------------------
# Newton preimages
# ---------------------------------------------------------------------------

def newton_preimage(f: cat.SelfMap, target: BallPoint, seed: BallPoint,
                    tol: float = 1e-12, max_iter: int = 100) -> BallPoint:
    """Solve f(z) = target by damped Newton (complex q x q solve).

    Iterates are retracted to radius 1 - 1e-12; on stall a coarse polar
    grid reseeds the iteration.  With boundary-adapted targets the solve
    runs in defect coordinates, so deep preimages keep relative accuracy.
    """
    out = _newton_adapted(f, target, seed, tol, max_iter)
    if out is not None:
        return out
    out = _newton_coords(f, target.coords, seed.coords, tol, max_iter)
    if out is None:
        for cand in _grid_seeds(f.q):
            out = _newton_coords(f, target.coords, cand, tol, max_iter)
            if out is not None:
                break
    if out is None:
        raise NumericalError("no preimage found near the seed")
    return geo.ball_point(out)


def _newton_coords(f, target, z0, tol, max_iter):
    z = np.asarray(z0, dtype=complex).copy()
    res = cat.evaluate(f, z) - target
    for _ in range(max_iter):
        if np.linalg.norm(res) < tol:
            n = np.linalg.norm(z)
            return z if 1.0 - n >= geo.BOUNDARY_GUARD else None
        try:
            step = np.linalg.solve(cat.jacobian(f, z), -res)
        except np.linalg.LinAlgError:
            return None
        scale = 1.0
        for _ in range(40):
            z_new = z + scale * step
            n = np.linalg.norm(z_new)
            if n > 1.0 - 1e-12:
                z_new = z_new * ((1.0 - 1e-12) / n)
            res_new = cat.evaluate(f, z_new) - target
            if np.linalg.norm(res_new) < np.linalg.norm(res):
                z, res = z_new, res_new
                break
            scale *= 0.5
        else:
            return None
    return None


def _newton_adapted(f, target: BallPoint, seed: BallPoint, tol, max_iter):
    """Newton in defect coordinates w = (delta, tail): exact deep residuals."""
    if target.ref is None:
        return None
    ref = target.ref
    zeta = geo.BoundaryPoint(ref)
    probe = seed if seed.ref is not None else geo.with_reference(seed, zeta)
    if cat.adapted_step(f, probe) is None:
        return None
    scale = abs(target.delta) + float(np.linalg.norm(target.tail())) + 1e-300

    def split(p):
        return p.delta, p.tail()

    sign = np.ones(f.q)
    sign[0] = -1.0  # d(delta)/d(z_1) = -1 in the rotated frame

    rot = geo.unitary_taking(geo.basis_boundary_point(f.q).coords, ref)
    cur = probe
    for _ in range(max_iter):
        img = cat.adapted_step(f, cur)
        if img is None:
            return None
        rd = img.delta - target.delta
        rt = img.tail() - target.tail()
        resid = np.concatenate([[rd], (rot.conj().T @ rt)[1:]])
        if np.linalg.norm(resid) < tol * scale:
            return cur
        jz = cat.jacobian(f, cur.coords)
        jw = (sign[:, None] * (rot.conj().T @ jz @ rot)) * sign[None, :]
        try:
            step = np.linalg.solve(jw, -resid)
        except np.linalg.LinAlgError:
            return None
        alpha = 1.0
        base = np.linalg.norm(resid)
        for _ in range(40):
            new_delta = cur.delta + alpha * step[0]
            new_tail = cur.tail() + rot @ np.concatenate(
                [[0.0], alpha * step[1:]])
            try:
                cand = geo.boundary_adapted_point(ref, new_delta, tail=new_tail)
            except DomainError:
                alpha *= 0.5
                continue
            img2 = cat.adapted_step(f, cand)
            if img2 is None:
                return None
            rd2 = img2.delta - target.delta
            rt2 = img2.tail() - target.tail()
            r2 = np.concatenate([[rd2], (rot.conj().T @ rt2)[1:]])
            if np.linalg.norm(r2) < base:
                cur = cand
                break
            alpha *= 0.5
        else:
            return None
    return None


def _grid_seeds(q: int):
    radii = (0.15, 0.45, 0.75, 0.9)
    angles = np.arange(8) * (np.pi / 4.0)
    if q == 1:
        return [np.array([r * np.exp(1j * t)], dtype=complex)
                for r in radii for t in angles]
    seeds = []
    for r in radii:
        for t in angles[::2]:
            for t2 in angles[::2]:
                v = np.zeros(q, dtype=complex)
                v[0] = r * np.exp(1j * t) * 0.8
                v[1] = r * np.exp(1j * t2) * 0.5
                seeds.append(v)
    return seeds


def backward_orbit_via_preimages(f: cat.SelfMap, z0: BallPoint,
                                 zeta: BoundaryPoint, n_steps: int,
                                 lam_hint: float | None = None,
                                 rho_branch: float = 0.05,
                                 params: OrbitParams | None = None
                                 ) -> BackwardOrbitResult:
    """Backward orbit by repeated preimage solving with branch selection.

    Among candidate preimages the branch minimising
        kob(candidate, current) + max(horofunction(candidate), 0)
    is taken: the branch staying inside the unit horosphere and moving
    toward zeta.  Two candidates scoring within `rho_branch` of each other
    is an ambiguity error listing both.
    """
    if params is None:
        params = OrbitParams()
    cur = z0 if z0.ref is not None else geo.with_reference(z0, zeta)
    pts = [cur]
    lam_guess = lam_hint if lam_hint is not None else 3.0
    for step_idx in range(n_steps):
        cands = []
        if cur.ref is not None and cat.adapted_step(f, cur) is not None:
            try:
                seed = geo.boundary_adapted_point(
                    cur.ref, cur.delta / lam_guess, tail=cur.tail())
                cands.append(newton_preimage(f, cur, seed))
            except (NumericalError, DomainError):
                pass
        if not cands or step_idx < 8:
            for seed_c in _grid_seeds(f.q):
                out = _newton_coords(f, cur.coords, seed_c, 1e-12, 60)
                if out is not None:
                    cands.append(geo.with_reference(geo.ball_point(out), zeta))
        uniq: list[BallPoint] = []
        for c in cands:
            if all(np.linalg.norm(c.coords - u.coords) > 1e-8 for u in uniq):
                uniq.append(c)
        if not uniq:
            raise NumericalError(
                f"no preimage found at backward step {step_idx}")
        # all points of a backward chain past the start live in the closed
        # unit horosphere, so candidates inside it take hard precedence
        inside = [c for c in uniq
                  if geo.horofunction(c, zeta) <= geo.HOROSPHERE_BAND]
        pool = inside if inside else uniq
        scored = sorted(
            (geo.kob_dist(c, cur) + max(geo.horofunction(c, zeta), 0.0), i)
            for i, c in enumerate(pool))
        if len(scored) > 1 and scored[1][0] - scored[0][0] < rho_branch:
            a, b = pool[scored[0][1]], pool[scored[1][1]]
            raise NumericalError(
                "ambiguous backward branch: candidates "
                f"{np.round(a.coords, 6)} and {np.round(b.coords, 6)} score "
                f"within {rho_branch}")
        nxt = pool[scored[0][1]]
        if nxt.ref is None:
            nxt = geo.with_reference(nxt, zeta)
        lam_guess = max(float(np.exp(geo.kob_dist(cur, nxt))), 1.01)
        pts.append(nxt)
        cur = nxt
    seg = OrbitSegment(points=tuple(pts), zeta=zeta,
                       lam=lam_hint if lam_hint is not None else float("nan"),
                       map_label=f.label, chain_tol=1e-10)
    lam_for_check = lam_hint if lam_hint is not None else \
        float(np.exp(geo.kob_dist(pts[-2], pts[-1])))
    return analyze_orbit(seg, lam_for_check, params, "preimage")


# ---------------------------------------------------------------------------
# bilateral extension and CSV dump
# ---------------------------------------------------------------------------

def extend_to_bilateral(seg: OrbitSegment, f: cat.SelfMap,
                        max_forward: int = 60) -> OrbitSegment:
    """Prepend the forward iterates x_{-n} = f^n(x_0); the seam satisfies
    the same backward identity as the harvested part.

    Extension stops once the iterates either settle (interior limit) or
    fall below margin 1e-9 near the sphere (Denjoy-Wolff side), where a
    shared-reference representation against zeta stops helping.
    """
    fwd = []
    p = seg.points[0]
    for _ in range(max_forward):
        nxt = cat.step_point(f, p)
        if nxt.margin < 1e-9:
            break
        p = nxt
        fwd.append(p)
        if len(fwd) >= 2 and np.linalg.norm(
                fwd[-1].coords - fwd[-2].coords) < 1e-13:
            break
    pts = tuple(reversed(fwd)) + seg.points
    return OrbitSegment(points=pts, zeta=seg.zeta, lam=seg.lam,
                        map_label=seg.map_label,
                        base_index=seg.base_index - len(fwd),
                        chain_tol=seg.chain_tol)


def orbit_csv(seg: OrbitSegment) -> str:
    """CSV dump: j, re(z_1..q), im(z_1..q), horofunction, step_to_next,
    dist_to_zeta -- one row per depth."""
    steps, horos, dz = orbit_diagnostics(seg)
    q = seg.points[0].q
    cols = (["j"] + [f"re_z{i+1}" for i in range(q)]
            + [f"im_z{i+1}" for i in range(q)]
            + ["horofunction", "step_to_next", "dist_to_zeta"])
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    for j, p in enumerate(seg.points):
        step = steps[j] if j < len(steps) else float("nan")
        row = ([seg.base_index + j]
               + [f"{p.coords[i].real:.15g}" for i in range(q)]
               + [f"{p.coords[i].imag:.15g}" for i in range(q)]
               + [f"{horos[j]:.15g}", f"{step:.15g}", f"{dz[j]:.15g}"])
        buf.write(",".join(str(c) for c in row) + "\n")
    return buf.getvalue()


def write_orbit_csv(seg: OrbitSegment, path) -> None:
    with open(path, "w") as fh:
        fh.write(orbit_csv(seg))


def orbit_svg(seg: OrbitSegment, size: int = 480) -> str:
    """Orbit trace in the first-coordinate plane: unit circle, the radial
    geodesic toward zeta, and one dot per orbit point."""
    half = size / 2.0

    def xy(c):
        return (half + half * 0.95 * c.real, half - half * 0.95 * c.imag)

    zeta1 = complex(seg.zeta.coords[0])
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" '
        f'height="{size}" viewBox="0 0 {size} {size}">',
        f'<circle cx="{half}" cy="{half}" r="{half * 0.95}" fill="none" '
        'stroke="black" stroke-width="1"/>',
        '<line x1="{:.2f}" y1="{:.2f}" x2="{:.2f}" y2="{:.2f}" '
        'stroke="#bbbbbb" stroke-width="1"/>'.format(
            *xy(0j), *xy(zeta1)),
    ]
    n = len(seg.points)
    for j, p in enumerate(seg.points):
        x, y = xy(complex(p.coords[0]))
        shade = int(200 * (1.0 - j / max(n - 1, 1)))
        parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2.5" '
                     f'fill="rgb({shade},{shade // 2},{200 - shade})"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
