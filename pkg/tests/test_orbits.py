"""Orbit engine: anchors, stopping times, chains, Newton preimages."""

import numpy as np
import pytest

from ballorbits import catalog as cat
from ballorbits import geometry as geo
from ballorbits import orbits as orb
from ballorbits.errors import DomainError, NumericalError

LOG3 = np.log(3.0)


# ---------------------------------------------------------------------------
# anchors
# ---------------------------------------------------------------------------

def test_radial_anchor_values(e1):
    assert np.linalg.norm(orb.radial_anchor(e1, 3.0, 0).coords) == 0.0
    assert orb.radial_anchor(e1, 3.0, 1).coords[0] == pytest.approx(0.5)
    # (9 - 1)/(9 + 1)
    assert orb.radial_anchor(e1, 3.0, 2).coords[0] == pytest.approx(0.8)


def test_radial_anchor_horofunction(e1):
    for lam in (1.5, 3.0, 10.0):
        for k in range(0, 21, 4):
            r = orb.radial_anchor(e1, lam, k)
            assert geo.horofunction(r, e1) == pytest.approx(
                -k * np.log(lam), abs=1e-12)


def test_radial_anchor_domain_errors(e1):
    with pytest.raises(DomainError):
        orb.radial_anchor(e1, 1.0, 3)
    with pytest.raises(DomainError):
        orb.radial_anchor(e1, 3.0, -1)
    with pytest.raises(DomainError):
        orb.radial_anchor(e1, 3.0, 700)


@pytest.mark.parametrize("make, lam", [
    (lambda: cat.hyperbolic_selfmap(geo.basis_boundary_point(1), 3.0), 3.0),
    (lambda: cat.blaschke_product([0.0, 1.0 / 3.0]), 3.0),
    (lambda: cat.blaschke_product([0.0, 1.0 / 3.0, -1.0 / 3.0]), 3.5),
    (lambda: cat.warped_product(
        cat.hyperbolic_selfmap(geo.basis_boundary_point(1), 3.0), 0.5), 3.0),
])
def test_anchor_step_limit_at_k40(make, lam):
    # kob(r_k, f(r_k)) -> log(lam): within 1e-3 at k = 40 for every
    # catalog map with analytic dilation
    f = make()
    zeta = geo.basis_boundary_point(f.q)
    r = orb.radial_anchor(zeta, lam, 40)
    fr = cat.step_point(f, r)
    assert abs(geo.kob_dist(r, fr) - np.log(lam)) < 1e-3


# ---------------------------------------------------------------------------
# stopping times and harvested chains
# ---------------------------------------------------------------------------

def test_stopping_time_automorphism_exact(disc_auto, e1):
    # the horofunction advances by exactly log(lam) per step, so the first
    # strict exit from the closed unit horosphere is one step past k
    for k in range(1, 31):
        rec = orb.stopping_time(disc_auto, orb.radial_anchor(e1, 3.0, k),
                                e1, k=k)
        assert rec.n == k + 1
        assert not rec.capped
        assert rec.exit_margin > 0.0


def test_stopping_time_from_origin(disc_auto, e1):
    # r_0 = 0 on the horosphere boundary, f(0) already outside
    rec = orb.stopping_time(disc_auto, orb.radial_anchor(e1, 3.0, 0), e1, k=0)
    assert rec.n == 1


def test_stopping_time_blaschke(cleared_blaschke, e1):
    cleared, _ = cleared_blaschke
    for k in range(1, 31):
        rec = orb.stopping_time(cleared, orb.radial_anchor(e1, 3.0, k),
                                e1, k=k)
        assert rec.n > k


def test_stopping_time_cap(cleared_blaschke, e1):
    cleared, _ = cleared_blaschke
    rec = orb.stopping_time(cleared, orb.radial_anchor(e1, 3.0, 20), e1,
                            n_max=5, k=20)
    assert rec.capped


def test_harvest_chain_structure(cleared_blaschke, e1):
    cleared, _ = cleared_blaschke
    k = 12
    r_k = orb.radial_anchor(e1, 3.0, k)
    rec = orb.stopping_time(cleared, r_k, e1, k=k)
    seg = orb.harvest_chain(cleared, r_k, rec, e1, 3.0)
    assert len(seg) == rec.n + 1
    # stored forward iterates reproduce bit for bit
    assert orb.verify_backward(seg, cleared) == 0.0
    # endpoint out, later points inside the closed horosphere
    horos = [geo.horofunction(p, e1) for p in seg.points]
    assert horos[0] > 0.0
    assert all(h <= geo.HOROSPHERE_BAND for h in horos[1:])
    # Schwarz-Pick makes the step profile non-decreasing with depth
    steps, _, _ = orb.orbit_diagnostics(seg)
    assert np.all(np.diff(steps) >= -1e-12)
    # the deepest point is the anchor itself
    assert seg.points[-1].delta == r_k.delta


def test_harvest_requires_uncapped(cleared_blaschke, e1):
    cleared, _ = cleared_blaschke
    r_k = orb.radial_anchor(e1, 3.0, 10)
    rec = orb.stopping_time(cleared, r_k, e1, n_max=3, k=10)
    with pytest.raises(DomainError):
        orb.harvest_chain(cleared, r_k, rec, e1, 3.0)


# ---------------------------------------------------------------------------
# the constructed backward orbit
# ---------------------------------------------------------------------------

def test_construct_automorphism_orbit(auto_orbit):
    res = auto_orbit
    assert res.accepted and res.mode == "single-tail"
    # axial translation: every step is exactly log 3
    assert np.abs(res.steps - LOG3).max() < 1e-10


def test_construct_blaschke_orbit(blaschke_orbit):
    res = blaschke_orbit
    assert res.accepted
    assert abs(res.sigma_hat - LOG3) < 1e-3
    assert np.all(np.diff(res.steps) >= -1e-12)
    assert np.all(np.diff(res.horos) <= 1e-12)
    assert res.dist_zeta[25] < 1e-4
    # step tail bounded by the anchor step (the generating inequality)
    assert res.sigma_hat <= LOG3 + 1e-3


def test_construct_cluster_mode(cleared_blaschke, e1):
    cleared, _ = cleared_blaschke
    res = orb.construct_backward_orbit(
        cleared, e1, 3.0, orb.OrbitParams(mode="cluster", k_max=30))
    assert res.accepted
    assert res.mode in ("cluster", "single-tail")
    if res.mode == "cluster":
        assert orb.verify_backward(res.orbit, cleared) < 1e-6


def test_construct_rejects_bad_dilation(cleared_blaschke, e1):
    cleared, _ = cleared_blaschke
    # wrong lambda: no chain can have the required step tail
    with pytest.raises(NumericalError):
        orb.construct_backward_orbit(
            cleared, e1, 2.0, orb.OrbitParams(k_max=12, dist_depth=5))


def test_horofunction_divergence_along_orbit(blaschke_orbit):
    # convergence to the boundary point: horofunction below -10 at depth
    # proportional to j log(lam)
    res = blaschke_orbit
    j = int(np.ceil(12.0 / LOG3)) + 2
    assert res.horos[j] < -10.0


# ---------------------------------------------------------------------------
# Newton preimages
# ---------------------------------------------------------------------------

def test_newton_matches_automorphism_inverse(disc_auto, e1, rng):
    g = disc_auto.params[0]
    for _ in range(10):
        t = geo.ball_point((rng.normal(size=1) + 1j * rng.normal(size=1)) / 4)
        pre = orb.newton_preimage(disc_auto, t, geo.ball_point([0.1 + 0j]))
        exact = geo.apply(geo.inverse(g), t)
        assert np.linalg.norm(pre.coords - exact.coords) < 1e-10


def test_newton_finds_both_blaschke_preimages(blaschke):
    # independent oracle: the quadratic formula for z(z-a) = w(1-az)
    a = 1.0 / 3.0
    w = 0.4 + 0.2j
    roots = sorted(np.roots([1.0, a * (w - 1.0), -w]),
                   key=lambda c: c.real)
    found = []
    for seed in (0.8, -0.8):
        p = orb.newton_preimage(blaschke, geo.ball_point([w]),
                                geo.ball_point([seed]))
        resid = abs(cat.evaluate(blaschke, p.coords)[0] - w)
        assert resid < 1e-12
        found.append(p.coords[0])
    found = sorted(found, key=lambda c: c.real)
    assert all(abs(f - r) < 1e-9 for f, r in zip(found, roots))


def test_newton_fixed_point(blaschke):
    p = orb.newton_preimage(blaschke, geo.ball_point([0.0]),
                            geo.ball_point([0.0]))
    assert np.linalg.norm(p.coords) < 1e-12


def test_newton_no_preimage_in_ball():
    # (z1, z') -> (phi(z1), z'/2): a target with |z'| > 1/2 has no preimage
    e1 = geo.basis_boundary_point(1)
    wp = cat.warped_product(cat.hyperbolic_selfmap(e1, 3.0), 0.5, q=2)
    with pytest.raises(NumericalError):
        orb.newton_preimage(wp, geo.ball_point([0.0, 0.9]),
                            geo.ball_point([0.1, 0.1]))


def test_orbit_params_validation():
    with pytest.raises(DomainError):
        orb.OrbitParams(k_min=10, k_max=5)
    with pytest.raises(DomainError):
        orb.OrbitParams(eps_sigma=0.0)
    with pytest.raises(DomainError):
        orb.OrbitParams(mode="sideways")


# ---------------------------------------------------------------------------
# preimage orbits
# ---------------------------------------------------------------------------

def test_preimage_orbit_automorphism_axial(disc_auto, e1):
    seed = geo.geodesic_point(e1, 1.3)
    res = orb.backward_orbit_via_preimages(disc_auto, geo.ball_point(
        seed.coords), e1, 20, lam_hint=3.0)
    assert np.abs(res.steps - LOG3).max() < 1e-9
    for j, p in enumerate(res.orbit.points):
        assert geo.dist_to_zeta(p, e1) <= geo.dist_to_zeta(
            res.orbit.points[max(j - 1, 0)], e1) + 1e-12


def test_preimage_orbit_blaschke_step(cleared_blaschke, blaschke_orbit, e1):
    cleared, _ = cleared_blaschke
    x0 = blaschke_orbit.orbit.points[0]
    seed = geo.ball_point([x0.coords[0].real + 0.02])
    res = orb.backward_orbit_via_preimages(cleared, seed, e1, 35,
                                           lam_hint=3.0)
    assert abs(res.sigma_hat - LOG3) < 1e-3
    assert orb.verify_backward(res.orbit, cleared) < 1e-10
    assert res.dist_zeta[-1] < 1e-8


def test_preimage_orbit_q2_deep_adapted():
    # defect-coordinate Newton keeps relative accuracy far past the
    # coordinate-representable zone, in dimension 2
    e1 = geo.basis_boundary_point(1)
    e2 = geo.basis_boundary_point(2)
    wp = cat.warped_product(cat.hyperbolic_selfmap(e1, 3.0), 0.5, q=2)
    target = orb.radial_anchor(e2, 3.0, 25)
    seed = geo.boundary_adapted_point(e2.coords, target.delta / 3.0)
    pre = orb.newton_preimage(wp, target, seed)
    img = cat.step_point(wp, pre)
    assert abs(img.delta - target.delta) / abs(target.delta) < 1e-10


def test_preimage_orbit_off_axis_warped_exits_ball():
    # the tangential coordinate doubles per backward step, so off-axis
    # backward orbits of a warped product leave the ball: the march must
    # fail rather than fabricate points
    e1 = geo.basis_boundary_point(1)
    e2 = geo.basis_boundary_point(2)
    wp = cat.warped_product(cat.hyperbolic_selfmap(e1, 3.0), 0.5, q=2)
    with pytest.raises(NumericalError):
        orb.backward_orbit_via_preimages(wp, geo.ball_point([0.2, 0.01]),
                                         e2, 25, lam_hint=3.0)


def test_preimage_orbit_branch_locality():
    # triple product with boundary repelling points at both +1 and -1
    b3 = cat.blaschke_product([0.0, 1.0 / 3.0, -1.0 / 3.0])
    lam = 3.5    # sum of (1+a)/(1-a) over the factors, by log-derivative
    assert b3.boundary_fixed[0][1] == pytest.approx(lam)
    assert b3.boundary_fixed[1][1] == pytest.approx(lam)
    plus = geo.basis_boundary_point(1)
    minus = geo.boundary_point([-1.0])
    cleared, _ = cat.ensure_pole_clearance(b3, plus)
    r = orb.backward_orbit_via_preimages(cleared, geo.ball_point([0.8]),
                                         plus, 12, lam_hint=lam)
    assert r.dist_zeta[-1] < 1e-5
    cleared_m, _ = cat.ensure_pole_clearance(b3, minus)
    r_m = orb.backward_orbit_via_preimages(cleared_m, geo.ball_point([-0.8]),
                                           minus, 12, lam_hint=lam)
    assert r_m.dist_zeta[-1] < 1e-5


# ---------------------------------------------------------------------------
# bilateral extension and CSV
# ---------------------------------------------------------------------------

def test_extend_to_bilateral_seam(blaschke_orbit, cleared_blaschke):
    cleared, _ = cleared_blaschke
    bil = orb.extend_to_bilateral(blaschke_orbit.orbit, cleared)
    assert bil.base_index < 0
    j0 = -bil.base_index
    x0, x1 = bil.points[j0], bil.points[j0 + 1]
    xm1 = bil.points[j0 - 1]
    # f(x_1) = x_0 and x_{-1} = f(x_0) both hold across the seam
    assert np.linalg.norm(cat.step_point(cleared, x1).coords
                          - x0.coords) == 0.0
    assert np.linalg.norm(cat.step_point(cleared, x0).coords
                          - xm1.coords) == 0.0
    # forward extension approaches the interior fixed witness -tanh(0.1)
    assert abs(bil.points[0].coords[0] + np.tanh(0.1)) < 1e-6


def test_orbit_csv_format(blaschke_orbit):
    text = orb.orbit_csv(blaschke_orbit.orbit)
    lines = text.strip().splitlines()
    assert lines[0] == ("j,re_z1,im_z1,horofunction,step_to_next,"
                        "dist_to_zeta")
    assert len(lines) == len(blaschke_orbit.orbit) + 1
    first = lines[1].split(",")
    assert first[0] == "0"
    # 15 significant digits
    assert float(first[1]) == pytest.approx(
        blaschke_orbit.orbit.points[0].coords[0].real, rel=1e-14)


def test_orbit_csv_final_step_is_eq21_value(blaschke_orbit):
    rows = orb.orbit_csv(blaschke_orbit.orbit).strip().splitlines()
    step_col = [r.split(",")[4] for r in rows[1:]]
    assert float(step_col[-2]) == pytest.approx(LOG3, abs=1e-3)
    assert step_col[-1] == "nan"
