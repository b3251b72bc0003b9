"""Deterministic samplers for balls, horospheres and geodesic tubes.

Everything either takes an explicit numpy Generator or is fully
deterministic; no module-level random state.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalError
from .geometry import (BallPoint, BoundaryPoint, _axis_point,
                       boundary_adapted_point, herm, sq_norm)


def rng_from_seed(seed: int | None) -> np.random.Generator:
    return np.random.default_rng(12345 if seed is None else int(seed))


def unit_directions(rng, q: int, n: int) -> np.ndarray:
    v = rng.normal(size=(n, q)) + 1j * rng.normal(size=(n, q))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def sample_ball(rng, q: int, n: int, r_max: float = 0.999) -> np.ndarray:
    """n points with radius uniform in (0, r_max)."""
    r = rng.uniform(0.0, r_max, size=n)
    return unit_directions(rng, q, n) * r[:, None]


def sample_shell(rng, q: int, n_per: int,
                 gaps=(1e-2, 1e-4, 1e-6, 1e-8)) -> np.ndarray:
    """Near-sphere samples at radii 1 - gap."""
    blocks = [unit_directions(rng, q, n_per) * (1.0 - g) for g in gaps]
    return np.concatenate(blocks, axis=0)


def sample_horodisc(rng, zeta: BoundaryPoint, radius: float, n: int,
                    max_tries: int = 60) -> np.ndarray:
    """Uniform samples of the horosphere E_0(zeta, R).

    In the disc E_0 is a round disc (exact, rejection-free); in higher
    dimension we reject from the bounding ellipsoid box.
    """
    q = zeta.q
    if q == 1:
        c0 = 1.0 / (1.0 + radius)
        rad = radius / (1.0 + radius)
        u = np.sqrt(rng.uniform(0.0, 1.0 - 1e-12, size=n))
        phi = rng.uniform(0.0, 2 * np.pi, size=n)
        z = (c0 + rad * u * np.exp(1j * phi))[:, None] * zeta.coords[None, :]
        return z
    out = []
    axial_c = 1.0 / (1.0 + radius)
    axial_r = radius / (1.0 + radius)
    tang_r = np.sqrt(radius / (1.0 + radius))
    need = n
    for _ in range(max_tries):
        m = max(4 * need, 256)
        x = rng.uniform(-1.0, 1.0, size=(m, 2 * q))
        cand = np.zeros((m, q), dtype=complex)
        cand[:, 0] = axial_c + axial_r * (x[:, 0] + 1j * x[:, 1])
        for j in range(1, q):
            cand[:, j] = tang_r * (x[:, 2 * j] + 1j * x[:, 2 * j + 1])
        cand = np.einsum("ij,...j->...i",
                         _frame(zeta), cand)
        mz = 1.0 - sq_norm(cand)
        ok = mz > 0
        h = np.full(m, np.inf)
        h[ok] = (np.abs(1.0 - herm(cand[ok], zeta.coords)) ** 2 / mz[ok])
        keep = cand[h < radius]
        out.append(keep)
        need -= len(keep)
        if need <= 0:
            return np.concatenate(out, axis=0)[:n]
    raise NumericalError("horosphere rejection sampling starved")


def _frame(zeta: BoundaryPoint) -> np.ndarray:
    from .geometry import basis_boundary_point, unitary_taking
    return unitary_taking(basis_boundary_point(zeta.q).coords, zeta.coords)


def tube_samples(zeta: BoundaryPoint, width: float,
                 s_values=None, n_angles: int = 8,
                 radius_fractions=(1.0, 0.5)) -> list[BallPoint]:
    """Deterministic graded samples of the tube A(gamma, width).

    Each sample is an axial translate of a point at exact Kobayashi
    distance f*width from the origin, so its distance to gamma is <= f*width
    by construction, and the grading pushes samples toward zeta as s grows.
    """
    q = zeta.q
    if s_values is None:
        s_values = np.arange(1.0, 30.001, 1.0)
    pts: list[BallPoint] = []
    dirs = []
    for j in range(2 * q):
        d = np.zeros(q, dtype=complex)
        d[j // 2] = 1.0 if j % 2 == 0 else 1j
        dirs.append(d)
    for s in s_values:
        base = _axis_point(zeta, float(s))
        for frac in radius_fractions:
            rho = np.tanh(frac * width / 2.0)
            for i in range(n_angles):
                direction = dirs[i % len(dirs)] * np.exp(2j * np.pi * i / n_angles)
                u = boundary_adapted_point(
                    zeta.coords,
                    1.0 - herm(rho * direction, zeta.coords),
                    tail=rho * direction
                    - herm(rho * direction, zeta.coords) * zeta.coords)
                pts.append(_axial_transport(zeta, float(s), u))
        pts.append(base)
    return pts


def _axial_transport(zeta: BoundaryPoint, s: float, p: BallPoint) -> BallPoint:
    """Translate p by s toward zeta along the axis (adapted recursion)."""
    c = -np.tanh(s / 2.0)
    den = (1.0 - c) + c * p.delta
    delta = (1.0 + c) * p.delta / den
    tail = np.sqrt(1.0 - c * c) * p.tail() / den
    margin = (1.0 - c * c) * p.margin / abs(den) ** 2
    return boundary_adapted_point(zeta.coords, delta, tail=tail, margin=margin)
