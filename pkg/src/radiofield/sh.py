"""Real spherical harmonics used to encode and decode directional ray features.

Convention: orthonormal real basis without the Condon-Shortley phase, ordered
row-major in (l, m): (0,0), (1,-1), (1,0), (1,1), (2,-2), ...  Elevation theta
is measured from +z, azimuth phi = atan2(y, x).
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ValidationError

SH_CONVENTION = "real-orthonormal-lm-row-major-no-condon-shortley"

DEFAULT_DEGREE = 3


def basis_size(degree: int) -> int:
    return (degree + 1) ** 2


def sh_eval(directions: np.ndarray, degree: int = DEFAULT_DEGREE) -> np.ndarray:
    """Evaluate the real SH basis at unit directions.

    Accepts a single (3,) vector or an (N, 3) array; returns ((degree+1)^2,)
    or (N, (degree+1)^2).  Directions off unit length by more than 1e-9 are
    renormalized; zero vectors are rejected.
    """
    d = np.asarray(directions, dtype=np.float64)
    single = d.ndim == 1
    d = np.atleast_2d(d)
    if d.shape[-1] != 3:
        raise ValidationError(f"directions must have 3 components, got shape {d.shape}")
    norms = np.linalg.norm(d, axis=-1)
    if np.any(norms < 1e-12):
        raise ValidationError("zero direction vector cannot be evaluated")
    d = d / norms[:, None]

    x, y, z = d[:, 0], d[:, 1], d[:, 2]
    ct = np.clip(z, -1.0, 1.0)
    st = np.sqrt(np.maximum(0.0, 1.0 - ct * ct))
    phi = np.arctan2(y, x)

    n = d.shape[0]
    nc = basis_size(degree)
    out = np.empty((n, nc), dtype=np.float64)

    # cos(m phi), sin(m phi) via the angle-addition recurrence (one arctan2,
    # no further trig calls).
    cos_m = [np.ones(n)]
    sin_m = [np.zeros(n)]
    c1, s1 = np.cos(phi), np.sin(phi)
    for m in range(1, degree + 1):
        cos_m.append(cos_m[-1] * c1 - sin_m[-1] * s1)
        sin_m.append(sin_m[-1] * c1 + cos_m[-2] * s1)

    # Associated Legendre P_l^m(cos theta) without Condon-Shortley phase,
    # via the standard diagonal/band recurrences.
    plm = _assoc_legendre_table(ct, st, degree)
    sqrt2 = math.sqrt(2.0)
    for l in range(degree + 1):
        for m in range(-l, l + 1):
            idx = l * l + l + m
            am = abs(m)
            k = math.sqrt(
                (2 * l + 1)
                / (4.0 * math.pi)
                * math.factorial(l - am)
                / math.factorial(l + am)
            )
            if m == 0:
                out[:, idx] = k * plm[(l, 0)]
            elif m > 0:
                out[:, idx] = (sqrt2 * k) * cos_m[m] * plm[(l, m)]
            else:
                out[:, idx] = (sqrt2 * k) * sin_m[am] * plm[(l, am)]
    return out[0] if single else out


def _assoc_legendre_table(ct: np.ndarray, st: np.ndarray, degree: int) -> dict:
    """P_l^m(cos theta) for 0 <= m <= l <= degree, keyed by (l, m)."""
    table: dict[tuple[int, int], np.ndarray] = {(0, 0): np.ones_like(ct)}
    for m in range(1, degree + 1):
        # P_m^m = (2m-1)!! * sin^m(theta)
        table[(m, m)] = table[(m - 1, m - 1)] * (2 * m - 1) * st
    for m in range(0, degree):
        table[(m + 1, m)] = (2 * m + 1) * ct * table[(m, m)]
        for l in range(m + 2, degree + 1):
            table[(l, m)] = (
                (2 * l - 1) * ct * table[(l - 1, m)] - (l + m - 1) * table[(l - 2, m)]
            ) / (l - m)
    return table


def sh_project(coeffs: np.ndarray, direction: np.ndarray, degree: int = DEFAULT_DEGREE) -> float:
    """Reconstruct the encoded scalar at a direction: coeffs . sh_eval(direction)."""
    c = np.asarray(coeffs, dtype=np.float64)
    if c.shape != (basis_size(degree),):
        raise ValidationError(
            f"coefficient length {c.shape} does not match basis size {basis_size(degree)}"
        )
    return float(c @ sh_eval(direction, degree))


def quadrature_directions(n_polar: int = 64, n_azimuth: int = 128):
    """Gauss-Legendre x uniform-azimuth nodes and weights on the sphere.

    Returns (directions (n_polar*n_azimuth, 3), weights) with sum(weights) = 4*pi.
    """
    nodes, gl_w = np.polynomial.legendre.leggauss(n_polar)
    phi = (np.arange(n_azimuth) + 0.5) * (2.0 * math.pi / n_azimuth)
    ct = nodes[:, None] * np.ones((1, n_azimuth))
    st = np.sqrt(np.maximum(0.0, 1.0 - ct * ct))
    dirs = np.stack(
        [st * np.cos(phi)[None, :], st * np.sin(phi)[None, :], ct], axis=-1
    ).reshape(-1, 3)
    w = (gl_w[:, None] * np.full((1, n_azimuth), 2.0 * math.pi / n_azimuth)).reshape(-1)
    return dirs, w
