"""Shared quadrature rules for the collision integrals.

The angular factor of the scattering kernel is b0*|cos(phi)|, which has a
kink at the equator; the sphere rule therefore uses Gauss-Legendre nodes on
cos(phi) in (0, 1] applied to both hemispheres, so the integrand seen by
Gauss-Legendre is smooth.  The |cos| factor (with b0 = 1) is folded into the
weights, which makes the total angular weight integrate an isotropic
function to exactly 2*pi * int_0^1 c dc * 2 = 2*pi.

The relative-velocity integrals carry an integrable |z|^kappa singularity at
z = 0 (-3 < kappa < 0).  Lattice sums exclude the singular cell and replace
it with an exact radial-moment integral over the cell geometry; the
substitution y = r^(3+kappa) removes the singularity from the 1D radial
integrals.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np


def angular_rule(n_polar: int = 8, n_azimuth: int = 12):
    """Nodes/weights on S^2 for integrands weighted by |cos phi|.

    The collision integrand is invariant under omega -> -omega (the |cos|
    factor is even and the post-collision map is unchanged), so only the
    upper hemisphere cos phi > 0 is sampled, with doubled weights.  Returns
    ``(cos_phi, sin_phi, cos_psi, sin_psi, weights)`` as flat arrays of
    length ``n_polar * n_azimuth``; weights contain the |cos phi| factor
    (unit amplitude) so that ``sum(weights) == 2*pi`` up to float rounding.
    """
    x, wx = np.polynomial.legendre.leggauss(n_polar)
    c = 0.5 * (x + 1.0)          # GL nodes mapped to (0, 1)
    wc = 0.5 * wx
    psi = 2.0 * math.pi * (np.arange(n_azimuth) + 0.5) / n_azimuth
    wpsi = 2.0 * math.pi / n_azimuth

    cos_phi, sin_phi, wgt = [], [], []
    for ck, wk in zip(c, wc):
        s = math.sqrt(max(1.0 - ck * ck, 0.0))
        for p in range(n_azimuth):
            cos_phi.append(ck)
            sin_phi.append(s)
            wgt.append(2.0 * ck * wk * wpsi)  # |cos| folded, both hemispheres
    cos_psi = np.cos(np.tile(psi, n_polar))
    sin_psi = np.sin(np.tile(psi, n_polar))
    return (
        np.asarray(cos_phi),
        np.asarray(sin_phi),
        cos_psi,
        np.asarray(sin_psi),
        np.asarray(wgt),
    )


@lru_cache(maxsize=None)
def _sphere_directions(n_theta: int = 96, n_phi: int = 192):
    """Product rule on S^2 used for the cell radial moments."""
    x, wx = np.polynomial.legendre.leggauss(n_theta)
    phi = 2.0 * math.pi * (np.arange(n_phi) + 0.5) / n_phi
    wphi = 2.0 * math.pi / n_phi
    st = np.sqrt(1.0 - x**2)
    dirs = np.empty((n_theta * n_phi, 3))
    w = np.empty(n_theta * n_phi)
    k = 0
    for i in range(n_theta):
        for j in range(n_phi):
            dirs[k] = (st[i] * math.cos(phi[j]), st[i] * math.sin(phi[j]), x[i])
            w[k] = wx[i] * wphi
            k += 1
    return dirs, w


@lru_cache(maxsize=None)
def unit_cube_radial_moment(kappa: float) -> float:
    """int over the unit cube [-1/2,1/2]^3 of |y|^kappa dy.

    Computed as an S^2 integral of r_max(sigma)^(3+kappa)/(3+kappa) with
    r_max the centre-to-face distance along sigma.
    """
    if not -3.0 < kappa < 0.0:
        raise ValueError(f"kappa={kappa} outside (-3, 0)")
    dirs, w = _sphere_directions()
    r_max = 0.5 / np.max(np.abs(dirs), axis=1)
    return float(np.sum(w * r_max ** (3.0 + kappa)) / (3.0 + kappa))


def cube_radial_moment(kappa: float, h: float) -> float:
    """int over the cube of side h of |z|^kappa dz."""
    return unit_cube_radial_moment(kappa) * h ** (3.0 + kappa)


def radial_moment_with_cutoff(kappa: float, h: float, m: float, n_gl: int = 48) -> float:
    """int over the cube of side h of |z|^kappa * chi_m(|z|) dz.

    chi_m is the cubic smoothstep cutoff (1 on [0, m], 0 beyond 2m).  The
    radial integrals use the y = r^(3+kappa) substitution so the singular
    factor integrates exactly.
    """
    from .collisions import chi_cutoff  # local import to avoid a cycle

    p = 3.0 + kappa
    x, wx = np.polynomial.legendre.leggauss(n_gl)

    def radial(r_hi):
        # int_0^{r_hi} r^(2+kappa) chi(r) dr via y = r^p, vectorised in r_hi
        r_hi = np.atleast_1d(np.asarray(r_hi, dtype=float))
        y_hi = r_hi**p
        y = 0.5 * y_hi[:, None] * (x + 1.0)[None, :]
        wy = 0.5 * y_hi[:, None] * wx[None, :]
        r = y ** (1.0 / p)
        return np.sum(wy * chi_cutoff(r, m), axis=1) / p

    two_m = 2.0 * m
    if two_m <= 0.5 * h:
        # cutoff support entirely inside the cell: a single radial integral
        return 4.0 * math.pi * float(radial(two_m)[0])
    dirs, w = _sphere_directions()
    r_max = np.minimum(0.5 * h / np.max(np.abs(dirs), axis=1), two_m)
    return float(np.sum(w * radial(r_max)))


def gauss_legendre_01(n: int):
    """GL nodes/weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w
