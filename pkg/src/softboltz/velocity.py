"""Velocity lattice, Maxwellians, weights, and the wall-flux sampler.

Conventions follow the flux-normalised Maxwellian

    mu_theta(v) = 1/(2 pi theta^2) * exp(-|v|^2 / (2 theta)),

whose half-space flux integral int_{v.n>0} mu_theta (v.n) dv equals one for
every wall temperature, so a diffusely reflecting wall neither creates nor
destroys mass.  The global reference Maxwellian is mu = mu_1.

The lattice is a uniform midpoint-shifted Cartesian box: with an even number
of nodes per axis the exact zero velocity is never a node, which keeps all
backward-characteristic formulas well defined.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import AdmissibilityError, QuadratureError
from .quadrature import angular_rule, cube_radial_moment


def maxwellian(v, theta: float = 1.0):
    """Flux-normalised Maxwellian mu_theta(v); v is (..., 3)."""
    if theta <= 0:
        raise AdmissibilityError("wall temperature must be positive")
    v = np.asarray(v, dtype=float)
    sq = np.sum(v * v, axis=-1)
    return np.exp(-sq / (2.0 * theta)) / (2.0 * math.pi * theta**2)


def sqrt_maxwellian(v):
    """mu(v)^(1/2) at unit temperature."""
    v = np.asarray(v, dtype=float)
    sq = np.sum(v * v, axis=-1)
    return np.exp(-sq / 4.0) / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class WeightSpec:
    """Velocity weight (1+|v|^2)^(beta/2) * exp(varpi |v|^zeta).

    Admissible exponent pairs: {zeta = 2, 0 < varpi < 1/8} or
    {0 < zeta < 2, varpi > 0}.
    """

    beta: float
    varpi: float
    zeta: float

    def __post_init__(self):
        if self.beta <= 0:
            raise AdmissibilityError("beta must be positive")
        if not 0.0 < self.zeta <= 2.0:
            raise AdmissibilityError("zeta must lie in (0, 2]")
        if self.zeta == 2.0:
            if not 0.0 < self.varpi < 0.125:
                raise AdmissibilityError(
                    "with zeta = 2 the exponential amplitude must satisfy 0 < varpi < 1/8"
                )
        elif self.varpi <= 0.0:
            raise AdmissibilityError("varpi must be positive")

    def admissible_for(self, kappa: float, large_data: bool = False) -> bool:
        """Polynomial-order hypothesis for the theorems in force."""
        floor = max(3.0 + abs(kappa), 4.0) if large_data else 3.0 + abs(kappa)
        return self.beta > floor

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        sq = np.sum(v * v, axis=-1)
        return (1.0 + sq) ** (self.beta / 2.0) * np.exp(self.varpi * sq ** (self.zeta / 2.0))


def weight(spec: WeightSpec, v):
    """Evaluate the velocity weight; thin wrapper over ``spec(v)``."""
    return spec(v)


@dataclass(frozen=True)
class VelocityGrid:
    """Uniform midpoint-shifted velocity lattice on [-v_max, v_max]^3."""

    v_max: float
    n_per_axis: int

    def __post_init__(self):
        if self.v_max <= 0:
            raise AdmissibilityError("v_max must be positive")
        if self.n_per_axis < 2:
            raise AdmissibilityError("need at least 2 nodes per axis")
        if self.n_per_axis % 2:
            raise AdmissibilityError(
                "n_per_axis must be even so the zero velocity is excluded"
            )

    @property
    def h(self) -> float:
        return 2.0 * self.v_max / self.n_per_axis

    @property
    def n_nodes(self) -> int:
        return self.n_per_axis**3

    @property
    def cell_weight(self) -> float:
        """Midpoint quadrature weight per node (h^3)."""
        return self.h**3

    @cached_property
    def axis(self) -> np.ndarray:
        n, h = self.n_per_axis, self.h
        return -self.v_max + h * (np.arange(n) + 0.5)

    @cached_property
    def nodes(self) -> np.ndarray:
        a = self.axis
        g = np.meshgrid(a, a, a, indexing="ij")
        return np.stack([c.ravel() for c in g], axis=1)

    @cached_property
    def speeds(self) -> np.ndarray:
        return np.linalg.norm(self.nodes, axis=1)

    @cached_property
    def mu(self) -> np.ndarray:
        return maxwellian(self.nodes)

    @cached_property
    def sqrt_mu(self) -> np.ndarray:
        return sqrt_maxwellian(self.nodes)

    def integrate(self, field) -> float:
        """Midpoint integral over the velocity box."""
        return float(np.sum(field) * self.cell_weight)

    def half_space_mask(self, normal) -> np.ndarray:
        """Boolean mask of nodes with v.n > 0."""
        normal = np.asarray(normal, dtype=float)
        return self.nodes @ normal > 0.0

    def grid_hash(self) -> str:
        tag = f"vgrid:{self.n_per_axis}:{self.v_max:.12g}"
        return hashlib.blake2s(tag.encode(), digest_size=8).hexdigest()


@dataclass(frozen=True)
class WallTemperature:
    """Wall temperature profile theta(x) = 1 + delta * g(x) with |g| <= 1.

    Profiles: ``constant`` (g = 1), ``axis_linear`` (g = x_1 / L_1, slab),
    ``harmonic`` (g = x_3/|x|, the first polar harmonic on a ball).
    """

    delta: float
    profile: str = "constant"
    axis_scale: float = 1.0

    def __post_init__(self):
        if self.delta < 0:
            raise AdmissibilityError("delta must be nonnegative")
        if self.delta >= 1.0:
            raise AdmissibilityError("delta must stay below 1 to keep theta positive")
        if self.profile not in ("constant", "axis_linear", "harmonic"):
            raise AdmissibilityError(f"unknown wall profile {self.profile!r}")

    def shape_factor(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if self.profile == "constant":
            return 1.0
        if self.profile == "axis_linear":
            return float(np.clip(x[0] / self.axis_scale, -1.0, 1.0))
        r = np.linalg.norm(x)
        return float(x[2] / r) if r > 0 else 0.0

    def __call__(self, x) -> float:
        return 1.0 + self.delta * self.shape_factor(x)


def flux_normalization(grid: VelocityGrid, theta: float, normal) -> float:
    """Lattice quadrature of int_{v.n>0} mu_theta(v) (v.n) dv (exactly 1 in
    the continuum for every theta)."""
    mask = grid.half_space_mask(normal)
    vn = grid.nodes @ np.asarray(normal, dtype=float)
    mu_t = maxwellian(grid.nodes, theta)
    return float(np.sum(mu_t[mask] * vn[mask]) * grid.cell_weight)


def collision_frequency(
    grid: VelocityGrid,
    kappa: float,
    b_amplitude: float = 1.0,
    n_polar: int = 8,
    n_azimuth: int = 12,
    richardson_tol: float | None = None,
):
    """Collision frequency nu(v) on the lattice.

    Quadrature over u uses the grid's midpoint rule with the singular cell
    at u = v replaced by the exact radial moment of |z|^kappa over the cell;
    the angular rule integrates the |cos| factor.  The asymptotic behaviour
    is nu ~ (1+|v|)^kappa.

    With ``richardson_tol`` set, nu(0-nearest node) is recomputed on the
    half-resolution lattice and a :class:`QuadratureError` is raised when the
    relative discrepancy exceeds the tolerance.
    """
    if not -3.0 < kappa < 0.0:
        raise AdmissibilityError(f"kappa={kappa} outside (-3, 0)")
    if b_amplitude <= 0:
        raise AdmissibilityError("angular amplitude must be positive")
    *_, ang_w = angular_rule(n_polar, n_azimuth)
    s_b = b_amplitude * float(np.sum(ang_w))  # = 2*pi*b0 up to GL exactness

    nodes = grid.nodes
    mu = grid.mu
    nu = np.empty(grid.n_nodes)
    cell_moment = cube_radial_moment(kappa, grid.h)
    # pairwise |v-u|^kappa with the diagonal excluded; O(N^2) memory chunked
    chunk = max(1, 2_000_000 // grid.n_nodes)
    for start in range(0, grid.n_nodes, chunk):
        stop = min(start + chunk, grid.n_nodes)
        diff = nodes[start:stop, None, :] - nodes[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
        for i in range(start, stop):
            dist[i - start, i] = 1.0  # placeholder, excluded below
        contrib = dist**kappa * mu[None, :]
        for i in range(start, stop):
            contrib[i - start, i] = 0.0
        nu[start:stop] = np.sum(contrib, axis=1) * grid.cell_weight
    nu += cell_moment * mu  # singular-cell correction
    nu *= s_b

    if np.any(nu <= 0):
        raise QuadratureError("collision frequency not strictly positive")

    if richardson_tol is not None:
        coarse = VelocityGrid(grid.v_max, grid.n_per_axis // 2)
        nu_c = collision_frequency(coarse, kappa, b_amplitude, n_polar, n_azimuth)
        i_f = int(np.argmin(grid.speeds))
        i_c = int(np.argmin(coarse.speeds))
        rel = abs(nu[i_f] - nu_c[i_c]) / nu_c[i_c]
        if rel > richardson_tol:
            raise QuadratureError(
                f"nu refinement discrepancy {rel:.3e} exceeds {richardson_tol:.3e}"
            )
    return nu


def _tangent_frame(normal):
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    a = np.zeros(3)
    a[int(np.argmin(np.abs(n)))] = 1.0
    t1 = np.cross(n, a)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    return n, t1, t2


def sample_flux_velocity(rng: np.random.Generator, theta: float, normal):
    """Exact draw from the half-space Maxwell flux law mu_theta(v)(v.n), v.n>0.

    Tangential components are centred Gaussians with variance theta; the
    normal component has density s*exp(-s^2/(2 theta)) on s > 0, sampled by
    inverse CDF.
    """
    if theta <= 0:
        raise AdmissibilityError("wall temperature must be positive")
    n, t1, t2 = _tangent_frame(normal)
    u = 1.0 - rng.random()  # in (0, 1]
    s = math.sqrt(-2.0 * theta * math.log(u))
    g1, g2 = rng.normal(0.0, math.sqrt(theta), size=2)
    return s * n + g1 * t1 + g2 * t2


def sample_flux_velocities(rng: np.random.Generator, theta: float, normal, count: int):
    """Vectorised version of :func:`sample_flux_velocity`; returns (count, 3)."""
    n, t1, t2 = _tangent_frame(normal)
    u = 1.0 - rng.random(count)
    s = np.sqrt(-2.0 * theta * np.log(u))
    g = rng.normal(0.0, math.sqrt(theta), size=(count, 2))
    return s[:, None] * n[None, :] + g[:, 0:1] * t1[None, :] + g[:, 1:2] * t2[None, :]
