"""Bounded domains with closed-form backward exit computations.

Two shapes are supported: a ball of radius R and an axis-aligned slab/box
given by per-axis half-widths, with optional periodic transverse axes to
emulate one-dimensional-in-space experiments.  The inside/outside convention
is a level set ``chi(x) < 0`` in the interior, ``chi(x) = 0`` on the wall,
with outward unit normal ``n(x)``.

The backward exit time of a phase point (x, v) is the largest t such that
``x - tau*v`` stays in the closure for all ``tau in [0, t]``; both shapes
admit exact formulas, so no root finding is involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AdmissibilityError, DegenerateVelocityError, GeometryError

#: velocities below this magnitude are treated as degenerate for ray tracing
VELOCITY_FLOOR = 1e-300

#: default |v.n| band for the near-grazing test
GRAZING_EPS = 1e-3


@dataclass(frozen=True)
class Domain:
    """Bounded spatial domain (ball or axis-aligned slab/box).

    For ``shape == "slab"`` the box is ``{|x_i| < half_widths[i]}`` on the
    non-periodic axes; periodic axes impose no wall and do not contribute to
    the diameter.  Both shapes are convex.
    """

    shape: str
    radius: float = 0.0
    half_widths: tuple = (1.0, 1.0, 1.0)
    periodic: tuple = (False, False, False)
    convex: bool = field(default=True)

    def __post_init__(self):
        if self.shape not in ("ball", "slab"):
            raise GeometryError(f"unknown domain shape {self.shape!r}")
        if self.shape == "ball":
            if self.radius <= 0:
                raise GeometryError("ball radius must be positive")
        else:
            if all(self.periodic):
                raise GeometryError("slab needs at least one wall axis")
            for hw, per in zip(self.half_widths, self.periodic):
                if not per and hw <= 0:
                    raise GeometryError("slab half-widths must be positive")

    @property
    def diameter(self) -> float:
        if self.shape == "ball":
            return 2.0 * self.radius
        s = sum(hw * hw for hw, per in zip(self.half_widths, self.periodic) if not per)
        return 2.0 * math.sqrt(s)

    def level_set(self, x) -> float:
        """chi(x): negative inside, zero on the wall, positive outside."""
        x = np.asarray(x, dtype=float)
        if self.shape == "ball":
            return float(np.dot(x, x) - self.radius**2)
        vals = [
            abs(x[i]) - self.half_widths[i]
            for i in range(3)
            if not self.periodic[i]
        ]
        return max(vals)

    def contains(self, x, tol: float = 0.0) -> bool:
        return self.level_set(x) <= tol

    def outward_normal(self, x):
        """Unit outward normal at a wall point."""
        x = np.asarray(x, dtype=float)
        if self.shape == "ball":
            r = np.linalg.norm(x)
            if r == 0.0:
                raise GeometryError("normal undefined at the ball centre")
            return x / r
        # slab: the face with the largest |x_i| - L_i wins
        best, axis = -np.inf, -1
        for i in range(3):
            if self.periodic[i]:
                continue
            d = abs(x[i]) - self.half_widths[i]
            if d > best:
                best, axis = d, i
        n = np.zeros(3)
        n[axis] = math.copysign(1.0, x[axis])
        return n


@dataclass(frozen=True)
class ExitRecord:
    """Backward exit data: time to the wall, wall point, and v.n there."""

    time: float
    point: np.ndarray
    normal_dot: float


def exit_time(domain: Domain, x, v) -> ExitRecord:
    """Backward exit of the straight characteristic through (x, v).

    Returns the largest t with ``x - tau*v`` in the closure for all
    ``0 <= tau <= t``, together with the wall point ``x - t*v`` and the
    (always nonpositive) product v.n at that point.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    speed = np.linalg.norm(v)
    if speed < VELOCITY_FLOOR:
        raise DegenerateVelocityError("|v| below machine threshold")
    ls = domain.level_set(x)
    if ls > 1e-12 * max(1.0, domain.diameter):
        raise GeometryError(f"start point outside the closure (chi={ls:g})")

    if domain.shape == "ball":
        # |x - t v|^2 = R^2, take the positive root
        xv = float(np.dot(x, v))
        vv = speed * speed
        disc = xv * xv + vv * (domain.radius**2 - float(np.dot(x, x)))
        disc = max(disc, 0.0)
        t_exit = (xv + math.sqrt(disc)) / vv
        t_exit = max(t_exit, 0.0)
    else:
        t_exit = math.inf
        for i in range(3):
            if domain.periodic[i] or v[i] == 0.0:
                continue
            # backward coordinate x_i - t v_i hits -L (v_i>0) or +L (v_i<0)
            if v[i] > 0:
                t_face = (x[i] + domain.half_widths[i]) / v[i]
            else:
                t_face = (x[i] - domain.half_widths[i]) / v[i]
            t_exit = min(t_exit, max(t_face, 0.0))
        if not math.isfinite(t_exit):
            raise GeometryError("characteristic never exits (all axes periodic)")

    point = x - t_exit * v
    normal = domain.outward_normal(point)
    ndot = float(np.dot(v, normal))
    return ExitRecord(time=t_exit, point=point, normal_dot=min(ndot, 0.0))


def speed_factor(v, kappa: float) -> float:
    """(1+|v|^2)^(|kappa|/2), the soft-potential ray speed-up factor."""
    v = np.asarray(v, dtype=float)
    return float((1.0 + np.dot(v, v)) ** (abs(kappa) / 2.0))


def speeded_exit_time(domain: Domain, x, v, kappa: float) -> ExitRecord:
    """Backward exit along the sped-up ray with velocity (1+|v|^2)^(|k|/2) v.

    The ray is the same line as the standard one, so the exit point is
    identical and only the exit time rescales.
    """
    if not -3.0 < kappa < 0.0:
        raise AdmissibilityError(f"kappa={kappa} outside (-3, 0)")
    rec = exit_time(domain, x, v)
    fac = speed_factor(v, kappa)
    return ExitRecord(time=rec.time / fac, point=rec.point, normal_dot=rec.normal_dot)


def is_near_grazing(domain: Domain, x, v, eps: float = GRAZING_EPS) -> bool:
    """Membership in the near-grazing band of the phase boundary.

    True when v is nearly tangential (|v.n| < eps), very fast (|v| >= 1/eps)
    or very slow (|v| <= eps).
    """
    v = np.asarray(v, dtype=float)
    speed = float(np.linalg.norm(v))
    if speed >= 1.0 / eps or speed <= eps:
        return True
    n = domain.outward_normal(np.asarray(x, dtype=float))
    return abs(float(np.dot(v, n))) < eps


def ball(radius: float) -> Domain:
    return Domain(shape="ball", radius=radius)


def slab(half_widths, periodic=(False, True, True)) -> Domain:
    """Axis-aligned box; default has walls only on the first axis."""
    return Domain(shape="slab", half_widths=tuple(half_widths), periodic=tuple(periodic))
