"""Linearised and bilinear collision operators on the velocity lattice.

The linearised operator splits as L = nu - K with nu the multiplicative
collision frequency and K a symmetric-kernel integral operator assembled by
direct quadrature over the collision partner and the scattering sphere.  A
smoothstep cutoff in the relative velocity splits K into a near part (small
|v-u|) and the far remainder; the near part shrinks like m^(3+kappa).

Matrices fold the lattice quadrature weight, i.e. ``tables.kernel @ f``
approximates (K f) at the nodes.  After assembly the kernel matrix is
symmetrised (the continuum kernel k(v, u) is symmetric; the raw scatter
quadrature breaks this at quadrature-error level, which is recorded in the
diagnostics rather than silently kept).

Binary cache layout (little-endian float64 throughout): a 10-entry header
``[format, v_max, n_per_axis, kappa, b0, m (nan if unsplit), n_polar,
n_azimuth, n_nodes, reserved]`` followed by nu (N), K (N*N row-major), and,
when split, K_near and K_far (N*N each).
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import AdmissibilityError, InterpolationRangeError, QuadratureError
from .quadrature import angular_rule, cube_radial_moment, radial_moment_with_cutoff
from .velocity import VelocityGrid, WeightSpec, sqrt_maxwellian

_FORMAT_VERSION = 1.0


def chi_cutoff(s, m: float):
    """Cubic smoothstep cutoff: 1 on [0, m], 0 beyond 2m, C^1 monotone."""
    s = np.asarray(s, dtype=float)
    t = np.clip((s - m) / m, 0.0, 1.0)
    return 1.0 - t * t * (3.0 - 2.0 * t)


@dataclass
class CollisionTables:
    """Assembled collision frequency and dense kernel matrices."""

    grid: VelocityGrid
    kappa: float
    b0: float
    n_polar: int
    n_azimuth: int
    nu: np.ndarray
    kernel: np.ndarray
    m: float | None = None
    kernel_near: np.ndarray | None = None
    kernel_far: np.ndarray | None = None
    interp_order: int = 3
    diagnostics: dict = dataclasses.field(default_factory=dict)

    @property
    def angular_weight_sum(self) -> float:
        """Total angular weight 2*pi*b0 (the |cos| integral is exact)."""
        *_, w = angular_rule(self.n_polar, self.n_azimuth)
        return self.b0 * float(np.sum(w))

    def apply_linear(self, f) -> np.ndarray:
        """(nu - K) f = L f on the lattice."""
        return self.nu * f - self.kernel @ f

    def apply_weighted_kernel(self, h, spec: WeightSpec) -> np.ndarray:
        """w K (h / w) without materialising the weighted matrix."""
        w = spec(self.grid.nodes)
        return w * (self.kernel @ (h / w))

    def cache_key(self) -> str:
        m_tag = "full" if self.m is None else f"m{self.m:.6g}"
        return (
            f"tables-{self.grid.grid_hash()}-k{self.kappa:.6g}"
            f"-b{self.b0:.6g}-a{self.n_polar}x{self.n_azimuth}"
            f"-o{self.interp_order}-{m_tag}"
        )


def _angular_arrays(n_polar, n_azimuth):
    c, s, cp, sp, w = angular_rule(n_polar, n_azimuth)
    return (
        np.ascontiguousarray(c),
        np.ascontiguousarray(s),
        np.ascontiguousarray(cp),
        np.ascontiguousarray(sp),
        np.ascontiguousarray(w),
    )


def _symmetrise(mat):
    """Average with the transpose; returns (symmetric matrix, raw defect)."""
    defect = float(np.max(np.abs(mat - mat.T)))
    return 0.5 * (mat + mat.T), defect


def _conservative_correction(grid, nu, kmat):
    """Minimal symmetric update making K reproduce nu on the invariant span.

    The continuum kernel satisfies K psi = nu psi for the five collision
    invariants psi; quadrature and interpolation break this at the percent
    level.  The defect is removed by the smallest symmetric rank-<=5 matrix
    E with (K + E) psi = nu psi, which restores exact annihilation of the
    invariants by L = nu - K and, by symmetry, exact conservation of the
    five moment functionals under K.  Returns (K + E, per-mode raw defects,
    max |E|).
    """
    proj = MacroProjection.build(grid)
    basis = proj.basis  # quadrature-orthonormal, so pinv = h^3 * basis.T
    target = nu[:, None] * basis
    resid = target - kmat @ basis
    raw_rel = np.sqrt(
        np.sum(resid**2, axis=0) / np.maximum(np.sum(target**2, axis=0), 1e-300)
    )
    # E = R P + (R P)^T - P^T (Psi^T R) P with P = h^3 basis^T (the
    # quadrature pseudo-inverse); Psi^T R is symmetric because both K and
    # the diagonal nu are, which makes E Psi = R exact
    e_mat = resid @ (grid.cell_weight * basis.T)
    e_mat = e_mat + e_mat.T - (grid.cell_weight * basis) @ (basis.T @ resid) @ (
        grid.cell_weight * basis.T
    )
    corrected = kmat + e_mat
    return corrected, raw_rel, float(np.max(np.abs(e_mat)))


def assemble_tables(
    grid: VelocityGrid,
    kappa: float,
    b0: float = 1.0,
    n_polar: int = 8,
    n_azimuth: int = 12,
    interp_order: int = 3,
    conserving: bool = True,
    refinement_check: bool = False,
    refinement_tol: float = 0.05,
    cache_dir: str | Path | None = None,
) -> CollisionTables:
    """Assemble nu and the dense kernel K = gain - loss by direct quadrature.

    With ``conserving`` (the default) the symmetrised matrix receives the
    minimal symmetric rank-5 update that makes the five collision-invariant
    identities K psi = nu psi exact; the pre-correction defects stay in the
    diagnostics as the honest quadrature-error record.  With
    ``refinement_check`` the assembly is repeated under a half-resolution
    sphere rule and a :class:`QuadratureError` is raised if matrix entries
    move by more than ``refinement_tol`` relative (measured on entries
    above a small floor).  ``cache_dir`` enables the binary cache described
    in the module docstring.
    """
    if not -3.0 < kappa < 0.0:
        raise AdmissibilityError(f"kappa={kappa} outside (-3, 0)")
    if b0 <= 0:
        raise AdmissibilityError("angular amplitude must be positive")

    if interp_order not in (1, 3):
        raise AdmissibilityError("interp_order must be 1 or 3")
    if cache_dir is not None:
        probe = CollisionTables(
            grid, kappa, b0, n_polar, n_azimuth, np.empty(0), np.empty((0, 0)),
            interp_order=interp_order,
        )
        path = Path(cache_dir) / (probe.cache_key() + ".bin")
        if path.exists():
            return load_tables(path, grid)

    nu, kmat, defect = _assemble_raw(grid, kappa, b0, n_polar, n_azimuth, None, interp_order)
    diag = {"symmetry_defect_raw": defect}
    if conserving:
        kmat, raw_rel, corr_max = _conservative_correction(grid, nu, kmat)
        diag["annihilation_raw"] = [float(r) for r in raw_rel]
        diag["conservative_correction_max"] = corr_max
        diag["kernel_max"] = float(np.max(np.abs(kmat)))

    if refinement_check:
        _, kmat_half, _ = _assemble_raw(
            grid, kappa, b0, max(n_polar // 2, 2), max(n_azimuth // 2, 4), None, interp_order
        )
        floor = 1e-12 * np.max(np.abs(kmat))
        mask = np.abs(kmat) > floor
        rel = np.max(np.abs((kmat_half[mask] - kmat[mask]) / kmat[mask]))
        if rel > refinement_tol:
            raise QuadratureError(
                f"kernel entries move {rel:.3e} under half-resolution sphere rule"
            )

    tables = CollisionTables(
        grid=grid,
        kappa=kappa,
        b0=b0,
        n_polar=n_polar,
        n_azimuth=n_azimuth,
        nu=nu,
        kernel=kmat,
        interp_order=interp_order,
        diagnostics=diag,
    )
    if cache_dir is not None:
        save_tables(tables, path)
    return tables


def _assemble_raw(grid, kappa, b0, n_polar, n_azimuth, cutoff_m, interp_order=3):
    ang = _angular_arrays(n_polar, n_azimuth)
    if cutoff_m is None:
        cell = cube_radial_moment(kappa, grid.h)
        m_arg = -1.0
    else:
        cell = radial_moment_with_cutoff(kappa, grid.h, cutoff_m)
        m_arg = float(cutoff_m)
    nu, kmat = _kernels.assemble_kernel(
        np.ascontiguousarray(grid.nodes),
        np.ascontiguousarray(grid.sqrt_mu),
        np.ascontiguousarray(1.0 / grid.sqrt_mu),
        np.ascontiguousarray(grid.mu),
        float(grid.axis[0]),
        grid.h,
        grid.n_per_axis,
        float(kappa),
        float(b0),
        *ang,
        cell,
        m_arg,
        interp_order,
    )
    kmat, defect = _symmetrise(kmat)
    return nu, kmat, defect


def split_cutoff(tables: CollisionTables, m: float) -> CollisionTables:
    """Split K into near/far parts at relative-velocity scale m.

    The near matrix carries the smoothstep factor inside the quadrature;
    the far part is the difference, and the full kernel is recomposed as
    their sum so the splitting identity holds bitwise.
    """
    if not 0.0 < m <= 1.0:
        raise AdmissibilityError("cutoff scale m must lie in (0, 1]")
    _, near, _ = _assemble_raw(
        tables.grid, tables.kappa, tables.b0, tables.n_polar, tables.n_azimuth, m,
        tables.interp_order,
    )
    far = tables.kernel - near
    recomposed = near + far
    diag = dict(tables.diagnostics)
    diag["split_recompose_shift"] = float(np.max(np.abs(recomposed - tables.kernel)))
    return dataclasses.replace(
        tables,
        kernel=recomposed,
        m=m,
        kernel_near=near,
        kernel_far=far,
        diagnostics=diag,
    )


def apply_near_kernel_to_ones(tables: CollisionTables, m: float) -> np.ndarray:
    """(K_near 1)(v) for the smallness-scaling sweep; assembles only the near
    part (cheap: the integrand is supported on |v-u| < 2m)."""
    _, near, _ = _assemble_raw(
        tables.grid, tables.kappa, tables.b0, tables.n_polar, tables.n_azimuth, m,
        tables.interp_order,
    )
    return near @ np.ones(tables.grid.n_nodes)


@dataclass(frozen=True)
class GammaParts:
    """Bilinear collision output: total = gain - loss, loss = f * rate."""

    total: np.ndarray
    gain: np.ndarray
    loss: np.ndarray


def _check_range_mode(grid, fields, range_mode):
    if range_mode == "zero":
        return
    if range_mode not in ("error", "clamp"):
        raise AdmissibilityError(f"unknown range mode {range_mode!r}")
    # outermost lattice shell: mass there means the box truncation is felt
    shell = np.max(np.abs(grid.nodes), axis=1) > grid.v_max - 1.5 * grid.h
    for f in fields:
        scale = float(np.max(np.abs(f)))
        if scale == 0.0:
            continue
        leak = float(np.max(np.abs(f[shell]))) / scale
        if leak > 1e-6:
            msg = (
                f"input field carries relative weight {leak:.2e} on the outer "
                "lattice shell; post-collision states will be truncated"
            )
            if range_mode == "error":
                raise InterpolationRangeError(msg)
            warnings.warn(msg)


def collision_bilinear(
    tables: CollisionTables,
    f,
    g,
    u_cut: float | None = None,
    range_mode: str = "zero",
    interp_order: int | None = None,
) -> GammaParts:
    """Bilinear collision form with gain/loss split.

    Loss is ``f(v) * int int B sqrt(mu)(u) g(u) dw du``; gain integrates
    ``B sqrt(mu)(u) g(u') f(v')``.  Post-collision points outside the box
    are zero-extended in the default mode; ``range_mode='error'|'clamp'``
    raises/warns when the input fields carry weight on the outer shell so
    the truncation would actually bite.  ``u_cut`` truncates the partner
    integral at |u| > u_cut (importance cutoff; None = full box).
    """
    grid = tables.grid
    f = np.ascontiguousarray(f, dtype=float)
    g = np.ascontiguousarray(g, dtype=float)
    _check_range_mode(grid, (f, g), range_mode)
    ang = _angular_arrays(tables.n_polar, tables.n_azimuth)
    cell = cube_radial_moment(tables.kappa, grid.h)
    u_cut_sq = math.inf if u_cut is None else float(u_cut) ** 2
    sq = grid.sqrt_mu
    gain, rate = _kernels.bilinear_collision_apply(
        np.ascontiguousarray(grid.nodes),
        np.ascontiguousarray(g / sq),
        np.ascontiguousarray(f / sq),
        g,
        np.ascontiguousarray(sq),
        np.ascontiguousarray(sq),
        float(grid.axis[0]),
        grid.h,
        grid.n_per_axis,
        float(tables.kappa),
        float(tables.b0),
        *ang,
        cell,
        u_cut_sq,
        tables.interp_order if interp_order is None else interp_order,
        1 if range_mode == "clamp" else 0,
    )
    loss = f * rate
    return GammaParts(total=gain - loss, gain=gain, loss=loss)


def background_coupling(tables: CollisionTables, f_star, f, u_cut=None) -> np.ndarray:
    """Linearised coupling against a stationary background perturbation:
    -Gamma(f_star, f) - Gamma(f, f_star)."""
    a = collision_bilinear(tables, f_star, f, u_cut=u_cut)
    b = collision_bilinear(tables, f, f_star, u_cut=u_cut)
    return -(a.total + b.total)


def background_collision_frequency(tables: CollisionTables, density_field) -> np.ndarray:
    """Collision frequency against an absolute density F on the lattice.

    Reduces to nu when F = mu; a warning is emitted if the result leaves the
    bracket [nu/2, 3 nu/2], which signals either a too-large wall variation
    or a too-coarse grid.
    """
    grid = tables.grid
    field = np.ascontiguousarray(density_field, dtype=float)
    cell = cube_radial_moment(tables.kappa, grid.h)
    base = _kernels.relspeed_weighted_sum(
        np.ascontiguousarray(grid.nodes), field, float(tables.kappa), grid.h**3, cell
    )
    nu_star = tables.angular_weight_sum * base
    lo = np.min(nu_star - 0.5 * tables.nu)
    hi = np.max(nu_star - 1.5 * tables.nu)
    if lo < 0.0 or hi > 0.0:
        warnings.warn(
            "background collision frequency leaves the [nu/2, 3nu/2] bracket; "
            "the background deviates too far from the global Maxwellian"
        )
    return nu_star


@dataclass
class MacroProjection:
    """Orthonormal basis of the discrete collision-invariant subspace."""

    grid: VelocityGrid
    basis: np.ndarray  # (n_nodes, 5)

    @classmethod
    def build(cls, grid: VelocityGrid) -> "MacroProjection":
        sq = grid.sqrt_mu
        v = grid.nodes
        raw = np.stack(
            [sq, v[:, 0] * sq, v[:, 1] * sq, v[:, 2] * sq, grid.speeds**2 * sq],
            axis=1,
        )
        gram = raw.T @ raw * grid.cell_weight
        chol = np.linalg.cholesky(gram)
        basis = np.linalg.solve(chol, raw.T).T  # quadrature-orthonormal
        return cls(grid=grid, basis=basis)

    def gram_defect(self) -> float:
        gram = self.basis.T @ self.basis * self.grid.cell_weight
        return float(np.max(np.abs(gram - np.eye(5))))

    def coefficients(self, f) -> np.ndarray:
        return self.basis.T @ np.asarray(f) * self.grid.cell_weight


def macro_project(proj: MacroProjection, f):
    """Orthogonal projection onto the invariant subspace; returns (Pf, f-Pf)."""
    f = np.asarray(f, dtype=float)
    pf = proj.basis @ proj.coefficients(f)
    return pf, f - pf


def kernel_action_monte_carlo(
    grid: VelocityGrid,
    kappa: float,
    b0: float,
    f,
    v,
    n_samples: int,
    rng: np.random.Generator,
):
    """Independent Monte-Carlo estimate of (K f)(v) for a lattice field f.

    Samples the collision partner from a standard Gaussian and the
    scattering direction from the |cos|-weighted sphere law, evaluating the
    same integrand as the deterministic assembly but with no lattice sum and
    no scatter step.  Returns (estimate, standard_error).
    """
    f = np.asarray(f, dtype=float)
    v = np.asarray(v, dtype=float)
    u = rng.normal(size=(n_samples, 3))
    q_u = np.exp(-0.5 * np.sum(u * u, axis=1)) / (2.0 * math.pi) ** 1.5
    c = np.sqrt(rng.random(n_samples)) * np.where(rng.random(n_samples) < 0.5, 1.0, -1.0)
    psi = 2.0 * math.pi * rng.random(n_samples)
    # angular density |c|/(2 pi) on the sphere; weighted measure total 2 pi b0
    z = v[None, :] - u
    dist = np.linalg.norm(z, axis=1)
    ok = dist > 1e-12
    zhat = np.zeros_like(z)
    zhat[ok] = z[ok] / dist[ok, None]
    t1 = np.cross(zhat, np.eye(3)[np.argmin(np.abs(zhat), axis=1)])
    t1 /= np.maximum(np.linalg.norm(t1, axis=1), 1e-300)[:, None]
    t2 = np.cross(zhat, t1)
    s = np.sqrt(np.maximum(1.0 - c * c, 0.0))
    omega = (
        c[:, None] * zhat
        + s[:, None] * (np.cos(psi)[:, None] * t1 + np.sin(psi)[:, None] * t2)
    )
    proj = dist * c
    v_post = v[None, :] - proj[:, None] * omega
    u_post = u + proj[:, None] * omega

    sq = sqrt_maxwellian
    ratio = f / grid.sqrt_mu
    # same field model as the deterministic path: f = sqrt(mu) * interp(f/sqrt(mu))
    f_at_v_post = sq(v_post) * trilinear_gather(grid, ratio, v_post)
    f_at_u_post = sq(u_post) * trilinear_gather(grid, ratio, u_post)
    f_at_u = sq(u) * trilinear_gather(grid, ratio, u)
    gain = sq(u) * (sq(u_post) * f_at_v_post + sq(v_post) * f_at_u_post)
    loss = sq(v) * sq(u) * f_at_u
    angular_total = 2.0 * math.pi * b0
    vals = np.where(ok, dist**kappa * (gain - loss) / q_u * angular_total, 0.0)
    est = float(np.mean(vals))
    err = float(np.std(vals) / math.sqrt(n_samples))
    return est, err


def trilinear_gather(grid: VelocityGrid, field, points) -> np.ndarray:
    """Vectorised trilinear interpolation with zero extension outside."""
    field = np.asarray(field, dtype=float)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = grid.n_per_axis
    g = (pts - grid.axis[0]) / grid.h
    inside = np.all((g >= 0.0) & (g <= n - 1), axis=1)
    gi = np.clip(np.floor(g).astype(int), 0, n - 2)
    fr = g - gi
    out = np.zeros(pts.shape[0])
    idx = lambda a, b, c: (a * n + b) * n + c
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                wgt = (
                    (fr[:, 0] if dx else 1 - fr[:, 0])
                    * (fr[:, 1] if dy else 1 - fr[:, 1])
                    * (fr[:, 2] if dz else 1 - fr[:, 2])
                )
                out += wgt * field[idx(gi[:, 0] + dx, gi[:, 1] + dy, gi[:, 2] + dz)]
    out[~inside] = 0.0
    return out if np.asarray(points).ndim > 1 else out[0]


def save_tables(tables: CollisionTables, path: str | Path) -> None:
    """Write the binary cache (layout in the module docstring)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = np.array(
        [
            _FORMAT_VERSION,
            tables.grid.v_max,
            float(tables.grid.n_per_axis),
            tables.kappa,
            tables.b0,
            math.nan if tables.m is None else tables.m,
            float(tables.n_polar),
            float(tables.n_azimuth),
            float(tables.grid.n_nodes),
            0.0,
        ],
        dtype="<f8",
    )
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(tables.nu.astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(tables.kernel, dtype="<f8").tobytes())
        if tables.m is not None:
            fh.write(np.ascontiguousarray(tables.kernel_near, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(tables.kernel_far, dtype="<f8").tobytes())


def load_tables(path: str | Path, grid: VelocityGrid | None = None) -> CollisionTables:
    with open(path, "rb") as fh:
        header = np.frombuffer(fh.read(80), dtype="<f8")
        if header[0] != _FORMAT_VERSION:
            raise QuadratureError(f"unsupported cache format {header[0]}")
        v_max, n_ax = header[1], int(header[2])
        if grid is None:
            grid = VelocityGrid(v_max=v_max, n_per_axis=n_ax)
        elif grid.n_per_axis != n_ax or abs(grid.v_max - v_max) > 1e-12:
            raise QuadratureError("cache file does not match the requested grid")
        n = int(header[8])
        nu = np.frombuffer(fh.read(8 * n), dtype="<f8").copy()
        kernel = np.frombuffer(fh.read(8 * n * n), dtype="<f8").reshape(n, n).copy()
        m = None if math.isnan(header[5]) else float(header[5])
        near = far = None
        if m is not None:
            near = np.frombuffer(fh.read(8 * n * n), dtype="<f8").reshape(n, n).copy()
            far = np.frombuffer(fh.read(8 * n * n), dtype="<f8").reshape(n, n).copy()
    return CollisionTables(
        grid=grid,
        kappa=float(header[3]),
        b0=float(header[4]),
        n_polar=int(header[6]),
        n_azimuth=int(header[7]),
        nu=nu,
        kernel=kernel,
        m=m,
        kernel_near=near,
        kernel_far=far,
        diagnostics={"loaded_from": str(path)},
    )
