"""Ray tracing, Frenet-Serret and rotation-minimizing frames, Rytov term.

Rays follow the characteristics of the dispersion relation
``omega = v(x) |k|``: ``dx/dt = v khat``, ``dk/dt = -|k| grad v``, so
``omega`` is conserved along each ray and the arclength satisfies
``ds = v dt``. Frames are built on uniformly resampled arclength grids.

The optical rotation coefficient ``n`` couples a choice of polarization
basis ``(z1, z2)`` perpendicular to the ray to the medium through the
operator ``(grad v . grad_k)``. For bases that are functions of the
direction ``khat`` alone (degree-0 in k), that operator evaluated along
a ray equals ``-(v/|k|) d/ds`` applied to the transported basis: the
perpendicular part of ``grad v`` is exactly the direction ``khat``
moves, and the radial part acts trivially. ``optical_rotation_n`` uses
this identity; ``optical_rotation_direct`` evaluates the same operator
by finite differences of a closed-form basis under k-perturbed
re-traces of the direction, which the tests compare against the curve
form. In a homogeneous medium the operator is identically zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp
from scipy.optimize import brentq

_KAPPA_FLOOR = 1e-10


class RayError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# 3D media with closed-form gradients
# ---------------------------------------------------------------------------


class HomogeneousVelocity:
    def __init__(self, v0: float = 1.0):
        self.v0 = float(v0)

    def value(self, x):
        return self.v0

    def gradient(self, x):
        return np.zeros(3)


class LinearVelocity:
    """v(x) = v0 + g . x (planar rays: constant gradient)."""

    def __init__(self, v0: float = 1.0, g=(0.0, 0.0, 0.1)):
        self.v0 = float(v0)
        self.g = np.asarray(g, dtype=float)

    def value(self, x):
        return self.v0 + float(self.g @ np.asarray(x))

    def gradient(self, x):
        return self.g.copy()


class ConicalVelocity:
    """v proportional to the cylindrical radius: v = v0 * rho / rho0.

    A ray launched tangentially on the cylinder rho = rho0 with no
    axial momentum runs on an exact circle of radius rho0 (curvature
    exactly 1/rho0, zero torsion).
    """

    def __init__(self, v0: float = 1.0, rho0: float = 1.0):
        self.v0 = float(v0)
        self.rho0 = float(rho0)

    def value(self, x):
        rho = float(np.hypot(x[0], x[1]))
        return self.v0 * rho / self.rho0

    def gradient(self, x):
        rho = float(np.hypot(x[0], x[1]))
        if rho == 0.0:
            raise RayError("conical velocity gradient undefined on the axis")
        return np.array([x[0] / rho, x[1] / rho, 0.0]) * (self.v0 / self.rho0)


class RingWaveguideVelocity:
    """Parabolic velocity channel around the cylinder rho = rho_c.

    v = v0 * (1 + ((rho - rho_c) / width)^2) guides rays around the
    ring; launching with an axial wavevector component produces bound
    spiral rays whose curvature and torsion both vary, the generic
    torsive test case.
    """

    def __init__(self, v0: float = 1.0, rho_c: float = 2.0, width: float = 1.0):
        self.v0 = float(v0)
        self.rho_c = float(rho_c)
        self.width = float(width)

    def value(self, x):
        rho = float(np.hypot(x[0], x[1]))
        return self.v0 * (1.0 + ((rho - self.rho_c) / self.width) ** 2)

    def gradient(self, x):
        rho = float(np.hypot(x[0], x[1]))
        if rho == 0.0:
            raise RayError("waveguide velocity gradient undefined on the axis")
        coef = 2.0 * self.v0 * (rho - self.rho_c) / self.width ** 2
        return np.array([x[0] / rho, x[1] / rho, 0.0]) * coef


# ---------------------------------------------------------------------------
# ray data
# ---------------------------------------------------------------------------


@dataclass
class RayFrame:
    """Sampled ray with (optionally) Frenet data attached."""

    velocity_model: object
    s: np.ndarray                   # (n,)
    x: np.ndarray                   # (n, 3)
    k: np.ndarray                   # (n, 3)
    omega0: float
    omega_drift: float
    tangent: np.ndarray | None = None
    normal: np.ndarray | None = None
    binormal: np.ndarray | None = None
    kappa: np.ndarray | None = None
    tau: np.ndarray | None = None
    alpha: np.ndarray | None = None

    @property
    def n_samples(self) -> int:
        return self.s.size

    def speed(self) -> np.ndarray:
        return np.array([self.velocity_model.value(p) for p in self.x])

    def k_norm(self) -> np.ndarray:
        return np.linalg.norm(self.k, axis=1)


@dataclass
class PolarizationBasis:
    """Orthonormal pair spanning the plane perpendicular to the tangent."""

    z1: np.ndarray
    z2: np.ndarray

    def validate(self, tangent: np.ndarray, tol: float = 1e-8) -> None:
        checks = (
            np.abs(np.einsum("ij,ij->i", self.z1, self.z1) - 1.0),
            np.abs(np.einsum("ij,ij->i", self.z2, self.z2) - 1.0),
            np.abs(np.einsum("ij,ij->i", self.z1, self.z2)),
            np.abs(np.einsum("ij,ij->i", self.z1, tangent)),
            np.abs(np.einsum("ij,ij->i", self.z2, tangent)),
        )
        worst = max(float(np.max(c)) for c in checks)
        if worst > tol:
            raise RayError(f"polarization basis not orthonormal: defect {worst:.3e}")


def trace_ray(v_model, x0, k0, length: float, tol: float = 1e-10,
              n_samples: int = 512) -> RayFrame:
    """Integrate the ray characteristics and resample on uniform arclength."""
    x0 = np.asarray(x0, dtype=float)
    k0 = np.asarray(k0, dtype=float)
    knorm0 = float(np.linalg.norm(k0))
    if knorm0 <= 0:
        raise RayError("|k0| must be positive")
    omega0 = v_model.value(x0) * knorm0

    def odes(_t, y):
        x, k = y[:3], y[3:6]
        kn = np.linalg.norm(k)
        if kn < 1e-12 * knorm0:
            raise RayError("|k| collapsed below floor during tracing")
        v = v_model.value(x)
        g = v_model.gradient(x)
        return np.concatenate([v * k / kn, -kn * g, [v]])

    def reached(_t, y):
        return y[6] - length

    reached.terminal = True
    reached.direction = 1.0

    t_max = 64.0 * length / v_model.value(x0)
    sol = solve_ivp(odes, (0.0, t_max), np.concatenate([x0, k0, [0.0]]),
                    rtol=tol, atol=tol, dense_output=True, events=reached,
                    method="RK45", max_step=t_max / 64.0)
    if sol.t_events[0].size == 0:
        raise RayError("ray did not reach the requested arclength; "
                       "step-size underflow or domain exit")
    t_end = float(sol.t_events[0][0])

    s_grid = np.linspace(0.0, length, n_samples)
    t_grid = np.empty(n_samples)
    t_lo = 0.0
    for j, s_j in enumerate(s_grid):
        if j == 0:
            t_grid[j] = 0.0
            continue
        t_grid[j] = brentq(lambda t: sol.sol(t)[6] - s_j, t_lo, t_end,
                           xtol=1e-14 * max(1.0, t_end))
        t_lo = t_grid[j]

    states = sol.sol(t_grid)
    x = states[:3].T.copy()
    k = states[3:6].T.copy()
    omega = np.array([v_model.value(p) for p in x]) * np.linalg.norm(k, axis=1)
    drift = float(np.max(np.abs(omega - omega0)) / max(abs(omega0), 1e-300))
    return RayFrame(v_model, s_grid, x, k, omega0, drift)


def _normalize_rows(a: np.ndarray) -> np.ndarray:
    return a / np.linalg.norm(a, axis=1, keepdims=True)


def frenet_frame(ray: RayFrame) -> RayFrame:
    """Fill tangent/normal/binormal, curvature and torsion.

    Derivatives along arclength are second-order differences. Where the
    curvature falls below the floor the normal is continued from the
    previous sample (projected back into the normal plane); a straight
    start is seeded with an arbitrary perpendicular direction.
    """
    t_vec = _normalize_rows(ray.k)
    dt = np.gradient(t_vec, ray.s, axis=0, edge_order=2)
    kappa = np.linalg.norm(dt, axis=1)

    n = t_vec.shape[0]
    normal = np.empty_like(t_vec)
    prev = None
    for j in range(n):
        if kappa[j] > _KAPPA_FLOOR:
            cand = dt[j] / kappa[j]
        elif prev is not None:
            cand = prev
        else:
            # degenerate start: any unit vector perpendicular to T
            a = np.array([0.0, 0.0, 1.0])
            if abs(t_vec[j] @ a) > 0.9:
                a = np.array([1.0, 0.0, 0.0])
            cand = np.cross(t_vec[j], a)
        cand = cand - (cand @ t_vec[j]) * t_vec[j]
        nrm = np.linalg.norm(cand)
        if nrm < 1e-14:
            raise RayError(f"cannot continue the frame at sample {j}")
        normal[j] = cand / nrm
        prev = normal[j]
    binormal = np.cross(t_vec, normal)

    db = np.gradient(binormal, ray.s, axis=0, edge_order=2)
    # least-squares fit of dB/ds = -tau N sample by sample
    tau = -np.einsum("ij,ij->i", db, normal)

    ray.tangent, ray.normal, ray.binormal = t_vec, normal, binormal
    ray.kappa, ray.tau = kappa, tau
    return ray


def darboux_frame(ray: RayFrame, alpha0: float = 0.0) -> PolarizationBasis:
    """Rotate the Frenet pair by alpha with d(alpha)/ds = -tau.

    The resulting basis has derivatives parallel to the tangent up to
    discretization error, which is what removes the optical rotation
    coupling.
    """
    if ray.tau is None or ray.normal is None:
        raise RayError("run frenet_frame before building the Darboux frame")
    alpha = alpha0 - np.concatenate(
        [[0.0], cumulative_trapezoid(ray.tau, ray.s)])
    ray.alpha = alpha
    c, s = np.cos(alpha)[:, None], np.sin(alpha)[:, None]
    z1 = c * ray.normal + s * ray.binormal
    z2 = -s * ray.normal + c * ray.binormal
    basis = PolarizationBasis(z1, z2)
    basis.validate(ray.tangent)
    return basis


def fixed_frame(ray: RayFrame, axis=(0.0, 0.0, 1.0)) -> PolarizationBasis:
    """Lab-frame basis z1 = normalize(axis x khat), z2 = khat x z1."""
    if ray.tangent is None:
        ray = frenet_frame(ray)
    a = np.asarray(axis, dtype=float)
    z1 = np.cross(np.broadcast_to(a, ray.tangent.shape), ray.tangent)
    norms = np.linalg.norm(z1, axis=1)
    if np.any(norms < 1e-10):
        raise RayError("fixed-frame axis is parallel to the ray somewhere")
    z1 = z1 / norms[:, None]
    z2 = np.cross(ray.tangent, z1)
    basis = PolarizationBasis(z1, z2)
    basis.validate(ray.tangent)
    return basis


def fixed_frame_fn(axis=(0.0, 0.0, 1.0)):
    """Closed-form direction-only version of :func:`fixed_frame`."""
    a = np.asarray(axis, dtype=float)

    def basis_at(khat: np.ndarray):
        z1 = np.cross(a, khat)
        nrm = np.linalg.norm(z1)
        if nrm < 1e-10:
            raise RayError("fixed-frame axis parallel to khat")
        z1 = z1 / nrm
        return z1, np.cross(khat, z1)

    return basis_at


def optical_rotation_n(ray: RayFrame, basis: PolarizationBasis) -> np.ndarray:
    """Antisymmetric rotation coefficient n with N = n J.

    n = -z2 . (grad v . grad_k) z1, evaluated through the curve identity
    (grad v . grad_k) z = -(v/|k|) dz/ds for direction-only bases
    transported along the ray. Exactly zero wherever grad v vanishes.
    """
    if ray.tangent is None:
        raise RayError("ray needs frame data")
    basis.validate(ray.tangent)
    dz1 = np.gradient(basis.z1, ray.s, axis=0, edge_order=2)
    v = ray.speed()
    knorm = ray.k_norm()
    gnorm = np.array([np.linalg.norm(ray.velocity_model.gradient(p)) for p in ray.x])
    n_vals = (v / knorm) * np.einsum("ij,ij->i", basis.z2, dz1)
    n_vals[gnorm == 0.0] = 0.0
    return n_vals


def optical_rotation_direct(ray: RayFrame, basis_at, rel_step: float = 1e-6) -> np.ndarray:
    """Direct finite-difference evaluation of -z2 . (grad v . grad_k) z1.

    ``basis_at(khat) -> (z1, z2)`` must be a closed-form direction-only
    basis; the k-perturbation re-evaluates it at khat(k +/- eps grad v).
    """
    n = ray.n_samples
    out = np.zeros(n)
    for j in range(n):
        g = ray.velocity_model.gradient(ray.x[j])
        gn = np.linalg.norm(g)
        if gn == 0.0:
            continue
        kj = ray.k[j]
        eps = rel_step * np.linalg.norm(kj) / gn
        kp = kj + eps * g
        km = kj - eps * g
        z1p, _ = basis_at(kp / np.linalg.norm(kp))
        z1m, _ = basis_at(km / np.linalg.norm(km))
        dz1 = (z1p - z1m) / (2.0 * eps)
        _, z2 = basis_at(kj / np.linalg.norm(kj))
        out[j] = -float(z2 @ dz1)
    return out


def rotate_stokes(s, theta):
    """Basis-rotation law: I and V fixed, (Q, U) rotated by 2 theta."""
    s = np.asarray(s, dtype=float)
    c, sn = np.cos(2.0 * np.asarray(theta)), np.sin(2.0 * np.asarray(theta))
    out = np.array(s, copy=True)
    out[..., 1] = c * s[..., 1] + sn * s[..., 2]
    out[..., 2] = -sn * s[..., 1] + c * s[..., 2]
    return out
