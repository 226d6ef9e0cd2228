"""Scattering kernels: redistribution tables, total rate, scalar reduction.

A kernel holds, per shell, the rate table ``sigma(theta, theta')``, the
real polarization transfer matrices ``T(theta, theta')`` and their
Mueller form (the action of ``W -> T W T^T`` on Stokes vectors). The
builtin kernel families are x-independent, so tables are stored once
per shell pair rather than per spatial point; accessors present the
logical per-(x, k, k') view.

Admissibility is enforced at construction: sigma must be symmetric and
nonnegative, T(k, k') must equal T(k', k)^T, and the angular quadrature
of sigma * T * T^T must be proportional to the identity. The last
condition defines the total rate and is what the energy-Casimir and
dissipation properties of the metric bracket rest on; kernels violating
it are rejected, not renormalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coherence import CoherenceField
from .grid import GridError, PhaseSpaceGrid


class KernelAdmissibilityError(ValueError):
    pass


# Pauli-type basis matching the Stokes storage: W = 0.5 * sum_c s_c B_c
_BASIS = np.array([
    [[1.0, 0.0], [0.0, 1.0]],          # I
    [[1.0, 0.0], [0.0, -1.0]],         # Q
    [[0.0, 1.0], [1.0, 0.0]],          # U
    [[0.0, 1j], [-1j, 0.0]],           # V
], dtype=complex)


def _profile(name: str, sigma0: float, param: float, delta: np.ndarray) -> np.ndarray:
    if sigma0 < 0:
        raise KernelAdmissibilityError("sigma0 must be nonnegative")
    if name == "uniform":
        return np.full_like(delta, sigma0)
    if name == "cos2":
        vals = sigma0 * (1.0 + param * np.cos(2.0 * delta))
        if np.any(vals < 0):
            raise KernelAdmissibilityError(
                "cos2 profile turns negative; need |anisotropy| <= 1"
            )
        return vals
    if name == "vonmises":
        return sigma0 * np.exp(param * (np.cos(delta) - 1.0))
    raise KernelAdmissibilityError(f"unknown sigma profile {name!r}")


@dataclass(frozen=True)
class IsotropicSpec:
    """sigma = const, T = identity."""

    sigma0: float


@dataclass(frozen=True)
class AngleSpec:
    """sigma = even profile of theta - theta', T = identity."""

    sigma0: float
    profile: str = "cos2"
    param: float = 0.5


@dataclass(frozen=True)
class RotationSpec:
    """T rotates the polarization plane by beta * (theta - theta')."""

    sigma0: float
    beta: float = 1.0
    profile: str = "uniform"
    param: float = 0.0


@dataclass(frozen=True)
class DiagTestSpec:
    """T = diag(cos(theta - theta'), 1): fails the total-rate identity.

    Kept as a regression probe for the admissibility validation; building
    it must raise.
    """

    sigma0: float = 1.0


KernelSpec = IsotropicSpec | AngleSpec | RotationSpec | DiagTestSpec


class ScatteringKernel:
    """Validated shell-pair tables plus the derived total rate."""

    def __init__(self, grid: PhaseSpaceGrid, sigma_table: np.ndarray,
                 t_table: np.ndarray, rate_tol: float = 1e-10):
        self.grid = grid
        self.sigma_table = np.asarray(sigma_table, dtype=float)
        self.t_table = np.asarray(t_table, dtype=float)
        ns, na = grid.n_shells, grid.n_angles
        if self.sigma_table.shape != (ns, na, na):
            raise GridError("sigma table shape mismatch")
        if self.t_table.shape != (ns, na, na, 2, 2):
            raise GridError("T table shape mismatch")
        self._validate(rate_tol)
        self.mueller = self._mueller_from_t(self.t_table)
        self._gain_op = self._build_gain_op()
        for arr in (self.sigma_table, self.t_table, self.mueller, self._gain_op,
                    self.sigma_total):
            arr.flags.writeable = False

    # -- construction helpers ------------------------------------------------

    def _validate(self, rate_tol: float) -> None:
        sig, t = self.sigma_table, self.t_table
        if np.any(sig < 0):
            raise KernelAdmissibilityError("sigma must be nonnegative")
        sym = np.max(np.abs(sig - np.swapaxes(sig, 1, 2)))
        scale = max(float(np.max(sig)), 1e-300)
        if sym > 1e-12 * scale:
            raise KernelAdmissibilityError(
                f"sigma(k, k') must be symmetric in k and k'; defect {sym:.3e}"
            )
        t_swap = np.swapaxes(np.swapaxes(t, 1, 2), 3, 4)
        t_defect = np.max(np.abs(t - t_swap))
        if t_defect > 1e-12 * max(float(np.max(np.abs(t))), 1e-300):
            raise KernelAdmissibilityError(
                f"T(k, k') must equal T(k', k)^T; defect {t_defect:.3e}"
            )
        # total-rate identity: the sigma-weighted quadrature of T T^T over
        # each shell must be a multiple of the identity
        gram = np.einsum("sjpab,sjpcb->sjpac", t, t)
        w_ang = self.grid.angular_weight  # (ns,)
        rate_mat = np.einsum("s,sjp,sjpac->sjac", w_ang, sig, gram)
        iso = 0.5 * (rate_mat[..., 0, 0] + rate_mat[..., 1, 1])
        dev = rate_mat - iso[..., None, None] * np.eye(2)
        dev_max = float(np.max(np.abs(dev)))
        mag = max(float(np.max(np.abs(rate_mat))), 1e-300)
        if dev_max > rate_tol * mag:
            raise KernelAdmissibilityError(
                "total-rate quadrature is not proportional to the identity "
                f"(defect {dev_max:.3e} vs tolerance {rate_tol:.1e} * {mag:.3e}); "
                "kernel is inadmissible"
            )
        if np.any(iso < -1e-12 * mag):
            raise KernelAdmissibilityError("total scattering rate must be nonnegative")
        self.sigma_total = np.maximum(iso, 0.0)  # (ns, na)

    @staticmethod
    def _mueller_from_t(t: np.ndarray) -> np.ndarray:
        # M_cd = 0.5 * Tr(B_c T B_d T^T); real for real T
        tc = t.astype(complex)
        sand = np.einsum("...ab,dbc,...ec->...dae", tc, _BASIS, tc)
        m = 0.5 * np.einsum("cba,...dab->...cd", _BASIS, sand)
        return np.ascontiguousarray(np.real(m))

    def _build_gain_op(self) -> np.ndarray:
        ns, na = self.grid.n_shells, self.grid.n_angles
        w_ang = self.grid.angular_weight
        op = (w_ang[:, None, None, None, None]
              * self.sigma_table[..., None, None] * self.mueller)
        # (s, j, p, c, c') -> (s, j*c, p*c')
        op = np.transpose(op, (0, 1, 3, 2, 4)).reshape(ns, na * 4, na * 4)
        return np.ascontiguousarray(op)

    # -- logical per-point accessors ------------------------------------------

    def sigma(self, x_index, shell: int, j: int, jp: int) -> float:
        """sigma(x, k, k'); builtin kernels carry no x dependence."""
        return float(self.sigma_table[shell, j, jp])

    def tmat(self, x_index, shell: int, j: int, jp: int) -> np.ndarray:
        return self.t_table[shell, j, jp].copy()

    def sigma_field(self) -> np.ndarray:
        """Total rate broadcast to a full scalar field."""
        out = np.empty(self.grid.shape)
        out[:] = self.sigma_total[None, None, :, :]
        return out


def build_kernel(spec: KernelSpec, grid: PhaseSpaceGrid,
                 rate_tol: float = 1e-10) -> ScatteringKernel:
    """Build tables for a kernel family and validate admissibility."""
    na = grid.n_angles
    ns = grid.n_shells
    delta = grid.theta[:, None] - grid.theta[None, :]

    if isinstance(spec, IsotropicSpec):
        sig = _profile("uniform", spec.sigma0, 0.0, delta)
        t = np.broadcast_to(np.eye(2), (na, na, 2, 2)).copy()
    elif isinstance(spec, AngleSpec):
        sig = _profile(spec.profile, spec.sigma0, spec.param, delta)
        t = np.broadcast_to(np.eye(2), (na, na, 2, 2)).copy()
    elif isinstance(spec, RotationSpec):
        sig = _profile(spec.profile, spec.sigma0, spec.param, delta)
        phi = spec.beta * delta
        c, s = np.cos(phi), np.sin(phi)
        t = np.empty((na, na, 2, 2))
        t[..., 0, 0] = c
        t[..., 0, 1] = -s
        t[..., 1, 0] = s
        t[..., 1, 1] = c
    elif isinstance(spec, DiagTestSpec):
        sig = _profile("uniform", spec.sigma0, 0.0, delta)
        t = np.zeros((na, na, 2, 2))
        t[..., 0, 0] = np.cos(delta)
        t[..., 1, 1] = 1.0
    else:
        raise KernelAdmissibilityError(f"unknown kernel spec {type(spec).__name__}")

    sigma_table = np.broadcast_to(sig, (ns, na, na)).copy()
    t_table = np.broadcast_to(t, (ns, na, na, 2, 2)).copy()
    return ScatteringKernel(grid, sigma_table, t_table, rate_tol=rate_tol)


def apply_scattering(kernel: ScatteringKernel, w: CoherenceField) -> np.ndarray:
    """Gain term: per point, the shell quadrature of sigma T W' T^T.

    Returns a Stokes field; the loss term -Sigma W is handled by the
    caller. Hermiticity of the output is structural (Stokes arithmetic).
    """
    grid = w.grid
    if kernel.grid is not grid:
        raise GridError("kernel and field must share one grid")
    return apply_gain_tables(kernel._gain_op, w.data)


def apply_gain_tables(gain_op: np.ndarray, stokes: np.ndarray) -> np.ndarray:
    n1, n2, ns, na, nc = stokes.shape
    vec = stokes.reshape(n1 * n2, ns, na * nc).transpose(1, 0, 2)
    out = np.matmul(vec, np.transpose(gain_op, (0, 2, 1)))
    return out.transpose(1, 0, 2).reshape(stokes.shape)


def scalar_kernel(kernel: ScatteringKernel) -> tuple[np.ndarray, np.ndarray]:
    """Scalar reduction: sigma' = 0.5 sigma Tr[T(k,k') T(k',k)], Sigma' its rate.

    Returns ``(sigma_prime, sigma_prime_total)`` with shapes
    ``(ns, na, na)`` and ``(ns, na)``.
    """
    t = kernel.t_table
    # Tr[T(k,k') T(k',k)] with T(k',k) read from the transposed pair slot
    tr = np.einsum("sjpab,spjba->sjp", t, t)
    sigma_prime = 0.5 * kernel.sigma_table * tr
    w_ang = kernel.grid.angular_weight
    sigma_prime_total = np.einsum("s,sjp->sj", w_ang, sigma_prime)
    return sigma_prime, sigma_prime_total


def scalar_gain_op(kernel: ScatteringKernel) -> np.ndarray:
    """Per-shell matrix applying the scalar gain integral to intensities."""
    sigma_prime, _ = scalar_kernel(kernel)
    return np.ascontiguousarray(
        kernel.grid.angular_weight[:, None, None] * sigma_prime
    )
