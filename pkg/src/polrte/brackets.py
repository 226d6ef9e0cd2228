"""Canonical and matrix brackets, discrete functionals, functional brackets.

The canonical bracket pairs each spatial axis with the matching
Cartesian k-component. The matrix extension acts on Hermitian fields in
Stokes form: writing a matrix as ``0.5 * (I*Id + Q*s3 + U*s1 - V*s2)``
(Pauli basis), the symmetrized product in the bracket reduces to real
arithmetic on the component vectors, so Hermiticity of bracket outputs
is structural.

Discrete functional derivatives are taken with respect to the
quadrature-weighted inner product ``<A, B> = sum_p w_p Tr(A_p B_p)``, so
the derivative of the linear test functional is exactly its coefficient
field. Antisymmetry of the Poisson bracket and symmetry / negative
semidefiniteness of the metric bracket hold to rounding by
construction; the Jacobi identity and the entropy Casimir hold at
second order in the grid spacing (centered differences are skew-adjoint
but satisfy no exact product rule) and are certified separately in
:mod:`polrte.verify`.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from .coherence import CoherenceField, stokes_to_matrix, trace_product
from .grid import GridError, PhaseSpaceGrid

if TYPE_CHECKING:  # pragma: no cover
    from .scattering import ScatteringKernel

_PAIRS = (("x1", "k1"), ("x2", "k2"))


def canonical_bracket(grid: PhaseSpaceGrid, f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """[f, g] = grad_x f . grad_k g - grad_k f . grad_x g on scalar fields."""
    grid.check_field(f)
    grid.check_field(g)
    if f.shape != g.shape:
        raise GridError("bracket arguments must live on the same grid")
    out = np.zeros_like(f)
    for ax_x, ax_k in _PAIRS:
        out += grid.ddx(f, ax_x) * grid.ddx(g, ax_k)
        out -= grid.ddx(f, ax_k) * grid.ddx(g, ax_x)
    return out


def _anticommutator_stokes(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Stokes components of {P, Q} = PQ + QP for Hermitian P, Q."""
    out = np.empty_like(p)
    out[..., 0] = np.sum(p * q, axis=-1)
    out[..., 1:] = p[..., :1] * q[..., 1:] + q[..., :1] * p[..., 1:]
    return out


def matrix_bracket(grid: PhaseSpaceGrid, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix Lie bracket of two Hermitian Stokes fields.

    Componentwise this is 0.5 * sum_m ({d_x A, d_k B} - {d_k A, d_x B})
    with anticommutators evaluated in the Pauli component basis.
    """
    grid.check_field(a)
    grid.check_field(b)
    if a.shape != b.shape or a.shape[-1] != 4:
        raise GridError("matrix bracket needs two Stokes fields on the same grid")
    out = np.zeros_like(a)
    for ax_x, ax_k in _PAIRS:
        ax_a, ak_a = grid.ddx(a, ax_x), grid.ddx(a, ax_k)
        ax_b, ak_b = grid.ddx(b, ax_x), grid.ddx(b, ax_k)
        out += _anticommutator_stokes(ax_a, ak_b)
        out -= _anticommutator_stokes(ak_a, ax_b)
    return 0.5 * out


def inner(grid: PhaseSpaceGrid, a: np.ndarray, b: np.ndarray) -> float:
    """Weighted inner product sum_p w_p Tr(A_p B_p) of Stokes fields."""
    return float(grid.integrate(trace_product(a, b)))


def omega_stokes(omega: np.ndarray) -> np.ndarray:
    """Stokes representation of omega * Identity (I component is 2*omega)."""
    out = np.zeros(omega.shape + (4,))
    out[..., 0] = 2.0 * omega
    return out


# ---------------------------------------------------------------------------
# functionals
# ---------------------------------------------------------------------------


class FunctionalHandle:
    """A functional of W exposing its value and discrete derivative field."""

    def value(self, w: CoherenceField) -> float:
        raise NotImplementedError

    def gradient(self, w: CoherenceField) -> np.ndarray:
        raise NotImplementedError


class LinearTest(FunctionalHandle):
    """F_U[W] = <U, W> for a fixed coefficient field U."""

    def __init__(self, coeff: np.ndarray):
        self.coeff = np.asarray(coeff, dtype=float)

    def value(self, w: CoherenceField) -> float:
        return inner(w.grid, self.coeff, w.data)

    def gradient(self, w: CoherenceField) -> np.ndarray:
        return self.coeff


class Hamiltonian(FunctionalHandle):
    """H[W] = <Omega, W> with Omega = omega * Identity."""

    def __init__(self, omega: np.ndarray):
        self.omega = np.asarray(omega, dtype=float)
        self._coeff = omega_stokes(self.omega)

    def value(self, w: CoherenceField) -> float:
        return inner(w.grid, self._coeff, w.data)

    def gradient(self, w: CoherenceField) -> np.ndarray:
        return self._coeff


class Entropy(FunctionalHandle):
    """S[W] = 0.5 * <W, W>; its derivative is W itself."""

    def value(self, w: CoherenceField) -> float:
        return 0.5 * inner(w.grid, w.data, w.data)

    def gradient(self, w: CoherenceField) -> np.ndarray:
        return w.data


class FreeEnergy(FunctionalHandle):
    """G = H + S, the generator of the combined dynamics."""

    def __init__(self, omega: np.ndarray):
        self._h = Hamiltonian(omega)
        self._s = Entropy()

    def value(self, w: CoherenceField) -> float:
        return self._h.value(w) + self._s.value(w)

    def gradient(self, w: CoherenceField) -> np.ndarray:
        return self._h.gradient(w) + self._s.gradient(w)


class Product(FunctionalHandle):
    """Pointwise product of two functionals (exists to test Leibniz)."""

    def __init__(self, a: FunctionalHandle, b: FunctionalHandle):
        self.a = a
        self.b = b

    def value(self, w: CoherenceField) -> float:
        return self.a.value(w) * self.b.value(w)

    def gradient(self, w: CoherenceField) -> np.ndarray:
        return (self.a.value(w) * self.b.gradient(w)
                + self.b.value(w) * self.a.gradient(w))


def eval_functional(handle: FunctionalHandle, w: CoherenceField) -> float:
    return handle.value(w)


def functional_derivative(handle: FunctionalHandle, w: CoherenceField) -> np.ndarray:
    return handle.gradient(w)


# ---------------------------------------------------------------------------
# functional brackets
# ---------------------------------------------------------------------------


def poisson_bracket(a: FunctionalHandle, b: FunctionalHandle, w: CoherenceField) -> float:
    """{A, B} = integral Tr(W [dA/dW, dB/dW]_M)."""
    grid = w.grid
    br = matrix_bracket(grid, a.gradient(w), b.gradient(w))
    return float(grid.integrate(trace_product(w.data, br)))


def poisson_bracket_handle(a: LinearTest, b: LinearTest, grid: PhaseSpaceGrid) -> LinearTest:
    """The bracket of two linear functionals is again linear in W."""
    return LinearTest(matrix_bracket(grid, a.coeff, b.coeff))


def metric_bracket(
    a: FunctionalHandle,
    b: FunctionalHandle,
    w: CoherenceField,
    kernel: "ScatteringKernel",
    x_block: int = 256,
) -> float:
    """Dissipative bracket over shell pairs.

    (A, B) = -0.5 * sum over (x, shell, angle, angle') of quadrature
    weights * sigma * Re Tr(D_A D_B^dagger) with
    D_F = T F'(k') - F(k) T, which is manifestly symmetric in A, B and
    nonpositive on the diagonal.
    """
    grid = w.grid
    if kernel.grid is not grid:
        raise GridError("kernel and field must share one grid")
    da = stokes_to_matrix(a.gradient(w))
    db = stokes_to_matrix(b.gradient(w))
    same = a is b
    n1, n2, ns, na = grid.shape
    nx = n1 * n2
    da = da.reshape(nx, ns, na, 2, 2)
    db = da if same else db.reshape(nx, ns, na, 2, 2)
    total = 0.0
    for s in range(ns):
        t_mat = kernel.t_table[s]          # (na, na, 2, 2)
        sigma = kernel.sigma_table[s]      # (na, na)
        # w_point already carries the spatial measure; the second angular
        # factor is the inner arc-length integral over k'
        w_pair = grid.w_point[s] * grid.angular_weight[s]
        for lo in range(0, nx, x_block):
            hi = min(lo + x_block, nx)
            am = da[lo:hi, s]
            d_a = (np.einsum("jpab,xpbc->xjpac", t_mat, am)
                   - np.einsum("xjab,jpbc->xjpac", am, t_mat))
            if same:
                d_b = d_a
            else:
                bm = db[lo:hi, s]
                d_b = (np.einsum("jpab,xpbc->xjpac", t_mat, bm)
                       - np.einsum("xjab,jpbc->xjpac", bm, t_mat))
            tr = np.real(np.einsum("xjpab,xjpab->xjp", d_a, np.conj(d_b)))
            total -= 0.5 * w_pair * float(np.sum(sigma[None] * tr))
    return total
