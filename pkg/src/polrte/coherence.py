"""Hermitian coherence matrices stored as real Stokes components.

A 2x2 Hermitian matrix is represented by its four real Stokes
components ``(I, Q, U, V)`` through

    W = 0.5 * [[I + Q, U + iV],
               [U - iV, I - Q]]

Storing the components instead of complex entries makes Hermiticity a
structural invariant: no numerical drift can break it. All field-level
code in this package works on arrays with a trailing component axis of
length 4, ordered ``I, Q, U, V``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import PhaseSpaceGrid

#: index constants for the component axis
I_IDX, Q_IDX, U_IDX, V_IDX = 0, 1, 2, 3


class HermiticityError(ValueError):
    pass


def stokes_to_matrix(s) -> np.ndarray:
    """Map Stokes components (..., 4) to complex matrices (..., 2, 2)."""
    s = np.asarray(s, dtype=float)
    if s.shape[-1] != 4:
        raise ValueError("last axis must hold the 4 Stokes components")
    i, q, u, v = s[..., 0], s[..., 1], s[..., 2], s[..., 3]
    m = np.empty(s.shape[:-1] + (2, 2), dtype=complex)
    m[..., 0, 0] = 0.5 * (i + q)
    m[..., 0, 1] = 0.5 * (u + 1j * v)
    m[..., 1, 0] = 0.5 * (u - 1j * v)
    m[..., 1, 1] = 0.5 * (i - q)
    return m


def matrix_to_stokes(m, tol: float = 1e-12) -> np.ndarray:
    """Invert :func:`stokes_to_matrix`; rejects non-Hermitian input.

    The Hermiticity defect is measured relative to the largest entry
    magnitude (with an absolute floor of 1).
    """
    m = np.asarray(m, dtype=complex)
    if m.shape[-2:] != (2, 2):
        raise ValueError("last two axes must form 2x2 matrices")
    scale = max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)
    defect = np.max(np.abs(m - np.conj(np.swapaxes(m, -1, -2))))
    if defect > tol * scale:
        raise HermiticityError(
            f"matrix is not Hermitian: defect {defect:.3e} exceeds {tol:.1e} * {scale:.3e}"
        )
    s = np.empty(m.shape[:-2] + (4,), dtype=float)
    s[..., 0] = np.real(m[..., 0, 0] + m[..., 1, 1])
    s[..., 1] = np.real(m[..., 0, 0] - m[..., 1, 1])
    s[..., 2] = np.real(m[..., 0, 1] + m[..., 1, 0])
    s[..., 3] = np.imag(m[..., 0, 1] - m[..., 1, 0])
    return s


def trace_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Tr(AB) for Hermitian A, B in Stokes form: 0.5 * sum_c a_c b_c."""
    return 0.5 * np.sum(a * b, axis=-1)


@dataclass
class CoherenceField:
    """Coherence matrix field on a phase-space grid."""

    grid: PhaseSpaceGrid
    data: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != self.grid.shape + (4,):
            raise ValueError(
                f"stokes data shape {self.data.shape} does not match "
                f"grid shape {self.grid.shape} + (4,)"
            )

    @classmethod
    def zeros(cls, grid: PhaseSpaceGrid, time: float = 0.0) -> "CoherenceField":
        return cls(grid, np.zeros(grid.shape + (4,)), time)

    @classmethod
    def unpolarized(cls, grid: PhaseSpaceGrid, intensity, time: float = 0.0):
        data = np.zeros(grid.shape + (4,))
        data[..., I_IDX] = intensity
        return cls(grid, data, time)

    def matrices(self) -> np.ndarray:
        return stokes_to_matrix(self.data)

    def copy(self) -> "CoherenceField":
        return CoherenceField(self.grid, self.data.copy(), self.time)


def trace_field(w: CoherenceField) -> np.ndarray:
    """Pointwise trace of the coherence matrix (equals the I component)."""
    return w.data[..., I_IDX].copy()
