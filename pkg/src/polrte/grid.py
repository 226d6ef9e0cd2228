"""Discrete phase space: periodic x-box times a polar annulus in k.

The grid is a tensor product of a periodic spatial torus (1 or 2
dimensions) and a set of concentric wavenumber shells, each carrying
equispaced angles. Every field is a numpy array of shape
``grid.shape == (n1, n2, n_shells, n_angles)``; 1-D spatial grids use
``n2 == 1`` (the dummy axis is inert: periodic differences across a
single point vanish identically, so the second canonical pair drops out
of every bracket automatically).

Angular quadrature uses the arc-length weight ``r * dtheta`` so shell
integrals approximate the surface measure on ``{|k'| = |k|}``; radial
quadrature is trapezoidal in ``|k|``. Centered differences on the
periodic axes (x1, x2, theta) are exactly skew-adjoint under the grid
inner product. The radial axis is not periodic: it uses 3-point
one-sided closures and is not skew-adjoint, and on a single-shell grid
the radial derivative is identically zero (fields are shell-constant by
construction there).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GridError(ValueError):
    pass


X_AXES = ("x1", "x2")
K_CARTESIAN_AXES = ("k1", "k2")
ALL_AXES = X_AXES + ("r", "theta") + K_CARTESIAN_AXES


@dataclass(frozen=True)
class GridConfig:
    """Construction parameters for :func:`build_grid`."""

    x_extent: tuple[float, ...]
    x_points: tuple[int, ...]
    k_shells: tuple[float, ...]
    k_angles: int

    def __post_init__(self):
        if len(self.x_extent) != len(self.x_points):
            raise GridError("x_extent and x_points must have the same length")
        if len(self.x_points) not in (1, 2):
            raise GridError("only 1 or 2 spatial dimensions are supported")


class PhaseSpaceGrid:
    """Immutable tensor grid with quadrature weights and stencil data."""

    def __init__(self, config: GridConfig):
        d = len(config.x_points)
        for i, n in enumerate(config.x_points):
            if n < 4:
                raise GridError(f"x_points[{i}] = {n}: need at least 4 points per axis")
        if config.k_angles < 4:
            raise GridError(f"k_angles = {config.k_angles}: need at least 4 angles")
        radii = np.asarray(config.k_shells, dtype=float)
        if radii.size == 0:
            raise GridError("at least one k shell is required")
        if np.any(radii <= 0.0):
            raise GridError("shell radius must be positive: k=0 excluded from the domain")
        if radii.size > 1 and np.any(np.diff(radii) <= 0.0):
            raise GridError("shell radii must be strictly ascending")

        self.x_dims = d
        n1 = config.x_points[0]
        n2 = config.x_points[1] if d == 2 else 1
        l1 = float(config.x_extent[0])
        l2 = float(config.x_extent[1]) if d == 2 else 1.0
        if l1 <= 0 or l2 <= 0:
            raise GridError("x_extent entries must be positive")

        self.config = config
        self.x_points = (n1, n2)
        self.x_extent = (l1, l2)
        self.dx = (l1 / n1, l2 / n2)
        self.radii = radii
        self.n_shells = radii.size
        self.n_angles = int(config.k_angles)
        self.dtheta = 2.0 * np.pi / self.n_angles

        self.x1 = np.arange(n1) * self.dx[0]
        self.x2 = np.arange(n2) * self.dx[1]
        self.theta = np.arange(self.n_angles) * self.dtheta
        self.cos_t = np.cos(self.theta)
        self.sin_t = np.sin(self.theta)

        # trapezoidal radial weights; a single shell carries unit weight
        # (the measure is then the arc length of that shell alone)
        if self.n_shells == 1:
            self.w_radial = np.array([1.0])
        else:
            w = np.empty(self.n_shells)
            w[0] = 0.5 * (radii[1] - radii[0])
            w[-1] = 0.5 * (radii[-1] - radii[-2])
            if self.n_shells > 2:
                w[1:-1] = 0.5 * (radii[2:] - radii[:-2])
            self.w_radial = w

        # product-measure weight of one grid point, per shell
        self.w_point = self.dx[0] * self.dx[1] * self.w_radial * self.radii * self.dtheta
        self.shape = (n1, n2, self.n_shells, self.n_angles)
        self.n_points = int(np.prod(self.shape))

        self.dr_matrix = self._radial_derivative_matrix(radii)

        for arr in (self.x1, self.x2, self.theta, self.cos_t, self.sin_t,
                    self.radii, self.w_radial, self.w_point):
            arr.flags.writeable = False
        if self.dr_matrix is not None:
            self.dr_matrix.flags.writeable = False

    @staticmethod
    def _radial_derivative_matrix(radii: np.ndarray) -> np.ndarray | None:
        ns = radii.size
        if ns == 1:
            return None
        mat = np.zeros((ns, ns))
        if ns == 2:
            # first-order two-point difference, the best available
            d = radii[1] - radii[0]
            mat[0, 0] = mat[1, 0] = -1.0 / d
            mat[0, 1] = mat[1, 1] = 1.0 / d
            return mat
        for s in range(ns):
            i = min(max(s, 1), ns - 2)
            ra, rb, rc = radii[i - 1], radii[i], radii[i + 1]
            x = radii[s]
            # derivative of the quadratic Lagrange interpolant, exact on
            # polynomials of degree <= 2
            mat[s, i - 1] = ((x - rb) + (x - rc)) / ((ra - rb) * (ra - rc))
            mat[s, i] = ((x - ra) + (x - rc)) / ((rb - ra) * (rb - rc))
            mat[s, i + 1] = ((x - ra) + (x - rb)) / ((rc - ra) * (rc - rb))
        return mat

    # -- field helpers ----------------------------------------------------

    def zeros(self, components: int | None = None) -> np.ndarray:
        if components is None:
            return np.zeros(self.shape)
        return np.zeros(self.shape + (components,))

    def check_field(self, f: np.ndarray) -> None:
        if f.shape[:4] != self.shape:
            raise GridError(
                f"field shape {f.shape} does not match grid shape {self.shape}"
            )

    def meshgrid(self):
        """Broadcastable coordinate arrays (x1, x2, r, theta)."""
        return (
            self.x1[:, None, None, None],
            self.x2[None, :, None, None],
            self.radii[None, None, :, None],
            self.theta[None, None, None, :],
        )

    # -- difference operators ---------------------------------------------

    def ddx(self, f: np.ndarray, axis: str) -> np.ndarray:
        """Second-order difference along a grid axis.

        ``x1``/``x2``/``theta`` are centered periodic (exactly
        skew-adjoint); ``r`` uses one-sided closures; ``k1``/``k2`` are
        Cartesian k-derivatives assembled through the polar chain rule.
        Trailing component axes are carried along unchanged.
        """
        self.check_field(f)
        if axis == "x1":
            return (np.roll(f, -1, axis=0) - np.roll(f, 1, axis=0)) / (2.0 * self.dx[0])
        if axis == "x2":
            return (np.roll(f, -1, axis=1) - np.roll(f, 1, axis=1)) / (2.0 * self.dx[1])
        if axis == "theta":
            return (np.roll(f, -1, axis=3) - np.roll(f, 1, axis=3)) / (2.0 * self.dtheta)
        if axis == "r":
            return self._apply_dr(f)
        if axis in K_CARTESIAN_AXES:
            dr = self._apply_dr(f)
            dt = self.ddx(f, "theta")
            trail = (1,) * (f.ndim - 4)
            cos = self.cos_t.reshape((1, 1, 1, -1) + trail)
            sin = self.sin_t.reshape((1, 1, 1, -1) + trail)
            inv_r = (1.0 / self.radii).reshape((1, 1, -1, 1) + trail)
            if axis == "k1":
                return cos * dr - sin * inv_r * dt
            return sin * dr + cos * inv_r * dt
        raise GridError(f"unknown axis {axis!r}; expected one of {ALL_AXES}")

    def _apply_dr(self, f: np.ndarray) -> np.ndarray:
        if self.dr_matrix is None:
            return np.zeros_like(f)
        moved = np.moveaxis(f, 2, -1)
        out = moved @ self.dr_matrix.T
        return np.moveaxis(out, -1, 2)

    # -- quadrature ---------------------------------------------------------

    def weight_array(self) -> np.ndarray:
        """Point weights broadcast to ``(1, 1, n_shells, 1)``."""
        return self.w_point[None, None, :, None]

    def integrate(self, f: np.ndarray):
        """Quadrature over the whole phase space; trailing axes survive."""
        self.check_field(f)
        trail = (1,) * (f.ndim - 4)
        w = self.w_point.reshape((1, 1, -1, 1) + trail)
        return np.sum(w * f, axis=(0, 1, 2, 3))

    def shell_integrate(self, f: np.ndarray, x_index, shell_index: int):
        """Arc-length-weighted angular quadrature on one shell at one x point."""
        self.check_field(f)
        if self.x_dims == 1:
            i1, i2 = int(x_index), 0
        else:
            i1, i2 = int(x_index[0]), int(x_index[1])
        if not (0 <= i1 < self.x_points[0] and 0 <= i2 < self.x_points[1]):
            raise GridError(f"x index {x_index!r} out of range")
        if not 0 <= shell_index < self.n_shells:
            raise GridError(f"shell index {shell_index} out of range")
        w = self.radii[shell_index] * self.dtheta
        return w * np.sum(f[i1, i2, shell_index], axis=0)

    @property
    def angular_weight(self) -> np.ndarray:
        """Arc-length weight ``r * dtheta`` per shell."""
        return self.radii * self.dtheta

    def total_volume(self) -> float:
        return float(self.x_points[0] * self.x_points[1] * self.n_angles
                     * np.sum(self.w_point))


def build_grid(config: GridConfig) -> PhaseSpaceGrid:
    """Validate the configuration and construct the grid."""
    return PhaseSpaceGrid(config)
