import numpy as np
import pytest

from polrte.grid import GridConfig, build_grid


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_grid(x_points=(8,), extent=2 * np.pi, shells=(1.0,), angles=16):
    if isinstance(x_points, int):
        x_points = (x_points,)
    extents = (extent,) * len(x_points) if np.isscalar(extent) else tuple(extent)
    return build_grid(GridConfig(extents, tuple(x_points), tuple(shells), angles))


def smooth_stokes(grid, rng, edge_vanishing=False):
    """Random smooth Stokes field: trig in x1/theta, linear in radius."""
    x1, _x2, r, th = grid.meshgrid()
    kx = 2 * np.pi / grid.x_extent[0]
    out = np.zeros(grid.shape + (4,))
    lo, hi = grid.radii[0], grid.radii[-1]
    if edge_vanishing and grid.n_shells > 1:
        edge = (r - lo) * (hi - r) / (0.5 * (hi - lo)) ** 2
    else:
        edge = np.ones_like(r)
    for c in range(4):
        for _ in range(3):
            m1, m2 = rng.integers(0, 3), rng.integers(0, 3)
            p1, p2 = rng.uniform(0, 2 * np.pi, 2)
            a = rng.normal(scale=0.4)
            b = rng.normal(scale=0.4)
            out[..., c] += (a * np.cos(m1 * kx * x1 + p1) * np.cos(m2 * th + p2)
                            * edge * (1.0 + b * (r - 0.5 * (lo + hi))))
    return out
