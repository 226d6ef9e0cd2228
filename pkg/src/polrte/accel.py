"""Backend selection and hot numeric kernels.

Two implementations of the advection kernel are provided: a fused
numba ``@njit(parallel=True)`` loop and a pure-numpy fallback built from
``np.roll``. The backend is picked once at import time from the
``POLRTE_NUMBA`` environment variable ("0" forces numpy, "1" requires
numba, unset = use numba when importable). Both paths compute identical
stencils; ``tests/test_backends.py`` pins them against each other.
"""

from __future__ import annotations

import os

import numpy as np

_flag = os.environ.get("POLRTE_NUMBA", "").strip()

if _flag == "0":
    NUMBA_ENABLED = False
else:
    try:
        import numba
        from numba import njit, prange

        # modest core counts here; workqueue avoids TBB version noise
        numba.config.THREADING_LAYER = "workqueue"
        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        if _flag == "1":
            raise
        NUMBA_ENABLED = False


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"


# ---------------------------------------------------------------------------
# split-form advection
#
# out = 0.5*(ar*Dr W + (1/r) Dr(r*ar*W))
#     + 0.5*(at*Dt W + Dt(at*W))
#     - 0.5*(b1*Dx1 W + Dx1(b1*W))
#     - 0.5*(b2*Dx2 W + Dx2(b2*W))
#
# Dx1/Dx2/Dt are centered periodic differences, Dr is a dense (ns, ns)
# matrix (shell axis is not periodic). Averaging the advective and
# divergence forms keeps the operator skew-adjoint in the x/theta
# directions under the grid quadrature, which the conservation
# diagnostics rely on.
# ---------------------------------------------------------------------------


def _advect_numpy(w, ar, at, b1, b2, inv2dx1, inv2dx2, inv2dt, dr_mat, r, invr):
    # w: (n1, n2, ns, na, C); coefficient arrays: (n1, n2, ns, na)
    arx = ar[..., None]
    atx = at[..., None]
    b1x = b1[..., None]
    b2x = b2[..., None]

    def dx(f, axis, inv2h):
        return (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis)) * inv2h

    out = 0.5 * (atx * dx(w, 3, inv2dt) + dx(atx * w, 3, inv2dt))
    out -= 0.5 * (b1x * dx(w, 0, inv2dx1) + dx(b1x * w, 0, inv2dx1))
    out -= 0.5 * (b2x * dx(w, 1, inv2dx2) + dx(b2x * w, 1, inv2dx2))
    if dr_mat is not None:
        rw = r[:, None, None]
        invrw = invr[:, None, None]

        def drad(f):
            # apply (ns, ns) matrix along axis 2
            return np.einsum("st,ijtkc->ijskc", dr_mat, f)

        out += 0.5 * (arx * drad(w) + invrw * drad(rw * arx * w))
    return out


if NUMBA_ENABLED:

    @njit(parallel=True, cache=True, fastmath=False)
    def _advect_numba(w, ar, at, b1, b2, inv2dx1, inv2dx2, inv2dt, dr_mat, r, invr):
        n1, n2, ns, na, nc = w.shape
        out = np.zeros_like(w)
        use_r = dr_mat.shape[0] > 1
        for i1 in prange(n1):
            i1p = (i1 + 1) % n1
            i1m = (i1 - 1) % n1
            for i2 in range(n2):
                i2p = (i2 + 1) % n2
                i2m = (i2 - 1) % n2
                for s in range(ns):
                    for j in range(na):
                        jp = (j + 1) % na
                        jm = (j - 1) % na
                        for c in range(nc):
                            # theta split term
                            dth = (w[i1, i2, s, jp, c] - w[i1, i2, s, jm, c]) * inv2dt
                            dthf = (
                                at[i1, i2, s, jp] * w[i1, i2, s, jp, c]
                                - at[i1, i2, s, jm] * w[i1, i2, s, jm, c]
                            ) * inv2dt
                            acc = 0.5 * (at[i1, i2, s, j] * dth + dthf)
                            # x1 split term
                            d1 = (w[i1p, i2, s, j, c] - w[i1m, i2, s, j, c]) * inv2dx1
                            d1f = (
                                b1[i1p, i2, s, j] * w[i1p, i2, s, j, c]
                                - b1[i1m, i2, s, j] * w[i1m, i2, s, j, c]
                            ) * inv2dx1
                            acc -= 0.5 * (b1[i1, i2, s, j] * d1 + d1f)
                            # x2 split term
                            d2 = (w[i1, i2p, s, j, c] - w[i1, i2m, s, j, c]) * inv2dx2
                            d2f = (
                                b2[i1, i2p, s, j] * w[i1, i2p, s, j, c]
                                - b2[i1, i2m, s, j] * w[i1, i2m, s, j, c]
                            ) * inv2dx2
                            acc -= 0.5 * (b2[i1, i2, s, j] * d2 + d2f)
                            # radial split term (dense small matrix)
                            if use_r:
                                dr_w = 0.0
                                dr_f = 0.0
                                for t in range(ns):
                                    dr_w += dr_mat[s, t] * w[i1, i2, t, j, c]
                                    dr_f += dr_mat[s, t] * (
                                        r[t] * ar[i1, i2, t, j] * w[i1, i2, t, j, c]
                                    )
                                acc += 0.5 * (
                                    ar[i1, i2, s, j] * dr_w + invr[s] * dr_f
                                )
                            out[i1, i2, s, j, c] = acc
        return out


def apply_advection(w, ar, at, b1, b2, inv2dx1, inv2dx2, inv2dt, dr_mat, r, invr):
    """Split-form advection generated by the dispersion field.

    ``w`` has shape ``(n1, n2, ns, na, C)``; the coefficient fields have
    shape ``(n1, n2, ns, na)``. ``dr_mat`` may be None (or all-zero for a
    single shell), in which case the radial term is dropped.
    """
    if NUMBA_ENABLED:
        if dr_mat is None:
            dr_mat = np.zeros((1, 1))
        return _advect_numba(
            np.ascontiguousarray(w), ar, at, b1, b2,
            inv2dx1, inv2dx2, inv2dt,
            np.ascontiguousarray(dr_mat), r, invr,
        )
    return _advect_numpy(w, ar, at, b1, b2, inv2dx1, inv2dx2, inv2dt, dr_mat, r, invr)


def warmup() -> None:
    """Trigger JIT compilation on a tiny problem (no-op for numpy)."""
    if not NUMBA_ENABLED:
        return
    w = np.zeros((2, 2, 2, 4, 1))
    c = np.zeros((2, 2, 2, 4))
    dr = np.zeros((2, 2))
    r = np.ones(2)
    apply_advection(w, c, c, c, c, 1.0, 1.0, 1.0, dr, r, 1.0 / r)
