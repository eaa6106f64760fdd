"""Fused banded-plus-border application of the 2D wave operator.

Computes out = Qy X + X Qx^T in one pass for operators that are a central
stencil in the interior with small dense closure blocks at both ends.
Falls back transparently (see sat_semidisc) when numba is unavailable.
"""

import numba


@numba.njit(cache=True, parallel=True, fastmath=False)
def stencil_action(X, cy, Bly, Bry, cx, Blx, Brx, out):  # pragma: no cover - jit
    ny, nx = X.shape
    Jy, Wy = Bly.shape
    Jx, Wx = Blx.shape
    ly = (cy.shape[0] - 1) // 2
    lx = (cx.shape[0] - 1) // 2
    for i in numba.prange(ny):
        low_y = i < Jy
        high_y = i >= ny - Jy
        for j in range(nx):
            if low_y:
                sy = 0.0
                for k in range(Wy):
                    sy += Bly[i, k] * X[k, j]
            elif high_y:
                sy = 0.0
                for k in range(Wy):
                    sy += Bry[ny - 1 - i, k] * X[ny - 1 - k, j]
            else:
                sy = 0.0
                for k in range(2 * ly + 1):
                    sy += cy[k] * X[i + k - ly, j]
            if j < Jx:
                sx = 0.0
                for k in range(Wx):
                    sx += Blx[j, k] * X[i, k]
            elif j >= nx - Jx:
                sx = 0.0
                for k in range(Wx):
                    sx += Brx[nx - 1 - j, k] * X[i, nx - 1 - k]
            else:
                sx = 0.0
                for k in range(2 * lx + 1):
                    sx += cx[k] * X[i, j + k - lx]
            out[i, j] = sx + sy
