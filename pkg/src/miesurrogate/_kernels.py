"""Compiled inner loops for the extinction-curve database.

The per-spectrum, per-iteration rebuild of the resonant curve database is
the hot path of the whole corrector; a fused kernel avoids the pile of
(rows x bands) temporaries a broadcast implementation creates.

``sin(rho)``/``cos(rho)`` for the resonant rows are assembled by the angle
addition identity from static tables over the (radius, index) box plus a
small per-reference table over the unique radii, cutting the transcendental
count by the size of the index grid.
"""

import numba
import numpy as np

# Below this the closed form loses digits to cancellation; switch to the
# series rho^2/2 - rho^4/36 + rho^6/1440.
RHO_SERIES_CUTOFF = 1e-2


@numba.njit(cache=True, inline="always")
def _q_expr(rho, s, c):
    if abs(rho) < RHO_SERIES_CUTOFF:
        r2 = rho * rho
        return r2 * (0.5 - r2 * (1.0 / 36.0) + r2 * r2 * (1.0 / 1440.0))
    ri = 1.0 / rho
    return 2.0 - 4.0 * ri * s + (4.0 * ri * ri) * (1.0 - c)


@numba.njit(cache=True)
def q_nonresonant(rho):
    """Extinction efficiency Q for an array of phase-shift values."""
    out = np.empty_like(rho)
    for i in range(rho.size):
        r = rho[i]
        out[i] = _q_expr(r, np.sin(r), np.cos(r))
    return out


@numba.njit(cache=True)
def q_resonant_rows(sin0, cos0, rho0, a_cm, a_index, sin_u, cos_u, w, out):
    """Fill ``out`` with one resonant extinction curve per (radius, index) row.

    rho = rho0 + a*w with rho0 the static non-resonant phase shift and
    w = 4*pi*gamma*n_re*nu the reference-dependent fluctuation term;
    sin0/cos0 tabulate sin/cos of rho0, sin_u/cos_u of the unique-radius
    fluctuation angles.
    """
    nrow, ncol = rho0.shape
    for r in range(nrow):
        ia = a_index[r]
        ar = a_cm[r]
        for j in range(ncol):
            s = sin0[r, j] * cos_u[ia, j] + cos0[r, j] * sin_u[ia, j]
            c = cos0[r, j] * cos_u[ia, j] - sin0[r, j] * sin_u[ia, j]
            rho = rho0[r, j] + ar * w[j]
            out[r, j] = _q_expr(rho, s, c)
