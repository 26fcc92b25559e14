# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: Lorentzian rate-map accumulation and red-black SOR.

Mirrors the signatures in ``_fallback.py``.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"


def lorentzian_rate_map(freqs, centers, gammas, widths, baseline, out=None):
    freqs = np.ascontiguousarray(freqs, dtype=np.float64)
    centers = np.ascontiguousarray(np.atleast_2d(centers), dtype=np.float64)
    gammas = np.ascontiguousarray(np.atleast_2d(gammas), dtype=np.float64)
    widths = np.ascontiguousarray(widths, dtype=np.float64)
    cdef double[::1] f = freqs
    cdef double[:, ::1] c = centers
    cdef double[:, ::1] g = gammas
    cdef double[::1] w = widths
    cdef Py_ssize_t nb = c.shape[0], nd = c.shape[1], nf = f.shape[0]
    if out is None:
        out = np.empty((nb, nf), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t b, d, i
    cdef double base = baseline, w2, gk, ck, df
    for b in range(nb):
        for i in range(nf):
            o[b, i] = base
        for d in range(nd):
            gk = g[b, d]
            if gk <= 0.0:
                continue
            ck = c[b, d]
            w2 = w[d] * w[d]
            for i in range(nf):
                df = f[i] - ck
                o[b, i] += gk * w2 / (df * df + w2)
    return out


def sor_sweep(phi, w_east, w_west, w_north, w_south, inv_diag, free, parity, omega):
    cdef double[:, ::1] p = phi
    cdef double[:, ::1] wE = w_east
    cdef double[:, ::1] wW = w_west
    cdef double[:, ::1] wN = w_north
    cdef double[:, ::1] wS = w_south
    cdef double[:, ::1] idg = inv_diag
    cdef unsigned char[:, ::1] fr = free
    cdef Py_ssize_t ny = p.shape[0], nx = p.shape[1]
    cdef Py_ssize_t i, j, j0
    cdef int color
    cdef double om = omega, nb, step, astep, max_step = 0.0
    for color in range(2):
        for i in range(ny):
            j0 = (color + i) % 2
            for j in range(j0, nx, 2):
                if fr[i, j] == 0:
                    continue
                nb = 0.0
                if j + 1 < nx:
                    nb += wE[i, j] * p[i, j + 1]
                if j > 0:
                    nb += wW[i, j] * p[i, j - 1]
                if i + 1 < ny:
                    nb += wN[i, j] * p[i + 1, j]
                if i > 0:
                    nb += wS[i, j] * p[i - 1, j]
                step = nb * idg[i, j] - p[i, j]
                p[i, j] += om * step
                astep = step if step >= 0.0 else -step
                if astep > max_step:
                    max_step = astep
    return max_step
