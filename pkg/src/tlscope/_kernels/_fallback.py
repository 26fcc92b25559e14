"""Pure-numpy implementations of the hot kernels.

Same call signatures as the compiled extension in ``_core.pyx``; selected
automatically when the extension is unavailable (see package ``__init__``).
Both backends evaluate the identical per-node expressions, so results agree
to floating-point rounding.
"""

import numpy as np

BACKEND = "python"


def lorentzian_rate_map(freqs, centers, gammas, widths, baseline, out=None):
    """Accumulate Lorentzian relaxation-rate contributions onto a bias/frequency grid.

    freqs : (nf,) frequency grid (GHz)
    centers : (nb, nd) resonance frequency of each defect at each bias (GHz)
    gammas : (nb, nd) on-resonance added rate of each defect at each bias (1/us)
    widths : (nd,) Lorentzian half-width at half-maximum (GHz)
    baseline : scalar background rate (1/us)

    Returns (nb, nf) total rate. Defects with non-positive gamma are skipped,
    which lets callers pre-mask far-detuned defects cheaply.
    """
    freqs = np.asarray(freqs, dtype=np.float64)
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    gammas = np.atleast_2d(np.asarray(gammas, dtype=np.float64))
    widths = np.asarray(widths, dtype=np.float64)
    nb, nd = centers.shape
    nf = freqs.shape[0]
    if out is None:
        out = np.empty((nb, nf), dtype=np.float64)
    out[:] = baseline
    if nd == 0:
        return out
    w2 = widths * widths
    for b in range(nb):
        g = gammas[b]
        active = g > 0.0
        if not active.any():
            continue
        df = freqs[None, :] - centers[b, active, None]
        out[b] += (g[active, None] * w2[active, None] / (df * df + w2[active, None])).sum(axis=0)
    return out


def sor_sweep(phi, w_east, w_west, w_north, w_south, inv_diag, free, parity, omega):
    """One red-black SOR sweep (both colors) on a 5-point stencil, in place.

    phi : (ny, nx) potential, updated in place
    w_* : (ny, nx) face coupling weights toward each neighbor
    inv_diag : (ny, nx) 1 / (sum of the four face weights), zero on fixed nodes
    free : (ny, nx) uint8 mask, 1 where the node is updated
    parity : (ny, nx) uint8, (i + j) % 2
    omega : over-relaxation factor

    Returns the maximum absolute Gauss-Seidel step over the sweep.
    """
    max_step = 0.0
    for color in (0, 1):
        nb = np.zeros_like(phi)
        nb[:, :-1] += w_east[:, :-1] * phi[:, 1:]
        nb[:, 1:] += w_west[:, 1:] * phi[:, :-1]
        nb[:-1, :] += w_north[:-1, :] * phi[1:, :]
        nb[1:, :] += w_south[1:, :] * phi[:-1, :]
        mask = (free == 1) & (parity == color)
        step = np.where(mask, nb * inv_diag - phi, 0.0)
        phi += omega * step
        m = float(np.abs(step).max()) if step.size else 0.0
        if m > max_step:
            max_step = m
    return max_step
