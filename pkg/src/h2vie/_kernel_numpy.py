"""Pure-numpy fallback for the system-matrix block assembly hot loop."""

import numpy as np

_FOUR_PI = 4.0 * np.pi


def assemble_block_raw(centers, chi, k0, volume, diag_coupling, rows, cols, out):
    """Fill out[i, j] = S[rows[i], cols[j]].

    Returns -1 on success, or the flat index i * ncols + j of the first
    coincident pair of distinct voxels (singular kernel).
    """
    d = centers[rows][:, None, :] - centers[cols][None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
    same = rows[:, None] == cols[None, :]
    coincident = (r == 0.0) & ~same
    if coincident.any():
        return int(np.flatnonzero(coincident.ravel())[0])
    r_safe = np.where(same, 1.0, r)
    coef = k0 * k0 * volume / _FOUR_PI
    val = -chi[cols][None, :] * (coef / r_safe) * np.exp(-1j * k0 * r_safe)
    np.copyto(out, np.where(same, 1.0 - chi[cols][None, :] * diag_coupling, val))
    return -1
