# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loop for system-matrix block assembly.

Same contract as _kernel_numpy.assemble_block_raw; selected at import time
by h2vie.kernel when available.
"""

from libc.math cimport sqrt, cos, sin

DEF FOUR_PI = 12.566370614359172953850573533118


def assemble_block_raw(const double[:, ::1] centers,
                       const double complex[::1] chi,
                       double k0,
                       double volume,
                       double complex diag_coupling,
                       const long[::1] rows,
                       const long[::1] cols,
                       double complex[:, ::1] out):
    """Fill out[i, j] = S[rows[i], cols[j]].

    Returns -1 on success, or the flat index i * ncols + j of the first
    coincident pair of distinct voxels (singular kernel).
    """
    cdef Py_ssize_t i, j, m, n
    cdef Py_ssize_t nr = rows.shape[0]
    cdef Py_ssize_t nc = cols.shape[0]
    cdef double dx, dy, dz, r, amp, ph
    cdef double coef = k0 * k0 * volume / FOUR_PI
    for i in range(nr):
        m = rows[i]
        for j in range(nc):
            n = cols[j]
            if m == n:
                out[i, j] = 1.0 - chi[n] * diag_coupling
            else:
                dx = centers[m, 0] - centers[n, 0]
                dy = centers[m, 1] - centers[n, 1]
                dz = centers[m, 2] - centers[n, 2]
                r = sqrt(dx * dx + dy * dy + dz * dz)
                if r == 0.0:
                    return i * nc + j
                amp = coef / r
                ph = k0 * r
                out[i, j] = -chi[n] * (amp * cos(ph) - 1j * amp * sin(ph))
    return -1
