# cython: boundscheck=False, wraparound=False, cdivision=True
"""Polyphase FIR inner loop (compiled hot path).

Same contract as the numpy reference in ``numpy_ref.py``: one output sample
per (phase, input-window) pair, accumulated in double precision.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def polyphase_apply(double[::1] xp, double[:, ::1] phases_rev,
                    long up, long down, long n_out, long center, long front_pad):
    """Apply a polyphase filter bank to the zero-padded input ``xp``.

    ``phases_rev[p, j]`` must hold tap ``h[p + (K-1-j)*up]`` so the inner
    product runs over a forward slice of ``xp``.
    """
    cdef long taps = phases_rev.shape[1]
    cdef long m, j, p, q, k, base
    cdef double acc
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n_out, dtype=np.float64)
    cdef double[::1] y = out

    for m in range(n_out):
        j = m * down + center
        p = j % up
        q = j // up
        base = q - taps + 1 + front_pad
        acc = 0.0
        for k in range(taps):
            acc += phases_rev[p, k] * xp[base + k]
        y[m] = acc
    return out
