"""Pure-numpy fallback for the polyphase FIR inner loop.

Exploits the fact that for a reduced (coprime) up/down ratio each phase p
serves every up-th output sample, and consecutive outputs of one phase see
input windows that slide by exactly ``down`` samples. That turns the whole
filter into ``up`` strided matrix-vector products.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def polyphase_apply(xp, phases_rev, up, down, n_out, center, front_pad):
    taps = phases_rev.shape[1]
    y = np.empty(n_out, dtype=np.float64)
    windows = sliding_window_view(xp, taps)
    for m0 in range(min(up, n_out)):
        j = m0 * down + center
        p = j % up
        q = j // up
        ms = np.arange(m0, n_out, up)
        start = q - taps + 1 + front_pad
        # stride between consecutive outputs of this phase is `down` windows
        w = windows[start::down][: len(ms)]
        y[ms] = w @ phases_rev[p]
    return y
