"""Pure-numpy gated-recurrent sequence kernel (fallback backend).

Both backends share one contract: the input projection ``x @ Wx + b`` is
precomputed outside (one large BLAS call), the kernel runs the serial
recurrence.  Gate order in the packed 3H axis is (update z, reset r,
candidate c); the state update is ``h = (1-z)*h_prev + z*cand``.
State is frozen past each row's true length and padded steps emit zeros.
"""

import numpy as np


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def gru_sequence_forward(xw, Wh, lengths, reverse):
    """Run the recurrence over time.

    xw: [B, T, 3H] input projections (bias included); Wh: [H, 3H];
    lengths: int64 [B].  Returns (out [B, T, H], cache).
    """
    B, T, H3 = xw.shape
    H = H3 // 3
    Whz, Whr, Whc = Wh[:, :H], Wh[:, H:2 * H], Wh[:, 2 * H:]
    steps = range(T - 1, -1, -1) if reverse else range(T)

    out = np.zeros((B, T, H))
    z_all = np.zeros((B, T, H))
    r_all = np.zeros((B, T, H))
    c_all = np.zeros((B, T, H))
    h_all = np.zeros((B, T, H))

    h = np.zeros((B, H))
    for t in steps:
        m = (t < lengths).astype(xw.dtype)[:, None]
        z = _sigmoid(xw[:, t, :H] + h @ Whz)
        r = _sigmoid(xw[:, t, H:2 * H] + h @ Whr)
        c = np.tanh(xw[:, t, 2 * H:] + (r * h) @ Whc)
        cand = (1.0 - z) * h + z * c
        h = m * cand + (1.0 - m) * h
        z_all[:, t] = z
        r_all[:, t] = r
        c_all[:, t] = c
        h_all[:, t] = h
        out[:, t] = m * h
    return out, (z_all, r_all, c_all, h_all)


def gru_sequence_backward(Wh, lengths, reverse, cache, g_out):
    """Backpropagate through the recurrence.

    Returns (d_xw [B, T, 3H], d_Wh [H, 3H]).  The cache is read-only, so
    repeated calls are bitwise identical.
    """
    z_all, r_all, c_all, h_all = cache
    B, T, H = z_all.shape
    Whz, Whr, Whc = Wh[:, :H], Wh[:, H:2 * H], Wh[:, 2 * H:]
    steps = list(range(T - 1, -1, -1)) if reverse else list(range(T))

    d_xw = np.zeros((B, T, 3 * H))
    d_Wh = np.zeros_like(Wh)
    dh = np.zeros((B, H))
    zero_h = np.zeros((B, H))

    for pos in range(len(steps) - 1, -1, -1):
        t = steps[pos]
        h_prev = h_all[:, steps[pos - 1]] if pos > 0 else zero_h
        m = (t < lengths).astype(g_out.dtype)[:, None]
        z, r, c = z_all[:, t], r_all[:, t], c_all[:, t]

        dh_total = dh + g_out[:, t] * m
        dcand = dh_total * m
        dh_prev = dh_total * (1.0 - m)

        dz = dcand * (c - h_prev)
        dc = dcand * z
        dh_prev = dh_prev + dcand * (1.0 - z)

        dac = dc * (1.0 - c * c)
        d_xw[:, t, 2 * H:] = dac
        drh = dac @ Whc.T
        d_Wh[:, 2 * H:] += (r * h_prev).T @ dac
        dr = drh * h_prev
        dh_prev = dh_prev + drh * r

        dar = dr * r * (1.0 - r)
        d_xw[:, t, H:2 * H] = dar
        d_Wh[:, H:2 * H] += h_prev.T @ dar
        dh_prev = dh_prev + dar @ Whr.T

        daz = dz * z * (1.0 - z)
        d_xw[:, t, :H] = daz
        d_Wh[:, :H] += h_prev.T @ daz
        dh_prev = dh_prev + daz @ Whz.T

        dh = dh_prev
    return d_xw, d_Wh
