"""Tape-level fused recurrence op built on the kernel backends.

The large input projection runs as one BLAS call here; only the serial
time loop is delegated to the selected kernel.
"""

import numpy as np

from .. import kernels
from ..autodiff.tensor import _apply, _shape_error


def gru_sequence(x, Wx, Wh, b, lengths, reverse=False):
    """Single-direction gated recurrence over a padded batch.

    x: Tensor [B, T, I]; Wx: [I, 3H]; Wh: [H, 3H]; b: [3H];
    lengths: int array [B] of true lengths.  Returns Tensor [B, T, H]
    with zeros at padded steps and state frozen past each true length.
    """
    if x.ndim != 3:
        raise _shape_error("gru_sequence", x.shape)
    B, T, I = x.shape
    if T == 0:
        raise _shape_error("gru_sequence", x.shape)
    H3 = Wx.shape[1]
    H = H3 // 3
    if Wx.shape[0] != I or H3 != 3 * H or Wh.shape != (H, H3) or b.shape != (H3,):
        raise _shape_error("gru_sequence", x.shape, Wx.shape, Wh.shape, b.shape)
    lengths = np.asarray(lengths, dtype=np.int64)
    if lengths.shape != (B,):
        raise _shape_error("gru_sequence", x.shape, lengths.shape)

    xw = (x.data.reshape(B * T, I) @ Wx.data + b.data).reshape(B, T, H3)
    xw = np.ascontiguousarray(xw)
    out, cache = kernels.gru_sequence_forward(xw, Wh.data, lengths, reverse)

    x_data, Wx_data = x.data, Wx.data

    def backward(g):
        g = np.ascontiguousarray(g)
        d_xw, d_Wh = kernels.gru_sequence_backward(Wh.data, lengths, reverse, cache, g)
        d_xw2 = d_xw.reshape(B * T, H3)
        d_x = (d_xw2 @ Wx_data.T).reshape(B, T, I)
        d_Wx = x_data.reshape(B * T, I).T @ d_xw2
        d_b = d_xw2.sum(axis=0)
        return d_x, d_Wx, d_Wh, d_b

    return _apply("gru_sequence", [x, Wx, Wh, b], out, backward)
