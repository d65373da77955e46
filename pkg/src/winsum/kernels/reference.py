"""Pure-numpy LSTM sequence kernels.

These define the semantics the compiled extension must reproduce. The gate
layout is (input, forget, candidate, output) stacked along the 4H axis, and
the input projection x_t @ W.T is precomputed by the caller so the recurrence
only carries the hidden-to-hidden work.
"""

from __future__ import annotations

import numpy as np


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # Stable in both tails.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lstm_seq_forward(
    xw: np.ndarray, u: np.ndarray, b: np.ndarray, h0: np.ndarray, c0: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run an LSTM over a sequence.

    xw: (T, 4H) precomputed input projections; u: (4H, H); b: (4H,).
    Returns hidden states (T, H), cell states (T, H) and post-activation
    gates (T, 4H).
    """
    steps = xw.shape[0]
    hidden = u.shape[1]
    hs = np.empty((steps, hidden))
    cs = np.empty((steps, hidden))
    gates = np.empty((steps, 4 * hidden))
    h = h0
    c = c0
    for t in range(steps):
        pre = xw[t] + u @ h + b
        i = _sigmoid(pre[:hidden])
        f = _sigmoid(pre[hidden : 2 * hidden])
        g = np.tanh(pre[2 * hidden : 3 * hidden])
        o = _sigmoid(pre[3 * hidden :])
        c = f * c + i * g
        h = o * np.tanh(c)
        gates[t, :hidden] = i
        gates[t, hidden : 2 * hidden] = f
        gates[t, 2 * hidden : 3 * hidden] = g
        gates[t, 3 * hidden :] = o
        hs[t] = h
        cs[t] = c
    return hs, cs, gates


def lstm_seq_backward(
    u: np.ndarray,
    gates: np.ndarray,
    cs: np.ndarray,
    h0: np.ndarray,
    c0: np.ndarray,
    dh_out: np.ndarray,
    dc_last: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Backward pass matching lstm_seq_forward.

    dh_out: (T, H) gradient flowing into each hidden state from outside the
    recurrence (the caller folds any final-state gradient into the last row).
    Returns the gradient w.r.t. the precomputed input projections (T, 4H) and
    the initial hidden/cell states. Weight gradients follow outside as
    dxw.T @ inputs since they carry no sequential dependency.
    """
    steps, hidden = dh_out.shape
    dxw = np.empty((steps, 4 * hidden))
    dh_rec = np.zeros(hidden)
    dc = dc_last.astype(np.float64, copy=True)
    ut = u.T
    for t in range(steps - 1, -1, -1):
        i = gates[t, :hidden]
        f = gates[t, hidden : 2 * hidden]
        g = gates[t, 2 * hidden : 3 * hidden]
        o = gates[t, 3 * hidden :]
        tc = np.tanh(cs[t])
        dh = dh_out[t] + dh_rec
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        c_prev = cs[t - 1] if t > 0 else c0
        dpre = np.empty(4 * hidden)
        dpre[:hidden] = dc * g * i * (1.0 - i)
        dpre[hidden : 2 * hidden] = dc * c_prev * f * (1.0 - f)
        dpre[2 * hidden : 3 * hidden] = dc * i * (1.0 - g * g)
        dpre[3 * hidden :] = do * o * (1.0 - o)
        dxw[t] = dpre
        dh_rec = ut @ dpre
        dc = dc * f
    return dxw, dh_rec, dc
