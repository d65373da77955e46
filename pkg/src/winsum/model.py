"""Numeric core: windowed Bi-LSTM encoder, shared decoder, copy-gate output.

Everything is float64 numpy with hand-written gradients; the LSTM recurrences
run through winsum.kernels. The decoder is shared across source windows: a
window shift moves the attention target and nothing else.

Vocabulary layout is positional: ids 0..n_content-1 are content words,
followed by <pad>, <unk>, <s>, <eos>, -->. The generation softmax covers
content words plus <eos>, plus the shift marker when the model is configured
to emit it; everything else (and out-of-vocabulary source words) can only be
produced through the copy path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels

PROB_FLOOR = 1e-12

N_SPECIALS = 5


class NumericsError(FloatingPointError):
    """Non-finite value in a forward pass (training divergence signal)."""


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int
    hidden_size: int
    n_content: int
    use_shift: bool = True
    train_embeddings: bool = False

    @property
    def dec_size(self) -> int:
        return 2 * self.hidden_size

    @property
    def vocab_size(self) -> int:
        return self.n_content + N_SPECIALS

    @property
    def pad_id(self) -> int:
        return self.n_content

    @property
    def unk_id(self) -> int:
        return self.n_content + 1

    @property
    def start_id(self) -> int:
        return self.n_content + 2

    @property
    def eos_id(self) -> int:
        return self.n_content + 3

    @property
    def shift_id(self) -> int:
        return self.n_content + 4

    def __post_init__(self):
        ids = list(range(self.n_content)) + [self.eos_id]
        if self.use_shift:
            ids.append(self.shift_id)
        gen_ids = np.asarray(ids, dtype=np.int64)
        pos = np.full(self.vocab_size, -1, dtype=np.int64)
        pos[gen_ids] = np.arange(len(gen_ids))
        object.__setattr__(self, "_gen_ids", gen_ids)
        object.__setattr__(self, "_gen_pos", pos)

    def gen_vocab_ids(self) -> np.ndarray:
        """Vocabulary ids covered by the generation softmax, in logit order."""
        return self._gen_ids

    def gen_position(self) -> np.ndarray:
        """vocab id -> index into the generation softmax, -1 if not generable."""
        return self._gen_pos


PARAM_SHAPES = (
    ("enc_fw_w", lambda c: (4 * c.hidden_size, c.embed_dim)),
    ("enc_fw_u", lambda c: (4 * c.hidden_size, c.hidden_size)),
    ("enc_fw_b", lambda c: (4 * c.hidden_size,)),
    ("enc_bw_w", lambda c: (4 * c.hidden_size, c.embed_dim)),
    ("enc_bw_u", lambda c: (4 * c.hidden_size, c.hidden_size)),
    ("enc_bw_b", lambda c: (4 * c.hidden_size,)),
    ("dec_w", lambda c: (4 * c.dec_size, c.embed_dim)),
    ("dec_u", lambda c: (4 * c.dec_size, c.dec_size)),
    ("dec_b", lambda c: (4 * c.dec_size,)),
    ("out_w", lambda c: (c.embed_dim, 2 * c.dec_size)),
    ("out_b", lambda c: (c.embed_dim,)),
    ("gate_ctx", lambda c: (c.dec_size,)),
    ("gate_state", lambda c: (c.dec_size,)),
    ("gate_inp", lambda c: (c.embed_dim,)),
    ("gate_bias", lambda c: ()),
    ("emb", lambda c: (c.vocab_size, c.embed_dim)),
)


class ModelParams:
    """Named trainable arrays, fixed order, float64."""

    def __init__(self, cfg: ModelConfig, arrays: dict[str, np.ndarray]):
        self.cfg = cfg
        for name, shape_fn in PARAM_SHAPES:
            arr = np.asarray(arrays[name], dtype=np.float64)
            expected = shape_fn(cfg)
            if arr.shape != expected:
                raise ValueError(f"param {name}: shape {arr.shape}, expected {expected}")
            setattr(self, name, arr)
        self.names = [name for name, _ in PARAM_SHAPES]

    @classmethod
    def init(cls, cfg: ModelConfig, emb_table: np.ndarray, seed: int) -> "ModelParams":
        """Seeded initialization; `emb_table` becomes the embedding parameter."""
        rng = np.random.default_rng(seed)
        h, d = cfg.hidden_size, cfg.dec_size
        arrays: dict[str, np.ndarray] = {}

        def uniform(shape, fan):
            s = 1.0 / math.sqrt(fan)
            return rng.uniform(-s, s, shape)

        for prefix, size in (("enc_fw", h), ("enc_bw", h), ("dec", d)):
            arrays[f"{prefix}_w"] = uniform((4 * size, cfg.embed_dim), size)
            arrays[f"{prefix}_u"] = uniform((4 * size, size), size)
            bias = np.zeros(4 * size)
            bias[size : 2 * size] = 1.0  # open forget gates at start
            arrays[f"{prefix}_b"] = bias
        arrays["out_w"] = uniform((cfg.embed_dim, 2 * d), 2 * d)
        arrays["out_b"] = np.zeros(cfg.embed_dim)
        arrays["gate_ctx"] = uniform((d,), d)
        arrays["gate_state"] = uniform((d,), d)
        arrays["gate_inp"] = uniform((cfg.embed_dim,), cfg.embed_dim)
        arrays["gate_bias"] = np.zeros(())
        emb = np.asarray(emb_table, dtype=np.float64)
        if emb.shape != (cfg.vocab_size, cfg.embed_dim):
            raise ValueError(f"embedding table shape {emb.shape} does not match config")
        arrays["emb"] = emb.copy()
        return cls(cfg, arrays)

    def named(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.names}

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(getattr(self, name)) for name in self.names}

    def emb_trainable_rows(self) -> np.ndarray:
        """Boolean mask of embedding rows that receive gradient updates."""
        mask = np.zeros(self.cfg.vocab_size, dtype=bool)
        mask[self.cfg.eos_id] = True
        mask[self.cfg.shift_id] = True
        if self.cfg.train_embeddings:
            mask[:] = True
            mask[self.cfg.pad_id] = False
        return mask


def stable_softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64)))


@dataclass
class EncodedWindow:
    h: np.ndarray  # (window_len, 2H); zero rows at pad positions
    mask: np.ndarray  # (window_len,) bool; True at real tokens
    length: int
    ext_ids: np.ndarray  # (window_len,) copy-target ids, -1 at pads
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def final_states(self) -> np.ndarray:
        """[forward end state ; backward start state] -> decoder init."""
        hidden = self.h.shape[1] // 2
        return np.concatenate([self.h[self.length - 1, :hidden], self.h[0, hidden:]])


@dataclass
class DecoderState:
    hidden: np.ndarray  # (2H,)
    cell: np.ndarray  # (2H,)
    window_idx: int
    step: int


@dataclass
class StepOutput:
    context: np.ndarray
    attention: np.ndarray
    out_embed: np.ndarray
    gen_probs: np.ndarray
    gen_prob: float
    ext_probs: np.ndarray | None = None


def encode_window(
    ids: np.ndarray, mask: np.ndarray, params: ModelParams, ext_ids: np.ndarray | None = None
) -> EncodedWindow:
    """Bi-LSTM encode one padded window; pad positions stay zero."""
    cfg = params.cfg
    ids = np.asarray(ids, dtype=np.int64)
    mask = np.asarray(mask, dtype=bool)
    window_len = len(ids)
    length = int(mask.sum())
    if length < 1:
        raise ValueError("window holds no real tokens")
    x = params.emb[ids[:length]]
    zeros = np.zeros(cfg.hidden_size)
    xw_f = x @ params.enc_fw_w.T
    hs_f, cs_f, gates_f = kernels.lstm_seq_forward(xw_f, params.enc_fw_u, params.enc_fw_b, zeros, zeros)
    x_rev = x[::-1]
    xw_b = x_rev @ params.enc_bw_w.T
    hs_b, cs_b, gates_b = kernels.lstm_seq_forward(xw_b, params.enc_bw_u, params.enc_bw_b, zeros, zeros)
    h = np.zeros((window_len, 2 * cfg.hidden_size))
    h[:length, : cfg.hidden_size] = hs_f
    h[:length, cfg.hidden_size :] = hs_b[::-1]
    if ext_ids is None:
        ext_ids = np.where(mask, ids, -1)
    cache = {
        "ids": ids[:length],
        "x": x,
        "fw": (hs_f, cs_f, gates_f),
        "bw": (hs_b, cs_b, gates_b),
    }
    return EncodedWindow(h=h, mask=mask.astype(bool), length=length, ext_ids=ext_ids, cache=cache)


def init_decoder_state(first_window: EncodedWindow) -> DecoderState:
    cfg_dec = first_window.h.shape[1]
    return DecoderState(
        hidden=first_window.final_states.copy(),
        cell=np.zeros(cfg_dec),
        window_idx=0,
        step=0,
    )


def shift_window(state: DecoderState, n_windows: int) -> DecoderState:
    """Advance the window cursor; the recurrent state is untouched."""
    return DecoderState(
        hidden=state.hidden,
        cell=state.cell,
        window_idx=min(state.window_idx + 1, n_windows - 1),
        step=state.step,
    )


def attend(state_hidden: np.ndarray, window: EncodedWindow) -> tuple[np.ndarray, np.ndarray]:
    """Masked dot-product attention of the decoder state over one window."""
    if not window.mask.any():
        raise ValueError("attention over a fully masked window")
    logits = window.h @ state_hidden
    logits = np.where(window.mask, logits, -np.inf)
    finite = logits[window.mask]
    shifted = logits - finite.max()
    weights = np.zeros_like(logits)
    weights[window.mask] = np.exp(shifted[window.mask])
    weights /= weights.sum()
    context = weights @ window.h
    return context, weights


def pg_gate(
    context: np.ndarray, state_hidden: np.ndarray, x_emb: np.ndarray, params: ModelParams
) -> float:
    """Probability of generating (vs copying) this step."""
    z = (
        params.gate_ctx @ context
        + params.gate_state @ state_hidden
        + params.gate_inp @ x_emb
        + float(params.gate_bias)
    )
    return float(sigmoid(z))


def extended_distribution(
    gen_probs: np.ndarray,
    gen_prob: float,
    attention: np.ndarray,
    window: EncodedWindow,
    ext_size: int,
    cfg: ModelConfig,
) -> np.ndarray:
    """Mix generation and copy mass over vocabulary plus source words."""
    out = np.zeros(ext_size)
    out[cfg.gen_vocab_ids()] = gen_prob * gen_probs
    real = window.mask
    np.add.at(out, window.ext_ids[real], (1.0 - gen_prob) * attention[real])
    return out


def decode_step(
    state: DecoderState,
    input_id: int,
    window: EncodedWindow,
    params: ModelParams,
    ext_size: int | None = None,
) -> tuple[StepOutput, DecoderState]:
    """One inference step: advance the LSTM, attend, project, gate."""
    cfg = params.cfg
    x = params.emb[input_id]
    xw = (x @ params.dec_w.T)[None, :]
    hs, cs, _ = kernels.lstm_seq_forward(xw, params.dec_u, params.dec_b, state.hidden, state.cell)
    hidden, cell = hs[0], cs[0]
    context, attention = attend(hidden, window)
    m = np.tanh(np.concatenate([context, hidden]))
    out_embed = params.out_w @ m + params.out_b
    if not np.all(np.isfinite(out_embed)):
        raise NumericsError("non-finite decoder output")
    e_out = params.emb[cfg.gen_vocab_ids()]
    gen_probs = stable_softmax(e_out @ out_embed)
    gen_prob = pg_gate(context, hidden, x, params)
    ext = None
    if ext_size is not None:
        ext = extended_distribution(gen_probs, gen_prob, attention, window, ext_size, cfg)
    output = StepOutput(
        context=context,
        attention=attention,
        out_embed=out_embed,
        gen_probs=gen_probs,
        gen_prob=gen_prob,
        ext_probs=ext,
    )
    next_state = DecoderState(hidden=hidden, cell=cell, window_idx=state.window_idx, step=state.step + 1)
    return output, next_state


# ---------------------------------------------------------------------------
# Teacher-forced pass over a whole target sequence, and its exact gradients.
# ---------------------------------------------------------------------------


@dataclass
class TeacherForcedResult:
    loss: float
    target_probs: np.ndarray  # (T,) probability assigned to each target
    n_clamped: int
    cache: dict = field(repr=False, default_factory=dict)


def window_arrays(src_ids, src_ext_ids, offsets, window_len, idx):
    start = offsets[idx]
    end = min(start + window_len, len(src_ids))
    ids = np.full(window_len, 0, dtype=np.int64)
    ids[: end - start] = src_ids[start:end]
    mask = np.zeros(window_len, dtype=bool)
    mask[: end - start] = True
    ext = np.full(window_len, -1, dtype=np.int64)
    ext[: end - start] = src_ext_ids[start:end]
    return ids, mask, ext


def teacher_forced_pass(
    params: ModelParams,
    src_ids: np.ndarray,
    src_ext_ids: np.ndarray,
    offsets: list[int],
    window_len: int,
    input_ids: np.ndarray,
    target_ids: np.ndarray,
    cursors: np.ndarray,
) -> TeacherForcedResult:
    """Forward pass with known decoder inputs and per-step window cursors."""
    cfg = params.cfg
    steps = len(target_ids)
    if steps == 0:
        raise ValueError("empty target sequence")
    needed = sorted(set(int(c) for c in cursors) | {0})
    windows: dict[int, EncodedWindow] = {}
    for idx in needed:
        ids, mask, ext = window_arrays(src_ids, src_ext_ids, offsets, window_len, idx)
        windows[idx] = encode_window(ids, mask, params, ext_ids=ext)

    s0 = windows[0].final_states
    x_in = params.emb[input_ids]
    xw = x_in @ params.dec_w.T
    hs, cs, gates = kernels.lstm_seq_forward(xw, params.dec_u, params.dec_b, s0, np.zeros(cfg.dec_size))

    attention = np.zeros((steps, window_len))
    context = np.empty((steps, cfg.dec_size))
    for idx in needed:
        rows = np.flatnonzero(cursors == idx)
        if rows.size == 0:
            continue
        win = windows[idx]
        logits = hs[rows] @ win.h.T
        logits[:, ~win.mask] = -np.inf
        weights = stable_softmax(logits, axis=1)
        attention[rows] = weights
        context[rows] = weights @ win.h

    concat = np.concatenate([context, hs], axis=1)
    m = np.tanh(concat)
    out_embed = m @ params.out_w.T + params.out_b
    gen_ids = cfg.gen_vocab_ids()
    e_out = params.emb[gen_ids]
    gen_probs = stable_softmax(out_embed @ e_out.T, axis=1)
    gen_prob = sigmoid(context @ params.gate_ctx + hs @ params.gate_state + x_in @ params.gate_inp + float(params.gate_bias))

    gen_pos = cfg.gen_position()
    gen_part = np.zeros(steps)
    copy_mass = np.zeros(steps)
    for t in range(steps):
        tgt = int(target_ids[t])
        if tgt < cfg.vocab_size and gen_pos[tgt] >= 0:
            gen_part[t] = gen_probs[t, gen_pos[tgt]]
        win = windows[int(cursors[t])]
        hits = win.mask & (win.ext_ids == tgt)
        if hits.any():
            copy_mass[t] = attention[t, hits].sum()
    target_probs = gen_prob * gen_part + (1.0 - gen_prob) * copy_mass
    clamped = target_probs < PROB_FLOOR
    loss = float(np.mean(-np.log(np.maximum(target_probs, PROB_FLOOR))))
    if not np.isfinite(loss):
        raise NumericsError("non-finite loss")

    cache = dict(
        windows=windows,
        needed=needed,
        s0=s0,
        x_in=x_in,
        hs=hs,
        cs=cs,
        gates=gates,
        attention=attention,
        context=context,
        m=m,
        out_embed=out_embed,
        gen_probs=gen_probs,
        gen_prob=gen_prob,
        gen_part=gen_part,
        copy_mass=copy_mass,
        target_probs=target_probs,
        clamped=clamped,
        input_ids=input_ids,
        target_ids=target_ids,
        cursors=cursors,
        gen_ids=gen_ids,
        gen_pos=gen_pos,
    )
    return TeacherForcedResult(loss=loss, target_probs=target_probs, n_clamped=int(clamped.sum()), cache=cache)


def teacher_forced_grads(params: ModelParams, result: TeacherForcedResult) -> dict[str, np.ndarray]:
    """Exact gradients of the mean step NLL for every parameter array."""
    cfg = params.cfg
    c = result.cache
    windows: dict[int, EncodedWindow] = c["windows"]
    steps = len(c["target_ids"])
    hidden = cfg.hidden_size
    grads = params.zero_grads()

    # Loss -> per-step probability pieces. Clamped steps sit on the flat part
    # of the floored log, so they contribute no gradient.
    dprob = np.where(c["clamped"], 0.0, -1.0 / (steps * np.maximum(c["target_probs"], PROB_FLOOR)))
    dgen_prob = dprob * (c["gen_part"] - c["copy_mass"])
    dgen_part = dprob * c["gen_prob"]
    dcopy = dprob * (1.0 - c["gen_prob"])

    # Generation softmax backward (dense over the generation support).
    n_gen = len(c["gen_ids"])
    dgen_probs = np.zeros((steps, n_gen))
    for t in range(steps):
        tgt = int(c["target_ids"][t])
        if tgt < cfg.vocab_size and c["gen_pos"][tgt] >= 0:
            dgen_probs[t, c["gen_pos"][tgt]] = dgen_part[t]
    probs = c["gen_probs"]
    dz = probs * (dgen_probs - (dgen_probs * probs).sum(axis=1, keepdims=True))

    e_out = params.emb[c["gen_ids"]]
    d_out_embed = dz @ e_out
    demb = grads["emb"]
    np.add.at(demb, c["gen_ids"], dz.T @ c["out_embed"])

    # Output projection.
    grads["out_w"] += d_out_embed.T @ c["m"]
    grads["out_b"] += d_out_embed.sum(axis=0)
    dm = d_out_embed @ params.out_w
    dconcat = (1.0 - c["m"] ** 2) * dm
    dcontext = dconcat[:, : cfg.dec_size].copy()
    dhs = dconcat[:, cfg.dec_size :].copy()

    # Copy gate.
    gp = c["gen_prob"]
    dgate_pre = gp * (1.0 - gp) * dgen_prob
    grads["gate_ctx"] += dgate_pre @ c["context"]
    grads["gate_state"] += dgate_pre @ c["hs"]
    grads["gate_inp"] += dgate_pre @ c["x_in"]
    grads["gate_bias"] += dgate_pre.sum()
    dcontext += np.outer(dgate_pre, params.gate_ctx)
    dhs += np.outer(dgate_pre, params.gate_state)
    dx_in = np.outer(dgate_pre, params.gate_inp)

    # Attention backward, window by window. Copy mass feeds the attention
    # weights directly at positions matching the target.
    dwin_h = {idx: np.zeros_like(windows[idx].h) for idx in c["needed"]}
    for idx in c["needed"]:
        rows = np.flatnonzero(c["cursors"] == idx)
        if rows.size == 0:
            continue
        win = windows[idx]
        weights = c["attention"][rows]
        dweights = np.zeros_like(weights)
        for r, t in enumerate(rows):
            tgt = int(c["target_ids"][t])
            hits = win.mask & (win.ext_ids == tgt)
            if hits.any():
                dweights[r, hits] = dcopy[t]
        dweights += dcontext[rows] @ win.h.T
        dwin_h[idx] += weights.T @ dcontext[rows]
        dlogits = weights * (dweights - (weights * dweights).sum(axis=1, keepdims=True))
        dhs[rows] += dlogits @ win.h
        dwin_h[idx] += dlogits.T @ c["hs"][rows]

    # Decoder BPTT.
    dxw, ds0, _ = kernels.lstm_seq_backward(
        params.dec_u, c["gates"], c["cs"], c["s0"], np.zeros(cfg.dec_size), dhs, np.zeros(cfg.dec_size)
    )
    grads["dec_w"] += dxw.T @ c["x_in"]
    h_prev = np.vstack([c["s0"], c["hs"][:-1]])
    grads["dec_u"] += dxw.T @ h_prev
    grads["dec_b"] += dxw.sum(axis=0)
    dx_in += dxw @ params.dec_w
    np.add.at(demb, c["input_ids"], dx_in)

    # Decoder init state comes from window 0's end states.
    win0 = windows[0]
    dwin_h[0][win0.length - 1, :hidden] += ds0[:hidden]
    dwin_h[0][0, hidden:] += ds0[hidden:]

    # Encoder BPTT per window; both directions share the embedded inputs.
    zeros_h = np.zeros(hidden)
    for idx in c["needed"]:
        win = windows[idx]
        length = win.length
        dh = dwin_h[idx][:length]
        x = win.cache["x"]
        hs_f, cs_f, gates_f = win.cache["fw"]
        dxw_f, _, _ = kernels.lstm_seq_backward(
            params.enc_fw_u, gates_f, cs_f, zeros_h, zeros_h, dh[:, :hidden], zeros_h
        )
        grads["enc_fw_w"] += dxw_f.T @ x
        grads["enc_fw_u"] += dxw_f.T @ np.vstack([zeros_h, hs_f[:-1]])
        grads["enc_fw_b"] += dxw_f.sum(axis=0)
        dx_win = dxw_f @ params.enc_fw_w

        hs_b, cs_b, gates_b = win.cache["bw"]
        dh_b = dh[::-1, hidden:]
        dxw_b, _, _ = kernels.lstm_seq_backward(
            params.enc_bw_u, gates_b, cs_b, zeros_h, zeros_h, dh_b, zeros_h
        )
        grads["enc_bw_w"] += dxw_b.T @ x[::-1]
        grads["enc_bw_u"] += dxw_b.T @ np.vstack([zeros_h, hs_b[:-1]])
        grads["enc_bw_b"] += dxw_b.sum(axis=0)
        dx_win += (dxw_b @ params.enc_bw_w)[::-1]
        np.add.at(demb, win.cache["ids"], dx_win)

    demb *= params.emb_trainable_rows()[:, None]
    return grads
