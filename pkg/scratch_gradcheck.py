"""Scratch finite-difference check of teacher_forced_pass gradients."""
import numpy as np

from winsum.model import ModelConfig, ModelParams, teacher_forced_pass, teacher_forced_grads

rng = np.random.default_rng(7)

cfg = ModelConfig(embed_dim=8, hidden_size=4, n_content=15, use_shift=True, train_embeddings=True)
emb = rng.uniform(-0.3, 0.3, (cfg.vocab_size, cfg.embed_dim))
emb[cfg.pad_id] = 0.0
params = ModelParams.init(cfg, emb, seed=3)

# doc of 10 tokens, window_len 6, stride 4 -> 2 windows
src_ids = rng.integers(0, cfg.n_content, 10)
src_ids[3] = cfg.unk_id  # simulate an OOV source word via extended id below
src_ext_ids = src_ids.copy()
src_ext_ids[3] = cfg.vocab_size  # first OOV extended id
offsets = [0, 4]
window_len = 6

# DWM-style targets: shift in the middle, eos at end, one copy-only target (the OOV)
target_ids = np.array([2, cfg.vocab_size, cfg.shift_id, 5, cfg.eos_id], dtype=np.int64)
input_ids = np.array([cfg.start_id, 2, cfg.unk_id, cfg.shift_id, 5], dtype=np.int64)
cursors = np.array([0, 0, 0, 1, 1], dtype=np.int64)

args = (src_ids, src_ext_ids, offsets, window_len, input_ids, target_ids, cursors)


def loss_fn(p):
    return teacher_forced_pass(p, *args).loss


res = teacher_forced_pass(params, *args)
print("loss:", res.loss, "clamped:", res.n_clamped)
grads = teacher_forced_grads(params, res)

step = 1e-4
worst = {}
for name in params.names:
    arr = getattr(params, name)
    g = grads[name]
    num = np.zeros_like(g)
    it = np.nditer(arr, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = arr[idx]
        arr[idx] = orig + step
        lp = loss_fn(params)
        arr[idx] = orig - step
        lm = loss_fn(params)
        arr[idx] = orig
        num[idx] = (lp - lm) / (2 * step)
        it.iternext()
    denom = np.maximum(np.maximum(np.abs(g), np.abs(num)), 1e-6)
    rel = np.asarray(np.abs(g - num) / denom)
    rel = np.where(np.maximum(np.abs(g), np.abs(num)) < 1e-6, 0.0, rel)
    worst[name] = rel.max()
    print(f"{name:12s} max rel err {rel.max():.3e}  |analytic| max {np.abs(g).max():.3e}")

print("WORST:", max(worst.values()))
assert max(worst.values()) < 1e-3, "gradient check failed"
print("GRADCHECK OK")
