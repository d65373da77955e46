"""Scratch: criterion-7 geometry — train at ~1160 tokens, decode 13k tokens."""
import time

import numpy as np

from winsum.inference import InferenceConfig, decode_document
from winsum.synthetic import build_vocab_table, make_long_pair, make_long_document, word_pool
from winsum.training import TrainConfig, train
from winsum.windowing import WindowSpec, annotate_pair, segment

t0 = time.time()
words = word_pool(16, 8, 16)  # 41 words incl '.'
vocab, table = build_vocab_table(words, dim=16, seed=5)

rng = np.random.default_rng(31)
pairs = [make_long_pair(rng, [380, 380, 400]) for _ in range(16)]
print("doc len:", len(pairs[0].document))

spec = WindowSpec(window_len=400, stride=380)
for p in pairs:
    ann = annotate_pair(p, spec, vocab, table)
    p.summary_shifted = ann.tokens
print("windows plan:", segment(len(pairs[0].document), spec).offsets)
print("sample shifted:", " ".join(pairs[0].summary_shifted))

config = TrainConfig(
    mode="dwm",
    window_len=400,
    stride=380,
    max_source_len=1160,
    max_summary_len=30,
    hidden_size=16,
    learning_rate=3e-3,
    batch_size=8,
    epochs=30,
    seed=2,
)
result = train(pairs, pairs[:1], vocab, table, config, dev_scorer=lambda p: 0.0)
losses = [r.train_loss for r in result.history]
print(f"epoch1 {losses[0]:.4f} last {losses[-1]:.4f} ratio {losses[-1]/losses[0]:.4f}")
print("train elapsed", time.time() - t0)

doc = make_long_document(np.random.default_rng(77), 13200)
print("long doc tokens:", len(doc))
inf = InferenceConfig(mode="dwm", beam_size=3, max_summary_len=125, window_len=400, stride=380, max_source_len=1160)
t1 = time.time()
res = decode_document(doc, result.params, vocab, inf)
print("decode elapsed", time.time() - t1)
print("summary:", " ".join(res.all_tokens[:60]))
print("visited windows:", res.visited_windows())
print("completed:", res.completed, "truncated:", res.truncated, "n tokens:", len(res.token_ids))
print("total elapsed", time.time() - t0)
