"""Scratch: does DWM training on the synthetic copy corpus learn shifts?"""
import time

import numpy as np

from winsum.inference import InferenceConfig, decode_document
from winsum.synthetic import build_vocab_table, make_copy_corpus, word_pool
from winsum.training import TrainConfig, train
from winsum.windowing import WindowSpec, annotate_pair

t0 = time.time()
words = word_pool(8, 4, 8)  # 21 words incl '.'
vocab, table = build_vocab_table(words, dim=16, seed=5)

pairs = make_copy_corpus(50, seed=11, regions=2, sentences_per_region=3)
held_out = make_copy_corpus(4, seed=99, regions=2, sentences_per_region=3)

spec = WindowSpec(window_len=12, stride=12)
for p in pairs + held_out:
    ann = annotate_pair(p, spec, vocab, table)
    p.summary_shifted = ann.tokens

print("sample doc:", " ".join(pairs[0].document.tokens))
print("sample shifted:", " ".join(pairs[0].summary_shifted))
print("ann windows:", annotate_pair(pairs[0], spec, vocab, table).window_indices)

config = TrainConfig(
    mode="dwm",
    window_len=12,
    stride=12,
    max_source_len=24,
    max_summary_len=16,
    hidden_size=16,
    learning_rate=3e-3,
    batch_size=10,
    epochs=60,
    seed=1,
)

result = train(pairs[:50], held_out[:2], vocab, table, config, dev_scorer=lambda p: 0.0)
losses = [r.train_loss for r in result.history]
print(f"epoch1 loss {losses[0]:.4f}  last {losses[-1]:.4f}  ratio {losses[-1]/losses[0]:.4f}")
print("elapsed", time.time() - t0)

# decode held-out
inf = InferenceConfig(mode="dwm", beam_size=3, max_summary_len=16, window_len=12, stride=12, max_source_len=24)
for p in held_out:
    res = decode_document(p.document, result.params, vocab, inf)
    print("ref :", " ".join(p.summary.tokens))
    print("hyp :", " ".join(res.all_tokens), "| windows:", res.windows, "| completed:", res.completed)
