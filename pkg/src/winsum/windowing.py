"""Window segmentation and the two window-transition policies.

The static policy turns corpus length statistics into per-window token
budgets; the dynamic policy rewrites reference summaries with explicit
window-shift tokens derived from sentence similarity against the source.
Window indices are 1-based here (window 1 is the document head); the decoder
cursor used elsewhere is the 0-based equivalent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import EOS, SHIFT, Document, SummaryPair, Vocabulary


@dataclass(frozen=True)
class WindowSpec:
    window_len: int
    stride: int

    def __post_init__(self):
        if self.window_len <= 0 or not (0 < self.stride <= self.window_len):
            raise ValueError(
                f"invalid window spec: window_len={self.window_len}, stride={self.stride}"
            )


@dataclass
class WindowPlan:
    offsets: list[int]
    window_len: int
    padded_tail: int
    budgets: list[int] | None = None

    @property
    def n_windows(self) -> int:
        return len(self.offsets)

    def window_slice(self, idx: int) -> tuple[int, int]:
        """(start, end) token offsets of window `idx` (0-based); end may exceed the document."""
        start = self.offsets[idx]
        return start, start + self.window_len


def segment(doc_len: int, spec: WindowSpec) -> WindowPlan:
    """Cover `doc_len` tokens with overlapping windows; the tail is padded."""
    if doc_len < 1:
        raise ValueError("document must contain at least one token")
    n = max(1, math.ceil((doc_len - spec.window_len) / spec.stride) + 1)
    offsets = [i * spec.stride for i in range(n)]
    padded_tail = max(0, offsets[-1] + spec.window_len - doc_len)
    return WindowPlan(offsets=offsets, window_len=spec.window_len, padded_tail=padded_tail)


def static_weights(n_windows: int, k: float, d: float) -> np.ndarray:
    """Probability weight per window from the decaying-importance curve.

    Normalizes logits -k*(1 + i*d**i) for i = 1..n over a softmax; with d=0
    every window gets the same weight.
    """
    if n_windows < 1:
        raise ValueError("need at least one window")
    i = np.arange(1, n_windows + 1, dtype=np.float64)
    logits = -k * (1.0 + i * np.power(d, i))
    logits -= logits.max()
    w = np.exp(logits)
    return w / w.sum()


def majority_length(lengths: list[int]) -> int:
    """Smallest length v with at least 90% of `lengths` <= v."""
    if not lengths:
        raise ValueError("empty length list")
    ordered = sorted(lengths)
    rank = math.ceil(0.9 * len(ordered))
    return ordered[rank - 1]


@dataclass
class CorpusStats:
    majority_doc_len: int
    majority_sum_len: int

    def __post_init__(self):
        if self.majority_doc_len <= 0 or self.majority_sum_len <= 0:
            raise ValueError("majority lengths must be positive")

    @classmethod
    def from_pairs(cls, pairs: list[SummaryPair]) -> "CorpusStats":
        return cls(
            majority_doc_len=majority_length([len(p.document) for p in pairs]),
            majority_sum_len=majority_length([len(p.summary) for p in pairs]),
        )

    def to_dict(self) -> dict:
        return {
            "majority_doc_len": self.majority_doc_len,
            "majority_sum_len": self.majority_sum_len,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "CorpusStats":
        return cls(int(obj["majority_doc_len"]), int(obj["majority_sum_len"]))


def expected_summary_length(doc_len: int, stats: CorpusStats, cap: int | None = None) -> int:
    """Summary length scaled linearly from the corpus majority lengths.

    Rounds half away from zero in exact integer arithmetic (16.65 -> 17
    regardless of float representation), clamped to [1, cap].
    """
    num = stats.majority_sum_len * doc_len
    den = stats.majority_doc_len
    value = (2 * num + den) // (2 * den)
    value = max(1, value)
    if cap is not None:
        value = min(value, cap)
    return value


def window_budgets(weights: np.ndarray, expected_len: int) -> list[int]:
    """Integer per-window token budgets summing exactly to `expected_len`.

    Largest-remainder rounding of expected_len * weights; remainder ties go to
    the earlier window.
    """
    real = np.asarray(weights, dtype=np.float64) * expected_len
    base = np.floor(real).astype(int)
    leftover = expected_len - int(base.sum())
    if leftover > 0:
        frac = real - base
        order = sorted(range(len(real)), key=lambda i: (-frac[i], i))
        for i in order[:leftover]:
            base[i] += 1
    return base.tolist()


def schedule_from_budgets(budgets: list[int], n_steps: int) -> np.ndarray:
    """0-based window cursor per decode step under a budget plan.

    Step t falls into the first window whose cumulative budget exceeds t;
    steps past the total budget clamp to the last window.
    """
    bounds = np.cumsum(budgets)
    steps = np.arange(n_steps)
    cursor = np.searchsorted(bounds, steps, side="right")
    return np.minimum(cursor, len(budgets) - 1)


def plan_budgets(
    doc_len: int, spec: WindowSpec, stats: CorpusStats, k: float, d: float, max_summary_len: int
) -> WindowPlan:
    """Segment a document and attach static-policy budgets to the plan."""
    plan = segment(doc_len, spec)
    weights = static_weights(plan.n_windows, k, d)
    expected = expected_summary_length(doc_len, stats, cap=max_summary_len)
    plan.budgets = window_budgets(weights, expected)
    return plan


def sentence_embedding(tokens: list[str], vocab: Vocabulary, table: np.ndarray) -> np.ndarray:
    """Sum of the word embeddings over a sentence; OOV words use the unk row."""
    if not tokens:
        raise ValueError("empty sentence span")
    ids = vocab.encode(tokens)
    return table[ids].sum(axis=0)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def window_of_span(span: tuple[int, int], plan: WindowPlan) -> int:
    """1-based window of a source sentence span.

    The last window containing the full span wins; a span straddling every
    window boundary falls back to the last window containing its final token.
    """
    start, end = span
    full = -1
    tail = -1
    last_tok = end - 1
    for idx in range(plan.n_windows):
        w_start, w_end = plan.window_slice(idx)
        if w_start <= start and end <= w_end:
            full = idx
        if w_start <= last_tok < w_end:
            tail = idx
    chosen = full if full >= 0 else tail
    if chosen < 0:
        raise ValueError(f"span {span} not covered by any window")
    return chosen + 1


def map_summary_to_windows(
    pair: SummaryPair, plan: WindowPlan, vocab: Vocabulary, table: np.ndarray
) -> list[int]:
    """1-based source window per summary sentence via cosine similarity.

    Each summary sentence maps to its most similar source sentence (ties break
    toward the earliest source sentence), then to that sentence's window.
    """
    doc = pair.document
    source_vecs = [
        sentence_embedding(doc.sentence_tokens(i), vocab, table) for i in range(doc.n_sentences)
    ]
    source_windows = [window_of_span(span, plan) for span in doc.sentence_spans]
    assigned = []
    for j in range(pair.summary.n_sentences):
        vec = sentence_embedding(pair.summary.sentence_tokens(j), vocab, table)
        best = 0
        best_score = -np.inf
        for i, src_vec in enumerate(source_vecs):
            score = cosine_similarity(vec, src_vec)
            if score > best_score:
                best, best_score = i, score
        assigned.append(source_windows[best])
    return assigned


def sequentialize(window_indices: list[int]) -> list[int]:
    """Running maximum: makes the per-sentence window order non-decreasing."""
    return np.maximum.accumulate(np.asarray(window_indices, dtype=np.int64)).tolist()


@dataclass
class ShiftAnnotatedSummary:
    tokens: list[str] = field(default_factory=list)
    raw_indices: list[int] = field(default_factory=list)
    window_indices: list[int] = field(default_factory=list)


def inject_shift_tokens(summary: Document, seq_indices: list[int]) -> list[str]:
    """Summary tokens with shift markers inserted and <eos> appended.

    seq_indices[0] - 1 markers lead the summary; between consecutive sentences
    the marker count equals their window-index difference.
    """
    if len(seq_indices) != summary.n_sentences:
        raise ValueError("one window index per summary sentence required")
    out: list[str] = [SHIFT] * (seq_indices[0] - 1) if seq_indices else []
    for j in range(summary.n_sentences):
        out.extend(summary.sentence_tokens(j))
        if j + 1 < summary.n_sentences:
            out.extend([SHIFT] * (seq_indices[j + 1] - seq_indices[j]))
    out.append(EOS)
    return out


def strip_shift_tokens(tokens: list[str]) -> list[str]:
    """Drop shift markers and a trailing <eos>: recovers the plain summary."""
    out = [t for t in tokens if t != SHIFT]
    if out and out[-1] == EOS:
        out.pop()
    return out


def annotate_pair(
    pair: SummaryPair, spec: WindowSpec, vocab: Vocabulary, table: np.ndarray
) -> ShiftAnnotatedSummary:
    """Full dynamic-window preprocessing for one pair."""
    plan = segment(len(pair.document), spec)
    raw = map_summary_to_windows(pair, plan, vocab, table)
    seq = sequentialize(raw)
    return ShiftAnnotatedSummary(
        tokens=inject_shift_tokens(pair.summary, seq),
        raw_indices=raw,
        window_indices=seq,
    )
