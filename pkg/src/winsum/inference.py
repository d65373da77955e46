"""Decoding: batch-level beam search and the window-transition policies.

Completed hypotheses keep occupying beam slots and compete against longer
incomplete ones on length-normalized log probability, so a stronger partial
hypothesis can push a finished one out. Each hypothesis carries its own
window cursor; source windows are encoded lazily and shared across beams.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .corpus import Document, ExtendedVocab, Vocabulary
from .model import (
    DecoderState,
    EncodedWindow,
    ModelParams,
    decode_step,
    encode_window,
    init_decoder_state,
    window_arrays,
)
from .windowing import CorpusStats, WindowSpec, plan_budgets, schedule_from_budgets, segment

MODES = ("stan", "swm", "dwm")


@dataclass
class InferenceConfig:
    mode: str
    beam_size: int = 3
    max_summary_len: int = 125
    window_len: int = 400
    stride: int = 380
    max_source_len: int = 400
    k: float = 0.8
    d: float = 1.2

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.beam_size < 1 or self.max_summary_len < 1:
            raise ValueError("beam_size and max_summary_len must be positive")
        if self.mode == "stan" and self.window_len != self.max_source_len:
            raise ValueError("fixed-input mode requires window_len == max_source_len")
        WindowSpec(self.window_len, self.stride)

    @property
    def spec(self) -> WindowSpec:
        return WindowSpec(self.window_len, self.stride)


@dataclass
class BeamHypothesis:
    tokens: list[int] = field(default_factory=list)
    logp: float = 0.0
    state: object = None
    windows: list[int] = field(default_factory=list)
    completed: bool = False
    truncated: bool = False

    @property
    def done(self) -> bool:
        return self.completed or self.truncated


def normalized_score(hyp: BeamHypothesis) -> float:
    """Sum log probability per emitted token (shift markers included)."""
    if not hyp.tokens:
        raise ValueError("cannot normalize an empty hypothesis")
    return hyp.logp / len(hyp.tokens)


def _top_expansions(logprobs: np.ndarray, k: int) -> list[tuple[int, float]]:
    order = np.argsort(-logprobs, kind="stable")[: max(k, 1)]
    return [(int(t), float(logprobs[t])) for t in order if np.isfinite(logprobs[t])]


def beam_search(model, beam_size: int, max_len: int) -> list[BeamHypothesis]:
    """Run batch-level beam search against any step model.

    The model provides `start_state()`, `step(state, prev_token) ->
    (logprobs, next_state)`, a `start_id` and an `eos_id`; states expose a
    0-based `window_idx`. Returns the final beams, best first; ties keep the
    earlier beam.
    """
    beams = [BeamHypothesis(state=model.start_state())]
    for _ in range(max_len):
        if all(h.done for h in beams):
            break
        candidates: list[BeamHypothesis] = []
        for hyp in beams:
            if hyp.done:
                candidates.append(hyp)
                continue
            prev = hyp.tokens[-1] if hyp.tokens else model.start_id
            logprobs, state = model.step(hyp.state, prev)
            window_idx = getattr(state, "window_idx", 0)
            for tok, lp in _top_expansions(logprobs, beam_size):
                completed = tok == model.eos_id
                n_tokens = len(hyp.tokens) + 1
                candidates.append(
                    BeamHypothesis(
                        tokens=hyp.tokens + [tok],
                        logp=hyp.logp + lp,
                        state=state,
                        windows=hyp.windows + [window_idx],
                        completed=completed,
                        truncated=not completed and n_tokens >= max_len,
                    )
                )
        candidates.sort(key=normalized_score, reverse=True)  # stable: earlier beam wins ties
        beams = candidates[:beam_size]
    beams.sort(key=normalized_score, reverse=True)
    return beams


def greedy_decode(model, max_len: int) -> BeamHypothesis:
    """Argmax decoding; ties go to the lowest token id."""
    hyp = BeamHypothesis(state=model.start_state())
    while not hyp.done and len(hyp.tokens) < max_len:
        prev = hyp.tokens[-1] if hyp.tokens else model.start_id
        logprobs, state = model.step(hyp.state, prev)
        tok = int(np.argmax(logprobs))
        hyp = BeamHypothesis(
            tokens=hyp.tokens + [tok],
            logp=hyp.logp + float(logprobs[tok]),
            state=state,
            windows=hyp.windows + [getattr(state, "window_idx", 0)],
            completed=tok == model.eos_id,
            truncated=False,
        )
    if not hyp.completed and len(hyp.tokens) >= max_len:
        hyp.truncated = True
    return hyp


class WindowCache:
    """Encode source windows on first use; hypotheses share the encodings."""

    def __init__(self, src_ids, src_ext_ids, offsets, window_len, params: ModelParams):
        self.src_ids = src_ids
        self.src_ext_ids = src_ext_ids
        self.offsets = offsets
        self.window_len = window_len
        self.params = params
        self._cache: dict[int, EncodedWindow] = {}

    @property
    def n_windows(self) -> int:
        return len(self.offsets)

    def get(self, idx: int) -> EncodedWindow:
        if idx not in self._cache:
            ids, mask, ext = window_arrays(
                self.src_ids, self.src_ext_ids, self.offsets, self.window_len, idx
            )
            self._cache[idx] = encode_window(ids, mask, self.params, ext_ids=ext)
        return self._cache[idx]


class PGStepModel:
    """Pointer-generator step function with a mode-specific window policy."""

    def __init__(
        self,
        params: ModelParams,
        windows: WindowCache,
        ext: ExtendedVocab,
        mode: str,
        budgets: list[int] | None = None,
        max_len: int = 125,
    ):
        cfg = params.cfg
        self.params = params
        self.windows = windows
        self.ext = ext
        self.mode = mode
        self.start_id = cfg.start_id
        self.eos_id = cfg.eos_id
        self.shift_id = cfg.shift_id
        if mode == "swm":
            if budgets is None:
                raise ValueError("static-window decoding needs budgets")
            self.schedule = schedule_from_budgets(budgets, max_len + 1)
        else:
            self.schedule = None

    def start_state(self) -> DecoderState:
        return init_decoder_state(self.windows.get(0))

    def _next_cursor(self, state: DecoderState, prev_token: int) -> int:
        last = self.windows.n_windows - 1
        if self.mode == "dwm":
            if prev_token == self.shift_id:
                return min(state.window_idx + 1, last)
            return state.window_idx
        if self.mode == "swm":
            emitted = min(state.step, len(self.schedule) - 1)
            return min(int(self.schedule[emitted]), last)
        return 0

    def step(self, state: DecoderState, prev_token: int):
        cursor = self._next_cursor(state, prev_token)
        window = self.windows.get(cursor)
        input_id = self.ext.input_id(int(prev_token))
        shifted = replace(state, window_idx=cursor)
        out, next_state = decode_step(
            shifted, input_id, window, self.params, ext_size=self.ext.size
        )
        with np.errstate(divide="ignore"):
            logprobs = np.log(out.ext_probs)
        return logprobs, next_state


@dataclass
class DecodeResult:
    token_ids: list[int]
    windows: list[int]  # 0-based cursor per emitted token
    completed: bool
    truncated: bool
    score: float
    ext: ExtendedVocab

    @property
    def normalized(self) -> float:
        return self.score / max(1, len(self.token_ids))

    @property
    def all_tokens(self) -> list[str]:
        return [self.ext.word_of(t) for t in self.token_ids]

    @property
    def text_tokens(self) -> list[str]:
        """Summary surface tokens: shift markers and <eos> removed."""
        vocab = self.ext.vocab
        return [
            self.ext.word_of(t)
            for t in self.token_ids
            if t != vocab.shift_id and t != vocab.eos_id
        ]

    def trace(self) -> list[dict]:
        """Per-emission rows for the sidecar: 1-based windows, shifts kept."""
        vocab = self.ext.vocab
        rows = []
        for tok, win in zip(self.token_ids, self.windows):
            if tok == vocab.eos_id:
                continue
            rows.append(
                {
                    "token": self.ext.word_of(tok),
                    "window": int(win) + 1,
                    "shift": tok == vocab.shift_id,
                }
            )
        return rows

    def visited_windows(self) -> list[int]:
        seen = []
        for w in self.windows:
            if not seen or seen[-1] != w:
                seen.append(w)
        return seen


def decode_document(
    document: Document,
    params: ModelParams,
    vocab: Vocabulary,
    config: InferenceConfig,
    stats: CorpusStats | None = None,
) -> DecodeResult:
    """Summarize one document under the configured mode."""
    tokens = document.tokens
    if config.mode == "stan":
        tokens = tokens[: config.max_source_len]
    if not tokens:
        raise ValueError("empty document")
    plan = segment(len(tokens), config.spec)
    budgets = None
    if config.mode == "swm":
        if stats is None:
            raise ValueError("static-window decoding needs corpus statistics")
        plan = plan_budgets(
            len(tokens), config.spec, stats, config.k, config.d, config.max_summary_len
        )
        budgets = plan.budgets
    ext = ExtendedVocab(vocab, tokens)
    cache = WindowCache(vocab.encode(tokens), ext.source_ids(tokens), plan.offsets, plan.window_len, params)
    model = PGStepModel(params, cache, ext, config.mode, budgets=budgets, max_len=config.max_summary_len)
    if config.beam_size == 1:
        best = greedy_decode(model, config.max_summary_len)
    else:
        best = beam_search(model, config.beam_size, config.max_summary_len)[0]
    return DecodeResult(
        token_ids=best.tokens,
        windows=best.windows,
        completed=best.completed,
        truncated=best.truncated,
        score=best.logp,
        ext=ext,
    )


def lead3(document: Document) -> list[str]:
    """Concatenation of the first up-to-three document sentences."""
    out: list[str] = []
    for i in range(min(3, document.n_sentences)):
        out.extend(document.sentence_tokens(i))
    return out
