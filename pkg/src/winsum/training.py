"""Mean-NLL training with Adam, teacher forcing, and dev-ROUGE-L selection.

A batch is processed member by member (gradients averaged with a fixed
reduction order), which sidesteps cross-document padding entirely. Window
transitions during teacher forcing follow the mode: the single window for the
fixed-input baseline, budget exhaustion for the static policy, annotated
shift tokens for the dynamic one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import EOS, SHIFT, ExtendedVocab, SummaryPair, Vocabulary
from .model import (
    PROB_FLOOR,
    ModelConfig,
    ModelParams,
    NumericsError,
    teacher_forced_grads,
    teacher_forced_pass,
)
from .windowing import (
    CorpusStats,
    WindowSpec,
    plan_budgets,
    schedule_from_budgets,
    segment,
)

MODES = ("stan", "swm", "dwm")


class TrainingDiverged(RuntimeError):
    """Loss or gradients went non-finite."""


@dataclass
class TrainConfig:
    mode: str
    window_len: int
    stride: int
    max_source_len: int
    max_summary_len: int = 125
    hidden_size: int = 256
    k: float = 0.8
    d: float = 1.2
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 8
    epochs: int = 10
    clip_norm: float = 2.0
    seed: int = 0
    train_embeddings: bool = False
    dev_beam: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "stan" and self.window_len != self.max_source_len:
            raise ValueError("fixed-input mode requires window_len == max_source_len")
        WindowSpec(self.window_len, self.stride)  # validates

    @property
    def spec(self) -> WindowSpec:
        return WindowSpec(self.window_len, self.stride)


@dataclass
class TrainingExample:
    src_ids: np.ndarray
    src_ext_ids: np.ndarray
    offsets: list[int]
    window_len: int
    input_ids: np.ndarray
    target_ids: np.ndarray
    cursors: np.ndarray
    doc_len: int


def target_tokens_for(pair: SummaryPair, mode: str, max_summary_len: int) -> list[str]:
    """Teacher-forcing target surface tokens, <eos>-terminated."""
    if mode == "dwm":
        if pair.summary_shifted is None:
            raise ValueError("dynamic-window training needs preprocessed shift annotations")
        body = list(pair.summary_shifted)
        if body and body[-1] == EOS:
            body = body[:-1]
    else:
        body = list(pair.summary.tokens)
    body = body[:max_summary_len]
    return body + [EOS]


def build_example(
    pair: SummaryPair,
    vocab: Vocabulary,
    config: TrainConfig,
    stats: CorpusStats | None = None,
) -> TrainingExample:
    """Freeze one pair into ids, window offsets and per-step cursors."""
    doc_tokens = pair.document.tokens
    if config.mode == "stan":
        doc_tokens = doc_tokens[: config.max_source_len]
    if not doc_tokens:
        raise ValueError("empty document")
    plan = segment(len(doc_tokens), config.spec)

    targets = target_tokens_for(pair, config.mode, config.max_summary_len)
    steps = len(targets)
    if config.mode == "dwm":
        shifts = np.cumsum([t == SHIFT for t in targets])
        before = np.concatenate([[0], shifts[:-1]])
        cursors = np.minimum(before, plan.n_windows - 1).astype(np.int64)
    elif config.mode == "swm":
        if stats is None:
            raise ValueError("static-window training needs corpus statistics")
        plan = plan_budgets(
            len(doc_tokens), config.spec, stats, config.k, config.d, config.max_summary_len
        )
        cursors = schedule_from_budgets(plan.budgets, steps)
    else:
        cursors = np.zeros(steps, dtype=np.int64)

    ext = ExtendedVocab(vocab, doc_tokens)
    target_ids = ext.encode_target(targets)
    input_ids = np.concatenate(
        [[vocab.start_id], [ext.input_id(int(t)) for t in target_ids[:-1]]]
    ).astype(np.int64)
    return TrainingExample(
        src_ids=vocab.encode(doc_tokens),
        src_ext_ids=ext.source_ids(doc_tokens),
        offsets=plan.offsets,
        window_len=plan.window_len,
        input_ids=input_ids,
        target_ids=target_ids,
        cursors=cursors,
        doc_len=len(doc_tokens),
    )


def example_loss_and_grads(params: ModelParams, ex: TrainingExample):
    result = teacher_forced_pass(
        params,
        ex.src_ids,
        ex.src_ext_ids,
        ex.offsets,
        ex.window_len,
        ex.input_ids,
        ex.target_ids,
        ex.cursors,
    )
    return result.loss, teacher_forced_grads(params, result)


def nll_loss(step_dists: list[np.ndarray], target_ids: list[int]) -> float:
    """Mean negative log probability of each target under its step distribution.

    Probabilities are floored at 1e-12 before the log, so an impossible
    target yields a large finite penalty instead of an infinity.
    """
    if len(step_dists) == 0:
        raise ValueError("no decode steps")
    if len(step_dists) != len(target_ids):
        raise ValueError("one target per step distribution required")
    probs = np.array([dist[tgt] for dist, tgt in zip(step_dists, target_ids)])
    return float(np.mean(-np.log(np.maximum(probs, PROB_FLOOR))))


def batch_loss_and_grads(params: ModelParams, examples: list[TrainingExample]):
    """Mean loss and mean gradients over batch members.

    The loss uses exact summation, so it does not depend on member order;
    gradients are accumulated in the given order.
    """
    member_losses = []
    total = params.zero_grads()
    for ex in examples:
        loss, grads = example_loss_and_grads(params, ex)
        member_losses.append(loss)
        for name, g in grads.items():
            total[name] += g
    for g in total.values():
        g /= len(examples)
    return math.fsum(member_losses) / len(member_losses), total


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale gradients in place to a global-norm bound; returns the raw norm."""
    total = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


class Adam:
    """Bias-corrected Adam over a dict of named arrays."""

    def __init__(self, shapes: dict[str, tuple], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros(shape) for name, shape in shapes.items()}
        self.v = {name: np.zeros(shape) for name, shape in shapes.items()}

    @classmethod
    def for_params(cls, params: ModelParams, config: TrainConfig) -> "Adam":
        shapes = {name: arr.shape for name, arr in params.named().items()}
        return cls(shapes, config.learning_rate, config.beta1, config.beta2, config.eps)

    def step(self, arrays: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, arr in arrays.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            arr -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {f"adam.m.{k}": v for k, v in self.m.items()}
        out.update({f"adam.v.{k}": v for k, v in self.v.items()})
        return out

    def load_state(self, arrays: dict[str, np.ndarray], t: int) -> None:
        self.t = t
        for k in self.m:
            self.m[k] = arrays[f"adam.m.{k}"]
            self.v[k] = arrays[f"adam.v.{k}"]


@dataclass
class EpochRecord:
    epoch: int
    step: int
    train_loss: float
    dev_rouge_l: float


@dataclass
class TrainResult:
    params: ModelParams  # final parameters
    best_arrays: dict[str, np.ndarray]  # copy at the best dev epoch
    best_epoch: int
    best_score: float
    history: list[EpochRecord]
    global_step: int
    stats: CorpusStats | None


def select_best(history: list[EpochRecord]) -> EpochRecord:
    """Earliest record with the maximum dev ROUGE-L."""
    if not history:
        raise ValueError("empty history")
    best = history[0]
    for rec in history[1:]:
        if rec.dev_rouge_l > best.dev_rouge_l:
            best = rec
    return best


def make_batches(n: int, batch_size: int, lengths: list[int], rng: np.random.Generator):
    """Shuffled batches; members sorted long-first inside each batch."""
    order = rng.permutation(n)
    batches = [order[i : i + batch_size] for i in range(0, n, batch_size)]
    return [sorted(batch.tolist(), key=lambda i: (-lengths[i], i)) for batch in batches]


def train(
    train_pairs: list[SummaryPair],
    dev_pairs: list[SummaryPair],
    vocab: Vocabulary,
    emb_table: np.ndarray,
    config: TrainConfig,
    stats: CorpusStats | None = None,
    dev_scorer=None,
    log=None,
    initial_params: ModelParams | None = None,
    optimizer: Adam | None = None,
    start_epoch: int = 0,
    start_step: int = 0,
) -> TrainResult:
    """Run the full loop; returns final and best parameters plus history.

    `dev_scorer(params) -> float` overrides the built-in greedy-decode dev
    ROUGE-L (tests inject fake scores through it). `log` is a callable taking
    one formatted line, e.g. a file's write method.
    """
    if config.mode == "swm" and stats is None:
        stats = CorpusStats.from_pairs(train_pairs)
    model_cfg = ModelConfig(
        embed_dim=emb_table.shape[1],
        hidden_size=config.hidden_size,
        n_content=vocab.n_content,
        use_shift=config.mode == "dwm",
        train_embeddings=config.train_embeddings,
    )
    params = initial_params or ModelParams.init(model_cfg, emb_table, seed=config.seed)
    adam = optimizer or Adam.for_params(params, config)
    examples = [build_example(p, vocab, config, stats) for p in train_pairs]
    lengths = [ex.doc_len for ex in examples]
    rng = np.random.default_rng(config.seed + 1)

    if dev_scorer is None:
        dev_scorer = _greedy_rouge_scorer(dev_pairs, vocab, config, stats)

    def emit(line: str):
        if log is not None:
            log(line + "\n")

    emit("epoch,step,loss,dev_rouge_l")
    history: list[EpochRecord] = []
    best_arrays: dict[str, np.ndarray] | None = None
    best_epoch = -1
    best_score = -np.inf
    step = start_step
    arrays = params.named()
    for epoch in range(start_epoch + 1, start_epoch + config.epochs + 1):
        epoch_losses = []
        for batch in make_batches(len(examples), config.batch_size, lengths, rng):
            member_losses = []
            batch_grads = params.zero_grads()
            for i in batch:
                try:
                    loss, grads = example_loss_and_grads(params, examples[i])
                except NumericsError as exc:
                    raise TrainingDiverged(f"epoch {epoch}, step {step}: {exc}") from exc
                member_losses.append(loss)
                for name, g in grads.items():
                    batch_grads[name] += g
            for g in batch_grads.values():
                g /= len(batch)
                if not np.all(np.isfinite(g)):
                    raise TrainingDiverged(f"epoch {epoch}, step {step}: non-finite gradient")
            batch_loss = math.fsum(member_losses) / len(member_losses)
            clip_gradients(batch_grads, config.clip_norm)
            adam.step(arrays, batch_grads)
            step += 1
            epoch_losses.append(batch_loss)
            emit(f"{epoch},{step},{batch_loss:.6f},")
        epoch_loss = math.fsum(epoch_losses) / len(epoch_losses)
        dev_score = float(dev_scorer(params))
        history.append(EpochRecord(epoch=epoch, step=step, train_loss=epoch_loss, dev_rouge_l=dev_score))
        emit(f"{epoch},{step},{epoch_loss:.6f},{dev_score:.6f}")
        if dev_score > best_score:
            best_score = dev_score
            best_epoch = epoch
            best_arrays = {k: v.copy() for k, v in arrays.items()}
    assert best_arrays is not None
    return TrainResult(
        params=params,
        best_arrays=best_arrays,
        best_epoch=best_epoch,
        best_score=best_score,
        history=history,
        global_step=step,
        stats=stats,
    )


def _greedy_rouge_scorer(dev_pairs, vocab, config: TrainConfig, stats):
    """Mean dev ROUGE-L F1 under cheap (beam = dev_beam) decoding."""

    def score(params: ModelParams) -> float:
        # Local import: inference depends on model, not on training.
        from .evaluation import rouge_l
        from .inference import InferenceConfig, decode_document

        if not dev_pairs:
            return 0.0
        inf_cfg = InferenceConfig(
            mode=config.mode,
            beam_size=config.dev_beam,
            max_summary_len=config.max_summary_len,
            window_len=config.window_len,
            stride=config.stride,
            max_source_len=config.max_source_len,
            k=config.k,
            d=config.d,
        )
        total = 0.0
        for pair in dev_pairs:
            result = decode_document(pair.document, params, vocab, inf_cfg, stats=stats)
            total += rouge_l(result.text_tokens, pair.summary.tokens).f1
        return total / len(dev_pairs)

    return score
