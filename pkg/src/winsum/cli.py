"""Command line interface: preprocess, train, summarize, evaluate.

Settings resolve in three layers: built-in defaults, then a flat key=value
config file (--config, or the WINSUM_CONFIG environment variable), then
explicit command-line flags. Output files are written atomically. Exit codes:
0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import checkpoint as ckpt
from .corpus import (
    CorpusError,
    Document,
    Vocabulary,
    corpus_records,
    load_corpus,
    load_embeddings,
)
from .evaluation import evaluate_corpus, format_table
from .inference import InferenceConfig, DecodeResult, decode_document, lead3
from .model import PARAM_SHAPES, ModelConfig, ModelParams
from .training import Adam, TrainConfig, TrainingDiverged, train
from .windowing import CorpusStats, annotate_pair

CONFIG_ENV_VAR = "WINSUM_CONFIG"

_ANSI_COLORS = (31, 32, 33, 34, 35, 36)  # cycled per window


class CliError(RuntimeError):
    pass


def load_config_file(path: str) -> dict[str, str]:
    """Flat `key = value` file; '#' starts a comment, blank lines ignored."""
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


class Settings:
    """Defaults overridden by config file, overridden by explicit flags."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        path = getattr(args, "config", None) or os.environ.get(CONFIG_ENV_VAR)
        self.file_values = load_config_file(path) if path else {}

    def get(self, key: str, default, cast=None):
        cli = getattr(self.args, key, None)
        if cli is not None:
            return cli
        if key in self.file_values:
            raw = self.file_values[key]
            if cast is bool:
                return raw.lower() in ("1", "true", "yes", "on")
            return cast(raw) if cast else raw
        return default


def atomic_write_text(path: str, text: str) -> None:
    ckpt.atomic_write_bytes(path, text.encode("utf-8"))


def write_jsonl(path: str, records: list[dict]) -> None:
    atomic_write_text(path, "".join(json.dumps(r, sort_keys=True) + "\n" for r in records))


# ---------------------------------------------------------------------------
# Checkpoint packing
# ---------------------------------------------------------------------------


def pack_model(
    params: ModelParams,
    vocab: Vocabulary,
    mode: str,
    infer: dict,
    stats: CorpusStats | None,
    extra: dict | None = None,
    optimizer: Adam | None = None,
) -> tuple[dict, dict]:
    arrays = dict(params.named())
    meta = {
        "kind": "winsum-model",
        "mode": mode,
        "model": {
            "embed_dim": params.cfg.embed_dim,
            "hidden_size": params.cfg.hidden_size,
            "n_content": params.cfg.n_content,
            "use_shift": params.cfg.use_shift,
            "train_embeddings": params.cfg.train_embeddings,
        },
        "vocab_words": vocab.words,
        "infer": infer,
        "stats": stats.to_dict() if stats else None,
    }
    if extra:
        meta.update(extra)
    if optimizer is not None:
        arrays.update(optimizer.state_arrays())
        meta["adam_t"] = optimizer.t
    return arrays, meta


def unpack_model(path: str):
    arrays, meta = ckpt.load_checkpoint(path)
    if meta.get("kind") != "winsum-model":
        raise CliError(f"{path}: not a model checkpoint")
    mc = meta["model"]
    cfg = ModelConfig(
        embed_dim=int(mc["embed_dim"]),
        hidden_size=int(mc["hidden_size"]),
        n_content=int(mc["n_content"]),
        use_shift=bool(mc["use_shift"]),
        train_embeddings=bool(mc["train_embeddings"]),
    )
    params = ModelParams(cfg, {name: arrays[name] for name, _ in PARAM_SHAPES})
    vocab = Vocabulary(meta["vocab_words"])
    stats = CorpusStats.from_dict(meta["stats"]) if meta.get("stats") else None
    return params, vocab, stats, meta, arrays


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_preprocess(args) -> int:
    s = Settings(args)
    if not args.out and not args.stats_out:
        raise CliError("nothing to do: pass --out and/or --stats-out")
    pairs = load_corpus(args.corpus)
    if not pairs:
        raise CliError(f"{args.corpus}: empty corpus")
    stats = CorpusStats.from_pairs(pairs)
    if args.stats_out:
        atomic_write_text(args.stats_out, json.dumps(stats.to_dict(), sort_keys=True) + "\n")
        print(f"stats written to {args.stats_out}", file=sys.stderr)
    mode = s.get("mode", "dwm")
    if args.out:
        if mode == "dwm":
            if not args.embeddings:
                raise CliError("dynamic-window preprocessing needs --embeddings")
            vocab, table = load_embeddings(args.embeddings, s.get("vocab_size", 50000, int))
            spec_kwargs = dict(
                window_len=s.get("tw", 400, int), stride=s.get("ss", 380, int)
            )
            from .windowing import WindowSpec

            spec = WindowSpec(spec_kwargs["window_len"], spec_kwargs["stride"])
            for pair in pairs:
                pair.summary_shifted = annotate_pair(pair, spec, vocab, table).tokens
        write_jsonl(args.out, corpus_records(pairs))
        print(f"preprocessed corpus written to {args.out}", file=sys.stderr)
    return 0


def _train_config(s: Settings, mode: str) -> TrainConfig:
    tw = s.get("tw", 400, int)
    tx = s.get("tx", tw if mode == "stan" else 1160, int)
    if mode == "stan":
        tw = tx
    return TrainConfig(
        mode=mode,
        window_len=tw,
        stride=s.get("ss", min(380, tw), int),
        max_source_len=tx,
        max_summary_len=s.get("ty", 125, int),
        hidden_size=s.get("hidden", 256, int),
        k=s.get("k", 0.8, float),
        d=s.get("d", 1.2, float),
        learning_rate=s.get("lr", 1e-3, float),
        batch_size=s.get("batch_size", 8, int),
        epochs=s.get("epochs", 10, int),
        clip_norm=s.get("clip", 2.0, float),
        seed=s.get("seed", 0, int),
        train_embeddings=s.get("train_embeddings", False, bool),
        dev_beam=s.get("dev_beam", 1, int),
    )


def cmd_train(args) -> int:
    s = Settings(args)
    mode = s.get("mode", "dwm")
    config = _train_config(s, mode)
    train_pairs = load_corpus(args.corpus)
    dev_pairs = load_corpus(args.dev) if args.dev else train_pairs
    if mode == "dwm" and any(p.summary_shifted is None for p in train_pairs):
        raise CliError(
            "dynamic-window training needs shift annotations; run `winsum preprocess` first"
        )

    stats = None
    if args.stats:
        with open(args.stats, encoding="utf-8") as fh:
            stats = CorpusStats.from_dict(json.load(fh))

    initial_params = None
    optimizer = None
    start_epoch = 0
    start_step = 0
    if args.resume:
        params, vocab, stats_ck, meta, arrays = unpack_model(args.resume)
        if meta["mode"] != mode:
            raise CliError(f"--resume checkpoint is {meta['mode']!r}, requested {mode!r}")
        initial_params = params
        table = params.emb
        stats = stats or stats_ck
        optimizer = Adam.for_params(params, config)
        if "adam_t" in meta:
            optimizer.load_state(arrays, int(meta["adam_t"]))
        start_epoch = int(meta.get("epoch", 0))
        start_step = int(meta.get("step", 0))
    else:
        if not args.embeddings:
            raise CliError("--embeddings is required unless resuming")
        vocab, table = load_embeddings(args.embeddings, s.get("vocab_size", 50000, int))

    log_lines: list[str] = []
    try:
        result = train(
            train_pairs,
            dev_pairs,
            vocab,
            table,
            config,
            stats=stats,
            log=log_lines.append,
            initial_params=initial_params,
            optimizer=optimizer,
            start_epoch=start_epoch,
            start_step=start_step,
        )
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 1

    infer = {
        "window_len": config.window_len,
        "stride": config.stride,
        "max_source_len": config.max_source_len,
        "max_summary_len": config.max_summary_len,
        "k": config.k,
        "d": config.d,
        "beam_size": s.get("beam", 3, int),
    }
    best_cfg = result.params.cfg
    best_params = ModelParams(best_cfg, result.best_arrays)
    arrays, meta = pack_model(
        best_params,
        vocab,
        mode,
        infer,
        result.stats if config.mode == "swm" else stats,
        extra={
            "best_epoch": result.best_epoch,
            "best_dev_rouge_l": result.best_score,
            "epoch": result.history[-1].epoch,
            "step": result.global_step,
        },
    )
    ckpt.save_checkpoint(args.out, arrays, meta)
    state_path = args.state_out or args.out + ".state"
    adam_obj = optimizer or Adam.for_params(result.params, config)
    arrays_state, meta_state = pack_model(
        result.params,
        vocab,
        mode,
        infer,
        result.stats if config.mode == "swm" else stats,
        extra={"epoch": result.history[-1].epoch, "step": result.global_step},
        optimizer=adam_obj,
    )
    ckpt.save_checkpoint(state_path, arrays_state, meta_state)
    log_path = args.log or args.out + ".log"
    atomic_write_text(log_path, "".join(log_lines))
    print(
        f"best dev ROUGE-L {result.best_score:.4f} at epoch {result.best_epoch}; "
        f"checkpoint: {args.out}, resume state: {state_path}, log: {log_path}",
        file=sys.stderr,
    )
    return 0


def _infer_config(s: Settings, meta: dict, mode: str) -> InferenceConfig:
    stored = meta.get("infer", {})
    tw = s.get("tw", stored.get("window_len", 400), int)
    tx = s.get("tx", stored.get("max_source_len", tw), int)
    if mode == "stan":
        tw = tx
    return InferenceConfig(
        mode=mode,
        beam_size=s.get("beam", stored.get("beam_size", 3), int),
        max_summary_len=s.get("ty", stored.get("max_summary_len", 125), int),
        window_len=tw,
        stride=s.get("ss", stored.get("stride", 380), int),
        max_source_len=tx,
        k=s.get("k", stored.get("k", 0.8), float),
        d=s.get("d", stored.get("d", 1.2), float),
    )


def _render_annotated(result: DecodeResult, style: str) -> str:
    pieces = []
    for row in result.trace():
        if row["shift"]:
            continue
        win = row["window"]
        if style == "color":
            color = _ANSI_COLORS[(win - 1) % len(_ANSI_COLORS)]
            pieces.append(f"\x1b[{color}m{row['token']}\x1b[0m")
        else:
            pieces.append(f"{row['token']}[w{win}]")
    return " ".join(pieces)


def cmd_summarize(args) -> int:
    s = Settings(args)
    params, vocab, stats, meta, _ = unpack_model(args.checkpoint)
    mode = meta["mode"]
    requested = getattr(args, "mode", None)
    if requested is not None and requested != mode:
        raise CliError(f"checkpoint was trained in mode {mode!r}, not {requested!r}")
    config = _infer_config(s, meta, mode)
    with open(args.input, encoding="utf-8") as fh:
        document = Document.from_text(fh.read())
    if not document.tokens:
        raise CliError(f"{args.input}: empty input")
    if mode == "stan" and len(document) > config.max_source_len:
        print(
            f"warning: input has {len(document)} tokens; fixed-input mode truncates "
            f"to {config.max_source_len}",
            file=sys.stderr,
        )
    result = decode_document(document, params, vocab, config, stats=stats)
    annotate = s.get("annotate", "none")
    if annotate in ("color", "tags"):
        print(_render_annotated(result, annotate))
    else:
        print(" ".join(result.text_tokens))
    if result.truncated:
        print("warning: summary truncated at the length limit", file=sys.stderr)
    if args.trace:
        write_jsonl(args.trace, result.trace())
        print(f"trace written to {args.trace}", file=sys.stderr)
    return 0


def cmd_evaluate(args) -> int:
    s = Settings(args)
    pairs = load_corpus(args.corpus)
    if args.baseline:
        if args.baseline != "lead3":
            raise CliError(f"unknown baseline {args.baseline!r}")
        name = "lead3"
        scores = evaluate_corpus(lead3, pairs)
    else:
        if not args.checkpoint:
            raise CliError("pass --checkpoint or --baseline lead3")
        params, vocab, stats, meta, _ = unpack_model(args.checkpoint)
        mode = meta["mode"]
        config = _infer_config(s, meta, mode)
        name = mode

        def summarize(document):
            return decode_document(document, params, vocab, config, stats=stats).text_tokens

        scores = evaluate_corpus(summarize, pairs)
    print(format_table({name: scores}))
    if args.json:
        atomic_write_text(args.json, json.dumps({name: scores.as_dict()}, sort_keys=True) + "\n")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help=f"key=value config file (default: ${CONFIG_ENV_VAR})")
    p.add_argument("--mode", choices=("stan", "swm", "dwm"))
    p.add_argument("--tw", type=int, help="window length in tokens")
    p.add_argument("--ss", type=int, help="window stride in tokens")
    p.add_argument("--tx", type=int, help="fixed-input length (stan truncation)")
    p.add_argument("--ty", type=int, help="maximum summary length in tokens")
    p.add_argument("--k", type=float, help="static-policy decay strength")
    p.add_argument("--d", type=float, help="static-policy decay base")
    p.add_argument("--beam", type=int, help="beam size")
    p.add_argument("--seed", type=int, help="run seed")
    p.add_argument("--vocab-size", dest="vocab_size", type=int, help="content words kept")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="winsum", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="annotate a corpus and/or compute length stats")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings")
    p.add_argument("--out", help="annotated corpus JSONL")
    p.add_argument("--stats-out", dest="stats_out", help="corpus stats JSON")
    p.set_defaults(fn=cmd_preprocess)

    p = sub.add_parser("train", help="train a model")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--dev", help="dev corpus for model selection (default: train corpus)")
    p.add_argument("--embeddings")
    p.add_argument("--stats", help="corpus stats JSON (static-window mode)")
    p.add_argument("--out", required=True, help="best checkpoint path")
    p.add_argument("--state-out", dest="state_out", help="resume-state path (default <out>.state)")
    p.add_argument("--log", help="training log path (default <out>.log)")
    p.add_argument("--resume", help="resume-state checkpoint to continue from")
    p.add_argument("--hidden", type=int, help="LSTM size per encoder direction")
    p.add_argument("--lr", type=float, help="learning rate")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--clip", type=float, help="gradient clip norm")
    p.add_argument("--train-embeddings", dest="train_embeddings", action="store_const", const=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("summarize", help="summarize a text file")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("input", help="plain-text input file")
    p.add_argument("--trace", help="write a JSONL per-token window trace here")
    p.add_argument("--annotate", choices=("none", "color", "tags"))
    p.set_defaults(fn=cmd_summarize)

    p = sub.add_parser("evaluate", help="score a model or baseline on a corpus")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--baseline", help="'lead3' runs without a checkpoint")
    p.add_argument("--json", help="write scores as JSON here")
    p.set_defaults(fn=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (CliError, CorpusError, ckpt.CheckpointError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
