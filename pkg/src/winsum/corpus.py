"""Text ingestion: tokenization, sentence splitting, vocabulary and embeddings.

Corpora are JSONL files with one object per line carrying string fields
"document" and "summary" (plus an optional "summary_shifted" field written by
the preprocessor). Embeddings come as a plain text file, optionally headed by
a "<count> <dim>" line, followed by "word f1 ... f_dim" rows.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

import numpy as np

# Word runs stay together, every other non-space character becomes its own
# token. Join-with-spaces then re-tokenize is a fixpoint, which keeps
# preprocessed corpora stable on reload.
_TOKEN_RE = re.compile(r"\w+|[^\w\s]")

SENTENCE_ENDERS = frozenset({".", "!", "?"})

PAD = "<pad>"
UNK = "<unk>"
START = "<s>"
EOS = "<eos>"
SHIFT = "-->"
SPECIAL_SURFACES = (PAD, UNK, START, EOS, SHIFT)

# Seed for the pseudo-random special-symbol embedding rows; fixed so that two
# loads of the same embedding file produce identical tables.
_SPECIAL_ROW_SEED = 90221


class CorpusError(ValueError):
    """Malformed corpus or embedding input."""


def tokenize(text: str) -> list[str]:
    """Lowercase and split `text` into word and punctuation tokens."""
    return _TOKEN_RE.findall(text.lower())


def split_sentences(tokens: list[str]) -> list[tuple[int, int]]:
    """Sentence spans as (start, end) token offsets.

    A sentence ends right after a '.', '!' or '?' token; a trailing span
    without a terminator is kept. The spans partition the token range.
    """
    spans = []
    start = 0
    for i, tok in enumerate(tokens):
        if tok in SENTENCE_ENDERS:
            spans.append((start, i + 1))
            start = i + 1
    if start < len(tokens):
        spans.append((start, len(tokens)))
    return spans


@dataclass
class Document:
    tokens: list[str]
    sentence_spans: list[tuple[int, int]]

    @classmethod
    def from_text(cls, text: str) -> "Document":
        tokens = tokenize(text)
        return cls(tokens=tokens, sentence_spans=split_sentences(tokens))

    @classmethod
    def from_tokens(cls, tokens: list[str]) -> "Document":
        return cls(tokens=list(tokens), sentence_spans=split_sentences(tokens))

    def sentence_tokens(self, idx: int) -> list[str]:
        start, end = self.sentence_spans[idx]
        return self.tokens[start:end]

    @property
    def n_sentences(self) -> int:
        return len(self.sentence_spans)

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass
class SummaryPair:
    document: Document
    summary: Document
    # Shift-annotated summary tokens (produced by preprocessing for the
    # dynamic-window mode); stored pre-tokenized, never re-tokenized, so the
    # literal "-->" marker survives round trips.
    summary_shifted: list[str] | None = None


class Vocabulary:
    """Content words in fixed order plus the five reserved symbols.

    Ids 0..n_content-1 are content words (embedding-file order); the reserved
    symbols <pad>, <unk>, <s>, <eos> and --> take the next five ids. word->id
    is a bijection over content words and reserved surfaces.
    """

    def __init__(self, words: list[str]):
        self.words = list(words)
        self._ids: dict[str, int] = {}
        for i, w in enumerate(self.words):
            if not w:
                raise CorpusError("empty word in vocabulary")
            if w in self._ids or w in SPECIAL_SURFACES:
                raise CorpusError(f"duplicate or reserved vocabulary word: {w!r}")
            self._ids[w] = i
        base = len(self.words)
        self.pad_id = base
        self.unk_id = base + 1
        self.start_id = base + 2
        self.eos_id = base + 3
        self.shift_id = base + 4
        for offset, surface in enumerate(SPECIAL_SURFACES):
            self._ids[surface] = base + offset

    @property
    def n_content(self) -> int:
        return len(self.words)

    def __len__(self) -> int:
        return len(self.words) + len(SPECIAL_SURFACES)

    def __contains__(self, word: str) -> bool:
        return word in self._ids

    def id_of(self, word: str) -> int:
        """Vocabulary id of `word`, unk for out-of-vocabulary words."""
        return self._ids.get(word, self.unk_id)

    def encode(self, tokens: list[str]) -> np.ndarray:
        return np.fromiter((self._ids.get(t, self.unk_id) for t in tokens), dtype=np.int64, count=len(tokens))

    def word_of(self, idx: int) -> str:
        if idx < len(self.words):
            return self.words[idx]
        return SPECIAL_SURFACES[idx - len(self.words)]


def special_embedding_rows(dim: int) -> np.ndarray:
    """Embedding rows for the reserved symbols: zero <pad>, seeded noise rest."""
    rng = np.random.default_rng(_SPECIAL_ROW_SEED)
    rows = rng.standard_normal((len(SPECIAL_SURFACES), dim)) * 0.05
    rows[0] = 0.0  # <pad>
    return rows


def load_embeddings(path: str, vocab_size: int) -> tuple[Vocabulary, np.ndarray]:
    """Read a text embedding file, keeping the first `vocab_size` words.

    Returns the vocabulary and a float64 table of shape (n_content + 5, dim)
    with the reserved-symbol rows appended.
    """
    words: list[str] = []
    rows: list[np.ndarray] = []
    dim: int | None = None
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split()
            if lineno == 1 and len(parts) == 2:
                try:
                    int(parts[0]), int(parts[1])
                except ValueError:
                    pass
                else:
                    dim = int(parts[1])
                    continue
            word, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise CorpusError(f"{path}:{lineno}: no embedding values")
            if len(values) != dim:
                raise CorpusError(
                    f"{path}:{lineno}: expected {dim} values, found {len(values)}"
                )
            try:
                vec = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError as exc:
                raise CorpusError(f"{path}:{lineno}: bad float ({exc})") from None
            if word in SPECIAL_SURFACES:
                raise CorpusError(f"{path}:{lineno}: word collides with reserved symbol {word!r}")
            if word in seen:
                raise CorpusError(f"{path}:{lineno}: duplicate word {word!r}")
            seen.add(word)
            words.append(word)
            rows.append(vec)
            if len(words) == vocab_size:
                break
    if not words:
        raise CorpusError(f"{path}: no embedding rows")
    assert dim is not None
    table = np.vstack([np.stack(rows), special_embedding_rows(dim)])
    return Vocabulary(words), table


def load_corpus(path: str) -> list[SummaryPair]:
    """Read a JSONL corpus; records are numbered from 1 in error messages."""
    pairs: list[SummaryPair] = []
    with open(path, encoding="utf-8") as fh:
        for recno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}: record {recno}: invalid JSON ({exc})") from None
            for field in ("document", "summary"):
                if field not in obj:
                    raise CorpusError(f"{path}: record {recno}: missing field '{field}'")
            pair = SummaryPair(
                document=Document.from_text(obj["document"]),
                summary=Document.from_text(obj["summary"]),
            )
            shifted = obj.get("summary_shifted")
            if shifted is not None:
                # Already tokenized text; whitespace split keeps "-->" intact.
                pair.summary_shifted = shifted.split()
            pairs.append(pair)
    return pairs


def corpus_records(pairs: list[SummaryPair]) -> list[dict]:
    """JSON-ready records for writing a (possibly annotated) corpus back out."""
    records = []
    for pair in pairs:
        obj = {
            "document": " ".join(pair.document.tokens),
            "summary": " ".join(pair.summary.tokens),
        }
        if pair.summary_shifted is not None:
            obj["summary_shifted"] = " ".join(pair.summary_shifted)
        records.append(obj)
    return records


class ExtendedVocab:
    """Per-document vocabulary extension for the copy mechanism.

    Source words outside the base vocabulary keep their surface form and get
    ids above len(vocab), in order of first occurrence. Those ids exist only
    relative to this document.
    """

    def __init__(self, vocab: Vocabulary, source_tokens: list[str]):
        self.vocab = vocab
        self.oov_words: list[str] = []
        self._oov_ids: dict[str, int] = {}
        base = len(vocab)
        for tok in source_tokens:
            if tok not in vocab and tok not in self._oov_ids:
                self._oov_ids[tok] = base + len(self.oov_words)
                self.oov_words.append(tok)

    @property
    def n_oov(self) -> int:
        return len(self.oov_words)

    @property
    def size(self) -> int:
        return len(self.vocab) + len(self.oov_words)

    def source_ids(self, tokens: list[str]) -> np.ndarray:
        """Ids of source tokens, with OOV words mapped to their extended ids."""
        out = np.empty(len(tokens), dtype=np.int64)
        for i, tok in enumerate(tokens):
            idx = self.vocab.id_of(tok)
            if idx == self.vocab.unk_id and tok != UNK:
                idx = self._oov_ids[tok]
            out[i] = idx
        return out

    def encode_target(self, tokens: list[str]) -> np.ndarray:
        """Target ids: vocabulary id, else this document's extended id, else unk."""
        out = np.empty(len(tokens), dtype=np.int64)
        for i, tok in enumerate(tokens):
            idx = self.vocab.id_of(tok)
            if idx == self.vocab.unk_id and tok != UNK:
                idx = self._oov_ids.get(tok, self.vocab.unk_id)
            out[i] = idx
        return out

    def word_of(self, idx: int) -> str:
        if idx < len(self.vocab):
            return self.vocab.word_of(idx)
        return self.oov_words[idx - len(self.vocab)]

    def input_id(self, idx: int) -> int:
        """Id usable for embedding lookup: extended ids collapse to unk."""
        return idx if idx < len(self.vocab) else self.vocab.unk_id
