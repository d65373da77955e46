"""Deterministic synthetic corpora for tests, demos and the shipped tiny data.

Documents are built from simple subject-verb-object sentences arranged in
fixed-size regions. The summary copies the first sentence of every region, so
a correctly preprocessed dynamic-window corpus carries one shift marker per
region boundary and a copy-capable model can overfit quickly.
"""

from __future__ import annotations

import numpy as np

from .corpus import Document, SummaryPair, Vocabulary, special_embedding_rows

SUBJECTS = ["ana", "bo", "cara", "dev", "edu", "fia", "gus", "hana",
            "ivo", "jun", "kai", "lena", "mose", "nia", "otto", "pia"]
VERBS = ["likes", "sees", "finds", "keeps", "paints", "sells", "hides", "mends"]
OBJECTS = ["apples", "boats", "cats", "drums", "eggs", "ferns", "gems", "hats",
           "inks", "jars", "kites", "lamps", "maps", "nets", "oars", "pears"]


def word_pool(n_subjects=8, n_verbs=4, n_objects=8) -> list[str]:
    """Content vocabulary for the generators, '.' included."""
    return SUBJECTS[:n_subjects] + VERBS[:n_verbs] + OBJECTS[:n_objects] + ["."]


def build_vocab_table(words: list[str], dim: int, seed: int) -> tuple[Vocabulary, np.ndarray]:
    """Vocabulary plus a seeded random embedding table (specials appended)."""
    rng = np.random.default_rng(seed)
    rows = rng.uniform(-0.5, 0.5, (len(words), dim))
    table = np.vstack([rows, special_embedding_rows(dim)])
    return Vocabulary(list(words)), table


def write_embeddings_file(path: str, words: list[str], dim: int, seed: int) -> None:
    """Text-format embedding file matching build_vocab_table exactly."""
    rng = np.random.default_rng(seed)
    rows = rng.uniform(-0.5, 0.5, (len(words), dim))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(words)} {dim}\n")
        for word, row in zip(words, rows):
            values = " ".join(f"{v:.17g}" for v in row)
            fh.write(f"{word} {values}\n")


def _sentence(rng: np.random.Generator, n_subjects: int, n_verbs: int, n_objects: int,
              used: set) -> list[str]:
    while True:
        triple = (
            SUBJECTS[rng.integers(0, n_subjects)],
            VERBS[rng.integers(0, n_verbs)],
            OBJECTS[rng.integers(0, n_objects)],
        )
        if triple not in used:
            used.add(triple)
            return [*triple, "."]


def make_copy_pair(
    rng: np.random.Generator,
    regions: int = 2,
    sentences_per_region: int = 3,
    n_subjects: int = 8,
    n_verbs: int = 4,
    n_objects: int = 8,
) -> SummaryPair:
    """One document of `regions` equal regions; summary = first sentence of each."""
    used: set = set()
    doc_tokens: list[str] = []
    summary_tokens: list[str] = []
    for _ in range(regions):
        for s in range(sentences_per_region):
            sent = _sentence(rng, n_subjects, n_verbs, n_objects, used)
            if s == 0:
                summary_tokens.extend(sent)
            doc_tokens.extend(sent)
    return SummaryPair(
        document=Document.from_tokens(doc_tokens),
        summary=Document.from_tokens(summary_tokens),
    )


def make_copy_corpus(
    n_pairs: int,
    seed: int,
    regions: int = 2,
    sentences_per_region: int = 3,
    n_subjects: int = 8,
    n_verbs: int = 4,
    n_objects: int = 8,
) -> list[SummaryPair]:
    rng = np.random.default_rng(seed)
    return [
        make_copy_pair(rng, regions, sentences_per_region, n_subjects, n_verbs, n_objects)
        for _ in range(n_pairs)
    ]


def region_token_count(sentences_per_region: int) -> int:
    return 4 * sentences_per_region  # sentences are always subject verb object .


def make_long_pair(
    rng: np.random.Generator,
    region_tokens: list[int],
    n_subjects: int = 16,
    n_verbs: int = 8,
    n_objects: int = 16,
) -> SummaryPair:
    """Document with explicit region sizes in tokens (multiples of 4)."""
    used: set = set()
    doc_tokens: list[str] = []
    summary_tokens: list[str] = []
    for size in region_tokens:
        if size % 4 != 0:
            raise ValueError("region sizes must be multiples of the 4-token sentences")
        for s in range(size // 4):
            sent = _sentence(rng, n_subjects, n_verbs, n_objects, used)
            if s == 0:
                summary_tokens.extend(sent)
            doc_tokens.extend(sent)
    return SummaryPair(
        document=Document.from_tokens(doc_tokens),
        summary=Document.from_tokens(summary_tokens),
    )


def make_long_document(rng: np.random.Generator, n_tokens: int,
                       n_subjects: int = 16, n_verbs: int = 8, n_objects: int = 16) -> Document:
    """A document of at least `n_tokens` tokens; sentences may repeat."""
    tokens: list[str] = []
    while len(tokens) < n_tokens:
        tokens.extend(
            [
                SUBJECTS[rng.integers(0, n_subjects)],
                VERBS[rng.integers(0, n_verbs)],
                OBJECTS[rng.integers(0, n_objects)],
                ".",
            ]
        )
    return Document.from_tokens(tokens[:n_tokens])
