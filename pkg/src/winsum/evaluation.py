"""ROUGE-1/2/L scoring and the corpus evaluation harness.

Scores are summary-level, no stemming or stopword filtering; F1 throughout.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .corpus import SummaryPair


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float
    defined: bool = True

    @classmethod
    def from_counts(cls, overlap: int, n_candidate: int, n_reference: int) -> "RougeScore":
        if n_candidate == 0 or n_reference == 0:
            return cls(0.0, 0.0, 0.0, defined=False)
        p = overlap / n_candidate
        r = overlap / n_reference
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return cls(p, r, f1)


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: list[str], reference: list[str], n: int) -> RougeScore:
    """Clipped n-gram overlap score."""
    cand = _ngrams(candidate, n)
    ref = _ngrams(reference, n)
    overlap = sum((cand & ref).values())
    return RougeScore.from_counts(overlap, sum(cand.values()), sum(ref.values()))


def lcs_length(a: list[str], b: list[str]) -> int:
    """Longest common subsequence length, O(len(a)*len(b))."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[len(b)]


def rouge_l(candidate: list[str], reference: list[str]) -> RougeScore:
    """Summary-level LCS score."""
    overlap = lcs_length(candidate, reference)
    return RougeScore.from_counts(overlap, len(candidate), len(reference))


ALL_METRICS = ("rouge_1", "rouge_2", "rouge_l")


def score_pair(candidate: list[str], reference: list[str]) -> dict[str, RougeScore]:
    return {
        "rouge_1": rouge_n(candidate, reference, 1),
        "rouge_2": rouge_n(candidate, reference, 2),
        "rouge_l": rouge_l(candidate, reference),
    }


@dataclass
class CorpusScores:
    means: dict[str, RougeScore]
    n_scored: int
    n_failed: int

    def as_dict(self) -> dict:
        return {
            "n_scored": self.n_scored,
            "n_failed": self.n_failed,
            "metrics": {
                name: {
                    "precision": score.precision,
                    "recall": score.recall,
                    "f1": score.f1,
                }
                for name, score in self.means.items()
            },
        }


def evaluate_corpus(summarize, pairs: list[SummaryPair]) -> CorpusScores:
    """Average per-document ROUGE of `summarize(document) -> tokens`.

    Documents whose decode raises are counted as failures and excluded from
    the averages.
    """
    sums = {name: [0.0, 0.0, 0.0] for name in ALL_METRICS}
    n_scored = 0
    n_failed = 0
    for pair in pairs:
        try:
            candidate = summarize(pair.document)
        except Exception:
            n_failed += 1
            continue
        for name, score in score_pair(candidate, pair.summary.tokens).items():
            sums[name][0] += score.precision
            sums[name][1] += score.recall
            sums[name][2] += score.f1
        n_scored += 1
    means = {}
    for name, (p, r, f1) in sums.items():
        if n_scored:
            means[name] = RougeScore(p / n_scored, r / n_scored, f1 / n_scored)
        else:
            means[name] = RougeScore(0.0, 0.0, 0.0, defined=False)
    return CorpusScores(means=means, n_scored=n_scored, n_failed=n_failed)


def format_table(rows: dict[str, CorpusScores]) -> str:
    """Fixed-column text table (F1 x 100) over named systems."""
    lines = [f"{'model':<12} {'R-1':>7} {'R-2':>7} {'R-L':>7}   scored  failed"]
    for name, scores in rows.items():
        r1 = scores.means["rouge_1"].f1 * 100
        r2 = scores.means["rouge_2"].f1 * 100
        rl = scores.means["rouge_l"].f1 * 100
        lines.append(
            f"{name:<12} {r1:>7.2f} {r2:>7.2f} {rl:>7.2f}   {scores.n_scored:>6}  {scores.n_failed:>6}"
        )
    return "\n".join(lines)
