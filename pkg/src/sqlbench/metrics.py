"""Scalar evaluation metrics: execution accuracy, efficiency scores,
retrieval scores for schema linking, Rouge F1 and consistency rates."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass


@dataclass(frozen=True)
class RetrievalResult:
    """Ground-truth and retrieved table sets for one instance."""

    gt_tables: frozenset[str]
    retrieved_tables: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "gt_tables", frozenset(t.lower() for t in self.gt_tables))
        object.__setattr__(
            self, "retrieved_tables", frozenset(t.lower() for t in self.retrieved_tables)
        )
        if not self.gt_tables:
            raise ValueError("gt_tables must be non-empty")

    @property
    def covered(self) -> bool:
        return self.gt_tables <= self.retrieved_tables

    @property
    def exact(self) -> bool:
        return self.gt_tables == self.retrieved_tables


@dataclass(frozen=True)
class ScoredInstance:
    instance_id: str
    ex: int
    r_efficiency: float | None = None
    linking: RetrievalResult | None = None
    rouge: tuple[float, float, float] | None = None
    llm_consistency: tuple[bool, bool] | None = None

    def __post_init__(self):
        if self.ex not in (0, 1):
            raise ValueError("ex must be 0 or 1")
        if self.r_efficiency is not None and self.ex != 1:
            raise ValueError("r_efficiency only allowed on correct instances")


def _require(scored: list, what: str) -> None:
    if not scored:
        raise ValueError(f"cannot aggregate {what} over an empty list")


def ex(scored: list[ScoredInstance]) -> float:
    """Execution accuracy as a percentage."""
    _require(scored, "ex")
    return sum(s.ex for s in scored) / len(scored) * 100.0


def _ratio(s: ScoredInstance) -> float:
    # a correct instance without a timing ratio counts neutrally
    return s.r_efficiency if s.r_efficiency is not None else 1.0


def ves(scored: list[ScoredInstance]) -> float:
    """Efficiency-weighted execution accuracy, percentage-scaled.

    Each correct instance contributes the square-rooted efficiency ratio of
    predicted to gold; wrong instances contribute zero.
    """
    _require(scored, "ves")
    total = sum(_ratio(s) for s in scored if s.ex == 1)
    return total / len(scored) * 100.0


def cves(scored: list[ScoredInstance]) -> float | None:
    """Mean efficiency ratio over correct instances only; None if none."""
    correct = [s for s in scored if s.ex == 1]
    if not correct:
        return None
    return sum(_ratio(s) for s in correct) / len(correct) * 100.0


def res(results: list[RetrievalResult]) -> float:
    """Retrieval efficiency: sqrt(|GT|/|retrieved|) when coverage holds."""
    _require(results, "res")
    total = 0.0
    for r in results:
        if r.covered:
            total += math.sqrt(len(r.gt_tables) / len(r.retrieved_tables))
    return total / len(results)


def subset_match(results: list[RetrievalResult]) -> float:
    _require(results, "subset_match")
    return sum(1 for r in results if r.covered) / len(results)


def exact_match(results: list[RetrievalResult]) -> float:
    _require(results, "exact_match")
    return sum(1 for r in results if r.exact) / len(results)


# ---------------------------------------------------------------------------
# Rouge
# ---------------------------------------------------------------------------

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


def _tokens(text: str) -> list[str]:
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if t]


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _f1(overlap: int, candidate_total: int, reference_total: int) -> float:
    if candidate_total == 0 or reference_total == 0 or overlap == 0:
        return 0.0
    precision = overlap / candidate_total
    recall = overlap / reference_total
    return 2 * precision * recall / (precision + recall)


def _lcs_length(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for token_a in a:
        current = [0] * (len(b) + 1)
        for j, token_b in enumerate(b, start=1):
            if token_a == token_b:
                current[j] = previous[j - 1] + 1
            else:
                current[j] = max(previous[j], current[j - 1])
        previous = current
    return previous[len(b)]


def rouge_f1(candidate: str, reference: str) -> tuple[float, float, float]:
    """F1 of unigram overlap, bigram overlap and token-level LCS.

    Tokenization is lowercase with splits on every non-alphanumeric run;
    n-gram overlaps are clipped counts. Two empty texts score zero.
    """
    cand = _tokens(candidate)
    ref = _tokens(reference)
    scores = []
    for n in (1, 2):
        cand_grams = _ngrams(cand, n)
        ref_grams = _ngrams(ref, n)
        overlap = sum((cand_grams & ref_grams).values())
        scores.append(_f1(overlap, sum(cand_grams.values()), sum(ref_grams.values())))
    lcs = _lcs_length(cand, ref)
    scores.append(_f1(lcs, len(cand), len(ref)))
    return scores[0], scores[1], scores[2]


def consistency_rate(pairs: list[tuple[bool, bool]]) -> float:
    """Average of per-order agreement percentages for consistency checks."""
    _require(pairs, "consistency_rate")
    forward = sum(1 for ab, _ in pairs if ab) / len(pairs) * 100.0
    backward = sum(1 for _, ba in pairs if ba) / len(pairs) * 100.0
    return (forward + backward) / 2.0
