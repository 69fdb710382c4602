"""Native lexical translation metrics: BLEU and chrF.

Both metrics are self-contained (no external scoring harness) and are used
two ways: as pairwise utilities during candidate selection, and as the
evaluation commands of the CLI.  Scores live on a 0..100 scale.

BLEU here is the classic recipe: clipped modified n-gram precisions
combined by a uniform-weight geometric mean and an exponential brevity
penalty.  Orders for which the hypothesis has no n-grams at all (it is
shorter than the order) are dropped from the mean, which keeps the
identity property metric(x, x) = 100 for short segments.  Optional add-k
smoothing (epsilon added to numerator and denominator) rescues zero-match
orders at the sentence level.

chrF is the character n-gram F-beta score averaged over orders
1..char_order, with whitespace removed before n-gram extraction.  Orders
where neither side has any n-grams are excluded from the average; two
empty segments therefore score a vacuous 100.
"""

from __future__ import annotations

import math
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .errors import AlignmentError

TokenSequence = list[str]

TOKENIZE_SCHEMES = ("whitespace", "punctuation-split")


def tokenize(text: str, scheme: str = "punctuation-split") -> TokenSequence:
    """Split a segment into tokens.

    ``whitespace`` splits on runs of whitespace.  ``punctuation-split``
    additionally makes every punctuation character its own token.
    Deterministic; empty text yields an empty sequence.
    """
    if scheme == "whitespace":
        return text.split()
    if scheme != "punctuation-split":
        raise ValueError(f"unknown tokenize scheme: {scheme!r}")
    tokens: list[str] = []
    current: list[str] = []
    for ch in text:
        if ch.isspace():
            if current:
                tokens.append("".join(current))
                current = []
        elif unicodedata.category(ch).startswith("P"):
            if current:
                tokens.append("".join(current))
                current = []
            tokens.append(ch)
        else:
            current.append(ch)
    if current:
        tokens.append("".join(current))
    return tokens


def ngram_counts(tokens: Sequence[str], order: int) -> Counter:
    """Multiset of the ``order``-grams of a token sequence."""
    if order < 1:
        raise ValueError("n-gram order must be >= 1")
    return Counter(tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1))


@dataclass(frozen=True)
class MetricScore:
    """A 0..100 score with its per-order components.

    ``components`` holds per-order precisions for BLEU and per-order
    F-scores for chrF.  ``brevity_penalty`` is 1.0 for chrF.
    """

    value: float
    components: tuple[float, ...] = field(default=())
    brevity_penalty: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.value <= 100.0:
            raise ValueError(f"metric value out of range: {self.value}")


@dataclass(frozen=True)
class BleuStats:
    """Sufficient statistics for BLEU, summable across segments."""

    matches: tuple[int, ...]  # clipped n-gram matches per order 1..max_order
    totals: tuple[int, ...]  # hypothesis n-gram totals per order
    hyp_len: int
    ref_len: int  # reference length closest to the hypothesis length

    def __add__(self, other: "BleuStats") -> "BleuStats":
        return BleuStats(
            tuple(a + b for a, b in zip(self.matches, other.matches)),
            tuple(a + b for a, b in zip(self.totals, other.totals)),
            self.hyp_len + other.hyp_len,
            self.ref_len + other.ref_len,
        )


def bleu_stats(
    hyp: Sequence[str], refs: Sequence[Sequence[str]], max_order: int = 4
) -> BleuStats:
    """Clipped match/total counts and lengths for one segment.

    Clipping caps each hypothesis n-gram count at the maximum count seen in
    any single reference.  The reference length used for the brevity
    penalty is the one closest to the hypothesis length (shorter wins
    ties).
    """
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    if not refs:
        raise ValueError("at least one reference is required")
    matches = []
    totals = []
    for order in range(1, max_order + 1):
        hyp_counts = ngram_counts(hyp, order)
        clipped = 0
        for gram, count in hyp_counts.items():
            best_ref = max(ngram_counts(ref, order).get(gram, 0) for ref in refs)
            clipped += min(count, best_ref)
        matches.append(clipped)
        totals.append(sum(hyp_counts.values()))
    hyp_len = len(hyp)
    ref_len = min(
        (len(ref) for ref in refs),
        key=lambda rl: (abs(rl - hyp_len), rl),
    )
    return BleuStats(tuple(matches), tuple(totals), hyp_len, ref_len)


def score_from_bleu_stats(
    stats: BleuStats,
    max_order: int = 4,
    smoothing: str = "none",
    epsilon: float = 0.1,
) -> MetricScore:
    """Turn summed BLEU statistics into a score.

    With ``smoothing="none"`` any zero precision at an order the
    hypothesis actually covers forces a 0 score; ``"add-k"`` adds
    ``epsilon`` to match and total counts instead.
    """
    if smoothing not in ("none", "add-k"):
        raise ValueError(f"unknown smoothing: {smoothing!r}")
    if stats.hyp_len == 0:
        # Empty hypothesis: 0 against any real reference, vacuously perfect
        # against an empty one (keeps corpus micro-averaging total).
        value = 100.0 if stats.ref_len == 0 else 0.0
        return MetricScore(value, (0.0,) * max_order, brevity_penalty=1.0)
    precisions = []
    log_sum = 0.0
    included = 0
    zero_hit = False
    for order in range(max_order):
        total = stats.totals[order]
        if total == 0:
            precisions.append(0.0)
            continue
        match = stats.matches[order]
        if smoothing == "add-k":
            p = (match + epsilon) / (total + epsilon)
        else:
            p = match / total
        precisions.append(p)
        included += 1
        if p == 0.0:
            zero_hit = True
        else:
            log_sum += math.log(p)
    if stats.hyp_len >= stats.ref_len:
        bp = 1.0
    else:
        bp = math.exp(1.0 - stats.ref_len / stats.hyp_len)
    if included == 0 or zero_hit:
        value = 0.0
    else:
        value = 100.0 * bp * math.exp(log_sum / included)
    return MetricScore(min(value, 100.0), tuple(precisions), brevity_penalty=bp)


def sentence_bleu(
    hyp: Sequence[str],
    refs: Sequence[Sequence[str]],
    max_order: int = 4,
    smoothing: str = "none",
    epsilon: float = 0.1,
) -> MetricScore:
    """BLEU of one tokenized hypothesis against one or more references."""
    stats = bleu_stats(hyp, refs, max_order)
    return score_from_bleu_stats(stats, max_order, smoothing, epsilon)


def corpus_bleu(
    hyps: Sequence[Sequence[str]],
    refs: Sequence[Sequence[str]],
    max_order: int = 4,
    smoothing: str = "none",
    epsilon: float = 0.1,
) -> MetricScore:
    """Micro-averaged BLEU: counts and lengths are summed over segments.

    One reference per hypothesis; use sentence_bleu for multi-reference
    scoring.
    """
    if len(hyps) != len(refs):
        raise AlignmentError(
            f"inputs are not aligned ({len(hyps)} hypotheses, {len(refs)} references)"
        )
    if not hyps:
        raise ValueError("corpus must contain at least one segment")
    total = bleu_stats(hyps[0], [refs[0]], max_order)
    for hyp, ref in zip(hyps[1:], refs[1:]):
        total = total + bleu_stats(hyp, [ref], max_order)
    return score_from_bleu_stats(total, max_order, smoothing, epsilon)


def _strip_whitespace(segment: str) -> str:
    return "".join(segment.split())


def char_ngram_stats(hyp: str, ref: str, char_order: int = 6) -> list[tuple[int, int, int]]:
    """(hyp_total, ref_total, matched) per character n-gram order 1..char_order.

    Whitespace is removed from both segments before extraction.
    """
    if char_order < 1:
        raise ValueError("char_order must be >= 1")
    hyp = _strip_whitespace(hyp)
    ref = _strip_whitespace(ref)
    stats = []
    for order in range(1, char_order + 1):
        hyp_counts = Counter(hyp[i : i + order] for i in range(len(hyp) - order + 1))
        ref_counts = Counter(ref[i : i + order] for i in range(len(ref) - order + 1))
        matched = sum((hyp_counts & ref_counts).values())
        stats.append((sum(hyp_counts.values()), sum(ref_counts.values()), matched))
    return stats


def score_from_chrf_stats(
    stats: Sequence[tuple[int, int, int]], beta: float = 2.0
) -> MetricScore:
    """Per-order F-beta, then the arithmetic mean over contributing orders.

    Orders where both sides have zero n-grams are excluded; if every order
    is excluded (both sides empty) the score is a vacuous 100.
    """
    if beta <= 0:
        raise ValueError("beta must be > 0")
    beta_sq = beta * beta
    f_scores = []
    included = []
    for hyp_total, ref_total, matched in stats:
        if hyp_total == 0 and ref_total == 0:
            f_scores.append(0.0)
            continue
        precision = matched / hyp_total if hyp_total > 0 else 0.0
        recall = matched / ref_total if ref_total > 0 else 0.0
        if precision + recall == 0.0:
            f = 0.0
        else:
            f = (1 + beta_sq) * precision * recall / (beta_sq * precision + recall)
        f_scores.append(f)
        included.append(f)
    if not included:
        return MetricScore(100.0, tuple(f_scores))
    value = 100.0 * sum(included) / len(included)
    return MetricScore(min(value, 100.0), tuple(f_scores))


def sentence_chrf(
    hyp: str, ref: str, char_order: int = 6, beta: float = 2.0
) -> MetricScore:
    """chrF of one hypothesis segment against one reference segment."""
    return score_from_chrf_stats(char_ngram_stats(hyp, ref, char_order), beta)


def corpus_chrf(
    hyps: Sequence[str], refs: Sequence[str], char_order: int = 6, beta: float = 2.0
) -> MetricScore:
    """Micro-averaged chrF: per-order counts summed over segments first."""
    if len(hyps) != len(refs):
        raise AlignmentError(
            f"inputs are not aligned ({len(hyps)} hypotheses, {len(refs)} references)"
        )
    if not hyps:
        raise ValueError("corpus must contain at least one segment")
    totals = [[0, 0, 0] for _ in range(char_order)]
    for hyp, ref in zip(hyps, refs):
        for i, (h, r, m) in enumerate(char_ngram_stats(hyp, ref, char_order)):
            totals[i][0] += h
            totals[i][1] += r
            totals[i][2] += m
    return score_from_chrf_stats([tuple(t) for t in totals], beta)
