"""Minimum-Bayes-risk selection over aligned multi-system candidates.

For every source segment, each of the n candidate translations is scored
as a hypothesis against every candidate treated as a pseudo-reference,
giving an n x n utility matrix; the candidate with the highest mean
utility (lowest expected risk) wins.  Utilities are either the native
BLEU/chrF metrics or an external scorer reached through the bridge.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from . import metrics
from .bridge import BridgeClient, BridgeConfig, ScoreRequest
from .errors import DataError, MbrforgeError
from .textio import read_segments, require_aligned

# A batch scorer maps (src, mt, ref) triples to one float per triple.
BatchScorer = Callable[[Sequence[tuple[str, str, str]]], list[float]]

UTILITY_KINDS = ("native-bleu", "native-chrf", "external")


@dataclass(frozen=True)
class CandidateSet:
    """m aligned source segments by n system outputs."""

    sources: tuple[str, ...]
    systems: tuple[str, ...]
    candidates: tuple[tuple[str, ...], ...]  # candidates[segment][system]

    def __post_init__(self) -> None:
        if len(self.candidates) != len(self.sources):
            raise DataError(
                f"{len(self.sources)} sources but {len(self.candidates)} candidate rows"
            )
        n = len(self.systems)
        for i, row in enumerate(self.candidates):
            if len(row) != n:
                raise DataError(
                    f"candidate row {i} has {len(row)} entries, expected {n}"
                )

    @property
    def num_segments(self) -> int:
        return len(self.sources)

    @property
    def num_systems(self) -> int:
        return len(self.systems)


@dataclass(frozen=True)
class UtilitySpec:
    """Which pairwise utility to use and how.

    ``include_self`` keeps the candidate itself in its own reference set
    when averaging (the literal all-candidates loop); switch it off for
    the exclude-self variant.  ``uses_source`` controls whether the source
    segment is forwarded to the scorer; native metrics never consume it,
    so it defaults to True only for external scorers.  ``symmetric``
    declares utility(a, b) == utility(b, a), enabling per-unordered-pair
    caching; BLEU and chrF are asymmetric, so it is off by default.
    """

    kind: str = "native-chrf"
    include_self: bool = True
    uses_source: bool | None = None
    symmetric: bool = False
    # native-bleu parameters
    max_order: int = 4
    smoothing: str = "add-k"
    epsilon: float = 0.1
    tokenize_scheme: str = "punctuation-split"
    # native-chrf parameters
    char_order: int = 6
    beta: float = 2.0
    # external parameters
    bridge: BridgeConfig | None = None

    def __post_init__(self) -> None:
        if self.kind not in UTILITY_KINDS:
            raise DataError(f"unknown utility kind: {self.kind!r}")
        if self.kind == "external" and self.bridge is None:
            raise DataError("external utility requires a bridge config")
        if self.uses_source is None:
            object.__setattr__(self, "uses_source", self.kind == "external")
        elif self.uses_source and self.kind != "external":
            raise DataError("native utilities do not consume the source segment")


@dataclass(frozen=True)
class UtilityMatrix:
    """Pairwise utilities for one segment.

    ``values[c][r]`` scores candidate c as hypothesis against candidate r
    as reference.  ``row_means`` averages each row over the included
    reference set; ``best_index`` is the argmax with lowest-index
    tie-break.
    """

    segment_index: int
    values: tuple[tuple[float, ...], ...]
    row_means: tuple[float, ...]
    best_index: int
    best_mean: float


@dataclass(frozen=True)
class MbrSelection:
    chosen: tuple[str, ...]
    indices: tuple[int, ...]
    expected_utilities: tuple[float, ...]


def load_candidates(
    candidate_paths: Sequence[str | Path], source_path: str | Path
) -> CandidateSet:
    """Assemble the candidate grid from one file per system plus the source.

    All files must have the same line count; the grid follows path order.
    """
    if len(candidate_paths) < 2:
        raise DataError(
            f"need at least 2 candidate files for selection, got {len(candidate_paths)}"
        )
    sources = read_segments(source_path)
    columns = [read_segments(p) for p in candidate_paths]
    counts = {str(source_path): len(sources)}
    for path, column in zip(candidate_paths, columns):
        counts[str(path)] = len(column)
    require_aligned(counts)
    rows = tuple(zip(*columns)) if sources else ()
    return CandidateSet(
        sources=tuple(sources),
        systems=tuple(str(p) for p in candidate_paths),
        candidates=tuple(tuple(row) for row in rows),
    )


def make_scorer(spec: UtilitySpec) -> BatchScorer:
    """Build a batch scorer for a utility spec.

    External scorers own a child process; call ``close_scorer`` when done.
    """
    if spec.kind == "native-bleu":

        def score_bleu(triples: Sequence[tuple[str, str, str]]) -> list[float]:
            out = []
            for _src, mt, ref in triples:
                hyp = metrics.tokenize(mt, spec.tokenize_scheme)
                refs = [metrics.tokenize(ref, spec.tokenize_scheme)]
                out.append(
                    metrics.sentence_bleu(
                        hyp, refs, spec.max_order, spec.smoothing, spec.epsilon
                    ).value
                )
            return out

        return score_bleu

    if spec.kind == "native-chrf":

        def score_chrf(triples: Sequence[tuple[str, str, str]]) -> list[float]:
            return [
                metrics.sentence_chrf(mt, ref, spec.char_order, spec.beta).value
                for _src, mt, ref in triples
            ]

        return score_chrf

    client = BridgeClient(spec.bridge)

    def score_external(triples: Sequence[tuple[str, str, str]]) -> list[float]:
        requests = [ScoreRequest(src, mt, ref) for src, mt, ref in triples]
        return client.score(requests)

    score_external.client = client  # type: ignore[attr-defined]
    return score_external


def close_scorer(scorer: BatchScorer) -> None:
    client = getattr(scorer, "client", None)
    if client is not None:
        client.close()


def best_index(row_means: Sequence[float]) -> int:
    """Argmax with lowest-index tie-break."""
    return max(range(len(row_means)), key=lambda i: (row_means[i], -i))


def utility_matrix(
    cset: CandidateSet,
    segment_index: int,
    spec: UtilitySpec,
    scorer: BatchScorer | None = None,
) -> UtilityMatrix:
    """Score all candidate pairs of one segment and pick the best row."""
    if not 0 <= segment_index < cset.num_segments:
        raise DataError(
            f"segment index {segment_index} out of range 0..{cset.num_segments - 1}"
        )
    own_scorer = scorer is None
    if own_scorer:
        scorer = make_scorer(spec)
    try:
        row = cset.candidates[segment_index]
        src = cset.sources[segment_index] if spec.uses_source else ""
        n = len(row)
        if spec.symmetric:
            pairs = [(c, r) for c in range(n) for r in range(c, n)]
        else:
            pairs = [(c, r) for c in range(n) for r in range(n)]
        triples = [(src, row[c], row[r]) for c, r in pairs]
        scores = scorer(triples)
        grid = [[0.0] * n for _ in range(n)]
        for (c, r), score in zip(pairs, scores):
            grid[c][r] = score
            if spec.symmetric:
                grid[r][c] = score
    finally:
        if own_scorer:
            close_scorer(scorer)
    means = []
    for c in range(n):
        refs = [r for r in range(n) if spec.include_self or r != c]
        if not refs:
            raise DataError("exclude-self selection needs at least 2 candidates")
        means.append(sum(grid[c][r] for r in refs) / len(refs))
    best = best_index(means)
    return UtilityMatrix(
        segment_index=segment_index,
        values=tuple(tuple(r) for r in grid),
        row_means=tuple(means),
        best_index=best,
        best_mean=means[best],
    )


def segment_matrices(
    cset: CandidateSet,
    spec: UtilitySpec,
    workers: int = 1,
    scorer_factory: Callable[[], BatchScorer] | None = None,
) -> list[UtilityMatrix]:
    """Utility matrices for every segment, in segment order.

    Segments are independent work units; with ``workers > 1`` each worker
    thread owns its own scorer (and hence its own bridge process), and
    results are assembled by index so the output never depends on the
    schedule.
    """
    factory = scorer_factory if scorer_factory is not None else (lambda: make_scorer(spec))

    def compute(index: int, scorer: BatchScorer) -> UtilityMatrix:
        try:
            return utility_matrix(cset, index, spec, scorer=scorer)
        except MbrforgeError as exc:
            raise type(exc)(f"segment {index}: {exc}") from exc

    if workers <= 1:
        scorer = factory()
        try:
            return [compute(i, scorer) for i in range(cset.num_segments)]
        finally:
            close_scorer(scorer)

    local = threading.local()
    created: list[BatchScorer] = []
    lock = threading.Lock()

    def worker_scorer() -> BatchScorer:
        scorer = getattr(local, "scorer", None)
        if scorer is None:
            scorer = factory()
            local.scorer = scorer
            with lock:
                created.append(scorer)
        return scorer

    try:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda i: compute(i, worker_scorer()), range(cset.num_segments)))
    finally:
        for scorer in created:
            close_scorer(scorer)


def selection_from_matrices(
    cset: CandidateSet, matrices: Sequence[UtilityMatrix]
) -> MbrSelection:
    chosen = []
    indices = []
    utilities = []
    for matrix in matrices:
        indices.append(matrix.best_index)
        utilities.append(matrix.best_mean)
        chosen.append(cset.candidates[matrix.segment_index][matrix.best_index])
    return MbrSelection(tuple(chosen), tuple(indices), tuple(utilities))


def mbr_decode(
    cset: CandidateSet,
    spec: UtilitySpec,
    workers: int = 1,
    scorer_factory: Callable[[], BatchScorer] | None = None,
) -> MbrSelection:
    """Select, per segment, the candidate with maximum mean utility."""
    matrices = segment_matrices(cset, spec, workers=workers, scorer_factory=scorer_factory)
    return selection_from_matrices(cset, matrices)


def format_matrix_dump(matrices: Sequence[UtilityMatrix]) -> str:
    """Tab-separated dump: segment, candidate, n utilities, row mean.

    Reals are rendered with 6 decimal places.
    """
    lines = []
    for matrix in matrices:
        for c, row in enumerate(matrix.values):
            cells = [str(matrix.segment_index), str(c)]
            cells.extend(f"{v:.6f}" for v in row)
            cells.append(f"{matrix.row_means[c]:.6f}")
            lines.append("\t".join(cells))
    return "".join(line + "\n" for line in lines)
