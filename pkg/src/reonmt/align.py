"""IBM Model 1 word alignment, Viterbi links and symmetrization.

The lexical table is dense: row ``e`` holds t(. | e) over target ids, with
an extra last row for the NULL source word.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .corpus import ParallelCorpus, Sentence, UNK

log = logging.getLogger(__name__)

NEIGHBOURS = ((-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1))
SYMMETRIZATIONS = ("intersection", "gdfa")


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class AlignmentMatrix:
    """Link set between source positions 1..n and target positions 1..m."""

    n: int
    m: int
    links: frozenset

    def __post_init__(self):
        links = frozenset((int(i), int(j)) for i, j in self.links)
        for i, j in links:
            if not (1 <= i <= self.n and 1 <= j <= self.m):
                raise AlignmentError(f"link ({i},{j}) outside {self.n}x{self.m}")
        object.__setattr__(self, "links", links)

    def transpose(self) -> "AlignmentMatrix":
        return AlignmentMatrix(self.m, self.n, frozenset((j, i) for i, j in self.links))

    def sorted_links(self) -> list[tuple[int, int]]:
        return sorted(self.links)


@dataclass
class LexicalTable:
    t: np.ndarray  # (V_source + 1, V_target); last row is NULL

    @property
    def null_row(self) -> int:
        return self.t.shape[0] - 1

    def prob(self, e: int | None, f: int) -> float:
        return float(self.t[self.null_row if e is None else e, f])

    def rows(self, source: Sequence[int]) -> np.ndarray:
        # ids beyond the table fall back to UNK
        ids = np.asarray(source)
        return np.where(ids < self.null_row, ids, UNK)


def _pair_rows(table: LexicalTable, src, use_null):
    rows = table.rows(src)
    if use_null:
        rows = np.append(rows, table.null_row)
    return rows


def log_likelihood(table: LexicalTable, corpus: ParallelCorpus, use_null: bool = True) -> float:
    """Corpus log-likelihood under Model 1 with uniform alignment priors."""
    total = 0.0
    for s, t in corpus:
        rows = _pair_rows(table, s.tokens, use_null)
        probs = table.t[np.ix_(rows, t.tokens)].sum(axis=0) / len(rows)
        total += float(np.log(probs).sum())
    return total


def train_model1(corpus: ParallelCorpus, iterations: int = 5, use_null: bool = True,
                 history: list | None = None) -> LexicalTable:
    """Estimate t(f | e) by EM.

    Starts from uniform rows.  If ``history`` is given, the corpus
    log-likelihood before the first and after every iteration is appended.
    """
    if len(corpus) == 0:
        raise AlignmentError("cannot train on an empty corpus")
    if iterations < 0:
        raise AlignmentError("iterations must be >= 0")
    vs, vt = len(corpus.source_vocab), len(corpus.target_vocab)
    t = np.full((vs + 1, vt), 1.0 / vt)
    table = LexicalTable(t)
    if history is not None:
        history.append(log_likelihood(table, corpus, use_null))
    for it in range(iterations):
        counts = np.zeros_like(t)
        for s, tg in corpus:
            rows = _pair_rows(table, s.tokens, use_null)
            cols = np.asarray(tg.tokens)
            post = t[np.ix_(rows, cols)]
            post = post / post.sum(axis=0, keepdims=True)
            np.add.at(counts, (rows[:, None], cols[None, :]), post)
        totals = counts.sum(axis=1, keepdims=True)
        seen = totals[:, 0] > 0
        t = t.copy()
        t[seen] = counts[seen] / totals[seen]
        table = LexicalTable(t)
        if history is not None:
            history.append(log_likelihood(table, corpus, use_null))
            log.debug("model1 iteration %d: log-likelihood %.6f", it + 1, history[-1])
    return table


def viterbi_align(table: LexicalTable, source: Sentence, target: Sentence,
                  use_null: bool = True) -> AlignmentMatrix:
    """Link every source word to its most probable target position.

    Scores are alignment posteriors t(f_j|e_i) / sum_i' t(f_j|e_i').  Ties go
    to the lowest target position.  With ``use_null`` the source word is left
    unaligned when NULL explains its best target word strictly better.
    """
    rows = _pair_rows(table, source.tokens, use_null)
    cols = np.asarray(target.tokens)
    probs = table.t[np.ix_(rows, cols)]
    post = probs / probs.sum(axis=0, keepdims=True)
    n = len(source)
    links = set()
    for i in range(n):
        j = int(np.argmax(post[i]))
        if use_null and probs[-1, j] > probs[i, j]:
            continue
        links.add((i + 1, j + 1))
    return AlignmentMatrix(n, len(target), frozenset(links))


def align_corpus(table: LexicalTable, corpus: ParallelCorpus, use_null: bool = True):
    return [viterbi_align(table, s, t, use_null) for s, t in corpus]


def symmetrize(fwd: AlignmentMatrix, bwd: AlignmentMatrix, method: str = "gdfa") -> AlignmentMatrix:
    """Combine two directional alignments given in the same (source, target) orientation."""
    if (fwd.n, fwd.m) != (bwd.n, bwd.m):
        raise AlignmentError(f"dimension mismatch: {fwd.n}x{fwd.m} vs {bwd.n}x{bwd.m}")
    inter = fwd.links & bwd.links
    if method == "intersection":
        return AlignmentMatrix(fwd.n, fwd.m, inter)
    if method != "gdfa":
        raise AlignmentError(f"unknown symmetrization {method!r}; expected one of {SYMMETRIZATIONS}")
    union = fwd.links | bwd.links
    current = set(inter)
    src_cov = {i for i, _ in current}
    tgt_cov = {j for _, j in current}
    grew = True
    while grew:
        grew = False
        for i, j in sorted(current):
            for di, dj in NEIGHBOURS:
                ni, nj = i + di, j + dj
                if (ni, nj) in union and (ni, nj) not in current and \
                        (ni not in src_cov or nj not in tgt_cov):
                    current.add((ni, nj))
                    src_cov.add(ni)
                    tgt_cov.add(nj)
                    grew = True
    for i, j in sorted(union):
        if i not in src_cov and j not in tgt_cov:
            current.add((i, j))
            src_cov.add(i)
            tgt_cov.add(j)
    return AlignmentMatrix(fwd.n, fwd.m, frozenset(current))


def bidirectional_align(corpus: ParallelCorpus, iterations: int = 5, use_null: bool = True,
                        method: str = "gdfa"):
    """Train both directions and symmetrize.  Returns (fwd, bwd, symmetrized) lists."""
    fwd_table = train_model1(corpus, iterations, use_null)
    bwd_table = train_model1(corpus.swapped(), iterations, use_null)
    fwd = align_corpus(fwd_table, corpus, use_null)
    bwd = [viterbi_align(bwd_table, t, s, use_null).transpose() for s, t in corpus]
    sym = [symmetrize(f, b, method) for f, b in zip(fwd, bwd)]
    return fwd, bwd, sym


def format_pharaoh(a: AlignmentMatrix) -> str:
    return " ".join(f"{i - 1}-{j - 1}" for i, j in a.sorted_links())


def parse_pharaoh(line: str, n: int, m: int | None = None) -> AlignmentMatrix:
    """Parse one 0-based Pharaoh line; ``m=None`` takes the target length from the links."""
    links = set()
    for item in line.split():
        try:
            i, j = item.split("-")
            links.add((int(i) + 1, int(j) + 1))
        except ValueError:
            raise AlignmentError(f"bad Pharaoh link {item!r}") from None
    if m is None:
        m = max((j for _, j in links), default=1)
    return AlignmentMatrix(n, m, frozenset(links))


def write_pharaoh(path, alignments: Iterable[AlignmentMatrix]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in alignments:
            fh.write(format_pharaoh(a) + "\n")


def read_pharaoh(path, shapes: Sequence[tuple[int, int | None]]) -> list[AlignmentMatrix]:
    """Read a Pharaoh file; ``shapes`` gives (n, m) per line for bounds checking."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) != len(shapes):
        raise AlignmentError(f"{path}: {len(lines)} alignment lines for {len(shapes)} sentences")
    out = []
    for lineno, (line, (n, m)) in enumerate(zip(lines, shapes), 1):
        try:
            out.append(parse_pharaoh(line, n, m))
        except AlignmentError as e:
            raise AlignmentError(f"{path}:{lineno}: {e}") from None
    return out
