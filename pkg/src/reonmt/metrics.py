"""Corpus BLEU and TER on whitespace tokens."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Sequence

MAX_ORDER = 4
MAX_SHIFT_SIZE = 10


class MetricError(ValueError):
    pass


def _words(s) -> tuple:
    if hasattr(s, "surface"):
        return tuple(s.surface)
    if isinstance(s, str):
        return tuple(s.split())
    return tuple(s)


@dataclass
class BleuReport:
    bleu: float
    precisions: list[float]
    brevity_penalty: float
    hyp_len: int
    ref_len: int
    matches: list[int] = field(default_factory=list)
    totals: list[int] = field(default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)


def ngrams(words: Sequence[str], n: int) -> Counter:
    return Counter(tuple(words[k:k + n]) for k in range(len(words) - n + 1))


def bleu(hypotheses, references, smoothing: str = "none") -> BleuReport:
    """Corpus-level 4-gram BLEU against a single reference per hypothesis.

    ``smoothing="add1"`` adds one to matches and totals for orders 2..4.
    """
    if len(hypotheses) != len(references):
        raise MetricError(f"{len(hypotheses)} hypotheses for {len(references)} references")
    if not hypotheses:
        raise MetricError("empty corpus")
    if smoothing not in ("none", "add1"):
        raise MetricError(f"unknown smoothing {smoothing!r}")
    matches = [0] * MAX_ORDER
    totals = [0] * MAX_ORDER
    hyp_len = ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        h, r = _words(hyp), _words(ref)
        hyp_len += len(h)
        ref_len += len(r)
        for n in range(1, MAX_ORDER + 1):
            hc, rc = ngrams(h, n), ngrams(r, n)
            matches[n - 1] += sum(min(c, rc[g]) for g, c in hc.items())
            totals[n - 1] += max(0, len(h) - n + 1)
    precisions = []
    for n in range(MAX_ORDER):
        m, t = matches[n], totals[n]
        if smoothing == "add1" and n > 0:
            m, t = m + 1, t + 1
        precisions.append(m / t if t else 0.0)
    if hyp_len == 0:
        bp = 0.0
    else:
        bp = min(1.0, math.exp(1.0 - ref_len / hyp_len))
    if min(precisions) <= 0.0:
        score = 0.0
    else:
        score = 100.0 * bp * math.exp(sum(math.log(p) for p in precisions) / MAX_ORDER)
    return BleuReport(score, precisions, bp, hyp_len, ref_len, matches, totals)


@dataclass
class TerReport:
    ter: float
    insertions: int = 0
    deletions: int = 0
    substitutions: int = 0
    shifts: int = 0
    ref_len: int = 0

    @property
    def edits(self) -> int:
        return self.insertions + self.deletions + self.substitutions + self.shifts

    def as_dict(self) -> dict:
        d = asdict(self)
        d["edits"] = self.edits
        return d


def levenshtein(hyp: Sequence[str], ref: Sequence[str]) -> int:
    prev = list(range(len(ref) + 1))
    for k, h in enumerate(hyp, 1):
        cur = [k]
        for j, r in enumerate(ref, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (h != r)))
        prev = cur
    return prev[-1]


def edit_operations(hyp: Sequence[str], ref: Sequence[str]) -> tuple[int, int, int]:
    """(insertions, deletions, substitutions) turning ``hyp`` into ``ref``."""
    n, m = len(hyp), len(ref)
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        d[i][0] = i
    for j in range(m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1,
                          d[i - 1][j - 1] + (hyp[i - 1] != ref[j - 1]))
    ins = dele = sub = 0
    i, j = n, m
    while i or j:
        if i and j and d[i][j] == d[i - 1][j - 1] + (hyp[i - 1] != ref[j - 1]):
            sub += hyp[i - 1] != ref[j - 1]
            i, j = i - 1, j - 1
        elif i and d[i][j] == d[i - 1][j] + 1:
            dele += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return ins, dele, sub


def shift(words: Sequence[str], start: int, length: int, dest: int) -> tuple:
    """Move ``words[start:start+length]`` so that it begins at index ``dest`` of the result."""
    block = tuple(words[start:start + length])
    rest = tuple(words[:start]) + tuple(words[start + length:])
    return rest[:dest] + block + rest[dest:]


def _contains(seq: Sequence[str], block: tuple) -> bool:
    L = len(block)
    return any(tuple(seq[k:k + L]) == block for k in range(len(seq) - L + 1))


def candidate_shifts(hyp: Sequence[str], ref: Sequence[str]):
    """Yield (start, length, dest) for blocks that occur in the reference but are misplaced."""
    n = len(hyp)
    for start in range(n):
        for length in range(1, min(MAX_SHIFT_SIZE, n - start) + 1):
            block = tuple(hyp[start:start + length])
            if not _contains(ref, block):
                break
            if tuple(ref[start:start + length]) == block:
                continue
            for dest in range(n - length + 1):
                if dest != start:
                    yield start, length, dest


def greedy_shifts(hyp: Sequence[str], ref: Sequence[str]) -> tuple[tuple, int]:
    """Apply best-first block shifts while one lowers shifts + edit distance."""
    hyp = tuple(hyp)
    n_shifts = 0
    cost = levenshtein(hyp, ref)
    while cost > 0:
        best = None
        for start, length, dest in candidate_shifts(hyp, ref):
            moved = shift(hyp, start, length, dest)
            gain = cost - (levenshtein(moved, ref) + 1)
            if gain <= 0:
                continue
            key = (-gain, abs(dest - start), start, length, dest)
            if best is None or key < best[0]:
                best = (key, moved)
        if best is None:
            break
        hyp = best[1]
        cost = levenshtein(hyp, ref)
        n_shifts += 1
    return hyp, n_shifts


def ter(hypotheses, references) -> TerReport:
    """Corpus TER: total edits (shifts included) over total reference words."""
    if len(hypotheses) != len(references):
        raise MetricError(f"{len(hypotheses)} hypotheses for {len(references)} references")
    if not hypotheses:
        raise MetricError("empty corpus")
    rep = TerReport(0.0)
    for k, (hyp, ref) in enumerate(zip(hypotheses, references)):
        h, r = _words(hyp), _words(ref)
        if not r:
            raise MetricError(f"empty reference sentence at index {k}")
        shifted, n_shifts = greedy_shifts(h, r)
        ins, dele, sub = edit_operations(shifted, r)
        rep.insertions += ins
        rep.deletions += dele
        rep.substitutions += sub
        rep.shifts += n_shifts
        rep.ref_len += len(r)
    rep.ter = rep.edits / rep.ref_len
    return rep


def sentence_ter(hyp, ref) -> float:
    return ter([hyp], [ref]).ter


def format_scores(b: BleuReport, t: TerReport) -> str:
    return f"BLEU={b.bleu:.2f} TER={100.0 * t.ter:.2f}"
