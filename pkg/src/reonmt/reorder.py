"""Alignment-to-reordering conversion and test-time reorderers.

A source word's position in the reordered sentence follows the target words
it is aligned to.  Words are placed into an unbounded integer slot space in
three passes (single links, multiple links, unaligned words); collisions go
to the nearest free slot with the left one preferred on ties, and the
occupied slots are finally compacted to ranks 1..n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .align import AlignmentMatrix
from .corpus import Sentence


class ReorderError(ValueError):
    pass


@dataclass(frozen=True)
class Reordering:
    """``perm[i - 1]`` is the rank (1..n) of source position i."""

    perm: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "perm", tuple(int(p) for p in self.perm))
        if sorted(self.perm) != list(range(1, len(self.perm) + 1)):
            raise ReorderError(f"not a permutation of 1..{len(self.perm)}: {self.perm}")

    @property
    def n(self) -> int:
        return len(self.perm)

    def __len__(self) -> int:
        return len(self.perm)

    @classmethod
    def identity(cls, n: int) -> "Reordering":
        return cls(tuple(range(1, n + 1)))

    def inverse(self) -> "Reordering":
        inv = [0] * self.n
        for i, r in enumerate(self.perm, 1):
            inv[r - 1] = i
        return Reordering(tuple(inv))

    def is_identity(self) -> bool:
        return all(r == i for i, r in enumerate(self.perm, 1))


@dataclass
class SlotAssignment:
    slots: dict[int, int]
    desired: dict[int, Fraction]


def middle_position(positions: Sequence[int]) -> int:
    """Middle element of a sorted run; even lengths take the lower middle."""
    if not positions:
        raise ReorderError("middle_position of an empty list")
    return positions[(len(positions) + 1) // 2 - 1]


def nearest_empty(slot: int, occupied) -> int:
    if slot not in occupied:
        return slot
    d = 1
    while True:
        left, right = slot - d, slot + d
        if left >= 1 and left not in occupied:
            return left
        if right not in occupied:
            return right
        d += 1


def assign_slots(a: AlignmentMatrix) -> SlotAssignment:
    targets: dict[int, list[int]] = {i: [] for i in range(1, a.n + 1)}
    for i, j in a.links:
        targets[i].append(j)
    slots: dict[int, int] = {}
    desired: dict[int, Fraction] = {}
    occupied: set[int] = set()

    def place(i: int, want: Fraction) -> None:
        desired[i] = want
        s = nearest_empty(max(1, math.floor(want)), occupied)
        slots[i] = s
        occupied.add(s)

    for i in range(1, a.n + 1):
        if len(targets[i]) == 1:
            place(i, Fraction(targets[i][0]))
    for i in range(1, a.n + 1):
        if len(targets[i]) > 1:
            place(i, Fraction(middle_position(sorted(targets[i]))))
    for i in range(1, a.n + 1):
        if targets[i]:
            continue
        left = next((slots[k] for k in range(i - 1, 0, -1) if k in slots), None)
        right = next((slots[k] for k in range(i + 1, a.n + 1) if k in slots), None)
        if left is None and right is None:
            want = Fraction(i)
        elif left is None or right is None:
            want = Fraction(left if right is None else right)
        else:
            want = Fraction(left + right, 2)
        place(i, want)
    return SlotAssignment(slots, desired)


def compact(slots: dict[int, int]) -> Reordering:
    order = sorted(slots, key=slots.__getitem__)
    perm = [0] * len(slots)
    for rank, i in enumerate(order, 1):
        perm[i - 1] = rank
    return Reordering(tuple(perm))


def alignment_to_reordering(a: AlignmentMatrix) -> Reordering:
    return compact(assign_slots(a).slots)


def apply_reordering(s: Sentence, r: Reordering) -> Sentence:
    """Lay out ``s`` so that output position k holds the word of rank k."""
    if len(s) != r.n:
        raise ReorderError(f"sentence length {len(s)} != reordering length {r.n}")
    tokens = [0] * r.n
    surface = [""] * r.n
    for i, rank in enumerate(r.perm):
        tokens[rank - 1] = s.tokens[i]
        surface[rank - 1] = s.surface[i]
    return Sentence(tuple(tokens), tuple(surface))


TEST_TIME_STRATEGIES = ("identity", "oracle")


def test_time_reorder(s: Sentence, strategy: str = "identity",
                      reordering: Reordering | None = None) -> Sentence:
    """Reorder a sentence without access to its translation.

    ``identity`` leaves it untouched; ``oracle`` applies a supplied
    ground-truth permutation (synthetic corpora, reference alignments).
    """
    if strategy == "identity":
        return s
    if strategy == "oracle":
        if reordering is None:
            raise ReorderError("oracle strategy needs a reordering")
        return apply_reordering(s, reordering)
    raise ReorderError(f"unknown strategy {strategy!r}; expected one of {TEST_TIME_STRATEGIES}")


test_time_reorder.__test__ = False  # not a pytest test


def write_permutations(path, reorderings: Iterable[Reordering | Sequence[int]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in reorderings:
            perm = r.perm if isinstance(r, Reordering) else r
            fh.write(" ".join(str(p) for p in perm) + "\n")


def read_permutations(path) -> list[Reordering]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            try:
                out.append(Reordering(tuple(int(x) for x in line.split())))
            except ValueError as e:
                raise ReorderError(f"{path}:{lineno}: {e}") from None
    return out
