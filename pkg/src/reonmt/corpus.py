"""Parallel text ingestion, vocabularies, batching and synthetic corpora."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PAD, UNK, BOS, EOS = 0, 1, 2, 3
RESERVED = ("<pad>", "<unk>", "<s>", "</s>")

SYNTHETIC_RULES = ("identity", "reversal", "verb_final")


class CorpusError(ValueError):
    """Malformed parallel data."""


class LineCountMismatch(CorpusError):
    def __init__(self, msg: str, counts: tuple[int, int]):
        super().__init__(msg)
        self.counts = counts


class Vocabulary:
    """Bijective token/id map with PAD, UNK, BOS and EOS fixed at ids 0..3."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.itos: list[str] = list(RESERVED)
        self.stoi: dict[str, int] = {t: i for i, t in enumerate(RESERVED)}
        for tok in tokens:
            self.add(tok)

    def add(self, token: str) -> int:
        if token not in self.stoi:
            self.stoi[token] = len(self.itos)
            self.itos.append(token)
        return self.stoi[token]

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self.itos == other.itos

    def id(self, token: str) -> int:
        return self.stoi.get(token, UNK)

    def token(self, idx: int) -> str:
        return self.itos[idx]

    def numberize(self, tokens: Sequence[str]) -> tuple[int, ...]:
        return tuple(self.id(t) for t in tokens)

    def denumberize(self, ids: Sequence[int]) -> tuple[str, ...]:
        return tuple(self.itos[i] for i in ids)

    @property
    def content_tokens(self) -> list[str]:
        return self.itos[len(RESERVED):]


@dataclass(frozen=True)
class Sentence:
    """A tokenized sentence; ``tokens`` are vocabulary ids, ``surface`` the strings."""

    tokens: tuple[int, ...]
    surface: tuple[str, ...]

    def __post_init__(self):
        if not self.tokens:
            raise CorpusError("empty sentence")
        if len(self.tokens) != len(self.surface):
            raise CorpusError("token ids and surface strings differ in length")

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def from_tokens(cls, surface: Sequence[str], vocab: Vocabulary) -> "Sentence":
        return cls(vocab.numberize(surface), tuple(surface))

    @classmethod
    def from_ids(cls, ids: Sequence[int], vocab: Vocabulary) -> "Sentence":
        return cls(tuple(int(i) for i in ids), vocab.denumberize(ids))

    def text(self) -> str:
        return " ".join(self.surface)


@dataclass(frozen=True)
class ParallelCorpus:
    pairs: tuple[tuple[Sentence, Sentence], ...]
    source_vocab: Vocabulary = field(compare=False)
    target_vocab: Vocabulary = field(compare=False)

    def __post_init__(self):
        vs, vt = len(self.source_vocab), len(self.target_vocab)
        for k, (s, t) in enumerate(self.pairs):
            if max(s.tokens) >= vs or max(t.tokens) >= vt:
                raise CorpusError(f"pair {k}: token id outside vocabulary")

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    @property
    def sources(self) -> list[Sentence]:
        return [s for s, _ in self.pairs]

    @property
    def targets(self) -> list[Sentence]:
        return [t for _, t in self.pairs]

    def swapped(self) -> "ParallelCorpus":
        """Same corpus with source and target exchanged."""
        return ParallelCorpus(tuple((t, s) for s, t in self.pairs),
                              self.target_vocab, self.source_vocab)

    def subset(self, indices: Iterable[int]) -> "ParallelCorpus":
        return ParallelCorpus(tuple(self.pairs[i] for i in indices),
                              self.source_vocab, self.target_vocab)


def read_lines(path: str | Path) -> list[list[str]]:
    """Read a whitespace-tokenized text file; rejects empty lines with their line number."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            toks = line.split()
            if not toks:
                raise CorpusError(f"{path}: empty line {lineno}")
            rows.append(toks)
    return rows


def build_vocab(sentences: Iterable[Sequence[str]], min_count: int = 1) -> Vocabulary:
    counts = Counter(t for s in sentences for t in s)
    # first-occurrence order keeps ids stable across runs
    return Vocabulary(t for t in counts if counts[t] >= min_count)


def load_parallel(src_path, tgt_path, min_count: int = 1,
                  source_vocab: Vocabulary | None = None,
                  target_vocab: Vocabulary | None = None) -> ParallelCorpus:
    """Load a parallel corpus from two line-aligned files.

    Tokens seen fewer than ``min_count`` times are numberized as UNK.  Pass
    existing vocabularies to numberize dev/test data against training ids.
    """
    src, tgt = read_lines(src_path), read_lines(tgt_path)
    if len(src) != len(tgt):
        raise LineCountMismatch(f"line-count mismatch: {src_path} has {len(src)} lines, "
                                f"{tgt_path} has {len(tgt)}", (len(src), len(tgt)))
    sv = source_vocab if source_vocab is not None else build_vocab(src, min_count)
    tv = target_vocab if target_vocab is not None else build_vocab(tgt, min_count)
    pairs = tuple((Sentence.from_tokens(s, sv), Sentence.from_tokens(t, tv))
                  for s, t in zip(src, tgt))
    return ParallelCorpus(pairs, sv, tv)


def write_sentences(path, sentences: Iterable[Sentence]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in sentences:
            fh.write(s.text() + "\n")


def apply_rule(rule: str, n: int) -> tuple[int, ...]:
    """Target slot (1-based) of each source position under a synthetic rule."""
    if rule == "identity":
        return tuple(range(1, n + 1))
    if rule == "reversal":
        return tuple(range(n, 0, -1))
    if rule == "verb_final":
        return (n,) + tuple(range(1, n))
    raise CorpusError(f"unknown reorder rule {rule!r}; valid rules: {', '.join(SYNTHETIC_RULES)}")


def generate_synthetic(n_pairs: int, vocab_size: int, max_len: int, reorder_rule: str,
                       seed: int, min_len: int = 2, unique_tokens: bool = False):
    """Generate a dictionary-translation corpus with a known reordering.

    ``vocab_size`` counts content word types per side (reserved ids come on
    top).  Each source word maps to exactly one target word through a random
    bijective dictionary; the target is the mapped source laid out by
    ``reorder_rule``.  Returns the corpus and, per pair, the ground-truth
    permutation as a tuple of 1-based target slots.

    ``unique_tokens`` draws each sentence without repeated words, which makes
    every gold link recoverable from lexical evidence alone.
    """
    if vocab_size < 4:
        raise CorpusError("vocab_size must be >= 4")
    if max_len < 2:
        raise CorpusError("max_len must be >= 2")
    if unique_tokens and max_len > vocab_size:
        raise CorpusError("unique_tokens needs max_len <= vocab_size")
    if reorder_rule not in SYNTHETIC_RULES:
        apply_rule(reorder_rule, 1)
    rng = np.random.default_rng(seed)
    src_words = [f"s{k}" for k in range(vocab_size)]
    tgt_words = [f"t{k}" for k in range(vocab_size)]
    dictionary = dict(zip(src_words, (tgt_words[k] for k in rng.permutation(vocab_size))))
    sv, tv = Vocabulary(src_words), Vocabulary(tgt_words)
    lo = min(min_len, max_len)
    pairs, perms = [], []
    for _ in range(n_pairs):
        n = int(rng.integers(lo, max_len + 1))
        if unique_tokens:
            draw = rng.choice(vocab_size, size=n, replace=False)
        else:
            draw = rng.integers(0, vocab_size, size=n)
        src = [src_words[k] for k in draw]
        perm = apply_rule(reorder_rule, n)
        tgt = [""] * n
        for i, slot in enumerate(perm):
            tgt[slot - 1] = dictionary[src[i]]
        pairs.append((Sentence.from_tokens(src, sv), Sentence.from_tokens(tgt, tv)))
        perms.append(perm)
    return ParallelCorpus(tuple(pairs), sv, tv), perms


@dataclass
class Batch:
    """Right-padded id matrices plus masks; ``src_reo`` holds reordered source ids."""

    indices: np.ndarray
    src: np.ndarray
    src_mask: np.ndarray
    src_lengths: np.ndarray
    tgt_in: np.ndarray
    tgt_out: np.ndarray
    tgt_mask: np.ndarray
    tgt_lengths: np.ndarray
    src_reo: np.ndarray | None = None
    ranks: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.indices)


def pad(seqs: Sequence[Sequence[int]], value: int = PAD) -> tuple[np.ndarray, np.ndarray]:
    width = max(len(s) for s in seqs)
    out = np.full((len(seqs), width), value, dtype=np.int64)
    mask = np.zeros((len(seqs), width))
    for b, s in enumerate(seqs):
        out[b, :len(s)] = s
        mask[b, :len(s)] = 1.0
    return out, mask


def make_batch(pairs, indices, reorderings=None) -> Batch:
    """Build one batch.  Target input is BOS + y, target output is y + EOS."""
    srcs = [pairs[i][0].tokens for i in indices]
    tgts = [pairs[i][1].tokens for i in indices]
    src, src_mask = pad(srcs)
    tgt_in, tgt_mask = pad([(BOS,) + t for t in tgts])
    tgt_out, _ = pad([t + (EOS,) for t in tgts])
    batch = Batch(np.asarray(indices), src, src_mask, src_mask.sum(1).astype(int),
                  tgt_in, tgt_out, tgt_mask, tgt_mask.sum(1).astype(int))
    if reorderings is not None:
        reo, ranks = [], []
        for i, s in zip(indices, srcs):
            perm = reorderings[i]
            perm = perm.perm if hasattr(perm, "perm") else tuple(perm)
            if len(perm) != len(s):
                raise CorpusError(f"pair {i}: reordering length {len(perm)} != source length {len(s)}")
            row = [0] * len(s)
            for pos, rank in enumerate(perm):
                row[rank - 1] = s[pos]
            reo.append(row)
            ranks.append([r - 1 for r in perm])
        batch.src_reo, _ = pad(reo)
        batch.ranks, _ = pad(ranks, 0)
    return batch


def batch(corpus: ParallelCorpus, batch_size: int, reorderings=None,
          rng: np.random.Generator | None = None) -> list[Batch]:
    """Partition the corpus into padded batches, in file order unless ``rng`` shuffles."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    order = np.arange(len(corpus)) if rng is None else rng.permutation(len(corpus))
    return [make_batch(corpus.pairs, order[k:k + batch_size], reorderings)
            for k in range(0, len(order), batch_size)]
