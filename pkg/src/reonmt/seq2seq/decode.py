"""Greedy, beam and ensemble decoding."""

from __future__ import annotations

import numpy as np

from ..corpus import BOS, EOS, Sentence
from ..reorder import Reordering, test_time_reorder
from .model import EncoderStates, attention_keys, decode_step, encode, init_state
from .params import Model


class EnsembleError(ValueError):
    pass


def _encode_one(model: Model, source: Sentence, strategy: str, reordering: Reordering | None):
    hp = model.hp
    sv = model.source_vocab
    src = np.array([sv.numberize(source.surface)])
    mask = np.ones(src.shape)
    src_reo = ranks = None
    if hp.needs_reordering:
        reo = test_time_reorder(source, strategy, reordering)
        src_reo = np.array([sv.numberize(reo.surface)])
        if strategy == "oracle":
            ranks = np.array([[r - 1 for r in reordering.perm]])
        else:
            ranks = np.arange(len(source))[None, :]
    return encode(model.params, hp, src, mask, src_reo, ranks)


def _expand(enc: EncoderStates, rows) -> EncoderStates:
    return EncoderStates(enc.h[rows], enc.mask[rows], enc.final[rows])


class _Member:
    def __init__(self, model, enc):
        self.p = model.params
        self.enc = enc
        self.keys = attention_keys(self.p, enc)
        self.s = init_state(self.p, enc)

    def step(self, y_prev):
        s, probs, att = decode_step(self.p, self.s, y_prev, self.enc, self.keys)
        self.s = s
        return probs, att

    def reindex(self, rows):
        self.enc = _expand(self.enc, rows)
        self.keys = self.keys[rows]
        self.s = self.s[rows]


def check_ensemble(models) -> None:
    if not models:
        raise EnsembleError("need at least one model")
    tv = models[0].target_vocab
    for m in models[1:]:
        if m.target_vocab != tv:
            raise EnsembleError("ensemble members disagree on the target vocabulary")


def translate(models, source: Sentence, reorder_strategy: str = "identity",
              reordering: Reordering | None = None, method: str = "greedy",
              beam_size: int = 1, max_len: int | None = None,
              return_attention: bool = False):
    """Translate one sentence with one model or an ensemble of models.

    Ensemble members are combined by averaging their output distributions at
    every step.  Models whose encoder reads a reordered source get it from
    ``reorder_strategy``.
    """
    if isinstance(models, Model):
        models = [models]
    check_ensemble(models)
    if method not in ("greedy", "beam"):
        raise ValueError(f"unknown decoding method {method!r}")
    if beam_size < 1:
        raise ValueError("beam size must be >= 1")
    if max_len is None:
        max_len = min(m.hp.max_decode_len for m in models)
    members = [_Member(m, _encode_one(m, source, reorder_strategy, reordering)) for m in models]
    tv = models[0].target_vocab
    if method == "greedy":
        ids, att = _greedy(members, max_len)
    else:
        ids, att = _beam(members, max_len, beam_size)
    # None when the first emitted token is EOS
    out = Sentence.from_ids(ids, tv) if ids else None
    if return_attention:
        return out, att
    return out


def _mean_probs(members, y_prev):
    probs, atts = [], []
    for m in members:
        p, a = m.step(y_prev)
        probs.append(p)
        atts.append(a.weights)
    return sum(probs) / len(probs), atts[0]


def _greedy(members, max_len):
    ids, weights = [], []
    y = np.array([BOS])
    for _ in range(max_len):
        probs, att = _mean_probs(members, y)
        tok = int(np.argmax(probs[0]))
        weights.append(att[0])
        if tok == EOS:
            break
        ids.append(tok)
        y = np.array([tok])
    return ids, np.array(weights)


def _beam(members, max_len, k):
    hyps = [[]]
    scores = np.zeros(1)
    atts = [[]]
    finished = []
    y = np.array([BOS])
    for _ in range(max_len):
        probs, att = _mean_probs(members, y)
        with np.errstate(divide="ignore"):
            total = scores[:, None] + np.log(probs)
        V = probs.shape[1]
        flat_total, flat_p = total.ravel(), probs.ravel()
        order = np.lexsort((np.arange(flat_total.size), -flat_p, -flat_total))
        width = k - len(finished)
        keep_rows, new_hyps, new_scores, new_atts, next_y = [], [], [], [], []
        for idx in order[:width]:
            row, tok = divmod(int(idx), V)
            seq = hyps[row] + [tok]
            a = atts[row] + [att[row]]
            if tok == EOS:
                finished.append((seq[:-1], float(flat_total[idx]), a))
            else:
                keep_rows.append(row)
                new_hyps.append(seq)
                new_scores.append(flat_total[idx])
                new_atts.append(a)
                next_y.append(tok)
        if not keep_rows or len(finished) >= k:
            break
        for m in members:
            m.reindex(np.array(keep_rows))
        hyps, scores, atts = new_hyps, np.array(new_scores), new_atts
        y = np.array(next_y)
    if not finished:
        finished = [(h, float(s), a) for h, s, a in zip(hyps, scores, atts)]
    best = max(range(len(finished)), key=lambda i: (finished[i][1], -i))
    seq, _, a = finished[best]
    return seq, np.array(a)


def translate_corpus(models, sources, reorder_strategy="identity", reorderings=None,
                     method="greedy", beam_size=1) -> list[Sentence | None]:
    out = []
    for k, s in enumerate(sources):
        r = reorderings[k] if reorderings is not None else None
        out.append(translate(models, s, reorder_strategy, r, method, beam_size))
    return out


def hypothesis_text(s: Sentence | None) -> str:
    """Surface text of a translation; an immediate EOS gives an empty line."""
    return "" if s is None else s.text()
