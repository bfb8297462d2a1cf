"""Forward and backward passes of the attention encoder-decoder.

Everything is batched over sentences: id matrices are (B, T) and right
padded.  Recurrent layers are GRUs; padded steps carry the previous state
through unchanged, so the state after the last step of a forward layer is
the state at the last real word.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import HyperParams


class NonFiniteLoss(FloatingPointError):
    def __init__(self, batch_index, loss):
        super().__init__(f"non-finite loss {loss} in batch {batch_index}")
        self.batch_index = batch_index
        self.loss = loss


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softmax(x, axis=-1):
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


# -- GRU ---------------------------------------------------------------------

def gru_step(p, prefix, x, h, mask=None):
    W, U, b = p[prefix + ".W"], p[prefix + ".U"], p[prefix + ".b"]
    H = h.shape[1]
    gx = x @ W + b
    gh = h @ U[:, :2 * H]
    z = sigmoid(gx[:, :H] + gh[:, :H])
    r = sigmoid(gx[:, H:2 * H] + gh[:, H:])
    rh = r * h
    n = np.tanh(gx[:, 2 * H:] + rh @ U[:, 2 * H:])
    h_new = (1.0 - z) * n + z * h
    if mask is not None:
        m = mask[:, None]
        h_new = m * h_new + (1.0 - m) * h
    return h_new, (x, h, z, r, rh, n, mask)


def gru_step_backward(p, grads, prefix, dh_out, cache):
    x, h, z, r, rh, n, mask = cache
    W, U = p[prefix + ".W"], p[prefix + ".U"]
    H = h.shape[1]
    if mask is not None:
        m = mask[:, None]
        dh_prev = (1.0 - m) * dh_out
        dh_new = m * dh_out
    else:
        dh_prev = 0.0
        dh_new = dh_out
    dn = dh_new * (1.0 - z)
    dz = dh_new * (h - n)
    dh_prev = dh_prev + dh_new * z
    dan = dn * (1.0 - n * n)
    drh = dan @ U[:, 2 * H:].T
    dr = drh * h
    dh_prev = dh_prev + drh * r
    daz = dz * z * (1.0 - z)
    dar = dr * r * (1.0 - r)
    dzr = np.concatenate([daz, dar], axis=1)
    dg = np.concatenate([daz, dar, dan], axis=1)
    gU = grads[prefix + ".U"]
    gU[:, :2 * H] += h.T @ dzr
    gU[:, 2 * H:] += rh.T @ dan
    grads[prefix + ".W"] += x.T @ dg
    grads[prefix + ".b"] += dg.sum(axis=0, keepdims=True)
    dh_prev = dh_prev + dzr @ U[:, :2 * H].T
    dx = dg @ W.T
    return dx, dh_prev


def run_gru(p, prefix, xs, mask, reverse=False):
    """Run a GRU over (B, T, E) inputs.  Returns states (B, T, H), final state, caches."""
    B, T, _ = xs.shape
    H = p[prefix + ".U"].shape[0]
    h = np.zeros((B, H))
    states = np.zeros((B, T, H))
    order = range(T - 1, -1, -1) if reverse else range(T)
    caches = []
    for t in order:
        h, c = gru_step(p, prefix, xs[:, t], h, mask[:, t])
        states[:, t] = h
        caches.append((t, c))
    return states, h, caches


def run_gru_backward(p, grads, prefix, dstates, dfinal, caches, dxs):
    dh = dfinal.copy()
    for t, c in reversed(caches):
        dh = dh + dstates[:, t]
        dx, dh = gru_step_backward(p, grads, prefix, dh, c)
        dxs[:, t] += dx


# -- encoder -----------------------------------------------------------------

@dataclass
class EncoderStates:
    """Concatenated per-position states ``h`` (B, T, D) with their validity mask."""

    h: np.ndarray
    mask: np.ndarray
    final: np.ndarray
    cache: dict = field(default=None, repr=False)

    @property
    def width(self) -> int:
        return self.h.shape[2]


def check_reordered(hp: HyperParams, src, src_reo, ranks=None):
    if hp.encoder_variant in ("rl3", "ri2"):
        if src_reo is None:
            raise ValueError(f"encoder variant {hp.encoder_variant} needs a reordered source")
        if src_reo.shape != src.shape:
            raise ValueError(f"reordered source shape {src_reo.shape} != source shape {src.shape}")
        if hp.own_word_states and hp.encoder_variant == "rl3" and ranks is None:
            raise ValueError("own_word_states needs the reordering ranks")


def encode(p, hp: HyperParams, src, mask, src_reo=None, ranks=None) -> EncoderStates:
    """Encode a padded batch of source ids.

    ``src_reo`` is the reordered source (same shape, same padding) and
    ``ranks[b, i]`` the 0-based rank of word i, used only by
    ``own_word_states``.
    """
    check_reordered(hp, src, src_reo, ranks)
    variant = hp.encoder_variant
    main_ids = src_reo if variant == "ri2" else src
    x_main = p["src_emb"][main_ids]
    F, f_last, f_c = run_gru(p, "enc_fwd", x_main, mask)
    Bk, _, b_c = run_gru(p, "enc_bwd", x_main, mask, reverse=True)
    layers = [F, Bk]
    finals = [f_last, Bk[:, 0]]
    cache = {"main_ids": main_ids, "x_main": x_main, "f_c": f_c, "b_c": b_c}
    if hp.n_layers == 3:
        third_ids = src_reo if variant == "rl3" else src
        x_third = x_main if third_ids is main_ids else p["src_emb"][third_ids]
        R, r_last, r_c = run_gru(p, "enc_third", x_third, mask)
        cache.update(third_ids=third_ids, x_third=x_third, r_c=r_c)
        if variant == "rl3" and hp.own_word_states:
            R = np.take_along_axis(R, ranks[:, :, None], axis=1)
            cache["ranks"] = ranks
        layers.append(R)
        finals.append(r_last)
    h = np.concatenate(layers, axis=2)
    final = np.concatenate(finals, axis=1)
    return EncoderStates(h, mask, final, cache)


def encode_backward(p, grads, hp: HyperParams, enc: EncoderStates, dH, dfinal):
    c = enc.cache
    Hd = hp.d_h
    dx_main = np.zeros_like(c["x_main"])
    dB_states = dH[:, :, Hd:2 * Hd].copy()
    # backward layer's final state is its state at position 0
    dB_states[:, 0] += dfinal[:, Hd:2 * Hd]
    run_gru_backward(p, grads, "enc_fwd", dH[:, :, :Hd], dfinal[:, :Hd], c["f_c"], dx_main)
    run_gru_backward(p, grads, "enc_bwd", dB_states, np.zeros_like(dfinal[:, :Hd]),
                     c["b_c"], dx_main)
    np.add.at(grads["src_emb"], c["main_ids"], dx_main)
    if hp.n_layers == 3:
        dR = dH[:, :, 2 * Hd:]
        if "ranks" in c:
            dR_seq = np.zeros_like(dR)
            rows = np.arange(dR.shape[0])[:, None]
            np.add.at(dR_seq, (rows, c["ranks"]), dR)
            dR = dR_seq
        dx_third = np.zeros_like(c["x_third"])
        run_gru_backward(p, grads, "enc_third", dR, dfinal[:, 2 * Hd:], c["r_c"], dx_third)
        np.add.at(grads["src_emb"], c["third_ids"], dx_third)


# -- attention and decoder ---------------------------------------------------

@dataclass
class AttentionStep:
    scores: np.ndarray   # (B, T), -inf at masked positions
    weights: np.ndarray  # (B, T)
    context: np.ndarray  # (B, D)


def attention_keys(p, enc: EncoderStates):
    return enc.h @ p["att.Wh"]


def attend(p, s_prev, enc: EncoderStates, keys=None):
    if keys is None:
        keys = attention_keys(p, enc)
    act = np.tanh((s_prev @ p["att.Ws"])[:, None, :] + keys)
    e = act @ p["att.v"][:, 0]
    valid = enc.mask > 0
    e = np.where(valid, e, -np.inf)
    emax = e.max(axis=1, keepdims=True)
    w = np.where(valid, np.exp(e - emax), 0.0)
    alpha = w / w.sum(axis=1, keepdims=True)
    ctx = np.einsum("bt,btd->bd", alpha, enc.h)
    return AttentionStep(e, alpha, ctx), act


def init_state(p, enc: EncoderStates):
    return np.tanh(enc.final @ p["init.W"] + p["init.b"])


def readout(p, emb, s, ctx):
    o_in = np.concatenate([emb, s, ctx], axis=1)
    o = np.tanh(o_in @ p["out.W"] + p["out.b"])
    logits = o @ p["out.Wy"] + p["out.by"]
    return logits, o_in, o


def decode_step(p, s_prev, y_prev, enc: EncoderStates, keys=None):
    """One decoder step.  Returns (s_i, output distribution, attention step)."""
    emb = p["tgt_emb"][y_prev]
    att, _ = attend(p, s_prev, enc, keys)
    s, _ = gru_step(p, "dec", np.concatenate([emb, att.context], axis=1), s_prev)
    logits, _, _ = readout(p, emb, s, att.context)
    return s, softmax(logits), att


# -- loss --------------------------------------------------------------------

def zero_grads(p):
    return {k: np.zeros_like(v) for k, v in p.items()}


def forward_loss(p, hp: HyperParams, batch, keep_cache=True):
    enc = encode(p, hp, batch.src, batch.src_mask, batch.src_reo, batch.ranks)
    keys = attention_keys(p, enc)
    s = init_state(p, enc)
    s0 = s
    tmask = batch.tgt_mask
    n_tok = tmask.sum()
    B, Ty = batch.tgt_in.shape
    rows = np.arange(B)
    loss = 0.0
    steps = []
    for t in range(Ty):
        y_prev = batch.tgt_in[:, t]
        emb = p["tgt_emb"][y_prev]
        att, act = attend(p, s, enc, keys)
        x = np.concatenate([emb, att.context], axis=1)
        s_new, gcache = gru_step(p, "dec", x, s)
        logits, o_in, o = readout(p, emb, s_new, att.context)
        probs = softmax(logits)
        gold = batch.tgt_out[:, t]
        with np.errstate(divide="ignore"):
            nll = -np.log(probs[rows, gold])
        loss += float(np.sum(np.where(tmask[:, t] > 0, nll, 0.0))) / n_tok
        if keep_cache:
            steps.append((y_prev, s, att, act, gcache, o_in, o, probs, gold))
        s = s_new
    return loss, (enc, keys, s0, steps, n_tok)


def loss_and_gradients(p, hp: HyperParams, batch, batch_index=None):
    """Mean per-token cross-entropy of the gold targets and its exact gradient."""
    loss, (enc, keys, s0, steps, n_tok) = forward_loss(p, hp, batch)
    if not np.isfinite(loss):
        raise NonFiniteLoss(batch_index, loss)
    g = zero_grads(p)
    E, Hh = hp.d_emb, hp.d_h
    B = batch.tgt_in.shape[0]
    rows = np.arange(B)
    tmask = batch.tgt_mask
    dH = np.zeros_like(enc.h)
    dkeys = np.zeros_like(keys)
    ds_next = np.zeros((B, Hh))
    Wy, Wo, Ws, v = p["out.Wy"], p["out.W"], p["att.Ws"], p["att.v"][:, 0]
    for t in range(len(steps) - 1, -1, -1):
        y_prev, s_prev, att, act, gcache, o_in, o, probs, gold = steps[t]
        scale = (tmask[:, t] / n_tok)[:, None]
        dlogits = probs.copy()
        dlogits[rows, gold] -= 1.0
        dlogits *= scale
        g["out.Wy"] += o.T @ dlogits
        g["out.by"] += dlogits.sum(axis=0, keepdims=True)
        dpre = (dlogits @ Wy.T) * (1.0 - o * o)
        g["out.W"] += o_in.T @ dpre
        g["out.b"] += dpre.sum(axis=0, keepdims=True)
        do_in = dpre @ Wo.T
        demb = do_in[:, :E]
        ds = ds_next + do_in[:, E:E + Hh]
        dctx = do_in[:, E + Hh:]
        dx, ds_prev = gru_step_backward(p, g, "dec", ds, gcache)
        demb = demb + dx[:, :E]
        dctx = dctx + dx[:, E:]
        # attention
        alpha = att.weights
        dH += alpha[:, :, None] * dctx[:, None, :]
        dalpha = np.einsum("btd,bd->bt", enc.h, dctx)
        de = alpha * (dalpha - (alpha * dalpha).sum(axis=1, keepdims=True))
        g["att.v"][:, 0] += np.einsum("bta,bt->a", act, de)
        dact = de[:, :, None] * v[None, None, :] * (1.0 - act * act)
        dkeys += dact
        dq = dact.sum(axis=1)
        g["att.Ws"] += s_prev.T @ dq
        ds_prev = ds_prev + dq @ Ws.T
        np.add.at(g["tgt_emb"], y_prev, demb)
        ds_next = ds_prev
    g["att.Wh"] += np.einsum("btd,bta->da", enc.h, dkeys)
    dH += dkeys @ p["att.Wh"].T
    dpre0 = ds_next * (1.0 - s0 * s0)
    g["init.W"] += enc.final.T @ dpre0
    g["init.b"] += dpre0.sum(axis=0, keepdims=True)
    dfinal = dpre0 @ p["init.W"].T
    encode_backward(p, g, hp, enc, dH, dfinal)
    return loss, g
