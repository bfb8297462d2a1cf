import math
import sys

import numpy as np
import pytest

from reonmt.corpus import BOS, make_batch, generate_synthetic
from reonmt.reorder import Reordering
from reonmt.seq2seq import (
    HyperParams,
    NonFiniteLoss,
    OptConfig,
    TrainingDiverged,
    decode_step,
    encode,
    init_params,
    init_state,
    train,
    train_model,
    translate,
)
from reonmt.seq2seq.train import clip_grads, global_norm, read_loss_log, write_loss_log

# the package re-exports the train function under the module's name
train_mod = sys.modules["reonmt.seq2seq.train"]


def setup(variant="base2", n=12, seed=1, d=8):
    c, perms = generate_synthetic(n, 8, 5, "reversal", seed)
    hp = HyperParams(len(c.source_vocab), len(c.target_vocab), d, d, d, d, encoder_variant=variant)
    return c, perms, hp


def test_same_seed_same_curve():
    c, perms, hp = setup("rl3")
    opt = OptConfig(lr=0.5, epochs=3, batch_size=4, seed=5)
    a = train(c, hp, opt, perms)
    b = train(c, hp, opt, perms)
    assert a.log == b.log
    for k in a.params:
        assert np.array_equal(a.params[k], b.params[k])


def test_different_seed_different_curve():
    c, perms, hp = setup()
    a = train(c, hp, OptConfig(epochs=2, batch_size=4, seed=1))
    b = train(c, hp, OptConfig(epochs=2, batch_size=4, seed=2))
    assert a.log != b.log


def test_loss_decreases():
    c, perms, hp = setup()
    res = train(c, hp, OptConfig(lr=1.0, epochs=15, batch_size=4))
    assert res.log[-1][1] < res.log[0][1]


def test_reordered_variant_requires_reorderings():
    c, perms, hp = setup("ri2")
    with pytest.raises(ValueError):
        train(c, hp, OptConfig(epochs=1))
    with pytest.raises(ValueError):
        train(c, hp, OptConfig(epochs=1), perms, dev=c)


def test_best_checkpoint_by_dev_loss():
    c, perms, hp = setup()
    dev, _ = generate_synthetic(6, 8, 5, "reversal", 99)
    res = train(c, hp, OptConfig(lr=1.0, epochs=6, batch_size=4), dev=dev)
    dev_losses = [row[2] for row in res.log]
    assert res.best_epoch == 1 + int(np.argmin(dev_losses))


def test_target_loss_stops_early():
    c, perms, hp = setup()
    res = train(c, hp, OptConfig(lr=1.0, epochs=50, batch_size=4, target_loss=10.0))
    assert len(res.log) == 1


def test_clipping_bounds_global_norm():
    rng = np.random.default_rng(0)
    g = {"a": rng.normal(size=(3, 4)) * 10, "b": rng.normal(size=(1, 5)) * 10}
    before = clip_grads(g, 5.0)
    assert before > 5.0
    assert global_norm(g) == pytest.approx(5.0)
    small = {"a": np.full((2, 2), 0.1)}
    clip_grads(small, 5.0)
    assert np.all(small["a"] == 0.1)


def test_divergence_returns_last_good_checkpoint(monkeypatch):
    c, perms, hp = setup()
    real = train_mod.loss_and_gradients
    calls = {"n": 0}
    n_batches = math.ceil(len(c) / 4)

    def flaky(p, hp_, b, batch_index=None):
        calls["n"] += 1
        if calls["n"] > 2 * n_batches:
            raise NonFiniteLoss(batch_index, float("nan"))
        return real(p, hp_, b, batch_index)

    monkeypatch.setattr(train_mod, "loss_and_gradients", flaky)
    with pytest.raises(TrainingDiverged) as e:
        train(c, hp, OptConfig(lr=1.0, epochs=5, batch_size=4))
    monkeypatch.undo()
    assert e.value.epoch == 3
    good = train(c, hp, OptConfig(lr=1.0, epochs=2, batch_size=4))
    for k, v in good.params.items():
        assert np.array_equal(e.value.checkpoint[k], v)


def test_overflowing_weights_abort_training():
    c, perms, hp = setup()
    p = init_params(hp, 0)
    p["out.Wy"] *= 1e200
    with pytest.raises(TrainingDiverged):
        train(c, hp, OptConfig(lr=1.0, epochs=2, batch_size=4, clip=0), params=p)


def test_loss_log_format(tmp_path):
    rows = [(1, 2.5, 3.25), (2, 1.0, math.nan)]
    write_loss_log(tmp_path / "log", rows)
    lines = (tmp_path / "log").read_text().splitlines()
    assert lines[0] == "1\t2.500000\t3.250000"
    back = read_loss_log(tmp_path / "log")
    assert back[0] == (1, 2.5, 3.25)
    assert back[1][0] == 2 and math.isnan(back[1][2])


def test_adam_trains():
    c, perms, hp = setup("rpl3")
    res = train(c, hp, OptConfig(lr=0.01, epochs=10, batch_size=4, optimizer="adam"))
    assert res.log[-1][1] < res.log[0][1]


def test_unknown_optimizer():
    with pytest.raises(ValueError):
        OptConfig(optimizer="rmsprop")


def test_one_pair_overfit_argmax_is_teacher_token():
    c, perms, _ = setup(n=1)
    hp = HyperParams(len(c.source_vocab), len(c.target_vocab), 8, 8, 8, 8)
    model, res = train_model(c, hp, OptConfig(lr=1.0, epochs=300, batch_size=1, target_loss=0.01))
    assert res.log[-1][1] < 0.01
    b = make_batch(c.pairs, [0])
    enc = encode(model.params, hp, b.src, b.src_mask)
    s = init_state(model.params, enc)
    for t in range(b.tgt_in.shape[1]):
        s, probs, _ = decode_step(model.params, s, b.tgt_in[:, t], enc)
        assert int(np.argmax(probs[0])) == int(b.tgt_out[0, t])
    assert b.tgt_in[0, 0] == BOS
    assert translate(model, c.sources[0]) == c.targets[0]


@pytest.mark.parametrize("variant", ["base2", "rl3"])
def test_small_overfit_reproduces_targets(variant):
    c, perms = generate_synthetic(10, 8, 5, "reversal", 2)
    hp = HyperParams(len(c.source_vocab), len(c.target_vocab), 16, 16, 16, 16, encoder_variant=variant)
    model, res = train_model(c, hp, OptConfig(lr=1.0, epochs=400, batch_size=5, target_loss=0.05),
                             perms)
    assert res.log[-1][1] < 0.05
    for s, t, p in zip(c.sources, c.targets, perms):
        assert translate(model, s, "oracle", Reordering(p)) == t
