"""Encoder-variant grid on a synthetic corpus, reported as Markdown, TSV and figures."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

from .align import bidirectional_align, write_pharaoh
from .corpus import generate_synthetic, write_sentences
from .metrics import bleu, ter
from .reorder import Reordering, alignment_to_reordering, write_permutations
from .seq2seq import HyperParams, OptConfig, hypothesis_text, save_model, train_model, translate_corpus
from .seq2seq.train import write_loss_log

log = logging.getLogger(__name__)

GRID = (
    ("base2", "Baseline NMT"),
    ("rpl3", "3-layer RpL"),
    ("ri2", "2-layer RI"),
    ("rl3", "3-layer RL"),
)


@dataclass
class AblationConfig:
    n_train: int = 1000
    n_test: int = 100
    vocab_size: int = 50
    max_len: int = 15
    rule: str = "reversal"
    seed: int = 0
    # training reorderings: "heuristic" (aligner + rules) or "oracle" (generator ground truth)
    train_reorder: str = "heuristic"
    # test reorderings: "oracle" or "identity"
    test_reorder: str = "oracle"
    align_iterations: int = 10
    symmetrization: str = "gdfa"
    d_emb: int = 32
    d_h: int = 32
    d_a: int = 32
    d_out: int = 32
    opt: OptConfig = field(default_factory=lambda: OptConfig(
        lr=0.005, epochs=20, batch_size=20, optimizer="adam"))
    smoothing: str = "none"
    ensemble: bool = True
    figures: bool = True


def training_reorderings(cfg: AblationConfig, train, truth, out: Path | None = None):
    if cfg.train_reorder == "oracle":
        return [Reordering(p) for p in truth]
    if cfg.train_reorder != "heuristic":
        raise ValueError(f"unknown training reorder source {cfg.train_reorder!r}")
    fwd, bwd, sym = bidirectional_align(train, cfg.align_iterations, True, cfg.symmetrization)
    if out is not None:
        write_pharaoh(out / "train.align.fwd", fwd)
        write_pharaoh(out / "train.align.bwd", bwd)
        write_pharaoh(out / f"train.align.{cfg.symmetrization}", sym)
    return [alignment_to_reordering(a) for a in sym]


def score(hyps, refs, smoothing="none") -> dict:
    h = [hypothesis_text(x).split() for x in hyps]
    b = bleu(h, refs, smoothing)
    t = ter(h, refs)
    return {"bleu": b.bleu, "ter": 100.0 * t.ter, "bleu_report": b.as_dict(),
            "ter_report": t.as_dict()}


def markdown_table(rows) -> str:
    lines = ["| Model | BLEU | TER |", "|---|---:|---:|"]
    for r in rows:
        lines.append(f"| {r['system']} | {r['bleu']:.2f} | {r['ter']:.2f} |")
    return "\n".join(lines) + "\n"


def run_ablation(cfg: AblationConfig, out_dir) -> list[dict]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log.info("ablation seed=%d rule=%s train_reorder=%s", cfg.seed, cfg.rule, cfg.train_reorder)
    corpus, truth = generate_synthetic(cfg.n_train + cfg.n_test, cfg.vocab_size, cfg.max_len,
                                       cfg.rule, cfg.seed)
    train = corpus.subset(range(cfg.n_train))
    test = corpus.subset(range(cfg.n_train, len(corpus)))
    test_perms = [Reordering(p) for p in truth[cfg.n_train:]]
    for name, part in (("train", train), ("test", test)):
        write_sentences(out / f"{name}.src", part.sources)
        write_sentences(out / f"{name}.tgt", part.targets)
    write_permutations(out / "test.perm", test_perms)
    train_perms = training_reorderings(cfg, train, truth[:cfg.n_train], out)
    write_permutations(out / "train.perm", train_perms)

    opt = replace(cfg.opt, seed=cfg.seed)
    rows, models, logs = [], [], {}
    for variant, label in GRID:
        hp = HyperParams(len(corpus.source_vocab), len(corpus.target_vocab), cfg.d_emb, cfg.d_h,
                         cfg.d_a, cfg.d_out, variant, max_decode_len=2 * cfg.max_len + 2)
        model, res = train_model(train, hp, opt, train_perms if hp.needs_reordering else None)
        save_model(model, out / f"{variant}.model")
        write_loss_log(out / f"{variant}.loss.tsv", res.log)
        logs[label] = res.log
        hyps = translate_corpus([model], test.sources, cfg.test_reorder, test_perms)
        with open(out / f"{variant}.hyp", "w", encoding="utf-8") as fh:
            fh.writelines(hypothesis_text(h) + "\n" for h in hyps)
        row = {"system": label, "variant": variant, **score(hyps, test.targets, cfg.smoothing)}
        log.info("%s: BLEU %.2f TER %.2f", label, row["bleu"], row["ter"])
        rows.append(row)
        models.append(model)
    if cfg.ensemble:
        hyps = translate_corpus(models, test.sources, cfg.test_reorder, test_perms)
        with open(out / "ensemble.hyp", "w", encoding="utf-8") as fh:
            fh.writelines(hypothesis_text(h) + "\n" for h in hyps)
        rows.append({"system": "Ensemble", "variant": "ensemble",
                     **score(hyps, test.targets, cfg.smoothing)})

    (out / "results.md").write_text(markdown_table(rows), encoding="utf-8")
    with open(out / "results.tsv", "w", encoding="utf-8") as fh:
        fh.write("system\tvariant\tbleu\tter\n")
        for r in rows:
            fh.write(f"{r['system']}\t{r['variant']}\t{r['bleu']:.2f}\t{r['ter']:.2f}\n")
    with open(out / "results.json", "w", encoding="utf-8") as fh:
        json.dump({"seed": cfg.seed, "rows": rows}, fh, indent=1, sort_keys=True)
    if cfg.figures:
        from .plotting import plot_loss_curves, plot_scores
        plot_scores(rows, out / "scores.png")
        plot_loss_curves(logs, out / "loss.png")
    return rows
