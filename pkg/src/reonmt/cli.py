"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import align as al
from .corpus import (
    CorpusError,
    Sentence,
    generate_synthetic,
    load_parallel,
    read_lines,
    write_sentences,
)
from .metrics import MetricError, bleu, format_scores, ter
from .reorder import (
    ReorderError,
    Reordering,
    alignment_to_reordering,
    read_permutations,
    write_permutations,
)
from .seq2seq import (
    VARIANTS,
    EnsembleError,
    HyperParams,
    Model,
    ModelFormatError,
    NonFiniteLoss,
    OptConfig,
    TrainingDiverged,
    hypothesis_text,
    load_model,
    save_model,
    train_model,
    translate_corpus,
)
from .seq2seq.train import write_loss_log

log = logging.getLogger("reonmt")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def require_files(*paths):
    for p in paths:
        if p is not None and not Path(p).is_file():
            raise DataError(f"no such file: {p}")


def _load_corpus(src, tgt, min_count=1, **vocabs):
    require_files(src, tgt)
    return load_parallel(src, tgt, min_count, **vocabs)


# -- subcommands ---------------------------------------------------------------

def cmd_synth(a):
    corpus, perms = generate_synthetic(a.n_pairs, a.vocab_size, a.max_len, a.rule, a.seed)
    prefix = a.out_prefix
    write_sentences(f"{prefix}.src", corpus.sources)
    write_sentences(f"{prefix}.tgt", corpus.targets)
    write_permutations(f"{prefix}.perm", perms)
    log.info("wrote %d pairs to %s.{src,tgt,perm}", len(corpus), prefix)


def cmd_align(a):
    corpus = _load_corpus(a.src, a.tgt)
    fwd, bwd, sym = al.bidirectional_align(corpus, a.iterations, not a.no_null, a.method)
    al.write_pharaoh(f"{a.out}.fwd", fwd)
    al.write_pharaoh(f"{a.out}.bwd", bwd)
    al.write_pharaoh(a.out, sym)
    log.info("wrote %s (%s) and directional alignments", a.out, a.method)


def reorderings_from_alignments(src_path, align_path):
    require_files(src_path, align_path)
    sources = read_lines(src_path)
    n_align = sum(1 for _ in open(align_path, encoding="utf-8"))
    if n_align != len(sources):
        raise DataError(f"{align_path} has {n_align} lines but {src_path} has {len(sources)}")
    alignments = al.read_pharaoh(align_path, [(len(s), None) for s in sources])
    return sources, [alignment_to_reordering(x) for x in alignments]


def cmd_reorder(a):
    sources, perms = reorderings_from_alignments(a.src, a.alignments)
    write_permutations(a.out_perm, perms)
    if a.out_text:
        with open(a.out_text, "w", encoding="utf-8") as fh:
            for toks, r in zip(sources, perms):
                fh.write(" ".join(_reorder_words(toks, r)) + "\n")


def _reorder_words(toks, r: Reordering):
    out = [""] * r.n
    for i, rank in enumerate(r.perm):
        out[rank - 1] = toks[i]
    return out


def _reorderings(strategy, perm_path, align_path, src_path, corpus):
    if strategy == "oracle":
        if perm_path is None:
            raise UsageError("--reorder-strategy oracle needs --perm")
        require_files(perm_path)
        perms = read_permutations(perm_path)
    elif strategy == "alignment":
        if align_path is None:
            raise UsageError("--reorder-strategy alignment needs --alignments")
        _, perms = reorderings_from_alignments(src_path, align_path)
    else:
        perms = [Reordering.identity(len(s)) for s in corpus.sources]
    if len(perms) != len(corpus):
        raise DataError(f"{len(perms)} reorderings for {len(corpus)} sentence pairs")
    for k, (r, s) in enumerate(zip(perms, corpus.sources)):
        if r.n != len(s):
            raise DataError(f"reordering {k + 1} has length {r.n}, sentence has {len(s)}")
    return perms


def cmd_train(a):
    if a.encoder in ("rl3", "ri2") and a.reorder_strategy is None:
        raise UsageError(f"--encoder {a.encoder} needs --reorder-strategy")
    corpus = _load_corpus(a.src, a.tgt, a.min_count)
    perms = dev = dev_perms = None
    if a.reorder_strategy is not None:
        perms = _reorderings(a.reorder_strategy, a.perm, a.alignments, a.src, corpus)
    if a.dev_src or a.dev_tgt:
        dev = _load_corpus(a.dev_src, a.dev_tgt, source_vocab=corpus.source_vocab,
                           target_vocab=corpus.target_vocab)
        if a.encoder in ("rl3", "ri2"):
            dev_strategy = "oracle" if a.dev_perm else "identity"
            dev_perms = _reorderings(dev_strategy, a.dev_perm, None, a.dev_src, dev)
    hp = HyperParams(len(corpus.source_vocab), len(corpus.target_vocab), a.d_emb, a.d_h, a.d_a,
                     a.d_out, a.encoder, a.max_decode_len, a.own_word_states)
    opt = OptConfig(a.lr, a.epochs, a.batch_size, a.clip, a.optimizer, a.seed, a.target_loss)
    log.info("training %s seed=%d", a.encoder, a.seed)
    try:
        model, res = train_model(corpus, hp, opt, perms, dev, dev_perms)
    except TrainingDiverged as e:
        bad = Path(f"{a.model}.last-good")
        save_model(Model(hp, e.checkpoint, corpus.source_vocab, corpus.target_vocab), bad)
        log.error("last good checkpoint saved to %s", bad)
        raise
    save_model(model, a.model)
    if a.loss_log:
        write_loss_log(a.loss_log, res.log)
    log.info("best epoch %d; model written to %s", res.best_epoch, a.model)


def cmd_translate(a):
    require_files(a.input, *a.model)
    models = [load_model(p) for p in a.model]
    if any(m.hp.needs_reordering for m in models) and a.reorder_strategy is None:
        raise UsageError("models with a reordered encoder need --reorder-strategy")
    strategy = a.reorder_strategy or "identity"
    v = models[0].source_vocab
    sources = [Sentence.from_tokens(toks, v) for toks in read_lines(a.input)]
    perms = None
    if strategy == "oracle":
        if a.perm is None:
            raise UsageError("--reorder-strategy oracle needs --perm")
        require_files(a.perm)
        perms = read_permutations(a.perm)
        if len(perms) != len(sources):
            raise DataError(f"{len(perms)} permutations for {len(sources)} input lines")
    method = "greedy" if a.beam == 1 else "beam"
    hyps = translate_corpus(models, sources, strategy, perms, method, a.beam)
    with open(a.output, "w", encoding="utf-8") as fh:
        fh.writelines(hypothesis_text(h) + "\n" for h in hyps)


def _read_plain(path):
    with open(path, encoding="utf-8") as fh:
        return [line.split() for line in fh]


def cmd_evaluate(a):
    require_files(a.hyp, a.ref)
    hyps, refs = _read_plain(a.hyp), _read_plain(a.ref)
    b = bleu(hyps, refs, a.smoothing)
    t = ter(hyps, refs)
    line = format_scores(b, t)
    print(line)
    if a.out:
        Path(a.out).write_text(line + "\n", encoding="utf-8")
    if a.sidecar:
        with open(a.sidecar, "w", encoding="utf-8") as fh:
            json.dump({"bleu": b.as_dict(), "ter": t.as_dict()}, fh, indent=1, sort_keys=True)


def cmd_ablation(a):
    from .ablation import AblationConfig, markdown_table, run_ablation
    opt = OptConfig(a.lr, a.epochs, a.batch_size, a.clip, a.optimizer, a.seed)
    cfg = AblationConfig(a.n_train, a.n_test, a.vocab_size, a.max_len, a.rule, a.seed,
                         a.train_reorder, a.test_reorder, a.iterations, a.method,
                         a.d_emb, a.d_h, a.d_a, a.d_out, opt, figures=not a.no_figures)
    rows = run_ablation(cfg, a.out_dir)
    sys.stdout.write(markdown_table(rows))


# -- parser --------------------------------------------------------------------

def _model_flags(p, epochs=30, lr=0.5, optimizer="sgd", batch_size=32):
    g = p.add_argument_group("model")
    g.add_argument("--d-emb", type=int, default=32)
    g.add_argument("--d-h", type=int, default=32)
    g.add_argument("--d-a", type=int, default=32)
    g.add_argument("--d-out", type=int, default=32)
    g = p.add_argument_group("optimisation")
    g.add_argument("--epochs", type=int, default=epochs)
    g.add_argument("--lr", type=float, default=lr)
    g.add_argument("--batch-size", type=int, default=batch_size)
    g.add_argument("--clip", type=float, default=5.0, help="global gradient-norm clip")
    g.add_argument("--optimizer", choices=("sgd", "adam"), default=optimizer)
    g.add_argument("--seed", type=int, default=0)


def build_parser() -> Parser:
    ap = Parser(prog="reonmt", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", help="key=value file of flag defaults; command-line flags win")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=Parser)

    p = sub.add_parser("synth", help="generate a synthetic parallel corpus")
    p.add_argument("--n-pairs", type=int, default=1000)
    p.add_argument("--vocab-size", type=int, default=50)
    p.add_argument("--max-len", type=int, default=10)
    p.add_argument("--rule", default="reversal", help="identity, reversal or verb_final")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-prefix", required=True,
                   help="writes PREFIX.src, PREFIX.tgt and PREFIX.perm")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("align", help="IBM Model 1 alignment in both directions plus symmetrization")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--out", required=True, help="symmetrized Pharaoh file; OUT.fwd and OUT.bwd too")
    p.add_argument("--iterations", type=int, default=5)
    p.add_argument("--method", choices=al.SYMMETRIZATIONS, default="gdfa")
    p.add_argument("--no-null", action="store_true", help="disable NULL alignment")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("reorder", help="convert alignments to source permutations")
    p.add_argument("--src", required=True)
    p.add_argument("--alignments", required=True)
    p.add_argument("--out-perm", required=True)
    p.add_argument("--out-text", help="reordered source text")
    p.set_defaults(func=cmd_reorder)

    p = sub.add_parser("train", help="train an encoder-decoder model")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--dev-src")
    p.add_argument("--dev-tgt")
    p.add_argument("--dev-perm", help="dev permutations for reordered encoders")
    p.add_argument("--encoder", choices=VARIANTS, default="base2")
    p.add_argument("--reorder-strategy", choices=("oracle", "alignment", "identity"),
                   help="source of training reorderings (required for rl3/ri2)")
    p.add_argument("--perm", help="permutation file for --reorder-strategy oracle")
    p.add_argument("--alignments", help="Pharaoh file for --reorder-strategy alignment")
    p.add_argument("--own-word-states", action="store_true",
                   help="pair each word with the reordered-layer state of its own rank")
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--max-decode-len", type=int, default=50)
    p.add_argument("--target-loss", type=float, help="stop once training loss drops below this")
    p.add_argument("--model", required=True, help="output model file")
    p.add_argument("--loss-log", help="output epoch/train/dev loss log")
    _model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("translate", help="decode with one model or an ensemble")
    p.add_argument("--model", action="append", required=True, help="repeat for an ensemble")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--reorder-strategy", choices=("identity", "oracle"))
    p.add_argument("--perm", help="permutation file for --reorder-strategy oracle")
    p.add_argument("--beam", type=int, default=1, help="beam size; 1 decodes greedily")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("evaluate", help="corpus BLEU and TER")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--smoothing", choices=("none", "add1"), default="none")
    p.add_argument("--out", help="write the score line here as well")
    p.add_argument("--sidecar", help="JSON with per-order precisions and edit counts")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablation", help="run the encoder-variant grid on synthetic data")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n-train", type=int, default=1000)
    p.add_argument("--n-test", type=int, default=100)
    p.add_argument("--vocab-size", type=int, default=50)
    p.add_argument("--max-len", type=int, default=15)
    p.add_argument("--rule", default="reversal")
    p.add_argument("--train-reorder", choices=("heuristic", "oracle"), default="heuristic")
    p.add_argument("--test-reorder", choices=("oracle", "identity"), default="oracle")
    p.add_argument("--iterations", type=int, default=10, help="Model 1 EM iterations")
    p.add_argument("--method", choices=al.SYMMETRIZATIONS, default="gdfa")
    p.add_argument("--no-figures", action="store_true")
    _model_flags(p, epochs=20, lr=0.005, optimizer="adam", batch_size=20)
    p.set_defaults(func=cmd_ablation)
    ap.subparsers = sub
    return ap


def read_config(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            k, v = line.split("=", 1)
            out[k.strip().lstrip("-").replace("-", "_")] = v.strip()
    return out


def parse_args(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.config:
        require_files(args.config)
        defaults = read_config(args.config)
        sp = ap.subparsers.choices[args.command]
        known = {a.dest: a for a in sp._actions}
        for k, v in defaults.items():
            if k not in known:
                raise UsageError(f"{args.config}: unknown option {k!r} for {args.command}")
            if isinstance(known[k], (argparse._StoreTrueAction, argparse._StoreFalseAction)):
                defaults[k] = v.lower() in ("1", "true", "yes", "on")
        sp.set_defaults(**defaults)
        args = ap.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as e:
        # argparse exits 1 on bad usage and 0 after --help
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    except UsageError as e:
        print(f"reonmt: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:
        print(f"reonmt: {e}", file=sys.stderr)
        return EXIT_DATA
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except UsageError as e:
        print(f"reonmt {args.command}: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingDiverged, NonFiniteLoss, FloatingPointError) as e:
        print(f"reonmt {args.command}: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, CorpusError, al.AlignmentError, ReorderError, ModelFormatError,
            EnsembleError, MetricError, OSError, ValueError) as e:
        print(f"reonmt {args.command}: {e}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
