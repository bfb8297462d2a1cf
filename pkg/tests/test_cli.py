import json
import subprocess
import sys

import pytest

from reonmt.align import parse_pharaoh
from reonmt.cli import main
from reonmt.reorder import read_permutations


@pytest.fixture
def synth(tmp_path):
    prefix = tmp_path / "c"
    assert main(["synth", "--n-pairs", "12", "--vocab-size", "8", "--max-len", "5",
                 "--seed", "4", "--out-prefix", str(prefix)]) == 0
    return prefix


def test_synth_writes_three_files(synth):
    for ext in ("src", "tgt", "perm"):
        lines = synth.with_suffix(f".{ext}").read_text().splitlines()
        assert len(lines) == 12
    perms = read_permutations(synth.with_suffix(".perm"))
    srcs = synth.with_suffix(".src").read_text().splitlines()
    assert all(r.n == len(s.split()) for r, s in zip(perms, srcs))


def test_synth_unknown_rule_is_data_error(tmp_path):
    assert main(["synth", "--rule", "shuffle", "--out-prefix", str(tmp_path / "x")]) == 2


def test_align_writes_three_files_and_intersection_within_gdfa(synth, tmp_path):
    src, tgt = str(synth.with_suffix(".src")), str(synth.with_suffix(".tgt"))
    for method in ("intersection", "gdfa"):
        assert main(["align", "--src", src, "--tgt", tgt, "--out", str(tmp_path / method),
                     "--method", method, "--iterations", "4"]) == 0
    inter = (tmp_path / "intersection").read_text().splitlines()
    gdfa = (tmp_path / "gdfa").read_text().splitlines()
    assert len(inter) == len(gdfa) == 12
    assert (tmp_path / "gdfa.fwd").exists() and (tmp_path / "gdfa.bwd").exists()
    srcs = synth.with_suffix(".src").read_text().splitlines()
    tgts = synth.with_suffix(".tgt").read_text().splitlines()
    for a, b, s, t in zip(inter, gdfa, srcs, tgts):
        n, m = len(s.split()), len(t.split())
        assert parse_pharaoh(a, n, m).links <= parse_pharaoh(b, n, m).links


def test_align_toy_corpus(tmp_path):
    (tmp_path / "s").write_text("a b\nb\n")
    (tmp_path / "t").write_text("x y\ny\n")
    assert main(["align", "--src", str(tmp_path / "s"), "--tgt", str(tmp_path / "t"),
                 "--out", str(tmp_path / "a")]) == 0
    assert len((tmp_path / "a").read_text().splitlines()) == 2


def test_missing_file_names_path(tmp_path, capsys):
    (tmp_path / "s").write_text("a\n")
    missing = tmp_path / "nope.tgt"
    code = main(["align", "--src", str(tmp_path / "s"), "--tgt", str(missing),
                 "--out", str(tmp_path / "a")])
    assert code == 2
    assert str(missing) in capsys.readouterr().err


def test_line_count_mismatch_is_data_error(tmp_path, capsys):
    (tmp_path / "s").write_text("a\nb\nc\n")
    (tmp_path / "t").write_text("x\ny\n")
    assert main(["align", "--src", str(tmp_path / "s"), "--tgt", str(tmp_path / "t"),
                 "--out", str(tmp_path / "a")]) == 2
    err = capsys.readouterr().err
    assert "3" in err and "2" in err


def reorder(tmp_path, src, align):
    (tmp_path / "s").write_text(src)
    (tmp_path / "a").write_text(align)
    code = main(["reorder", "--src", str(tmp_path / "s"), "--alignments", str(tmp_path / "a"),
                 "--out-perm", str(tmp_path / "p"), "--out-text", str(tmp_path / "r")])
    return code


def test_reorder_crossing_example(tmp_path):
    assert reorder(tmp_path, "a b\n", "0-1 1-0\n") == 0
    assert (tmp_path / "p").read_text() == "2 1\n"
    assert (tmp_path / "r").read_text() == "b a\n"


def test_reorder_monotone_and_empty_line_are_identity(tmp_path):
    assert reorder(tmp_path, "a b c\nd e\n", "0-0 1-1 2-2\n\n") == 0
    assert (tmp_path / "p").read_text() == "1 2 3\n1 2\n"
    assert (tmp_path / "r").read_text() == "a b c\nd e\n"


def test_reorder_count_mismatch(tmp_path, capsys):
    assert reorder(tmp_path, "a b\nc\n", "0-0\n") == 2
    err = capsys.readouterr().err
    assert "1 lines" in err and "has 2" in err


def test_reorder_bad_link_is_data_error(tmp_path):
    assert reorder(tmp_path, "a b\n", "0-0 5-1\n") == 2


def train_args(synth, tmp_path, name, *extra):
    return ["train", "--src", str(synth.with_suffix(".src")), "--tgt", str(synth.with_suffix(".tgt")),
            "--d-emb", "6", "--d-h", "6", "--d-a", "6", "--d-out", "6", "--epochs", "3",
            "--batch-size", "4", "--model", str(tmp_path / f"{name}.bin"),
            "--loss-log", str(tmp_path / f"{name}.log"), *extra]


def test_rl3_without_strategy_is_usage_error(synth, tmp_path, capsys):
    assert main(train_args(synth, tmp_path, "m", "--encoder", "rl3")) == 1
    assert "--reorder-strategy" in capsys.readouterr().err


def test_oracle_strategy_without_perm_is_usage_error(synth, tmp_path):
    assert main(train_args(synth, tmp_path, "m", "--encoder", "rl3",
                           "--reorder-strategy", "oracle")) == 1


def test_bad_flag_is_usage_error(capsys):
    assert main(["train", "--bogus"]) == 1
    assert main([]) == 1


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "translate" in capsys.readouterr().out


def test_train_translate_evaluate_pipeline(synth, tmp_path, capsys):
    perm = str(synth.with_suffix(".perm"))
    assert main(train_args(synth, tmp_path, "base")) == 0
    assert main(train_args(synth, tmp_path, "rl3", "--encoder", "rl3",
                           "--reorder-strategy", "oracle", "--perm", perm)) == 0
    log = (tmp_path / "rl3.log").read_text().splitlines()
    assert len(log) == 3 and log[0].count("\t") == 2
    src = str(synth.with_suffix(".src"))
    assert main(["translate", "--model", str(tmp_path / "base.bin"), "--model", str(tmp_path / "rl3.bin"),
                 "--input", src, "--output", str(tmp_path / "hyp"),
                 "--reorder-strategy", "oracle", "--perm", perm, "--beam", "2"]) == 0
    assert len((tmp_path / "hyp").read_text().split("\n")) == 13
    capsys.readouterr()
    assert main(["evaluate", "--hyp", str(tmp_path / "hyp"), "--ref", str(synth.with_suffix(".tgt")),
                 "--smoothing", "add1", "--out", str(tmp_path / "score"),
                 "--sidecar", str(tmp_path / "score.json")]) == 0
    line = capsys.readouterr().out.strip()
    assert line.startswith("BLEU=") and " TER=" in line
    assert (tmp_path / "score").read_text().strip() == line
    side = json.loads((tmp_path / "score.json").read_text())
    assert len(side["bleu"]["precisions"]) == 4
    assert {"insertions", "deletions", "substitutions", "shifts"} <= set(side["ter"])


def test_translate_reordered_model_needs_strategy(synth, tmp_path):
    perm = str(synth.with_suffix(".perm"))
    assert main(train_args(synth, tmp_path, "ri2", "--encoder", "ri2",
                           "--reorder-strategy", "oracle", "--perm", perm)) == 0
    assert main(["translate", "--model", str(tmp_path / "ri2.bin"), "--input",
                 str(synth.with_suffix(".src")), "--output", str(tmp_path / "h")]) == 1


def test_alignment_strategy(synth, tmp_path):
    src, tgt = str(synth.with_suffix(".src")), str(synth.with_suffix(".tgt"))
    assert main(["align", "--src", src, "--tgt", tgt, "--out", str(tmp_path / "al")]) == 0
    assert main(train_args(synth, tmp_path, "m", "--encoder", "rl3", "--reorder-strategy",
                           "alignment", "--alignments", str(tmp_path / "al"))) == 0


def test_same_seed_identical_outputs(synth, tmp_path):
    outs = []
    for k in (1, 2):
        assert main(train_args(synth, tmp_path, f"m{k}", "--seed", "7")) == 0
        assert main(["translate", "--model", str(tmp_path / f"m{k}.bin"),
                     "--input", str(synth.with_suffix(".src")), "--output", str(tmp_path / f"h{k}")]) == 0
        outs.append(((tmp_path / f"m{k}.bin").read_bytes(), (tmp_path / f"h{k}").read_bytes(),
                     (tmp_path / f"m{k}.log").read_bytes()))
    assert outs[0] == outs[1]


def test_corrupt_model_is_data_error(synth, tmp_path):
    (tmp_path / "bad.bin").write_bytes(b"NOPE" + b"\0" * 20)
    assert main(["translate", "--model", str(tmp_path / "bad.bin"),
                 "--input", str(synth.with_suffix(".src")), "--output", str(tmp_path / "h")]) == 2


def test_config_file_sets_defaults_and_flags_win(synth, tmp_path):
    cfg = tmp_path / "cfg"
    cfg.write_text("# training defaults\nepochs = 2\nd-h = 5\n")
    args = train_args(synth, tmp_path, "m")
    assert main(["--config", str(cfg)] + [a for a in args if a not in ("--epochs", "3")]) == 0
    assert len((tmp_path / "m.log").read_text().splitlines()) == 2
    assert main(["--config", str(cfg)] + args) == 0
    assert len((tmp_path / "m.log").read_text().splitlines()) == 3


def test_config_unknown_key(synth, tmp_path):
    cfg = tmp_path / "cfg"
    cfg.write_text("colour = blue\n")
    assert main(["--config", str(cfg)] + train_args(synth, tmp_path, "m")) == 1


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "reonmt.cli", "synth", "--n-pairs", "3",
                        "--vocab-size", "6", "--max-len", "4",
                        "--out-prefix", str(tmp_path / "x")], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "x.src").exists()


def test_small_ablation_emits_rows_and_figures(tmp_path, capsys):
    out = tmp_path / "abl"
    assert main(["ablation", "--out-dir", str(out), "--n-train", "30", "--n-test", "6",
                 "--vocab-size", "8", "--max-len", "5", "--iterations", "3",
                 "--d-emb", "6", "--d-h", "6", "--d-a", "6", "--d-out", "6",
                 "--epochs", "2", "--batch-size", "10"]) == 0
    table = capsys.readouterr().out
    body = [line for line in table.splitlines() if line.startswith("|")][2:]
    assert len(body) == 5
    assert "Ensemble" in body[-1]
    rows = (out / "results.tsv").read_text().splitlines()
    assert len(rows) == 6
    for fig in ("scores.png", "loss.png"):
        assert (out / fig).stat().st_size > 0
    assert (out / "results.md").read_text() == table
