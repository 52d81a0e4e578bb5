"""CLI tests: subcommand plumbing, config resolution and overrides, exit
codes, and the machine-readable error line.
"""

import csv
import json
import os

from switchpe.cli import main
from switchpe.corpus import parse_corpus

TINY = [
    "synth_n=18", "synth_mean_len=5", "synth_len_spread=1",
    "synth_label_rule=random_balanced", "max_len=16",
    "dim=8", "heads=2", "layers=1", "pe_scheme=RELATIVE", "rel_k=2", "p_max=16",
    "cnn_filters=4", "ffn_dim=16", "dropout=0.0",
    "w2v_epochs=1", "w2v_batch_size=256", "batch_size=8", "epochs=1",
]


def settings(out_dir, *extra):
    args = []
    for item in TINY + [f"out_dir={out_dir}"] + list(extra):
        args.extend(["--set", item])
    return args


def test_synth_command_writes_parseable_corpus(tmp_path, capsys):
    out = tmp_path / "corpus.tsv"
    code = main(["synth", "--out", str(out)] + settings(tmp_path / "synth"))
    assert code == 0
    sentences = parse_corpus(out)
    assert len(sentences) == 18
    stdout = capsys.readouterr().out
    assert "wrote 18 sentences" in stdout
    assert os.path.exists(tmp_path / "synth" / "config.json")


def test_train_and_eval_round_trip(tmp_path, capsys):
    run_dir = tmp_path / "run"
    assert main(["train"] + settings(run_dir)) == 0
    stdout = capsys.readouterr().out
    assert "best_dev_weighted_f1" in stdout
    ckpt = run_dir / "best.ckpt"
    assert ckpt.exists()
    assert (run_dir / "training_log.csv").exists()
    assert (run_dir / "metrics.json").exists()

    eval_dir = tmp_path / "eval"
    assert main(["eval", "--ckpt", str(ckpt)] + settings(eval_dir)) == 0
    stdout = capsys.readouterr().out
    assert "wgt f1" in stdout
    payload = json.loads((eval_dir / "metrics.json").read_text())
    assert 0.0 <= payload["weighted_f1"] <= 1.0


def test_config_file_plus_override_precedence(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    values = {item.split("=")[0]: json.loads(item.split("=", 1)[1])
              if item.split("=", 1)[1].replace(".", "").replace("_", "").isdigit()
              else item.split("=", 1)[1] for item in TINY}
    values["out_dir"] = str(tmp_path / "file_run")
    values["epochs"] = 0
    cfg_path.write_text(json.dumps(values))
    override_dir = tmp_path / "override_run"
    code = main(["train", "--config", str(cfg_path), "--set", f"out_dir={override_dir}"])
    assert code == 0
    echoed = json.loads((override_dir / "config.json").read_text())
    assert echoed["out_dir"] == str(override_dir)
    assert echoed["epochs"] == 0


def test_spi_command_emits_indices_and_summary(tmp_path, capsys):
    corpus = tmp_path / "c.tsv"
    corpus.write_text(
        "meta\tx0\tneutral\naap\tHin\nka\tHin\nweather\tEng\nachaa\tHin\n\n"
        "meta\tx1\tpositive\ngood\tEng\nmorning\tEng\n\n")
    out_dir = tmp_path / "spi"
    code = main(["spi", "--set", f"data_path={corpus}", "--set", f"out_dir={out_dir}",
                 "--set", "spi_variant=reset_all"])
    assert code == 0
    with open(out_dir / "spi.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["uid", "position", "surface", "tag", "spi"]
    x0 = [r for r in rows[1:] if r[0] == "x0"]
    assert [r[4] for r in x0] == ["0", "1", "0", "0"]
    summary = (out_dir / "spi_summary.txt").read_text()
    assert "sentences: 2" in summary
    assert "mean_sentence_length: 3.000" in summary
    # monolingual sentence lands in the zero-switch bucket
    assert "  0: 1" in summary
    assert "  2: 1" in summary


def test_spi_parse_error_is_machine_readable(tmp_path, capsys):
    bad = tmp_path / "bad.tsv"
    bad.write_text("meta\tonly_two\n")
    code = main(["spi", "--set", f"data_path={bad}",
                 "--set", f"out_dir={tmp_path / 'out'}"])
    assert code == 1
    err = capsys.readouterr().err.strip()
    payload = json.loads(err)
    assert payload["error"] == "ParseError"
    assert "line 1" in payload["message"]


def test_attn_command_with_inline_tokens(tmp_path):
    run_dir = tmp_path / "run"
    assert main(["train"] + settings(run_dir, "epochs=0")) == 0
    attn_dir = tmp_path / "attn"
    code = main(["attn", "--ckpt", str(run_dir / "best.ckpt"),
                 "--tokens", "mausam/HI lovely/EN hai/HI"]
                + settings(attn_dir))
    assert code == 0
    assert (attn_dir / "attention_layer0_head0.csv").exists()
    assert (attn_dir / "attention_layer0_head1.svg").exists()


def test_ablate_command_tiny_grid(tmp_path, capsys):
    out_dir = tmp_path / "grid"
    code = main(["ablate", "--schemes", "RELATIVE", "--seeds", "0"]
                + settings(out_dir))
    assert code == 0
    stdout = capsys.readouterr().out
    assert "RELATIVE" in stdout
    assert (out_dir / "summary.csv").exists()


def test_unknown_config_key_fails_cleanly(tmp_path, capsys):
    code = main(["train", "--set", "not_a_key=1",
                 "--set", f"out_dir={tmp_path / 'x'}"])
    assert code == 1
    payload = json.loads(capsys.readouterr().err.strip())
    assert payload["error"] == "ConfigError"
    assert "not_a_key" in payload["message"]


def test_malformed_override_fails_cleanly(tmp_path, capsys):
    code = main(["train", "--set", "no_equals_sign"])
    assert code == 1
    payload = json.loads(capsys.readouterr().err.strip())
    assert payload["error"] == "ConfigError"


def test_bad_checkpoint_path_fails_cleanly(tmp_path, capsys):
    code = main(["eval", "--ckpt", str(tmp_path / "missing.ckpt")]
                + settings(tmp_path / "e"))
    assert code == 1
    payload = json.loads(capsys.readouterr().err.strip())
    assert payload["error"] == "FileNotFoundError"
