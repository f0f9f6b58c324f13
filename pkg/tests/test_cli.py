import os

import pytest

from pairgru.cli import main, parse_config_file

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
MINI_PPDB = os.path.join(DATA_DIR, "mini_ppdb.txt")
MINI_VECTORS = os.path.join(DATA_DIR, "mini_vectors.txt")

WORDS = list("abcdefgh")
TRAIN_PAIRS = [("a b", "c d"), ("b c", "d e"), ("e f", "g h"),
               ("a c", "b d"), ("c e", "d f"), ("f g", "h a")]
DEV_PAIRS = [("a d", "b e"), ("g e", "h f")]

FAST_FLAGS = ["--k", "1", "--epochs", "2", "--hidden-dim", "4", "--embed-dim", "3",
              "--batch-size", "4", "--dropout", "0", "--patience", "5",
              "--deterministic"]


def write_corpus(tmp_path, poison_word=None):
    emb = tmp_path / "vectors.txt"
    lines = []
    for i, w in enumerate(WORDS):
        if w == poison_word:
            lines.append(f"{w} nan 0.0 0.0")
        else:
            lines.append(f"{w} {0.1 * (i + 1):.2f} {0.2 * (i + 1):.2f} {-0.1 * i:.2f}")
    emb.write_text("\n".join(lines) + "\n", encoding="utf-8")
    data = tmp_path / "splits"
    data.mkdir()
    for name, pairs in (("train", TRAIN_PAIRS), ("dev", DEV_PAIRS)):
        body = "".join(f"{p1}\t{p2}\n" for p1, p2 in pairs)
        (data / f"{name}.tsv").write_text(body, encoding="utf-8")
    return str(emb), str(data)


def read_manifest(path):
    entries = {}
    for line in open(path, encoding="utf-8"):
        key, _, value = line.rstrip("\n").partition("=")
        entries[key] = value
    return entries


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.startswith("pairgru ")


def test_missing_command_is_a_usage_error():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


# ---- prepare ----

def test_prepare_writes_splits_and_report(tmp_path, capsys):
    out = tmp_path / "prepared"
    code = main(["prepare", "--ppdb", MINI_PPDB, "--embeddings", MINI_VECTORS,
                 "--out", str(out)])
    assert code == 0
    report = read_manifest(out / "filter_report.txt")
    assert report == {"input_pairs": "10", "identical": "1", "non_letter": "2",
                      "out_of_vocab": "1", "both_single": "1", "duplicates": "2",
                      "kept": "3"}
    split_rows = []
    for name in ("train", "dev", "test"):
        rows = (out / f"{name}.tsv").read_text(encoding="utf-8").splitlines()
        split_rows.extend(rows)
    assert len(split_rows) == 3
    assert sorted(r.split("\t")[0] for r in split_rows) == \
        ["big dog", "big dog", "the man"]
    manifest = read_manifest(out / "run_manifest.txt")
    assert manifest["command"] == "prepare"
    assert manifest["config.seed"] == "0"
    assert len(manifest["input.ppdb"]) == 16
    stdout = capsys.readouterr().out
    assert "kept=3" in stdout
    assert "# full-scale reference corpus keeps 406170 pairs" in stdout


def test_prepare_missing_input_is_exit_2(tmp_path):
    assert main(["prepare", "--ppdb", str(tmp_path / "none.txt"),
                 "--embeddings", MINI_VECTORS, "--out", str(tmp_path / "o")]) == 2


# ---- train ----

def test_train_writes_checkpoint_metrics_manifest(tmp_path, capsys):
    emb, data = write_corpus(tmp_path)
    out = tmp_path / "model.ckpt"
    code = main(["train", "--data", data, "--embeddings", emb, "--out", str(out),
                 *FAST_FLAGS])
    assert code == 0
    assert out.exists()
    metrics = (tmp_path / "model.ckpt.metrics.tsv").read_text(encoding="utf-8")
    rows = [line.split("\t") for line in metrics.splitlines()]
    assert len(rows) == 2
    assert [r[0] for r in rows] == ["0", "1"]
    assert all(len(r) == 5 for r in rows)
    manifest = read_manifest(str(out) + ".manifest.txt")
    assert manifest["command"] == "train"
    assert manifest["config.k_contrasts"] == "1"
    assert manifest["config.max_epochs"] == "2"
    assert {"input.train", "input.dev", "input.embeddings"} <= set(manifest)
    stdout = capsys.readouterr().out
    assert "trained 2 epochs" in stdout
    assert f"checkpoint: {out}" in stdout


def test_train_numeric_abort_keeps_manifest_only(tmp_path, capsys):
    emb, data = write_corpus(tmp_path, poison_word="a")
    out = tmp_path / "model.ckpt"
    code = main(["train", "--data", data, "--embeddings", emb, "--out", str(out),
                 *FAST_FLAGS])
    assert code == 4
    # the run record lands before training starts; no checkpoint is written
    assert os.path.exists(str(out) + ".manifest.txt")
    assert not out.exists()
    assert "numeric abort" in capsys.readouterr().err


def test_train_config_file_and_flag_precedence(tmp_path):
    emb, data = write_corpus(tmp_path)
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nlr = 0.1\nk_contrasts = 1\nhidden_dim = 4\n"
                   "embed_dim = 3\nmax_epochs = 2\ndropout_rate = 0\n"
                   "deterministic = true\n", encoding="utf-8")
    assert parse_config_file(str(cfg))["lr"] == "0.1"
    out = tmp_path / "model.ckpt"
    code = main(["train", "--data", data, "--embeddings", emb, "--out", str(out),
                 "--config", str(cfg), "--lr", "0.2"])
    assert code == 0
    manifest = read_manifest(str(out) + ".manifest.txt")
    assert manifest["config.lr"] == "0.2"
    assert manifest["config.k_contrasts"] == "1"
    assert manifest["input.config"] == manifest["input.config"]


def test_train_bad_config_key_is_exit_2(tmp_path, capsys):
    emb, data = write_corpus(tmp_path)
    cfg = tmp_path / "run.cfg"
    cfg.write_text("learning_rate = 0.1\n", encoding="utf-8")
    code = main(["train", "--data", data, "--embeddings", emb,
                 "--out", str(tmp_path / "m.ckpt"), "--config", str(cfg)])
    assert code == 2
    assert "config error" in capsys.readouterr().err


def test_train_malformed_embeddings_is_exit_3(tmp_path, capsys):
    emb, data = write_corpus(tmp_path)
    bad = tmp_path / "bad.txt"
    bad.write_text("a 0.1 not-a-float 0.3\n", encoding="utf-8")
    code = main(["train", "--data", data, "--embeddings", str(bad),
                 "--out", str(tmp_path / "m.ckpt"), *FAST_FLAGS])
    assert code == 3
    assert "data format error" in capsys.readouterr().err


# ---- eval ----

def test_eval_ranking_baseline_prints_reference(tmp_path, capsys):
    emb, data = write_corpus(tmp_path)
    code = main(["eval", "--baseline", "avg", "--task", "ranking",
                 "--data", os.path.join(data, "train.tsv"), "--embeddings", emb,
                 "--k", "3", "--seed", "1"])
    assert code == 0
    stdout = capsys.readouterr().out
    row = stdout.splitlines()[0].split("\t")
    assert row[0] == "ranking" and row[1] == "avg" and row[2] == "3"
    assert row[3] == str(len(TRAIN_PAIRS))
    assert 0.0 <= float(row[5]) <= 1.0
    assert "# published full-scale reference for ranking/avg: 0.88" in stdout


def test_eval_ckpt_and_pool_and_out(tmp_path, capsys):
    emb, data = write_corpus(tmp_path)
    ckpt = tmp_path / "model.ckpt"
    assert main(["train", "--data", data, "--embeddings", emb, "--out", str(ckpt),
                 *FAST_FLAGS]) == 0
    report = tmp_path / "report.tsv"
    code = main(["eval", "--ckpt", str(ckpt), "--task", "ranking",
                 "--data", os.path.join(data, "dev.tsv"),
                 "--pool", os.path.join(data, "train.tsv"),
                 "--embeddings", emb, "--k", "2", "--seed", "0",
                 "--out", str(report)])
    assert code == 0
    body = report.read_text(encoding="utf-8")
    assert body.startswith("ranking\tgru\t2\t")
    assert read_manifest(str(report) + ".manifest.txt")["config.task"] == "ranking"
    capsys.readouterr()


def test_eval_ckpt_without_embeddings_is_exit_2(tmp_path, capsys):
    emb, data = write_corpus(tmp_path)
    ckpt = tmp_path / "model.ckpt"
    assert main(["train", "--data", data, "--embeddings", emb, "--out", str(ckpt),
                 *FAST_FLAGS]) == 0
    code = main(["eval", "--ckpt", str(ckpt), "--task", "ranking",
                 "--data", os.path.join(data, "dev.tsv")])
    assert code == 2
    assert "config error" in capsys.readouterr().err


def test_eval_random_baseline_without_embeddings(tmp_path, capsys):
    _, data = write_corpus(tmp_path)
    code = main(["eval", "--baseline", "random", "--task", "ranking",
                 "--data", os.path.join(data, "train.tsv"), "--k", "2",
                 "--dim", "8"])
    assert code == 0
    assert capsys.readouterr().out.startswith("ranking\trandom\t2\t")


def test_eval_rejects_wrong_data_arity(tmp_path, capsys):
    emb, data = write_corpus(tmp_path)
    train_tsv = os.path.join(data, "train.tsv")
    code = main(["eval", "--baseline", "avg", "--task", "turney5",
                 "--data", train_tsv, train_tsv, "--embeddings", emb])
    assert code == 2
    code = main(["eval", "--baseline", "avg", "--task", "semeval",
                 "--data", train_tsv, "--embeddings", emb])
    assert code == 2
    capsys.readouterr()


def test_eval_all_oov_is_exit_1(tmp_path, capsys):
    emb, _ = write_corpus(tmp_path)
    pairs = tmp_path / "oov.tsv"
    pairs.write_text("qqq a\tb c\nqqq b\tc d\nqqq c\td e\nqqq d\te f\n",
                     encoding="utf-8")
    code = main(["eval", "--baseline", "avg", "--task", "ranking",
                 "--data", str(pairs), "--embeddings", emb, "--k", "1"])
    assert code == 1
    assert "evaluation failure" in capsys.readouterr().err


def test_eval_semeval_and_turney_rows(tmp_path, capsys):
    emb, _ = write_corpus(tmp_path)
    sem_train = tmp_path / "sem_train.tsv"
    sem_train.write_text("a b\tc d\t1\na b\te f\t0\nc d\tg h\t1\nb c\tf g\t0\n",
                         encoding="utf-8")
    sem_eval = tmp_path / "sem_eval.tsv"
    sem_eval.write_text("a c\tb d\t1\na c\tg h\t0\n", encoding="utf-8")
    code = main(["eval", "--baseline", "sum", "--task", "semeval",
                 "--data", str(sem_train), str(sem_eval), "--embeddings", emb])
    assert code == 0
    out = capsys.readouterr().out
    assert out.startswith("# threshold=")
    assert "\nsemeval\tsum\t-\t2\t0\t" in out

    turney = tmp_path / "turney.tsv"
    turney.write_text("a b\tc\td\te\tf\tg\t0\n" "c d\te\tf\tg\th\ta\t1\n",
                      encoding="utf-8")
    code = main(["eval", "--baseline", "sum", "--task", "turney10",
                 "--data", str(turney), "--embeddings", emb])
    assert code == 0
    assert capsys.readouterr().out.startswith("turney10\tsum\t-\t2\t0\t")


# ---- embed ----

def test_embed_writes_vectors_and_oov_sidecar(tmp_path, capsys):
    emb, data = write_corpus(tmp_path)
    ckpt = tmp_path / "model.ckpt"
    assert main(["train", "--data", data, "--embeddings", emb, "--out", str(ckpt),
                 *FAST_FLAGS]) == 0
    phrases = tmp_path / "phrases.txt"
    phrases.write_text("a b\n\nqqq zzz\nc d e\n", encoding="utf-8")
    out = tmp_path / "embedded.tsv"
    code = main(["embed", "--ckpt", str(ckpt), "--embeddings", emb,
                 "--phrases", str(phrases), "--out", str(out)])
    assert code == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert [l.split("\t")[0] for l in lines] == ["a_b", "c_d_e"]
    vec = [float(v) for v in lines[0].split("\t")[1].split()]
    assert len(vec) == 4
    oov = (tmp_path / "embedded.tsv.oov.txt").read_text(encoding="utf-8")
    assert oov.startswith("qqq zzz\t")
    assert "embedded 2 of 3 phrases" in capsys.readouterr().out


def test_embed_empty_phrase_file_is_exit_2(tmp_path, capsys):
    emb, data = write_corpus(tmp_path)
    ckpt = tmp_path / "model.ckpt"
    assert main(["train", "--data", data, "--embeddings", emb, "--out", str(ckpt),
                 *FAST_FLAGS]) == 0
    phrases = tmp_path / "phrases.txt"
    phrases.write_text("\n", encoding="utf-8")
    code = main(["embed", "--ckpt", str(ckpt), "--embeddings", emb,
                 "--phrases", str(phrases), "--out", str(tmp_path / "e.tsv")])
    assert code == 2
    capsys.readouterr()


# ---- gradcheck ----

def test_gradcheck_passes_and_reports(tmp_path, capsys):
    out = tmp_path / "gradcheck.txt"
    code = main(["gradcheck", "--dims", "4", "--len", "3", "--out", str(out)])
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 3
    assert all(line.endswith("PASS") for line in lines)
    assert out.read_text(encoding="utf-8").splitlines() == lines
    assert read_manifest(str(out) + ".manifest.txt")["command"] == "gradcheck"


def test_gradcheck_corruption_is_exit_1(capsys):
    code = main(["gradcheck", "--dims", "4", "--len", "3", "--corrupt-gradients"])
    assert code == 1
    assert all(line.endswith("FAIL") for line in capsys.readouterr().out.splitlines())


# ---- sweep ----

def test_sweep_writes_grid(tmp_path, capsys):
    emb, data = write_corpus(tmp_path)
    out = tmp_path / "sweep_out"
    code = main(["sweep", "--data", data, "--embeddings", emb, "--out", str(out),
                 "--fractions", "0.5,1.0", "--k-list", "1", "--run-seed", "7",
                 "--eval-k", "2", *FAST_FLAGS])
    assert code == 0
    rows = (out / "sweep.tsv").read_text(encoding="utf-8").splitlines()
    assert len(rows) == 2
    fields = [row.split("\t") for row in rows]
    assert [f[0] for f in fields] == ["0.5", "1.0"]
    assert all(len(f) == 7 for f in fields)
    manifest = read_manifest(out / "run_manifest.txt")
    assert manifest["command"] == "sweep"
    assert manifest["fractions"] == "0.5,1.0"
    assert capsys.readouterr().out.splitlines() == rows
