import json

import pytest

from pathauth.cli import OUTPUT_ENV, main


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--users", "3", "--days", "14", "--seed", "7", "--output-dir", str(out)]) == 0
    return out / "corpus"


def _files(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_synth_is_byte_identical(corpus, tmp_path):
    assert main(["synth", "--users", "3", "--days", "14", "--seed", "7", "--output-dir", str(tmp_path)]) == 0
    assert _files(tmp_path / "corpus") == _files(corpus)


def test_eval_writes_rows(corpus, tmp_path, capsys):
    out = tmp_path / "eval"
    args = ["eval", "--corpus", str(corpus), "--method", "mshmm", "--n", "16", "--r-max", "20", "--max-iters", "10"]
    assert main(args + ["--output-dir", str(out)]) == 0
    rows = (out / "eer.csv").read_text().splitlines()
    assert rows[0] == "user,method,n,r_max,hidden,mode,eer"
    assert sum(r.split(",", 1)[1].startswith("mshmm,16,20,") for r in rows[1:]) == 3
    assert (out / "roc.csv").read_text().startswith("user,method,n,threshold,far,frr\n")
    assert "pooled EER" in (out / "summary.txt").read_text()
    assert "mshmm" in capsys.readouterr().out

    echo = json.loads((out / "config.json").read_text())
    assert echo["command"] == "eval" and echo["n_values"] == [16] and echo["hidden"] == 10

    # the echo reproduces the run
    again = tmp_path / "again"
    assert main(["eval", "--config", str(out / "config.json"), "--output-dir", str(again)]) == 0
    assert (again / "eer.csv").read_bytes() == (out / "eer.csv").read_bytes()


def test_flags_override_config_file(corpus, tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text(f"corpus: {corpus}\nmethods: [sm]\nn_values: [2]\nr_max: 30\n")
    out = tmp_path / "o"
    assert main(["eval", "--config", str(cfg), "--n", "3", "--output-dir", str(out)]) == 0
    lines = (out / "eer.csv").read_text().splitlines()[1:]
    assert lines and all(",sm,3,30,," in line for line in lines)


def test_unknown_config_key(corpus, tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"bogus": 1}')
    assert main(["eval", "--config", str(cfg), "--corpus", str(corpus), "--output-dir", str(tmp_path)]) == 1
    assert "bogus" in capsys.readouterr().err


def test_output_dir_from_environment(corpus, tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    assert main(["cluster", "--corpus", str(corpus), "--export-sequences"]) == 0
    names = sorted(p.name for p in (tmp_path / "env" / "clusters").iterdir())
    assert names == ["user00.model", "user00.seq", "user01.model", "user01.seq", "user02.model", "user02.seq"]
    assert (tmp_path / "env" / "config.json").exists()


def test_train_and_score(corpus, tmp_path, capsys):
    assert main(["train", "--corpus", str(corpus), "--method", "mc,mshmm", "--max-iters", "5", "--output-dir", str(tmp_path)]) == 0
    model = tmp_path / "models" / "user01.mshmm.model"
    trace = corpus / "user01.csv"
    capsys.readouterr()
    assert main(["score", "--model", str(model), "--trace", str(trace), "--n", "4", "--output-dir", str(tmp_path)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "start,method,n,score" and len(lines) > 10
    assert all(",mshmm,4," in line for line in lines[1:])


def test_score_oversized_window(corpus, tmp_path, capsys):
    main(["train", "--corpus", str(corpus), "--method", "sm", "--output-dir", str(tmp_path)])
    capsys.readouterr()
    model = tmp_path / "models" / "user00.sm.model"
    code = main(["score", "--model", str(model), "--trace", str(corpus / "user00.csv"), "--n", "100000", "--output-dir", str(tmp_path)])
    captured = capsys.readouterr()
    assert code == 0
    assert captured.out == ""
    assert "nothing to score" in captured.err


@pytest.mark.parametrize(
    "argv",
    [
        ["eval", "--corpus", "/nonexistent/corpus"],
        ["eval", "--method", "nope"],
        ["score", "--model", "/nonexistent.model", "--trace", "x.csv"],
    ],
)
def test_errors_exit_nonzero(argv, tmp_path, corpus, capsys):
    if "--corpus" not in argv and argv[0] == "eval":
        argv = argv + ["--corpus", str(corpus)]
    assert main(argv + ["--output-dir", str(tmp_path)]) != 0
    assert "error" in capsys.readouterr().err


def test_weekly_split_short_corpus(corpus, tmp_path, capsys):
    assert main(["eval", "--corpus", str(corpus), "--split", "weekly", "--output-dir", str(tmp_path)]) == 1
    assert "need >= 2 users" in capsys.readouterr().err


def test_unknown_flag():
    with pytest.raises(SystemExit) as exc:
        main(["eval", "--bogus"])
    assert exc.value.code != 0
