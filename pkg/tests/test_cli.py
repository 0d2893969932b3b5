import csv
import json
import subprocess
import sys

import pytest

from repute.cli import main
from repute.report import load_structured

from conftest import fine_corpus, polarity_corpus, write_csv


def run(argv, capsys):
    """Run the CLI in-process; return (exit code, stdout, stderr)."""
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


def error_line(err):
    lines = [l for l in err.splitlines() if l.strip()]
    payload = json.loads(lines[-1])
    assert set(payload) == {"error", "message"} and "\n" not in payload["message"]
    return payload


def labelled_file(path, pairs):
    return write_csv(path, [{"id": str(i), "text": t, "rating": "", "gold_label": l} for i, (t, l) in enumerate(pairs)])


@pytest.fixture
def trained(tmp_path, capsys):
    corpus = labelled_file(tmp_path / "train.csv", polarity_corpus())
    models = tmp_path / "models"
    code, out, _ = run(["train", "--pipeline", "cascade-fusion", str(corpus), "--out", str(models),
                        "--seed", "0"], capsys)
    assert code == 0
    return models


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def test_train_writes_models_and_is_reproducible(tmp_path, capsys):
    corpus = labelled_file(tmp_path / "train.csv", polarity_corpus())
    outs = []
    for name in ("a", "b"):
        code, out, _ = run(["train", "--pipeline", "cascade-fusion", str(corpus), "--out", str(tmp_path / name),
                            "--holdout", "0.25", "--evaluate"], capsys)
        assert code == 0
        summary = json.loads(out.splitlines()[-1])
        assert summary["train_size"] == 45 and summary["test_size"] == 15
        assert summary["nb_accuracy"] >= 0.9
        outs.append(tmp_path / name)
    for f in ("nb.json", "svm.json"):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()


def test_train_toy_corpus(tmp_path, capsys):
    pairs = [("great fun", "positive"), ("loved it", "pos"), ("awful mess", "negative"), ("hated it", "0")]
    corpus = labelled_file(tmp_path / "toy.csv", pairs)
    code, out, _ = run(["train", "--pipeline", "attribute-aggregation", str(corpus), "--out", str(tmp_path)], capsys)
    assert code == 0 and (tmp_path / "nb.json").exists() and not (tmp_path / "svm.json").exists()


def test_train_fine_grained(tmp_path, capsys):
    corpus = labelled_file(tmp_path / "fine.csv", fine_corpus())
    code, out, _ = run(["train", "--pipeline", "fine-grained", str(corpus), "--out", str(tmp_path)], capsys)
    assert code == 0 and json.loads(out)["models"] == {"fine_model": str(tmp_path / "fine.json")}


def test_train_unlabelled_corpus_fails(tmp_path, capsys):
    corpus = write_csv(tmp_path / "u.csv", [{"id": "a", "text": "x", "rating": "5"}])
    code, _, err = run(["train", str(corpus)], capsys)
    assert code != 0 and "label" in error_line(err)["message"]


def test_train_rejects_unknown_label(tmp_path, capsys):
    corpus = labelled_file(tmp_path / "x.csv", [("fine", "meh")])
    code, _, err = run(["train", str(corpus)], capsys)
    assert code == 1 and error_line(err)["error"] == "CliError"


# ---------------------------------------------------------------------------
# reputation
# ---------------------------------------------------------------------------


def worked_example_files(tmp_path):
    rows = [
        {"id": "r1", "text": "a superb film", "rating": "10", "helpful_votes": "100", "date": "2020"},
        {"id": "r2", "text": "a wonderful story", "rating": "10", "helpful_votes": "50", "date": "2010"},
        {"id": "r3", "text": "a brilliant cast", "rating": "10", "helpful_votes": "1", "date": "2000"},
    ]
    ds = write_csv(tmp_path / "movie.csv", rows)
    probs = tmp_path / "probs.txt"
    probs.write_text("r1 0.002 0.998\nr2 0.003 0.997\nr3 0.004 0.996\n")
    return ds, probs


def test_reputation_worked_example(tmp_path, capsys, caplog):
    ds, probs = worked_example_files(tmp_path)
    out_dir = tmp_path / "out"
    code, out, err = run(["reputation", str(ds), "--probabilities", str(probs), "--current-year", "2020",
                          "--out", str(out_dir)], capsys)
    assert code == 0, err
    printed = json.loads(out)
    # exact value 9.4783; the published 9.4767 comes from rounded review scores
    assert printed["reputation"] == pytest.approx(9.4767, abs=2e-3)
    report = load_structured(out_dir / "movie.report.json")
    assert report.result.top_positive[0].review_id == "r1"
    summary = (out_dir / "movie.summary.txt").read_text()
    assert "Reputation: 9.48 / 10" in summary and "RS 0.9993" in summary
    assert "<circle" in (out_dir / "movie.pie.svg").read_text()
    logged = [r.getMessage() for r in caplog.records if "effective config" in r.getMessage()]
    assert len(logged) == 1 and '"pipeline": "attribute-aggregation"' in logged[0]


def test_reputation_reruns_are_byte_identical(tmp_path, capsys):
    ds, probs = worked_example_files(tmp_path)
    for name in ("a", "b"):
        assert run(["reputation", str(ds), "--probabilities", str(probs), "--current-year", "2020",
                    "--out", str(tmp_path / name)], capsys)[0] == 0
    for f in ("movie.report.json", "movie.summary.txt", "movie.pie.svg"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_weighted_table_fragment(tmp_path, capsys):
    # Votes, ages and user stats chosen so H, T, C land on the published components:
    # 748 is the top vote count; log_748(600) = 0.9666828; 65/17 and 1868/199 give the two C values.
    rows = [
        {"id": "1", "text": "x", "rating": "9", "helpful_votes": "748", "date": "2017",
         "user_review_count": "1", "user_helpful_votes": "40"},
        {"id": "2", "text": "x", "rating": "3", "helpful_votes": "10", "date": "2017",
         "user_review_count": "17", "user_helpful_votes": "65"},
        {"id": "3", "text": "x", "rating": "3", "helpful_votes": "10", "date": "2017",
         "user_review_count": "199", "user_helpful_votes": "1868"},
        {"id": "4", "text": "x", "rating": "8", "helpful_votes": "10", "date": "2018",
         "user_review_count": "1", "user_helpful_votes": "40"},
        {"id": "5", "text": "x", "rating": "2", "helpful_votes": "600", "date": "2020",
         "user_review_count": "1", "user_helpful_votes": "3"},
    ]
    ds = write_csv(tmp_path / "product.csv", rows)
    probs = tmp_path / "p.txt"
    probs.write_text("1 0.1 0.9\n2 0.9 0.1\n3 0.9 0.1\n4 0.1 0.9\n5 0.9 0.1\n")
    code, out, err = run(["classify", str(ds), "--pipeline", "credibility", "--probabilities", str(probs),
                          "--current-year", "2020", "--out", str(tmp_path / "scored.csv")], capsys)
    assert code == 0, err
    with open(tmp_path / "scored.csv", newline="") as fh:
        scored = list(csv.DictReader(fh))
    published = [0.9979, 0.91255417, 0.91787905, 0.9186, 0.97481665]
    assert [float(r["RS"]) for r in scored] == pytest.approx(published, abs=1e-6)
    assert [float(r["H"]) for r in scored] == pytest.approx([1, 0.8, 0.8, 0.8, 0.96668280], abs=1e-8)


def test_reputation_empty_dataset_fails(tmp_path, capsys):
    ds = write_csv(tmp_path / "empty.csv", [])
    code, _, err = run(["reputation", str(ds), "--current-year", "2020", "--out", str(tmp_path)], capsys)
    assert code != 0
    payload = error_line(err)
    assert payload["error"] == "ValidationError" and "no reviews" in payload["message"]
    assert not (tmp_path / "empty.report.json").exists()


def test_missing_model_is_actionable(tmp_path, capsys):
    ds, _ = worked_example_files(tmp_path)
    code, _, err = run(["reputation", str(ds), "--pipeline", "cascade-fusion"], capsys)
    assert code == 1
    msg = error_line(err)["message"]
    assert "repute train --pipeline cascade-fusion" in msg


def test_usage_errors_are_json(capsys):
    code, _, err = run(["reputation"], capsys)
    assert code == 2 and error_line(err)["error"] == "UsageError"
    code, _, err = run(["reputation", "x.csv", "--t0", "2"], capsys)
    assert code == 1 and "t0" in error_line(err)["message"]


def test_missing_input_file(tmp_path, capsys):
    code, _, err = run(["reputation", str(tmp_path / "nope.csv")], capsys)
    assert code == 1 and error_line(err)["error"] == "FileNotFoundError"


def test_end_to_end_cascade_with_model_dir(trained, tmp_path, capsys):
    texts = ["superb film loved", "brilliant excellent story", "awful plot hated", "terrible boring scene"]
    rows = [{"id": f"m{i}", "text": t, "rating": r} for i, (t, r) in enumerate(zip(texts, ["9", "8", "2", "6"]))]
    ds = write_csv(tmp_path / "film.csv", rows)
    code, out, err = run(["reputation", str(ds), "--pipeline", "cascade-fusion", "--model-dir", str(trained),
                          "--t0", "0.5", "--out", str(tmp_path / "rep")], capsys)
    assert code == 0, err
    report = load_structured(tmp_path / "rep" / "film.report.json")
    assert report.config["nb_model"].endswith("nb.json") and report.config["t0"] == 0.5
    d = report.result.details
    assert d["n_positive"] + d["n_negative"] == 4
    # classify writes the cascade partition
    code, out, err = run(["classify", str(ds), "--pipeline", "cascade-fusion", "--model-dir", str(trained)], capsys)
    assert code == 0, err
    with open(tmp_path / "film.classified.csv", newline="") as fh:
        labelled = list(csv.DictReader(fh))
    assert [r["predicted_label"] for r in labelled] == ["positive", "positive", "negative", "negative"]
    assert {r["cascade_stage"] for r in labelled} <= {"1", "2", "3"}


def test_classify_fine_grained_labels(tmp_path, capsys):
    corpus = labelled_file(tmp_path / "fine.csv", fine_corpus())
    assert run(["train", "--pipeline", "fine-grained", str(corpus), "--out", str(tmp_path)], capsys)[0] == 0
    rows = [{"id": "a", "text": "masterpiece stunning", "rating": ""}, {"id": "b", "text": "dull flat", "rating": "3"}]
    ds = write_csv(tmp_path / "d.csv", rows)
    out_path = tmp_path / "d.out.csv"
    code, _, err = run(["classify", str(ds), "--pipeline", "fine-grained", "--model-dir", str(tmp_path),
                        "--out", str(out_path)], capsys)
    assert code == 0, err
    with open(out_path, newline="") as fh:
        labelled = list(csv.DictReader(fh))
    assert [r["predicted_label"] for r in labelled] == ["strongly_positive", "weakly_negative"]
    assert sum(float(labelled[0][f"p_{l}"]) for l in
               ("strongly_negative", "weakly_negative", "neutral", "weakly_positive", "strongly_positive")) == \
        pytest.approx(1.0)


# ---------------------------------------------------------------------------
# sweep and report
# ---------------------------------------------------------------------------


def test_sweep_command(trained, tmp_path, capsys):
    paths = []
    for eid, ratings in (("e1", ["9", "8", "2"]), ("e2", ["10", "3", "7"])):
        rows = [{"id": f"{eid}-{i}", "text": t, "rating": r}
                for i, (t, r) in enumerate(zip(["superb loved film", "great story", "awful boring"], ratings))]
        paths.append(str(write_csv(tmp_path / f"{eid}.csv", rows)))
    gt = tmp_path / "gt.csv"
    gt.write_text("entity_id,ground_truth\ne1,7\ne2,6.5\n")
    argv = ["sweep", *paths, "--pipeline", "cascade-fusion", "--model-dir", str(trained),
            "--ground-truth", str(gt), "--out", str(tmp_path / "sw")]
    code, out, err = run(argv, capsys)
    assert code == 0, err
    rows = list(csv.reader((tmp_path / "sw" / "sweep.csv").open()))
    assert len(rows) == 1 + 2 * 19 + 2 + 19 + 1
    assert json.loads(out)["best_t0"] in [i / 100 for i in range(5, 100, 5)]
    first = (tmp_path / "sw" / "sweep.csv").read_bytes()
    assert run(argv, capsys)[0] == 0
    assert (tmp_path / "sw" / "sweep.csv").read_bytes() == first


def test_sweep_requires_ground_truth(tmp_path, capsys):
    ds, _ = worked_example_files(tmp_path)
    code, _, err = run(["sweep", str(ds)], capsys)
    assert code == 1 and "ground-truth" in error_line(err)["message"]
    gt = tmp_path / "gt.csv"
    gt.write_text("entity_id,ground_truth\nother,7\n")
    code, _, err = run(["sweep", str(ds), "--ground-truth", str(gt)], capsys)
    assert code == 1 and "movie" in error_line(err)["message"]


def test_report_command_rerenders(tmp_path, capsys):
    ds, probs = worked_example_files(tmp_path)
    out_dir = tmp_path / "out"
    run(["reputation", str(ds), "--probabilities", str(probs), "--current-year", "2020", "--top-k", "2",
         "--out", str(out_dir)], capsys)
    original = (out_dir / "movie.summary.txt").read_text()
    code, out, _ = run(["report", str(out_dir / "movie.report.json"), "--out", str(tmp_path / "again")], capsys)
    assert code == 0
    assert (tmp_path / "again" / "movie.summary.txt").read_text() == original
    assert (tmp_path / "again" / "movie.pie.svg").read_bytes() == (out_dir / "movie.pie.svg").read_bytes()
    code, _, _ = run(["report", str(out_dir / "movie.report.json"), "--top-k", "0",
                      "--out", str(tmp_path / "k0")], capsys)
    assert "Top positive" not in (tmp_path / "k0" / "movie.summary.txt").read_text()


def test_config_file_and_env(tmp_path, capsys, monkeypatch):
    ds, probs = worked_example_files(tmp_path)
    cfg = tmp_path / "repute.ini"
    cfg.write_text(f"[general]\ncurrent_year = 2020\nprobabilities = {probs}\n\n"
                   "[attribute-aggregation]\nfloor_h = 0.9\n")
    monkeypatch.setenv("REPUTE_CONFIG", str(cfg))
    code, out, err = run(["reputation", str(ds), "--out", str(tmp_path / "o")], capsys)
    assert code == 0, err
    report = load_structured(tmp_path / "o" / "movie.report.json")
    assert report.config["floor_h"] == 0.9
    assert report.result.details["reviews"][2]["H"] == 0.9
    # a flag beats the file
    code, out, err = run(["reputation", str(ds), "--floor-h", "0.5", "--out", str(tmp_path / "p")], capsys)
    assert load_structured(tmp_path / "p" / "movie.report.json").config["floor_h"] == 0.5


def test_timestamp_flag(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("SOURCE_DATE_EPOCH", raising=False)
    ds, probs = worked_example_files(tmp_path)
    run(["reputation", str(ds), "--probabilities", str(probs), "--current-year", "2020",
         "--timestamp", "2024-05-01T00:00:00Z", "--out", str(tmp_path / "t")], capsys)
    assert load_structured(tmp_path / "t" / "movie.report.json").generated_at == "2024-05-01T00:00:00Z"


def test_subprocess_logs_config_and_fails_with_one_json_line(tmp_path):
    ds = write_csv(tmp_path / "empty.csv", [])
    ok_ds, probs = worked_example_files(tmp_path)
    base = [sys.executable, "-m", "repute.cli"]
    ok = subprocess.run(base + ["reputation", str(ok_ds), "--probabilities", str(probs), "--current-year", "2020",
                                "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert ok.returncode == 0 and "effective config" in ok.stderr
    bad = subprocess.run(base + ["--log-level", "ERROR", "reputation", str(ds)], capture_output=True, text=True)
    assert bad.returncode == 1 and bad.stdout == ""
    assert len(bad.stderr.splitlines()) == 1
    assert json.loads(bad.stderr)["error"] == "ValidationError"
