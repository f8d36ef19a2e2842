import json
import re
import subprocess
import sys
from datetime import datetime, timedelta

import numpy as np
import pytest

from tsexplain.cli import main
from tsexplain.config import Config
from tsexplain.io import load_csv, validate_document, write_csv
from tsexplain.series import TimeSeries


@pytest.fixture
def files(tmp_path, periodic_source):
    train, test = periodic_source[:1000], periodic_source[1000:1400].copy()
    test[150:214] = test[150:214][::-1].copy()
    write_csv(tmp_path / "train.csv", train)
    write_csv(tmp_path / "test.csv", test)
    return tmp_path


def call(*argv):
    return main([str(a) for a in argv])


def run(*argv):
    return subprocess.run([sys.executable, "-m", "tsexplain", *map(str, argv)],
                          capture_output=True, text=True)


def test_explain_reversed_window(files, capsys):
    code = call("explain", "--train", files / "train.csv", "--test", files / "test.csv")
    out = json.loads(capsys.readouterr().out)
    assert code == 0 and out
    best = max(out, key=lambda d: d["candidate"]["score"])
    assert best["explanation"]["best"]["operator_kind"] == "LRFlip"
    for d in out:
        validate_document(d, "explanation")


def test_explain_location_and_plot_data(files, capsys):
    code = call("explain", "--train", files / "train.csv", "--test", files / "test.csv",
                "--location", 150, "--format", "text", "--emit-plot-data", files / "plots")
    text = capsys.readouterr().out
    assert code == 0 and "horizontal reversal" in text
    assert len(list((files / "plots").glob("*.tsv"))) == 1


def test_detect_json(files, capsys):
    assert call("detect", "--train", files / "train.csv", "--test", files / "test.csv") == 0
    doc = json.loads(capsys.readouterr().out)
    validate_document(doc, "candidates")
    assert any(c["location"] <= 150 + 63 and c["location"] + 64 > 150 for c in doc["candidates"])


def test_timestamped_text_has_absolute_time(tmp_path):
    # 15-minute power-style load: a daily cycle plus a one-sample surge
    n = 96 * 14
    r = np.random.default_rng(2)
    day = np.arange(n) % 96
    x = np.sin(2 * np.pi * day / 96) + 0.5 * np.sin(4 * np.pi * day / 96 + 1) + 0.01 * r.standard_normal(n)
    x[96 * 12 + 18] += 3.0
    t0 = datetime(2013, 1, 18)
    write_csv(tmp_path / "train.csv", TimeSeries(x[:96 * 10], sample_period=900.0, start_time=t0))
    write_csv(tmp_path / "test.csv", TimeSeries(x[96 * 10:], sample_period=900.0,
                                                start_time=t0 + timedelta(days=10)))
    res = run("explain", "--train", tmp_path / "train.csv", "--test", tmp_path / "test.csv",
              "--format", "text")
    assert res.returncode == 0, res.stderr
    assert re.search(r"would be like 2013-01-\d\d \d\d:\d\d:\d\d, except for", res.stdout)
    assert re.search(r"Spike at \d\d:\d\d", res.stdout), res.stdout


def test_corrupt_writes_sidecar(files):
    out = files / "bad.csv"
    res = run("corrupt", "--input", files / "train.csv", "--out", out, "--kind", "Step",
              "--location", 100, "--length", 40, "--seed", 3)
    assert res.returncode == 0, res.stderr
    truth = json.loads((files / "bad.csv.truth.json").read_text())
    assert truth["start"] == 100 and truth["spec"]["kind"] == "Step" and truth["spec"]["seed"] == 3
    assert len(load_csv(out)) == 1000


def test_exit_codes(files, tmp_path):
    assert run("explain", "--train", files / "train.csv").returncode == 1
    assert run("frobnicate").returncode == 1
    (tmp_path / "bad.toml").write_text("windw = 3\n")
    assert run("detect", "--train", files / "train.csv", "--test", files / "test.csv",
               "--config", tmp_path / "bad.toml").returncode == 1
    (tmp_path / "nan.csv").write_text("1\nnan\n")
    res = run("detect", "--train", tmp_path / "nan.csv", "--test", files / "test.csv")
    assert res.returncode == 2 and "nan.csv:2" in res.stderr and not res.stdout
    assert run("detect", "--train", tmp_path / "missing.csv", "--test", files / "test.csv").returncode == 2
    res = run("corrupt", "--input", files / "train.csv", "--out", tmp_path / "o.csv", "--kind", "Spike",
              "--location", 990, "--length", 64)
    assert res.returncode == 2


def test_help_lists_defaults():
    res = run("--help")
    assert res.returncode == 0
    for key, value in Config().to_dict().items():
        assert f"{key} = {value!r}" in res.stdout
    bench = run("bench", "--help").stdout
    assert "--workers" in bench and "(default:" in bench


def test_bench_text(tmp_path):
    (tmp_path / "c.toml").write_text("window = 32\nbench_n = 800\nbench_n_train = 400\n"
                                     "bench_classes = [\"LRFlip\", \"UDFlip\"]\n")
    res = run("bench", "--config", tmp_path / "c.toml", "--trials", 2, "--format", "text")
    assert res.returncode == 0, res.stderr
    assert res.stdout.startswith("injected \\ explained") and "overall accuracy" in res.stdout
