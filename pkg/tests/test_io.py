import json
import math
from datetime import datetime

import jsonschema
import numpy as np
import pytest

from tsexplain.config import Config
from tsexplain.detect import find_anomalies, train_threshold
from tsexplain.explain import explain
from tsexplain.io import (
    DataError,
    ExplanationDocument,
    candidates_document,
    load_csv,
    plot_rows,
    validate_document,
    write_csv,
    write_plot_data,
)
from tsexplain.series import TimeSeries


def put(tmp_path, text, name="s.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLoadCSV:
    def test_plain_values(self, tmp_path):
        s = load_csv(put(tmp_path, "1\n2\n3\n"))
        assert list(s.values) == [1.0, 2.0, 3.0] and s.sample_period == 1.0 and s.start_time is None

    def test_fifteen_minutes(self, tmp_path):
        rows = "".join(f"2013-01-23T{h:02d}:{m:02d}:00,{h + m / 60}\n" for h in range(3) for m in (0, 15, 30, 45))
        s = load_csv(put(tmp_path, "time,kw\n" + rows))
        assert s.sample_period == 900.0 and s.start_time == datetime(2013, 1, 23)
        assert len(s) == 12

    def test_nan_row_names_line(self, tmp_path):
        with pytest.raises(DataError, match=r":3: non-finite"):
            load_csv(put(tmp_path, "1\n2\nNaN\n4\n"))

    def test_text_row_names_line(self, tmp_path):
        with pytest.raises(DataError, match=r":4: not a number"):
            load_csv(put(tmp_path, "value\n1\n2\nabc\n"))

    def test_uneven_spacing(self, tmp_path):
        text = "2020-01-01T00:00:00,1\n2020-01-01T00:01:00,2\n2020-01-01T00:02:00,3\n2020-01-01T00:04:00,4\n"
        with pytest.raises(DataError, match=r":4: uneven"):
            load_csv(put(tmp_path, text))

    def test_spacing_tolerance(self, tmp_path):
        text = "2020-01-01T00:00:00,1\n2020-01-01T00:01:00,2\n2020-01-01T00:02:00.500,3\n2020-01-01T00:03:00,4\n"
        assert load_csv(put(tmp_path, text)).sample_period == 60.0

    def test_ragged(self, tmp_path):
        with pytest.raises(DataError, match=r":2: expected 2 columns"):
            load_csv(put(tmp_path, "2020-01-01,1\n2\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_csv(tmp_path / "nope.csv")

    def test_empty(self, tmp_path):
        with pytest.raises(DataError):
            load_csv(put(tmp_path, "\n\n"))

    @pytest.mark.parametrize("timed", [False, True])
    def test_write_read_round_trip(self, tmp_path, rng, timed):
        kw = dict(sample_period=0.25, start_time=datetime(2021, 5, 1, 12)) if timed else {}
        s = TimeSeries(rng.standard_normal(50), **kw)
        write_csv(tmp_path / "o.csv", s)
        back = load_csv(tmp_path / "o.csv")
        assert np.array_equal(back.values, s.values)
        if timed:
            assert back.sample_period == 0.25 and back.start_time == s.start_time


@pytest.fixture(scope="module")
def explained(periodic_source):
    train = TimeSeries(periodic_source[:1000], sample_period=60.0, start_time=datetime(2024, 3, 10))
    a = TimeSeries(periodic_source[1100:1164][::-1], sample_period=60.0, start_time=datetime(2024, 3, 11))
    return explain(a, train, Config(anomaly_check="off"), anomaly_location=100), a, train


class TestDocuments:
    def test_round_trip(self, explained):
        e = explained[0]
        doc = ExplanationDocument.build(e, provenance={"train": "t.csv", "offset": 100})
        back = ExplanationDocument.from_json(doc.to_json())
        assert back == doc
        assert back.operator_kind == "LRFlip"
        assert back.neighbor_timestamp == e.neighbor_timestamp
        validate_document(doc.to_dict(), "explanation")
        assert len(doc.explanation["all_results"]) == 8

    def test_schema_rejects_tampering(self, explained):
        d = ExplanationDocument.build(explained[0]).to_dict()
        del d["text"]
        with pytest.raises(jsonschema.ValidationError):
            ExplanationDocument.from_dict(d)

    def test_candidates(self, periodic_source):
        train, test = periodic_source[:1000], periodic_source[1000:].copy()
        test[200] += 6 * test.std()
        thr = train_threshold(train, 64)
        doc = candidates_document(find_anomalies(test, train, 64, thr), thr, {"test": "x.csv"})
        validate_document(json.loads(json.dumps(doc)), "candidates")
        assert doc["candidates"] and doc["candidates"][0]["length"] == 64

    def test_unknown_schema(self):
        with pytest.raises(ValueError):
            validate_document({}, "nothing")


class TestPlotData:
    def test_columns(self, explained, tmp_path):
        e, a, train = explained
        rows = plot_rows(e, a, train)
        assert rows.shape == (64, 3)
        # the overlay reproduces the winning distance
        assert np.linalg.norm(rows[:, 2] - rows[:, 1]) == pytest.approx(e.best.distance, rel=1e-9)
        write_plot_data(tmp_path / "p.tsv", e, a, train)
        lines = (tmp_path / "p.tsv").read_text().splitlines()
        assert lines[0] == "index\tanomaly\tneighbor\ttransformed" and len(lines) == 65

    def test_distance_operators_leave_blank(self, explained, tmp_path):
        e, a, train = explained
        occ = next(r for r in e.all_results if r.kind.value == "Occlusion")
        e.best = occ
        assert all(math.isnan(v) for v in plot_rows(e, a, train)[:, 2])
