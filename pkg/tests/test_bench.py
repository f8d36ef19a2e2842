import json

import numpy as np
import pytest

from tsexplain.bench import (
    RecoveryReport,
    distort_region,
    exemplar_family,
    occlusion_recovery_bench,
    quasi_periodic,
    run_benchmark,
    tally,
    TrialOutcome,
)
from tsexplain.config import OPERATOR_NAMES, Config
from tsexplain.io import validate_document

SMALL = dict(window=32, bench_n=800, bench_n_train=400, bench_trials_per_class=3)


@pytest.fixture(scope="module")
def family():
    return exemplar_family(40, 128, np.random.default_rng(0))


class TestRecoveryReport:
    def test_fractions(self):
        rep = RecoveryReport(4, ["Spike"] * 4, [10, 20, 5, 0], [4, 8, 3, 0],
                             [11, 30, 5, 7], [4, 8, 9, 1])
        assert list(rep.location_error) == [1, 10, 0, 7]
        # the zero-length row has no location to recover
        assert rep.location_within(3) == pytest.approx(2 / 3)
        assert rep.length_within(3) == 0.75
        assert rep.zero_length_recovered() == 1.0
        assert rep.histograms()["length"] == {0: 2, 1: 1, 6: 1}

    def test_nan_without_rows(self):
        rep = RecoveryReport(1, ["Spike"], [3], [2], [3], [2])
        assert np.isnan(rep.zero_length_recovered())


class TestOcclusionBench:
    def test_length_zero_trial(self, family):
        # find a seed whose single trial draws an empty region. The literal
        # score gives a one-sample edge occlusion no scale penalty, so any end
        # residual above about 2 rms / sqrt(m) picks length 1 over length 0
        seed = next(s for s in range(200)
                    if occlusion_recovery_bench(family, 1, seed=s).true_length[0] == 0)
        rep = occlusion_recovery_bench(family, 1, seed=seed)
        assert rep.found_length == [0]

    def test_spike_only_family(self, family):
        rep = occlusion_recovery_bench(family, 200, seed=3, kinds=("Spike",))
        assert rep.location_within(3) >= 0.9

    def test_small_magnitude_degrades(self, family):
        weak = occlusion_recovery_bench(family, 100, seed=5, magnitude=(0.1, 0.1))
        strong = occlusion_recovery_bench(family, 100, seed=5, magnitude=(6.0, 6.0))
        assert weak.location_within(3) < strong.location_within(3)

    def test_errors(self, family):
        with pytest.raises(ValueError):
            occlusion_recovery_bench(family[:1], 5)
        with pytest.raises(ValueError):
            occlusion_recovery_bench(family, 0)

    def test_distort_region(self):
        x = np.sin(np.arange(50) / 4)
        r = np.random.default_rng(0)
        assert np.array_equal(distort_region(x, "Spike", 5, 0, 3.0, r), x)
        d = distort_region(x, "Dropout", 5, 4, 2.0, r) - x
        np.testing.assert_allclose(d[5:9], -2 * x.std())
        assert not d[:5].any() and not d[9:].any()
        with pytest.raises(ValueError):
            distort_region(x, "Glitch", 0, 3, 1.0, r)


class TestSources:
    def test_reproducible(self):
        a = quasi_periodic(500, np.random.default_rng(3))
        b = quasi_periodic(500, np.random.default_rng(3))
        assert np.array_equal(a, b)

    def test_family_shape(self):
        fam = exemplar_family(5, 64, np.random.default_rng(1))
        assert fam.shape == (5, 64)
        assert np.corrcoef(fam)[0, 1] > 0.95


class TestBenchmark:
    @pytest.fixture(scope="class")
    @classmethod
    def report(cls):
        return run_benchmark(Config(**SMALL))

    def test_rows_plus_misses(self, report):
        for row, missed in zip(report.confusion, report.missed_per_class):
            assert sum(row) + missed == report.trials_per_class
        assert report.detected + report.missed == report.trials_per_class * len(report.classes)

    def test_serializations(self, report):
        doc = json.loads(report.to_json())
        validate_document(doc, "bench_report")
        assert doc["config"]["workers"] == 1
        text = report.to_text()
        assert text.splitlines()[0].startswith("injected \\ explained")
        assert "overall accuracy" in text and len(text.splitlines()) == len(report.classes) + 4

    def test_single_operator(self):
        cfg = Config(**SMALL, operators=("LRFlip",), bench_classes=("LRFlip",))
        rep = run_benchmark(cfg)
        j = OPERATOR_NAMES.index("LRFlip")
        assert rep.confusion[0][j] == rep.detected
        assert rep.overall_accuracy == 1.0 or rep.detected == 0

    def test_tally_and_top_confusions(self):
        cfg = Config(**SMALL, bench_classes=("Warp", "Step"))
        outs = [TrialOutcome("Warp", 0, True, "UniformScaling"), TrialOutcome("Warp", 1, True, "Warping"),
                TrialOutcome("Warp", 2, True, "UniformScaling"), TrialOutcome("Step", 0, True, "LinearTrend"),
                TrialOutcome("Step", 1, False), TrialOutcome("Step", 2, True, "PiecewiseNorm")]
        rep = tally(cfg, outs)
        assert rep.top_confusions() == [("Warp", "UniformScaling", 2), ("Step", "LinearTrend", 1)]
        assert rep.overall_accuracy == pytest.approx(2 / 5)
        assert rep.detection_rate == pytest.approx(5 / 6)
        assert rep.per_class_accuracy == [pytest.approx(1 / 3), 0.5]
