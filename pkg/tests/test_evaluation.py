from datetime import datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathauth.evaluation import (
    CSV_COLUMNS,
    InsufficientDataError,
    ScoreSet,
    chronological_split,
    compute_eer,
    make_windows,
    run_benchmark,
    weekly_split,
)
from pathauth.observations import ObservationSequence
from pathauth.pipeline import PipelineConfig
from pathauth.synth import default_config, synth_generate
from pathauth.verifiers.hmm import forward_windows, random_model

MONDAY = datetime(2016, 3, 7)


def seq_of(n, start=MONDAY, step=timedelta(hours=1)):
    return ObservationSequence("u", np.arange(n) % 7, [start + k * step for k in range(n)])


class TestWindows:
    @pytest.mark.parametrize("length, n, stride, count", [(5, 2, 1, 4), (5, 5, 1, 1), (4, 5, 1, 0), (10, 3, 2, 4), (1, 1, 1, 1)])
    def test_counts(self, length, n, stride, count):
        w = make_windows(np.arange(length), n, stride)
        assert w.shape == (count, n)

    def test_contents(self):
        w = make_windows(seq_of(5), 3)
        assert w.tolist() == [[0, 1, 2], [1, 2, 3], [2, 3, 4]]

    def test_bad_n(self):
        with pytest.raises(ValueError):
            make_windows(np.arange(3), 0)


class TestSplits:
    def test_chronological(self):
        train, test = chronological_split(seq_of(10), 0.7)
        assert (len(train), len(test)) == (7, 3)
        assert train.timestamps[-1] < test.timestamps[0]

    def test_chronological_edges(self):
        seq = seq_of(10)
        assert len(chronological_split(seq, 1.0)[1]) == 0
        assert len(chronological_split(seq, 0.0)[0]) == 0
        assert len(chronological_split(seq_of(7), 0.7)[0]) == 4  # floor(4.9)

    def _weeks(self):
        return seq_of(6 * 7 * 2, step=timedelta(hours=12))  # six full weeks

    def test_weekly(self):
        seq = self._weeks()
        train, test = weekly_split(seq, 4, 6)
        assert {(ts - MONDAY).days // 7 + 1 for ts in train.timestamps} == {2, 3, 4, 5}
        assert {(ts - MONDAY).days // 7 + 1 for ts in test.timestamps} == {6}

    def test_weekly_single_week(self):
        train, _ = weekly_split(self._weeks(), 1, 6)
        assert {(ts - MONDAY).days // 7 + 1 for ts in train.timestamps} == {5}

    def test_weekly_short_user(self):
        with pytest.raises(InsufficientDataError):
            weekly_split(seq_of(5 * 7 * 2, step=timedelta(hours=12)), 5, 6)


class TestEER:
    def test_perfect_separation(self):
        assert compute_eer([1.0] * 4, [0.0] * 5).eer == 0.0

    def test_chance(self):
        assert compute_eer([1.0, 2.0], [2.0, 1.0]).eer == 0.5
        assert compute_eer([0.3] * 3, [0.3] * 3).eer == 0.5

    def test_hand_example(self):
        assert compute_eer(ScoreSet([0.9, 0.8, 0.4], [0.6, 0.3, 0.2])).eer == 1 / 3

    def test_empty(self):
        with pytest.raises(ValueError, match="insufficient scores"):
            compute_eer([], [0.1])
        with pytest.raises(ValueError, match="insufficient scores"):
            compute_eer([0.1], [])

    def test_monotone_transforms(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            g = rng.normal(1.0, 1.0, size=rng.integers(1, 40))
            imp = rng.normal(0.0, 1.0, size=rng.integers(1, 40))
            base = compute_eer(g, imp).eer
            for f in (np.exp, np.arctan, lambda x: 3 * x - 7, lambda x: x**3):
                assert abs(compute_eer(f(g), f(imp)).eer - base) <= 1e-12

    @settings(max_examples=100)
    @given(
        st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=30, unique=True),
        st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=30, unique=True),
    )
    def test_swap_and_negate(self, g, imp):
        if set(g) & set(imp):
            return
        a = compute_eer(g, imp).eer
        b = compute_eer(-np.asarray(imp), -np.asarray(g)).eer
        assert a == pytest.approx(b, abs=1e-12)
        assert 0.0 <= a <= 1.0

    @given(st.lists(st.integers(0, 5), min_size=1, max_size=30), st.lists(st.integers(0, 5), min_size=1, max_size=30))
    def test_roc_monotone(self, g, imp):
        roc = compute_eer(g, imp).roc
        assert np.all(np.diff(roc[:, 0]) > 0)
        assert np.all(np.diff(roc[:, 1]) <= 0)
        assert np.all(np.diff(roc[:, 2]) >= 0)
        assert roc[-1, 1] == 0.0 and roc[-1, 2] == 1.0

    def test_length_normalization_does_not_change_eer(self):
        model = random_model(3, 6, seed=1)
        rng = np.random.default_rng(2)
        g = rng.integers(0, 3, size=(40, 8))
        imp = rng.integers(0, 6, size=(60, 8))
        raw = compute_eer(forward_windows(model, g), forward_windows(model, imp)).eer
        norm = compute_eer(model.score_windows(g), model.score_windows(imp)).eer
        assert raw == norm


@pytest.fixture(scope="module")
def small_corpus():
    return synth_generate(default_config(3, seed=1, days=14))


SMALL = dict(n_values=[1, 4], max_iters=15, hidden=3)


class TestBenchmark:
    def test_single_user(self, small_corpus):
        with pytest.raises(ValueError, match="need >= 2 users"):
            run_benchmark(small_corpus[:1], PipelineConfig(**SMALL))

    def test_rows_and_csv(self, small_corpus):
        report = run_benchmark(small_corpus, PipelineConfig(**SMALL))
        header, *lines = report.to_csv().splitlines()
        assert header == ",".join(CSV_COLUMNS)
        assert len(lines) == 3 * 4 * 2
        assert any(line.startswith("user00,mshmm,4,20,3,marginal,") for line in lines)
        assert any(line.startswith("user01,sm,1,20,,,") for line in lines)
        for row in report.rows:
            assert 0.0 <= row.eer <= 1.0
        assert report.pooled("mshmm", 4) == pytest.approx(np.mean([r.eer for r in report.rows if r.method == "mshmm" and r.n == 4]))
        assert "pooled EER" in report.summary()

    def test_deterministic_and_worker_independent(self, small_corpus):
        cfg = PipelineConfig(methods=["mc", "mshmm"], **SMALL)
        a = run_benchmark(small_corpus, cfg).to_csv()
        b = run_benchmark(small_corpus, cfg).to_csv()
        c = run_benchmark(small_corpus, cfg, workers=2).to_csv()
        assert a == b == c

    def test_weekly_excludes_short_users(self, small_corpus, caplog):
        longer = synth_generate(default_config(2, seed=1, days=21))
        corpus = {"short": small_corpus[0]} | {t.user_id: t for t in longer}
        report = run_benchmark(corpus, PipelineConfig(methods=["sm"], split="weekly", train_weeks=2, eval_week=3, n_values=[1]))
        assert report.excluded == ["short"]
        assert report.users() == ["user00", "user01"]
        assert "short excluded" in caplog.text

    def test_weekly_all_too_short(self, small_corpus):
        with pytest.raises(ValueError):
            run_benchmark(small_corpus, PipelineConfig(methods=["sm"], split="weekly", n_values=[1]))
