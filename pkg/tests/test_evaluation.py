import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fscalecp.cascade import Cascade
from fscalecp.graph import SocialGraph
from fscalecp.propagation import ThresholdRule
from fscalecp.evaluation import (ExperimentConfig, Row, believable_prefix, classification_metrics,
                                 contagion_states_experiment, evaluation_universe, job_seed, n_observed,
                                 precision_at, process_prediction_experiment, read_csv, select_groups,
                                 simulate, size_prediction_experiment, state_accuracy, summarize,
                                 within_tolerance, write_csv)
from fscalecp.synth import gen_corpus, gen_network, synth


def confusion(tp, fp, fn, tn):
    y_true = [1] * tp + [-1] * fp + [1] * fn + [-1] * tn
    y_pred = [1] * tp + [1] * fp + [-1] * fn + [-1] * tn
    return y_true, y_pred


def test_confusion_arithmetic():
    assert classification_metrics(*confusion(3, 1, 1, 5)).as_tuple() == pytest.approx((0.75, 0.75, 0.75, 0.8))


def test_perfect_prediction():
    m = classification_metrics([1, -1, 1], [1, -1, 1])
    assert m.as_tuple() == (1.0, 1.0, 1.0, 1.0) and m.flags == ()


def test_all_negative_predictions_flag_precision():
    m = classification_metrics([1, -1] * 5, [-1] * 10)
    assert m.as_tuple() == (0.0, 0.0, 0.0, 0.5)
    assert "precision" in m.flags


def test_metric_input_errors():
    with pytest.raises(ValueError):
        classification_metrics([1, -1], [1])
    with pytest.raises(ValueError):
        classification_metrics([1, 0], [1, 1])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from([1, -1]), st.sampled_from([1, -1])), min_size=1, max_size=50),
       st.integers(0, 2**32 - 1))
def test_metrics_permutation_invariant(pairs, seed):
    t, p = map(np.array, zip(*pairs))
    order = np.random.default_rng(seed).permutation(len(t))
    assert classification_metrics(t, p).as_tuple() == classification_metrics(t[order], p[order]).as_tuple()


def test_tolerance_boundary():
    assert within_tolerance(120, 100) and within_tolerance(80, 100)
    assert not within_tolerance(121, 100) and not within_tolerance(79, 100)
    assert precision_at([120, 121, 100, 50], [100, 100, 100, 100]) == 0.5


def test_n_observed():
    assert n_observed(30, 0.1) == 3
    assert n_observed(100, 0.05) == 5
    assert n_observed(21, 0.05) == 2
    assert n_observed(1, 0.05) == 1
    assert n_observed(7, 1.0) == 7
    with pytest.raises(ValueError):
        n_observed(10, 0.0)


def test_universe_and_self_consistency():
    # 1 and 2 follow 0, 3 follows 2
    g = SocialGraph.from_edges(5, [(1, 0), (2, 0), (3, 2)])
    assert evaluation_universe(g, {0}, {0, 2}) == {0, 1, 2, 3}
    assert state_accuracy(g, {0}, {0, 2}) == 0.75
    assert state_accuracy(g, {0, 2}, {0, 2}) == 1.0
    assert state_accuracy(g, set(), set()) == 1.0


def test_job_seed_is_stable_and_distinct():
    assert job_seed(0, "m1", 0.1, "a") == job_seed(0, "m1", 0.1, "a")
    seeds = {job_seed(r, mid, p, "x") for r in range(3) for mid in ("m1", "m2") for p in (0.05, 0.1)}
    assert len(seeds) == 12


@pytest.fixture(scope="module")
def threshold_data():
    # single-seeded cascades under |AP| >= 1 fill the reachable set
    g = gen_network(300, 2, 0.3, seed=4)
    return gen_corpus(g, 40, 4, ThresholdRule(1), seed=1, horizon=1e9)


def oracle_cfg(data, **kw):
    return ExperimentConfig(groups=(2,), fractions=(0.05, 0.2), per_group=10, horizon=1e9,
                            message_ids=sorted(data.corpus.cascades), **kw)


def test_oracle_states_accuracy_is_one(threshold_data):
    rows = contagion_states_experiment(threshold_data, {"oracle": ThresholdRule(1)}, oracle_cfg(threshold_data))
    assert [r.value for r in rows] == [1.0, 1.0]
    assert all(r.n_cascades == 10 for r in rows)


def test_oracle_size_precision_is_one(threshold_data):
    rows = size_prediction_experiment(threshold_data, {"oracle": ThresholdRule(1)}, oracle_cfg(threshold_data))
    assert {r.method: r.value for r in rows if r.fraction == 0.05}["oracle"] == 1.0


def test_process_series(threshold_data):
    cfg = oracle_cfg(threshold_data, checkpoints=(0.0, 1e8))
    cfg.process_fraction = 0.2
    cfg.max_duration = 1e9
    rows = process_prediction_experiment(threshold_data, {"oracle": ThresholdRule(1)}, cfg)
    assert [r.checkpoint for r in rows] == [0.0, 1e8]
    assert [r.value for r in rows] == [1.0, 1.0]


def test_fully_observed_is_exact():
    data = synth(200, 20, seed=2)
    cfg = ExperimentConfig(groups=(1,), fractions=(1.0,), per_group=None, horizon=0.0,
                           message_ids=sorted(data.corpus.cascades))
    for mid in cfg.message_ids:
        observed, pred, _ = simulate(data, ThresholdRule(1), mid, 1.0, cfg)
        assert pred.events == data.corpus.cascades[mid].events == observed.events


def test_empty_group_is_flagged(threshold_data):
    cfg = oracle_cfg(threshold_data)
    cfg.groups = (10**6,)
    rows = contagion_states_experiment(threshold_data, {"oracle": ThresholdRule(1)}, cfg)
    assert all(r.flag == "empty" and r.n_cascades == 0 for r in rows)
    assert summarize(rows)["states"]["oracle"][">=1000000"]["0.05"] is None


def test_group_sampling_is_seeded(threshold_data):
    cfg = oracle_cfg(threshold_data, seed=3)
    cfg.per_group = 5
    assert select_groups(threshold_data, cfg) == select_groups(threshold_data, cfg)
    assert len(select_groups(threshold_data, cfg)[2]) == 5


def test_prefix_is_activation_order():
    c = Cascade("m", ((4, 0.0), (2, 1.0), (9, 1.0), (1, 3.0)))
    assert believable_prefix(c, 0.5).events == ((4, 0.0), (2, 1.0))


def test_threads_do_not_change_results():
    data = synth(300, 40, seed=6)
    base = dict(groups=(3,), fractions=(0.1, 0.2), per_group=8, mode="bernoulli", seed=9,
                message_ids=sorted(data.corpus.cascades))
    model = {"t1": ThresholdRule(1)}
    one = contagion_states_experiment(data, model, ExperimentConfig(threads=1, **base))
    many = contagion_states_experiment(data, model, ExperimentConfig(threads=8, **base))
    assert one == many


def test_csv_round_trip(tmp_path):
    rows = [Row("states", 200, 0.05, "fscalecp", None, 30, 0.1 + 0.2),
            Row("process", 400, 0.1, "lrcq1", 3600.0, 0, 0.0, "empty")]
    write_csv(tmp_path / "r.csv", rows)
    assert read_csv(tmp_path / "r.csv") == rows
    text = (tmp_path / "r.csv").read_text(encoding="utf-8").splitlines()
    assert text[0] == "experiment,group,fraction,method,checkpoint,n_cascades,value,flag"


def test_csv_missing_columns(tmp_path):
    (tmp_path / "bad.csv").write_text("experiment,group\nstates,1\n", encoding="utf-8")
    with pytest.raises(ValueError):
        read_csv(tmp_path / "bad.csv")
