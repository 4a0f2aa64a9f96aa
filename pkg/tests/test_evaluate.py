import json
import re

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import serbench.evaluate as ev
from serbench.classifiers import ClassifierSpec, default_specs, train
from serbench.classifiers.knn import KNN
from serbench.errors import ShapeError, StratificationError
from serbench.evaluate import (
    EvalConfig,
    EvalReport,
    ReportRow,
    accuracy,
    benchmark_all,
    file_accuracy,
    fit_fold,
    folds_for_features,
    make_folds,
    make_folds_from_labels,
    render_markdown,
    render_report,
    strip_timing,
    time_predict,
)
from serbench.featurestore import FeatureMatrix
from serbench.pipeline import Preprocessor, model_to_bytes


def nine_files():
    return {f"{c}_{i}": c for c in ("casual", "siren", "gunshot") for i in range(3)}


def test_round_robin_one_per_class():
    plan = make_folds_from_labels(nine_files(), 3, seed=0)
    labels = nine_files()
    for fold in plan.folds:
        assert sorted(labels[f] for f in fold) == ["casual", "gunshot", "siren"]


@settings(max_examples=40, deadline=None)
@given(st.dictionaries(st.sampled_from(["casual", "explosion", "gunshot", "siren"]), st.integers(3, 15), min_size=1),
       st.integers(0, 1000), st.integers(2, 3))
def test_fold_invariants(per_class, seed, k):
    files = {f"{c}/{i}": c for c, n in per_class.items() for i in range(n)}
    plan = make_folds_from_labels(files, k, seed)
    flat = [f for fold in plan.folds for f in fold]
    assert sorted(flat) == sorted(files) and len(flat) == len(set(flat))
    for c in per_class:
        counts = [sum(files[f] == c for f in fold) for fold in plan.folds]
        assert max(counts) - min(counts) <= 1
    assert plan == make_folds_from_labels(files, k, seed)


def test_seed_changes_plan():
    files = {f"siren_{i}": "siren" for i in range(12)}
    a = make_folds_from_labels(files, 3, 0)
    b = make_folds_from_labels(files, 3, 1)
    assert a != b
    assert sorted(map(len, a.folds)) == sorted(map(len, b.folds))


def test_stratification_error():
    with pytest.raises(StratificationError):
        make_folds_from_labels({"a": "siren", "b": "siren"}, 3)


def test_folds_group_frames(small_corpus, small_features):
    plan = make_folds(small_corpus, 3, 0)
    assert plan == folds_for_features(small_features, 3, 0)
    train_ids = {e.source_id for e in small_corpus.split("train")}
    assert set(plan.fold_of()) == train_ids
    for fold in range(3):
        mask = ev.fold_training_rows(small_features, plan, fold)
        held = set(plan.folds[fold])
        used = set(small_features.file_ids[mask])
        assert not used & held
        assert set(small_features.splits[mask]) == {"train"}


def test_accuracy_examples():
    assert accuracy(["a", "b"], ["a", "b"]) == 1.0
    assert accuracy(["a", "a"], ["b", "b"]) == 0.0
    assert accuracy([1, 2, 3, 4], [1, 2, 3, 0]) == 0.75
    with pytest.raises(ShapeError):
        accuracy([1, 2], [1])
    with pytest.raises(ShapeError):
        accuracy([], [])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=200))
def test_accuracy_counting_oracle(pairs):
    pred, truth = zip(*pairs)
    hits = 0
    for p, t in pairs:
        if p == t:
            hits += 1
    assert accuracy(list(pred), list(truth)) == hits / len(pairs)


def test_file_accuracy_majority():
    pred = np.array([0, 0, 1, 1, 1, 0])
    fids = np.array(["a", "a", "a", "b", "b", "b"], dtype=object)
    labels = np.array(["x", "x", "x", "x", "x", "x"], dtype=object)
    # a -> majority 0 (x, correct); b -> majority 1 (y, wrong)
    assert file_accuracy(pred, fids, labels, ("x", "y")) == 0.5


def test_time_predict_positive_and_hooks():
    rng = np.random.default_rng(0)
    m = train(ClassifierSpec("sgd"), rng.normal(size=(50, 4)), rng.integers(0, 2, 50))
    events = []
    ev.TIMING_HOOKS.append(events.append)
    try:
        ms, pred = time_predict(m, rng.normal(size=(30, 4)), repeats=3)
    finally:
        ev.TIMING_HOOKS.remove(events.append)
    assert ms > 0 and len(pred) == 30
    assert events == ["enter", "exit"] * 3
    assert not ev.in_timed_region()


def test_timing_excludes_transform(small_features, monkeypatch):
    entered = []
    ev.TIMING_HOOKS.append(entered.append)
    original = Preprocessor.transform

    def guarded(self, X):
        assert not ev.in_timed_region(), "pipeline transform ran inside the timed region"
        return original(self, X)

    monkeypatch.setattr(Preprocessor, "transform", guarded)
    try:
        specs = [ClassifierSpec("sgd"), ClassifierSpec("ridge")]
        benchmark_all(small_features, specs, EvalConfig(timing_repeats=2))
    finally:
        ev.TIMING_HOOKS.remove(entered.append)
    assert entered.count("enter") == 3 * 2 * 2


def test_knn_time_linear_in_training_size():
    rng = np.random.default_rng(1)
    probe = rng.normal(size=(400, 20))

    def best_time(n):
        X = rng.normal(size=(n, 20))
        m = train(ClassifierSpec("knn"), X, rng.integers(0, 4, n))
        return min(time_predict(m, probe, repeats=3)[0] for _ in range(3))

    small, large = best_time(3000), best_time(6000)
    ratio = large / small
    assert 1.0 <= ratio <= 3.0, ratio


@pytest.fixture(scope="module")
def report(small_features):
    return benchmark_all(small_features, default_specs(0), EvalConfig())


def test_report_rows_in_table_order(report):
    assert [r.classifier for r in report.rows] == [
        "AdaBoost", "Bagging", "Decision Tree", "Gradient Boosting", "KNN", "Perceptron",
        "Passive Aggressive", "Random Forest", "Ridge", "SGD", "SVM",
    ]
    for r in report.rows:
        assert r.error is None
        assert len(r.accuracy) == len(r.time_ms) == len(r.file_accuracy) == 3
        assert all(0 <= a <= 100 for a in r.accuracy)


def test_report_recomputable_from_folds(report):
    doc = report.to_dict()
    for row in doc["rows"]:
        acc = np.array(row["folds"]["accuracy"])
        assert row["accuracy"]["mean"] == pytest.approx(acc.mean())
        assert row["accuracy"]["std"] == pytest.approx(np.sqrt(np.mean((acc - acc.mean()) ** 2)))
        assert row["accuracy"]["std"] >= 0


def test_markdown_format(report):
    md = render_markdown(report)
    lines = md.strip().splitlines()
    assert lines[0] == "| Classifier | Time [ms] | Accuracy [%] |"
    assert len(lines) == 2 + 11
    sgd = next(line for line in lines if line.startswith("| SGD "))
    assert re.fullmatch(r"\| SGD \| \d+\.\d{2} ± \d+\.\d{2} \| \d+\.\d{2} ± \d+\.\d{2} \|", sgd)


def test_sgd_style_row():
    r = EvalReport(rows=[ReportRow("sgd", "SGD", accuracy=[72.13 - 2.78 * 1.2247448713915890, 72.13, 72.13 + 2.78 * 1.2247448713915890],
                                   time_ms=[6.81 - 0.16 * 1.2247448713915890, 6.81, 6.81 + 0.16 * 1.2247448713915890])])
    assert "| SGD | 6.81 ± 0.16 | 72.13 ± 2.78 |" in render_markdown(r)


def test_json_round_trip_idempotent(report):
    text = render_report(report, "json")
    back = EvalReport.from_json(text)
    assert render_markdown(back) == render_markdown(report)
    assert back.to_json() == text
    assert json.loads(text)["schema"] == "serbench-report/1"


def test_empty_report():
    assert render_markdown(EvalReport()).strip().splitlines() == [
        "| Classifier | Time [ms] | Accuracy [%] |", "|---|---:|---:|"]


def test_strip_timing(report):
    stripped = strip_timing(report.to_dict())
    assert "time_ms" not in json.dumps(stripped)


def test_zero_variance_column_masked(small_features):
    X = small_features.X.copy()
    X[:, 10] = 0.25
    fm = FeatureMatrix(X, small_features.file_ids, small_features.splits, small_features.labels, small_features.frames)
    plan = folds_for_features(fm)
    model = fit_fold(fm, plan, 0, ClassifierSpec("sgd"), EvalConfig())
    assert not model.mask.keep[10]
    assert model.pca.mean.shape[0] == model.mask.keep.sum()


def test_no_leak_byte_identity(small_features):
    plan = folds_for_features(small_features)
    train_only = small_features.split("train")
    for fold in range(3):
        for name in ("ridge", "random_forest"):
            a = fit_fold(small_features, plan, fold, ClassifierSpec(name), EvalConfig())
            b = fit_fold(train_only, plan, fold, ClassifierSpec(name), EvalConfig())
            assert model_to_bytes(a) == model_to_bytes(b)


def test_single_failure_recorded(small_features, monkeypatch):
    def boom(self, X, y, n_classes):
        raise RuntimeError("synthetic failure")

    monkeypatch.setattr(KNN, "fit", boom)
    rep = benchmark_all(small_features, [ClassifierSpec("knn"), ClassifierSpec("ridge")], EvalConfig())
    assert "synthetic failure" in rep.row("knn").error
    assert rep.row("ridge").error is None and len(rep.row("ridge").accuracy) == 3
    assert "failed" in render_markdown(rep)


def test_validation_scoring(small_features):
    rep = benchmark_all(small_features, [ClassifierSpec("ridge")], EvalConfig(scoring="validation"))
    assert rep.scoring == "validation"
    assert sum(f["eval_rows"] for f in rep.folds) == int((small_features.splits == "train").sum())
