"""Acceptance gate: one PASS/FAIL line per criterion, at the stated tolerances.

Criteria 3 and 4 need the SESA corpus. Point ``SESA_ROOT`` at an extracted
copy (a folder holding ``train/`` and ``test/``), or set ``SESA_URL`` and
``SESA_SHA256`` so it can be fetched into ``SESA_CACHE`` (default
``~/.cache/serbench/sesa``). Without either, those two criteria fail.
"""

import json
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from serbench.audio import AudioClip
from serbench.classifiers import default_specs
from serbench.cli import main
from serbench.dataset import load_manifest
from serbench.evaluate import EvalConfig, EvalReport, benchmark_all, strip_timing
from serbench.features import LAYOUT, N_FEATURES, SLICES, extract
from serbench.featurestore import extract_manifest
from serbench.fetch import fetch_dataset
from serbench.synth import GENERATORS, synth_corpus

pytestmark = pytest.mark.acceptance
HERE = Path(__file__).parent


def record(number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_1_layout_and_speed():
    rng = np.random.default_rng(0)
    x = np.concatenate([GENERATORS[c](rng, 33.0 / 4) for c in ("casual", "explosion", "gunshot", "siren")])
    clip = AudioClip(np.clip(x[: 33 * 16000], -1, 1), 16000)
    extract(clip)  # warm caches
    best = min(_timed(lambda: extract(clip)) for _ in range(3))
    X = extract(clip)
    widths = [w for _, w in LAYOUT]
    starts = [SLICES[name].start for name, _ in LAYOUT]
    structural = (
        X.shape[1] == N_FEATURES == 149
        and widths == [12, 12, 12, 20, 20, 20, 20, 20, 1, 1, 1, 7, 1, 1, 1]
        and starts == list(np.cumsum([0] + widths[:-1]))
        and np.all(np.isfinite(X))
    )
    record(1, structural and best < 1.0,
           f"{X.shape[1]} columns in layout order; 33 s clip extracted in {best:.3f} s (limit 1 s)")


def _timed(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


PROPERTY_TESTS = [
    "test_dsp.py::test_parseval",
    "test_dsp.py::test_dct_orthonormal",
    "test_dsp.py::test_dct_naive_oracle",
    "test_dsp.py::test_mel_round_trip",
    "test_dsp.py::test_mel_round_trip_dense",
    "test_dsp.py::test_sign_flip_invariance",
    "test_dsp.py::test_cqt_kernel_invariants",
    "test_pipeline.py::test_pca_decorrelates_and_orthonormal",
    "test_pipeline.py::test_pca_preserves_distances",
    "test_features.py::test_chroma_cens",
    "test_features.py::test_amplitude_invariance",
    "test_features.py::test_time_shift_covariance",
    "test_features.py::test_determinism",
    "test_classifiers.py::test_knn_matches_exhaustive_scan",
    "test_evaluate.py::test_accuracy_counting_oracle",
    "test_evaluate.py::test_fold_invariants",
    "test_evaluate.py::test_folds_group_frames",
    "test_evaluate.py::test_no_leak_byte_identity",
]


def test_criterion_2_property_suite():
    cmd = [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *PROPERTY_TESTS]
    proc = subprocess.run(cmd, cwd=HERE, capture_output=True, text=True)
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr.strip()[-200:]
    record(2, proc.returncode == 0, f"{len(PROPERTY_TESTS)} property groups: {tail}")


def _locate_sesa():
    root = os.environ.get("SESA_ROOT")
    if root:
        return load_manifest(root)
    url, digest = os.environ.get("SESA_URL"), os.environ.get("SESA_SHA256")
    if url and digest:
        cache = os.environ.get("SESA_CACHE", str(Path.home() / ".cache" / "serbench" / "sesa"))
        return fetch_dataset(url, cache, digest)
    raise LookupError("SESA corpus unavailable: set SESA_ROOT, or SESA_URL and SESA_SHA256")


@pytest.fixture(scope="module")
def sesa_report():
    t0 = time.perf_counter()
    try:
        manifest = _locate_sesa()
    except Exception as exc:  # network or layout failure is reported, not hidden
        return None, f"{type(exc).__name__}: {exc}", 0.0
    fm, _ = extract_manifest(manifest)
    report = benchmark_all(fm, default_specs(0), EvalConfig())
    return report, None, time.perf_counter() - t0


def _mean(report, name):
    return float(np.mean(report.row(name).accuracy))


def _time(report, name):
    return float(np.mean(report.row(name).time_ms))


def test_criterion_3_sesa_reproduction(sesa_report):
    report, err, elapsed = sesa_report
    if report is None:
        record(3, False, err)
    means = {r.algorithm: float(np.mean(r.accuracy)) if r.accuracy else float("nan") for r in report.rows}
    best = max(means, key=lambda k: means[k] if np.isfinite(means[k]) else -1)
    dt = means["decision_tree"]
    a = means[best] >= 63
    b = 62 <= means["sgd"] <= 82
    c = all(means[n] - dt >= -2 for n in ("bagging", "gradient_boosting", "sgd"))
    detail = (f"best {best} {means[best]:.2f}% (>=63: {a}); SGD {means['sgd']:.2f}% in [62,82]: {b}; "
              f"Bagging/GB/SGD vs DT {dt:.2f}% within -2 pp: {c}; {elapsed / 60:.1f} min (limit 30)")
    record(3, a and b and c and elapsed <= 1800, detail)


def test_criterion_4_latency_ordering(sesa_report):
    report, err, _ = sesa_report
    if report is None:
        record(4, False, err)
    fast = ("sgd", "perceptron", "passive_aggressive", "ridge")
    ratios = {f: (_time(report, "knn") / _time(report, f),
                  _time(report, "bagging") / _time(report, f),
                  _time(report, "adaboost") / _time(report, f)) for f in fast}
    ok = all(k >= 100 and b >= 10 and ab >= 10 for k, b, ab in ratios.values())
    worst = min(v[0] for v in ratios.values()), min(min(v[1], v[2]) for v in ratios.values())
    record(4, ok, f"slowest linear vs KNN {worst[0]:.0f}x (>=100), vs Bagging/AdaBoost {worst[1]:.0f}x (>=10)")


def test_criterion_5_synthetic_end_to_end(tmp_path):
    t0 = time.perf_counter()
    manifest = synth_corpus(tmp_path / "synth", seed=0)
    fm, failures = extract_manifest(manifest)
    report = benchmark_all(fm, default_specs(0), EvalConfig())
    elapsed = time.perf_counter() - t0
    means = {r.classifier: float(np.mean(r.accuracy)) for r in report.rows}
    passing = sorted(n for n, m in means.items() if m >= 90)
    summary = ", ".join(f"{n} {m:.1f}" for n, m in means.items())
    ok = len(passing) >= 8 and elapsed <= 300 and not failures and len(manifest.entries) == 160
    record(5, ok, f"{len(passing)}/11 classifiers >= 90% frame accuracy in {elapsed:.0f} s (limit 300 s) [{summary}]")


def test_criterion_6_determinism(small_corpus, tmp_path):
    dump = tmp_path / "features.bin"
    assert main(["extract", "--data", str(small_corpus.root), "--features", str(dump)]) == 0
    docs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["evaluate", "--features", str(dump), "--out", str(out), "--seed", "11"]) == 0
        docs.append(json.loads((out / "report.json").read_text()))
    acc = [[r["folds"]["accuracy"] for r in d["rows"]] for d in docs]
    same = strip_timing(docs[0]) == strip_timing(docs[1]) and acc[0] == acc[1]
    n_rows = len(EvalReport.from_json(json.dumps(docs[0])).rows)
    record(6, same, f"two evaluate runs over {n_rows} classifiers: report JSON identical apart from timing: {same}")


def test_pca_energy_sweep(small_features):
    """Reported alongside the criteria; the gate itself uses the 0.95 default."""
    specs = [s for s in default_specs(0) if s.algorithm in ("decision_tree", "knn", "ridge", "sgd")]
    parts = []
    for energy in (0.90, 0.95, 0.99):
        rep = benchmark_all(small_features, specs, EvalConfig(pca_energy=energy))
        dims = sorted({f["pca_components"] for f in rep.folds})
        accs = " ".join(f"{r.classifier} {np.mean(r.accuracy):.1f}" for r in rep.rows)
        parts.append(f"energy {energy:.2f}: {dims} comps, {accs}")
        assert all(len(r.accuracy) == 3 for r in rep.rows)
    ACCEPTANCE_LINES.append("[INFO] PCA energy sweep (synthetic): " + "; ".join(parts))
