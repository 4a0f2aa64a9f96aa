from __future__ import annotations

import numpy as np
import pytest

from serbench.featurestore import extract_manifest
from serbench.synth import synth_corpus

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def blob2():
    rng = np.random.default_rng(7)
    X = np.vstack([rng.normal(0.0, 0.5, (20, 2)), rng.normal(5.0, 0.5, (20, 2))])
    y = np.repeat(["a", "b"], 20)
    return X, y


def xor4():
    rng = np.random.default_rng(7)
    corners = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
    X = np.repeat(corners, 10, axis=0) + rng.uniform(-0.05, 0.05, (40, 2))
    y = np.repeat([0, 1, 1, 0], 10)
    return X, y


def const1():
    rng = np.random.default_rng(7)
    return rng.normal(size=(15, 3)), np.array(["siren"] * 15)


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("small_corpus")
    manifest = synth_corpus(root, seed=3, counts={c: (4, 2) for c in ("casual", "explosion", "gunshot", "siren")})
    return manifest


@pytest.fixture(scope="session")
def small_features(small_corpus):
    fm, failures = extract_manifest(small_corpus)
    assert not failures
    return fm
