"""Shared fixtures: a session-scoped synthetic corpus and backend handles."""

from __future__ import annotations

import numpy as np
import pytest

from ssrpnet.backend import available_backends, get_kernels
from ssrpnet.experiment import load_features, load_manifest
from ssrpnet.features import FeatureConfig
from ssrpnet.synth import SyntheticSpec, make_corpus

DESK_FEATURES = FeatureConfig(clip_seconds=1.0, target_frames=87)


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", default=False,
                     help="run the long training tests")


@pytest.fixture(params=available_backends())
def kernels(request):
    """Every registered kernel backend, one at a time."""
    return get_kernels(request.param)


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """32-clip synthetic corpus (4 classes x 8 clips, 5 folds)."""
    root = tmp_path_factory.mktemp("corpus")
    manifest_path = make_corpus(root, SyntheticSpec())
    return load_manifest(manifest_path)


@pytest.fixture(scope="session")
def corpus_features(corpus, tmp_path_factory):
    """(x, y) log-mel features for the session corpus, disk-cached."""
    cache = tmp_path_factory.mktemp("feature_cache")
    return load_features(corpus, DESK_FEATURES, cache_dir=cache)


@pytest.fixture(scope="session")
def two_class_corpus(tmp_path_factory):
    """tone vs click_train corpus used for the comparative-ordering runs."""
    root = tmp_path_factory.mktemp("corpus2")
    spec = SyntheticSpec(classes=("tone", "click_train"))
    return load_manifest(make_corpus(root, spec))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
