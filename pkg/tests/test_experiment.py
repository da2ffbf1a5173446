"""Manifest handling, caching, cross-validated training, sweeps, reports."""

import json

import numpy as np
import numpy.testing as npt
import pytest

from ssrpnet.errors import DivergenceError, SchemaError, ValidationError
from ssrpnet.experiment import (
    PUBLISHED,
    RunConfig,
    RunResult,
    SweepRow,
    accuracy_score,
    emit_accuracy_curves,
    feature_cache_key,
    leakage_check,
    load_features,
    load_manifest,
    load_run,
    load_sweep,
    report_comparison,
    run_pipeline,
    save_run,
    save_sweep,
    split_fold,
    sweep,
    train_fold,
)
from ssrpnet.features import FeatureConfig
from ssrpnet.network import NetworkConfig, init_params
from ssrpnet.pooling import PoolingSpec
from ssrpnet.synth import CLASS_NAMES, SyntheticSpec, make_corpus, render_clip

DESK = FeatureConfig(clip_seconds=1.0, target_frames=87)

TINY_RUN = RunConfig(arm="ssrp_cnn", pooling=PoolingSpec("ssrp_t", top_k=2),
                     epochs=2, batch_size=8, conv_channels=(4, 8),
                     dense_units=8, eval_every=1, seed=0)


def write_manifest(tmp_path, rows, header="filename,fold,target,category"):
    path = tmp_path / "meta.csv"
    path.write_text("\n".join([header] + rows) + "\n")
    return path


GOOD_ROWS = [
    "a.wav,1,0,tone", "b.wav,2,0,tone", "c.wav,1,1,click", "d.wav,2,1,click",
]


@pytest.fixture(scope="module")
def tiny_result(two_class_corpus, tmp_path_factory):
    cache = tmp_path_factory.mktemp("run_cache")
    result = run_pipeline(two_class_corpus, TINY_RUN, DESK, cache_dir=cache)
    return result, cache


# --- manifest parsing and validation ---

def test_corpus_manifest_loads(corpus):
    assert len(corpus.entries) == 32
    assert corpus.n_classes == 4
    assert corpus.fold_ids() == [1, 2, 3, 4, 5]
    assert corpus.wav_path(corpus.entries[0]).exists()


def test_schema_errors(tmp_path):
    with pytest.raises(SchemaError, match="missing columns"):
        load_manifest(write_manifest(tmp_path, GOOD_ROWS, header="filename,fold"))
    with pytest.raises(SchemaError, match="bad row"):
        load_manifest(write_manifest(tmp_path, ["a.wav,x,0,tone"] + GOOD_ROWS[1:]))
    with pytest.raises(SchemaError, match="no data rows"):
        load_manifest(write_manifest(tmp_path, []))
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(SchemaError, match="empty manifest"):
        load_manifest(empty)


def test_schema_error_names_the_line(tmp_path):
    path = write_manifest(tmp_path, GOOD_ROWS[:2] + ["c.wav,one,1,click"])
    with pytest.raises(SchemaError, match=r"meta\.csv:4"):
        load_manifest(path)


@pytest.mark.parametrize("rows,message", [
    (GOOD_ROWS + ["a.wav,2,0,tone"], "duplicate filenames"),
    (["a.wav,0,0,tone"] + GOOD_ROWS[1:], "fold must be >= 1"),
    (["a.wav,1,-1,tone"] + GOOD_ROWS[1:], "target must be >= 0"),
    (["a.wav,1,0,tone", "b.wav,2,0,buzz", "c.wav,1,1,click", "d.wav,2,1,click"],
     "maps to both"),
    (["a.wav,1,0,tone", "b.wav,2,0,tone", "c.wav,1,2,click", "d.wav,2,2,click"],
     "contiguous"),
    (["a.wav,1,0,tone", "b.wav,2,0,tone"], "at least 2 classes"),
    (["a.wav,1,0,tone", "b.wav,1,1,click"], "at least 2 folds"),
    (["a.wav,1,0,tone", "b.wav,2,0,tone", "c.wav,1,1,click", "d.wav,1,1,click"],
     "fold 2 has no examples"),
])
def test_validation_errors(tmp_path, rows, message):
    with pytest.raises(ValidationError, match=message):
        load_manifest(write_manifest(tmp_path, rows))


def test_split_fold(corpus):
    for fold in corpus.fold_ids():
        train, test = split_fold(corpus, fold)
        assert np.intersect1d(train, test).size == 0
        assert len(train) + len(test) == len(corpus.entries)
        assert all(corpus.entries[i].fold == fold for i in test)
        assert all(corpus.entries[i].fold != fold for i in train)
    with pytest.raises(ValidationError, match="fold 9 not present"):
        split_fold(corpus, 9)


# --- feature cache ---

def test_cache_key_tracks_content_and_config():
    base = feature_cache_key(b"wav-bytes", DESK)
    assert base == feature_cache_key(b"wav-bytes", DESK)
    assert base != feature_cache_key(b"other-bytes", DESK)
    changed = FeatureConfig(clip_seconds=1.0, target_frames=87, n_mels=39)
    assert base != feature_cache_key(b"wav-bytes", changed)


def test_cold_and_warm_cache_agree_bitwise(two_class_corpus, tmp_path):
    cold_x, cold_y = load_features(two_class_corpus, DESK, cache_dir=tmp_path)
    assert sum(1 for p in tmp_path.iterdir() if p.suffix == ".lmsp") == 16
    warm_x, warm_y = load_features(two_class_corpus, DESK, cache_dir=tmp_path)
    npt.assert_array_equal(cold_x, warm_x)
    npt.assert_array_equal(cold_y, warm_y)
    uncached_x, _ = load_features(two_class_corpus, DESK, cache_dir=None)
    npt.assert_array_equal(cold_x, uncached_x)


def test_feature_tensor_layout(corpus, corpus_features):
    x, y = corpus_features
    assert x.shape == (32, 87, 40)
    assert y.shape == (32,)
    npt.assert_array_equal(np.unique(y), [0, 1, 2, 3])
    assert np.all(np.isfinite(x))


# --- run configuration and result containers ---

def test_run_config_round_trip():
    run = RunConfig(arm="pca_cnn", pooling=PoolingSpec("ssrp_b", window=4),
                    epochs=3, stop_at_train_accuracy=0.9)
    assert RunConfig.from_dict(run.to_dict()) == run


def test_run_config_validation():
    with pytest.raises(ValueError, match="arm must be"):
        RunConfig(arm="svm")
    with pytest.raises(ValueError, match="pca_scope"):
        RunConfig(pca_scope="sometimes")
    with pytest.raises(ValueError, match="batch_size"):
        RunConfig(batch_size=1)
    with pytest.raises(ValueError, match="epochs"):
        RunConfig(epochs=0)


def test_run_result_round_trip(tiny_result, tmp_path):
    result, _ = tiny_result
    path = tmp_path / "run.json"
    save_run(path, result)
    back = load_run(path)
    assert back.config == result.config
    assert back.param_count == result.param_count
    assert back.input_shape == result.input_shape
    assert back.backend == result.backend
    assert [f.to_dict() for f in back.folds] == [f.to_dict() for f in result.folds]
    assert back.mean_accuracy == result.mean_accuracy
    assert back.std_accuracy == result.std_accuracy


# --- training ---

def toy_fold(rng, n_per_class=4):
    config = NetworkConfig(input_shape=(8, 6, 1), n_classes=2,
                           conv_channels=(2, 3), dense_units=4,
                           pool_after=(0,), pooling=PoolingSpec("gap"),
                           dropout=0.0)
    # classes differ by a large constant offset: linearly separable
    x0 = rng.normal(size=(n_per_class, 8, 6, 1)) - 3.0
    x1 = rng.normal(size=(n_per_class, 8, 6, 1)) + 3.0
    x = np.concatenate([x0, x1])
    y = np.array([0] * n_per_class + [1] * n_per_class)
    return config, x, y


def test_train_fold_is_seed_deterministic(rng):
    config, x, y = toy_fold(rng)
    run = RunConfig(epochs=3, batch_size=4, mixup_alpha=0.2, eval_every=1, seed=5)
    a = train_fold(x, y, x, y, config, run, fold=1)
    b = train_fold(x, y, x, y, config, run, fold=1)
    assert a.loss_history == b.loss_history
    assert a.eval_history == b.eval_history
    assert a.accuracy == b.accuracy
    c = train_fold(x, y, x, y, config, run, fold=2)  # seed + fold differs
    assert a.loss_history != c.loss_history


def test_train_fold_early_stop(rng):
    config, x, y = toy_fold(rng)
    run = RunConfig(epochs=200, batch_size=4, mixup_alpha=0.0, eval_every=50,
                    learning_rate=0.05, stop_at_train_accuracy=1.0)
    result = train_fold(x, y, x, y, config, run, fold=1)
    assert result.final_train_accuracy == 1.0
    assert result.epochs_run < 200
    assert result.eval_history[-1][0] == result.epochs_run  # final eval recorded
    assert len(result.loss_history) == result.epochs_run


def test_train_fold_skips_single_example_batches(rng):
    config, x, y = toy_fold(rng, n_per_class=3)  # 6 rows, batch 4 -> tail of 2
    run = RunConfig(epochs=2, batch_size=4, mixup_alpha=0.0, eval_every=1)
    result = train_fold(x[:5], y[:5], x, y, config, run, fold=1)  # tail of 1
    assert result.epochs_run == 2
    assert all(np.isfinite(v) for v in result.loss_history)


def test_divergence_error_carries_epoch(rng):
    config, x, y = toy_fold(rng)
    run = RunConfig(epochs=5, batch_size=4, mixup_alpha=0.0, eval_every=10,
                    learning_rate=1e160)
    with pytest.raises(DivergenceError, match="non-finite loss") as info:
        train_fold(x, y, x, y, config, run, fold=1)
    assert info.value.epoch is not None and info.value.epoch >= 1


def test_accuracy_score(rng):
    config, x, y = toy_fold(rng)
    params = init_params(config, seed=0)
    acc = accuracy_score(params, x, y, config)
    assert 0.0 <= acc <= 1.0


# --- pipeline ---

def test_pipeline_shape_and_metadata(tiny_result, two_class_corpus):
    result, _ = tiny_result
    assert len(result.folds) == 5
    assert [f.fold for f in result.folds] == [1, 2, 3, 4, 5]
    assert result.input_shape == (87, 40, 1)
    assert result.param_count > 0
    assert result.backend in ("compiled", "numpy")
    assert sum(result.param_breakdown.values()) == result.param_count
    for fr in result.folds:
        assert fr.n_train + fr.n_test == len(two_class_corpus.entries)
        assert fr.n_components is None and fr.pca_digest is None
        assert len(fr.loss_history) == fr.epochs_run
        assert fr.seconds > 0


def test_pipeline_reproducible_bitwise(tiny_result, two_class_corpus):
    result, cache = tiny_result
    again = run_pipeline(two_class_corpus, TINY_RUN, DESK, cache_dir=cache)
    for a, b in zip(result.folds, again.folds):
        assert a.loss_history == b.loss_history
        assert a.eval_history == b.eval_history
        assert a.accuracy == b.accuracy
    other = run_pipeline(
        two_class_corpus, RunConfig.from_dict(TINY_RUN.to_dict() | {"seed": 1}),
        DESK, cache_dir=cache)
    assert any(a.loss_history != b.loss_history
               for a, b in zip(result.folds, other.folds))


@pytest.fixture(scope="module")
def pca_result(two_class_corpus, tmp_path_factory):
    cache = tmp_path_factory.mktemp("pca_cache")
    run = RunConfig(arm="pca_cnn", epochs=2, batch_size=8, conv_channels=(4, 8),
                    dense_units=8, eval_every=1, variance_threshold=0.9, seed=0)
    result = run_pipeline(two_class_corpus, run, DESK, cache_dir=cache)
    return result, cache, run


def test_pca_arm_records_transform(pca_result):
    result, _, _ = pca_result
    assert result.input_shape[1:] == (1, 1)
    for fr in result.folds:
        assert fr.n_components >= 1
        assert fr.pca_digest is not None
    # per-fold fits see different training rows, so digests differ
    assert len({fr.pca_digest for fr in result.folds}) == len(result.folds)


def test_leakage_check_passes_honest_runs(tiny_result, pca_result, two_class_corpus):
    ssrp, cache = tiny_result
    x, _ = load_features(two_class_corpus, DESK, cache_dir=cache)
    leakage_check(two_class_corpus, ssrp, x)
    pca, pca_cache, _ = pca_result
    x2, _ = load_features(two_class_corpus, DESK, cache_dir=pca_cache)
    leakage_check(two_class_corpus, pca, x2)


def test_leakage_check_catches_tampered_transform(pca_result, two_class_corpus):
    result, cache, _ = pca_result
    x, _ = load_features(two_class_corpus, DESK, cache_dir=cache)
    doctored = RunResult.from_dict(result.to_dict())
    doctored.folds[2].pca_digest = "0" * 64
    with pytest.raises(ValidationError, match="does not match a train-only fit"):
        leakage_check(two_class_corpus, doctored, x)


def test_whole_dataset_scope_differs_from_per_fold(pca_result, two_class_corpus):
    per_fold, cache, run = pca_result
    leaky = run_pipeline(
        two_class_corpus,
        RunConfig.from_dict(run.to_dict() | {"pca_scope": "whole_dataset"}),
        DESK, cache_dir=cache)
    digests = {fr.pca_digest for fr in leaky.folds}
    assert len(digests) == 1  # one shared fit
    assert digests != {fr.pca_digest for fr in per_fold.folds}


# --- sweeps ---

def test_sweep_continues_past_failures(two_class_corpus, tiny_result):
    _, cache = tiny_result
    base = RunConfig(arm="ssrp_cnn", epochs=1, batch_size=8, conv_channels=(4, 8),
                     dense_units=8, eval_every=1, seed=0)
    rows = sweep(two_class_corpus, base, DESK, "window", [2, 9999],
                 cache_dir=cache)
    assert rows[0].error is None
    assert 0.0 <= rows[0].mean_accuracy <= 1.0
    assert len(rows[0].fold_accuracies) == 5
    assert rows[1].error is not None and "exceeds" in rows[1].error
    assert rows[1].mean_accuracy is None
    with pytest.raises(ValueError, match="parameter must be"):
        sweep(two_class_corpus, base, DESK, "gamma", [1])


def test_sweep_round_trip(tmp_path):
    rows = [SweepRow(2, 0.5, 0.1, [0.4, 0.6]),
            SweepRow(99, None, None, [], error="window 99 exceeds")]
    path = tmp_path / "sweep.json"
    save_sweep(path, "window", rows)
    parameter, back = load_sweep(path)
    assert parameter == "window"
    assert [r.to_dict() for r in back] == [r.to_dict() for r in rows]


# --- curves and report ---

def test_accuracy_curves_csv(tiny_result, tmp_path):
    result, _ = tiny_result
    path = tmp_path / "curves.csv"
    emit_accuracy_curves(result, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "fold,epoch,series,value"
    rows = [line.split(",") for line in lines[1:]]
    losses = [r for r in rows if r[2] == "train_loss"]
    accs = [r for r in rows if r[2] == "test_accuracy"]
    assert len(losses) == sum(len(f.loss_history) for f in result.folds)
    assert len(accs) == sum(len(f.eval_history) for f in result.folds)
    assert float(losses[0][3]) == result.folds[0].loss_history[0]  # repr survives


def test_accuracy_curves_png(tiny_result, tmp_path):
    pytest.importorskip("matplotlib")
    result, _ = tiny_result
    png = tmp_path / "curves.png"
    emit_accuracy_curves(result, tmp_path / "c.csv", png_path=png)
    assert png.stat().st_size > 0


def test_report_contents(tiny_result, pca_result, tmp_path):
    ssrp, _ = tiny_result
    pca, _, _ = pca_result
    rows = [SweepRow(4, 0.55, 0.05, [0.5, 0.6]), SweepRow(12, 0.65, 0.05, [0.6, 0.7])]
    path = tmp_path / "report.md"
    text = report_comparison({"ssrp_t": ssrp, "pca_cnn": pca}, path,
                             sweeps={"top_k": rows})
    assert text == path.read_text()
    assert "| ssrp_t | ssrp_t(K=2) | 5 |" in text
    for published in ("72.85%", "80.69%", "66.75%", "37.60%"):
        assert published in text
    assert "80.69%" in text  # published top_k=12 reference in the sweep table
    assert "reported, not reconciled" in text
    assert "training folds only" in text
    assert f"{PUBLISHED['ssrp_t']['params']:,}" in text


# --- synthetic corpus ---

def test_render_clip_deterministic_and_bounded():
    spec = SyntheticSpec()
    a = render_clip(spec, 0, 3)
    b = render_clip(spec, 0, 3)
    npt.assert_array_equal(a, b)
    c = render_clip(spec, 1, 3)
    assert not np.array_equal(a, c)
    for ci in range(len(spec.classes)):
        clip = render_clip(spec, ci, 0)
        assert clip.shape == (44100,)
        assert np.abs(clip).max() <= 1.0
        assert clip[0] == pytest.approx(0.0, abs=1e-6)  # faded in


def test_make_corpus_is_byte_reproducible(tmp_path):
    spec = SyntheticSpec(classes=("tone", "chirp"), clips_per_class=5)
    m1 = make_corpus(tmp_path / "one", spec)
    m2 = make_corpus(tmp_path / "two", spec)
    assert m1.read_text() == m2.read_text()
    wavs1 = sorted((tmp_path / "one" / "audio").iterdir())
    wavs2 = sorted((tmp_path / "two" / "audio").iterdir())
    assert [p.name for p in wavs1] == [p.name for p in wavs2]
    for p1, p2 in zip(wavs1, wavs2):
        assert p1.read_bytes() == p2.read_bytes()


def test_corpus_fold_layout(tmp_path):
    spec = SyntheticSpec(classes=("tone", "am_noise"), clips_per_class=10,
                         n_folds=5)
    manifest = load_manifest(make_corpus(tmp_path, spec))
    assert len(manifest.entries) == 20
    for fold in manifest.fold_ids():
        rows = [e for e in manifest.entries if e.fold == fold]
        assert len(rows) == 4  # balanced: 2 per class per fold
        assert {e.target for e in rows} == {0, 1}


def test_synthetic_spec_validation():
    with pytest.raises(ValueError):
        SyntheticSpec(classes=("tone", "whale_song"))
    with pytest.raises(ValueError, match="at least one clip"):
        SyntheticSpec(clips_per_class=2, n_folds=5)
    assert set(SyntheticSpec().classes) == set(CLASS_NAMES)
