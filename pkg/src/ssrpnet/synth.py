"""Deterministic synthetic audio corpus for desk-scale runs and tests.

Four sound categories with visibly different log-mel signatures:

* ``tone``        -- steady sinusoid (horizontal ridge)
* ``click_train`` -- periodic decaying bursts (vertical stripes)
* ``am_noise``    -- amplitude-modulated white noise (pulsing broadband)
* ``chirp``       -- rising linear sweep (diagonal ridge)

Every clip is a pure function of (seed, class index, clip index), so two
machines render byte-identical corpora. Folds are assigned round-robin
within each class, which keeps every class present in every fold.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .wavfile import write_wav

CLASS_NAMES = ("tone", "click_train", "am_noise", "chirp")


@dataclass(frozen=True)
class SyntheticSpec:
    classes: tuple[str, ...] = CLASS_NAMES
    clips_per_class: int = 8
    seconds: float = 1.0
    sample_rate: int = 44100
    n_folds: int = 5
    seed: int = 2024

    def __post_init__(self):
        unknown = set(self.classes) - set(CLASS_NAMES)
        if unknown:
            raise ValueError(f"unknown classes {sorted(unknown)}; pick from {CLASS_NAMES}")
        if self.clips_per_class < self.n_folds:
            raise ValueError("need at least one clip per class per fold")


def _envelope(n: int, rate: int) -> np.ndarray:
    """Linear 10 ms attack and release so clips start and end silent."""
    ramp = max(1, int(0.01 * rate))
    env = np.ones(n)
    env[:ramp] = np.linspace(0.0, 1.0, ramp)
    env[-ramp:] = np.linspace(1.0, 0.0, ramp)
    return env


def _tone(rng: np.random.Generator, n: int, rate: int) -> np.ndarray:
    freq = rng.uniform(300.0, 900.0)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    t = np.arange(n) / rate
    return 0.7 * np.sin(2.0 * np.pi * freq * t + phase)


def _click_train(rng: np.random.Generator, n: int, rate: int) -> np.ndarray:
    clicks_hz = rng.uniform(6.0, 14.0)
    period = int(rate / clicks_hz)
    burst_len = int(0.005 * rate)
    burst = rng.normal(0.0, 1.0, burst_len) * np.exp(-np.arange(burst_len) / (burst_len / 4))
    out = np.zeros(n)
    start = int(rng.uniform(0, period))
    while start + burst_len <= n:
        out[start:start + burst_len] += burst
        start += period
    peak = np.max(np.abs(out))
    return 0.8 * out / peak if peak > 0 else out


def _am_noise(rng: np.random.Generator, n: int, rate: int) -> np.ndarray:
    mod_hz = rng.uniform(2.0, 6.0)
    t = np.arange(n) / rate
    carrier = rng.normal(0.0, 1.0, n)
    mod = 0.5 + 0.5 * np.sin(2.0 * np.pi * mod_hz * t + rng.uniform(0, 2 * np.pi))
    out = carrier * mod
    return 0.5 * out / np.max(np.abs(out))


def _chirp(rng: np.random.Generator, n: int, rate: int) -> np.ndarray:
    f0 = rng.uniform(200.0, 500.0)
    f1 = rng.uniform(3000.0, 6000.0)
    t = np.arange(n) / rate
    duration = n / rate
    phase = 2.0 * np.pi * (f0 * t + (f1 - f0) / (2.0 * duration) * t * t)
    return 0.7 * np.sin(phase)


_GENERATORS = {
    "tone": _tone,
    "click_train": _click_train,
    "am_noise": _am_noise,
    "chirp": _chirp,
}


def render_clip(spec: SyntheticSpec, class_idx: int, clip_idx: int) -> np.ndarray:
    """Samples in [-1, 1] for one clip, independent of any other clip."""
    name = spec.classes[class_idx]
    rng = np.random.default_rng([spec.seed, class_idx, clip_idx])
    n = int(round(spec.seconds * spec.sample_rate))
    samples = _GENERATORS[name](rng, n, spec.sample_rate) * _envelope(n, spec.sample_rate)
    return np.clip(samples, -1.0, 1.0)


def make_corpus(root: str | Path, spec: SyntheticSpec = SyntheticSpec()) -> Path:
    """Write WAV clips plus a manifest CSV; returns the manifest path.

    Layout matches what the experiment loader expects: ``root/audio/*.wav``
    and ``root/meta.csv`` with columns filename, fold, target, category.
    """
    root = Path(root)
    audio_dir = root / "audio"
    audio_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for class_idx, name in enumerate(spec.classes):
        for clip_idx in range(spec.clips_per_class):
            fold = clip_idx % spec.n_folds + 1
            filename = f"{name}-{clip_idx:02d}.wav"
            write_wav(audio_dir / filename, render_clip(spec, class_idx, clip_idx),
                      spec.sample_rate, encoding="pcm16")
            rows.append((filename, fold, class_idx, name))
    manifest_path = root / "meta.csv"
    with open(manifest_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["filename", "fold", "target", "category"])
        writer.writerows(rows)
    return manifest_path
