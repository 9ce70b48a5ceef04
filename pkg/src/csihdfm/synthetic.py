"""Seeded stand-ins for recorded activity data.

Each activity class is a pair of sinusoidal temporal factors with random
per-recording loadings, observed through unit-variance noise. Classes come
in pairs that share their dominant factor and differ only in the weaker one,
so a single principal component cannot tell the members of a pair apart.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import (
    N_SUBCARRIERS,
    CsiFrame,
    DataMatrix,
    DatasetManifest,
    ManifestEntry,
    serialize_log,
    write_manifest,
)
from .pipeline import ChannelSample

ACTIVITIES = ("lying_down", "picking_up", "sitting_down", "standing", "standing_up", "walking")
# cycles per sample; class i uses DOMINANT[i // 2] and SECONDARY[i]
DOMINANT = (0.004, 0.010, 0.016)
SECONDARY = (0.006, 0.013, 0.007, 0.019, 0.009, 0.022)


@dataclass(frozen=True)
class ActivitySpec:
    n_per_class: int = 60
    n: int = 90
    t: int = 500
    dominant_strength: float = 1.0
    secondary_strength: float = 0.5
    noise: float = 1.0
    freq_jitter: float = 0.02
    phase_jitter: float = 0.1
    seed: int = 0


def activity_factors(label_index: int, t: int, rng: np.random.Generator, spec: ActivitySpec) -> np.ndarray:
    """(2, t) factor rows of one recording of class ``label_index``."""
    base = np.array([DOMINANT[label_index // 2], SECONDARY[label_index]])
    freqs = base * (1.0 + spec.freq_jitter * rng.uniform(-1.0, 1.0, size=2))
    phases = spec.phase_jitter * rng.uniform(-np.pi, np.pi, size=2)
    tt = np.arange(1, t + 1)
    return np.sin(2.0 * np.pi * freqs[:, None] * tt[None, :] + phases[:, None])


def activity_matrix(label_index: int, rng: np.random.Generator, spec: ActivitySpec) -> np.ndarray:
    f = activity_factors(label_index, spec.t, rng, spec)
    load = rng.standard_normal((spec.n, 2)) * np.array([spec.dominant_strength, spec.secondary_strength])
    return load @ f + spec.noise * rng.standard_normal((spec.n, spec.t))


def synthetic_activity_dataset(spec: ActivitySpec = ActivitySpec()) -> list[ChannelSample]:
    """``n_per_class`` recordings of each of six activities, one amplitude-like channel each."""
    rng = np.random.default_rng(spec.seed)
    samples = []
    for rep in range(spec.n_per_class):
        for li, label in enumerate(ACTIVITIES):
            m = DataMatrix.from_array(activity_matrix(li, rng, spec))
            samples.append(ChannelSample([m], label, f"{label}-{rep:03d}"))
    return samples


def capture_frames(
    amplitude: np.ndarray, rng: np.random.Generator, n_tx: int = 3, n_rx: int = 3, level: float = 40.0
) -> list[CsiFrame]:
    """Quantise a (n_tx * n_rx * 30, T) amplitude pattern into raw CSI frames.

    Amplitudes are shifted to be positive and scaled to ``level`` counts;
    phases get a per-frame linear subcarrier ramp and random offset, as a
    receiver with unsynchronised clocks would report.
    """
    rows, t = amplitude.shape
    if rows != n_tx * n_rx * N_SUBCARRIERS:
        raise ValueError(f"need {n_tx * n_rx * N_SUBCARRIERS} rows for {n_tx}x{n_rx} links")
    amp = amplitude - amplitude.min() + 1.0
    amp = amp * (level / amp.max())
    amp = amp.reshape(n_tx, n_rx, N_SUBCARRIERS, t).transpose(2, 0, 1, 3)
    sub = np.arange(N_SUBCARRIERS)[:, None, None]
    frames = []
    for i in range(t):
        ramp = rng.uniform(-0.3, 0.3) * sub + rng.uniform(-np.pi, np.pi)
        phase = ramp + 0.05 * rng.standard_normal((N_SUBCARRIERS, n_tx, n_rx))
        c = amp[..., i] * np.exp(1j * phase)
        c = np.clip(np.rint(c.real), -128, 127) + 1j * np.clip(np.rint(c.imag), -128, 127)
        frames.append(
            CsiFrame(
                timestamp_low=1000 * i,
                bfee_count=i & 0xFFFF,
                n_rx=n_rx,
                n_tx=n_tx,
                rssi_a=40,
                rssi_b=41,
                rssi_c=39,
                noise=-127,
                agc=20,
                antenna_perm=(0, 1, 2),
                rate_flags=0x4101,
                csi=c,
            )
        )
    return frames


def write_capture_dataset(
    out_dir: str | os.PathLike, spec: ActivitySpec = ActivitySpec(n_per_class=4, n=270, t=300)
) -> Path:
    """Write one ``.dat`` capture per recording plus a manifest; returns the manifest path."""
    if spec.n != 3 * 3 * N_SUBCARRIERS:
        raise ValueError("capture datasets need n = 270 rows (3x3 links)")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    entries = []
    for rep in range(spec.n_per_class):
        for li, label in enumerate(ACTIVITIES):
            frames = capture_frames(activity_matrix(li, rng, spec), rng)
            name = f"{label}_{rep:03d}.dat"
            (out / name).write_bytes(serialize_log(frames))
            entries.append(ManifestEntry(name, label, f"s{rep % 6}", rep))
    manifest = out / "manifest.csv"
    write_manifest(DatasetManifest(entries), manifest)
    return manifest
