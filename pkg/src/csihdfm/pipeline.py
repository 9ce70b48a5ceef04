"""Feature pipelines for the two comparison arms.

The HDFM arm chooses the factor count of every recording by removing
components until the residual spectrum fits the Marchenko-Pastur law; the
PCA arm uses a fixed count. Both then share the same pooling and classifier
plumbing, so any accuracy difference is due to the choice of p alone.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .classify import ClassifierSpec, EvalReport, FeatureSet, evaluate, split_indices, train_and_predict
from .factor import (
    DEFAULT_POOL_LENGTH,
    Decomposition,
    FactorSelection,
    decompose,
    pool_factors,
    select_factor_count,
)
from .ingest import DataMatrix, Sample
from .mp import DEFAULT_SPIKE_MARGIN
from .phase import STANDARD_NG2, SubcarrierIndexSet, calibrate_matrix


@dataclass(frozen=True)
class FeatureConfig:
    """``p=None`` selects the factor count by spectrum fitting; an int fixes it."""

    p: int | None = None
    pool_length: int = DEFAULT_POOL_LENGTH
    p_max: int | None = None
    spike_margin: float = DEFAULT_SPIKE_MARGIN

    @property
    def arm(self) -> str:
        return "hdfm" if self.p is None else "pca"


@dataclass
class ChannelSample:
    channels: list[DataMatrix]
    label: str
    sample_id: str


def sample_channels(
    sample: Sample, channels: str = "both", idx: SubcarrierIndexSet = STANDARD_NG2, sample_id: str = ""
) -> ChannelSample:
    """Select amplitude and/or calibrated phase matrices of a loaded recording."""
    if channels not in ("amplitude", "phase", "both"):
        raise ValueError("channels must be 'amplitude', 'phase' or 'both'")
    mats = []
    if channels in ("amplitude", "both"):
        mats.append(sample.amplitude)
    if channels in ("phase", "both"):
        mats.append(calibrate_matrix(sample.phase, idx))
    return ChannelSample(mats, sample.label, sample_id or sample.path)


@dataclass
class ChannelDiagnostics:
    sample_id: str
    channel: str
    p_star: int
    converged: bool
    spike_counts: list[int]
    ks_distances: list[float]
    sigma2_hat: list[float]


@dataclass
class ArmResult:
    config: FeatureConfig
    features: FeatureSet
    feature_p: list[int]
    report: EvalReport
    predictions: list[tuple[str, str, str]]
    diagnostics: list[ChannelDiagnostics] = field(default_factory=list)


def _channel_name(m: DataMatrix) -> str:
    kinds = {lab[3] for lab in m.row_labels}
    return kinds.pop() if len(kinds) == 1 else "mixed"


def _common_count(counts: Sequence[int]) -> int:
    # most frequent selected count; ties go to the larger p, never below 1
    tally = Counter(counts)
    best = max(tally.items(), key=lambda kv: (kv[1], kv[0]))[0]
    return max(best, 1)


class _Cache:
    def __init__(self, samples: Sequence[ChannelSample]):
        self.samples = samples
        self._dec: dict[tuple[int, int], Decomposition] = {}
        self._sel: dict[tuple[int, int, int | None, float], FactorSelection] = {}

    def decomposition(self, i: int, c: int) -> Decomposition:
        key = (i, c)
        if key not in self._dec:
            self._dec[key] = decompose(self.samples[i].channels[c])
        return self._dec[key]

    def selection(self, i: int, c: int, p_max, margin) -> FactorSelection:
        key = (i, c, p_max, margin)
        if key not in self._sel:
            self._sel[key] = select_factor_count(self.samples[i].channels[c], p_max, margin)
        return self._sel[key]


def build_features(
    samples: Sequence[ChannelSample],
    config: FeatureConfig,
    reference: Sequence[int] | None = None,
    cache: _Cache | None = None,
) -> tuple[FeatureSet, list[int], list[ChannelDiagnostics]]:
    """Pooled-factor features of every sample, concatenated over channels.

    For the HDFM arm the per-channel factor count is the most common selected
    p among the ``reference`` samples (all samples when omitted), so every
    feature vector has the same length.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("no samples")
    n_channels = len(samples[0].channels)
    if any(len(s.channels) != n_channels for s in samples):
        raise ValueError("samples carry different channel counts")
    cache = cache or _Cache(samples)
    reference = range(len(samples)) if reference is None else reference
    diagnostics = []
    if config.p is None:
        counts = []
        for c in range(n_channels):
            per_sample = []
            for i, s in enumerate(samples):
                sel = cache.selection(i, c, config.p_max, config.spike_margin)
                per_sample.append(sel.p_star)
                diagnostics.append(
                    ChannelDiagnostics(
                        s.sample_id,
                        _channel_name(s.channels[c]),
                        sel.p_star,
                        sel.converged,
                        sel.spike_counts,
                        sel.ks_distances,
                        [f.sigma2_hat for f in sel.fits],
                    )
                )
            counts.append(_common_count([per_sample[i] for i in reference]))
    else:
        if config.p < 1:
            raise ValueError("fixed p must be at least 1")
        counts = [config.p] * n_channels
    rows = []
    for i in range(len(samples)):
        parts = []
        for c in range(n_channels):
            dec = cache.decomposition(i, c)
            if counts[c] > min(dec.shape):
                raise ValueError(f"sample {samples[i].sample_id}: p={counts[c]} exceeds rank bound")
            parts.append(pool_factors(dec.vt[: counts[c]], config.pool_length))
        rows.append(np.concatenate(parts))
    labels = [s.label for s in samples]
    fs = FeatureSet(np.vstack(rows), labels, sorted(set(labels)), [s.sample_id for s in samples])
    return fs, counts, diagnostics


def run_arm(
    samples: Sequence[ChannelSample],
    config: FeatureConfig,
    classifier: ClassifierSpec = ClassifierSpec(),
    seed: int = 0,
    test_fraction: float = 0.25,
    cache: _Cache | None = None,
) -> ArmResult:
    labels = [s.label for s in samples]
    label_set = sorted(set(labels))
    train_idx, test_idx = split_indices(labels, label_set, test_fraction, seed)
    fs, counts, diag = build_features(samples, config, reference=train_idx, cache=cache)
    train, test = fs.subset(train_idx), fs.subset(test_idx)
    pred = train_and_predict(train, test, classifier, seed)
    rows = list(zip(test.sample_ids, test.labels, pred))
    report = evaluate([(t, p) for _, t, p in rows], label_set)
    return ArmResult(config, fs, counts, report, rows, diag)


@dataclass
class Comparison:
    hdfm: ArmResult
    pca: ArmResult

    @property
    def delta(self) -> float:
        """HDFM accuracy minus PCA accuracy."""
        return self.hdfm.report.accuracy - self.pca.report.accuracy


def compare_pipelines(
    samples: Sequence[ChannelSample],
    classifier: ClassifierSpec = ClassifierSpec(),
    hdfm_config: FeatureConfig = FeatureConfig(),
    pca_config: FeatureConfig = FeatureConfig(p=1),
    seed: int = 0,
    test_fraction: float = 0.25,
) -> Comparison:
    """Run both arms on the same split and classifier."""
    cache = _Cache(list(samples))
    return Comparison(
        run_arm(samples, hdfm_config, classifier, seed, test_fraction, cache),
        run_arm(samples, pca_config, classifier, seed, test_fraction, cache),
    )

