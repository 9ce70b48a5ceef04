"""High-dimensional factor model fitted by principal components.

``R = L F + U``: a few temporal factors with per-channel loadings plus
idiosyncratic noise. Removing the top-p principal components leaves the
p-level residual; when p matches the number of factors the residual
covariance spectrum has no eigenvalues left above the Marchenko-Pastur edge.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .ingest import DataMatrix
from .mp import DEFAULT_SPIKE_MARGIN, MpLaw, SpectrumFit, fit_spectrum

logger = logging.getLogger(__name__)

DEFAULT_FREQUENCIES = (0.02, 0.01, 0.005)
DEFAULT_POOL_LENGTH = 50


@dataclass
class FactorFit:
    p: int
    loadings: np.ndarray  # (N, p)
    factors: np.ndarray  # (p, T)
    residuals: np.ndarray  # (N, T)
    residual_spectrum: np.ndarray  # ascending eigenvalues of the residual covariance
    sigma2_hat: float
    fit: SpectrumFit
    kept_rows: np.ndarray  # indices of input rows that entered the decomposition

    @property
    def n_spikes(self) -> int:
        return self.fit.n_spikes

    @property
    def ks_distance(self) -> float:
        return self.fit.ks_distance


@dataclass
class Decomposition:
    """Demeaned data and its thin SVD, shared by fits at different p."""

    centered: np.ndarray
    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray
    kept_rows: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.centered.shape


def decompose(data: DataMatrix | np.ndarray) -> Decomposition:
    """Demean each row over time, drop constant rows, and take the thin SVD."""
    values = data.values if isinstance(data, DataMatrix) else np.asarray(data, dtype=np.float64)
    centered = values - values.mean(axis=1, keepdims=True)
    keep = np.flatnonzero(np.ptp(values, axis=1) > 0.0)
    if len(keep) < len(values):
        logger.warning("dropping %d zero-variance rows", len(values) - len(keep))
        centered = centered[keep]
    if len(keep) == 0:
        raise ValueError("every row has zero variance")
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    return Decomposition(centered, u, s, vt, keep)


def residual_covariance(residuals: np.ndarray) -> np.ndarray:
    return residuals @ residuals.T / residuals.shape[1]


def fit_from_decomposition(
    dec: Decomposition, p: int, spike_margin: float = DEFAULT_SPIKE_MARGIN
) -> FactorFit:
    n, t = dec.shape
    if not 0 <= p <= min(n, t):
        raise ValueError(f"p={p} outside 0..{min(n, t)}")
    loadings = dec.u[:, :p] * dec.s[:p]
    factors = dec.vt[:p]
    residuals = dec.centered - loadings @ factors
    spectrum = np.clip(np.linalg.eigvalsh(residual_covariance(residuals)), 0.0, None)
    sigma2 = float(np.trace(residuals @ residuals.T) / t / n)
    if n > t:
        raise ValueError(f"aspect ratio N/T = {n}/{t} exceeds 1; transpose or shorten the channel set")
    law = MpLaw(n / t, sigma2 if sigma2 > 0 else np.finfo(float).tiny)
    # the p removed directions are exact zeros of the spectrum, not part of the noise bulk
    fit = fit_spectrum(spectrum[p:] if p < n else spectrum, law, spike_margin)
    return FactorFit(p, loadings, factors, residuals, spectrum, sigma2, fit, dec.kept_rows)


def remove_factors(data: DataMatrix | np.ndarray, p: int, spike_margin: float = DEFAULT_SPIKE_MARGIN) -> FactorFit:
    """Remove the top-p principal components and score the residual spectrum."""
    return fit_from_decomposition(decompose(data), p, spike_margin)


def default_p_max(n: int, t: int) -> int:
    return min(min(n, t) // 4, 50)


@dataclass
class FactorSelection:
    p_star: int
    fits: list[FactorFit] = field(default_factory=list)
    converged: bool = True

    @property
    def spike_counts(self) -> list[int]:
        return [f.n_spikes for f in self.fits]

    @property
    def ks_distances(self) -> list[float]:
        return [f.ks_distance for f in self.fits]

    @property
    def best(self) -> FactorFit:
        return self.fits[-1]


def select_factor_count(
    data: DataMatrix | np.ndarray,
    p_max: int | None = None,
    spike_margin: float = DEFAULT_SPIKE_MARGIN,
) -> FactorSelection:
    """Remove factors one at a time until the residual spectrum has no spikes.

    Returns the smallest such p with every fit evaluated along the way. If
    no p up to ``p_max`` clears the spikes, ``p_max`` is returned with
    ``converged=False``.
    """
    dec = decompose(data)
    n, t = dec.shape
    if p_max is None:
        p_max = default_p_max(n, t)
    if not 0 <= p_max <= min(n, t):
        raise ValueError(f"p_max={p_max} outside 0..{min(n, t)}")
    fits = []
    for p in range(p_max + 1):
        fit = fit_from_decomposition(dec, p, spike_margin)
        fits.append(fit)
        if fit.n_spikes == 0:
            return FactorSelection(p, fits, True)
    logger.warning("residual spectrum still has spikes at p_max=%d", p_max)
    return FactorSelection(p_max, fits, False)


@dataclass(frozen=True)
class SyntheticSpec:
    n: int = 400
    t: int = 1000
    p_true: int = 3
    frequencies: tuple[float, ...] | None = None
    seed: int = 0

    def freqs(self) -> tuple[float, ...]:
        if self.frequencies is not None:
            return tuple(self.frequencies)
        if self.p_true > len(DEFAULT_FREQUENCIES):
            # further factors continue the halving sequence
            return tuple(DEFAULT_FREQUENCIES[0] / 2**j for j in range(self.p_true))
        return DEFAULT_FREQUENCIES[: self.p_true]

    def validate(self) -> None:
        f = self.freqs()
        if self.n < 2 or self.t < 2:
            raise ValueError("n and t must be at least 2")
        if len(f) != self.p_true:
            raise ValueError(f"{len(f)} frequencies given for p_true={self.p_true}")
        if any(not 0.0 < x < 0.5 for x in f):
            raise ValueError("frequencies must lie strictly between 0 and 0.5 cycles/sample")
        if len(set(f)) != len(f):
            raise ValueError("frequencies must be distinct")


def generate_synthetic(spec: SyntheticSpec = SyntheticSpec()) -> tuple[DataMatrix, np.ndarray]:
    """Sinusoidal factors with Gaussian loadings plus unit Gaussian noise.

    Returns the data matrix and the true (p_true, t) factor matrix.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    loadings = rng.standard_normal((spec.n, spec.p_true))
    noise = rng.standard_normal((spec.n, spec.t))
    tt = np.arange(1, spec.t + 1)
    factors = np.sin(2.0 * np.pi * np.asarray(spec.freqs())[:, None] * tt[None, :])
    if spec.p_true == 0:
        factors = np.zeros((0, spec.t))
    return DataMatrix.from_array(loadings @ factors + noise, sample_rate=1.0), factors


def pool_factors(factors: np.ndarray, pool_length: int = DEFAULT_POOL_LENGTH) -> np.ndarray:
    """Mean-pool each factor row into ``pool_length`` segments and fix its sign.

    Segments are as equal as the row length allows. Each pooled row is
    flipped so its largest-magnitude entry is positive.
    """
    factors = np.atleast_2d(np.asarray(factors, dtype=np.float64))
    t = factors.shape[1]
    if pool_length < 1:
        raise ValueError("pool_length must be at least 1")
    if t < pool_length:
        raise ValueError(f"series of length {t} is shorter than pool_length={pool_length}")
    # edge j is round(j * t / L) with halves rounded up, in exact integers
    j = np.arange(pool_length + 1)
    edges = (2 * j * t + pool_length) // (2 * pool_length)
    sums = np.add.reduceat(factors, edges[:-1], axis=1)
    pooled = sums / np.diff(edges)
    peak = pooled[np.arange(len(pooled)), np.argmax(np.abs(pooled), axis=1)]
    pooled *= np.where(peak < 0, -1.0, 1.0)[:, None]
    return pooled.ravel()


def extract_features(
    data: DataMatrix | np.ndarray | FactorFit, p: int, pool_length: int = DEFAULT_POOL_LENGTH
) -> np.ndarray:
    """Feature vector of length ``p * pool_length`` from the top-p temporal factors."""
    if p < 1:
        raise ValueError("p must be at least 1")
    if isinstance(data, FactorFit):
        if data.p < p:
            raise ValueError(f"fit holds {data.p} factors, {p} requested")
        factors = data.factors[:p]
    else:
        dec = decompose(data)
        if p > min(dec.shape):
            raise ValueError(f"p={p} exceeds matrix rank bound {min(dec.shape)}")
        factors = dec.vt[:p]
    return pool_factors(factors, pool_length)
