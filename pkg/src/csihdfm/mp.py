"""Marchenko-Pastur law and goodness of fit of an eigenvalue bulk.

For an N x T matrix of i.i.d. noise with variance sigma2 and c = N/T <= 1 the
eigenvalues of (1/T) X X^T follow, as N, T grow, the density

    f(x) = sqrt((b - x)(x - a)) / (2 pi c sigma2 x),   a <= x <= b

with edges a = sigma2 (1 - sqrt c)^2 and b = sigma2 (1 + sqrt c)^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CDF_PANELS = 10_000
DEFAULT_SPIKE_MARGIN = 0.02


@dataclass(frozen=True)
class MpLaw:
    c: float
    sigma2: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.c <= 1.0):
            raise ValueError(f"aspect ratio c must lie in (0, 1], got {self.c}")
        if not self.sigma2 > 0.0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")

    @property
    def a(self) -> float:
        return self.sigma2 * (1.0 - math.sqrt(self.c)) ** 2

    @property
    def b(self) -> float:
        return self.sigma2 * (1.0 + math.sqrt(self.c)) ** 2

    def pdf(self, x):
        return mp_pdf(self, x)

    def cdf(self, x):
        return mp_cdf(self, x)


def mp_pdf(law: MpLaw, x):
    """Density at ``x`` (scalar or array); zero outside [a, b]."""
    x = np.asarray(x, dtype=np.float64)
    a, b = law.a, law.b
    inside = (x >= a) & (x <= b) & (x > 0)
    xs = np.where(inside, x, 1.0)
    val = np.sqrt(np.clip((b - xs) * (xs - a), 0.0, None)) / (2.0 * np.pi * law.c * law.sigma2 * xs)
    out = np.where(inside, val, 0.0)
    return float(out) if out.ndim == 0 else out


def _integrand(law: MpLaw, u: np.ndarray) -> np.ndarray:
    # density after x = a + (b - a) sin^2(u); dx = (b - a) sin(2u) du
    a, b = law.a, law.b
    w = b - a
    s = np.sin(u) ** 2
    x = a + w * s
    # s / x stays finite as x -> 0 when a == 0
    s_over_x = np.divide(s, x, out=np.full_like(s, 1.0 / w), where=x > 0)
    return w * w * 2.0 * s_over_x * (1.0 - s) / (2.0 * np.pi * law.c * law.sigma2)


def _cumulative_table(law: MpLaw, panels: int) -> tuple[float, np.ndarray]:
    # composite Simpson partial sums over [0, pi/2] at every even node
    n = panels + (panels % 2)
    h = 0.5 * np.pi / n
    g = _integrand(law, h * np.arange(n + 1))
    pair = (g[:-2:2] + 4.0 * g[1:-1:2] + g[2::2]) * (h / 3.0)
    return h, np.concatenate([[0.0], np.cumsum(pair)])


def mp_cdf(law: MpLaw, x, panels: int = CDF_PANELS):
    """Distribution function by composite Simpson quadrature in the sin^2 variable.

    Partial sums over a ``panels``-panel grid on [0, pi/2] are tabulated
    once; the stretch between the last grid pair and the target is added
    with a local two-panel Simpson rule.
    """
    x = np.asarray(x, dtype=np.float64)
    flat = x.ravel()
    a, b = law.a, law.b
    out = np.zeros(flat.shape)
    mid = (flat > a) & (flat < b)
    if mid.any():
        h, table = _cumulative_table(law, panels)
        upper = np.arcsin(np.sqrt(np.clip((flat[mid] - a) / (b - a), 0.0, 1.0)))
        m = np.minimum((upper / (2.0 * h)).astype(int), len(table) - 1)
        lo = 2.0 * h * m
        rest = upper - lo
        local = (
            _integrand(law, lo) + 4.0 * _integrand(law, lo + 0.5 * rest) + _integrand(law, upper)
        ) * (rest / 6.0)
        out[mid] = table[m] + local
    out[flat >= b] = 1.0
    out = np.clip(out, 0.0, 1.0).reshape(x.shape)
    return float(out) if out.ndim == 0 else out


def mp_quantiles(law: MpLaw, probs, panels: int = CDF_PANELS) -> np.ndarray:
    """Inverse distribution function by bisection on :func:`mp_cdf`."""
    probs = np.asarray(probs, dtype=np.float64)
    lo = np.full(probs.shape, law.a)
    hi = np.full(probs.shape, law.b)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = mp_cdf(law, mid, panels) < probs
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


@dataclass
class SpectrumFit:
    bulk_eigenvalues: np.ndarray
    spike_eigenvalues: np.ndarray
    ks_distance: float
    spike_threshold: float

    @property
    def n_spikes(self) -> int:
        return len(self.spike_eigenvalues)


def ks_distance(sorted_values: np.ndarray, law: MpLaw) -> float:
    """Two-sided sup distance between the empirical CDF of the values and the law."""
    n = len(sorted_values)
    if n == 0:
        return 0.0
    f = mp_cdf(law, sorted_values)
    i = np.arange(1, n + 1)
    return float(min(1.0, max(np.max(i / n - f), np.max(f - (i - 1) / n))))


def fit_spectrum(eigenvalues, law: MpLaw, spike_margin: float = DEFAULT_SPIKE_MARGIN) -> SpectrumFit:
    """Split a spectrum into bulk and spikes above ``b * (1 + spike_margin)`` and score the bulk."""
    ev = np.sort(np.asarray(eigenvalues, dtype=np.float64))
    if ev.size == 0:
        raise ValueError("empty spectrum")
    if spike_margin < 0:
        raise ValueError("spike_margin must be nonnegative")
    thresh = law.b * (1.0 + spike_margin)
    spikes = ev[ev > thresh]
    bulk = ev[ev <= thresh]
    return SpectrumFit(bulk, spikes, ks_distance(bulk, law), thresh)


def density_overlay(law: MpLaw, points: int = 512, lo: float | None = None, hi: float | None = None) -> np.ndarray:
    """(x, density) table over the support, for plotting against a histogram."""
    lo = law.a if lo is None else lo
    hi = law.b if hi is None else hi
    x = np.linspace(lo, hi, points)
    return np.column_stack([x, mp_pdf(law, x)])
