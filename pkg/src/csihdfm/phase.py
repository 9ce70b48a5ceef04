"""Phase sanitisation: unwrapping and removal of the linear subcarrier ramp.

Sampling time and frequency offsets add a phase term linear in the subcarrier
index plus a common offset. Subtracting the end-to-end slope ``k`` times the
index and the mean phase ``b`` cancels both for every frame independently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ingest import CALIBRATED_PHASE, N_SUBCARRIERS, RAW_PHASE, DataMatrix

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SubcarrierIndexSet:
    indices: tuple[int, ...]
    flavor: str

    def __post_init__(self):
        m = np.asarray(self.indices)
        if len(m) != N_SUBCARRIERS:
            raise ValueError(f"index set needs {N_SUBCARRIERS} entries, got {len(m)}")
        if np.any(np.diff(m) <= 0):
            raise ValueError("subcarrier indices must be strictly increasing")

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.float64)


# 802.11n 20 MHz, grouping Ng = 2, as reported by the Intel 5300; sums to 13
STANDARD_NG2 = SubcarrierIndexSet(
    tuple(range(-28, -1, 2)) + (-1, 1) + tuple(range(3, 28, 2)) + (28,),
    "standard_ng2",
)
# symmetric variant over -28..28 whose indices sum to zero
PAPER_IDEAL = SubcarrierIndexSet(
    tuple(range(-28, -1, 2)) + (-1, 1) + tuple(range(2, 29, 2)),
    "paper_ideal",
)

INDEX_SETS = {s.flavor: s for s in (STANDARD_NG2, PAPER_IDEAL)}


def index_set(flavor: str) -> SubcarrierIndexSet:
    try:
        return INDEX_SETS[flavor]
    except KeyError:
        raise ValueError(f"unknown index set {flavor!r}; choose from {sorted(INDEX_SETS)}") from None


@dataclass(frozen=True)
class CalibrationCoefficients:
    k: float
    b: float


def unwrap(raw: np.ndarray, axis: int = -1) -> np.ndarray:
    """Unwrap phases along ``axis`` so successive differences lie in (-pi, pi].

    The first element is kept; every output differs from its input by an
    exact integer multiple of 2*pi.
    """
    raw = np.asarray(raw, dtype=np.float64)
    d = np.diff(raw, axis=axis)
    dmod = np.pi - np.mod(np.pi - d, TWO_PI)
    turns = np.rint((dmod - d) / TWO_PI)
    pad = [(0, 0)] * raw.ndim
    pad[axis] = (1, 0)
    turns = np.pad(np.cumsum(turns, axis=axis), pad)
    return raw + TWO_PI * turns


def calibrate(
    unwrapped: np.ndarray, idx: SubcarrierIndexSet = STANDARD_NG2
) -> tuple[np.ndarray, CalibrationCoefficients]:
    """Subtract ``k * m_i + b`` from one 30-subcarrier phase vector.

    ``k`` is the slope between the first and last subcarrier and ``b`` the
    mean phase. The result has identical first and last entries.
    """
    theta = np.asarray(unwrapped, dtype=np.float64)
    if theta.shape != (len(idx.indices),):
        raise ValueError(f"expected {len(idx.indices)} phases, got shape {theta.shape}")
    out, k, b = _calibrate_columns(theta[:, None], idx)
    return out[:, 0], CalibrationCoefficients(float(k[0]), float(b[0]))


def _calibrate_columns(theta: np.ndarray, idx: SubcarrierIndexSet):
    # theta: (30, T); each column calibrated on its own
    m = idx.array
    span = m[-1] - m[0]
    if span == 0:
        raise ValueError("degenerate index set: first and last index coincide")
    first, last = theta[0], theta[-1]
    k = (last - first) / span
    b = theta.mean(axis=0)
    # chord weights are exactly 0 and 1 at the ends so both endpoints detrend to 0.0
    w = ((m - m[0]) / span)[:, None]
    chord = first * (1.0 - w) + last * w
    offset = first - k * m[0] - b
    return (theta - chord) + offset, k, b


def calibrate_matrix(raw_phase: DataMatrix, idx: SubcarrierIndexSet = STANDARD_NG2) -> DataMatrix:
    """Unwrap and calibrate every (tx, rx) link of a raw-phase matrix frame by frame."""
    links: dict[tuple[int, int], list[int]] = {}
    for row, (t, r, s, kind) in enumerate(raw_phase.row_labels):
        if kind != RAW_PHASE:
            raise ValueError(f"row {row} has kind {kind!r}, expected {RAW_PHASE!r}")
        links.setdefault((t, r), []).append(row)
    out = np.empty_like(raw_phase.values)
    for rows in links.values():
        rows = sorted(rows, key=lambda i: raw_phase.row_labels[i][2])
        if len(rows) != N_SUBCARRIERS:
            raise ValueError(f"link has {len(rows)} subcarriers, need {N_SUBCARRIERS}")
        block = unwrap(raw_phase.values[rows], axis=0)
        out[rows], _, _ = _calibrate_columns(block, idx)
    labels = [(t, r, s, CALIBRATED_PHASE) for (t, r, s, _) in raw_phase.row_labels]
    return DataMatrix(out, labels, raw_phase.sample_rate)
