"""Reading Intel 5300 style CSI capture logs.

A capture log is a flat sequence of records. Every record starts with a
2-byte big-endian length (covering the code byte and the body) followed by
a 1-byte code. Code ``0xBB`` carries one beamforming feedback measurement;
all other codes are skipped.

The CSI body is bit-packed: for each of the 30 reported subcarriers the bit
cursor skips 3 bits and then reads ``n_rx * n_tx`` complex values as signed
8-bit (real, imag) pairs. Bits are consumed least-significant first within
each byte. Within one subcarrier the transmit index varies fastest.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

CSI_CODE = 0xBB
N_SUBCARRIERS = 30
HEADER_SIZE = 20
_HEADER = struct.Struct("<IHHBBBBBbBBHH")

AMPLITUDE = "amplitude"
RAW_PHASE = "raw_phase"
CALIBRATED_PHASE = "calibrated_phase"
CHANNEL_KINDS = (AMPLITUDE, RAW_PHASE, CALIBRATED_PHASE)


class CsiFormatError(ValueError):
    """A record or file that cannot be interpreted as CSI."""


@dataclass
class CsiFrame:
    timestamp_low: int
    bfee_count: int
    n_rx: int
    n_tx: int
    rssi_a: int
    rssi_b: int
    rssi_c: int
    noise: int
    agc: int
    antenna_perm: tuple[int, int, int]
    rate_flags: int
    csi: np.ndarray  # (30, n_tx, n_rx) complex

    @property
    def antenna_sel(self) -> int:
        p = self.antenna_perm
        return (p[0] & 3) | ((p[1] & 3) << 2) | ((p[2] & 3) << 4)

    def perm_is_valid(self) -> bool:
        return sorted(self.antenna_perm[: self.n_rx]) == list(range(self.n_rx))

    def __eq__(self, other):
        if not isinstance(other, CsiFrame):
            return NotImplemented
        return (
            self.metadata() == other.metadata()
            and self.csi.shape == other.csi.shape
            and np.array_equal(self.csi, other.csi)
        )

    def metadata(self) -> dict:
        return {
            "timestamp_low": self.timestamp_low,
            "bfee_count": self.bfee_count,
            "n_rx": self.n_rx,
            "n_tx": self.n_tx,
            "rssi_a": self.rssi_a,
            "rssi_b": self.rssi_b,
            "rssi_c": self.rssi_c,
            "noise": self.noise,
            "agc": self.agc,
            "antenna_perm": tuple(self.antenna_perm),
            "rate_flags": self.rate_flags,
        }


@dataclass
class ParseResult:
    """Frames decoded from one byte stream, with bookkeeping of what was dropped."""

    frames: list[CsiFrame] = field(default_factory=list)
    skipped_records: int = 0
    malformed_records: int = 0
    truncated_bytes: int = 0
    invalid_perm: int = 0
    errors: list[str] = field(default_factory=list)

    @property
    def warning_count(self) -> int:
        return self.malformed_records + (self.truncated_bytes > 0) + self.invalid_perm


def payload_length(n_rx: int, n_tx: int) -> int:
    """Byte length of the packed CSI body for an antenna configuration."""
    bits = N_SUBCARRIERS * (3 + 16 * n_rx * n_tx)
    return (bits + 6) // 8


def _bit_offsets(n_rx: int, n_tx: int) -> np.ndarray:
    """Bit offset of every real component, shape (30, n_rx * n_tx)."""
    n = n_rx * n_tx
    sub = np.arange(N_SUBCARRIERS)[:, None] * (3 + 16 * n) + 3
    return sub + 16 * np.arange(n)[None, :]


def _read_int8(buf: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    byte = offsets >> 3
    shift = (offsets & 7).astype(np.uint16)
    lo = buf[byte].astype(np.uint16) >> shift
    hi = buf[byte + 1].astype(np.uint16) << (8 - shift)
    return ((lo | hi) & 0xFF).astype(np.uint8).view(np.int8)


def unpack_csi(payload: bytes, n_rx: int, n_tx: int) -> np.ndarray:
    """Decode a packed CSI body into a (30, n_tx, n_rx) complex array of raw integers."""
    need = payload_length(n_rx, n_tx)
    if len(payload) < need:
        raise CsiFormatError(f"CSI payload has {len(payload)} bytes, need {need}")
    # one spare byte so the two-byte window never runs off the end
    buf = np.frombuffer(bytes(payload[:need]) + b"\x00", dtype=np.uint8)
    off = _bit_offsets(n_rx, n_tx)
    re = _read_int8(buf, off).astype(np.float64)
    im = _read_int8(buf, off + 8).astype(np.float64)
    vals = (re + 1j * im).reshape(N_SUBCARRIERS, n_rx, n_tx)
    return np.ascontiguousarray(vals.transpose(0, 2, 1))


def pack_csi(csi: np.ndarray) -> bytes:
    """Inverse of :func:`unpack_csi`; padding bits are written as zero."""
    csi = np.asarray(csi)
    _, n_tx, n_rx = csi.shape
    entries = csi.transpose(0, 2, 1).reshape(N_SUBCARRIERS, n_rx * n_tx)
    re = np.rint(entries.real).astype(np.int64)
    im = np.rint(entries.imag).astype(np.int64)
    if re.min(initial=0) < -128 or re.max(initial=0) > 127 or im.min(initial=0) < -128 or im.max(initial=0) > 127:
        raise ValueError("raw CSI components must lie in -128..127")
    need = payload_length(n_rx, n_tx)
    buf = np.zeros(need + 1, dtype=np.uint16)
    off = _bit_offsets(n_rx, n_tx)
    for offsets, values in ((off, re), (off + 8, im)):
        v = (values & 0xFF).astype(np.uint16).ravel()
        o = offsets.ravel()
        byte, shift = o >> 3, (o & 7).astype(np.uint16)
        np.bitwise_or.at(buf, byte, (v << shift) & 0xFF)
        np.bitwise_or.at(buf, byte + 1, v >> (8 - shift))
    return buf[:need].astype(np.uint8).tobytes()


def serialize_frame(frame: CsiFrame) -> bytes:
    """Encode one frame as a complete 0xBB record (length, code, header, body)."""
    body = pack_csi(frame.csi)
    header = _HEADER.pack(
        frame.timestamp_low,
        frame.bfee_count,
        0,
        frame.n_rx,
        frame.n_tx,
        frame.rssi_a,
        frame.rssi_b,
        frame.rssi_c,
        frame.noise,
        frame.agc,
        frame.antenna_sel,
        len(body),
        frame.rate_flags,
    )
    rec = bytes([CSI_CODE]) + header + body
    return struct.pack(">H", len(rec)) + rec


def serialize_log(frames: Iterable[CsiFrame]) -> bytes:
    return b"".join(serialize_frame(f) for f in frames)


def _decode_record(body: bytes) -> CsiFrame:
    if len(body) < HEADER_SIZE:
        raise CsiFormatError(f"CSI record body of {len(body)} bytes is shorter than its header")
    (ts, count, _reserved, n_rx, n_tx, ra, rb, rc, noise, agc, sel, plen, rate) = _HEADER.unpack_from(body)
    if not (1 <= n_rx <= 3 and 1 <= n_tx <= 3):
        raise CsiFormatError(f"bad antenna counts n_rx={n_rx} n_tx={n_tx}")
    if plen != payload_length(n_rx, n_tx):
        raise CsiFormatError(
            f"declared CSI length {plen} does not match n_rx={n_rx} n_tx={n_tx} "
            f"(expected {payload_length(n_rx, n_tx)})"
        )
    if len(body) - HEADER_SIZE < plen:
        raise CsiFormatError("record ends before its CSI payload")
    perm = ((sel) & 3, (sel >> 2) & 3, (sel >> 4) & 3)
    csi = unpack_csi(body[HEADER_SIZE : HEADER_SIZE + plen], n_rx, n_tx)
    return CsiFrame(ts, count, n_rx, n_tx, ra, rb, rc, noise, agc, perm, rate, csi)


def read_log(data: bytes) -> ParseResult:
    """Parse a capture byte stream, reporting skipped, malformed and truncated records."""
    data = memoryview(bytes(data))
    res = ParseResult()
    cur, end = 0, len(data)
    while cur < end:
        if end - cur < 3:
            res.truncated_bytes = end - cur
            break
        field_len = (data[cur] << 8) | data[cur + 1]
        if field_len == 0:
            res.malformed_records += 1
            res.errors.append(f"offset {cur}: zero-length record")
            cur += 2
            continue
        if cur + 2 + field_len > end:
            res.truncated_bytes = end - cur
            break
        code = data[cur + 2]
        body = data[cur + 3 : cur + 2 + field_len]
        start, cur = cur, cur + 2 + field_len
        if code != CSI_CODE:
            res.skipped_records += 1
            continue
        try:
            frame = _decode_record(body)
        except CsiFormatError as exc:
            res.malformed_records += 1
            res.errors.append(f"offset {start}: {exc}")
            continue
        if not frame.perm_is_valid():
            res.invalid_perm += 1
        res.frames.append(frame)
    if res.truncated_bytes:
        logger.warning("discarded %d bytes of truncated trailing record", res.truncated_bytes)
    if res.malformed_records:
        logger.warning("%d malformed CSI records skipped", res.malformed_records)
    return res


def parse_log(data: bytes) -> list[CsiFrame]:
    """Frames of a capture byte stream in stream order."""
    return read_log(data).frames


def read_log_file(path: str | os.PathLike) -> ParseResult:
    return read_log(Path(path).read_bytes())


def _dbinv(x: float) -> float:
    return 10.0 ** (x / 10.0)


def total_rss(frame: CsiFrame) -> float:
    """Total received power in dBm from the per-antenna RSSI readings."""
    mag = sum(_dbinv(r) for r in (frame.rssi_a, frame.rssi_b, frame.rssi_c) if r != 0)
    if mag == 0:
        raise CsiFormatError("all RSSI fields are zero; cannot scale CSI")
    return 10.0 * math.log10(mag) - 44 - frame.agc


def scale_csi(frame: CsiFrame) -> CsiFrame:
    """Convert raw CSI integers to absolute channel units (returns a new frame)."""
    rssi_pwr = _dbinv(total_rss(frame))
    csi = np.asarray(frame.csi, dtype=np.complex128)
    csi_pwr = float(np.sum(csi.real**2 + csi.imag**2))
    if csi_pwr == 0.0:
        out = np.zeros_like(csi)
    else:
        scale = rssi_pwr / (csi_pwr / N_SUBCARRIERS)
        noise_db = -92 if frame.noise == -127 else frame.noise
        quant_pwr = scale * frame.n_rx * frame.n_tx
        out = csi * math.sqrt(scale / (_dbinv(noise_db) + quant_pwr))
        if frame.n_tx == 2:
            out = out * math.sqrt(2)
        elif frame.n_tx == 3:
            out = out * math.sqrt(_dbinv(4.5))
    scaled = CsiFrame(**{**frame.metadata(), "csi": out})
    return scaled


@dataclass
class DataMatrix:
    """Real N x T matrix: rows are (tx, rx, subcarrier, kind) channels, columns are time."""

    values: np.ndarray
    row_labels: list[tuple[int, int, int, str]]
    sample_rate: float = 1000.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("values must be 2-D")
        if len(self.row_labels) != self.values.shape[0]:
            raise ValueError(f"{len(self.row_labels)} row labels for {self.values.shape[0]} rows")
        if len(set(self.row_labels)) != len(self.row_labels):
            raise ValueError("row labels must be unique")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("data matrix contains non-finite entries")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @classmethod
    def from_array(cls, values, kind: str = AMPLITUDE, sample_rate: float = 1000.0) -> DataMatrix:
        """Wrap a bare array, labelling rows as subcarrier positions of link (0, 0)."""
        values = np.asarray(values, dtype=np.float64)
        labels = [(0, 0, i, kind) for i in range(values.shape[0])]
        return cls(values, labels, sample_rate)


def assemble_matrix(
    frames: Sequence[CsiFrame],
    channel_kind: str = AMPLITUDE,
    link_selection: Sequence[tuple[int, int]] | None = None,
    sample_rate: float = 1000.0,
) -> DataMatrix:
    """Stack frames into a data matrix of amplitudes or principal-value phases.

    Rows are ordered lexicographically by (tx, rx, subcarrier); column t is frame t.
    ``link_selection`` restricts the (tx, rx) pairs used; default is all of them.
    """
    if channel_kind not in (AMPLITUDE, RAW_PHASE):
        raise ValueError(f"channel_kind must be {AMPLITUDE!r} or {RAW_PHASE!r}")
    if len(frames) < 2:
        raise ValueError("need at least 2 frames")
    n_tx, n_rx = frames[0].n_tx, frames[0].n_rx
    if any(f.n_tx != n_tx or f.n_rx != n_rx for f in frames):
        raise ValueError("frames mix antenna configurations")
    if link_selection is None:
        links = [(t, r) for t in range(n_tx) for r in range(n_rx)]
    else:
        links = sorted(set(map(tuple, link_selection)))
        for t, r in links:
            if not (0 <= t < n_tx and 0 <= r < n_rx):
                raise ValueError(f"link {(t, r)} outside {n_tx}x{n_rx} configuration")
    cube = np.stack([np.asarray(f.csi) for f in frames], axis=-1)  # (30, tx, rx, T)
    rows = np.stack([cube[:, t, r, :] for t, r in links])  # (links, 30, T)
    rows = rows.reshape(len(links) * N_SUBCARRIERS, len(frames))
    if channel_kind == AMPLITUDE:
        values = np.abs(rows)
    else:
        zero = rows == 0
        if zero.any():
            logger.warning("%d zero-magnitude CSI entries given phase 0", int(zero.sum()))
        values = np.angle(rows)
        # principal value in (-pi, pi]
        values[values == -np.pi] = np.pi
        values[zero] = 0.0
    labels = [(t, r, s, channel_kind) for t, r in links for s in range(N_SUBCARRIERS)]
    return DataMatrix(values, labels, sample_rate)


def consistent_frames(frames: Sequence[CsiFrame]) -> list[CsiFrame]:
    """Drop frames whose antenna configuration differs from the first frame."""
    if not frames:
        return []
    ref = (frames[0].n_tx, frames[0].n_rx)
    kept = [f for f in frames if (f.n_tx, f.n_rx) == ref]
    if len(kept) < len(frames):
        logger.warning("dropped %d frames with a different antenna configuration", len(frames) - len(kept))
    return kept


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: str
    subject: str
    repetition: int


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]

    @property
    def labels(self) -> list[str]:
        return sorted({e.label for e in self.entries})


def read_manifest(path: str | os.PathLike) -> DatasetManifest:
    """Read a ``path,label,subject,repetition`` manifest; relative paths resolve against its folder."""
    path = Path(path)
    base = path.parent
    entries = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"path", "label", "subject", "repetition"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"manifest {path} lacks columns {sorted(missing)}")
        for row in reader:
            p = Path(row["path"].strip())
            if not p.is_absolute():
                p = base / p
            entries.append(ManifestEntry(str(p), row["label"].strip(), row["subject"].strip(), int(row["repetition"])))
    return DatasetManifest(entries)


def write_manifest(manifest: DatasetManifest, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path", "label", "subject", "repetition"])
        for e in manifest.entries:
            w.writerow([e.path, e.label, e.subject, e.repetition])


@dataclass
class Sample:
    amplitude: DataMatrix
    phase: DataMatrix
    label: str
    subject: str = ""
    repetition: int = 0
    path: str = ""


def load_capture(path: str | os.PathLike, scaled: bool = True, sample_rate: float = 1000.0) -> tuple[DataMatrix, DataMatrix]:
    """Amplitude and raw-phase matrices of one capture file."""
    frames = consistent_frames(read_log_file(path).frames)
    if len(frames) < 2:
        raise CsiFormatError(f"{path}: fewer than 2 usable frames")
    if scaled:
        frames = [scale_csi(f) for f in frames]
    return (
        assemble_matrix(frames, AMPLITUDE, sample_rate=sample_rate),
        assemble_matrix(frames, RAW_PHASE, sample_rate=sample_rate),
    )


def load_dataset(
    manifest: DatasetManifest, scaled: bool = True, sample_rate: float = 1000.0
) -> tuple[list[Sample], list[tuple[str, str]]]:
    """Load every manifest entry; failures are collected as (path, message) instead of raised."""
    samples, errors = [], []
    for e in manifest.entries:
        try:
            amp, phase = load_capture(e.path, scaled=scaled, sample_rate=sample_rate)
        except (OSError, ValueError) as exc:
            errors.append((e.path, str(exc)))
            continue
        samples.append(Sample(amp, phase, e.label, e.subject, e.repetition, e.path))
    if errors:
        logger.warning("%d of %d manifest entries failed to load", len(errors), len(manifest.entries))
    return samples, errors


def write_matrix_csv(matrix: DataMatrix, path: str | os.PathLike) -> None:
    """Write row-label columns followed by the T value columns."""
    n, t = matrix.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tx", "rx", "subcarrier", "kind"] + [f"t{i}" for i in range(t)])
        for label, row in zip(matrix.row_labels, matrix.values):
            w.writerow(list(label) + [repr(float(v)) for v in row])


def read_matrix_csv(path: str | os.PathLike, sample_rate: float = 1000.0) -> DataMatrix:
    labels, rows = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for rec in reader:
            labels.append((int(rec[0]), int(rec[1]), int(rec[2]), rec[3]))
            rows.append([float(v) for v in rec[4:]])
    return DataMatrix(np.array(rows), labels, sample_rate)
