import numpy as np
import pytest


def encode_record(
    csi_int,
    timestamp=0,
    count=0,
    rssi=(30, 30, 30),
    noise=-90,
    agc=10,
    antenna_sel=0b100100,
    rate=0,
    code=0xBB,
):
    """Independent writer for one CSI log record, bit by bit.

    ``csi_int`` is an integer array of shape (30, n_tx, n_rx, 2) holding
    (real, imag) pairs. Bits go into the payload least-significant first.
    """
    csi_int = np.asarray(csi_int)
    _, n_tx, n_rx, _ = csi_int.shape
    bits = []
    for sc in range(30):
        bits += [0, 0, 0]
        for rx in range(n_rx):
            for tx in range(n_tx):
                for part in (0, 1):
                    v = int(csi_int[sc, tx, rx, part]) & 0xFF
                    bits += [(v >> j) & 1 for j in range(8)]
    nbytes = 60 * n_rx * n_tx + 12
    bits += [0] * (8 * nbytes - len(bits))
    payload = bytes(sum(bits[8 * i + j] << j for j in range(8)) for i in range(nbytes))
    header = (
        timestamp.to_bytes(4, "little")
        + count.to_bytes(2, "little")
        + b"\x00\x00"
        + bytes([n_rx, n_tx, rssi[0], rssi[1], rssi[2]])
        + noise.to_bytes(1, "little", signed=True)
        + bytes([agc, antenna_sel])
        + len(payload).to_bytes(2, "little")
        + rate.to_bytes(2, "little")
    )
    body = bytes([code]) + header + payload
    return len(body).to_bytes(2, "big") + body


def random_record(rng, n_tx, n_rx):
    """(bytes, expected field dict) for a random well-formed record."""
    csi = rng.integers(-128, 128, size=(30, n_tx, n_rx, 2))
    perm = list(rng.permutation(3))
    fields = dict(
        timestamp=int(rng.integers(0, 2**32)),
        count=int(rng.integers(0, 2**16)),
        rssi=tuple(int(v) for v in rng.integers(0, 256, size=3)),
        noise=int(rng.integers(-128, 128)),
        agc=int(rng.integers(0, 256)),
        antenna_sel=perm[0] | (perm[1] << 2) | (perm[2] << 4),
        rate=int(rng.integers(0, 2**16)),
    )
    return encode_record(csi, **fields), csi, fields


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
