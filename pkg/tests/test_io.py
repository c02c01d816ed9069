import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from frachill.io import (SERIES_COLUMNS, SnapshotError, decode_snapshot, encode_snapshot, read_table,
                         write_snapshot, read_snapshot, write_table)

from conftest import REPO

shapes = st.one_of(st.tuples(st.integers(1, 9)), st.tuples(st.integers(1, 5), st.integers(1, 5)))


@settings(max_examples=40, deadline=None)
@given(data=st.data(), shape=shapes, t=st.floats(allow_nan=False))
def test_snapshot_round_trip_bit_exact(data, shape, t):
    fields = [data.draw(arrays(np.float64, shape)) for _ in range(3)]
    t2, *back = decode_snapshot(encode_snapshot(t, *fields))
    assert t2 == t
    for a, b in zip(fields, back):
        assert a.tobytes() == b.tobytes()


def test_snapshot_layout(tmp_path):
    mu, phi, s = np.arange(6.0).reshape(2, 3), np.ones((2, 3)), np.zeros((2, 3))
    path = tmp_path / "x.fcht"
    write_snapshot(path, 0.5, mu, phi, s)
    raw = path.read_bytes()
    assert raw[:4] == b"FCHT"
    assert struct.unpack_from("<IIIId", raw, 4) == (1, 2, 2, 3, 0.5)
    assert np.frombuffer(raw, "<f8", count=6, offset=28).tolist() == mu.ravel().tolist()
    t, *f = read_snapshot(path)
    assert t == 0.5 and np.array_equal(f[0], mu)


@pytest.mark.parametrize("mutate", [
    lambda b: b"XXXX" + b[4:],
    lambda b: b[:4] + struct.pack("<I", 2) + b[8:],
    lambda b: b[:8] + struct.pack("<I", 3) + b[12:],
    lambda b: b[:-8],
    lambda b: b + b"\0",
    lambda b: b[:14],
])
def test_snapshot_rejects_mismatches(mutate):
    good = encode_snapshot(1.0, np.zeros(4), np.zeros(4), np.zeros(4))
    with pytest.raises(SnapshotError):
        decode_snapshot(mutate(good))
    with pytest.raises(SnapshotError):
        encode_snapshot(0.0, np.zeros(3), np.zeros(4), np.zeros(4))


def test_series_columns_match_golden_header(tmp_path):
    golden = (REPO / "tests" / "golden" / "series_header.csv").read_text()
    assert ",".join(SERIES_COLUMNS) + "\n" == golden
    write_table(tmp_path / "t.csv", SERIES_COLUMNS, [[0, 0.1] + [1] * 10])
    header, rows = read_table(tmp_path / "t.csv")
    assert header == list(SERIES_COLUMNS) and rows == [["0", "0.1"] + ["1"] * 10]


def test_floats_written_exactly(tmp_path):
    vals = [0.1 + 0.2, 1e-300, -2.5e17, np.float64(1 / 3)]
    write_table(tmp_path / "f.csv", ["v"], [[v] for v in vals])
    _, rows = read_table(tmp_path / "f.csv")
    assert [float(r[0]) for r in rows] == [float(v) for v in vals]
