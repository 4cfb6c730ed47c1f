import numpy as np
import pytest

from glayers.errors import FormatError
from glayers.gtns import complex_to_trailing, read_gtns, trailing_to_complex, write_gtns


def test_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    arr = rng.standard_normal((3, 4, 5))
    path = tmp_path / "t.gtns"
    write_gtns(path, arr)
    back = read_gtns(path)
    assert back.shape == arr.shape
    assert np.array_equal(back, arr)


def test_header_layout(tmp_path):
    path = tmp_path / "t.gtns"
    write_gtns(path, np.arange(6.0).reshape(2, 3))
    raw = path.read_bytes()
    assert raw[:4] == b"GTNS"
    assert int.from_bytes(raw[4:8], "little") == 1
    assert int.from_bytes(raw[8:12], "little") == 2
    assert int.from_bytes(raw[12:20], "little") == 2
    assert int.from_bytes(raw[20:28], "little") == 3
    assert len(raw) == 28 + 6 * 8


def test_complex_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    z = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    path = tmp_path / "c.gtns"
    write_gtns(path, z)
    back = read_gtns(path)
    assert back.shape == (4, 4, 2)
    assert np.array_equal(trailing_to_complex(back), z)
    assert np.array_equal(complex_to_trailing(z), back)


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.gtns"
    path.write_bytes(b"NOPE" + b"\x00" * 24)
    with pytest.raises(FormatError):
        read_gtns(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / "t.gtns"
    write_gtns(path, np.ones(8))
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(FormatError):
        read_gtns(path)
