import struct

import numpy as np
import pytest

from xling.errors import ParseError
from xling.tensorio import read_sections, read_tensor, write_sections, write_tensor


class TestSingleTensor:
    @pytest.mark.parametrize(
        "shape", [(), (3,), (2, 4), (2, 3, 2), (0, 5)], ids=str
    )
    def test_round_trip(self, tmp_path, shape):
        rng = np.random.default_rng(0)
        arr = rng.standard_normal(shape)
        path = tmp_path / "t.xlf"
        write_tensor(path, arr)
        got = read_tensor(path)
        assert got.shape == arr.shape
        assert np.array_equal(got, arr)

    def test_exact_byte_layout(self, tmp_path):
        # magic, u32 rank, u32 dims, little-endian f64 row-major
        arr = np.array([[1.5, -2.0], [0.25, 8.0]])
        path = tmp_path / "t.xlf"
        write_tensor(path, arr)
        expected = (
            b"XLF1"
            + struct.pack("<I", 2)
            + struct.pack("<II", 2, 2)
            + struct.pack("<4d", 1.5, -2.0, 0.25, 8.0)
        )
        assert path.read_bytes() == expected

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "t.xlf"
        path.write_bytes(b"NOPE" + struct.pack("<I", 1) + struct.pack("<I", 0))
        with pytest.raises(ParseError):
            read_tensor(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "t.xlf"
        path.write_bytes(b"XLF1" + struct.pack("<I", 1) + struct.pack("<I", 4))
        with pytest.raises(ParseError):
            read_tensor(path)

    def test_trailing_bytes(self, tmp_path):
        path = tmp_path / "t.xlf"
        write_tensor(path, np.zeros(2))
        path.write_bytes(path.read_bytes() + b"x")
        with pytest.raises(ParseError):
            read_tensor(path)


class TestSections:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        tensors = {
            "alpha": rng.standard_normal((3, 2)),
            "beta": rng.standard_normal(5),
            "gamma.nested": rng.standard_normal((2, 2, 2)),
        }
        path = tmp_path / "w.xlf"
        write_sections(path, tensors)
        got = read_sections(path)
        assert set(got) == set(tensors)
        for name in tensors:
            assert np.array_equal(got[name], tensors[name])

    def test_byte_identical_regardless_of_dict_order(self, tmp_path):
        a = {"x": np.ones(2), "y": np.zeros(3)}
        b = {"y": np.zeros(3), "x": np.ones(2)}
        pa, pb = tmp_path / "a.xlf", tmp_path / "b.xlf"
        write_sections(pa, a)
        write_sections(pb, b)
        assert pa.read_bytes() == pb.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "w.xlf"
        path.write_bytes(b"XLF2" + struct.pack("<I", 0))
        with pytest.raises(ParseError):
            read_sections(path)
