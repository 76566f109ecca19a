import struct

import numpy as np
import pytest

from attnsample import (
    read_ppm,
    read_ztt,
    read_zth,
    write_ppm,
    write_ztt,
    write_zth,
)
from attnsample.errors import FormatError


class TestZtt:
    @pytest.mark.parametrize("shape", [(3,), (2, 5), (4, 16, 16), (1, 1, 1, 7)])
    def test_roundtrip_bit_exact(self, tmp_path, shape):
        arr = np.random.default_rng(0).normal(size=shape).astype(np.float32)
        p = tmp_path / "t.ztt"
        write_ztt(p, arr)
        back = read_ztt(p)
        assert back.dtype == np.float32
        assert back.shape == shape
        assert np.array_equal(back, arr)

    def test_header_layout_by_hand(self, tmp_path):
        arr = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
        p = tmp_path / "t.ztt"
        write_ztt(p, arr)
        raw = p.read_bytes()
        assert raw[:4] == b"ZTT1"
        assert struct.unpack("<I", raw[4:8]) == (2,)
        assert struct.unpack("<II", raw[8:16]) == (2, 2)
        assert struct.unpack("<4f", raw[16:]) == (1.0, 2.0, 3.0, 4.0)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.ztt"
        p.write_bytes(b"NOPE" + b"\x00" * 8)
        with pytest.raises(FormatError, match="magic"):
            read_ztt(p)

    def test_truncated_payload(self, tmp_path):
        arr = np.zeros(10, dtype=np.float32)
        p = tmp_path / "t.ztt"
        write_ztt(p, arr)
        p.write_bytes(p.read_bytes()[:-4])
        with pytest.raises(FormatError, match="truncated"):
            read_ztt(p)


class TestZth:
    def test_roundtrip_preserves_names_shapes_bits(self, tmp_path):
        rng = np.random.default_rng(1)
        entries = {
            "a.w": rng.normal(size=(4, 4)).astype(np.float32),
            "a.b": rng.normal(size=(4,)).astype(np.float32),
            "deep.nested.name": rng.normal(size=(2, 3, 5)).astype(np.float32),
        }
        p = tmp_path / "w.zth"
        write_zth(p, entries)
        back = read_zth(p)
        assert list(back) == list(entries)
        for name, arr in entries.items():
            assert np.array_equal(back[name], arr)

    def test_empty_container(self, tmp_path):
        p = tmp_path / "e.zth"
        write_zth(p, {})
        assert read_zth(p) == {}

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.zth"
        p.write_bytes(b"ZTT1\x00\x00\x00\x00")
        with pytest.raises(FormatError, match="magic"):
            read_zth(p)

    def test_duplicate_name_rejected(self, tmp_path):
        arr = np.zeros(2, dtype=np.float32)
        body = b""
        for _ in range(2):
            body += struct.pack("<H", 1) + b"x"
            body += struct.pack("<B", 1) + struct.pack("<I", 2) + arr.tobytes()
        p = tmp_path / "dup.zth"
        p.write_bytes(b"ZTH1" + struct.pack("<I", 2) + body)
        with pytest.raises(FormatError, match="duplicate"):
            read_zth(p)

    def test_truncated_entry(self, tmp_path):
        p = tmp_path / "w.zth"
        write_zth(p, {"x": np.ones(8, dtype=np.float32)})
        p.write_bytes(p.read_bytes()[:-6])
        with pytest.raises(FormatError, match="truncated"):
            read_zth(p)


class TestPpm:
    def test_roundtrip_within_quantization(self, tmp_path):
        img = np.random.default_rng(2).random((5, 7, 3)).astype(np.float32)
        p = tmp_path / "i.ppm"
        write_ppm(p, img)
        back = read_ppm(p)
        assert back.shape == (5, 7, 3)
        assert np.max(np.abs(back - img)) <= 0.5 / 255 + 1e-6

    def test_header_is_p6(self, tmp_path):
        p = tmp_path / "i.ppm"
        write_ppm(p, np.zeros((2, 3, 3)))
        raw = p.read_bytes()
        assert raw.startswith(b"P6\n3 2\n255\n")
        assert len(raw) == len(b"P6\n3 2\n255\n") + 2 * 3 * 3

    def test_values_clamped(self, tmp_path):
        img = np.array([[[2.0, -1.0, 0.5]]])
        p = tmp_path / "i.ppm"
        write_ppm(p, img)
        back = read_ppm(p)
        np.testing.assert_allclose(back[0, 0], [1.0, 0.0, 0.5], atol=0.5 / 255)

    def test_comment_in_header(self, tmp_path):
        p = tmp_path / "c.ppm"
        p.write_bytes(b"P6\n# a comment\n1 1\n255\n\xff\x00\x80")
        back = read_ppm(p)
        np.testing.assert_allclose(back[0, 0], [1.0, 0.0, 128 / 255], atol=1e-6)

    def test_wrong_shape_rejected(self, tmp_path):
        with pytest.raises(FormatError):
            write_ppm(tmp_path / "x.ppm", np.zeros((4, 4)))

    def test_not_p6_rejected(self, tmp_path):
        p = tmp_path / "x.ppm"
        p.write_bytes(b"P3\n1 1\n255\n1 2 3\n")
        with pytest.raises(FormatError):
            read_ppm(p)
