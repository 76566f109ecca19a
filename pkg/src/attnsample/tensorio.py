"""Binary containers: ZTT1 tensor dumps, ZTH1 weight files, P6 PPM images.

ZTT1: magic ``ZTT1``, u32 LE rank, rank x u32 LE dims, f32 LE payload.
ZTH1: magic ``ZTH1``, u32 LE entry count; per entry u16 LE name length,
UTF-8 name, u8 rank, rank x u32 LE dims, f32 LE payload.

Both formats are bit-exact round-trippers and the interop boundary with
the weight trainer.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

ZTT_MAGIC = b"ZTT1"
ZTH_MAGIC = b"ZTH1"


def write_ztt(path, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    with open(path, "wb") as f:
        f.write(ZTT_MAGIC)
        f.write(struct.pack("<I", arr.ndim))
        f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        f.write(arr.tobytes())


def read_ztt(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != ZTT_MAGIC:
        raise FormatError(f"bad magic at offset 0: {data[:4]!r}")
    off = 4
    (rank,) = struct.unpack_from("<I", data, off)
    off += 4
    shape = struct.unpack_from(f"<{rank}I", data, off)
    off += 4 * rank
    count = int(np.prod(shape, dtype=np.int64)) if rank else 1
    payload = data[off : off + 4 * count]
    if len(payload) != 4 * count:
        raise FormatError(f"truncated payload at offset {off}")
    return np.frombuffer(payload, dtype="<f4").reshape(shape).copy()


def write_zth(path, entries: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as f:
        f.write(ZTH_MAGIC)
        f.write(struct.pack("<I", len(entries)))
        for name, arr in entries.items():
            raw = name.encode("utf-8")
            arr = np.ascontiguousarray(arr, dtype=np.float32)
            f.write(struct.pack("<H", len(raw)))
            f.write(raw)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes())


def read_zth(path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    if data[:4] != ZTH_MAGIC:
        raise FormatError(f"bad magic at offset 0: {data[:4]!r}")
    off = 4
    (count,) = struct.unpack_from("<I", data, off)
    off += 4
    entries: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", data, off)
        off += 2
        name = data[off : off + name_len].decode("utf-8")
        off += name_len
        if name in entries:
            raise FormatError(f"duplicate entry name {name!r} at offset {off}")
        (rank,) = struct.unpack_from("<B", data, off)
        off += 1
        shape = struct.unpack_from(f"<{rank}I", data, off)
        off += 4 * rank
        n = int(np.prod(shape, dtype=np.int64)) if rank else 1
        payload = data[off : off + 4 * n]
        if len(payload) != 4 * n:
            raise FormatError(f"truncated payload for {name!r} at offset {off}")
        entries[name] = np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
        off += 4 * n
    return entries


def write_ppm(path, image: np.ndarray) -> None:
    """8-bit binary PPM from an H x W x 3 float image in [0, 1]."""
    img = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    if img.ndim != 3 or img.shape[2] != 3:
        raise FormatError(f"PPM needs H x W x 3, got shape {img.shape}")
    h, w, _ = img.shape
    data = np.round(img * 255.0).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(data.tobytes())


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if not data.startswith(b"P6"):
        raise FormatError("not a binary PPM (P6) file")
    fields: list[bytes] = []
    off = 2
    while len(fields) < 3:
        while off < len(data) and data[off : off + 1].isspace():
            off += 1
        if data[off : off + 1] == b"#":
            while off < len(data) and data[off] != 0x0A:
                off += 1
            continue
        start = off
        while off < len(data) and not data[off : off + 1].isspace():
            off += 1
        fields.append(data[start:off])
    off += 1  # single whitespace after maxval
    w, h, maxval = (int(x) for x in fields)
    raw = np.frombuffer(data[off : off + w * h * 3], dtype=np.uint8)
    if raw.size != w * h * 3:
        raise FormatError("truncated PPM payload")
    return (raw.reshape(h, w, 3).astype(np.float32) / np.float32(maxval))
