"""Binary PGM (P5) and PPM (P6) reading and writing."""
from __future__ import annotations

import os

import numpy as np


def write_pgm(path: str | os.PathLike, img: np.ndarray) -> None:
    img = np.asarray(img, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (img.shape[1], img.shape[0]))
        fh.write(img.tobytes())


def write_ppm(path: str | os.PathLike, img: np.ndarray) -> None:
    img = np.asarray(img, dtype=np.uint8)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"PPM needs an (H, W, 3) image, got {img.shape}")
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (img.shape[1], img.shape[0]))
        fh.write(img.tobytes())


def _read(path, magic: bytes, channels: int) -> np.ndarray:
    data = open(path, "rb").read()
    fields, pos = [], 0
    while len(fields) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        fields.append(data[pos:end])
        pos = end
    if fields[0] != magic or int(fields[3]) != 255:
        raise ValueError(f"{path}: not an 8-bit {magic.decode()} file")
    w, h = int(fields[1]), int(fields[2])
    pixels = np.frombuffer(data, dtype=np.uint8, count=w * h * channels, offset=pos + 1)
    return pixels.reshape((h, w, channels) if channels > 1 else (h, w)).copy()


def read_ppm(path: str | os.PathLike) -> np.ndarray:
    return _read(path, b"P6", 3)


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    return _read(path, b"P5", 1)
