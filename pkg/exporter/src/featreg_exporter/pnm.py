"""Minimal netpbm reader/writer matching the toolkit's documented subset:
P2/P5 grayscale and P3/P6 color, '#' comments, maxval up to 65535 with
2-byte big-endian samples above 255, intensities scaled into [0, 1]."""

from __future__ import annotations

import numpy as np

from . import ExporterError


class _Scanner:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def next_token(self) -> bytes:
        data, n = self.data, len(self.data)
        i = self.pos
        while i < n:
            c = data[i : i + 1]
            if c == b"#":
                while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                    i += 1
            elif c.isspace():
                i += 1
            else:
                break
        if i >= n:
            raise ExporterError("truncated netpbm header")
        start = i
        while i < n and not data[i : i + 1].isspace() and data[i : i + 1] != b"#":
            i += 1
        self.pos = i
        return data[start:i]

    def next_int(self) -> int:
        return int(self.next_token())


def read_image(data: bytes) -> np.ndarray:
    magic = data[:2]
    if magic not in (b"P2", b"P3", b"P5", b"P6"):
        raise ExporterError(f"unsupported magic {magic!r}")
    channels = 3 if magic in (b"P3", b"P6") else 1
    binary = magic in (b"P5", b"P6")
    scanner = _Scanner(data)
    scanner.pos = 2
    width, height, maxval = scanner.next_int(), scanner.next_int(), scanner.next_int()
    count = width * height * channels
    if binary:
        payload = data[scanner.pos + 1 :]
        dtype = ">u2" if maxval > 255 else np.uint8
        itemsize = 2 if maxval > 255 else 1
        if len(payload) < count * itemsize:
            raise ExporterError("truncated netpbm payload")
        samples = np.frombuffer(payload[: count * itemsize], dtype=dtype).astype(float)
    else:
        samples = np.array([scanner.next_int() for _ in range(count)], dtype=float)
    pixels = samples / maxval
    shape = (height, width, 3) if channels == 3 else (height, width)
    return pixels.reshape(shape)


def write_pgm(pixels: np.ndarray, maxval: int = 255) -> bytes:
    """Binary PGM for fixtures; pixels are floats in [0, 1]."""
    quant = np.rint(np.asarray(pixels, float) * maxval)
    header = f"P5\n{pixels.shape[1]} {pixels.shape[0]}\n{maxval}\n".encode()
    body = quant.astype(">u2" if maxval > 255 else np.uint8).tobytes()
    return header + body
