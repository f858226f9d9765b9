"""Minimal PGM (portable graymap) reader and writer.

Reads plain (P2) and raw (P5) graymaps with ``maxval <= 65535``; raw
samples wider than 8 bits are big-endian 16-bit, as the format requires.
Always writes raw 8-bit P5.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


class PGMError(ValueError):
    pass


def _header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Pull ``count`` whitespace-separated header tokens, skipping comments.

    Returns the tokens and the offset just past the single whitespace byte
    that terminates the last one.
    """
    tokens: list[bytes] = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= n:
            raise PGMError("truncated header")
        if data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        tokens.append(data[start:pos])
    if pos >= n:
        raise PGMError("truncated header")
    return tokens, pos + 1


def decode_pgm(data: bytes) -> np.ndarray:
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise PGMError(f"bad magic number {magic!r}; expected P2 or P5")
    try:
        tokens, pos = _header_tokens(data, 4)
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as exc:
        if isinstance(exc, PGMError):
            raise
        raise PGMError(f"malformed header: {exc}") from exc
    if width < 1 or height < 1:
        raise PGMError("image dimensions must be positive")
    if not 0 < maxval <= 65535:
        raise PGMError(f"maxval {maxval} outside 1..65535")
    dtype = np.uint8 if maxval < 256 else np.uint16
    count = width * height
    if magic == b"P5":
        size = 1 if maxval < 256 else 2
        payload = data[pos : pos + count * size]
        if len(payload) < count * size:
            raise PGMError(f"truncated payload: need {count * size} bytes, got {len(payload)}")
        raw = np.frombuffer(payload, dtype=">u2" if size == 2 else np.uint8)
        pixels = raw.astype(dtype)
    else:
        body = data[pos:]
        # comments are permitted anywhere in plain files by common readers
        lines = [ln.split(b"#", 1)[0] for ln in body.splitlines()]
        values = b" ".join(lines).split()
        if len(values) < count:
            raise PGMError(f"truncated payload: need {count} samples, got {len(values)}")
        try:
            pixels = np.array([int(v) for v in values[:count]], dtype=np.int64)
        except ValueError as exc:
            raise PGMError(f"non-integer sample: {exc}") from exc
        pixels = pixels.astype(dtype)
    if np.any(pixels > maxval):
        raise PGMError("sample exceeds maxval")
    return pixels.reshape(height, width)


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a graymap as an ``(height, width)`` uint8 or uint16 array."""
    return decode_pgm(Path(path).read_bytes())


def encode_pgm(image: np.ndarray) -> bytes:
    img = np.asarray(image)
    if img.ndim != 2:
        raise PGMError("expected a 2-D grayscale image")
    if img.size and (img.min() < 0 or img.max() > 255):
        raise PGMError("8-bit output needs pixel values in 0..255")
    h, w = img.shape
    return b"P5\n%d %d\n255\n" % (w, h) + img.astype(np.uint8).tobytes()


def write_pgm(image: np.ndarray, path: str | Path) -> None:
    from .io import atomic_write_bytes

    atomic_write_bytes(path, encode_pgm(image))
