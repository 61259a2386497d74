"""Bit-string helpers.  A bit string is a 1-D ``uint8`` array of 0/1 values."""

from __future__ import annotations

import numpy as np


def as_bits(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.uint8).reshape(-1)
    if a.size and a.max() > 1:
        raise ValueError("bit strings may only contain 0 and 1")
    return a


def bits_to_int(bits) -> int:
    """MSB-first bits to a non-negative int."""
    a = np.asarray(bits, dtype=np.uint8).reshape(-1)
    if a.size == 0:
        return 0
    # packbits zero-fills the tail of the last byte
    return int.from_bytes(np.packbits(a).tobytes(), "big") >> (-a.size % 8)


def int_to_bits(value: int, width: int) -> np.ndarray:
    if value < 0 or value >> width:
        raise ValueError(f"{value} does not fit in {width} bits")
    if width == 0:
        return np.zeros(0, dtype=np.uint8)
    nbytes = -(-width // 8)
    raw = np.frombuffer((value << (-width % 8)).to_bytes(nbytes, "big"), dtype=np.uint8)
    return np.unpackbits(raw)[:width]


def bytes_to_bits(data: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))


def bits_to_bytes(bits) -> bytes:
    return np.packbits(as_bits(bits)).tobytes()


def random_bits(rng, count: int) -> np.ndarray:
    """``count`` bits from anything with ``getrandbits`` (e.g. ``random.Random``)."""
    if count == 0:
        return np.zeros(0, dtype=np.uint8)
    return int_to_bits(rng.getrandbits(count), count)
