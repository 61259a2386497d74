"""Pairwise one-time-pad key stores standing in for the QKD layer.

Every unordered pair {i, j} (i < j) holds two copies of a shared bit string.
Party i reads ``copy_a`` and party j reads ``copy_b``; each side has its own
cursor, and a bit index is handed out at most once per side.  With a nonzero
error rate ``r_e``, ``copy_b`` is ``copy_a`` with each bit flipped
independently with probability ``r_e``.

Binary file layout (all integers big-endian)::

    offset  size  field
    0       4     magic  b"QKDF"
    4       2     version (1)
    6       2     n
    8       8     bits_per_pair
    16      8     r_e, IEEE-754 binary64
    24      8     seed (unsigned)
    32      ...   n(n-1)/2 pair records in lexicographic (i, j) order

    pair record:
    0       1     i
    1       1     j
    2       8     cursor_a
    10      8     cursor_b
    18      L     copy_a packed MSB-first, L = ceil(bits_per_pair / 8)
    18+L    L     copy_b packed the same way
"""

from __future__ import annotations

import struct
import threading
from itertools import combinations
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import KeysDepleted, ParameterError

__all__ = [
    "PairKey",
    "KeyFabric",
    "generate_fabric",
    "draw_bits",
    "remaining",
    "MAGIC",
    "VERSION",
]

MAGIC = b"QKDF"
VERSION = 1
_HEADER = struct.Struct(">4sHHQdQ")
_PAIR_HEADER = struct.Struct(">BBQQ")


class PairKey:
    """Both copies of one link's key plus a cursor per side.

    Party ``pair[0]`` reads ``copy_a``; party ``pair[1]`` reads ``copy_b``.
    """

    __slots__ = ("pair", "copy_a", "copy_b", "_raw", "_cursor", "_lock")

    def __init__(self, pair: tuple[int, int], copy_a, copy_b, cursor_a: int = 0, cursor_b: int = 0):
        copy_a = np.array(copy_a, dtype=np.uint8).reshape(-1)
        copy_b = np.array(copy_b, dtype=np.uint8).reshape(-1)
        copy_a.setflags(write=False)
        copy_b.setflags(write=False)
        if copy_a.shape != copy_b.shape:
            raise ParameterError("pair copies must have equal length")
        if not (0 <= cursor_a <= copy_a.size and 0 <= cursor_b <= copy_a.size):
            raise ParameterError("cursor outside key store")
        self.pair = (int(pair[0]), int(pair[1]))
        self.copy_a = copy_a
        self.copy_b = copy_b
        # one byte per bit: slicing bytes is far cheaper than slicing tiny arrays
        self._raw = {self.pair[0]: copy_a.tobytes(), self.pair[1]: copy_b.tobytes()}
        self._cursor = {self.pair[0]: int(cursor_a), self.pair[1]: int(cursor_b)}
        self._lock = threading.Lock()

    def __repr__(self) -> str:
        return f"PairKey(pair={self.pair}, length={self.length}, cursors=({self.cursor_a}, {self.cursor_b}))"

    @property
    def length(self) -> int:
        return int(self.copy_a.size)

    @property
    def cursor_a(self) -> int:
        return self._cursor[self.pair[0]]

    @property
    def cursor_b(self) -> int:
        return self._cursor[self.pair[1]]

    def mismatch_fraction(self) -> float:
        if self.length == 0:
            return 0.0
        return float(np.count_nonzero(self.copy_a != self.copy_b)) / self.length

    def take(self, me: int, count: int) -> bytes:
        """Next ``count`` bits of ``me``'s copy, one byte (0 or 1) per bit."""
        try:
            raw = self._raw[me]
        except KeyError:
            raise ParameterError(f"party {me} is not in pair {self.pair}") from None
        if count < 0:
            raise ParameterError("count must be non-negative")
        with self._lock:
            cur = self._cursor[me]
            end = cur + count
            if end > len(raw):
                raise KeysDepleted(self.pair, me, count, len(raw) - cur)
            self._cursor[me] = end
        return raw[cur:end]

    def draw(self, me: int, count: int) -> np.ndarray:
        return np.frombuffer(self.take(me, count), dtype=np.uint8).copy()

    def cursor(self, me: int) -> int:
        if me not in self._cursor:
            raise ParameterError(f"party {me} is not in pair {self.pair}")
        return self._cursor[me]

    def remaining(self, me: int) -> int:
        if me not in self._cursor:
            raise ParameterError(f"party {me} is not in pair {self.pair}")
        return self.length - self._cursor[me]

    def consumed(self) -> int:
        """Bits spent on this link: the further-advanced of the two cursors."""
        return max(self._cursor.values())


class KeyFabric:
    """All pairwise key stores of an n-party network."""

    def __init__(self, n: int, pairs: Mapping[tuple[int, int], PairKey], r_e: float = 0.0, seed: int = 0):
        if n < 2:
            raise ParameterError("a fabric needs at least two parties")
        expected = list(combinations(range(n), 2))
        if sorted(pairs) != expected:
            raise ParameterError(f"fabric for n={n} needs exactly the pairs {expected}")
        lengths = {p.length for p in pairs.values()}
        if len(lengths) != 1:
            raise ParameterError("all pairs must hold the same number of bits")
        self.n = n
        self.r_e = float(r_e)
        self.seed = int(seed)
        self.bits_per_pair = lengths.pop()
        self.pairs: dict[tuple[int, int], PairKey] = {k: pairs[k] for k in expected}

    @classmethod
    def from_pair_bits(cls, n: int, bits: Mapping[tuple[int, int], object]) -> "KeyFabric":
        """Error-free fabric with explicitly chosen pair contents (for enumeration)."""
        pairs = {}
        for (i, j), b in bits.items():
            a = np.asarray(b, dtype=np.uint8).reshape(-1)
            key = (min(i, j), max(i, j))
            pairs[key] = PairKey(key, a.copy(), a.copy())
        return cls(n, pairs)

    def pair(self, i: int, j: int) -> PairKey:
        if i == j:
            raise ParameterError("a party shares no key with itself")
        key = (i, j) if i < j else (j, i)
        try:
            return self.pairs[key]
        except KeyError:
            raise ParameterError(f"unknown pair {key} in fabric of {self.n} parties") from None

    def draw(self, me: int, peer: int, count: int) -> np.ndarray:
        return self.pair(me, peer).draw(me, count)

    def remaining(self, me: int, peer: int) -> int:
        return self.pair(me, peer).remaining(me)

    def min_remaining(self) -> int:
        return min(min(p.length - p.cursor_a, p.length - p.cursor_b) for p in self.pairs.values())

    def consumed(self) -> dict[tuple[int, int], int]:
        return {k: p.consumed() for k, p in self.pairs.items()}

    def total_consumed(self) -> int:
        return sum(p.consumed() for p in self.pairs.values())

    def copy(self) -> "KeyFabric":
        return KeyFabric.from_bytes(self.to_bytes())

    # -- serialization -------------------------------------------------------

    def to_bytes(self) -> bytes:
        if not 0 <= self.seed < 2**64:
            raise ParameterError("seed must fit in an unsigned 64-bit field")
        if self.n > 255:
            raise ParameterError("file format supports at most 255 parties")
        chunks = [_HEADER.pack(MAGIC, VERSION, self.n, self.bits_per_pair, self.r_e, self.seed)]
        for (i, j), p in self.pairs.items():
            chunks.append(_PAIR_HEADER.pack(i, j, p.cursor_a, p.cursor_b))
            chunks.append(np.packbits(p.copy_a).tobytes())
            chunks.append(np.packbits(p.copy_b).tobytes())
        return b"".join(chunks)

    @classmethod
    def from_bytes(cls, data: bytes) -> "KeyFabric":
        if len(data) < _HEADER.size:
            raise ParameterError("truncated fabric file")
        magic, version, n, length, r_e, seed = _HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise ParameterError(f"bad magic {magic!r}")
        if version != VERSION:
            raise ParameterError(f"unsupported fabric version {version}")
        nbytes = -(-length // 8)
        off = _HEADER.size
        pairs = {}
        for _ in range(n * (n - 1) // 2):
            if off + _PAIR_HEADER.size + 2 * nbytes > len(data):
                raise ParameterError("truncated fabric file")
            i, j, ca, cb = _PAIR_HEADER.unpack_from(data, off)
            off += _PAIR_HEADER.size
            raw = np.frombuffer(data, dtype=np.uint8, count=2 * nbytes, offset=off)
            off += 2 * nbytes
            a = np.unpackbits(raw[:nbytes])[:length]
            b = np.unpackbits(raw[nbytes:])[:length]
            pairs[(i, j)] = PairKey((i, j), a, b, ca, cb)
        if off != len(data):
            raise ParameterError("trailing bytes after fabric records")
        return cls(n, pairs, r_e=r_e, seed=seed)

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "KeyFabric":
        return cls.from_bytes(Path(path).read_bytes())


def generate_fabric(n: int, bits_per_pair: int, r_e: float = 0.0, seed: int = 0) -> KeyFabric:
    """Seeded fabric; ``copy_b`` gets each bit flipped with probability ``r_e``."""
    if n < 3:
        raise ParameterError("protocol sessions need n >= 3")
    if not 0.0 <= r_e <= 1.0:
        raise ParameterError(f"r_e must lie in [0, 1], got {r_e}")
    if bits_per_pair < 0:
        raise ParameterError("bits_per_pair must be non-negative")
    if not 0 <= seed < 2**64:
        raise ParameterError("seed must be an unsigned 64-bit integer")
    root = np.random.SeedSequence(seed)
    pairs = {}
    for key, child in zip(combinations(range(n), 2), root.spawn(n * (n - 1) // 2)):
        rng = np.random.default_rng(child)
        a = rng.integers(0, 2, size=bits_per_pair, dtype=np.uint8)
        flips = (rng.random(bits_per_pair) < r_e).astype(np.uint8)
        pairs[key] = PairKey(key, a, a ^ flips)
    return KeyFabric(n, pairs, r_e=r_e, seed=seed)


def draw_bits(fabric: KeyFabric, me: int, peer: int, count: int) -> np.ndarray:
    return fabric.draw(me, peer, count)


def remaining(fabric: KeyFabric, me: int, peer: int) -> int:
    return fabric.remaining(me, peer)
