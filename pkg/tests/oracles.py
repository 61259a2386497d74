"""Slow, obviously-correct reference implementations used as test oracles.

Nothing here imports the package; polynomials are plain coefficient lists
(index k holds the coefficient of x^k).
"""

from __future__ import annotations

import itertools
import math


def trim(p: list[int]) -> list[int]:
    p = list(p)
    while p and p[-1] == 0:
        p.pop()
    return p


def from_int(v: int) -> list[int]:
    return trim([(v >> k) & 1 for k in range(max(v.bit_length(), 1))])


def to_int(p: list[int]) -> int:
    return sum(c << k for k, c in enumerate(p))


def schoolbook_mul(a: list[int], b: list[int]) -> list[int]:
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] ^= x & y
    return trim(out)


def long_divmod(a: list[int], m: list[int]) -> tuple[list[int], list[int]]:
    m = trim(m)
    if not m:
        raise ZeroDivisionError
    r = trim(a)
    q = [0] * max(len(r) - len(m) + 1, 0)
    while len(r) >= len(m):
        shift = len(r) - len(m)
        q[shift] = 1
        for k, c in enumerate(m):
            r[k + shift] ^= c
        r = trim(r)
    return trim(q), r


def mulmod(a: int, b: int, m: int) -> int:
    return to_int(long_divmod(schoolbook_mul(from_int(a), from_int(b)), from_int(m))[1])


def powmod(a: int, e: int, m: int) -> int:
    r = 1 if m.bit_length() > 1 else 0
    for _ in range(e):
        r = mulmod(r, a, m)
    return to_int(long_divmod(from_int(r), from_int(m))[1])


def irreducible_by_trial_division(v: int) -> bool:
    """No factor of degree 1..deg/2 divides v."""
    deg = v.bit_length() - 1
    if deg < 1:
        return False
    p = from_int(v)
    for d in range(1, deg // 2 + 1):
        for f in range(1 << d, 1 << (d + 1)):
            if not long_divmod(p, from_int(f))[1]:
                return False
    return True


def amd_tag(mu: list[int], theta: list[int], d: int, gamma: int, modulus: int) -> list[int]:
    """F(mu, theta) by the textbook sum of powers, all bit strings MSB-first."""

    def val(bits):
        return int("".join(map(str, bits)) or "0", 2)

    padded = list(mu) + [0] * (d * gamma - len(mu))
    th = val(theta)
    acc = powmod(th, d + 2, modulus)
    for i in range(1, d + 1):
        chunk = val(padded[(i - 1) * gamma : i * gamma])
        acc ^= mulmod(chunk, powmod(th, i, modulus), modulus)
    return [(acc >> k) & 1 for k in range(gamma - 1, -1, -1)]


def amd_chunks(m: int, beta: int) -> tuple[int, int]:
    """(d, gamma) straight from the defining inequality."""
    for d in itertools.count(1, 2):
        if d * (beta + math.log2(d + 1)) >= m:
            return d, math.ceil(beta + math.log2(d + 1))
    raise AssertionError


def collision_by_enumeration(p: float, n: int) -> float:
    """Probability that an odd-sized subset of the other n-1 parties speaks."""
    others = n - 1
    total = 0.0
    for k in range(others + 1):
        if k % 2 == 1:
            total += math.comb(others, k) * p**k * (1 - p) ** (others - k)
    return total


def collision_by_subsets(p: float, n: int) -> float:
    """Same, by walking every subset explicitly."""
    others = n - 1
    total = 0.0
    for mask in range(1 << others):
        k = bin(mask).count("1")
        if k % 2:
            total += p**k * (1 - p) ** (others - k)
    return total


class ScriptedRng:
    """Stands in for ``random.Random``: replays a fixed bit script."""

    def __init__(self, bits):
        self.bits = list(bits)
        self.pos = 0

    def getrandbits(self, k: int) -> int:
        v = 0
        for _ in range(k):
            v = (v << 1) | (self.bits[self.pos] if self.pos < len(self.bits) else 0)
            self.pos += 1
        return v
