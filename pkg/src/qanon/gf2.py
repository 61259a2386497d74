"""Binary polynomials and arithmetic in GF(2^gamma).

A polynomial over GF(2) is stored as a Python int: bit k holds the
coefficient of x^k, so ``x^2 + x + 1`` is ``0b111``.  This keeps addition a
single XOR and lets multiplication run as a carry-less shift-and-add.
External encodings (bit vectors, hex strings) are always MSB-first, i.e. the
highest-degree coefficient comes first.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

__all__ = [
    "BinPoly",
    "FieldCtx",
    "add",
    "mul_mod",
    "pow_mod",
    "poly_gcd",
    "is_irreducible",
    "find_irreducible",
]

_TERM = re.compile(r"^(?:(1)|x(?:\^(\d+))?)$")


@dataclass(frozen=True, order=True)
class BinPoly:
    """Immutable polynomial over GF(2).

    ``degree`` is -1 for the zero polynomial.
    """

    value: int = 0

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("polynomial value must be non-negative")

    @property
    def degree(self) -> int:
        return self.value.bit_length() - 1

    def is_zero(self) -> bool:
        return self.value == 0

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "BinPoly":
        """Build from coefficient bits, highest degree first."""
        v = 0
        for b in bits:
            v = (v << 1) | (int(b) & 1)
        return cls(v)

    @classmethod
    def from_exponents(cls, exps: Iterable[int]) -> "BinPoly":
        v = 0
        for e in exps:
            v ^= 1 << e
        return cls(v)

    @classmethod
    def parse(cls, text: str) -> "BinPoly":
        """Parse ``x^22+x+1`` style text, or hex coefficients like ``0x400003``."""
        s = text.replace(" ", "").lower()
        if s.startswith("0x"):
            return cls(int(s, 16))
        if s == "0":
            return cls(0)
        v = 0
        for term in s.split("+"):
            m = _TERM.match(term)
            if m is None:
                raise ValueError(f"cannot parse polynomial term {term!r} in {text!r}")
            if m.group(1):
                e = 0
            else:
                e = int(m.group(2)) if m.group(2) is not None else 1
            v ^= 1 << e
        return cls(v)

    # -- encodings ---------------------------------------------------------

    def bits(self, width: int | None = None) -> list[int]:
        """Coefficients MSB-first, left-padded with zeros to ``width``."""
        if width is None:
            width = max(self.degree + 1, 1)
        if self.degree >= width:
            raise ValueError(f"degree {self.degree} does not fit in {width} bits")
        return [(self.value >> k) & 1 for k in range(width - 1, -1, -1)]

    def hex(self) -> str:
        return f"0x{self.value:x}"

    def __str__(self) -> str:
        if self.value == 0:
            return "0"
        terms = []
        for k in range(self.degree, -1, -1):
            if (self.value >> k) & 1:
                terms.append("1" if k == 0 else "x" if k == 1 else f"x^{k}")
        return "+".join(terms)

    # -- ring operations (no reduction) -------------------------------------

    def __add__(self, other: "BinPoly") -> "BinPoly":
        return BinPoly(self.value ^ other.value)

    __sub__ = __add__

    def __mul__(self, other: "BinPoly") -> "BinPoly":
        return BinPoly(_clmul(self.value, other.value))

    def __divmod__(self, other: "BinPoly") -> tuple["BinPoly", "BinPoly"]:
        q, r = _divmod(self.value, other.value)
        return BinPoly(q), BinPoly(r)

    def __mod__(self, other: "BinPoly") -> "BinPoly":
        return BinPoly(_mod(self.value, other.value))

    def __floordiv__(self, other: "BinPoly") -> "BinPoly":
        return BinPoly(_divmod(self.value, other.value)[0])


def _clmul(a: int, b: int) -> int:
    if a.bit_length() < b.bit_length():
        a, b = b, a
    r = 0
    while b:
        low = b & -b
        r ^= a << (low.bit_length() - 1)
        b ^= low
    return r


def _mod(a: int, m: int) -> int:
    if m == 0:
        raise ZeroDivisionError("polynomial division by zero")
    dm = m.bit_length()
    while a.bit_length() >= dm:
        a ^= m << (a.bit_length() - dm)
    return a


def _divmod(a: int, m: int) -> tuple[int, int]:
    if m == 0:
        raise ZeroDivisionError("polynomial division by zero")
    dm = m.bit_length()
    q = 0
    while a.bit_length() >= dm:
        shift = a.bit_length() - dm
        q ^= 1 << shift
        a ^= m << shift
    return q, a


def add(a: BinPoly, b: BinPoly) -> BinPoly:
    return a + b


def poly_gcd(a: BinPoly, b: BinPoly) -> BinPoly:
    x, y = a.value, b.value
    while y:
        x, y = y, _mod(x, y)
    return BinPoly(x)


@dataclass(frozen=True)
class FieldCtx:
    """GF(2^gamma) defined by an irreducible modulus of degree gamma."""

    modulus: BinPoly

    def __post_init__(self):
        if self.modulus.degree < 1:
            raise ValueError("modulus must have degree >= 1")
        if not is_irreducible(self.modulus):
            raise ValueError(f"modulus {self.modulus} is not irreducible over GF(2)")

    @property
    def gamma(self) -> int:
        return self.modulus.degree

    @cached_property
    def order(self) -> int:
        return 1 << self.gamma

    @classmethod
    def of_degree(cls, gamma: int) -> "FieldCtx":
        return cls(find_irreducible(gamma))

    def element(self, bits: Sequence[int]) -> BinPoly:
        """Map gamma bits (MSB-first) to a field element."""
        if len(bits) != self.gamma:
            raise ValueError(f"expected {self.gamma} bits, got {len(bits)}")
        return BinPoly.from_bits(bits)

    # int-level fast paths used by the AMD tag; both operands already reduced
    def _mul(self, a: int, b: int) -> int:
        return _mod(_clmul(a, b), self.modulus.value)

    def _pow(self, a: int, e: int) -> int:
        m = self.modulus.value
        result = 1
        base = a
        while e:
            if e & 1:
                result = _mod(_clmul(result, base), m)
            e >>= 1
            if e:
                base = _mod(_clmul(base, base), m)
        return _mod(result, m)


def _check_reduced(a: BinPoly, ctx: FieldCtx) -> None:
    if a.degree >= ctx.gamma:
        raise ValueError(f"operand {a} has degree >= {ctx.gamma}; reduce it first")


def mul_mod(a: BinPoly, b: BinPoly, ctx: FieldCtx) -> BinPoly:
    _check_reduced(a, ctx)
    _check_reduced(b, ctx)
    return BinPoly(ctx._mul(a.value, b.value))


def pow_mod(a: BinPoly, e: int, ctx: FieldCtx) -> BinPoly:
    """a^e in the field by square-and-multiply; a^0 = 1 (including 0^0)."""
    if e < 0:
        raise ValueError("exponent must be non-negative")
    _check_reduced(a, ctx)
    return BinPoly(ctx._pow(a.value, e))


def _prime_factors(n: int) -> list[int]:
    out = []
    p = 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


def _x_pow_2k_mod(k: int, m: int) -> int:
    # x^(2^k) mod m via k repeated squarings of x
    r = _mod(0b10, m)
    for _ in range(k):
        r = _mod(_clmul(r, r), m)
    return r


def is_irreducible(b: BinPoly) -> bool:
    """Rabin's test: x^(2^n) = x mod b and gcd(x^(2^(n/q)) - x, b) = 1 for primes q | n."""
    n = b.degree
    if n < 1:
        raise ValueError("irreducibility is defined for degree >= 1")
    m = b.value
    x = _mod(0b10, m)
    if _x_pow_2k_mod(n, m) != x:
        return False
    for q in _prime_factors(n):
        h = _x_pow_2k_mod(n // q, m) ^ x
        if poly_gcd(BinPoly(h), b).value != 1:
            return False
    return True


def find_irreducible(gamma: int) -> BinPoly:
    """Smallest (as an integer) irreducible polynomial of degree gamma."""
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    if gamma == 1:
        return BinPoly(0b10)  # x; x+1 is larger
    v = (1 << gamma) | 1  # constant term must be 1 for degree >= 2
    while True:
        p = BinPoly(v)
        if is_irreducible(p):
            return p
        v += 2
