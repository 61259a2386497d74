"""Algebraic manipulation detection (AMD) code over GF(2^gamma).

A message ``mu`` of m bits is sent as ``mu || theta || tau`` where ``theta`` is
gamma fresh random bits and ``tau = F(mu, theta)`` is

    theta^(d+2) + sum_{i=1..d} mu[i-1] * theta^i      (mod b(x))

with ``mu`` zero-padded to d chunks of gamma bits.  Any additive offset on the
codeword chosen independently of ``theta`` passes the decoder with
probability at most (d+1)/2^gamma <= 2^-beta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .bits import as_bits, bits_to_int, int_to_bits
from .gf2 import BinPoly, FieldCtx

__all__ = [
    "AmdParams",
    "EncodedMessage",
    "TamperDetected",
    "derive_params",
    "tag",
    "encode",
    "decode",
    "write_vectors",
    "read_vectors",
]


class _TamperDetected:
    __slots__ = ()

    def __repr__(self) -> str:
        return "TamperDetected"

    def __bool__(self) -> bool:
        return False


#: Returned by :func:`decode` when the tag does not verify.
TamperDetected = _TamperDetected()


@dataclass(frozen=True)
class AmdParams:
    m: int
    beta: int
    d: int
    gamma: int
    ctx: FieldCtx

    def __post_init__(self):
        if self.ctx.gamma != self.gamma:
            raise ValueError(f"modulus degree {self.ctx.gamma} != gamma {self.gamma}")
        if self.d % 2 != 1:
            raise ValueError("d must be odd")
        if self.d * self.gamma < self.m:
            raise ValueError("d * gamma must cover the message")

    @property
    def encoded_length(self) -> int:
        return self.m + 2 * self.gamma

    @property
    def efficiency(self) -> float:
        return self.m / self.encoded_length

    @property
    def failure_bound(self) -> float:
        """Exact worst-case pass probability of a fixed nonzero offset."""
        return (self.d + 1) / 2**self.gamma


def _chunk_count(m: int, beta: int) -> int:
    d = 1
    while d * (beta + math.log2(d + 1)) < m:
        d += 2
    return d


def derive_params(m: int, beta: int, modulus: BinPoly | str | None = None) -> AmdParams:
    """Pick d (smallest odd with d(beta + log2(d+1)) >= m) and gamma = ceil(beta + log2(d+1)).

    The field modulus defaults to the smallest irreducible of degree gamma;
    an explicit modulus of that degree can be supplied instead.
    """
    if m < 1 or beta < 1:
        raise ValueError("m and beta must be >= 1")
    d = _chunk_count(m, beta)
    gamma = math.ceil(beta + math.log2(d + 1))
    if modulus is None:
        ctx = FieldCtx.of_degree(gamma)
    else:
        if isinstance(modulus, str):
            modulus = BinPoly.parse(modulus)
        ctx = FieldCtx(modulus)
    return AmdParams(m=m, beta=beta, d=d, gamma=gamma, ctx=ctx)


def _tag_int(mu: np.ndarray, theta: int, params: AmdParams) -> int:
    g, d = params.gamma, params.d
    padded = np.zeros(d * g, dtype=np.uint8)
    padded[: params.m] = mu
    chunks = [bits_to_int(padded[i * g : (i + 1) * g]) for i in range(d)]
    ctx = params.ctx
    # Horner over mu[d-1] .. mu[0]: acc = sum_{i=1..d} mu[i-1] theta^i
    acc = 0
    for c in reversed(chunks):
        acc = ctx._mul(acc ^ c, theta)
    return acc ^ ctx._pow(theta, d + 2)


def tag(mu, theta, params: AmdParams) -> np.ndarray:
    """The gamma-bit tag F(mu, theta)."""
    mu = as_bits(mu)
    theta = as_bits(theta)
    if mu.size != params.m:
        raise ValueError(f"mu has {mu.size} bits, expected {params.m}")
    if theta.size != params.gamma:
        raise ValueError(f"theta has {theta.size} bits, expected {params.gamma}")
    return int_to_bits(_tag_int(mu, bits_to_int(theta), params), params.gamma)


@dataclass(frozen=True)
class EncodedMessage:
    mu: np.ndarray
    theta: np.ndarray
    tau: np.ndarray

    @property
    def bits(self) -> np.ndarray:
        return np.concatenate([self.mu, self.theta, self.tau])

    def __len__(self) -> int:
        return self.mu.size + self.theta.size + self.tau.size


def encode(message, params: AmdParams, randomness) -> EncodedMessage:
    """Encode ``message`` with caller-supplied gamma random bits for theta."""
    mu = as_bits(message)
    if mu.size != params.m:
        raise ValueError(f"message has {mu.size} bits, expected {params.m}")
    theta = as_bits(randomness)
    return EncodedMessage(mu=mu.copy(), theta=theta.copy(), tau=tag(mu, theta, params))


def decode(rho, params: AmdParams):
    """Return the m message bits, or ``TamperDetected`` if the tag fails."""
    rho = as_bits(rho)
    if rho.size != params.encoded_length:
        raise ValueError(f"received {rho.size} bits, expected {params.encoded_length}")
    m, g = params.m, params.gamma
    mu, theta, tau = rho[:m], rho[m : m + g], rho[m + g :]
    if _tag_int(mu, bits_to_int(theta), params) != bits_to_int(tau):
        return TamperDetected
    return mu.copy()


# -- test-vector files --------------------------------------------------------
#
# One vector per line, whitespace separated:
#   m beta d gamma modulus mu theta tau
# m, beta, d, gamma are decimal; modulus, mu, theta, tau are hex, MSB-first,
# left-padded to ceil(bits/4) digits.  Lines starting with '#' are comments.


def _hex(bits: np.ndarray) -> str:
    return f"{bits_to_int(bits):0{max(1, -(-bits.size // 4))}x}"


def write_vectors(path: str | Path, rows: Iterable[tuple[AmdParams, np.ndarray, np.ndarray]]) -> None:
    lines = ["# m beta d gamma modulus mu theta tau"]
    for params, mu, theta in rows:
        mu, theta = as_bits(mu), as_bits(theta)
        tau = tag(mu, theta, params)
        lines.append(
            f"{params.m} {params.beta} {params.d} {params.gamma} "
            f"{params.ctx.modulus.value:x} {_hex(mu)} {_hex(theta)} {_hex(tau)}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class Vector:
    m: int
    beta: int
    d: int
    gamma: int
    modulus: BinPoly
    mu: np.ndarray
    theta: np.ndarray
    tau: np.ndarray


def read_vectors(path: str | Path) -> Iterator[Vector]:
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        m, beta, d, gamma, mod, mu, theta, tau = line.split()
        m, gamma = int(m), int(gamma)
        yield Vector(
            m=m,
            beta=int(beta),
            d=int(d),
            gamma=gamma,
            modulus=BinPoly(int(mod, 16)),
            mu=int_to_bits(int(mu, 16), m),
            theta=int_to_bits(int(theta, 16), gamma),
            tau=int_to_bits(int(tau, 16), gamma),
        )
