"""Round identifiers, announcement requests, adversary policies, commitments."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

__all__ = [
    "RoundId",
    "Announce",
    "Honest",
    "Rushing",
    "Silent",
    "BitFlip",
    "Equivocate",
    "always",
    "in_phase",
    "nth_in_phase",
    "force_parity_zero",
    "commitment",
    "SALT_BYTES",
]

SALT_BYTES = 16


@dataclass(frozen=True, order=True)
class RoundId:
    session: int
    sequence: int

    def __str__(self) -> str:
        return f"{self.session}:{self.sequence}"


@dataclass(frozen=True)
class Announce:
    """What one engine asks the transport to do for a round.

    ``bit`` is None for the party that only listens (the excluded party).
    ``schedule`` lists the announcing parties in announcement order.
    """

    round: RoundId
    bit: int | None
    schedule: tuple[int, ...]
    excluded: int | None = None
    phase: str = ""


RoundPredicate = Callable[[RoundId, str], bool]


def always(round_id: RoundId, phase: str) -> bool:
    return True


def in_phase(phase: str) -> RoundPredicate:
    def pred(round_id: RoundId, p: str) -> bool:
        return p == phase

    return pred


class nth_in_phase:
    """True exactly once: for the k-th (0-based) round seen in ``phase``.

    Stateful; a transport evaluates it once per round.
    """

    def __init__(self, phase: str, k: int = 0):
        self.phase = phase
        self.k = k
        self._seen = 0

    def __call__(self, round_id: RoundId, phase: str) -> bool:
        if phase != self.phase:
            return False
        hit = self._seen == self.k
        self._seen += 1
        return hit


def force_parity_zero(visible: Mapping[int, int], honest_bit: int, schedule: Sequence[int]) -> int:
    """Rushing strategy: when speaking last, cancel everything announced so far."""
    if len(visible) == len(schedule) - 1:
        acc = 0
        for b in visible.values():
            acc ^= b
        return acc
    return honest_bit


@dataclass(frozen=True)
class Honest:
    pass


@dataclass(frozen=True)
class Rushing:
    """``party`` sees what was announced before it in the schedule, then picks its bit."""

    party: int
    strategy: Callable[[Mapping[int, int], int, Sequence[int]], int] = force_parity_zero


@dataclass(frozen=True)
class Silent:
    """``party`` does not announce in rounds matching ``when``."""

    party: int
    when: RoundPredicate = field(default=always)


@dataclass(frozen=True)
class BitFlip:
    """``party`` flips its announced bit in rounds matching ``when`` (a consistent lie)."""

    party: int
    when: RoundPredicate = field(default=always)


@dataclass(frozen=True)
class Equivocate:
    """``party`` commits to its honest bit but reveals the flipped one.

    Only meaningful under commit-reveal.
    """

    party: int
    when: RoundPredicate = field(default=always)


Policy = Honest | Rushing | Silent | BitFlip | Equivocate


def commitment(salt: bytes, round_id: RoundId, party: int, bit: int) -> bytes:
    """SHA-256 over salt, round, party and bit."""
    if len(salt) != SALT_BYTES:
        raise ValueError(f"salt must be {SALT_BYTES} bytes")
    h = hashlib.sha256()
    h.update(salt)
    h.update(struct.pack(">QQBB", round_id.session, round_id.sequence, party, bit & 1))
    return h.digest()
