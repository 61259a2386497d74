"""Deterministic in-process broadcast with adversary hooks."""

from __future__ import annotations

import random
import threading
from typing import Mapping, Sequence

from ..errors import CommitmentMismatch, Desync, Timeout
from .base import (
    SALT_BYTES,
    BitFlip,
    Equivocate,
    Honest,
    Rushing,
    RoundId,
    Silent,
    commitment,
)

__all__ = ["SimNetwork", "SimEndpoint"]


class SimNetwork:
    """Applies adversary policies to one round of announcements at a time.

    Use :meth:`exchange` from a lockstep driver that holds every party's bit,
    or :meth:`endpoint` to get a blocking per-party interface for threads.
    """

    def __init__(self, n: int, policies: Sequence = (), commit_reveal: bool = False, seed: int = 0):
        self.n = n
        self.policies = [p for p in policies if not isinstance(p, Honest)]
        for p in self.policies:
            if not 0 <= p.party < n:
                raise ValueError(f"policy {p} names a party outside 0..{n - 1}")
        self.commit_reveal = commit_reveal
        self._salt_rng = random.Random(seed)
        self._cond = threading.Condition()
        self._slots: dict[RoundId, dict] = {}

    def _active(self, round_id: RoundId, phase: str) -> list:
        # every predicate is evaluated exactly once per round
        return [p for p in self.policies if getattr(p, "when", None) is None or p.when(round_id, phase)]

    def exchange(
        self,
        round_id: RoundId,
        bits: Mapping[int, int],
        schedule: Sequence[int],
        excluded: int | None = None,
        phase: str = "",
    ) -> tuple[int, ...]:
        active = self._active(round_id, phase)
        flips = {p.party for p in active if isinstance(p, BitFlip)}
        liars = {p.party for p in active if isinstance(p, Equivocate)}
        rushers = {p.party: p.strategy for p in active if isinstance(p, Rushing)}
        silent = {p.party for p in active if isinstance(p, Silent)}

        for p in schedule:
            if p in silent:
                raise Timeout(p, round_id)

        if self.commit_reveal:
            committed = {}
            for p in schedule:
                b = bits[p] ^ (p in flips)
                if p in rushers:
                    # only opaque digests are visible before committing
                    b = rushers[p]({}, b, schedule) & 1
                committed[p] = b
            salts = {p: self._salt_rng.getrandbits(8 * SALT_BYTES).to_bytes(SALT_BYTES, "big") for p in schedule}
            digests = {p: commitment(salts[p], round_id, p, committed[p]) for p in schedule}
            out = []
            for p in schedule:
                revealed = committed[p] ^ (p in liars)
                if commitment(salts[p], round_id, p, revealed) != digests[p]:
                    raise CommitmentMismatch(p, round_id)
                out.append(revealed)
            return tuple(out)

        announced: dict[int, int] = {}
        for p in schedule:
            b = bits[p] ^ (p in flips)
            if p in rushers:
                b = rushers[p](dict(announced), b, schedule) & 1
            announced[p] = b
        return tuple(announced[p] for p in schedule)

    def endpoint(self, party: int) -> "SimEndpoint":
        return SimEndpoint(self, party)

    def _rendezvous(self, party, round_id, my_bit, schedule, excluded, phase):
        schedule = tuple(schedule)
        with self._cond:
            slot = self._slots.get(round_id)
            if slot is None:
                slot = self._slots[round_id] = {
                    "shape": (schedule, excluded, phase),
                    "bits": {},
                    "arrived": set(),
                    "left": 0,
                }
            if slot["shape"] != (schedule, excluded, phase):
                raise Desync(f"party {party} disagrees on the shape of round {round_id}")
            if party in slot["arrived"]:
                raise Desync(f"party {party} entered round {round_id} twice")
            slot["arrived"].add(party)
            if my_bit is not None:
                slot["bits"][party] = my_bit
            if len(slot["arrived"]) == self.n:
                try:
                    slot["result"] = self.exchange(round_id, slot["bits"], schedule, excluded, phase)
                except (Timeout, CommitmentMismatch) as exc:
                    slot["error"] = exc
                self._cond.notify_all()
            else:
                self._cond.wait_for(lambda: "result" in slot or "error" in slot)
            slot["left"] += 1
            if slot["left"] == self.n:
                del self._slots[round_id]
            if "error" in slot:
                raise slot["error"]
            return slot["result"]


class SimEndpoint:
    """Blocking per-party view of a :class:`SimNetwork`."""

    def __init__(self, network: SimNetwork, party: int):
        self.network = network
        self.party = party

    def round_exchange(self, round_id, my_bit, schedule, excluded=None, phase=""):
        return self.network._rendezvous(self.party, round_id, my_bit, schedule, excluded, phase)

    def close(self) -> None:
        pass
