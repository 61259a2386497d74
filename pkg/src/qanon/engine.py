"""Per-party protocol state machines.

Each protocol step is a generator: it yields an :class:`~qanon.transport.base.Announce`
for every parity round and is resumed with the announcement vector (in
schedule order), or has :class:`~qanon.errors.Timeout` thrown into it when a
party refused to announce.  The engine never touches sockets; a driver feeds
it from a transport:

* :func:`run_lockstep` steps all n parties of an in-process session together
  against :meth:`SimNetwork.exchange`;
* :func:`run_party` runs one party against any blocking endpoint
  (``SimEndpoint`` or ``TcpEndpoint``).

Key bits are drawn from the fabric in the same global order by every party,
so both ends of a pair always read the same indices.
"""

from __future__ import annotations

import enum
import random
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Any, Generator, Iterable, Sequence

import numpy as np

from . import amd
from .bits import as_bits, random_bits
from .errors import CommitmentMismatch, Desync, ParameterError, Timeout
from .gf2 import BinPoly
from .keyfabric import KeyFabric
from .transport.base import Announce, RoundId
from .transport.sim import SimNetwork

__all__ = [
    "ParityResult",
    "VetoTrace",
    "Sender",
    "Participant",
    "MessageStatus",
    "MessageResult",
    "Party",
    "Session",
    "party_rng",
    "run_lockstep",
    "run_party",
    "veto_schedule",
    "write_transcript",
]

Steps = Generator[Announce, Any, Any]


def party_rng(seed: int, party: int) -> random.Random:
    """Private coin source of one party; identical across processes for equal seeds."""
    return random.Random(f"qanon:{seed}:{party}")


def veto_schedule(n: int, last: int) -> tuple[int, ...]:
    """Cyclic rotation of 0..n-1 ending with ``last``."""
    return tuple((last + 1 + k) % n for k in range(n))


@dataclass(frozen=True)
class ParityResult:
    parity: int
    announcements: tuple[int, ...] = ()


@dataclass(frozen=True)
class VetoTrace:
    output: int
    rounds: tuple[tuple[int, int], ...] = ()  # (my c, overall parity)
    timed_out: int | None = None


@dataclass(frozen=True)
class Sender:
    message: np.ndarray
    receiver: int


@dataclass(frozen=True)
class Participant:
    """Anyone who is not sending; the receiver learns its role from notification."""


class MessageStatus(str, enum.Enum):
    DELIVERED = "delivered"
    CORRUPTED = "corrupted"
    NO_SENDER = "no-sender"
    COLLISION = "collision"


@dataclass(frozen=True)
class MessageResult:
    status: MessageStatus
    message: np.ndarray | None = None
    notified: bool = False
    verdict: int = 1


@lru_cache(maxsize=32)
def _amd_params(m: int, beta: int, modulus: int | None) -> amd.AmdParams:
    return amd.derive_params(m, beta, None if modulus is None else BinPoly(modulus))


class Party:
    """Protocol logic of a single participant."""

    def __init__(
        self,
        me: int,
        n: int,
        fabric: KeyFabric,
        *,
        beta: int = 16,
        repetition: int = 1,
        rng=None,
        session_id: int = 0,
        message_bits: int | None = None,
        modulus: BinPoly | str | None = None,
    ):
        if n < 3:
            raise ParameterError("protocol sessions need n >= 3")
        if fabric.n != n:
            raise ParameterError(f"fabric is for {fabric.n} parties, session has {n}")
        if not 0 <= me < n:
            raise ParameterError(f"party {me} outside 0..{n - 1}")
        if beta < 1:
            raise ParameterError("beta must be >= 1")
        self.me = me
        self.n = n
        self.fabric = fabric
        self.beta = beta
        self.repetition = 1
        self.set_repetition(repetition)
        self.rng = rng if rng is not None else party_rng(0, me)
        self.session_id = session_id
        self.message_bits = message_bits
        if isinstance(modulus, str):
            modulus = BinPoly.parse(modulus)
        self.modulus = modulus
        self.peers = [p for p in range(n) if p != me]
        self._links = [fabric.pair(me, p) for p in self.peers]
        self.round_seq = 0
        self.transcript: list[tuple[RoundId, int, int]] = []
        self.outcomes: list[tuple[str, Any]] = []
        # logical parity rounds per phase (a repeated round counts once)
        self.phase_rounds: Counter[str] = Counter()

    def set_repetition(self, N: int) -> None:
        if N < 1 or N % 2 == 0:
            raise ParameterError(f"repetition must be an odd integer >= 1, got {N}")
        self.repetition = N

    def ledger(self) -> dict[int, int]:
        """Key bits this party has drawn from each of its links (cursor positions)."""
        return {peer: link.cursor(self.me) for peer, link in zip(self.peers, self._links)}

    @property
    def amd_params(self) -> amd.AmdParams:
        if self.message_bits is None:
            raise ParameterError("message length is a session parameter and was not set")
        mod = None if self.modulus is None else self.modulus.value
        return _amd_params(self.message_bits, self.beta, mod)

    def _record(self, rid: RoundId, schedule: Sequence[int], vector: Sequence[int]) -> None:
        if len(vector) != len(schedule):
            raise Desync(f"round {rid}: got {len(vector)} announcements for {len(schedule)} speakers")
        self.transcript.extend((rid, p, int(b)) for p, b in zip(schedule, vector))

    # -- anonymous broadcasting ----------------------------------------------

    def parity_round(self, bit: int, excluded: int | None = None, schedule: Sequence[int] | None = None,
                     phase: str = "broadcast") -> Steps:
        """One parity round, repeated ``repetition`` times with a majority vote."""
        me, N = self.me, self.repetition
        if schedule is None:
            schedule = tuple(p for p in range(self.n) if p != excluded)
        else:
            schedule = tuple(schedule)
        pad = [0] * N
        for link in self._links:
            raw = link.take(me, N)
            for k in range(N):
                pad[k] ^= raw[k]
        listening = me == excluded
        self.phase_rounds[phase] += 1
        parities = []
        mine = []
        for k in range(N):
            rid = RoundId(self.session_id, self.round_seq)
            self.round_seq += 1
            ann = None if listening else pad[k] ^ (bit & 1)
            vector = yield Announce(rid, ann, schedule, excluded, phase)
            self._record(rid, schedule, vector)
            total = 0
            for b in vector:
                total ^= b
            if listening:
                total ^= pad[k]
            else:
                mine.append(ann)
            parities.append(total)
        parity = int(2 * sum(parities) > N)
        return ParityResult(parity, tuple(mine))

    def broadcast(self, bit: int) -> Steps:
        res = yield from self.parity_round(bit)
        self.outcomes.append(("broadcast", res.parity))
        return res

    # -- veto ---------------------------------------------------------------

    def _veto(self, x: int, phase: str, full: bool = False) -> Steps:
        rounds = []
        out = 0
        for last in range(self.n):
            schedule = veto_schedule(self.n, last)
            for _ in range(self.beta):
                c = self.rng.getrandbits(1) if x else 0
                try:
                    res = yield from self.parity_round(c, schedule=schedule, phase=phase)
                except Timeout as exc:
                    # refusing to broadcast forces a veto
                    return VetoTrace(1, tuple(rounds), timed_out=exc.party)
                rounds.append((c, res.parity))
                if res.parity:
                    out = 1
                    if not full:
                        return VetoTrace(1, tuple(rounds))
        return VetoTrace(out, tuple(rounds))

    def veto(self, x: int, phase: str = "veto") -> Steps:
        trace = yield from self._veto(x & 1, phase)
        self.outcomes.append((phase, trace.output))
        return trace.output

    # -- notification ---------------------------------------------------------

    def notification(self, targets: Sequence[int], phase: str = "notify") -> Steps:
        """``targets[i] = 1`` if this party wants to notify party i.  Returns own flag."""
        if len(targets) != self.n:
            raise ParameterError(f"targets must have length {self.n}")
        notified = False
        for recipient in range(self.n):
            want = recipient != self.me and bool(targets[recipient])
            for _ in range(self.beta):
                c = self.rng.getrandbits(1) if want else 0
                res = yield from self.parity_round(c, excluded=recipient, phase=phase)
                if recipient == self.me and res.parity:
                    notified = True
        self.outcomes.append((phase, int(notified)))
        return notified

    # -- collision detection --------------------------------------------------

    def collision_detection(self, want_to_send: int, phase: str = "collision") -> Steps:
        want = want_to_send & 1
        a = yield from self._veto(want, phase + "-A", full=True)
        # a co-sender shows up as a round whose parity differs from my own c
        other_sender = bool(want) and (a.timed_out is not None or any(c ^ p for c, p in a.rounds))
        b = yield from self._veto(int(other_sender), phase + "-B")
        verdict = 0 if a.output == 0 else (2 if b.output else 1)
        self.outcomes.append((phase, verdict))
        return verdict

    # -- anonymous private message transmission -------------------------------

    def message_transmission(self, role: Sender | Participant) -> Steps:
        sending = isinstance(role, Sender)
        params = self.amd_params
        if sending:
            msg = as_bits(role.message)
            if msg.size != params.m:
                raise ParameterError(f"message has {msg.size} bits, session expects {params.m}")
            if role.receiver == self.me or not 0 <= role.receiver < self.n:
                raise ParameterError(f"invalid receiver {role.receiver}")

        verdict = yield from self.collision_detection(int(sending), phase="message-collision")
        if verdict != 1:
            status = MessageStatus.NO_SENDER if verdict == 0 else MessageStatus.COLLISION
            result = MessageResult(status, verdict=verdict)
            self.outcomes.append(("message", status.value))
            return result

        targets = [0] * self.n
        if sending:
            targets[role.receiver] = 1
        notified = yield from self.notification(targets, phase="message-notify")

        length = params.encoded_length
        if sending:
            theta = random_bits(self.rng, params.gamma)
            inputs = amd.encode(msg, params, theta).bits
        elif notified:
            r = random_bits(self.rng, length)
            inputs = r
        else:
            inputs = np.zeros(length, dtype=np.uint8)

        d = np.zeros(length, dtype=np.uint8)
        for k in range(length):
            res = yield from self.parity_round(int(inputs[k]), phase="message")
            d[k] = res.parity

        received = None
        corrupted = 0
        if notified and not sending:
            decoded = amd.decode(d ^ r, params)
            if decoded is amd.TamperDetected:
                corrupted = 1
            else:
                received = decoded
        alarm = yield from self.veto(corrupted, phase="message-veto")
        status = MessageStatus.CORRUPTED if alarm else MessageStatus.DELIVERED
        self.outcomes.append(("message", status.value))
        return MessageResult(status, received if not alarm else None, notified, verdict)


# -- drivers ---------------------------------------------------------------------


def _advance(machine: Steps, value=None, exc: BaseException | None = None):
    try:
        if exc is not None:
            return machine.throw(exc), None, False
        return machine.send(value), None, False
    except StopIteration as stop:
        return None, stop.value, True


def run_lockstep(machines: Sequence[Steps], network: SimNetwork) -> list:
    """Drive all parties' generators round by round; returns their results."""
    n = len(machines)
    results: list = [None] * n
    pending: dict[int, Announce] = {}
    for i, m in enumerate(machines):
        req, res, done = _advance(m)
        if done:
            results[i] = res
        else:
            pending[i] = req
    while pending:
        if len(pending) != n:
            raise Desync(f"parties {sorted(set(range(n)) - set(pending))} finished early")
        first = pending[0]
        shape = (first.round, first.schedule, first.excluded, first.phase)
        bits = {}
        for i, r in pending.items():
            if (r.round, r.schedule, r.excluded, r.phase) != shape:
                raise Desync(f"party {i} disagrees on round {first.round}: {r} vs {first}")
            if r.bit is not None:
                bits[i] = r.bit
        vec, exc = None, None
        try:
            vec = network.exchange(first.round, bits, first.schedule, first.excluded, first.phase)
        except (Timeout, CommitmentMismatch) as e:
            exc = e
        nxt = {}
        for i, m in enumerate(machines):
            req, res, done = _advance(m, vec, exc)
            if done:
                results[i] = res
            else:
                nxt[i] = req
        pending = nxt
    return results


def run_party(machine: Steps, endpoint) -> Any:
    """Drive one party's generator against a blocking ``round_exchange`` endpoint."""
    req, res, done = _advance(machine)
    while not done:
        try:
            vec = endpoint.round_exchange(req.round, req.bit, req.schedule, req.excluded, req.phase)
        except Timeout as exc:
            req, res, done = _advance(machine, exc=exc)
        else:
            req, res, done = _advance(machine, vec)
    return res


class Session:
    """All n parties of one in-process session, stepped in lockstep."""

    def __init__(
        self,
        fabric: KeyFabric,
        *,
        beta: int = 16,
        repetition: int = 1,
        seed: int = 0,
        rngs: Sequence | None = None,
        network: SimNetwork | None = None,
        session_id: int = 0,
        message_bits: int | None = None,
        modulus: BinPoly | str | None = None,
    ):
        n = fabric.n
        self.n = n
        self.fabric = fabric
        self.beta = beta
        self.network = network if network is not None else SimNetwork(n, seed=seed)
        if rngs is not None and len(rngs) != n:
            raise ParameterError("need one rng per party")
        self.parties = [
            Party(
                p, n, fabric,
                beta=beta,
                repetition=repetition,
                rng=rngs[p] if rngs is not None else party_rng(seed, p),
                session_id=session_id,
                message_bits=message_bits,
                modulus=modulus,
            )
            for p in range(n)
        ]
        self._start = fabric.consumed()

    @property
    def repetition(self) -> int:
        return self.parties[0].repetition

    def set_repetition(self, N: int) -> "Session":
        for p in self.parties:
            p.set_repetition(N)
        return self

    @property
    def round_counter(self) -> int:
        return self.parties[0].round_seq

    def ledger(self) -> dict[tuple[int, int], int]:
        """Key bits drawn on each link since the session started."""
        now = self.fabric.consumed()
        return {k: now[k] - self._start[k] for k in now}

    @property
    def consumed(self) -> int:
        return sum(self.ledger().values())

    @property
    def transcript(self) -> list[tuple[RoundId, int, int]]:
        return self.parties[0].transcript

    def agreement(self) -> bool:
        ref = self.parties[0].transcript
        return all(p.transcript == ref for p in self.parties[1:])

    def run(self, machines: Iterable[Steps]) -> list:
        return run_lockstep(list(machines), self.network)

    def broadcast(self, inputs: Sequence[int]) -> list[ParityResult]:
        self._check(inputs)
        return self.run(p.broadcast(b) for p, b in zip(self.parties, inputs))

    def parity_round(self, inputs: Sequence[int], excluded: int | None = None) -> list[ParityResult]:
        self._check(inputs)
        return self.run(p.parity_round(b, excluded) for p, b in zip(self.parties, inputs))

    def veto(self, xs: Sequence[int]) -> list[int]:
        self._check(xs)
        return self.run(p.veto(x) for p, x in zip(self.parties, xs))

    def notification(self, targets: Sequence[Sequence[int]]) -> list[bool]:
        """``targets[j][i] = 1`` if party j notifies party i."""
        self._check(targets)
        return self.run(p.notification(t) for p, t in zip(self.parties, targets))

    def collision_detection(self, wants: Sequence[int]) -> list[int]:
        self._check(wants)
        return self.run(p.collision_detection(w) for p, w in zip(self.parties, wants))

    def message_transmission(self, roles: Sequence[Sender | Participant]) -> list[MessageResult]:
        self._check(roles)
        return self.run(p.message_transmission(r) for p, r in zip(self.parties, roles))

    def _check(self, per_party: Sequence) -> None:
        if len(per_party) != self.n:
            raise ParameterError(f"expected {self.n} per-party inputs, got {len(per_party)}")


def write_transcript(path: str | Path, transcript: Sequence[tuple[RoundId, int, int]],
                     outcomes: Sequence[tuple[str, Any]] = (), header: str | None = None) -> None:
    """Line-oriented log: ``round_id party bit`` per announcement, then ``# outcome`` trailers."""
    lines = []
    if header:
        lines.append(f"# {header}")
    lines.extend(f"{rid.sequence} {p} {b}" for rid, p, b in transcript)
    lines.extend(f"# outcome {name} {value}" for name, value in outcomes)
    Path(path).write_text("\n".join(lines) + "\n")


def read_transcript(path: str | Path) -> tuple[list[tuple[int, int, int]], list[tuple[str, str]]]:
    rows, outcomes = [], []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# outcome "):
            _, _, name, value = line.split(" ", 3)
            outcomes.append((name, value))
        elif line and not line.startswith("#"):
            r, p, b = line.split()
            rows.append((int(r), int(p), int(b)))
    return rows, outcomes
