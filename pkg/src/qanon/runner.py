"""Session orchestration shared by the CLI and the end-to-end tests."""

from __future__ import annotations

import json
import socket
import threading
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from .analysis import PROTOCOLS, exact_key_budget, key_budget, per_pair_bits
from .bits import bits_to_bytes, bytes_to_bits
from .engine import MessageResult, Participant, Party, Sender, Session, party_rng, run_party
from .errors import ParameterError
from .keyfabric import KeyFabric, generate_fabric
from .transport import BitFlip, Equivocate, Rushing, Silent, SimNetwork, TcpEndpoint, always, in_phase, nth_in_phase
from .transport.tcp import DEFAULT_TIMEOUT, parse_address

__all__ = [
    "RunConfig",
    "RunResult",
    "parse_adversary",
    "run_sim",
    "run_tcp_node",
    "run_tcp_local",
    "free_listeners",
]


@dataclass
class RunConfig:
    n: int = 3
    beta: int = 16
    rep: int = 1
    protocol: str = "broadcast"
    input: str | None = None
    message_file: str | None = None
    message_bits: int | None = None
    modulus: str | None = None
    fabric: str | None = None
    transport: str = "sim"
    commit_reveal: bool = False
    listen: str | None = None
    peers: list[str] = field(default_factory=list)
    party: int | None = None
    session: int = 0
    seed: int = 0
    timeout: float = DEFAULT_TIMEOUT
    adversary: list[str] = field(default_factory=list)
    out_dir: str | None = None

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        clean = {k.replace("-", "_"): v for k, v in data.items()}
        unknown = set(clean) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**clean)
        if isinstance(cfg.peers, str):
            cfg.peers = [p for p in cfg.peers.split(",") if p]
        if isinstance(cfg.adversary, str):
            cfg.adversary = [cfg.adversary]
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_mapping(json.loads(Path(path).read_text()))

    def validate(self) -> None:
        if self.n < 3:
            raise ParameterError("n must be >= 3")
        if self.beta < 1:
            raise ParameterError("beta must be >= 1")
        if self.rep < 1 or self.rep % 2 == 0:
            raise ParameterError("rep must be an odd integer >= 1")
        if self.protocol not in PROTOCOLS:
            raise ParameterError(f"protocol must be one of {PROTOCOLS}")
        if self.transport not in ("sim", "tcp"):
            raise ParameterError("transport must be sim or tcp")
        if self.transport == "tcp" and self.peers and len(self.peers) != self.n:
            raise ParameterError(f"--peers must list all {self.n} endpoints in party order")
        if self.protocol == "message" and self.message_length() is None:
            raise ParameterError("message protocol needs --message-bits or --message-file")

    def message_length(self) -> int | None:
        if self.message_bits is not None:
            return self.message_bits
        if self.message_file is not None:
            return 8 * len(Path(self.message_file).read_bytes())
        return None


# -- inputs -------------------------------------------------------------------


def _bits_list(text: str | None, n: int) -> list[int]:
    if not text:
        return [0] * n
    vals = [int(v) for v in text.replace(" ", "").split(",") if v != ""]
    if len(vals) != n or any(v not in (0, 1) for v in vals):
        raise ParameterError(f"--input must be {n} comma-separated bits, got {text!r}")
    return vals


def _arrows(text: str | None, n: int) -> list[tuple[int, int]]:
    out = []
    for item in (text or "").replace(" ", "").split(","):
        if not item:
            continue
        try:
            a, b = (int(x) for x in item.split(">"))
        except ValueError:
            raise ParameterError(f"expected SENDER>TARGET, got {item!r}") from None
        if not (0 <= a < n and 0 <= b < n) or a == b:
            raise ParameterError(f"invalid arrow {item!r} for n={n}")
        out.append((a, b))
    return out


def _message(cfg: RunConfig) -> np.ndarray:
    m = cfg.message_length()
    if cfg.message_file is not None:
        bits = bytes_to_bits(Path(cfg.message_file).read_bytes())
        if bits.size != m:
            raise ParameterError(f"message file has {bits.size} bits, --message-bits says {m}")
        return bits
    return np.random.default_rng([cfg.seed, 0x6D7367]).integers(0, 2, m, dtype=np.uint8)


def party_inputs(cfg: RunConfig) -> list[Any]:
    """Per-party protocol input derived from ``--input``."""
    n = cfg.n
    if cfg.protocol in ("broadcast", "veto", "collision"):
        return _bits_list(cfg.input, n)
    if cfg.protocol == "notify":
        targets = [[0] * n for _ in range(n)]
        for a, b in _arrows(cfg.input, n):
            targets[a][b] = 1
        return targets
    roles: list[Any] = [Participant() for _ in range(n)]
    arrows = _arrows(cfg.input, n)
    if arrows:
        msg = _message(cfg)
        for a, b in arrows:
            roles[a] = Sender(msg, b)
    return roles


def _machine(party: Party, protocol: str, value):
    if protocol == "broadcast":
        return party.broadcast(value)
    if protocol == "veto":
        return party.veto(value)
    if protocol == "notify":
        return party.notification(value)
    if protocol == "collision":
        return party.collision_detection(value)
    return party.message_transmission(value)


# -- adversary flags ----------------------------------------------------------


def parse_adversary(text: str):
    """``silent:P[:PHASE]``, ``rushing:P``, ``bitflip:P[:PHASE[:K]]``, ``equivocate:P[:PHASE[:K]]``."""
    parts = text.split(":")
    kind = parts[0].lower()
    try:
        party = int(parts[1])
    except (IndexError, ValueError):
        raise ParameterError(f"adversary {text!r} must name a party, e.g. silent:3") from None
    if kind == "rushing":
        return Rushing(party)
    if len(parts) == 2:
        when = always
    elif len(parts) == 3:
        when = in_phase(parts[2])
    elif len(parts) == 4:
        when = nth_in_phase(parts[2], int(parts[3]))
    else:
        raise ParameterError(f"cannot parse adversary {text!r}")
    classes = {"silent": Silent, "bitflip": BitFlip, "equivocate": Equivocate}
    if kind not in classes:
        raise ParameterError(f"unknown adversary kind {kind!r}")
    return classes[kind](party, when)


# -- results -------------------------------------------------------------------


@dataclass
class RunResult:
    protocol: str
    outcomes: list[Any]
    transcripts: dict[int, list]
    ledger_bits: int
    formula_bits: float
    exact_bits: int
    phase_rounds: dict[str, int] = field(default_factory=dict)

    def outcome_json(self) -> list:
        return [_jsonable(o) for o in self.outcomes]


def _jsonable(o):
    if isinstance(o, MessageResult):
        d = {"status": o.status.value, "notified": o.notified, "verdict": o.verdict}
        if o.message is not None:
            d["message_hex"] = bits_to_bytes(o.message).hex()
        return d
    if hasattr(o, "parity"):
        return {"parity": o.parity}
    if isinstance(o, bool):
        return int(o)
    return o


def _fabric_for(cfg: RunConfig) -> KeyFabric:
    if cfg.fabric:
        fabric = KeyFabric.load(cfg.fabric)
        if fabric.n != cfg.n:
            raise ParameterError(f"fabric holds {fabric.n} parties but n={cfg.n}")
        return fabric
    need = per_pair_bits(cfg.protocol, cfg.n, cfg.beta, cfg.message_length()) * cfg.rep
    return generate_fabric(cfg.n, need, 0.0, cfg.seed)


def _budgets(cfg: RunConfig) -> tuple[float, int]:
    m = cfg.message_length()
    links_bits = key_budget(cfg.protocol, cfg.n, cfg.beta, m) * cfg.rep
    return links_bits, exact_key_budget(cfg.protocol, cfg.n, cfg.beta, m) * cfg.rep


def run_sim(cfg: RunConfig) -> RunResult:
    cfg.validate()
    fabric = _fabric_for(cfg)
    policies = [parse_adversary(a) for a in cfg.adversary]
    network = SimNetwork(cfg.n, policies, commit_reveal=cfg.commit_reveal, seed=cfg.seed)
    session = Session(
        fabric,
        beta=cfg.beta,
        repetition=cfg.rep,
        seed=cfg.seed,
        network=network,
        session_id=cfg.session,
        message_bits=cfg.message_length(),
        modulus=cfg.modulus,
    )
    inputs = party_inputs(cfg)
    outcomes = session.run(_machine(p, cfg.protocol, v) for p, v in zip(session.parties, inputs))
    formula, exact = _budgets(cfg)
    return RunResult(
        cfg.protocol,
        outcomes,
        {p.me: p.transcript for p in session.parties},
        session.consumed,
        formula,
        exact,
        dict(session.parties[0].phase_rounds),
    )


def _node_party(cfg: RunConfig, me: int, fabric: KeyFabric) -> Party:
    return Party(
        me, cfg.n, fabric,
        beta=cfg.beta,
        repetition=cfg.rep,
        rng=party_rng(cfg.seed, me),
        session_id=cfg.session,
        message_bits=cfg.message_length(),
        modulus=cfg.modulus,
    )


def run_tcp_node(cfg: RunConfig, me: int, *, listener: socket.socket | None = None,
                 fabric: KeyFabric | None = None) -> tuple[Any, Party]:
    """Join a TCP session as party ``me``; blocks until the protocol finishes."""
    cfg.validate()
    if len(cfg.peers) != cfg.n:
        raise ParameterError(f"tcp needs --peers with all {cfg.n} endpoints")
    if fabric is None:
        if not cfg.fabric:
            raise ParameterError("tcp nodes need a shared --fabric file")
        fabric = KeyFabric.load(cfg.fabric)
    addresses = [parse_address(p) for p in cfg.peers]
    if cfg.listen:
        addresses[me] = parse_address(cfg.listen)
    policies = [parse_adversary(a) for a in cfg.adversary]
    party = _node_party(cfg, me, fabric)
    value = party_inputs(cfg)[me]
    endpoint = TcpEndpoint(me, addresses, session_id=cfg.session, timeout=cfg.timeout,
                           policies=policies, listener=listener)
    try:
        endpoint.connect()
        result = run_party(_machine(party, cfg.protocol, value), endpoint)
    finally:
        endpoint.close()
    return result, party


def free_listeners(n: int, host: str = "127.0.0.1") -> list[socket.socket]:
    """Pre-bound listening sockets on ephemeral ports (no bind race)."""
    return [socket.create_server((host, 0)) for _ in range(n)]


def run_tcp_local(cfg: RunConfig, fabric: KeyFabric | None = None) -> RunResult:
    """All n parties over real loopback TCP, one thread and one fabric copy each."""
    listeners = free_listeners(cfg.n)
    cfg.peers = [f"127.0.0.1:{s.getsockname()[1]}" for s in listeners]
    cfg.transport = "tcp"
    cfg.validate()
    if fabric is None:
        fabric = _fabric_for(cfg)
    blob = fabric.to_bytes()
    results: list[Any] = [None] * cfg.n
    parties: list[Party | None] = [None] * cfg.n
    errors: list[BaseException | None] = [None] * cfg.n

    def node(me: int) -> None:
        try:
            results[me], parties[me] = run_tcp_node(cfg, me, listener=listeners[me], fabric=KeyFabric.from_bytes(blob))
        except BaseException as exc:  # reported to the caller below
            errors[me] = exc

    threads = [threading.Thread(target=node, args=(p,), name=f"qanon-node-{p}") for p in range(cfg.n)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for exc in errors:
        if exc is not None:
            raise exc
    formula, exact = _budgets(cfg)
    # every link is counted once from each end
    ledger = sum(sum(p.ledger().values()) for p in parties) // 2  # type: ignore[union-attr]
    return RunResult(cfg.protocol, results, {p.me: p.transcript for p in parties}, ledger, formula, exact,
                     dict(parties[0].phase_rounds))  # type: ignore[union-attr]
