"""Full-mesh TCP transport with mandatory commit-reveal.

Party i listens on ``addresses[i]``, dials every lower-numbered peer and
accepts every higher-numbered one; the first frame on each connection is a
HELLO naming the dialer.  A round completes when all n-1 peers' frames for
that round have arrived (leader-free barrier): everyone sends COMMIT, waits
for the other commits, sends REVEAL, waits for the other reveals and checks
each against its commitment.
"""

from __future__ import annotations

import logging
import secrets
import socket
import threading
import time
from typing import Sequence

from ..errors import CommitmentMismatch, Desync, PeerAborted, Timeout, TransportError
from .base import BitFlip, Equivocate, Honest, Rushing, RoundId, Silent, commitment
from .wire import AbortReason, Frame, FrameType, encode_frame, read_frame

__all__ = ["TcpEndpoint", "DEFAULT_TIMEOUT"]

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 5.0


def parse_address(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"expected host:port, got {text!r}")
    return host, int(port)


class TcpEndpoint:
    def __init__(
        self,
        party: int,
        addresses: Sequence[tuple[str, int]],
        *,
        session_id: int = 0,
        timeout: float = DEFAULT_TIMEOUT,
        policies: Sequence = (),
        listener: socket.socket | None = None,
        salt_source=None,
    ):
        self.party = party
        self.n = len(addresses)
        if not 0 <= party < self.n:
            raise ValueError(f"party {party} outside 0..{self.n - 1}")
        self.addresses = [tuple(a) for a in addresses]
        self.session_id = session_id
        self.timeout = timeout
        mine = [p for p in policies if not isinstance(p, Honest) and p.party == party]
        if any(isinstance(p, Rushing) for p in mine):
            raise ValueError("rushing is not available on the wire: commitments hide earlier bits")
        self.policies = mine
        self._listener = listener
        # salts must be unpredictable on a real network; tests may inject a seeded source
        self._salt = salt_source if salt_source is not None else (lambda: secrets.token_bytes(16))
        self._socks: dict[int, socket.socket] = {}
        self._cond = threading.Condition()
        self._inbox: dict[tuple[int, FrameType], dict[int, Frame]] = {}
        self._aborts: list[Frame] = []
        self._dead: set[int] = set()
        self._threads: list[threading.Thread] = []
        self._closing = False

    # -- connection setup ----------------------------------------------------

    def connect(self, deadline: float = 30.0) -> "TcpEndpoint":
        end = time.monotonic() + deadline
        if self._listener is None:
            self._listener = socket.create_server(self.addresses[self.party], reuse_port=False)
        self._listener.settimeout(0.2)
        for peer in range(self.party):
            self._dial(peer, end)
        while len(self._socks) < self.n - 1:
            if time.monotonic() > end:
                missing = sorted(set(range(self.n)) - set(self._socks) - {self.party})
                raise TransportError(f"party {self.party}: peers {missing} never connected")
            try:
                conn, _ = self._listener.accept()
            except socket.timeout:
                continue
            conn.settimeout(max(1.0, end - time.monotonic()))
            try:
                hello = read_frame(conn)
            except (OSError, ValueError) as exc:
                conn.close()
                log.warning("dropping connection with bad hello: %s", exc)
                continue
            if hello.type is not FrameType.HELLO or hello.session != self.session_id or not (
                self.party < hello.party < self.n
            ) or hello.party in self._socks:
                conn.close()
                continue
            self._adopt(hello.party, conn)
        self._listener.close()
        return self

    def _dial(self, peer: int, end: float) -> None:
        while True:
            try:
                sock = socket.create_connection(self.addresses[peer], timeout=1.0)
                break
            except OSError:
                if time.monotonic() > end:
                    raise TransportError(f"party {self.party}: cannot reach party {peer} at {self.addresses[peer]}")
                time.sleep(0.05)
        sock.sendall(encode_frame(Frame(FrameType.HELLO, self.session_id, 0, self.party)))
        self._adopt(peer, sock)

    def _adopt(self, peer: int, sock: socket.socket) -> None:
        sock.settimeout(None)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._socks[peer] = sock
        t = threading.Thread(target=self._reader, args=(peer, sock), daemon=True, name=f"qanon-rx-{self.party}<-{peer}")
        t.start()
        self._threads.append(t)

    def _reader(self, peer: int, sock: socket.socket) -> None:
        try:
            while True:
                f = read_frame(sock)
                if f.session != self.session_id or f.party != peer:
                    log.warning("party %d: ignoring frame %s from connection of %d", self.party, f, peer)
                    continue
                with self._cond:
                    if f.type is FrameType.ABORT:
                        self._aborts.append(f)
                    else:
                        self._inbox.setdefault((f.round, f.type), {})[peer] = f
                    self._cond.notify_all()
        except (OSError, ValueError, ConnectionError) as exc:
            if not self._closing:
                log.debug("party %d: link to %d closed: %s", self.party, peer, exc)
        finally:
            with self._cond:
                self._dead.add(peer)
                self._cond.notify_all()

    def close(self, linger: float = 2.0) -> None:
        """Half-close, drain until peers hang up too, then release the sockets."""
        self._closing = True
        for s in self._socks.values():
            try:
                s.shutdown(socket.SHUT_WR)
            except OSError:
                pass
        end = time.monotonic() + linger
        for t in self._threads:
            t.join(timeout=max(0.0, end - time.monotonic()))
        for s in self._socks.values():
            s.close()
        if self._listener is not None:
            self._listener.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- rounds ----------------------------------------------------------------

    def _send_all(self, frame: Frame) -> None:
        data = encode_frame(frame)
        for peer, s in self._socks.items():
            try:
                s.sendall(data)
            except OSError:
                with self._cond:
                    self._dead.add(peer)

    def _abort(self, round_id: RoundId, reason: AbortReason) -> None:
        self._send_all(Frame(FrameType.ABORT, self.session_id, round_id.sequence, self.party, bytes([reason])))

    def _collect(self, round_id: RoundId, ftype: FrameType, parties: Sequence[int]) -> dict[int, Frame]:
        key = (round_id.sequence, ftype)
        end = time.monotonic() + self.timeout
        with self._cond:
            while True:
                got = self._inbox.get(key, {})
                missing = [p for p in parties if p not in got]
                if not missing:
                    return {p: got[p] for p in parties}
                # complete data is still checked locally, so blame stays precise
                if self._aborts:
                    f = self._aborts[0]
                    raise PeerAborted(f.party, f.reason, round_id)
                dead = [p for p in missing if p in self._dead]
                if dead:
                    raise Timeout(dead[0], round_id)
                left = end - time.monotonic()
                if left <= 0:
                    raise Timeout(missing[0], round_id)
                self._cond.wait(left)

    def _forget(self, round_id: RoundId) -> None:
        with self._cond:
            for key in [k for k in self._inbox if k[0] <= round_id.sequence]:
                del self._inbox[key]

    def round_exchange(self, round_id: RoundId, my_bit: int | None, schedule: Sequence[int],
                       excluded: int | None = None, phase: str = "") -> tuple[int, ...]:
        """Commit-reveal one round; returns all announced bits in schedule order."""
        me = self.party
        schedule = tuple(schedule)
        if (my_bit is None) != (me not in schedule):
            raise Desync(f"party {me}: bit {my_bit!r} inconsistent with schedule {schedule}")
        active = [p for p in self.policies if p.when(round_id, phase)]
        if any(isinstance(p, Silent) for p in active) and my_bit is not None:
            self._forget(round_id)
            raise Timeout(me, round_id)
        others = [p for p in schedule if p != me]

        if my_bit is not None:
            bit = (my_bit ^ any(isinstance(p, BitFlip) for p in active)) & 1
            salt = self._salt()
            digest = commitment(salt, round_id, me, bit)
            self._send_all(Frame(FrameType.COMMIT, self.session_id, round_id.sequence, me, digest))
        commits = self._collect(round_id, FrameType.COMMIT, others)
        if my_bit is not None:
            shown = bit ^ any(isinstance(p, Equivocate) for p in active)
            self._send_all(Frame(FrameType.REVEAL, self.session_id, round_id.sequence, me, bytes([shown]) + salt))
        reveals = self._collect(round_id, FrameType.REVEAL, others)
        for p in others:
            r = reveals[p]
            if commitment(r.salt, round_id, p, r.bit) != commits[p].payload:
                self._abort(round_id, AbortReason.COMMITMENT_MISMATCH)
                raise CommitmentMismatch(p, round_id)
        self._forget(round_id)
        return tuple(bit if p == me else reveals[p].bit for p in schedule)
