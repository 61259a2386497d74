"""Exception types shared across the package."""

from __future__ import annotations


class QanonError(Exception):
    pass


class ParameterError(QanonError, ValueError):
    """Invalid configuration or argument."""


class KeysDepleted(QanonError):
    def __init__(self, pair, party, wanted, left):
        super().__init__(f"key store {pair} exhausted for party {party}: wanted {wanted}, {left} left")
        self.pair = pair
        self.party = party
        self.wanted = wanted
        self.left = left


class ProtocolAbort(QanonError):
    """The session cannot continue; consumed key bits are discarded."""


class Timeout(ProtocolAbort):
    """A party did not announce in time (it 'refuses to broadcast')."""

    def __init__(self, party: int, round_id=None):
        super().__init__(f"party {party} did not announce in round {round_id}")
        self.party = party
        self.round_id = round_id


class CommitmentMismatch(ProtocolAbort):
    def __init__(self, party: int, round_id=None):
        super().__init__(f"party {party} revealed a bit that does not match its commitment in round {round_id}")
        self.party = party
        self.round_id = round_id


class PeerAborted(ProtocolAbort):
    def __init__(self, party: int, reason: int, round_id=None):
        super().__init__(f"party {party} aborted the session (reason {reason}) in round {round_id}")
        self.party = party
        self.reason = reason
        self.round_id = round_id


class TransportError(QanonError):
    """Connection setup or wire-level failure."""


class Desync(QanonError):
    """Parties disagree on the round structure; indicates a bug or misconfiguration."""
