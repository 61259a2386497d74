"""Round-synchronized broadcast: an in-process simulator and a TCP mesh."""

from .base import (
    Announce,
    BitFlip,
    Equivocate,
    Honest,
    Rushing,
    RoundId,
    Silent,
    always,
    commitment,
    force_parity_zero,
    in_phase,
    nth_in_phase,
)
from .sim import SimEndpoint, SimNetwork
from .tcp import TcpEndpoint

__all__ = [
    "Announce",
    "BitFlip",
    "Equivocate",
    "Honest",
    "Rushing",
    "RoundId",
    "Silent",
    "SimEndpoint",
    "SimNetwork",
    "TcpEndpoint",
    "always",
    "commitment",
    "force_parity_zero",
    "in_phase",
    "nth_in_phase",
]
