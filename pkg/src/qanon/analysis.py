"""Closed-form failure probabilities and key budgets, plus engine-driven
Monte Carlo estimators to check them against."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .amd import derive_params
from .engine import Participant, Sender, Session
from .errors import ParameterError
from .keyfabric import generate_fabric

__all__ = [
    "PROTOCOLS",
    "collision_prob",
    "parity_error_rate",
    "repetition_residual",
    "veto_success_with_correction",
    "key_budget",
    "exact_key_budget",
    "per_pair_bits",
    "encoding_efficiency",
    "throughput_estimate",
    "BudgetReport",
    "measure_budget",
    "MonteCarlo",
    "mc_collision_prob",
    "mc_parity_error_rate",
    "mc_repetition_residual",
    "efficiency_rows",
    "error_rows",
    "budget_rows",
    "write_csv",
]

PROTOCOLS = ("broadcast", "veto", "notify", "collision", "message")
_ALIASES = {"notification": "notify", "collision-detection": "collision", "parity": "broadcast"}


def _protocol(name: str) -> str:
    name = _ALIASES.get(name, name)
    if name not in PROTOCOLS:
        raise ParameterError(f"unknown protocol {name!r}; expected one of {PROTOCOLS}")
    return name


def _prob(x: float, what: str) -> None:
    if not 0.0 <= x <= 1.0:
        raise ParameterError(f"{what} must lie in [0, 1], got {x}")


def collision_prob(p: float, n: int) -> float:
    """Chance an odd number of the other n-1 users also send a 1."""
    _prob(p, "p")
    return 0.5 - 0.5 * (1.0 - 2.0 * p) ** (n - 1)


def parity_error_rate(r_e: float, n: int) -> float:
    """Chance an odd number of the n(n-1)/2 links carry a mismatched key bit."""
    _prob(r_e, "r_e")
    return 0.5 * (1.0 - (1.0 - 2.0 * r_e) ** (n * (n - 1) // 2))


def repetition_residual(E: float, N: int) -> float:
    """Error left after a majority vote over N repetitions with per-run error E."""
    _prob(E, "E")
    if N < 1 or N % 2 == 0:
        raise ParameterError(f"N must be odd and >= 1, got {N}")
    t = (N - 1) // 2
    return math.fsum(math.comb(N, i) * E**i * (1.0 - E) ** (N - i) for i in range(t + 1, N + 1))


def veto_success_with_correction(E_prime: float, n: int, beta: int) -> float:
    """All-zero veto survives all n*beta hardened rounds."""
    return (1.0 - E_prime) ** (n * beta)


def key_budget(protocol: str, n: int, beta: int = 16, m: int | None = None) -> float:
    """Closed-form secret-bit cost of one execution, summed over all links.

    For message transmission this is the coarse bound
    m + 2(log2 m + beta) + 2 beta n^2 (n-1), which may be non-integer; see
    :func:`exact_key_budget` for what the engine actually draws.
    """
    protocol = _protocol(protocol)
    if protocol == "broadcast":
        return n * (n - 1) // 2
    if protocol in ("veto", "notify"):
        return beta * n * n * (n - 1) // 2
    if protocol == "collision":
        return beta * n * n * (n - 1)
    if m is None:
        raise ParameterError("message transmission budget needs the message length m")
    value = m + 2 * (math.log2(m) + beta) + 2 * beta * n * n * (n - 1)
    return int(value) if float(value).is_integer() else value


def exact_key_budget(protocol: str, n: int, beta: int = 16, m: int | None = None) -> int:
    """Network-wide key bits an honest full-length run draws (summed over links).

    Equals :func:`key_budget` except for message transmission, where each of the
    m + 2*gamma broadcast rounds costs n(n-1)/2 bits.
    """
    protocol = _protocol(protocol)
    if protocol != "message":
        return int(key_budget(protocol, n, beta))
    if m is None:
        raise ParameterError("message transmission budget needs the message length m")
    links = n * (n - 1) // 2
    return derive_params(m, beta).encoded_length * links + 2 * beta * n * n * (n - 1)


def per_pair_bits(protocol: str, n: int, beta: int = 16, m: int | None = None) -> int:
    return exact_key_budget(protocol, n, beta, m) // (n * (n - 1) // 2)


def encoding_efficiency(m: int, beta: int = 16) -> float:
    return derive_params(m, beta).efficiency


def throughput_estimate(rates: Mapping[tuple[int, int], float], protocol: str, n: int,
                        beta: int = 16, m: int | None = None) -> float:
    """Executions per second; the slowest link sets the pace."""
    links = [(i, j) for i in range(n) for j in range(i + 1, n)]
    norm = {(min(k), max(k)): v for k, v in rates.items()}
    missing = [k for k in links if k not in norm]
    if missing:
        raise ParameterError(f"no key rate for links {missing}")
    return min(norm[k] for k in links) / per_pair_bits(protocol, n, beta, m)


# -- measured budgets -------------------------------------------------------------


@dataclass(frozen=True)
class BudgetReport:
    protocol: str
    n: int
    beta: int
    m: int | None
    formula_bits: float
    measured_bits: int

    @property
    def match(self) -> bool:
        return self.formula_bits == self.measured_bits


def measure_budget(protocol: str, n: int, beta: int = 16, m: int | None = None, seed: int = 0,
                   exact: bool = False) -> BudgetReport:
    """Run the honest full-length variant through the engine and read the ledger.

    Broadcast, veto, notification and collision detection use all-zero inputs
    (no early termination).  Message transmission uses a single sender.
    """
    protocol = _protocol(protocol)
    need = per_pair_bits(protocol, n, beta, m)
    fabric = generate_fabric(n, need, 0.0, seed)
    session = Session(fabric, beta=beta, seed=seed, message_bits=m)
    zeros = [0] * n
    if protocol == "broadcast":
        session.broadcast(zeros)
    elif protocol == "veto":
        session.veto(zeros)
    elif protocol == "notify":
        session.notification([zeros] * n)
    elif protocol == "collision":
        session.collision_detection(zeros)
    else:
        msg = np.random.default_rng(seed).integers(0, 2, m, dtype=np.uint8)
        roles = [Participant()] * n
        roles[0] = Sender(msg, receiver=n - 1)
        session.message_transmission(roles)
    formula = exact_key_budget(protocol, n, beta, m) if exact else key_budget(protocol, n, beta, m)
    return BudgetReport(protocol, n, beta, m, formula, session.consumed)


# -- Monte Carlo ------------------------------------------------------------------


@dataclass(frozen=True)
class MonteCarlo:
    hits: int
    trials: int

    @property
    def rate(self) -> float:
        return self.hits / self.trials

    def sigma(self, p: float | None = None) -> float:
        """Binomial standard error at ``p`` (defaults to the observed rate)."""
        p = self.rate if p is None else p
        return math.sqrt(p * (1.0 - p) / self.trials)

    def within(self, expected: float, k: float = 3.0) -> bool:
        return abs(self.rate - expected) <= k * self.sigma(expected)


def mc_collision_prob(p: float, n: int, trials: int, seed: int = 0) -> MonteCarlo:
    """Party 0 sends a 1; every other party also sends a 1 with probability p.

    Counts rounds whose announced parity is wrong (0).
    """
    _prob(p, "p")
    fabric = generate_fabric(n, trials, 0.0, seed)
    session = Session(fabric, beta=1, seed=seed)
    coins = np.random.default_rng(seed).random((trials, n - 1)) < p
    wrong = 0
    for row in coins:
        inputs = [1, *row.astype(int).tolist()]
        wrong += session.broadcast(inputs)[0].parity != 1
    return MonteCarlo(wrong, trials)


def mc_parity_error_rate(r_e: float, n: int, rounds: int, seed: int = 0) -> MonteCarlo:
    """All-zero broadcast rounds over a fabric with mismatch rate r_e."""
    fabric = generate_fabric(n, rounds, r_e, seed)
    session = Session(fabric, beta=1, seed=seed)
    zeros = [0] * n
    errors = 0
    for _ in range(rounds):
        errors += session.broadcast(zeros)[0].parity
    return MonteCarlo(errors, rounds)


def mc_repetition_residual(r_e: float, n: int, N: int, trials: int, seed: int = 0) -> MonteCarlo:
    """Majority-voted all-zero rounds (N repetitions each) that still come out 1."""
    fabric = generate_fabric(n, trials * N, r_e, seed)
    session = Session(fabric, beta=1, repetition=N, seed=seed)
    zeros = [0] * n
    errors = 0
    for _ in range(trials):
        errors += session.broadcast(zeros)[0].parity
    return MonteCarlo(errors, trials)


# -- CSV tables -------------------------------------------------------------------


def efficiency_rows(beta: int = 16, ms: Iterable[int] | None = None) -> list[dict]:
    if ms is None:
        ms = sorted({2**k for k in range(6, 17)} | {512, 1024})
    rows = []
    for m in ms:
        params = derive_params(m, beta)
        rows.append({"m": m, "beta": beta, "gamma": params.gamma, "efficiency": params.efficiency})
    return rows


def error_rows(res: Sequence[float] = (1e-5, 1e-4, 1e-3, 1e-2), ns: Sequence[int] = (3, 4, 5, 6, 7, 8),
               N: int = 5) -> list[dict]:
    rows = []
    for r_e in res:
        for n in ns:
            E = parity_error_rate(r_e, n)
            rows.append({"re": r_e, "n": n, "E_parity": E, f"E_prime_N{N}": repetition_residual(E, N)})
    return rows


def budget_rows(n: int = 8, beta: int = 16, m: int = 1024, seed: int = 0) -> list[dict]:
    reports = [measure_budget(p, n, beta, seed=seed) for p in ("broadcast", "veto", "notify", "collision")]
    reports.append(measure_budget("message", n, beta, m, seed=seed))
    rows = [
        {"protocol": r.protocol, "n": r.n, "beta": r.beta, "formula_bits": r.formula_bits,
         "measured_bits": r.measured_bits}
        for r in reports
    ]
    rows.append({"protocol": "message-exact", "n": n, "beta": beta,
                 "formula_bits": exact_key_budget("message", n, beta, m),
                 "measured_bits": reports[-1].measured_bits})
    return rows


def write_csv(path: str | Path, rows: Sequence[dict]) -> None:
    if not rows:
        raise ValueError("nothing to write")
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
