"""Command line entry point: ``qanon keygen | run | analyze``.

Exit codes: 0 success (protocol outcome printed), 2 protocol abort,
3 configuration error, 4 transport failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import secrets
import subprocess
import sys
from dataclasses import fields
from pathlib import Path

from . import analysis
from .engine import write_transcript
from .errors import KeysDepleted, ParameterError, ProtocolAbort, Timeout, TransportError
from .keyfabric import generate_fabric
from .runner import RunConfig, RunResult, free_listeners, run_sim, run_tcp_node

EXIT_OK = 0
EXIT_ABORT = 2
EXIT_CONFIG = 3
EXIT_TRANSPORT = 4

def _probability(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {v}")
    return v


def _seed(value) -> int:
    return secrets.randbits(63) if value is None else value


# -- keygen -----------------------------------------------------------------------


def cmd_keygen(args) -> int:
    seed = _seed(args.seed)
    fabric = generate_fabric(args.n, args.bits, args.re, seed)
    out = Path(args.out)
    fabric.save(out)
    print(f"wrote {out}: n={fabric.n} pairs={len(fabric.pairs)} bits/pair={fabric.bits_per_pair} "
          f"r_e={fabric.r_e} seed={seed}")
    for (i, j), p in fabric.pairs.items():
        print(f"  {i}-{j}: {p.length} bits, mismatch {p.mismatch_fraction():.5f}")
    return EXIT_OK


# -- run --------------------------------------------------------------------------

_RUN_FLAGS = {f.name for f in fields(RunConfig)}


def _run_config(args) -> RunConfig:
    data = {}
    if args.config:
        data.update(json.loads(Path(args.config).read_text()))
    for name in _RUN_FLAGS:
        v = getattr(args, name, None)
        if v is not None and v != []:
            data[name] = v
    cfg = RunConfig.from_mapping(data)
    if "seed" not in data:
        cfg.seed = _seed(None)
    cfg.validate()
    return cfg


def _write_outputs(cfg: RunConfig, result: RunResult, parties: list[int]) -> None:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    outcomes = result.outcome_json()
    # every party records the same public announcements; one transcript suffices
    write_transcript(out / "transcript.log", result.transcripts[parties[0]],
                     [(f"party{p}", json.dumps(o)) for p, o in zip(parties, outcomes)],
                     header=f"session {cfg.session} protocol {cfg.protocol} n {cfg.n} beta {cfg.beta}")
    (out / "outcome.json").write_text(json.dumps(
        {"protocol": cfg.protocol, "n": cfg.n, "beta": cfg.beta, "rep": cfg.rep, "seed": cfg.seed,
         "parties": parties, "outcomes": outcomes, "rounds": result.phase_rounds}, indent=2) + "\n")
    analysis.write_csv(out / "budget.csv", [{
        "protocol": cfg.protocol, "n": cfg.n, "beta": cfg.beta,
        "formula_bits": result.formula_bits, "measured_bits": result.ledger_bits,
    }])


def _spawn_local(cfg: RunConfig) -> int:
    """One OS process per party on loopback; returns the worst exit code."""
    if not cfg.fabric:
        raise ParameterError("tcp sessions need a shared --fabric file")
    listeners = free_listeners(cfg.n)
    peers = ",".join(f"127.0.0.1:{s.getsockname()[1]}" for s in listeners)
    for s in listeners:
        s.close()
    out_dir = Path(cfg.out_dir or ".")
    procs = []
    for p in range(cfg.n):
        cmd = [sys.executable, "-m", "qanon", "run", "--transport", "tcp", "--party", str(p),
               "--peers", peers, "--seed", str(cfg.seed), "--out-dir", str(out_dir / f"party-{p}")]
        for name in ("n", "beta", "rep", "protocol", "input", "message_file", "message_bits", "modulus",
                     "fabric", "session", "timeout"):
            v = getattr(cfg, name)
            if v is not None:
                cmd += [f"--{name.replace('_', '-')}", str(v)]
        for a in cfg.adversary:
            cmd += ["--adversary", a]
        procs.append(subprocess.Popen(cmd))
    codes = [p.wait() for p in procs]
    print(json.dumps({"exit_codes": codes}))
    return max(codes)


def _node_budget(cfg: RunConfig) -> tuple[float, int]:
    """Bits one node draws: its n-1 links at the per-link cost."""
    per = analysis.per_pair_bits(cfg.protocol, cfg.n, cfg.beta, cfg.message_length()) * cfg.rep
    return per * (cfg.n - 1), per * (cfg.n - 1)


def cmd_run(args) -> int:
    cfg = _run_config(args)
    if cfg.transport == "sim":
        result = run_sim(cfg)
        parties = list(range(cfg.n))
    elif cfg.party is None:
        return _spawn_local(cfg)
    else:
        value, party = run_tcp_node(cfg, cfg.party)
        result = RunResult(cfg.protocol, [value], {cfg.party: party.transcript},
                           sum(party.ledger().values()), *_node_budget(cfg), dict(party.phase_rounds))
        parties = [cfg.party]
    print(json.dumps({"protocol": cfg.protocol, "parties": parties, "outcomes": result.outcome_json(),
                      "measured_bits": result.ledger_bits, "formula_bits": result.formula_bits,
                      "rounds": result.phase_rounds}))
    if cfg.out_dir:
        _write_outputs(cfg, result, parties)
    return EXIT_OK


# -- analyze ----------------------------------------------------------------------


def cmd_analyze(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    analysis.write_csv(out / "efficiency.csv", analysis.efficiency_rows(args.beta))
    analysis.write_csv(out / "errors.csv", analysis.error_rows())
    if not args.skip_budgets:
        analysis.write_csv(out / "budgets.csv", analysis.budget_rows(args.n, args.beta, args.m, seed=args.seed))
    print(f"wrote CSV tables to {out}")
    return EXIT_OK


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="qanon", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    kg = sub.add_parser("keygen", help="generate a pairwise key fabric file")
    kg.add_argument("-n", "--n", type=int, required=True)
    kg.add_argument("--bits", type=int, required=True, help="bits per pair")
    kg.add_argument("--re", type=_probability, default=0.0, help="per-bit mismatch probability")
    kg.add_argument("--seed", type=int)
    kg.add_argument("-o", "--out", default="fabric.qkdf")
    kg.set_defaults(func=cmd_keygen)

    run = sub.add_parser("run", help="execute one protocol session")
    run.add_argument("--config", help="JSON file whose keys mirror these flags")
    run.add_argument("-n", "--n", type=int)
    run.add_argument("--beta", type=int)
    run.add_argument("--rep", type=int, help="odd repetition count N for key-error hardening")
    run.add_argument("--protocol", choices=analysis.PROTOCOLS)
    run.add_argument("--input", help="bits 0,1,0,... or arrows S>T,... (notify/message)")
    run.add_argument("--message-file", dest="message_file")
    run.add_argument("--message-bits", dest="message_bits", type=int)
    run.add_argument("--modulus", help="AMD field modulus, e.g. x^22+x+1")
    run.add_argument("--fabric")
    run.add_argument("--transport", choices=("sim", "tcp"))
    run.add_argument("--commit-reveal", dest="commit_reveal", action="store_const", const=True)
    run.add_argument("--listen", help="host:port to bind (tcp)")
    run.add_argument("--peers", help="comma-separated host:port of all parties, in party order (tcp)")
    run.add_argument("--party", type=int, help="which party this node is (tcp)")
    run.add_argument("--session", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--timeout", type=float)
    run.add_argument("--adversary", action="append", default=[],
                     help="silent:P[:PHASE], rushing:P, bitflip:P[:PHASE[:K]], equivocate:P[:PHASE[:K]]")
    run.add_argument("--out-dir", dest="out_dir")
    run.set_defaults(func=cmd_run)

    an = sub.add_parser("analyze", help="write efficiency, error and budget CSV tables")
    an.add_argument("--out-dir", dest="out_dir", default="analysis")
    an.add_argument("-n", "--n", type=int, default=8)
    an.add_argument("--beta", type=int, default=16)
    an.add_argument("-m", "--m", type=int, default=1024)
    an.add_argument("--seed", type=int, default=0)
    an.add_argument("--skip-budgets", action="store_true", help="formulas only, no engine runs")
    an.set_defaults(func=cmd_analyze)
    return ap


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    if args.command == "run" and isinstance(args.peers, str):
        args.peers = [p for p in args.peers.split(",") if p]
    try:
        return args.func(args)
    except (ParameterError, ValueError, FileNotFoundError) as exc:
        print(f"qanon: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeysDepleted as exc:
        print(f"qanon: protocol abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except (Timeout, TransportError, OSError) as exc:
        print(f"qanon: transport failure: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except ProtocolAbort as exc:
        print(f"qanon: protocol abort: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
