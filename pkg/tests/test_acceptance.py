"""Acceptance gate: one test per criterion, each reported as a PASS/FAIL line
in the "acceptance criteria" section of the pytest terminal summary."""

import itertools
import math

import numpy as np

import oracles
from qanon import amd, analysis
from qanon.bits import int_to_bits
from qanon.engine import MessageStatus, Session
from qanon.gf2 import BinPoly
from qanon.keyfabric import KeyFabric, generate_fabric
from qanon.runner import RunConfig, party_inputs, run_sim, run_tcp_local
from qanon.transport import Rushing, SimNetwork


def test_01_amd_worked_example(criterion):
    with criterion(1, "AMD parameters for m=1024, beta=16 and modulus x^22+x+1", 1.0) as note:
        p = amd.derive_params(1024, 16)
        assert (p.d, p.gamma) == (49, 22)
        s = Session(generate_fabric(3, 8), beta=16, message_bits=1024, modulus="x^22+x+1")
        ctx = s.parties[0].amd_params.ctx
        assert ctx.modulus == BinPoly.parse("x^22+x+1")
        note(f"d={p.d} gamma={p.gamma} modulus={ctx.modulus}")


def test_02_encoding_sizes(criterion):
    with criterion(2, "encoded lengths 554 (m=512) and 1068 (m=1024)", 1.0) as note:
        rng = np.random.default_rng(0)
        sizes = {}
        for m in (512, 1024):
            p = amd.derive_params(m, 16)
            enc = amd.encode(rng.integers(0, 2, m, dtype=np.uint8), p, rng.integers(0, 2, p.gamma, dtype=np.uint8))
            sizes[m] = enc.bits.size
        assert sizes == {512: 554, 1024: 1068}
        note(f"{sizes}")


def test_03_key_budgets(criterion):
    with criterion(3, "ledger equals budget formulas, n=3..8, beta in {2,16}", 10.0) as note:
        checked = 0
        for n in range(3, 9):
            for beta in (2, 16):
                expected = {
                    "broadcast": n * (n - 1) // 2,
                    "veto": beta * n * n * (n - 1) // 2,
                    "notify": beta * n * n * (n - 1) // 2,
                    "collision": beta * n * n * (n - 1),
                }
                for protocol, bits in expected.items():
                    rep = analysis.measure_budget(protocol, n, beta, seed=n * beta)
                    assert rep.measured_bits == bits == rep.formula_bits, rep
                    checked += 1
        assert analysis.measure_budget("broadcast", 8).measured_bits == 28
        note(f"{checked} (protocol, n, beta) cases exact")


def test_04_parity_correctness(criterion):
    with criterion(4, "parity equals XOR of inputs, n<=6, all inputs, 100 seeds", 30.0) as note:
        rounds = 0
        for n in range(3, 7):
            vectors = list(itertools.product((0, 1), repeat=n))
            for seed in range(100):
                s = Session(generate_fabric(n, len(vectors), 0.0, seed), seed=seed)
                for v in vectors:
                    res = s.broadcast(list(v))
                    assert all(r.parity == sum(v) % 2 for r in res), (n, seed, v)
                    rounds += 1
                assert s.agreement()
        note(f"{rounds} rounds")


def _coalition_view(n, sender, coalition, assignment):
    pairs = list(itertools.combinations(range(n), 2))
    keys = dict(zip(pairs, assignment))
    fabric = KeyFabric.from_pair_bits(n, {k: [b] for k, b in keys.items()})
    inputs = [int(p == sender) for p in range(n)]
    res = Session(fabric).broadcast(inputs)
    announcements = tuple(r.announcements[0] for r in res)
    own_keys = tuple(keys[k] for k in pairs if k[0] in coalition or k[1] in coalition)
    return announcements, own_keys


def test_05_anonymity_enumeration(criterion):
    with criterion(5, "coalition view independent of honest sender, n=4, |C|<=2, all 2^6 keys", 10.0) as note:
        n = 4
        assignments = list(itertools.product((0, 1), repeat=6))
        coalitions = [c for size in range(3) for c in itertools.combinations(range(n), size)]
        for coalition in coalitions:
            honest = [p for p in range(n) if p not in coalition]
            dists = []
            for sender in honest:
                views = [_coalition_view(n, sender, set(coalition), a) for a in assignments]
                counts: dict = {}
                for v in views:
                    counts[v] = counts.get(v, 0) + 1
                dists.append(counts)
            assert all(d == dists[0] for d in dists[1:]), coalition
        note(f"{len(coalitions)} coalitions x {len(assignments)} key assignments")


def test_06_veto_guarantees(criterion):
    with criterion(6, "veto failure exactly 1/64 at n=3 beta=2; rushing forced-0 <= 2^-8 + 3 sigma", 60.0) as note:
        n, beta = 3, 2
        failures = 0
        scripts = list(itertools.product((0, 1), repeat=n * beta))
        for script in scripts:
            rngs = [oracles.ScriptedRng(script), oracles.ScriptedRng([]), oracles.ScriptedRng([])]
            s = Session(generate_fabric(n, 64, seed=1), beta=beta, rngs=rngs)
            out = s.veto([1, 0, 0])
            assert len(set(out)) == 1
            failures += out[0] == 0
        assert failures / len(scripts) == 2.0 ** -(n * beta)

        n, beta, trials = 4, 8, 10_000
        forced = 0
        for t in range(trials):
            net = SimNetwork(n, [Rushing(3)])
            s = Session(generate_fabric(n, n * beta, seed=t), beta=beta, seed=t, network=net)
            xs = [0] * n
            xs[t % 3] = 1
            forced += s.veto(xs)[0] == 0
        bound = 2.0**-beta
        limit = bound + 3 * math.sqrt(bound * (1 - bound) / trials)
        assert forced / trials <= limit
        note(f"enumerated {failures}/{len(scripts)}; rushing {forced}/{trials} <= {limit:.5f}")


def test_07_collision_probability(criterion):
    with criterion(7, "collision_prob vs subset enumeration (n<=10) and engine Monte Carlo", 60.0) as note:
        worst = 0.0
        for n in range(2, 11):
            for p in np.linspace(0, 1, 41):
                worst = max(worst, abs(analysis.collision_prob(float(p), n) - oracles.collision_by_subsets(float(p), n)))
        assert worst <= 1e-12
        mc = analysis.mc_collision_prob(0.1, 8, 100_000, seed=7)
        expected = analysis.collision_prob(0.1, 8)
        assert mc.within(expected, 3)
        note(f"max abs diff {worst:.1e}; MC {mc.rate:.5f} vs {expected:.5f} (sigma {mc.sigma(expected):.5f})")


def test_08_error_model(criterion):
    with criterion(8, "parity error rate, Monte Carlo at r_e=1e-2, repetition residual", 120.0) as note:
        E4 = analysis.parity_error_rate(1e-4, 8)
        assert 2.7e-3 <= E4 <= 2.9e-3
        mc = analysis.mc_parity_error_rate(1e-2, 8, 100_000, seed=8)
        expected = analysis.parity_error_rate(1e-2, 8)
        assert mc.within(expected, 3)
        Ep = analysis.repetition_residual(E4, 5)
        assert abs(Ep - 2e-7) <= 0.2 * 2e-7
        success = (1 - Ep) ** 128
        assert abs(success - 0.99997) <= 1e-4
        note(f"E={E4:.3e}; MC {mc.rate:.5f} vs {expected:.5f}; E'={Ep:.3e}; (1-E')^128={success:.6f}")


def test_09_amd_tamper_detection(criterion):
    with criterion(9, "AMD undetected fraction <= 2^-1 at (2,1), <= 2^-8 + 3 sigma at (64,8)", 60.0) as note:
        p = amd.derive_params(2, 1)
        L = p.encoded_length
        codewords = [
            amd.encode(np.array(mu), p, np.array(th)).bits
            for mu in itertools.product((0, 1), repeat=2)
            for th in itertools.product((0, 1), repeat=p.gamma)
        ]
        worst = 0.0
        for e in range(1, 1 << L):
            off = int_to_bits(e, L)
            passed = sum(amd.decode(c ^ off, p) is not amd.TamperDetected for c in codewords)
            worst = max(worst, passed / len(codewords))
        assert worst <= 0.5

        p = amd.derive_params(64, 8)
        L = p.encoded_length
        rng = np.random.default_rng(9)
        trials = 100_000
        undetected = 0
        for _ in range(trials):
            msg = rng.integers(0, 2, 64, dtype=np.uint8)
            cw = amd.encode(msg, p, rng.integers(0, 2, p.gamma, dtype=np.uint8)).bits
            off = rng.integers(0, 2, L, dtype=np.uint8)
            while not off.any():
                off = rng.integers(0, 2, L, dtype=np.uint8)
            undetected += amd.decode(cw ^ off, p) is not amd.TamperDetected
        bound = 2.0**-8
        limit = bound + 3 * math.sqrt(bound * (1 - bound) / trials)
        assert undetected / trials <= limit
        note(f"worst toy offset {worst:.3f}; {undetected}/{trials} undetected at (64,8)")


def test_10_end_to_end_tcp(criterion):
    with criterion(10, "8 parties over loopback TCP deliver 1024 bits; transcript equals simulator", 120.0) as note:
        cfg = dict(n=8, beta=16, protocol="message", input="2>6", message_bits=1024, seed=2024, session=1)
        sim = run_sim(RunConfig(**cfg))
        tcp = run_tcp_local(RunConfig(**cfg))
        assert all(o.status is MessageStatus.DELIVERED for o in tcp.outcomes)
        assert np.array_equal(tcp.outcomes[6].message, sim.outcomes[6].message)
        sent = party_inputs(RunConfig(**cfg))[2].message
        assert np.array_equal(tcp.outcomes[6].message, sent)
        for p in range(8):
            assert tcp.transcripts[p] == sim.transcripts[0]
        assert tcp.ledger_bits == sim.ledger_bits == tcp.exact_bits
        note(f"{len(sim.transcripts[0])} announcements identical; {tcp.ledger_bits} key bits")
