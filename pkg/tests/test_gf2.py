import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from qanon.gf2 import BinPoly, FieldCtx, add, find_irreducible, is_irreducible, mul_mod, poly_gcd, pow_mod

X22 = BinPoly.parse("x^22+x+1")


def field(gamma):
    return FieldCtx.of_degree(gamma)


def elements(ctx):
    return [BinPoly(v) for v in range(ctx.order)]


def test_parse_and_format_roundtrip():
    p = BinPoly.parse("x^22 + x + 1")
    assert p.value == (1 << 22) | 0b11
    assert str(p) == "x^22+x+1"
    assert BinPoly.parse(p.hex()) == p
    assert BinPoly.parse("1") == BinPoly(1)
    assert BinPoly.parse("x") == BinPoly(2)
    with pytest.raises(ValueError):
        BinPoly.parse("x^2+y")


def test_bits_are_msb_first():
    p = BinPoly.parse("x^2+1")
    assert p.bits() == [1, 0, 1]
    assert p.bits(5) == [0, 0, 1, 0, 1]
    assert BinPoly.from_bits([1, 0, 1]) == p
    with pytest.raises(ValueError):
        p.bits(2)


def test_add_examples():
    a = BinPoly.parse("x^3+x")
    assert add(a, a) == BinPoly(0)
    assert add(BinPoly.parse("x+1"), BinPoly.parse("x")) == BinPoly(1)


@given(st.integers(0, 2**40), st.integers(0, 2**40), st.integers(0, 2**40))
def test_add_commutative_associative(a, b, c):
    a, b, c = BinPoly(a), BinPoly(b), BinPoly(c)
    assert add(a, b) == add(b, a)
    assert add(add(a, b), c) == add(a, add(b, c))


@given(st.integers(0, 2**30), st.integers(1, 2**20))
def test_divmod_matches_long_division(a, m):
    q, r = divmod(BinPoly(a), BinPoly(m))
    oq, orem = oracles.long_divmod(oracles.from_int(a), oracles.from_int(m))
    assert q.value == oracles.to_int(oq)
    assert r.value == oracles.to_int(orem)
    assert (q * BinPoly(m) + r).value == a


def test_mul_mod_small_examples():
    ctx = FieldCtx(BinPoly.parse("x^2+x+1"))
    x = BinPoly.parse("x")
    assert mul_mod(x, x, ctx) == BinPoly.parse("x+1")
    rng = random.Random(1)
    big = FieldCtx(X22)
    for _ in range(50):
        a = BinPoly(rng.getrandbits(22))
        assert mul_mod(a, BinPoly(1), big) == a


def test_unreduced_operand_rejected():
    ctx = FieldCtx(BinPoly.parse("x^2+x+1"))
    with pytest.raises(ValueError):
        mul_mod(BinPoly.parse("x^2"), BinPoly(1), ctx)


def test_non_irreducible_modulus_rejected():
    with pytest.raises(ValueError):
        FieldCtx(BinPoly.parse("x^2+1"))


@pytest.mark.parametrize("gamma", [1, 2, 3, 4])
def test_field_axioms_exhaustive(gamma):
    ctx = field(gamma)
    els = elements(ctx)
    one, zero = BinPoly(1), BinPoly(0)
    for a, b, c in itertools.product(els, repeat=3):
        assert mul_mod(mul_mod(a, b, ctx), c, ctx) == mul_mod(a, mul_mod(b, c, ctx), ctx)
        assert mul_mod(a, add(b, c), ctx) == add(mul_mod(a, b, ctx), mul_mod(a, c, ctx))
    for a in els:
        assert mul_mod(a, one, ctx) == a
        if a != zero:
            inverses = [b for b in els if mul_mod(a, b, ctx) == one]
            assert len(inverses) == 1


@pytest.mark.parametrize("gamma", [1, 2, 3, 4])
def test_lagrange_exhaustive(gamma):
    ctx = field(gamma)
    for a in elements(ctx)[1:]:
        assert pow_mod(a, ctx.order - 1, ctx) == BinPoly(1)


def test_pow_examples():
    ctx = FieldCtx(X22)
    rng = random.Random(7)
    for _ in range(100):
        a = BinPoly(rng.getrandbits(22))
        assert pow_mod(a, 0, ctx) == BinPoly(1)
        assert pow_mod(a, 3, ctx) == mul_mod(a, mul_mod(a, a, ctx), ctx)
    with pytest.raises(ValueError):
        pow_mod(BinPoly(3), -1, ctx)


def test_mul_and_pow_match_oracle_at_gamma_22():
    ctx = FieldCtx(X22)
    m = X22.value
    rng = random.Random(22)
    for _ in range(10_000):
        a, b = rng.getrandbits(22), rng.getrandbits(22)
        assert mul_mod(BinPoly(a), BinPoly(b), ctx).value == oracles.mulmod(a, b, m)
    for _ in range(200):
        a, e = rng.getrandbits(22), rng.randrange(0, 60)
        assert pow_mod(BinPoly(a), e, ctx).value == oracles.powmod(a, e, m)


@settings(max_examples=200)
@given(st.integers(0, 2**22 - 1), st.integers(0, 2**22 - 1), st.integers(0, 2**22 - 1))
def test_field_properties_gamma_22(a, b, c):
    ctx = FieldCtx(X22)
    a, b, c = BinPoly(a), BinPoly(b), BinPoly(c)
    assert mul_mod(a, b, ctx) == mul_mod(b, a, ctx)
    assert mul_mod(a, add(b, c), ctx) == add(mul_mod(a, b, ctx), mul_mod(a, c, ctx))


def test_irreducibility_examples():
    assert is_irreducible(BinPoly.parse("x^2+x+1"))
    assert not is_irreducible(BinPoly.parse("x^2+1"))
    assert is_irreducible(X22)


def test_irreducibility_matches_trial_division_up_to_degree_8():
    for v in range(2, 1 << 9):
        assert is_irreducible(BinPoly(v)) == oracles.irreducible_by_trial_division(v), bin(v)


def test_find_irreducible_examples():
    assert find_irreducible(2) == BinPoly.parse("x^2+x+1")
    assert find_irreducible(22) == X22
    p21 = find_irreducible(21)
    assert p21.degree == 21
    assert is_irreducible(p21)
    assert oracles.irreducible_by_trial_division(p21.value)


@pytest.mark.parametrize("gamma", range(1, 12))
def test_find_irreducible_is_smallest(gamma):
    p = find_irreducible(gamma)
    smallest = next(v for v in range(1 << gamma, 1 << (gamma + 1)) if oracles.irreducible_by_trial_division(v))
    assert p.value == smallest


@given(st.integers(1, 2**24), st.integers(1, 2**24))
def test_gcd_divides_both(a, b):
    g = poly_gcd(BinPoly(a), BinPoly(b))
    assert (BinPoly(a) % g).value == 0
    assert (BinPoly(b) % g).value == 0
