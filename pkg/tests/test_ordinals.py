import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ifsverify import ordinals as o
from ifsverify.ordinals import CnfOrdinal, parse_cnf
from oracles import ordinal_is_accumulation

MAXE = 6


def coeff_vector(a: CnfOrdinal) -> tuple[int, ...]:
    """Coefficients from w^MAXE down to w^0; lexicographic order is ordinal order."""
    d = dict(a.terms)
    return tuple(d.get(e, 0) for e in range(MAXE, -1, -1))


ordinals = st.lists(st.integers(0, 4), min_size=MAXE + 1, max_size=MAXE + 1).map(
    lambda cs: CnfOrdinal(tuple((MAXE - i, c) for i, c in enumerate(cs) if c))
)


# arithmetic and order


@given(ordinals, ordinals)
def test_order_matches_coefficient_vectors(a, b):
    want = (coeff_vector(a) > coeff_vector(b)) - (coeff_vector(a) < coeff_vector(b))
    assert o.cnf_compare(a, b) == want
    assert o.cnf_compare(o.OMEGA_OMEGA, a) == 1


@given(ordinals, ordinals, ordinals)
def test_addition_associative_and_monotone(a, b, c):
    assert (a + b) + c == a + (b + c)
    assert a + b >= b and a + b >= a
    if b < c:
        assert a + b < a + c


def test_addition_examples():
    one = CnfOrdinal.finite(1)
    assert one + o.OMEGA == o.OMEGA
    assert o.OMEGA + one > o.OMEGA
    assert str(parse_cnf("w*2 + 3") + parse_cnf("w^2")) == "w^2"
    assert str(CnfOrdinal.finite(5) + o.OMEGA_OMEGA) == "w^w"


@given(ordinals)
def test_string_roundtrip(a):
    assert parse_cnf(str(a)) == a


@pytest.mark.parametrize(
    "text, want",
    [("0", "0"), ("w", "w"), ("ω^2*3 + ω + 1", "w^2*3 + w + 1"), ("3 + w", "w"), ("w^w", "w^w"), ("w + w", "w*2")],
)
def test_parse(text, want):
    assert str(parse_cnf(text)) == want


@pytest.mark.parametrize("bad", ["", "w^", "w^w*2", "x", "w^2 +", "-1", "w^w + 1"])
def test_parse_errors(bad):
    with pytest.raises(o.OrdinalError):
        parse_cnf(bad)


def test_constructor_validation():
    with pytest.raises(o.OrdinalError):
        CnfOrdinal(((1, 1), (2, 1)))
    with pytest.raises(o.OrdinalError):
        CnfOrdinal(((1, 0),))
    with pytest.raises(o.OrdinalError):
        o.OMEGA_OMEGA.degree


# Cantor-Bendixson derivatives


def ordinals_up_to(beta: CnfOrdinal, maxe=3, maxc=3):
    for cs in itertools.product(range(maxc + 1), repeat=maxe + 1):
        g = CnfOrdinal(tuple((maxe - i, c) for i, c in enumerate(cs) if c))
        if g <= beta:
            yield g


@pytest.mark.parametrize("beta", ["w", "w*3", "w^2", "w^2*2 + w*5", "w^3", "w^3 + w^2 + 4"])
@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_derivative_is_accumulation_set(beta, k):
    X = o.OrdinalSpace(parse_cnf(beta), k)
    dX = o.cb_derivative(X)

    def member(terms):
        return X.contains(CnfOrdinal(tuple((e, c) for e, c in terms if c)))

    for g in ordinals_up_to(X.beta):
        acc = X.contains(g) and ordinal_is_accumulation(list(g.terms), member)
        assert dX.contains(g) == acc, (beta, k, str(g))


@pytest.mark.parametrize("n", range(0, 10))
def test_power_heights(n):
    beta = CnfOrdinal.power(n) if n else CnfOrdinal.finite(1)
    assert o.height(beta) == CnfOrdinal.finite(n)
    assert o.height_by_iteration(beta) == n


@given(ordinals)
def test_height_by_iteration_agrees(beta):
    assert o.height(beta).natural == o.height_by_iteration(beta)


def test_omega_omega_limit_height():
    assert o.height(o.OMEGA_OMEGA) == o.OMEGA
    assert o.height(o.OMEGA_OMEGA).is_limit
    assert o.classify_topological_fractal(o.OMEGA_OMEGA) == o.OBSTRUCTED
    assert o.classify_topological_fractal(parse_cnf("w^3*2 + 1")) == o.UNOBSTRUCTED
    with pytest.raises(o.OrdinalError):
        o.classify_topological_fractal(o.ZERO)


def test_ordinal_space_emptiness():
    X = o.OrdinalSpace(parse_cnf("w^2 + 3"))
    assert not X.is_empty and not X.is_discrete
    assert o.cb_derivative(o.cb_derivative(X)).contains(parse_cnf("w^2"))
    assert o.cb_derivative(o.cb_derivative(o.cb_derivative(X))).is_empty
    with pytest.raises(o.OrdinalError):
        o.OrdinalSpace(X.beta, -1)


# embeddings


@pytest.mark.parametrize("beta, depth", [("w", 10), ("w*3 + 2", 5), ("w^2", 6), ("w^3*2 + w", 4), ("w^w", 4), ("5", 3)])
def test_embedding_reverses_order(beta, depth):
    pairs = o.embed_ordinals(parse_cnf(beta), depth)
    xs = np.array([x for x, _ in pairs])
    gs = [g for _, g in pairs]
    assert all(a < b for a, b in zip(gs, gs[1:]))
    assert np.all(np.diff(xs) < 0)
    assert xs.min() >= 0.0 and xs.max() <= 1.0
    assert gs[-1] == parse_cnf(beta)
    # sort oracle: ordering by coordinate descending reproduces ordinal order
    by_x = [g for _, g in sorted(pairs, key=lambda p: -p[0])]
    assert by_x == sorted(gs)


def test_limits_are_approached():
    pairs = o.embed_ordinals(o.OMEGA, 12)
    xs = [x for x, _ in pairs]
    assert xs[-1] == 0.0
    assert xs[-2] == pytest.approx(1 / 12)


def test_omega_omega_blocks():
    blocks = o.omega_omega_blocks(6)
    for b in blocks:
        assert 1 / (b.index + 1) < b.lo < b.hi < 1 / b.index
        assert b.height == b.index
    pairs = o.embed_ordinals(o.OMEGA_OMEGA, 4)
    for b in blocks[:4]:
        inside = [g for x, g in pairs if b.lo <= x <= b.hi]
        assert max(inside) == CnfOrdinal.power(b.index)
        assert o.height(max(inside)).natural == b.height


def test_embedding_limits():
    with pytest.raises(o.OrdinalError):
        o.embed_ordinals(o.OMEGA, 0)
    with pytest.raises(o.OrdinalError):
        o.embed_ordinals(CnfOrdinal.power(9), 10)
    assert o.embed_ordinals(o.ZERO, 3) == [(0.0, o.ZERO)]


def test_point_cloud_labels():
    c = o.embed_in_unit_interval(parse_cnf("w + 1"), 5)
    assert c.labels[-1] == "w + 1"
    assert np.all(c.points[:, 1] == 0.0)
    assert len(c) == 7


def test_blocks_disjoint_with_wide_gaps():
    blocks = sorted(o.omega_omega_blocks(12), key=lambda b: b.lo)
    for a, b in zip(blocks, blocks[1:]):
        smaller = min(a.hi - a.lo, b.hi - b.lo)
        assert b.lo - a.hi >= smaller / 2
    # every embedded point other than w^w lies in its block
    pairs = o.embed_ordinals(o.OMEGA_OMEGA, 4)
    assert sum(any(b.lo <= x <= b.hi for b in blocks) for x, _ in pairs) == len(pairs) - 1
