import pytest
from hypothesis import given
from hypothesis import strategies as hst

from conftest import letters_of, word_strategy
from fgsub.words import (
    Automorphism,
    Inner,
    LetterInversion,
    Permutation,
    Whitehead,
    Word,
    apply_automorphism,
    invert_automorphism,
    letters,
    parse_word,
    reduce,
)

a, A, b, B, c = 1, -1, 2, -2, 3


def test_parse_cancels():
    assert parse_word("aA", 2) == Word()
    assert parse_word("abBa", 2) == Word((a, a))
    assert parse_word(" a b ", 2) == Word((a, b))


def test_parse_paper_word():
    w = parse_word("ccaabbaabbcc", 3)
    assert len(w) == 12 and str(w) == "ccaabbaabbcc"


@pytest.mark.parametrize("text,rank", [("ax", 2), ("c", 2), ("a1", 2), ("a", 0)])
def test_parse_errors(text, rank):
    with pytest.raises(ValueError):
        parse_word(text, rank)


def test_reduce_examples():
    assert reduce([a, A]) == Word()
    assert reduce([b, A, a, b]) == Word((b, b))


def test_letters_order():
    assert letters(2) == [1, -1, 2, -2]


def test_word_ops():
    w = parse_word("abA", 2)
    assert str(~w) == "aBA"
    assert w * ~w == Word()
    assert str(w**3) == "abbbA"
    assert str(w**-1) == "aBA"
    assert parse_word("abA", 2).cyclic_reduction() == Word((b,))
    assert repr(Word((a,))) == "Word('a')"


@given(word_strategy(3, max_size=12))
def test_reduce_idempotent(w):
    assert Word(w) == w
    assert all(w[i] != -w[i + 1] for i in range(len(w) - 1))


@given(hst.lists(hst.sampled_from(letters_of(3)), max_size=12), hst.lists(hst.sampled_from(letters_of(3)), max_size=12))
def test_product_respects_concatenation(u, v):
    assert Word(u) * Word(v) == Word(u + v)
    assert len(Word(u) * Word(v)) <= len(u) + len(v)


@given(word_strategy(3), word_strategy(3), word_strategy(3))
def test_associative(u, v, w):
    assert (u * v) * w == u * (v * w)


def test_whitehead_definition():
    phi = Whitehead(frozenset({b}), a)
    assert str(apply_automorphism(Automorphism(2, (phi,)), Word((a,)))) == "a"
    assert str(phi.apply(Word((b,)))) == "ab"
    assert str(phi.apply(Word((B,)))) == "BA"
    both = Whitehead(frozenset({b, B}), a)
    assert str(both.apply(Word((b,)))) == "abA"


def test_whitehead_validation():
    with pytest.raises(ValueError):
        Whitehead(frozenset({a}), a)
    with pytest.raises(ValueError):
        Whitehead(frozenset({A}), a)
    assert Whitehead(frozenset(), a).is_identity


def test_inverse_examples():
    assert invert_automorphism(Automorphism(2)).moves == ()
    g = parse_word("ab", 2)
    assert Inner(g).inverse() == Inner(~g)
    phi = Whitehead(frozenset({b}), a)
    assert phi.inverse() == Whitehead(frozenset({b}), A)
    aut = Automorphism(2, (phi, phi.inverse()))
    for x in (a, b):
        assert aut.apply(Word((x,))) == Word((x,))


def test_permutation_and_inversion():
    p = Permutation((2, 3, 1))
    assert str(p.apply(parse_word("abC", 3))) == "bcA"
    assert p.inverse().apply(p.apply(parse_word("abC", 3))) == parse_word("abC", 3)
    assert Permutation((2, 1)).apply(Word((c,))) == Word((c,))
    with pytest.raises(ValueError):
        Permutation((1, 1))
    assert str(LetterInversion(1).apply(parse_word("ab", 2))) == "Ab"


def test_rank_checked():
    with pytest.raises(ValueError):
        Automorphism(2).apply(Word((c,)))
    with pytest.raises(ValueError):
        Automorphism(2).then(Automorphism(3))


@hst.composite
def elementary(draw, n=3):
    kind = draw(hst.integers(0, 3))
    if kind == 0:
        m = draw(hst.sampled_from(letters_of(n)))
        rest = [x for x in letters_of(n) if abs(x) != abs(m)]
        return Whitehead(frozenset(draw(hst.sets(hst.sampled_from(rest)))), m)
    if kind == 1:
        return Permutation(tuple(draw(hst.permutations(range(1, n + 1)))))
    if kind == 2:
        return LetterInversion(draw(hst.integers(1, n)))
    return Inner(draw(word_strategy(n, max_size=4)))


automorphisms = hst.lists(elementary(), max_size=5).map(lambda ms: Automorphism(3, tuple(ms)))


@given(automorphisms)
def test_inverse_undoes(aut):
    inv = aut.inverse()
    for x in letters_of(3):
        assert inv.apply(aut.apply(Word((x,)))) == Word((x,))
        assert aut.apply(inv.apply(Word((x,)))) == Word((x,))


@given(automorphisms, word_strategy(3), word_strategy(3))
def test_homomorphism(aut, u, v):
    assert aut(u * v) == aut(u) * aut(v)
    assert aut(~u) == ~aut(u)


@given(elementary())
def test_whitehead_fixes_multiplier(m):
    if isinstance(m, Whitehead):
        assert m.apply(Word((m.multiplier,))) == Word((m.multiplier,))


def test_then_order():
    p = Permutation((2, 1))
    phi = Whitehead(frozenset({b}), a)
    # first phi, then p
    aut = Automorphism(2).then(phi).then(p)
    assert str(aut.apply(Word((b,)))) == "ba"
    assert str(aut) == "({b}, a) ; perm(ba)"
