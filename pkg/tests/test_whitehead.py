import pytest
from hypothesis import given
from hypothesis import strategies as hst

from conftest import subgroups, word_strategy
from fgsub import stallings as st
from fgsub.stallings import SubgroupSpec
from fgsub.whitehead import (
    check_precise,
    enumerate_whitehead,
    find_conjugator,
    find_reducer,
    free_factor_support,
    is_fine,
    is_free_factor,
    letters_at,
    nontrivial_whitehead,
    reduce_to_rose,
    rose_normalizer,
    whitehead_image,
)
from fgsub.words import Whitehead, Word, parse_word

a, A, b, B = 1, -1, 2, -2


def spec(rank, *texts):
    return SubgroupSpec.parse(rank, texts)


def graph(rank, *texts):
    return st.build_pointed_core(spec(rank, *texts))


def test_enumeration_counts():
    one = enumerate_whitehead(1)
    assert len(one) == 2 and all(phi.is_identity for phi in one)
    assert len(enumerate_whitehead(2)) == 16
    assert len(enumerate_whitehead(3)) == 96
    assert len(nontrivial_whitehead(2)) == 12
    with pytest.raises(ValueError):
        enumerate_whitehead(0)


def test_enumeration_order():
    two = enumerate_whitehead(2)
    assert [phi.multiplier for phi in two[::4]] == [a, A, b, B]
    assert [sorted(phi.subset) for phi in two[:4]] == [[], [b], [B], [B, b]]


@pytest.mark.parametrize("rank", [1, 2, 3])
def test_whitehead_fixes_multiplier(rank):
    for phi in enumerate_whitehead(rank):
        x = Word((phi.multiplier,))
        assert phi.apply(x) == x


def test_letters_at():
    assert letters_at(st.rose(2), 0) == {a, A, b, B}
    g = graph(2, "aa")
    assert all(letters_at(g, v) == {a, A} for v in g.out)
    k = st.pullback_intersection(graph(2, "aa", "bbaabb"), graph(2, "bb", "aabbaa"))
    assert letters_at(k, k.basepoint) == {a, A, b, B}
    with pytest.raises(KeyError):
        letters_at(g, 99)


def test_is_fine_examples():
    rep = is_fine(Whitehead(frozenset({b}), a), graph(2, "aa"))
    assert rep is not None and rep.p == 0 and set(rep.cases.values()) == {"I"}
    rep = is_fine(Whitehead(frozenset({b, B}), a), graph(2, "b"))
    assert rep is not None and rep.p == 0 and set(rep.cases.values()) == {"II"}
    assert is_fine(Whitehead(frozenset({b}), a), graph(2, "ab")) is None


def test_check_precise_examples():
    rec = check_precise(Whitehead(frozenset({b}), a), graph(2, "aa"))
    assert rec.holds and rec.p == 0
    # ({a}, b) meets the loop vertex {a, A} in neither configuration
    assert is_fine(Whitehead(frozenset({a}), b), graph(2, "a")) is None
    rec = check_precise(Whitehead(frozenset({a, A}), b), graph(2, "a"))
    assert rec.holds and rec.p == 0
    with pytest.raises(ValueError):
        check_precise(Whitehead(frozenset({b}), a), graph(2, "ab"))


def test_case_three_drop():
    # <ab>: phi = ({b}, A) sends ab to b; the vertex with letters {A, b} is case III
    g = graph(2, "ab")
    phi = Whitehead(frozenset({b}), A)
    rep = is_fine(phi, g)
    assert rep is not None and rep.p == 1
    rec = check_precise(phi, g)
    assert rec.before.num_edge_pairs - rec.after.num_edge_pairs == 1


def test_free_factor_examples():
    assert is_free_factor(spec(2, "a"))
    assert is_free_factor(spec(2, "ab"))
    assert not is_free_factor(spec(2, "aa"))
    assert is_free_factor(SubgroupSpec(2, ()))
    assert is_free_factor(spec(2, "a", "b"))
    assert find_reducer(graph(2, "aa")) is None


def test_reduce_to_rose_examples():
    red = reduce_to_rose(spec(2, "a"))
    assert red.moves.moves == () and red.letters == (1,)
    red = reduce_to_rose(spec(2, "ab"))
    assert len(red.trace) == 1 and len(red.letters) == 1 and red.is_rose
    red = reduce_to_rose(spec(2, "aa", "bbaabb"))
    assert red.letters == (1, 2) and not red.is_rose


def test_ffg_examples():
    assert list(map(str, free_factor_support(spec(2, "a")))) == ["a"]
    assert list(map(str, free_factor_support(spec(2, "aa")))) == ["a"]
    out = free_factor_support(spec(2, "b", "abA"))
    assert len(out) == 2 and st.graph_rank(st.build_pointed_core(SubgroupSpec(2, tuple(out)))) == 2
    assert st.build_pointed_core(SubgroupSpec(2, tuple(out))).num_vertices == 1
    assert free_factor_support(SubgroupSpec(2, ())) == []


def test_find_conjugator_examples():
    g = graph(2, "aa", "bbaabb")
    assert find_conjugator(g, g) == Word()
    assert find_conjugator(graph(2, "a"), graph(2, "baB")) == Word((b,))
    assert find_conjugator(graph(2, "a"), graph(2, "b")) is None


def test_rose_normalizer_examples():
    psi = rose_normalizer(spec(2, "a"))
    assert psi.apply(Word((a,))) == Word((a,))
    psi = rose_normalizer(spec(2, "ab"))
    assert psi.apply(parse_word("ab", 2)) in (Word((a,)), Word((A,)))
    psi = rose_normalizer(spec(2, "ba", "b"))
    img = st.build_pointed_core(SubgroupSpec(2, tuple(psi.apply(w) for w in parse_words("ba", "b"))))
    assert img.num_vertices == 1 and img.labels() == {1, 2}
    with pytest.raises(ValueError):
        rose_normalizer(spec(2, "aa"))


def parse_words(*texts):
    return [parse_word(t, 2) for t in texts]


@given(subgroups())
def test_ffg_contains_and_idempotent(s):
    basis = free_factor_support(s)
    B_ = SubgroupSpec(s.rank, tuple(basis))
    assert is_free_factor(B_)
    gb = st.build_pointed_core(B_)
    assert all(st.contains(gb, w) for w in s.generators)
    again = st.build_pointed_core(SubgroupSpec(s.rank, tuple(free_factor_support(B_))))
    assert st.same_subgroup(gb, again)


@given(subgroups(), hst.data())
def test_free_factors_preserved(s, data):
    phi = data.draw(hst.sampled_from(enumerate_whitehead(s.rank)))
    img = whitehead_image(phi, st.build_pointed_core(s))
    assert is_free_factor(s) == is_free_factor(img)


@given(subgroups(max_gens=2, max_len=5))
def test_rose_normalizer_hits_standard_rose(s):
    basis = free_factor_support(s)
    psi = rose_normalizer(SubgroupSpec(s.rank, tuple(basis)))
    img = st.build_pointed_core(SubgroupSpec(s.rank, tuple(psi.apply(w) for w in basis)))
    k = len(basis)
    assert st.canonical_key(img, pointed=True) == st.canonical_key(st.rose(s.rank, range(1, k + 1)), pointed=True)


@given(subgroups(n=2, max_gens=3, max_len=6), hst.data())
def test_fine_passes_to_subgroups(s, data):
    g = st.build_pointed_core(s)
    phi = data.draw(hst.sampled_from(nontrivial_whitehead(2)))
    if st.graph_rank(g) == 0 or is_fine(phi, g) is None:
        return
    sub = data.draw(hst.sets(hst.sampled_from(s.generators), min_size=1))
    k = st.build_pointed_core(SubgroupSpec(2, tuple(sub)))
    if st.graph_rank(k):
        assert is_fine(phi, k) is not None
        assert check_precise(phi, k, strict=False).holds


@given(subgroups(n=3, max_gens=3, max_len=6))
def test_precise_on_all_fine_moves(s):
    g = st.build_pointed_core(s)
    for phi in nontrivial_whitehead(3):
        if is_fine(phi, g) is not None:
            assert check_precise(phi, g, strict=False).holds


@given(subgroups(), word_strategy(3, max_size=5))
def test_conjugator_recovery(s, g):
    g = Word(x for x in g if abs(x) <= s.rank)
    h = st.build_pointed_core(s)
    conj = st.build_pointed_core(SubgroupSpec(s.rank, tuple(g * w * ~g for w in s.generators)))
    x = find_conjugator(h, conj)
    if st.graph_rank(h) == 0:
        assert x == Word()
        return
    assert x is not None
    assert len(x) <= len(g) + max(len(w) for w in s.generators)
    assert all(st.contains(conj, x * w * ~x) for w in s.generators)
