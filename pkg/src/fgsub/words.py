"""Reduced words in a free group and automorphisms built from elementary moves.

A letter is a nonzero integer: ``i`` stands for the generator ``a_i`` and
``-i`` for its inverse.  Words are always kept freely reduced.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

_GENERATORS = string.ascii_lowercase
_INVERSES = string.ascii_uppercase


def letters(rank: int) -> list[int]:
    """All signed letters of the alphabet, in the order a, A, b, B, ..."""
    out = []
    for i in range(1, rank + 1):
        out.extend((i, -i))
    return out


def letter_key(x: int) -> tuple[int, bool]:
    """Sort key ordering letters by (index, sign), positive first."""
    return (abs(x), x < 0)


def letter_str(x: int) -> str:
    if x > 0:
        return _GENERATORS[x - 1]
    return _INVERSES[-x - 1]


def reduce(seq: Iterable[int]) -> "Word":
    """Freely reduce a sequence of letters."""
    return Word(seq)


class Word(tuple):
    """A freely reduced word, stored as a tuple of signed letters.

    Construction always reduces, so ``Word([1, -1, 2])`` is ``Word([2])``.
    Multiplication concatenates and reduces; ``~w`` is the inverse.
    """

    __slots__ = ()

    def __new__(cls, seq: Iterable[int] = ()):
        stack: list[int] = []
        for x in seq:
            if x == 0:
                raise ValueError("0 is not a letter")
            if stack and stack[-1] == -x:
                stack.pop()
            else:
                stack.append(x)
        return super().__new__(cls, stack)

    def __mul__(self, other: Sequence[int]) -> "Word":
        # cancel across the seam only
        i = 0
        n, m = len(self), len(other)
        while i < n and i < m and self[n - 1 - i] == -other[i]:
            i += 1
        return tuple.__new__(Word, tuple(self[: n - i]) + tuple(other[i:]))

    def __invert__(self) -> "Word":
        return tuple.__new__(Word, tuple(-x for x in reversed(self)))

    def inverse(self) -> "Word":
        return ~self

    def __pow__(self, k: int) -> "Word":
        if k < 0:
            return (~self) ** -k
        out = Word()
        for _ in range(k):
            out = out * self
        return out

    def __str__(self) -> str:
        return "".join(letter_str(x) for x in self)

    def __repr__(self) -> str:
        return f"Word({str(self)!r})"

    @property
    def max_index(self) -> int:
        return max((abs(x) for x in self), default=0)

    def cyclic_reduction(self) -> "Word":
        i, j = 0, len(self) - 1
        while i < j and self[i] == -self[j]:
            i += 1
            j -= 1
        return tuple.__new__(Word, tuple(self[i : j + 1]))


def parse_word(text: str, rank: int) -> Word:
    """Parse ASCII word syntax: ``a..z`` generators, ``A..Z`` inverses.

    Whitespace is ignored and the empty string is the identity.

    >>> str(parse_word("abBa", 2))
    'aa'
    """
    if rank < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")
    seq = []
    for ch in text:
        if ch.isspace():
            continue
        if ch in _GENERATORS:
            x = _GENERATORS.index(ch) + 1
        elif ch in _INVERSES:
            x = -(_INVERSES.index(ch) + 1)
        else:
            raise ValueError(f"unknown symbol {ch!r} in word {text!r}")
        if abs(x) > rank:
            raise ValueError(f"letter {ch!r} exceeds rank {rank}")
        seq.append(x)
    return Word(seq)


def _check_rank(w: Sequence[int], rank: int) -> None:
    for x in w:
        if abs(x) > rank:
            raise ValueError(f"letter {letter_str(x)!r} outside alphabet of rank {rank}")


# Elementary automorphisms.  Each knows the image of a positive generator and
# its own inverse; words are mapped letter by letter and reduced.


class _Elementary:
    def image(self, i: int) -> Word:
        raise NotImplementedError

    def inverse(self) -> "ElementaryAut":
        raise NotImplementedError

    def apply(self, w: Sequence[int]) -> Word:
        cache: dict[int, Word] = {}
        out: list[int] = []
        for x in w:
            img = cache.get(x)
            if img is None:
                img = self.image(x) if x > 0 else ~self.image(-x)
                cache[x] = img
            for y in img:
                if out and out[-1] == -y:
                    out.pop()
                else:
                    out.append(y)
        return tuple.__new__(Word, tuple(out))


@dataclass(frozen=True)
class Whitehead(_Elementary):
    """The Whitehead automorphism (A, a).

    ``a`` is fixed.  For every other generator ``x``, the image is
    ``a x`` when ``x`` is in A, then ``... a^-1`` appended when ``x^-1`` is
    in A.  ``subset`` holds signed letters and must avoid ``a`` and ``a^-1``.
    """

    subset: frozenset
    multiplier: int

    def __post_init__(self):
        object.__setattr__(self, "subset", frozenset(self.subset))
        if self.multiplier == 0:
            raise ValueError("multiplier must be a letter")
        if self.multiplier in self.subset or -self.multiplier in self.subset:
            raise ValueError("Whitehead set may not contain the multiplier or its inverse")

    def image(self, i: int) -> Word:
        a = self.multiplier
        if i == abs(a):
            return Word((i,))
        seq = []
        if i in self.subset:
            seq.append(a)
        seq.append(i)
        if -i in self.subset:
            seq.append(-a)
        return tuple.__new__(Word, tuple(seq))

    def inverse(self) -> "Whitehead":
        return Whitehead(self.subset, -self.multiplier)

    @property
    def is_identity(self) -> bool:
        return not self.subset

    def __str__(self) -> str:
        body = ",".join(letter_str(x) for x in sorted(self.subset, key=letter_key))
        return f"({{{body}}}, {letter_str(self.multiplier)})"


@dataclass(frozen=True)
class Permutation(_Elementary):
    """Generator relabelling ``a_i -> a_{images[i-1]}``."""

    images: tuple

    def __post_init__(self):
        object.__setattr__(self, "images", tuple(self.images))
        if sorted(self.images) != list(range(1, len(self.images) + 1)):
            raise ValueError(f"not a permutation of 1..{len(self.images)}: {self.images}")

    def image(self, i: int) -> Word:
        if i > len(self.images):
            return Word((i,))
        return tuple.__new__(Word, (self.images[i - 1],))

    def inverse(self) -> "Permutation":
        inv = [0] * len(self.images)
        for i, j in enumerate(self.images, start=1):
            inv[j - 1] = i
        return Permutation(tuple(inv))

    def __str__(self) -> str:
        return "perm(" + "".join(letter_str(j) for j in self.images) + ")"


@dataclass(frozen=True)
class LetterInversion(_Elementary):
    index: int

    def image(self, i: int) -> Word:
        return tuple.__new__(Word, (-i,) if i == self.index else (i,))

    def inverse(self) -> "LetterInversion":
        return self

    def __str__(self) -> str:
        return f"invert({letter_str(self.index)})"


@dataclass(frozen=True)
class Inner(_Elementary):
    """Conjugation ``x -> g x g^-1``."""

    conjugator: Word

    def __post_init__(self):
        object.__setattr__(self, "conjugator", Word(self.conjugator))

    def image(self, i: int) -> Word:
        g = self.conjugator
        return g * Word((i,)) * ~g

    def apply(self, w: Sequence[int]) -> Word:
        return self.conjugator * Word(w) * ~self.conjugator

    def inverse(self) -> "Inner":
        return Inner(~self.conjugator)

    def __str__(self) -> str:
        return f"inner({self.conjugator or '1'})"


ElementaryAut = Union[Whitehead, Permutation, LetterInversion, Inner]


@dataclass(frozen=True)
class Automorphism:
    """A composition of elementary moves, applied first to last.

    ``Automorphism(n, (m1, m2))`` is the map ``m2 o m1`` on ``F_n``.
    """

    rank: int
    moves: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "moves", tuple(self.moves))

    @classmethod
    def identity(cls, rank: int) -> "Automorphism":
        return cls(rank)

    def __call__(self, w: Sequence[int]) -> Word:
        return self.apply(w)

    def apply(self, w: Sequence[int]) -> Word:
        _check_rank(w, self.rank)
        out = Word(w)
        for m in self.moves:
            out = m.apply(out)
        return out

    def then(self, other: Union["Automorphism", ElementaryAut]) -> "Automorphism":
        """The automorphism ``other o self``."""
        if isinstance(other, Automorphism):
            if other.rank != self.rank:
                raise ValueError(f"rank mismatch: {self.rank} vs {other.rank}")
            return Automorphism(self.rank, self.moves + other.moves)
        return Automorphism(self.rank, self.moves + (other,))

    def inverse(self) -> "Automorphism":
        return Automorphism(self.rank, tuple(m.inverse() for m in reversed(self.moves)))

    def __str__(self) -> str:
        if not self.moves:
            return "id"
        return " ; ".join(str(m) for m in self.moves)


def apply_automorphism(aut: Automorphism, w: Sequence[int]) -> Word:
    return aut.apply(w)


def invert_automorphism(aut: Automorphism) -> Automorphism:
    return aut.inverse()
