"""Exact probability measures on finite labeled spaces.

All probability values are :class:`fractions.Fraction`; nothing in this
package ever rounds.  Spaces carry an explicit atom order so that every
printed or serialized object is deterministic.

>>> S = FiniteSpace(("a", "b", "c"))
>>> m = make_measure(S, {"a": Fraction(1, 3), "b": Fraction(1, 3), "c": Fraction(1, 3)})
>>> measure_of(m, S.event({"a", "b"}))
Fraction(2, 3)
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Iterable, Mapping, Union

from .errors import (
    NegativeMass,
    NotNormalized,
    PartialMap,
    RationalFormatError,
    SpaceMismatch,
    UnknownAtom,
)

Rational = Fraction
Atom = Hashable
AtomMap = Union[Mapping[Atom, Atom], Callable[[Atom], Atom]]

_RATIONAL_RE = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*(\d+)\s*)?$")


def parse_rational(text: str) -> Fraction:
    """Parse ``"p/q"`` or ``"p"``; reject ``q = 0`` and anything non-integral."""
    m = _RATIONAL_RE.match(text)
    if not m:
        raise RationalFormatError(f"not a rational: {text!r}")
    num = int(m.group(1))
    den = int(m.group(2)) if m.group(2) is not None else 1
    if den == 0:
        raise RationalFormatError(f"zero denominator: {text!r}")
    return Fraction(num, den)


def format_rational(q: Fraction) -> str:
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def atom_str(atom: Atom) -> str:
    """Human-readable rendering; product atoms print as ``(x,y)``."""
    if isinstance(atom, tuple):
        return "(" + ",".join(atom_str(a) for a in atom) + ")"
    return str(atom)


@dataclass(frozen=True)
class FiniteSpace:
    """Non-empty ordered collection of distinct atoms.

    Base spaces use string labels; product spaces use tuples of the
    factor atoms.
    """

    atoms: tuple
    _index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        atoms = tuple(self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if not atoms:
            raise ValueError("a finite space needs at least one atom")
        index = {a: k for k, a in enumerate(atoms)}
        if len(index) != len(atoms):
            dupes = sorted({atom_str(a) for a in atoms if atoms.count(a) > 1})
            raise ValueError(f"duplicate atoms: {', '.join(dupes)}")
        object.__setattr__(self, "_index", index)

    @classmethod
    def of(cls, labels: Iterable[str]) -> "FiniteSpace":
        return cls(tuple(labels))

    def __len__(self) -> int:
        return len(self.atoms)

    def __iter__(self):
        return iter(self.atoms)

    def __contains__(self, atom) -> bool:
        return atom in self._index

    def position(self, atom) -> int:
        try:
            return self._index[atom]
        except KeyError:
            raise UnknownAtom(f"{atom_str(atom)} is not an atom of this space") from None

    def event(self, members: Iterable[Atom]) -> "Event":
        return Event(self, frozenset(members))

    def full(self) -> "Event":
        return Event(self, frozenset(self.atoms))

    def empty(self) -> "Event":
        return Event(self, frozenset())

    def product(self, other: "FiniteSpace") -> "FiniteSpace":
        """Row-major product space with atoms ``(x, y)``."""
        return FiniteSpace(tuple((x, y) for x in self.atoms for y in other.atoms))

    def __str__(self) -> str:
        return "{" + " ".join(atom_str(a) for a in self.atoms) + "}"


@dataclass(frozen=True)
class Event:
    space: FiniteSpace
    members: frozenset

    def __post_init__(self):
        members = frozenset(self.members)
        object.__setattr__(self, "members", members)
        for a in members:
            if a not in self.space:
                raise UnknownAtom(f"{atom_str(a)} is not an atom of the event's space")

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        # space order, for determinism
        return (a for a in self.space.atoms if a in self.members)

    def __contains__(self, atom) -> bool:
        return atom in self.members

    def __le__(self, other: "Event") -> bool:
        return self.members <= other.members

    def __or__(self, other: "Event") -> "Event":
        _same_space(self.space, other.space)
        return Event(self.space, self.members | other.members)

    def __and__(self, other: "Event") -> "Event":
        _same_space(self.space, other.space)
        return Event(self.space, self.members & other.members)

    def sorted_members(self) -> list:
        return list(self)

    def __str__(self) -> str:
        return "{" + ",".join(atom_str(a) for a in self) + "}"


@dataclass(frozen=True)
class FiniteMeasure:
    """Probability measure with an explicit (possibly zero) mass per atom.

    Build through :func:`make_measure`, which checks non-negativity and
    normalization; the constructor only aligns masses with the space.
    """

    space: FiniteSpace
    masses: tuple

    def __post_init__(self):
        masses = tuple(Fraction(x) for x in self.masses)
        if len(masses) != len(self.space):
            raise ValueError("one mass per atom is required")
        object.__setattr__(self, "masses", masses)

    def mass(self, atom) -> Fraction:
        return self.masses[self.space.position(atom)]

    def __getitem__(self, atom) -> Fraction:
        return self.mass(atom)

    def items(self):
        return zip(self.space.atoms, self.masses)

    def support(self) -> Event:
        return Event(self.space, frozenset(a for a, w in self.items() if w != 0))

    def as_dict(self, nonzero: bool = False) -> dict:
        return {a: w for a, w in self.items() if w != 0 or not nonzero}

    def __str__(self) -> str:
        body = ", ".join(f"{atom_str(a)}:{format_rational(w)}" for a, w in self.items() if w)
        return "{" + body + "}"


def _same_space(a: FiniteSpace, b: FiniteSpace) -> None:
    if a is not b and a != b:
        raise SpaceMismatch(f"spaces differ: {a} vs {b}")


def make_measure(space: FiniteSpace, weights: Mapping[Atom, Fraction | int | str]) -> FiniteMeasure:
    """Validated measure; atoms missing from ``weights`` get mass 0."""
    masses = [Fraction(0)] * len(space)
    for atom, w in weights.items():
        if atom not in space:
            raise UnknownAtom(f"{atom_str(atom)} is not an atom of {space}")
        w = parse_rational(w) if isinstance(w, str) else Fraction(w)
        if w < 0:
            raise NegativeMass(f"negative mass {format_rational(w)} at {atom_str(atom)}")
        masses[space.position(atom)] = w
    total = sum(masses, Fraction(0))
    if total != 1:
        raise NotNormalized(f"masses sum to {format_rational(total)}, not 1")
    return FiniteMeasure(space, tuple(masses))


def point_mass(space: FiniteSpace, atom: Atom) -> FiniteMeasure:
    return make_measure(space, {atom: 1})


def measure_of(m: FiniteMeasure, e: Event) -> Fraction:
    _same_space(m.space, e.space)
    return sum((w for a, w in m.items() if a in e.members), Fraction(0))


def _resolve(f: AtomMap) -> Callable[[Atom], Atom]:
    if callable(f) and not isinstance(f, Mapping):
        return f

    def lookup(x):
        return f[x]

    return lookup


def apply_map(f: AtomMap, x: Atom) -> Atom:
    try:
        return _resolve(f)(x)
    except KeyError:
        raise PartialMap(f"map has no image for {atom_str(x)}") from None


def preimage(f: AtomMap, domain: FiniteSpace, e: Event) -> Event:
    fn = _resolve(f)
    out = set()
    for x in domain.atoms:
        try:
            y = fn(x)
        except KeyError:
            raise PartialMap(f"map has no image for {atom_str(x)}") from None
        if y in e.members:
            out.add(x)
    return Event(domain, frozenset(out))


def pushforward(m: FiniteMeasure, f: AtomMap, codomain: FiniteSpace) -> FiniteMeasure:
    """Image measure: mass at ``y`` is the total mass of ``f``'s preimage of ``y``."""
    fn = _resolve(f)
    masses = [Fraction(0)] * len(codomain)
    for x, w in m.items():
        try:
            y = fn(x)
        except KeyError:
            raise PartialMap(f"map has no image for {atom_str(x)}") from None
        if y not in codomain:
            raise PartialMap(f"{atom_str(x)} maps to {atom_str(y)}, outside the codomain")
        masses[codomain.position(y)] += w
    return FiniteMeasure(codomain, tuple(masses))
