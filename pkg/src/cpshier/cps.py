"""Conditional probability systems on finite spaces.

A CPS is one probability measure per conditioning event ``B`` such that
``mu(B|B) = 1`` and, for ``A <= B <= C`` with ``B, C`` conditioning
events, ``mu(A|B) * mu(B|C) = mu(A|C)``.  Conditioning events of zero
probability are ordinary data here; nothing is derived from a prior.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .errors import (
    DuplicateEvent,
    EmptyConditioningEvent,
    EmptyFamily,
    FamilyMismatch,
    InvalidCPS,
    NotCylinderFamily,
    SpaceMismatch,
    ZeroMassCondition,
)
from .measure import (
    AtomMap,
    Event,
    FiniteMeasure,
    FiniteSpace,
    _resolve,
    format_rational,
    make_measure,
    measure_of,
    preimage,
    pushforward,
)

DEFAULT_SUBSET_BOUND = 12


class ConditioningFamily:
    """Ordered, non-empty list of distinct non-empty events on one space."""

    __slots__ = ("space", "events", "_index")

    def __init__(self, space: FiniteSpace, events: Iterable[Event | Iterable]):
        evs = []
        for e in events:
            if not isinstance(e, Event):
                e = space.event(e)
            if e.space != space:
                raise SpaceMismatch(f"conditioning event {e} lives on another space")
            if not e.members:
                raise EmptyConditioningEvent("a conditioning family cannot contain the empty event")
            evs.append(e)
        if not evs:
            raise EmptyFamily("a conditioning family needs at least one event")
        index = {}
        for k, e in enumerate(evs):
            if e in index:
                raise DuplicateEvent(f"conditioning event {e} listed twice")
            index[e] = k
        self.space = space
        self.events = tuple(evs)
        self._index = index

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def __contains__(self, e) -> bool:
        return e in self._index

    def index(self, e: Event) -> int:
        return self._index[e]

    def same_events(self, other: "ConditioningFamily") -> bool:
        """Set equality of the events, ignoring order."""
        return self.space == other.space and set(self.events) == set(other.events)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConditioningFamily):
            return NotImplemented
        return self.space == other.space and self.events == other.events

    def __hash__(self) -> int:
        return hash(self.events)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({', '.join(str(e) for e in self.events)})"


class CylinderFamily(ConditioningFamily):
    """The cylinders ``B x Y`` for ``B`` in a base family on ``X``."""

    __slots__ = ("base", "y_space")

    def __init__(self, base: ConditioningFamily, y_space: FiniteSpace):
        product = base.space.product(y_space)
        cylinders = [
            Event(product, frozenset((x, y) for x in b.members for y in y_space.atoms))
            for b in base.events
        ]
        super().__init__(product, cylinders)
        self.base = base
        self.y_space = y_space

    @property
    def cylinders(self) -> tuple:
        return self.events

    def cylinder(self, b: Event) -> Event:
        return self.events[self.base.index(b)]


def lift_family(base: ConditioningFamily, y_space: FiniteSpace) -> CylinderFamily:
    return CylinderFamily(base, y_space)


@dataclass(frozen=True)
class CPS:
    """Array of measures indexed by a conditioning family (family order)."""

    family: ConditioningFamily
    conditionals: tuple

    def __post_init__(self):
        conds = tuple(self.conditionals)
        if len(conds) != len(self.family):
            raise ValueError("exactly one measure per conditioning event is required")
        for m in conds:
            if m.space != self.family.space:
                raise SpaceMismatch("conditional measure on a different space than its family")
        object.__setattr__(self, "conditionals", conds)

    @property
    def space(self) -> FiniteSpace:
        return self.family.space

    def __getitem__(self, b: Event) -> FiniteMeasure:
        return self.conditionals[self.family.index(b)]

    def items(self):
        return zip(self.family.events, self.conditionals)

    def prob(self, a: Event, b: Event) -> Fraction:
        return measure_of(self[b], a)

    def __str__(self) -> str:
        return "; ".join(f"|{b}: {m}" for b, m in self.items())


def make_cps(family: ConditioningFamily, conditionals: Mapping | Sequence) -> CPS:
    """Build a CPS from weight maps given per event (mapping) or in family order.

    Each weight map is checked by :func:`make_measure`; certainty and the chain rule
    conditions are not, use :func:`validate_cps` or :func:`checked`.
    """
    if isinstance(conditionals, Mapping):
        rows = []
        for b in family.events:
            key = b if b in conditionals else frozenset(b.members)
            rows.append(conditionals[key])
    else:
        rows = list(conditionals)
    measures = [
        r if isinstance(r, FiniteMeasure) else make_measure(family.space, r) for r in rows
    ]
    return CPS(family, tuple(measures))


@dataclass(frozen=True)
class Violation:
    """One failed condition.  ``kind`` is ``"certainty"`` or ``"chain_rule"``."""

    kind: str
    b: Event
    c: Event | None = None
    a: Event | None = None
    lhs: Fraction | None = None
    rhs: Fraction | None = None

    def __str__(self) -> str:
        if self.kind == "certainty":
            return f"mu({self.b}|{self.b}) = {format_rational(self.lhs)}, expected 1"
        return (
            f"chain rule fails for A={self.a}, B={self.b}, C={self.c}: "
            f"mu(A|B)*mu(B|C) = {format_rational(self.lhs)} but mu(A|C) = {format_rational(self.rhs)}"
        )

    def key(self) -> tuple:
        a = self.a.members if self.a is not None else None
        c = self.c.members if self.c is not None else None
        return (self.kind, a, self.b.members, c)


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)
    exhaustive: bool = True

    @property
    def ok(self) -> bool:
        return not self.violations

    def __len__(self) -> int:
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)

    def __str__(self) -> str:
        if self.ok:
            return "OK"
        return "\n".join(str(v) for v in self.violations)


def _subsets(members: list):
    for r in range(1, len(members) + 1):
        for combo in combinations(members, r):
            yield combo


def validate_cps(c: CPS, subset_bound: int = DEFAULT_SUBSET_BOUND) -> ValidationReport:
    """Report every violation of certainty and of the chain rule.

    Both sides of the chain rule are additive in ``A``, so a pair ``(B, C)``
    satisfies it for every ``A <= B`` iff it does for every singleton.  The
    verdict is therefore exact at any size.  For spaces with at most
    ``subset_bound`` atoms each failing pair is expanded to every failing
    subset ``A``; above the bound only failing singletons and failing family
    members are listed.
    """
    space = c.space
    exhaustive = len(space) <= subset_bound
    report = ValidationReport(exhaustive=exhaustive)
    events = c.family.events
    conds = c.conditionals

    for b, m in zip(events, conds):
        got = measure_of(m, b)
        if got != 1:
            report.violations.append(Violation("certainty", b, lhs=got, rhs=Fraction(1)))

    for ci, cc in enumerate(events):
        mc = conds[ci]
        for bi, bb in enumerate(events):
            if not bb.members <= cc.members:
                continue
            mb = conds[bi]
            b_given_c = measure_of(mc, bb)
            members = list(bb)
            bad = [x for x in members if mb[x] * b_given_c != mc[x]]
            if not bad:
                continue
            if exhaustive:
                candidates = (space.event(s) for s in _subsets(members))
            else:
                candidates = [space.event({x}) for x in bad]
                candidates += [e for e in events if e.members <= bb.members and len(e) > 1]
            for a in candidates:
                lhs = measure_of(mb, a) * b_given_c
                rhs = measure_of(mc, a)
                if lhs != rhs:
                    report.violations.append(Violation("chain_rule", bb, cc, a, lhs, rhs))
    return report


def is_cps(c: CPS) -> bool:
    return validate_cps(c).ok


def checked(c: CPS) -> CPS:
    """Return ``c`` unchanged, or raise :class:`InvalidCPS` with the report."""
    report = validate_cps(c)
    if not report.ok:
        raise InvalidCPS(report)
    return c


def cps_from_prior(prior: FiniteMeasure, family: ConditioningFamily) -> CPS:
    if prior.space != family.space:
        raise SpaceMismatch("prior and family live on different spaces")
    conds = []
    for b in family.events:
        pb = measure_of(prior, b)
        if pb == 0:
            raise ZeroMassCondition(b)
        conds.append(
            FiniteMeasure(
                prior.space,
                tuple(w / pb if a in b.members else Fraction(0) for a, w in prior.items()),
            )
        )
    return CPS(family, tuple(conds))


def pushforward_cps(c: CPS, f: AtomMap, target_family: ConditioningFamily) -> CPS:
    """Image CPS under ``f``; requires ``f^-1(target_family) == c.family`` as sets."""
    fn = _resolve(f)
    pre = [preimage(fn, c.space, b) for b in target_family.events]
    if set(pre) != set(c.family.events):
        missing = [str(b) for b, p in zip(target_family.events, pre) if p not in c.family]
        if missing:
            detail = "preimage of " + ", ".join(missing) + " is not a source conditioning event"
        else:
            detail = "some source conditioning event is not a preimage of a target event"
        raise FamilyMismatch(detail)
    conds = tuple(pushforward(c[p], fn, target_family.space) for p in pre)
    return CPS(target_family, conds)


def marginal_cps(c: CPS) -> CPS:
    """Marginal on ``X`` of a CPS on ``X x Y`` with a cylinder family."""
    fam = c.family
    if not isinstance(fam, CylinderFamily):
        raise NotCylinderFamily(f"family {fam!r} is not a cylinder lift")
    return pushforward_cps(c, lambda xy: xy[0], fam.base)


def restrict_cps(c: CPS, space: FiniteSpace, family: ConditioningFamily) -> CPS:
    """Re-express ``c`` on a subspace holding all of its positive mass.

    ``family`` must list, in the same order, the traces of ``c.family`` on
    ``space``.  Used to give finitely supported CPSs a canonical carrier.
    """
    conds = []
    for b, m in c.items():
        dropped = sum((w for a, w in m.items() if a not in space), Fraction(0))
        if dropped:
            raise ValueError(f"restriction drops positive mass at conditioning event {b}")
        conds.append(FiniteMeasure(space, tuple(m[a] for a in space.atoms)))
    return CPS(family, tuple(conds))

