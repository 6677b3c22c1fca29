"""Belief hierarchies generated by finite type structures.

``unfold`` materializes the order-n hierarchy of a type as a
:class:`HierarchyPoint`.  Level 1 is the marginal on ``S`` of the type's
belief; level ``k+1`` is the image of the belief under
``(s, t_j) -> (s, h_j^k(t_j))``.  Points are hash-consed, so two types
generate the same hierarchy iff their points are the same object.

Only finitely supported points ever exist: the carrier of level ``k+1`` is
``S x Q`` where ``Q`` holds the co-player points of order ``k`` that carry
positive mass under some conditional, ordered by content digest.

``refine`` computes the same equivalence (kernel of ``h_i^n``) by
partition refinement without building points; tests tie the two together.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .cps import CPS, ConditioningFamily, lift_family, marginal_cps, pushforward_cps, restrict_cps
from .errors import NonPositiveOrder, UnknownType
from .measure import Event, FiniteSpace, atom_str, format_rational
from .structure import PLAYERS, TypeStructure, disjoint_union, other


class HierarchyPoint:
    """Interned order-n hierarchy ``(mu^1, ..., mu^n)`` of one player.

    Create through :class:`Interner`; never instantiate directly.
    """

    __slots__ = ("player", "levels", "prefix", "uid", "digest", "__weakref__")

    def __init__(self, player: int, levels: tuple, prefix: "HierarchyPoint | None", uid: int, digest: str):
        self.player = player
        self.levels = levels
        self.prefix = prefix
        self.uid = uid
        self.digest = digest

    @property
    def order(self) -> int:
        return len(self.levels)

    def truncate(self, k: int) -> "HierarchyPoint":
        if not 1 <= k <= self.order:
            raise ValueError(f"cannot truncate an order-{self.order} point to order {k}")
        p = self
        while p.order > k:
            p = p.prefix
        return p

    def __repr__(self) -> str:
        return f"HierarchyPoint(player={self.player}, order={self.order}, id={self.digest[:10]})"

    # identity semantics: interned
    __hash__ = object.__hash__

    def __eq__(self, other):
        return self is other

    def __lt__(self, other: "HierarchyPoint") -> bool:
        return self.digest < other.digest


def _atom_key(atom):
    if isinstance(atom, tuple):
        s, q = atom
        return (s, q.uid)
    return atom


def _atom_text(atom) -> str:
    if isinstance(atom, tuple):
        s, q = atom
        return f"({s},{q.digest})"
    return str(atom)


def _level_key(level: CPS) -> tuple:
    fam = level.family
    base = fam.base if hasattr(fam, "base") else fam
    events = tuple(b.members for b in base.events)
    conds = tuple(
        tuple((_atom_key(a), w) for a, w in m.items() if w != 0) for m in level.conditionals
    )
    return (events, conds)


def _level_text(level: CPS) -> str:
    fam = level.family
    base = fam.base if hasattr(fam, "base") else fam
    parts = []
    for b, m in zip(base.events, level.conditionals):
        ev = " ".join(atom_str(a) for a in b)
        body = " ".join(f"{_atom_text(a)}={format_rational(w)}" for a, w in m.items() if w != 0)
        parts.append(f"{{{ev}}}:{body}")
    return ";".join(parts)


class Interner:
    """Append-only table of hierarchy points; insertion is single-winner."""

    def __init__(self):
        self._table: dict = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._table)

    def point(self, player: int, levels: Iterable[CPS]) -> HierarchyPoint:
        levels = tuple(levels)
        if not levels:
            raise NonPositiveOrder("a hierarchy point needs at least one level")
        prefix = self.point(player, levels[:-1]) if len(levels) > 1 else None
        return self._extend(player, prefix, levels[-1])

    def _extend(self, player: int, prefix: HierarchyPoint | None, level: CPS) -> HierarchyPoint:
        # the root level pins the state space; deeper levels inherit it via the prefix
        anchor = prefix.uid if prefix else level.space.atoms
        key = (player, anchor, _level_key(level))
        found = self._table.get(key)
        if found is not None:
            return found
        head = prefix.digest if prefix else " ".join(level.space.atoms)
        text = f"{player}|{head}|{_level_text(level)}"
        digest = hashlib.sha256(text.encode()).hexdigest()
        levels = (prefix.levels if prefix else ()) + (level,)
        with self._lock:
            found = self._table.get(key)
            if found is None:
                found = HierarchyPoint(player, levels, prefix, len(self._table), digest)
                self._table[key] = found
        return found


DEFAULT_INTERNER = Interner()


def canonical_level(c: CPS, base: ConditioningFamily) -> CPS:
    """Re-carry a CPS on ``S x Q`` so that ``Q`` is exactly its positive-mass points."""
    support = set()
    for m in c.conditionals:
        for (s, q), w in m.items():
            if w != 0:
                support.add(q)
    q_space = FiniteSpace(tuple(sorted(support)))
    fam = lift_family(base, q_space)
    return restrict_cps(c, fam.space, fam)


class Unfolder:
    """Computes ``h_i^k(t)`` for every type of a structure, order by order."""

    def __init__(self, ts: TypeStructure, interner: Interner | None = None):
        self.ts = ts
        self.interner = interner or DEFAULT_INTERNER
        self.points: list = [None]  # points[k][i][t], k >= 1

    def _grow(self):
        ts = self.ts
        k = len(self.points) - 1
        layer = {}
        for i in PLAYERS:
            layer[i] = {}
            base = ts.families[i]
            if k == 0:
                for t in ts.types[i].atoms:
                    level = marginal_cps(ts.beliefs[i][t])
                    layer[i][t] = self.interner._extend(i, None, level)
                continue
            j = other(i)
            h_j = self.points[k][j]
            q_all = FiniteSpace(tuple(sorted(set(h_j.values()))))
            target = lift_family(base, q_all)
            prev = self.points[k][i]
            for t in ts.types[i].atoms:
                image = pushforward_cps(ts.beliefs[i][t], lambda st: (st[0], h_j[st[1]]), target)
                level = canonical_level(image, base)
                layer[i][t] = self.interner._extend(i, prev[t], level)
        self.points.append(layer)

    def at(self, i: int, t: str, n: int) -> HierarchyPoint:
        if n < 1:
            raise NonPositiveOrder(f"order must be at least 1, got {n}")
        if i not in PLAYERS:
            raise UnknownType(f"no player {i}")
        if t not in self.ts.types[i]:
            raise UnknownType(f"player {i} has no type {t!r}")
        while len(self.points) <= n:
            self._grow()
        return self.points[n][i][t]

    def layer(self, i: int, n: int) -> dict:
        if n < 1:
            raise NonPositiveOrder(f"order must be at least 1, got {n}")
        while len(self.points) <= n:
            self._grow()
        return dict(self.points[n][i])


def unfolder(ts: TypeStructure) -> Unfolder:
    """Shared default-interner unfolder cached on the structure."""
    u = ts.__dict__.get("_unfolder")
    if u is None:
        u = Unfolder(ts)
        ts.__dict__["_unfolder"] = u
    return u


def unfold(ts: TypeStructure, i: int, t: str, n: int) -> HierarchyPoint:
    return unfolder(ts).at(i, t, n)


# ---------------------------------------------------------------------------
# coherence
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoherenceViolation:
    level: int
    condition: Event
    event: str
    marginal: Fraction
    lower: Fraction

    def __str__(self) -> str:
        return (
            f"level {self.level} given {self.condition}: marginal assigns "
            f"{format_rational(self.marginal)} to {self.event}, level {self.level - 1} assigns "
            f"{format_rational(self.lower)}"
        )


@dataclass
class CoherenceReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __len__(self) -> int:
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)

    def __str__(self) -> str:
        return "OK" if self.ok else "\n".join(str(v) for v in self.violations)


def _positive(m) -> dict:
    return {a: w for a, w in m.items() if w != 0}


def _project(level: CPS, k: int, base: ConditioningFamily) -> CPS:
    """Marginal of an order-(k+1) level onto the order-k domain."""
    if k == 1:
        return marginal_cps(level)
    qs = sorted({q.truncate(k - 1) for q in level.family.y_space.atoms})
    target = lift_family(base, FiniteSpace(tuple(qs)))
    return pushforward_cps(level, lambda sq: (sq[0], sq[1].truncate(k - 1)), target)


def check_coherence(hp: HierarchyPoint) -> CoherenceReport:
    """Each level's marginal must equal the level below it, exactly."""
    report = CoherenceReport()
    base = hp.levels[0].family
    for k in range(1, hp.order):
        upper, lower = hp.levels[k], hp.levels[k - 1]
        marg = _project(upper, k, base)
        for b, mm, ml in zip(base.events, marg.conditionals, lower.conditionals):
            got, want = _positive(mm), _positive(ml)
            for a in sorted(set(got) | set(want), key=_atom_text):
                if got.get(a, 0) != want.get(a, 0):
                    report.violations.append(
                        CoherenceViolation(k + 1, b, "{" + _atom_text(a) + "}", got.get(a, Fraction(0)), want.get(a, Fraction(0)))
                    )
    return report


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def serialize_point(hp: HierarchyPoint) -> str:
    """Nested canonical text; co-player points are referenced as ``p<k>``."""
    names: dict = {hp: "p0"}
    order = [hp]
    k = 0
    while k < len(order):
        p = order[k]
        k += 1
        for level in p.levels[1:]:
            for q in level.family.y_space.atoms:
                if q not in names:
                    names[q] = f"p{len(order)}"
                    order.append(q)
    out = ["hierarchy v1", "root: p0"]
    for p in order:
        out.append(f"{names[p]}: player {p.player} order {p.order}")
        for n, level in enumerate(p.levels, start=1):
            out.append(f"  level {n}")
            base = level.family.base if hasattr(level.family, "base") else level.family
            for b, m in zip(base.events, level.conditionals):
                entries = []
                for a, w in m.items():
                    if w == 0:
                        continue
                    if isinstance(a, tuple):
                        entries.append(f"({a[0]},{names[a[1]]})={format_rational(w)}")
                    else:
                        entries.append(f"{a}={format_rational(w)}")
                ev = " ".join(atom_str(x) for x in b)
                out.append(f"    given {{{ev}}}: {' '.join(entries)}")
    return "\n".join(out) + "\n"


def definitions_count(text: str) -> int:
    return sum(1 for line in text.splitlines() if line.startswith("p") and ": player" in line)


# ---------------------------------------------------------------------------
# partition refinement
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Partition:
    """Per-player cells; members and cells sorted by label."""

    cells: dict

    @classmethod
    def from_groups(cls, groups: dict) -> "Partition":
        cells = {}
        for i in PLAYERS:
            cs = [tuple(sorted(g)) for g in groups[i]]
            cells[i] = tuple(sorted(cs, key=lambda c: c[0]))
        return cls(cells)

    def cell_index(self, i: int) -> dict:
        return {t: k for k, cell in enumerate(self.cells[i]) for t in cell}

    def same_cell(self, i: int, a: str, b: str) -> bool:
        idx = self.cell_index(i)
        return idx[a] == idx[b]

    def size(self) -> int:
        return sum(len(self.cells[i]) for i in PLAYERS)

    def refines(self, coarser: "Partition") -> bool:
        for i in PLAYERS:
            idx = coarser.cell_index(i)
            for cell in self.cells[i]:
                if len({idx[t] for t in cell}) != 1:
                    return False
        return True


def trivial_partition(ts: TypeStructure) -> Partition:
    return Partition.from_groups({i: [ts.types[i].atoms] for i in PLAYERS})


def refine_step(ts: TypeStructure, p: Partition) -> Partition:
    """Split types whose beliefs differ once co-player types are replaced by their cells."""
    groups = {}
    for i in PLAYERS:
        j = other(i)
        cell_of = p.cell_index(j)
        cell_space = FiniteSpace(tuple(range(len(p.cells[j]))))
        target = lift_family(ts.families[i], cell_space)
        by_sig: dict = {}
        for t in ts.types[i].atoms:
            sig = pushforward_cps(ts.beliefs[i][t], lambda st: (st[0], cell_of[st[1]]), target)
            by_sig.setdefault(sig, []).append(t)
        groups[i] = list(by_sig.values())
    return Partition.from_groups(groups)


def refinement_sequence(ts: TypeStructure, n: int | None = None) -> list:
    """``[P^0, ..., P^n]``; with ``n=None`` stop at the first repeat (the fixpoint)."""
    seq = [trivial_partition(ts)]
    while n is None or len(seq) <= n:
        nxt = refine_step(ts, seq[-1])
        if n is None and nxt == seq[-1]:
            break
        seq.append(nxt)
    return seq


def refine(ts: TypeStructure, n: int) -> Partition:
    if n < 0:
        raise ValueError(f"refinement order must be non-negative, got {n}")
    seq = refinement_sequence(ts, None)
    if n < len(seq):
        return seq[n]
    return seq[-1]


def refine_to_fixpoint(ts: TypeStructure) -> tuple:
    seq = refinement_sequence(ts, None)
    return seq[-1], len(seq) - 1


# ---------------------------------------------------------------------------
# terminality
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TerminalityRow:
    player: int
    type: str
    matches: tuple
    failed_order: int | None = None

    @property
    def matched(self) -> bool:
        return bool(self.matches)


@dataclass(frozen=True)
class TerminalityReport:
    """One row per probe type.  ``order`` is ``None`` for full hierarchies."""

    rows: tuple
    order: int | None
    depth: int

    @property
    def all_matched(self) -> bool:
        return all(r.matched for r in self.rows)

    def unmatched(self) -> list:
        return [r for r in self.rows if not r.matched]


_TAGS = ("target", "probe")


def _report(target: TypeStructure, probe: TypeStructure, n: int | None) -> TerminalityReport:
    u = disjoint_union(target, probe, tags=_TAGS)
    fix = refinement_sequence(u.structure, None)
    depth = len(fix) - 1
    k_max = depth if n is None else n
    seq = fix if k_max <= depth else fix + [fix[-1]] * (k_max - depth)
    back = {i: {v: k for k, v in u.embed_a[i].items()} for i in PLAYERS}
    rows = []
    for i in PLAYERS:
        idx = [seq[k].cell_index(i) for k in range(k_max + 1)]
        for t in probe.types[i].atoms:
            tag = u.embed_b[i][t]

            def matches_at(k):
                return tuple(sorted(back[i][x] for x in back[i] if idx[k][x] == idx[k][tag]))

            found = matches_at(k_max)
            failed = None
            if not found:
                failed = next(k for k in range(k_max + 1) if not matches_at(k))
            rows.append(TerminalityRow(i, t, found, failed))
    return TerminalityReport(tuple(rows), n, depth)


def finitely_terminal_at(target: TypeStructure, probe: TypeStructure, n: int) -> TerminalityReport:
    """Match every probe type to the target types with equal order-n hierarchy."""
    if n < 0:
        raise ValueError(f"order must be non-negative, got {n}")
    return _report(target, probe, n)


def terminal_over(target: TypeStructure, probe: TypeStructure) -> TerminalityReport:
    """Match every probe type to the target types with equal full hierarchy."""
    return _report(target, probe, None)


def unfold_classes(ts: TypeStructure, n: int) -> Partition:
    """Kernel of ``h_i^n`` computed from interned points; order 0 is the trivial partition."""
    if n == 0:
        return trivial_partition(ts)
    u = unfolder(ts)
    groups = {}
    for i in PLAYERS:
        by_point: dict = {}
        for t, p in u.layer(i, n).items():
            by_point.setdefault(p, []).append(t)
        groups[i] = list(by_point.values())
    return Partition.from_groups(groups)
