"""Finite two-player conditional type structures.

A structure fixes a primitive space ``S`` and, per player ``i``, a
conditioning family ``B_i`` on ``S``, a finite type set ``T_i`` and a belief
map sending each type to a CPS on ``S x T_j`` conditioned on the cylinders
``B x T_j``.  Players are labeled ``1`` and ``2``; ``j`` is always the other.

Text format (canonical form as emitted by :func:`serialize_structure`)::

    cps-hier v1
    S: L R
    player 1
    B: {L R} {R}
    T: u
    belief u | {L R}: (L,v)=1/2 (R,v)=1/2
    belief u | {R}: (R,v)=1
    player 2
    ...

Omitted pairs carry zero mass.  An optional ``meta:`` line stores
``key=value`` tokens (e.g. ``compact=true``) without any semantics.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .cps import (
    CPS,
    ConditioningFamily,
    CylinderFamily,
    lift_family,
    make_cps,
    pushforward_cps,
    validate_cps,
    cps_from_prior,
)
from .errors import (
    BaseMismatch,
    DuplicateLabel,
    InvalidMorphism,
    MeasureError,
    CPSError,
    StructureSyntaxError,
    ValidationError,
)
from .measure import (
    Event,
    FiniteMeasure,
    FiniteSpace,
    atom_str,
    format_rational,
    make_measure,
    parse_rational,
)

PLAYERS = (1, 2)
HEADER = "cps-hier v1"
CPS_HEADER = "cps v1"


def other(i: int) -> int:
    return 3 - i


@dataclass(frozen=True)
class Problem:
    """One validation finding, located by player/type/event where known."""

    kind: str
    detail: str
    player: int | None = None
    type: str | None = None
    line: int | None = None

    def __str__(self) -> str:
        where = []
        if self.player is not None:
            where.append(f"player {self.player}")
        if self.type is not None:
            where.append(f"type {self.type}")
        prefix = f"[{', '.join(where)}] " if where else ""
        return f"{prefix}{self.kind}: {self.detail}"


class TypeStructure:
    """Validated finite type structure; immutable once constructed."""

    def __init__(
        self,
        s_space: FiniteSpace,
        families: Mapping[int, ConditioningFamily],
        types: Mapping[int, FiniteSpace],
        beliefs: Mapping[int, Mapping[str, CPS]],
        metadata: Mapping[str, str] | None = None,
    ):
        self.s_space = s_space
        self.families = {i: families[i] for i in PLAYERS}
        self.types = {i: types[i] for i in PLAYERS}
        self.metadata = dict(sorted((metadata or {}).items()))
        self.lifted = {i: lift_family(self.families[i], self.types[other(i)]) for i in PLAYERS}
        self.beliefs = {i: {t: beliefs[i][t] for t in self.types[i].atoms if t in beliefs[i]} for i in PLAYERS}
        problems = self._problems(beliefs)
        if problems:
            raise ValidationError(problems)

    def _problems(self, beliefs) -> list:
        out = []
        s_labels = set(self.s_space.atoms)
        for i in PLAYERS:
            if self.families[i].space != self.s_space:
                out.append(Problem("FamilyMismatch", "conditioning family is not on S", player=i))
            clash = s_labels & set(self.types[i].atoms)
            if clash:
                out.append(Problem("DuplicateLabel", f"type labels shared with S: {sorted(clash)}", player=i))
            for t in beliefs[i]:
                if t not in self.types[i]:
                    out.append(Problem("UnknownType", "belief given for an undeclared type", player=i, type=t))
            for t in self.types[i].atoms:
                if t not in beliefs[i]:
                    out.append(Problem("MissingBelief", "no belief for this type", player=i, type=t))
                    continue
                c = beliefs[i][t]
                if c.family != self.lifted[i]:
                    out.append(Problem("FamilyMismatch", "belief is not conditioned on B_i x T_j", player=i, type=t))
                    continue
                for v in validate_cps(c):
                    out.append(Problem(v.kind, str(v), player=i, type=t))
        return out

    @classmethod
    def build(cls, S, B, T, beliefs, metadata=None) -> "TypeStructure":
        """Convenience constructor from plain Python data.

        ``B[i]`` is a list of events (iterables of S labels), ``T[i]`` a list
        of type labels, and ``beliefs[i][t]`` a list (family order) of weight
        maps keyed by ``(s, t_j)`` pairs.
        """
        s_space = FiniteSpace.of(S)
        families = {i: ConditioningFamily(s_space, [s_space.event(b) for b in B[i]]) for i in PLAYERS}
        types = {i: FiniteSpace.of(T[i]) for i in PLAYERS}
        bel = {}
        for i in PLAYERS:
            lifted = lift_family(families[i], types[other(i)])
            bel[i] = {t: make_cps(lifted, rows) for t, rows in beliefs[i].items()}
        return cls(s_space, families, types, bel, metadata)

    def belief(self, i: int, t: str) -> CPS:
        return self.beliefs[i][t]

    def __eq__(self, other_ts) -> bool:
        if not isinstance(other_ts, TypeStructure):
            return NotImplemented
        return (
            self.s_space == other_ts.s_space
            and self.families == other_ts.families
            and self.types == other_ts.types
            and self.beliefs == other_ts.beliefs
            and self.metadata == other_ts.metadata
        )

    def __repr__(self) -> str:
        sizes = ", ".join(f"|T_{i}|={len(self.types[i])}" for i in PLAYERS)
        return f"TypeStructure(|S|={len(self.s_space)}, {sizes})"


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------

_LABEL = r"[^\s{}(),=|#:]+"
_LABEL_RE = re.compile(rf"^{_LABEL}$")
_EVENT_RE = re.compile(r"\{([^{}]*)\}")
_PAIR_RE = re.compile(rf"\(\s*({_LABEL})\s*,\s*({_LABEL})\s*\)\s*=\s*(\S+)")
_ATOM_W_RE = re.compile(rf"({_LABEL})\s*=\s*(\S+)")
_BELIEF_RE = re.compile(rf"^belief\s+({_LABEL})\s*\|\s*(\{{[^{{}}]*\}})\s*:(.*)$")
_GIVEN_RE = re.compile(r"^given\s*(\{[^{}]*\})\s*:(.*)$")


def _lines(text: str):
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield n, line


def _labels(body: str, n: int, what: str) -> list:
    labels = body.split()
    seen = set()
    for lab in labels:
        if not _LABEL_RE.match(lab):
            raise StructureSyntaxError(f"bad {what} label {lab!r}", n)
        if lab in seen:
            raise DuplicateLabel(f"duplicate {what} label {lab!r}", n)
        seen.add(lab)
    if not labels:
        raise StructureSyntaxError(f"empty {what} list", n)
    return labels


def _event_members(body: str, space: FiniteSpace, n: int) -> frozenset:
    members = body.split()
    for m in members:
        if m not in space:
            raise StructureSyntaxError(f"unknown atom {m!r} in event", n)
    if len(set(members)) != len(members):
        raise DuplicateLabel("atom repeated inside an event", n)
    return frozenset(members)


def _events(body: str, space: FiniteSpace, n: int) -> list:
    rest = _EVENT_RE.sub("", body).strip()
    if rest:
        raise StructureSyntaxError(f"unexpected text in event list: {rest!r}", n)
    found = _EVENT_RE.findall(body)
    if not found:
        raise StructureSyntaxError("expected at least one event {...}", n)
    return [_event_members(e, space, n) for e in found]


def _rational(text: str, n: int) -> Fraction:
    try:
        return parse_rational(text)
    except MeasureError as exc:
        raise StructureSyntaxError(str(exc), n) from None


def _split_key(line: str, key: str):
    if line.startswith(key + ":"):
        return line[len(key) + 1:].strip()
    return None


def _make_family(space: FiniteSpace, events: list, n: int, problems: list, player=None):
    try:
        return ConditioningFamily(space, [space.event(e) for e in events])
    except CPSError as exc:
        problems.append(Problem(type(exc).__name__, str(exc), player=player, line=n))
        return None


def parse_structure(text: str) -> TypeStructure:
    """Parse and fully validate a structure file.

    Raises :class:`StructureSyntaxError` (or its subclass
    :class:`DuplicateLabel`) for malformed text and :class:`ValidationError`
    listing every semantic problem otherwise.
    """
    lines = list(_lines(text))
    if not lines or lines[0][1] != HEADER:
        raise StructureSyntaxError(f"first line must be {HEADER!r}", lines[0][0] if lines else 1)

    s_space = None
    metadata: dict = {}
    player = None
    raw_B: dict = {}
    raw_T: dict = {}
    raw_beliefs: dict = {1: {}, 2: {}}
    for n, line in lines[1:]:
        if (body := _split_key(line, "S")) is not None:
            if s_space is not None:
                raise StructureSyntaxError("S declared twice", n)
            s_space = FiniteSpace.of(_labels(body, n, "S"))
            continue
        if (body := _split_key(line, "meta")) is not None:
            for tok in body.split():
                if "=" not in tok:
                    raise StructureSyntaxError(f"meta token {tok!r} is not key=value", n)
                k, v = tok.split("=", 1)
                metadata[k] = v
            continue
        m = re.match(r"^player\s+(\S+)$", line)
        if m:
            if m.group(1) not in ("1", "2"):
                raise StructureSyntaxError(f"unknown player {m.group(1)!r}; players are 1 and 2", n)
            player = int(m.group(1))
            if player in raw_T or player in raw_B:
                raise StructureSyntaxError(f"player {player} declared twice", n)
            continue
        if player is None:
            raise StructureSyntaxError(f"unexpected line before any player section: {line!r}", n)
        if (body := _split_key(line, "B")) is not None:
            if s_space is None:
                raise StructureSyntaxError("S must be declared before B", n)
            if player in raw_B:
                raise StructureSyntaxError(f"B declared twice for player {player}", n)
            raw_B[player] = (n, _events(body, s_space, n))
            continue
        if (body := _split_key(line, "T")) is not None:
            if player in raw_T:
                raise StructureSyntaxError(f"T declared twice for player {player}", n)
            raw_T[player] = (n, _labels(body, n, "type"))
            continue
        m = _BELIEF_RE.match(line)
        if m:
            t, ev, pairs_body = m.group(1), m.group(2), m.group(3)
            if s_space is None:
                raise StructureSyntaxError("S must be declared before beliefs", n)
            members = _event_members(ev[1:-1], s_space, n)
            key = (t, members)
            if key in raw_beliefs[player]:
                raise DuplicateLabel(f"belief for type {t!r} given {ev} listed twice", n)
            leftover = _PAIR_RE.sub("", pairs_body).strip()
            if leftover:
                raise StructureSyntaxError(f"cannot read belief entries: {leftover!r}", n)
            weights = {}
            for s, tj, w in _PAIR_RE.findall(pairs_body):
                if (s, tj) in weights:
                    raise DuplicateLabel(f"pair ({s},{tj}) listed twice", n)
                weights[(s, tj)] = _rational(w, n)
            raw_beliefs[player][key] = (n, weights)
            continue
        raise StructureSyntaxError(f"unrecognized line: {line!r}", n)

    if s_space is None:
        raise StructureSyntaxError("missing S declaration", None)
    for i in PLAYERS:
        if i not in raw_B:
            raise StructureSyntaxError(f"missing B for player {i}", None)
        if i not in raw_T:
            raise StructureSyntaxError(f"missing T for player {i}", None)

    problems: list = []
    families = {}
    for i in PLAYERS:
        n, evs = raw_B[i]
        families[i] = _make_family(s_space, evs, n, problems, player=i)
    types = {i: FiniteSpace.of(raw_T[i][1]) for i in PLAYERS}
    if problems:
        raise ValidationError(problems, problems[0].line)

    beliefs: dict = {1: {}, 2: {}}
    for i in PLAYERS:
        j = other(i)
        lifted = lift_family(families[i], types[j])
        base_by_members = {b.members: b for b in families[i].events}
        rows: dict = {}
        for (t, members), (n, weights) in raw_beliefs[i].items():
            if t not in types[i]:
                raise StructureSyntaxError(f"belief for undeclared type {t!r} of player {i}", n)
            if members not in base_by_members:
                raise StructureSyntaxError(
                    f"belief conditioned on {{{' '.join(sorted(members))}}}, not an event of B_{i}", n
                )
            for s, tj in weights:
                if tj not in types[j]:
                    raise StructureSyntaxError(f"unknown co-player type {tj!r}", n)
            rows[(t, members)] = (n, weights)
        for t in types[i].atoms:
            conds = []
            for b in families[i].events:
                if (t, b.members) not in rows:
                    problems.append(Problem("MissingBelief", f"no belief given {b}", player=i, type=t))
                    conds = None
                    break
                n, weights = rows[(t, b.members)]
                try:
                    conds.append(make_measure(lifted.space, weights))
                except MeasureError as exc:
                    problems.append(Problem(type(exc).__name__, f"given {b}: {exc}", player=i, type=t, line=n))
                    conds = None
                    break
            if conds is not None:
                beliefs[i][t] = CPS(lifted, tuple(conds))
    if problems:
        raise ValidationError(problems, problems[0].line)
    try:
        return TypeStructure(s_space, families, types, beliefs, metadata)
    except ValidationError as exc:
        # point at the belief line of the first located problem
        for p in exc.problems:
            if p.player is not None and p.type is not None:
                for (t, _), (n, _) in raw_beliefs[p.player].items():
                    if t == p.type:
                        exc.line = n
                        break
                break
        raise


def _fmt_event(e: Event) -> str:
    return "{" + " ".join(atom_str(a) for a in e) + "}"


def _fmt_weights(m: FiniteMeasure) -> str:
    parts = []
    for a, w in m.items():
        if w == 0:
            continue
        if isinstance(a, tuple):
            parts.append(f"({a[0]},{a[1]})={format_rational(w)}")
        else:
            parts.append(f"{a}={format_rational(w)}")
    return " ".join(parts)


def serialize_structure(ts: TypeStructure) -> str:
    out = [HEADER, "S: " + " ".join(ts.s_space.atoms)]
    if ts.metadata:
        out.append("meta: " + " ".join(f"{k}={v}" for k, v in ts.metadata.items()))
    for i in PLAYERS:
        out.append(f"player {i}")
        out.append("B: " + " ".join(_fmt_event(b) for b in ts.families[i].events))
        out.append("T: " + " ".join(ts.types[i].atoms))
        for t in ts.types[i].atoms:
            c = ts.beliefs[i][t]
            for b, m in zip(ts.families[i].events, c.conditionals):
                out.append(f"belief {t} | {_fmt_event(b)}: {_fmt_weights(m)}")
    return "\n".join(out) + "\n"


def parse_cps(text: str) -> CPS:
    """Parse a standalone CPS file (header ``cps v1``).

    The measures are checked for non-negativity and normalization; the
    certainty and chain-rule conditions are left to :func:`validate_cps`
    so that a caller can report them.
    """
    lines = list(_lines(text))
    if not lines or lines[0][1] != CPS_HEADER:
        raise StructureSyntaxError(f"first line must be {CPS_HEADER!r}", lines[0][0] if lines else 1)
    space = None
    family = None
    rows: dict = {}
    for n, line in lines[1:]:
        if (body := _split_key(line, "X")) is not None:
            space = FiniteSpace.of(_labels(body, n, "X"))
            continue
        if (body := _split_key(line, "B")) is not None:
            if space is None:
                raise StructureSyntaxError("X must be declared before B", n)
            problems: list = []
            family = _make_family(space, _events(body, space, n), n, problems)
            if problems:
                raise ValidationError(problems, n)
            continue
        m = _GIVEN_RE.match(line)
        if m:
            if family is None:
                raise StructureSyntaxError("B must be declared before conditionals", n)
            members = _event_members(m.group(1)[1:-1], space, n)
            leftover = _ATOM_W_RE.sub("", m.group(2)).strip()
            if leftover:
                raise StructureSyntaxError(f"cannot read entries: {leftover!r}", n)
            weights = {}
            for a, w in _ATOM_W_RE.findall(m.group(2)):
                if a not in space:
                    raise StructureSyntaxError(f"unknown atom {a!r}", n)
                weights[a] = _rational(w, n)
            rows[members] = (n, weights)
            continue
        raise StructureSyntaxError(f"unrecognized line: {line!r}", n)
    if family is None:
        raise StructureSyntaxError("missing X or B declaration", None)
    conds = []
    for b in family.events:
        if b.members not in rows:
            raise ValidationError([Problem("MissingConditional", f"no conditional given {b}")])
        n, weights = rows[b.members]
        try:
            conds.append(make_measure(space, weights))
        except MeasureError as exc:
            raise ValidationError([Problem(type(exc).__name__, f"given {b}: {exc}", line=n)], n) from None
    return CPS(family, tuple(conds))


def serialize_cps(c: CPS) -> str:
    out = [CPS_HEADER, "X: " + " ".join(atom_str(a) for a in c.space.atoms)]
    out.append("B: " + " ".join(_fmt_event(b) for b in c.family.events))
    for b, m in c.items():
        out.append(f"given {_fmt_event(b)}: {_fmt_weights(m)}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# completeness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CompletenessStatus:
    """``complete`` or the first player whose belief map misses ``witness``."""

    complete: bool
    player: int | None = None
    witness: CPS | None = None

    def __str__(self) -> str:
        if self.complete:
            return "Complete"
        return f"Incomplete(player {self.player}, witness {self.witness})"


def codomain_is_singleton(ts: TypeStructure, i: int) -> bool:
    """True iff exactly one CPS exists on ``S x T_j`` for ``B_i``.

    That happens exactly when every cylinder ``B x T_j`` is a single atom:
    a conditional on a one-atom event is forced, and any event with two
    atoms already carries a continuum of measures.
    """
    return all(len(e) == 1 for e in ts.lifted[i].events)


def incompleteness_witness(ts: TypeStructure, i: int) -> CPS | None:
    """A valid CPS outside ``beta_i(T_i)``, or ``None`` if the codomain is a singleton."""
    lifted = ts.lifted[i]
    big = next((e for e in lifted.events if len(e) >= 2), None)
    if big is None:
        return None
    a = next(iter(big))
    seen = {ts.beliefs[i][t][big] for t in ts.types[i].atoms}
    size = len(lifted.space)
    for k in range(1, len(seen) + 2):
        prior = FiniteMeasure(
            lifted.space,
            tuple(Fraction(k if x == a else 1, size + k - 1) for x in lifted.space.atoms),
        )
        cand = cps_from_prior(prior, lifted)
        if cand[big] not in seen:
            return cand
    raise AssertionError("unreachable: distinct k give distinct conditionals")


def completeness_status(ts: TypeStructure) -> CompletenessStatus:
    for i in PLAYERS:
        w = incompleteness_witness(ts, i)
        if w is not None:
            return CompletenessStatus(False, i, w)
    return CompletenessStatus(True)


# ---------------------------------------------------------------------------
# cross-structure operations
# ---------------------------------------------------------------------------


def check_same_base(a: TypeStructure, b: TypeStructure) -> None:
    if a.s_space != b.s_space:
        raise BaseMismatch("S", a.s_space, b.s_space)
    for i in PLAYERS:
        if not a.families[i].same_events(b.families[i]):
            fa = " ".join(_fmt_event(e) for e in a.families[i].events)
            fb = " ".join(_fmt_event(e) for e in b.families[i].events)
            raise BaseMismatch(f"B_{i}", fa, fb)


@dataclass
class Union:
    structure: TypeStructure
    embed_a: dict = field(default_factory=dict)
    embed_b: dict = field(default_factory=dict)


def _extend(c: CPS, tag: Mapping[str, str], target: CylinderFamily) -> CPS:
    return pushforward_cps(c, lambda st: (st[0], tag[st[1]]), target)


def disjoint_union(a: TypeStructure, b: TypeStructure, tags=("a", "b")) -> Union:
    """Union structure on tagged types ``a:t`` / ``b:t``.

    Beliefs are carried over by pushforward along the embeddings, which
    puts zero mass on the other structure's types.
    """
    check_same_base(a, b)
    ta, tb = tags
    embed_a = {i: {t: f"{ta}:{t}" for t in a.types[i].atoms} for i in PLAYERS}
    embed_b = {i: {t: f"{tb}:{t}" for t in b.types[i].atoms} for i in PLAYERS}
    types = {
        i: FiniteSpace(tuple(embed_a[i].values()) + tuple(embed_b[i].values())) for i in PLAYERS
    }
    families = {i: a.families[i] for i in PLAYERS}
    lifted = {i: lift_family(families[i], types[other(i)]) for i in PLAYERS}
    beliefs = {}
    for i in PLAYERS:
        j = other(i)
        beliefs[i] = {}
        for src, emb in ((a, embed_a), (b, embed_b)):
            for t in src.types[i].atoms:
                beliefs[i][emb[i][t]] = _extend(src.beliefs[i][t], emb[j], lifted[i])
    ts = TypeStructure(a.s_space, families, types, beliefs)
    return Union(ts, embed_a, embed_b)


@dataclass(frozen=True)
class MorphismCandidate:
    """Per-player type maps ``phi_i`` from a source to a target structure."""

    maps: dict

    def __getitem__(self, i: int) -> dict:
        return self.maps[i]

    @classmethod
    def identity(cls, ts: TypeStructure) -> "MorphismCandidate":
        return cls({i: {t: t for t in ts.types[i].atoms} for i in PLAYERS})


@dataclass(frozen=True)
class MorphismWitness:
    player: int
    type: str
    condition: Event
    event: Event
    got: Fraction
    expected: Fraction

    def __str__(self) -> str:
        return (
            f"player {self.player}, type {self.type}, given {self.condition}: "
            f"image assigns {format_rational(self.got)} to {self.event}, "
            f"target belief assigns {format_rational(self.expected)}"
        )


@dataclass(frozen=True)
class MorphismResult:
    preserving: bool
    witness: MorphismWitness | None = None

    def __str__(self) -> str:
        return "Preserving" if self.preserving else f"Broken({self.witness})"


def _check_candidate(src: TypeStructure, dst: TypeStructure, phi: MorphismCandidate) -> None:
    for i in PLAYERS:
        mp = phi.maps.get(i, {})
        for t in src.types[i].atoms:
            if t not in mp:
                raise InvalidMorphism(f"player {i} type {t} has no image")
            if mp[t] not in dst.types[i]:
                raise InvalidMorphism(f"player {i} type {t} maps to unknown target type {mp[t]}")
        extra = set(mp) - set(src.types[i].atoms)
        if extra:
            raise InvalidMorphism(f"player {i} map has unknown source types {sorted(extra)}")


def verify_type_morphism(src: TypeStructure, dst: TypeStructure, phi: MorphismCandidate) -> MorphismResult:
    """Check ``beta_dst(phi_i(t)) == pushforward of beta_src(t) along (Id_S, phi_j)``."""
    check_same_base(src, dst)
    _check_candidate(src, dst, phi)
    for i in PLAYERS:
        j = other(i)
        phi_j = phi[j]
        for t in src.types[i].atoms:
            image = _extend(src.beliefs[i][t], phi_j, dst.lifted[i])
            expected = dst.beliefs[i][phi[i][t]]
            if image == expected:
                continue
            for b, got_m in image.items():
                exp_m = expected[b]
                for x, w in got_m.items():
                    if w != exp_m[x]:
                        base = dst.lifted[i].base.events[dst.lifted[i].index(b)]
                        return MorphismResult(
                            False,
                            MorphismWitness(i, t, base, dst.lifted[i].space.event({x}), w, exp_m[x]),
                        )
    return MorphismResult(True)
