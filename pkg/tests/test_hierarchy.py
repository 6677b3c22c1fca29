import random
import threading
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from cpshier.cps import lift_family, make_cps
from cpshier.errors import NonPositiveOrder, UnknownType
from cpshier.hierarchy import (
    Interner,
    Unfolder,
    check_coherence,
    definitions_count,
    finitely_terminal_at,
    refine,
    refine_to_fixpoint,
    serialize_point,
    terminal_over,
    unfold,
    unfold_classes,
)
from cpshier.measure import FiniteSpace
from cpshier.structure import PLAYERS, TypeStructure, disjoint_union, parse_structure

import corpus

F = Fraction
DATA = Path(__file__).parent / "data"


def load(name):
    return parse_structure((DATA / name).read_text())


class TestUnfold:
    def test_point_mass_marginal(self):
        ts = TypeStructure.build(
            ["L", "R"], {1: [["L", "R"]], 2: [["L", "R"]]}, {1: ["u"], 2: ["v"]},
            {1: {"u": [{("L", "v"): 1}]}, 2: {"v": [{("R", "u"): 1}]}},
        )
        hp = unfold(ts, 1, "u", 1)
        assert hp.order == 1
        assert hp.levels[0].conditionals[0].as_dict(nonzero=True) == {"L": 1}

    def test_duplicate_co_types_collapse(self):
        ts = load("duplicate.txt")
        assert unfold(ts, 2, "v1", 1) is unfold(ts, 2, "v2", 1)
        hp = unfold(ts, 1, "u1", 2)
        support = hp.levels[1].family.y_space.atoms
        assert len(support) == 1
        # (L,v1)=1/3, (R,v1)=1/3, (R,v2)=1/3 collapse to L:1/3, R:2/3 on one point
        m = hp.levels[1].conditionals[0]
        assert sorted((s, w) for (s, _), w in m.items()) == [("L", F(1, 3)), ("R", F(2, 3))]

    def test_prefix(self):
        ts = load("split.txt")
        for i in PLAYERS:
            for t in ts.types[i].atoms:
                deep = unfold(ts, i, t, 4)
                for n in range(1, 4):
                    assert deep.truncate(n) is unfold(ts, i, t, n)
                    assert deep.levels[:n] == unfold(ts, i, t, n).levels

    def test_errors(self):
        ts = load("split.txt")
        with pytest.raises(UnknownType):
            unfold(ts, 1, "nope", 1)
        with pytest.raises(NonPositiveOrder):
            unfold(ts, 1, "u1", 0)

    def test_matches_naive_oracle(self):
        ts = load("split.txt")
        naive = corpus.naive_hierarchies(ts, 3)
        for n in (1, 2, 3):
            for i in PLAYERS:
                got = corpus.classes_by({t: unfold(ts, i, t, n) for t in ts.types[i].atoms})
                assert got == corpus.classes_by(naive[n][i])

    def test_serialization_deterministic_and_collapsed(self):
        ts = load("duplicate.txt")
        text = serialize_point(unfold(ts, 1, "u1", 3))
        # a fresh interner builds the same text
        again = serialize_point(Unfolder(ts, Interner()).at(1, "u1", 3))
        assert text == again
        # root, one order-2 co-player point, one order-1 point of each player
        assert definitions_count(text) == 4


class TestCoherence:
    def test_unfold_outputs_coherent(self):
        ts = load("split.txt")
        for i in PLAYERS:
            for t in ts.types[i].atoms:
                assert check_coherence(unfold(ts, i, t, 4)).ok

    def test_order_one_vacuous(self):
        assert check_coherence(unfold(load("split.txt"), 1, "u1", 1)).ok

    def test_hand_built_violation(self):
        ts = load("order2_target.txt")
        good = unfold(ts, 1, "u", 2)
        q = good.levels[1].family.y_space.atoms[0]
        fam = lift_family(ts.families[1], FiniteSpace((q,)))
        # S-marginal L:1 instead of L:1/2, R:1/2
        bad_level = make_cps(fam, [{("L", q): 1}])
        bad = Interner().point(1, [good.levels[0], bad_level])
        report = check_coherence(bad)
        assert not report.ok
        assert {v.level for v in report} == {2}
        assert {v.event for v in report} == {"{L}", "{R}"}


class TestRefine:
    def test_order_zero(self):
        p = refine(load("split.txt"), 0)
        assert all(len(p.cells[i]) == 1 for i in PLAYERS)

    def test_split_example(self):
        ts = load("split.txt")
        assert refine(ts, 1).same_cell(1, "u1", "u2")
        assert not refine(ts, 2).same_cell(1, "u1", "u2")

    def test_duplicates_share_cells(self):
        ts = load("duplicate.txt")
        for n in range(0, 6):
            p = refine(ts, n)
            assert p.same_cell(1, "u1", "u2") and p.same_cell(2, "v1", "v2")

    def test_fixpoint_single_types(self):
        p, depth = refine_to_fixpoint(load("quotient.txt"))
        assert depth == 0
        assert p.cells == {1: (("u",),), 2: (("v",),)}

    def test_fixpoint_split_depth(self):
        ts = load("split.txt")
        p, depth = refine_to_fixpoint(ts)
        assert depth == 2
        assert refine(ts, depth + 5) == p

    def test_cells_sorted(self):
        p = refine(load("split.txt"), 3)
        for i in PLAYERS:
            firsts = [c[0] for c in p.cells[i]]
            assert firsts == sorted(firsts)


class TestTerminality:
    def test_self(self):
        ts = load("split.txt")
        for n in range(0, 4):
            rep = finitely_terminal_at(ts, ts, n)
            assert rep.all_matched
        rep = terminal_over(ts, ts)
        assert rep.all_matched
        assert all(r.type in r.matches for r in rep.rows)

    def test_duplicate_probe(self):
        target, probe = load("quotient.txt"), load("duplicate.txt")
        for n in range(0, 5):
            assert finitely_terminal_at(target, probe, n).all_matched
        rep = terminal_over(target, probe)
        assert rep.all_matched
        assert {r.matches for r in rep.rows} == {("u",), ("v",)}

    def test_marginal_mismatch(self):
        rep = finitely_terminal_at(load("quotient.txt"), load("marginal_probe.txt"), 1)
        bad = rep.unmatched()
        assert [(r.player, r.type, r.failed_order) for r in bad] == [(1, "w", 1)]

    def test_order_two_mismatch(self):
        target, probe = load("order2_target.txt"), load("order2_probe.txt")
        assert finitely_terminal_at(target, probe, 1).all_matched
        rep = terminal_over(target, probe)
        failed = {(r.player, r.type): r.failed_order for r in rep.rows}
        assert failed == {(1, "w"): 2, (2, "z1"): 3, (2, "z2"): 3}

    def test_rows_cover_probe_once(self):
        target, probe = load("split.txt"), load("duplicate.txt")
        rep = terminal_over(target, probe)
        assert sorted((r.player, r.type) for r in rep.rows) == sorted(
            (i, t) for i in PLAYERS for t in probe.types[i].atoms
        )


# properties --------------------------------------------------------------------

seeds = st.integers(0, 10**9)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_refine_matches_unfold_and_naive(seed):
    ts = corpus.random_structure(random.Random(seed))
    naive = corpus.naive_hierarchies(ts, 3)
    for n in (1, 2, 3):
        p, q = refine(ts, n), unfold_classes(ts, n)
        for i in PLAYERS:
            assert corpus.partition_sets(p, i) == corpus.partition_sets(q, i)
            assert corpus.partition_sets(p, i) == corpus.classes_by(naive[n][i])


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_monotone_and_bounded(seed):
    ts = corpus.random_structure(random.Random(seed))
    p, depth = refine_to_fixpoint(ts)
    assert depth <= len(ts.types[1]) + len(ts.types[2]) - 1
    for n in range(depth + 2):
        assert refine(ts, n + 1).refines(refine(ts, n))


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_morphism_soundness(seed):
    rng = random.Random(seed)
    q = corpus.random_structure(rng)
    d, phi = corpus.expand_duplicates(rng, q)
    for n in (1, 2, 3):
        for i in PLAYERS:
            for t in d.types[i].atoms:
                assert unfold(d, i, t, n) is unfold(q, i, phi[i][t], n)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_union_neutral(seed):
    rng = random.Random(seed)
    a = corpus.random_structure(rng)
    b = corpus.random_structure(rng)
    b = TypeStructure(a.s_space, a.families, b.types, {
        i: {t: corpus.lexicographic_cps(rng, lift_family(a.families[i], b.types[3 - i])) for t in b.types[i].atoms}
        for i in PLAYERS
    })
    u = disjoint_union(a, b)
    for n in (1, 2, 3):
        for src, emb in ((a, u.embed_a), (b, u.embed_b)):
            for i in PLAYERS:
                for t in src.types[i].atoms:
                    assert unfold(u.structure, i, emb[i][t], n) is unfold(src, i, t, n)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_terminal_implies_finitely_terminal(seed):
    rng = random.Random(seed)
    q = corpus.random_structure(rng)
    d, _ = corpus.expand_duplicates(rng, q)
    for target, probe in ((q, d), (d, q), (q, q)):
        rep = terminal_over(target, probe)
        if rep.all_matched:
            for n in range(rep.depth + 3):
                assert finitely_terminal_at(target, probe, n).all_matched


def test_interner_single_winner():
    ts = load("split.txt")
    interner = Interner()
    results = []

    def work():
        results.append(Unfolder(ts, interner).at(1, "u2", 3))

    threads = [threading.Thread(target=work) for _ in range(8)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    assert len({id(r) for r in results}) == 1


def test_points_from_different_state_spaces_stay_apart():
    # identical level text "given {L}: L=1" over different S must not share a point
    small = TypeStructure.build(
        ["L"], {1: [["L"]], 2: [["L"]]}, {1: ["u"], 2: ["v"]},
        {1: {"u": [{("L", "v"): 1}]}, 2: {"v": [{("L", "u"): 1}]}},
    )
    big = TypeStructure.build(
        ["L", "R"], {1: [["L"]], 2: [["L"]]}, {1: ["u"], 2: ["v"]},
        {1: {"u": [{("L", "v"): 1}]}, 2: {"v": [{("L", "u"): 1}]}},
    )
    interner = Interner()
    a = Unfolder(small, interner).at(1, "u", 3)
    b = Unfolder(big, interner).at(1, "u", 3)
    assert a is not b
    assert b.levels[0].space.atoms == ("L", "R")
    assert check_coherence(b).ok
