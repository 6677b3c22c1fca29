import io
import json
from pathlib import Path

import pytest

from cpshier.cli import main
from cpshier.hierarchy import definitions_count

DATA = Path(__file__).parent / "data"


def run(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out=out)
    return code, out.getvalue()


def d(name):
    return DATA / name


@pytest.fixture(autouse=True)
def no_color(monkeypatch):
    monkeypatch.setenv("CPS_HIER_COLOR", "never")


class TestValidate:
    def test_ok(self):
        code, text = run("validate", d("split.txt"))
        assert code == 0
        assert text.splitlines()[0] == "OK"
        assert "completeness: incomplete (player 1)" in text

    def test_degenerate_complete(self):
        assert run("validate", d("degenerate.txt")) == (0, "OK\ncompleteness: complete\n")

    def test_chain_violation_names_everything(self):
        code, text = run("validate", d("chain_violation.txt"))
        assert code == 1
        assert text.startswith("INVALID")
        line = text.splitlines()[1]
        assert "player 1, type u" in line
        assert "A={(a,v)}" in line and "B={(a,v),(b,v)}" in line and "C={(a,v),(b,v),(c,v)}" in line

    def test_json(self):
        code, text = run("validate", d("chain_violation.txt"), "--format", "json")
        payload = json.loads(text)
        assert code == 1 and payload["valid"] is False
        assert {(p["player"], p["type"]) for p in payload["problems"]} == {(1, "u")}

    def test_missing_file(self, capsys):
        assert run("validate", d("nope.txt"))[0] == 2
        assert "cannot read" in capsys.readouterr().err

    def test_syntax_error_is_usage(self, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("cps-hier v9\n")
        assert run("validate", bad)[0] == 2

    def test_standalone_cps(self, tmp_path):
        f = tmp_path / "c.txt"
        f.write_text("cps v1\nX: a b c\nB: {a b c} {a b}\ngiven {a b c}: a=1/3 b=1/3 c=1/3\ngiven {a b}: a=1\n")
        code, text = run("validate", f)
        assert code == 1 and "chain_rule" in text
        f.write_text("cps v1\nX: a b c\nB: {a b c} {b c}\ngiven {a b c}: a=1\ngiven {b c}: c=1\n")
        assert run("validate", f) == (0, "OK\n")

    def test_no_subcommand(self):
        assert run()[0] == 2


class TestUnfold:
    def test_point_mass(self, tmp_path):
        src = tmp_path / "pm.txt"
        src.write_text(
            "cps-hier v1\nS: L R\nplayer 1\nB: {L R}\nT: u\nbelief u | {L R}: (L,v)=1\n"
            "player 2\nB: {L R}\nT: v\nbelief v | {L R}: (R,u)=1\n"
        )
        dest = tmp_path / "h.txt"
        code, text = run("unfold", src, "--player", 1, "--type", "u", "--order", 1, "--out", dest)
        assert code == 0 and text == ""
        assert "given {L R}: L=1\n" in dest.read_text()

    def test_duplicate_collapses(self):
        code, text = run("unfold", d("duplicate.txt"), "--player", 1, "--type", "u1", "--order", 3)
        assert code == 0
        # root plus three shared points, one per (player, order) below it
        assert definitions_count(text) == 4
        assert ",v1)" not in text and ",v2)" not in text

    def test_order_zero(self, capsys):
        code, text = run("unfold", d("split.txt"), "--player", 1, "--type", "u1", "--order", 0)
        assert code == 1
        assert "usage" in capsys.readouterr().err

    def test_unknown_type(self):
        assert run("unfold", d("split.txt"), "--player", 1, "--type", "zz", "--order", 2)[0] == 1


class TestPartitionCompare:
    def test_partition_orders(self):
        _, one = run("partition", d("split.txt"), "--order", 1, "--format", "json")
        _, two = run("partition", d("split.txt"), "--order", 2, "--format", "json")
        cells = lambda text: {(r["type"], r["cell"]) for r in json.loads(text)["records"] if r["player"] == 1}
        assert cells(one) == {("u1", 0), ("u2", 0)}
        assert cells(two) == {("u1", 0), ("u2", 1)}

    def test_partition_fixpoint_table(self):
        code, text = run("partition", d("split.txt"))
        assert code == 0 and text.startswith("partition at fixpoint (depth 2)")

    def test_compare_quotient_duplicate(self):
        code, text = run("compare", d("quotient.txt"), d("duplicate.txt"), "--format", "json")
        assert code == 0
        recs = json.loads(text)["records"]
        for i in (1, 2):
            assert len({r["cell"] for r in recs if r["player"] == i}) == 1

    def test_compare_base_mismatch(self):
        code, text = run("compare", d("quotient.txt"), d("other_base.txt"))
        assert code == 1 and text.startswith("base mismatch in S")


class TestTerminal:
    def test_self(self):
        code, text = run("terminal", d("split.txt"), d("split.txt"))
        assert code == 0 and text.rstrip().endswith("ALL MATCHED")

    def test_marginal_mismatch(self):
        code, text = run("terminal", d("quotient.txt"), d("marginal_probe.txt"), "--order", 1)
        assert code == 1
        assert [ln for ln in text.splitlines() if "Unmatched" in ln] == ["1       w           Unmatched at order 1"]

    def test_base_diff(self):
        code, text = run("terminal", d("quotient.txt"), d("other_base.txt"))
        assert code == 1
        assert text == "base mismatch in S\n  target: {L R}\n  probe: {L M}\n"

    def test_json(self):
        code, text = run("terminal", d("order2_target.txt"), d("order2_probe.txt"), "--format", "json")
        payload = json.loads(text)
        assert code == 1 and payload["all_matched"] is False
        assert {r["type"]: r["failed_order"] for r in payload["records"]} == {"w": 2, "z1": 3, "z2": 3}


class TestMorphism:
    def test_collapse(self):
        assert run("morphism", d("duplicate.txt"), d("quotient.txt"), d("duplicate.map")) == (0, "Preserving\n")

    def test_broken(self, tmp_path):
        m = tmp_path / "m.map"
        m.write_text("1 w u\n2 z v\n")
        code, text = run("morphism", d("marginal_probe.txt"), d("quotient.txt"), m, "--format", "json")
        payload = json.loads(text)
        assert code == 1 and payload["witness"]["player"] == 1

    def test_bad_map_syntax(self, tmp_path):
        m = tmp_path / "m.map"
        m.write_text("1 u1\n")
        assert run("morphism", d("duplicate.txt"), d("quotient.txt"), m)[0] == 2


def test_color_always(monkeypatch):
    monkeypatch.setenv("CPS_HIER_COLOR", "always")
    _, text = run("validate", d("split.txt"))
    assert text.startswith("\x1b[32mOK")
