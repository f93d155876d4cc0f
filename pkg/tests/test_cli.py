import re
import subprocess
import sys
from contextlib import contextmanager
from pathlib import Path

import pydot
import pytest

from ifspec.cli import main
from ifspec.model import validate
from ifspec.refsuts import alarm_model, truck_model
from ifspec.suites import read_suite
from ifspec.text import parse_file, serialize
from oracles import isomorphic, legal_edges, walk

ALARM = str(Path(__file__).resolve().parent.parent / "src" / "ifspec" / "fixtures" / "alarm.ifm")


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@contextmanager
def sut_process(*args):
    proc = subprocess.Popen([sys.executable, "-m", "ifspec", "sut", *args, "--listen", "0"],
                            stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    try:
        line = proc.stdout.readline()
        m = re.fullmatch(r"listening on (\S+):(\d+)\n", line)
        assert m, (line, proc.stderr.read() if proc.poll() is not None else "")
        yield f"tcp://{m.group(1)}:{m.group(2)}"
    finally:
        proc.terminate()
        proc.wait(timeout=10)
        proc.stdout.close()
        proc.stderr.close()


@pytest.fixture
def shortcfg(tmp_path):
    path = tmp_path / "short.cfg"
    path.write_text("[gen]\nstrategy = shorttests\nmax_len = 10\n")
    return path


class TestValidate:
    def test_ok(self, capsys):
        code, out, _ = run(capsys, "validate", ALARM)
        assert code == 0
        assert out.strip().endswith("ok (0 errors, 0 warnings)")

    def test_incomplete(self, capsys, tmp_path):
        text = Path(ALARM).read_text().replace(" on triggered illegal; }\n}", " }\n}")
        bad = tmp_path / "bad.ifm"
        bad.write_text(text)
        code, out, _ = run(capsys, "validate", bad)
        assert code == 1
        assert out.splitlines()[0].startswith("error incomplete Triggered,triggered: ")

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "validate", tmp_path / "nope.ifm")
        assert code == 2
        assert "nope.ifm" in err

    def test_syntax_error(self, capsys, tmp_path):
        bad = tmp_path / "bad.ifm"
        bad.write_text("interface {")
        code, _, err = run(capsys, "validate", bad)
        assert code == 2
        assert "1:11: syntax" in err

    def test_builtin(self, capsys):
        assert run(capsys, "validate", "builtin:terminal")[0] == 0
        assert run(capsys, "validate", "builtin:nothing")[0] == 2

    def test_quiet(self, capsys):
        assert run(capsys, "validate", ALARM, "--quiet") == (0, "", "")

    def test_no_command(self, capsys):
        with pytest.raises(SystemExit) as info:
            main([])
        assert info.value.code == 2


class TestDot:
    def test_nodes(self, capsys):
        code, out, _ = run(capsys, "dot", ALARM)
        assert code == 0
        (g,) = pydot.graph_from_dot_data(out)
        nodes = [n for n in g.get_nodes() if n.get_name() not in ("node", "edge", "graph")]
        assert len(nodes) == 3
        assert len(g.get_edges()) == len(legal_edges(alarm_model()))

    def test_illegal_sink(self, capsys, tmp_path):
        out_file = tmp_path / "a.dot"
        assert run(capsys, "dot", ALARM, "--illegal", "--out", out_file)[0] == 0
        assert '"!ILLEGAL"' in out_file.read_text()

    def test_invalid_model(self, capsys, tmp_path):
        bad = tmp_path / "bad.ifm"
        bad.write_text(Path(ALARM).read_text().replace("-> Triggered", "-> Nowhere"))
        code, _, err = run(capsys, "dot", bad)
        assert code == 2
        assert "unresolved" in err


class TestGen:
    def test_shorttests(self, capsys, tmp_path, shortcfg):
        suite_file = tmp_path / "a.suite"
        code, out, _ = run(capsys, "gen", ALARM, shortcfg, "--out", suite_file)
        assert code == 0
        text = suite_file.read_text()
        assert text.splitlines()[-1] == "# 2 cases, 5 steps, coverage 4/4 (100.0%)"
        assert "coverage 4/4 (100.0%)" in out
        suite = read_suite(suite_file)
        covered = set()
        for case in suite.cases:
            covered.update(walk(alarm_model(), case))
        assert covered == legal_edges(alarm_model())

    def test_random_is_reproducible(self, capsys, tmp_path):
        cfg = tmp_path / "r.cfg"
        cfg.write_text("[gen]\nstrategy = random\nn_cases = 6\nmax_len = 9\nseed = 4\n")
        a, b, c = tmp_path / "a.suite", tmp_path / "b.suite", tmp_path / "c.suite"
        assert run(capsys, "gen", ALARM, cfg, "--out", a)[0] == 0
        assert run(capsys, "gen", ALARM, cfg, "--out", b)[0] == 0
        assert a.read_bytes() == b.read_bytes()
        assert run(capsys, "gen", ALARM, cfg, "--out", c, "--seed", "5")[0] == 0
        assert c.read_bytes() != a.read_bytes()
        assert read_suite(c).seed == 5

    def test_unsatisfiable(self, capsys, tmp_path):
        cfg = tmp_path / "u.cfg"
        cfg.write_text("[gen]\nstrategy = shorttests\nmax_len = 1\n")
        code, _, err = run(capsys, "gen", ALARM, cfg, "--out", tmp_path / "x.suite")
        assert code == 1
        assert "unsatisfiable" in err and "Activated -deactivate-> Deactivated" in err

    def test_filter(self, capsys, tmp_path):
        cfg = tmp_path / "f.cfg"
        cfg.write_text("[gen]\nstrategy = shorttests\n[filter]\nmust_include = triggered\n")
        out = tmp_path / "f.suite"
        assert run(capsys, "gen", ALARM, cfg, "--out", out)[0] == 0
        assert [c.id for c in read_suite(out).cases] == [1]

    def test_filter_warning(self, capsys, tmp_path):
        cfg = tmp_path / "f.cfg"
        cfg.write_text("[gen]\nstrategy = shorttests\n[filter]\nmust_include = nothing\n")
        code, _, err = run(capsys, "gen", ALARM, cfg, "--out", tmp_path / "f.suite")
        assert code == 0
        assert "empty-result" in err

    def test_bad_config(self, capsys, tmp_path):
        cfg = tmp_path / "b.cfg"
        cfg.write_text("[gen]\nstrategy = fastest\n")
        assert run(capsys, "gen", ALARM, cfg, "--out", tmp_path / "x.suite")[0] == 2
        assert run(capsys, "gen", ALARM, tmp_path / "none.cfg", "--out", tmp_path / "x")[0] == 2

    def test_state_budget(self, capsys, tmp_path):
        cfg = tmp_path / "b.cfg"
        cfg.write_text("[gen]\nmax_states = 50\n")
        code, _, err = run(capsys, "gen", "builtin:terminal", cfg, "--out", tmp_path / "x.suite")
        assert code == 1
        assert "state-budget-exceeded" in err

    def test_missing_domain(self, capsys, tmp_path, shortcfg):
        model = tmp_path / "p.ifm"
        model.write_text("interface P { initial S; in set(v:int); reply ok;\n"
                         "  state S { on set -> S reply ok; } }\n")
        assert run(capsys, "gen", model, shortcfg, "--out", tmp_path / "x.suite")[0] == 2
        cfg = tmp_path / "d.cfg"
        cfg.write_text("[gen]\nstrategy = shorttests\n[domains]\nset.v = 1, 2, 3\n")
        out = tmp_path / "d.suite"
        assert run(capsys, "gen", model, cfg, "--out", out)[0] == 0
        assert "step CALL set(3) EXPECT REPLY ok" in out.read_text()


class TestCompose:
    def test_unit(self, capsys, tmp_path):
        unit = tmp_path / "unit.ifm"
        unit.write_text("interface Unit {\n  initial U;\n  state U { }\n}\n")
        out = tmp_path / "p.ifm"
        code, _, _ = run(capsys, "compose", ALARM, unit, "--out", out)
        assert code == 0
        assert isomorphic(parse_file(out), alarm_model())

    def test_two_models(self, capsys, tmp_path):
        truck = tmp_path / "truck.ifm"
        truck.write_text(serialize(truck_model()))
        code, out, _ = run(capsys, "compose", "builtin:terminal", truck, "--name", "Site")
        assert code == 0
        product = parse_file_text(tmp_path, out)
        assert product.name == "Site"
        assert validate(product).ok
        assert run(capsys, "validate", tmp_path / "p.ifm")[0] == 0

    def test_signature_mismatch(self, capsys, tmp_path):
        other = tmp_path / "o.ifm"
        other.write_text("interface O { initial S; in activate(x:int); reply ok;\n"
                         "  state S { on activate -> S reply ok; } }\n")
        code, _, err = run(capsys, "compose", ALARM, other)
        assert code == 2
        assert "signature-mismatch" in err

    def test_needs_two(self, capsys):
        assert run(capsys, "compose", ALARM)[0] == 2


def parse_file_text(tmp_path, text):
    path = tmp_path / "p.ifm"
    path.write_text(text)
    return parse_file(path)


class TestRun:
    def gen(self, capsys, tmp_path, model, cfg):
        out = tmp_path / "s.suite"
        assert run(capsys, "gen", model, cfg, "--out", out)[0] == 0
        return out

    def test_correct_sut(self, capsys, tmp_path, shortcfg):
        suite = self.gen(capsys, tmp_path, ALARM, shortcfg)
        report = tmp_path / "r.txt"
        with sut_process("alarm") as ep:
            code, out, _ = run(capsys, "run", suite, "--endpoint", ep, "--report", report,
                               "--model", ALARM, "--parallel", "2")
        assert code == 0
        assert "2 passed, 0 failed, 0 inconclusive" in out
        text = report.read_text()
        assert "pass=2\n" in text and "fail=0\n" in text
        assert "transitions_covered=4\n" in text

    def test_mutant(self, capsys, tmp_path, shortcfg):
        suite = self.gen(capsys, tmp_path, ALARM, shortcfg)
        with sut_process("alarm", "--mutant", "M1") as ep:
            code, out, _ = run(capsys, "run", suite, "--endpoint", ep)
        assert code == 1
        assert "test 1: fail at step 2 (CALL triggered): expected NOTIFY NI_Triggered, got none" \
            in out

    def test_stdio(self, capsys, tmp_path, shortcfg):
        suite = self.gen(capsys, tmp_path, ALARM, shortcfg)
        ep = f"stdio:{sys.executable} -m ifspec sut alarm --stdio"
        assert run(capsys, "run", suite, "--endpoint", ep, "--quiet")[0] == 0

    def test_bad_endpoint(self, capsys, tmp_path, shortcfg):
        suite = self.gen(capsys, tmp_path, ALARM, shortcfg)
        code, _, err = run(capsys, "run", suite, "--endpoint", "tcp://127.0.0.1:1",
                           "--timeout-ms", "200")
        assert code == 2
        assert "endpoint-unreachable" in err
        assert run(capsys, "run", suite, "--endpoint", "nowhere")[0] == 2

    def test_bad_suite(self, capsys, tmp_path):
        bad = tmp_path / "bad.suite"
        bad.write_text("not a suite\n")
        assert run(capsys, "run", bad, "--endpoint", "tcp://127.0.0.1:1")[0] == 2

    def test_bad_parallel(self, capsys, tmp_path):
        with pytest.raises(SystemExit) as info:
            main(["run", "x.suite", "--endpoint", "h:1", "--parallel", "0"])
        assert info.value.code == 2

    def test_terminal_longtests(self, capsys, tmp_path):
        cfg = tmp_path / "l.cfg"
        cfg.write_text("[gen]\nstrategy = longtests\n")
        suite = self.gen(capsys, tmp_path, "builtin:terminal", cfg)
        with sut_process("terminal") as ep:
            assert run(capsys, "run", suite, "--endpoint", ep)[0] == 0
        with sut_process("terminal", "--mutant", "M4") as ep:
            assert run(capsys, "run", suite, "--endpoint", ep)[0] == 1


class TestSut:
    def test_unknown_mutant(self, capsys):
        code, _, err = run(capsys, "sut", "alarm", "--mutant", "M42", "--stdio")
        assert code == 2
        assert "M42" in err

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "ifspec", "sut", "alarm", "--stdio"],
                              input="RESET\nCALL activate\nCALL activate\n", capture_output=True,
                              text=True, timeout=30)
        assert proc.returncode == 0
        assert proc.stdout == "READY\nREPLY ok\nREPLY __ILLEGAL__\n"
