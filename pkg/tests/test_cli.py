import json
from argparse import ArgumentTypeError

import pytest

from cliqueopf_core.__main__ import main
from cliqueopf_core.netcase import generate_radial, load_case, save_case, serialize_case
from cliqueopf_core.runner import Mode, RunConfig, solve_centralized
from cliqueopf_utils.helper_functions import coerce_option, positive_int, step_size, valid_delay, valid_sizes
from cliqueopf_utils.opf_commands import OpfCommands
from cliqueopf_utils.report_parser import ReportParser
from cliqueopf_utils.user_input_parser import UserInputParser


@pytest.fixture
def case_file(tmp_path):
    path = tmp_path / "star4.json"
    save_case(generate_radial(4, 1), str(path))
    return path


class TestHelpers:
    @pytest.mark.parametrize("rule,t,expected", [("factorial", 1, 2.0), ("factorial", 3, 2.0 / 6),
                                                 ("harmonic", 4, 0.5), ("sqrt", 4, 1.0), ("constant", 9, 2.0)])
    def test_step_size(self, rule, t, expected):
        assert step_size(2.0, t, rule) == pytest.approx(expected)

    def test_step_size_errors(self):
        with pytest.raises(ValueError, match=">= 1"):
            step_size(1.0, 0)
        with pytest.raises(ValueError, match="not a step schedule"):
            step_size(1.0, 1, "cubic")
        with pytest.raises(ValueError, match="not a step schedule"):
            step_size(1.0, 1, "polyak")

    def test_validators(self):
        assert valid_sizes("10,20, 40") == [10, 20, 40]
        assert valid_delay("2:3") == (1, 3)
        assert positive_int("5") == 5
        for fn, value in [(valid_sizes, "1,3"), (valid_sizes, "a,b"), (valid_delay, "0:1"), (valid_delay, "2"),
                          (positive_int, "0"), (positive_int, "x")]:
            with pytest.raises(ArgumentTypeError):
                fn(value)

    def test_coerce_option(self):
        assert coerce_option("7", 300) == 7
        assert coerce_option("0.5", 1e-3) == 0.5
        assert coerce_option("true", False) is True
        assert coerce_option("off", True) is False
        assert coerce_option("none", None) is None
        assert coerce_option("harmonic", None) == "harmonic"
        assert coerce_option("ring", "star") == "ring"
        assert coerce_option(12, 300) == 12


class TestUserInputParser:
    def setup_method(self):
        self.parser = UserInputParser()

    def test_solve_flags(self):
        parsed = self.parser.parse_input("solve --case c.json --mode distributed-dual --async --delay 2:3 --delay 1:0")
        assert parsed["error"] is False
        args = parsed["input"]
        assert args["command"] == "solve" and args["case"] == "c.json"
        assert args["mode"] == Mode.DISTRIBUTED_DUAL.value
        assert args["async_updates"] is True
        assert args["delay"] == [(1, 3), (0, 0)]

    def test_bad_choice(self):
        parsed = self.parser.parse_input("solve --mode sideways")
        assert parsed["error"] is True and "Invalid input" in parsed["message"]

    def test_polyak_step_rule(self):
        args = self.parser.parse_input("solve --mode cumulative-dual --step-rule polyak --step 0.5")["input"]
        assert args["step_rule"] == "polyak" and args["step"] == 0.5

    def test_multiline(self):
        assert self.parser.parse_input("solve\n--mode centralized")["error"] is True

    def test_missing_command(self):
        parsed = self.parser.parse_input("")
        assert parsed["error"] is True and "No command" in parsed["message"]

    def test_cell_body_holds_the_case(self):
        parsed = self.parser.parse_input("solve --mode centralized", type="cell", cell='{"buses": []}')
        assert parsed["error"] is False
        assert parsed["input"]["case_text"] == '{"buses": []}'

    def test_cell_body_only_for_solve(self):
        parsed = self.parser.parse_input("gen-radial --n 3 --seed 0", type="cell", cell="{}")
        assert parsed["error"] is True and "Only `solve`" in parsed["message"]

    def test_bench_defaults(self):
        args = self.parser.parse_input("bench --sizes 3,4")["input"]
        assert args["sizes"] == [3, 4]
        assert args["seeds_per_size"] == 20
        assert args["mode"] == "cumulative-dual"
        assert args["out"] == "scaling.csv"


class TestOpfCommands:
    def test_handler_needs_command(self):
        with pytest.raises(ValueError, match="no command"):
            OpfCommands()._handler(None)

    def test_solve_needs_a_case(self):
        with pytest.raises(ValueError, match="--case"):
            OpfCommands().solve(mode="centralized")

    def test_config_mapping(self):
        commands = OpfCommands({"cliqueopf_max_iters": [100, ""]})
        config = commands._config(mode="cumulative-dual", tol=0.05, step=0.2, delay=[(0, 2)], workers=3)
        assert isinstance(config, RunConfig)
        assert config.rel_tol == 0.05 and config.initial_step == 0.2
        assert config.delays == {0: 2} and config.max_workers == 3

    def test_solve_case_text(self, line2):
        report = OpfCommands()._handler("solve", case_text=serialize_case(line2), mode="centralized")
        assert report.objective == pytest.approx(solve_centralized(line2).objective)

    def test_gen_radial(self, tmp_path):
        out = tmp_path / "tree.json"
        case = OpfCommands()._handler("gen-radial", n=5, seed=2, out=str(out), tree=True)
        assert load_case(str(out)) == case == generate_radial(5, 2, tree=True)


class TestReportParser:
    def setup_method(self):
        self.parser = ReportParser()

    def test_find_value_by_path(self):
        doc = {"a": [{"b": 1}, {"b": 2}], "c": {"d": 3}}
        assert self.parser._find_value_by_path("$.c.d", doc) == 3
        assert self.parser._find_value_by_path("$.a[*].b", doc) == [1, 2]
        assert self.parser._find_value_by_path("$.missing", doc) is None

    def test_solve_rows(self, star3):
        report = solve_centralized(star3)
        rows = self.parser._handler("solve", report)
        assert [row["id"] for row in rows] == [1, 2, 3]
        assert all(row["mode"] == "centralized" and row["objective"] == report.objective for row in rows)
        assert set(self.parser.summary(report)) == set(ReportParser.SUMMARY_PATHS)

    def test_gen_radial_rows(self):
        rows = self.parser._handler("gen-radial", generate_radial(4, 0))
        assert [row["id"] for row in rows] == [1, 2, 3, 4]
        assert {"v_min", "v_max", "c1"} <= set(rows[0])


class TestMain:
    def test_gen_radial(self, tmp_path, capsys):
        out = tmp_path / "case.json"
        assert main(["gen-radial", "--n", "4", "--seed", "1", "--out", str(out)]) == 0
        assert load_case(str(out)) == generate_radial(4, 1)
        assert "generated 4-bus case" in capsys.readouterr().out

    def test_solve_writes_report(self, case_file, tmp_path):
        out = tmp_path / "report.json"
        dump = tmp_path / "decomposition.json"
        assert main(["solve", "--case", str(case_file), "--mode", "cumulative-dual", "--max-iters", "2",
                     "--dump-decomposition", str(dump), "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["schema_version"] == "1.0" and doc["mode"] == "cumulative-dual"
        assert doc["iteration_count"] <= 2
        assert json.loads(dump.read_text())["cliques"] == [[1, 4], [2, 4], [3, 4]]

    def test_missing_case_file(self, tmp_path):
        assert main(["solve", "--case", str(tmp_path / "nope.json")]) == 1

    def test_invalid_case(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"buses": [], "lines": []}')
        assert main(["solve", "--case", str(path)]) == 1

    def test_bad_arguments(self):
        assert main(["gen-radial", "--n", "1", "--seed", "0"]) == 1
        assert main([]) == 1

    def test_help(self):
        assert main(["--help"]) == 0
