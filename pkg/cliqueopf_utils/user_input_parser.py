from argparse import ArgumentParser, ArgumentTypeError, BooleanOptionalAction
import shlex

from cliqueopf_core.runner import Mode, StopRule
from cliqueopf_core.dual_decomp import ChainScheme
from cliqueopf_utils.helper_functions import STEP_RULES, positive_float, positive_int, valid_delay, valid_sizes


def _min_two(value):
    n = positive_int(value)
    if n < 2:
        raise ArgumentTypeError(f"A network needs at least 2 buses: {value}")
    return n


class UserInputParser(ArgumentParser):
    """
    Parses the command line and the %cliqueopf / %%cliqueopf magics.

    Attributes
    ----------
    None

    Methods
    -------
    parse_input(input, type, cell):
        Parses a magic line (and cell body) into a response object
    """
    def __init__(self, prog="cliqueopf", *args, **kwargs):
        super().__init__(prog=prog, description="Clique-decomposed SDP relaxation of optimal power flow")
        self.add_argument("-v", "--verbose", action="store_true", help="debug logging")
        self.subparsers = self.add_subparsers(dest="command", parser_class=ArgumentParser)

        # Subparser for "solve" command
        self.parser_solve = self.subparsers.add_parser("solve", help="Solve a case in one of the five modes")
        self.parser_solve.add_argument("--case", required=False, help="JSON case file (a %%%%cliqueopf cell body \
            may hold the case instead)")
        self.parser_solve.add_argument("--mode", choices=[m.value for m in Mode], default=None, help="execution mode")
        self.parser_solve.add_argument("--max-iters", dest="max_iters", type=positive_int, default=None,
                                       help="coordination iteration cap")
        self.parser_solve.add_argument("--tol", type=positive_float, default=None, help="relative tolerance of the \
            reference stopping rule")
        self.parser_solve.add_argument("--step", type=positive_float, default=None, help="initial step size")
        self.parser_solve.add_argument("--step-rule", dest="step_rule", choices=STEP_RULES, default=None,
                                       help="step schedule")
        self.parser_solve.add_argument("--chain", choices=[c.value for c in ChainScheme], default=None,
                                       help="arrangement of the dual consensus equalities")
        self.parser_solve.add_argument("--seed", type=int, default=None, help="seed of random arrangements")
        self.parser_solve.add_argument("--stop", choices=[s.value for s in StopRule], default=None,
                                       help="stopping rule")
        self.parser_solve.add_argument("--async", dest="async_updates", action=BooleanOptionalAction, default=None,
                                       help="asynchronous dual price updates")
        self.parser_solve.add_argument("--delay", type=valid_delay, action="append", default=None, help="CLIQUE:K \
            delays the results of clique CLIQUE by K rounds; repeatable")
        self.parser_solve.add_argument("--quadratic", action=BooleanOptionalAction, default=False,
                                       help="quadratic costs through the outer z-loop")
        self.parser_solve.add_argument("--reference-bus", dest="reference_bus", type=positive_int, default=None,
                                       help="angle reference bus")
        self.parser_solve.add_argument("--workers", type=positive_int, default=None, help="threads of distributed \
            modes")
        self.parser_solve.add_argument("--dump-decomposition", dest="dump_decomposition", default=None,
                                       help="write the clique decomposition as JSON to this file")
        self.parser_solve.add_argument("--out", default=None, help="write the report JSON to this file")

        # Subparser for "gen-radial" command
        self.parser_gen = self.subparsers.add_parser("gen-radial", help="Generate a random radial case")
        self.parser_gen.add_argument("--n", type=_min_two, required=True, help="number of buses")
        self.parser_gen.add_argument("--seed", type=int, required=True, help="random seed")
        self.parser_gen.add_argument("--tree", action=BooleanOptionalAction, default=False, help="random tree \
            instead of a star")
        self.parser_gen.add_argument("--out", default=None, help="case file to write")

        # Subparser for "bench" command
        self.parser_bench = self.subparsers.add_parser("bench", help="Solver time against network size")
        self.parser_bench.add_argument("--sizes", type=valid_sizes, required=True, help="comma separated bus counts")
        self.parser_bench.add_argument("--seeds-per-size", dest="seeds_per_size", type=int, default=20,
                                       help="random instances per size")
        self.parser_bench.add_argument("--mode", choices=[m.value for m in Mode], default="cumulative-dual",
                                       help="execution mode")
        self.parser_bench.add_argument("--max-iters", dest="max_iters", type=positive_int, default=None,
                                       help="coordination iteration cap")
        self.parser_bench.add_argument("--step", type=positive_float, default=None, help="initial step size")
        self.parser_bench.add_argument("--step-rule", dest="step_rule", choices=STEP_RULES, default=None,
                                       help="step schedule")
        self.parser_bench.add_argument("--tree", action=BooleanOptionalAction, default=False, help="random trees")
        self.parser_bench.add_argument("--out", default="scaling.csv", help="CSV to write")

    def parse_input(self, input, type="line", cell=None):
        """ Parses a magic into a response object

            Keyword Arguments:
            input -- the magic line
            type -- "line" or "cell"
            cell -- the cell body; for `solve` it holds the case JSON

            Returns:
            parsed_input -- an object containing an error status, a message,
                and parsed command from argparse
        """
        parsed_input = {
            "type": type,
            "error": False,
            "message": None,
            "input": {}
        }
        try:
            if len(input.strip().split("\n")) > 1:
                parsed_input["error"] = True
                parsed_input["message"] = "The magic line is more than one line and shouldn't be. \
                    Try `%cliqueopf --help` or `%cliqueopf -h`"
                return parsed_input

            parsed_input["input"].update(vars(self.parse_args(shlex.split(input))))

            if type == "cell" and cell is not None and cell.strip():
                if parsed_input["input"]["command"] != "solve":
                    parsed_input["error"] = True
                    parsed_input["message"] = "Only `solve` takes a cell body (the case JSON)"
                else:
                    parsed_input["input"]["case_text"] = cell

            if parsed_input["input"].get("command") is None:
                parsed_input["error"] = True
                parsed_input["message"] = "No command given. Try `--help` or `-h`"

        except SystemExit:
            parsed_input["error"] = True
            parsed_input["message"] = "Invalid input received, see the output above. Try `--help` or `-h`"

        except Exception as e:
            parsed_input["error"] = True
            parsed_input["message"] = f"Exception while parsing user input: {e}"

        return parsed_input
