import json
import logging
from pathlib import Path

from cliqueopf_core.chordal import assign_coordinators, decompose, decomposition_to_json
from cliqueopf_core.netcase import build_admittance, build_cost_matrix, generate_radial, load_case, parse_case, save_case
from cliqueopf_core.runner import RunConfig, benchmark_scaling, myopts, run, solve_quadratic

logger = logging.getLogger(__name__)


class OpfCommands:
    """
    Runs the user-facing commands on behalf of the CLI and the notebook magic.

    Attributes
    ----------
    opts -- myopts-style option dict the run configs start from

    Methods
    -------
    _handler(command, **kwargs):
        Brokers commands on behalf of the calling function
    solve(**kwargs):
        Solve a case file (or case text) and return the RunReport
    gen_radial(n, seed, out, tree):
        Generate a random radial case and write it
    bench(sizes, seeds_per_size, out, **kwargs):
        Run the scaling benchmark and return its table
    """
    def __init__(self, opts=None):
        self.opts = dict(myopts) if opts is None else opts

    def _handler(self, command: str, **kwargs):
        """ Brokers commands on behalf of the calling function

            Keyword arguments:
            command -- the subcommand the user issued ("gen-radial" maps to gen_radial)
            kwargs -- the parsed arguments of that subcommand

            Returns:
            Whatever the command returns.
        """
        if command is None:
            raise ValueError("no command given, expected one of solve, gen-radial, bench")
        return getattr(self, command.replace("-", "_"))(**kwargs)

    def _config(self, mode=None, max_iters=None, tol=None, step=None, step_rule=None, chain=None, seed=None,
                stop=None, async_updates=None, delay=None, reference_bus=None, workers=None):
        return RunConfig.from_opts(self.opts, mode=mode, max_iters=max_iters, rel_tol=tol, initial_step=step,
                                   step_rule=step_rule, chain=chain, seed=seed, stop=stop,
                                   async_updates=async_updates, delays=dict(delay) if delay else None,
                                   reference_bus=reference_bus, max_workers=workers)

    def solve(self, case=None, case_text=None, out=None, quadratic=False, dump_decomposition=None, **kwargs):
        if case_text is not None:
            power_case = parse_case(case_text)
        elif case is not None:
            power_case = load_case(case)
        else:
            raise ValueError("solve needs --case FILE or a case in the cell body")
        config = self._config(**{k: v for k, v in kwargs.items() if k not in ("verbose",)})

        if dump_decomposition:
            Y = build_admittance(power_case)
            pattern = Y if quadratic else build_cost_matrix(power_case, Y=Y)
            d = decompose(pattern, config.order)
            Path(dump_decomposition).write_text(json.dumps(decomposition_to_json(d, assign_coordinators(d)), indent=2))
            logger.info(f"[ * ] wrote decomposition to {dump_decomposition}")

        report = solve_quadratic(power_case, config) if quadratic else run(power_case, config)
        if out:
            report.save(out)
            logger.info(f"[ * ] wrote report to {out}")
        return report

    def gen_radial(self, n, seed, out=None, tree=False, **kwargs):
        case = generate_radial(n, seed, tree=bool(tree))
        if out:
            save_case(case, out)
            logger.info(f"[ * ] wrote {n}-bus case to {out}")
        return case

    def bench(self, sizes, seeds_per_size=20, out=None, tree=False, **kwargs):
        config = self._config(**{k: v for k, v in kwargs.items() if k not in ("verbose",)})
        return benchmark_scaling(sizes, seeds_per_size, config, out=out, tree=bool(tree))
