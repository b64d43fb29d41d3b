from cliqueopf_core._version import __version__
from cliqueopf_core.netcase import PowerCase, generate_radial, load_case, parse_case
from cliqueopf_core.runner import Mode, RunConfig, RunReport, run, solve_centralized, solve_quadratic


def load_ipython_extension(ipython):
    from cliqueopf_core.cliqueopf_base import Cliqueopf
    ipython.register_magics(Cliqueopf(ipython))
