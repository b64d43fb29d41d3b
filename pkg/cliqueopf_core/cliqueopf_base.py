from IPython.core.magic import (Magics, magics_class, line_cell_magic)
from cliqueopf_core._version import __desc__
import jupyter_integrations_utility as jiu


@magics_class
class Cliqueopf(Magics):
    # Static Variables
    # The name of the integration
    name_str = "cliqueopf"
    magic_name = name_str
    debug = False
    # {name_str}_base is used for first load
    # {name_str}_full is used after first load

    def __init__(self, shell, debug=False, *args, **kwargs):
        super(Cliqueopf, self).__init__(shell)
        self.debug = debug

        # Check namespace for integration and addon dicts
        if "jupyter_loaded_integrations" not in self.shell.user_ns:
            if self.debug:
                jiu.displayMD("**[ Dbg ]** jupyter_loaded_integrations not found in ns: adding")
            self.shell.user_ns['jupyter_loaded_integrations'] = {}
        if "jupyter_loaded_addons" not in self.shell.user_ns:
            if self.debug:
                jiu.displayMD("**[ Dbg ]** jupyter_loaded_addons not found in ns: adding")
            self.shell.user_ns['jupyter_loaded_addons'] = {}

        if self.name_str in self.shell.user_ns['jupyter_loaded_integrations']:
            jiu.displayMD(f"**[ ! ]** Potential collision of integration names: {self.name_str}")
            jiu.displayMD(f"**[ * ]** {self.shell.user_ns['jupyter_loaded_integrations']}")
        else:
            self.shell.user_ns['jupyter_loaded_integrations'][self.name_str] = f"{self.name_str}_base"

    def retCustomDesc(self):
        return __desc__

    def full_load_code(self) -> str:
        """Source that swaps this shim for the full integration"""
        cls = self.name_str.capitalize()
        return (f"from {self.name_str}_core.{self.name_str}_full import {cls}\n"
                f"{self.name_str}_full = {cls}(get_ipython(), debug={str(self.debug)})\n"
                f"get_ipython().register_magics({self.name_str}_full)\n")

    # The line cell magic to fully load this integration
    @line_cell_magic
    def cliqueopf(self, line, cell=None):
        loaded = self.shell.user_ns['jupyter_loaded_integrations']
        if self.name_str not in loaded:
            jiu.display_error(f"**[ ! ]** {self.name_str} is not in the loaded integrations")
        elif loaded[self.name_str] != f"{self.name_str}_base":
            jiu.display_error(f"**[ ! ]** {self.name_str} should be in its base state, found {loaded[self.name_str]}")
        else:
            if self.debug:
                jiu.displayMD(f"**[ * ]** Loading full {self.name_str} from base")
            full_load = self.full_load_code()
            if self.debug:
                jiu.displayMD(f"**[ Dbg ]** Load Code: `{full_load}`")
            self.shell.ex(full_load)
            loaded[self.name_str] = f"{self.name_str}_full"
            if cell is None:
                return self.shell.run_line_magic(self.name_str, line)
            return self.shell.run_cell_magic(self.name_str, line, cell)
