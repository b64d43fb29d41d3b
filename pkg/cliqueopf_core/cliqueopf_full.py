#!/usr/bin/python

import pandas as pd
from integration_core import Integration
from IPython.core.magic import (magics_class, line_cell_magic)
from cliqueopf_core._version import __desc__
from cliqueopf_core.runner import myopts as runner_opts
import jupyter_integrations_utility as jiu
from cliqueopf_utils.opf_commands import OpfCommands
from cliqueopf_utils.report_parser import ReportParser
from cliqueopf_utils.user_input_parser import UserInputParser


@magics_class
class Cliqueopf(Integration):
    # Static Variables
    # The name of the integration
    name_str = "cliqueopf"
    instances = {}
    custom_evars = ["cliqueopf_conn_default"] + list(runner_opts)

    # These are the variables in the opts dict that allowed to be set by the user.
    # These are specific to this custom integration and are joined
    # with the base_allowed_set_opts from the integration base
    custom_allowed_set_opts = ["cliqueopf_conn_default"] + list(runner_opts)

    myopts = {}
    myopts["cliqueopf_conn_default"] = ["default", "Default solver profile to run against"]
    myopts.update(runner_opts)

    # Class Init function - Obtain a reference to the get_ipython()
    def __init__(self, shell, debug=False, *args, **kwargs):
        super(Cliqueopf, self).__init__(shell, debug=debug)
        self.debug = debug

        # Add local variables to opts dict
        for k in self.myopts.keys():
            self.opts[k] = self.myopts[k]

        self.user_input_parser = UserInputParser(prog=r"%%cliqueopf")
        self.report_parser = ReportParser()
        self.load_env(self.custom_evars)
        self.parse_instances()

    def retCustomDesc(self):
        return __desc__

    def req_username(self, instance):
        """The solver runs locally: never prompt for a username"""
        return False

    def req_password(self, instance):
        return False

    def run_opts(self) -> dict:
        """The run options currently set on this integration"""
        return {k: v for k, v in self.opts.items() if k in runner_opts}

    def customAuth(self, instance):
        result = -1

        if instance not in self.instances.keys():
            result = -3
            jiu.displayMD(f"**[ ! ]** Instance **{instance}** not found in instances: Connection Failed")
        else:
            try:
                self.instances[instance]["session"] = OpfCommands(self.run_opts())
                result = 0
            except Exception as e:
                jiu.display_error(f"**[ ! ]** Unable to set up solver profile **{instance}**: `{e}`")
                result = -2

        return result

    def customHelp(self, current_output):
        out = current_output
        out += self.retQueryHelp(None)

        return out

    def retQueryHelp(self, q_examples=None):

        magic_name = self.magic_name
        magic = f"%{magic_name}"

        cell_magic_helper_text = (f"\n## Running {magic_name} magics\n"
                                  "--------------------------------\n"
                                  f"\n#### A {magic} line magic runs one command. A %{magic} cell magic takes the \
                                      profile name on its first line, the command on the second line and an \
                                      optional case (JSON) below it.\n"
                                  "\n### Magic examples\n"
                                  "-----------------------\n")

        cell_magic_table = ("| Magic | Description |\n"
                            "| ----- | ----------- |\n"
                            f"| {magic} gen-radial --n 6 --seed 3 | Generate a random 6-bus star and show its buses |\n"
                            f"| {magic} solve --case star6.json --mode distributed-dual | Solve a case file by price \
                                consensus with simulated messaging |\n"
                            f"| %{magic} default<br>solve --mode cumulative-primal<br>{{\"buses\": [...], \
                                \"lines\": [...]}} | Solve the case in the cell body by resource allocation |\n"
                            f"| {magic} bench --sizes 10,20,40 --seeds-per-size 5 | Solver time against network \
                                size |\n")

        help_out = cell_magic_helper_text + cell_magic_table

        return help_out

    def run_command(self, commands: OpfCommands, line: str, body=None):
        """ Parse one command (and its case body), run it and flatten the result.

            Returns:
            dataframe -- a pandas dataframe, or None
            status -- "Success" or the failure message
        """
        parsed_input = self.user_input_parser.parse_input(line, type="line" if body is None else "cell", cell=body)

        if self.debug:
            jiu.displayMD(f"**[ Dbg ]** Parsed Query: `{parsed_input}`")

        if parsed_input["error"] is True:
            jiu.display_error(parsed_input["message"])
            return None, f"Failure: {parsed_input['message']}"

        try:
            command_input = dict(parsed_input["input"])
            command = command_input.pop("command")
            command_input.pop("verbose", None)
            response = commands._handler(command, **command_input)
            dataframe = pd.DataFrame(self.report_parser._handler(command, response))
            if command == "solve":
                summary = self.report_parser.summary(response)
                marker = "**[ * ]**" if response.converged else "**[ ! ]**"
                jiu.displayMD(f"{marker} {summary['mode']}: objective {summary['objective']:.8g}, "
                              f"converged={summary['converged']} after {summary['iterations']} iteration(s)")
                for warning in response.warnings:
                    jiu.displayMD(f"**[ ! ]** {warning}")
            status = "Success"
        except Exception as e:
            jiu.display_error(f"**[ ! ]** Error during execution: {e}")
            dataframe = None
            status = f"Failure - {e}"

        return dataframe, status

    def customQuery(self, query: str, instance: str):
        """ Run the command of a cell magic against a solver profile.

            1.  The first line of the query is the command, parsed via ../utils/user_input_parser.
                Anything below it is the case JSON.
            2.  Parsing errors are displayed and returned as the status.
            3.  The parsed input goes to the profile's OpfCommands._handler, which brokers
                every command.
            4.  The result goes to ReportParser._handler, which flattens it into rows.

            Keyword Arguments:
            query -- this is what the user types in the cell
            instance -- the solver profile to run with

            Returns:
            dataframe -- a pandas dataframe, or None
            status -- sent back to jupyter_integration_base
        """
        line, _, body = query.strip().partition("\n")
        if self.debug:
            jiu.displayMD(f"**[ Dbg ]** Instance: `{instance}`")
        return self.run_command(self.instances[instance]["session"], line, body if body.strip() else None)

    # This is the magic name.
    @line_cell_magic
    def cliqueopf(self, line, cell=None):

        if cell is None:
            line = line.replace("\r", "")
            line_handled = self.handleLine(line)

            if self.debug:
                jiu.displayMD(f"**[ Dbg ]** line: {line}")

            if not line_handled:  # Commands run with the current options, no profile needed
                dataframe, status = self.run_command(OpfCommands(self.run_opts()), line)
                if self.debug:
                    jiu.displayMD(f"**[ Dbg ]** status: {status}")
                self.shell.user_ns[f"prev_{self.name_str}"] = dataframe
                return dataframe

        else:  # This is run is the cell is not none, thus it's a cell to process  - For us, that means a query
            self.handleCell(cell, line)
