import json

import jsonpath_ng as jp

from cliqueopf_core.netcase import serialize_case


class ReportParser:
    """
    Flattens command results into rows for a dataframe.
    Note: commands return results, formatting for display happens here.

    Attributes
    ----------
    None

    Methods
    -------
    _handler(issued_command, response):
        Brokers result parsing on behalf of the calling function.
    _find_value_by_path(path, json):
        Look up a value of a JSON object via JSONPath (jsonpath_ng)
    solve(report):
        One row per bus of the recovered voltages, with the run summary repeated
    trace(report):
        One row per coordination round
    gen_radial(case):
        One row per bus of a generated case
    bench(table):
        The scaling table as rows
    """
    SUMMARY_PATHS = {
        "mode": "$.mode",
        "converged": "$.converged",
        "iterations": "$.iteration_count",
        "objective": "$.objective",
        "reference": "$.reference_objective",
        "rank_ratio": "$.rank.ratio",
    }

    def __init__(self):
        pass

    def _handler(self, issued_command: str, response):
        """ Brokers result parsing on behalf of the calling function

            Keyword arguments:
            issued_command -- the command the user executed ("gen-radial" maps to gen_radial)
            response -- whatever that command returned

            Returns:
            rows -- a list of dicts for a dataframe
        """
        return getattr(self, issued_command.replace("-", "_"))(response)

    def _find_value_by_path(self, path: str, json: dict):
        """ Look up a value of a JSON object via JSONPath (jsonpath_ng)

            Keyword arguments:
            path -- the JSON path to find in the JSON
            json -- the JSON to search through

            Returns:
            The single match, a list when there are several, None when there are none
        """
        matches = [match.value for match in jp.parse(path).find(json)]
        if not matches:
            return None
        return matches[0] if len(matches) == 1 else matches

    def summary(self, report) -> dict:
        doc = report.to_dict()
        return {name: self._find_value_by_path(path, doc) for name, path in self.SUMMARY_PATHS.items()}

    def solve(self, report):
        doc = report.to_dict()
        summary = self.summary(report)
        if doc["voltages"] is None:
            return [summary]
        buses = self._find_value_by_path("$.voltages.buses[*]", doc) or []
        if isinstance(buses, dict):
            buses = [buses]
        if not buses:
            return [summary]
        return [{**bus, **summary} for bus in buses]

    def trace(self, report):
        return report.trace_frame().to_dict("records")

    def gen_radial(self, case):
        doc = json.loads(serialize_case(case))
        buses = self._find_value_by_path("$.buses[*]", doc)
        return buses if isinstance(buses, list) else [buses]

    def bench(self, table):
        return table.to_dict("records")
