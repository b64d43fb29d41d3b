"""Power network instances: buses, lines, admittance and cost matrices.

Bus ids are 1-based everywhere a human sees them (case files, reports, the CLI).
Matrices are indexed 0-based, bus id ``i`` lives at row ``i - 1``.
"""
import json
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

logger = logging.getLogger(__name__)


class CaseValidationError(ValueError):
    """Raised when a case file or an in-memory case breaks the network invariants."""


@dataclass(frozen=True)
class Bus:
    id: int
    v_min: float
    v_max: float
    c0: float = 0.0
    c1: float = 0.0
    c2: float = 0.0


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    g: float
    b: float

    @property
    def y(self) -> complex:
        """Series admittance g + jb"""
        return complex(self.g, self.b)

    @property
    def pair(self) -> Tuple[int, int]:
        return (min(self.from_bus, self.to_bus), max(self.from_bus, self.to_bus))


@dataclass(frozen=True)
class PowerCase:
    """
    A power network instance.

    Attributes
    ----------
    buses -- tuple of Bus, ids 1..n in order
    lines -- tuple of Line

    Methods
    -------
    line_graph():
        networkx Graph over 0-based bus indices, one edge per line
    """
    buses: Tuple[Bus, ...]
    lines: Tuple[Line, ...]

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "lines", tuple(self.lines))
        self._validate()

    def _validate(self):
        if not self.buses:
            raise CaseValidationError("buses: a case needs at least one bus")

        for pos, bus in enumerate(self.buses):
            where = f"buses[{pos}]"
            if bus.id != pos + 1:
                raise CaseValidationError(f"{where}.id: expected {pos + 1}, got {bus.id} (ids must be 1..n in order)")
            if not bus.v_min > 0:
                raise CaseValidationError(f"{where}.v_min: bus {bus.id} needs v_min > 0, got {bus.v_min}")
            if bus.v_min > bus.v_max:
                raise CaseValidationError(f"{where}.v_min: bus {bus.id} has v_min {bus.v_min} > v_max {bus.v_max}")
            if bus.c2 < 0:
                raise CaseValidationError(f"{where}.c2: bus {bus.id} has negative quadratic cost {bus.c2}")
            if not all(np.isfinite([bus.v_min, bus.v_max, bus.c0, bus.c1, bus.c2])):
                raise CaseValidationError(f"{where}: bus {bus.id} has a non-finite number")

        n = len(self.buses)
        seen = set()
        for pos, line in enumerate(self.lines):
            where = f"lines[{pos}]"
            for end in (line.from_bus, line.to_bus):
                if not 1 <= end <= n:
                    raise CaseValidationError(f"{where}: bus {end} does not exist (n={n})")
            if line.from_bus == line.to_bus:
                raise CaseValidationError(f"{where}: self-loop at bus {line.from_bus}")
            if line.pair in seen:
                raise CaseValidationError(f"{where}: duplicate line between buses {line.pair[0]} and {line.pair[1]}")
            if line.y == 0:
                raise CaseValidationError(f"{where}: zero admittance on line {line.pair}")
            seen.add(line.pair)

        if n > 1 and not nx.is_connected(self.line_graph()):
            parts = [sorted(i + 1 for i in comp) for comp in nx.connected_components(self.line_graph())]
            raise CaseValidationError(f"lines: network is disconnected, components {parts}")

    @property
    def n(self) -> int:
        return len(self.buses)

    @property
    def c1(self) -> np.ndarray:
        return np.array([bus.c1 for bus in self.buses], dtype=float)

    @property
    def c2(self) -> np.ndarray:
        return np.array([bus.c2 for bus in self.buses], dtype=float)

    @property
    def w_min(self) -> np.ndarray:
        """Lower bounds on W_ii, i.e. v_min squared"""
        return np.array([bus.v_min for bus in self.buses], dtype=float) ** 2

    @property
    def w_max(self) -> np.ndarray:
        return np.array([bus.v_max for bus in self.buses], dtype=float) ** 2

    def line_graph(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n))
        for idx, line in enumerate(self.lines):
            graph.add_edge(line.from_bus - 1, line.to_bus - 1, line=idx)
        return graph


def build_admittance(case: PowerCase) -> np.ndarray:
    """Bus admittance matrix: Y_ii = sum of incident y, Y_ik = -y_ik on lines, 0 elsewhere"""
    Y = np.zeros((case.n, case.n), dtype=complex)
    for line in case.lines:
        i, k = line.from_bus - 1, line.to_bus - 1
        Y[i, i] += line.y
        Y[k, k] += line.y
        Y[i, k] -= line.y
        Y[k, i] -= line.y
    return Y


def build_cost_matrix(case: PowerCase, costs: Optional[Sequence[float]] = None,
                      Y: Optional[np.ndarray] = None) -> np.ndarray:
    """ Hermitian cost matrix M = (Y^H C + C Y) / 2 with C = diag(costs).

        Tr(M vv^H) equals sum_i costs_i * P_i for any voltage vector v.

        Keyword arguments:
        case -- the network
        costs -- linear cost per bus; defaults to the case's c1
        Y -- precomputed admittance matrix, built from the case when omitted

        Returns:
        M -- n x n complex Hermitian matrix
    """
    costs = case.c1 if costs is None else np.asarray(costs, dtype=float)
    if costs.shape != (case.n,):
        raise ValueError(f"costs must have length {case.n}, got shape {costs.shape}")
    Y = build_admittance(case) if Y is None else Y
    C = np.diag(costs)
    M = 0.5 * (Y.conj().T @ C + C @ Y)
    # exact Hermitian, not just to rounding
    return 0.5 * (M + M.conj().T)


def _require(record: dict, key: str, where: str):
    if key not in record:
        raise CaseValidationError(f"{where}.{key}: missing field")
    value = record[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CaseValidationError(f"{where}.{key}: expected a number, got {value!r}")
    return value


def parse_case(text: Union[str, bytes]) -> PowerCase:
    """ Parse a JSON case file.

        Keyword arguments:
        text -- the file contents, str or bytes

        Returns:
        case -- a validated PowerCase

        Raises CaseValidationError with the field path, or with line/column for malformed JSON.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise CaseValidationError(f"malformed JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e

    if not isinstance(raw, dict):
        raise CaseValidationError("top level: expected an object with 'buses' and 'lines'")
    for key in ("buses", "lines"):
        if not isinstance(raw.get(key), list):
            raise CaseValidationError(f"{key}: missing or not a list")

    buses = []
    for pos, rec in enumerate(raw["buses"]):
        where = f"buses[{pos}]"
        if not isinstance(rec, dict):
            raise CaseValidationError(f"{where}: expected an object")
        buses.append(Bus(id=int(_require(rec, "id", where)),
                         v_min=float(_require(rec, "v_min", where)),
                         v_max=float(_require(rec, "v_max", where)),
                         c0=float(rec.get("c0", 0.0)),
                         c1=float(_require(rec, "c1", where)),
                         c2=float(rec.get("c2", 0.0))))

    lines = []
    for pos, rec in enumerate(raw["lines"]):
        where = f"lines[{pos}]"
        if not isinstance(rec, dict):
            raise CaseValidationError(f"{where}: expected an object")
        lines.append(Line(from_bus=int(_require(rec, "from", where)),
                          to_bus=int(_require(rec, "to", where)),
                          g=float(_require(rec, "g", where)),
                          b=float(_require(rec, "b", where))))

    return PowerCase(buses=tuple(buses), lines=tuple(lines))


def serialize_case(case: PowerCase) -> str:
    """Serialize to the JSON case schema; identical cases give identical text"""
    doc = {
        "buses": [{"id": bus.id, "v_min": bus.v_min, "v_max": bus.v_max,
                   "c0": bus.c0, "c1": bus.c1, "c2": bus.c2} for bus in case.buses],
        "lines": [{"from": line.from_bus, "to": line.to_bus, "g": line.g, "b": line.b} for line in case.lines],
    }
    return json.dumps(doc, indent=2)


def load_case(path: str) -> PowerCase:
    with open(path, "rb") as f:
        return parse_case(f.read())


def save_case(case: PowerCase, path: str):
    with open(path, "w") as f:
        f.write(serialize_case(case))
    logger.info(f"[ * ] Wrote case with {case.n} buses and {len(case.lines)} lines to {path}")


def generate_radial(n: int, seed: int, tree: bool = False) -> PowerCase:
    """ Random radial instance following the experimental protocol.

        Topology is a star with bus n as the hub and source, or, with tree=True, a random
        recursive tree with the source at a random bus. The source gets c1 ~ U(0,10), every
        other bus c1 ~ U(-10,0). Each bus draws xi ~ U(0.9,1.1) and gets bounds
        [0.95 xi, 1.05 xi]. Lines get y = g - jb with g, b ~ U(0,10).

        Keyword arguments:
        n -- number of buses, at least 2
        seed -- RNG seed; the case is a pure function of (n, seed, tree)
        tree -- draw a random tree instead of a star

        Returns:
        case -- PowerCase
    """
    if n < 2:
        raise ValueError(f"generate_radial needs n >= 2, got {n}")
    rng = np.random.default_rng(seed)

    if tree:
        order = rng.permutation(n)
        edges = [(int(order[rng.integers(k)]), int(order[k])) for k in range(1, n)]
        source = int(rng.integers(n))
    else:
        edges = [(l, n - 1) for l in range(n - 1)]
        source = n - 1

    xi = rng.uniform(0.9, 1.1, size=n)
    c1 = rng.uniform(-10.0, 0.0, size=n)
    c1[source] = rng.uniform(0.0, 10.0)
    g = rng.uniform(0.0, 10.0, size=n - 1)
    b = rng.uniform(0.0, 10.0, size=n - 1)

    buses = tuple(Bus(id=i + 1, v_min=float(0.95 * xi[i]), v_max=float(1.05 * xi[i]), c1=float(c1[i]))
                  for i in range(n))
    lines = tuple(Line(from_bus=i + 1, to_bus=k + 1, g=float(g[e]), b=float(-b[e]))
                  for e, (i, k) in enumerate(edges))
    return PowerCase(buses=buses, lines=lines)
