import concurrent.futures
import logging
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, List, Sequence, Tuple

import networkx as nx

logger = logging.getLogger(__name__)


class MessageKind(str, Enum):
    ALLOCATION = "allocation"
    MULTIPLIER = "multiplier"
    PRICE = "price"
    SLACK = "slack"
    CASE_DATA = "case_data"


@dataclass(frozen=True)
class Message:
    kind: MessageKind
    src: int
    dst: int
    payload: Any
    hop_count: int = 1


class SimulatedNetwork:
    """
    In-process stand-in for the bus-to-bus communication network.

    Every send is routed along a shortest path of the power network and recorded as a
    chain of one-hop Messages. Delivery to the sending bus itself is local and records
    nothing.

    Attributes
    ----------
    graph -- networkx Graph of the power lines (0-based buses)
    link_delay -- simulated seconds added per hop, accumulated in `latency`

    Methods
    -------
    send(kind, src, dst, payload):
        Route a payload and return it as delivered at dst
    counts():
        Message counts keyed by kind name
    """
    def __init__(self, graph: nx.Graph, link_delay: float = 0.0):
        self.graph = graph
        self.link_delay = link_delay
        self.log: List[Message] = []
        self.latency = 0.0
        self._routes: Dict[Tuple[int, int], List[int]] = {}

    def _route(self, src: int, dst: int) -> List[int]:
        if (src, dst) not in self._routes:
            self._routes[(src, dst)] = nx.shortest_path(self.graph, src, dst)
        return self._routes[(src, dst)]

    def send(self, kind: MessageKind, src: int, dst: int, payload: Any = None) -> Any:
        if src == dst:
            return payload
        path = self._route(src, dst)
        for a, b in zip(path, path[1:]):
            if not self.graph.has_edge(a, b):
                raise RuntimeError(f"route {path} uses non-adjacent buses {a + 1} and {b + 1}")
            self.log.append(Message(kind=kind, src=a, dst=b, payload=payload, hop_count=1))
            self.latency += self.link_delay
        if len(path) > 2:
            logger.debug(f"[ Dbg ] {kind.value} from bus {src + 1} to bus {dst + 1} relayed over {len(path) - 1} hops")
        return payload

    def counts(self) -> Dict[str, int]:
        counter = Counter(msg.kind.value for msg in self.log)
        return {kind.value: counter.get(kind.value, 0) for kind in MessageKind}

    def one_hop_fraction(self) -> float:
        if not self.log:
            return 1.0
        return sum(1 for msg in self.log if msg.hop_count == 1 and self.graph.has_edge(msg.src, msg.dst)) / len(self.log)


class SequentialPool:
    """Runs tasks one after another on the calling thread"""

    def map(self, fn: Callable, items: Sequence) -> list:
        return [fn(item) for item in items]

    def close(self):
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class ThreadedPool:
    """ Runs tasks concurrently on a ThreadPoolExecutor.

        Results come back in the order of `items`, whatever order the workers finish in.
    """
    def __init__(self, max_workers: int = 4):
        self.max_workers = max_workers
        self.executor = concurrent.futures.ThreadPoolExecutor(max_workers=max_workers)

    def map(self, fn: Callable, items: Sequence) -> list:
        futures = {self.executor.submit(fn, item): pos for pos, item in enumerate(items)}
        results = [None] * len(items)
        for future in concurrent.futures.as_completed(futures):
            results[futures[future]] = future.result()
        return results

    def close(self):
        self.executor.shutdown(wait=True)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
