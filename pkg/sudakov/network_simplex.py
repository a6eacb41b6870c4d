"""Exact network simplex for the bipartite transportation problem.

Sources ``0..m-1`` send ``supply[i]``, targets ``0..n-1`` receive
``demand[j]`` along the allowed arcs. Arcs absent from ``costs`` are
forbidden (never priced). The start basis is the star through an artificial
root; artificial arcs carry the lexicographic cost ``(1, 0)`` and real arcs
``(0, c)``, so any optimum with zero artificial flow is a true optimum.

Pricing is Dantzig (most negative reduced cost, smallest arc index on ties).
After ``degenerate_limit`` consecutive degenerate pivots the entering rule
switches to Bland's (first improving arc); the leaving arc is always the
smallest index among the blocking arcs.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

from .errors import InfeasibleInstanceError

logger = logging.getLogger(__name__)

_ZERO = (Fraction(0), Fraction(0))


@dataclass(frozen=True)
class FlowSolution:
    flows: dict  # (i, j) -> positive mass
    pivots: int
    degenerate_pivots: int


def _sub(p, q):
    return (p[0] - q[0], p[1] - q[1])


def _add(p, q):
    return (p[0] + q[0], p[1] + q[1])


class TransportSimplex:
    def __init__(self, supply, demand, costs: dict, *, degenerate_limit: int = 50):
        self.m = len(supply)
        self.n = len(demand)
        self.root = self.m + self.n
        self.degenerate_limit = degenerate_limit
        # arcs: (tail, head, cost pair, real pair index or None)
        self.arcs = []
        for (i, j) in sorted(costs):
            self.arcs.append((i, self.m + j, (Fraction(0), Fraction(costs[(i, j)])), (i, j)))
        self.first_artificial = len(self.arcs)
        self.flow = [Fraction(0)] * len(self.arcs)
        self.tree = set()
        for i, s in enumerate(supply):
            self.tree.add(len(self.arcs))
            self.arcs.append((i, self.root, (Fraction(1), Fraction(0)), None))
            self.flow.append(Fraction(s))
        for j, d in enumerate(demand):
            self.tree.add(len(self.arcs))
            self.arcs.append((self.root, self.m + j, (Fraction(1), Fraction(0)), None))
            self.flow.append(Fraction(d))
        self._rebuild()

    def _rebuild(self) -> None:
        """Parent pointers, depths and potentials of the current spanning tree."""
        nodes = self.root + 1
        adjacency = [[] for _ in range(nodes)]
        for k in self.tree:
            tail, head, _, _ = self.arcs[k]
            adjacency[tail].append((head, k))
            adjacency[head].append((tail, k))
        self.parent = [-1] * nodes
        self.parent_arc = [-1] * nodes
        self.depth = [0] * nodes
        self.potential = [_ZERO] * nodes
        seen = [False] * nodes
        seen[self.root] = True
        queue = deque([self.root])
        while queue:
            u = queue.popleft()
            for v, k in sorted(adjacency[u]):
                if seen[v]:
                    continue
                seen[v] = True
                self.parent[v] = u
                self.parent_arc[v] = k
                self.depth[v] = self.depth[u] + 1
                tail, head, cost, _ = self.arcs[k]
                # reduced cost c - pi[tail] + pi[head] vanishes on tree arcs
                if tail == u:
                    self.potential[v] = _sub(self.potential[u], cost)
                else:
                    self.potential[v] = _add(self.potential[u], cost)
                queue.append(v)

    def _reduced(self, k: int):
        tail, head, cost, _ = self.arcs[k]
        return _add(_sub(cost, self.potential[tail]), self.potential[head])

    def _entering(self, bland: bool) -> int | None:
        best, best_value = None, _ZERO
        for k in range(self.first_artificial):
            if k in self.tree:
                continue
            value = self._reduced(k)
            if value < _ZERO:
                if bland:
                    return k
                if value < best_value:
                    best, best_value = k, value
        return best

    def _cycle(self, k: int) -> list[tuple[int, bool]]:
        """Arcs of the pivot cycle with orientation (True = along the cycle)."""
        tail, head, _, _ = self.arcs[k]
        up, down = [], []
        u, v = head, tail
        while u != v:
            if self.depth[u] >= self.depth[v]:
                arc = self.parent_arc[u]
                up.append((arc, self.arcs[arc][0] == u))
                u = self.parent[u]
            else:
                arc = self.parent_arc[v]
                down.append((arc, self.arcs[arc][1] == v))
                v = self.parent[v]
        return [(k, True)] + up + list(reversed(down))

    def solve(self) -> FlowSolution:
        pivots = degenerate = streak = 0
        while True:
            entering = self._entering(streak >= self.degenerate_limit)
            if entering is None:
                break
            cycle = self._cycle(entering)
            blocking = [(self.flow[arc], arc) for arc, forward in cycle if not forward]
            theta, leaving = min(blocking)
            for arc, forward in cycle:
                self.flow[arc] += theta if forward else -theta
            self.tree.discard(leaving)
            self.tree.add(entering)
            self._rebuild()
            pivots += 1
            if theta == 0:
                degenerate += 1
                streak += 1
            else:
                streak = 0
        stuck = [k for k in range(self.first_artificial, len(self.arcs)) if self.flow[k] > 0]
        if stuck:
            raise InfeasibleInstanceError(f"no feasible transport on the allowed pairs ({len(stuck)} artificial arcs keep flow)")
        flows = {self.arcs[k][3]: self.flow[k] for k in range(self.first_artificial) if self.flow[k] > 0}
        logger.debug("network simplex: %d pivots (%d degenerate)", pivots, degenerate)
        return FlowSolution(flows=flows, pivots=pivots, degenerate_pivots=degenerate)


def solve_transport(supply, demand, costs: dict, *, degenerate_limit: int = 50) -> FlowSolution:
    return TransportSimplex(supply, demand, costs, degenerate_limit=degenerate_limit).solve()
