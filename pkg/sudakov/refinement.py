"""Refinement of a face class into cyclically connected pieces.

Each class is straightened by an affine chart that keeps the time coordinate.
On the chart the plan's support pairs and the finite-cost return steps form
the carriage digraph; reachability from every source seed gives the ternary
function theta', its cone envelope theta, and the strongly connected
components that become the refined subclasses.
"""

from __future__ import annotations

import logging
from collections import defaultdict, deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import total_ordering
from typing import Sequence

import networkx as nx
import numpy as np

from .cone_geometry import Cone, finite_steps, lift_cost, lifted_active_set
from .config import Settings
from .errors import DegenerateChartError, GridCoverageError, InputError
from .lifting_potential import FaceClass, affine_key
from .numeric import Arithmetic, arithmetic_for, dot, gram_schmidt, projector, span_basis, sub
from .ot_solver import Plan, TransportInstance

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FibrationChart:
    """Affine chart ``base + L -> [0, inf) x R^h`` keeping ``t``.

    ``e0`` is the projection of the time axis onto ``L`` scaled to ``t = 1``;
    ``directions`` are orthogonal (unnormalised) vectors spanning ``L ∩ {t = 0}``.
    """

    base: tuple
    e0: tuple
    directions: tuple
    kappa: float
    cone: Cone  # chart coordinates
    ambient_cone: Cone
    arith: Arithmetic

    @property
    def h(self) -> int:
        return len(self.directions)

    def to_chart(self, z: Sequence) -> tuple:
        arith = self.arith
        w = sub(arith.vector(z), self.base)
        tau = w[0]
        rest = tuple(a - tau * b for a, b in zip(w, self.e0))
        coords = tuple(dot(rest, e) / dot(e, e) for e in self.directions)
        return (arith.vector(z)[0], *coords)

    def from_chart(self, p: Sequence) -> tuple:
        tau = p[0] - self.base[0]
        z = tuple(b + tau * e for b, e in zip(self.base, self.e0))
        for xi, e in zip(p[1:], self.directions):
            z = tuple(a + xi * b for a, b in zip(z, e))
        return z

    def to_chart_many(self, points: Sequence[Sequence]) -> np.ndarray:
        rows = [self.to_chart(z) for z in points]
        return self.arith.array(rows).reshape(len(rows), self.h + 1)


def to_fibration_coords(base: Sequence, cone: Cone, settings: Settings) -> FibrationChart:
    """Chart of the affine span ``base + span(cone)`` with its projected cone."""
    arith = cone.arith
    base = arith.vector(base)
    dim = cone.dim
    basis = cone.span_basis()
    proj = projector(basis, dim, arith)
    time_axis = tuple(row[0] for row in proj)
    if arith.is_zero(time_axis[0]):
        raise DegenerateChartError("class span is horizontal; no chart keeps the time coordinate")
    e0 = tuple(x / time_axis[0] for x in time_axis)
    directions = tuple(gram_schmidt(cone.section_direction_basis(), arith))
    columns = np.array([[float(x) for x in e0]] + [[float(x) for x in e] for e in directions], dtype=float)
    kappa = 1.0 / float(np.linalg.svd(columns, compute_uv=False).max())
    if kappa < settings.min_chart_kappa:
        raise DegenerateChartError(f"chart constant {kappa:.3g} is below the minimum {settings.min_chart_kappa:g}")
    ineqs, eqs = [], []
    for g in cone.inequalities:
        row = (dot(g, e0), *(dot(g, e) for e in directions))
        if not all(arith.is_zero(x) for x in row):
            ineqs.append(row)
    for g in cone.equalities:
        row = (dot(g, e0), *(dot(g, e) for e in directions))
        if not all(arith.is_zero(x) for x in row):
            eqs.append(row)
    chart_dim = len(directions) + 1
    if not ineqs and not eqs:
        one, zero = arith.number(1), arith.number(0)
        ineqs.append(tuple(one if k == 0 else zero for k in range(chart_dim)))
    chart_cone = Cone.from_inequalities(ineqs, eqs, chart_dim, arith)
    return FibrationChart(base, e0, directions, kappa, chart_cone, cone, arith)


Node = tuple  # ("s", i) or ("t", j)


@dataclass(eq=False)
class CarriageGraph:
    """Support pairs (source -> target) and finite-cost return steps (target -> source) of one class."""

    label: str
    chart: FibrationChart
    graph: nx.DiGraph
    coords: dict  # node -> chart coordinates
    sources: tuple
    targets: tuple
    pairs: tuple

    @property
    def cone(self) -> Cone:
        return self.chart.cone

    def return_edges(self) -> list[tuple[Node, Node]]:
        return [(u, v) for u, v, kind in self.graph.edges(data="kind") if kind == "return"]


def build_carriage_graph(
    label: str,
    members: Sequence[int],
    instance: TransportInstance,
    plan: Plan,
    chart: FibrationChart,
) -> CarriageGraph:
    arith = instance.arith
    members = sorted(members)
    member_set = set(members)
    pairs = sorted((i, j) for i, j, _ in plan.entries if i in member_set)
    targets = sorted({j for _, j in pairs})
    graph = nx.DiGraph()
    coords = {}
    for i in members:
        node = ("s", i)
        graph.add_node(node, kind="source")
        coords[node] = chart.to_chart((arith.number(1), *instance.mu_points[i]))
    for j in targets:
        node = ("t", j)
        graph.add_node(node, kind="target")
        coords[node] = chart.to_chart((arith.number(0), *instance.nu_points[j]))
    for i, j in pairs:
        graph.add_edge(("s", i), ("t", j), kind="forward")
    if members and targets:
        src = arith.array([coords[("s", i)] for i in members]).reshape(len(members), -1)
        tgt = arith.array([coords[("t", j)] for j in targets]).reshape(len(targets), -1)
        for row, j in enumerate(targets):
            steps = finite_steps(chart.cone, src - tgt[row][None, :])
            for col in np.nonzero(steps)[0]:
                u, v = ("t", j), ("s", members[int(col)])
                if not graph.has_edge(u, v):
                    graph.add_edge(u, v, kind="return")
    logger.debug("carriage graph %s: %d sources, %d targets, %d edges", label, len(members), len(targets), graph.number_of_edges())
    return CarriageGraph(label, chart, graph, coords, tuple(("s", i) for i in members), tuple(("t", j) for j in targets), tuple(pairs))


def reach_set(graph: CarriageGraph, seed: Node) -> set:
    """Nodes reached from ``seed`` by axial paths (support pairs alternating with finite-cost returns)."""
    if seed not in graph.graph or not any(True for _ in graph.graph.successors(seed)) or seed[0] != "s":
        raise InputError(f"seed {seed} is not a source of the carriage")
    return {seed} | nx.descendants(graph.graph, seed)


@total_ordering
@dataclass(frozen=True, eq=False)
class TernaryValue:
    """``sum_n digits[n] * 3^-(n+1)`` with digits in {0, 2}; ordered lexicographically."""

    digits: tuple = ()

    def _padded(self, length: int) -> tuple:
        return self.digits + (0,) * (length - len(self.digits))

    def __eq__(self, other) -> bool:
        if not isinstance(other, TernaryValue):
            return NotImplemented
        n = max(len(self.digits), len(other.digits))
        return self._padded(n) == other._padded(n)

    def __lt__(self, other) -> bool:
        n = max(len(self.digits), len(other.digits))
        return self._padded(n) < other._padded(n)

    def __hash__(self) -> int:
        digits = list(self.digits)
        while digits and digits[-1] == 0:
            digits.pop()
        return hash(tuple(digits))

    def as_fraction(self) -> Fraction:
        return sum((Fraction(d, 3 ** (n + 1)) for n, d in enumerate(self.digits)), Fraction(0))

    def __float__(self) -> float:
        return float(self.as_fraction())

    def __str__(self) -> str:
        return "".join(str(d) for d in self.digits).rstrip("0") or "0"


ZERO = TernaryValue()


def theta_digit_max(values: Sequence[TernaryValue]) -> TernaryValue:
    return max(values, default=ZERO)


@dataclass(eq=False)
class ThetaField:
    seeds: tuple
    theta_prime: dict
    theta: dict = field(default_factory=dict)
    graph: CarriageGraph | None = None

    def level_classes(self, nodes: Sequence[Node] | None = None, *, use_theta: bool = False) -> dict:
        values = self.theta if use_theta else self.theta_prime
        out: dict = defaultdict(list)
        for node in nodes if nodes is not None else values:
            out[values[node]].append(node)
        return dict(out)


def theta_prime(graph: CarriageGraph, seeds: Sequence[Node] | None = None) -> ThetaField:
    """theta'(w) = sum over seeds n with w in H_n of 2 * 3^-(n+1)."""
    seeds = tuple(seeds) if seeds is not None else graph.sources
    digits = {node: [0] * len(seeds) for node in graph.graph.nodes}
    for n, seed in enumerate(seeds):
        for node in reach_set(graph, seed):
            digits[node][n] = 2
    return ThetaField(seeds, {node: TernaryValue(tuple(d)) for node, d in digits.items()}, graph=graph)


def theta_envelope(field: ThetaField, graph: CarriageGraph) -> ThetaField:
    """theta(w) = max theta'(w') over targets w' with ``w - w'`` a finite step; targets keep theta'."""
    theta = {}
    for node in graph.graph.nodes:
        if node[0] == "t":
            theta[node] = field.theta_prime[node]
        else:
            incoming = [field.theta_prime[u] for u in graph.graph.predecessors(node) if u[0] == "t"]
            theta[node] = theta_digit_max(incoming)
    field.theta = theta
    return field


def theta_at(field: ThetaField, point: Sequence) -> TernaryValue:
    """theta at an arbitrary chart point: envelope over the class targets below it."""
    graph = field.graph
    arith = graph.chart.arith
    point = arith.vector(point)
    if not graph.targets:
        return ZERO
    tgt = arith.array([graph.coords[node] for node in graph.targets]).reshape(len(graph.targets), -1)
    steps = finite_steps(graph.cone, arith.array([point]).reshape(1, -1) - tgt)
    return theta_digit_max([field.theta_prime[graph.targets[int(k)]] for k in np.nonzero(steps)[0]])


@dataclass(frozen=True, eq=False)
class Component:
    sources: tuple
    nodes: frozenset
    witness_cycle: tuple


def _witness_cycle(graph: nx.DiGraph, nodes: set, sources: list) -> tuple:
    sub_graph = graph.subgraph(nodes)
    cycle = [sources[0]]
    order = sources + [sources[0]]
    if len(sources) == 1:
        successor = next((v for v in sub_graph.successors(sources[0])), None)
        if successor is None:
            return ()
        path = [sources[0], successor] + nx.shortest_path(sub_graph, successor, sources[0])[1:]
        return tuple(path)
    for a, b in zip(order, order[1:]):
        cycle.extend(nx.shortest_path(sub_graph, a, b)[1:])
    return tuple(cycle)


def indecomposable_classes(graph: CarriageGraph) -> list[Component]:
    """Strongly connected components restricted to sources, each with a closed axial path through all its sources."""
    out = []
    for component in nx.strongly_connected_components(graph.graph):
        sources = sorted(node for node in component if node[0] == "s")
        if not sources:
            continue
        out.append(Component(tuple(sources), frozenset(component), _witness_cycle(graph.graph, set(component), sources)))
    out.sort(key=lambda c: c.sources[0])
    return out


def replay_cycle(graph: CarriageGraph, cycle: Sequence[Node]) -> bool:
    """True when every step of ``cycle`` is a support pair or a finite-cost return step and it closes."""
    if len(cycle) < 2 or cycle[0] != cycle[-1]:
        return False
    arith = graph.chart.arith
    pairs = set(graph.pairs)
    for u, v in zip(cycle, cycle[1:]):
        if u[0] == "s" and v[0] == "t":
            if (u[1], v[1]) not in pairs:
                return False
        elif u[0] == "t" and v[0] == "s":
            step = arith.array([sub(graph.coords[v], graph.coords[u])]).reshape(1, -1)
            if not finite_steps(graph.cone, step)[0]:
                return False
        else:
            return False
    return True


@dataclass(frozen=True, eq=False)
class SubClass:
    parent: str
    label: str
    ell: int
    members: tuple
    subcone: Cone
    active: frozenset
    affine_basis: tuple
    indecomposable: bool
    witness_cycle: tuple
    rounds: int
    round_cone: Cone  # cone of the round that found the witness cycle

    @property
    def cone(self) -> Cone:
        return self.subcone

    @property
    def h(self) -> int:
        return self.ell


def _pair_directions(instance: TransportInstance, plan: Plan, members: set) -> list[tuple]:
    arith = instance.arith
    return [
        (arith.number(1), *sub(instance.mu_points[i], instance.nu_points[j]))
        for i, j, _ in plan.entries
        if i in members
    ]


def _barycenter(directions: Sequence[tuple], arith: Arithmetic) -> tuple:
    count = arith.number(len(directions))
    return tuple(sum((d[k] for d in directions), arith.number(0)) / count for k in range(len(directions[0])))


def refine_partition(face_class: FaceClass, instance: TransportInstance, plan: Plan, settings: Settings) -> list[SubClass]:
    """Split a class into SCC pieces, shrinking to the face spanned by each piece's directions until stable."""
    arith = instance.arith
    lifted_cost = None
    if instance.cost is not None and not instance.cost.strictly_convex:
        lifted_cost = lift_cost(instance.cost)
    max_rounds = instance.dimension + 2
    queue = deque([(tuple(face_class.members), face_class.cone, 0)])
    finals = []
    while queue:
        members, cone, depth = queue.popleft()
        h = cone.section_dimension
        base = (arith.number(1), *instance.mu_points[members[0]])
        chart = to_fibration_coords(base, cone, settings)
        graph = build_carriage_graph(face_class.label, members, instance, plan, chart)
        for component in indecomposable_classes(graph):
            comp_members = [node[1] for node in component.sources]
            directions = _pair_directions(instance, plan, set(comp_members))
            subface = cone.face_containing(_barycenter(directions, arith))
            ell = subface.section_dimension
            pieces: dict[tuple, list[int]] = defaultdict(list)
            for i in comp_members:
                z = (arith.number(1), *instance.mu_points[i])
                pieces[affine_key(z, subface, arith, settings)].append(i)
            for piece in sorted(pieces.values()):
                if ell == h and len(pieces) == 1:
                    finals.append((tuple(piece), subface, ell, True, component.witness_cycle, depth, cone))
                elif depth + 1 >= max_rounds:
                    finals.append((tuple(piece), subface, ell, False, component.witness_cycle, depth, cone))
                else:
                    queue.append((tuple(piece), subface, depth + 1))
    finals.sort(key=lambda item: item[0][0])
    out = []
    for k, (members, subcone, ell, stable, cycle, depth, round_cone) in enumerate(finals):
        directions = _pair_directions(instance, plan, set(members))
        bary = _barycenter(directions, arith)
        active = lifted_active_set(lifted_cost, bary, arith) if lifted_cost is not None else frozenset()
        out.append(
            SubClass(
                parent=face_class.label,
                label=f"{face_class.label}.{k}",
                ell=ell,
                members=members,
                subcone=subcone,
                active=active,
                affine_basis=tuple(span_basis(subcone.span_basis(), arith)),
                indecomposable=stable,
                witness_cycle=cycle,
                rounds=depth + 1,
                round_cone=round_cone,
            )
        )
    logger.info("refined %s into %d subclasses (%d indecomposable)", face_class.label, len(out), sum(s.indecomposable for s in out))
    return out


@dataclass(frozen=True)
class GridSpec:
    """Rectangular chart grid: ``levels`` in time and ``resolution`` nodes per chart direction."""

    levels: tuple
    lower: tuple
    upper: tuple
    resolution: int

    def nodes(self, level) -> np.ndarray:
        axes = [np.linspace(float(lo), float(hi), self.resolution) for lo, hi in zip(self.lower, self.upper)]
        if not axes:
            return np.array([[float(level)]])
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
        return np.hstack([np.full((mesh.shape[0], 1), float(level)), mesh])

    @property
    def spacing(self) -> float:
        widths = [float(hi) - float(lo) for lo, hi in zip(self.lower, self.upper)]
        return max(widths, default=0.0) / max(self.resolution - 1, 1)


def evolve_max_plus(
    nodes_s: np.ndarray,
    values_s: np.ndarray,
    nodes_t: np.ndarray,
    cone: Cone,
    dilation: float = 0.0,
    *,
    chunk: int = 2048,
) -> np.ndarray:
    """``out(y) = max { values_s(x) : y - x in C_dilation }``; ``-1`` where nothing reaches ``y``.

    Values are integer ranks. Nodes carry their time level in column 0.
    """
    evolving = cone if dilation == 0 else cone.neighbourhood(dilation)
    float_cone = evolving
    if evolving.arith.exact:
        float_cone = Cone(
            evolving.dim,
            tuple(tuple(float(x) for x in g) for g in evolving.inequalities),
            tuple(tuple(float(x) for x in g) for g in evolving.equalities),
            evolving.rays,
            evolving.lines,
            arithmetic_for("float"),
        )
    nodes_s = np.asarray(nodes_s, dtype=float)
    nodes_t = np.asarray(nodes_t, dtype=float)
    values_s = np.asarray(values_s, dtype=int)
    out = np.full(nodes_t.shape[0], -1, dtype=int)
    if nodes_s.shape[0] == 0:
        return out
    for start in range(0, nodes_t.shape[0], chunk):
        block = nodes_t[start:start + chunk]
        diffs = (block[:, None, :] - nodes_s[None, :, :]).reshape(-1, nodes_s.shape[1])
        steps = finite_steps(float_cone, diffs).reshape(block.shape[0], nodes_s.shape[0])
        out[start:start + chunk] = np.where(steps, values_s[None, :], -1).max(axis=1)
    return out


@dataclass(frozen=True)
class EnvelopeReport:
    levels: tuple
    nodes: tuple  # per level array
    vartheta: tuple  # per level rank arrays
    theta: tuple  # per level rank arrays
    ranks: tuple  # rank -> TernaryValue
    excess_fraction: float


def grid_usc_envelope(field: ThetaField, grid: GridSpec, *, dilation: float | None = None) -> EnvelopeReport:
    """Upper semicontinuous envelope of theta on a chart grid, seeded by the class targets.

    The seeds move through the cone dilated by one grid spacing; ``theta`` on the
    same nodes uses the exact cone so the excess shows where the envelope is larger.
    """
    graph = field.graph
    arith = graph.chart.arith
    all_coords = np.asarray([[float(x) for x in graph.coords[node]] for node in graph.graph.nodes], dtype=float)
    if all_coords.size:
        lower = np.asarray([float(x) for x in grid.lower])
        upper = np.asarray([float(x) for x in grid.upper])
        slack = 1e-12 + grid.spacing * 1e-9
        if np.any(all_coords[:, 1:] < lower - slack) or np.any(all_coords[:, 1:] > upper + slack):
            raise GridCoverageError("grid does not cover the class nodes")
    ordered = sorted(set(field.theta_prime.values()))
    rank = {value: k for k, value in enumerate(ordered)}
    seed_nodes = np.asarray([[float(x) for x in graph.coords[node]] for node in graph.targets], dtype=float).reshape(len(graph.targets), -1)
    seed_values = np.asarray([rank[field.theta_prime[node]] for node in graph.targets], dtype=int)
    delta = grid.spacing if dilation is None else dilation
    nodes_out, vartheta_out, theta_out = [], [], []
    excess = total = 0
    for level in grid.levels:
        nodes = grid.nodes(level)
        vartheta = evolve_max_plus(seed_nodes, seed_values, nodes, graph.cone, delta)
        theta = evolve_max_plus(seed_nodes, seed_values, nodes, graph.cone, 0.0)
        nodes_out.append(nodes)
        vartheta_out.append(vartheta)
        theta_out.append(theta)
        reached = vartheta >= 0
        excess += int(np.sum(vartheta[reached] > theta[reached]))
        total += int(np.sum(reached))
    fraction = excess / total if total else 0.0
    logger.info("grid envelope %s: %d reached nodes, excess fraction %.4f", graph.label, total, fraction)
    return EnvelopeReport(tuple(grid.levels), tuple(nodes_out), tuple(vartheta_out), tuple(theta_out), tuple(ordered), fraction)


def grid_for_graph(graph: CarriageGraph, levels: Sequence, resolution: int, margin: float = 0.0) -> GridSpec:
    coords = np.asarray([[float(x) for x in graph.coords[node]] for node in graph.graph.nodes], dtype=float)
    lower = tuple(float(v) - margin for v in coords[:, 1:].min(axis=0))
    upper = tuple(float(v) + margin for v in coords[:, 1:].max(axis=0))
    return GridSpec(tuple(levels), lower, upper, resolution)

