"""Discrete Kantorovich problem: instances, plans and their dual potentials.

Rational mode solves with the in-house exact network simplex. Float mode uses
POT's ``ot.emd`` for full instances and scipy's HiGHS ``linprog`` when a
feasibility mask forbids pairs. Potentials always come from
``potentials_for_plan`` so a plan fixed by the caller (a map, an average of
maps) gets the same certificate as a solver output.

Sign convention: ``psi[j] - phi[i] <= c(y_j - x_i)`` with equality on the
support of the plan.
"""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import networkx as nx
import numpy as np
import ot
from scipy.optimize import linprog
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import NegativeCycleError, bellman_ford, csgraph_from_dense

from .cone_geometry import PolyhedralCost, piece_arrays
from .errors import (
    DimensionMismatchError,
    InfeasibleInstanceError,
    InputError,
    PlanNotOptimalError,
    UnbalancedWeightsError,
)
from .network_simplex import solve_transport
from .numeric import EXACT, Arithmetic

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TransportInstance:
    mu_points: tuple
    mu_weights: tuple
    nu_points: tuple
    nu_weights: tuple
    cost: PolyhedralCost | None
    cost_matrix: np.ndarray
    arith: Arithmetic
    mask: np.ndarray | None = None

    @property
    def dimension(self) -> int:
        return len(self.mu_points[0]) if self.mu_points else len(self.nu_points[0]) if self.nu_points else 0

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.mu_points), len(self.nu_points)

    def allowed(self, i: int, j: int) -> bool:
        return True if self.mask is None else bool(self.mask[i, j])

    def allowed_pairs(self) -> list[tuple[int, int]]:
        m, n = self.shape
        if self.mask is None:
            return [(i, j) for i in range(m) for j in range(n)]
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(self.mask))]

    def mu_array(self) -> np.ndarray:
        return self.arith.array(self.mu_points).reshape(len(self.mu_points), self.dimension)

    def nu_array(self) -> np.ndarray:
        return self.arith.array(self.nu_points).reshape(len(self.nu_points), self.dimension)


@dataclass(frozen=True, eq=False)
class Plan:
    """Sparse coupling ``(i, j, mass)`` with its objective and certifying potentials."""

    entries: tuple
    value: object
    phi: tuple = ()
    psi: tuple = ()
    source: str = "solve"
    stats: dict = field(default_factory=dict)
    primary_value: object = None  # primary cost, set when ``value`` is a secondary cost

    def support(self) -> list[tuple[int, int]]:
        return [(i, j) for i, j, _ in self.entries]

    def targets_of(self) -> dict[int, list[tuple[int, object]]]:
        out: dict[int, list] = {}
        for i, j, mass in self.entries:
            out.setdefault(i, []).append((j, mass))
        return out

    def sources_of(self) -> dict[int, list[tuple[int, object]]]:
        out: dict[int, list] = {}
        for i, j, mass in self.entries:
            out.setdefault(j, []).append((i, mass))
        return out


def _normalise(weights: list, arith: Arithmetic, label: str, normalize: bool) -> tuple:
    values = [arith.number(w) for w in weights]
    for k, w in enumerate(values):
        if not w > 0:
            raise UnbalancedWeightsError(f"{label} weight #{k} must be positive, got {w}")
    total = sum(values, arith.number(0))
    if not normalize:
        return tuple(values)
    return tuple(w / total for w in values)


def cost_matrix_for(cost: PolyhedralCost, mu: np.ndarray, nu: np.ndarray, arith: Arithmetic) -> np.ndarray:
    """``C[i, j] = c(y_j - x_i)``, vectorised over the pieces."""
    m, n = mu.shape[0], nu.shape[0]
    displacement = nu[None, :, :] - mu[:, None, :]
    if cost.strictly_convex:
        matrix = (displacement * displacement).sum(axis=2) / 2
    else:
        slopes, offsets = piece_arrays(cost, arith.exact)
        values = displacement.reshape(m * n, -1) @ slopes.T + offsets[None, :]
        matrix = values.max(axis=1).reshape(m, n)
    if arith.exact:
        matrix = matrix.astype(object)
        if m and n and min(matrix.reshape(-1)) < 0:
            raise InputError("cost is negative on some displacement between the marginals")
    else:
        matrix = np.asarray(matrix, dtype=float)
        if matrix.size and matrix.min() < -arith.tol:
            raise InputError("cost is negative on some displacement between the marginals")
    return matrix


def check_mask_feasible(mu_weights: Sequence, nu_weights: Sequence, mask: np.ndarray, arith: Arithmetic) -> bool:
    """Max-flow test: can all of mu reach nu through allowed pairs?"""
    graph = nx.DiGraph()
    for i, w in enumerate(mu_weights):
        graph.add_edge("source", ("s", i), capacity=w)
    for j, w in enumerate(nu_weights):
        graph.add_edge(("t", j), "sink", capacity=w)
    for i, j in zip(*np.nonzero(mask)):
        graph.add_edge(("s", int(i)), ("t", int(j)))
    if "source" not in graph or "sink" not in graph:
        return False
    value = nx.maximum_flow_value(graph, "source", "sink")
    total = sum(mu_weights, arith.number(0))
    return arith.eq(value, total)


def build_instance(
    mu: Sequence[tuple[Sequence, object]],
    nu: Sequence[tuple[Sequence, object]],
    cost: PolyhedralCost | None,
    arith: Arithmetic = EXACT,
    *,
    mask: np.ndarray | None = None,
    cost_matrix: np.ndarray | None = None,
    normalize: bool = True,
) -> TransportInstance:
    """Validate and normalise marginals, then tabulate the cost.

    With ``normalize=False`` the totals must already agree.
    """
    mu_points = tuple(arith.vector(p) for p, _ in mu)
    nu_points = tuple(arith.vector(p) for p, _ in nu)
    dims = {len(p) for p in mu_points + nu_points}
    if cost is not None:
        dims.add(cost.dimension)
    if len(dims) > 1:
        raise DimensionMismatchError(f"marginals and cost disagree on the dimension: {sorted(dims)}")
    if not mu_points or not nu_points:
        raise UnbalancedWeightsError("both marginals need at least one atom")
    mu_weights = _normalise([w for _, w in mu], arith, "mu", normalize)
    nu_weights = _normalise([w for _, w in nu], arith, "nu", normalize)
    mu_total, nu_total = sum(mu_weights, arith.number(0)), sum(nu_weights, arith.number(0))
    if not arith.eq(mu_total, nu_total):
        raise UnbalancedWeightsError(f"marginal totals differ: mu={mu_total}, nu={nu_total}")

    if cost_matrix is None:
        if cost is None:
            raise InputError("either a cost or a cost matrix is required")
        mu_arr = arith.array(mu_points).reshape(len(mu_points), -1)
        nu_arr = arith.array(nu_points).reshape(len(nu_points), -1)
        cost_matrix = cost_matrix_for(cost, mu_arr, nu_arr, arith)
    else:
        cost_matrix = arith.array(cost_matrix)
        if cost_matrix.shape != (len(mu_points), len(nu_points)):
            raise DimensionMismatchError(f"cost matrix has shape {cost_matrix.shape}, expected {(len(mu_points), len(nu_points))}")

    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != cost_matrix.shape:
            raise DimensionMismatchError(f"mask has shape {mask.shape}, expected {cost_matrix.shape}")
        if not check_mask_feasible(mu_weights, nu_weights, mask, arith):
            raise InfeasibleInstanceError("the feasibility mask admits no transport plan")
    return TransportInstance(mu_points, mu_weights, nu_points, nu_weights, cost, cost_matrix, arith, mask)


def plan_cost(instance: TransportInstance, entries: Sequence[tuple[int, int, object]], matrix: np.ndarray | None = None):
    matrix = instance.cost_matrix if matrix is None else matrix
    return sum((matrix[i, j] * mass for i, j, mass in entries), instance.arith.number(0))


def _bellman_ford_float(instance: TransportInstance, entries, slack: float) -> tuple[np.ndarray, np.ndarray]:
    """Maximal potentials below 0 for the bipartite constraint graph (float).

    Nodes are the sources, then the targets, then a root joined to both at
    weight 0. Support return edges carry ``slack`` so rounding on zero-cost
    exchange cycles never reads as a negative cycle.
    """
    m, n = instance.shape
    matrix = np.asarray(instance.cost_matrix, dtype=float)
    if instance.mask is not None:
        matrix = np.where(instance.mask, matrix, np.inf)
    dense = np.full((m + n + 1, m + n + 1), np.inf)
    dense[:m, m : m + n] = matrix
    rows = np.array([i for i, _, _ in entries], dtype=int)
    cols = np.array([j for _, j, _ in entries], dtype=int)
    dense[m + cols, rows] = -matrix[rows, cols] + slack
    dense[m + n, : m + n] = 0.0
    graph = csgraph_from_dense(dense, null_value=np.inf)
    try:
        dist = bellman_ford(graph, directed=True, indices=m + n)
    except NegativeCycleError:
        raise PlanNotOptimalError("plan admits no dual potentials (negative exchange cycle on its support)") from None
    return dist[:m], dist[m : m + n]


def potentials_for_plan(instance: TransportInstance, entries: Sequence[tuple[int, int, object]]) -> tuple[tuple, tuple]:
    """Potentials certifying ``entries``: ``psi[j] - phi[i] <= C[i, j]``, equal on the support.

    Returns the largest such pair with all values <= 0. A negative cycle means
    the plan is not optimal.
    """
    arith = instance.arith
    if not arith.exact:
        phi, psi = _bellman_ford_float(instance, entries, slack=arith.tol * max(1.0, float(np.abs(np.asarray(instance.cost_matrix, dtype=float)).max(initial=0.0))))
        return tuple(float(x) for x in phi), tuple(float(x) for x in psi)
    m, n = instance.shape
    graph = nx.DiGraph()
    zero = Fraction(0)
    for i in range(m):
        graph.add_edge("root", ("s", i), weight=zero)
    for j in range(n):
        graph.add_edge("root", ("t", j), weight=zero)
    for i, j in instance.allowed_pairs():
        graph.add_edge(("s", i), ("t", j), weight=instance.cost_matrix[i, j])
    for i, j, _ in entries:
        graph.add_edge(("t", j), ("s", i), weight=-instance.cost_matrix[i, j])
    try:
        dist = nx.single_source_bellman_ford_path_length(graph, "root", weight="weight")
    except nx.NetworkXUnbounded:
        raise PlanNotOptimalError("plan admits no dual potentials (negative exchange cycle on its support)") from None
    return tuple(dist[("s", i)] for i in range(m)), tuple(dist[("t", j)] for j in range(n))


def _check_marginals(instance: TransportInstance, entries) -> None:
    arith = instance.arith
    m, n = instance.shape
    rows = [arith.number(0)] * m
    cols = [arith.number(0)] * n
    for i, j, mass in entries:
        if not instance.allowed(i, j):
            raise InfeasibleInstanceError(f"plan uses forbidden pair ({i}, {j})")
        rows[i] += mass
        cols[j] += mass
    for label, got, want in (("row", rows, instance.mu_weights), ("column", cols, instance.nu_weights)):
        for k, (a, b) in enumerate(zip(got, want)):
            if not arith.eq(a, b):
                raise UnbalancedWeightsError(f"plan {label} {k} carries {a}, marginal weight is {b}")


def plan_from_entries(
    instance: TransportInstance,
    entries: Sequence[tuple[int, int, object]],
    *,
    source: str = "given",
    with_potentials: bool = True,
) -> Plan:
    """Validate a supplied coupling and attach its value and (optionally) potentials."""
    arith = instance.arith
    merged: dict[tuple[int, int], object] = {}
    for i, j, mass in entries:
        mass = arith.number(mass)
        if arith.is_zero(mass):
            continue
        merged[(int(i), int(j))] = merged.get((int(i), int(j)), arith.number(0)) + mass
    clean = tuple((i, j, mass) for (i, j), mass in sorted(merged.items()))
    _check_marginals(instance, clean)
    phi, psi = potentials_for_plan(instance, clean) if with_potentials else ((), ())
    return Plan(clean, plan_cost(instance, clean), phi, psi, source=source)


def _solve_exact(instance: TransportInstance, matrix: np.ndarray) -> list[tuple[int, int, object]]:
    costs = {(i, j): matrix[i, j] for i, j in instance.allowed_pairs()}
    solution = solve_transport(instance.mu_weights, instance.nu_weights, costs)
    return [(i, j, mass) for (i, j), mass in sorted(solution.flows.items())]


def _solve_emd(instance: TransportInstance, matrix: np.ndarray) -> list[tuple[int, int, float]]:
    a = np.asarray(instance.mu_weights, dtype=float)
    b = np.asarray(instance.nu_weights, dtype=float)
    coupling, log = ot.emd(a, b, np.ascontiguousarray(np.asarray(matrix, dtype=float)), numItermax=10_000_000, log=True)
    if log.get("warning"):
        logger.warning("ot.emd: %s", log["warning"])
    threshold = 1e-14 * max(1.0, float(coupling.max(initial=0.0)))
    return [(int(i), int(j), float(coupling[i, j])) for i, j in zip(*np.nonzero(coupling > threshold))]


def _solve_masked_lp(instance: TransportInstance, matrix: np.ndarray) -> list[tuple[int, int, float]]:
    pairs = instance.allowed_pairs()
    m, n = instance.shape
    k = len(pairs)
    rows = [i for i, _ in pairs] + [m + j for _, j in pairs]
    cols = list(range(k)) * 2
    a_eq = coo_matrix((np.ones(2 * k), (rows, cols)), shape=(m + n, k)).tocsr()
    b_eq = np.concatenate([np.asarray(instance.mu_weights, dtype=float), np.asarray(instance.nu_weights, dtype=float)])
    c = np.array([float(matrix[i, j]) for i, j in pairs])
    result = linprog(c, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if result.status == 2:
        raise InfeasibleInstanceError("the feasibility mask admits no transport plan")
    if not result.success:
        raise InfeasibleInstanceError(f"masked transport LP failed: {result.message}")
    threshold = 1e-14
    return [(i, j, float(x)) for (i, j), x in zip(pairs, result.x) if x > threshold]


def _solve(instance: TransportInstance, matrix: np.ndarray) -> list[tuple[int, int, object]]:
    if instance.arith.exact:
        return _solve_exact(instance, matrix)
    if instance.mask is None:
        return _solve_emd(instance, matrix)
    return _solve_masked_lp(instance, matrix)


def _snap_float_entries(instance: TransportInstance, entries):
    """Drop float round-off so row sums match the weights to machine precision."""
    return [(i, j, mass) for i, j, mass in entries if mass > instance.arith.tol * 1e-3]


def solve_primal(instance: TransportInstance) -> Plan:
    started = time.perf_counter()
    entries = _solve(instance, instance.cost_matrix)
    if not instance.arith.exact:
        entries = _snap_float_entries(instance, entries)
    phi, psi = potentials_for_plan(instance, entries)
    value = plan_cost(instance, entries)
    elapsed = time.perf_counter() - started
    logger.info("solved %dx%d instance (%s): value=%s support=%d in %.3fs", *instance.shape, instance.arith.mode, value, len(entries), elapsed)
    return Plan(tuple(entries), value, phi, psi, source="solve", stats={"seconds": round(elapsed, 6)})


def secondary_matrix(instance: TransportInstance, secondary: PolyhedralCost) -> np.ndarray:
    return cost_matrix_for(secondary, instance.mu_array(), instance.nu_array(), instance.arith)


def solve_constrained(instance: TransportInstance, secondary: PolyhedralCost) -> Plan:
    """Optimal plan for the secondary cost on the allowed pairs.

    ``value`` and the potentials refer to the secondary cost; ``primary_value`` carries the primary cost.
    """
    matrix = secondary_matrix(instance, secondary)
    entries = _solve(instance, matrix)
    if not instance.arith.exact:
        entries = _snap_float_entries(instance, entries)
    secondary_instance = replace(instance, cost=secondary, cost_matrix=matrix)
    phi, psi = potentials_for_plan(secondary_instance, entries)
    return Plan(
        tuple(entries),
        plan_cost(instance, entries, matrix),
        phi,
        psi,
        source="secondary",
        primary_value=plan_cost(instance, entries),
    )


def dual_value(instance: TransportInstance, plan: Plan):
    arith = instance.arith
    gain = sum((w * p for w, p in zip(instance.nu_weights, plan.psi)), arith.number(0))
    loss = sum((w * p for w, p in zip(instance.mu_weights, plan.phi)), arith.number(0))
    return gain - loss


def optimal_permutation_plans(instance: TransportInstance, *, max_size: int = 6) -> list[Plan]:
    """All optimal permutation plans of a square instance with uniform weights."""
    m, n = instance.shape
    arith = instance.arith
    if m != n or m > max_size:
        raise InputError(f"permutation enumeration needs a square instance of size <= {max_size}, got {m}x{n}")
    if len(set(instance.mu_weights) | set(instance.nu_weights)) != 1:
        raise InputError("permutation enumeration needs uniform weights")
    weight = instance.mu_weights[0]
    best = None
    winners = []
    for perm in itertools.permutations(range(n)):
        if not all(instance.allowed(i, j) for i, j in enumerate(perm)):
            continue
        value = sum((instance.cost_matrix[i, j] for i, j in enumerate(perm)), arith.number(0)) * weight
        if best is None or arith.lt(value, best):
            best, winners = value, [perm]
        elif arith.eq(value, best):
            winners.append(perm)
    return [Plan(tuple((i, j, weight) for i, j in enumerate(perm)), best, source="permutation") for perm in winners]
