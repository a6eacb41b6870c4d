"""Desk-scale checks of the measure statements: histograms, area estimates, residual scaling, invariants."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .cone_geometry import Cone, cone_diamond, lifted_value
from .config import Settings
from .errors import EmptyDecompositionError, ParameterOrderError, PlanNotOptimalError, SudakovError
from .lifting_potential import superdiff_pairs
from .numeric import Arithmetic, sub
from .ot_solver import dual_value, potentials_for_plan
from .refinement import (
    build_carriage_graph,
    indecomposable_classes,
    replay_cycle,
    theta_envelope,
    theta_prime,
    to_fibration_coords,
)

logger = logging.getLogger(__name__)

PASS, FAIL, SKIPPED = "pass", "fail", "skipped"

CHECK_NAMES = (
    "marginals",
    "duality_gap",
    "cyclical_monotonicity",
    "lax_monotonicity",
    "diamond_inclusion",
    "class_consistency",
    "transitivity",
    "scc_theta_agreement",
    "theta_on_pairs",
    "theta_cone_monotone",
    "subcone_extremality",
    "witness_cycles",
    "map_feasibility",
    "pushforward",
    "face_optimality",
    "mass_conservation",
)


@dataclass(frozen=True)
class ClassHistogram:
    label: str
    h: int
    mass: object
    samples: int
    counts: tuple
    edges: tuple
    flagged: bool
    top_share: float


@dataclass(frozen=True)
class DisintegrationReport:
    classes: tuple
    quotient_weights: dict  # label -> class mass
    residual_mass: object
    total_mass: object
    bins: int

    @property
    def flagged(self) -> tuple:
        return tuple(c.label for c in self.classes if c.flagged)

    @property
    def unaccounted_mass(self):
        """Total mass minus the class and outside masses."""
        return self.total_mass - sum(self.quotient_weights.values(), 0 * self.total_mass) - self.residual_mass


def _concentration(counts: np.ndarray) -> float:
    occupied = np.sort(counts[counts > 0])[::-1]
    if occupied.size == 0:
        return 0.0
    top = max(1, math.ceil(0.01 * occupied.size))
    return float(occupied[:top].sum() / occupied.sum())


def disintegration_report(
    classes: Sequence,
    instance,
    settings: Settings,
    *,
    outside: Sequence[int] = (),
    reference: dict | None = None,
) -> DisintegrationReport:
    """Histogram each class's members along its chart; flag mass piled into very few bins.

    ``outside`` lists the source atoms that belong to no class (fixed and residual);
    their mass is summed on its own so that a lost atom shows up as unaccounted mass.
    ``reference`` maps a class label to extra ``(point, weight)`` samples on ``t = 1``.
    """
    if not classes:
        raise EmptyDecompositionError("no classes to disintegrate")
    arith = instance.arith
    rows = []
    for cls in classes:
        base = (arith.number(1), *instance.mu_points[cls.members[0]])
        chart = to_fibration_coords(base, cls.cone, settings)
        points = [(arith.number(1), *instance.mu_points[i]) for i in cls.members]
        weights = [float(instance.mu_weights[i]) for i in cls.members]
        for point, weight in (reference or {}).get(cls.label, []):
            points.append((arith.number(1), *arith.vector(point)))
            weights.append(float(weight))
        mass = sum((instance.mu_weights[i] for i in cls.members), arith.number(0))
        h = chart.h
        if h == 0:
            rows.append(ClassHistogram(cls.label, 0, mass, len(points), (float(sum(weights)),), (), False, 1.0))
            continue
        coords = np.asarray([[float(x) for x in chart.to_chart(p)[1:]] for p in points], dtype=float)
        counts, edges = np.histogramdd(coords, bins=settings.histogram_bins, weights=np.asarray(weights))
        share = _concentration(counts.reshape(-1))
        flagged = h >= 1 and len(points) >= settings.min_histogram_samples and share >= 0.5
        if flagged:
            logger.warning("class %s: %.0f%% of its mass sits in the top 1%% of bins", cls.label, 100 * share)
        rows.append(
            ClassHistogram(
                cls.label,
                h,
                mass,
                len(points),
                tuple(float(c) for c in counts.reshape(-1)),
                tuple(tuple(float(e) for e in edge) for edge in edges),
                flagged,
                share,
            )
        )
    total = sum(instance.mu_weights, arith.number(0))
    return DisintegrationReport(
        classes=tuple(rows),
        quotient_weights={c.label: c.mass for c in rows},
        residual_mass=sum((instance.mu_weights[i] for i in outside), arith.number(0)),
        total_mass=total,
        bins=settings.histogram_bins,
    )


@dataclass(frozen=True)
class AreaEstimate:
    h: int
    resolution: int
    scale: Fraction
    focal_point: tuple
    size: int
    inner_count: int
    ratio: Fraction
    bound: float
    passed: bool


def _check_levels(t_bar, s, eps) -> None:
    if not (0 < eps < s <= t_bar):
        raise ParameterOrderError(f"area estimate needs 0 < eps < s <= t_bar, got eps={eps}, s={s}, t_bar={t_bar}")


def _focal_point(cone: Cone, corners: list[tuple], t_bar: Fraction, eps: Fraction, shrink: Fraction) -> tuple:
    """Focal point at level ``eps`` from which every corner is reached inside the shrunk cone."""
    inner = cone.neighbourhood(-shrink)
    if inner is None:
        raise ParameterOrderError("cone section is too thin for the requested shrink")
    h = len(corners[0])
    center = tuple(sum((c[k] for c in corners), Fraction(0)) / len(corners) for k in range(h))
    forward = [r for r in inner.rays if r[0] > 0]
    recession = [r[1:] for r in inner.rays if r[0] == 0]
    span = t_bar - eps
    drift = tuple(Fraction(0) for _ in range(h))
    if forward:
        drift = tuple(sum((Fraction(r[k + 1]) / Fraction(r[0]) for r in forward), Fraction(0)) / len(forward) for k in range(h))
    push = tuple(sum((Fraction(r[k]) for r in recession), Fraction(0)) for k in range(h))
    width = max((abs(a - b) for c in corners for a, b in zip(c, center)), default=Fraction(1)) or Fraction(1)
    for k in range(0, 64):
        focal = tuple(c - span * d - Fraction(k) * width * p for c, d, p in zip(center, drift, push))
        if all(inner.contains((span, *sub(corner, focal))) for corner in corners):
            return focal
        if not recession:
            break
    raise ParameterOrderError("no focal point reaches the whole set inside the shrunk cone")


def _range_on_axis(lo: Fraction, delta: Fraction, focal: Fraction, scale: Fraction, size: int):
    """Level-s cells on one axis with the S-index range of their preimage under the homothety."""
    image_lo = focal + scale * (lo - focal)
    image_hi = focal + scale * (lo + size * delta - focal)
    first = math.floor((image_lo - lo) / delta)
    last = math.ceil((image_hi - lo) / delta)
    rows = []
    for k in range(first, last):
        a = (lo + k * delta - focal) / scale + focal
        b = (lo + (k + 1) * delta - focal) / scale + focal
        rows.append((math.floor((a - lo) / delta), math.ceil((b - lo) / delta)))
    return rows


def _box_sum(table: np.ndarray, lows: np.ndarray, highs: np.ndarray) -> np.ndarray:
    """Sums of the mask over half-open index boxes via a padded summed-area table."""
    h = lows.shape[1]
    total = np.zeros(lows.shape[0], dtype=np.int64)
    for corner in itertools.product((0, 1), repeat=h):
        index = tuple(np.where(np.array(corner)[None, :] == 1, highs, lows).T)
        sign = (-1) ** (h - sum(corner))
        total += sign * table[index]
    return total


def area_estimate_check(
    cone: Cone,
    region: tuple,
    t_bar,
    s,
    eps,
    resolution: int,
    slack: float,
    *,
    mask: np.ndarray | None = None,
    shrink=Fraction(1, 100),
) -> AreaEstimate:
    """Grid check of the inner area estimate for rays converging to a focal point at level ``eps``.

    ``region`` is ``(lower, upper)`` of a box in the section at level ``t_bar``;
    ``mask`` (resolution^h booleans) selects the grid cells of S, the full box by default.
    The map to level ``s`` is the homothety with ratio ``(s - eps) / (t_bar - eps)``.

    The count is over homothety images of grid cells of the box: a cell counts when its
    image lies inside S. The cone only places the focal point (every corner of the box must
    be reached inside the shrunk cone); its shape does not enter the count otherwise, so
    two cones giving the same focal point give the same estimate.
    """
    t_bar, s, eps = Fraction(t_bar), Fraction(s), Fraction(eps)
    _check_levels(t_bar, s, eps)
    lower = tuple(Fraction(x) for x in region[0])
    upper = tuple(Fraction(x) for x in region[1])
    h = len(lower)
    if mask is None:
        mask = np.ones((resolution,) * h, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    delta = tuple((b - a) / resolution for a, b in zip(lower, upper))
    corners = list(itertools.product(*zip(lower, upper)))
    focal = _focal_point(cone, corners, t_bar, eps, Fraction(shrink))
    scale = (s - eps) / (t_bar - eps)
    axes = [_range_on_axis(lower[k], delta[k], focal[k], scale, resolution) for k in range(h)]
    table = np.zeros(tuple(n + 1 for n in mask.shape), dtype=np.int64)
    table[(slice(1, None),) * h] = mask.astype(np.int64)
    for axis in range(h):
        table = np.cumsum(table, axis=axis)
    combos = list(itertools.product(*axes))
    inner = 0
    if combos:
        lows = np.array([[r[0] for r in combo] for combo in combos], dtype=np.int64)
        highs = np.array([[r[1] for r in combo] for combo in combos], dtype=np.int64)
        inside = np.all((lows >= 0) & (highs <= resolution), axis=1)
        lows, highs = lows[inside], highs[inside]
        if lows.size:
            cells = np.prod(highs - lows, axis=1)
            inner = int(np.sum(_box_sum(table, lows, highs) == cells))
    size = int(mask.sum())
    ratio = Fraction(inner, size) if size else Fraction(0)
    bound = float(scale) ** h * (1 - slack)
    passed = float(ratio) >= bound
    logger.info("area estimate h=%d res=%d: ratio %.5f, bound %.5f", h, resolution, float(ratio), bound)
    return AreaEstimate(h, resolution, scale, focal, size, inner, ratio, bound, passed)


@dataclass(frozen=True)
class SweepReport:
    estimates: tuple
    monotone: bool


def area_estimate_sweep(cone: Cone, region: tuple, t_bar, s, eps, resolutions: Sequence[int], slack: float) -> SweepReport:
    estimates = tuple(area_estimate_check(cone, region, t_bar, s, eps, n, slack) for n in resolutions)
    monotone = all(a.ratio <= b.ratio for a, b in zip(estimates, estimates[1:]))
    return SweepReport(estimates, monotone)


@dataclass(frozen=True)
class ScalingReport:
    rows: tuple  # (n, residual mass)
    monotone: bool


def residual_scaling(sizes: Sequence[int], builder: Callable[[int], object]) -> ScalingReport:
    """Residual mass per sample size; ``builder(n)`` returns a partition result."""
    rows = []
    for n in sizes:
        partition = builder(n)
        rows.append((n, float(partition.residual_mass)))
    monotone = all(b[1] <= a[1] + 1e-12 for a, b in zip(rows, rows[1:]))
    return ScalingReport(tuple(rows), monotone)


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str
    detail: str = ""
    witness: object = None


def _cycle_violation(instance, entries, limit: int):
    """Smallest exchange of length 2 or 3 that lowers the cost, or None."""
    arith = instance.arith
    support = [(i, j) for i, j, _ in entries][:limit]
    matrix = instance.cost_matrix
    for length in (2, 3):
        for combo in itertools.combinations(range(len(support)), length):
            pairs = [support[k] for k in combo]
            if len({i for i, _ in pairs}) < length or len({j for _, j in pairs}) < length:
                continue
            for order in itertools.permutations(pairs):
                if order[0] != pairs[0]:
                    continue
                if any(not instance.allowed(order[k][0], order[(k + 1) % length][1]) for k in range(length)):
                    continue
                before = sum((matrix[i, j] for i, j in order), arith.number(0))
                after = sum((matrix[order[k][0], order[(k + 1) % length][1]] for k in range(length)), arith.number(0))
                if arith.lt(after, before):
                    return list(order)
    return None


class _Suite:
    def __init__(self, artifacts, settings: Settings):
        self.a = artifacts
        self.settings = settings
        self.arith: Arithmetic = artifacts.instance.arith
        self.rng = np.random.default_rng(settings.seed)

    def marginals(self):
        inst, plan = self.a.instance, self.a.plan
        m, n = inst.shape
        rows = [self.arith.number(0)] * m
        cols = [self.arith.number(0)] * n
        for i, j, mass in plan.entries:
            rows[i] += mass
            cols[j] += mass
        bad = [("row", k) for k, (a, b) in enumerate(zip(rows, inst.mu_weights)) if not self.arith.eq(a, b)]
        bad += [("column", k) for k, (a, b) in enumerate(zip(cols, inst.nu_weights)) if not self.arith.eq(a, b)]
        return CheckResult("marginals", FAIL, "plan marginals differ from the weights", bad[:5]) if bad else CheckResult("marginals", PASS)

    def duality_gap(self):
        inst, plan = self.a.instance, self.a.plan
        try:
            phi, psi = potentials_for_plan(inst, plan.entries)
        except PlanNotOptimalError as exc:
            witness = _cycle_violation(inst, plan.entries, len(plan.entries))
            return CheckResult("duality_gap", FAIL, str(exc), witness)
        dual = dual_value(inst, replace(plan, phi=phi, psi=psi))
        if not self.arith.eq(dual, plan.value):
            return CheckResult("duality_gap", FAIL, f"primal {plan.value} vs dual {dual}")
        return CheckResult("duality_gap", PASS, f"value {plan.value}")

    def cyclical_monotonicity(self):
        inst, plan = self.a.instance, self.a.plan
        limit = self.settings.max_monotonicity_support
        witness = _cycle_violation(inst, plan.entries, limit)
        if witness:
            return CheckResult("cyclical_monotonicity", FAIL, "an exchange cycle lowers the cost", witness)
        detail = "" if len(plan.entries) <= limit else f"first {limit} support pairs"
        return CheckResult("cyclical_monotonicity", PASS, detail)

    def _sample_points(self, count: int) -> list[tuple]:
        inst, plan = self.a.instance, self.a.plan
        one, half, zero = self.arith.number(1), self.arith.number(Fraction(1, 2)), self.arith.number(0)
        points = []
        for i, j, _ in plan.entries[:count]:
            x, y = inst.mu_points[i], inst.nu_points[j]
            points.append((one, *x))
            points.append((zero, *y))
            points.append((half, *(half * (a + b) for a, b in zip(x, y))))
        return points

    def lax_monotonicity(self):
        fld, lifted = self.a.potential, self.a.lifted
        points = self._sample_points(12)
        values = [fld.value(p) for p in points]
        for (p, vp), (q, vq) in itertools.permutations(zip(points, values), 2):
            if not self.arith.leq(q[0], p[0]) or (isinstance(vq, float) and math.isinf(vq)):
                continue
            cost = lifted_value(lifted, sub(p, q), self.arith)
            if isinstance(cost, float) and math.isinf(cost):
                continue
            if not self.arith.leq(vp - vq, cost):
                return CheckResult("lax_monotonicity", FAIL, "potential increases faster than the cost", (p, q))
        return CheckResult("lax_monotonicity", PASS, f"{len(points)} points")

    def diamond_inclusion(self):
        inst, plan, fld, lifted = self.a.instance, self.a.plan, self.a.potential, self.a.lifted
        class_of = self.a.partition.class_of()
        tested = 0
        for i, j, _ in plan.entries:
            cls = class_of.get(i)
            if cls is None:
                continue
            z = (self.arith.number(1), *inst.mu_points[i])
            zp = (self.arith.number(0), *inst.nu_points[j])
            diamond = cone_diamond(zp, z, cls.cone)
            top, bottom = fld.value(z), fld.value(zp)
            for p in diamond.sample(self.rng, 3):
                if not (self.arith.lt(0, p[0]) and self.arith.lt(p[0], 1)):
                    continue
                vp = fld.value(p)
                up = lifted_value(lifted, sub(z, p), self.arith)
                down = lifted_value(lifted, sub(p, zp), self.arith)
                if not (self.arith.eq(top - vp, up) and self.arith.eq(vp - bottom, down)):
                    return CheckResult("diamond_inclusion", FAIL, f"diamond point off the optimal rays of pair ({i}, {j})", p)
            tested += 1
            if tested >= 10:
                break
        return CheckResult("diamond_inclusion", PASS, f"{tested} pairs")

    def class_consistency(self):
        by_index = {c.index: c for c in self.a.partition.classifications}
        for cls in self.a.partition.classes:
            sets = {by_index[i].active for i in cls.members}
            if len(sets) != 1:
                return CheckResult("class_consistency", FAIL, f"class {cls.label} mixes active sets", cls.label)
        return CheckResult("class_consistency", PASS)

    def transitivity(self):
        inst, plan, fld, lifted = self.a.instance, self.a.plan, self.a.potential, self.a.lifted
        half = self.arith.number(Fraction(1, 2))
        for i, j, _ in plan.entries[:10]:
            z = (self.arith.number(1), *inst.mu_points[i])
            zp = (self.arith.number(0), *inst.nu_points[j])
            mid = tuple(half * (a + b) for a, b in zip(z, zp))
            first = superdiff_pairs(fld, lifted, z, [mid, zp], candidate_values=[fld.value(mid), fld.at_target(j)])
            second = superdiff_pairs(fld, lifted, mid, [zp], candidate_values=[fld.at_target(j)])
            if 0 in first.backward and 0 in second.backward and 1 not in first.backward:
                return CheckResult("transitivity", FAIL, f"pair ({i}, {j}) breaks the chain", (z, mid, zp))
        return CheckResult("transitivity", PASS)

    def _graphs(self):
        return getattr(self.a, "graphs", {}) or {}

    def scc_theta_agreement(self):
        graphs = self._graphs()
        if not graphs:
            return CheckResult("scc_theta_agreement", SKIPPED, "no refinement graphs")
        for label, graph in graphs.items():
            if len(graph.sources) > 4 * self.settings.max_monotonicity_support:
                continue
            field_ = theta_prime(graph)
            levels = {frozenset(v) for v in field_.level_classes(graph.sources).values()}
            comps = {frozenset(c.sources) for c in indecomposable_classes(graph)}
            if levels != comps:
                return CheckResult("scc_theta_agreement", FAIL, f"class {label}: components differ from theta levels", label)
        return CheckResult("scc_theta_agreement", PASS)

    def _thetas(self):
        thetas = getattr(self.a, "thetas", None)
        if thetas:
            return thetas
        out = {}
        for label, graph in self._graphs().items():
            out[label] = theta_envelope(theta_prime(graph), graph)
        return out

    def theta_on_pairs(self):
        thetas = self._thetas()
        if not thetas:
            return CheckResult("theta_on_pairs", SKIPPED, "no refinement graphs")
        for label, fld in thetas.items():
            for i, j in fld.graph.pairs:
                a, b = ("s", i), ("t", j)
                if fld.theta_prime[a] != fld.theta_prime[b] or fld.theta[a] != fld.theta[b]:
                    return CheckResult("theta_on_pairs", FAIL, f"class {label}: theta differs on pair ({i}, {j})", (i, j))
        return CheckResult("theta_on_pairs", PASS)

    def theta_cone_monotone(self):
        thetas = self._thetas()
        if not thetas:
            return CheckResult("theta_cone_monotone", SKIPPED, "no refinement graphs")
        for label, fld in thetas.items():
            for u, v in fld.graph.return_edges():
                if fld.theta[v] < fld.theta[u]:
                    return CheckResult("theta_cone_monotone", FAIL, f"class {label}: theta drops along a cone step", (u, v))
        return CheckResult("theta_cone_monotone", PASS)

    def _subclasses(self):
        return [(label, sub_) for label, subs in (getattr(self.a, "refinements", {}) or {}).items() for sub_ in subs]

    def subcone_extremality(self):
        subs = self._subclasses()
        if not subs:
            return CheckResult("subcone_extremality", SKIPPED, "no refinement")
        inst, plan = self.a.instance, self.a.plan
        parents = {c.label: c for c in self.a.partition.classes}
        for label, sub_ in subs:
            members = set(sub_.members)
            for i, j, _ in plan.entries:
                if i in members and not sub_.subcone.contains((self.arith.number(1), *sub(inst.mu_points[i], inst.nu_points[j]))):
                    return CheckResult("subcone_extremality", FAIL, f"{sub_.label}: pair ({i}, {j}) leaves the subcone", (i, j))
            parent = parents[label]
            if not inst.cost.strictly_convex and not parent.active <= sub_.active:
                return CheckResult("subcone_extremality", FAIL, f"{sub_.label}: subcone is not a face of its parent cone", sub_.label)
        return CheckResult("subcone_extremality", PASS)

    def witness_cycles(self):
        subs = self._subclasses()
        if not subs:
            return CheckResult("witness_cycles", SKIPPED, "no refinement")
        inst, plan = self.a.instance, self.a.plan
        for label, sub_ in subs:
            base = (self.arith.number(1), *inst.mu_points[sub_.members[0]])
            chart = to_fibration_coords(base, sub_.round_cone, self.settings)
            cycle_sources = sorted({node[1] for node in sub_.witness_cycle if node[0] == "s"})
            graph = build_carriage_graph(sub_.label, cycle_sources or sub_.members, inst, plan, chart)
            if not replay_cycle(graph, sub_.witness_cycle):
                return CheckResult("witness_cycles", FAIL, f"{sub_.label}: witness is not a closed finite-cost path", sub_.witness_cycle)
        return CheckResult("witness_cycles", PASS, f"{len(subs)} cycles")

    def map_feasibility(self):
        monge = getattr(self.a, "monge_map", None)
        if monge is None:
            return CheckResult("map_feasibility", SKIPPED, "no map extracted")
        inst = self.a.instance
        cones = {cls.label: cls.cone for cls in self.a.map_classes}
        for record in monge.classes:
            for i, j, _ in record.entries:
                if not cones[record.label].contains((self.arith.number(1), *sub(inst.mu_points[i], inst.nu_points[j]))):
                    return CheckResult("map_feasibility", FAIL, f"{record.label}: assignment ({i}, {j}) leaves the face", (i, j))
        return CheckResult("map_feasibility", PASS)

    def pushforward(self):
        monge = getattr(self.a, "monge_map", None)
        if monge is None:
            return CheckResult("pushforward", SKIPPED, "no map extracted")
        limit = 0.0 if self.arith.exact else 1e-9
        if monge.pushforward_residual > limit:
            return CheckResult("pushforward", FAIL, f"image mass off by {monge.pushforward_residual:g}")
        return CheckResult("pushforward", PASS)

    def face_optimality(self):
        report = getattr(self.a, "face_report", None)
        if report is None:
            return CheckResult("face_optimality", SKIPPED, "no reconciliation")
        if not report.ok:
            return CheckResult("face_optimality", FAIL, f"formula {report.formula_total} vs plan {report.plan_value}")
        return CheckResult("face_optimality", PASS)

    def mass_conservation(self):
        part = self.a.partition
        weights = self.a.instance.mu_weights
        zero = self.arith.number(0)
        total = sum(weights, zero)
        if not self.arith.eq(part.total_mass, total):
            return CheckResult("mass_conservation", FAIL, f"partition mass {part.total_mass} vs total {total}")
        final = getattr(self.a, "final_classes", None)
        classes = final() if callable(final) else list(part.classes)
        owner: dict[int, str] = {}
        groups = [(cls.label, cls.members) for cls in classes] + [("fixed", part.fixed), ("residual", tuple(part.residual))]
        for label, members in groups:
            for i in members:
                if i in owner:
                    return CheckResult("mass_conservation", FAIL, f"source {i} sits in {owner[i]} and {label}", i)
                owner[i] = label
        counted = sum((weights[i] for i in owner), zero)
        if not self.arith.eq(counted, total):
            missing = sorted(set(range(len(weights))) - set(owner))
            return CheckResult("mass_conservation", FAIL, f"classes, fixed and residual atoms carry {counted} of {total}", missing)
        report = getattr(self.a, "disintegration", None)
        if report is not None and not self.arith.is_zero(report.unaccounted_mass):
            return CheckResult("mass_conservation", FAIL, f"histogram masses leave {report.unaccounted_mass} unaccounted")
        return CheckResult("mass_conservation", PASS)


def invariant_suite(artifacts, settings: Settings) -> list[CheckResult]:
    """Run every named check; an empty problem passes vacuously."""
    if artifacts is None or getattr(artifacts, "instance", None) is None or not artifacts.plan.entries:
        return [CheckResult(name, PASS, "vacuous") for name in CHECK_NAMES]
    suite = _Suite(artifacts, settings)
    results = []
    for name in CHECK_NAMES:
        needs_partition = name not in ("marginals", "duality_gap", "cyclical_monotonicity")
        if needs_partition and getattr(artifacts, "partition", None) is None:
            results.append(CheckResult(name, SKIPPED, "no partition"))
            continue
        try:
            result = getattr(suite, name)()
        except SudakovError as exc:
            result = CheckResult(name, FAIL, str(exc))
        if result.status == FAIL:
            logger.warning("invariant %s failed: %s", name, result.detail)
        results.append(result)
    return results
