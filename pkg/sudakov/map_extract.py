"""Monge map extraction inside indecomposable classes and the face-optimality reconciliation."""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cone_geometry import LiftedCost, finite_steps, lifted_support_plane, preset_cost
from .errors import FaceViolationError, InfeasibleInstanceError, MarginalMismatchError
from .numeric import dot, sub
from .ot_solver import Plan, TransportInstance, build_instance, plan_cost, solve_constrained

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClassMap:
    label: str
    entries: tuple  # (source, target, mass)
    deterministic: bool
    split_required: bool
    primary_cost: object
    secondary_cost: object
    pushforward_residual: float


@dataclass(frozen=True)
class MongeMap:
    assignments: dict  # source -> target, only for deterministic sources
    entries: tuple  # every (source, target, mass) of the extracted coupling
    classes: tuple
    pushforward_residual: float

    @property
    def split_required(self) -> tuple:
        return tuple(c.label for c in self.classes if c.split_required)


def _class_marginals(instance: TransportInstance, plan: Plan, members: Sequence[int]):
    arith = instance.arith
    member_set = set(members)
    nu_bar: dict[int, object] = defaultdict(lambda: arith.number(0))
    for i, j, mass in plan.entries:
        if i in member_set:
            nu_bar[j] += mass
    mu = [(i, instance.mu_weights[i]) for i in sorted(member_set)]
    return mu, dict(sorted(nu_bar.items()))


def _check_balance(instance: TransportInstance, label: str, mu, nu_bar) -> None:
    arith = instance.arith
    mu_total = sum((w for _, w in mu), arith.number(0))
    nu_total = sum(nu_bar.values(), arith.number(0))
    if not arith.eq(mu_total, nu_total):
        raise MarginalMismatchError(f"class {label}: source mass {mu_total} differs from its target mass {nu_total}")


def face_mask(instance: TransportInstance, cone, sources: Sequence[int], targets: Sequence[int]) -> np.ndarray:
    """``mask[a, b]``: the step from target ``targets[b]`` to source ``sources[a]`` has finite cost in ``cone``."""
    arith = instance.arith
    one = arith.number(1)
    rows = [(one, *sub(instance.mu_points[i], instance.nu_points[j])) for i in sources for j in targets]
    if not rows:
        return np.zeros((len(sources), len(targets)), dtype=bool)
    steps = finite_steps(cone, arith.array(rows).reshape(len(rows), -1))
    return steps.reshape(len(sources), len(targets))


def extract_map(classes: Sequence, instance: TransportInstance, plan: Plan, *, leftover: Sequence[int] = ()) -> MongeMap:
    """Secondary-optimal (quadratic, face-masked) coupling per class; deterministic couplings give the map.

    ``leftover`` sources (fixed or residual) keep their plan targets.
    """
    arith = instance.arith
    secondary = preset_cost("quadratic", instance.dimension)
    records, entries = [], []
    assignments: dict[int, int] = {}
    worst = 0.0
    for cls in classes:
        mu, nu_bar = _class_marginals(instance, plan, cls.members)
        _check_balance(instance, cls.label, mu, nu_bar)
        sources = [i for i, _ in mu]
        targets = list(nu_bar)
        mask = face_mask(instance, cls.cone, sources, targets)
        try:
            sub_instance = build_instance(
                [(instance.mu_points[i], w) for i, w in mu],
                [(instance.nu_points[j], w) for j, w in nu_bar.items()],
                None,
                arith,
                mask=mask,
                cost_matrix=instance.cost_matrix[np.ix_(sources, targets)],
                normalize=False,
            )
        except InfeasibleInstanceError:
            raise FaceViolationError(f"class {cls.label}: its own plan pairs leave the class face") from None
        local = solve_constrained(sub_instance, secondary)
        class_entries = tuple((sources[a], targets[b], mass) for a, b, mass in local.entries)
        per_source: dict[int, list[int]] = defaultdict(list)
        for i, j, _ in class_entries:
            per_source[i].append(j)
        deterministic = all(len(v) == 1 for v in per_source.values())
        image: dict[int, object] = defaultdict(lambda: arith.number(0))
        for _, j, mass in class_entries:
            image[j] += mass
        residual = max((abs(float(image[j] - w)) for j, w in nu_bar.items()), default=0.0)
        worst = max(worst, residual)
        if deterministic:
            assignments.update({i: js[0] for i, js in per_source.items()})
        else:
            logger.warning("class %s: secondary optimum splits atoms; reporting split-required", cls.label)
        records.append(ClassMap(cls.label, class_entries, deterministic, not deterministic, local.primary_value, local.value, residual))
        entries.extend(class_entries)
    targets_of = plan.targets_of()
    for i in leftover:
        pairs = targets_of.get(i, [])
        entries.extend((i, j, mass) for j, mass in pairs)
        if len(pairs) == 1:
            assignments[i] = pairs[0][0]
    entries.sort()
    logger.info("extracted map: %d assigned sources, %d split-required classes", len(assignments), sum(r.split_required for r in records))
    return MongeMap(dict(sorted(assignments.items())), tuple(entries), tuple(records), worst)


@dataclass(frozen=True)
class ClassReconciliation:
    label: str
    mass: object
    support_plane: tuple  # (b, a)
    mean_displacement: tuple
    formula_cost: object
    direct_cost: object


@dataclass(frozen=True)
class FaceOptimalityReport:
    classes: tuple
    leftover_cost: object
    formula_total: object
    plan_value: object
    ok: bool
    details: dict = field(default_factory=dict)


def verify_face_optimality(
    instance: TransportInstance,
    plan: Plan,
    classes: Sequence,
    lifted: LiftedCost,
    *,
    leftover: Sequence[int] = (),
) -> FaceOptimalityReport:
    """Check support displacements against class faces and rebuild the plan value from support planes."""
    arith = instance.arith
    zero = arith.number(0)
    targets_of = plan.targets_of()
    records = []
    total = zero
    for cls in classes:
        mass = zero
        mean_mu = [zero] * instance.dimension
        mean_nu = [zero] * instance.dimension
        direct = zero
        for i in cls.members:
            for j, m in targets_of.get(i, []):
                step = (arith.number(1), *sub(instance.mu_points[i], instance.nu_points[j]))
                if not cls.cone.contains(step):
                    raise FaceViolationError(f"class {cls.label}: displacement of pair ({i}, {j}) leaves the class face")
                mass += m
                mean_mu = [a + m * b for a, b in zip(mean_mu, instance.mu_points[i])]
                mean_nu = [a + m * b for a, b in zip(mean_nu, instance.nu_points[j])]
                direct += m * instance.cost_matrix[i, j]
        if arith.is_zero(mass):
            continue
        mean_displacement = tuple((b - a) / mass for a, b in zip(mean_mu, mean_nu))
        slope, offset = lifted_support_plane(lifted, cls.cone, cls.active, arith)
        formula = (offset + dot(slope, mean_displacement)) * mass
        records.append(ClassReconciliation(cls.label, mass, (tuple(slope), offset), mean_displacement, formula, direct))
        total += formula
    leftover_cost = sum(
        (m * instance.cost_matrix[i, j] for i in leftover for j, m in targets_of.get(i, [])),
        zero,
    )
    total += leftover_cost
    ok = arith.eq(total, plan.value)
    if not ok:
        logger.warning("face-optimality reconciliation off: formula %s vs plan %s", total, plan.value)
    return FaceOptimalityReport(tuple(records), leftover_cost, total, plan.value, ok)


def recouple_cost_change(instance: TransportInstance, plan: Plan, cls, coupling: Sequence[tuple[int, int, object]]):
    """Primary-cost change of replacing the plan inside ``cls`` by a face-feasible coupling with the same class marginals."""
    arith = instance.arith
    mu, nu_bar = _class_marginals(instance, plan, cls.members)
    rows: dict[int, object] = defaultdict(lambda: arith.number(0))
    cols: dict[int, object] = defaultdict(lambda: arith.number(0))
    for i, j, mass in coupling:
        step = (arith.number(1), *sub(instance.mu_points[i], instance.nu_points[j]))
        if not cls.cone.contains(step):
            raise FaceViolationError(f"re-coupling pair ({i}, {j}) leaves the face of class {cls.label}")
        rows[i] += mass
        cols[j] += mass
    if any(not arith.eq(rows[i], w) for i, w in mu) or any(not arith.eq(cols[j], w) for j, w in nu_bar.items()):
        raise MarginalMismatchError(f"re-coupling does not keep the marginals of class {cls.label}")
    member_set = set(cls.members)
    before = plan_cost(instance, [e for e in plan.entries if e[0] in member_set])
    return plan_cost(instance, list(coupling)) - before
