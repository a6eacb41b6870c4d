"""Lifted potentials and the first directed partition of the sources.

Sources sit at ``t = 1`` and targets at ``t = 0``. The target potential is
extended to ``t > 0`` by the Lax formula

    phibar(t, x) = min_j ( -psi_j + cbar(t, x - y_j) )

and every source is classified from the directions of its backward optimal
rays (the Lax argmins) and of forward trials ``z + step * u`` along them.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .cone_geometry import (
    Cone,
    LiftedCost,
    direction_hull,
    lifted_active_masks,
    lifted_face_from_active,
    lifted_value,
    lifted_values,
)
from .config import Settings
from .numeric import Arithmetic, dot, projector, quantize, span_basis, sub
from .ot_solver import Plan, TransportInstance

logger = logging.getLogger(__name__)

FIXED = "fixed"
REGULAR = "regular"
BACKWARD_REGULAR = "backward_regular"
FORWARD_REGULAR = "forward_regular"
RESIDUAL = "residual"
CLASSIFIED_KINDS = (REGULAR, BACKWARD_REGULAR, FORWARD_REGULAR)


@dataclass(frozen=True)
class LiftedPoint:
    t: object
    x: tuple

    @property
    def vector(self) -> tuple:
        return (self.t, *self.x)

    @classmethod
    def source(cls, x: Sequence, arith: Arithmetic) -> "LiftedPoint":
        return cls(arith.number(1), arith.vector(x))

    @classmethod
    def target(cls, y: Sequence, arith: Arithmetic) -> "LiftedPoint":
        return cls(arith.number(0), arith.vector(y))


@dataclass(frozen=True, eq=False)
class PotentialField:
    """Target potential ``psi`` on the ``t = 0`` layer with its Lax extension."""

    targets: np.ndarray  # (n, d)
    psi: tuple
    lifted: LiftedCost
    arith: Arithmetic

    @classmethod
    def from_plan(cls, instance: TransportInstance, plan: Plan, lifted: LiftedCost) -> "PotentialField":
        return cls(instance.nu_array(), tuple(plan.psi), lifted, instance.arith)

    def _values_to(self, z: Sequence) -> np.ndarray:
        arith = self.arith
        z = arith.vector(z)
        count = self.targets.shape[0]
        rows = np.empty((count, len(z)), dtype=object if arith.exact else float)
        rows[:, 0] = z[0]
        rows[:, 1:] = np.asarray(z[1:], dtype=rows.dtype)[None, :] - self.targets
        psi = np.asarray(self.psi, dtype=rows.dtype)
        return lifted_values(self.lifted, rows, arith) - psi

    def value(self, z: Sequence):
        values = self._values_to(z)
        return min(values) if self.arith.exact else float(values.min())

    def argmin(self, z: Sequence) -> tuple[object, list[int]]:
        values = self._values_to(z)
        if self.arith.exact:
            best = min(values)
            return best, [j for j, v in enumerate(values) if v == best]
        best = float(values.min())
        if math.isinf(best):
            return best, []
        scale = max(1.0, abs(best))
        return best, [int(j) for j in np.nonzero(values <= best + self.arith.tol * scale)[0]]

    def at_target(self, j: int):
        return -self.psi[j]


def lax_extend(field: PotentialField, lifted: LiftedCost | None, z: Sequence):
    """``phibar(z)``; on the ``t = 0`` layer this is ``-psi`` at atoms and ``inf`` elsewhere."""
    if lifted is not None and lifted is not field.lifted:
        field = PotentialField(field.targets, field.psi, lifted, field.arith)
    return field.value(z)


@dataclass(frozen=True)
class SuperdiffPairs:
    backward: tuple  # candidate indices z' with phibar(z) - phibar(z') = cbar(z - z')
    forward: tuple  # candidate indices z'' with phibar(z'') - phibar(z) = cbar(z'' - z)
    backward_directions: tuple
    forward_directions: tuple


def _normalised_direction(delta: tuple, arith: Arithmetic) -> tuple | None:
    if arith.is_zero(delta[0]) or arith.lt(delta[0], 0):
        return None
    return tuple(x / delta[0] for x in delta)


def superdiff_pairs(
    field: PotentialField,
    lifted: LiftedCost,
    z: Sequence,
    candidates: Sequence[Sequence],
    *,
    candidate_values: Sequence | None = None,
) -> SuperdiffPairs:
    """Candidates realising the sub- and super-differential equalities at ``z``.

    ``candidate_values`` overrides the Lax evaluation (target atoms use ``-psi``).
    Directions are normalised to time coordinate 1; the zero step is excluded.
    """
    arith = field.arith
    z = arith.vector(z)
    here = field.value(z)
    backward, forward, back_dirs, fwd_dirs = [], [], [], []
    for k, candidate in enumerate(candidates):
        candidate = arith.vector(candidate)
        value = candidate_values[k] if candidate_values is not None else field.value(candidate)
        if isinstance(value, float) and math.isinf(value):
            continue
        delta = sub(z, candidate)
        if arith.leq(candidate[0], z[0]):
            cost = lifted_value(lifted, delta, arith)
            if not (isinstance(cost, float) and math.isinf(cost)) and arith.eq(here - value, cost):
                backward.append(k)
                direction = _normalised_direction(delta, arith)
                if direction is not None:
                    back_dirs.append(direction)
        if arith.leq(z[0], candidate[0]):
            step = sub(candidate, z)
            cost = lifted_value(lifted, step, arith)
            if not (isinstance(cost, float) and math.isinf(cost)) and arith.eq(value - here, cost):
                forward.append(k)
                direction = _normalised_direction(step, arith)
                if direction is not None:
                    fwd_dirs.append(direction)
    return SuperdiffPairs(tuple(backward), tuple(forward), tuple(back_dirs), tuple(fwd_dirs))


@dataclass(frozen=True, eq=False)
class DirectionData:
    """Backward ray directions of a point and the forward trials that extend them."""

    point: tuple
    backward: tuple
    backward_targets: tuple
    forward: tuple
    trials: tuple
    field: PotentialField | None = None
    candidates: np.ndarray | None = None  # one sampled backward direction per target atom

    def backward_others(self) -> np.ndarray:
        """Sampled backward directions that are not optimal."""
        if self.candidates is None:
            return np.empty((0, len(self.point)))
        return np.delete(self.candidates, sorted(set(self.backward_targets)), axis=0)

    def forward_others(self, arith: Arithmetic) -> np.ndarray:
        """Trials that failed to extend."""
        extended = set(self.forward)
        others = [p for p in self.trials if p not in extended]
        return arith.array(others).reshape(len(others), len(self.point))


@dataclass(frozen=True, eq=False)
class Classification:
    index: int
    kind: str
    h: int | None = None
    active: frozenset | None = None
    cone: Cone | None = None
    witness: tuple | None = None
    direction: tuple | None = None
    reasons: tuple = ()
    hull: Cone | None = None  # R+ · conv of the witnessed directions on the deciding side


def _is_vertical(u: tuple, arith: Arithmetic) -> bool:
    return all(arith.is_zero(x) for x in u[1:])


def _spread(directions: list[tuple], count: int) -> list[tuple]:
    ordered = sorted(directions)
    if len(ordered) <= count:
        return ordered
    step = (len(ordered) - 1) / (count - 1)
    return [ordered[round(k * step)] for k in range(count)]


def direction_data(field: PotentialField, z: Sequence, settings: Settings) -> DirectionData:
    arith = field.arith
    z = arith.vector(z)
    here, argmins = field.argmin(z)
    t = z[0]
    backward = []
    for j in argmins:
        delta = (t, *sub(z[1:], field.targets[j]))
        backward.append(tuple(x / t for x in delta))
    trials = _spread(list(dict.fromkeys(backward)), max(2, settings.forward_trials))
    witness = _witness(field.lifted, backward, arith, settings)
    if witness is not None and witness not in trials:
        trials = [witness] + trials[: max(1, settings.forward_trials - 1)]
    step = arith.number(settings.forward_step)
    forward = []
    for u in trials:
        w = tuple(a + step * b for a, b in zip(z, u))
        cost = lifted_values(field.lifted, arith.array([u]).reshape(1, -1), arith)[0]
        if arith.eq(field.value(w) - here, step * cost):
            forward.append(u)
    candidates = np.empty((field.targets.shape[0], len(z)), dtype=object if arith.exact else float)
    candidates[:, 0] = arith.number(1)
    candidates[:, 1:] = (np.asarray(z[1:], dtype=candidates.dtype)[None, :] - field.targets) / t
    return DirectionData(z, tuple(backward), tuple(argmins), tuple(forward), tuple(trials), field, candidates)


def _active_matrix(lifted: LiftedCost, directions: Sequence[tuple], arith: Arithmetic, tol: float | None = None) -> np.ndarray:
    vectors = arith.array(list(directions)).reshape(len(directions), lifted.dimension)
    if tol is None or arith.exact:
        return lifted_active_masks(lifted, vectors, arith)
    return lifted_active_masks(lifted, vectors, Arithmetic(arith.mode, tol))


def _witness(lifted: LiftedCost, directions: Sequence[tuple], arith: Arithmetic, settings: Settings) -> tuple | None:
    """A direction in the relative interior of the face shared by all ``directions``."""
    if not directions or lifted.strictly_convex:
        return directions[0] if directions else None
    masks = _active_matrix(lifted, directions, arith)
    common = masks.all(axis=0)
    if not common.any():
        return None
    radius = 0.0 if arith.exact else max(settings.witness_radius, arith.tol)
    strict = _active_matrix(lifted, directions, arith, radius)
    for k in np.nonzero((strict == common[None, :]).all(axis=1))[0]:
        return directions[int(k)]
    return None


@dataclass(frozen=True)
class _SideVerdict:
    ok: bool
    active: frozenset | None = None
    cone: Cone | None = None
    witness: tuple | None = None
    reason: str = ""
    hull: Cone | None = None
    h: int | None = None


SPREAD_START = Fraction(1, 8)
SPREAD_TRIES = 6


def _distinct(directions) -> list[tuple]:
    return list(dict.fromkeys(tuple(u) for u in directions))


def _face_offsets(cone: Cone, u: tuple, arith: Arithmetic) -> list[tuple]:
    """Displacements at ``t = 0`` from ``u`` towards every generator of the face section."""
    offsets = []
    for r in cone.rays:
        offsets.append(tuple(r) if arith.is_zero(r[0]) else tuple(x / r[0] - y for x, y in zip(r, u)))
    for line in cone.lines:
        if arith.is_zero(line[0]):
            offsets.extend([tuple(line), tuple(-x for x in line)])
    return [o for o in offsets if not all(arith.is_zero(x) for x in o)]


def _witnessed_spread(
    field: PotentialField,
    z: tuple,
    cone: Cone,
    witness: tuple,
    others: np.ndarray,
    arith: Arithmetic,
    settings: Settings,
    side: str,
) -> list[tuple] | None:
    """Directions around ``witness`` towards every generator of ``cone`` that realise the differential equality.

    The spread shrinks until each direction is witnessed by ``superdiff_pairs`` and no
    non-optimal sampled direction enters its hull; ``None`` when no tried size works.
    """
    offsets = _face_offsets(cone, witness, arith)
    if not offsets:
        return []
    backward = side == "backward"
    step = arith.number(settings.forward_step)
    if backward and arith.lt(z[0], step):
        step = z[0]
    sign = -step if backward else step
    size = arith.number(SPREAD_START)
    for _ in range(SPREAD_TRIES):
        spread = [tuple(w + size * o for w, o in zip(witness, off)) for off in offsets]
        points = [tuple(a + sign * b for a, b in zip(z, v)) for v in spread]
        pairs = superdiff_pairs(field, field.lifted, z, points)
        hits = set(pairs.backward if backward else pairs.forward)
        if hits == set(range(len(points))):
            local = direction_hull(_distinct([witness, *spread]), arith)
            if not local.contains_many(others).any():
                return spread
        size = size / 8
    return None


def _judge(
    lifted: LiftedCost,
    directions: Sequence[tuple],
    others: np.ndarray,
    field: PotentialField | None,
    z: tuple,
    arith: Arithmetic,
    settings: Settings,
    side: str,
) -> _SideVerdict:
    if not directions:
        return _SideVerdict(False, reason=f"{side}: no optimal directions")
    if lifted.strictly_convex:
        first = directions[0]
        if any(not arith.vec_eq(first, u) for u in directions[1:]):
            return _SideVerdict(False, reason=f"{side}: (i) directions split between several faces")
        cone = lifted_face_from_ray(first, arith)
        return _SideVerdict(True, frozenset(), cone, first, hull=cone, h=0)
    masks = _active_matrix(lifted, directions, arith)
    common = masks.all(axis=0)
    if not common.any():
        return _SideVerdict(False, reason=f"{side}: (i) no face contains every direction")
    sampled = direction_hull(_distinct(directions), arith)
    if sampled.contains_many(others).any():
        return _SideVerdict(False, reason=f"{side}: (i) direction hull holds a sampled direction that is not optimal")
    active = frozenset(int(i) for i in np.nonzero(common)[0])
    cone = lifted_face_from_active(lifted, active, arith)
    if cone.section_dimension < 0:
        return _SideVerdict(False, reason=f"{side}: (ii) face does not reach t > 0")
    witness = _witness(lifted, directions, arith, settings)
    if witness is None:
        return _SideVerdict(False, active, cone, reason=f"{side}: (iii) no witness direction in the relative interior")
    spread = [] if field is None else _witnessed_spread(field, z, cone, witness, others, arith, settings, side)
    if spread is None:
        return _SideVerdict(False, active, cone, reason=f"{side}: (iii) hull vertices around the witness are not optimal")
    hull = direction_hull(_distinct([*directions, *spread]), arith)
    return _SideVerdict(True, active, cone, witness, hull=hull, h=hull.section_dimension)


def lifted_face_from_ray(u: tuple, arith: Arithmetic) -> Cone:
    return Cone.from_generators([u], arith=arith)


def classify_point(index: int, data: DirectionData, lifted: LiftedCost, arith: Arithmetic, settings: Settings) -> Classification:
    """Fixed, regular (both sides), backward- or forward-regular, or residual with reasons."""
    if data.backward and all(_is_vertical(u, arith) for u in data.backward):
        return Classification(index, FIXED, h=0, direction=data.backward[0])
    moving = [u for u in data.backward if not _is_vertical(u, arith)] if not lifted.strictly_convex else list(data.backward)
    z = data.point
    back = _judge(lifted, data.backward, data.backward_others(), data.field, z, arith, settings, "backward")
    fwd = _judge(lifted, data.forward, data.forward_others(arith), data.field, z, arith, settings, "forward")
    direction = back.witness or (moving[0] if moving else None)
    same_faces = back.active == fwd.active and (not lifted.strictly_convex or arith.vec_eq(back.witness, fwd.witness))
    if back.ok and fwd.ok and same_faces and back.h == fwd.h:
        return Classification(index, REGULAR, back.h, back.active, back.cone, back.witness, direction, hull=back.hull)
    if back.ok and not fwd.ok:
        return Classification(index, BACKWARD_REGULAR, back.h, back.active, back.cone, back.witness, direction, (fwd.reason,), back.hull)
    if fwd.ok and not back.ok:
        return Classification(index, FORWARD_REGULAR, fwd.h, fwd.active, fwd.cone, fwd.witness, fwd.witness, (back.reason,), fwd.hull)
    if back.ok and fwd.ok and same_faces:
        reasons = (f"(ii) backward hull has dimension {back.h}, forward hull {fwd.h}",)
    else:
        reasons = tuple(r for r in (back.reason, fwd.reason) if r) or ("backward and forward faces differ",)
    return Classification(index, RESIDUAL, direction=direction, reasons=reasons)


@dataclass(frozen=True, eq=False)
class FaceClass:
    label: str
    h: int
    active: frozenset
    cone: Cone
    members: tuple  # source indices
    base_point: tuple
    affine_basis: tuple
    mass: object
    kinds: dict = field(default_factory=dict)

    def contains_direction(self, u: Sequence) -> bool:
        return self.cone.contains(u)


@dataclass(frozen=True, eq=False)
class PartitionResult:
    classes: tuple
    fixed: tuple
    residual: dict  # source index -> reasons
    classifications: tuple
    class_mass: object
    fixed_mass: object
    residual_mass: object
    total_mass: object

    def class_of(self) -> dict[int, FaceClass]:
        return {i: c for c in self.classes for i in c.members}


def affine_key(z: tuple, cone: Cone, arith: Arithmetic, settings: Settings) -> tuple:
    basis = cone.span_basis()
    proj = projector(basis, len(z), arith)
    offset = tuple(x - dot(row, z) for x, row in zip(z, proj))
    if arith.exact:
        return offset
    return tuple(quantize(x, settings.class_key_tol) for x in offset)


def _class_key(c: Classification, z: tuple, arith: Arithmetic, settings: Settings, strictly_convex: bool) -> tuple:
    key = (c.h, tuple(sorted(c.active)), affine_key(z, c.cone, arith, settings))
    if strictly_convex:
        direction = c.witness if arith.exact else tuple(quantize(x, settings.class_key_tol) for x in c.witness)
        key = key + (direction,)
    return key


def first_partition(
    instance: TransportInstance,
    plan: Plan,
    field: PotentialField,
    settings: Settings,
) -> PartitionResult:
    """Group regular sources by (h, face active set, affine span); report fixed and residual sources."""
    arith = instance.arith
    lifted = field.lifted
    mass_of = defaultdict(lambda: arith.number(0))
    for i, _, mass in plan.entries:
        mass_of[i] += mass
    classifications = []
    groups: dict[tuple, list[Classification]] = {}
    fixed, residual = [], {}
    for i in sorted(mass_of):
        z = (arith.number(1), *instance.mu_points[i])
        data = direction_data(field, z, settings)
        c = classify_point(i, data, lifted, arith, settings)
        logger.debug("source %d: %s h=%s reasons=%s", i, c.kind, c.h, c.reasons)
        classifications.append(c)
        if c.kind == FIXED:
            fixed.append(i)
        elif c.kind == RESIDUAL:
            residual[i] = c.reasons
        else:
            groups.setdefault(_class_key(c, z, arith, settings, lifted.strictly_convex), []).append(c)

    targets_of = plan.targets_of()
    classes = []
    per_h: dict[int, int] = defaultdict(int)
    for key in sorted(groups, key=lambda k: min(c.index for c in groups[k])):
        group = groups[key]
        cone = group[0].cone
        members = []
        for c in group:
            x = instance.mu_points[c.index]
            outside = [
                j for j, _ in targets_of.get(c.index, [])
                if not cone.contains((arith.number(1), *sub(x, instance.nu_points[j])))
            ]
            if outside:
                residual[c.index] = (f"support pair to target {outside[0]} leaves the class cone",)
            else:
                members.append(c.index)
        if not members:
            continue
        h = group[0].h
        label = f"Z{h}_{per_h[h]}"
        per_h[h] += 1
        kinds: dict[str, int] = defaultdict(int)
        for c in group:
            if c.index in members:
                kinds[c.kind] += 1
        base = (arith.number(1), *instance.mu_points[members[0]])
        classes.append(
            FaceClass(
                label=label,
                h=h,
                active=group[0].active,
                cone=cone,
                members=tuple(members),
                base_point=base,
                affine_basis=tuple(span_basis(cone.span_basis(), arith)),
                mass=sum((mass_of[i] for i in members), arith.number(0)),
                kinds=dict(kinds),
            )
        )
    zero = arith.number(0)
    class_mass = sum((c.mass for c in classes), zero)
    fixed_mass = sum((mass_of[i] for i in fixed), zero)
    residual_mass = sum((mass_of[i] for i in residual), zero)
    if residual:
        logger.warning("%d residual sources (mass %s)", len(residual), residual_mass)
    logger.info("first partition: %d classes, %d fixed, %d residual", len(classes), len(fixed), len(residual))
    return PartitionResult(
        classes=tuple(classes),
        fixed=tuple(fixed),
        residual=dict(sorted(residual.items())),
        classifications=tuple(classifications),
        class_mass=class_mass,
        fixed_mass=fixed_mass,
        residual_mass=residual_mass,
        total_mass=class_mass + fixed_mass + residual_mass,
    )
