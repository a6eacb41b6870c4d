from fractions import Fraction
from types import SimpleNamespace

import pytest

from sudakov.cone_geometry import Cone, lift_cost, preset_cost
from sudakov.config import load_settings
from sudakov.errors import FaceViolationError, MarginalMismatchError
from sudakov.generators import map_point
from sudakov.lifting_potential import PotentialField, first_partition
from sudakov.map_extract import extract_map, face_mask, recouple_cost_change, verify_face_optimality
from sudakov.numeric import EXACT
from sudakov.ot_solver import build_instance, solve_primal
from sudakov.pipeline import load_problem, stage_decompose, stage_extract, stage_refine, stage_solve
from sudakov.problem_io import ProblemSpec

F = Fraction


@pytest.fixture
def settings():
    return load_settings({"mode": "rational"}, use_dotenv=False)


def _decompose(mu, nu, cost, settings):
    instance = build_instance(mu, nu, cost, EXACT)
    plan = solve_primal(instance)
    field = PotentialField.from_plan(instance, plan, lift_cost(cost))
    return instance, plan, first_partition(instance, plan, field, settings)


def test_quadratic_translation_keeps_the_plan(settings):
    mu = [((0, 0), 1), ((1, 0), 1), ((0, 1), 1)]
    nu = [((2, 1), 1), ((3, 1), 1), ((2, 2), 1)]
    instance, plan, part = _decompose(mu, nu, preset_cost("quadratic", 2), settings)
    assert all(c.h == 0 for c in part.classes)
    monge = extract_map(part.classes, instance, plan)
    assert list(monge.entries) == sorted(plan.entries)
    assert monge.assignments == {i: j for i, j, _ in plan.entries}
    assert monge.split_required == ()
    assert monge.pushforward_residual == 0.0


def test_lattice_map_is_recovered_inside_line_classes(settings):
    disc = {"kind": "disc", "radius": 1, "method": "lattice", "spacing": "1/2"}
    spec = ProblemSpec(
        name="two_disc_lattice",
        cost="linf",
        mu={"kind": "union", "parts": [dict(disc, center=[-2, 0]), dict(disc, center=[2, 0])]},
        nu={"kind": "pushforward", "of": "mu", "map": "T+"},
        mode="rational",
        plan="T+",
    )
    art = load_problem(spec, settings)
    stage_solve(art)
    stage_decompose(art)
    stage_refine(art)
    monge = stage_extract(art)

    instance = art.instance
    assert len(monge.assignments) == len(instance.mu_points)
    for i, j in monge.assignments.items():
        assert tuple(instance.nu_points[j]) == map_point("T+", tuple(instance.mu_points[i]))
    assert monge.split_required == ()
    assert art.face_report.ok
    assert art.face_report.formula_total == art.plan.value


def test_face_reconciliation_on_a_single_shift(settings):
    cost = preset_cost("linf", 1)
    mu = [((0,), 1), ((1,), 1), ((2,), 1)]
    nu = [((F(1, 4),), 1), ((F(5, 4),), 1), ((F(9, 4),), 1)]
    instance, plan, part = _decompose(mu, nu, cost, settings)
    report = verify_face_optimality(instance, plan, part.classes, lift_cost(cost))
    assert report.ok
    (record,) = report.classes
    assert record.mass == 1
    assert record.mean_displacement == (F(1, 4),)
    assert record.formula_cost == record.direct_cost == F(1, 4)
    assert report.leftover_cost == 0


def test_class_with_the_wrong_face_is_rejected(settings):
    cost = preset_cost("linf", 1)
    instance, plan, _ = _decompose([((0,), 1), ((1,), 1)], [((3,), 1), ((4,), 1)], cost, settings)
    # v >= 0, the opposite side of every support displacement
    backwards = Cone.from_inequalities([(1, 0), (0, 1)], [], 2, EXACT)
    bad = SimpleNamespace(label="bad", members=(0, 1), cone=backwards, active=frozenset({1}))
    assert not face_mask(instance, backwards, [0, 1], [0, 1]).any()
    with pytest.raises(FaceViolationError):
        extract_map([bad], instance, plan)
    with pytest.raises(FaceViolationError):
        verify_face_optimality(instance, plan, [bad], lift_cost(cost))


def test_recoupling_inside_a_face_keeps_the_cost(settings):
    cost = preset_cost("linf", 1)
    instance, plan, part = _decompose([((0,), 1), ((1,), 1)], [((3,), 1), ((4,), 1)], cost, settings)
    (cls,) = part.classes
    assert cls.members == (0, 1)
    half = F(1, 2)
    assert recouple_cost_change(instance, plan, cls, [(0, 1, half), (1, 0, half)]) == 0
    assert recouple_cost_change(instance, plan, cls, [(0, 0, half), (1, 1, half)]) == 0
    with pytest.raises(MarginalMismatchError):
        recouple_cost_change(instance, plan, cls, [(0, 0, half), (0, 1, half)])


def test_split_atom_is_reported(settings):
    cost = preset_cost("linf", 1)
    instance, plan, part = _decompose([((0,), 1)], [((3,), 1), ((4,), 1)], cost, settings)
    (cls,) = part.classes
    monge = extract_map(part.classes, instance, plan)
    assert monge.split_required == (cls.label,)
    assert monge.assignments == {}
    assert len(monge.entries) == 2
    assert sum(mass for _, _, mass in monge.entries) == 1
