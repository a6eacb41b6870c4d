import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.spatial.distance import directed_hausdorff

from sudakov.cone_geometry import Cone, direction_hull, lift_cost, preset_cost
from sudakov.config import load_settings
from sudakov.lifting_potential import (
    FIXED,
    REGULAR,
    PotentialField,
    classify_point,
    direction_data,
    first_partition,
    lax_extend,
    superdiff_pairs,
)
from sudakov.numeric import EXACT
from sudakov.ot_solver import build_instance, solve_primal
from sudakov.pipeline import load_problem, stage_decompose, stage_solve
from sudakov.problem_io import ProblemSpec

F = Fraction


@pytest.fixture
def settings():
    return load_settings({"mode": "rational"}, use_dotenv=False)


def _decompose(mu, nu, cost, settings):
    instance = build_instance(mu, nu, cost, EXACT)
    plan = solve_primal(instance)
    lifted = lift_cost(cost)
    field = PotentialField.from_plan(instance, plan, lifted)
    return instance, plan, field, first_partition(instance, plan, field, settings)


def _lattice_two_disc(plan, spacing="1/2"):
    disc = {"kind": "disc", "radius": 1, "method": "lattice", "spacing": spacing}
    return ProblemSpec(
        name="two_disc_lattice",
        cost="linf",
        mu={"kind": "union", "parts": [dict(disc, center=[-2, 0]), dict(disc, center=[2, 0])]},
        nu={"kind": "pushforward", "of": "mu", "map": "T+"},
        mode="rational",
        plan=plan,
    )


def test_single_shift_is_one_regular_class(settings):
    cost = preset_cost("linf", 1)
    mu = [((0,), 1), ((1,), 1), ((2,), 1)]
    nu = [((F(1, 4),), 1), ((F(5, 4),), 1), ((F(9, 4),), 1)]
    _, _, _, part = _decompose(mu, nu, cost, settings)
    assert [c.label for c in part.classes] == ["Z1_0"]
    only = part.classes[0]
    assert only.h == 1
    assert only.members == (0, 1, 2)
    assert only.kinds == {REGULAR: 3}
    assert only.cone.contains((1, F(-1, 4)))
    assert not only.cone.contains((1, F(1, 4)))
    assert part.fixed == () and part.residual == {}
    assert part.class_mass == part.total_mass == 1


def test_source_at_its_target_is_fixed(settings):
    cost = preset_cost("linf", 1)
    instance, _, field, part = _decompose([((0,), 1)], [((0,), 1)], cost, settings)
    assert part.fixed == (0,)
    assert part.classes == ()
    data = direction_data(field, (1, 0), settings)
    assert classify_point(0, data, field.lifted, instance.arith, settings).kind == FIXED


def _three_targets(psi):
    targets = np.array([[F(1)], [F(2)], [F(3)]], dtype=object)
    return PotentialField(targets, tuple(F(p) for p in psi), lift_cost(preset_cost("linf", 1)), EXACT)


def test_class_dimension_comes_from_the_witnessed_direction_hull(settings):
    field = _three_targets((0, 0, 0))
    data = direction_data(field, (F(1), F(0)), settings)
    assert data.backward == ((1, -1),)
    assert direction_hull(list(data.backward)).section_dimension == 0

    c = classify_point(0, data, field.lifted, EXACT, settings)
    assert c.kind == REGULAR
    assert c.h == c.hull.section_dimension == c.cone.section_dimension == 1
    assert c.hull.contains((1, F(-7, 8))) and c.hull.contains((1, F(-9, 8)))
    assert not c.hull.contains((1, -2))


def test_hull_holding_a_non_optimal_direction_is_not_regular(settings):
    field = _three_targets((0, 0, 2))
    data = direction_data(field, (F(1), F(0)), settings)
    assert sorted(data.backward) == [(1, -3), (1, -1)]
    assert data.backward_targets == (0, 2)

    c = classify_point(0, data, field.lifted, EXACT, settings)
    assert c.kind != REGULAR
    assert any(r.startswith("backward: (i)") for r in c.reasons)


def test_potentials_and_lax_extension(settings):
    cost = preset_cost("linf", 1)
    _, plan, field, _ = _decompose([((0,), 1)], [((1,), 1)], cost, settings)
    assert plan.psi == (0,)
    assert plan.phi == (-1,)
    assert lax_extend(field, None, (1, 0)) == 1
    assert lax_extend(field, None, (0, 1)) == 0
    assert lax_extend(field, None, (0, F(1, 2))) == math.inf
    value, argmins = field.argmin((F(1, 2), F(1, 2)))
    assert value == F(1, 2) and argmins == [0]


def test_superdiff_pairs_backward_and_forward(settings):
    cost = preset_cost("linf", 1)
    _, _, field, _ = _decompose([((0,), 1)], [((1,), 1)], cost, settings)
    z = (1, 0)
    pairs = superdiff_pairs(field, field.lifted, z, [(0, 1), (F(5, 4), F(-1, 4)), (2, 5)])
    assert 0 in pairs.backward
    assert 1 in pairs.forward
    assert 2 not in pairs.forward
    assert pairs.backward_directions[0] == (1, -1)


def test_strictly_convex_cost_gives_ray_classes(settings):
    cost = preset_cost("quadratic", 1)
    _, _, _, part = _decompose([((0,), 1)], [((1,), 1)], cost, settings)
    assert [(c.label, c.h) for c in part.classes] == [("Z0_0", 0)]


def test_two_disc_lattice_has_two_full_dimensional_classes(settings):
    art = load_problem(_lattice_two_disc("T+"), settings)
    stage_solve(art)
    part = stage_decompose(art)
    assert art.plan.psi == tuple(0 for _ in art.plan.psi)

    full = [c for c in part.classes if c.h == 2]
    assert len(full) == 2
    right = Cone.from_inequalities([(1, 0, 0), (0, 1, -1), (0, 1, 1)], [], 3, EXACT)
    left = Cone.from_inequalities([(1, 0, 0), (0, -1, -1), (0, -1, 1)], [], 3, EXACT)
    matched = sorted("right" if c.cone.same_set(right) else "left" if c.cone.same_set(left) else "other" for c in full)
    assert matched == ["left", "right"]

    for cls in full:
        wedge = right if cls.cone.same_set(right) else left
        got = np.array([[float(x) for x in v] for v in cls.cone.section(3).vertices])
        want = np.array([[float(x) for x in v] for v in wedge.section(3).vertices])
        distance = max(directed_hausdorff(got, want)[0], directed_hausdorff(want, got)[0])
        assert distance <= 0.05 * 3
        assert all(art.instance.mu_points[i][0] * (1 if wedge is right else -1) > 0 for i in cls.members)

    assert part.class_mass + part.fixed_mass + part.residual_mass == part.total_mass
