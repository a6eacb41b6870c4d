from fractions import Fraction

import numpy as np
import pytest

from sudakov.cone_geometry import preset_cost
from sudakov.errors import (
    DimensionMismatchError,
    InfeasibleInstanceError,
    PlanNotOptimalError,
    UnbalancedWeightsError,
)
from sudakov.generators import generate
from sudakov.numeric import EXACT, FLOATING
from sudakov.ot_solver import (
    Plan,
    build_instance,
    dual_value,
    optimal_permutation_plans,
    plan_from_entries,
    potentials_for_plan,
    solve_constrained,
    solve_primal,
)
from sudakov.pipeline import fixed_plan

F = Fraction


@pytest.fixture
def two_by_two():
    mu = [((0, 0), F(1, 2)), ((1, 0), F(1, 2))]
    nu = [((0, 1), F(1, 2)), ((1, 2), F(1, 2))]
    return build_instance(mu, nu, preset_cost("linf", 2), EXACT)


def _random_atoms(rng, count, exact):
    atoms = []
    for _ in range(count):
        point = tuple(int(v) for v in rng.integers(-3, 4, size=2))
        weight = int(rng.integers(1, 6))
        atoms.append((point, F(weight) if exact else float(weight)))
    return atoms


def _assert_certified(instance, plan):
    arith = instance.arith
    for i in range(instance.shape[0]):
        for j in range(instance.shape[1]):
            assert arith.leq(plan.psi[j] - plan.phi[i], instance.cost_matrix[i, j])
    for i, j, _ in plan.entries:
        assert arith.eq(plan.psi[j] - plan.phi[i], instance.cost_matrix[i, j])
    assert all(arith.leq(v, 0) for v in plan.phi + plan.psi)


def test_two_by_two_value_and_potentials(two_by_two):
    plan = solve_primal(two_by_two)
    assert plan.value == F(3, 2)
    assert len(plan.entries) == 2
    _assert_certified(two_by_two, plan)
    assert dual_value(two_by_two, plan) == F(3, 2)


def test_every_permutation_of_the_degenerate_instance_is_optimal(two_by_two):
    plans = optimal_permutation_plans(two_by_two)
    assert len(plans) == 2
    assert {p.value for p in plans} == {F(3, 2)}


def test_exact_and_float_solvers_agree_on_random_instances():
    rng = np.random.default_rng(11)
    cost = preset_cost("linf", 2)
    for _ in range(12):
        m, n = int(rng.integers(2, 8)), int(rng.integers(2, 8))
        mu = _random_atoms(rng, m, exact=True)
        nu = _random_atoms(rng, n, exact=True)
        exact = build_instance(mu, nu, cost, EXACT)
        plan = solve_primal(exact)
        _assert_certified(exact, plan)
        assert dual_value(exact, plan) == plan.value

        floating = build_instance([(p, float(w)) for p, w in mu], [(p, float(w)) for p, w in nu], cost, FLOATING)
        assert solve_primal(floating).value == pytest.approx(float(plan.value), abs=1e-9)


def test_uniform_square_optimum_matches_permutation_enumeration():
    rng = np.random.default_rng(4)
    cost = preset_cost("l1", 2)
    for size in (2, 3, 4, 5):
        mu = [(tuple(int(v) for v in rng.integers(-3, 4, size=2)), 1) for _ in range(size)]
        nu = [(tuple(int(v) for v in rng.integers(-3, 4, size=2)), 1) for _ in range(size)]
        instance = build_instance(mu, nu, cost, EXACT)
        best = optimal_permutation_plans(instance)
        assert best and solve_primal(instance).value == best[0].value


def test_marginal_validation():
    cost = preset_cost("linf", 2)
    with pytest.raises(UnbalancedWeightsError):
        build_instance([((0, 0), 1)], [((1, 0), 2)], cost, EXACT, normalize=False)
    with pytest.raises(UnbalancedWeightsError):
        build_instance([((0, 0), 0)], [((1, 0), 1)], cost, EXACT)
    with pytest.raises(DimensionMismatchError):
        build_instance([((0, 0, 0), 1)], [((1, 0, 0), 1)], cost, EXACT)


def test_mask_restricts_support_and_can_be_infeasible():
    cost = preset_cost("linf", 1)
    mu = [((0,), 1), ((1,), 1), ((2,), 1)]
    nu = [((0,), 1), ((1,), 1), ((2,), 1)]
    off_diagonal = ~np.eye(3, dtype=bool)
    instance = build_instance(mu, nu, cost, FLOATING, mask=off_diagonal)
    plan = solve_primal(instance)
    assert all(i != j for i, j, _ in plan.entries)
    assert plan.value == pytest.approx(float(optimal_permutation_plans(instance)[0].value))

    exact = build_instance(mu, nu, cost, EXACT, mask=off_diagonal)
    assert solve_primal(exact).value == optimal_permutation_plans(exact)[0].value

    blocked = np.array([[True, False], [True, False]])
    with pytest.raises(InfeasibleInstanceError):
        build_instance([((0,), 1), ((1,), 1)], [((0,), 1), ((1,), 1)], cost, EXACT, mask=blocked)


@pytest.mark.parametrize("arith", [EXACT, FLOATING], ids=["rational", "float"])
def test_swapped_plan_has_no_potentials(arith):
    cost = preset_cost("linf", 1)
    instance = build_instance([((0,), 1), ((1,), 1)], [((0,), 1), ((1,), 1)], cost, arith)
    half = arith.number(F(1, 2))
    swapped = [(0, 1, half), (1, 0, half)]
    with pytest.raises(PlanNotOptimalError):
        potentials_for_plan(instance, swapped)
    with pytest.raises(PlanNotOptimalError):
        plan_from_entries(instance, swapped)
    plan = plan_from_entries(instance, swapped, with_potentials=False)
    assert plan.value == arith.number(1)


def test_plan_from_entries_checks_marginals(two_by_two):
    with pytest.raises(UnbalancedWeightsError):
        plan_from_entries(two_by_two, [(0, 0, F(1, 2)), (0, 1, F(1, 2))])


def test_secondary_cost_breaks_ties(two_by_two):
    plan = solve_constrained(two_by_two, preset_cost("quadratic", 2))
    assert isinstance(plan, Plan)
    assert plan.source == "secondary"
    assert plan.support() == [(0, 0), (1, 1)]
    assert plan.value == F(5, 4)
    assert plan.primary_value == F(3, 2)


def test_two_disc_example_value_is_two():
    disc = {"kind": "disc", "radius": 1, "count": 500, "method": "sunflower"}
    mu = generate({"kind": "union", "parts": [dict(disc, center=[-2, 0]), dict(disc, center=[2, 0])]}, exact=False, seed=7)
    nu = generate({"kind": "pushforward", "of": "mu", "map": "T+"}, exact=False, seed=8, named={"mu": mu})
    instance = build_instance(mu.atoms, nu.atoms, preset_cost("linf", 2), FLOATING)
    solved = solve_primal(instance)
    assert solved.value == pytest.approx(2.0, rel=0.01)
    assert fixed_plan(instance, "T+").value == pytest.approx(solved.value, abs=1e-9)


def _exchange_gains(instance, plan):
    """Cost change of rerouting every cycle of two and of three support pairs."""
    rows = np.array([i for i, _, _ in plan.entries])
    cols = np.array([j for _, j, _ in plan.entries])
    cost = instance.cost_matrix
    on = cost[rows, cols]
    two = cost[rows[:, None], cols[None, :]] + cost[rows[None, :], cols[:, None]] - on[:, None] - on[None, :]
    three = (
        cost[rows[:, None, None], cols[None, :, None]]
        + cost[rows[None, :, None], cols[None, None, :]]
        + cost[rows[None, None, :], cols[:, None, None]]
        - on[:, None, None]
        - on[None, :, None]
        - on[None, None, :]
    )
    return two, three


@pytest.mark.parametrize("arith", [EXACT, FLOATING], ids=["rational", "float"])
def test_optimal_plans_are_cyclically_monotone(arith):
    rng = np.random.default_rng(23)
    floor = 0 if arith.exact else -1e-9
    for name in ("linf", "l1"):
        cost = preset_cost(name, 2)
        for m, n in ((3, 5), (8, 8), (13, 6), (20, 20)):
            mu = _random_atoms(rng, m, exact=arith.exact)
            nu = _random_atoms(rng, n, exact=arith.exact)
            instance = build_instance(mu, nu, cost, arith)
            plan = solve_primal(instance)
            two, three = _exchange_gains(instance, plan)
            assert min(two.flat) >= floor
            assert min(three.flat) >= floor


def test_float_potentials_match_exact_ones_on_a_tie_heavy_instance():
    rng = np.random.default_rng(31)
    cost = preset_cost("l1", 2)
    mu = [(tuple(int(v) for v in rng.integers(0, 5, size=2)), F(1)) for _ in range(60)]
    nu = [(tuple(int(v) for v in rng.integers(0, 5, size=2)), F(1)) for _ in range(90)]
    exact = build_instance(mu, nu, cost, EXACT)
    floating = build_instance([(p, 1.0) for p, _ in mu], [(p, 1.0) for p, _ in nu], cost, FLOATING)
    plan = solve_primal(exact)
    entries = [(i, j, float(mass)) for i, j, mass in plan.entries]

    phi, psi = potentials_for_plan(floating, entries)
    want_phi, want_psi = plan.phi, plan.psi
    assert list(phi) == pytest.approx([float(v) for v in want_phi], abs=1e-5)
    assert list(psi) == pytest.approx([float(v) for v in want_psi], abs=1e-5)
    matrix = np.asarray(floating.cost_matrix, dtype=float)
    assert (np.asarray(psi)[None, :] - np.asarray(phi)[:, None] <= matrix + 1e-5).all()
