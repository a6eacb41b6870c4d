from fractions import Fraction

import numpy as np
import pytest

from sudakov.cone_geometry import Cone, lift_cost, preset_cost
from sudakov.config import load_settings
from sudakov.errors import GridCoverageError, InputError
from sudakov.lifting_potential import PotentialField, first_partition
from sudakov.numeric import EXACT, FLOATING
from sudakov.ot_solver import build_instance, solve_primal
from sudakov.pipeline import load_problem, stage_decompose, stage_refine, stage_solve
from sudakov.problem_io import ProblemSpec
from sudakov.refinement import (
    GridSpec,
    TernaryValue,
    build_carriage_graph,
    evolve_max_plus,
    grid_for_graph,
    grid_usc_envelope,
    indecomposable_classes,
    reach_set,
    refine_partition,
    replay_cycle,
    theta_at,
    theta_envelope,
    theta_prime,
    to_fibration_coords,
)

F = Fraction


@pytest.fixture
def settings():
    return load_settings({"mode": "rational"}, use_dotenv=False)


@pytest.fixture
def shift(settings):
    """Three sources on a line, each moved right by 1/4; one h=1 class."""
    cost = preset_cost("linf", 1)
    mu = [((0,), 1), ((1,), 1), ((2,), 1)]
    nu = [((F(1, 4),), 1), ((F(5, 4),), 1), ((F(9, 4),), 1)]
    instance = build_instance(mu, nu, cost, EXACT)
    plan = solve_primal(instance)
    field = PotentialField.from_plan(instance, plan, lift_cost(cost))
    part = first_partition(instance, plan, field, settings)
    cls = part.classes[0]
    chart = to_fibration_coords(cls.base_point, cls.cone, settings)
    graph = build_carriage_graph(cls.label, cls.members, instance, plan, chart)
    return instance, plan, cls, graph


def _lattice(plan):
    disc = {"kind": "disc", "radius": 1, "method": "lattice", "spacing": "1/2"}
    return ProblemSpec(
        name="two_disc_lattice",
        cost="linf",
        mu={"kind": "union", "parts": [dict(disc, center=[-2, 0]), dict(disc, center=[2, 0])]},
        nu={"kind": "pushforward", "of": "mu", "map": "T+"},
        mode="rational",
        plan=plan,
    )


def test_ternary_ordering_and_value():
    assert TernaryValue((2, 0)) > TernaryValue((0, 2))
    assert TernaryValue((2,)) == TernaryValue((2, 0, 0))
    assert hash(TernaryValue((2,))) == hash(TernaryValue((2, 0)))
    assert TernaryValue((2,)).as_fraction() == F(2, 3)
    assert TernaryValue((0, 2)).as_fraction() == F(2, 9)
    assert str(TernaryValue((2, 0, 2, 0))) == "202"


def test_chart_keeps_time_and_round_trips(shift, settings):
    _, _, cls, graph = shift
    chart = graph.chart
    assert chart.h == 1
    point = (F(3, 4), F(7, 5))
    assert chart.to_chart(point)[0] == F(3, 4)
    assert chart.from_chart(chart.to_chart(point)) == point


def test_reach_sets_and_theta_levels(shift):
    _, _, _, graph = shift
    s0, s1, s2 = graph.sources
    assert reach_set(graph, s0) == {s0, ("t", 0)}
    assert reach_set(graph, s2) == set(graph.graph.nodes)
    with pytest.raises(InputError):
        reach_set(graph, ("t", 0))

    field = theta_envelope(theta_prime(graph), graph)
    assert field.theta_prime[s0] == TernaryValue((2, 2, 2))
    assert field.theta_prime[s1] == TernaryValue((0, 2, 2))
    assert field.theta_prime[s2] == TernaryValue((0, 0, 2))
    assert field.theta[s0] == field.theta_prime[("t", 0)]
    for i, j in graph.pairs:
        assert field.theta[("s", i)] == field.theta[("t", j)]
    for u, v in graph.return_edges():
        assert field.theta[v] >= field.theta[u]
    assert theta_at(field, graph.coords[s0]) == TernaryValue((2, 2, 2))


def test_components_are_the_theta_levels(shift):
    _, _, _, graph = shift
    comps = indecomposable_classes(graph)
    assert [c.sources for c in comps] == [(("s", 0),), (("s", 1),), (("s", 2),)]
    levels = {frozenset(v) for v in theta_prime(graph).level_classes(graph.sources).values()}
    assert levels == {frozenset(c.sources) for c in comps}
    for comp in comps:
        assert replay_cycle(graph, comp.witness_cycle)
    assert not replay_cycle(graph, (("s", 0), ("t", 1), ("s", 0)))
    assert not replay_cycle(graph, (("s", 2), ("t", 2), ("s", 0)))


def test_components_match_theta_levels_on_random_graphs():
    rng = np.random.default_rng(21)
    settings = load_settings({"mode": "float"}, use_dotenv=False)
    cost = preset_cost("linf", 2)
    wedge = Cone.from_inequalities([(1, 0, 0), (0, 1, -1), (0, 1, 1)], [], 3, FLOATING)
    for _ in range(25):
        m = int(rng.integers(2, 10))
        mu = [(tuple(float(v) for v in rng.integers(0, 5, size=2)), 1.0) for _ in range(m)]
        nu = [(tuple(float(v) for v in rng.integers(-2, 3, size=2)), 1.0) for _ in range(m)]
        instance = build_instance(mu, nu, cost, FLOATING)
        plan = solve_primal(instance)
        chart = to_fibration_coords((1.0, *instance.mu_points[0]), wedge, settings)
        graph = build_carriage_graph("random", range(len(instance.mu_points)), instance, plan, chart)
        levels = {frozenset(v) for v in theta_prime(graph).level_classes(graph.sources).values()}
        assert levels == {frozenset(c.sources) for c in indecomposable_classes(graph)}


def test_refine_keeps_a_stable_class(shift, settings):
    instance, plan, cls, _ = shift
    subs = refine_partition(cls, instance, plan, settings)
    assert [s.label for s in subs] == ["Z1_0.0", "Z1_0.1", "Z1_0.2"]
    assert all(s.ell == 1 and s.indecomposable and s.rounds == 1 for s in subs)
    assert [s.members for s in subs] == [(0,), (1,), (2,)]


def test_lattice_with_one_map_refines_into_lines(settings):
    art = load_problem(_lattice("T+"), settings)
    stage_solve(art)
    stage_decompose(art)
    refinements = stage_refine(art)
    full = [c for c in art.partition.classes if c.h == 2]
    assert len(full) == 2
    for cls in full:
        subs = refinements[cls.label]
        assert subs
        assert sorted(i for s in subs for i in s.members) == sorted(cls.members)
        for sub_ in subs:
            assert sub_.ell == 1 and sub_.indecomposable
            (direction,) = sub_.subcone.section_direction_basis()
            assert direction[0] == 0 and direction[1] == -direction[2] != 0
            sums = {art.instance.mu_points[i][0] + art.instance.mu_points[i][1] for i in sub_.members}
            assert len(sums) == 1


def test_lattice_with_averaged_maps_stays_two_dimensional(settings):
    art = load_problem(_lattice("average"), settings)
    stage_solve(art)
    stage_decompose(art)
    refinements = stage_refine(art)
    full = [c for c in art.partition.classes if c.h == 2]
    assert len(full) == 2
    for cls in full:
        assert all(s.ell == 2 and s.indecomposable for s in refinements[cls.label])


def test_max_plus_evolution_composes():
    # |x| <= t
    cone = Cone.from_inequalities([(1, 1), (1, -1)], [], 2, EXACT)
    seeds = np.array([[0.0, 0.0], [0.0, 1.0]])
    values = np.array([3, 5])
    finish = np.array([[1.0, x] for x in (-1, 0, 1, 2, 3)])
    direct = evolve_max_plus(seeds, values, finish, cone)
    assert direct.tolist() == [3, 5, 5, 5, -1]

    middle = np.array([[0.5, x] for x in (-1, -0.5, 0, 0.5, 1, 1.5, 2)])
    mid_values = evolve_max_plus(seeds, values, middle, cone)
    assert mid_values.tolist() == [-1, 3, 3, 5, 5, 5, -1]
    assert evolve_max_plus(middle, mid_values, finish, cone).tolist() == direct.tolist()

    dilated = evolve_max_plus(seeds, values, np.array([[1.0, -1.2]]), cone, dilation=0.5)
    assert dilated.tolist() == [3]


def test_grid_envelope_dominates_theta(shift):
    _, _, _, graph = shift
    field = theta_envelope(theta_prime(graph), graph)
    grid = grid_for_graph(graph, (F(1, 2), 1), 9)
    report = grid_usc_envelope(field, grid)
    assert 0.0 <= report.excess_fraction <= 1.0
    for vartheta, theta in zip(report.vartheta, report.theta):
        reached = theta >= 0
        assert np.all(vartheta[reached] >= theta[reached])

    with pytest.raises(GridCoverageError):
        grid_usc_envelope(field, GridSpec((1,), (100.0,), (101.0,), 5))
