from dataclasses import replace
from fractions import Fraction
from types import SimpleNamespace

import pytest

from sudakov.cone_geometry import Cone, preset_cost
from sudakov.config import load_settings
from sudakov.errors import EmptyDecompositionError, ParameterOrderError
from sudakov.measure_verify import (
    CHECK_NAMES,
    FAIL,
    PASS,
    SKIPPED,
    area_estimate_check,
    area_estimate_sweep,
    disintegration_report,
    invariant_suite,
    residual_scaling,
)
from sudakov.numeric import EXACT
from sudakov.ot_solver import build_instance, plan_from_entries
from sudakov.pipeline import (
    load_problem,
    stage_decompose,
    stage_envelopes,
    stage_extract,
    stage_refine,
    stage_solve,
    stage_verify,
)
from sudakov.problem_io import ProblemSpec

F = Fraction
HALF, QUARTER = F(1, 2), F(1, 4)


@pytest.fixture
def settings():
    return load_settings({"mode": "rational"}, use_dotenv=False)


@pytest.fixture
def wedge():
    return Cone.from_inequalities([(1, 0, 0), (0, 1, -1), (0, 1, 1)], [], 3, EXACT)


BOX = ((HALF, -QUARTER), (F(1), QUARTER))


def test_area_estimate_meets_the_bound_in_two_dimensions(wedge):
    estimate = area_estimate_check(wedge, BOX, 1, HALF, QUARTER, 200, 0.05)
    assert estimate.h == 2
    assert estimate.scale == F(1, 3)
    assert estimate.bound == pytest.approx(0.95 / 9)
    assert estimate.size == 200 * 200
    assert float(estimate.ratio) >= estimate.bound
    assert estimate.passed


def test_area_estimate_on_a_half_line():
    cone = Cone.from_inequalities([(1, 0), (0, 1)], [], 2, EXACT)
    estimate = area_estimate_check(cone, ((HALF,), (F(1),)), 1, HALF, QUARTER, 200, 0.05)
    assert estimate.h == 1
    assert estimate.passed
    assert float(estimate.ratio) >= 0.95 / 3


def test_identity_homothety_keeps_every_cell(wedge):
    estimate = area_estimate_check(wedge, BOX, 1, 1, QUARTER, 40, 0.0)
    assert estimate.scale == 1
    assert estimate.ratio == 1
    assert estimate.passed


def test_cone_shape_only_enters_through_the_focal_point(wedge, monkeypatch):
    narrow = area_estimate_check(wedge, BOX, 1, HALF, QUARTER, 60, 0.05)
    wide = Cone.from_inequalities([(1, 0, 0), (0, 3, -1), (0, 3, 1)], [], 3, EXACT)
    monkeypatch.setattr("sudakov.measure_verify._focal_point", lambda *args: narrow.focal_point)
    same_focal = area_estimate_check(wide, BOX, 1, HALF, QUARTER, 60, 0.05)
    assert same_focal.focal_point == narrow.focal_point
    assert (same_focal.inner_count, same_focal.ratio) == (narrow.inner_count, narrow.ratio)


def test_area_estimate_rejects_misordered_levels(wedge):
    with pytest.raises(ParameterOrderError):
        area_estimate_check(wedge, BOX, 1, QUARTER, HALF, 50, 0.05)
    with pytest.raises(ParameterOrderError):
        area_estimate_check(wedge, BOX, HALF, 1, QUARTER, 50, 0.05)


def test_area_sweep_improves_with_resolution(wedge):
    report = area_estimate_sweep(wedge, BOX, 1, HALF, QUARTER, (25, 50, 100, 200), 0.05)
    assert [e.resolution for e in report.estimates] == [25, 50, 100, 200]
    assert report.monotone
    assert report.estimates[-1].passed


def _line_instance(weights):
    mu = [((k,), w) for k, w in enumerate(weights)]
    return build_instance(mu, [((-1,), 1)], preset_cost("linf", 1), EXACT)


def _line_class(label, members):
    cone = Cone.from_inequalities([(1, 0), (0, -1)], [], 2, EXACT)
    return SimpleNamespace(label=label, members=tuple(members), cone=cone)


def test_disintegration_flags_a_heavy_atom(settings):
    uniform = _line_instance([1] * 20)
    report = disintegration_report([_line_class("flat", range(20))], uniform, settings)
    assert report.flagged == ()
    assert report.bins == 16

    heavy = _line_instance([100] + [1] * 19)
    report = disintegration_report([_line_class("spike", range(20))], heavy, settings)
    assert report.flagged == ("spike",)
    assert report.classes[0].top_share >= 0.5


def test_disintegration_masses_add_up(settings):
    instance = _line_instance([1] * 12)
    classes = [_line_class("a", range(8)), _line_class("b", range(8, 10))]
    report = disintegration_report(classes, instance, settings, outside=[10, 11])
    assert report.quotient_weights == {"a": F(8, 12), "b": F(2, 12)}
    assert report.residual_mass == F(2, 12)
    assert report.total_mass == 1
    assert report.unaccounted_mass == 0
    assert report.flagged == ()

    lost = disintegration_report(classes, instance, settings, outside=[10])
    assert lost.residual_mass == F(1, 12)
    assert lost.unaccounted_mass == F(1, 12)


def test_disintegration_needs_classes(settings):
    with pytest.raises(EmptyDecompositionError):
        disintegration_report([], _line_instance([1, 1]), settings)


def test_invariant_suite_is_vacuous_without_a_problem(settings):
    results = invariant_suite(None, settings)
    assert [r.name for r in results] == list(CHECK_NAMES)
    assert {r.status for r in results} == {PASS}


def test_invariant_suite_finds_the_exchange_witness(settings):
    instance = build_instance([((0,), 1), ((1,), 1)], [((0,), 1), ((1,), 1)], preset_cost("linf", 1), EXACT)
    swapped = plan_from_entries(instance, [(0, 1, HALF), (1, 0, HALF)], with_potentials=False)
    results = {r.name: r for r in invariant_suite(SimpleNamespace(instance=instance, plan=swapped, partition=None), settings)}
    assert results["marginals"].status == PASS
    assert results["duality_gap"].status == FAIL
    assert results["cyclical_monotonicity"].status == FAIL
    assert results["cyclical_monotonicity"].witness == [(0, 1), (1, 0)]
    assert {results[name].status for name in CHECK_NAMES[3:]} == {SKIPPED}


@pytest.fixture(scope="module")
def lattice_artifacts():
    disc = {"kind": "disc", "radius": 1, "method": "lattice", "spacing": "1/2"}
    spec = ProblemSpec(
        name="two_disc_lattice",
        cost="linf",
        mu={"kind": "union", "parts": [dict(disc, center=[-2, 0]), dict(disc, center=[2, 0])]},
        nu={"kind": "pushforward", "of": "mu", "map": "T+"},
        mode="rational",
        plan="T+",
    )
    art = load_problem(spec, load_settings({"mode": "rational"}, use_dotenv=False))
    stage_solve(art)
    stage_decompose(art)
    stage_refine(art)
    stage_envelopes(art)
    stage_extract(art)
    stage_verify(art)
    return art


def test_invariant_suite_passes_on_the_lattice_example(lattice_artifacts):
    art = lattice_artifacts
    checks = art.checks

    assert [c.name for c in checks] == list(CHECK_NAMES)
    failed = [(c.name, c.detail) for c in checks if c.status == FAIL]
    assert failed == []
    assert art.disintegration is not None
    assert art.disintegration.unaccounted_mass == 0
    statuses = [entry["status"] for entry in art.area_estimates.values()]
    assert "fail" not in statuses
    assert statuses.count("pass") >= 2


def test_mass_conservation_catches_a_dropped_atom(lattice_artifacts, settings):
    art = lattice_artifacts
    label, subs = next((label, subs) for label, subs in art.refinements.items() if len(subs) > 1)
    dropped = replace(art, refinements={**art.refinements, label: subs[:-1]})
    lost = set(subs[-1].members)

    results = {r.name: r for r in invariant_suite(dropped, settings)}
    check = results["mass_conservation"]
    assert check.status == FAIL
    assert set(check.witness) == lost
    assert results["marginals"].status == PASS


def test_residual_scaling_reports_growth():
    masses = {10: 0.2, 20: 0.1, 40: 0.1}
    report = residual_scaling([10, 20, 40], lambda n: SimpleNamespace(residual_mass=masses[n]))
    assert report.rows == ((10, 0.2), (20, 0.1), (40, 0.1))
    assert report.monotone

    growing = residual_scaling([10, 20], lambda n: SimpleNamespace(residual_mass=n / 100))
    assert not growing.monotone
