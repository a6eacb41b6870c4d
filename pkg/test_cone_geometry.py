import math
from fractions import Fraction

import numpy as np
import pytest

from sudakov.cone_geometry import (
    Cone,
    active_set,
    cone_diamond,
    direction_hull,
    evaluate_cost,
    finite_step,
    format_cost_text,
    lift_cost,
    lifted_face,
    lifted_value,
    lifted_values,
    make_cost,
    minimal_extremal_face,
    parse_cost_text,
    preset_cost,
    rational_norm,
    subdifferential,
)
from sudakov.errors import InputError, ParseError
from sudakov.numeric import EXACT, FLOATING

F = Fraction


@pytest.fixture
def linf():
    return preset_cost("linf", 2)


@pytest.fixture
def wedge():
    # t >= 0, |x2| <= x1
    return Cone.from_inequalities([(1, 0, 0), (0, 1, -1), (0, 1, 1)], [], 3, EXACT)


def test_parse_cost_text_reads_pieces_and_comments():
    cost = parse_cost_text("# hexagon-ish\ndim 2\n\npiece 1 0 0\npiece -1 0 0  # left\npiece 0 1/2 1\n")
    assert cost.dimension == 2
    assert cost.pieces == (((F(1), F(0)), F(0)), ((F(-1), F(0)), F(0)), ((F(0), F(1, 2)), F(1)))


def test_parse_cost_text_reports_bad_rational_location():
    with pytest.raises(ParseError) as excinfo:
        parse_cost_text("dim 2\npiece 1 3/0 0\n", "cost.txt")
    assert excinfo.value.line == 2
    assert excinfo.value.column == 9
    assert "cost.txt" in str(excinfo.value)


def test_parse_cost_text_rejects_piece_before_dim_and_wrong_arity():
    with pytest.raises(ParseError):
        parse_cost_text("piece 1 0\n")
    with pytest.raises(ParseError) as excinfo:
        parse_cost_text("dim 2\npiece 1 0\n")
    assert excinfo.value.line == 2


def test_preset_file_and_round_trip(linf):
    assert parse_cost_text("dim 3\npreset l1\n").name == "l1:3"
    again = parse_cost_text(format_cost_text(make_cost(linf.pieces)))
    assert again.pieces == linf.pieces


def test_evaluate_cost_linf_exact(linf):
    assert evaluate_cost(linf, (3, -4)) == 4
    assert evaluate_cost(linf, (F(1, 3), F(-1, 5))) == F(1, 3)


def _oracle_active(cost, q):
    values = [sum(a_k * q_k for a_k, q_k in zip(a, q)) + b for a, b in cost.pieces]
    top = max(values)
    return frozenset(i for i, v in enumerate(values) if v == top)


def _random_cost(rng, dim):
    count = int(rng.integers(2, 13))
    pieces = [
        (tuple(int(v) for v in rng.integers(-3, 4, size=dim)), int(rng.integers(-2, 3)))
        for _ in range(count)
    ]
    return make_cost(pieces, dim)


def _check_face_oracle(seed, cost_count, point_count):
    rng = np.random.default_rng(seed)
    for _ in range(cost_count):
        dim = int(rng.integers(1, 4))
        cost = _random_cost(rng, dim)
        for _ in range(point_count):
            q = tuple(F(int(v), 2) for v in rng.integers(-4, 5, size=dim))
            face = minimal_extremal_face(cost, q, EXACT)
            assert face.active_indices == _oracle_active(cost, q)
            assert face.contains(q)
            for vertex in face.vertices:
                assert active_set(cost, vertex) >= face.active_indices


def test_minimal_extremal_face_matches_active_set_oracle():
    _check_face_oracle(5, 20, 25)


@pytest.mark.slow
def test_minimal_extremal_face_oracle_at_full_size():
    _check_face_oracle(6, 100, 1000)


def test_faces_containing_a_point_contain_its_minimal_face():
    rng = np.random.default_rng(13)
    for _ in range(15):
        dim = int(rng.integers(1, 4))
        cost = _random_cost(rng, dim)
        q = tuple(F(int(v), 2) for v in rng.integers(-4, 5, size=dim))
        smallest = minimal_extremal_face(cost, q, EXACT)
        for _ in range(6):
            # a small step only drops active pieces, so the face at p still holds q
            p = tuple(x + F(int(d), 1000) for x, d in zip(q, rng.integers(-3, 4, size=dim)))
            larger = minimal_extremal_face(cost, p, EXACT)
            assert larger.contains(q)
            assert larger.active_indices <= smallest.active_indices
            assert larger.affine_dim >= smallest.affine_dim
            for vertex in smallest.vertices:
                assert larger.contains(vertex)
                for ray in smallest.rays + smallest.lines:
                    assert larger.contains(tuple(v + r for v, r in zip(vertex, ray)))


def test_lifted_cost_is_positively_homogeneous():
    rng = np.random.default_rng(17)
    for _ in range(10):
        dim = int(rng.integers(1, 4))
        lifted = lift_cost(_random_cost(rng, dim))
        for _ in range(20):
            u = (F(int(rng.integers(0, 5)), 2), *(F(int(v), 3) for v in rng.integers(-6, 7, size=dim)))
            scale = F(int(rng.integers(1, 20)), int(rng.integers(1, 20)))
            scaled = tuple(scale * x for x in u)
            value = lifted_value(lifted, u)
            if value == math.inf:
                assert lifted_value(lifted, scaled) == math.inf
            else:
                assert lifted_value(lifted, scaled) == scale * value


def test_subdifferential_of_linf_on_diagonal(linf):
    poly = subdifferential(linf, (1, 1))
    assert set(poly.vertices) == {(F(1), F(0)), (F(0), F(1))}
    assert poly.affine_dim == 1
    rng = np.random.default_rng(2)
    assert all(poly.contains(p) for p in poly.sample(rng, 10))


def test_lifted_value_domain(linf):
    lifted = lift_cost(linf)
    assert lifted_value(lifted, (1, 3, -4)) == 4
    assert lifted_value(lifted, (2, 2, 0)) == 2
    assert lifted_value(lifted, (0, 0, 0)) == 0
    assert lifted_value(lifted, (0, 1, 0)) == math.inf
    assert lifted_value(lifted, (-1, 0, 0)) == math.inf


def test_lifted_values_agree_with_pointwise(linf):
    lifted = lift_cost(linf)
    rng = np.random.default_rng(9)
    vectors = np.column_stack([rng.uniform(0.1, 2.0, 40), rng.normal(size=(40, 2))])
    batch = lifted_values(lifted, vectors, FLOATING)
    for row, value in zip(vectors, batch):
        assert value == pytest.approx(lifted_value(lifted, tuple(row), FLOATING))


def test_lifted_face_full_wedge_and_edge(linf, wedge):
    lifted = lift_cost(linf)
    full = lifted_face(lifted, (1, 1, 0))
    assert full.section_dimension == 2
    assert full.same_set(wedge)
    assert full.contains((1, 2, 1))
    assert not full.contains((1, -1, 0))

    edge = lifted_face(lifted, (1, 1, -1))
    assert edge.section_dimension == 1
    assert edge.contains((2, 3, -3))
    assert not edge.contains((1, 1, 0))


def test_finite_step(wedge):
    assert finite_step(wedge, (0, 0, 0))
    assert finite_step(wedge, (1, 1, 0))
    assert not finite_step(wedge, (0, 1, 0))
    assert not finite_step(wedge, (1, -1, 0))


def test_neighbourhood_shrinks_and_dilates(wedge):
    inner = wedge.neighbourhood(F(-1, 10))
    assert inner.contains((1, F(1, 2), 0))
    assert wedge.contains((1, F(1, 10), 0))
    assert not inner.contains((1, F(1, 10), 0))

    outer = wedge.neighbourhood(F(1, 10))
    assert outer.contains((1, F(-1, 20), 0))
    assert not wedge.contains((1, F(-1, 20), 0))


def test_neighbourhood_is_exact_for_rational_normals():
    # t >= 0, x1 >= 0, 3 x1 + 4 x2 >= 0
    cone = Cone.from_inequalities([(1, 0, 0), (0, 1, 0), (0, 3, 4)], [], 3, EXACT)
    inner = cone.neighbourhood(F(-1, 10))
    by_hand = Cone.from_inequalities([(1, 0, 0), (F(-1, 10), 1, 0), (F(-1, 2), 3, 4)], [], 3, EXACT)
    assert inner.same_set(by_hand)
    assert all(isinstance(x, Fraction) for g in inner.inequalities for x in g)


def test_neighbourhood_rounds_irrational_norms_up(wedge):
    first = wedge.neighbourhood(F(-1, 10))
    second = wedge.neighbourhood(F(-1, 10))
    assert first.same_set(second)
    assert first.inequalities == second.inequalities

    shifts = sorted(-g[0] for g in first.inequalities if g[0] < 0)
    assert len(shifts) == 2 and shifts[0] == shifts[1]
    assert all(isinstance(g[0], Fraction) for g in first.inequalities)
    assert F(2, 100) <= shifts[0] ** 2 <= F(2, 100) + F(1, 2**30)


def test_rational_norm():
    assert rational_norm((3, 4)) == 5
    assert rational_norm((F(1, 2), 0)) == F(1, 2)
    root_two = rational_norm((1, 1))
    assert root_two ** 2 >= 2
    assert (root_two - F(1, 2**40)) ** 2 < 2


def test_neighbourhood_returns_none_when_section_vanishes():
    # section [0, 1] of {x >= 0, t >= x}
    cone = Cone.from_inequalities([(0, 1), (1, -1)], [], 2, EXACT)
    assert cone.section_dimension == 1
    assert cone.neighbourhood(-1) is None


def test_face_containing_picks_the_facet(wedge):
    facet = wedge.face_containing((1, 1, 1))
    assert facet.section_dimension == 1
    assert facet.contains((1, 2, 2))
    assert not facet.contains((1, 2, 1))


def test_section_is_truncated_triangle(wedge):
    section = wedge.section(3)
    assert set(section.vertices) == {(F(0), F(0)), (F(3), F(3)), (F(3), F(-3))}


def test_cone_diamond(wedge):
    diamond = cone_diamond((0, 0, 0), (1, 1, 0), wedge)
    assert diamond.contains((F(1, 2), F(1, 2), F(1, 2)))
    assert not diamond.contains((F(1, 2), 0, F(1, 2)))
    assert cone_diamond((0, 0, 0), (1, -1, 0), wedge).is_empty


def test_direction_hull_requires_normalised_directions():
    hull = direction_hull([(1, 1, 0), (1, 1, 1)])
    assert hull.section_dimension == 1
    with pytest.raises(InputError):
        direction_hull([(2, 1, 0)])
