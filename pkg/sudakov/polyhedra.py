"""H/V conversions of polyhedra by double description (pycddlib).

Inequality rows are ``(b, a_1, ..., a_n)`` meaning ``b + a·x >= 0``; equality
rows use the same layout with ``=``. Generators split into points, rays and
lines. Rational mode runs cdd with exact fractions.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import cdd

try:  # pycddlib >= 3 keeps exact arithmetic in a separate module
    import cdd.gmp as _cdd_exact
except ImportError:  # pragma: no cover
    _cdd_exact = None

_LEGACY_API = hasattr(cdd, "Matrix")


@dataclass(frozen=True)
class Generators:
    points: tuple
    rays: tuple
    lines: tuple


@dataclass(frozen=True)
class HForm:
    inequalities: tuple
    equalities: tuple


def _value(x, exact: bool):
    return Fraction(x) if exact else float(x)


def _polyhedron(rows: list, lin_rows: list, rep_type, exact: bool):
    if _LEGACY_API:
        number_type = "fraction" if exact else "float"
        if rows:
            mat = cdd.Matrix(rows, linear=False, number_type=number_type)
            if lin_rows:
                mat.extend(lin_rows, linear=True)
        else:
            mat = cdd.Matrix(lin_rows, linear=True, number_type=number_type)
        mat.rep_type = rep_type
        return cdd.Polyhedron(mat)
    module = _cdd_exact if exact else cdd
    if module is None:
        raise RuntimeError("pycddlib was built without exact arithmetic; use float mode")
    array = rows + lin_rows
    mat = module.matrix_from_array(array, lin_set=set(range(len(rows), len(array))), rep_type=rep_type)
    return module.polyhedron_from_matrix(mat)


def _read(poly, generators: bool, exact: bool) -> tuple[list, set]:
    if _LEGACY_API:
        mat = poly.get_generators() if generators else poly.get_inequalities()
        rows = [list(mat[i]) for i in range(mat.row_size)]
        return rows, set(mat.lin_set)
    module = _cdd_exact if exact else cdd
    mat = module.copy_generators(poly) if generators else module.copy_inequalities(poly)
    return [list(r) for r in mat.array], set(mat.lin_set)


def _row(values: Sequence, exact: bool) -> list:
    return [_value(x, exact) for x in values]


def h_to_v(inequalities: Sequence[Sequence], equalities: Sequence[Sequence], dim: int, exact: bool) -> Generators:
    """Generators of {x in R^dim : b + a·x >= 0 (rows), b + a·x = 0 (equalities)}."""
    rows = [_row(r, exact) for r in inequalities]
    lin_rows = [_row(r, exact) for r in equalities]
    if not rows and not lin_rows:
        rows = [_row([1] + [0] * dim, exact)]
    poly = _polyhedron(rows, lin_rows, cdd.RepType.INEQUALITY, exact)
    out, lin_set = _read(poly, True, exact)
    points, rays, lines = [], [], []
    for k, row in enumerate(out):
        lead = _value(row[0], exact)
        vec = tuple(_value(x, exact) for x in row[1:])
        if k in lin_set:
            lines.append(vec)
        elif lead == 0:
            rays.append(vec)
        else:
            points.append(tuple(x / lead for x in vec))
    return Generators(tuple(points), tuple(rays), tuple(lines))


def v_to_h(points: Sequence[Sequence], rays: Sequence[Sequence], lines: Sequence[Sequence], dim: int, exact: bool) -> HForm:
    """Inequality form of conv(points) + cone(rays) + span(lines)."""
    if not points:
        points = [tuple([0] * dim)]
    rows = [_row([1, *p], exact) for p in points] + [_row([0, *r], exact) for r in rays]
    lin_rows = [_row([0, *l], exact) for l in lines]
    poly = _polyhedron(rows, lin_rows, cdd.RepType.GENERATOR, exact)
    out, lin_set = _read(poly, False, exact)
    ineqs, eqs = [], []
    for k, row in enumerate(out):
        vec = tuple(_value(x, exact) for x in row)
        if k in lin_set:
            eqs.append(vec)
        elif any(x != 0 for x in vec[1:]):
            ineqs.append(vec)
    return HForm(tuple(ineqs), tuple(eqs))
