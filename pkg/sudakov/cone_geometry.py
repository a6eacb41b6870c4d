"""Polyhedral convex costs, their homogeneous lifting, and the cones and faces built from them.

A cost is ``c(q) = max_i (a_i·q + b_i)`` over finitely many affine pieces, or
the flagged strictly convex preset ``|q|^2/2``. The lifted cost lives on
``[0, inf) x R^d`` with the time coordinate first: ``cbar(t, x) = t c(-x/t)``
for ``t > 0``, ``cbar(0, 0) = 0`` and ``+inf`` elsewhere.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Iterable, Sequence

import numpy as np
import sympy

from .errors import DimensionMismatchError, InputError, ParseError
from .numeric import (
    EXACT,
    Arithmetic,
    dot,
    format_number,
    nullspace,
    parse_number,
    projector,
    rank,
    span_basis,
    sub,
)
from .polyhedra import h_to_v, v_to_h

logger = logging.getLogger(__name__)

PRESETS = ("linf", "l1", "quadratic")


@dataclass(frozen=True)
class PolyhedralCost:
    """Max of affine pieces ``(a_i, b_i)``; quadratic preset has no pieces."""

    dimension: int
    pieces: tuple = ()
    preset: str | None = None
    strictly_convex: bool = False

    @property
    def name(self) -> str:
        return f"{self.preset}:{self.dimension}" if self.preset else f"pieces[{len(self.pieces)}]:{self.dimension}"

    @property
    def homogeneous(self) -> bool:
        if self.preset in PRESETS:
            return True
        return all(b == 0 for _, b in self.pieces)


def make_cost(pieces: Iterable[tuple[Sequence, object]], dimension: int | None = None) -> PolyhedralCost:
    rows = []
    for a, b in pieces:
        a = tuple(Fraction(x) for x in a)
        rows.append((a, Fraction(b)))
    if not rows:
        raise InputError("a polyhedral cost needs at least one affine piece")
    dim = dimension if dimension is not None else len(rows[0][0])
    for a, _ in rows:
        if len(a) != dim:
            raise DimensionMismatchError(f"piece has {len(a)} coefficients, expected {dim}")
    return PolyhedralCost(dimension=dim, pieces=tuple(rows))


def preset_cost(name: str, dimension: int) -> PolyhedralCost:
    if dimension < 1:
        raise InputError(f"cost dimension must be positive, got {dimension}")
    key = (name or "").strip().lower()
    if key == "quadratic":
        return PolyhedralCost(dimension=dimension, pieces=(), preset="quadratic", strictly_convex=True)
    one, zero = Fraction(1), Fraction(0)
    if key == "linf":
        pieces = []
        for i in range(dimension):
            for sign in (one, -one):
                pieces.append((tuple(sign if j == i else zero for j in range(dimension)), zero))
        return PolyhedralCost(dimension=dimension, pieces=tuple(pieces), preset="linf")
    if key == "l1":
        pieces = [(tuple(Fraction(s) for s in signs), zero) for signs in product((1, -1), repeat=dimension)]
        return PolyhedralCost(dimension=dimension, pieces=tuple(pieces), preset="l1")
    raise InputError(f"unknown cost preset {name!r}; expected one of {', '.join(PRESETS)}")


def parse_cost_text(text: str, path: str | None = None) -> PolyhedralCost:
    """Parse the cost file format.

    ``dim <d>`` then ``piece a_1 ... a_d b`` lines, or ``preset <name>`` with a
    ``dim`` line. ``#`` starts a comment. Numbers are ``p/q`` or decimals.
    """
    dimension = None
    preset = None
    pieces = []
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0]
        tokens = [(m.group(0), m.start() + 1) for m in re.finditer(r"\S+", line)]
        if not tokens:
            continue
        head, head_col = tokens[0]
        keyword = head.lower()
        if keyword == "dim":
            if dimension is not None:
                raise ParseError("duplicate dim line", path=path, line=lineno, column=head_col)
            if len(tokens) != 2:
                raise ParseError("expected `dim <d>`", path=path, line=lineno, column=head_col)
            value, col = tokens[1]
            try:
                dimension = int(value)
            except ValueError:
                raise ParseError(f"dimension must be an integer, got {value!r}", path=path, line=lineno, column=col) from None
            if dimension < 1:
                raise ParseError("dimension must be positive", path=path, line=lineno, column=col)
        elif keyword == "preset":
            if len(tokens) != 2:
                raise ParseError("expected `preset <name>`", path=path, line=lineno, column=head_col)
            preset = tokens[1][0].lower()
            if preset not in PRESETS:
                raise ParseError(f"unknown preset {tokens[1][0]!r}", path=path, line=lineno, column=tokens[1][1])
        elif keyword == "piece":
            if dimension is None:
                raise ParseError("`piece` before `dim`", path=path, line=lineno, column=head_col)
            if len(tokens) != dimension + 2:
                raise ParseError(
                    f"piece needs {dimension + 1} numbers, got {len(tokens) - 1}", path=path, line=lineno, column=head_col
                )
            values = []
            for value, col in tokens[1:]:
                try:
                    values.append(parse_number(value, exact=True))
                except ValueError as exc:
                    raise ParseError(str(exc), path=path, line=lineno, column=col) from None
            pieces.append((tuple(values[:-1]), values[-1]))
        else:
            raise ParseError(f"unknown directive {head!r}", path=path, line=lineno, column=head_col)
    if dimension is None:
        raise ParseError("missing `dim` line", path=path)
    if preset is not None:
        if pieces:
            raise ParseError("a preset cost cannot also list pieces", path=path)
        return preset_cost(preset, dimension)
    if not pieces:
        raise ParseError("cost file lists no pieces", path=path)
    return make_cost(pieces, dimension)


def format_cost_text(cost: PolyhedralCost) -> str:
    lines = [f"dim {cost.dimension}"]
    if cost.preset:
        lines.insert(0, f"preset {cost.preset}")
        return "\n".join(lines) + "\n"
    for a, b in cost.pieces:
        lines.append("piece " + " ".join(format_number(x) for x in (*a, b)))
    return "\n".join(lines) + "\n"


def _check_dim(cost: PolyhedralCost, q: Sequence) -> None:
    if len(q) != cost.dimension:
        raise DimensionMismatchError(f"point has dimension {len(q)}, cost has dimension {cost.dimension}")


@lru_cache(maxsize=256)
def piece_arrays(cost: PolyhedralCost, exact: bool) -> tuple[np.ndarray, np.ndarray]:
    """Piece slopes (k x d) and offsets (k,) as numpy arrays."""
    if exact:
        slopes = np.empty((len(cost.pieces), cost.dimension), dtype=object)
        offsets = np.empty(len(cost.pieces), dtype=object)
        for i, (a, b) in enumerate(cost.pieces):
            slopes[i, :] = list(a)
            offsets[i] = b
        return slopes, offsets
    slopes = np.array([[float(x) for x in a] for a, _ in cost.pieces], dtype=float).reshape(len(cost.pieces), cost.dimension)
    offsets = np.array([float(b) for _, b in cost.pieces], dtype=float)
    return slopes, offsets


def evaluate_cost(cost: PolyhedralCost, q: Sequence, arith: Arithmetic = EXACT):
    _check_dim(cost, q)
    q = arith.vector(q)
    if cost.strictly_convex:
        value = dot(q, q) / 2
    else:
        value = max(dot(arith.vector(a), q) + arith.number(b) for a, b in cost.pieces)
    if arith.lt(value, 0):
        raise InputError(f"cost is negative ({value}) at {tuple(str(x) for x in q)}")
    return value


def active_set(cost: PolyhedralCost, q: Sequence, tol=0) -> frozenset:
    """Indices of pieces within ``tol`` of the maximum at ``q``. Empty for the quadratic preset."""
    _check_dim(cost, q)
    if cost.strictly_convex:
        return frozenset()
    values = [dot(a, q) + b for a, b in cost.pieces]
    top = max(values)
    return frozenset(i for i, v in enumerate(values) if v >= top - tol)


@dataclass(frozen=True, eq=False)
class Polytope:
    """Polyhedron in both forms: rows ``(b, a)`` for ``b + a·x >= 0`` plus vertices and rays."""

    dim: int
    inequalities: tuple
    equalities: tuple
    vertices: tuple
    rays: tuple
    lines: tuple
    arith: Arithmetic

    @classmethod
    def from_h(cls, inequalities, equalities, dim: int, arith: Arithmetic) -> "Polytope":
        gens = h_to_v(inequalities, equalities, dim, arith.exact)
        return cls(dim, tuple(inequalities), tuple(equalities), gens.points, gens.rays, gens.lines, arith)

    @classmethod
    def from_points(cls, points, arith: Arithmetic) -> "Polytope":
        points = [arith.vector(p) for p in points]
        dim = len(points[0])
        hform = v_to_h(points, (), (), dim, arith.exact)
        gens = h_to_v(hform.inequalities, hform.equalities, dim, arith.exact)
        return cls(dim, hform.inequalities, hform.equalities, gens.points, gens.rays, gens.lines, arith)

    @property
    def is_empty(self) -> bool:
        return not self.vertices

    @property
    def affine_dim(self) -> int:
        if self.is_empty:
            return -1
        base = self.vertices[0]
        vectors = [sub(v, base) for v in self.vertices[1:]] + list(self.rays) + list(self.lines)
        return rank(vectors, self.arith)

    def contains(self, p: Sequence) -> bool:
        arith = self.arith
        p = arith.vector(p)
        if any(not arith.leq(0, row[0] + dot(row[1:], p)) for row in self.inequalities):
            return False
        return all(arith.is_zero(row[0] + dot(row[1:], p)) for row in self.equalities)

    def sample(self, rng: np.random.Generator, count: int) -> list[tuple]:
        """Random points: convex combinations of vertices plus non-negative ray multiples."""
        if self.is_empty:
            return []
        arith = self.arith
        out = []
        for _ in range(count):
            weights = [int(w) for w in rng.integers(1, 11, size=len(self.vertices))]
            total = sum(weights)
            point = [arith.number(0)] * self.dim
            for w, v in zip(weights, self.vertices):
                factor = arith.number(Fraction(w, total))
                point = [x + factor * y for x, y in zip(point, v)]
            for r in self.rays:
                factor = arith.number(Fraction(int(rng.integers(0, 5)), 4))
                point = [x + factor * y for x, y in zip(point, r)]
            out.append(tuple(point))
        return out


@dataclass(frozen=True, eq=False)
class Face:
    """Projected face ``O`` of epi c: points where the active pieces all attain the max."""

    active_indices: frozenset
    vertices: tuple
    rays: tuple
    lines: tuple
    inequalities: tuple
    equalities: tuple
    affine_dim: int
    support_plane: tuple
    arith: Arithmetic

    @property
    def generators(self) -> tuple:
        return self.vertices + self.rays + self.lines

    def contains(self, p: Sequence) -> bool:
        arith = self.arith
        p = arith.vector(p)
        if any(not arith.leq(0, row[0] + dot(row[1:], p)) for row in self.inequalities):
            return False
        return all(arith.is_zero(row[0] + dot(row[1:], p)) for row in self.equalities)

    def same_set(self, other: "Face") -> bool:
        return self.active_indices == other.active_indices and self.affine_dim == other.affine_dim


def _face_h_form(cost: PolyhedralCost, active: frozenset, arith: Arithmetic):
    i0 = min(active)
    a0, b0 = cost.pieces[i0]
    a0, b0 = arith.vector(a0), arith.number(b0)
    ineqs, eqs = [], []
    for k, (a, b) in enumerate(cost.pieces):
        a, b = arith.vector(a), arith.number(b)
        row = (b0 - b, *(x - y for x, y in zip(a0, a)))
        if k in active:
            if k != i0:
                eqs.append(tuple(-x for x in row))
        else:
            ineqs.append(row)
    return ineqs, eqs


def minimal_extremal_face(cost: PolyhedralCost, q: Sequence, arith: Arithmetic = EXACT) -> Face:
    """Face ``O`` of points sharing the active pieces of ``q``; ``q`` lies in its relative interior."""
    _check_dim(cost, q)
    q = arith.vector(q)
    if cost.strictly_convex:
        plane = (q, -dot(q, q) / 2)
        eqs = tuple((-x, *(arith.number(1) if j == i else arith.number(0) for j in range(cost.dimension))) for i, x in enumerate(q))
        return Face(frozenset(), (q,), (), (), (), eqs, 0, plane, arith)
    active = active_set(cost, q, arith.tol) if not arith.exact else active_set(cost, q)
    ineqs, eqs = _face_h_form(cost, active, arith)
    gens = h_to_v(ineqs, eqs, cost.dimension, arith.exact)
    base = gens.points[0]
    affine_dim = rank([sub(v, base) for v in gens.points[1:]] + list(gens.rays) + list(gens.lines), arith)
    a0, b0 = cost.pieces[min(active)]
    plane = (arith.vector(a0), arith.number(b0))
    return Face(active, gens.points, gens.rays, gens.lines, tuple(ineqs), tuple(eqs), affine_dim, plane, arith)


def subdifferential(cost: PolyhedralCost, q: Sequence, arith: Arithmetic = EXACT) -> Polytope:
    """``conv{a_i : i active at q}``; the gradient point for the quadratic preset."""
    _check_dim(cost, q)
    if cost.strictly_convex:
        return Polytope.from_points([arith.vector(q)], arith)
    active = active_set(cost, q, arith.tol) if not arith.exact else active_set(cost, q)
    slopes = sorted({arith.vector(cost.pieces[i][0]) for i in active})
    return Polytope.from_points(slopes, arith)


@dataclass(frozen=True)
class LiftedCost:
    """``cbar(t, x) = max_i (b_i t - a_i·x)`` for ``t > 0``; pieces stored as ``(b_i, -a_i)``."""

    base: PolyhedralCost
    pieces: tuple

    @property
    def dimension(self) -> int:
        return self.base.dimension + 1

    @property
    def strictly_convex(self) -> bool:
        return self.base.strictly_convex


def lift_cost(cost: PolyhedralCost) -> LiftedCost:
    pieces = tuple((b, *(-x for x in a)) for a, b in cost.pieces)
    return LiftedCost(base=cost, pieces=pieces)


@lru_cache(maxsize=256)
def lifted_piece_matrix(lifted: LiftedCost, exact: bool) -> np.ndarray:
    if exact:
        matrix = np.empty((len(lifted.pieces), lifted.dimension), dtype=object)
        for i, row in enumerate(lifted.pieces):
            matrix[i, :] = list(row)
        return matrix
    return np.array([[float(x) for x in row] for row in lifted.pieces], dtype=float).reshape(len(lifted.pieces), lifted.dimension)


def lifted_value(lifted: LiftedCost, u: Sequence, arith: Arithmetic = EXACT):
    """``cbar(u)``; ``math.inf`` outside the domain."""
    if len(u) != lifted.dimension:
        raise DimensionMismatchError(f"lifted point has dimension {len(u)}, expected {lifted.dimension}")
    u = arith.vector(u)
    t, x = u[0], u[1:]
    if arith.exact:
        if t < 0:
            return math.inf
        if t == 0:
            return Fraction(0) if all(v == 0 for v in x) else math.inf
    else:
        if t < -arith.tol:
            return math.inf
        if t <= arith.tol:
            return 0.0 if all(abs(v) <= arith.tol for v in x) else math.inf
    if lifted.strictly_convex:
        return dot(x, x) / (2 * t)
    return max(dot(arith.vector(row), u) for row in lifted.pieces)


def lifted_values(lifted: LiftedCost, vectors: np.ndarray, arith: Arithmetic) -> np.ndarray:
    """Vectorised ``cbar`` over the rows of ``vectors`` (object array in rational mode)."""
    vectors = np.asarray(vectors, dtype=object if arith.exact else float)
    count = vectors.shape[0]
    out = np.empty(count, dtype=object if arith.exact else float)
    if count == 0:
        return out
    t = vectors[:, 0]
    x = vectors[:, 1:]
    if arith.exact:
        positive = np.array([v > 0 for v in t], dtype=bool)
        zero_t = np.array([v == 0 for v in t], dtype=bool)
        zero_x = np.array([all(c == 0 for c in row) for row in x], dtype=bool) if x.shape[1] else np.ones(count, dtype=bool)
    else:
        positive = t > arith.tol
        zero_t = np.abs(t) <= arith.tol
        zero_x = np.all(np.abs(x) <= arith.tol, axis=1) if x.shape[1] else np.ones(count, dtype=bool)
    out[:] = math.inf
    out[zero_t & zero_x] = Fraction(0) if arith.exact else 0.0
    if np.any(positive):
        rows = vectors[positive]
        if lifted.strictly_convex:
            xs = rows[:, 1:]
            out[positive] = (xs * xs).sum(axis=1) / (2 * rows[:, 0])
        else:
            matrix = lifted_piece_matrix(lifted, arith.exact)
            out[positive] = (rows @ matrix.T).max(axis=1)
    return out


def lifted_active_set(lifted: LiftedCost, u: Sequence, arith: Arithmetic = EXACT) -> frozenset:
    u = arith.vector(u)
    if lifted.strictly_convex:
        return frozenset()
    values = [dot(arith.vector(row), u) for row in lifted.pieces]
    top = max(values)
    return frozenset(i for i, v in enumerate(values) if v >= top - arith.tol)


def lifted_active_masks(lifted: LiftedCost, vectors: np.ndarray, arith: Arithmetic) -> np.ndarray:
    """Boolean (n x k) matrix of active lifted pieces per row of ``vectors`` (rows with t > 0)."""
    matrix = lifted_piece_matrix(lifted, arith.exact)
    values = np.asarray(vectors, dtype=object if arith.exact else float) @ matrix.T
    top = values.max(axis=1)
    if arith.exact:
        return np.array([[v == m for v in row] for row, m in zip(values, top)], dtype=bool).reshape(values.shape)
    return values >= top[:, None] - arith.tol


def _norm(v) -> float:
    return math.sqrt(sum(float(x) ** 2 for x in v))


NORM_BITS = 40


def rational_norm(v: Sequence) -> Fraction:
    """Euclidean norm of a rational vector, rounded up to a multiple of 2**-NORM_BITS when irrational."""
    square = sum((Fraction(x) ** 2 for x in v), Fraction(0))
    root = sympy.sqrt(sympy.Rational(square.numerator, square.denominator))
    if root.is_Rational:
        return Fraction(int(root.p), int(root.q))
    scale = 2**NORM_BITS
    return Fraction(int(sympy.ceiling(root * scale)), scale)


@dataclass(frozen=True, eq=False)
class Cone:
    """Polyhedral cone ``{v : g·v >= 0 (inequalities), g·v = 0 (equalities)}`` with its generators.

    Coordinates put time first. ``rays`` are extreme rays, ``lines`` span the lineality space.
    """

    dim: int
    inequalities: tuple
    equalities: tuple
    rays: tuple
    lines: tuple
    arith: Arithmetic

    @classmethod
    def from_inequalities(cls, inequalities, equalities, dim: int, arith: Arithmetic) -> "Cone":
        ineqs = [arith.vector(g) for g in inequalities]
        eqs = [arith.vector(g) for g in equalities]
        gens = h_to_v([(0, *g) for g in ineqs], [(0, *g) for g in eqs], dim, arith.exact)
        return cls(dim, tuple(ineqs), tuple(eqs), tuple(_primitive(r, arith) for r in gens.rays), gens.lines, arith)

    @classmethod
    def from_generators(cls, rays, lines=(), arith: Arithmetic = EXACT) -> "Cone":
        rays = [arith.vector(r) for r in rays]
        lines = [arith.vector(l) for l in lines]
        dim = len(rays[0]) if rays else len(lines[0])
        hform = v_to_h([tuple([0] * dim)], rays, lines, dim, arith.exact)
        ineqs = [row[1:] for row in hform.inequalities]
        eqs = [row[1:] for row in hform.equalities]
        gens = h_to_v([(0, *g) for g in ineqs], [(0, *g) for g in eqs], dim, arith.exact)
        return cls(dim, tuple(ineqs), tuple(eqs), tuple(_primitive(r, arith) for r in gens.rays), gens.lines, arith)

    @property
    def dimension(self) -> int:
        return rank(list(self.rays) + list(self.lines), self.arith)

    @property
    def section_dimension(self) -> int:
        """Affine dimension h of the section at t = 1 (-1 when the cone never reaches t > 0)."""
        if not any(self.arith.lt(0, r[0]) for r in self.rays) and not any(not self.arith.is_zero(l[0]) for l in self.lines):
            return -1
        return self.dimension - 1

    def span_basis(self) -> list[tuple]:
        return span_basis(list(self.rays) + list(self.lines), self.arith)

    def contains(self, v: Sequence) -> bool:
        arith = self.arith
        v = arith.vector(v)
        scale = 1.0 if arith.exact else max(1.0, _norm(v))
        for g in self.inequalities:
            value = dot(g, v)
            if arith.exact:
                if value < 0:
                    return False
            elif value < -arith.tol * scale * max(1.0, _norm(g)):
                return False
        for g in self.equalities:
            value = dot(g, v)
            if arith.exact:
                if value != 0:
                    return False
            elif abs(value) > arith.tol * scale * max(1.0, _norm(g)):
                return False
        return True

    def contains_many(self, vectors: np.ndarray) -> np.ndarray:
        """Membership for each row of ``vectors``."""
        arith = self.arith
        vectors = np.asarray(vectors, dtype=object if arith.exact else float)
        count = vectors.shape[0]
        ok = np.ones(count, dtype=bool)
        if count == 0:
            return ok
        if arith.exact:
            for g in self.inequalities:
                values = vectors @ np.array(g, dtype=object)
                ok &= np.array([v >= 0 for v in values], dtype=bool)
            for g in self.equalities:
                values = vectors @ np.array(g, dtype=object)
                ok &= np.array([v == 0 for v in values], dtype=bool)
            return ok
        scale = np.maximum(1.0, np.linalg.norm(vectors, axis=1))
        for g in self.inequalities:
            gv = np.array(g, dtype=float)
            ok &= vectors @ gv >= -arith.tol * scale * max(1.0, float(np.linalg.norm(gv)))
        for g in self.equalities:
            gv = np.array(g, dtype=float)
            ok &= np.abs(vectors @ gv) <= arith.tol * scale * max(1.0, float(np.linalg.norm(gv)))
        return ok

    def implicit_equalities(self) -> list[tuple]:
        gens = list(self.rays) + list(self.lines)
        return [g for g in self.inequalities if all(self.arith.is_zero(dot(g, r)) for r in gens)]

    def relative_margin(self, v: Sequence) -> float:
        """Smallest normalised slack over the facet inequalities (``inf`` for a linear subspace)."""
        gens = list(self.rays) + list(self.lines)
        margin = math.inf
        for g in self.inequalities:
            if all(self.arith.is_zero(dot(g, r)) for r in gens):
                continue
            margin = min(margin, float(dot(g, v)) / max(_norm(g), 1e-300))
        return margin

    def in_relative_interior(self, v: Sequence, radius: float = 0.0) -> bool:
        if not self.contains(v):
            return False
        margin = self.relative_margin(self.arith.vector(v))
        if self.arith.exact and radius == 0:
            return margin > 0
        return margin > radius

    def face_containing(self, v: Sequence) -> "Cone":
        """Minimal face of the cone containing ``v`` (``v`` must lie in the cone)."""
        arith = self.arith
        v = arith.vector(v)
        tight = [g for g in self.inequalities if arith.is_zero(dot(g, v))]
        loose = [g for g in self.inequalities if not arith.is_zero(dot(g, v))]
        rays = [r for r in self.rays if all(arith.is_zero(dot(g, r)) for g in tight)]
        return Cone(self.dim, tuple(loose), self.equalities + tuple(tight), tuple(rays), self.lines, arith)

    def section_direction_basis(self) -> list[tuple]:
        """Basis of the span intersected with ``{t = 0}``."""
        basis = self.span_basis()
        if not basis:
            return []
        coeffs = nullspace([[b[0] for b in basis]], len(basis), self.arith)
        out = []
        for c in coeffs:
            vec = tuple(sum((ci * b[k] for ci, b in zip(c, basis)), 0) for k in range(self.dim))
            out.append(vec)
        return span_basis(out, self.arith) if out else []

    def neighbourhood(self, r) -> "Cone | None":
        """Cone whose t = 1 section is offset by ``r`` inside its affine span (dilated for r > 0, shrunk for r < 0).

        Returns ``None`` when shrinking empties the section. In rational mode an irrational
        facet norm is rounded up by ``rational_norm``, so each facet moves by at least ``|r|``.
        """
        arith = self.arith
        r = arith.number(r)
        implicit = {tuple(g) for g in self.implicit_equalities()}
        directions = self.section_direction_basis()
        proj = projector([d[1:] for d in directions], self.dim - 1, arith) if directions else None
        ineqs = []
        for g in self.inequalities:
            if tuple(g) in implicit or proj is None:
                ineqs.append(g)
                continue
            gx = tuple(dot(row, g[1:]) for row in proj)
            offset = rational_norm(gx) if arith.exact else _norm(gx)
            ineqs.append((g[0] + r * offset, *g[1:]))
        cone = Cone.from_inequalities(ineqs, self.equalities, self.dim, arith)
        if cone.section_dimension < 0:
            return None
        return cone

    def section(self, bound) -> Polytope:
        """The t = 1 section, truncated to the box ``|x_i| <= bound``."""
        arith = self.arith
        bound = arith.number(bound)
        n = self.dim - 1
        one, zero = arith.number(1), arith.number(0)
        ineqs = [(g[0], *g[1:]) for g in self.inequalities]
        eqs = [(g[0], *g[1:]) for g in self.equalities]
        for i in range(n):
            for sign in (one, -one):
                ineqs.append((bound, *(-sign if j == i else zero for j in range(n))))
        return Polytope.from_h(ineqs, eqs, n, arith)

    def sample(self, rng: np.random.Generator, count: int) -> list[tuple]:
        """Random points: non-negative ray combinations plus line multiples."""
        arith = self.arith
        out = []
        for _ in range(count):
            point = [arith.number(0)] * self.dim
            for r in self.rays:
                factor = arith.number(Fraction(int(rng.integers(0, 9)), 4))
                point = [x + factor * y for x, y in zip(point, r)]
            for line in self.lines:
                factor = arith.number(Fraction(int(rng.integers(-8, 9)), 4))
                point = [x + factor * y for x, y in zip(point, line)]
            out.append(tuple(point))
        return out

    def same_set(self, other: "Cone") -> bool:
        """Set equality, checked by mutual generator containment."""
        return all(other.contains(r) for r in self.rays) and all(
            other.contains(l) and other.contains(tuple(-x for x in l)) for l in self.lines
        ) and all(self.contains(r) for r in other.rays) and all(
            self.contains(l) and self.contains(tuple(-x for x in l)) for l in other.lines
        )


def _primitive(v: Sequence, arith: Arithmetic) -> tuple:
    """Scale a ray so its time coordinate is 1 when positive (exact) or to unit length (float)."""
    v = tuple(v)
    if arith.exact:
        if v[0] > 0:
            return tuple(x / v[0] for x in v)
        return v
    if v[0] > arith.tol:
        return tuple(x / v[0] for x in v)
    norm = _norm(v)
    return tuple(x / norm for x in v) if norm else v


def finite_step(cone: Cone, v: Sequence) -> bool:
    """``v`` is zero, or points strictly forward in time and lies in ``cone`` (finite lifted cost)."""
    arith = cone.arith
    v = arith.vector(v)
    if all(arith.is_zero(x) for x in v):
        return True
    return arith.lt(0, v[0]) and cone.contains(v)


def finite_steps(cone: Cone, vectors: np.ndarray) -> np.ndarray:
    arith = cone.arith
    vectors = np.asarray(vectors, dtype=object if arith.exact else float)
    if vectors.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    if arith.exact:
        zero = np.array([all(x == 0 for x in row) for row in vectors], dtype=bool)
        forward = np.array([row[0] > 0 for row in vectors], dtype=bool)
    else:
        zero = np.all(np.abs(vectors) <= arith.tol, axis=1)
        forward = vectors[:, 0] > arith.tol
    return zero | (forward & cone.contains_many(vectors))


@lru_cache(maxsize=1024)
def _lifted_face_cached(lifted: LiftedCost, active: frozenset, arith: Arithmetic) -> Cone:
    i0 = min(active)
    l0 = arith.vector(lifted.pieces[i0])
    ineqs, eqs = [], []
    for k, row in enumerate(lifted.pieces):
        row = arith.vector(row)
        diff = tuple(x - y for x, y in zip(l0, row))
        if k in active:
            if k != i0:
                eqs.append(diff)
        else:
            ineqs.append(diff)
    one, zero = arith.number(1), arith.number(0)
    ineqs.append(tuple(one if j == 0 else zero for j in range(lifted.dimension)))
    return Cone.from_inequalities(ineqs, eqs, lifted.dimension, arith)


def lifted_face(lifted: LiftedCost, u: Sequence, arith: Arithmetic = EXACT, active: frozenset | None = None) -> Cone:
    """Minimal extremal face of epi cbar containing the direction ``u`` (``t > 0``), as a cone."""
    u = arith.vector(u)
    if lifted.strictly_convex:
        return Cone.from_generators([u], arith=arith)
    if active is None:
        active = lifted_active_set(lifted, u, arith)
    return _lifted_face_cached(lifted, frozenset(active), arith)


def lifted_face_from_active(lifted: LiftedCost, active: frozenset, arith: Arithmetic = EXACT) -> Cone:
    return _lifted_face_cached(lifted, frozenset(active), arith)


def lifted_support_plane(lifted: LiftedCost, cone: Cone, active: frozenset, arith: Arithmetic = EXACT) -> tuple:
    """``(b, a)`` with ``c(p) = b·p + a`` on the projected face ``-cone ∩ {t = 1}``."""
    if lifted.strictly_convex:
        direction = next(r for r in cone.rays if arith.lt(0, r[0]))
        p0 = tuple(-x / direction[0] for x in direction[1:])
        return p0, -dot(p0, p0) / 2
    a, b = lifted.base.pieces[min(active)]
    return arith.vector(a), arith.number(b)


def cone_diamond(w: Sequence, w2: Sequence, cone: Cone) -> Polytope:
    """``(w + C) ∩ (w2 - C)``; empty when ``w2 - w`` is outside ``C``."""
    arith = cone.arith
    w, w2 = arith.vector(w), arith.vector(w2)
    if not cone.contains(sub(w2, w)):
        return Polytope(cone.dim, (), (), (), (), (), arith)
    ineqs, eqs = [], []
    for g in cone.inequalities:
        ineqs.append((-dot(g, w), *g))
        ineqs.append((dot(g, w2), *(-x for x in g)))
    for g in cone.equalities:
        eqs.append((-dot(g, w), *g))
    return Polytope.from_h(ineqs, eqs, cone.dim, arith)


def direction_hull(dirs: Sequence[Sequence], arith: Arithmetic = EXACT) -> Cone:
    """``R+ · conv(dirs)`` for directions normalised to time coordinate 1."""
    if not dirs:
        raise InputError("direction_hull needs at least one direction")
    vectors = [arith.vector(d) for d in dirs]
    for d in vectors:
        if not arith.eq(d[0], 1):
            raise InputError(f"direction {tuple(str(x) for x in d)} is not normalised to t = 1")
    return Cone.from_generators(vectors, arith=arith)
