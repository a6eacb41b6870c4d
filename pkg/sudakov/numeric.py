"""Number handling shared by the exact (rational) and float backends.

Vectors are plain tuples. In rational mode entries are ``Fraction`` and every
comparison is exact; in float mode entries are ``float`` and comparisons use
the arithmetic's tolerance. Linear algebra goes through sympy (exact) or
numpy (float).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
import sympy

RATIONAL = "rational"
FLOAT = "float"
MODES = (RATIONAL, FLOAT)

Number = Fraction | float
Vector = tuple


@dataclass(frozen=True)
class Arithmetic:
    mode: str = FLOAT
    tol: float = 1e-9

    @property
    def exact(self) -> bool:
        return self.mode == RATIONAL

    def number(self, value) -> Number:
        if self.exact:
            if isinstance(value, Fraction):
                return value
            if isinstance(value, str):
                return parse_number(value, exact=True)
            if isinstance(value, (float, np.floating)) and not math.isfinite(value):
                raise ValueError(f"non-finite value {value!r} in rational mode")
            return Fraction(value)
        if isinstance(value, str):
            return parse_number(value, exact=False)
        return float(value)

    def vector(self, values: Iterable) -> Vector:
        return tuple(self.number(v) for v in values)

    def array(self, rows) -> np.ndarray:
        if self.exact:
            out = np.empty(np.shape(rows), dtype=object)
            flat = out.reshape(-1)
            for k, value in enumerate(np.asarray(rows, dtype=object).reshape(-1)):
                flat[k] = self.number(value)
            return out
        return np.asarray(rows, dtype=float)

    def is_zero(self, value) -> bool:
        return value == 0 if self.exact else abs(value) <= self.tol

    def leq(self, a, b) -> bool:
        return a <= b if self.exact else a <= b + self.tol

    def lt(self, a, b) -> bool:
        return a < b if self.exact else a < b - self.tol

    def eq(self, a, b) -> bool:
        return a == b if self.exact else abs(a - b) <= self.tol * max(1.0, abs(a), abs(b))

    def vec_eq(self, u: Sequence, v: Sequence) -> bool:
        return len(u) == len(v) and all(self.eq(a, b) for a, b in zip(u, v))


EXACT = Arithmetic(RATIONAL, 0.0)
FLOATING = Arithmetic(FLOAT, 1e-9)


def arithmetic_for(mode: str, tol: float = 1e-9) -> Arithmetic:
    if mode not in MODES:
        raise ValueError(f"unknown arithmetic mode {mode!r}")
    return Arithmetic(mode, 0.0 if mode == RATIONAL else float(tol))


def parse_number(text: str, exact: bool = True) -> Number:
    """Parse ``p/q`` or a decimal literal. Raises ValueError with a readable reason."""
    raw = (text or "").strip()
    if not raw:
        raise ValueError("empty number")
    if "/" in raw:
        num, _, den = raw.partition("/")
        try:
            p, q = int(num), int(den)
        except ValueError:
            raise ValueError(f"malformed rational {raw!r}") from None
        if q == 0:
            raise ValueError(f"zero denominator in {raw!r}")
        value = Fraction(p, q)
        return value if exact else float(value)
    try:
        value = Fraction(raw)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"malformed number {raw!r}") from None
    return value if exact else float(raw)


def format_number(value) -> str:
    if isinstance(value, Fraction):
        return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(float(value))


def dot(u: Sequence, v: Sequence):
    return sum((a * b for a, b in zip(u, v)), 0)


def add(u: Sequence, v: Sequence) -> Vector:
    return tuple(a + b for a, b in zip(u, v))


def sub(u: Sequence, v: Sequence) -> Vector:
    return tuple(a - b for a, b in zip(u, v))


def scale(u: Sequence, factor) -> Vector:
    return tuple(a * factor for a in u)


def _sym(value):
    if isinstance(value, Fraction):
        return sympy.Rational(value.numerator, value.denominator)
    return sympy.Rational(Fraction(value))


def _from_sym(value) -> Fraction:
    value = sympy.nsimplify(value) if not isinstance(value, sympy.Rational) else value
    return Fraction(int(value.p), int(value.q))


def _sym_matrix(rows: Sequence[Sequence], ncols: int):
    if not rows:
        return sympy.zeros(0, ncols)
    return sympy.Matrix([[_sym(x) for x in row] for row in rows])


def rank(vectors: Sequence[Sequence], arith: Arithmetic) -> int:
    if not vectors:
        return 0
    if arith.exact:
        return int(_sym_matrix(vectors, len(vectors[0])).rank())
    matrix = np.asarray(vectors, dtype=float)
    if not np.any(matrix):
        return 0
    return int(np.linalg.matrix_rank(matrix, tol=max(arith.tol, 1e-12) * max(1.0, float(np.abs(matrix).max()))))


def nullspace(rows: Sequence[Sequence], ncols: int, arith: Arithmetic) -> list[Vector]:
    """Basis of {v : r·v = 0 for every row r}."""
    if not rows:
        one, zero = (Fraction(1), Fraction(0)) if arith.exact else (1.0, 0.0)
        return [tuple(one if i == j else zero for j in range(ncols)) for i in range(ncols)]
    if arith.exact:
        basis = _sym_matrix(rows, ncols).nullspace()
        return [tuple(_from_sym(x) for x in vec) for vec in basis]
    matrix = np.asarray(rows, dtype=float)
    _, singular, vh = np.linalg.svd(matrix)
    cutoff = max(arith.tol, 1e-12) * max(1.0, float(singular[0]) if singular.size else 1.0)
    r = int(np.sum(singular > cutoff))
    return [tuple(float(x) for x in vh[k]) for k in range(r, ncols)]


def span_basis(vectors: Sequence[Sequence], arith: Arithmetic) -> list[Vector]:
    """Canonical basis of the linear span (RREF rows, or orthonormal rows in float mode)."""
    if not vectors:
        return []
    ncols = len(vectors[0])
    if arith.exact:
        reduced, pivots = _sym_matrix(vectors, ncols).rref()
        return [tuple(_from_sym(x) for x in reduced.row(k)) for k in range(len(pivots))]
    matrix = np.asarray(vectors, dtype=float)
    _, singular, vh = np.linalg.svd(matrix)
    cutoff = max(arith.tol, 1e-12) * max(1.0, float(singular[0]) if singular.size else 1.0)
    r = int(np.sum(singular > cutoff))
    return [tuple(float(x) for x in vh[k]) for k in range(r)]


def affine_dimension(points: Sequence[Sequence], arith: Arithmetic) -> int:
    if not points:
        return -1
    base = points[0]
    return rank([sub(p, base) for p in points[1:]], arith)


def projector(basis: Sequence[Sequence], ncols: int, arith: Arithmetic) -> tuple[Vector, ...]:
    """Orthogonal projector onto span(basis) as a tuple of rows."""
    if not basis:
        zero = Fraction(0) if arith.exact else 0.0
        return tuple(tuple(zero for _ in range(ncols)) for _ in range(ncols))
    if arith.exact:
        b = _sym_matrix(basis, ncols)
        proj = b.T * (b * b.T).inv() * b
        return tuple(tuple(_from_sym(proj[i, j]) for j in range(ncols)) for i in range(ncols))
    q = np.asarray(span_basis(basis, arith), dtype=float)
    proj = q.T @ q
    return tuple(tuple(float(x) for x in row) for row in proj)


def mat_vec(matrix: Sequence[Sequence], v: Sequence) -> Vector:
    return tuple(dot(row, v) for row in matrix)


def gram_schmidt(vectors: Sequence[Sequence], arith: Arithmetic) -> list[Vector]:
    """Mutually orthogonal (unnormalised) vectors with the same span, dropping dependent ones."""
    out: list[Vector] = []
    for v in vectors:
        w = tuple(v)
        for u in out:
            w = sub(w, scale(u, dot(w, u) / dot(u, u)))
        if not all(arith.is_zero(x) for x in w):
            out.append(w)
    return out


def quantize(value, step: float):
    """Hashable key for a number: itself when exact, a rounded integer otherwise."""
    if isinstance(value, Fraction):
        return value
    return int(round(float(value) / step))


def euclidean_norm(v: Sequence) -> float:
    return math.sqrt(float(sum(float(x) * float(x) for x in v)))
