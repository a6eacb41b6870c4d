"""Synthetic marginals: discs, segments, grids, unions and pushforwards of other marginals.

A marginal is a list of ``(point, weight)`` atoms; weights are normalised later
by ``build_instance``. In rational mode sampled coordinates are rounded to
denominators of at most ``RATIONAL_DENOMINATOR`` so the exact solver stays fast.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import DimensionMismatchError, InputError, UnsupportedDimensionError
from .numeric import parse_number

logger = logging.getLogger(__name__)

RATIONAL_DENOMINATOR = 10**6
GOLDEN_ANGLE = math.pi * (3 - math.sqrt(5))


@dataclass(frozen=True)
class Marginal:
    atoms: tuple  # ((point, weight), ...)
    meta: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return len(self.atoms[0][0]) if self.atoms else 0

    def total(self):
        return sum((w for _, w in self.atoms), 0)


def _num(value, exact: bool, name: str):
    try:
        return parse_number(str(value), exact)
    except ValueError as exc:
        raise InputError(f"generator parameter {name}: {exc}") from None


def _vec(values, exact: bool, name: str) -> tuple:
    if not isinstance(values, (list, tuple)) or not values:
        raise InputError(f"generator parameter {name} must be a non-empty list of numbers")
    return tuple(_num(v, exact, name) for v in values)


def _snap(x: float, exact: bool):
    return Fraction(x).limit_denominator(RATIONAL_DENOMINATOR) if exact else float(x)


def _sqrt(value, exact: bool):
    if not exact:
        return math.sqrt(value)
    value = Fraction(value)
    num, den = math.isqrt(value.numerator), math.isqrt(value.denominator)
    if num * num == value.numerator and den * den == value.denominator:
        return Fraction(num, den)
    return Fraction(math.sqrt(value)).limit_denominator(RATIONAL_DENOMINATOR)


def _disc(spec: dict, exact: bool, seed: int) -> list[tuple]:
    center = _vec(spec.get("center", [0, 0]), exact, "center")
    if len(center) != 2:
        raise UnsupportedDimensionError("disc generators are two-dimensional")
    radius = _num(spec.get("radius", 1), exact, "radius")
    method = str(spec.get("method", "random")).lower()
    one = Fraction(1) if exact else 1.0
    if method == "lattice":
        spacing = _num(spec.get("spacing", "1/4"), exact, "spacing")
        reach = int(math.floor(float(radius) / float(spacing)))
        points = []
        for i in range(-reach, reach + 1):
            for j in range(-reach, reach + 1):
                if (i * spacing) ** 2 + (j * spacing) ** 2 <= radius**2:
                    points.append((center[0] + i * spacing, center[1] + j * spacing))
        return [(p, one) for p in points]
    count = int(spec.get("count", 100))
    if count < 1:
        raise InputError("disc count must be positive")
    if method == "random":
        rng = np.random.default_rng(seed)
        r = float(radius) * np.sqrt(rng.random(count))
        angle = 2 * math.pi * rng.random(count)
    elif method == "sunflower":
        k = np.arange(count)
        r = float(radius) * np.sqrt((k + 0.5) / count)
        angle = k * GOLDEN_ANGLE
    else:
        raise InputError(f"unknown disc method {method!r} (random, sunflower, lattice)")
    xs = float(center[0]) + r * np.cos(angle)
    ys = float(center[1]) + r * np.sin(angle)
    return [((_snap(x, exact), _snap(y, exact)), one) for x, y in zip(xs, ys)]


def _tent(offset, peak):
    return peak - abs(abs(offset) - peak)


def _segment(spec: dict, exact: bool, seed: int) -> list[tuple]:
    start = _vec(spec.get("start"), exact, "start")
    end = _vec(spec.get("end"), exact, "end")
    if len(start) != len(end):
        raise DimensionMismatchError("segment endpoints have different dimensions")
    count = int(spec.get("count", 100))
    if count < 1:
        raise InputError("segment count must be positive")
    density = str(spec.get("density", "uniform")).lower()
    if density not in ("uniform", "tent"):
        raise InputError(f"unknown segment density {density!r} (uniform, tent)")
    length = _sqrt(sum((b - a) ** 2 for a, b in zip(start, end)), exact)
    peak = _num(spec["peak"], exact, "peak") if "peak" in spec else length / 4
    half = Fraction(1, 2) if exact else 0.5
    atoms = []
    for k in range(count):
        s = (Fraction(2 * k + 1, 2 * count)) if exact else (k + 0.5) / count
        point = tuple(a + s * (b - a) for a, b in zip(start, end))
        weight = _tent((s - half) * length, peak) if density == "tent" else (Fraction(1) if exact else 1.0)
        if weight > 0:
            atoms.append((point, weight))
    return atoms


def _grid(spec: dict, exact: bool, seed: int) -> list[tuple]:
    lower = _vec(spec.get("lower"), exact, "lower")
    upper = _vec(spec.get("upper"), exact, "upper")
    counts = spec.get("counts")
    if not isinstance(counts, list) or len(counts) != len(lower) or len(upper) != len(lower):
        raise InputError("grid needs lower, upper and counts of the same length")
    axes = []
    for lo, hi, n in zip(lower, upper, counts):
        n = int(n)
        step = (hi - lo) / n
        axes.append([lo + (k + (Fraction(1, 2) if exact else 0.5)) * step for k in range(n)])
    one = Fraction(1) if exact else 1.0
    points = [()]
    for axis in axes:
        points = [p + (x,) for p in points for x in axis]
    return [(p, one) for p in points]


def map_point(name: str, point: tuple) -> tuple:
    if name == "identity":
        return point
    if len(point) != 2:
        raise UnsupportedDimensionError(f"map {name} is defined on the plane only")
    x1, x2 = point
    if name == "T+":
        return (x1 - x1, x2 + x1)
    if name == "T-":
        return (x1 - x1, x2 - x1)
    raise InputError(f"unknown pushforward map {name!r} (T+, T-, identity)")


def merge_atoms(atoms, exact: bool) -> list[tuple]:
    """Add up the weights of coincident points (keys rounded to 12 digits in float mode)."""
    merged: dict = {}
    for point, weight in atoms:
        key = tuple(point) if exact else tuple(round(float(x), 12) for x in point)
        if key in merged:
            merged[key] = (merged[key][0], merged[key][1] + weight)
        else:
            merged[key] = (tuple(point), weight)
    return sorted(merged.values(), key=lambda atom: tuple(float(x) for x in atom[0]))


def _union(spec: dict, exact: bool, seed: int, named: dict) -> list[tuple]:
    parts = spec.get("parts")
    if not isinstance(parts, list) or not parts:
        raise InputError("union needs a non-empty parts list")
    masses = spec.get("masses")
    if masses is not None and len(masses) != len(parts):
        raise InputError("union masses must match its parts")
    atoms = []
    for k, part in enumerate(parts):
        piece = generate(part, exact=exact, seed=seed + k, named=named).atoms
        if masses is not None:
            target = _num(masses[k], exact, "masses")
            total = sum((w for _, w in piece), 0)
            piece = tuple((p, w * target / total) for p, w in piece)
        atoms.extend(piece)
    return atoms


def _pushforward(spec: dict, exact: bool, seed: int, named: dict) -> list[tuple]:
    source = spec.get("of", "mu")
    if isinstance(source, str):
        if source not in named:
            raise InputError(f"pushforward of unknown marginal {source!r}")
        base = named[source]
    else:
        base = generate(source, exact=exact, seed=seed, named=named)
    name = str(spec.get("map", "identity"))
    images = [(map_point(name, p), w) for p, w in base.atoms]
    return merge_atoms(images, exact)


_SIMPLE: dict[str, Callable] = {"disc": _disc, "segment": _segment, "grid": _grid}
_COMPOSITE: dict[str, Callable] = {"union": _union, "pushforward": _pushforward}
KINDS = tuple(sorted(_SIMPLE) + sorted(_COMPOSITE))


def generate(spec: dict, *, exact: bool, seed: int, named: dict | None = None) -> Marginal:
    """Build the marginal described by a generator spec; ``spec["seed"]`` overrides ``seed``."""
    if not isinstance(spec, dict):
        raise InputError("generator spec must be an object")
    kind = str(spec.get("kind", "")).lower()
    seed = int(spec.get("seed", seed))
    named = named or {}
    if kind in _SIMPLE:
        atoms = _SIMPLE[kind](spec, exact, seed)
    elif kind in _COMPOSITE:
        atoms = _COMPOSITE[kind](spec, exact, seed, named)
    else:
        raise InputError(f"unknown generator kind {kind!r} ({', '.join(KINDS)})")
    if not atoms:
        raise InputError(f"{kind} generator produced no atoms")
    logger.debug("generated %d atoms from %s (seed %d)", len(atoms), kind, seed)
    return Marginal(tuple(atoms), {"kind": kind, "seed": seed})
