"""Problem files, marginal CSVs and the JSON/CSV artifacts written under ``--out``.

Every writer sorts keys and never embeds timestamps, so identical inputs give
byte-identical files. Rationals are written as ``p/q`` strings, floats as JSON
numbers (``repr`` precision).
"""

from __future__ import annotations

import csv
import io
import json
import logging
import re
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .cone_geometry import PRESETS, PolyhedralCost, parse_cost_text, preset_cost
from .errors import InputError, MissingArtifactError, MissingFileError, ParseError
from .generators import Marginal, generate
from .numeric import MODES, format_number, parse_number

logger = logging.getLogger(__name__)

PLAN_OPTIONS = ("solve", "T+", "T-", "average")
_PRESET_RE = re.compile(r"^(?P<name>[a-z0-9]+)(?::(?P<dim>\d+))?$")


@dataclass(frozen=True)
class ProblemSpec:
    cost: str
    mu: object  # CSV path or generator spec
    nu: object
    name: str = "problem"
    mode: str = "float"
    seed: int = 0
    plan: str = "solve"
    refine: bool = True
    extract_map: bool = True
    verify: bool = True
    out: str = "out"
    base_dir: Path = field(default=Path("."), compare=False, repr=False)

    def resolve(self, relative: str) -> Path:
        path = Path(relative)
        return path if path.is_absolute() else self.base_dir / path


_KEYS = {f.name for f in fields(ProblemSpec)} - {"base_dir"}


def _is_preset(cost: str) -> bool:
    match = _PRESET_RE.match(cost.strip().lower())
    return bool(match) and match.group("name") in PRESETS


def _check_marginal_value(value, key: str, spec: ProblemSpec) -> None:
    if isinstance(value, str):
        if not spec.resolve(value).exists():
            raise MissingFileError(f"{key} file {value!r} not found", path=str(spec.resolve(value)))
    elif not isinstance(value, dict):
        raise ParseError(f"{key} must be a CSV path or a generator object")


def parse_problem_text(text: str, *, path: str | None = None, base_dir: Path | None = None) -> ProblemSpec:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, line=exc.lineno, column=exc.colno) from None
    if not isinstance(raw, dict):
        raise ParseError("problem file must hold a JSON object", path=path)
    unknown = sorted(set(raw) - _KEYS)
    if unknown:
        raise ParseError(f"unknown problem keys: {', '.join(unknown)}", path=path)
    missing = [key for key in ("cost", "mu", "nu") if key not in raw]
    if missing:
        raise ParseError(f"problem file is missing: {', '.join(missing)}", path=path)
    mode = str(raw.get("mode", "float")).lower()
    if mode not in MODES:
        raise ParseError(f"mode must be one of {', '.join(MODES)}, got {mode!r}", path=path)
    plan = str(raw.get("plan", "solve"))
    if plan not in PLAN_OPTIONS:
        raise ParseError(f"plan must be one of {', '.join(PLAN_OPTIONS)}, got {plan!r}", path=path)
    try:
        seed = int(raw.get("seed", 0))
    except (TypeError, ValueError):
        raise ParseError(f"seed must be an integer, got {raw.get('seed')!r}", path=path) from None
    values = {key: raw[key] for key in _KEYS if key in raw}
    values.update(mode=mode, plan=plan, seed=seed, cost=str(raw["cost"]))
    for flag in ("refine", "extract_map", "verify"):
        if flag in values and not isinstance(values[flag], bool):
            raise ParseError(f"{flag} must be true or false", path=path)
    spec = ProblemSpec(base_dir=base_dir or Path("."), **values)
    _check_marginal_value(spec.mu, "mu", spec)
    _check_marginal_value(spec.nu, "nu", spec)
    if not _is_preset(spec.cost) and not spec.resolve(spec.cost).exists():
        raise MissingFileError(f"cost {spec.cost!r} is neither a preset nor an existing file", path=str(spec.resolve(spec.cost)))
    return spec


def parse_problem(path) -> ProblemSpec:
    path = Path(path)
    if not path.exists():
        raise MissingFileError("problem file not found", path=str(path))
    return parse_problem_text(path.read_text(encoding="utf-8"), path=str(path), base_dir=path.parent)


def dump_problem(spec: ProblemSpec) -> str:
    data = {key: value for key, value in asdict(spec).items() if key in _KEYS}
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def cost_from_spec(spec: ProblemSpec, dimension: int) -> PolyhedralCost:
    """``linf``, ``l1:3``, ``quadratic`` (dimension from the marginals) or a cost file path."""
    text = spec.cost.strip()
    match = _PRESET_RE.match(text.lower())
    if match and match.group("name") in PRESETS:
        dim = int(match.group("dim")) if match.group("dim") else dimension
        return preset_cost(match.group("name"), dim)
    path = spec.resolve(text)
    if not path.exists():
        raise MissingFileError("cost file not found", path=str(path))
    return parse_cost_text(path.read_text(encoding="utf-8"), str(path))


def read_marginal_csv(path, exact: bool) -> Marginal:
    """Columns ``x1..xd,weight`` with a header row; numbers may be ``p/q``."""
    path = Path(path)
    if not path.exists():
        raise MissingFileError("marginal file not found", path=str(path))
    rows = list(csv.reader(path.read_text(encoding="utf-8").splitlines()))
    if not rows:
        raise ParseError("empty marginal file", path=str(path))
    header = [h.strip().lower() for h in rows[0]]
    if len(header) < 2 or header[-1] != "weight":
        raise ParseError("header must be x1,...,xd,weight", path=str(path), line=1)
    atoms = []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row or not any(cell.strip() for cell in row) or row[0].lstrip().startswith("#"):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", path=str(path), line=line_no)
        values = []
        for col, cell in enumerate(row, start=1):
            try:
                values.append(parse_number(cell, exact))
            except ValueError as exc:
                raise ParseError(str(exc), path=str(path), line=line_no, column=col) from None
        atoms.append((tuple(values[:-1]), values[-1]))
    if not atoms:
        raise ParseError("marginal file lists no atoms", path=str(path))
    return Marginal(tuple(atoms), {"kind": "csv", "path": str(path)})


def write_marginal_csv(path, marginal: Marginal) -> None:
    dim = marginal.dimension
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow([f"x{k + 1}" for k in range(dim)] + ["weight"])
    for point, weight in marginal.atoms:
        writer.writerow([format_number(x) for x in point] + [format_number(weight)])
    Path(path).write_text(buffer.getvalue(), encoding="utf-8")


def load_marginals(spec: ProblemSpec, exact: bool) -> tuple[Marginal, Marginal]:
    named: dict[str, Marginal] = {}
    out = []
    for offset, key in enumerate(("mu", "nu")):
        value = getattr(spec, key)
        if isinstance(value, str):
            marginal = read_marginal_csv(spec.resolve(value), exact)
        else:
            marginal = generate(value, exact=exact, seed=spec.seed + offset, named=named)
        named[key] = marginal
        out.append(marginal)
    return out[0], out[1]


def jsonable(value):
    """Rationals as ``p/q`` strings (integers stay ints), floats untouched, containers recursively."""
    if isinstance(value, Fraction):
        return int(value) if value.denominator == 1 else format_number(value)
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        return format_number(value) if value in (float("inf"), float("-inf")) else value
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, frozenset, set)):
        items = sorted(value) if isinstance(value, (frozenset, set)) else value
        return [jsonable(v) for v in items]
    if hasattr(value, "item"):
        return value.item()
    return str(value)


def from_json_number(value, exact: bool):
    return parse_number(str(value), exact)


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path, artifact: str) -> dict:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"{path.name} not found; run `{artifact}` first", path=str(path))
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=str(path), line=exc.lineno, column=exc.colno) from None


def write_rows(path, header: Sequence[str], rows) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(x) if not isinstance(x, str) else x for x in row])
    Path(path).write_text(buffer.getvalue(), encoding="utf-8")


def read_rows(path, artifact: str) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"{path.name} not found; run `{artifact}` first", path=str(path))
    return list(csv.DictReader(path.read_text(encoding="utf-8").splitlines()))


def write_plan(out_dir: Path, spec: ProblemSpec, instance, plan) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_rows(out_dir / "plan.csv", ["source", "target", "mass"], plan.entries)
    write_json(
        out_dir / "plan.json",
        {
            "problem": spec.name,
            "mode": instance.arith.mode,
            "seed": spec.seed,
            "plan": plan.source,
            "shape": list(instance.shape),
            "value": plan.value,
            "support": len(plan.entries),
            "phi": plan.phi,
            "psi": plan.psi,
        },
    )


def read_plan_entries(out_dir: Path, instance) -> tuple[list[tuple], dict]:
    header = read_json(out_dir / "plan.json", "solve")
    if tuple(header.get("shape", ())) != instance.shape or header.get("mode") != instance.arith.mode:
        raise InputError("plan.json was written for another instance; rerun `solve`", path=str(out_dir / "plan.json"))
    rows = read_rows(out_dir / "plan.csv", "solve")
    exact = instance.arith.exact
    try:
        entries = [(int(r["source"]), int(r["target"]), parse_number(r["mass"], exact)) for r in rows]
    except (KeyError, ValueError) as exc:
        raise ParseError(f"malformed plan row: {exc}", path=str(out_dir / "plan.csv")) from None
    return entries, header


def cone_payload(cone, bound) -> dict:
    section = cone.section(bound)
    return {
        "rays": cone.rays,
        "lines": cone.lines,
        "inequalities": cone.inequalities,
        "equalities": cone.equalities,
        "section_dimension": cone.section_dimension,
        "section_vertices": sorted(section.vertices),
    }
