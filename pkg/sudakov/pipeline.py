"""Command stages: solve, decompose, refine, extract-map, verify, render.

Each command restores what earlier commands wrote under the output directory,
recomputes the deterministic intermediate objects and writes its own report.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .cone_geometry import LiftedCost, lift_cost
from .config import Settings
from .errors import DegenerateChartError, InputError, ParameterOrderError, UnsupportedDimensionError
from .generators import Marginal, map_point
from .lifting_potential import PartitionResult, PotentialField, first_partition
from .map_extract import FaceOptimalityReport, MongeMap, extract_map, verify_face_optimality
from .measure_verify import (
    FAIL,
    DisintegrationReport,
    area_estimate_check,
    disintegration_report,
    invariant_suite,
)
from .numeric import arithmetic_for
from .ot_solver import Plan, TransportInstance, build_instance, plan_from_entries, solve_primal
from .problem_io import (
    ProblemSpec,
    cone_payload,
    cost_from_spec,
    load_marginals,
    read_json,
    read_plan_entries,
    write_json,
    write_marginal_csv,
    write_plan,
    write_rows,
)
from .refinement import (
    build_carriage_graph,
    grid_for_graph,
    grid_usc_envelope,
    refine_partition,
    theta_envelope,
    theta_prime,
    to_fibration_coords,
)
from .render import render_svg

logger = logging.getLogger(__name__)

COMMANDS = ("solve", "decompose", "refine", "extract-map", "verify", "render")
THETA_SOURCE_LIMIT = 400
GRID_RESOLUTION = 24


@dataclass
class PipelineArtifacts:
    spec: ProblemSpec
    settings: Settings
    instance: TransportInstance
    mu: Marginal
    nu: Marginal
    plan: Plan | None = None
    lifted: LiftedCost | None = None
    potential: PotentialField | None = None
    partition: PartitionResult | None = None
    refinements: dict = field(default_factory=dict)  # parent label -> subclasses
    graphs: dict = field(default_factory=dict)  # parent label -> first-round carriage graph
    thetas: dict = field(default_factory=dict)
    envelopes: dict = field(default_factory=dict)
    map_classes: tuple = ()
    monge_map: MongeMap | None = None
    face_report: FaceOptimalityReport | None = None
    disintegration: DisintegrationReport | None = None
    checks: list = field(default_factory=list)
    area_estimates: dict = field(default_factory=dict)

    def final_classes(self) -> list:
        """Subclasses where a class was refined, first-partition classes otherwise."""
        out = []
        for cls in self.partition.classes:
            out.extend(self.refinements.get(cls.label) or [cls])
        return out

    def leftover_sources(self, classes) -> list[int]:
        covered = {i for cls in classes for i in cls.members}
        return sorted({i for i, _, _ in self.plan.entries} - covered)


def load_problem(spec: ProblemSpec, settings: Settings) -> PipelineArtifacts:
    arith = arithmetic_for(settings.mode, settings.float_tol)
    mu, nu = load_marginals(spec, arith.exact)
    cost = cost_from_spec(spec, mu.dimension)
    instance = build_instance(mu.atoms, nu.atoms, cost, arith)
    logger.info("loaded %s: %d sources, %d targets, cost %s, mode %s", spec.name, *instance.shape, cost.name, arith.mode)
    return PipelineArtifacts(spec, settings, instance, mu, nu)


def _target_index(instance: TransportInstance) -> dict:
    if instance.arith.exact:
        return {tuple(p): j for j, p in enumerate(instance.nu_points)}
    return {tuple(round(float(x), 9) for x in p): j for j, p in enumerate(instance.nu_points)}


def _map_entries(instance: TransportInstance, name: str, share) -> list[tuple]:
    index = _target_index(instance)
    entries = []
    for i, (x, w) in enumerate(zip(instance.mu_points, instance.mu_weights)):
        y = map_point(name, tuple(x))
        key = tuple(y) if instance.arith.exact else tuple(round(float(v), 9) for v in y)
        if key not in index:
            raise InputError(f"{name} sends source {i} outside the target atoms; nu must be its pushforward")
        entries.append((i, index[key], w * share))
    return entries


def fixed_plan(instance: TransportInstance, option: str) -> Plan:
    """The plan the decomposition is taken relative to: solver output, a map, or the average of both maps."""
    if option == "solve":
        return solve_primal(instance)
    one = instance.arith.number(1)
    if option in ("T+", "T-"):
        return plan_from_entries(instance, _map_entries(instance, option, one), source=option)
    if option == "average":
        half = instance.arith.number(Fraction(1, 2))
        entries = _map_entries(instance, "T+", half) + _map_entries(instance, "T-", half)
        return plan_from_entries(instance, entries, source="average")
    raise InputError(f"unknown plan option {option!r}")


def stage_solve(art: PipelineArtifacts) -> Plan:
    art.plan = fixed_plan(art.instance, art.spec.plan)
    return art.plan


def stage_decompose(art: PipelineArtifacts) -> PartitionResult:
    started = time.perf_counter()
    art.lifted = lift_cost(art.instance.cost)
    art.potential = PotentialField.from_plan(art.instance, art.plan, art.lifted)
    art.partition = first_partition(art.instance, art.plan, art.potential, art.settings)
    part = art.partition
    logger.info(
        "partition: %d classes, %d fixed, %d residual in %.3fs",
        len(part.classes),
        len(part.fixed),
        len(part.residual),
        time.perf_counter() - started,
    )
    return part


def stage_refine(art: PipelineArtifacts) -> dict:
    started = time.perf_counter()
    for cls in art.partition.classes:
        try:
            chart = to_fibration_coords(cls.base_point, cls.cone, art.settings)
        except DegenerateChartError as exc:
            logger.warning("class %s is not refined: %s", cls.label, exc)
            continue
        graph = build_carriage_graph(cls.label, cls.members, art.instance, art.plan, chart)
        art.graphs[cls.label] = graph
        if len(graph.sources) <= THETA_SOURCE_LIMIT:
            art.thetas[cls.label] = theta_envelope(theta_prime(graph), graph)
        art.refinements[cls.label] = refine_partition(cls, art.instance, art.plan, art.settings)
    logger.info("refinement: %d subclasses in %.3fs", sum(len(v) for v in art.refinements.values()), time.perf_counter() - started)
    return art.refinements


def stage_envelopes(art: PipelineArtifacts) -> dict:
    """Excess of the grid envelope over theta for the classes with a one-dimensional chart."""
    for label, fld in art.thetas.items():
        graph = fld.graph
        if graph.chart.h != 1 or not graph.targets:
            continue
        grid = grid_for_graph(graph, (Fraction(1, 2), 1), GRID_RESOLUTION, margin=0.0)
        art.envelopes[label] = grid_usc_envelope(fld, grid)
    return art.envelopes


def stage_extract(art: PipelineArtifacts) -> MongeMap:
    classes = art.final_classes()
    leftover = art.leftover_sources(classes)
    art.map_classes = tuple(classes)
    art.monge_map = extract_map(classes, art.instance, art.plan, leftover=leftover)
    art.face_report = verify_face_optimality(art.instance, art.plan, classes, art.lifted, leftover=leftover)
    return art.monge_map


def _area_estimates(art: PipelineArtifacts) -> dict:
    settings = art.settings
    out = {}
    for cls in art.partition.classes:
        if cls.h < 1:
            continue
        try:
            chart = to_fibration_coords(cls.base_point, cls.cone, settings)
            half = Fraction(1, 2)
            region = ((-half,) * chart.h, (half,) * chart.h)
            estimate = area_estimate_check(chart.cone, region, 1, half, Fraction(1, 4), settings.resolution, settings.area_slack)
        except (DegenerateChartError, ParameterOrderError) as exc:
            out[cls.label] = {"status": "skipped", "detail": str(exc)}
            continue
        out[cls.label] = {
            "status": "pass" if estimate.passed else "fail",
            "h": estimate.h,
            "ratio": float(estimate.ratio),
            "bound": estimate.bound,
            "resolution": estimate.resolution,
        }
    return out


def stage_verify(art: PipelineArtifacts) -> list:
    classes = art.final_classes()
    if classes:
        part = art.partition
        outside = sorted(set(part.fixed) | set(part.residual))
        art.disintegration = disintegration_report(classes, art.instance, art.settings, outside=outside)
    art.checks = invariant_suite(art, art.settings)
    art.area_estimates = _area_estimates(art)
    return art.checks


def _class_payload(cls, bound) -> dict:
    return {
        "label": cls.label,
        "h": cls.h,
        "active": cls.active,
        "affine_basis": cls.affine_basis,
        "cone": cone_payload(cls.cone, bound),
        "members": cls.members,
        "mass": cls.mass,
        "kinds": cls.kinds,
    }


def write_partition(art: PipelineArtifacts, out_dir: Path) -> None:
    part = art.partition
    bound = art.settings.section_bound
    write_json(
        out_dir / "partition.json",
        {
            "classes": [_class_payload(cls, bound) for cls in part.classes],
            "fixed": part.fixed,
            "residual": {str(i): reasons for i, reasons in sorted(part.residual.items())},
            "mass": {
                "classes": part.class_mass,
                "fixed": part.fixed_mass,
                "residual": part.residual_mass,
                "total": part.total_mass,
            },
        },
    )


def write_refinement(art: PipelineArtifacts, out_dir: Path) -> None:
    bound = art.settings.section_bound
    rows = []
    for parent, subs in sorted(art.refinements.items()):
        for sub_ in subs:
            rows.append(
                {
                    "parent": parent,
                    "label": sub_.label,
                    "ell": sub_.ell,
                    "subcone": cone_payload(sub_.subcone, bound),
                    "active": sub_.active,
                    "members": sub_.members,
                    "indecomposable": sub_.indecomposable,
                    "rounds": sub_.rounds,
                    "witness_cycle": [list(node) for node in sub_.witness_cycle],
                }
            )
    theta = {
        label: {"levels": len(set(fld.theta_prime[node] for node in fld.graph.sources)), "sources": len(fld.graph.sources)}
        for label, fld in sorted(art.thetas.items())
    }
    envelopes = {label: {"excess_fraction": env.excess_fraction} for label, env in sorted(art.envelopes.items())}
    write_json(out_dir / "refinement.json", {"subclasses": rows, "theta": theta, "envelopes": envelopes})


def write_map(art: PipelineArtifacts, out_dir: Path) -> None:
    monge, report = art.monge_map, art.face_report
    label_of = {i: cls.label for cls in art.map_classes for i in cls.members}
    write_rows(
        out_dir / "map.csv",
        ["source", "target", "mass", "class"],
        [(i, j, mass, label_of.get(i, "-")) for i, j, mass in monge.entries],
    )
    write_json(
        out_dir / "map.json",
        {
            "assigned_sources": len(monge.assignments),
            "split_required": monge.split_required,
            "pushforward_residual": monge.pushforward_residual,
            "classes": [
                {"label": c.label, "deterministic": c.deterministic, "primary_cost": c.primary_cost, "secondary_cost": c.secondary_cost}
                for c in monge.classes
            ],
            "face_optimality": {
                "ok": report.ok,
                "formula_total": report.formula_total,
                "plan_value": report.plan_value,
                "leftover_cost": report.leftover_cost,
                "classes": [
                    {
                        "label": r.label,
                        "mass": r.mass,
                        "support_plane": r.support_plane,
                        "mean_displacement": r.mean_displacement,
                        "formula_cost": r.formula_cost,
                        "direct_cost": r.direct_cost,
                    }
                    for r in report.classes
                ],
            },
        },
    )


def write_verification(art: PipelineArtifacts, out_dir: Path) -> None:
    payload = {
        "checks": [{"name": c.name, "status": c.status, "detail": c.detail, "witness": c.witness} for c in art.checks],
        "area_estimates": art.area_estimates,
    }
    report = art.disintegration
    if report is not None:
        payload["disintegration"] = {
            "bins": report.bins,
            "quotient_weights": report.quotient_weights,
            "residual_mass": report.residual_mass,
            "unaccounted_mass": report.unaccounted_mass,
            "total_mass": report.total_mass,
            "flagged": report.flagged,
            "classes": [{"label": c.label, "h": c.h, "samples": c.samples, "top_share": c.top_share} for c in report.classes],
        }
        rows = [(c.label, k, count) for c in report.classes for k, count in enumerate(c.counts)]
        write_rows(out_dir / "histograms.csv", ["class", "bin", "weight"], rows)
    write_json(out_dir / "verification.json", payload)


def _check_partition_file(art: PipelineArtifacts, out_dir: Path) -> None:
    stored = read_json(out_dir / "partition.json", "decompose")
    found = {c.get("label"): list(c.get("members", [])) for c in stored.get("classes", [])}
    current = {cls.label: list(cls.members) for cls in art.partition.classes}
    if found != current:
        raise InputError("partition.json does not match the current plan; rerun `decompose`", path=str(out_dir / "partition.json"))


def restore(spec: ProblemSpec, settings: Settings, out_dir: Path, command: str) -> PipelineArtifacts:
    """Load the problem and rebuild everything ``command`` depends on from the artifacts in ``out_dir``."""
    art = load_problem(spec, settings)
    if command == "render" and art.instance.dimension != 2:
        raise UnsupportedDimensionError(f"render draws planar problems only, this one has d={art.instance.dimension}")
    if command == "solve":
        return art
    entries, header = read_plan_entries(out_dir, art.instance)
    art.plan = plan_from_entries(art.instance, entries, source=str(header.get("plan", "given")))
    stage_decompose(art)
    if command == "decompose":
        return art
    _check_partition_file(art, out_dir)
    if command == "refine" or spec.refine:
        stage_refine(art)
    if command in ("verify", "render") and spec.extract_map:
        stage_extract(art)
    return art


def run_command(command: str, spec: ProblemSpec, settings: Settings, out_dir: Path) -> int:
    """Run one command; returns 1 when verification reports a failed check, else 0."""
    if command not in COMMANDS:
        raise InputError(f"unknown command {command!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    art = restore(spec, settings, out_dir, command)
    if command == "solve":
        stage_solve(art)
        write_plan(out_dir, spec, art.instance, art.plan)
        write_marginal_csv(out_dir / "mu.csv", art.mu)
        write_marginal_csv(out_dir / "nu.csv", art.nu)
        write_json(out_dir / "generators.json", {"mu": art.mu.meta, "nu": art.nu.meta, "seed": spec.seed})
    elif command == "decompose":
        write_partition(art, out_dir)
    elif command == "refine":
        stage_envelopes(art)
        write_refinement(art, out_dir)
    elif command == "extract-map":
        stage_extract(art)
        write_map(art, out_dir)
    elif command == "verify":
        stage_verify(art)
        write_verification(art, out_dir)
        failed = [c.name for c in art.checks if c.status == FAIL]
        failed += [label for label, row in art.area_estimates.items() if row.get("status") == "fail"]
        if failed:
            logger.warning("verification failed: %s", ", ".join(failed))
            return 1
    elif command == "render":
        classes = art.final_classes()
        if art.monge_map is not None:
            arrows = sorted(art.monge_map.assignments.items())
        else:
            arrows = [(i, j) for i, j, _ in art.plan.entries]
        render_svg(out_dir / "decomposition.svg", art.instance, classes, arrows, title=spec.name)
    return 0
