"""Experiment runner: plain baseline, case A and case B scenario runs.

Each run writes analysis-ready artifacts into the output directory:

  run_config.json          fully resolved scenario (re-runnable)
  summary.txt              Max/Mean/Min power and delay-spread table
  receiver_power.csv       per-receiver total power grid (raw, no interpolation)
  receiver_delay_spread.csv  per-receiver RMS delay spread grid
  best_genome.json         winning tile configuration
  ga_history.csv           per-generation best GA score (case A/B)

Every artifact carries the seed and the full parameter set in its header.
Exit codes: 0 success, 2 scenario file/schema error, 3 semantically
invalid scenario (e.g. case B without a power threshold).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .ga import GAParams
from .optimize import (
    CaseResult,
    FitnessReport,
    fitness_case_a,
    optimize_case_a,
    optimize_case_b,
)
from .raytrace import EnvConfiguration, RadioParams
from .scene import Scene, build_corridor_floorplan

SCHEMA_VERSION = 1
FREQ_CHOICES = {"2.4GHz": 2.4e9, "60GHz": 60e9}

# reference deployment: tx in the far corridor, 2 x 6 receiver grid at
# 2.5 m pitch centered in the shadowed corridor, all at z = 1.5 m
DEFAULT_TX = (7.0, 12.0, 2.0)
DEFAULT_RX = [(x, y, 1.5)
              for x in (0.75, 3.25)
              for y in (1.25, 3.75, 6.25, 8.75, 11.25, 13.75)]


class ScenarioError(Exception):
    def __init__(self, message: str, code: int = 2):
        super().__init__(message)
        self.code = code


@dataclass
class Scenario:
    case: str = "plain"                       # plain | case_a | case_b
    frequency_hz: float = 60e9
    seed: int = 1
    rays: int = 200_000
    bounces: int = 3
    population: int = 40
    generations: int = 100
    crossover_rate: float = 0.9
    mutation_rate: float = 0.01
    elite_count: int = 2
    threshold_dbm: float | None = None
    scene: str = "corridor-floorplan"         # or a scene-file path
    tx_power_dbm: float = 100.0
    tx_position: list = field(default_factory=lambda: list(DEFAULT_TX))
    rx_positions: list = field(default_factory=lambda: [list(p) for p in DEFAULT_RX])
    seed_population: str = "plain-plus-random"  # or plain-only
    jobs: int = 1
    out_dir: str = "out"

    def validate(self):
        if self.case not in ("plain", "case_a", "case_b"):
            raise ScenarioError(f"unknown case {self.case!r}", code=2)
        if self.case == "case_b" and self.threshold_dbm is None:
            raise ScenarioError("case_b requires threshold_dbm", code=3)
        if self.seed_population not in ("plain-plus-random", "plain-only"):
            raise ScenarioError(f"unknown seed_population {self.seed_population!r}", code=2)
        if self.rays < 1 or self.bounces < 0 or self.population < 2:
            raise ScenarioError("rays >= 1, bounces >= 0, population >= 2 required", code=2)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["version"] = SCHEMA_VERSION
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        data = dict(data)
        version = data.pop("version", None)
        if version != SCHEMA_VERSION:
            raise ScenarioError(f"unsupported scenario schema version {version!r}", code=2)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ScenarioError(f"unknown scenario fields: {sorted(unknown)}", code=2)
        try:
            sc = cls(**data)
        except TypeError as exc:
            raise ScenarioError(f"bad scenario field: {exc}", code=2) from exc
        sc.validate()
        return sc

    @classmethod
    def from_file(cls, path) -> "Scenario":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario file: {exc}", code=2) from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(
                f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}",
                code=2) from exc
        if not isinstance(data, dict):
            raise ScenarioError(f"{path}: scenario must be a JSON object", code=2)
        return cls.from_dict(data)


def _build_scene(scenario: Scenario) -> Scene:
    if scenario.scene == "corridor-floorplan":
        return build_corridor_floorplan()
    try:
        return Scene.load(scenario.scene)
    except (OSError, ValueError, KeyError) as exc:
        raise ScenarioError(f"cannot load scene {scenario.scene!r}: {exc}", code=2) from exc


def _radio_params(scenario: Scenario) -> RadioParams:
    return RadioParams(
        frequency=scenario.frequency_hz,
        tx_position=np.array(scenario.tx_position, dtype=float),
        rx_positions=np.array(scenario.rx_positions, dtype=float),
        tx_power_dbm=scenario.tx_power_dbm,
        max_bounces=scenario.bounces,
        ray_count=scenario.rays,
    )


def _header_lines(scenario: Scenario) -> tuple[str, ...]:
    # out_dir and jobs never influence results; dropping them keeps artifact
    # headers identical across re-runs of the same scenario
    cfg = {k: v for k, v in scenario.to_dict().items() if k not in ("out_dir", "jobs")}
    return (f"seed={scenario.seed}", f"config={json.dumps(cfg, sort_keys=True)}")


def _stats(values) -> tuple[float, float, float]:
    return max(values), float(np.mean(values)), min(values)


def _summary_text(scenario, report: FitnessReport, plain: FitnessReport,
                  floor: float) -> str:
    def power_cols(rep):
        return _stats(rep.per_rx_power_dbm)

    def spread_cols(rep):
        connected = [s for s, p in zip(rep.per_rx_delay_spread_s, rep.per_rx_power_dbm)
                     if p > floor]
        return _stats([s * 1e9 for s in connected]) if connected else (math.nan,) * 3

    pa_c, pa_p = power_cols(report), power_cols(plain)
    pb_c, pb_p = spread_cols(report), spread_cols(plain)
    lines = [f"# {h}" for h in _header_lines(scenario)]
    lines += [
        "# total received power (case A) and RMS delay spread (case B);",
        "# delay-spread statistics cover connected receivers only",
        "",
        f"{'':6s}  {'Case A (dBmW)':>25s}  {'Case B (nsec)':>25s}",
        f"{'':6s}  {'Configured':>12s} {'Plain':>12s}  {'Configured':>12s} {'Plain':>12s}",
    ]
    for name, i in (("Max", 0), ("Mean", 1), ("Min", 2)):
        lines.append(f"{name:6s}  {pa_c[i]:12.2f} {pa_p[i]:12.2f}  "
                     f"{pb_c[i]:12.4f} {pb_p[i]:12.4f}")
    floor_rx = sum(1 for p in report.per_rx_power_dbm if p <= floor)
    lines.append("")
    lines.append(f"receivers at power floor ({floor:.0f} dBmW): {floor_rx}")
    if scenario.case == "case_b":
        met = "MET" if report.constraint_satisfied else "NOT MET"
        lines.append(f"minimum total received power constraint "
                     f"(>= {scenario.threshold_dbm:g} dBmW at every receiver): {met}")
    return "\n".join(lines) + "\n"


def _grid_csv(scenario, rx_positions, configured, plain, fmt: str) -> str:
    lines = [f"# {h}" for h in _header_lines(scenario)]
    lines.append("rx_index,x_m,y_m,z_m,configured,plain")
    for i, pos in enumerate(rx_positions):
        lines.append(f"{i},{pos[0]:.3f},{pos[1]:.3f},{pos[2]:.3f},"
                     f"{configured[i]:{fmt}},{plain[i]:{fmt}}")
    return "\n".join(lines) + "\n"


def run(scenario: Scenario) -> int:
    """Execute one scenario and write its artifacts; returns the exit code."""
    scenario.validate()
    scene = _build_scene(scenario)
    params = _radio_params(scenario)
    out = Path(scenario.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "run_config.json").write_text(json.dumps(scenario.to_dict(), indent=2) + "\n")

    ga = GAParams(population_size=scenario.population, generations=scenario.generations,
                  crossover_rate=scenario.crossover_rate,
                  mutation_rate=scenario.mutation_rate,
                  elite_count=scenario.elite_count, seed=scenario.seed)
    initial = None
    if scenario.seed_population == "plain-only":
        plain_genome = EnvConfiguration.plain(scene.tile_count).states
        initial = [plain_genome] * scenario.population

    if scenario.case == "plain":
        genome = EnvConfiguration.plain(scene.tile_count).states
        report = fitness_case_a(scene, genome, params)
        result = CaseResult(best_genome=genome, history=[report.objective],
                            report=report, plain_report=report)
    elif scenario.case == "case_a":
        result = optimize_case_a(scene, params, ga, n_jobs=scenario.jobs,
                                 initial_genomes=initial)
    else:
        result = optimize_case_b(scene, params, ga, scenario.threshold_dbm,
                                 n_jobs=scenario.jobs, initial_genomes=initial)

    floor = params.power_floor_dbm
    (out / "summary.txt").write_text(
        _summary_text(scenario, result.report, result.plain_report, floor))
    (out / "receiver_power.csv").write_text(
        _grid_csv(scenario, params.rx_positions, result.report.per_rx_power_dbm,
                  result.plain_report.per_rx_power_dbm, ".6f"))
    (out / "receiver_delay_spread.csv").write_text(
        _grid_csv(scenario, params.rx_positions,
                  [s * 1e9 for s in result.report.per_rx_delay_spread_s],
                  [s * 1e9 for s in result.plain_report.per_rx_delay_spread_s], ".6f"))
    (out / "best_genome.json").write_text(json.dumps({
        "seed": scenario.seed,
        "objective": result.report.objective,
        "constraint_satisfied": result.report.constraint_satisfied,
        "genome": [int(g) for g in result.best_genome],
    }, indent=2) + "\n")
    history_lines = [f"# {h}" for h in _header_lines(scenario)]
    history_lines.append("generation,best_score")
    history_lines += [f"{i},{v:.9g}" for i, v in enumerate(result.history)]
    (out / "ga_history.csv").write_text("\n".join(history_lines) + "\n")
    return 0


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--rays", type=int, default=200_000)
    p.add_argument("--bounces", type=int, default=3)
    p.add_argument("--pop", type=int, default=40)
    p.add_argument("--gens", type=int, default=100)
    p.add_argument("--freq", choices=sorted(FREQ_CHOICES), default="60GHz")
    p.add_argument("--threshold-dbm", type=float, default=None)
    p.add_argument("--scene", default="corridor-floorplan",
                   help="'corridor-floorplan' or a scene JSON file")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="tilewave",
                                     description="programmable wireless environment experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("plain", "case-a", "case-b"):
        _add_common(sub.add_parser(name))
    pf = sub.add_parser("from-file", help="run a saved scenario JSON")
    pf.add_argument("scenario_file")
    pf.add_argument("--out", default=None, help="override the scenario's out_dir")

    args = parser.parse_args(argv)
    try:
        if args.command == "from-file":
            scenario = Scenario.from_file(args.scenario_file)
            if args.out is not None:
                scenario.out_dir = args.out
        else:
            scenario = Scenario(
                case=args.command.replace("-", "_"),
                frequency_hz=FREQ_CHOICES[args.freq],
                seed=args.seed, rays=args.rays, bounces=args.bounces,
                population=args.pop, generations=args.gens,
                threshold_dbm=args.threshold_dbm, scene=args.scene,
                jobs=args.jobs, out_dir=args.out)
        return run(scenario)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
