"""Environment optimization: GA fitness for cases A/B and multi-user allocation.

Case A maximizes the minimum per-receiver total power; case B minimizes
the maximum per-receiver RMS delay spread subject to a per-receiver power
floor, with infeasible genomes ranked strictly below every feasible one
(ordered among themselves by constraint violation). The plain all-specular
genome is injected into the initial population so the optimizer can never
finish worse than the baseline.
"""

from __future__ import annotations

import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .channel import PowerDelayProfile, delay_spread, total_power_dbm
from .emfunc import N_TILE_FUNCTIONS
from .ga import GAParams, ga_run
from .raytrace import EnvConfiguration, RadioParams, launch_rays
from .scene import Scene, Vec3

INFEASIBLE_PENALTY = 1e6


class EmptyProblemError(ValueError):
    """Allocation problem has no users."""


@dataclass
class FitnessReport:
    objective: float
    per_rx_power_dbm: list[float]
    per_rx_delay_spread_s: list[float]
    constraint_satisfied: bool


def evaluate_configuration(scene: Scene, config: EnvConfiguration,
                           params: RadioParams, seed: int = 0
                           ) -> tuple[list[float], list[float]]:
    """Per-receiver (total power dBmW, RMS delay spread s) for one config.

    Receivers without any captured path report the power floor and a zero
    delay spread.
    """
    paths = launch_rays(scene, config, params, seed=seed)
    n_rx = len(params.rx_positions)
    powers, spreads = [], []
    for r in range(n_rx):
        rx_paths = paths.get(r, [])
        powers.append(total_power_dbm(rx_paths, params.power_floor_dbm))
        if rx_paths:
            spreads.append(delay_spread(PowerDelayProfile.from_paths(rx_paths)))
        else:
            spreads.append(0.0)
    return powers, spreads


def fitness_case_a(scene: Scene, genome: np.ndarray, params: RadioParams) -> FitnessReport:
    """Objective: minimum per-receiver total power (higher is better)."""
    powers, spreads = evaluate_configuration(scene, EnvConfiguration(genome), params)
    return FitnessReport(objective=min(powers), per_rx_power_dbm=powers,
                         per_rx_delay_spread_s=spreads, constraint_satisfied=True)


def fitness_case_b(scene: Scene, genome: np.ndarray, params: RadioParams,
                   power_threshold_dbm: float) -> FitnessReport:
    """Objective: maximum per-receiver delay spread (lower is better),
    feasible iff every receiver's total power meets the threshold."""
    powers, spreads = evaluate_configuration(scene, EnvConfiguration(genome), params)
    return FitnessReport(objective=max(spreads), per_rx_power_dbm=powers,
                         per_rx_delay_spread_s=spreads,
                         constraint_satisfied=all(p >= power_threshold_dbm for p in powers))


def case_b_score(powers: Sequence[float], spreads: Sequence[float],
                 power_threshold_dbm: float) -> float:
    """GA score for case B: feasible genomes score -max_spread; infeasible
    ones score below every feasible value, ranked by violation magnitude."""
    violation = sum(max(0.0, power_threshold_dbm - p) for p in powers)
    if violation > 0.0:
        return -(INFEASIBLE_PENALTY + violation)
    return -max(spreads)


# -- parallel genome evaluation ----------------------------------------

_WORKER: dict = {}


def _init_worker(scene, params, numba_threads):
    import numba

    numba.set_num_threads(max(1, numba_threads))
    _WORKER["scene"] = scene
    _WORKER["params"] = params


def _eval_worker(genome: np.ndarray) -> tuple[list[float], list[float]]:
    return evaluate_configuration(_WORKER["scene"], EnvConfiguration(genome),
                                  _WORKER["params"])


class ConfigurationEvaluator:
    """Caches per-genome (powers, spreads); optionally farms evaluations out
    to worker processes. Results are independent of the worker count."""

    def __init__(self, scene: Scene, params: RadioParams, n_jobs: int = 1):
        self.scene = scene
        self.params = params
        self.n_jobs = max(1, n_jobs)
        self._cache: dict[bytes, tuple[list[float], list[float]]] = {}
        self._pool = None
        if self.n_jobs > 1:
            threads = max(1, (os.cpu_count() or 1) // self.n_jobs)
            # spawn: the threaded tracing kernel is not fork-safe
            self._pool = ProcessPoolExecutor(
                self.n_jobs, mp_context=multiprocessing.get_context("spawn"),
                initializer=_init_worker, initargs=(scene, params, threads))

    def evaluate_many(self, genomes: Sequence[np.ndarray]
                      ) -> list[tuple[list[float], list[float]]]:
        fresh = []
        seen = set()
        for g in genomes:
            key = g.tobytes()
            if key not in self._cache and key not in seen:
                seen.add(key)
                fresh.append(g)
        if fresh:
            if self._pool is not None:
                results = list(self._pool.map(_eval_worker, fresh))
            else:
                results = [evaluate_configuration(self.scene, EnvConfiguration(g), self.params)
                           for g in fresh]
            for g, res in zip(fresh, results):
                self._cache[g.tobytes()] = res
        return [self._cache[g.tobytes()] for g in genomes]

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None


@dataclass
class CaseResult:
    best_genome: np.ndarray
    history: list[float]          # per-generation best GA score
    report: FitnessReport         # of the best genome
    plain_report: FitnessReport   # all-specular baseline


def _run_case(scene, params, ga_params, score_fn, report_fn, *, n_jobs,
              initial_genomes) -> CaseResult:
    n = scene.tile_count
    plain = EnvConfiguration.plain(n).states
    if initial_genomes is None:
        initial_genomes = [plain]
    ev = ConfigurationEvaluator(scene, params, n_jobs=n_jobs)
    try:
        def batch(genomes):
            return [score_fn(p, s) for p, s in ev.evaluate_many(genomes)]

        best, history = ga_run(lambda g: batch([g])[0], ga_params,
                               gene_arity=N_TILE_FUNCTIONS, genome_len=n,
                               initial=initial_genomes, evaluate_batch=batch)
        return CaseResult(best_genome=best, history=history,
                          report=report_fn(best), plain_report=report_fn(plain))
    finally:
        ev.close()


def optimize_case_a(scene: Scene, params: RadioParams, ga_params: GAParams,
                    *, n_jobs: int = 1,
                    initial_genomes: Sequence[np.ndarray] | None = None) -> CaseResult:
    return _run_case(
        scene, params, ga_params,
        score_fn=lambda powers, spreads: min(powers),
        report_fn=lambda g: fitness_case_a(scene, g, params),
        n_jobs=n_jobs, initial_genomes=initial_genomes)


def optimize_case_b(scene: Scene, params: RadioParams, ga_params: GAParams,
                    power_threshold_dbm: float, *, n_jobs: int = 1,
                    initial_genomes: Sequence[np.ndarray] | None = None) -> CaseResult:
    return _run_case(
        scene, params, ga_params,
        score_fn=lambda powers, spreads: case_b_score(powers, spreads, power_threshold_dbm),
        report_fn=lambda g: fitness_case_b(scene, g, params, power_threshold_dbm),
        n_jobs=n_jobs, initial_genomes=initial_genomes)


# -- multi-user transmit power / tile allocation ------------------------

@dataclass
class MultiUserProblem:
    """Split a transmit power budget and a tile budget across J users."""

    tx_position: Vec3
    rx_positions: list[Vec3]
    weights: list[float]          # d_j distance weights
    total_tx_power_mw: float
    total_tiles: int

    def __post_init__(self):
        if len(self.rx_positions) == 0:
            raise EmptyProblemError("allocation problem has no users")
        if len(self.weights) != len(self.rx_positions):
            raise ValueError("weights/receivers length mismatch")
        if self.total_tx_power_mw <= 0 or self.total_tiles < 0:
            raise ValueError("budgets must be positive")

    @property
    def n_users(self) -> int:
        return len(self.rx_positions)


@dataclass
class Allocation:
    tx_power_mw: list[float]
    tile_counts: list[int]
    objective: float              # sum of d_j * P_r_j


def allocate_multiuser(problem: MultiUserProblem,
                       per_user_gain: Callable[[float, int], float]
                       | Sequence[Callable[[float, int], float]],
                       *, power_levels: int = 32) -> Allocation:
    """Maximize sum d_j * P_r_j under the two budget constraints.

    The transmit power axis is discretized to `power_levels` values and
    tile counts are integers; the optimum over that grid is exact (dynamic
    program over users). `per_user_gain` maps (tx power mW, tile count) to
    received power mW, monotone non-decreasing in both; pass a sequence
    for per-user gains. Resource ties resolve toward smaller allocations.
    """
    j_users = problem.n_users
    if callable(per_user_gain):
        gains = [per_user_gain] * j_users
    else:
        gains = list(per_user_gain)
        if len(gains) != j_users:
            raise ValueError("one gain callback per user required")
    levels = np.linspace(0.0, problem.total_tx_power_mw, power_levels)
    n_tiles = problem.total_tiles
    dp = np.full((power_levels, n_tiles + 1), -np.inf)
    dp[0, 0] = 0.0
    choices = np.zeros((j_users, power_levels, n_tiles + 1, 2), dtype=np.int32)
    for j in range(j_users):
        w = problem.weights[j]
        ndp = np.full_like(dp, -np.inf)
        for pa in range(power_levels):
            for ma in range(n_tiles + 1):
                add = w * float(gains[j](float(levels[pa]), ma))
                cand = dp[:power_levels - pa, :n_tiles + 1 - ma] + add
                target = ndp[pa:, ma:]
                better = cand > target
                if better.any():
                    target[better] = cand[better]
                    choices[j, pa:, ma:][better] = (pa, ma)
        dp = ndp
    flat = int(np.argmax(dp))
    pu, mu = np.unravel_index(flat, dp.shape)
    objective = float(dp[pu, mu])
    alloc_p = [0.0] * j_users
    alloc_m = [0] * j_users
    for j in range(j_users - 1, -1, -1):
        pa, ma = choices[j, pu, mu]
        alloc_p[j] = float(levels[pa])
        alloc_m[j] = int(ma)
        pu -= pa
        mu -= ma
    assert sum(alloc_p) <= problem.total_tx_power_mw + 1e-9
    assert sum(alloc_m) <= problem.total_tiles
    return Allocation(tx_power_mw=alloc_p, tile_counts=alloc_m, objective=objective)


def coherent_path_gain(paths, f_c: float) -> Callable[[float, int], float]:
    """Gain callback built from traced paths: allocating m tiles enables the
    m strongest paths with their phases harmonized, so amplitudes add
    ((sum a_i)^2); received power scales linearly with transmit power.
    Phase alignment keeps the gain monotone in both arguments, as the
    allocator requires; `received_signal` gives the un-harmonized sum."""
    amps = sorted((p.attenuation for p in paths), reverse=True)

    def gain(p_t_mw: float, m: int) -> float:
        if m <= 0 or p_t_mw <= 0.0 or not amps:
            return 0.0
        return p_t_mw * sum(amps[:m]) ** 2

    return gain
