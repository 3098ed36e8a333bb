"""Seeded genetic algorithm over fixed-length integer genomes.

Maximizes the objective. Operators: tournament selection (size 2), uniform
crossover, per-gene uniform-resample mutation, elitism. A single seeded
random stream drives all operators, so runs are reproducible; fitness
evaluation may be farmed out via `evaluate_batch` without affecting the
stream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np


@dataclass
class GAParams:
    population_size: int = 40
    generations: int = 100
    crossover_rate: float = 0.9       # per pair
    mutation_rate: float = 0.01       # per gene
    elite_count: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if not 0 <= self.elite_count < self.population_size:
            raise ValueError("elite_count must be < population_size")
        for r in (self.crossover_rate, self.mutation_rate):
            if not 0.0 <= r <= 1.0:
                raise ValueError("rates must lie in [0, 1]")


def ga_run(
    fitness: Callable[[np.ndarray], float],
    ga: GAParams,
    gene_arity: int,
    genome_len: int,
    *,
    initial: Iterable[np.ndarray] = (),
    evaluate_batch: Callable[[Sequence[np.ndarray]], Sequence[float]] | None = None,
) -> tuple[np.ndarray, list[float]]:
    """Run the GA and return (best genome ever seen, per-generation best).

    `initial` genomes seed the first population (truncated to the population
    size, remainder filled uniformly at random). The history has one entry
    per evaluated generation, `generations + 1` in total; with
    elite_count >= 1 it is monotone non-worsening.
    """
    rng = np.random.default_rng(ga.seed)
    pop: list[np.ndarray] = []
    for g in initial:
        g = np.asarray(g, dtype=np.int64)
        if g.shape != (genome_len,):
            raise ValueError("seed genome has wrong length")
        if g.min() < 0 or g.max() >= gene_arity:
            raise ValueError("seed genome gene out of range")
        pop.append(g.copy())
        if len(pop) == ga.population_size:
            break
    while len(pop) < ga.population_size:
        pop.append(rng.integers(0, gene_arity, size=genome_len))

    def evaluate(genomes):
        if evaluate_batch is not None:
            return [float(s) for s in evaluate_batch(genomes)]
        return [float(fitness(g)) for g in genomes]

    scores = evaluate(pop)
    best_idx = int(np.argmax(scores))
    best_genome, best_score = pop[best_idx].copy(), scores[best_idx]
    history = [max(scores)]

    for _ in range(ga.generations):
        order = np.argsort(-np.asarray(scores), kind="stable")
        new_pop = [pop[i].copy() for i in order[: ga.elite_count]]
        while len(new_pop) < ga.population_size:
            p1 = pop[_tournament(rng, scores)]
            p2 = pop[_tournament(rng, scores)]
            c1, c2 = p1.copy(), p2.copy()
            if rng.random() < ga.crossover_rate:
                mask = rng.random(genome_len) < 0.5
                c1[mask], c2[mask] = p2[mask], p1[mask]
            for child in (c1, c2):
                mut = rng.random(genome_len) < ga.mutation_rate
                n_mut = int(mut.sum())
                if n_mut:
                    child[mut] = rng.integers(0, gene_arity, size=n_mut)
            new_pop.append(c1)
            if len(new_pop) < ga.population_size:
                new_pop.append(c2)
        pop = new_pop
        scores = evaluate(pop)
        gen_best = int(np.argmax(scores))
        if scores[gen_best] > best_score:
            best_genome, best_score = pop[gen_best].copy(), scores[gen_best]
        history.append(max(scores))

    return best_genome, history


def _tournament(rng, scores) -> int:
    i, j = rng.integers(0, len(scores), size=2)
    if scores[j] > scores[i]:
        return int(j)
    return int(i)
