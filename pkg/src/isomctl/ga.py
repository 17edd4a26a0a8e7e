"""Evolutionary phase search over the 128-component constrained pulse.

The genome is the phase vector of the constrained field; everything else
about the pulse (amplitudes, frequencies, envelope) is fixed, mirroring a
phase-only pulse shaper.  Selection is strictly elitist truncation: the
top `survivors` genomes are carried over unchanged and each contributes a
fixed number of mutation children (per-gene wrapped-Gaussian kicks) and
one uniform-crossover child with a random other survivor.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field as dfield, replace

import numpy as np

from .bath import RedfieldTensors
from .field import FieldSpec, pulse_area, synthesize
from .model import EigenSystem
from .propagator import (CIS_OVER_AREA, OBJECTIVE_KINDS, Propagator,
                         PropagatorConfig, TrajectoryRecord, objective,
                         thermal_state)

N_GENES = 128
TWO_PI = 2.0 * np.pi


class GAError(ValueError):
    pass


@dataclass
class GAConfig:
    population: int = 60
    survivors: int = 10
    mutation_children: int = 4
    crossover_children: int = 1
    generations: int = 64
    sigma: float = 0.3          # rad, mutation kick scale
    gene_rate: float = 0.1      # per-gene mutation probability
    seed: int = 0
    objective: str = CIS_OVER_AREA

    def validate(self) -> None:
        per = 1 + self.mutation_children + self.crossover_children
        if self.survivors * per != self.population:
            raise GAError(
                f"survivors*(1+mutation+crossover) = {self.survivors * per} "
                f"must equal population = {self.population}"
            )
        if self.objective not in OBJECTIVE_KINDS:
            raise GAError(f"unknown objective {self.objective!r}")
        if not 0.0 <= self.gene_rate <= 1.0:
            raise GAError("gene_rate must be in [0, 1]")
        if self.sigma < 0:
            raise GAError("sigma must be nonnegative")


@dataclass
class Generation:
    genomes: np.ndarray                  # (population, 128), phases in [0, 2pi)
    fitness: np.ndarray | None = None    # (population,)
    index: int = 0
    best_genome: np.ndarray | None = None
    best_fitness: float = -np.inf

    def update_archive(self) -> None:
        i = int(np.argmax(self.fitness))
        if self.fitness[i] > self.best_fitness:
            self.best_fitness = float(self.fitness[i])
            self.best_genome = self.genomes[i].copy()


def init_population(cfg: GAConfig, rng: np.random.Generator) -> Generation:
    cfg.validate()
    genomes = rng.uniform(0.0, TWO_PI, size=(cfg.population, N_GENES))
    return Generation(genomes=genomes, index=0)


def evaluate_generation(gen: Generation, evaluate) -> None:
    """Fill in fitness for every genome; failures score -inf."""
    fit = np.empty(len(gen.genomes))
    for i, g in enumerate(gen.genomes):
        try:
            fit[i] = evaluate(g)
        except Exception:
            fit[i] = -np.inf
    gen.fitness = fit
    gen.update_archive()


def evolve(gen: Generation, cfg: GAConfig, rng: np.random.Generator,
           evaluate) -> Generation:
    """Select, breed and evaluate the next generation."""
    if gen.fitness is None:
        raise GAError("current generation has no fitness values")
    # stable sort on negated fitness: ties broken by genome index
    order = np.argsort(-gen.fitness, kind="stable")[:cfg.survivors]
    parents = gen.genomes[order]

    children = [parents]
    for s in range(cfg.survivors):
        base = parents[s]
        for _ in range(cfg.mutation_children):
            mask = rng.random(N_GENES) < cfg.gene_rate
            kick = rng.normal(0.0, cfg.sigma, N_GENES)
            children.append(np.mod(base + mask * kick, TWO_PI)[None, :])
        for _ in range(cfg.crossover_children):
            others = [k for k in range(cfg.survivors) if k != s]
            partner = parents[rng.choice(others)]
            take = rng.random(N_GENES) < 0.5
            children.append(np.where(take, partner, base)[None, :])

    nxt = Generation(genomes=np.vstack(children), index=gen.index + 1,
                     best_genome=gen.best_genome,
                     best_fitness=gen.best_fitness)
    evaluate_generation(nxt, evaluate)
    return nxt


@dataclass
class EvaluationContext:
    """Maps a phase genome to a fitness via a full propagation."""

    es: EigenSystem
    tensors: RedfieldTensors
    base_field: FieldSpec
    prop_config: PropagatorConfig
    t_final: float                      # fs
    objective: str = CIS_OVER_AREA
    _prop: Propagator | None = dfield(default=None, repr=False)
    _grid: np.ndarray | None = dfield(default=None, repr=False)
    _field_end: float | None = dfield(default=None, repr=False)

    def _setup(self) -> None:
        if self._prop is None:
            self._prop = Propagator(self.es, self.tensors, self.prop_config)
            eps = self.prop_config.eps_field_rel * self.base_field.amplitude
            end = min(self.base_field.support_end(eps), self.t_final)
            half = self.prop_config.dt / 2.0
            self._grid = np.arange(0.0, end + half, half)
            self._field_end = end

    def trajectory(self, phases: np.ndarray) -> TrajectoryRecord:
        self._setup()
        spec = replace(self.base_field, phases=np.asarray(phases, dtype=float))
        f = synthesize(spec, self._grid)
        area = pulse_area(f, self.es.spec.mu_ge)
        rho0 = thermal_state(self.es, self.tensors.bath.temperature)
        return self._prop.propagate(rho0, f, self.t_final,
                                    pulse_area=area,
                                    field_end=self._field_end)

    def __call__(self, phases: np.ndarray) -> float:
        return objective(self.trajectory(phases), self.objective)


# ----------------------------------------------------------------------
# orchestration with persistence
# ----------------------------------------------------------------------

def _save_checkpoint(path: str, gen: Generation, rng: np.random.Generator,
                     cfg: GAConfig) -> None:
    np.savez(path,
             genomes=gen.genomes, fitness=gen.fitness, index=gen.index,
             best_genome=(gen.best_genome if gen.best_genome is not None
                          else np.zeros(0)),
             best_fitness=gen.best_fitness,
             rng_state=json.dumps(rng.bit_generator.state),
             seed=cfg.seed)


def _load_checkpoint(path: str):
    data = np.load(path, allow_pickle=False)
    gen = Generation(
        genomes=data["genomes"],
        fitness=data["fitness"],
        index=int(data["index"]),
        best_genome=(data["best_genome"]
                     if data["best_genome"].size else None),
        best_fitness=float(data["best_fitness"]),
    )
    rng = np.random.default_rng()
    rng.bit_generator.state = json.loads(str(data["rng_state"]))
    return gen, rng, int(data["seed"])


@dataclass
class GAReport:
    best_genome: np.ndarray
    best_fitness: float
    trace: list                          # (index, best, mean, std) rows
    generations_run: int


def run(cfg: GAConfig, evaluate, out_dir: str,
        resume: bool = True) -> GAReport:
    """Full optimization loop with per-generation persistence.

    ``evaluate`` maps a genome to a fitness (e.g. an EvaluationContext).
    Writes ``fitness_trace.csv``, ``best_genome.json`` and a resumable
    ``ga_checkpoint.npz`` under ``out_dir``.
    """
    cfg.validate()
    os.makedirs(out_dir, exist_ok=True)
    trace_path = os.path.join(out_dir, "fitness_trace.csv")
    ckpt_path = os.path.join(out_dir, "ga_checkpoint.npz")

    trace: list = []
    if resume and os.path.exists(ckpt_path):
        gen, rng, seed = _load_checkpoint(ckpt_path)
        if seed != cfg.seed:
            raise GAError(
                f"checkpoint was produced with seed {seed}, config has "
                f"seed {cfg.seed}"
            )
        if os.path.exists(trace_path):
            with open(trace_path) as fh:
                rows = list(csv.reader(fh))[1:]
            trace = [(int(r[0]), float(r[1]), float(r[2]), float(r[3]))
                     for r in rows if int(r[0]) <= gen.index]
    else:
        rng = np.random.default_rng(cfg.seed)
        gen = init_population(cfg, rng)
        evaluate_generation(gen, evaluate)
        trace.append(_trace_row(gen))
        _flush(trace_path, trace, gen, ckpt_path, rng, cfg, out_dir)

    while gen.index < cfg.generations:
        gen = evolve(gen, cfg, rng, evaluate)
        trace.append(_trace_row(gen))
        _flush(trace_path, trace, gen, ckpt_path, rng, cfg, out_dir)

    return GAReport(best_genome=gen.best_genome,
                    best_fitness=gen.best_fitness,
                    trace=trace, generations_run=gen.index)


def _trace_row(gen: Generation):
    finite = gen.fitness[np.isfinite(gen.fitness)]
    mean = float(finite.mean()) if len(finite) else float("-inf")
    std = float(finite.std()) if len(finite) else 0.0
    return (gen.index, float(gen.fitness.max()), mean, std)


def _flush(trace_path, trace, gen, ckpt_path, rng, cfg, out_dir):
    with open(trace_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["generation", "best", "mean", "std"])
        for row in trace:
            writer.writerow([row[0], f"{row[1]:.12g}", f"{row[2]:.12g}",
                             f"{row[3]:.12g}"])
    with open(os.path.join(out_dir, "best_genome.json"), "w") as fh:
        json.dump({"fitness": gen.best_fitness,
                   "phases": gen.best_genome.tolist()}, fh, indent=1)
    _save_checkpoint(ckpt_path, gen, rng, cfg)
