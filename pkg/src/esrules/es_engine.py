"""Evolution strategy over rule genomes.

Supports (1+1), (mu/rho + lambda) and (mu/rho, lambda) with intermediate
recombination, isotropic Gaussian mutation and a single global step size
driven by the 1/5th success rule. All randomness comes from one
``numpy.random.Generator`` seeded by ``EsConfig.seed`` and is drawn in a
fixed order before any (optionally threaded) fitness evaluation, so runs
are reproducible bit for bit.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import IO, Callable, Optional, Sequence, Union

import numpy as np

from esrules.conn_model import Dataset
from esrules.fitness import EvalResult, FitnessConfig
from esrules.fitness import fitness as rule_fitness
from esrules.rule_model import BOUNDS, DEFAULT_ACTION, N_GENES, RuleGenome, decode

VARIANTS = ("one_plus_one", "mu_rho_plus_lambda", "mu_rho_comma_lambda")
SEED_MAX = 2**64 - 1


class ConfigError(ValueError):
    """Invalid ES configuration."""


@dataclass(frozen=True)
class EsConfig:
    variant: str = "one_plus_one"
    mu: int = 1
    rho: int = 1
    lam: int = 1
    alpha: float = 1.2
    sigma0: float = 0.05
    max_generations: int = 5000
    stagnation_window: int = 500
    seed: int = 0
    # step-size ceiling; math.inf disables it
    sigma_max: float = 1.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        for name in ("mu", "rho", "lam", "max_generations", "stagnation_window", "seed"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise ConfigError(f"{name} must be an integer, got {v!r}")
        if self.mu < 1:
            raise ConfigError(f"mu must be >= 1, got {self.mu}")
        if not 1 <= self.rho <= self.mu:
            raise ConfigError(f"rho must satisfy 1 <= rho <= mu, got rho={self.rho}, mu={self.mu}")
        if self.lam < 1:
            raise ConfigError(f"lambda must be >= 1, got {self.lam}")
        if self.variant == "one_plus_one" and (self.mu, self.rho, self.lam) != (1, 1, 1):
            raise ConfigError("one_plus_one requires mu = rho = lambda = 1")
        if self.variant == "mu_rho_comma_lambda" and self.lam < self.mu:
            raise ConfigError(f"comma selection needs lambda >= mu, got lambda={self.lam}, mu={self.mu}")
        if not (self.alpha > 1 and math.isfinite(self.alpha)):
            raise ConfigError(f"alpha must be a finite value > 1, got {self.alpha}")
        if not (self.sigma0 > 0 and math.isfinite(self.sigma0)):
            raise ConfigError(f"sigma0 must be a finite value > 0, got {self.sigma0}")
        if not self.sigma_max >= self.sigma0:
            raise ConfigError(f"sigma_max must be >= sigma0, got {self.sigma_max}")
        if self.max_generations < 0 or self.stagnation_window < 0:
            raise ConfigError("max_generations and stagnation_window must be >= 0")
        if not 0 <= self.seed <= SEED_MAX:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def scheme(self) -> str:
        return "comma" if self.variant == "mu_rho_comma_lambda" else "plus"

    def to_json(self) -> dict:
        d = asdict(self)
        d["sigma_max"] = None if math.isinf(self.sigma_max) else self.sigma_max
        return d

    @classmethod
    def from_json(cls, d: dict) -> "EsConfig":
        d = dict(d)
        if d.get("sigma_max", 0) is None:
            d["sigma_max"] = math.inf
        return cls(**d)


@dataclass(frozen=True)
class Individual:
    genome: RuleGenome
    fitness: float
    birth_generation: int = 0
    eval: Optional[EvalResult] = None


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best_fitness: float
    mean_fitness: float
    sigma: float
    successes: int


TRACE_COLUMNS = ("generation", "best_fitness", "mean_fitness", "sigma", "successes")


@dataclass(frozen=True)
class EvolutionResult:
    best: Individual
    trace: tuple[GenerationRecord, ...]
    terminated_by: str
    evaluations: int = 0
    lam: int = 1

    def write_trace(self, sink: IO[str], header: bool = True, prefix: Sequence = ()) -> None:
        writer = csv.writer(sink, lineterminator="\n")
        if header:
            writer.writerow(TRACE_COLUMNS)
        for rec in self.trace:
            writer.writerow([*prefix, rec.generation, repr(rec.best_fitness), repr(rec.mean_fitness),
                             repr(rec.sigma), rec.successes])


def init_population(cfg: EsConfig, rng: np.random.Generator) -> list[RuleGenome]:
    """``mu`` genomes with genes uniform on [0, 1] and ``sigma = sigma0``."""
    genes = rng.random((cfg.mu, N_GENES))
    return [RuleGenome(tuple(row), cfg.sigma0) for row in genes]


def mutate(g: RuleGenome, rng: np.random.Generator) -> RuleGenome:
    """Add ``sigma * N(0, 1)`` to every gene and clamp into [0, 1]."""
    z = rng.standard_normal(N_GENES)
    return RuleGenome.from_array(np.asarray(g.genes) + g.sigma * z, g.sigma)


def adapt_sigma(sigma: float, success: bool, alpha: float) -> float:
    """One step of the 1/5th rule: grow by ``alpha`` or shrink by ``alpha**-1/4``."""
    return sigma * alpha if success else sigma * alpha ** -0.25


def recombine(parents: Sequence[RuleGenome]) -> RuleGenome:
    """Intermediate recombination: gene-wise and sigma mean of the parents."""
    if not parents:
        raise ValueError("recombine needs at least one parent")
    if len(parents) == 1:
        return parents[0]
    genes = np.mean([p.genes for p in parents], axis=0)
    sigma = float(np.mean([p.sigma for p in parents]))
    return RuleGenome.from_array(genes, sigma)


def select(parents: Sequence[Individual], offspring: Sequence[Individual], scheme: str,
           mu: Optional[int] = None) -> list[Individual]:
    """Truncation selection of the best ``mu`` (default ``len(parents)``).

    Ties go to the younger individual, then to the lower position in the
    pool (parents first, then offspring).
    """
    mu = len(parents) if mu is None else mu
    if scheme == "plus":
        pool = list(parents) + list(offspring)
    elif scheme == "comma":
        if len(offspring) < mu:
            raise ConfigError(f"comma selection needs lambda >= mu, got {len(offspring)} < {mu}")
        pool = list(offspring)
    else:
        raise ConfigError(f"unknown selection scheme {scheme!r}")
    order = sorted(range(len(pool)), key=lambda i: (-pool[i].fitness, -pool[i].birth_generation, i))
    return [pool[i] for i in order[:mu]]


Objective = Callable[[RuleGenome], Union[float, EvalResult]]


def _evaluator(objective: Objective, workers: int):
    def one(g: RuleGenome) -> tuple[float, Optional[EvalResult]]:
        out = objective(g)
        if isinstance(out, EvalResult):
            return out.fitness, out
        return float(out), None

    if workers <= 1:
        return lambda genomes: [one(g) for g in genomes], None
    pool = ThreadPoolExecutor(max_workers=workers)
    return lambda genomes: list(pool.map(one, genomes)), pool


def evolve(cfg: EsConfig, objective: Objective, *, workers: int = 1,
           observer: Optional[Callable[[Individual], None]] = None) -> EvolutionResult:
    """Maximise ``objective`` over genomes.

    ``objective`` returns a float or an :class:`EvalResult`. ``observer``, if
    given, sees every individual ever created (used by instrumented tests).
    """
    rng = np.random.default_rng(cfg.seed)
    evaluate, pool = _evaluator(objective, workers)
    try:
        return _loop(cfg, rng, evaluate, observer)
    finally:
        if pool is not None:
            pool.shutdown()


def _loop(cfg, rng, evaluate, observer) -> EvolutionResult:
    def birth(genomes, gen):
        inds = [Individual(g, f, gen, e) for g, (f, e) in zip(genomes, evaluate(genomes))]
        if observer is not None:
            for ind in inds:
                observer(ind)
        return inds

    def record(gen, pop, sigma, successes):
        fits = [p.fitness for p in pop]
        return GenerationRecord(gen, max(fits), float(np.mean(fits)), sigma, successes)

    sigma = cfg.sigma0
    parents = birth(init_population(cfg, rng), 0)
    evaluations = len(parents)
    best = select(parents, [], "plus", 1)[0]
    trace = [record(0, parents, sigma, 0)]
    since_improved = 0
    terminated_by = "max_generations"

    for gen in range(1, cfg.max_generations + 1):
        children = []
        for _ in range(cfg.lam):
            if cfg.mu == 1:
                chosen = [parents[0].genome]
            else:
                idx = rng.choice(cfg.mu, size=cfg.rho, replace=False)
                chosen = [parents[i].genome for i in idx]
            base = recombine(chosen).with_sigma(sigma)
            children.append(mutate(base, rng))
        offspring = birth(children, gen)
        evaluations += len(offspring)

        parent_best = max(p.fitness for p in parents)
        successes = sum(1 for o in offspring if o.fitness >= parent_best)
        parents = select(parents, offspring, cfg.scheme, cfg.mu)
        sigma = min(adapt_sigma(sigma, 5 * successes >= cfg.lam, cfg.alpha), cfg.sigma_max)
        trace.append(record(gen, parents, sigma, successes))

        if parents[0].fitness > best.fitness:
            best = parents[0]
            since_improved = 0
        else:
            since_improved += 1
        if cfg.stagnation_window and since_improved >= cfg.stagnation_window:
            terminated_by = "stagnation"
            break

    return EvolutionResult(best, tuple(trace), terminated_by, evaluations, cfg.lam)


def replay_sigma(trace: Sequence[GenerationRecord], cfg: EsConfig) -> list[float]:
    """Recompute sigma per generation from the recorded success counts."""
    sigma = cfg.sigma0
    out = [sigma]
    for rec in trace[1:]:
        sigma = min(adapt_sigma(sigma, 5 * rec.successes >= cfg.lam, cfg.alpha), cfg.sigma_max)
        out.append(sigma)
    return out


def run(cfg: EsConfig, ds: Dataset, fcfg: FitnessConfig = FitnessConfig(), *,
        act: str = DEFAULT_ACTION, workers: int = 1,
        observer: Optional[Callable[[Individual], None]] = None) -> EvolutionResult:
    """Evolve one rule against the labeled dataset ``ds``."""
    def objective(g: RuleGenome) -> EvalResult:
        return rule_fitness(decode(g, BOUNDS, act), ds, fcfg)

    return evolve(cfg, objective, workers=workers, observer=observer)
