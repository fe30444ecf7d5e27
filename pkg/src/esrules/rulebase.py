"""Rule bases: sequential covering, application to data, JSON persistence."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import IO, Optional

import numpy as np

from esrules.conn_model import Dataset
from esrules.es_engine import EsConfig, EvolutionResult, run
from esrules.fitness import FitnessConfig
from esrules.rule_model import BOUNDS, DEFAULT_ACTION, GENE_NAMES, Rule, decode, match_mask

FORMAT_VERSION = 1


class RuleBaseError(ValueError):
    """Malformed rule-base document; ``path`` locates the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass(frozen=True)
class RuleEntry:
    rule: Rule
    fitness: float = 0.0
    matched_anomalous: int = 0
    matched_normal: int = 0
    generation_found: int = 0
    seed: int = 0


@dataclass(frozen=True)
class RuleBase:
    entries: tuple[RuleEntry, ...] = ()

    def __post_init__(self):
        entries = tuple(self.entries)
        seen = set()
        for e in entries:
            if e.rule.bounds in seen:
                raise ValueError(f"duplicate rule {e.rule.bounds}")
            seen.add(e.rule.bounds)
        object.__setattr__(self, "entries", entries)

    @property
    def rules(self) -> list[Rule]:
        return [e.rule for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def added(self, entry: RuleEntry) -> "RuleBase":
        return RuleBase(self.entries + (entry,))


@dataclass(frozen=True)
class CoveringConfig:
    max_rules: int = 10
    target_coverage: float = 0.95
    min_new_coverage: int = 1

    def __post_init__(self):
        if self.max_rules < 1:
            raise ValueError(f"max_rules must be >= 1, got {self.max_rules}")
        if not 0.0 <= self.target_coverage <= 1.0:
            raise ValueError(f"target_coverage must be in [0, 1], got {self.target_coverage}")
        if self.min_new_coverage < 1:
            raise ValueError(f"min_new_coverage must be >= 1, got {self.min_new_coverage}")


@dataclass(frozen=True)
class CoveringIteration:
    index: int
    seed: int
    result: EvolutionResult
    rule: Rule
    new_covered: int
    accepted: bool
    coverage: float


@dataclass(frozen=True)
class CoveringReport:
    rulebase: RuleBase
    iterations: tuple[CoveringIteration, ...]
    stopped_by: str


def iteration_seed(seed: int, index: int) -> int:
    """Per-iteration ES seed, a pure function of the base seed and iteration."""
    return int(np.random.SeedSequence(seed, spawn_key=(index,)).generate_state(1, np.uint64)[0])


def covering_report(ccfg: CoveringConfig, ecfg: EsConfig, fcfg: FitnessConfig, ds: Dataset, *,
                    act: str = DEFAULT_ACTION, workers: int = 1) -> CoveringReport:
    anomalous = ds.columns["anomalous"] if len(ds) else np.zeros(0, dtype=bool)
    covered = np.zeros(len(ds), dtype=bool)
    rb = RuleBase()
    iterations = []
    if ds.n_anomalous == 0:
        return CoveringReport(rb, (), "no_anomalies")

    stopped_by = "max_rules"
    for index in range(ccfg.max_rules):
        # covered anomalies leave the residual; normals always stay
        residual = ds.subset(~covered)
        seed = iteration_seed(ecfg.seed, index)
        result = run(replace(ecfg, seed=seed), residual, fcfg, act=act, workers=workers)
        best = result.best
        rule = decode(best.genome, BOUNDS, act)
        mask = match_mask(rule, ds)
        new = mask & anomalous & ~covered
        n_new = int(np.count_nonzero(new))
        accepted = n_new >= ccfg.min_new_coverage
        if accepted:
            covered |= new
            ev = best.eval
            rb = rb.added(RuleEntry(rule, best.fitness, ev.matched_anomalous, ev.matched_normal,
                                    best.birth_generation, seed))
        coverage = np.count_nonzero(covered) / ds.n_anomalous
        iterations.append(CoveringIteration(index, seed, result, rule, n_new, accepted, coverage))
        if not accepted:
            stopped_by = "no_new_coverage"
            break
        if coverage >= ccfg.target_coverage:
            stopped_by = "target_coverage"
            break
    return CoveringReport(rb, tuple(iterations), stopped_by)


def sequential_covering(ccfg: CoveringConfig, ecfg: EsConfig, fcfg: FitnessConfig, ds: Dataset, *,
                        act: str = DEFAULT_ACTION, workers: int = 1) -> RuleBase:
    """Learn rules one at a time, each on the anomalies not yet covered."""
    return covering_report(ccfg, ecfg, fcfg, ds, act=act, workers=workers).rulebase


@dataclass(frozen=True)
class Verdict:
    flagged: bool
    rule_index: Optional[int]


def apply(rb: RuleBase, ds: Dataset) -> list[Verdict]:
    """Flag each record with the index of the first matching rule."""
    first = np.full(len(ds), -1, dtype=np.int64)
    for i, rule in enumerate(rb.rules):
        hit = match_mask(rule, ds) & (first < 0)
        first[hit] = i
    return [Verdict(bool(k >= 0), int(k) if k >= 0 else None) for k in first]


def to_json(rb: RuleBase) -> dict:
    rules = []
    for e in rb.entries:
        obj = e.rule.to_json()
        obj["provenance"] = {
            "fitness": e.fitness,
            "matched_anomalous": e.matched_anomalous,
            "matched_normal": e.matched_normal,
            "generation_found": e.generation_found,
            "seed": e.seed,
        }
        rules.append(obj)
    return {"version": FORMAT_VERSION, "rules": rules}


def dumps(rb: RuleBase) -> str:
    return json.dumps(to_json(rb), indent=2, ensure_ascii=False) + "\n"


def save(rb: RuleBase, sink) -> None:
    text = dumps(rb)
    if isinstance(sink, str) or hasattr(sink, "__fspath__"):
        with open(sink, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sink.write(text)


def _int_field(obj: dict, key: str, path: str, lo: int, hi: float) -> int:
    if key not in obj:
        raise RuleBaseError(f"{path}.{key}", "missing field")
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise RuleBaseError(f"{path}.{key}", f"expected an integer, got {v!r}")
    if not lo <= v <= hi:
        raise RuleBaseError(f"{path}.{key}", f"value {v} out of range [{lo}, {hi}]")
    return v


def from_json(doc) -> RuleBase:
    if not isinstance(doc, dict):
        raise RuleBaseError("", "top level must be an object")
    if doc.get("version") != FORMAT_VERSION:
        raise RuleBaseError("version", f"unsupported version {doc.get('version')!r}")
    rules = doc.get("rules")
    if not isinstance(rules, list):
        raise RuleBaseError("rules", "missing or not a list")
    limits = dict(zip(GENE_NAMES, [BOUNDS.src_ip[1]] * 4 + [BOUNDS.dst_port[1]] * 2))
    entries = []
    for i, obj in enumerate(rules):
        path = f"rules[{i}]"
        if not isinstance(obj, dict):
            raise RuleBaseError(path, "expected an object")
        b = [_int_field(obj, name, path, 0, limits[name]) for name in GENE_NAMES]
        for k, pair in enumerate(("src_ip", "dst_ip", "dst_port")):
            if b[2 * k] > b[2 * k + 1]:
                raise RuleBaseError(f"{path}.{pair}_low", f"low {b[2 * k]} exceeds high {b[2 * k + 1]}")
        action = obj.get("action", DEFAULT_ACTION)
        if not isinstance(action, str) or not action.strip():
            raise RuleBaseError(f"{path}.action", "must be non-empty text")
        prov = obj.get("provenance", {})
        if not isinstance(prov, dict):
            raise RuleBaseError(f"{path}.provenance", "expected an object")
        fit = prov.get("fitness", 0.0)
        if isinstance(fit, bool) or not isinstance(fit, (int, float)) or not math.isfinite(fit):
            raise RuleBaseError(f"{path}.provenance.fitness", f"expected a finite number, got {fit!r}")
        entries.append(RuleEntry(
            Rule((b[0], b[1]), (b[2], b[3]), (b[4], b[5]), action),
            float(fit),
            _int_field(prov, "matched_anomalous", f"{path}.provenance", 0, math.inf) if "matched_anomalous" in prov else 0,
            _int_field(prov, "matched_normal", f"{path}.provenance", 0, math.inf) if "matched_normal" in prov else 0,
            _int_field(prov, "generation_found", f"{path}.provenance", 0, math.inf) if "generation_found" in prov else 0,
            _int_field(prov, "seed", f"{path}.provenance", 0, 2**64 - 1) if "seed" in prov else 0,
        ))
    try:
        return RuleBase(tuple(entries))
    except ValueError as exc:
        raise RuleBaseError("rules", str(exc)) from None


def loads(text: str) -> RuleBase:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RuleBaseError("", f"malformed JSON: {exc}") from None
    return from_json(doc)


def load(source) -> RuleBase:
    if isinstance(source, str) or hasattr(source, "__fspath__"):
        with open(source, encoding="utf-8") as fh:
            return loads(fh.read())
    return loads(source.read())
