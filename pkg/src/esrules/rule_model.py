"""Rule genomes, their decoded integer-range phenotype, and the match test."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from esrules.conn_model import IP_MAX, PORT_MAX, ConnectionRecord, Dataset

N_GENES = 6
DEFAULT_ACTION = "stop the connection"
DEFAULT_SIGMA0 = 0.05

# gene order; pairs are (low, high) per attribute
GENE_NAMES = ("src_ip_low", "src_ip_high", "dst_ip_low", "dst_ip_high", "dst_port_low", "dst_port_high")


class AttributeBounds(NamedTuple):
    src_ip: tuple[int, int] = (0, IP_MAX)
    dst_ip: tuple[int, int] = (0, IP_MAX)
    dst_port: tuple[int, int] = (0, PORT_MAX)


BOUNDS = AttributeBounds()


@dataclass(frozen=True)
class RuleGenome:
    """Six genes in [0, 1] plus the mutation step size ``sigma``."""

    genes: tuple[float, ...]
    sigma: float = DEFAULT_SIGMA0

    def __post_init__(self):
        genes = tuple(float(g) for g in self.genes)
        if len(genes) != N_GENES:
            raise ValueError(f"a genome has {N_GENES} genes, got {len(genes)}")
        if not all(0.0 <= g <= 1.0 for g in genes):
            raise ValueError(f"genes must lie in [0, 1]: {genes}")
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be non-negative: {self.sigma}")
        object.__setattr__(self, "genes", genes)
        object.__setattr__(self, "sigma", float(self.sigma))

    @classmethod
    def from_array(cls, genes, sigma: float) -> "RuleGenome":
        return cls(tuple(np.clip(np.asarray(genes, dtype=float), 0.0, 1.0)), sigma)

    def with_sigma(self, sigma: float) -> "RuleGenome":
        return replace(self, sigma=sigma)


@dataclass(frozen=True)
class Rule:
    """``if src/dst/port fall in these inclusive ranges then <action>``."""

    src_ip_range: tuple[int, int]
    dst_ip_range: tuple[int, int]
    dst_port_range: tuple[int, int]
    action: str = DEFAULT_ACTION

    def __post_init__(self):
        for name, (lo, hi), (bmin, bmax) in zip(
            ("src_ip", "dst_ip", "dst_port"), self.ranges, BOUNDS
        ):
            if not (bmin <= lo <= hi <= bmax):
                raise ValueError(f"{name} range [{lo}, {hi}] invalid within [{bmin}, {bmax}]")
        if not isinstance(self.action, str) or not self.action.strip():
            raise ValueError("action must be non-empty text")
        object.__setattr__(self, "src_ip_range", tuple(int(v) for v in self.src_ip_range))
        object.__setattr__(self, "dst_ip_range", tuple(int(v) for v in self.dst_ip_range))
        object.__setattr__(self, "dst_port_range", tuple(int(v) for v in self.dst_port_range))

    @property
    def ranges(self) -> tuple[tuple[int, int], tuple[int, int], tuple[int, int]]:
        return (self.src_ip_range, self.dst_ip_range, self.dst_port_range)

    @property
    def bounds(self) -> tuple[int, ...]:
        """Flat ``(x1, ..., x6)``."""
        return (*self.src_ip_range, *self.dst_ip_range, *self.dst_port_range)

    def contains(self, other: "Rule") -> bool:
        return all(lo <= olo and ohi <= hi for (lo, hi), (olo, ohi) in zip(self.ranges, other.ranges))

    def to_json(self) -> dict:
        b = self.bounds
        out = {name: v for name, v in zip(GENE_NAMES, b)}
        out["action"] = self.action
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Rule":
        b = [obj[name] for name in GENE_NAMES]
        return cls((b[0], b[1]), (b[2], b[3]), (b[4], b[5]), obj.get("action", DEFAULT_ACTION))

    @classmethod
    def universe(cls, action: str = DEFAULT_ACTION) -> "Rule":
        return cls(BOUNDS.src_ip, BOUNDS.dst_ip, BOUNDS.dst_port, action)


def _to_int(gene: float, lo: int, hi: int) -> int:
    v = math.floor(gene * hi + 0.5)  # round half up
    return min(max(v, lo), hi)


def decode(g: RuleGenome, b: AttributeBounds = BOUNDS, act: str = DEFAULT_ACTION) -> Rule:
    """Scale genes to attribute bounds; disordered pairs are swapped."""
    pairs = []
    for k, (lo, hi) in enumerate(b):
        x = _to_int(g.genes[2 * k], lo, hi)
        y = _to_int(g.genes[2 * k + 1], lo, hi)
        pairs.append((x, y) if x <= y else (y, x))
    return Rule(pairs[0], pairs[1], pairs[2], act)


def encode(r: Rule, b: AttributeBounds = BOUNDS, sigma: float = DEFAULT_SIGMA0) -> RuleGenome:
    genes = []
    for (lo, hi), (_, amax) in zip(r.ranges, b):
        genes += [lo / amax, hi / amax]
    return RuleGenome(tuple(genes), sigma)


def matches(r: Rule, c: ConnectionRecord) -> bool:
    x1, x2, x3, x4, x5, x6 = r.bounds
    return x1 <= c.src_ip <= x2 and x3 <= c.dst_ip <= x4 and x5 <= c.dst_port <= x6


def match_mask(r: Rule, ds: Dataset) -> np.ndarray:
    """Vectorised :func:`matches` over every record of ``ds``."""
    if len(ds) == 0:
        return np.zeros(0, dtype=bool)
    cols = ds.columns
    x1, x2, x3, x4, x5, x6 = r.bounds
    src, dst, port = cols["src_ip"], cols["dst_ip"], cols["dst_port"]
    return (src >= x1) & (src <= x2) & (dst >= x3) & (dst <= x4) & (port >= x5) & (port <= x6)
