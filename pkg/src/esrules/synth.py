"""Deterministic synthetic labeled traffic with planted anomaly clusters."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

import numpy as np

from esrules.conn_model import (
    FIELD_RANGES,
    IP_MAX,
    NUMERIC_FIELDS,
    PORT_MAX,
    ConnectionRecord,
    Dataset,
    IpParseError,
    Label,
    ip_to_decimal,
)

_RANGED = ("src_ip", "dst_ip", "dst_port")
_LIMITS = {"src_ip": IP_MAX, "dst_ip": IP_MAX, "dst_port": PORT_MAX}


class ScenarioError(ValueError):
    """Malformed scenario description."""


@dataclass(frozen=True)
class ClusterSpec:
    n_anomalous: int
    src_ip_range: tuple[int, int]
    dst_ip_range: tuple[int, int]
    dst_port_range: tuple[int, int]

    def __post_init__(self):
        if isinstance(self.n_anomalous, bool) or not isinstance(self.n_anomalous, int) or self.n_anomalous < 0:
            raise ScenarioError(f"n_anomalous must be a non-negative integer, got {self.n_anomalous!r}")
        for name in _RANGED:
            lo, hi = getattr(self, f"{name}_range")
            if not 0 <= lo <= hi <= _LIMITS[name]:
                raise ScenarioError(f"{name}_range [{lo}, {hi}] outside [0, {_LIMITS[name]}] or reversed")

    def ranges(self):
        return (self.src_ip_range, self.dst_ip_range, self.dst_port_range)

    def volume_fraction(self) -> float:
        """Probability that a uniform record falls inside this cluster."""
        return float(np.prod([(hi - lo + 1) / (_LIMITS[n] + 1) for n, (lo, hi) in zip(_RANGED, self.ranges())]))


@dataclass(frozen=True)
class ScenarioSpec:
    n_normal: int
    clusters: tuple[ClusterSpec, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.n_normal, bool) or not isinstance(self.n_normal, int) or self.n_normal < 0:
            raise ScenarioError(f"n_normal must be a non-negative integer, got {self.n_normal!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ScenarioError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        object.__setattr__(self, "clusters", tuple(self.clusters))

    def with_seed(self, seed: int) -> "ScenarioSpec":
        return ScenarioSpec(self.n_normal, self.clusters, seed)

    def collision_probability(self) -> float:
        """Chance that one uniformly drawn normal record lands in some cluster (union bound)."""
        return min(1.0, sum(c.volume_fraction() for c in self.clusters))


def _bound(value, name: str, ip: bool) -> int:
    if ip and isinstance(value, str):
        try:
            return ip_to_decimal(value)
        except IpParseError as exc:
            raise ScenarioError(f"{name}: {exc}") from None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"{name}: expected an integer{' or dotted quad' if ip else ''}, got {value!r}")
    return value


def scenario_from_json(obj: dict) -> ScenarioSpec:
    """Build a :class:`ScenarioSpec` from its JSON form.

    IP bounds may be dotted quads or decimal integers::

        {"n_normal": 800, "seed": 1,
         "clusters": [{"n_anomalous": 200,
                       "src_ip_range": ["81.0.0.0", "81.255.255.255"],
                       "dst_ip_range": ["100.11.0.0", "100.11.255.255"],
                       "dst_port_range": [20, 30]}]}
    """
    if not isinstance(obj, dict):
        raise ScenarioError("scenario must be a JSON object")
    try:
        clusters = []
        for i, c in enumerate(obj.get("clusters", [])):
            ranges = {}
            for name in _RANGED:
                pair = c[f"{name}_range"]
                if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                    raise ScenarioError(f"clusters[{i}].{name}_range must be a [low, high] pair")
                ranges[f"{name}_range"] = tuple(_bound(v, f"clusters[{i}].{name}_range", name != "dst_port") for v in pair)
            clusters.append(ClusterSpec(n_anomalous=c["n_anomalous"], **ranges))
        return ScenarioSpec(n_normal=obj["n_normal"], clusters=tuple(clusters), seed=obj.get("seed", 0))
    except KeyError as exc:
        raise ScenarioError(f"missing field {exc.args[0]!r}") from None
    except TypeError as exc:
        raise ScenarioError(str(exc)) from None


def scenario_to_json(spec: ScenarioSpec) -> dict:
    return {
        "n_normal": spec.n_normal,
        "seed": spec.seed,
        "clusters": [
            {"n_anomalous": c.n_anomalous, "src_ip_range": list(c.src_ip_range),
             "dst_ip_range": list(c.dst_ip_range), "dst_port_range": list(c.dst_port_range)}
            for c in spec.clusters
        ],
    }


def load_scenario(name: str, seed: int | None = None) -> ScenarioSpec:
    """Load a bundled scenario (``"s1"`` or ``"s2"``)."""
    text = resources.files("esrules.scenarios").joinpath(f"{name.lower()}.json").read_text(encoding="utf-8")
    spec = scenario_from_json(json.loads(text))
    return spec if seed is None else spec.with_seed(seed)


def _uniform(rng: np.random.Generator, n: int, lo: int, hi: int) -> np.ndarray:
    return rng.integers(lo, hi, size=n, endpoint=True, dtype=np.int64)


def _inside(cols: dict, c: ClusterSpec) -> np.ndarray:
    mask = np.ones(len(cols["src_ip"]), dtype=bool)
    for name, (lo, hi) in zip(_RANGED, c.ranges()):
        mask &= (cols[name] >= lo) & (cols[name] <= hi)
    return mask


def generate(spec: ScenarioSpec) -> Dataset:
    """Normals first (uniform over every attribute), then each cluster in order.

    A normal draw that lands inside a cluster is labeled anomalous so the
    labels always agree with the cluster geometry.
    """
    rng = np.random.default_rng(spec.seed)
    blocks = []
    normals = {name: _uniform(rng, spec.n_normal, *FIELD_RANGES[name]) for name in NUMERIC_FIELDS}
    hit = np.zeros(spec.n_normal, dtype=bool)
    for c in spec.clusters:
        hit |= _inside(normals, c)
    blocks.append((normals, hit))
    for c in spec.clusters:
        cols = {}
        for name in NUMERIC_FIELDS:
            lo, hi = dict(zip(_RANGED, c.ranges())).get(name, FIELD_RANGES[name])
            cols[name] = _uniform(rng, c.n_anomalous, lo, hi)
        blocks.append((cols, np.ones(c.n_anomalous, dtype=bool)))

    records = []
    for cols, anomalous in blocks:
        for i in range(len(anomalous)):
            label = Label.ANOMALOUS if anomalous[i] else Label.NORMAL
            records.append(ConnectionRecord(label=label, **{k: int(cols[k][i]) for k in NUMERIC_FIELDS}))
    return Dataset(tuple(records))


def relabeled_count(spec: ScenarioSpec, ds: Dataset) -> int:
    """Normal draws that were relabeled anomalous by collision with a cluster."""
    return ds.n_anomalous - sum(c.n_anomalous for c in spec.clusters)
