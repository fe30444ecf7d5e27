"""Rule scoring: generality H, labeled match counting, fitness and detection metrics.

Two readings of H are supported. ``width`` scores a rule by how wide its
ranges are, sum over pairs of (high + 1) / (low + 1). ``literal`` evaluates
the six-term ratio that interleaves rule bounds with the matched record's
values, averaged over matched records. The +1 offsets keep zero-valued
ports and addresses from dividing by zero.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from esrules.conn_model import ConnectionRecord, Dataset
from esrules.rule_model import Rule, match_mask

H_MODES = ("width", "literal")
MATCH_MODES = ("paper", "penalized")
NEGATIVE_FLOORS = ("clamp_zero", "allow_negative")


@dataclass(frozen=True)
class FitnessConfig:
    h_mode: str = "width"
    match_mode: str = "penalized"
    fp_weight: float = 1.0
    negative_floor: str = "clamp_zero"

    def __post_init__(self):
        if self.h_mode not in H_MODES:
            raise ValueError(f"h_mode must be one of {H_MODES}, got {self.h_mode!r}")
        if self.match_mode not in MATCH_MODES:
            raise ValueError(f"match_mode must be one of {MATCH_MODES}, got {self.match_mode!r}")
        if self.negative_floor not in NEGATIVE_FLOORS:
            raise ValueError(f"negative_floor must be one of {NEGATIVE_FLOORS}")
        if not self.fp_weight >= 0:
            raise ValueError(f"fp_weight must be >= 0, got {self.fp_weight}")


@dataclass(frozen=True)
class EvalResult:
    match_score: float
    h: float
    fitness: float
    matched_anomalous: int
    matched_normal: int


def _width_h(r: Rule) -> float:
    return sum((hi + 1) / (lo + 1) for lo, hi in r.ranges)


def _literal_h(bounds: Sequence[int], y1, y2, y3) -> np.ndarray:
    x1, x2, x3, x4, x5, x6 = (float(v) + 1.0 for v in bounds)
    y1, y2, y3 = (np.asarray(y, dtype=np.float64) + 1.0 for y in (y1, y2, y3))
    return y1 / x1 + x2 / y1 + y2 / x3 + x4 / y2 + y3 / x5 + x6 / y3


def generality(r: Rule, mode: str = "width", matched: Optional[Sequence[ConnectionRecord]] = None) -> float:
    """Generality distance H of a rule (always >= 3 in width mode)."""
    if mode == "width":
        return _width_h(r)
    if mode != "literal":
        raise ValueError(f"unknown h_mode {mode!r}")
    if matched is None:
        raise ValueError("literal mode needs the list of matched records")
    if len(matched) == 0:
        return _width_h(r)
    if isinstance(matched, Dataset):
        cols = matched.columns
        y = (cols["src_ip"], cols["dst_ip"], cols["dst_port"])
    else:
        y = tuple(np.array([getattr(c, k) for c in matched], dtype=np.int64) for k in ("src_ip", "dst_ip", "dst_port"))
    return float(np.mean(_literal_h(r.bounds, *y)))


def _counts(r: Rule, ds: Dataset) -> tuple[np.ndarray, int, int]:
    mask = match_mask(r, ds)
    if mask.size == 0:
        return mask, 0, 0
    cols = ds.columns
    n_anom = int(np.count_nonzero(mask & cols["anomalous"]))
    n_norm = int(np.count_nonzero(mask & cols["normal"]))
    return mask, n_anom, n_norm


def _score(n_anom: int, n_norm: int, mode: str, beta: float) -> float:
    if mode == "paper":
        return float(n_anom)
    if mode == "penalized":
        return n_anom - beta * n_norm
    raise ValueError(f"unknown match_mode {mode!r}")


def match_score(r: Rule, ds: Dataset, mode: str = "penalized", beta: float = 1.0) -> tuple[float, int, int]:
    """Return ``(score, matched_anomalous, matched_normal)``.

    In ``paper`` mode a matched normal record adds nothing; in ``penalized``
    mode it subtracts ``beta``.
    """
    _, n_anom, n_norm = _counts(r, ds)
    return _score(n_anom, n_norm, mode, beta), n_anom, n_norm


def fitness(r: Rule, ds: Dataset, cfg: FitnessConfig = FitnessConfig()) -> EvalResult:
    mask, n_anom, n_norm = _counts(r, ds)
    score = _score(n_anom, n_norm, cfg.match_mode, cfg.fp_weight)
    if cfg.h_mode == "width" or n_anom + n_norm == 0:
        h = _width_h(r)
    else:
        cols = ds.columns
        h = float(np.mean(_literal_h(r.bounds, cols["src_ip"][mask], cols["dst_ip"][mask], cols["dst_port"][mask])))
    weight = max(0.0, score) if cfg.negative_floor == "clamp_zero" else score
    return EvalResult(score, h, weight * h, n_anom, n_norm)


def detection_metrics(rules: Sequence[Rule], ds: Dataset) -> tuple[float, float]:
    """(detection rate, false-positive rate) of the union of ``rules``."""
    if len(ds) == 0:
        return 0.0, 0.0
    flagged = np.zeros(len(ds), dtype=bool)
    for r in rules:
        flagged |= match_mask(r, ds)
    cols = ds.columns
    dr = np.count_nonzero(flagged & cols["anomalous"]) / ds.n_anomalous if ds.n_anomalous else 0.0
    fpr = np.count_nonzero(flagged & cols["normal"]) / ds.n_normal if ds.n_normal else 0.0
    return float(dr), float(fpr)
