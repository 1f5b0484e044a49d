"""Several measurement paths in one acoustic area: interval overlap and pooling.

Office-wide uncertainty treats the choice of path as a uniform random
variable over the measured paths (law of total variance)::

    u_pooled**2 = Var_between(path means) + mean(u_path**2)

with population variance (divide by the number of paths). A single value
of an SNQ is considered defensible for the area when every pair of per-path
coverage intervals (mean +/- k*u) overlaps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import SNQ_NAMES
from .exceptions import InsufficientPaths

UNITS = {"d2s": "dB(A)", "lpas4m": "dB(A)", "rc": "m"}
LABELS = {"d2s": "D_2S", "lpas4m": "L_pAS4m", "rc": "r_c"}


@dataclass(frozen=True)
class PathResult:
    """Per-path SNQ values with their standard uncertainties."""

    path_id: str
    values: dict
    uncertainties: dict
    k: float = 2.0
    source: str = "analytic"

    def half_width(self, name: str) -> float:
        return self.k * self.uncertainties[name]

    def interval(self, name: str) -> tuple:
        v, h = self.values[name], self.half_width(name)
        return (v - h, v + h)

    @classmethod
    def from_budget(cls, path_id, budget, k: float = 2.0) -> "PathResult":
        return cls(str(path_id), budget.snq.as_dict(),
                   {n: budget.u(n) for n in SNQ_NAMES}, k, "analytic")

    @classmethod
    def from_mc(cls, path_id, result, k: float = 2.0) -> "PathResult":
        return cls(str(path_id), {n: result.mean(n) for n in SNQ_NAMES},
                   {n: result.u(n) for n in SNQ_NAMES}, k, "mc")

    def as_dict(self) -> dict:
        return {"path_id": self.path_id, "k": self.k, "source": self.source,
                "values": dict(self.values), "uncertainties": dict(self.uncertainties)}


@dataclass(frozen=True)
class SnqPooling:
    pooled_mean: float
    between_var: float
    within_var: float
    overlap: np.ndarray = field(compare=False)
    unique: bool
    k: float

    @property
    def pooled_u(self) -> float:
        return math.sqrt(self.between_var + self.within_var)

    @property
    def half_width(self) -> float:
        return self.k * self.pooled_u


@dataclass(frozen=True)
class AreaResult:
    paths: tuple
    pooling: dict
    notes: tuple = ()

    def pooled_u(self, name: str) -> float:
        return self.pooling[name].pooled_u

    def unique(self, name: str) -> bool:
        return self.pooling[name].unique


def overlap_test(a, b) -> bool:
    """True when two ``(centre, half_width)`` intervals intersect; touching counts."""
    (ca, ha), (cb, hb) = a, b
    if ha < 0 or hb < 0:
        raise ValueError("half-widths must be >= 0")
    return max(ca - ha, cb - hb) <= min(ca + ha, cb + hb)


def overlap_matrix(results, name: str) -> np.ndarray:
    p = len(results)
    out = np.ones((p, p), dtype=bool)
    for i in range(p):
        for j in range(i + 1, p):
            a = (results[i].values[name], results[i].half_width(name))
            b = (results[j].values[name], results[j].half_width(name))
            out[i, j] = out[j, i] = overlap_test(a, b)
    return out


def pool_area(results, k: float | None = None) -> AreaResult:
    """Pool per-path results into office-wide values and unicity flags."""
    results = tuple(results)
    if len(results) < 2:
        raise InsufficientPaths(f"need at least 2 paths, got {len(results)}")
    k = results[0].k if k is None else k
    pooling = {}
    for name in SNQ_NAMES:
        means = np.array([r.values[name] for r in results])
        u2 = np.array([r.uncertainties[name] ** 2 for r in results])
        ov = overlap_matrix(results, name)
        pooling[name] = SnqPooling(
            pooled_mean=float(means.mean()),
            between_var=float(np.mean((means - means.mean()) ** 2)),
            within_var=float(u2.mean()),
            overlap=ov,
            unique=bool(ov.all()),
            k=float(k),
        )
    notes = ()
    if len(results) == 2:
        notes = ("only 2 paths: the between-path variance estimate is noisy",)
    return AreaResult(results, pooling, notes)


def pool_samples(mc_results) -> dict:
    """Office-wide uncertainty from Monte-Carlo samples concatenated over paths."""
    mc_results = list(mc_results)
    if len(mc_results) < 2:
        raise InsufficientPaths(f"need at least 2 paths, got {len(mc_results)}")
    out = {}
    for name in SNQ_NAMES:
        v = np.concatenate([r.samples[name] for r in mc_results])
        v = v[np.isfinite(v)]
        out[name] = {"mean": float(v.mean()), "u": float(v.std())}
    return out


def unicity_report(area: AreaResult) -> dict:
    """Machine-readable verdict; ``format_unicity_report`` renders it."""
    report = {"paths": [r.path_id for r in area.paths], "notes": list(area.notes), "snq": {}}
    for name in SNQ_NAMES:
        pl = area.pooling[name]
        disjoint = [[area.paths[i].path_id, area.paths[j].path_id]
                    for i in range(len(area.paths)) for j in range(i + 1, len(area.paths))
                    if not pl.overlap[i, j]]
        report["snq"][name] = {
            "unique": pl.unique,
            "pooled_mean": pl.pooled_mean,
            "pooled_u": pl.pooled_u,
            "between_var": pl.between_var,
            "within_var": pl.within_var,
            "k": pl.k,
            "half_width": pl.half_width,
            "disjoint_pairs": disjoint,
            "per_path": [{"path_id": r.path_id, "value": r.values[name],
                          "u": r.uncertainties[name], "half_width": r.half_width(name)}
                         for r in area.paths],
        }
    return report


def format_unicity_report(report: dict, round_up=None) -> str:
    lines = []
    for name, entry in report["snq"].items():
        unit = UNITS[name]
        u = entry["pooled_u"] if round_up is None else round_up(entry["pooled_u"])
        verdict = "single value defensible" if entry["unique"] else "NOT unique"
        lines.append(f"{LABELS[name]}: {entry['pooled_mean']:.2f} +/- {entry['k'] * u:.2f} {unit}"
                     f" (u = {u:.2f}, k = {entry['k']:g}) -> {verdict}")
        for a, b in entry["disjoint_pairs"]:
            lines.append(f"  intervals of paths {a} and {b} do not overlap")
    lines.extend(f"note: {n}" for n in report["notes"])
    return "\n".join(lines)
