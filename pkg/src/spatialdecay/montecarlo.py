"""Monte-Carlo emulation of complete spatial-decay measurements.

Each run emulates one measurement of a path:

1. the source and the microphone at every position are placed with a
   planar normal error; levels are read from the field at the displaced
   positions (or kept nominal when level coupling is off) and the actual
   source-receiver distances are computed;
2. a uniform error of standard deviation ``u_oct`` is added to each octave
   level and a normal error to each distance reading;
3. the SNQs are computed from the perturbed data.

Random numbers come from a counter-based generator (Philox). Run ``i``
consumes a fixed slice of the stream determined by ``(seed, i)`` only, so
results do not depend on batch sizes or on how runs are split across
workers.
"""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats as sps
from scipy.special import ndtri

from .analytic import DistanceErrorModel, OctaveUncertaintyTable
from .core import (
    DEFAULT_THRESHOLD_DBA,
    SNQ_NAMES,
    MeasurementPath,
    SnqSet,
    a_weighted,
    comfort_distance,
    fit_decay,
    require_valid,
    snq_from_levels,
)
from .exceptions import InsufficientSamples, NotConverged

log = logging.getLogger(__name__)

SQRT3 = math.sqrt(3.0)
_U64_MAX = 2 ** 64 - 1


@dataclass(frozen=True)
class McErrorModel:
    """Error sources of one emulated measurement.

    ``octave_table=None`` disables instrument level errors.
    ``source_offset`` is ``"shared"`` (one loudspeaker placement per path)
    or ``"per_position"`` (an independent placement for every position).
    """

    octave_table: OctaveUncertaintyTable | None = field(default_factory=OctaveUncertaintyTable)
    dist_model: DistanceErrorModel = field(default_factory=DistanceErrorModel)
    positioning_sigma_m: float | None = None
    couple_levels_to_position: bool = False
    source_offset: str = "shared"

    def __post_init__(self):
        if self.source_offset not in ("shared", "per_position"):
            raise ValueError("source_offset must be 'shared' or 'per_position'")
        if self.positioning_sigma_m is not None and self.positioning_sigma_m < 0:
            raise ValueError("positioning_sigma_m must be >= 0")

    @property
    def sigma_m(self) -> float:
        if self.positioning_sigma_m is not None:
            return self.positioning_sigma_m
        return self.dist_model.sigma_axis_m

    @property
    def u_tape_m(self) -> float:
        return self.dist_model.u_tape_m

    def scaled(self, factor: float) -> "McErrorModel":
        """Same model with every error magnitude multiplied by ``factor``."""
        table = None if self.octave_table is None else self.octave_table.scaled(factor)
        dist = replace(self.dist_model, u_tape_m=self.dist_model.u_tape_m * factor)
        return replace(self, octave_table=table, dist_model=dist,
                       positioning_sigma_m=self.sigma_m * factor)


@dataclass(frozen=True)
class McConfig:
    batch_size: int = 5000
    max_batches: int = 20
    min_batches: int = 2
    tol_level_db: float = 0.01
    tol_rc_m: float = 0.01
    seed: int = 0
    coverage_k: float = 2.0
    workers: int = 1
    histogram_bins: int = 50

    def __post_init__(self):
        if self.batch_size < 1000:
            raise ValueError("batch_size must be >= 1000")
        if self.tol_level_db <= 0 or self.tol_rc_m <= 0:
            raise ValueError("tolerances must be > 0")
        if not 1 <= self.min_batches <= self.max_batches:
            raise ValueError("need 1 <= min_batches <= max_batches")
        if not 0 <= int(self.seed) <= _U64_MAX:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class NormalityCheck:
    normal: bool
    skewness: float
    excess_kurtosis: float
    diagnostic: str = ""


@dataclass(frozen=True)
class SnqStats:
    mean: float
    std: float
    histogram_counts: tuple
    histogram_edges: tuple
    normality: NormalityCheck
    n_invalid: int = 0


@dataclass(frozen=True)
class McResult:
    """Sample statistics per SNQ; ``std`` is the Monte-Carlo uncertainty."""

    stats: dict
    runs_used: int
    converged: bool
    nominal: SnqSet | None = None
    samples: dict = field(default_factory=dict, compare=False, repr=False)

    def u(self, name: str) -> float:
        return self.stats[name].std

    def mean(self, name: str) -> float:
        return self.stats[name].mean

    def as_dict(self, include_samples: bool = False) -> dict:
        out = {"runs_used": self.runs_used, "converged": self.converged}
        if self.nominal is not None:
            out["nominal"] = self.nominal.as_dict()
        for name, s in self.stats.items():
            out[name] = {
                "mean": s.mean, "std": s.std, "n_invalid": s.n_invalid,
                "normal": s.normality.normal, "skewness": s.normality.skewness,
                "excess_kurtosis": s.normality.excess_kurtosis,
                "normality_diagnostic": s.normality.diagnostic,
                "histogram": {"counts": list(s.histogram_counts), "edges": list(s.histogram_edges)},
            }
            if include_samples:
                out[name]["samples"] = self.samples[name].tolist()
        return out


def run_uniforms(seed: int, start: int, count: int, width: int) -> np.ndarray:
    """Uniform variates in (0, 1) for runs ``start .. start+count-1``.

    Row ``j`` depends only on ``(seed, start + j)``.
    """
    blocks = -(-width // 4)  # Philox emits 4 x 64 bits per counter step
    bg = np.random.Philox(key=int(seed))
    bg.advance(int(start) * blocks)
    raw = bg.random_raw(int(count) * blocks * 4).reshape(count, blocks * 4)[:, :width]
    return ((raw >> np.uint64(11)).astype(float) + 0.5) * 2.0 ** -53


def sample_position_offsets(rng: np.random.Generator, model: McErrorModel, n_devices: int) -> np.ndarray:
    """Planar ``(dx, dy)`` placement errors for ``n_devices`` devices.

    Uses the same inverse-CDF transform as the emulation pipeline.
    """
    return ndtri(rng.random((n_devices, 2))) * model.sigma_m


def _width(n: int) -> int:
    # source offsets (2N) | receiver offsets (2N) | distance errors (N) | octave errors (7N)
    return 12 * n


def emulate_batch(fld, path: MeasurementPath, model: McErrorModel, uniforms: np.ndarray,
                  threshold_dBA=DEFAULT_THRESHOLD_DBA) -> dict:
    """Vectorised emulation of ``len(uniforms)`` measurements.

    Returns arrays of D_2S, L_pAS4m and r_c keyed by SNQ name.
    """
    n = path.n
    runs = uniforms.shape[0]
    z = ndtri(uniforms[:, :5 * n])
    sigma = model.sigma_m
    src = z[:, :2 * n].reshape(runs, n, 2) * sigma
    if model.source_offset == "shared":
        src = np.broadcast_to(src[:, :1, :], (runs, n, 2))
    rcv = z[:, 2 * n:4 * n].reshape(runs, n, 2) * sigma
    tape = z[:, 4 * n:5 * n] * model.u_tape_m

    r = path.distances
    true_d = np.hypot(r + rcv[..., 0] - src[..., 0], rcv[..., 1] - src[..., 1])
    if model.couple_levels_to_position:
        if fld is None:
            raise ValueError("level coupling needs a field provider")
        levels = fld.levels_at(src, rcv)
    else:
        levels = np.broadcast_to(path.spectra, (runs, n, path.spectra.shape[1]))
    if model.octave_table is not None:
        octu = uniforms[:, 5 * n:12 * n].reshape(runs, n, 7)
        levels = levels + (2.0 * octu - 1.0) * SQRT3 * model.octave_table.as_array()

    with np.errstate(invalid="ignore", divide="ignore"):
        x = np.log2(true_d + tape)
    d2s, l4 = fit_decay(x, a_weighted(levels))
    return {"d2s": d2s, "lpas4m": l4, "rc": comfort_distance(d2s, l4, threshold_dBA)}


def emulate_measurement(fld, path: MeasurementPath, model: McErrorModel, seed: int = 0,
                        run_index: int = 0, threshold_dBA=DEFAULT_THRESHOLD_DBA) -> SnqSet:
    """One emulated measurement, identical to run ``run_index`` of ``run_mc``."""
    require_valid(path)
    u = run_uniforms(seed, run_index, 1, _width(path.n))
    out = emulate_batch(fld, path, model, u, threshold_dBA)
    return SnqSet(float(out["d2s"][0]), float(out["lpas4m"][0]), float(out["rc"][0]),
                  float(threshold_dBA))


def _run_range(fld, path, model, seed, start, count, workers, threshold_dBA):
    width = _width(path.n)

    def chunk(bounds):
        a, b = bounds
        return emulate_batch(fld, path, model, run_uniforms(seed, a, b - a, width), threshold_dBA)

    if workers == 1:
        return chunk((start, start + count))
    edges = np.linspace(start, start + count, workers + 1).astype(int)
    bounds = [(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(chunk, bounds))
    return {k: np.concatenate([p[k] for p in parts]) for k in SNQ_NAMES}


def check_normality(samples, max_abs_skew: float = 0.5, max_abs_excess_kurtosis: float = 1.0) -> NormalityCheck:
    """Moment-based normality check on at least 1000 samples."""
    samples = np.asarray(samples, dtype=float)
    samples = samples[np.isfinite(samples)]
    if samples.size < 1000:
        raise InsufficientSamples(f"need >= 1000 samples, got {samples.size}")
    if np.ptp(samples) == 0:
        return NormalityCheck(False, float("nan"), float("nan"), "degenerate variance: constant samples")
    skew = float(sps.skew(samples))
    kurt = float(sps.kurtosis(samples, fisher=True))
    normal = abs(skew) < max_abs_skew and abs(kurt) < max_abs_excess_kurtosis
    diag = "" if normal else f"skewness {skew:.3f}, excess kurtosis {kurt:.3f}"
    return NormalityCheck(normal, skew, kurt, diag)


def _stats(values: np.ndarray, bins: int) -> SnqStats:
    finite = values[np.isfinite(values)]
    counts, edges = np.histogram(finite, bins=bins)
    try:
        normality = check_normality(finite)
    except InsufficientSamples as exc:
        normality = NormalityCheck(False, float("nan"), float("nan"), str(exc))
    return SnqStats(
        mean=float(np.mean(finite)),
        std=float(np.std(finite)),
        histogram_counts=tuple(int(c) for c in counts),
        histogram_edges=tuple(float(e) for e in edges),
        normality=normality,
        n_invalid=int(values.size - finite.size),
    )


def _cumulative_u(samples: dict) -> dict:
    out = {}
    for name, parts in samples.items():
        v = np.concatenate(parts)
        out[name] = float(np.std(v[np.isfinite(v)]))
    return out


def run_mc(fld, path: MeasurementPath, model: McErrorModel | None = None, config: McConfig | None = None,
           threshold_dBA=DEFAULT_THRESHOLD_DBA) -> McResult:
    """Repeat emulated measurements in batches until the uncertainties settle.

    Convergence is declared once adding a batch moves every cumulative
    standard deviation by less than the tolerance (dB for D_2S and L_pAS4m,
    metres for r_c), after at least ``min_batches`` batches. Otherwise a
    ``NotConverged`` warning is issued and the flagged result returned.
    """
    require_valid(path)
    model = model or McErrorModel()
    config = config or McConfig()
    tol = {"d2s": config.tol_level_db, "lpas4m": config.tol_level_db, "rc": config.tol_rc_m}

    samples = {k: [] for k in SNQ_NAMES}
    prev = None
    converged = False
    batches = 0
    for b in range(config.max_batches):
        out = _run_range(fld, path, model, config.seed, b * config.batch_size, config.batch_size,
                         config.workers, threshold_dBA)
        for k in SNQ_NAMES:
            samples[k].append(out[k])
        batches = b + 1
        cur = _cumulative_u(samples)
        log.debug("batch %d: %s", batches, cur)
        if prev is not None and batches >= config.min_batches:
            if all(abs(cur[k] - prev[k]) < tol[k] for k in SNQ_NAMES):
                converged = True
                break
        prev = cur

    merged = {k: np.concatenate(v) for k, v in samples.items()}
    runs = batches * config.batch_size
    if not converged:
        warnings.warn(f"Monte-Carlo estimate not converged after {runs} runs", NotConverged, stacklevel=2)
    try:
        nominal = snq_from_levels(path.distances, path.levels_dBA, threshold_dBA)
    except ValueError:
        nominal = None
    return McResult(
        stats={k: _stats(v, config.histogram_bins) for k, v in merged.items()},
        runs_used=runs,
        converged=converged,
        nominal=nominal,
        samples=merged,
    )
