"""Measurement data types and the spatial-decay regression.

Levels along a measurement path are regressed against log2 of the distance
to the source. The decay per doubling of distance (D_2S), the level of the
fitted line at 4 m (L_pAS4m) and the comfort distance r_c, where the fitted
line crosses a threshold (45 dB(A) by default), follow from the fit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import DegenerateGeometry, ValidationError, ZeroDecay

OCTAVE_CENTRES_HZ = (125, 250, 500, 1000, 2000, 4000, 8000)
N_OCTAVES = len(OCTAVE_CENTRES_HZ)

# IEC 61672-1 A-weighting at the octave centre frequencies.
A_WEIGHTING_DB = np.array([-16.1, -8.6, -3.2, 0.0, 1.2, 1.0, -1.1])

LN2 = math.log(2.0)
DEFAULT_THRESHOLD_DBA = 45.0
DEFAULT_ZERO_DECAY_EPS = 1e-6
MIN_POSITIONS = 3
RECOMMENDED_POSITIONS = 4

#: Marker for an octave band that was not measured.
ABSENT = None

SNQ_NAMES = ("d2s", "lpas4m", "rc")


@dataclass(frozen=True)
class OctaveSpectrum:
    """Seven octave-band levels in dB, 125 Hz to 8 kHz.

    A band may be ``ABSENT`` (``None``); it then contributes nothing to the
    A-weighted energetic sum.
    """

    levels: tuple

    def __post_init__(self):
        levels = tuple(self.levels)
        if len(levels) != N_OCTAVES:
            raise ValueError(f"expected {N_OCTAVES} octave bands, got {len(levels)}")
        clean = []
        for value in levels:
            if value is ABSENT:
                clean.append(ABSENT)
                continue
            value = float(value)
            if not math.isfinite(value):
                raise ValueError(f"octave level must be finite, got {value!r}")
            clean.append(value)
        if all(v is ABSENT for v in clean):
            raise ValueError("spectrum has no measured band")
        object.__setattr__(self, "levels", tuple(clean))

    @classmethod
    def from_array(cls, values) -> "OctaveSpectrum":
        """Build from an array where ``-inf`` or ``nan`` mark absent bands."""
        out = []
        for v in np.asarray(values, dtype=float):
            out.append(float(v) if math.isfinite(v) else ABSENT)
        return cls(tuple(out))

    @classmethod
    def from_a_weighted(cls, level_dBA: float) -> "OctaveSpectrum":
        """Spectrum holding only the 1 kHz band, so its A-weighted level is ``level_dBA``."""
        levels = [ABSENT] * N_OCTAVES
        levels[OCTAVE_CENTRES_HZ.index(1000)] = float(level_dBA)
        return cls(tuple(levels))

    def as_array(self) -> np.ndarray:
        """Levels as floats, ``-inf`` for absent bands."""
        return np.array([-np.inf if v is ABSENT else v for v in self.levels])

    @property
    def a_weighted(self) -> float:
        return a_weighted_level(self)


@dataclass(frozen=True)
class MeasurementPosition:
    distance_m: float
    spectrum: OctaveSpectrum
    id: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "distance_m", float(self.distance_m))


@dataclass(frozen=True)
class MeasurementPath:
    """Ordered positions along a line from the source.

    Construction does not enforce the path invariants; ``validate_path``
    reports them and every computation rejects invalid paths.
    """

    id: str
    positions: tuple

    def __post_init__(self):
        object.__setattr__(self, "positions", tuple(self.positions))
        object.__setattr__(self, "id", str(self.id))

    @classmethod
    def from_levels(cls, distances_m, levels_dBA, id: str = "path") -> "MeasurementPath":
        """Path from A-weighted levels, each stored as a 1 kHz-only spectrum."""
        distances_m = list(distances_m)
        levels_dBA = list(levels_dBA)
        if len(distances_m) != len(levels_dBA):
            raise ValueError("distances and levels differ in length")
        positions = [
            MeasurementPosition(r, OctaveSpectrum.from_a_weighted(level), id=str(i + 1))
            for i, (r, level) in enumerate(zip(distances_m, levels_dBA))
        ]
        return cls(id, positions)

    @classmethod
    def from_spectra(cls, distances_m, spectra, id: str = "path") -> "MeasurementPath":
        """Path from an ``(N, 7)`` array (or sequence) of octave levels."""
        positions = []
        for i, (r, row) in enumerate(zip(distances_m, spectra)):
            spec = row if isinstance(row, OctaveSpectrum) else OctaveSpectrum.from_array(row)
            positions.append(MeasurementPosition(r, spec, id=str(i + 1)))
        return cls(id, positions)

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def distances(self) -> np.ndarray:
        return np.array([p.distance_m for p in self.positions])

    @property
    def spectra(self) -> np.ndarray:
        """``(N, 7)`` octave levels, ``-inf`` for absent bands."""
        return np.array([p.spectrum.as_array() for p in self.positions]).reshape(-1, N_OCTAVES)

    @property
    def levels_dBA(self) -> np.ndarray:
        return a_weighted(self.spectra)

    def repeated(self, k: int) -> "MeasurementPath":
        """Path made of ``k`` consecutive copies of every position."""
        positions = [p for p in self.positions for _ in range(k)]
        return MeasurementPath(self.id, positions)


@dataclass(frozen=True)
class MeasurementArea:
    """Measurement paths belonging to one acoustic area."""

    id: str
    paths: tuple

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))


@dataclass(frozen=True)
class SnqSet:
    d2s_dBA: float
    lpas4m_dBA: float
    rc_m: float
    threshold_dBA: float = DEFAULT_THRESHOLD_DBA
    residuals_dBA: tuple = field(default=(), compare=False)

    def as_dict(self) -> dict:
        return {"d2s": self.d2s_dBA, "lpas4m": self.lpas4m_dBA, "rc": self.rc_m}


@dataclass(frozen=True)
class RegressionStats:
    """Population moments of the regression abscissa over one path."""

    x: np.ndarray
    mean_x: float
    var_x: float
    mean_log2_r_over_4: float
    mean_sq_log2_r_over_4: float
    mean_inv_r2: float

    @property
    def n(self) -> int:
        return len(self.x)


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" or "warning"
    code: str
    message: str

    def __str__(self):
        return f"{self.severity}[{self.code}]: {self.message}"


def a_weighted(levels) -> np.ndarray:
    """Energetic A-weighted sum over the last axis of an ``(..., 7)`` array.

    ``-inf`` entries are absent bands.
    """
    levels = np.asarray(levels, dtype=float)
    weighted = levels + A_WEIGHTING_DB
    peak = np.max(weighted, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore"):
        total = np.sum(10.0 ** ((weighted - peak) / 10.0), axis=-1)
    return 10.0 * np.log10(total) + peak[..., 0]


def a_weighted_level(spectrum: OctaveSpectrum) -> float:
    """A-weighted level in dB(A) of one octave spectrum."""
    return float(a_weighted(spectrum.as_array()))


def fit_decay(x, levels):
    """Least-squares decay over the last axis.

    Parameters
    ----------
    x : array_like
        log2 of the distances, shape ``(..., N)``.
    levels : array_like
        A-weighted levels, broadcastable against ``x``.

    Returns
    -------
    d2s, lpas4m : ndarray
        Negated slope per doubling and the fitted level at 4 m.
    """
    x = np.asarray(x, dtype=float)
    levels = np.asarray(levels, dtype=float)
    x, levels = np.broadcast_arrays(x, levels)
    mean_x = x.mean(axis=-1, keepdims=True)
    mean_l = levels.mean(axis=-1, keepdims=True)
    dx = x - mean_x
    with np.errstate(invalid="ignore", divide="ignore"):
        d2s = -np.sum(dx * (levels - mean_l), axis=-1) / np.sum(dx * dx, axis=-1)
    lpas4m = mean_l[..., 0] + d2s * (mean_x[..., 0] - 2.0)
    return d2s, lpas4m


def comfort_distance(d2s, lpas4m, threshold_dBA=DEFAULT_THRESHOLD_DBA):
    """Distance where the fitted line reaches the threshold: 4 * 2**((L4 - thr) / D)."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return 4.0 * np.exp2((np.asarray(lpas4m) - threshold_dBA) / np.asarray(d2s))


def snq_from_levels(distances_m, levels_dBA, threshold_dBA=DEFAULT_THRESHOLD_DBA,
                    zero_decay_eps=DEFAULT_ZERO_DECAY_EPS) -> SnqSet:
    """SNQs from raw distances and A-weighted levels."""
    r = np.asarray(distances_m, dtype=float)
    levels = np.asarray(levels_dBA, dtype=float)
    x = np.log2(r)
    if np.ptp(x) == 0.0:
        raise DegenerateGeometry("all distances are equal; log2(r) has zero variance")
    d2s, lpas4m = fit_decay(x, levels)
    d2s, lpas4m = float(d2s), float(lpas4m)
    if abs(d2s) < zero_decay_eps:
        raise ZeroDecay(f"|D_2S| = {abs(d2s):.3g} dB(A) is below {zero_decay_eps:g}")
    rc = float(comfort_distance(d2s, lpas4m, threshold_dBA))
    residuals = levels - (lpas4m - d2s * (x - 2.0))
    return SnqSet(d2s, lpas4m, rc, float(threshold_dBA), tuple(residuals.tolist()))


def compute_snq(path: MeasurementPath, threshold_dBA=DEFAULT_THRESHOLD_DBA,
                zero_decay_eps=DEFAULT_ZERO_DECAY_EPS) -> SnqSet:
    """D_2S, L_pAS4m and r_c of a measurement path.

    Raises ``DegenerateGeometry`` when all distances coincide, ``ZeroDecay``
    when the fitted decay is too flat for r_c, and ``ValidationError`` for any
    other invariant violation reported by ``validate_path``.
    """
    require_valid(path)
    return snq_from_levels(path.distances, path.levels_dBA, threshold_dBA, zero_decay_eps)


def regression_stats(path: MeasurementPath) -> RegressionStats:
    require_valid(path)
    return stats_from_distances(path.distances)


def stats_from_distances(distances_m) -> RegressionStats:
    r = np.asarray(distances_m, dtype=float)
    x = np.log2(r)
    var_x = float(np.mean((x - x.mean()) ** 2))
    if var_x == 0.0:
        raise DegenerateGeometry("all distances are equal; log2(r) has zero variance")
    x4 = x - 2.0
    return RegressionStats(
        x=x,
        mean_x=float(x.mean()),
        var_x=var_x,
        mean_log2_r_over_4=float(x4.mean()),
        mean_sq_log2_r_over_4=float(np.mean(x4 ** 2)),
        mean_inv_r2=float(np.mean(1.0 / r ** 2)),
    )


def validate_path(path: MeasurementPath) -> list:
    """Structured diagnostics for a path; empty when nothing is wrong.

    Errors block computation, warnings do not.
    """
    diags = []
    n = len(path.positions)
    if n < MIN_POSITIONS:
        diags.append(Diagnostic(
            "error", "insufficient-positions",
            f"insufficient positions: {n} < {MIN_POSITIONS}"))
    elif n < RECOMMENDED_POSITIONS:
        diags.append(Diagnostic(
            "warning", "few-positions",
            f"only {n} positions; uncertainties will be large"))

    distances = [p.distance_m for p in path.positions]
    bad = [i for i, r in enumerate(distances) if not (math.isfinite(r) and r > 0)]
    for i in bad:
        diags.append(Diagnostic(
            "error", "non-positive-distance",
            f"non-positive distance at position {i + 1}: {distances[i]!r} m"))
    good = [r for i, r in enumerate(distances) if i not in bad]
    if n >= 1 and not bad and len(set(np.log2(good).tolist())) < 2:
        diags.append(Diagnostic(
            "error", "zero-abscissa-variance",
            "zero abscissa variance: fewer than 2 distinct distances"))
    if not bad and any(b <= a for a, b in zip(distances, distances[1:])):
        diags.append(Diagnostic(
            "warning", "non-monotone-distances",
            "distances are not strictly increasing along the path"))

    ids = [p.id for p in path.positions if p.id is not None]
    if len(ids) != len(set(ids)):
        diags.append(Diagnostic("warning", "duplicate-position-id",
                                "position ids are not unique"))
    return diags


def require_valid(path: MeasurementPath) -> list:
    """Raise on error diagnostics; return the warnings."""
    diags = validate_path(path)
    errors = [d for d in diags if d.severity == "error"]
    if errors:
        if all(d.code == "zero-abscissa-variance" for d in errors):
            raise DegenerateGeometry(errors[0].message)
        raise ValidationError(
            f"path {path.id!r}: " + "; ".join(d.message for d in errors), errors)
    return diags


def as_float_array(values: Sequence[float] | float, n: int) -> np.ndarray:
    """Broadcast a scalar or length-``n`` sequence to a float array."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(f"expected {n} values, got shape {arr.shape}")
    return arr
