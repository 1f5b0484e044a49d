"""Sound-field providers standing in for ray-traced office simulations.

Geometry convention: the nominal source sits at the origin and position i
of the path at ``(r_i, 0)``. Offsets are planar ``(dx, dy)`` displacements
in metres of the source or the receiver from their nominal locations.

Two providers share the ``levels_at`` interface:

* ``LogLinearField`` evaluates a closed-form decay at the actual
  source-receiver distance.
* ``GridField`` stores, per position and octave, levels on a 3 x 3 grid of
  source offsets times a 3 x 3 grid of receiver offsets (81 values), and
  interpolates bilinearly in each offset plane.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .core import (
    DEFAULT_THRESHOLD_DBA,
    N_OCTAVES,
    MeasurementPath,
    a_weighted,
    comfort_distance,
)
from .exceptions import FieldDomainError, InfeasibleSpec

#: Normal-effort speech spectrum at 1 m (ISO 3382-3), used as spectral shape.
SPEECH_SPECTRUM_DB = np.array([49.9, 54.3, 58.0, 52.0, 44.8, 38.8, 33.5])

GRID_PITCH_M = 0.10
GRID_NODES = 3

# Envelope of decay rates and 4 m levels spanned by the office generator.
D2S_RANGE_DBA = (3.4, 7.5)
LPAS4M_RANGE_DBA = (40.6, 51.9)


def default_geometry(n: int = 7, start_m: float = 2.0, step_doublings: float = 0.25) -> np.ndarray:
    """Log-spaced distances: ``start_m * 2**(k * step_doublings)``."""
    return start_m * np.exp2(step_doublings * np.arange(n))


def _distances(distances_m, source_offsets, receiver_offsets):
    """Actual distances for offsets shaped ``(..., 2)`` / ``(..., N, 2)``."""
    r = np.asarray(distances_m, dtype=float)
    src = np.asarray(source_offsets, dtype=float)
    rcv = np.asarray(receiver_offsets, dtype=float)
    if src.ndim == rcv.ndim - 1:
        src = src[..., None, :]
    dx = r + rcv[..., 0] - src[..., 0]
    dy = rcv[..., 1] - src[..., 1]
    return np.hypot(dx, dy)


@dataclass(frozen=True)
class LogLinearField:
    """level(r) = ref_4m - rate * log2(r / 4) + ripple, per octave band.

    ``ripple_db`` is a deterministic per-position offset, shape ``(N,)`` or
    ``(N, 7)``. Absent bands have ``ref_levels_4m_db = -inf``.
    """

    distances_m: tuple
    ref_levels_4m_db: tuple
    decay_db_per_doubling: tuple
    ripple_db: np.ndarray = field(default=None, compare=False)

    def __post_init__(self):
        r = tuple(float(v) for v in self.distances_m)
        ref = tuple(float(v) for v in self.ref_levels_4m_db)
        rate = tuple(float(v) for v in self.decay_db_per_doubling)
        if len(ref) != N_OCTAVES or len(rate) != N_OCTAVES:
            raise ValueError(f"expected {N_OCTAVES} reference levels and decay rates")
        if any(v < 0 for v in rate):
            raise ValueError("decay rates must be >= 0")
        if any(v <= 0 for v in r):
            raise ValueError("distances must be > 0")
        ripple = np.zeros((len(r), N_OCTAVES)) if self.ripple_db is None else np.asarray(self.ripple_db, float)
        if ripple.ndim == 1:
            ripple = np.repeat(ripple[:, None], N_OCTAVES, axis=1)
        if ripple.shape != (len(r), N_OCTAVES):
            raise ValueError(f"ripple must have shape ({len(r)},) or ({len(r)}, {N_OCTAVES})")
        ripple = ripple.copy()
        ripple.flags.writeable = False
        object.__setattr__(self, "distances_m", r)
        object.__setattr__(self, "ref_levels_4m_db", ref)
        object.__setattr__(self, "decay_db_per_doubling", rate)
        object.__setattr__(self, "ripple_db", ripple)

    @property
    def n_positions(self) -> int:
        return len(self.distances_m)

    def levels_at(self, source_offsets, receiver_offsets) -> np.ndarray:
        """Octave levels ``(..., N, 7)`` for source offsets ``(..., 2)`` or
        ``(..., N, 2)`` and receiver offsets ``(..., N, 2)``."""
        d = _distances(self.distances_m, source_offsets, receiver_offsets)
        if np.any(d <= 0):
            raise FieldDomainError("offsets bring source and receiver together")
        ref = np.array(self.ref_levels_4m_db)
        rate = np.array(self.decay_db_per_doubling)
        return ref - rate * np.log2(d / 4.0)[..., None] + self.ripple_db

    def level_at(self, position_index: int, source_offset=(0.0, 0.0), receiver_offset=(0.0, 0.0),
                 octave: int = 3) -> float:
        return _single_level(self, position_index, source_offset, receiver_offset, octave)

    def nominal_spectra(self) -> np.ndarray:
        zeros = np.zeros((self.n_positions, 2))
        return self.levels_at(np.zeros(2), zeros)

    def to_path(self, id: str = "path") -> MeasurementPath:
        return MeasurementPath.from_spectra(self.distances_m, self.nominal_spectra(), id=id)

    @classmethod
    def fit(cls, path: MeasurementPath) -> "LogLinearField":
        """Per-octave log-linear fit of a measured path, residuals kept as ripple.

        The field reproduces the measured spectra exactly at zero offset.
        Negative fitted rates are clipped to zero and absorbed in the ripple.
        """
        r = path.distances
        x4 = np.log2(r / 4.0)
        spectra = path.spectra
        ref = np.full(N_OCTAVES, -np.inf)
        rate = np.zeros(N_OCTAVES)
        ripple = np.zeros_like(spectra)
        for k in range(N_OCTAVES):
            col = spectra[:, k]
            if not np.all(np.isfinite(col)):
                continue
            slope, intercept = np.polyfit(x4, col, 1)
            rate[k] = max(-slope, 0.0)
            ref[k] = intercept if slope <= 0 else float(np.mean(col))
            ripple[:, k] = col - (ref[k] - rate[k] * x4)
        return cls(tuple(r), tuple(ref), tuple(rate), ripple)


@dataclass(frozen=True)
class GridField:
    """Levels sampled on source-offset x receiver-offset grids.

    ``levels_db`` has shape ``(N, 7, 3, 3, 3, 3)`` indexed
    ``[position, octave, source_ix, source_iy, receiver_ix, receiver_iy]``;
    node ``j`` sits at offset ``(j - 1) * pitch_m``. Queries outside the grid
    are clamped to its boundary when ``clamp`` is true and rejected otherwise.
    """

    distances_m: tuple
    levels_db: np.ndarray = field(compare=False)
    pitch_m: float = GRID_PITCH_M
    clamp: bool = True

    def __post_init__(self):
        r = tuple(float(v) for v in self.distances_m)
        levels = np.array(self.levels_db, dtype=float)
        expected = (len(r), N_OCTAVES) + (GRID_NODES,) * 4
        if levels.shape != expected:
            raise ValueError(f"grid levels must have shape {expected}, got {levels.shape}")
        levels.flags.writeable = False
        object.__setattr__(self, "distances_m", r)
        object.__setattr__(self, "levels_db", levels)

    @property
    def n_positions(self) -> int:
        return len(self.distances_m)

    @property
    def half_width_m(self) -> float:
        return self.pitch_m * (GRID_NODES - 1) / 2

    def _fractional_index(self, offsets):
        f = np.asarray(offsets, dtype=float) / self.pitch_m + (GRID_NODES - 1) / 2
        top = GRID_NODES - 1
        if self.clamp:
            f = np.clip(f, 0.0, top)
        elif np.any((f < -1e-12) | (f > top + 1e-12)):
            raise FieldDomainError(
                f"offset outside the +/-{self.half_width_m:g} m grid")
        else:
            f = np.clip(f, 0.0, top)
        base = np.minimum(np.floor(f), top - 1).astype(int)
        return base, f - base

    def levels_at(self, source_offsets, receiver_offsets) -> np.ndarray:
        """Octave levels ``(..., N, 7)``; see ``LogLinearField.levels_at``."""
        n = self.n_positions
        rcv = np.asarray(receiver_offsets, dtype=float)
        src = np.asarray(source_offsets, dtype=float)
        if src.ndim == rcv.ndim - 1:
            src = np.broadcast_to(src[..., None, :], rcv.shape)
        src, rcv = np.broadcast_arrays(src, rcv)
        if rcv.shape[-2] != n:
            raise ValueError(f"expected offsets for {n} positions")
        s_base, s_t = self._fractional_index(src)
        r_base, r_t = self._fractional_index(rcv)

        absent = ~np.isfinite(self.levels_db)
        table = np.where(absent, 0.0, self.levels_db)
        band_absent = absent.reshape(n, N_OCTAVES, -1).all(axis=-1)
        pos = np.arange(n)
        out = np.zeros(rcv.shape[:-1] + (N_OCTAVES,))
        for c in product((0, 1), repeat=4):
            w = ((s_t[..., 0] if c[0] else 1 - s_t[..., 0])
                 * (s_t[..., 1] if c[1] else 1 - s_t[..., 1])
                 * (r_t[..., 0] if c[2] else 1 - r_t[..., 0])
                 * (r_t[..., 1] if c[3] else 1 - r_t[..., 1]))
            vals = table[pos, :, s_base[..., 0] + c[0], s_base[..., 1] + c[1],
                         r_base[..., 0] + c[2], r_base[..., 1] + c[3]]
            out += w[..., None] * vals
        return np.where(band_absent, -np.inf, out)

    def level_at(self, position_index: int, source_offset=(0.0, 0.0), receiver_offset=(0.0, 0.0),
                 octave: int = 3) -> float:
        return _single_level(self, position_index, source_offset, receiver_offset, octave)

    def nominal_spectra(self) -> np.ndarray:
        return self.levels_db[:, :, 1, 1, 1, 1].copy()

    def to_path(self, id: str = "path") -> MeasurementPath:
        return MeasurementPath.from_spectra(self.distances_m, self.nominal_spectra(), id=id)


def _single_level(fld, position_index, source_offset, receiver_offset, octave) -> float:
    n = fld.n_positions
    if not 0 <= position_index < n:
        raise IndexError(f"position index {position_index} out of range")
    src = np.zeros((n, 2))
    rcv = np.zeros((n, 2))
    src[position_index] = source_offset
    rcv[position_index] = receiver_offset
    return float(fld.levels_at(src, rcv)[position_index, octave])


def level_at(fld, position_index: int, source_offset, receiver_offset, octave: int) -> float:
    """Level of one octave band at one position for the given offsets."""
    return fld.level_at(position_index, source_offset, receiver_offset, octave)


@dataclass(frozen=True)
class LevelStep:
    """Level step added to grid nodes on one side of an offset plane.

    Nodes whose ``plane`` offset along ``axis`` has the sign of ``side``
    receive ``magnitude_db``; the centre line is left unchanged, so nominal
    levels are preserved.
    """

    position_index: int
    magnitude_db: float
    plane: str = "source"
    axis: int = 0
    side: int = 1

    def __post_init__(self):
        if self.plane not in ("source", "receiver"):
            raise ValueError("plane must be 'source' or 'receiver'")
        if self.axis not in (0, 1) or self.side not in (-1, 1):
            raise ValueError("axis must be 0 or 1 and side +1 or -1")


def near_source_gradients(magnitude_db: float, positions=(0, 1, 2)) -> tuple:
    """Steps on the source plane at the positions closest to the source,
    alternating in side, mimicking a screen edge that shadows the source
    for some placements only."""
    return tuple(LevelStep(i, magnitude_db, "source", axis=1, side=1 if j % 2 == 0 else -1)
                 for j, i in enumerate(positions))


def grid_offsets(pitch_m: float = GRID_PITCH_M) -> np.ndarray:
    return (np.arange(GRID_NODES) - (GRID_NODES - 1) / 2) * pitch_m


def grid_from_loglinear(fld: LogLinearField, perturbations=(), pitch_m: float = GRID_PITCH_M,
                        clamp: bool = True) -> GridField:
    """Sample a log-linear field at all 81 source/receiver offset pairs per position."""
    n = fld.n_positions
    nodes = grid_offsets(pitch_m)
    levels = np.empty((n, N_OCTAVES) + (GRID_NODES,) * 4)
    for (i, sx), (j, sy), (k, rx), (l, ry) in product(enumerate(nodes), repeat=4):
        src = np.array([sx, sy])
        rcv = np.tile([rx, ry], (n, 1))
        levels[:, :, i, j, k, l] = fld.levels_at(src, rcv)
    for step in perturbations:
        if not 0 <= step.position_index < n:
            raise IndexError(f"step position {step.position_index} out of range")
        sign = np.sign(nodes) == step.side
        idx = [slice(None)] * 4
        idx[(0 if step.plane == "source" else 2) + step.axis] = sign
        view = levels[step.position_index]
        view[(slice(None),) + tuple(idx)] += step.magnitude_db
    return GridField(fld.distances_m, levels, pitch_m, clamp)


@dataclass(frozen=True)
class OfficeConfigSpec:
    """Target description for one synthetic office configuration.

    ``label`` follows the three-digit scheme: screen height class 1-4
    (190, 150, 130, 110 cm), ceiling class 1-2 (class A, class C) and screen
    class 1-2. Labels map onto default targets inside the D_2S / L_pAS4m
    envelope; explicit ``d2s_dBA`` / ``lpas4m_dBA`` override them. An
    optional ``rc_m`` must be consistent with the other two targets.
    """

    label: str | None = None
    d2s_dBA: float | None = None
    lpas4m_dBA: float | None = None
    rc_m: float | None = None
    ripple_db: float = 0.0
    threshold_dBA: float = DEFAULT_THRESHOLD_DBA
    rc_rel_tol: float = 1e-6

    def __post_init__(self):
        if self.label is not None:
            parse_label(self.label)

    def targets(self) -> tuple:
        """Resolved ``(d2s, lpas4m, rc)``."""
        d2s, l4 = self.d2s_dBA, self.lpas4m_dBA
        if self.label is not None:
            ld, ll = label_targets(self.label)
            d2s = ld if d2s is None else d2s
            l4 = ll if l4 is None else l4
        thr = self.threshold_dBA
        if self.rc_m is not None:
            if self.rc_m <= 0:
                raise InfeasibleSpec("target r_c must be > 0")
            log_ratio = math.log2(self.rc_m / 4.0)
            if d2s is None and l4 is not None:
                if log_ratio == 0:
                    raise InfeasibleSpec("r_c = 4 m does not determine D_2S")
                d2s = (l4 - thr) / log_ratio
            elif l4 is None and d2s is not None:
                l4 = thr + d2s * log_ratio
        if d2s is None or l4 is None:
            raise InfeasibleSpec("spec needs a label or two of (d2s, lpas4m, rc)")
        if not d2s > 0:
            raise InfeasibleSpec(f"D_2S must be > 0 for a decaying field, got {d2s}")
        rc = float(comfort_distance(d2s, l4, thr))
        if self.rc_m is not None and abs(rc - self.rc_m) > self.rc_rel_tol * self.rc_m:
            raise InfeasibleSpec(
                f"r_c = {self.rc_m} m is inconsistent with D_2S = {d2s}, L_pAS4m = {l4} "
                f"(which give {rc:.4f} m)")
        return float(d2s), float(l4), rc


def parse_label(label: str) -> tuple:
    label = str(label)
    if len(label) != 3 or not label.isdigit():
        raise ValueError(f"configuration label must be three digits, got {label!r}")
    h, c, s = (int(ch) for ch in label)
    if not (1 <= h <= 4 and c in (1, 2) and s in (1, 2)):
        raise ValueError(f"invalid configuration label {label!r}")
    return h, c, s


def all_labels() -> list:
    return [f"{h}{c}{s}" for h in range(1, 5) for c in (1, 2) for s in (1, 2)]


def label_targets(label: str) -> tuple:
    """Default (D_2S, L_pAS4m) for a configuration label.

    Lower screens and lower-class materials reduce the decay and raise the
    level at 4 m; screen height weighs most on the decay, ceiling class on
    the level. Configuration 111 sits at the best corner, 422 at the worst.
    """
    h, c, s = parse_label(label)
    hh = (h - 1) / 3
    bad_decay = 0.60 * hh + 0.25 * (s - 1) + 0.15 * (c - 1)
    bad_level = 0.60 * (c - 1) + 0.25 * hh + 0.15 * (s - 1)
    d_lo, d_hi = D2S_RANGE_DBA
    l_lo, l_hi = LPAS4M_RANGE_DBA
    return d_hi - (d_hi - d_lo) * bad_decay, l_lo + (l_hi - l_lo) * bad_level


def ripple_pattern(distances_m, amplitude_db: float) -> np.ndarray:
    """Deterministic ripple orthogonal to the regression basis (1, log2 r).

    Adding it to every octave leaves the fitted D_2S and L_pAS4m unchanged
    while giving non-zero residuals.
    """
    x = np.log2(np.asarray(distances_m, dtype=float))
    n = len(x)
    if amplitude_db == 0 or n < 3:
        return np.zeros(n)
    raw = np.cos(np.pi * np.arange(n)) + 0.5 * np.sin(2.1 * np.arange(n))
    basis = np.column_stack([np.ones(n), x])
    coef, *_ = np.linalg.lstsq(basis, raw, rcond=None)
    resid = raw - basis @ coef
    return amplitude_db * resid / np.max(np.abs(resid))


def synth_office(spec: OfficeConfigSpec, distances_m=None, id: str = "path"):
    """Nominal measurement path and matching log-linear field for a spec.

    All octaves decay at the target rate, so the A-weighted aggregate decays
    at that rate too and ``compute_snq`` on the returned path reproduces the
    targets.
    """
    d2s, l4, _ = spec.targets()
    r = default_geometry() if distances_m is None else np.asarray(distances_m, dtype=float)
    shape = SPEECH_SPECTRUM_DB - float(a_weighted(SPEECH_SPECTRUM_DB))
    ref = shape + l4
    fld = LogLinearField(tuple(r), tuple(ref), (d2s,) * N_OCTAVES, ripple_pattern(r, spec.ripple_db))
    return fld.to_path(id), fld
