"""Closed-form measurement uncertainty of the spatial-decay SNQs.

Two evaluations are provided. ``propagate_jacobian`` applies the first-order
propagation law directly to the partial derivatives of the regression.
``analytic_budget`` evaluates the expanded expressions written with
population covariances over the positions of the path, in either covariance
or raw-summation form. The two must agree; the test suite holds them to it.

Errors on levels and distances are assumed independent. The level error
caused by positioning the apparatus is neglected here by construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from .core import (
    A_WEIGHTING_DB,
    DEFAULT_THRESHOLD_DBA,
    DEFAULT_ZERO_DECAY_EPS,
    LN2,
    N_OCTAVES,
    SNQ_NAMES,
    MeasurementPath,
    OctaveSpectrum,
    SnqSet,
    as_float_array,
    require_valid,
    snq_from_levels,
)

#: Class 1 sound level meter tolerances per octave band, dB.
TABLE1_U_OCT_DB = (0.9, 0.9, 0.8, 0.8, 0.9, 1.2, 1.8)


@dataclass(frozen=True)
class OctaveUncertaintyTable:
    u_oct: tuple = TABLE1_U_OCT_DB

    def __post_init__(self):
        values = tuple(float(u) for u in self.u_oct)
        if len(values) != N_OCTAVES:
            raise ValueError(f"expected {N_OCTAVES} octave uncertainties, got {len(values)}")
        if not all(u > 0 and math.isfinite(u) for u in values):
            raise ValueError("octave uncertainties must be finite and > 0")
        object.__setattr__(self, "u_oct", values)

    def as_array(self) -> np.ndarray:
        return np.array(self.u_oct)

    def scaled(self, factor: float) -> "OctaveUncertaintyTable":
        return OctaveUncertaintyTable(tuple(u * factor for u in self.u_oct))


@dataclass(frozen=True)
class DistanceErrorModel:
    """Distance uncertainty from the measuring device plus apparatus placement.

    The source and the microphone each land, 95 % of the time, inside a
    square of side ``square_side_m`` centred on the nominal position, with
    independent normal errors along both horizontal axes. The probability of
    falling in the square is the product of the two per-axis probabilities,
    so each axis covers ``sqrt(square_coverage)``. Two independently placed
    devices change the distance between them by ``sqrt(2) * sigma_axis``.
    """

    u_tape_m: float = 0.05
    square_side_m: float = 0.20
    square_coverage: float = 0.95
    include_positioning: bool = True

    def __post_init__(self):
        if self.u_tape_m < 0:
            raise ValueError("u_tape_m must be >= 0")
        if self.square_side_m <= 0:
            raise ValueError("square_side_m must be > 0")
        if not 0 < self.square_coverage < 1:
            raise ValueError("square_coverage must lie in (0, 1)")

    @property
    def sigma_axis_m(self) -> float:
        if not self.include_positioning:
            return 0.0
        per_axis = math.sqrt(self.square_coverage)
        z = NormalDist().inv_cdf(0.5 * (1.0 + per_axis))
        return 0.5 * self.square_side_m / z

    @property
    def u_pos_m(self) -> float:
        return math.sqrt(2.0) * self.sigma_axis_m

    @property
    def u_r_total_m(self) -> float:
        return math.hypot(self.u_tape_m, self.u_pos_m)


@dataclass(frozen=True)
class SnqPartials:
    """Partial derivatives of (D_2S, L_pAS4m, r_c) w.r.t. levels and distances."""

    snq: SnqSet
    d2s_dL: np.ndarray
    d2s_dr: np.ndarray
    lpas4m_dL: np.ndarray
    lpas4m_dr: np.ndarray
    rc_dL: np.ndarray
    rc_dr: np.ndarray

    def matrix(self) -> np.ndarray:
        """3 x 2N Jacobian, columns ordered (L_1..L_N, r_1..r_N)."""
        return np.array([
            np.concatenate([self.d2s_dL, self.d2s_dr]),
            np.concatenate([self.lpas4m_dL, self.lpas4m_dr]),
            np.concatenate([self.rc_dL, self.rc_dr]),
        ])


@dataclass(frozen=True)
class UncertaintyBudget:
    """Standard uncertainties of the SNQs, split by input type.

    ``var_<snq>_L`` is the level-driven variance and ``var_<snq>_r`` the
    distance-driven one. ``terms`` holds the named intermediates (the slope
    cross sums, the D_2S/L_pAS4m covariances and the position covariances);
    ``expansion_terms`` holds, per SNQ, the additive terms of
    the expanded expressions so their relative weight can be inspected.
    """

    snq: SnqSet
    var_d2s_L: float
    var_d2s_r: float
    var_lpas4m_L: float
    var_lpas4m_r: float
    var_rc_L: float
    var_rc_r: float
    method: str = "jacobian"
    terms: dict = field(default_factory=dict, compare=False)
    expansion_terms: dict = field(default_factory=dict, compare=False)

    def variance(self, name: str) -> float:
        return max(getattr(self, f"var_{name}_L") + getattr(self, f"var_{name}_r"), 0.0)

    def u(self, name: str) -> float:
        return math.sqrt(self.variance(name))

    def split(self, name: str) -> tuple:
        """(level-driven, distance-driven) standard uncertainties."""
        return (math.sqrt(max(getattr(self, f"var_{name}_L"), 0.0)),
                math.sqrt(max(getattr(self, f"var_{name}_r"), 0.0)))

    @property
    def u_d2s(self) -> float:
        return self.u("d2s")

    @property
    def u_lpas4m(self) -> float:
        return self.u("lpas4m")

    @property
    def u_rc(self) -> float:
        return self.u("rc")

    def as_dict(self) -> dict:
        out = {"method": self.method}
        for name in SNQ_NAMES:
            u_L, u_r = self.split(name)
            out[name] = {"u": self.u(name), "u_L": u_L, "u_r": u_r,
                         "var_L": getattr(self, f"var_{name}_L"),
                         "var_r": getattr(self, f"var_{name}_r")}
        out["terms"] = {k: float(v) for k, v in self.terms.items()}
        out["expansion_terms"] = {k: [float(t) for t in v] for k, v in self.expansion_terms.items()}
        return out


def level_uncertainty(spectrum: OctaveSpectrum, table: OctaveUncertaintyTable | None = None) -> float:
    """Standard uncertainty of the A-weighted level from per-band uncertainties.

    Each band contributes in proportion to its share of the A-weighted energy.
    """
    table = table or OctaveUncertaintyTable()
    return float(level_uncertainty_array(spectrum.as_array(), table))


def level_uncertainty_array(levels, table: OctaveUncertaintyTable) -> np.ndarray:
    weighted = np.asarray(levels, dtype=float) + A_WEIGHTING_DB
    peak = np.max(weighted, axis=-1, keepdims=True)
    energy = 10.0 ** ((weighted - peak) / 10.0)
    share = energy / energy.sum(axis=-1, keepdims=True)
    return np.sqrt(np.sum((share * table.as_array()) ** 2, axis=-1))


def level_uncertainties(path: MeasurementPath, table: OctaveUncertaintyTable | None = None) -> np.ndarray:
    """Per-position uncertainty of the A-weighted level, each from its own spectrum."""
    table = table or OctaveUncertaintyTable()
    return level_uncertainty_array(path.spectra, table)


def alpha(path: MeasurementPath, d2s: float) -> np.ndarray:
    """alpha_i = L_i + 2 * D_2S * log2(r_i)."""
    return alpha_from_levels(path.distances, path.levels_dBA, d2s)


def alpha_from_levels(distances_m, levels_dBA, d2s: float) -> np.ndarray:
    return np.asarray(levels_dBA, dtype=float) + 2.0 * d2s * np.log2(np.asarray(distances_m, dtype=float))


def partials_from_levels(distances_m, levels_dBA, threshold_dBA=DEFAULT_THRESHOLD_DBA,
                         zero_decay_eps=DEFAULT_ZERO_DECAY_EPS) -> SnqPartials:
    r = np.asarray(distances_m, dtype=float)
    levels = np.asarray(levels_dBA, dtype=float)
    snq = snq_from_levels(r, levels, threshold_dBA, zero_decay_eps)
    n = len(r)
    x = np.log2(r)
    n_var = n * np.mean((x - x.mean()) ** 2)
    d2s = snq.d2s_dBA
    a = alpha_from_levels(r, levels, d2s)
    mean_x4 = x.mean() - 2.0

    d2s_dL = -(x - x.mean()) / n_var
    d2s_dr = -(a - a.mean()) / (LN2 * r * n_var)
    lpas4m_dL = 1.0 / n + d2s_dL * mean_x4
    lpas4m_dr = d2s / (n * LN2 * r) + d2s_dr * mean_x4

    scale = LN2 * snq.rc_m / d2s
    g = math.log2(snq.rc_m / 4.0)
    rc_dL = scale * (lpas4m_dL - g * d2s_dL)
    rc_dr = scale * (lpas4m_dr - g * d2s_dr)
    return SnqPartials(snq, d2s_dL, d2s_dr, lpas4m_dL, lpas4m_dr, rc_dL, rc_dr)


def snq_partials(path: MeasurementPath, threshold_dBA=DEFAULT_THRESHOLD_DBA,
                 zero_decay_eps=DEFAULT_ZERO_DECAY_EPS) -> SnqPartials:
    require_valid(path)
    return partials_from_levels(path.distances, path.levels_dBA, threshold_dBA, zero_decay_eps)


def propagate_jacobian(path: MeasurementPath, u_L, u_r, threshold_dBA=DEFAULT_THRESHOLD_DBA) -> UncertaintyBudget:
    """First-order propagation straight from the partial derivatives.

    ``u_L`` and ``u_r`` are scalars or per-position arrays.
    """
    require_valid(path)
    return jacobian_from_levels(path.distances, path.levels_dBA, u_L, u_r, threshold_dBA)


def jacobian_from_levels(distances_m, levels_dBA, u_L, u_r,
                         threshold_dBA=DEFAULT_THRESHOLD_DBA) -> UncertaintyBudget:
    p = partials_from_levels(distances_m, levels_dBA, threshold_dBA)
    n = len(p.d2s_dL)
    u_L = as_float_array(u_L, n)
    u_r = as_float_array(u_r, n)
    return UncertaintyBudget(
        snq=p.snq,
        var_d2s_L=float(np.sum((p.d2s_dL * u_L) ** 2)),
        var_d2s_r=float(np.sum((p.d2s_dr * u_r) ** 2)),
        var_lpas4m_L=float(np.sum((p.lpas4m_dL * u_L) ** 2)),
        var_lpas4m_r=float(np.sum((p.lpas4m_dr * u_r) ** 2)),
        var_rc_L=float(np.sum((p.rc_dL * u_L) ** 2)),
        var_rc_r=float(np.sum((p.rc_dr * u_r) ** 2)),
        method="jacobian",
    )


def _cov(a, b) -> float:
    return float(np.mean((a - np.mean(a)) * (b - np.mean(b))))


def analytic_budget(path: MeasurementPath, u_L, dist_model: DistanceErrorModel | None = None,
                    threshold_dBA=DEFAULT_THRESHOLD_DBA, form: str = "covariance") -> UncertaintyBudget:
    """Expanded closed-form budget.

    Parameters
    ----------
    path : MeasurementPath
    u_L : float or array_like
        Per-position standard uncertainty of the A-weighted level.
    dist_model : DistanceErrorModel, optional
        Supplies the (homogeneous) distance uncertainty ``u_r_total_m``.
    form : {"covariance", "summation"}
        Covariance form or the raw sums it is derived from.
    """
    require_valid(path)
    dist_model = dist_model or DistanceErrorModel()
    return budget_from_levels(path.distances, path.levels_dBA, u_L, dist_model.u_r_total_m,
                              threshold_dBA, form)


def budget_from_levels(distances_m, levels_dBA, u_L, u_r: float,
                       threshold_dBA=DEFAULT_THRESHOLD_DBA, form: str = "covariance") -> UncertaintyBudget:
    if form == "covariance":
        fn = _covariance_form
    elif form == "summation":
        fn = _summation_form
    else:
        raise ValueError(f"unknown form {form!r}")
    r = np.asarray(distances_m, dtype=float)
    levels = np.asarray(levels_dBA, dtype=float)
    snq = snq_from_levels(r, levels, threshold_dBA)
    u_L = as_float_array(u_L, len(r))
    return fn(r, levels, u_L, float(u_r), snq)


def _covariance_form(r, levels, u_L, u_r, snq: SnqSet) -> UncertaintyBudget:
    n = len(r)
    x = np.log2(r)
    var_x = float(np.mean((x - x.mean()) ** 2))
    d2s = snq.d2s_dBA
    m = float(x.mean()) - 2.0
    u2 = u_L ** 2
    ur2 = u_r ** 2
    a = alpha_from_levels(r, levels, d2s)
    inv_r2 = 1.0 / r ** 2

    cov_x_dev_u2 = _cov(x, (x - x.mean()) * u2)
    cov_a_dev_r2 = _cov(a, (a - a.mean()) * inv_r2)
    cov_x_u2 = _cov(x, u2)
    cov_a_inv_r2 = _cov(a, inv_r2)

    var_d2s_L = cov_x_dev_u2 / (n * var_x ** 2)
    var_d2s_r = ur2 * cov_a_dev_r2 / (LN2 ** 2 * n * var_x ** 2)

    slope_level = -cov_x_u2 / var_x
    slope_dist = -cov_a_inv_r2 / (LN2 * var_x)

    l4_terms_L = (
        float(np.mean(u2)) / n,
        m ** 2 * var_d2s_L,
        -2.0 * m * cov_x_u2 / (n * var_x),
    )
    l4_terms_r = (
        d2s ** 2 * ur2 * float(np.mean(inv_r2)) / (n * LN2 ** 2),
        m ** 2 * var_d2s_r,
        -2.0 * d2s * ur2 * m * cov_a_inv_r2 / (n * LN2 ** 2 * var_x),
    )
    var_l4_L = sum(l4_terms_L)
    var_l4_r = sum(l4_terms_r)

    rc = snq.rc_m
    k2 = (LN2 * rc / d2s) ** 2
    g = math.log2(rc / 4.0)
    cov_dl_L = slope_level / n + m * var_d2s_L
    cov_dl_r = d2s * ur2 * slope_dist / (n * LN2) + m * var_d2s_r
    rc_terms_L = (
        k2 * var_l4_L,
        k2 * (g ** 2 - 2.0 * g * m) * var_d2s_L,
        k2 * 2.0 * g * cov_x_u2 / (n * var_x),
    )
    rc_terms_r = (
        k2 * var_l4_r,
        k2 * (g ** 2 - 2.0 * g * m) * var_d2s_r,
        k2 * 2.0 * g * d2s * ur2 * cov_a_inv_r2 / (n * LN2 ** 2 * var_x),
    )

    terms = {
        "sum_dD_dL_uL2": slope_level, "sum_dD_dr_over_r": slope_dist,
        "cov_d2s_lpas4m_L": cov_dl_L, "cov_d2s_lpas4m_r": cov_dl_r,
        "cov_log2r_dev_uL2": cov_x_dev_u2,
        "cov_alpha_dev_over_r2": cov_a_dev_r2,
        "cov_alpha_inv_r2": cov_a_inv_r2,
        "cov_log2r_uL2": cov_x_u2,
        "var_log2r": var_x,
        "mean_log2_r_over_4": m,
        "u_r": u_r,
    }
    expansion_terms = {
        "d2s": (var_d2s_L, var_d2s_r),
        "lpas4m": (l4_terms_L[0], l4_terms_r[0], l4_terms_L[1] + l4_terms_r[1],
                   l4_terms_L[2], l4_terms_r[2]),
        "rc": (rc_terms_L[0] + rc_terms_r[0], rc_terms_L[1] + rc_terms_r[1],
               rc_terms_L[2] + rc_terms_r[2]),
    }
    return UncertaintyBudget(
        snq=snq,
        var_d2s_L=var_d2s_L, var_d2s_r=var_d2s_r,
        var_lpas4m_L=var_l4_L, var_lpas4m_r=var_l4_r,
        var_rc_L=sum(rc_terms_L), var_rc_r=sum(rc_terms_r),
        method="covariance", terms=terms, expansion_terms=expansion_terms,
    )


def _summation_form(r, levels, u_L, u_r, snq: SnqSet) -> UncertaintyBudget:
    n = len(r)
    x = np.log2(r)
    sum_x = x.sum()
    n_var = (n * np.sum(x ** 2) - sum_x ** 2) / n  # N * Var(log2 r)
    d2s = snq.d2s_dBA
    m = np.sum(x - 2.0) / n
    a = alpha_from_levels(r, levels, d2s)

    dD_dL = -(n * x - sum_x) / (n * n_var)
    dD_dr = -(n * a - a.sum()) / (LN2 * r * n * n_var)

    var_d2s_L = np.sum((dD_dL * u_L) ** 2)
    var_d2s_r = np.sum((dD_dr * u_r) ** 2)

    slope_level = np.sum(dD_dL * u_L ** 2)
    slope_dist = np.sum(dD_dr / r)
    var_l4_L = np.sum(u_L ** 2) / n ** 2 + m ** 2 * var_d2s_L + 2.0 * m * slope_level / n
    var_l4_r = ((d2s * u_r / (n * LN2)) ** 2 * np.sum(1.0 / r ** 2)
                + m ** 2 * var_d2s_r + 2.0 * d2s * u_r ** 2 * m * slope_dist / (n * LN2))

    rc = snq.rc_m
    k2 = (LN2 * rc / d2s) ** 2
    g = math.log2(rc / 4.0)
    cov_dl_L = np.sum((1.0 / n + dD_dL * m) * dD_dL * u_L ** 2)
    cov_dl_r = np.sum((d2s / (n * LN2 * r) + dD_dr * m) * dD_dr * u_r ** 2)
    var_rc_L = k2 * (var_l4_L + g ** 2 * var_d2s_L - 2.0 * g * cov_dl_L)
    var_rc_r = k2 * (var_l4_r + g ** 2 * var_d2s_r - 2.0 * g * cov_dl_r)

    terms = {"sum_dD_dL_uL2": slope_level, "sum_dD_dr_over_r": slope_dist,
             "cov_d2s_lpas4m_L": cov_dl_L, "cov_d2s_lpas4m_r": cov_dl_r, "u_r": u_r}
    return UncertaintyBudget(
        snq=snq,
        var_d2s_L=float(var_d2s_L), var_d2s_r=float(var_d2s_r),
        var_lpas4m_L=float(var_l4_L), var_lpas4m_r=float(var_l4_r),
        var_rc_L=float(var_rc_L), var_rc_r=float(var_rc_r),
        method="summation", terms={k: float(v) for k, v in terms.items()},
    )


def round_up_tenth(value: float) -> float:
    """Round up to the next one-tenth, as usual when reporting uncertainties."""
    return math.ceil(round(value * 10.0, 9)) / 10.0
