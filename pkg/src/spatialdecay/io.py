"""Measurement, field, configuration and report files.

Measurement files (format_version 1)
------------------------------------
CSV: optional ``# key: value`` metadata lines (``format_version``,
``area_id``), a header ``path_id,position_id,distance_m`` followed by the
seven octave-band columns (125 Hz .. 8 kHz), then one row per position.
An empty band cell marks an unmeasured band.

JSON::

    {"format_version": 1, "area_id": "office",
     "paths": [{"id": "P1", "positions": [
         {"id": "1", "distance_m": 2.0, "levels_db": [l125, ..., l8000]}]}]}

``null`` marks an unmeasured band.

Field files are JSON with ``"kind": "loglinear"`` or ``"kind": "grid"``. A
grid stores, per position and octave, a 9 x 9 matrix: row = source node,
column = receiver node, node index ``3 * ix + iy`` with ``ix`` along the
path axis and offsets ``(index - 1) * pitch_m``.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .analytic import DistanceErrorModel, OctaveUncertaintyTable
from .core import (
    N_OCTAVES,
    OCTAVE_CENTRES_HZ,
    MeasurementArea,
    MeasurementPath,
    MeasurementPosition,
    OctaveSpectrum,
    validate_path,
)
from .exceptions import ParseError, ValidationError
from .fields import GRID_NODES, GridField, LogLinearField
from .montecarlo import McConfig, McErrorModel

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
ID_COLUMNS = ("path_id", "position_id", "distance_m")
BAND_COLUMNS = tuple(f"L{f}" for f in OCTAVE_CENTRES_HZ)


def _float(text, location):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ParseError(f"not a number: {text!r}", location) from None
    if not math.isfinite(value):
        raise ParseError(f"not a finite number: {text!r}", location)
    return value


def _level(value, location):
    if value is None or (isinstance(value, str) and value.strip() == ""):
        return None
    return _float(value, location)


def _check_version(value, location):
    try:
        version = int(value)
    except (TypeError, ValueError):
        raise ParseError(f"bad format_version {value!r}", location) from None
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported format_version {version}", location)


def _spectrum(levels, location):
    try:
        return OctaveSpectrum(tuple(levels))
    except ValueError as exc:
        raise ParseError(str(exc), location) from None


def parse_measurement_file(text: str, fmt: str | None = None) -> MeasurementArea:
    """Parse and validate a CSV or JSON measurement file.

    Raises ``ParseError`` for malformed content and ``ValidationError`` for
    well-formed data breaking a path invariant. Warnings are logged.
    """
    if fmt is None:
        fmt = "json" if text.lstrip().startswith("{") else "csv"
    if fmt == "json":
        area = _parse_json(text)
    elif fmt == "csv":
        area = _parse_csv(text)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    validate_area(area)
    return area


def validate_area(area: MeasurementArea) -> list:
    """Raise ``ValidationError`` on any error diagnostic; return the warnings."""
    errors, warns = [], []
    ids = [p.id for p in area.paths]
    if len(ids) != len(set(ids)):
        raise ValidationError("path ids are not unique within the area")
    for path in area.paths:
        pos_ids = [p.id for p in path.positions]
        if len(pos_ids) != len(set(pos_ids)):
            errors.append(f"path {path.id!r}: position ids are not unique")
        for d in validate_path(path):
            (errors if d.severity == "error" else warns).append(f"path {path.id!r}: {d.message}")
    for w in warns:
        log.warning(w)
    if errors:
        raise ValidationError("; ".join(errors), errors)
    return warns


def _parse_csv(text: str) -> MeasurementArea:
    meta = {}
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            key, sep, value = stripped[1:].partition(":")
            if sep:
                meta[key.strip()] = value.strip()
            continue
        rows.append((lineno, line))
    if "format_version" in meta:
        _check_version(meta["format_version"], "format_version")
    if not rows:
        raise ParseError("no header row", "line 1")

    head_no, head = rows[0]
    header = [h.strip() for h in next(csv.reader([head]))]
    if tuple(header[:3]) != ID_COLUMNS:
        raise ParseError(f"header must start with {','.join(ID_COLUMNS)}", f"line {head_no}")
    n_bands = len(header) - 3
    if n_bands != N_OCTAVES:
        raise ParseError(f"expected {N_OCTAVES} octave bands, got {n_bands}", f"line {head_no}")

    paths: dict = {}
    for lineno, line in rows[1:]:
        cells = next(csv.reader([line]))
        if len(cells) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(cells)}", f"line {lineno}")
        path_id, pos_id = cells[0].strip(), cells[1].strip()
        if not path_id:
            raise ParseError("empty path_id", f"line {lineno}")
        r = _float(cells[2], f"line {lineno}, distance_m")
        levels = [_level(c, f"line {lineno}, {header[3 + k]}") for k, c in enumerate(cells[3:])]
        spec = _spectrum(levels, f"line {lineno}")
        paths.setdefault(path_id, []).append(MeasurementPosition(r, spec, pos_id or None))
    if not paths:
        raise ParseError("no measurement rows", f"line {head_no}")
    return MeasurementArea(meta.get("area_id", "area"),
                           [MeasurementPath(pid, pos) for pid, pos in paths.items()])


def _parse_json(text: str) -> MeasurementArea:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno}, column {exc.colno}") from None
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object", "$")
    _check_version(doc.get("format_version", FORMAT_VERSION), "format_version")
    raw_paths = doc.get("paths")
    if not isinstance(raw_paths, list) or not raw_paths:
        raise ParseError("'paths' must be a non-empty list", "paths")
    paths = []
    for i, rp in enumerate(raw_paths):
        loc = f"paths[{i}]"
        if not isinstance(rp, dict) or "positions" not in rp:
            raise ParseError("path needs 'id' and 'positions'", loc)
        positions = []
        for j, pos in enumerate(rp["positions"]):
            ploc = f"{loc}.positions[{j}]"
            if not isinstance(pos, dict):
                raise ParseError("position must be an object", ploc)
            r = _float(pos.get("distance_m"), f"{ploc}.distance_m")
            levels = pos.get("levels_db")
            if not isinstance(levels, list):
                raise ParseError("levels_db must be a list", f"{ploc}.levels_db")
            if len(levels) != N_OCTAVES:
                raise ParseError(f"expected {N_OCTAVES} octave bands, got {len(levels)}",
                                 f"{ploc}.levels_db")
            levels = [_level(v, f"{ploc}.levels_db[{k}]") for k, v in enumerate(levels)]
            pid = pos.get("id")
            positions.append(MeasurementPosition(r, _spectrum(levels, ploc),
                                                 None if pid is None else str(pid)))
        paths.append(MeasurementPath(str(rp.get("id", i + 1)), positions))
    return MeasurementArea(str(doc.get("area_id", "area")), paths)


def dump_measurement_json(area: MeasurementArea) -> str:
    doc = {
        "format_version": FORMAT_VERSION,
        "area_id": area.id,
        "paths": [
            {"id": p.id, "positions": [
                {"id": pos.id, "distance_m": pos.distance_m, "levels_db": list(pos.spectrum.levels)}
                for pos in p.positions]}
            for p in area.paths
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def dump_measurement_csv(area: MeasurementArea) -> str:
    buf = io.StringIO()
    buf.write(f"# format_version: {FORMAT_VERSION}\n# area_id: {area.id}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ID_COLUMNS + BAND_COLUMNS)
    for p in area.paths:
        for pos in p.positions:
            writer.writerow([p.id, pos.id or "", repr(pos.distance_m)]
                            + ["" if v is None else repr(v) for v in pos.spectrum.levels])
    return buf.getvalue()


# -- field files ---------------------------------------------------------------

def _nullable(values):
    return [None if not math.isfinite(v) else float(v) for v in values]


def dump_field(fld, path_id: str | None = None) -> str:
    if isinstance(fld, LogLinearField):
        doc = {
            "format_version": FORMAT_VERSION,
            "kind": "loglinear",
            "path_id": path_id,
            "distances_m": list(fld.distances_m),
            "ref_levels_4m_db": _nullable(fld.ref_levels_4m_db),
            "decay_db_per_doubling": list(fld.decay_db_per_doubling),
            "ripple_db": fld.ripple_db.tolist(),
        }
    elif isinstance(fld, GridField):
        positions = []
        for i, r in enumerate(fld.distances_m):
            bands = {}
            for k, f in enumerate(OCTAVE_CENTRES_HZ):
                block = fld.levels_db[i, k].reshape(GRID_NODES ** 2, GRID_NODES ** 2)
                bands[str(f)] = None if not np.all(np.isfinite(block)) else block.tolist()
            positions.append({"index": i, "distance_m": r, "levels_db": bands})
        doc = {
            "format_version": FORMAT_VERSION,
            "kind": "grid",
            "path_id": path_id,
            "grid": {"pitch_m": fld.pitch_m, "nodes_per_axis": GRID_NODES,
                     "node_index": "3 * ix + iy", "rows": "source node", "columns": "receiver node"},
            "clamp": fld.clamp,
            "positions": positions,
        }
    else:
        raise TypeError(f"cannot serialise {type(fld).__name__}")
    return json.dumps(doc) + "\n"


def load_field(text: str):
    """Returns ``(field, path_id)``."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno}, column {exc.colno}") from None
    _check_version(doc.get("format_version", FORMAT_VERSION), "format_version")
    kind = doc.get("kind")
    try:
        if kind == "loglinear":
            ref = [-math.inf if v is None else v for v in doc["ref_levels_4m_db"]]
            fld = LogLinearField(tuple(doc["distances_m"]), tuple(ref),
                                 tuple(doc["decay_db_per_doubling"]), np.array(doc["ripple_db"]))
        elif kind == "grid":
            positions = sorted(doc["positions"], key=lambda p: p["index"])
            levels = np.empty((len(positions), N_OCTAVES) + (GRID_NODES,) * 4)
            for i, pos in enumerate(positions):
                for k, f in enumerate(OCTAVE_CENTRES_HZ):
                    block = pos["levels_db"][str(f)]
                    levels[i, k] = (-np.inf if block is None
                                    else np.asarray(block, float).reshape((GRID_NODES,) * 4))
            fld = GridField(tuple(p["distance_m"] for p in positions), levels,
                            float(doc["grid"]["pitch_m"]), bool(doc.get("clamp", True)))
        else:
            raise ParseError(f"unknown field kind {kind!r}", "kind")
    except (KeyError, TypeError) as exc:
        raise ParseError(f"missing or malformed entry: {exc}", "field") from None
    except ValueError as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(str(exc), "field") from None
    return fld, doc.get("path_id")


# -- run configuration ---------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    octave_table: OctaveUncertaintyTable = field(default_factory=OctaveUncertaintyTable)
    level_uncertainty_db: float | None = None
    dist_model: DistanceErrorModel = field(default_factory=DistanceErrorModel)
    mc: McConfig = field(default_factory=McConfig)
    couple_levels_to_position: bool = False
    source_offset: str = "shared"
    coverage_k: float = 2.0
    threshold_dBA: float = 45.0

    def error_model(self) -> McErrorModel:
        return McErrorModel(self.octave_table, self.dist_model, None,
                            self.couple_levels_to_position, self.source_offset)


_CONFIG_KEYS = {"format_version", "octave_uncertainty_db", "level_uncertainty_db", "distance",
                "mc", "coverage_k", "threshold_dBA"}
_DIST_KEYS = {"u_tape_m", "square_side_m", "square_coverage", "include_positioning"}
_MC_KEYS = {"seed", "batch_size", "max_batches", "min_batches", "tol_level_db", "tol_rc_m",
            "workers", "histogram_bins", "couple_levels_to_position", "source_offset"}


def load_run_config(text: str) -> RunConfig:
    """Parse a JSON run configuration; every override is validated on load."""
    try:
        doc = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno}, column {exc.colno}") from None
    if not isinstance(doc, dict):
        raise ParseError("config must be an object", "$")
    for keys, section, name in ((_CONFIG_KEYS, doc, "$"),
                                (_DIST_KEYS, doc.get("distance", {}), "distance"),
                                (_MC_KEYS, doc.get("mc", {}), "mc")):
        unknown = set(section) - keys
        if unknown:
            raise ParseError(f"unknown keys {sorted(unknown)}", name)
    _check_version(doc.get("format_version", FORMAT_VERSION), "format_version")
    mc = dict(doc.get("mc", {}))
    couple = bool(mc.pop("couple_levels_to_position", False))
    source_offset = mc.pop("source_offset", "shared")
    try:
        table = (OctaveUncertaintyTable(tuple(doc["octave_uncertainty_db"]))
                 if "octave_uncertainty_db" in doc else OctaveUncertaintyTable())
        u_level = doc.get("level_uncertainty_db")
        if u_level is not None and not float(u_level) >= 0:
            raise ValueError("level_uncertainty_db must be >= 0")
        k = float(doc.get("coverage_k", 2.0))
        if not k > 0:
            raise ValueError("coverage_k must be > 0")
        cfg = RunConfig(
            octave_table=table,
            level_uncertainty_db=None if u_level is None else float(u_level),
            dist_model=DistanceErrorModel(**doc.get("distance", {})),
            mc=McConfig(**mc),
            couple_levels_to_position=couple,
            source_offset=source_offset,
            coverage_k=k,
            threshold_dBA=float(doc.get("threshold_dBA", 45.0)),
        )
        cfg.error_model()
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"invalid configuration: {exc}") from None
    return cfg


# -- report tables --------------------------------------------------------------

def decay_line_rows(path: MeasurementPath, snq) -> list:
    """Measured and fitted A-weighted levels per position."""
    rows = []
    levels = path.levels_dBA
    for pos, level in zip(path.positions, levels):
        fitted = snq.lpas4m_dBA - snq.d2s_dBA * math.log2(pos.distance_m / 4.0)
        rows.append({"path_id": path.id, "position_id": pos.id, "distance_m": pos.distance_m,
                     "level_dBA": float(level), "fitted_dBA": fitted})
    return rows


def interval_rows(path_results) -> list:
    rows = []
    for res in path_results:
        for name, value in res.values.items():
            lo, hi = res.interval(name)
            rows.append({"path_id": res.path_id, "snq": name, "value": value,
                         "u": res.uncertainties[name], "k": res.k, "lower": lo, "upper": hi,
                         "source": res.source})
    return rows


def histogram_rows(path_id: str, mc_result) -> list:
    rows = []
    for name, s in mc_result.stats.items():
        edges = s.histogram_edges
        for c, lo, hi in zip(s.histogram_counts, edges[:-1], edges[1:]):
            rows.append({"path_id": path_id, "snq": name, "bin_lower": lo, "bin_upper": hi,
                         "count": c})
    return rows


def rows_to_csv(rows: list) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()
