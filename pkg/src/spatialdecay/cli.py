"""Command-line interface.

Subcommands: compute, uncertainty, mc, area, synth, report. Exit status is
0 on success, 1 on validation failure and 2 on parse failure; errors go to
standard error prefixed ``spatialdecay: error[<kind>]:``. ``SNQ_LOG`` sets
the log level (e.g. ``SNQ_LOG=debug``).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from .analytic import analytic_budget, level_uncertainties, round_up_tenth
from .area import LABELS, UNITS, PathResult, format_unicity_report, pool_area, unicity_report
from .core import SNQ_NAMES, MeasurementArea, compute_snq
from .exceptions import NotConverged, ParseError, SpatialDecayError
from .fields import (
    LogLinearField,
    OfficeConfigSpec,
    default_geometry,
    grid_from_loglinear,
    near_source_gradients,
    synth_office,
)
from .io import (
    RunConfig,
    decay_line_rows,
    dump_field,
    dump_measurement_csv,
    dump_measurement_json,
    histogram_rows,
    interval_rows,
    load_field,
    load_run_config,
    parse_measurement_file,
    rows_to_csv,
)
from .montecarlo import run_mc

log = logging.getLogger("spatialdecay")


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror}", path) from None


def _emit(text: str, output: str | None):
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _config(args) -> RunConfig:
    cfg = load_run_config(_read(args.config)) if args.config else RunConfig()
    mc = cfg.mc
    if getattr(args, "seed", None) is not None:
        mc = replace(mc, seed=args.seed)
    if getattr(args, "runs", None) is not None:
        mc = replace(mc, batch_size=args.runs)
    if getattr(args, "workers", None) is not None:
        mc = replace(mc, workers=args.workers)
    cfg = replace(cfg, mc=mc)
    if args.coverage_k is not None:
        cfg = replace(cfg, coverage_k=args.coverage_k)
    if args.threshold is not None:
        cfg = replace(cfg, threshold_dBA=args.threshold)
    if getattr(args, "couple_positioning", None) is not None:
        cfg = replace(cfg, couple_levels_to_position=args.couple_positioning == "on")
    return cfg


def _area(args) -> MeasurementArea:
    return parse_measurement_file(_read(args.input))


def _budget(path, cfg: RunConfig):
    u_L = (cfg.level_uncertainty_db if cfg.level_uncertainty_db is not None
           else level_uncertainties(path, cfg.octave_table))
    return analytic_budget(path, u_L, cfg.dist_model, cfg.threshold_dBA)


def _dump_json(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def cmd_compute(args) -> int:
    cfg = _config(args)
    area = _area(args)
    rows = []
    for path in area.paths:
        snq = compute_snq(path, cfg.threshold_dBA)
        rows.append({"path_id": path.id, "n": path.n, "d2s": snq.d2s_dBA,
                     "lpas4m": snq.lpas4m_dBA, "rc": snq.rc_m})
    if args.format == "json":
        text = _dump_json({"area_id": area.id, "threshold_dBA": cfg.threshold_dBA, "paths": rows})
    elif args.format == "csv":
        text = rows_to_csv(rows)
    else:
        text = "".join(f"{r['path_id']}: D_2S = {r['d2s']:.2f} dB(A), L_pAS4m = {r['lpas4m']:.2f} dB(A), "
                       f"r_c = {r['rc']:.2f} m\n" for r in rows)
    _emit(text, args.output)
    return 0


def cmd_uncertainty(args) -> int:
    cfg = _config(args)
    area = _area(args)
    docs = []
    for path in area.paths:
        b = _budget(path, cfg)
        doc = {"path_id": path.id, "snq": b.snq.as_dict(), "budget": b.as_dict(),
               "reported_u": {n: round_up_tenth(b.u(n)) for n in SNQ_NAMES}}
        docs.append(doc)
    if args.format == "json":
        text = _dump_json({"area_id": area.id, "paths": docs})
    elif args.format == "csv":
        rows = [{"path_id": d["path_id"], "snq": n, "value": d["snq"][n], "u": d["budget"][n]["u"],
                 "u_L": d["budget"][n]["u_L"], "u_r": d["budget"][n]["u_r"],
                 "u_reported": d["reported_u"][n]}
                for d in docs for n in SNQ_NAMES]
        text = rows_to_csv(rows)
    else:
        lines = []
        for d in docs:
            lines.append(f"{d['path_id']}:")
            for n in SNQ_NAMES:
                e = d["budget"][n]
                lines.append(f"  {LABELS[n]} = {d['snq'][n]:.2f} {UNITS[n]}, "
                             f"u_{LABELS[n]} = {d['reported_u'][n]:.1f} (exact {e['u']:.3f}; "
                             f"levels {e['u_L']:.3f}, distances {e['u_r']:.3f})")
            terms = d["budget"]["terms"]
            lines.append("  cov(D_2S, L_pAS4m): "
                         f"levels {terms['cov_d2s_lpas4m_L'] + 0.0:.4g}, distances {terms['cov_d2s_lpas4m_r'] + 0.0:.4g}")
        text = "\n".join(lines) + "\n"
    _emit(text, args.output)
    return 0


def _fields_for(area: MeasurementArea, field_files) -> dict:
    loaded = [load_field(_read(f)) for f in field_files or ()]
    out = {}
    for i, (fld, pid) in enumerate(loaded):
        if pid is None:
            if len(loaded) == 1 and len(area.paths) == 1:
                pid = area.paths[0].id
            elif i < len(area.paths):
                pid = area.paths[i].id
        out[pid] = fld
    return out


def _run_mc_area(area, cfg: RunConfig, field_files):
    fields = _fields_for(area, field_files)
    model = cfg.error_model()
    results = {}
    for path in area.paths:
        fld = fields.get(path.id)
        if fld is None:
            fld = LogLinearField.fit(path)
            log.info("path %s: no field file, using a log-linear fit of the measurement", path.id)
        elif fld.n_positions != path.n:
            raise SpatialDecayError(f"field for path {path.id!r} has {fld.n_positions} positions, "
                                    f"path has {path.n}")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", NotConverged)
            results[path.id] = run_mc(fld, path, model, cfg.mc, cfg.threshold_dBA)
        for w in caught:
            log.warning("path %s: %s", path.id, w.message)
    return results


def cmd_mc(args) -> int:
    cfg = _config(args)
    area = _area(args)
    results = _run_mc_area(area, cfg, args.field)
    if args.format == "csv":
        rows = [{"path_id": pid, "snq": n, "mean": r.mean(n), "u": r.u(n), "runs": r.runs_used,
                 "converged": r.converged, "normal": r.stats[n].normality.normal}
                for pid, r in results.items() for n in SNQ_NAMES]
        text = rows_to_csv(rows)
    elif args.format == "json":
        text = _dump_json({"area_id": area.id, "seed": cfg.mc.seed,
                           "paths": [{"path_id": pid, **r.as_dict()} for pid, r in results.items()]})
    else:
        lines = []
        for pid, r in results.items():
            status = "converged" if r.converged else "NOT converged"
            lines.append(f"{pid}: {r.runs_used} runs, {status}")
            for n in SNQ_NAMES:
                s = r.stats[n]
                lines.append(f"  {LABELS[n]} = {s.mean:.2f} {UNITS[n]}, u = {round_up_tenth(s.std):.1f} "
                             f"(exact {s.std:.3f}){'' if s.normality.normal else ' [non-normal]'}")
        text = "\n".join(lines) + "\n"
    _emit(text, args.output)
    return 0


def _path_results(area, cfg: RunConfig, method: str, field_files=None):
    if method == "mc":
        mc = _run_mc_area(area, cfg, field_files)
        return [PathResult.from_mc(pid, r, cfg.coverage_k) for pid, r in mc.items()], mc
    return [PathResult.from_budget(p.id, _budget(p, cfg), cfg.coverage_k) for p in area.paths], {}


def cmd_area(args) -> int:
    cfg = _config(args)
    area = _area(args)
    results, _ = _path_results(area, cfg, args.method, args.field)
    report = unicity_report(pool_area(results, cfg.coverage_k))
    report["area_id"] = area.id
    if args.format == "json":
        text = _dump_json(report)
    elif args.format == "csv":
        rows = [{"snq": n, "pooled_mean": e["pooled_mean"], "pooled_u": e["pooled_u"],
                 "between_var": e["between_var"], "within_var": e["within_var"], "unique": e["unique"]}
                for n, e in report["snq"].items()]
        text = rows_to_csv(rows)
    else:
        text = format_unicity_report(report, round_up_tenth) + "\n"
    _emit(text, args.output)
    return 0


def _parse_target(text: str):
    try:
        d2s, l4 = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("target must be 'D2S,LPAS4M'") from None
    return d2s, l4


def cmd_synth(args) -> int:
    specs = [OfficeConfigSpec(label=lab, ripple_db=args.ripple, rc_m=args.rc,
                              threshold_dBA=args.threshold or 45.0) for lab in args.label or ()]
    specs += [OfficeConfigSpec(d2s_dBA=d, lpas4m_dBA=l, rc_m=args.rc, ripple_db=args.ripple,
                               threshold_dBA=args.threshold or 45.0) for d, l in args.target or ()]
    if not specs:
        raise SpatialDecayError("synth needs at least one --label or --target")
    geometry = default_geometry(args.positions, args.start, args.step_doublings)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, spec in enumerate(specs, start=1):
        pid = f"P{i}"
        path, fld = synth_office(spec, geometry, id=pid)
        paths.append(path)
        (out / f"field_{pid}.json").write_text(dump_field(fld, pid), encoding="utf-8")
        if args.grid_step is not None:
            grid = grid_from_loglinear(fld, near_source_gradients(args.grid_step))
            (out / f"grid_{pid}.json").write_text(dump_field(grid, pid), encoding="utf-8")
    area = MeasurementArea(args.area_id, paths)
    if args.format == "csv":
        (out / "measurement.csv").write_text(dump_measurement_csv(area), encoding="utf-8")
    else:
        (out / "measurement.json").write_text(dump_measurement_json(area), encoding="utf-8")
    sys.stdout.write(f"wrote {len(paths)} path(s) to {out}\n")
    return 0


def cmd_report(args) -> int:
    cfg = _config(args)
    area = _area(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    budgets = {p.id: _budget(p, cfg) for p in area.paths}
    results = [PathResult.from_budget(pid, b, cfg.coverage_k) for pid, b in budgets.items()]
    mc = _run_mc_area(area, cfg, args.field) if args.mc else {}
    doc = {
        "format_version": 1,
        "area_id": area.id,
        "coverage_k": cfg.coverage_k,
        "threshold_dBA": cfg.threshold_dBA,
        "paths": [{"path_id": pid, "snq": b.snq.as_dict(), "analytic": b.as_dict(),
                   "mc": mc[pid].as_dict() if pid in mc else None}
                  for pid, b in budgets.items()],
    }
    if len(results) >= 2:
        doc["area"] = unicity_report(pool_area(results, cfg.coverage_k))
    if mc:
        mc_results = [PathResult.from_mc(pid, r, cfg.coverage_k) for pid, r in mc.items()]
        results += mc_results
    (out / "report.json").write_text(_dump_json(doc), encoding="utf-8")
    decay = [row for p in area.paths for row in decay_line_rows(p, budgets[p.id].snq)]
    (out / "decay_lines.csv").write_text(rows_to_csv(decay), encoding="utf-8")
    (out / "intervals.csv").write_text(rows_to_csv(interval_rows(results)), encoding="utf-8")
    if mc:
        hist = [row for pid, r in mc.items() for row in histogram_rows(pid, r)]
        (out / "histograms.csv").write_text(rows_to_csv(hist), encoding="utf-8")
    sys.stdout.write(f"wrote report to {out}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration file")
    common.add_argument("--threshold", type=float, help="comfort threshold in dB(A) (default 45)")
    common.add_argument("--coverage-k", type=float, help="coverage factor for intervals (default 2)")
    common.add_argument("--format", choices=("text", "csv", "json"), default="text")
    common.add_argument("-o", "--output", help="write to this file instead of stdout")

    mc_opts = argparse.ArgumentParser(add_help=False)
    mc_opts.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    mc_opts.add_argument("--runs", type=int, help="runs per Monte-Carlo batch")
    mc_opts.add_argument("--workers", type=int, help="worker threads")
    mc_opts.add_argument("--couple-positioning", choices=("on", "off"),
                         help="read levels at displaced positions from the field")
    mc_opts.add_argument("--field", action="append", help="field file (repeat per path)")

    parser = argparse.ArgumentParser(prog="spatialdecay", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compute", parents=[common], help="SNQs per path")
    p.add_argument("input")
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("uncertainty", parents=[common], help="closed-form uncertainty budgets")
    p.add_argument("input")
    p.set_defaults(func=cmd_uncertainty)

    p = sub.add_parser("mc", parents=[common, mc_opts], help="Monte-Carlo uncertainties")
    p.add_argument("input")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("area", parents=[common, mc_opts], help="pooled area uncertainty and unicity")
    p.add_argument("input")
    p.add_argument("--method", choices=("analytic", "mc"), default="analytic")
    p.set_defaults(func=cmd_area)

    p = sub.add_parser("synth", parents=[common], help="generate synthetic measurement and field files")
    p.add_argument("--label", action="append", help="configuration label such as 111 (repeatable)")
    p.add_argument("--target", action="append", type=_parse_target, help="D2S,LPAS4M (repeatable)")
    p.add_argument("--rc", type=float, help="target comfort distance, checked for consistency")
    p.add_argument("--ripple", type=float, default=0.0, help="ripple amplitude in dB")
    p.add_argument("--positions", type=int, default=7)
    p.add_argument("--start", type=float, default=2.0, help="first distance in m")
    p.add_argument("--step-doublings", type=float, default=0.25)
    p.add_argument("--grid-step", type=float, help="also write grid fields with near-source steps (dB)")
    p.add_argument("--area-id", default="synthetic")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", parents=[common, mc_opts], help="JSON report and CSV plot data")
    p.add_argument("input")
    p.add_argument("--mc", action="store_true", help="include Monte-Carlo results")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("SNQ_LOG", "WARNING").upper(), stream=sys.stderr,
                        format="spatialdecay: %(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        sys.stderr.write(f"spatialdecay: error[parse]: {exc}\n")
        return 2
    except (SpatialDecayError, ValueError) as exc:
        sys.stderr.write(f"spatialdecay: error[validation]: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
