"""SNQs and closed-form uncertainties of the 16 labelled office configurations.

Optionally writes the measurement file (``--out measurement.json``) for use
with the command-line tool.
"""
import argparse
from pathlib import Path

from spatialdecay import (
    MeasurementArea,
    OfficeConfigSpec,
    analytic_budget,
    compute_snq,
    level_uncertainties,
    round_up_tenth,
    synth_office,
)
from spatialdecay.fields import all_labels
from spatialdecay.io import dump_measurement_json


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--ripple", type=float, default=0.0, help="ripple amplitude, dB")
    ap.add_argument("--out", help="write the synthetic area as a JSON measurement file")
    args = ap.parse_args()

    paths = []
    print(f"{'config':>6} | {'D_2S':>5} {'u':>4} | {'L_pAS4m':>7} {'u':>4} | {'r_c':>6} {'u':>4}")
    for label in all_labels():
        path, _ = synth_office(OfficeConfigSpec(label=label, ripple_db=args.ripple), id=label)
        paths.append(path)
        snq = compute_snq(path)
        b = analytic_budget(path, level_uncertainties(path))
        print(f"{label:>6} | {snq.d2s_dBA:5.2f} {round_up_tenth(b.u_d2s):4.1f} | {snq.lpas4m_dBA:7.2f} "
              f"{round_up_tenth(b.u_lpas4m):4.1f} | {snq.rc_m:6.2f} {round_up_tenth(b.u_rc):4.1f}")
    if args.out:
        Path(args.out).write_text(dump_measurement_json(MeasurementArea("offices", paths)))
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
