"""Monte-Carlo vs closed-form uncertainties across the decay envelope.

Usage: python3 scripts/mc_vs_analytic.py [--runs 100000] [--seed 1]
"""
import argparse

from spatialdecay import (
    McConfig,
    McErrorModel,
    OfficeConfigSpec,
    analytic_budget,
    level_uncertainties,
    run_mc,
    synth_office,
)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--runs", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    cfg = McConfig(batch_size=args.runs // 2, min_batches=2, seed=args.seed)
    print(f"{'D_2S':>5} {'L4':>5} | {'u_D analytic':>12} {'MC':>6} | {'u_L4 analytic':>13} {'MC':>6} | "
          f"{'u_rc analytic':>13} {'MC':>6}")
    for d2s in (3.4, 4.8, 6.0, 7.5):
        for l4 in (40.6, 46.0, 51.9):
            path, fld = synth_office(OfficeConfigSpec(d2s_dBA=d2s, lpas4m_dBA=l4))
            b = analytic_budget(path, level_uncertainties(path))
            res = run_mc(fld, path, McErrorModel(), cfg)
            print(f"{d2s:5.1f} {l4:5.1f} | {b.u_d2s:12.3f} {res.u('d2s'):6.3f} | {b.u_lpas4m:13.3f} "
                  f"{res.u('lpas4m'):6.3f} | {b.u_rc:13.3f} {res.u('rc'):6.3f}")


if __name__ == "__main__":
    main()
