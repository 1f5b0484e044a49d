"""Can one value describe an acoustic area? Four synthetic paths, one office.

Path decay rates differ more than their individual uncertainties allow, so
the per-path intervals do not all overlap and the pooled uncertainty is far
larger than any single-path value.
"""
from spatialdecay import (
    OfficeConfigSpec,
    PathResult,
    analytic_budget,
    level_uncertainties,
    pool_area,
    round_up_tenth,
    synth_office,
    unicity_report,
)
from spatialdecay.area import format_unicity_report


def main():
    results = []
    for i, d2s in enumerate((6.8, 5.4, 7.0, 5.2), start=1):
        path, _ = synth_office(OfficeConfigSpec(d2s_dBA=d2s, lpas4m_dBA=48.0 + 0.5 * i), id=f"P{i}")
        b = analytic_budget(path, level_uncertainties(path))
        results.append(PathResult.from_budget(path.id, b))
        print(f"{path.id}: D_2S {d2s:.1f} +/- {2 * b.u_d2s:.2f} dB(A) (k = 2)")
    print(format_unicity_report(unicity_report(pool_area(results)), round_up_tenth))


if __name__ == "__main__":
    main()
