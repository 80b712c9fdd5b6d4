"""Run the robustness grid, the prior-sensitivity sweep and the coverage
study with default settings, writing CSV tables and JSON summaries.

    python3 scripts/run_studies.py --out runs/studies --m 200 --workers 4

Pass --only to run a subset, e.g. ``--only coverage``. The full m=200
coverage study is 3000 fits; expect roughly half an hour per CPU.
"""
import argparse
import time
from pathlib import Path

from fracbayes.experiments import (
    CoverageConfig,
    PriorSensitivityConfig,
    RobustnessConfig,
    coverage_study,
    prior_sensitivity_study,
    robustness_study,
    write_json,
    write_rows,
)

STUDIES = ("robustness", "prior-sensitivity", "coverage")


def robustness(out, args):
    recs = robustness_study(RobustnessConfig(base_seed=args.seed), workers=args.workers)
    write_rows([r.row() for r in recs], out / "robustness.csv")
    print("alpha  sigma   alpha interval          sigma interval     in?")
    for r in recs:
        print(f"{r.alpha_true:4.1f}  {r.sigma_true:5.2f}  ({r.ci_alpha[0]:.4f}, {r.ci_alpha[1]:.4f})"
              f"  ({r.ci_sigma[0]:.4f}, {r.ci_sigma[1]:.4f})  "
              f"{'y' if r.contains_alpha else 'n'}{'y' if r.contains_sigma else 'n'}")
    print(f"alpha contained in {sum(r.contains_alpha for r in recs)}/{len(recs)}, "
          f"sigma in {sum(r.contains_sigma for r in recs)}/{len(recs)}")


def prior_sensitivity(out, args):
    recs = prior_sensitivity_study(PriorSensitivityConfig(base_seed=args.seed), workers=args.workers)
    write_rows([r.row() for r in recs], out / "prior_sensitivity.csv")
    for r in recs:
        print(f"shape {r.shape:>5g}: alpha ({r.ci_alpha[0]:.4f}, {r.ci_alpha[1]:.4f}) "
              f"{'contains' if r.contains_alpha else 'excludes'} 0.82")


def coverage(out, args):
    res = coverage_study(CoverageConfig(m=args.m, base_seed=args.seed), workers=args.workers)
    write_rows([c.row() for c in res.cells], out / "coverage.csv")
    write_rows([r.row() for r in res.replicates], out / "coverage_replicates.csv")
    write_json(res.summary(), out / "coverage.json")
    for c in res.cells:
        print(f"alpha {c.alpha_true:.1f} sigma {c.sigma_true:.2f}: coverage alpha {c.coverage_alpha:.3f} "
              f"sigma {c.coverage_sigma:.3f}  (failed {c.n_failed})")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/studies")
    ap.add_argument("--m", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--only", choices=STUDIES, action="append")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    runners = {"robustness": robustness, "prior-sensitivity": prior_sensitivity, "coverage": coverage}
    for name in args.only or STUDIES:
        t0 = time.perf_counter()
        print(f"== {name}")
        runners[name](out, args)
        print(f"== {name} done in {time.perf_counter() - t0:.0f} s\n", flush=True)


if __name__ == "__main__":
    main()
