"""Run shipped presets and write one CSV per curve.

    python3 scripts/run_presets.py fig4_dicode_rho0.75 fig5_blocksize --out results
    python3 scripts/run_presets.py --all --max-frames 20000 --out results

Frame budgets in the presets aim at BLER near 1e-4 and can take hours on
one core. ``--max-frames`` and ``--min-errors`` shrink them.
"""

import argparse
import logging
import time
from pathlib import Path

from grandai.harness import emit_csv, load_configs, run_sweep
from grandai.harness.cli import preset_names, preset_path


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("presets", nargs="*")
    ap.add_argument("--all", action="store_true", help="run every shipped preset")
    ap.add_argument("--out", default="results")
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--max-frames", type=int)
    ap.add_argument("--min-errors", type=int)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    names = preset_names() if args.all else args.presets
    if not names:
        ap.error("name at least one preset or pass --all")
    stop = {}
    if args.max_frames:
        stop["max_frames"] = args.max_frames
    if args.min_errors:
        stop["min_errors"] = args.min_errors
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in names:
        for label, cfg in load_configs(preset_path(name), {"stop": stop} if stop else None).items():
            t0 = time.time()
            res = run_sweep(cfg, workers=args.workers)
            path = emit_csv(res, out / f"{name}_{label}.csv")
            print(f"{path} ({time.time() - t0:.0f} s)")
            for p in res.points:
                print(f"  {p.ebn0_db:5.2f} dB  BLER {p.bler:.3e}  [{p.ci_lo:.2e}, {p.ci_hi:.2e}]  queries {p.mean_queries:.1f}")


if __name__ == "__main__":
    main()
