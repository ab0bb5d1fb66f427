"""Run the simulation scenarios and print mean (SD) tables.

    python3 scripts/reproduce_tables.py u1 u3 m1 m3 --replicates 30
"""
import argparse
import logging
import time
import warnings

from rpls.simbench import SCENARIOS, run_scenario, scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", default=["u1", "u2", "u3", "u4", "m1", "m2", "m3", "m4"])
    ap.add_argument("--replicates", type=int, default=None)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)
    warnings.simplefilter("ignore")
    for name in args.names:
        if name not in SCENARIOS:
            ap.error(f"unknown scenario {name}")
        cfg = scenario(name, replicates=args.replicates, seed=args.seed, threads=args.threads)
        t0 = time.perf_counter()
        out = run_scenario(cfg, progress=lambda i: print(f"  {name} replicate {i + 1}/{cfg.replicates}", flush=True))
        print(f"== {name}: n={cfg.n} p={cfg.p} q={cfg.q} snr={cfg.snr} ({time.perf_counter() - t0:.0f}s)")
        for method, row in out.summary().items():
            cells = " ".join(f"{m}={row[m][0]:.3f} ({row[m][1]:.3f})" for m in ("mspe", "tpr", "fpr", "K") if m in row)
            print(f"  {method:<6} {cells}")
        if out.failures:
            print(f"  failures: {out.failures}")


if __name__ == "__main__":
    main()
