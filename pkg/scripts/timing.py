"""Time a full lambda path for sparse PLS on a synthetic 27 x 2394 spectra matrix."""
import argparse
import time

from rpls.linalg import cross_product, standardize
from rpls.penalties import PenaltySpec, lambda_grid, lambda_max
from rpls.prediction import encode_classes
from rpls.selection import bic_select_lambda
from rpls.simbench import gen_spectra_demo


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=int, default=2394)
    ap.add_argument("--points", type=int, default=51)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    d = gen_spectra_demo(args.seed, p=args.p)
    M = cross_product(standardize(d["X"], encode_classes(d["labels"]).Y))
    spec = PenaltySpec("lasso")
    grid = lambda_grid(lambda_max(M, spec), args.points, 1e-5)
    for r in range(args.repeats):
        t = time.perf_counter()
        out = bic_select_lambda(M, spec, grid)
        print(f"run {r + 1}: {time.perf_counter() - t:.3f}s, BIC lambda {out.lam:.4g}, df {out.df[out.chosen]}")


if __name__ == "__main__":
    main()
