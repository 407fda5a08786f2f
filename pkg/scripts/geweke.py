#!/usr/bin/env python3
"""Joint-distribution correctness check of every endogenous sampler."""

import argparse

from endotqr.geweke import geweke_test


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--families", default="al,sn,aep,aldp,sndp")
    ap.add_argument("--draws", type=int, default=100_000)
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--p", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    status = 0
    for fam in args.families.split(","):
        res = geweke_test(fam, draws=args.draws, n=args.n, p=args.p, seed=args.seed)
        print(f"{fam}: {'pass' if res.passed() else 'FAIL'}")
        print(res.table())
        status |= not res.passed()
    raise SystemExit(status)


if __name__ == "__main__":
    main()
