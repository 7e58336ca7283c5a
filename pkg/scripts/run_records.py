#!/usr/bin/env python3
"""Record values of r_{s,k}(N) up to X."""

import argparse

from discfrac.repcount import record_scan


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--s", type=int, default=3)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--X", type=int, default=10**4)
    args = p.parse_args()
    scan = record_scan(args.s, args.k, args.X)
    for N, r in scan.records:
        print(N, r)
    print(f"# {len(scan.records)} records")


if __name__ == "__main__":
    main()
