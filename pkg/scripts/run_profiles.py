#!/usr/bin/env python3
"""Growth profiles M_j for the s = 2 and s = 3 contrast and the degenerate regime."""

import argparse
import json
import time

from discfrac.diocount import growth_profile
from discfrac.lattice import NormMap, SurfaceMap

CASES = {
    "s2": ("euclidean-square", "euclidean", 2, 7, "all-feasible"),
    "s2-nondeg": ("euclidean-square", "euclidean", 2, 7, "nondegenerate-only"),
    "s3": ("euclidean-square", "euclidean", 3, 6, "all-feasible"),
    "hyp-deg": ("hyperbolic-quadratic", "euclidean", 2, 7, "degenerate-only"),
}


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("cases", nargs="*", default=list(CASES), choices=list(CASES))
    args = p.parse_args()
    for name in args.cases:
        g, t, s, jmax, policy = CASES[name]
        t0 = time.time()
        prof = growth_profile(SurfaceMap(g, 2), NormMap(t, 2), s, jmax, policy)
        out = {"case": name, "M": [r.M for r in prof.rows], "exact": [r.exact for r in prof.rows],
               "slope": round(prof.slope, 4), "seconds": round(time.time() - t0, 1)}
        print(json.dumps(out))


if __name__ == "__main__":
    main()
