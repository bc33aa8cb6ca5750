#!/usr/bin/env python3
"""Build the 9×9 solved-grid census table and commit it under
src/trialbench/data/. Long-running offline tool; resumable via checkpoint.

Usage: python tools/build_census_n3.py [--workers N] [--max-seconds S]
                                       [--checkpoint PATH] [--out PATH]
"""

import argparse
import os
import sys
import time

from trialbench import census3


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--workers", type=int, default=max(1, (os.cpu_count() or 1)))
    ap.add_argument("--max-seconds", type=float, default=None)
    ap.add_argument("--checkpoint", default="census_n3_checkpoint.npz")
    ap.add_argument("--out", default=census3.default_census_path())
    args = ap.parse_args()

    t0 = time.time()

    def log(*a):
        print(f"[{time.time() - t0:8.1f}s]", *a, flush=True)

    census = census3.census_n3_offline(args.checkpoint, workers=args.workers,
                                       max_seconds=args.max_seconds, log=log)
    log(f"classes: {len(census.classes)}  complete: {census.complete}")
    log(f"total:    {census.total}")
    log(f"expected: {census3.N3_TOTAL}")
    if census.complete and census.total != census3.N3_TOTAL:
        log("TOTAL MISMATCH — table not written")
        return 2
    digest = census3.save_census(census, args.out)
    log(f"wrote {args.out} sha256={digest}")
    return 0 if census.complete else 1


if __name__ == "__main__":
    sys.exit(main())
