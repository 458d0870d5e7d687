#!/usr/bin/env python3
"""Randomized certification of the exact form-algebra identities.

Runs the full identity suite (the trace/wedge/star cancellation identity,
star involution, determinant conventions, the correspondence between the two
shapes of the equation, and the trace-reversed eigenvalue relations) over
random instances and writes one JSON line per check.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from torusma import verify


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dims", type=int, nargs="+", default=[2, 3, 4])
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=20260811)
    ap.add_argument("--out", default=None, help="optional JSONL output path")
    args = ap.parse_args()

    reports = verify.run_identity_suite(dims=tuple(args.dims), trials=args.trials,
                                        seed=args.seed)
    print(verify.summary_table(reports))
    if args.out:
        verify.write_jsonl(reports, args.out)
        print(f"wrote {args.out}")
    raise SystemExit(0 if all(r.passed for r in reports) else 2)


if __name__ == "__main__":
    main()
