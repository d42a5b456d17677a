#!/usr/bin/env python3
"""Run every baked experiment preset end to end.

Each preset writes its artifacts under OUT/<preset-name>/ and prints a
one-line summary. Useful as a smoke test and to regenerate all figures'
worth of data in one go.
"""

import argparse
import json
import time
from pathlib import Path

from epstreak import presets


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/presets", help="output directory")
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    root = Path(args.out)
    for name in sorted(presets.PRESETS):
        out = root / name
        t0 = time.perf_counter()
        summary = presets.run_preset(name, out, seed=args.seed)
        elapsed = time.perf_counter() - t0
        (out / "summary.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True, default=float) + "\n")
        print(f"{name:24s} {elapsed:6.1f} s  -> {out}")


if __name__ == "__main__":
    main()
