"""Regenerate cg_calibration.json by brute force (pairs bucketed by s0 = x/y)."""

import json
import math
from collections import Counter
from pathlib import Path

import sys
sys.path.insert(0, str(Path(__file__).resolve().parents[1]))
from oracles import primes_upto  # noqa: E402


def main():
    rows = {}
    for p in primes_upto(2000):
        if p < 5:
            continue
        X = Y = math.isqrt(p)
        buckets = Counter(x * pow(y, -1, p) % p for x in range(1, X + 1) for y in range(1, Y + 1)
                          if math.gcd(x, y) == 1)
        rows[p] = max(buckets.values())
    ratios = {p: c / (1 + math.isqrt(p) ** 2 / p) for p, c in rows.items()}
    out = {"max_count": rows, "threshold": max(ratios.values())}
    path = Path(__file__).with_name("cg_calibration.json")
    path.write_text(json.dumps(out, indent=1, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
