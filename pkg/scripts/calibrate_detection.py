"""Calibrate detection thresholds on null-only seeds and optionally freeze them.

    python3 scripts/calibrate_detection.py            # print constants
    python3 scripts/calibrate_detection.py --write    # rewrite the frozen tables
"""
from __future__ import annotations

import argparse
import re
from pathlib import Path

from slra import gaussian

SMALL = [(128, 2, 1)]
LARGE = [(64, 8, 1)]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, default=200)
    ap.add_argument("--fpr", type=float, default=0.1)
    ap.add_argument("--write", action="store_true")
    args = ap.parse_args()
    seeds = gaussian.calibration_seeds(args.seeds)
    small = {key: gaussian.calibrate_small_s(*key, seeds, fpr=args.fpr) for key in SMALL}
    large = {key: gaussian.calibrate_large_s(*key, seeds, fpr=args.fpr) for key in LARGE}
    small_src = "CALIBRATED_SMALL_S: dict = {" + ", ".join(
        f"{key}: ({', '.join(f'{c:.6g}' for c in val)})" for key, val in small.items()) + "}"
    large_src = "CALIBRATED_LARGE_S: dict = {" + ", ".join(
        f"{key}: {val:.6g}" for key, val in large.items()) + "}"
    print(small_src)
    print(large_src)
    if args.write:
        path = Path(gaussian.__file__)
        src = path.read_text()
        src = re.sub(r"^CALIBRATED_SMALL_S: dict = .*$", small_src, src, flags=re.M)
        src = re.sub(r"^CALIBRATED_LARGE_S: dict = .*$", large_src, src, flags=re.M)
        path.write_text(src)
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
