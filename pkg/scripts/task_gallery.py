#!/usr/bin/env python3
"""Render sample inputs/targets from every toy task to PGM images.

Writes <out>/<task>_<index>_{input,target}.pgm so the datasets can be
eyeballed with any image viewer. Inputs and targets already live in [0, 1],
which is exactly the range the 8-bit PGM writer quantizes.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from carafe.demo import ToyTask, make_dataset
from carafe.fileio import save_pgm


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=str, default="task_gallery")
    ap.add_argument("--size", type=int, default=32)
    ap.add_argument("--sigma", type=int, default=2)
    ap.add_argument("--count", type=int, default=4, help="samples per task")
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for kind in ("super_res", "seg2", "inpaint"):
        task = ToyTask(kind, size=args.size, sigma=args.sigma, seed=args.seed)
        for i, (x, y) in enumerate(make_dataset(task, args.count)):
            save_pgm(x, out / f"{kind}_{i}_input.pgm")
            save_pgm(y, out / f"{kind}_{i}_target.pgm")
            print(f"{kind}[{i}] input {x.shape} target {y.shape}")
    print(f"wrote {3 * args.count * 2} images under {out}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
