#!/usr/bin/env python3
"""Train the upsampling roster on the toy super-resolution task.

Every operator fills the same slot in an otherwise identical net: same trunk
weights (seeded via one spawned stream), same data, same optimizer budget.
The content-aware reassembler is compared against fixed and learned
baselines; the table reports the held-out PSNR per seed plus mean/sd.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from carafe.demo import SlotSpec, ToyTask, compare_operators


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=16, help="high-res image side")
    ap.add_argument("--sigma", type=int, default=2, help="upsampling ratio")
    ap.add_argument("--channels", type=int, default=8, help="trunk width")
    ap.add_argument("--epochs", type=int, default=1800)
    ap.add_argument("--lr", type=float, default=0.15)
    ap.add_argument("--seeds", type=str, default="0,1,2",
                    help="comma-separated training seeds")
    ap.add_argument("--train-count", type=int, default=16)
    ap.add_argument("--eval-count", type=int, default=8)
    ap.add_argument("--k-reassembly", type=int, default=3)
    ap.add_argument("--c-mid", type=int, default=8)
    args = ap.parse_args(argv)

    seeds = tuple(int(s) for s in args.seeds.split(","))
    task = ToyTask("super_res", size=args.size, sigma=args.sigma, seed=7)
    roster = [
        SlotSpec("carafe", k_encoder=3, k_reassembly=args.k_reassembly,
                 c_mid=args.c_mid, compressor_norm=True),
        SlotSpec("nearest_plus_conv"),
        SlotSpec("bilinear_plus_conv"),
        SlotSpec("transposed_conv"),
    ]
    print(f"super_res size={args.size} sigma={args.sigma} "
          f"epochs={args.epochs} lr={args.lr} seeds={seeds}")
    rows = compare_operators(task, roster, seeds=seeds, arch="upsampler",
                             channels=args.channels, epochs=args.epochs,
                             lr=args.lr, train_count=args.train_count,
                             eval_count=args.eval_count)
    print(f"{'operator':<20} {'mean':>8} {'sd':>7}  per-seed PSNR")
    for row in rows:
        per = "  ".join(f"{v:6.2f}" for v in row.per_seed)
        print(f"{row.operator:<20} {row.mean:8.3f} {row.sd:7.3f}  {per}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
