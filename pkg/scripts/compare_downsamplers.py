#!/usr/bin/env python3
"""Train the downsampling roster on the toy two-class segmentation task.

The net is a bottleneck: features are downsampled by the slot operator,
processed, brought back up by a fixed nearest upsampler, and classified per
pixel. Only the down slot differs between rows, so the table isolates how
much the downsampling operator helps the net keep spatially precise
information. Reports held-out IoU per seed plus mean/sd.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from carafe.demo import SlotSpec, ToyTask, compare_operators


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=16, help="image side")
    ap.add_argument("--sigma", type=int, default=2, help="downsampling ratio")
    ap.add_argument("--channels", type=int, default=8, help="trunk width")
    ap.add_argument("--epochs", type=int, default=120)
    ap.add_argument("--lr", type=float, default=0.05)
    ap.add_argument("--seeds", type=str, default="0,1,2",
                    help="comma-separated training seeds")
    ap.add_argument("--train-count", type=int, default=16)
    ap.add_argument("--eval-count", type=int, default=8)
    ap.add_argument("--k-reassembly", type=int, default=3)
    ap.add_argument("--c-mid", type=int, default=8)
    args = ap.parse_args(argv)

    seeds = tuple(int(s) for s in args.seeds.split(","))
    task = ToyTask("seg2", size=args.size, sigma=args.sigma, seed=7)
    roster = [
        SlotSpec("carafe", k_encoder=3, k_reassembly=args.k_reassembly,
                 c_mid=args.c_mid),
        SlotSpec("strided_conv"),
        SlotSpec("max_pool"),
        SlotSpec("avg_pool"),
    ]
    print(f"seg2 size={args.size} sigma={args.sigma} "
          f"epochs={args.epochs} lr={args.lr} seeds={seeds}")
    rows = compare_operators(task, roster, seeds=seeds, arch="bottleneck",
                             channels=args.channels, epochs=args.epochs,
                             lr=args.lr, train_count=args.train_count,
                             eval_count=args.eval_count)
    print(f"{'operator':<20} {'mean':>8} {'sd':>7}  per-seed IoU")
    for row in rows:
        per = "  ".join(f"{v:6.3f}" for v in row.per_seed)
        print(f"{row.operator:<20} {row.mean:8.4f} {row.sd:7.4f}  {per}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
