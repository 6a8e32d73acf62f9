"""Burgers Riemann problem: RelaxNN against a PINN baseline with the same budget.

Default is the desk-scale run (narrow networks, 30k epochs, tens of minutes on
one core). ``--full`` uses the published widths and 300k epochs.

    python3 scripts/burgers_desk.py --out runs/burgers-desk
    python3 scripts/burgers_desk.py --full --out runs/burgers-full
"""

import argparse
import sys
import time

from relaxnn.experiments import DESK_EPOCHS, DESK_U, DESK_V, compare
from relaxnn.presets import NETWORKS
from relaxnn.systems import Kind
from relaxnn.trainer import format_number


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--full", action="store_true", help="published network sizes and epochs")
    ap.add_argument("--epochs", type=int)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", default="runs/burgers-desk")
    args = ap.parse_args(argv)

    if args.full:
        u, v = NETWORKS[(Kind.BURGERS, 1)]
        epochs = 300_000
    else:
        u, v, epochs = DESK_U, DESK_V, DESK_EPOCHS
    if args.epochs is not None:
        epochs = args.epochs

    start = time.time()

    def progress(mode, rec):
        if rec["epoch"] % 1000 == 0:
            print(f"[{mode}] epoch {rec['epoch']:>7d}  loss {rec['total']:.6e}  "
                  f"{time.time() - start:7.0f}s", flush=True)

    cmp = compare("burgers-riemann", 1, u, v, epochs, args.seed, out_dir=args.out, on_epoch=progress)
    for mode, vals in cmp.summary().items():
        print(f"{mode:8s} relative L2 {format_number(vals['relative_l2'])}  "
              f"final loss {format_number(vals['final_loss'])}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
