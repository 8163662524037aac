"""Regenerate the reduced reversible-LH correlation grid used as a regression fixture.

    python3 scripts/make_golden.py [--check]

With --check the grid is recomputed and compared against the committed file
instead of overwriting it.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from taprcdc.io import load_grid_csv, save_grid_csv
from taprcdc.mechanism import grid_sweep_reversible, k_grid_axis
from taprcdc.reactor import ReactorConfig

GOLDEN = Path(__file__).resolve().parents[1] / "tests" / "golden" / "lh_rev_grid.csv"
AXIS = k_grid_axis(0.04, 1.0, 0.24)


def build():
    return grid_sweep_reversible(AXIS, AXIS, ReactorConfig())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--check", action="store_true")
    args = ap.parse_args(argv)
    grid = build()
    if args.check:
        ref = load_grid_csv(GOLDEN)
        worst = max(float(np.nanmax(np.abs(grid.cells[k] - ref.cells[k]))) for k in ref.cells)
        print(f"max deviation from golden: {worst:.3e}")
        return 0 if worst < 1e-8 else 1
    save_grid_csv(grid, GOLDEN, {"generator": "scripts/make_golden.py", "seed": 0})
    print(f"wrote {GOLDEN} ({AXIS.size}x{AXIS.size}, {grid.n_invalid} invalid cells)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
