"""Run the correlation grid sweeps and write one CSV per mechanism."""

import argparse
from pathlib import Path

import numpy as np

from taprcdc.io import save_grid_csv
from taprcdc.mechanism import SweepKind, grid_sweep_irreversible, grid_sweep_reversible, k_grid_axis


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="sweeps")
    ap.add_argument("--k-step", type=float, default=0.02, help="grid spacing; 0.24 gives a quick 5x5 grid")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--k-o", type=float, default=0.2, help="O2 adsorption constant for the reversible sweep")
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    axis = k_grid_axis(0.04, 1.0, args.k_step)
    for kind in (SweepKind.ER_IRREV, SweepKind.LH_IRREV):
        g = grid_sweep_irreversible(kind, axis, n_jobs=args.jobs)
        save_grid_csv(g, out / f"{kind.value}.csv", {"k_step": args.k_step})
        print(kind.value, {k: (float(np.nanmin(v)), float(np.nanmax(v))) for k, v in g.cells.items()}, "invalid", g.n_invalid)
    rev_axis = np.r_[0.0, axis]
    g = grid_sweep_reversible(axis, rev_axis, k_o=args.k_o, n_jobs=args.jobs)
    save_grid_csv(g, out / "lh-rev.csv", {"k_step": args.k_step})
    print("lh-rev", "invalid", g.n_invalid)


if __name__ == "__main__":
    main()
