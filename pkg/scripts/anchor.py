"""Anchor-ratio table for runs differing only in the initial particle position.

    python scripts/anchor.py --config configs/forward_smooth.yaml --dq0 1e-3
"""
import argparse
from pathlib import Path

import numpy as np

from fsilab import io
from fsilab.config import load_config
from fsilab.inverse_lab.experiments import anchor_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", default="out/anchor")
    ap.add_argument("--dq0", type=float, default=1e-3)
    ap.add_argument("--n-anchors", type=int, default=9)
    args = ap.parse_args()

    problem = load_config(args.config).build_problem()
    anchors = problem.T * np.linspace(0.1, 0.9, args.n_anchors)
    rep = anchor_experiment(problem, dq0=args.dq0, anchors=anchors)
    io.write_csv(Path(args.out) / "anchor.csv", ("t_bar", "ratio"), zip(rep.anchors, rep.ratios))
    for tb, r in zip(rep.anchors, rep.ratios):
        print(f"t_bar={tb:.3f}  ratio={r:.6f}")
    print(f"R0={rep.R0:.6f} spread={rep.spread:.6f} |beta1-beta2|_L2={rep.beta_discrepancy:.3e}")


if __name__ == "__main__":
    main()
