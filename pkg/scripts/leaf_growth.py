"""Leaf length against stage for a few anchors above small c.

Reads the chains of a finished run (``--out``) and traces each anchor at
every stage with a common boundary tolerance.
"""
import argparse
from pathlib import Path

from discfol import pipeline
from discfol.config import load_config
from discfol.leaves import default_tol_boundary, first_controlled_stage, trace_leaf

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=str(ROOT / "configs" / "default.toml"))
    ap.add_argument("--out", default=str(ROOT / "runs" / "default"))
    ap.add_argument("--c", type=float, nargs="*", default=[0.0, 0.02, 0.05])
    args = ap.parse_args()
    cfg = load_config(args.config)
    lab = pipeline.load_labyrinth(args.out)
    state = pipeline.load_state(args.out, lab, cfg)
    tol = default_tol_boundary(state)
    print("c," + ",".join(f"stage{s}" for s in range(state.stage + 1)) + ",i0")
    for c in args.c:
        row = []
        for s in range(state.stage + 1):
            try:
                row.append(f"{trace_leaf([c], 0, state, step=0.005, stage=s, tol_boundary=tol).length:.6f}")
            except ValueError:
                row.append("")
        tr = trace_leaf([c], 0, state, step=0.005, tol_boundary=tol)
        print(f"{c}," + ",".join(row) + f",{first_controlled_stage(tr, state)}")


if __name__ == "__main__":
    main()
