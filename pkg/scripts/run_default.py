"""Run the full pipeline on a config and print the certificate table.

    python scripts/run_default.py [--config configs/default.toml] [--out runs/default]
"""
import argparse
import sys
from pathlib import Path

from discfol import pipeline
from discfol.config import load_config

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=str(ROOT / "configs" / "default.toml"))
    ap.add_argument("--out", default=str(ROOT / "runs" / "default"))
    args = ap.parse_args()
    cfg = load_config(args.config)
    code = pipeline.run_pipeline(cfg, args.out, log=lambda s: print(s, file=sys.stderr))
    summ = pipeline.read_json(Path(args.out) / "summary.json")
    for name, c in sorted(summ.get("certificates", {}).items()):
        m = c["margin"]
        print(f"{name:32s} {'ok ' if c['pass'] else 'BAD'} {m if m is None else f'{m:.6g}'}")
    print("status:", summ["status"])
    return code


if __name__ == "__main__":
    sys.exit(main())
