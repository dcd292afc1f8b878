"""Command line: ``discfol {labyrinth,run,trace,report} --config C --out D``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import pipeline
from .config import ConfigError, load_config


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def cmd_labyrinth(cfg, out: Path) -> int:
    lab = pipeline.make_labyrinth(cfg)
    pipeline.save_labyrinth(out, lab, cfg)
    for s, d, m in zip(lab.shells, lab.deltas, lab.margins):
        print(f"shell {s.index} ({s.inner:g}, {s.outer:g}): {len(lab.plates[s.index - 1])} plates, "
              f"delta {d:.6g}, min gap {m:.3g}")
    return 0


def cmd_run(cfg, out: Path) -> int:
    code = pipeline.run_pipeline(cfg, out, log=_log)
    print(f"{'ok' if code == 0 else 'FAILED'}: artifacts in {out}")
    return code


def cmd_trace(cfg, out: Path) -> int:
    lab = pipeline.load_labyrinth(out)
    state = pipeline.load_state(out, lab, cfg)
    ev = pipeline.analyze_leaves(out, state, lab, cfg)
    for lid, lf in ev["leaves"].items():
        e = lf["evidence"]
        print(f"leaf {lid}: length {e['traced_length']:.6g}, bound {e['bound']:.6g}, holds {e['holds']}")
    return 0 if all(lf["evidence"]["holds"] for lf in ev["leaves"].values()) else 1


def cmd_report(cfg, out: Path) -> int:
    summ = pipeline.write_summary(out, cfg)
    for p in pipeline.emit_plot_data(out):
        print(p)
    bad = sorted(k for k, c in summ["certificates"].items() if not c["pass"])
    print(f"{len(summ['certificates'])} certificates, {len(bad)} failed" + (f": {', '.join(bad)}" if bad else ""))
    return 0 if not bad else 1


COMMANDS = {"labyrinth": cmd_labyrinth, "run": cmd_run, "trace": cmd_trace, "report": cmd_report}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="discfol", description="labyrinth / induction / leaf certificates")
    sub = ap.add_subparsers(dest="verb", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--out", required=True, help="artifact directory")
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    if args.verb in ("labyrinth", "run"):
        out.mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[args.verb](cfg, out)
    except (pipeline.ArtifactError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
