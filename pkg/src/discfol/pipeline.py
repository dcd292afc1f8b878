"""Batch driver: labyrinth, induction, leaf analysis, and the JSON/CSV artifacts."""
from __future__ import annotations

import csv
import json
import math
import os
import traceback
from pathlib import Path
from typing import Optional

import numpy as np

from .automorphisms import AutChain, compose, identity_chain
from .config import RunConfig
from .geometry import sample_ball
from .induction import InductionState, convergence_report, new_state, step
from .labyrinth import Labyrinth, build_labyrinth
from .leaves import (completeness_evidence, default_tol_boundary, foliation_partition_check,
                     leaf_clearance, leaf_invariance_residual, trace_leaf)

SCHEMA_VERSION = 1
ROUND_TRIP_TOL = 1e-9
FAILURE_MARKER = "FAILED"


class ArtifactError(RuntimeError):
    pass


# ---------------------------------------------------------------- serialization

def to_jsonable(obj):
    """Plain JSON types; non-finite floats become the strings "inf", "-inf", "nan"."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(obj, (complex, np.complexfloating)):
        return [to_jsonable(obj.real), to_jsonable(obj.imag)]
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"not serializable: {type(obj).__name__}")


def from_jsonable(x):
    if isinstance(x, str) and x in ("inf", "-inf", "nan"):
        return float(x)
    if isinstance(x, list):
        return [from_jsonable(v) for v in x]
    if isinstance(x, dict):
        return {k: from_jsonable(v) for k, v in x.items()}
    return x


def write_json(path, obj) -> None:
    # floats use repr: the shortest decimal that round-trips bit-exactly
    text = json.dumps(to_jsonable(obj), indent=1, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n")


def read_json(path):
    path = Path(path)
    if not path.is_file():
        raise ArtifactError(f"missing artifact: {path.name}")
    return from_jsonable(json.loads(path.read_text()))


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


# ---------------------------------------------------------------- stages

def make_labyrinth(cfg: RunConfig) -> Labyrinth:
    L = cfg.labyrinth
    return build_labyrinth(cfg.rho, cfg.stages, cfg.n, L.density, L.thickness_frac, L.per_sphere,
                           L.radius_frac, L.tilt, L.grid_step)


def save_labyrinth(out, lab: Labyrinth, cfg: RunConfig) -> None:
    write_json(Path(out) / "labyrinth.json", {
        "schema_version": SCHEMA_VERSION,
        "rho": cfg.rho,
        "delta_min": cfg.labyrinth.delta_min,
        "delta_sum": float(sum(lab.deltas)),
        "labyrinth": lab.to_dict(),
    })


def load_labyrinth(out) -> Labyrinth:
    return Labyrinth.from_dict(read_json(Path(out) / "labyrinth.json")["labyrinth"])


def save_state(out, state: InductionState) -> None:
    write_json(Path(out) / "ledger.json", {
        "schema_version": SCHEMA_VERSION,
        "completed_stages": state.stage,
        "rho": state.rho,
        "r": state.r,
        "eps": state.eps,
        "b_sups": state.b_sups,
        "stages": state.ledger,
    })
    write_json(Path(out) / "chains.json", {
        "schema_version": SCHEMA_VERSION,
        "phis": [phi.to_dict() for phi in state.phis],
    })


def load_state(out, lab: Labyrinth, cfg: RunConfig) -> InductionState:
    led = read_json(Path(out) / "ledger.json")
    chains = read_json(Path(out) / "chains.json")
    if led["completed_stages"] != cfg.stages:
        raise ArtifactError(f"ledger has {led['completed_stages']} stages, config asks for {cfg.stages}")
    state = new_state(lab, cfg.rho, cfg.induction_config(), cfg.n)
    state.stage = led["completed_stages"]
    state.r = led["r"]
    state.eps = led["eps"]
    state.b_sups = led["b_sups"]
    state.ledger = led["stages"]
    state.phis = [AutChain.from_dict(d) for d in chains["phis"]]
    Phi = identity_chain(cfg.n)
    for phi in state.phis:
        Phi = compose(phi, Phi)
    state.Phi = Phi
    return state


def run_induction(out, lab: Labyrinth, cfg: RunConfig) -> InductionState:
    state = new_state(lab, cfg.rho, cfg.induction_config(), cfg.n)
    try:
        for _ in range(cfg.stages):
            step(state)
    finally:
        save_state(out, state)  # partial ledgers are kept on failure
    return state


def _anchor(a):
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    z = a[:, 0] + 1j * a[:, 1]
    return z[:-1], complex(z[-1])


def analyze_leaves(out, state: InductionState, lab: Labyrinth, cfg: RunConfig) -> dict:
    """Trace every anchor at stages 0..I, write traces/*.csv and evidence.json."""
    out = Path(out)
    (out / "traces").mkdir(exist_ok=True)
    I = state.stage
    lc = cfg.leaves
    tol = default_tol_boundary(state, I)
    leaves = {}
    for k, a in enumerate(lc.anchors):
        leaf_id = str(k)
        c, zeta0 = _anchor(a)
        lengths = {}
        final = None
        for s in range(I + 1):
            try:
                tr = trace_leaf(c, zeta0, state, lc.step, lc.budget, tol_boundary=tol, stage=s)
            except ValueError:
                if s == I:
                    raise
                lengths[str(s)] = None  # anchor outside the stage-s domain
                continue
            write_csv(out / "traces" / f"leaf{leaf_id}_stage{s}.csv", tr.header(), tr.rows())
            lengths[str(s)] = tr.length
            final = tr
        ev = completeness_evidence(final, lab, state, leaf_id, lc.rel_tol)
        leaves[leaf_id] = {
            "anchor": list(a),
            "lengths_by_stage": lengths,
            "points": len(final.points),
            "termination": list(final.reasons),
            "tol_boundary": tol,
            "clearance": {str(i): v for i, v in leaf_clearance(final, lab).items()},
            "invariance_residual": leaf_invariance_residual(final, state),
            "evidence": ev.to_dict(),
        }
    kp = min(I, lc.partition_stage)
    radius = cfg.rho[kp - 1] if kp >= 1 else cfg.rho[0]
    pts = sample_ball(np.random.default_rng([cfg.seed, 900]), lc.n_partition, cfg.n, radius)
    try:
        fp = foliation_partition_check(pts, state, ROUND_TRIP_TOL)
        part = {"max_residual": fp["max_residual"], "count": fp["count"], "radius": radius}
    except ValueError:
        part = {"max_residual": math.inf, "count": len(pts), "radius": radius}
    conv = {}
    for i in range(1, I + 1):
        try:
            rep = convergence_report(state, i)
            conv[str(i)] = {"worst_margin": rep["worst_margin"], "rows": rep["rows"]}
        except ValueError as exc:
            conv[str(i)] = {"worst_margin": -math.inf, "error": str(exc)}
    evidence = {
        "schema_version": SCHEMA_VERSION,
        "stage": I,
        "leaves": leaves,
        "foliation_partition": part,
        "convergence": conv,
    }
    write_json(out / "evidence.json", evidence)
    return evidence


# ---------------------------------------------------------------- summary and plots

def _cert(margin, passed=None):
    if passed is None:
        passed = margin is None or margin > 0
    return {"margin": margin, "pass": bool(passed)}


def build_summary(out, cfg: RunConfig) -> dict:
    """Collect every certificate from the artifacts on disk."""
    out = Path(out)
    lab = read_json(out / "labyrinth.json")
    led = read_json(out / "ledger.json")
    ev = read_json(out / "evidence.json")
    chains = read_json(out / "chains.json")
    shells = lab["labyrinth"]["shells"]
    certs = {}
    for s in shells:
        certs[f"labyrinth.shell{s['index']}.disjoint"] = _cert(s["margin"])
    I = led["completed_stages"]
    need = I * lab["delta_min"]
    certs["labyrinth.delta_sum"] = _cert(lab["delta_sum"] - need, lab["delta_sum"] >= need)
    stages = []
    for e in led["stages"]:
        i = e["stage"]
        for k, chk in e["checks"].items():
            certs[f"stage{i}.{k}"] = _cert(chk["margin"], chk["pass"])
        certs[f"stage{i}.r_schedule"] = _cert(e["checks"]["a"]["schedule_margin"])
        stages.append({
            "stage": i,
            "r": e["r"],
            "eps": e["eps"],
            "pre_satisfied": e["pre_satisfied"],
            "chain_length": len(chains["phis"][i - 1]["maps"]),
            "margins": {k: chk["margin"] for k, chk in e["checks"].items()},
        })
    for i, c in ev["convergence"].items():
        certs[f"convergence.{i}"] = _cert(c["worst_margin"])
    leaves = {}
    for lid, lf in ev["leaves"].items():
        evd = lf["evidence"]
        certs[f"leaf{lid}.completeness"] = _cert(evd["traced_length"] - evd["bound"] + evd["tolerance"],
                                                 evd["holds"])
        certs[f"leaf{lid}.invariance"] = _cert(ROUND_TRIP_TOL - lf["invariance_residual"])
        leaves[lid] = {
            "lengths_by_stage": lf["lengths_by_stage"],
            "bound": evd["bound"],
            "i0": evd["i0"],
            "crossed": evd["crossed"],
            "invariance_residual": lf["invariance_residual"],
        }
    fp = ev["foliation_partition"]
    certs["foliation.round_trip"] = _cert(ROUND_TRIP_TOL - fp["max_residual"])
    passed = all(c["pass"] for c in certs.values())
    return {
        "schema_version": SCHEMA_VERSION,
        "status": "passed" if passed else "failed",
        "config": cfg.to_dict(),
        "stages": stages,
        "deltas": [s["delta"] for s in shells],
        "delta_sum": lab["delta_sum"],
        "leaves": leaves,
        "foliation_partition": fp,
        "certificates": certs,
        "all_passed": passed,
    }


def write_summary(out, cfg: RunConfig) -> dict:
    summ = build_summary(out, cfg)
    write_json(Path(out) / "summary.json", summ)
    return summ


def emit_plot_data(out) -> list:
    """Three CSV tables under ``out/plots``; returns their paths."""
    out = Path(out)
    if not out.is_dir() or not any(out.iterdir()):
        raise ArtifactError(f"no run artifacts in {out}")
    lab = read_json(out / "labyrinth.json")
    led = read_json(out / "ledger.json")
    ev = read_json(out / "evidence.json")
    plots = out / "plots"
    plots.mkdir(exist_ok=True)
    rows = []
    for lid in sorted(ev["leaves"], key=int):
        for s, v in sorted(ev["leaves"][lid]["lengths_by_stage"].items(), key=lambda kv: int(kv[0])):
            rows.append([int(s), lid, v])
    rows.sort(key=lambda r: (r[0], int(r[1])))
    paths = [plots / "leaf_lengths.csv", plots / "deltas.csv", plots / "margins.csv"]
    write_csv(paths[0], ["stage", "leaf_id", "length"], rows)
    write_csv(paths[1], ["shell", "delta"], [[s["index"], s["delta"]] for s in lab["labyrinth"]["shells"]])
    write_csv(paths[2], ["stage", "check", "margin"],
              [[e["stage"], k, e["checks"][k]["margin"]] for e in led["stages"] for k in sorted(e["checks"])])
    return paths


# ---------------------------------------------------------------- driver

def _fail(out: Path, phase: str, exc: BaseException) -> None:
    msg = f"{phase}: {type(exc).__name__}: {exc}"
    (out / FAILURE_MARKER).write_text(msg + "\n" + traceback.format_exc())
    write_json(out / "summary.json", {"schema_version": SCHEMA_VERSION, "status": "failed",
                                      "phase": phase, "error": msg, "all_passed": False})


def run_pipeline(cfg: RunConfig, out: Optional[os.PathLike] = None, log=None) -> int:
    """Full run; returns the exit status (0 iff every certificate passed)."""
    out = Path(out if out is not None else "runs/default")
    out.mkdir(parents=True, exist_ok=True)
    marker = out / FAILURE_MARKER
    if marker.exists():
        marker.unlink()
    say = log or (lambda s: None)
    phase = "labyrinth"
    try:
        say("building labyrinth")
        lab = make_labyrinth(cfg)
        save_labyrinth(out, lab, cfg)
        phase = "induction"
        say(f"running {cfg.stages} induction stages")
        state = run_induction(out, lab, cfg)
        phase = "leaves"
        say("tracing leaves")
        analyze_leaves(out, state, lab, cfg)
        phase = "report"
        summ = write_summary(out, cfg)
        emit_plot_data(out)
    except Exception as exc:
        _fail(out, phase, exc)
        say(f"failed during {phase}: {exc}")
        return 1
    if not summ["all_passed"]:
        bad = sorted(k for k, c in summ["certificates"].items() if not c["pass"])
        marker.write_text("certificates failed: " + ", ".join(bad) + "\n")
        return 1
    return 0
