"""Tracing leaves ``Phi_I({z' = c})`` and collecting completeness evidence."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .automorphisms import AutChain
from .geometry import as_complex, norms
from .induction import InductionState, OmegaModel
from .labyrinth import Labyrinth


@dataclass
class LeafTrace:
    c: np.ndarray  # complex (n-1,)
    zeta0: complex
    zetas: np.ndarray  # complex (K,), ordered along the arc
    points: np.ndarray  # complex (K, n)
    lengths: np.ndarray  # cumulative chord length, lengths[0] = 0
    anchor_index: int
    reasons: tuple  # (backward, forward): "exited" or "budget"
    step: float
    tol_boundary: float
    stage: int

    @property
    def length(self) -> float:
        return float(self.lengths[-1])

    def halves(self):
        """Point arrays from the anchor outwards, backward half first."""
        a = self.anchor_index
        return self.points[a::-1], self.points[a:]

    def rows(self) -> list:
        out = []
        for z, p, s in zip(self.zetas, self.points, self.lengths):
            row = [z.real, z.imag]
            for w in p:
                row += [w.real, w.imag]
            out.append(row + [s])
        return out

    def header(self) -> list:
        n = self.points.shape[1]
        cols = ["zeta_re", "zeta_im"]
        for k in range(1, n + 1):
            cols += [f"p{k}_re", f"p{k}_im"]
        return cols + ["length"]


def default_tol_boundary(state: InductionState, stage: Optional[int] = None) -> float:
    """``(1 - rho_{I+1}) / 2``: just past the outer sphere of the last built shell."""
    I = state.stage if stage is None else stage
    return (1 - state.rho[I]) / 2


def stage_chain(state: InductionState, stage: Optional[int] = None) -> AutChain:
    from .automorphisms import compose, identity_chain

    I = state.stage if stage is None else stage
    Phi = identity_chain(state.n)
    for phi in state.phis[:I]:
        Phi = compose(phi, Phi)
    return Phi


def _march(Phi: AutChain, c: np.ndarray, z0: complex, direction: float, bound: float,
           step: float, budget: int):
    def image(z):
        W, esc = Phi.apply(np.append(c, z)[None, :])
        return W[0], bool(esc[0])

    zs, ps = [z0], [image(z0)[0]]
    ds = step / 4
    while len(zs) < budget:
        z = zs[-1] + direction * ds
        p, esc = image(z)
        r = math.inf if esc else float(np.linalg.norm(p))
        chord = math.inf if esc else float(np.linalg.norm(p - ps[-1]))
        if r >= bound:
            # bisect for the crossing of |p| = bound
            lo, hi = 0.0, ds
            for _ in range(80):
                mid = (lo + hi) / 2
                q, e = image(zs[-1] + direction * mid)
                if not e and np.linalg.norm(q) < bound:
                    lo = mid
                else:
                    hi = mid
                if hi - lo < 1e-15:
                    break
            zc = zs[-1] + direction * lo
            q, _ = image(zc)
            if np.linalg.norm(q - ps[-1]) > step:
                ds = lo / 2
                if ds < 1e-14:
                    break
                continue
            if lo > 0:
                zs.append(zc)
                ps.append(q)
            return zs, ps, "exited"
        if chord > step:
            ds /= 2
            continue
        zs.append(z)
        ps.append(p)
        if chord < step / 2:
            ds *= 1.5
    return zs, ps, "budget"


def trace_leaf(c, zeta0: complex, state: InductionState, step: float = 0.005, budget: int = 20000,
               tol_boundary: Optional[float] = None, stage: Optional[int] = None) -> LeafTrace:
    """March along real ``zeta`` in both directions from ``zeta0``.

    Stops when the image leaves the ball of radius ``1 - tol_boundary`` (the
    last point lies on that sphere) or after ``budget`` points per direction.
    """
    I = state.stage if stage is None else stage
    c = np.atleast_1d(np.asarray(c, dtype=complex))
    if len(c) != state.n - 1:
        raise ValueError("c must have n-1 components")
    tol = default_tol_boundary(state, I) if tol_boundary is None else tol_boundary
    bound = 1 - tol
    Phi = stage_chain(state, I)
    anchor = np.append(c, zeta0)
    if I > 0:
        model = OmegaModel(state)
        member = model.membership_many(anchor[None, :])[0]
        if member == 0 or member > I:
            raise ValueError("anchor not in domain")
    W, esc = Phi.apply(anchor[None, :])
    if esc[0] or np.linalg.norm(W[0]) >= bound:
        raise ValueError("anchor not in domain")
    zb, pb, rb = _march(Phi, c, complex(zeta0), -1.0, bound, step, budget)
    zf, pf, rf = _march(Phi, c, complex(zeta0), 1.0, bound, step, budget)
    zetas = np.array(zb[::-1] + zf[1:])
    points = np.array(pb[::-1] + pf[1:])
    seg = norms(np.diff(points, axis=0))
    lengths = np.concatenate([[0.0], np.cumsum(seg)])
    return LeafTrace(c, complex(zeta0), zetas, points, lengths, len(zb) - 1, (rb, rf), step, tol, I)


def first_controlled_stage(trace: LeafTrace, state: InductionState) -> Optional[int]:
    """Smallest ``i_0 <= I`` with the anchor image in ``B_{i_0}`` and ``|c|_inf < r_{i_0}``."""
    anchor = np.append(trace.c, trace.zeta0)
    cinf = float(np.max(np.abs(trace.c))) if len(trace.c) else 0.0
    for i in range(1, trace.stage + 1):
        W, esc = stage_chain(state, i).apply(anchor[None, :])
        if not esc[0] and np.linalg.norm(W[0]) < state.rho[i - 1] and cinf < state.r[i]:
            return i
    return None


def leaf_clearance(trace: LeafTrace, labyrinth: Labyrinth, shells: Optional[List[int]] = None) -> dict:
    """Per shell: min distance from trace points inside the shell to its plates."""
    r = norms(trace.points)
    out = {}
    for s, plates in zip(labyrinth.shells, labyrinth.plates):
        if shells is not None and s.index not in shells:
            continue
        P = trace.points[(r >= s.inner) & (r < s.outer)]
        if not plates or not len(P):
            out[s.index] = math.inf
            continue
        out[s.index] = float(min(np.min(p.signed_distance(P)) for p in plates))
    return out


@dataclass
class CompletenessEvidence:
    leaf_id: str
    i0: Optional[int]
    clearances: dict
    crossed: List[List[int]]  # per half, shells fully crossed
    bound: float
    traced_length: float
    tolerance: float
    holds: bool

    def to_dict(self) -> dict:
        return {
            "leaf_id": self.leaf_id,
            "i0": self.i0,
            "clearances": {str(k): v for k, v in self.clearances.items()},
            "crossed": self.crossed,
            "bound": self.bound,
            "traced_length": self.traced_length,
            "tolerance": self.tolerance,
            "holds": self.holds,
        }


def _crossed(P: np.ndarray, shells, lo_index: int) -> List[int]:
    r = norms(P)
    out = []
    for s in shells:
        if s.index < lo_index:
            continue
        inside = np.nonzero(r <= s.inner)[0]
        if not len(inside):
            continue
        after = r[inside[0]:]
        if np.any(after >= s.outer - 1e-12):
            out.append(s.index)
    return out


def completeness_evidence(trace: LeafTrace, labyrinth: Labyrinth, state: InductionState,
                          leaf_id: str = "0", rel_tol: float = 0.1) -> CompletenessEvidence:
    """Sum of certified deltas over avoided shells crossed by each half of the arc."""
    i0 = first_controlled_stage(trace, state)
    I = trace.stage
    shells = [s for s in labyrinth.shells if s.index <= I]
    if i0 is None:
        clear = {}
        crossed = [[], []]
    else:
        clear = leaf_clearance(trace, labyrinth, list(range(i0, I + 1)))
        if any(v <= 0 for v in clear.values()):
            raise ValueError("leaf hits labyrinth; certificates inconsistent")
        crossed = [_crossed(h, shells, i0) for h in trace.halves()]
    delta = {s.index: d for s, d in zip(labyrinth.shells, labyrinth.deltas)}
    bound = float(sum(delta[k] for half in crossed for k in half))
    tol = rel_tol * bound
    holds = trace.length >= bound - tol
    return CompletenessEvidence(leaf_id, i0, clear, crossed, bound, trace.length, tol, holds)


def leaf_invariance_residual(trace: LeafTrace, state: InductionState) -> float:
    """Max over trace points of ``|Phi_I^{-1}(p)' - c|``."""
    X, esc = stage_chain(state, trace.stage).apply_inverse(trace.points)
    if esc.any():
        return math.inf
    return float(np.max(np.abs(X[:, :-1] - trace.c)))


def foliation_partition_check(points, state: InductionState, threshold: float = 1e-9) -> dict:
    """Leaf labels ``c(p)`` and round-trip residuals ``|Phi_I(Phi_I^{-1}(p)) - p|``.

    Evaluated in extended precision: on later balls ``Phi_I^{-1}`` reaches
    magnitudes where a double round trip loses more than ``threshold``.
    """
    Z = np.atleast_2d(as_complex(points))
    Phi = state.Phi
    X, esc1 = Phi.apply_inverse(Z, dtype=np.clongdouble)
    Y, esc2 = Phi.apply(X, dtype=np.clongdouble)
    with np.errstate(invalid="ignore"):
        res = np.sqrt(np.sum(np.abs(Y - Z.astype(np.clongdouble)) ** 2, axis=1)).astype(float)
    res[esc1 | esc2] = np.inf
    if not np.all(res < threshold):
        raise ValueError("chain arithmetic degraded")
    return {
        "c": X[:, :-1].astype(complex),
        "residuals": res,
        "max_residual": float(np.max(res)),
        "count": len(Z),
    }


def same_leaf(p, q, state: InductionState, tol: float = 1e-9, k: int = 200):
    """True/False when decided on samples; ``"unknown"`` if the straight zeta segment leaves Omega_I."""
    Z = np.array([as_complex(p), as_complex(q)])
    X, _ = state.Phi.apply_inverse(Z, dtype=np.clongdouble)
    X = X.astype(complex)
    if np.max(np.abs(X[0, :-1] - X[1, :-1])) > tol:
        return False
    t = np.linspace(0, 1, k)[:, None]
    seg = X[0] * (1 - t) + X[1] * t
    seg[:, :-1] = X[0, :-1]
    inside = OmegaModel(state).membership_many(seg) > 0
    return True if inside.all() else "unknown"
