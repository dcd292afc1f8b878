"""Finite-stage run of the inductive construction.

Each stage chooses ``r_i`` and ``eps_i``, calls :func:`lemma_main` for the
plates of shell ``i`` and records sampled margins for conditions (a_i)-(e_i).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .automorphisms import AutChain, compose, identity_chain
from .geometry import CPoint, as_complex, as_real, ball, coordinate_circles, norms, sample_ball, sample_slab, sample_sphere
from .labyrinth import Labyrinth, Plate
from .mover import MoverConfig, lemma_main, slab_norm


@dataclass
class InductionConfig:
    eps0: float = 0.05
    seed: int = 0
    R_trunc: float = 10.0
    r_margin: float = 0.5  # absolute margin added to the sampled max for r_i
    r_rel: float = 0.25  # relative margin, dominant once Phi^{-1} is large on B_i
    n_sphere: int = 10000  # boundary samples for r_i and the (b_i) sup
    heldout: int = 4  # density factor of held-out re-verification
    n_slab: int = 20000  # slab samples per j for (c_i)
    n_local: int = 20000  # samples per plate neighbourhood for (e_i)
    n_plate: int = 2000
    mover: MoverConfig = field(default_factory=MoverConfig)


@dataclass
class InductionState:
    n: int
    rho: List[float]
    labyrinth: Labyrinth
    cfg: InductionConfig
    stage: int = 0
    r: List[float] = field(default_factory=lambda: [0.0])
    eps: List[float] = field(default_factory=list)
    phis: List[AutChain] = field(default_factory=list)
    Phi: Optional[AutChain] = None
    ledger: List[dict] = field(default_factory=list)
    b_sups: List[float] = field(default_factory=list)
    plate_overrides: dict = field(default_factory=dict)  # stage -> plates passed to step()

    def __post_init__(self):
        if not self.eps:
            self.eps = [self.cfg.eps0]
        if self.Phi is None:
            self.Phi = identity_chain(self.n)

    def rng(self, stage: int, purpose: int) -> np.random.Generator:
        return np.random.default_rng([self.cfg.seed, stage, purpose])

    def plates(self, i: int) -> List[Plate]:
        if i in self.plate_overrides:
            return self.plate_overrides[i]
        return self.labyrinth.plates[i - 1]

    def chain_between(self, i: int, k: int) -> AutChain:
        """``phi_k o ... o phi_{i+1}``, i.e. ``Phi_k o Phi_i^{-1}`` without cancellation."""
        out = identity_chain(self.n)
        for j in range(i + 1, k + 1):
            out = compose(self.phis[j - 1], out)
        return out


def state_at(state: InductionState, k: int) -> InductionState:
    """Copy of ``state`` truncated after stage ``k``."""
    if not 0 <= k <= state.stage:
        raise ValueError("stage out of range")
    Phi = identity_chain(state.n)
    for phi in state.phis[:k]:
        Phi = compose(phi, Phi)
    return InductionState(state.n, list(state.rho), state.labyrinth, state.cfg, k, state.r[:k + 1],
                          state.eps[:k + 1], state.phis[:k], Phi, state.ledger[:k], state.b_sups[:k],
                          {i: p for i, p in state.plate_overrides.items() if i <= k})


def new_state(labyrinth: Labyrinth, rho: Sequence[float], cfg: Optional[InductionConfig] = None,
              n: int = 2) -> InductionState:
    return InductionState(n, [float(x) for x in rho], labyrinth, cfg or InductionConfig())


def _sphere_probe(state: InductionState, radius: float, m: int, rng) -> np.ndarray:
    return np.concatenate([sample_sphere(rng, m, state.n, radius), coordinate_circles(state.n, radius, 256)])


def sampled_slab_radius(state: InductionState, i: int, m: int, rng) -> float:
    """Sampled max of ``max_{k<n} |Phi_{i-1}^{-1}(p)_k|`` over the sphere of radius rho_i.

    The map is holomorphic, so the sup over the ball is attained on its boundary.
    """
    X, _ = state.Phi.apply_inverse(_sphere_probe(state, state.rho[i - 1], m, rng))
    return float(np.max(slab_norm(X)))


def choose_r(state: InductionState) -> float:
    i = state.stage + 1
    cfg = state.cfg
    m = sampled_slab_radius(state, i, cfg.n_sphere, state.rng(i, 1))
    return max(m + max(cfg.r_margin, cfg.r_rel * m), state.r[i - 1] + 1.01)


def _refine_distance(Phi: AutChain, plates: Sequence[Plate], cands: Sequence[np.ndarray], r: float,
                     rho: float, rng, iters: int = 30, proposals: int = 8, polish: int = 8):
    """Local descent of the plate distance over points of ``Phi(r P x C) cap B``.

    ``cands[k]`` are starting points for ``plates[k]``. Alternates a bisection
    towards the nearest plate point with random moves of shrinking size; only
    moves that stay in the set are accepted. Returns ``(distance, point)``.
    """
    owner = np.concatenate([np.full(len(c), k) for k, c in enumerate(cands)])
    Y = np.concatenate(cands)
    groups = [(p, owner == k) for k, p in enumerate(plates) if len(cands[k])]

    def dist(Z):
        out = np.empty(len(Z))
        for p, sel in groups:
            out[sel] = p.signed_distance(Z[sel])
        return out

    def nearest(Z):
        out = np.empty_like(Z)
        for p, sel in groups:
            out[sel] = p.closest_point(Z[sel])
        return out

    def inside(Z):
        X, esc = Phi.apply_inverse(Z)
        return ~esc & (slab_norm(X) <= r) & (norms(Z) <= rho)

    d = dist(Y)
    sigma = np.maximum(d, 1e-6)
    for _ in range(iters):
        Q = nearest(Y)
        lo, hi = np.zeros(len(Y)), np.ones(len(Y))
        for _ in range(30):
            mid = (lo + hi) / 2
            ok = inside(Y + mid[:, None] * (Q - Y))
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        Y = Y + lo[:, None] * (Q - Y)
        d = dist(Y)
        if np.min(d) <= 0:
            break
        moved = np.zeros(len(Y), bool)
        for _ in range(proposals):
            Z = Y + sample_ball(rng, len(Y), Y.shape[1], 1.0) * (sigma * 0.5)[:, None]
            dz = dist(Z)
            acc = (dz < d) & inside(Z)
            Y[acc], d[acc] = Z[acc], dz[acc]
            moved |= acc
        sigma = np.where(moved, sigma, sigma / 2)
    k0 = int(np.argmin(d))
    best, point = float(d[k0]), Y[k0]
    if best <= 0:
        return best, point
    for k in np.argsort(d)[:polish]:
        dk, yk = _polish(Phi, plates[owner[k]], Y[k], r, rho)
        if dk < best:
            best, point = dk, yk
    return best, point


def _polish(Phi: AutChain, plate: Plate, y: np.ndarray, r: float, rho: float) -> float:
    """SLSQP on ``min dist(y, plate)`` s.t. ``y`` stays in ``Phi(r P x C) cap B``."""

    def pt(x):
        return as_complex(x)[None, :]

    def slack(x):
        X, esc = Phi.apply_inverse(pt(x))
        return -1.0 if esc[0] else float(r - slab_norm(X)[0])

    cons = [{"type": "ineq", "fun": slack}, {"type": "ineq", "fun": lambda x: rho - float(np.linalg.norm(x))}]
    res = minimize(lambda x: float(plate.signed_distance(pt(x))[0]), as_real(y), method="SLSQP",
                   constraints=cons, options={"maxiter": 200, "ftol": 1e-14})
    x = res.x
    if slack(x) >= 0 and np.linalg.norm(x) <= rho:
        return float(plate.signed_distance(pt(x))[0]), as_complex(x)
    return math.inf, y


def avoidance_distance(state: InductionState, i: int, j: int, m: Optional[int] = None,
                       purpose: int = 100, refine: int = 32, return_point: bool = False):
    """Sampled distance between ``Phi_{i-1}(r_j P x C) cap B_i`` and ``Gamma_j``.

    Two sample families: slab points pushed forward by ``Phi_{i-1}``, and
    points of a neighbourhood of each plate that pull back into the slab. The
    ``refine`` closest points per plate are then improved by local descent.
    The neighbourhood radius itself bounds the distance when nothing is found.
    With ``return_point`` the closest point found (or ``None``) is returned too.
    """
    cfg = state.cfg
    m = cfg.n_local if m is None else m
    rng = state.rng(i, purpose + j)
    rho_i = state.rho[i - 1]
    r_j = state.r[j]
    shell = state.labyrinth.shells[j - 1]
    lam = shell.width / 2
    S = sample_slab(rng, cfg.n_slab, state.n, r_j, cfg.R_trunc)
    W, esc = state.Phi.apply(S)
    W = W[~esc & (norms(W) <= rho_i)]
    best, point = lam, None
    cands = []
    for p in state.plates(j):
        Y = sample_ball(rng, m, state.n, p.bounding_radius + lam) + p.center
        Y = Y[norms(Y) <= rho_i]
        X, esc = state.Phi.apply_inverse(Y)
        hits = np.concatenate([W, Y[~esc & (slab_norm(X) <= r_j)]])
        dist = p.signed_distance(hits)
        order = np.argsort(dist)
        if len(hits) and dist[order[0]] < best:
            best, point = float(dist[order[0]]), hits[order[0]]
        top = order[:refine]
        cands.append(hits[top][dist[top] < lam])
    if refine and any(len(c) for c in cands):
        d, y = _refine_distance(state.Phi, state.plates(j), cands, r_j, rho_i, rng)
        if d < best:
            best, point = d, y
    return (best, point) if return_point else best


D_SAFETY = 0.9  # eps_i uses this fraction of the sampled (e_i) distance


def choose_eps(state: InductionState):
    """Returns ``(eps_i, d_i)``; ``d_i`` is ``None`` when clause (e_i) is vacuous."""
    i = state.stage + 1
    base = min(state.eps[i - 1] / 2, state.rho[i] - state.rho[i - 1])
    if i == 1:
        return base / 2, None
    d = min(avoidance_distance(state, i, j) for j in range(1, i))
    if d <= 0:
        raise RuntimeError(f"induction broken at stage {i}")
    return min(base, D_SAFETY * d) / 2, d


def _b_sup(chain: AutChain, radius: float, n: int, m: int, rng) -> float:
    Z = np.concatenate([sample_sphere(rng, m, n, radius), sample_ball(rng, m, n, radius)])
    W, esc = chain.apply(Z)
    return math.inf if esc.any() else float(np.max(norms(W - Z)))


def step(state: InductionState, plates_i: Optional[Sequence[Plate]] = None) -> InductionState:
    """Run stage ``i = state.stage + 1`` in place and return the state."""
    i = state.stage + 1
    if i >= len(state.rho):
        raise ValueError("radius schedule too short for another stage")
    cfg = state.cfg
    if plates_i is not None:
        state.plate_overrides[i] = list(plates_i)
    plates_i = state.plates(i)
    r_i = choose_r(state)
    eps_i, d_i = choose_eps(state)
    # (e_i) re-verified on a denser held-out neighbourhood sample
    d_held = None if d_i is None else min(
        avoidance_distance(state, i, j, m=cfg.heldout * cfg.n_local, purpose=400) for j in range(1, i))
    rho_i = state.rho[i - 1]
    Phi_prev = state.Phi

    theta, rep = lemma_main(ball(rho_i, state.n), plates_i, Phi_prev, r_i, eps_i, cfg=cfg.mover,
                            seed=cfg.seed * 1000 + i)
    if not rep.passed:
        raise RuntimeError(f"stage {i}: lemma_main failed: {rep.to_dict()}")

    # (a_i) on held-out denser boundary samples
    a_max = sampled_slab_radius(state, i, cfg.heldout * cfg.n_sphere, state.rng(i, 2))
    # (b_i) on the fit density and on held-out denser samples
    b = _b_sup(theta, rho_i, state.n, cfg.n_sphere, state.rng(i, 3))
    b_held = _b_sup(theta, rho_i, state.n, cfg.heldout * cfg.n_sphere, state.rng(i, 4))

    state.stage = i
    state.r.append(r_i)
    state.eps.append(eps_i)
    state.phis.append(theta)
    state.Phi = compose(theta, Phi_prev)
    state.b_sups.append(max(b, b_held))

    c_fwd, c_inv = [], []
    for j in range(1, i + 1):
        rng = state.rng(i, 200 + j)
        S = sample_slab(rng, cfg.n_slab, state.n, state.r[j], cfg.R_trunc)
        W, _ = state.Phi.apply(S)
        Yp = [p.sample(rng, cfg.n_plate) for p in state.plates(j)]
        c_fwd.append(min((float(np.min(p.signed_distance(W))) for p in state.plates(j)), default=math.inf))
        inv = math.inf
        for Y in Yp:
            X, _ = state.Phi.apply_inverse(Y)
            inv = min(inv, float(np.min(slab_norm(X))) - state.r[j])
        c_inv.append(inv)
        if c_fwd[-1] <= 0 or c_inv[-1] <= 0:
            raise RuntimeError("avoidance violated")

    d_bound = min(state.eps[i - 1] / 2, state.rho[i] - state.rho[i - 1])
    entry = {
        "stage": i,
        "rho": rho_i,
        "r": r_i,
        "eps": eps_i,
        "pre_satisfied": rep.pre_satisfied,
        "lemma": rep.to_dict(),
        "checks": {
            "a": {"margin": r_i - a_max, "schedule_margin": r_i - state.r[i - 1] - 1,
                  "sampled_max": a_max, "samples": cfg.heldout * cfg.n_sphere},
            "b": {"margin": eps_i - max(b, b_held), "sup": b, "sup_heldout": b_held,
                  "samples": 2 * cfg.n_sphere, "samples_heldout": 2 * cfg.heldout * cfg.n_sphere},
            "c": {"margin": min(min(c_fwd), min(c_inv)), "forward_clearance": c_fwd,
                  "inverse_margin": c_inv, "slab_samples": cfg.n_slab},
            "d": {"margin": d_bound - eps_i},
            "e": ({"vacuous": True, "margin": None} if d_i is None
                  else {"vacuous": False, "margin": min(d_i, d_held) / 2 - eps_i, "distance": d_i,
                        "distance_heldout": d_held}),
        },
    }
    for k in "abcde":
        m = entry["checks"][k]["margin"]
        entry["checks"][k]["pass"] = (m is None) or (m > 0)
    if not all(entry["checks"][k]["pass"] for k in "abcde") or entry["checks"]["a"]["schedule_margin"] <= 0:
        raise RuntimeError(f"stage {i}: ledger check failed: {entry['checks']}")
    state.ledger.append(entry)
    return state


def run(labyrinth: Labyrinth, rho: Sequence[float], stages: int, cfg: Optional[InductionConfig] = None,
        n: int = 2) -> InductionState:
    state = new_state(labyrinth, rho, cfg, n)
    for _ in range(stages):
        step(state)
    return state


def convergence_report(state: InductionState, i: int, samples=None, m: int = 10000) -> dict:
    """Sampled ``sup |Phi_k o Phi_i^{-1}(z) - z|`` on B_i for ``i <= k <= I``.

    ``Phi_k o Phi_i^{-1}`` is evaluated as ``phi_k o ... o phi_{i+1}``, which is
    the same map without the cancellation of two huge terms.
    """
    I = state.stage
    if not 1 <= i <= I:
        raise ValueError("stage out of range")
    if samples is None:
        rng = state.rng(i, 300)
        Z = np.concatenate([sample_sphere(rng, m // 2, state.n, state.rho[i - 1]),
                            sample_ball(rng, m - m // 2, state.n, state.rho[i - 1])])
    else:
        Z = as_complex(samples)
    rows = []
    for k in range(i, I + 1):
        W, esc = state.chain_between(i, k).apply(Z)
        dev = np.where(esc, np.inf, norms(W - Z))
        sup = float(np.max(dev))
        bound = sum(state.b_sups[j - 1] for j in range(i + 1, k + 1))
        if not sup < state.eps[i]:
            bad = int(np.argmax(dev))
            raise ValueError(f"estimate violated at stage {k} for sample {Z[bad].tolist()}")
        rows.append({"k": k, "sup": sup, "telescoping_bound": bound, "margin": state.eps[i] - sup})
    return {"i": i, "eps_i": state.eps[i], "samples": len(Z), "rows": rows,
            "worst_margin": min(r["margin"] for r in rows)}


class OmegaModel:
    """Stage-I approximation of ``Omega = union of Phi_i^{-1}(B_i)``."""

    def __init__(self, state: InductionState):
        self.state = state
        self._chains = []
        Phi = identity_chain(state.n)
        for phi in state.phis:
            Phi = compose(phi, Phi)
            self._chains.append(Phi)

    def membership_many(self, Z) -> np.ndarray:
        """Smallest stage ``i`` with ``|Phi_i(p)| <= rho_i - eps_i``, or 0 for unknown."""
        Z = np.atleast_2d(as_complex(Z))
        out = np.zeros(len(Z), int)
        for i, Phi in enumerate(self._chains, start=1):
            W, esc = Phi.apply(Z)
            hit = (out == 0) & ~esc & (norms(W) <= self.state.rho[i - 1] - self.state.eps[i])
            out[hit] = i
        return out

    def membership(self, p):
        k = int(self.membership_many(as_complex(p)[None, :])[0])
        return k if k else "unknown"


def omega_membership(p, state: InductionState):
    return OmegaModel(state).membership(p)
