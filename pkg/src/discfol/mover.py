"""Moving disjoint convex pieces with shears.

``lemma_starshaped`` builds an automorphism that is close to a prescribed
translation on each piece (the identity on the first piece ``K_0``).
``lemma_main`` uses it to push labyrinth plates off the image of a slab and
returns the inverse map together with sampled certificates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import cvxpy as cp
import numpy as np
from scipy.spatial import Delaunay

from .automorphisms import AutChain, PolyFunc, arnoldi_basis, identity_chain, shear
from .geometry import BallRegion, as_complex, as_real, norms, sample_ball, sample_slab, sample_sphere
from .labyrinth import Plate

DEGREES = (0, 1, 2, 4, 8, 12, 16, 24, 32, 40, 48, 64, 80, 96, 112, 128, 160, 192, 256)


# -- plateau fits --------------------------------------------------------------


@dataclass
class FitResult:
    poly: PolyFunc
    degree: int
    ratio: float  # max over sets of error / tolerance on the fit nodes
    errors: List[float]


def _check_separated(sets: Sequence[np.ndarray]) -> None:
    pts = [np.asarray(S, dtype=complex).ravel() for S in sets]
    hulls = []
    for S in pts:
        X = np.column_stack([S.real, S.imag])
        try:
            hulls.append(Delaunay(X) if len(S) >= 3 else None)
        except Exception:  # collinear or repeated nodes
            hulls.append(None)
    for i in range(len(pts)):
        for j in range(len(pts)):
            if i == j:
                continue
            if j > i and np.min(np.abs(pts[i][:, None] - pts[j][None])) == 0:
                raise ValueError("sample sets overlap")
            if hulls[j] is not None:
                X = np.column_stack([pts[i].real, pts[i].imag])
                if np.any(hulls[j].find_simplex(X) >= 0):
                    raise ValueError("sample sets overlap")


def fit_values(sets: Sequence[np.ndarray], values: Sequence[complex], tols: Sequence[float],
               max_degree: int, target: float = 0.5) -> FitResult:
    """Polynomial f with ``|f - values[j]| <= tols[j]`` on ``sets[j]``.

    Weighted minimax over an Arnoldi basis, with degree escalation until the
    worst error/tolerance ratio drops below ``target``. The sets are boundary
    samples of the regions; by the maximum principle this controls the
    interiors too.
    """
    if max_degree < 0:
        raise ValueError("degree must be non-negative")
    sets = [np.atleast_1d(np.asarray(S, dtype=complex)).ravel() for S in sets]
    _check_separated(sets)
    Z = np.concatenate(sets)
    lo = complex(Z.real.min(), Z.imag.min())
    hi = complex(Z.real.max(), Z.imag.max())
    center = (lo + hi) / 2
    scale = float(np.max(np.abs(Z - center))) or 1.0
    u = (Z - center) / scale
    idx = np.cumsum([0] + [len(S) for S in sets])
    schedule = [d for d in DEGREES if d < max_degree] + [max_degree]
    best: Optional[FitResult] = None
    for deg in schedule:
        H, Q = arnoldi_basis(u, deg)
        c = cp.Variable(deg + 1, complex=True)
        t = cp.Variable(nonneg=True)
        cons = [
            cp.abs(Q[idx[j]:idx[j + 1]] @ c - values[j]) <= t * tols[j]
            for j in range(len(sets))
        ]
        prob = cp.Problem(cp.Minimize(t), cons)
        try:
            prob.solve(solver=cp.CLARABEL)
        except cp.error.SolverError:
            prob.solve(solver=cp.SCS, eps=1e-10, max_iters=100000)
        if c.value is None:
            continue
        coef = np.asarray(c.value)
        poly = PolyFunc(coef, center, scale, H if deg > 0 else None)
        F = Q @ coef
        errs = [float(np.max(np.abs(F[idx[j]:idx[j + 1]] - values[j]))) for j in range(len(sets))]
        ratio = max(e / tl for e, tl in zip(errs, tols))
        res = FitResult(poly, deg, ratio, errs)
        if best is None or ratio < best.ratio:
            best = res
        if ratio <= target:
            return res
    if best is None or best.ratio > 1:
        raise ValueError("plateau fit failed; increase degree or margins")
    return best


def fit_plateau_poly(on_sets, off_sets, degree: int, tol: float):
    """Polynomial close to 1 on the on-sets and to 0 on the off-sets.

    Returns ``(PolyFunc, achieved error)``.
    """
    on = [np.atleast_1d(np.asarray(S, dtype=complex)) for S in on_sets]
    off = [np.atleast_1d(np.asarray(S, dtype=complex)) for S in off_sets]
    res = fit_values(on + off, [1.0] * len(on) + [0.0] * len(off), [tol] * (len(on) + len(off)), degree)
    return res.poly, max(res.errors)


# -- pieces ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BallPiece:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=complex))

    @property
    def bound(self):
        return self.center, self.radius

    def projection_boundary(self, v: np.ndarray, k: int) -> np.ndarray:
        r = self.radius * np.linalg.norm(v)
        return self.center @ v + r * np.exp(2j * np.pi * np.arange(k) / k)

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        n = len(self.center)
        half = m // 2
        S = np.concatenate([sample_sphere(rng, half, n, self.radius), sample_ball(rng, m - half, n, self.radius)])
        return S + self.center


@dataclass(frozen=True, eq=False)
class PlatePiece:
    """A solid plate dilated by ``margin``."""

    plate: Plate
    margin: float = 0.0

    @property
    def bound(self):
        return self.plate.center, self.plate.bounding_radius + self.margin

    def projection_boundary(self, v: np.ndarray, k: int) -> np.ndarray:
        # image of (segment x disc) + ball under the R-linear map x -> v.z
        p = self.plate
        n = len(v)
        vr = np.empty((2, 2 * n))
        vr[0, 0::2], vr[0, 1::2] = v.real, -v.imag
        vr[1, 0::2], vr[1, 1::2] = v.imag, v.real
        M = vr @ p.basis  # 2 x (2n-1)
        a = vr @ p.normal
        th = 2 * np.pi * np.arange(k) / k
        D = np.stack([np.cos(th), np.sin(th)])  # 2 x k
        MD = M.T @ D
        nrm = np.linalg.norm(MD, axis=0)
        U = np.where(nrm > 0, p.radius / np.where(nrm > 0, nrm, 1), 0.0) * MD
        X = M @ U + p.thickness * np.sign(a @ D) * a[:, None] + self.margin * np.linalg.norm(v) * D
        return p.center @ v + X[0] + 1j * X[1]

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        Z = self.plate.sample(rng, m)
        if self.margin > 0:
            n = len(self.plate.center)
            off = sample_sphere(rng, m, n, 1.0) * (self.margin * rng.random(m) ** (1 / (2 * n)))[:, None]
            off[: m // 2] *= self.margin / np.maximum(norms(off[: m // 2]), 1e-300)[:, None]
            Z = Z + off
        return Z


@dataclass
class MoveSpec:
    """Pieces ``K_0..K_m`` (``K_0`` stays put) and translations ``t_j``."""

    pieces: list
    translations: list
    tolerances: list

    def __post_init__(self):
        m = len(self.pieces)
        self.translations = [np.asarray(t, dtype=complex) for t in self.translations]
        if isinstance(self.tolerances, (int, float)):
            self.tolerances = [float(self.tolerances)] * m
        if len(self.translations) != m or len(self.tolerances) != m:
            raise ValueError("one translation and tolerance per piece")
        if np.any(self.translations[0] != 0):
            raise ValueError("K_0 must stay fixed")
        if any(not t > 0 for t in self.tolerances):
            raise ValueError("tolerances must be positive")


@dataclass
class FitReport:
    errors: List[float]
    tolerances: List[float]
    chain_length: int
    sample_counts: List[int]
    degrees: List[int]
    fit_ratios: List[float]
    seed: int
    passed: bool

    def to_dict(self) -> dict:
        return {
            "errors": self.errors,
            "tolerances": self.tolerances,
            "chain_length": self.chain_length,
            "sample_counts": self.sample_counts,
            "degrees": self.degrees,
            "fit_ratios": self.fit_ratios,
            "seed": self.seed,
            "passed": self.passed,
        }


def _balls_disjoint(bounds) -> bool:
    for i in range(len(bounds)):
        for j in range(i + 1, len(bounds)):
            (ci, ri), (cj, rj) = bounds[i], bounds[j]
            if np.linalg.norm(ci - cj) <= ri + rj:
                return False
    return True


def _direction(t: np.ndarray):
    """Unit direction with a canonical phase, and the complex amplitude."""
    e = t / np.linalg.norm(t)
    k = int(np.argmax(np.abs(e) > 1e-12))
    e = e * (abs(e[k]) / e[k])
    return e, complex(np.sum(t * e.conj()))


def _functional(e: np.ndarray, centers: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Unit complex vector v with ``sum(v * e) = 0`` separating the centres well."""
    n = len(e)
    if n == 2:
        v = np.array([-e[1], e[0]])
        return v / np.linalg.norm(v)
    _, _, Vh = np.linalg.svd(e[None, :])
    N = Vh[1:].T  # null space of z -> sum(e z)
    best, best_v = -1.0, None
    for k in range(64):
        w = N[:, k] if k < N.shape[1] else N @ (rng.standard_normal(N.shape[1]) + 1j * rng.standard_normal(N.shape[1]))
        w = w / np.linalg.norm(w)
        p = centers @ w
        gap = np.min(np.abs(p[:, None] - p[None]) + np.eye(len(p)) * 1e300) if len(p) > 1 else 1.0
        if gap > best:
            best, best_v = gap, w
    return best_v


def lemma_starshaped(spec: MoveSpec, max_degree: int = 128, seed: int = 0, n_check: int = 1000,
                     k_boundary: int = 256, k_boundary0: int = 1024):
    """Automorphism close to ``z + t_j`` on piece ``K_j``; returns ``(chain, FitReport)``.

    Pieces sharing a translation direction are moved by one shear whose
    polynomial is fitted on the projections of all pieces. Groups are
    processed in decreasing distance from ``K_0``; the final chain is
    certified on fresh samples of every piece.
    """
    rng = np.random.default_rng(seed)
    pieces = spec.pieces
    m = len(pieces)
    n = len(pieces[0].center if isinstance(pieces[0], BallPiece) else pieces[0].plate.center)
    if not _balls_disjoint([p.bound for p in pieces]):
        raise ValueError("pieces not disjoint")
    targets = [(c + t, r) for (c, r), t in zip((p.bound for p in pieces), spec.translations)]
    if not _balls_disjoint(targets):
        raise ValueError("target images not disjoint")

    groups = {}
    for j in range(1, m):
        t = spec.translations[j]
        if np.linalg.norm(t) == 0:
            continue
        e, tau = _direction(t)
        key = tuple(np.round(as_real(e), 12))
        groups.setdefault(key, (e, []))[1].append((j, tau))
    c0 = pieces[0].bound[0]
    order = sorted(groups.values(), key=lambda g: -max(np.linalg.norm(pieces[j].bound[0] - c0) for j, _ in g[1]))
    ng = max(len(order), 1)

    offsets = [np.zeros(n, complex) for _ in range(m)]
    maps, degrees, ratios = [], [], []
    centers = np.array([p.bound[0] for p in pieces])
    for e, members in order:
        v = _functional(e, centers, rng)
        movers = {j: tau for j, tau in members}
        sets, values, tols = [], [], []
        for j in range(m):
            k = k_boundary0 if j == 0 else k_boundary
            sets.append(pieces[j].projection_boundary(v, k) + offsets[j] @ v)
            values.append(movers.get(j, 0.0))
            tols.append(spec.tolerances[j] / ng)
        res = fit_values(sets, values, tols, max_degree)
        maps.append(shear(e, v, res.poly))
        degrees.append(res.degree)
        ratios.append(res.ratio)
        for j, tau in members:
            offsets[j] = offsets[j] + tau * e
    chain = AutChain(n, tuple(maps))

    errors, counts = [], []
    for j, p in enumerate(pieces):
        Z = p.sample(rng, n_check)
        W, esc = chain.apply(Z)
        err = np.inf if esc.any() else float(np.max(norms(W - (Z + spec.translations[j]))))
        errors.append(err)
        counts.append(n_check)
    passed = all(e < t for e, t in zip(errors, spec.tolerances))
    return chain, FitReport(errors, list(spec.tolerances), len(chain), counts, degrees, ratios, seed, passed)


# -- twisting map --------------------------------------------------------------


@dataclass
class MoverConfig:
    k0_margin: float = 0.002  # K_0 is B enlarged by this
    plate_margin: float = 0.5  # plate pieces enlarged by this fraction of the thickness
    on_tol: float = 0.25  # allowed error of the translation on plate pieces
    direction: int = 0  # translate along e_{direction}
    target_radius: float = 3.0
    n_reject: int = 2000
    max_degree: int = 128
    n_check: int = 1000
    n_ball: int = 20000
    n_plate: int = 2000
    n_slab: int = 100000
    R_trunc: float = 10.0


@dataclass
class LemmaReport:
    pre_satisfied: bool
    translation: Optional[complex]
    fit: Optional[FitReport]
    b_sup: float
    eps: float
    target_margins: List[float]
    clearances: List[float]
    presat_margins: List[float]
    sample_counts: dict
    passed: bool

    def to_dict(self) -> dict:
        return {
            "pre_satisfied": self.pre_satisfied,
            "translation": None if self.translation is None else [self.translation.real, self.translation.imag],
            "fit": None if self.fit is None else self.fit.to_dict(),
            "b_sup": self.b_sup,
            "eps": self.eps,
            "target_margins": self.target_margins,
            "clearances": self.clearances,
            "presat_margins": self.presat_margins,
            "sample_counts": self.sample_counts,
            "passed": self.passed,
        }


def slab_norm(Z: np.ndarray) -> np.ndarray:
    """``max_{k<n} |z_k|``; escaped rows give ``inf``."""
    with np.errstate(invalid="ignore"):
        out = np.max(np.abs(Z[:, :-1]), axis=1)
    out[~np.isfinite(out)] = np.inf
    return out


def outside_slab_margin(Phi: AutChain, Y: np.ndarray, r: float) -> float:
    """``min over Y of slab_norm(Phi^{-1}(y)) - r``; positive means Y misses Phi(slab)."""
    X, _ = Phi.apply_inverse(Y)
    return float(np.min(slab_norm(X)) - r)


def plate_clearance(W: np.ndarray, plate: Plate) -> float:
    return float(np.min(plate.signed_distance(W))) if len(W) else math.inf


def lemma_main(B: BallRegion, plates: Sequence[Plate], Phi: AutChain, r: float, eps: float,
               delta_fit: Optional[float] = None, cfg: Optional[MoverConfig] = None, seed: int = 0):
    """Twisting map Theta with Theta(Phi(r P x C)) missing the plates and |Theta - id| < eps on B.

    Returns ``(Theta, LemmaReport)``. When every plate already misses
    ``Phi(r P x C)`` the identity is returned (``pre_satisfied``).
    """
    cfg = cfg or MoverConfig()
    delta_fit = eps / 2 if delta_fit is None else delta_fit
    rng = np.random.default_rng(seed)
    n = Phi.n
    counts = {"ball": cfg.n_ball, "plate": cfg.n_plate, "slab": cfg.n_slab}
    if not plates:
        return identity_chain(n), LemmaReport(True, None, None, 0.0, eps, [], [], [], counts, True)

    plate_samples = [p.sample(rng, cfg.n_plate) for p in plates]
    presat = [outside_slab_margin(Phi, Y, r) for Y in plate_samples]
    if all(m > 0 for m in presat):
        S = sample_slab(rng, cfg.n_slab, n, r, cfg.R_trunc)
        W, _ = Phi.apply(S)
        clear = [plate_clearance(W, p) for p in plates]
        ok = all(c > 0 for c in clear)
        return identity_chain(n), LemmaReport(True, None, None, 0.0, eps, [], clear, presat, counts, ok)

    e = np.zeros(n, complex)
    e[cfg.direction] = 1.0
    pieces = [BallPiece(B.center.to_complex(), B.radius + cfg.k0_margin)]
    pieces += [PlatePiece(p, cfg.plate_margin * p.thickness) for p in plates]
    tau = _choose_translation(pieces, plates, Phi, r, e, cfg, rng)
    spec = MoveSpec(pieces, [np.zeros(n, complex)] + [tau * e] * len(plates),
                    [delta_fit] + [cfg.on_tol] * len(plates))
    Psi, fit = lemma_starshaped(spec, cfg.max_degree, seed, cfg.n_check)
    Theta = Psi.inverse()

    c = B.center.to_complex()
    ZB = np.concatenate([sample_sphere(rng, cfg.n_ball // 2, n, B.radius),
                         sample_ball(rng, cfg.n_ball - cfg.n_ball // 2, n, B.radius)]) + c
    TB, esc = Theta.apply(ZB)
    b_sup = math.inf if esc.any() else float(np.max(norms(TB - ZB)))
    targets = []
    for Y in plate_samples:
        PY, esc = Psi.apply(Y)
        targets.append(outside_slab_margin(Phi, PY[~esc], r) if (~esc).any() else math.inf)
    S = sample_slab(rng, cfg.n_slab, n, r, cfg.R_trunc)
    W, _ = Theta.apply(Phi.apply(S)[0])
    clear = [plate_clearance(W, p) for p in plates]
    passed = fit.passed and b_sup < eps and all(t > 0 for t in targets) and all(x > 0 for x in clear)
    rep = LemmaReport(False, tau, fit, b_sup, eps, targets, clear, presat, counts, passed)
    return Theta, rep


def _choose_translation(pieces, plates, Phi, r, e, cfg: MoverConfig, rng) -> complex:
    """Rejection sampling of a common translation ``tau e`` for all plate pieces.

    The moved pieces, enlarged by the fit tolerance, must miss ``Phi(r P x C)``,
    ``K_0`` and each other.
    """
    probe = [p.sample(rng, 200) for p in pieces[1:]]
    ring = np.concatenate([[0], cfg.on_tol * np.exp(2j * np.pi * np.arange(8) / 8)])
    R = cfg.target_radius * max(1.0, r)
    for _ in range(cfg.n_reject):
        tau = complex(R * math.sqrt(rng.random()) * np.exp(2j * np.pi * rng.random()))
        moved = [(c + tau * e, rad) for c, rad in (p.bound for p in pieces[1:])]
        if not _balls_disjoint(moved):
            continue
        c0, r0 = pieces[0].bound
        if any(np.linalg.norm(c - c0) <= r0 + rad + cfg.on_tol for c, rad in moved):
            continue
        Y = np.concatenate([P[None] + ((tau + ring)[:, None] * e)[:, None] for P in probe], axis=1).reshape(-1, len(e))
        if outside_slab_margin(Phi, Y, r) > 0:
            return tau
    raise ValueError("complement too crowded; shrink pieces")
