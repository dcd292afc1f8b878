"""Shells, plates and the shortest avoiding path oracle.

A plate is a round disc of radius ``radius`` in a real affine hyperplane of
R^{2n}, thickened by ``thickness`` on both sides (a solid cylinder). Within a
shell the plates sit on mid-spheres, tangent to the sphere, close to the
complex line C e_n.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .geometry import CPoint, as_complex, as_real


@dataclass(frozen=True)
class Shell:
    index: int
    inner: float
    outer: float

    @property
    def width(self) -> float:
        return self.outer - self.inner


def build_shells(rho_schedule: Sequence[float]) -> List[Shell]:
    rho = [float(r) for r in rho_schedule]
    if len(rho) < 2 or not all(0 < r < 1 for r in rho) or any(b <= a for a, b in zip(rho, rho[1:])):
        raise ValueError("invalid radius schedule")
    return [Shell(i + 1, a, b) for i, (a, b) in enumerate(zip(rho, rho[1:]))]


def default_rho(count: int) -> List[float]:
    """``rho_i = 1 - 1/(i+1)`` for i = 1..count."""
    return [1.0 - 1.0 / (i + 1) for i in range(1, count + 1)]


# -- plates --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Plate:
    center: np.ndarray  # complex (n,)
    normal: np.ndarray  # real unit (2n,)
    radius: float
    thickness: float  # half-width of the slab around the hyperplane
    basis: np.ndarray = field(init=False, repr=False)  # (2n, 2n-1) in-plane

    def __post_init__(self):
        c = as_complex(self.center)
        nu = np.asarray(self.normal, dtype=float)
        if nu.shape != (2 * len(c),):
            raise ValueError("normal must have 2n real components")
        nu = nu / np.linalg.norm(nu)
        if not (self.radius > 0 and self.thickness > 0):
            raise ValueError("plate radius and thickness must be positive")
        Q, _ = np.linalg.qr(np.column_stack([nu, np.eye(len(nu))]))
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "normal", nu)
        object.__setattr__(self, "basis", Q[:, 1:])

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def bounding_radius(self) -> float:
        return math.hypot(self.radius, self.thickness)

    def signed_distance(self, Z: np.ndarray) -> np.ndarray:
        """Euclidean distance from rows of complex ``Z`` to the solid plate.

        Points inside get minus their distance to the boundary. Rows with
        non-finite coordinates get ``+inf``.
        """
        X = as_real(np.atleast_2d(Z)) - as_real(self.center)
        with np.errstate(invalid="ignore", over="ignore"):
            s = np.abs(X @ self.normal)
            q = np.linalg.norm(X @ self.basis, axis=1)
            dn = s - self.thickness
            dp = q - self.radius
            out = np.where(
                (dn <= 0) & (dp <= 0),
                np.maximum(dn, dp),
                np.hypot(np.maximum(dn, 0), np.maximum(dp, 0)),
            )
        out[~np.isfinite(out)] = np.inf
        return out

    def closest_point(self, Z: np.ndarray) -> np.ndarray:
        """Nearest points of the solid plate to the rows of complex ``Z``."""
        X = as_real(np.atleast_2d(Z)) - as_real(self.center)
        h = np.clip(X @ self.normal, -self.thickness, self.thickness)
        W = X @ self.basis
        q = np.linalg.norm(W, axis=1, keepdims=True)
        W = W * np.minimum(1.0, self.radius / np.maximum(q, 1e-300))
        return as_complex(as_real(self.center) + np.outer(h, self.normal) + W @ self.basis.T)

    def norm_range(self) -> tuple:
        """Exact min and max of |x| over the solid plate."""
        c = as_real(self.center)
        a = abs(c @ self.normal)
        b = np.linalg.norm(c @ self.basis)
        lo = math.hypot(max(a - self.thickness, 0.0), max(b - self.radius, 0.0))
        hi = math.hypot(a + self.thickness, b + self.radius)
        return lo, hi

    def sample(self, rng: np.random.Generator, m: int, surface: float = 0.7) -> np.ndarray:
        """Points of the solid plate; a fraction ``surface`` lies on its boundary."""
        d = self.basis.shape[1]
        U = rng.standard_normal((m, d))
        U /= np.linalg.norm(U, axis=1, keepdims=True)
        rad = self.radius * rng.random(m) ** (1.0 / d)
        s = self.thickness * rng.uniform(-1, 1, m)
        k = int(surface * m)
        # first half of the surface points on the faces, rest on the rim
        kf = k // 2
        s[:kf] = self.thickness * np.where(rng.random(kf) < 0.5, -1.0, 1.0)
        rad[kf:k] = self.radius
        X = as_real(self.center) + np.outer(s, self.normal) + (U * rad[:, None]) @ self.basis.T
        return as_complex(X)

    def to_dict(self) -> dict:
        return {
            "center": as_real(self.center).tolist(),
            "normal": self.normal.tolist(),
            "radius": float(self.radius),
            "thickness": float(self.thickness),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Plate":
        return cls(as_complex(np.array(d["center"])), np.array(d["normal"]), d["radius"], d["thickness"])


def tangent_plate(center, radius: float, thickness: float) -> Plate:
    c = as_complex(center)
    x = as_real(c)
    return Plate(c, x / np.linalg.norm(x), radius, thickness)


def build_labyrinth_shell(shell: Shell, density: int, thickness: float, n: int = 2,
                          per_sphere: int = 8, radius_frac: float = 0.03,
                          tilt: float = 0.05) -> List[Plate]:
    """Tangent plates on ``density`` mid-spheres of the shell, interleaved in angle.

    Plate ``k`` of mid-sphere ``j`` is centred at
    ``a_j (sin(tilt) e^{i t}, 0, ..., cos(tilt) e^{i t})`` with
    ``t = 2 pi (k + j/density) / per_sphere``.
    """
    if density < 1:
        raise ValueError("density must be at least 1")
    if not thickness > 0:
        raise ValueError("thickness must be positive")
    plates = []
    for j in range(density):
        a = shell.inner + (j + 0.5) * shell.width / density
        for k in range(per_sphere):
            t = 2 * math.pi * (k + j / density) / per_sphere
            c = np.zeros(n, complex)
            c[0] = a * math.sin(tilt) * np.exp(1j * t)
            c[-1] = a * math.cos(tilt) * np.exp(1j * t)
            plates.append(tangent_plate(c, radius_frac * a, thickness))
    for p in plates:
        lo, hi = p.norm_range()
        if not (shell.inner < lo and hi < shell.outer):
            raise ValueError("plates overlap; reduce density or thickness")
    if min_pairwise_distance(plates) <= 0:
        raise ValueError("plates overlap; reduce density or thickness")
    return plates


# -- separation ----------------------------------------------------------------


def plate_distance(p: Plate, q: Plate) -> float:
    """Distance between two solid plates; minus the bounding-ball overlap if they meet."""
    import cvxpy as cp

    s = cp.Variable(2)
    u = cp.Variable(p.basis.shape[1])
    w = cp.Variable(q.basis.shape[1])
    x = as_real(p.center) + s[0] * p.normal + p.basis @ u
    y = as_real(q.center) + s[1] * q.normal + q.basis @ w
    cons = [cp.abs(s[0]) <= p.thickness, cp.abs(s[1]) <= q.thickness,
            cp.norm(u) <= p.radius, cp.norm(w) <= q.radius]
    prob = cp.Problem(cp.Minimize(cp.norm(x - y)), cons)
    prob.solve(solver=cp.CLARABEL)
    d = float(prob.value)
    if d > 1e-9:
        return d
    gap = np.linalg.norm(as_real(p.center) - as_real(q.center)) - p.bounding_radius - q.bounding_radius
    return float(min(gap, -1e-12))


def min_pairwise_distance(plates: Sequence[Plate]) -> float:
    """Minimum plate distance, pruned by bounding balls."""
    if len(plates) < 2:
        return math.inf
    C = np.array([as_real(p.center) for p in plates])
    rb = np.array([p.bounding_radius for p in plates])
    D = np.linalg.norm(C[:, None] - C[None], axis=2) - rb[:, None] - rb[None]
    iu = np.triu_indices(len(plates), 1)
    order = np.argsort(D[iu])
    best = math.inf
    for k in order:
        i, j = iu[0][k], iu[1][k]
        if D[i, j] >= best:
            break
        best = min(best, plate_distance(plates[i], plates[j]))
    return best


def check_disjoint_and_contained(B, plates: Sequence[Plate], shell: Optional[Shell] = None) -> float:
    """Minimum of pairwise plate gaps, plate-to-B gaps and plate-to-shell gaps."""
    if not plates:
        return math.inf
    c = B.center.to_complex()
    margins = [min_pairwise_distance(plates)]
    for p in plates:
        shifted = Plate(p.center - c, p.normal, p.radius, p.thickness)
        lo, hi = shifted.norm_range()
        margins.append(lo - B.radius)
        if shell is not None:
            lo0, hi0 = p.norm_range()
            margins.append(lo0 - shell.inner)
            margins.append(shell.outer - hi0)
    return float(min(margins))


# -- grid oracle ----------------------------------------------------------------


def _moves(d: int) -> np.ndarray:
    out = []
    for k in range(d):
        for s in (1, -1):
            m = [0] * d
            m[k] = s
            out.append(m)
    for k, l in itertools.combinations(range(d), 2):
        for s, t in itertools.product((1, -1), repeat=2):
            m = [0] * d
            m[k], m[l] = s, t
            out.append(m)
    return np.array(out, dtype=np.int64)


def estimate_min_avoiding_length(shell: Shell, plates: Sequence[Plate], grid_step: float,
                                 n: int = 2, budget: int = 2_000_000) -> float:
    """Shortest lattice path from the inner to the outer sphere avoiding plates.

    A* over the lattice ``grid_step * Z^{2n}`` restricted to the shell, with
    axis and planar diagonal moves. The first and last legs are exact radial
    segments to the spheres. Returns ``inf`` when no avoiding path exists.
    The result is the grid optimum (no resolution correction); see
    :func:`certified_delta`.
    """
    h = float(grid_step)
    if not h > 0:
        raise ValueError("grid_step must be positive")
    for p in plates:
        if p.thickness < 2 * h:
            raise ValueError("unresolved obstacles")
    d = 2 * n
    rho, rho2 = shell.inner, shell.outer
    width = rho2 - rho
    moves = _moves(d)
    mcost = h * np.linalg.norm(moves, axis=1)

    # plates near the shell only
    plates = list(plates)

    def blocked(K: np.ndarray) -> np.ndarray:
        Z = as_complex(K * h)
        bad = np.zeros(len(K), bool)
        for p in plates:
            bad |= p.signed_distance(Z) <= 0
        return bad

    def leg_clear(x: np.ndarray, r_to: float) -> bool:
        nx = np.linalg.norm(x)
        t = np.linspace(0, 1, 5)[:, None]
        pts = x[None] * ((nx + t * (r_to - nx)) / nx)
        return not blocked(pts / h).any()

    def norm_of(K) -> float:
        return h * math.sqrt(float(np.dot(K, K)))

    heap = []
    counter = itertools.count()
    quantum = width * 1e-9

    def key_of(f: float) -> int:
        # f values of one straight path differ in the last ulp; bucket them so
        # the depth tie-break applies
        return round(f / quantum)

    best_g = {}

    def push_source(K):
        K = np.asarray(K, dtype=np.int64)
        x = K * h
        nx = norm_of(K)
        if not (rho <= nx < rho2):
            return
        if blocked(K[None])[0] or not leg_clear(x, rho):
            return
        key = tuple(K.tolist())
        g = nx - rho
        if g < best_g.get(key, math.inf):
            best_g[key] = g
            heapq.heappush(heap, (key_of(g + rho2 - nx), rho2 - nx, next(counter), g, key))

    kr = math.ceil(rho / h - 1e-12)
    for ax in range(d):
        for s in (1, -1):
            K = np.zeros(d, np.int64)
            K[ax] = s * kr
            push_source(K)
    SENTINEL = "sources"
    SINK = "sink"
    heapq.heappush(heap, (key_of(width) + 2, width, next(counter), 0.0, SENTINEL))
    expanded = 0
    done = set()
    while heap:
        f, hh, _, g, key = heapq.heappop(heap)
        if key == SINK:
            return g
        if key == SENTINEL:
            for K in _layer_nodes(rho, h, d):
                push_source(K)
            continue
        if key in done or g > best_g.get(key, math.inf):
            continue
        done.add(key)
        expanded += 1
        if expanded > budget:
            raise RuntimeError("grid search budget exhausted")
        K = np.array(key, dtype=np.int64)
        x = K * h
        nx = norm_of(K)
        if rho2 - nx <= 2 * h and leg_clear(x, rho2):
            gs = g + (rho2 - nx)
            heapq.heappush(heap, (key_of(gs), 0.0, next(counter), gs, SINK))
        nb = K[None] + moves
        nn = h * np.sqrt(np.sum(nb.astype(float) ** 2, axis=1))
        ok = (nn >= rho) & (nn < rho2)
        if not ok.any():
            continue
        nb, nn, cost = nb[ok], nn[ok], mcost[ok]
        free = ~blocked(nb)
        for Kb, nb_norm, c in zip(nb[free], nn[free], cost[free]):
            kb = tuple(Kb.tolist())
            if kb in done:
                continue
            gb = g + c
            if gb < best_g.get(kb, math.inf):
                best_g[kb] = gb
                hb = rho2 - nb_norm
                heapq.heappush(heap, (key_of(gb + hb), hb, next(counter), gb, kb))
    return math.inf


def _layer_nodes(rho: float, h: float, d: int):
    """All lattice nodes with ``rho <= |x| < rho + h``."""
    kmax = int(math.ceil((rho + h) / h))
    r = np.arange(-kmax, kmax + 1)
    lo2 = (rho / h) ** 2
    hi2 = ((rho + h) / h) ** 2
    for head in itertools.product(r, repeat=d - 1):
        s = float(np.dot(head, head))
        if s >= hi2:
            continue
        top = math.sqrt(hi2 - s)
        bot = math.sqrt(max(lo2 - s, 0.0))
        for last in range(int(math.floor(-top)), int(math.ceil(top)) + 1):
            if bot <= abs(last) and last * last + s < hi2 and last * last + s >= lo2:
                yield np.array(head + (last,), dtype=np.int64)


def certified_delta(raw: float, grid_step: float, n: int = 2) -> float:
    """Grid optimum minus the resolution correction ``h sqrt(2n)``."""
    return max(raw - grid_step * math.sqrt(2 * n), 0.0)


# -- labyrinth ------------------------------------------------------------------


@dataclass
class Labyrinth:
    shells: List[Shell]
    plates: List[List[Plate]]
    raw_lengths: List[float]
    deltas: List[float]
    grid_steps: List[float]
    margins: List[float]

    @property
    def all_plates(self) -> List[Plate]:
        return [p for ps in self.plates for p in ps]

    def to_dict(self) -> dict:
        return {
            "shells": [
                {
                    "index": s.index,
                    "inner": s.inner,
                    "outer": s.outer,
                    "plates": [p.to_dict() for p in ps],
                    "grid_step": h,
                    "raw_length": raw,
                    "delta": dl,
                    "margin": m,
                }
                for s, ps, h, raw, dl, m in zip(
                    self.shells, self.plates, self.grid_steps, self.raw_lengths, self.deltas, self.margins
                )
            ]
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Labyrinth":
        S = d["shells"]
        return cls(
            [Shell(s["index"], s["inner"], s["outer"]) for s in S],
            [[Plate.from_dict(p) for p in s["plates"]] for s in S],
            [s["raw_length"] for s in S],
            [s["delta"] for s in S],
            [s["grid_step"] for s in S],
            [s["margin"] for s in S],
        )


def build_labyrinth(rho: Sequence[float], count: int, n: int = 2, density: int = 1,
                    thickness_frac: float = 0.01, per_sphere: int = 8, radius_frac: float = 0.03,
                    tilt: float = 0.05, grid_step: Optional[float] = None) -> Labyrinth:
    """Shells 1..count with plates and certified per-shell length increments."""
    from .geometry import ball

    shells = build_shells(rho)[:count]
    if len(shells) < count:
        raise ValueError("radius schedule too short for the requested shells")
    plates, raws, deltas, steps, margins = [], [], [], [], []
    for s in shells:
        t = thickness_frac * s.width
        ps = build_labyrinth_shell(s, density, t, n, per_sphere, radius_frac, tilt)
        h = t / 2 if grid_step is None else grid_step
        raw = estimate_min_avoiding_length(s, ps, h, n)
        plates.append(ps)
        raws.append(raw)
        deltas.append(certified_delta(raw, h, n))
        steps.append(h)
        margins.append(check_disjoint_and_contained(ball(s.inner, n), ps, s))
    return Labyrinth(shells, plates, raws, deltas, steps, margins)
