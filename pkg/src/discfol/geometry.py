"""Points of C^n, simple regions and Euclidean lengths.

A point is carried either as a :class:`CPoint` (2n reals) or, inside the
numerical kernels, as a complex array of shape ``(..., n)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np


@dataclass(frozen=True)
class CPoint:
    """A point of C^n stored as ``(Re z_1, Im z_1, ..., Re z_n, Im z_n)``."""

    coords: tuple

    def __post_init__(self):
        c = tuple(float(x) for x in self.coords)
        if len(c) < 4 or len(c) % 2:
            raise ValueError("CPoint needs 2n real coordinates with n >= 2")
        if not all(np.isfinite(c)):
            raise ValueError("CPoint coordinates must be finite")
        object.__setattr__(self, "coords", c)

    @property
    def n(self) -> int:
        return len(self.coords) // 2

    @classmethod
    def from_complex(cls, z) -> "CPoint":
        z = np.asarray(z, dtype=complex).ravel()
        return cls(tuple(np.column_stack([z.real, z.imag]).ravel()))

    def to_complex(self) -> np.ndarray:
        c = np.asarray(self.coords)
        return c[0::2] + 1j * c[1::2]


PointLike = Union[CPoint, Sequence[float], np.ndarray]


def as_complex(p) -> np.ndarray:
    """Convert a CPoint, a sequence of CPoints or an array to complex ``(..., n)``.

    Real arrays are read as interleaved real/imaginary pairs along the last axis.
    """
    if isinstance(p, CPoint):
        return p.to_complex()
    if isinstance(p, (list, tuple)) and p and isinstance(p[0], CPoint):
        return np.array([q.to_complex() for q in p])
    a = np.asarray(p)
    if np.iscomplexobj(a):
        return a.astype(complex)
    a = a.astype(float)
    return a[..., 0::2] + 1j * a[..., 1::2]


def as_real(z) -> np.ndarray:
    """Complex ``(..., n)`` to interleaved real ``(..., 2n)``."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def norm(p) -> float:
    return float(np.linalg.norm(as_real(as_complex(p))))


def norms(Z: np.ndarray) -> np.ndarray:
    """Row-wise Euclidean norms of a complex ``(M, n)`` array."""
    return np.sqrt(np.sum(np.abs(Z) ** 2, axis=-1))


def polyline_length(pts) -> float:
    Z = as_complex(pts)
    if Z.ndim != 2 or len(Z) < 2:
        raise ValueError("degenerate path")
    return float(np.sum(norms(np.diff(Z, axis=0))))


@dataclass(frozen=True)
class BallRegion:
    center: CPoint
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")


@dataclass(frozen=True)
class SlabRegion:
    """``r * closure(P) x C``; ``R`` only bounds |z_n| when sampling."""

    r: float
    R: float = 10.0

    def __post_init__(self):
        if not (self.r > 0 and self.R > 0):
            raise ValueError("slab radii must be positive")


def region_contains(region, p, margin: float = 0.0) -> bool:
    return bool(region_contains_many(region, as_complex(p)[None, :], margin)[0])


def region_contains_many(region, Z: np.ndarray, margin: float = 0.0) -> np.ndarray:
    if margin < 0:
        raise ValueError("margin must be non-negative")
    if isinstance(region, BallRegion):
        if margin >= region.radius:
            raise ValueError("empty shrunk region")
        return norms(Z - region.center.to_complex()) <= region.radius - margin
    if isinstance(region, SlabRegion):
        if margin >= region.r:
            raise ValueError("empty shrunk region")
        return np.max(np.abs(Z[:, :-1]), axis=1) <= region.r - margin
    raise TypeError(f"unknown region {type(region).__name__}")


def ball(radius: float, n: int = 2) -> BallRegion:
    return BallRegion(CPoint((0.0,) * (2 * n)), radius)


# sampling


def sample_sphere(rng: np.random.Generator, m: int, n: int, radius: float = 1.0) -> np.ndarray:
    X = rng.standard_normal((m, 2 * n))
    X *= radius / np.linalg.norm(X, axis=1, keepdims=True)
    return as_complex(X)


def sample_ball(rng: np.random.Generator, m: int, n: int, radius: float = 1.0) -> np.ndarray:
    S = sample_sphere(rng, m, n, 1.0)
    u = rng.random(m) ** (1.0 / (2 * n))
    return S * (radius * u)[:, None]


def sample_disc(rng: np.random.Generator, m: int, radius: float) -> np.ndarray:
    return radius * np.sqrt(rng.random(m)) * np.exp(2j * np.pi * rng.random(m))


def sample_slab(rng: np.random.Generator, m: int, n: int, r: float, R: float) -> np.ndarray:
    """Uniform samples of ``r*P x {|z_n| <= R}``."""
    Z = np.empty((m, n), complex)
    for k in range(n - 1):
        Z[:, k] = sample_disc(rng, m, r)
    Z[:, n - 1] = sample_disc(rng, m, R)
    return Z


def coordinate_circles(n: int, radius: float, k: int) -> np.ndarray:
    """``k`` points on each coordinate circle ``{radius * e^{it} e_j}``."""
    w = radius * np.exp(2j * np.pi * np.arange(k) / k)
    out = np.zeros((n * k, n), complex)
    for j in range(n):
        out[j * k:(j + 1) * k, j] = w
    return out
