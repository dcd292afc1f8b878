"""Elementary automorphisms of C^n and composition chains.

Every map has a closed-form inverse, so a chain is inverted by running the
inverted maps in reverse order. Nothing here is solved numerically.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import CPoint, as_complex

ESCAPE = 1e100


# -- polynomials -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PolyFunc:
    """Univariate polynomial p(w) in ``u = (w - center) / scale``.

    With ``hessenberg`` unset, ``coeffs[k]`` multiplies ``u**k``. Otherwise the
    coefficients refer to the Arnoldi basis defined by the Hessenberg matrix
    (shape ``(D+1, D)``), which keeps high degree fits well conditioned.
    """

    coeffs: np.ndarray
    center: complex = 0.0
    scale: float = 1.0
    hessenberg: Optional[np.ndarray] = None

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=complex))
        object.__setattr__(self, "coeffs", c)
        if self.hessenberg is not None:
            H = np.asarray(self.hessenberg, dtype=complex)
            if H.shape != (len(c), len(c) - 1):
                raise ValueError("hessenberg shape does not match coefficients")
            object.__setattr__(self, "hessenberg", H)
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, w) -> np.ndarray:
        w = np.asarray(w)
        dt = np.result_type(w.dtype, np.complex128)
        u = (w.astype(dt) - dt.type(self.center)) / dt.type(self.scale)
        if self.hessenberg is None:
            c = self.coeffs.astype(dt)
            out = np.full(u.shape, c[-1], dtype=dt)
            for a in c[-2::-1]:
                out = out * u + a
            return out
        return arnoldi_eval(self.hessenberg, self.coeffs, u)

    def negated(self) -> "PolyFunc":
        return PolyFunc(-self.coeffs, self.center, self.scale, self.hessenberg)

    def to_dict(self) -> dict:
        d = {
            "coeffs": _cplx_list(self.coeffs),
            "center": _cplx_list([self.center])[0],
            "scale": float(self.scale),
        }
        if self.hessenberg is not None:
            d["hessenberg"] = [_cplx_list(row) for row in self.hessenberg]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PolyFunc":
        H = d.get("hessenberg")
        return cls(
            _cplx_array(d["coeffs"]),
            complex(*d["center"]),
            float(d["scale"]),
            None if H is None else np.array([_cplx_array(r) for r in H]),
        )


def arnoldi_basis(u: np.ndarray, degree: int):
    """Vandermonde-with-Arnoldi on nodes ``u``; returns ``(H, Q)``.

    Columns of Q are orthonormal for the discrete measure on ``u``
    (``Q^H Q / M = I``).
    """
    M = len(u)
    Q = np.zeros((M, degree + 1), complex)
    H = np.zeros((degree + 1, degree), complex)
    Q[:, 0] = 1.0
    for k in range(degree):
        q = u * Q[:, k]
        for _ in range(2):  # classical Gram-Schmidt, twice
            h = Q[:, :k + 1].conj().T @ q / M
            q = q - Q[:, :k + 1] @ h
            H[:k + 1, k] += h
        H[k + 1, k] = np.linalg.norm(q) / np.sqrt(M)
        Q[:, k + 1] = q / H[k + 1, k]
    return H, Q


def arnoldi_eval(H: np.ndarray, coeffs: np.ndarray, u: np.ndarray, chunk: int = 4096) -> np.ndarray:
    u = np.asarray(u)
    shape = u.shape
    u = u.ravel()
    dt = np.result_type(u.dtype, np.complex128)
    H = H.astype(dt)
    coeffs = coeffs.astype(dt)
    D = H.shape[1]
    out = np.empty(len(u), dt)
    for lo in range(0, len(u), chunk):
        x = u[lo:lo + chunk]
        W = np.zeros((len(x), D + 1), dt)
        W[:, 0] = 1.0
        for k in range(D):
            w = x * W[:, k] - W[:, :k + 1] @ H[:k + 1, k]
            W[:, k + 1] = w / H[k + 1, k]
        out[lo:lo + chunk] = W @ coeffs
    return out.reshape(shape)


# -- elementary maps -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ElementaryAut:
    """One of ``affine`` (z -> A z + b), ``shear`` or ``overshear``.

    Shear: ``z + f(pi(z)) e``. Overshear: ``z + (exp(g(pi(z))) - 1) <z, e> e``.
    Here ``pi(z) = sum_k v_k z_k`` is complex linear with ``pi(e) = 0`` and
    ``<z, e> = sum_k z_k conj(e_k)``.
    """

    kind: str
    A: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    A_inv: Optional[np.ndarray] = None
    e: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    f: Optional[PolyFunc] = None

    def __post_init__(self):
        if self.kind == "affine":
            A = np.asarray(self.A, dtype=complex)
            b = np.zeros(len(A), complex) if self.b is None else np.asarray(self.b, dtype=complex)
            if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape != (len(A),):
                raise ValueError("affine map needs a square matrix and matching translation")
            if abs(np.linalg.det(A)) < 1e-12 or np.linalg.cond(A) > 1e12:
                raise ValueError("non-invertible elementary map")
            object.__setattr__(self, "A", A)
            object.__setattr__(self, "b", b)
            if self.A_inv is None:
                object.__setattr__(self, "A_inv", np.linalg.inv(A))
            else:
                object.__setattr__(self, "A_inv", np.asarray(self.A_inv, dtype=complex))
        elif self.kind in ("shear", "overshear"):
            e = np.asarray(self.e, dtype=complex)
            v = np.asarray(self.v, dtype=complex)
            if e.shape != v.shape or e.ndim != 1:
                raise ValueError("direction and functional must be vectors of equal length")
            if abs(np.linalg.norm(e) - 1) > 1e-12:
                raise ValueError("shear direction must be a unit vector")
            if abs(np.sum(v * e)) > 1e-12 * max(1.0, np.linalg.norm(v)):
                raise ValueError("base functional must vanish on the shear direction")
            if not isinstance(self.f, PolyFunc):
                raise ValueError("shear needs a PolyFunc")
            object.__setattr__(self, "e", e)
            object.__setattr__(self, "v", v)
        else:
            raise ValueError(f"unknown map kind {self.kind!r}")

    @property
    def n(self) -> int:
        return len(self.A) if self.kind == "affine" else len(self.e)

    def apply(self, Z: np.ndarray) -> np.ndarray:
        dt = Z.dtype
        if self.kind == "affine":
            return Z @ self.A.T.astype(dt) + self.b.astype(dt)
        e = self.e.astype(dt)
        w = Z @ self.v.astype(dt)
        if self.kind == "shear":
            return Z + self.f(w)[:, None] * e
        s = Z @ e.conj()
        return Z + ((np.exp(self.f(w)) - 1) * s)[:, None] * e

    def inverse(self) -> "ElementaryAut":
        if self.kind == "affine":
            return ElementaryAut("affine", A=self.A_inv, b=-(self.A_inv @ self.b), A_inv=self.A)
        return ElementaryAut(self.kind, e=self.e, v=self.v, f=self.f.negated())

    def to_dict(self) -> dict:
        if self.kind == "affine":
            return {
                "kind": "affine",
                "A": [_cplx_list(row) for row in self.A],
                "b": _cplx_list(self.b),
            }
        return {
            "kind": self.kind,
            "direction": _cplx_list(self.e),
            "functional": _cplx_list(self.v),
            "poly": self.f.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ElementaryAut":
        if d["kind"] == "affine":
            return cls("affine", A=np.array([_cplx_array(r) for r in d["A"]]), b=_cplx_array(d["b"]))
        return cls(
            d["kind"],
            e=_cplx_array(d["direction"]),
            v=_cplx_array(d["functional"]),
            f=PolyFunc.from_dict(d["poly"]),
        )


def shear(e, v, f: PolyFunc) -> ElementaryAut:
    return ElementaryAut("shear", e=e, v=v, f=f)


def overshear(e, v, g: PolyFunc) -> ElementaryAut:
    return ElementaryAut("overshear", e=e, v=v, f=g)


def affine(A, b=None) -> ElementaryAut:
    return ElementaryAut("affine", A=A, b=b)


def coordinate_shear(n: int, target: int, source: int, f: PolyFunc) -> ElementaryAut:
    """``z_target += f(z_source)``."""
    if target == source:
        raise ValueError("target and source coordinates must differ")
    e = np.zeros(n, complex)
    v = np.zeros(n, complex)
    e[target] = 1
    v[source] = 1
    return shear(e, v, f)


# -- chains ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AutChain:
    """Composition of elementary maps; ``maps[0]`` acts first."""

    n: int
    maps: tuple = field(default_factory=tuple)

    def __post_init__(self):
        maps = tuple(self.maps)
        for m in maps:
            if m.n != self.n:
                raise ValueError("dimension mismatch")
        object.__setattr__(self, "maps", maps)

    def __len__(self) -> int:
        return len(self.maps)

    def inverse(self) -> "AutChain":
        return AutChain(self.n, tuple(m.inverse() for m in reversed(self.maps)))

    def apply(self, Z, dtype=complex) -> tuple:
        """Vectorised forward evaluation on complex ``(M, n)``.

        Returns ``(W, escaped)``; escaped rows (some coordinate beyond 1e100
        or non-finite) are set to ``inf`` and stay that way. Pass
        ``dtype=np.clongdouble`` for extended precision.
        """
        W = np.array(Z, dtype=dtype, copy=True).reshape(-1, self.n)
        escaped = np.zeros(len(W), bool)
        with np.errstate(all="ignore"):
            for m in self.maps:
                live = ~escaped
                if not live.any():
                    break
                W[live] = m.apply(W[live])
                bad = live & ~(np.all(np.abs(W) < ESCAPE, axis=1))
                if bad.any():
                    W[bad] = np.inf
                    escaped |= bad
        return W, escaped

    def apply_inverse(self, Z, dtype=complex) -> tuple:
        return self.inverse().apply(Z, dtype)

    def to_dict(self) -> dict:
        return {"n": self.n, "maps": [m.to_dict() for m in self.maps]}

    @classmethod
    def from_dict(cls, d: dict) -> "AutChain":
        return cls(int(d["n"]), tuple(ElementaryAut.from_dict(m) for m in d["maps"]))


def identity_chain(n: int) -> AutChain:
    return AutChain(n, ())


def _eval_point(chain: AutChain, p, inverse: bool) -> CPoint:
    z = as_complex(p)
    if z.shape != (chain.n,):
        raise ValueError("dimension mismatch")
    W, esc = (chain.apply_inverse if inverse else chain.apply)(z[None, :])
    if esc[0]:
        raise OverflowError("escaped to infinity")
    return CPoint.from_complex(W[0])


def eval(chain: AutChain, p) -> CPoint:  # noqa: A001  (operation name)
    return _eval_point(chain, p, False)


def eval_inverse(chain: AutChain, p) -> CPoint:
    return _eval_point(chain, p, True)


def compose(a: AutChain, b: AutChain) -> AutChain:
    """The chain acting as ``a o b``."""
    if a.n != b.n:
        raise ValueError("dimension mismatch")
    return AutChain(a.n, b.maps + a.maps)


def jacobian(chain: AutChain, z, h: float = 1e-5) -> np.ndarray:
    """Complex Jacobian by central differences (diagnostics only)."""
    z = as_complex(z)
    n = chain.n
    J = np.zeros((n, n), complex)
    for k in range(n):
        d = np.zeros(n, complex)
        d[k] = h
        P, _ = chain.apply(np.array([z + d, z - d]))
        J[:, k] = (P[0] - P[1]) / (2 * h)
    return J


def random_chain(rng: np.random.Generator, n: int, length: int, degree: int = 3,
                 coeff_scale: Optional[float] = None) -> AutChain:
    """Random chain of shears, overshears and unitary affine maps (for testing).

    Coefficients shrink like ``length**-0.5`` so that long chains keep points
    of moderate norm at moderate norm.
    """
    if coeff_scale is None:
        coeff_scale = 0.5 / np.sqrt(max(length, 1))
    maps = []
    for _ in range(length):
        kind = rng.choice(["shear", "shear", "overshear", "affine"])
        if kind == "affine":
            X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            U, _ = np.linalg.qr(X)
            b = 0.1 * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
            maps.append(affine(U, b))
            continue
        e = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        e /= np.linalg.norm(e)
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        v = x - np.sum(x * e) * e.conj()  # sum(v * e) = 0 since |e| = 1
        v /= np.linalg.norm(v)
        c = coeff_scale * (rng.standard_normal(degree + 1) + 1j * rng.standard_normal(degree + 1))
        c /= np.arange(1, degree + 2) ** 2 * 3.0 ** np.arange(degree + 1)
        maps.append(ElementaryAut(str(kind), e=e, v=v, f=PolyFunc(c)))
    return AutChain(n, tuple(maps))


def _cplx_list(a) -> list:
    return [[float(x.real), float(x.imag)] for x in np.asarray(a, dtype=complex).ravel()]


def _cplx_array(a) -> np.ndarray:
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    return a[:, 0] + 1j * a[:, 1]
