"""Linear subspaces of R^n and the one-sided distance between them.

A Subspace holds an orthonormal row basis. Bases are float64 arrays, or
object arrays of ``mpmath.mpf`` when the data came from an extended precision
evaluation; every function here accepts either.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np

__all__ = [
    "RANK_TOL",
    "Subspace",
    "orthonormalize",
    "delta",
    "kernel_of_covector",
    "orthogonal_complement",
    "span",
]

RANK_TOL = 1e-9


def _is_mp(a: np.ndarray) -> bool:
    return a.dtype == object


def _as_array(vectors, n: int | None = None) -> np.ndarray:
    rows = [list(v) for v in vectors]
    if any(isinstance(x, mpmath.mpf) for row in rows for x in row):
        arr = np.array([[mpmath.mpf(x) for x in row] for row in rows], dtype=object)
    else:
        arr = np.array(rows, dtype=float)
    if arr.size == 0:
        return np.zeros((0, n or 0))
    return arr.reshape(len(rows), -1)


def _norm(v: np.ndarray):
    if _is_mp(v):
        return mpmath.sqrt(mpmath.fsum(x * x for x in v))
    return math.sqrt(float(v.dot(v)))


@dataclass(frozen=True, eq=False)
class Subspace:
    """Subspace of R^ambient_dim given by a (dim x ambient_dim) orthonormal basis."""

    basis: np.ndarray
    ambient_dim: int

    def __post_init__(self):
        if self.basis.ndim != 2 or self.basis.shape[1] != self.ambient_dim:
            raise ValueError(f"basis shape {self.basis.shape} does not match ambient dimension {self.ambient_dim}")

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def is_mp(self) -> bool:
        return _is_mp(self.basis)

    @classmethod
    def zero(cls, n: int) -> "Subspace":
        return cls(np.zeros((0, n)), n)

    @classmethod
    def full(cls, n: int) -> "Subspace":
        return cls(np.eye(n), n)

    def project(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=self.basis.dtype if self.is_mp else None)
        if self.dim == 0:
            return v * 0
        return self.basis.T.dot(self.basis.dot(v))

    def residual(self, v) -> np.ndarray:
        v = np.asarray(v)
        return v - self.project(v)

    def gram_error(self) -> float:
        if self.dim == 0:
            return 0.0
        g = self.basis.dot(self.basis.T)
        return float(np.max(np.abs(np.asarray(g - np.eye(self.dim), dtype=float))))

    def contains(self, other: "Subspace", tol: float = 1e-10) -> bool:
        return all(_norm(self.residual(v)) < tol for v in other.basis)

    def transformed(self, q: np.ndarray) -> "Subspace":
        """Image under an orthogonal matrix ``q``."""
        return orthonormalize(self.basis.dot(np.asarray(q).T), ambient_dim=self.ambient_dim)

    def __repr__(self):
        return f"Subspace(dim={self.dim}, ambient_dim={self.ambient_dim})"


def orthonormalize(vectors, tol: float = RANK_TOL, ambient_dim: int | None = None) -> Subspace:
    """Orthonormal basis of the span of ``vectors``.

    Modified Gram-Schmidt with one reorthogonalization pass. A vector is
    dropped when its residual after projection falls below ``tol`` times its
    own norm; this is the rank decision.
    """
    a = vectors if isinstance(vectors, np.ndarray) else _as_array(vectors, ambient_dim)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    n = a.shape[1] if a.shape[0] else ambient_dim
    if n is None:
        raise ValueError("ambient dimension unknown for an empty vector list")
    if ambient_dim is not None and n != ambient_dim:
        raise ValueError(f"vectors have dimension {n}, expected {ambient_dim}")
    mp = _is_mp(a)
    basis: list[np.ndarray] = []
    for v in a:
        size = _norm(v)
        if size == 0:
            continue
        r = v.copy()
        for _ in range(2):
            for b in basis:
                r = r - b.dot(r) * b
        rn = _norm(r)
        if rn < tol * size:
            continue
        basis.append(r / rn)
    if not basis:
        return Subspace(np.zeros((0, n), dtype=object if mp else float), n)
    return Subspace(np.array(basis, dtype=object if mp else float), n)


def span(*vectors, tol: float = RANK_TOL) -> Subspace:
    return orthonormalize(vectors, tol)


def orthogonal_complement(t: Subspace) -> Subspace:
    n = t.ambient_dim
    if not t.is_mp:
        if t.dim == 0:
            return Subspace.full(n)
        vt = np.linalg.svd(t.basis)[2]
        return Subspace(np.ascontiguousarray(vt[t.dim:]), n)
    eye = np.array([[mpmath.mpf(int(i == j)) for j in range(n)] for i in range(n)], dtype=object)
    # candidates ordered so the best conditioned axes come first
    if t.dim:
        weights = [float(_norm(t.residual(e))) for e in eye]
        order = sorted(range(n), key=lambda i: -weights[i])
    else:
        order = list(range(n))
    stacked = np.concatenate([t.basis, eye[order]], axis=0) if t.dim else eye[order]
    full = orthonormalize(stacked, tol=1e-6)
    return Subspace(full.basis[t.dim:], n)


def delta(t: Subspace, tp: Subspace):
    """sup over unit v in t of dist(v, tp).

    Equals the largest singular value of the residuals of t's basis after
    projection onto tp. The zero subspace has distance 0 to anything.
    """
    if t.ambient_dim != tp.ambient_dim:
        raise ValueError(f"ambient dimensions differ: {t.ambient_dim} vs {tp.ambient_dim}")
    if t.dim == 0:
        return 0.0
    mp = t.is_mp or tp.is_mp
    b = t.basis
    if tp.dim:
        r = b - b.dot(tp.basis.T).dot(tp.basis)
    else:
        r = b
    if not mp:
        s = np.linalg.svd(np.asarray(r, dtype=float), compute_uv=False)
        return float(min(max(s[0], 0.0), 1.0))
    r = np.array([[mpmath.mpf(x) for x in row] for row in r], dtype=object)
    if r.shape[0] == 1:
        return min(_norm(r[0]), mpmath.mpf(1))
    gram = mpmath.matrix(r.dot(r.T).tolist())
    eig = mpmath.eigsy(gram, eigvals_only=True)
    top = max(eig[i] for i in range(len(eig)))
    return min(mpmath.sqrt(max(top, mpmath.mpf(0))), mpmath.mpf(1))


def kernel_of_covector(g, t: Subspace, tol: float = RANK_TOL) -> Subspace:
    """{v in t : <g, v> = 0}.

    When the restriction of ``g`` to ``t`` is below ``tol`` relative to |g|
    (rank 0), ``t`` itself is returned.
    """
    g = np.asarray(g, dtype=object if t.is_mp or any(isinstance(x, mpmath.mpf) for x in g) else float)
    if t.dim == 0:
        return t
    coeffs = t.basis.dot(g)
    gnorm = _norm(g)
    if gnorm == 0 or _norm(coeffs) <= tol * gnorm:
        return t
    k = t.dim
    unit = coeffs / _norm(coeffs)
    if _is_mp(unit) or t.is_mp:
        eye = np.array([[mpmath.mpf(int(i == j)) for j in range(k)] for i in range(k)], dtype=object)
        unit = np.array([mpmath.mpf(x) for x in unit], dtype=object)
    else:
        eye = np.eye(k)
    order = sorted(range(k), key=lambda i: abs(float(unit[i])))
    stacked = np.concatenate([unit.reshape(1, -1), eye[order]], axis=0)
    coeff_basis = orthonormalize(stacked, tol=1e-6).basis[1:]
    return Subspace(coeff_basis.dot(t.basis), t.ambient_dim)
