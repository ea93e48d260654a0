"""Finite-dimensional state and operator types.

All arrays handed out by these types are read-only views; build a new object
instead of mutating one.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from . import tolerances
from .errors import (
    DimensionMismatch,
    EmptyBasis,
    NotHermitian,
    NotNormalized,
    NotOrthonormal,
    NotPositive,
    TraceNotOne,
)

if TYPE_CHECKING:
    from .model import LatticeModel


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def hermitian_deviation(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def density(self) -> "DensityMatrix":
        v = self.amplitudes
        return make_density(np.outer(v, v.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def purity(self) -> float:
        w = self.entries
        # tr(W^2) for Hermitian W is the squared Frobenius norm
        return float(np.sum(np.abs(w) ** 2))

    def diagonal(self) -> np.ndarray:
        return np.real(np.diag(self.entries))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)


@dataclass(frozen=True, eq=False)
class Operator:
    entries: np.ndarray
    hermitian: bool = False

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True, eq=False)
class EigenSystem:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.conj().T

    def function(self, f) -> np.ndarray:
        """Matrix ``f(H)`` for an elementwise ``f`` on the spectrum."""
        q = self.eigenvectors
        return (q * f(self.eigenvalues)) @ q.conj().T


def _square(entries) -> np.ndarray:
    m = np.asarray(entries, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise DimensionMismatch(f"expected a non-empty square matrix, got shape {m.shape}")
    return m


def make_pure(amplitudes, normalize: bool = False) -> PureState:
    v = np.asarray(amplitudes, dtype=complex).reshape(-1)
    if v.size == 0:
        raise DimensionMismatch("empty amplitude vector")
    n = float(np.linalg.norm(v))
    if normalize:
        if n == 0.0:
            raise NotNormalized(0.0, "cannot normalize the zero vector")
        v = v / n
    elif abs(n - 1.0) > tolerances.current().algebraic:
        raise NotNormalized(n)
    return PureState(_frozen(v))


def make_density(entries) -> DensityMatrix:
    """Validate a matrix as a density matrix.

    Checks Hermiticity, unit trace and positivity in that order. Eigenvalues in
    ``[-tol, 0)`` are clamped to zero and the trace renormalized, which absorbs
    rounding accumulated over long evolutions.
    """
    tol = tolerances.current().algebraic
    m = _square(entries)
    dev = hermitian_deviation(m)
    if dev > tol:
        raise NotHermitian(dev)
    m = 0.5 * (m + m.conj().T)
    tr = float(np.real(np.trace(m)))
    if abs(tr - 1.0) > tol:
        raise TraceNotOne(tr)
    evals, evecs = np.linalg.eigh(m)
    lo = float(evals[0])
    if lo < -tol:
        raise NotPositive(lo)
    if lo < 0.0:
        evals = np.clip(evals, 0.0, None)
        m = (evecs * evals) @ evecs.conj().T
        m = 0.5 * (m + m.conj().T)
        tr = float(np.real(np.trace(m)))
    if tr != 1.0:
        m = m / tr
    return DensityMatrix(_frozen(m))


def make_operator(entries, hermitian: bool | None = None) -> Operator:
    """Wrap a square matrix; ``hermitian=None`` detects the flag."""
    m = _square(entries)
    tol = tolerances.current().algebraic
    dev = hermitian_deviation(m)
    if hermitian is None:
        hermitian = dev <= tol
    elif hermitian and dev > tol:
        raise NotHermitian(dev)
    if hermitian:
        m = 0.5 * (m + m.conj().T)
    return Operator(_frozen(m), bool(hermitian))


def projector_onto(basis: Sequence[np.ndarray] | np.ndarray, dim: int) -> Operator:
    """Orthogonal projector onto the span of ``basis`` (rows or a list of vectors)."""
    if len(basis) == 0:
        raise EmptyBasis("projector needs at least one vector")
    v = np.array([np.asarray(b, dtype=complex).reshape(-1) for b in basis])
    if v.shape[1] != dim:
        raise DimensionMismatch(f"basis vectors have length {v.shape[1]}, expected {dim}")
    check_orthonormal(v)
    p = v.T @ v.conj()
    return Operator(_frozen(0.5 * (p + p.conj().T)), True)


def check_orthonormal(rows: np.ndarray) -> None:
    """Raise :class:`NotOrthonormal` naming the worst offending pair."""
    tol = tolerances.current().algebraic
    gram = rows.conj() @ rows.T
    err = np.abs(gram - np.eye(gram.shape[0]))
    if err.size and err.max() > tol:
        i, j = np.unravel_index(int(np.argmax(err)), err.shape)
        raise NotOrthonormal(int(i), int(j), complex(gram[i, j]))


def spectral_decompose(h: Operator) -> EigenSystem:
    if not h.hermitian:
        raise NotHermitian(hermitian_deviation(np.asarray(h.entries)), "operator is not flagged Hermitian")
    evals, evecs = np.linalg.eigh(h.entries)
    tol = tolerances.current().spectral
    scale = max(float(np.max(np.abs(h.entries))), 1.0)
    es = EigenSystem(_frozen(evals), _frozen(evecs))
    recon = float(np.max(np.abs(h.entries - es.reconstruct())))
    ortho = float(np.max(np.abs(evecs.conj().T @ evecs - np.eye(es.dim))))
    if recon > tol * scale or ortho > tol:
        raise NotHermitian(recon, f"eigendecomposition failed to reconstruct (residual {recon:.3e})")
    return es


def expectation(a: Operator, w: DensityMatrix) -> complex:
    if a.dim != w.dim:
        raise DimensionMismatch(f"operator dim {a.dim} != state dim {w.dim}")
    # tr(AW) without forming the product
    return complex(np.sum(a.entries * w.entries.T))


def partial_trace_spin(w: DensityMatrix, model: "LatticeModel") -> DensityMatrix:
    """Trace out the spin factor, leaving the spatial density matrix."""
    if w.dim != model.dim:
        raise DimensionMismatch(f"state dim {w.dim} != model dim {model.dim}")
    if model.spin_dim == 1:
        return w
    return make_density(trace_out_spin(w.entries, model.spatial_dim, model.spin_dim))


def trace_out_spin(entries: np.ndarray, spatial_dim: int, spin_dim: int) -> np.ndarray:
    """Raw partial trace over the trailing tensor factor of size ``spin_dim``."""
    if spin_dim == 1:
        return entries
    t = np.asarray(entries).reshape(spatial_dim, spin_dim, spatial_dim, spin_dim)
    return np.einsum("asbs->ab", t)


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Random density matrix ``G G^dagger / tr`` with Ginibre ``G``."""
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    w = g @ g.conj().T
    return make_density(w / np.real(np.trace(w)))


def random_pure(dim: int, rng: np.random.Generator) -> PureState:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return make_pure(v, normalize=True)
