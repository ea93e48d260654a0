"""Exact unitary evolution, branch weights and the mass-density field."""
from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from . import tolerances
from .errors import DimensionMismatch, NotUnitary
from .hilbert import (
    DensityMatrix,
    EigenSystem,
    Operator,
    PureState,
    _frozen,
    make_density,
    make_pure,
    trace_out_spin,
)
from .model import LatticeModel, MacroDecomposition

# propagator times are rounded to this grid before use, so equal keys give bitwise-equal unitaries
TIME_QUANTUM_DIGITS = 12
CACHE_SIZE = 512


@dataclass(frozen=True, eq=False)
class Propagator:
    time: float
    unitary: Operator
    eigensystem: EigenSystem


@dataclass(frozen=True, eq=False)
class MassDensityField:
    values: np.ndarray  # mass per lattice site
    time: float = 0.0


class PropagatorCache:
    """Thread-safe LRU of propagators keyed by ``(model.key, quantized t)``.

    Concurrent inserts for the same key are harmless: the computation is
    deterministic, so whichever write lands last stores identical bits.
    """

    def __init__(self, maxsize: int = CACHE_SIZE):
        self.maxsize = maxsize
        self._data: OrderedDict = OrderedDict()
        self._lock = threading.Lock()

    def get(self, key):
        with self._lock:
            value = self._data.get(key)
            if value is not None:
                self._data.move_to_end(key)
            return value

    def put(self, key, value):
        with self._lock:
            self._data[key] = value
            self._data.move_to_end(key)
            while len(self._data) > self.maxsize:
                self._data.popitem(last=False)

    def clear(self):
        with self._lock:
            self._data.clear()

    def __len__(self):
        return len(self._data)


CACHE = PropagatorCache()


def quantize_time(t: float) -> float:
    return float(round(float(t), TIME_QUANTUM_DIGITS))


def _unitary(es: EigenSystem, t: float) -> np.ndarray:
    q = es.eigenvectors
    return (q * np.exp(-1j * es.eigenvalues * t)) @ q.conj().T


def propagator(model: LatticeModel, t: float) -> Propagator:
    """``exp(-i H t)`` from the model's spectral decomposition (hbar = 1)."""
    t = quantize_time(t)
    key = (model.key, t)
    cached = CACHE.get(key)
    if cached is not None:
        return cached
    es = model.eigensystem
    u = _unitary(es, t)
    dev = float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))
    if dev > tolerances.current().unitarity:
        raise NotUnitary(dev)
    prop = Propagator(t, Operator(_frozen(u), False), es)
    CACHE.put(key, prop)
    return prop


def _check_dim(state_dim: int, model: LatticeModel) -> None:
    if state_dim != model.dim:
        raise DimensionMismatch(f"state dim {state_dim} != model dim {model.dim}")


def evolve_density_entries(w: np.ndarray, model: LatticeModel, t: float) -> np.ndarray:
    """Unvalidated ``U W U^dagger``; callers own validation."""
    u = propagator(model, t).unitary.entries
    return u @ w @ u.conj().T


def evolve_density(w0: DensityMatrix, model: LatticeModel, t: float) -> DensityMatrix:
    _check_dim(w0.dim, model)
    return make_density(evolve_density_entries(w0.entries, model, t))


def evolve_pure(psi0: PureState, model: LatticeModel, t: float) -> PureState:
    _check_dim(psi0.dim, model)
    psi = propagator(model, t).unitary.entries @ psi0.amplitudes
    # renormalize away rounding; unitarity is already checked on the propagator
    return make_pure(psi / np.linalg.norm(psi))


def von_neumann_residual(w: DensityMatrix, model: LatticeModel, t: float, h: float = 1e-3) -> float:
    """Max-norm gap between the central difference of ``W(t)`` and ``-i[H, W(t)]``."""
    _check_dim(w.dim, model)
    plus = evolve_density_entries(w.entries, model, t + h)
    minus = evolve_density_entries(w.entries, model, t - h)
    now = evolve_density_entries(w.entries, model, t)
    hm = model.hamiltonian.entries
    rhs = -1j * (hm @ now - now @ hm)
    return float(np.max(np.abs((plus - minus) / (2.0 * h) - rhs)))


def energy(w: DensityMatrix, model: LatticeModel) -> float:
    _check_dim(w.dim, model)
    return float(np.real(np.sum(model.hamiltonian.entries * w.entries.T)))


def branch_weights(w: DensityMatrix, decomp: MacroDecomposition) -> np.ndarray:
    """``p_nu = tr(P_nu W)`` for every macrospace."""
    if w.dim != decomp.total_dim:
        raise DimensionMismatch(f"state dim {w.dim} != decomposition dim {decomp.total_dim}")
    return np.array([s.occupation(w) for s in decomp.macrospaces])


def mass_density(w: DensityMatrix, model: LatticeModel, time: float = 0.0) -> MassDensityField:
    """Expected mass on each physical lattice site, summed over particles."""
    _check_dim(w.dim, model)
    diag = np.real(np.diag(trace_out_spin(w.entries, model.spatial_dim, model.spin_dim)))
    values = np.zeros(model.sites)
    for i, m in enumerate(model.masses):
        values += m * np.bincount(model.cells[:, i], weights=diag, minlength=model.sites)
    return MassDensityField(_frozen(values), float(time))
