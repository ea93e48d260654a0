"""Lattice models and quantum-statistical-mechanics structures.

Basis order is lexicographic over ``(q_1, ..., q_N, s_1, ..., s_N)``: the
spatial configuration index is the slow factor and the spin index the fast
one, so every operator is ``spatial (x) spin``.  Particles are distinguishable.
"""
from __future__ import annotations

import functools
import hashlib
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from . import tolerances
from .errors import (
    ConfigError,
    DimensionCapExceeded,
    DimensionMismatch,
    EmptyBasis,
    EmptyShell,
    IndexOutOfRange,
    NotAPartition,
    UnknownPotential,
)
from .hilbert import (
    DensityMatrix,
    EigenSystem,
    Operator,
    _frozen,
    check_orthonormal,
    make_density,
    make_operator,
    projector_onto,
    spectral_decompose,
)

BOUNDARIES = ("periodic", "hard-wall")
STENCILS = ("laplacian", "hopping")


# --------------------------------------------------------------------------
# potentials


def _pair_distance(a: np.ndarray, b: np.ndarray, sites: int, spacing: float, periodic: bool) -> np.ndarray:
    d = np.abs(a - b).astype(float)
    if periodic:
        d = np.minimum(d, sites - d)
    return d * spacing


def _potential_none(cells, masses, sites, spacing, periodic, params):
    return np.zeros(cells.shape[0])


def _potential_onsite(cells, masses, sites, spacing, periodic, params):
    values = np.asarray(params.get("values", []), dtype=float)
    if values.shape != (sites,):
        raise ConfigError(f"onsite potential needs {sites} values, got {values.shape}")
    return values[cells].sum(axis=1)


def _potential_harmonic(cells, masses, sites, spacing, periodic, params):
    omega = float(params.get("omega", 1.0))
    center = float(params.get("center", 0.5 * sites * spacing))
    x = (cells + 0.5) * spacing
    d = x - center
    if periodic:
        box = sites * spacing
        d = d - box * np.round(d / box)
    return 0.5 * omega**2 * (np.asarray(masses) * d**2).sum(axis=1)


def _potential_soft_coulomb(cells, masses, sites, spacing, periodic, params):
    # g / sqrt(r^2 + eps^2): the 1/r pair form of electric/gravitational potentials, softened on the lattice
    strength = float(params.get("strength", 1.0))
    softening = float(params.get("softening", 1.0))
    if softening <= 0:
        raise ConfigError("soft_coulomb softening must be positive")
    n = cells.shape[1]
    v = np.zeros(cells.shape[0])
    for i in range(n):
        for j in range(i + 1, n):
            r = _pair_distance(cells[:, i], cells[:, j], sites, spacing, periodic)
            v += strength / np.sqrt(r**2 + softening**2)
    return v


def _potential_composite(cells, masses, sites, spacing, periodic, params):
    v = np.zeros(cells.shape[0])
    for term in params.get("terms", []):
        v += potential_values(term.get("name"), term.get("params", {}), cells, masses, sites, spacing, periodic)
    return v


POTENTIALS = {
    "none": _potential_none,
    "onsite": _potential_onsite,
    "harmonic": _potential_harmonic,
    "soft_coulomb": _potential_soft_coulomb,
    "composite": _potential_composite,
}


def potential_values(name, params, cells, masses, sites, spacing, periodic) -> np.ndarray:
    try:
        fn = POTENTIALS[name]
    except KeyError:
        raise UnknownPotential(f"unknown potential {name!r}; known: {sorted(POTENTIALS)}") from None
    return fn(cells, masses, sites, spacing, periodic, params or {})


# --------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class ModelDescriptor:
    masses: tuple[float, ...] = (1.0,)
    sites: int = 8
    spacing: float = 1.0
    boundary: str = "periodic"
    spin_k: int = 1
    potential: str = "none"
    potential_params: Mapping[str, Any] = field(default_factory=dict)
    stencil: str = "laplacian"
    dimension_cap: int | None = None

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ModelDescriptor":
        pot = d.get("potential") or {"name": "none"}
        return cls(
            masses=tuple(float(p.get("mass", 1.0)) for p in d.get("particles", [{}])),
            sites=int(d.get("sites", 8)),
            spacing=float(d.get("spacing", 1.0)),
            boundary=d.get("boundary", "periodic"),
            spin_k=int(d.get("spin_k", 1)),
            potential=pot.get("name", "none"),
            potential_params=dict(pot.get("params", {})),
            stencil=d.get("stencil", "laplacian"),
            dimension_cap=d.get("dimension_cap"),
        )

    def to_dict(self) -> dict:
        d = {
            "particles": [{"mass": m} for m in self.masses],
            "sites": self.sites,
            "spacing": self.spacing,
            "boundary": self.boundary,
            "spin_k": self.spin_k,
            "potential": {"name": self.potential, "params": dict(self.potential_params)},
            "stencil": self.stencil,
        }
        if self.dimension_cap is not None:
            d["dimension_cap"] = self.dimension_cap
        return d


@dataclass(frozen=True, eq=False)
class LatticeModel:
    descriptor: ModelDescriptor
    hamiltonian: Operator
    cells: np.ndarray  # (spatial_dim, N) site index of each particle per spatial basis state

    @property
    def masses(self) -> tuple[float, ...]:
        return self.descriptor.masses

    @property
    def n_particles(self) -> int:
        return len(self.descriptor.masses)

    @property
    def sites(self) -> int:
        return self.descriptor.sites

    @property
    def spacing(self) -> float:
        return self.descriptor.spacing

    @property
    def periodic(self) -> bool:
        return self.descriptor.boundary == "periodic"

    @property
    def spin_k(self) -> int:
        return self.descriptor.spin_k

    @property
    def spatial_dim(self) -> int:
        return self.sites**self.n_particles

    @property
    def spin_dim(self) -> int:
        return self.spin_k**self.n_particles

    @property
    def dim(self) -> int:
        return self.spatial_dim * self.spin_dim

    @property
    def box_length(self) -> float:
        return self.sites * self.spacing

    def hopping(self, i: int) -> float:
        return 1.0 / (2.0 * self.masses[i] * self.spacing**2)

    @functools.cached_property
    def key(self) -> str:
        """Content hash; equal models share propagator cache entries."""
        h = hashlib.sha256(np.ascontiguousarray(self.hamiltonian.entries).tobytes())
        h.update(repr(self.descriptor.to_dict()).encode())
        return h.hexdigest()[:16]

    @functools.cached_property
    def eigensystem(self) -> EigenSystem:
        return spectral_decompose(self.hamiltonian)

    def full_cells(self) -> np.ndarray:
        """Site indices per particle for every full-basis index (spin repeated)."""
        return np.repeat(self.cells, self.spin_dim, axis=0)

    def subsystem(self, particles: Sequence[int]) -> "LatticeModel":
        """Geometry-only model for a subset of particles (no potential)."""
        d = self.descriptor
        sub = ModelDescriptor(
            masses=tuple(d.masses[i] for i in particles),
            sites=d.sites,
            spacing=d.spacing,
            boundary=d.boundary,
            spin_k=d.spin_k,
            stencil=d.stencil,
            dimension_cap=d.dimension_cap,
        )
        return build_lattice_model(sub)


def _single_particle_kinetic(sites: int, t: float, periodic: bool, stencil: str) -> np.ndarray:
    k = np.zeros((sites, sites))
    for q in range(sites):
        if stencil == "laplacian":
            k[q, q] += 2.0 * t
        for r in (q + 1, q - 1):
            if periodic:
                r %= sites
            elif not 0 <= r < sites:
                continue
            k[q, r] -= t
    return k


def build_lattice_model(config: ModelDescriptor | Mapping[str, Any]) -> LatticeModel:
    """Build the Hamiltonian ``sum_i kinetic_i + V`` on the configuration lattice.

    ``stencil="laplacian"`` is the finite-difference second derivative
    ``t (2 delta - delta_{+1} - delta_{-1})`` with ``t = 1 / (2 m dx^2)``;
    ``"hopping"`` drops the constant on-site ``2t`` term (tight-binding form),
    which shifts the spectrum without changing any dynamics.
    """
    d = config if isinstance(config, ModelDescriptor) else ModelDescriptor.from_dict(config)
    n = len(d.masses)
    if n < 1 or any(m <= 0 for m in d.masses):
        raise ConfigError("need at least one particle with positive mass")
    if d.sites < 2:
        raise ConfigError("need at least 2 sites")
    if d.spacing <= 0:
        raise ConfigError("spacing must be positive")
    if d.spin_k < 1:
        raise ConfigError("spin_k must be >= 1")
    if d.boundary not in BOUNDARIES:
        raise ConfigError(f"boundary must be one of {BOUNDARIES}")
    if d.stencil not in STENCILS:
        raise ConfigError(f"stencil must be one of {STENCILS}")
    if d.potential not in POTENTIALS:
        raise UnknownPotential(f"unknown potential {d.potential!r}; known: {sorted(POTENTIALS)}")
    cap = d.dimension_cap if d.dimension_cap is not None else tolerances.current().dimension_cap
    dim = d.sites**n * d.spin_k**n
    if dim > cap:
        raise DimensionCapExceeded(dim, cap)

    periodic = d.boundary == "periodic"
    spatial = d.sites**n
    cells = np.array(np.unravel_index(np.arange(spatial), (d.sites,) * n)).T.reshape(spatial, n)
    h = np.zeros((spatial, spatial))
    for i, m in enumerate(d.masses):
        k1 = _single_particle_kinetic(d.sites, 1.0 / (2.0 * m * d.spacing**2), periodic, d.stencil)
        left = np.eye(d.sites**i)
        right = np.eye(d.sites ** (n - i - 1))
        h += np.kron(np.kron(left, k1), right)
    h += np.diag(potential_values(d.potential, d.potential_params, cells, d.masses, d.sites, d.spacing, periodic))
    if d.spin_k > 1:
        h = np.kron(h, np.eye(d.spin_k**n))
    return LatticeModel(d, make_operator(h, hermitian=True), _frozen(cells))


# --------------------------------------------------------------------------
# subspaces and macrostates


@dataclass(frozen=True, eq=False)
class Subspace:
    basis: np.ndarray  # (dim, ambient) rows are orthonormal vectors
    label: str = ""
    indices: np.ndarray | None = None  # set when every basis vector is a coordinate vector

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[1]

    @functools.cached_property
    def projector(self) -> Operator:
        if self.indices is not None:
            p = np.zeros((self.ambient_dim, self.ambient_dim), dtype=complex)
            p[self.indices, self.indices] = 1.0
            return Operator(_frozen(p), True)
        return projector_onto(self.basis, self.ambient_dim)

    def occupation(self, w: DensityMatrix) -> float:
        """``tr(P W)``, the weight of ``W`` on this subspace."""
        if w.dim != self.ambient_dim:
            raise DimensionMismatch(f"state dim {w.dim} != ambient dim {self.ambient_dim}")
        if self.indices is not None:
            return float(np.sum(np.real(w.entries[self.indices, self.indices])))
        b = self.basis
        return float(np.real(np.einsum("ia,ab,ib->", b.conj(), w.entries, b)))


def make_subspace(vectors, label: str = "") -> Subspace:
    b = np.array([np.asarray(v, dtype=complex).reshape(-1) for v in vectors])
    if b.shape[0] == 0:
        raise EmptyBasis("subspace needs at least one vector")
    check_orthonormal(b)
    return Subspace(_frozen(b), label)


def coordinate_subspace(indices: Sequence[int], ambient_dim: int, label: str = "") -> Subspace:
    idx = np.asarray(sorted(int(i) for i in indices), dtype=np.intp)
    if idx.size == 0:
        raise EmptyBasis("subspace needs at least one basis index")
    if idx[0] < 0 or idx[-1] >= ambient_dim or np.unique(idx).size != idx.size:
        raise IndexOutOfRange(f"basis indices must be distinct and in [0, {ambient_dim})")
    b = np.zeros((idx.size, ambient_dim), dtype=complex)
    b[np.arange(idx.size), idx] = 1.0
    return Subspace(_frozen(b), label, _frozen(idx))


@dataclass(frozen=True, eq=False)
class MacroDecomposition:
    macrospaces: tuple[Subspace, ...]
    values: tuple  # macrovariable value of each cell, same order
    macrovariable: Mapping[str, Any]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.macrospaces)

    @property
    def total_dim(self) -> int:
        return self.macrospaces[0].ambient_dim

    @property
    def equilibrium_index(self) -> int:
        """Cell of largest dimension (first one on ties)."""
        return int(np.argmax(self.dims))

    def __len__(self) -> int:
        return len(self.macrospaces)

    def index_of(self, label) -> int:
        """Resolve a cell by position, label text or macrovariable value."""
        if isinstance(label, (int, np.integer)) and not isinstance(label, bool):
            if not 0 <= label < len(self):
                raise IndexOutOfRange(f"cell {label} not in [0, {len(self)})")
            return int(label)
        for i, s in enumerate(self.macrospaces):
            if s.label == str(label):
                return i
        raise IndexOutOfRange(f"no macrospace labelled {label!r}")

    def check(self) -> None:
        tol = tolerances.current().decomposition
        if sum(self.dims) != self.total_dim:
            raise NotAPartition(f"macrospace dims {self.dims} do not sum to {self.total_dim}")
        ps = [s.projector.entries for s in self.macrospaces]
        for a in range(len(ps)):
            for b in range(a + 1, len(ps)):
                overlap = float(np.max(np.abs(ps[a] @ ps[b])))
                if overlap > tol:
                    raise NotAPartition(f"macrospaces {a} and {b} overlap ({overlap:.3e})")


def macro_decomposition(model: LatticeModel, macrovariable: Mapping[str, Any]) -> MacroDecomposition:
    """Partition the configuration basis into macrospaces.

    ``{"type": "left-count", "left_sites": [...]}`` groups basis states by the
    number of particles on the listed sites (default: the left half), ordered by
    that count.  ``{"type": "custom", "cells": [[i, ...], ...]}`` takes an
    explicit partition of full-basis indices, optionally with ``"labels"``.
    """
    kind = macrovariable.get("type")
    dim = model.dim
    if kind == "left-count":
        left = macrovariable.get("left_sites")
        left = list(range(model.sites // 2)) if left is None else [int(s) for s in left]
        if any(not 0 <= s < model.sites for s in left):
            raise ConfigError(f"left_sites must lie in [0, {model.sites})")
        counts = np.isin(model.full_cells(), left).sum(axis=1)
        values = sorted(set(counts.tolist()))
        spaces = tuple(coordinate_subspace(np.flatnonzero(counts == v), dim, str(v)) for v in values)
        decomp = MacroDecomposition(spaces, tuple(values), dict(macrovariable))
    elif kind == "custom":
        cells = macrovariable.get("cells") or []
        flat = [int(i) for c in cells for i in c]
        if any(len(c) == 0 for c in cells) or sorted(flat) != list(range(dim)):
            raise NotAPartition(f"custom cells must partition the {dim} basis indices exactly once")
        labels = macrovariable.get("labels") or [str(i) for i in range(len(cells))]
        spaces = tuple(coordinate_subspace(c, dim, str(lab)) for c, lab in zip(cells, labels))
        decomp = MacroDecomposition(spaces, tuple(labels), dict(macrovariable))
    else:
        raise ConfigError(f"unknown macrovariable type {kind!r}")
    decomp.check()
    return decomp


def energy_shell(model: LatticeModel, energy: float, width: float) -> Subspace:
    """Span of eigenvectors with eigenvalue in the closed window ``[E, E + dE]``."""
    if width <= 0:
        raise ConfigError("shell width must be positive")
    es = model.eigensystem
    edge = tolerances.current().shell_edge
    sel = (es.eigenvalues >= energy - edge) & (es.eigenvalues <= energy + width + edge)
    if not sel.any():
        raise EmptyShell(f"no eigenvalues in [{energy}, {energy + width}]")
    return Subspace(_frozen(es.eigenvectors[:, sel].T.copy()), f"shell[{energy},{energy + width}]")


def boltzmann_entropy(decomp: MacroDecomposition, index) -> float:
    """``log dim H_nu`` in units with k_B = 1."""
    return math.log(decomp.macrospaces[decomp.index_of(index)].dim)


def iph_state(subspace: Subspace) -> DensityMatrix:
    """Normalized projector ``P / dim`` onto ``subspace``."""
    return make_density(subspace.projector.entries / subspace.dim)


def ensemble_state(model: LatticeModel, kind: str, *, beta: float | None = None,
                   energy: float | None = None, width: float | None = None) -> DensityMatrix:
    if kind == "microcanonical":
        if energy is None or width is None:
            raise ConfigError("microcanonical ensemble needs energy and width")
        return iph_state(energy_shell(model, energy, width))
    if kind == "canonical":
        if beta is None:
            raise ConfigError("canonical ensemble needs beta")
        es = model.eigensystem
        # shift the exponent so large |beta| neither overflows nor underflows
        exponent = -beta * es.eigenvalues
        weights = np.exp(exponent - exponent.max())
        rho = (es.eigenvectors * (weights / weights.sum())) @ es.eigenvectors.conj().T
        return make_density(rho)
    raise ConfigError(f"unknown ensemble kind {kind!r}")
