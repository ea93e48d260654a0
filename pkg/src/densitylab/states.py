"""Construct states and subspaces from config descriptors."""
from __future__ import annotations

from typing import Any, Mapping

import numpy as np

from . import rng as rngmod
from .errors import ConfigError, IndexOutOfRange
from .hilbert import DensityMatrix, PureState, make_density, make_pure
from .io import matrix_from_json
from .model import (
    LatticeModel,
    Subspace,
    coordinate_subspace,
    energy_shell,
    ensemble_state,
    iph_state,
    macro_decomposition,
)


def _per_particle(value, n: int, name: str) -> list:
    if isinstance(value, (list, tuple)):
        if len(value) != n:
            raise ConfigError(f"{name} needs {n} entries, got {len(value)}")
        return list(value)
    return [value] * n


def _spin_vector(pairs, k: int) -> np.ndarray:
    v = np.array([complex(re, im) for re, im in pairs])
    if v.size != k or not np.linalg.norm(v) > 0:
        raise ConfigError(f"spin state needs {k} amplitudes, not all zero")
    return v / np.linalg.norm(v)


def _spin_part(model: LatticeModel, spec: Mapping[str, Any]) -> np.ndarray:
    """``spin``: one state for every particle; ``spins``: one per particle (``[re, im]`` pairs)."""
    k, n = model.spin_k, model.n_particles
    if "spins" in spec:
        factors = [_spin_vector(s, k) for s in _per_particle(spec["spins"], n, "spins")]
    elif "spin" in spec:
        factors = [_spin_vector(spec["spin"], k)] * n
    else:
        factors = [np.eye(k, dtype=complex)[0]] * n
    out = np.ones(1, dtype=complex)
    for f in factors:
        out = np.kron(out, f)
    return out


def _min_image(d: np.ndarray, model: LatticeModel) -> np.ndarray:
    if model.periodic:
        box = model.box_length
        return d - box * np.round(d / box)
    return d


def wavefunction(model: LatticeModel, spec: Mapping[str, Any]) -> PureState:
    """Pure state from a descriptor.

    Kinds: ``plane_wave`` (``k`` per particle), ``gaussian`` (``packets`` of
    ``center``/``width``/``momentum`` per particle), ``basis`` (``index``),
    ``eigenstate`` (``index`` into the ascending spectrum) and ``amplitudes``
    (the vector JSON format).  Spatial product states are tensored with the
    ``spin`` amplitudes (default: first spin state for every particle).
    """
    kind = spec.get("kind")
    n = model.n_particles
    x = (model.cells + 0.5) * model.spacing
    if kind == "plane_wave":
        ks = np.asarray(_per_particle(spec.get("k", 0.0), n, "k"), dtype=float)
        spatial = np.exp(1j * (x @ ks))
    elif kind == "gaussian":
        packets = spec.get("packets")
        if not isinstance(packets, list) or len(packets) != n:
            raise ConfigError(f"gaussian wavefunction needs one packet per particle ({n})")
        spatial = np.ones(model.spatial_dim, dtype=complex)
        for i, p in enumerate(packets):
            d = _min_image(x[:, i] - float(p["center"]), model)
            width = float(p.get("width", 1.0))
            spatial *= np.exp(-(d**2) / (4.0 * width**2) + 1j * float(p.get("momentum", 0.0)) * d)
    elif kind == "basis":
        v = np.zeros(model.dim, dtype=complex)
        i = int(spec["index"])
        if not 0 <= i < model.dim:
            raise IndexOutOfRange(f"basis index {i} not in [0, {model.dim})")
        v[i] = 1.0
        return make_pure(v)
    elif kind == "eigenstate":
        i = int(spec.get("index", 0))
        if not 0 <= i < model.dim:
            raise IndexOutOfRange(f"eigenstate index {i} not in [0, {model.dim})")
        return make_pure(model.eigensystem.eigenvectors[:, i], normalize=True)
    elif kind == "amplitudes":
        v = np.array([complex(re, im) for re, im in spec["amplitudes"]])
        if v.size != model.dim:
            raise ConfigError(f"amplitudes need length {model.dim}")
        return make_pure(v, normalize=True)
    else:
        raise ConfigError(f"unknown wavefunction kind {kind!r}")
    return make_pure(np.kron(spatial, _spin_part(model, spec)), normalize=True)


def mixture_density(components) -> DensityMatrix:
    """``sum_i p_i |psi_i><psi_i|`` from ``[(p_i, PureState), ...]``."""
    weights = np.array([p for p, _ in components], dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise ConfigError("mixture weights must be non-negative and sum to 1")
    w = sum(p * np.outer(psi.amplitudes, psi.amplitudes.conj()) for p, psi in components)
    return make_density(w)


def mixture(model: LatticeModel, spec) -> list:
    return [(float(c["weight"]), wavefunction(model, c["wavefunction"])) for c in spec]


def subspace(model: LatticeModel, spec: Mapping[str, Any]) -> tuple[Subspace, Any]:
    """Subspace from ``{"macrovariable", "cell"}``, ``{"indices"}``, ``{"shell"}`` or ``{"full": true}``.

    Returns ``(subspace, decomposition_or_None)``.
    """
    if "macrovariable" in spec:
        decomp = macro_decomposition(model, spec["macrovariable"])
        return decomp.macrospaces[decomp.index_of(spec.get("cell", 0))], decomp
    if "indices" in spec:
        return coordinate_subspace(spec["indices"], model.dim, spec.get("label", "custom")), None
    if "shell" in spec:
        sh = spec["shell"]
        return energy_shell(model, float(sh["energy"]), float(sh["width"])), None
    if spec.get("full"):
        return coordinate_subspace(range(model.dim), model.dim, "full"), None
    raise ConfigError("subspace spec needs macrovariable+cell, indices, shell or full")


def random_pure_in(sub: Subspace, seed: int) -> PureState:
    """Uniformly random unit vector of ``sub`` from the statistical-postulate stream."""
    gen = rngmod.stream(seed, "statistical-postulate", 0)
    c = gen.standard_normal(sub.dim) + 1j * gen.standard_normal(sub.dim)
    return make_pure(sub.basis.T @ c, normalize=True)


def build_state(model: LatticeModel, spec: Mapping[str, Any], seed: int = 0) -> DensityMatrix | PureState:
    kind = spec.get("type")
    if kind == "iph":
        return iph_state(subspace(model, spec["subspace"])[0])
    if kind == "canonical":
        return ensemble_state(model, "canonical", beta=float(spec["beta"]))
    if kind == "microcanonical":
        return ensemble_state(model, "microcanonical", energy=float(spec["energy"]), width=float(spec["width"]))
    if kind == "pure":
        return wavefunction(model, spec["wavefunction"])
    if kind == "mixture":
        return mixture_density(mixture(model, spec["components"]))
    if kind == "matrix":
        return make_density(matrix_from_json(spec))
    if kind == "random_pure_in":
        # the Statistical-Postulate comparison: a uniformly random unit vector of the subspace
        return random_pure_in(subspace(model, spec["subspace"])[0], seed)
    raise ConfigError(f"unknown initial state type {kind!r}")


def as_density(state) -> DensityMatrix:
    return state.density() if isinstance(state, PureState) else state
