"""Spontaneous-collapse dynamics for density matrices and wave functions.

Collapse centres live on the grid of cell centres.  In one dimension the
collapse rate operator of particle ``k`` is the diagonal Gaussian
``(2 pi sigma^2)^(-1/2) exp(-(Q_k - x)^2 / (2 sigma^2))`` with minimum-image
distances on a periodic lattice.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tolerances
from .dynamics import evolve_density_entries, mass_density, propagator
from .errors import ConfigError, DegenerateDensity, DimensionMismatch
from .hilbert import DensityMatrix, Operator, PureState, _frozen, make_density, make_pure
from .model import LatticeModel

PHYSICAL_RATE = 1e-15   # per particle, 1/s
PHYSICAL_WIDTH = 1e-7   # m
SIMULATION_RATE = 0.1   # per particle, 1 / lattice time
SIMULATION_WIDTH_CELLS = 2.0


@dataclass(frozen=True)
class GrwParams:
    rate: float = SIMULATION_RATE
    width: float = SIMULATION_WIDTH_CELLS

    def __post_init__(self):
        if self.rate < 0 or self.width <= 0:
            raise ConfigError("GRW rate must be >= 0 and width > 0")

    @classmethod
    def simulation_default(cls, model: LatticeModel) -> "GrwParams":
        return cls(SIMULATION_RATE, SIMULATION_WIDTH_CELLS * model.spacing)


@dataclass(frozen=True)
class Flash:
    time: float
    particle: int
    center: float
    kind: str  # "W" or "psi"


@dataclass(frozen=True, eq=False)
class GrwRun:
    flashes: list
    snapshots: list  # [(t, DensityMatrix | PureState)]
    seed: int
    mass_densities: list = field(default_factory=list)
    final: DensityMatrix | PureState | None = None


def centers(model: LatticeModel) -> np.ndarray:
    return (np.arange(model.sites) + 0.5) * model.spacing


def _distance(a, b, model: LatticeModel):
    d = np.abs(np.asarray(a, dtype=float) - b)
    if model.periodic:
        box = model.box_length
        d = np.minimum(d % box, box - d % box)
    return d


def rate_profile(model: LatticeModel, k: int, x: float, width: float) -> np.ndarray:
    """Diagonal of the collapse rate operator over the full basis."""
    if not 0 <= k < model.n_particles:
        raise DimensionMismatch(f"particle {k} not in model with {model.n_particles} particles")
    q = (model.full_cells()[:, k] + 0.5) * model.spacing
    d = _distance(q, x, model)
    return np.exp(-(d**2) / (2.0 * width**2)) / np.sqrt(2.0 * np.pi * width**2)


def rate_profiles(model: LatticeModel, k: int, width: float) -> np.ndarray:
    """``(sites, dim)``: the rate-operator diagonal for every grid centre (cached, read-only)."""
    key = (model.key, int(k), float(width))
    table = _PROFILES.get(key)
    if table is None:
        table = _frozen(np.array([rate_profile(model, k, x, width) for x in centers(model)]))
        if len(_PROFILES) >= 64:
            _PROFILES.pop(next(iter(_PROFILES)))
        _PROFILES[key] = table
    return table


_PROFILES: dict = {}


def collapse_rate_operator(model: LatticeModel, k: int, x: float, params: GrwParams | None = None) -> Operator:
    params = params or GrwParams.simulation_default(model)
    return Operator(_frozen(np.diag(rate_profile(model, k, x, params.width)).astype(complex)), True)


def center_weights(diag: np.ndarray, model: LatticeModel, k: int, params: GrwParams) -> np.ndarray:
    """Centre probabilities ``tr(W Lambda(x)) dx`` on the grid, normalized to 1.

    Only the state's diagonal enters because the rate operator is diagonal.
    """
    rho = rate_profiles(model, k, params.width) @ np.asarray(diag, dtype=float) * model.spacing
    return rho / rho.sum()


def _choose_center(weights: np.ndarray, diag: np.ndarray, model, k, params, gen) -> tuple[int, float]:
    tol = tolerances.current()
    table = rate_profiles(model, k, params.width)
    grid = centers(model)
    for _ in range(tol.collapse_retries):
        c = int(gen.choice(weights.size, p=weights))
        x = float(grid[c])
        density = float(table[c] @ diag)
        if density >= tol.degenerate_density:
            return c, x
    raise DegenerateDensity(density, f"no centre with tr(W Lambda) >= {tol.degenerate_density} after {tol.collapse_retries} draws")


def apply_w_collapse(w: DensityMatrix, model: LatticeModel, k: int, x: float, params: GrwParams) -> DensityMatrix:
    """``Lambda(x)^(1/2) W Lambda(x)^(1/2) / tr(W Lambda(x))`` for a given centre."""
    if w.dim != model.dim:
        raise DimensionMismatch(f"state dim {w.dim} != model dim {model.dim}")
    lam = rate_profile(model, k, x, params.width)
    root = np.sqrt(lam)
    out = root[:, None] * w.entries * root[None, :]
    return make_density(out / float(np.real(np.sum(lam * np.diag(w.entries)))))


def apply_psi_collapse(psi: PureState, model: LatticeModel, k: int, x: float, params: GrwParams) -> PureState:
    if psi.dim != model.dim:
        raise DimensionMismatch(f"state dim {psi.dim} != model dim {model.dim}")
    v = np.sqrt(rate_profile(model, k, x, params.width)) * psi.amplitudes
    return make_pure(v / np.linalg.norm(v))


def w_collapse(w: DensityMatrix, model: LatticeModel, k: int, params: GrwParams,
               gen: np.random.Generator, time: float = 0.0) -> tuple[DensityMatrix, Flash]:
    """Sample a centre from ``tr(W Lambda(x))`` and collapse ``W`` there."""
    diag = np.real(np.diag(w.entries))
    _, x = _choose_center(center_weights(diag, model, k, params), diag, model, k, params, gen)
    return apply_w_collapse(w, model, k, x, params), Flash(float(time), int(k), x, "W")


def psi_collapse(psi: PureState, model: LatticeModel, k: int, params: GrwParams,
                 gen: np.random.Generator, time: float = 0.0) -> tuple[PureState, Flash]:
    """Sample a centre from ``||Lambda(x)^(1/2) psi||^2`` and collapse ``psi`` there."""
    diag = np.abs(psi.amplitudes) ** 2
    _, x = _choose_center(center_weights(diag, model, k, params), diag, model, k, params, gen)
    return apply_psi_collapse(psi, model, k, x, params), Flash(float(time), int(k), x, "psi")


def sample_collapse_schedule(n: int, params: GrwParams, horizon: float, gen: np.random.Generator) -> list[tuple[float, int]]:
    """Poisson process of total rate ``n * rate`` on ``(0, horizon]`` with uniform particle labels."""
    if horizon <= 0:
        raise ConfigError("collapse horizon must be positive")
    total = n * params.rate
    events = []
    if total <= 0:
        return events
    t = 0.0
    while True:
        t += gen.exponential(1.0 / total)
        if t > horizon:
            return events
        events.append((t, int(gen.integers(n))))


def run_grw(model: LatticeModel, initial: DensityMatrix | PureState, params: GrwParams, horizon: float,
            checkpoints, schedule_gen: np.random.Generator, center_gen: np.random.Generator,
            seed: int = 0, record_mass_density: bool = False) -> GrwRun:
    """Exact unitary evolution interrupted by collapses at Poisson times.

    Snapshots are taken at each checkpoint after all collapses up to and
    including that time.  A pure initial state follows the wave-function
    collapse map, a density matrix the density-matrix map.
    """
    checkpoints = sorted(float(c) for c in checkpoints)
    if any(not 0.0 < c <= horizon for c in checkpoints):
        raise ConfigError("checkpoints must lie in (0, T]")
    if initial.dim != model.dim:
        raise DimensionMismatch(f"state dim {initial.dim} != model dim {model.dim}")
    pure = isinstance(initial, PureState)
    events = sample_collapse_schedule(model.n_particles, params, horizon, schedule_gen)
    marks = sorted([(t, 0, k) for t, k in events] + [(c, 1, None) for c in checkpoints])

    state, now = initial, 0.0
    flashes, snapshots, densities = [], [], []
    for t, is_checkpoint, k in marks:
        if t > now:
            state = _evolve(state, model, t - now, pure)
            now = t
        if is_checkpoint:
            snapshots.append((t, state))
            if record_mass_density:
                w = state.density() if pure else state
                densities.append(mass_density(w, model, t))
        else:
            collapse = psi_collapse if pure else w_collapse
            state, flash = collapse(state, model, k, params, center_gen, time=t)
            flashes.append(flash)
    if horizon > now:
        state = _evolve(state, model, horizon - now, pure)
    return GrwRun(flashes, snapshots, seed, densities, state)


def _evolve(state, model: LatticeModel, t: float, pure: bool):
    if pure:
        v = propagator(model, t).unitary.entries @ state.amplitudes
        return make_pure(v / np.linalg.norm(v))
    return make_density(evolve_density_entries(state.entries, model, t))


def position_variance(w: DensityMatrix, model: LatticeModel, k: int) -> float:
    """Variance of particle ``k``'s position (non-periodic reading of the cell centres)."""
    diag = np.real(np.diag(w.entries))
    q = (model.full_cells()[:, k] + 0.5) * model.spacing
    mean = float(diag @ q)
    return float(diag @ (q - mean) ** 2)

