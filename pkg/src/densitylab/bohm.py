"""Bohmian trajectories guided by a wave function or a density matrix.

Velocities come from node fields: the probability current ``j_i(g)`` (from a
central difference in the first argument of ``W(q, q')``) and the density
``W(g, g)``.  Both are multilinearly interpolated to the continuum position and
the velocity is their ratio.  For ``W = |psi><psi|`` this is the same field as
the wave-function guidance law, including off the grid.
"""
from __future__ import annotations

import functools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels, rng as rngmod, tolerances
from .dynamics import evolve_density_entries, propagator
from .errors import (
    ConfigError,
    DimensionMismatch,
    NegativeDiagonal,
    NumericalFault,
    SpeedCapExceeded,
    StepTooLarge,
    ZeroSlice,
)
from .hilbert import DensityMatrix, PureState, make_density, make_pure, trace_out_spin
from .model import LatticeModel


@dataclass(frozen=True)
class Schedule:
    t_start: float
    t_end: float
    steps: int

    def __post_init__(self):
        if self.steps < 1 or not self.t_end > self.t_start:
            raise ConfigError("schedule needs t_end > t_start and steps >= 1")

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / self.steps

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.steps + 1)

    def index_of(self, t: float) -> int:
        """Grid step matching ``t``; raises if ``t`` is not on the grid."""
        k = int(round((t - self.t_start) / self.dt))
        if not 0 <= k <= self.steps or abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise ConfigError(f"time {t} is not on the schedule grid")
        return k

    @classmethod
    def from_dict(cls, d) -> "Schedule":
        return cls(float(d.get("t_start", 0.0)), float(d["t_end"]), int(d["steps"]))


@dataclass(frozen=True, eq=False)
class Configuration:
    positions: np.ndarray

    @property
    def n(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    positions: np.ndarray  # (len(times), N)
    stream_id: int = 0
    clamped_steps: int = 0


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Many trajectories sharing one time grid; ``positions`` is ``(T, M, N)``."""

    times: np.ndarray
    positions: np.ndarray
    stream_ids: np.ndarray
    clamped: int = 0

    def trajectory(self, j: int) -> Trajectory:
        return Trajectory(self.times, self.positions[:, j, :], int(self.stream_ids[j]))


@dataclass(frozen=True)
class EquivarianceReport:
    checkpoints: list = field(default_factory=list)  # [{"t", "tv_distance", "M"}]

    def to_dict(self) -> dict:
        return {"checkpoints": [dict(c) for c in self.checkpoints]}


# --------------------------------------------------------------------------
# fields


@functools.lru_cache(maxsize=32)
def _neighbors(sites: int, n: int, periodic: bool) -> np.ndarray:
    return kernels.neighbor_table(sites, n, periodic)


def _inv_mass(model: LatticeModel) -> np.ndarray:
    return 1.0 / np.asarray(model.masses, dtype=float)


def density_fields(w_entries: np.ndarray, model: LatticeModel):
    """Node current ``(spatial_dim, N)`` and density ``(spatial_dim,)`` of a density matrix."""
    ws = np.ascontiguousarray(trace_out_spin(w_entries, model.spatial_dim, model.spin_dim), dtype=complex)
    nbr = _neighbors(model.sites, model.n_particles, model.periodic)
    return kernels.density_fields(ws, nbr, _inv_mass(model), float(model.spacing))


def pure_fields(amplitudes: np.ndarray, model: LatticeModel):
    psi = np.ascontiguousarray(np.asarray(amplitudes, dtype=complex).reshape(model.spatial_dim, model.spin_dim))
    nbr = _neighbors(model.sites, model.n_particles, model.periodic)
    return kernels.pure_fields(psi, nbr, _inv_mass(model), float(model.spacing))


def _node_floor(den: np.ndarray) -> float:
    return tolerances.current().node_relative * float(np.max(np.abs(den)))


def velocity_from_fields(positions: np.ndarray, flux: np.ndarray, den: np.ndarray, model: LatticeModel) -> np.ndarray:
    pos = np.ascontiguousarray(np.atleast_2d(np.asarray(positions, dtype=float)))
    v = kernels.interpolate_velocity(pos, flux, den, model.sites, float(model.spacing), model.periodic, _node_floor(den))
    if not np.all(np.isfinite(v)):
        raise NumericalFault("non-finite guidance velocity")
    return v


def _as_positions(q, model: LatticeModel) -> np.ndarray:
    pos = q.positions if isinstance(q, Configuration) else np.asarray(q, dtype=float)
    pos = np.atleast_2d(pos)
    if pos.shape[-1] != model.n_particles:
        raise DimensionMismatch(f"configuration has {pos.shape[-1]} coordinates, model has {model.n_particles} particles")
    return pos


def w_velocity(w: DensityMatrix, model: LatticeModel, q) -> np.ndarray:
    """W-guidance velocity ``(1/m_i) Im[d_i W(q, q') / W(q, q')]`` at ``q = q' = Q``.

    ``q`` is a :class:`Configuration` or an array of positions ``(N,)`` /
    ``(M, N)``; the result has the same leading shape.
    """
    if w.dim != model.dim:
        raise DimensionMismatch(f"state dim {w.dim} != model dim {model.dim}")
    return velocity_matrix(w.entries, model, q)


def velocity_matrix(w_entries: np.ndarray, model: LatticeModel, q) -> np.ndarray:
    """:func:`w_velocity` on a raw (unnormalized) matrix."""
    pos = _as_positions(q, model)
    flux, den = density_fields(np.asarray(w_entries), model)
    v = velocity_from_fields(pos, flux, den, model)
    return v[0] if np.ndim(q.positions if isinstance(q, Configuration) else q) == 1 else v


def psi_velocity(psi: PureState, model: LatticeModel, q) -> np.ndarray:
    """Guidance velocity ``(1/m_i) Im[d_i psi / psi]`` (spin-summed current over density)."""
    if psi.dim != model.dim:
        raise DimensionMismatch(f"state dim {psi.dim} != model dim {model.dim}")
    pos = _as_positions(q, model)
    flux, den = pure_fields(psi.amplitudes, model)
    v = velocity_from_fields(pos, flux, den, model)
    return v[0] if np.ndim(q.positions if isinstance(q, Configuration) else q) == 1 else v


def grid_positions(model: LatticeModel) -> np.ndarray:
    """Node coordinates of every spatial configuration, ``(spatial_dim, N)``."""
    return (model.cells + 0.5) * model.spacing


# --------------------------------------------------------------------------
# sampling


def _configuration_weights(diag: np.ndarray) -> np.ndarray:
    tol = tolerances.current().algebraic
    lo = float(diag.min())
    if lo < -tol:
        raise NegativeDiagonal(lo)
    return np.clip(diag, 0.0, None)


def spatial_diagonal(w: DensityMatrix, model: LatticeModel) -> np.ndarray:
    return np.real(np.diag(trace_out_spin(w.entries, model.spatial_dim, model.spin_dim)))


def sample_from_weights(weights: np.ndarray, model: LatticeModel, gen: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draw of a configuration cell, jittered uniformly inside the cell."""
    cdf = np.cumsum(weights)
    u = gen.random()
    cell = min(int(np.searchsorted(cdf, u * cdf[-1], side="right")), cdf.size - 1)
    jitter = gen.random(model.n_particles)
    return (model.cells[cell] + jitter) * model.spacing


def sample_initial_config(w: DensityMatrix, model: LatticeModel, gen: np.random.Generator) -> Configuration:
    """Draw ``Q`` with ``P(Q in cell q) = W(q, q)``."""
    weights = _configuration_weights(spatial_diagonal(w, model))
    return Configuration(sample_from_weights(weights, model, gen))


def sample_ensemble(weights: np.ndarray, model: LatticeModel, seed: int, count: int,
                    stream_name: str = "initial-sample", arm: int = 0) -> np.ndarray:
    """``count`` configurations, trajectory ``j`` drawing from its own stream ``(arm, j)``."""
    weights = _configuration_weights(weights)
    out = np.empty((count, model.n_particles))
    for j in range(count):
        out[j] = sample_from_weights(weights, model, rngmod.stream(seed, stream_name, arm, j))
    return out


# --------------------------------------------------------------------------
# integration


def check_step(model: LatticeModel, dt: float) -> None:
    """Reject steps longer than one cell at the fastest lattice group velocity ``1/(m dx)``."""
    limit = min(model.masses) * model.spacing**2
    if dt > limit * (1 + 1e-12):
        raise StepTooLarge(f"dt={dt} exceeds m_min*dx^2={limit}")


FieldFn = Callable[[float], tuple]


def integrate_ensemble(model: LatticeModel, field_at: FieldFn, q0: np.ndarray, schedule: Schedule,
                       stream_ids: Sequence[int] | None = None, workers: int = 1) -> Ensemble:
    """Fixed-step RK4 of all configurations in ``q0`` (``(M, N)``) through ``v(Q, t)``.

    ``field_at(t)`` returns node ``(flux, den)``; it is evaluated once per stage
    time and shared by every trajectory.  Speeds above ``dx/dt`` are clamped to
    that cap (and counted); speeds beyond ``speed_cap_factor`` times the cap
    raise :class:`SpeedCapExceeded`.
    """
    dt = schedule.dt
    check_step(model, dt)
    q0 = np.ascontiguousarray(np.atleast_2d(np.asarray(q0, dtype=float)))
    m = q0.shape[0]
    times = schedule.times
    vcap = model.spacing / dt
    hard = tolerances.current().speed_cap_factor * vcap
    box = float(model.box_length)
    chunks = np.array_split(np.arange(m), max(1, min(workers, m)))
    cache: dict = {}

    def fields(t):
        key = round(t, 12)
        if key not in cache:
            cache[key] = field_at(t)
        return cache[key]

    # stage fields are computed up front so worker threads only read them
    for t in times[:-1]:
        fields(t), fields(t + 0.5 * dt), fields(t + dt)

    def run(idx):
        q = kernels.apply_boundary(q0[idx], box, model.periodic)
        out = np.empty((times.size, idx.size, model.n_particles))
        out[0] = q
        clamped = 0

        def velocity(stage, t):
            nonlocal clamped
            flux, den = fields(t)
            v = velocity_from_fields(stage, flux, den, model)
            fast = np.abs(v) > vcap
            if fast.any():
                if np.abs(v).max() > hard:
                    raise SpeedCapExceeded(f"speed {np.abs(v).max():.3g} exceeds {hard:.3g} at t={t}")
                clamped += int(fast.sum())
                v = np.clip(v, -vcap, vcap)
            return v

        def shifted(k, h):
            return kernels.apply_boundary(q + h * k, box, model.periodic)

        for step, t in enumerate(times[:-1]):
            k1 = velocity(q, t)
            k2 = velocity(shifted(k1, 0.5 * dt), t + 0.5 * dt)
            k3 = velocity(shifted(k2, 0.5 * dt), t + 0.5 * dt)
            k4 = velocity(shifted(k3, dt), t + dt)
            q = kernels.apply_boundary(q + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), box, model.periodic)
            out[step + 1] = q
        return out, clamped

    if len(chunks) == 1:
        results = [run(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            results = list(pool.map(run, chunks))
    positions = np.concatenate([r[0] for r in results], axis=1)
    ids = np.arange(m) if stream_ids is None else np.asarray(stream_ids)
    return Ensemble(times, positions, ids, sum(r[1] for r in results))


def density_field_fn(model: LatticeModel, w0: DensityMatrix, t0: float = 0.0) -> FieldFn:
    """``t -> fields(W(t))`` with ``W(t0) = w0``."""
    entries = np.asarray(w0.entries)
    return lambda t: density_fields(evolve_density_entries(entries, model, t - t0), model)


def pure_field_fn(model: LatticeModel, psi0: PureState, t0: float = 0.0) -> FieldFn:
    amps = np.asarray(psi0.amplitudes)
    return lambda t: pure_fields(propagator(model, t - t0).unitary.entries @ amps, model)


def integrate_trajectory(model: LatticeModel, w0: DensityMatrix, q0, schedule: Schedule, stream_id: int = 0) -> Trajectory:
    """RK4 trajectory of one configuration under the W-guidance field of ``W(t)``."""
    if w0.dim != model.dim:
        raise DimensionMismatch(f"state dim {w0.dim} != model dim {model.dim}")
    pos = _as_positions(q0, model)
    ens = integrate_ensemble(model, density_field_fn(model, w0, schedule.t_start), pos, schedule, [stream_id])
    return Trajectory(ens.times, ens.positions[:, 0, :], stream_id, ens.clamped)


def integrate_pure_trajectory(model: LatticeModel, psi0: PureState, q0, schedule: Schedule, stream_id: int = 0) -> Trajectory:
    pos = _as_positions(q0, model)
    ens = integrate_ensemble(model, pure_field_fn(model, psi0, schedule.t_start), pos, schedule, [stream_id])
    return Trajectory(ens.times, ens.positions[:, 0, :], stream_id, ens.clamped)


# --------------------------------------------------------------------------
# diagnostics


def cell_histogram(positions: np.ndarray, model: LatticeModel) -> np.ndarray:
    """Empirical probability of each configuration cell."""
    pos = np.ascontiguousarray(np.atleast_2d(positions), dtype=float)
    idx = kernels.cell_index(pos, model.sites, float(model.spacing))
    return np.bincount(idx, minlength=model.spatial_dim) / pos.shape[0]


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.sum(np.abs(np.asarray(p) - np.asarray(q))))


def equivariance_test(model: LatticeModel, w0: DensityMatrix, count: int, schedule: Schedule,
                      seed: int, checkpoints: Sequence[float] | None = None, workers: int = 1):
    """Sample ``count`` configurations from ``diag W0``, integrate them, and
    report the TV distance between cell histograms and ``diag W(t)``.

    Returns ``(EquivarianceReport, Ensemble)``.
    """
    if count < 100:
        raise ConfigError("equivariance test needs at least 100 trajectories")
    if w0.dim != model.dim:
        raise DimensionMismatch(f"state dim {w0.dim} != model dim {model.dim}")
    q0 = sample_ensemble(spatial_diagonal(w0, model), model, seed, count)
    ens = integrate_ensemble(model, density_field_fn(model, w0, schedule.t_start), q0, schedule, workers=workers)
    checkpoints = list(schedule.times) if checkpoints is None else list(checkpoints)
    rows = []
    for t in checkpoints:
        k = schedule.index_of(t)
        exact = spatial_diagonal(make_density(evolve_density_entries(w0.entries, model, t - schedule.t_start)), model)
        rows.append({"t": float(schedule.times[k]), "tv_distance": total_variation(cell_histogram(ens.positions[k], model), exact), "M": count})
    return EquivarianceReport(rows), ens


def continuity_residual(w0: DensityMatrix, model: LatticeModel, t: float, h: float = 1e-3) -> float:
    """Grid-summed ``|d/dt W(q,q,t) + div(W(q,q,t) v)|`` with central differences in time and space."""
    ent = w0.entries
    flux, den = density_fields(evolve_density_entries(ent, model, t), model)
    d_plus = density_fields(evolve_density_entries(ent, model, t + h), model)[1]
    d_minus = density_fields(evolve_density_entries(ent, model, t - h), model)[1]
    dt_rho = (d_plus - d_minus) / (2.0 * h)
    nbr = _neighbors(model.sites, model.n_particles, model.periodic)
    div = np.zeros_like(dt_rho)
    for i in range(model.n_particles):
        up = np.where(nbr[:, i, 0] >= 0, flux[np.maximum(nbr[:, i, 0], 0), i], 0.0)
        down = np.where(nbr[:, i, 1] >= 0, flux[np.maximum(nbr[:, i, 1], 0), i], 0.0)
        div += (up - down) / (2.0 * model.spacing)
    return float(np.sum(np.abs(dt_rho + div)))


# --------------------------------------------------------------------------
# conditional states


def _environment_cells(model: LatticeModel, split: Sequence[int], q_env):
    system = sorted(int(i) for i in split)
    env = [i for i in range(model.n_particles) if i not in system]
    if not system or len(system) + len(env) != model.n_particles:
        raise ConfigError(f"split {split} must name a non-empty proper subset of particles")
    pos = np.asarray(q_env.positions if isinstance(q_env, Configuration) else q_env, dtype=float).reshape(-1)
    if pos.size != len(env):
        raise DimensionMismatch(f"environment configuration has {pos.size} coordinates, expected {len(env)}")
    cells = np.clip(np.floor(pos / model.spacing).astype(int), 0, model.sites - 1)
    return system, env, cells


def _slice(amplitudes, model, system, env, cells) -> np.ndarray:
    n, k = model.n_particles, model.spin_k
    t = np.asarray(amplitudes).reshape((model.sites,) * n + (k,) * n)
    index = [slice(None)] * (2 * n)
    for i, c in zip(env, cells):
        index[i] = int(c)
    t = t[tuple(index)]  # axes: system sites, then all N spins
    spins = list(range(len(system), len(system) + n))
    sys_spins = [spins[i] for i in system]
    env_spins = [spins[i] for i in env]
    t = np.transpose(t, list(range(len(system))) + sys_spins + env_spins)
    d1 = model.sites ** len(system) * k ** len(system)
    return t.reshape(d1, k ** len(env))


def conditional_wavefunction(psi: PureState, model: LatticeModel, split: Sequence[int], q_env) -> PureState:
    """``C Psi(q_1, Q_2)`` for the particles in ``split``, environment snapped to its cells.

    The global phase makes the largest-magnitude amplitude real and positive.
    """
    if model.spin_k != 1:
        raise ConfigError("conditional wave functions need spin_k = 1; use conditional_density")
    system, env, cells = _environment_cells(model, split, q_env)
    v = _slice(psi.amplitudes, model, system, env, cells)[:, 0]
    norm = float(np.linalg.norm(v))
    if norm < tolerances.current().slice_norm:
        raise ZeroSlice(f"slice norm {norm:.3e} at environment cells {cells.tolist()}")
    v = v / norm
    top = int(np.argmax(np.abs(v)))
    v = v * (abs(v[top]) / v[top])
    v[top] = abs(v[top])
    return make_pure(v)


def conditional_density(psi: PureState, model: LatticeModel, split: Sequence[int], q_env) -> DensityMatrix:
    """Slice at the environment configuration and trace the environment spins."""
    system, env, cells = _environment_cells(model, split, q_env)
    a = _slice(psi.amplitudes, model, system, env, cells)
    norm = float(np.sqrt(np.sum(np.abs(a) ** 2)))
    if norm < tolerances.current().slice_norm:
        raise ZeroSlice(f"slice norm {norm:.3e} at environment cells {cells.tolist()}")
    a = a / norm
    return make_density(a @ a.conj().T)
