"""Headline experiments and the config-driven runner behind the CLI."""
from __future__ import annotations

import logging
import math
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy

from . import __version__, _accel, bohm, config as cfg, grw, io, rng as rngmod, states, tolerances
from .dynamics import branch_weights, energy, evolve_density, evolve_pure, mass_density
from .errors import ConfigError, DensityLabError, NumericalFault
from .hilbert import DensityMatrix, PureState
from .model import LatticeModel, MacroDecomposition, boltzmann_entropy, build_lattice_model, iph_state, macro_decomposition
from .stats import StatReport, compare_distributions

log = logging.getLogger(__name__)

EXIT_PASS, EXIT_STAT_FAIL, EXIT_CONFIG, EXIT_FAULT = 0, 1, 2, 3


# --------------------------------------------------------------------------
# empirical equivalence of W-guided and psi-guided ensembles


@dataclass
class EquivalenceResult:
    reports: list  # [(t, StatReport)]
    arm_a: bohm.Ensemble | None = None
    arm_b: bohm.Ensemble | None = None

    @property
    def passed(self) -> bool:
        return all(r.passed for _, r in self.reports)

    def to_dict(self) -> dict:
        return {"checkpoints": [{"t": t, **r.to_dict()} for t, r in self.reports]}


def compare_positions(a: np.ndarray, b: np.ndarray) -> StatReport:
    """Two-sample KS on positions ``(M, N)``.

    For several particles each coordinate marginal is tested at a Bonferroni
    level ``alpha / N`` and the worst marginal is reported.
    """
    n = a.shape[1]
    alpha = tolerances.current().significance
    reports = [compare_distributions(a[:, i], b[:, i], "ks", threshold=alpha / n) for i in range(n)]
    worst = min(reports, key=lambda r: r.p_value)
    return StatReport("ks", worst.statistic, worst.sizes, alpha, all(r.passed for r in reports), worst.p_value)


def _pure_arm(model: LatticeModel, components, weights, schedule, count, seed, integrate, workers) -> tuple[np.ndarray, np.ndarray | None]:
    weights = np.asarray(weights, dtype=float)
    weights = weights / weights.sum()
    choice = np.array([int(rngmod.stream(seed, "trajectory", 1, j).choice(len(components), p=weights)) for j in range(count)])
    q0 = np.empty((count, model.n_particles))
    positions = None
    for c, (_, psi) in enumerate(components):
        members = np.flatnonzero(choice == c)
        if members.size == 0:
            continue
        diag = bohm.spatial_diagonal(psi.density(), model)
        for j in members:
            q0[j] = bohm.sample_from_weights(bohm._configuration_weights(diag), model, rngmod.stream(seed, "initial-sample", 1, j))
        if integrate:
            ens = bohm.integrate_ensemble(model, bohm.pure_field_fn(model, psi, schedule.t_start), q0[members], schedule, members, workers)
            if positions is None:
                positions = np.empty((ens.times.size, count, model.n_particles))
            positions[:, members] = ens.positions
    return q0, positions


def equivalence_experiment(model: LatticeModel, mixture: Sequence[tuple[float, PureState]], schedule: bohm.Schedule,
                           count: int, seed: int, checkpoints: Sequence[float] | None = None,
                           arm_b_weights: Sequence[float] | None = None, workers: int = 1) -> EquivalenceResult:
    """W-guided ensemble versus an ensemble of psi-guided trajectories.

    Arm A integrates ``count`` configurations under the density matrix
    ``W = sum p_i |psi_i><psi_i|``.  Arm B draws one ``psi_i`` per trajectory
    (weights ``arm_b_weights``, default the mixture weights) and integrates it
    under the wave-function guidance law.  Each checkpoint gets a two-sample
    KS test on positions.  Arms use disjoint RNG streams.
    """
    w = states.mixture_density(mixture)
    checkpoints = [schedule.t_start, schedule.t_end] if checkpoints is None else list(checkpoints)
    steps = [schedule.index_of(t) for t in checkpoints]
    integrate = max(steps) > 0

    qa = bohm.sample_ensemble(bohm.spatial_diagonal(w, model), model, seed, count, arm=0)
    arm_a = None
    if integrate:
        arm_a = bohm.integrate_ensemble(model, bohm.density_field_fn(model, w, schedule.t_start), qa, schedule, workers=workers)
    weights = [p for p, _ in mixture] if arm_b_weights is None else list(arm_b_weights)
    if len(weights) != len(mixture):
        raise ConfigError("arm B weights need one entry per mixture component")
    qb, pos_b = _pure_arm(model, mixture, weights, schedule, count, seed, integrate, workers)
    arm_b = bohm.Ensemble(schedule.times, pos_b, np.arange(count)) if integrate else None

    reports = []
    for t, k in zip(checkpoints, steps):
        a = arm_a.positions[k] if integrate else qa
        b = pos_b[k] if integrate else qb
        reports.append((float(schedule.times[k]), compare_positions(a, b)))
    return EquivalenceResult(reports, arm_a, arm_b)


# --------------------------------------------------------------------------
# entropy under the initial projection


@dataclass
class EntropyCurve:
    times: np.ndarray
    weights: np.ndarray  # (T, cells)
    dims: tuple
    equilibrium: int
    ph_index: int
    delta: float
    labels: tuple = ()

    @property
    def dominant(self) -> np.ndarray:
        return np.argmax(self.weights, axis=1)

    @property
    def assigned(self) -> np.ndarray:
        return self.weights.max(axis=1) > 1.0 - self.delta

    @property
    def entropy(self) -> np.ndarray:
        """Boltzmann entropy of the dominant cell, NaN where the state is superposed."""
        logs = np.log(np.asarray(self.dims, dtype=float))
        return np.where(self.assigned, logs[self.dominant], np.nan)

    @property
    def p_eq(self) -> np.ndarray:
        return self.weights[:, self.equilibrium]

    @property
    def p_ph(self) -> np.ndarray:
        return self.weights[:, self.ph_index]

    def window_mean(self, t_min: float, t_max: float) -> float:
        sel = (self.times >= t_min - 1e-12) & (self.times <= t_max + 1e-12)
        return float(self.p_eq[sel].mean())

    def rows(self):
        for k, t in enumerate(self.times):
            s = self.entropy[k]
            yield [float(t), *(float(p) for p in self.weights[k]), int(self.dominant[k]),
                   "assigned" if self.assigned[k] else "superposed", "" if math.isnan(s) else float(s), float(self.p_eq[k])]

    def header(self) -> list:
        return ["t", *(f"p_{lab}" for lab in self.labels), "dominant", "assignment", "entropy", "p_eq"]


def entropy_experiment(model: LatticeModel, decomp: MacroDecomposition, ph_cell, schedule: bohm.Schedule,
                       seed: int = 0, delta: float | None = None, statistical_postulate: bool = False) -> EntropyCurve:
    """Branch weights over time starting from the normalized projector onto the PH cell.

    With ``statistical_postulate`` the start is instead a random pure state of
    the PH cell drawn from ``seed``; otherwise the run uses no randomness.
    """
    delta = tolerances.current().macro_delta if delta is None else delta
    ph = decomp.index_of(ph_cell)
    if len(decomp) > 1 and decomp.dims[ph] >= max(decomp.dims):
        log.warning("PH cell %s is not of lower dimension than the largest cell", ph_cell)
    sub = decomp.macrospaces[ph]
    state = states.random_pure_in(sub, seed) if statistical_postulate else iph_state(sub)
    rows = []
    for t in schedule.times:
        dt = float(t - schedule.t_start)
        if isinstance(state, PureState):
            now = evolve_pure(state, model, dt).density()
        else:
            now = evolve_density(state, model, dt)
        rows.append(branch_weights(now, decomp))
    return EntropyCurve(schedule.times, np.array(rows), decomp.dims, decomp.equilibrium_index, ph, delta,
                        tuple(s.label for s in decomp.macrospaces))


# --------------------------------------------------------------------------
# config-driven runner


@dataclass
class Outcome:
    passed: bool
    files: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def _schedule(d) -> bohm.Schedule:
    return bohm.Schedule.from_dict(d)


def _run_evolve(model, exp, seed, out: Path, workers) -> Outcome:
    state = states.build_state(model, exp["initial"], seed)
    schedule = _schedule(exp["schedule"])
    every = int(exp.get("snapshot_every", 1))
    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    files, rows = [], []
    w0 = states.as_density(state)
    for k, t in enumerate(schedule.times):
        dt = float(t - schedule.t_start)
        now = evolve_pure(state, model, dt) if isinstance(state, PureState) else evolve_density(state, model, dt)
        w = states.as_density(now)
        rows.append([float(t), float(np.real(np.trace(w.entries))), w.purity(), energy(w, model), *mass_density(w, model).values])
        if k % every == 0 or k == schedule.steps:
            files.append(io.write_json(snap_dir / f"step_{k:05d}.json", {"t": float(t), "step": k, "state": io.state_to_json(now)}))
    header = ["t", "trace", "purity", "energy", *(f"m_{x}" for x in range(model.sites))]
    files.append(io.write_csv(out / "observables.csv", header, rows))
    drift = max(abs(r[2] - w0.purity()) for r in rows)
    e_drift = max(abs(r[3] - rows[0][3]) for r in rows)
    tol = tolerances.current()
    summary = {"purity_drift": drift, "energy_drift": e_drift, "snapshots": len(files) - 1}
    return Outcome(drift < tol.unitarity and e_drift < tol.unitarity, files, summary)


def _run_equivariance(model, exp, seed, out: Path, workers) -> Outcome:
    w0 = states.as_density(states.build_state(model, exp["initial"], seed))
    schedule = _schedule(exp["schedule"])
    threshold = float(exp.get("tv_threshold", tolerances.current().tv_threshold))
    report, ens = bohm.equivariance_test(model, w0, int(exp["trajectories"]), schedule, seed, exp.get("checkpoints"), workers)
    files = []
    mode = exp.get("trajectory_output", "checkpoints")
    if mode != "none":
        steps = None if mode == "all" else sorted({schedule.index_of(c["t"]) for c in report.checkpoints})
        files.append(io.write_trajectories(out / "trajectories.csv", ens, steps))
    body = report.to_dict()
    body["tv_threshold"] = threshold
    body["clamped_velocity_evaluations"] = int(ens.clamped)
    files.append(io.write_json(out / "equivariance_report.json", body))
    worst = max(c["tv_distance"] for c in report.checkpoints)
    return Outcome(worst <= threshold, files, {"max_tv": worst})


def _run_grw(model, exp, seed, out: Path, workers) -> Outcome:
    initial = states.build_state(model, exp["initial"], seed)
    params = grw.GrwParams(float(exp.get("rate", grw.SIMULATION_RATE)), float(exp.get("width", grw.SIMULATION_WIDTH_CELLS * model.spacing)))
    horizon = float(exp["horizon"])
    checkpoints = [float(c) for c in exp["checkpoints"]]
    runs = int(exp.get("runs", 1))
    write_snapshots = exp.get("write_snapshots", runs == 1)
    files, counts, snapshot_names = [], [], []
    for r in range(runs):
        run = grw.run_grw(model, initial, params, horizon, checkpoints,
                          rngmod.stream(seed, "collapse-schedule", r), rngmod.stream(seed, "collapse-center", r),
                          seed=seed, record_mass_density=bool(exp.get("mass_density", False)))
        counts.append(len(run.flashes))
        files.append(io.write_flashes(out / f"flashes_{r:04d}.csv", run.flashes))
        if write_snapshots:
            for i, (t, state) in enumerate(run.snapshots):
                name = f"snapshot_{r:04d}_{i:03d}.json"
                body = {"t": t, "run": r, "state": io.state_to_json(state)}
                if run.mass_densities:
                    body["mass_density"] = [float(v) for v in run.mass_densities[i].values]
                files.append(io.write_json(out / name, body))
                snapshot_names.append(name)
    expected = model.n_particles * params.rate * horizon
    mean = float(np.mean(counts))
    summary = {"mean_flash_count": mean, "expected_flash_count": expected, "runs": runs}
    passed = True
    if runs >= 100 and expected > 0:
        tol = float(exp.get("flash_count_tolerance", 0.05))
        passed = abs(mean - expected) <= tol * expected
    manifest = {"params": {"rate": params.rate, "width": params.width}, "seed": seed, "horizon": horizon,
                "checkpoints": checkpoints, "snapshots": snapshot_names, "flash_logs": [f.name for f in files if f.name.startswith("flashes_")]}
    files.append(io.write_json(out / "grw_runs.json", manifest))
    return Outcome(passed, files, summary)


def _run_entropy(model, exp, seed, out: Path, workers) -> Outcome:
    decomp = macro_decomposition(model, exp["macrovariable"])
    schedule = _schedule(exp["schedule"])
    curve = entropy_experiment(model, decomp, exp["ph_cell"], schedule, seed, exp.get("delta"),
                               bool(exp.get("statistical_postulate", False)))
    files = [io.write_csv(out / "entropy_curve.csv", curve.header(), curve.rows())]
    summary = {
        "p_ph_initial": float(curve.p_ph[0]),
        "initial_entropy": float(boltzmann_entropy(decomp, curve.ph_index)),
        "equilibrium_cell": curve.labels[curve.equilibrium],
        "dims": list(curve.dims),
    }
    passed = True
    if "window" in exp:
        win = exp["window"]
        mean = curve.window_mean(float(win["t_min"]), float(win["t_max"]))
        summary["window_mean_p_eq"] = mean
        passed = abs(mean - float(win["target"])) <= float(win["tolerance"])
    files.append(io.write_json(out / "entropy_report.json", summary))
    return Outcome(passed, files, summary)


def _run_equivalence(model, exp, seed, out: Path, workers) -> Outcome:
    mixture = states.mixture(model, exp["mixture"])
    schedule = _schedule(exp["schedule"])
    count = int(exp["trajectories"])
    result = equivalence_experiment(model, mixture, schedule, count, seed, exp.get("checkpoints"), workers=workers)
    body = result.to_dict()
    passed = result.passed
    if "corrupted_weights" in exp:
        power = equivalence_experiment(model, mixture, schedule, count, seed, [schedule.t_start], exp["corrupted_weights"])
        body["power_check"] = power.to_dict()
        # the check has power only if the corrupted arm is rejected
        passed = passed and not power.passed
    files = [io.write_json(out / "equivalence_report.json", body)]
    return Outcome(passed, files, {"passed_all_checkpoints": result.passed})


def _run_iph(model, exp, seed, out: Path, workers) -> Outcome:
    sub, decomp = states.subspace(model, exp["subspace"])
    w = iph_state(sub)
    tol = tolerances.current()
    idem = float(np.max(np.abs(w.entries @ w.entries - w.entries / sub.dim)))
    purity = w.purity()
    summary = {"dim": sub.dim, "purity": purity, "idempotence_residual": idem, "boltzmann_entropy": math.log(sub.dim)}
    if decomp is not None:
        summary["branch_weights"] = [float(p) for p in branch_weights(w, decomp)]
    files = [io.write_json(out / "iph_state.json", io.matrix_to_json(w)), io.write_json(out / "iph_report.json", summary)]
    return Outcome(idem < tol.algebraic and abs(purity - 1.0 / sub.dim) < tol.algebraic, files, summary)


RUNNERS = {
    "evolve": _run_evolve,
    "equivariance": _run_equivariance,
    "grw": _run_grw,
    "entropy": _run_entropy,
    "equivalence": _run_equivalence,
    "iph": _run_iph,
}


def versions() -> dict:
    return {"densitylab": __version__, "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()}


def run_experiment(config_path, out_dir=None, seed: int | None = None, expected_kind: str | None = None) -> int:
    """Validate, run and record one experiment; returns the CLI exit code.

    0 pass, 1 statistical failure, 2 config error (nothing written),
    3 numerical fault.  Diagnostics go to standard error.
    """
    try:
        config = cfg.with_seed(cfg.load(config_path), seed)
        exp = config["experiment"]
        if expected_kind is not None and exp["kind"] != expected_kind:
            raise ConfigError(f"config describes a {exp['kind']!r} experiment, not {expected_kind!r}")
        target = out_dir if out_dir is not None else config.get("output_dir")
        if target is None:
            raise ConfigError("no output directory: pass --out or set output_dir")
        overrides = config.get("tolerances", {})
        with tolerances.override(**overrides):
            model = build_lattice_model(config["model"])
    except (ConfigError, KeyError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(target)
    run_seed = int(config["seed"])
    try:
        with tolerances.override(**overrides):
            out.mkdir(parents=True, exist_ok=True)
            outcome = RUNNERS[exp["kind"]](model, exp, run_seed, out, int(config.get("workers", 1)))
    except NumericalFault as exc:
        print(f"numerical fault: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAULT
    except (ConfigError, DensityLabError, KeyError, ValueError) as exc:
        print(f"config error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    code = EXIT_PASS if outcome.passed else EXIT_STAT_FAIL
    manifest = {
        "kind": exp["kind"],
        "config_sha256": cfg.canonical_hash(config),
        "seed": run_seed,
        "backend": _accel.backend(),
        "versions": versions(),
        "files": {str(Path(f).relative_to(out)): io.file_digest(f) for f in outcome.files},
        "summary": outcome.summary,
        "passed": outcome.passed,
        "exit_code": code,
    }
    io.write_json(out / "manifest.json", manifest)
    if not outcome.passed:
        print(f"{exp['kind']}: statistical check failed: {outcome.summary}", file=sys.stderr)
    return code
