import json
import math
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from densitylab import cli
from densitylab.bohm import Schedule
from densitylab.experiments import compare_positions, entropy_experiment, equivalence_experiment
from densitylab.model import build_lattice_model, macro_decomposition
from densitylab.states import mixture, wavefunction

from conftest import M1, M2

ROOT = Path(__file__).parents[1]
GOLDEN = ROOT / "tests" / "golden" / "m1_equivariance"
LEFT = {"type": "left-count", "left_sites": [0, 1]}
VOLATILE = ("versions", "backend")


def run_cli(*args):
    return cli.main([str(a) for a in args])


def write_config(tmp_path, body, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(body))
    return p


def stable(manifest):
    return {k: v for k, v in manifest.items() if k not in VOLATILE}


# equivalence


def test_single_component_arms_agree(m1):
    comps = [(1.0, wavefunction(m1, {"kind": "gaussian", "packets": [{"center": 3.0, "width": 1.5, "momentum": 0.4}]}))]
    result = equivalence_experiment(m1, comps, Schedule(0, 4, 40), 2000, seed=1, checkpoints=[0.0, 2.0, 4.0])
    assert result.passed


def test_plane_wave_mixture_equivalence(m1):
    k = 2 * math.pi / 8
    comps = mixture(m1, [{"weight": 0.5, "wavefunction": {"kind": "plane_wave", "k": k}},
                         {"weight": 0.5, "wavefunction": {"kind": "plane_wave", "k": 0.0}}])
    result = equivalence_experiment(m1, comps, Schedule(0, 4, 40), 10_000, seed=2, checkpoints=[0.0, 2.0, 4.0])
    assert result.passed and len(result.reports) == 3


def test_corrupted_plane_wave_arm_rejected(m1):
    """Power check on the plane-wave mixture: 0.9/0.1 weights in arm B should fail KS at t = 0."""
    k = 2 * math.pi / 8
    comps = mixture(m1, [{"weight": 0.5, "wavefunction": {"kind": "plane_wave", "k": k}},
                         {"weight": 0.5, "wavefunction": {"kind": "plane_wave", "k": 0.0}}])
    power = equivalence_experiment(m1, comps, Schedule(0, 4, 40), 10_000, seed=3, checkpoints=[0.0], arm_b_weights=[0.9, 0.1])
    assert not power.passed


def test_corrupted_arm_rejected():
    model = build_lattice_model({"particles": [{}], "sites": 64, "stencil": "hopping"})
    comps = mixture(model, [
        {"weight": 0.5, "wavefunction": {"kind": "gaussian", "packets": [{"center": 20.0, "width": 5.0, "momentum": 0.3}]}},
        {"weight": 0.5, "wavefunction": {"kind": "gaussian", "packets": [{"center": 44.0, "width": 6.0, "momentum": -0.2}]}},
    ])
    power = equivalence_experiment(model, comps, Schedule(0, 4, 40), 10_000, seed=3, checkpoints=[0.0], arm_b_weights=[0.9, 0.1])
    assert not power.passed and power.arm_a is None


def test_arm_b_weights_length(m1):
    comps = [(1.0, wavefunction(m1, {"kind": "basis", "index": 0}))]
    with pytest.raises(Exception):
        equivalence_experiment(m1, comps, Schedule(0, 1, 10), 200, seed=0, arm_b_weights=[0.5, 0.5])


def test_bonferroni_multi_particle(rng):
    a, b = rng.normal(size=(500, 3)), rng.normal(size=(500, 3))
    r = compare_positions(a, b)
    assert r.threshold == 0.01 and r.kind == "ks"


# entropy


def test_entropy_t0(m2):
    d = macro_decomposition(m2, LEFT)
    curve = entropy_experiment(m2, d, 0, Schedule(0, 10, 100))
    assert curve.p_ph[0] == pytest.approx(1.0, abs=1e-12)
    assert curve.entropy[0] == pytest.approx(math.log(4))
    assert curve.assigned[0]


def test_entropy_assignment_flag(m2):
    curve = entropy_experiment(m2, macro_decomposition(m2, LEFT), 0, Schedule(0, 30, 300))
    top = curve.weights.max(axis=1)
    assert np.all(curve.assigned == (top > 0.9))
    assert np.all(np.isnan(curve.entropy[~curve.assigned]))
    assert (~curve.assigned).any()


def test_entropy_full_space_constant(m2):
    d = macro_decomposition(m2, {"type": "custom", "cells": [list(range(16))]})
    curve = entropy_experiment(m2, d, 0, Schedule(0, 20, 50))
    assert np.allclose(curve.entropy, math.log(16))


def test_entropy_equilibrium_start_stays(m2):
    """Starting in the equilibrium cell keeps p_eq in [p_eq(0) - 0.1, 1]."""
    d = macro_decomposition(m2, LEFT)
    curve = entropy_experiment(m2, d, d.equilibrium_index, Schedule(0, 100, 1000))
    assert curve.p_eq.min() >= curve.p_eq[0] - 0.1


def test_entropy_statistical_postulate_mode(m2):
    d = macro_decomposition(m2, LEFT)
    a = entropy_experiment(m2, d, 0, Schedule(0, 5, 10), seed=4, statistical_postulate=True)
    b = entropy_experiment(m2, d, 0, Schedule(0, 5, 10), seed=4, statistical_postulate=True)
    assert np.array_equal(a.weights, b.weights)
    assert a.p_ph[0] == pytest.approx(1.0)


def test_entropy_warns_for_large_ph_cell(m2, caplog):
    d = macro_decomposition(m2, LEFT)
    entropy_experiment(m2, d, 1, Schedule(0, 1, 2))
    assert "not of lower dimension" in caplog.text


# CLI and runner


def test_schema_flag(capsys):
    assert run_cli("--schema") == 0
    assert json.loads(capsys.readouterr().out)["title"] == "densitylab experiment config"


def test_malformed_config_exit_2(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{"model": {"sites": 3}}')
    out = tmp_path / "out"
    assert run_cli("iph", "--config", cfg, "--out", out) == 2
    assert not out.exists()


def test_wrong_subcommand_exit_2(tmp_path):
    out = tmp_path / "out"
    assert run_cli("grw", "--config", ROOT / "configs" / "m1_iph.json", "--out", out) == 2
    assert not out.exists()


def test_missing_args_exit_2():
    assert run_cli("iph") == 2


def test_numerical_fault_exit_3(tmp_path):
    cfg = write_config(tmp_path, {
        "model": M1, "seed": 0,
        "experiment": {"kind": "evolve", "schedule": {"t_end": 1, "steps": 1},
                       "initial": {"type": "matrix", "dim": 2, "entries": [[1.1, 0], [0, 0], [0, 0], [-0.1, 0]]}},
    })
    assert run_cli("evolve", "--config", cfg, "--out", tmp_path / "o") == 3


def test_statistical_failure_exit_1(tmp_path):
    cfg = json.loads((ROOT / "configs" / "m1_equivariance.json").read_text())
    cfg["experiment"].update(tv_threshold=1e-6, trajectories=200, checkpoints=[0.0], trajectory_output="none")
    out = tmp_path / "o"
    assert run_cli("bohm", "--config", write_config(tmp_path, cfg), "--out", out) == 1
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["passed"] is False and manifest["exit_code"] == 1


@pytest.mark.parametrize("name,sub", [
    ("m1_evolve", "evolve"), ("m1_grw", "grw"), ("m2_entropy", "entropy"), ("m1_iph", "iph"),
])
def test_example_configs_pass_and_are_deterministic(tmp_path, name, sub):
    outs = []
    for r in range(2):
        out = tmp_path / f"run{r}"
        assert run_cli(sub, "--config", ROOT / "configs" / f"{name}.json", "--out", out) == 0
        outs.append(out)
    files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file())
    assert files
    for f in files:
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes(), f
    manifest = json.loads((outs[0] / "manifest.json").read_text())
    assert set(manifest["files"]) | {"manifest.json"} == {str(f) for f in files}


def test_seed_flag_changes_output(tmp_path):
    cfg = ROOT / "configs" / "m1_grw.json"
    run_cli("grw", "--config", cfg, "--out", tmp_path / "a", "--seed", 1)
    run_cli("grw", "--config", cfg, "--out", tmp_path / "b", "--seed", 2)
    a = json.loads((tmp_path / "a" / "manifest.json").read_text())
    b = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert a["seed"] == 1 and b["seed"] == 2 and a["config_sha256"] != b["config_sha256"]


def test_evolve_snapshots(tmp_path):
    out = tmp_path / "o"
    assert run_cli("evolve", "--config", ROOT / "configs" / "m1_evolve.json", "--out", out) == 0
    assert sorted(p.name for p in (out / "snapshots").iterdir()) == [f"step_{k:05d}.json" for k in (0, 10, 20, 30, 40)]


def test_grw_outputs(tmp_path):
    out = tmp_path / "o"
    assert run_cli("grw", "--config", ROOT / "configs" / "m1_grw.json", "--out", out) == 0
    runs = json.loads((out / "grw_runs.json").read_text())
    assert runs["checkpoints"] == [5.0, 10.0] and len(runs["snapshots"]) == 2
    assert (out / "flashes_0000.csv").read_text().startswith("t,k,x,kind\n")


def test_golden_equivariance(tmp_path):
    out = tmp_path / "o"
    assert run_cli("bohm", "--config", GOLDEN / "config.json", "--out", out) == 0
    assert (out / "equivariance_report.json").read_bytes() == (GOLDEN / "equivariance_report.json").read_bytes()
    got = json.loads((out / "manifest.json").read_text())
    want = json.loads((GOLDEN / "manifest.json").read_text())
    assert stable(got) == stable(want)


@pytest.mark.skipif(os.environ.get("DENSITYLAB_DISABLE_NUMBA") == "1", reason="already on the numpy backend")
def test_golden_equivariance_numpy_backend(tmp_path):
    out = tmp_path / "o"
    env = {**os.environ, "DENSITYLAB_DISABLE_NUMBA": "1"}
    code = subprocess.call([sys.executable, "-m", "densitylab", "bohm", "--config", str(GOLDEN / "config.json"), "--out", str(out)], env=env)
    assert code == 0
    got = json.loads((out / "manifest.json").read_text())
    assert got["backend"] == "numpy"
    assert stable(got) == stable(json.loads((GOLDEN / "manifest.json").read_text()))
