import json

import jsonschema
import numpy as np
import pytest

from densitylab import io
from densitylab.bohm import Ensemble
from densitylab.errors import DimensionMismatch
from densitylab.grw import Flash
from densitylab.hilbert import random_density, random_pure


def test_matrix_round_trip_exact(rng):
    w = random_density(5, rng)
    d = json.loads(io.dumps(io.matrix_to_json(w)))
    jsonschema.validate(d, io.MATRIX_SCHEMA)
    assert np.array_equal(io.density_from_json(d).entries, w.entries)
    assert len(d["entries"]) == 25


def test_row_major():
    d = io.matrix_to_json(np.array([[1, 2j], [3, 4]]))
    assert d["entries"] == [[1.0, 0.0], [0.0, 2.0], [3.0, 0.0], [4.0, 0.0]]


def test_pure_round_trip(rng):
    psi = random_pure(7, rng)
    assert np.array_equal(io.pure_from_json(json.loads(io.dumps(io.pure_to_json(psi)))).amplitudes, psi.amplitudes)


def test_bad_dims():
    with pytest.raises(DimensionMismatch):
        io.matrix_from_json({"dim": 2, "entries": [[1, 0]] * 3})
    with pytest.raises(DimensionMismatch):
        io.pure_from_json({"dim": 2, "amplitudes": [[1, 0]]})


def test_trajectory_csv(tmp_path):
    ens = Ensemble(np.array([0.0, 0.5]), np.arange(8, dtype=float).reshape(2, 2, 2), np.array([4, 9]))
    text = io.write_trajectories(tmp_path / "t.csv", ens).read_text().splitlines()
    assert text[0] == "t,q_1,q_2,stream_id"
    assert text[1:] == ["0.0,0.0,1.0,4", "0.5,4.0,5.0,4", "0.0,2.0,3.0,9", "0.5,6.0,7.0,9"]
    sub = io.write_trajectories(tmp_path / "s.csv", ens, [1]).read_text().splitlines()
    assert sub[1:] == ["0.5,4.0,5.0,4", "0.5,6.0,7.0,9"]


def test_flash_csv(tmp_path):
    text = io.write_flashes(tmp_path / "f.csv", [Flash(0.1, 1, 2.5, "W")]).read_text()
    assert text == "t,k,x,kind\n0.1,1,2.5,W\n"


def test_floats_round_trip_through_csv(tmp_path):
    x = 0.1 + 0.2
    io.write_csv(tmp_path / "x.csv", ["x"], [[x]])
    assert float((tmp_path / "x.csv").read_text().split()[1]) == x
