import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from densitylab.errors import (
    DimensionMismatch,
    EmptyBasis,
    NotHermitian,
    NotNormalized,
    NotOrthonormal,
    NotPositive,
    TraceNotOne,
)
from densitylab.hilbert import (
    expectation,
    make_density,
    make_operator,
    make_pure,
    partial_trace_spin,
    projector_onto,
    random_density,
    random_pure,
    spectral_decompose,
)
from densitylab.model import build_lattice_model
from densitylab.tolerances import current, override


def test_maximally_mixed_qubit():
    w = make_density(np.diag([0.5, 0.5]))
    assert w.purity() == pytest.approx(0.5, abs=1e-12)


def test_trace_not_one_reports_trace():
    with pytest.raises(TraceNotOne) as exc:
        make_density(np.diag([0.5, 0.4]))
    assert exc.value.value == pytest.approx(0.9)


def test_negative_eigenvalue():
    with pytest.raises(NotPositive) as exc:
        make_density(np.diag([1.1, -0.1]))
    assert exc.value.value == pytest.approx(-0.1)


def test_not_hermitian():
    with pytest.raises(NotHermitian):
        make_density(np.array([[0.5, 0.1], [0.3, 0.5]]))


def test_non_square_rejected():
    with pytest.raises(DimensionMismatch):
        make_density(np.ones((2, 3)) / 2)


def test_tiny_negative_eigenvalues_clipped():
    w = make_density(np.diag([1.0 + 5e-11, -5e-11]))
    assert w.eigenvalues().min() >= 0.0
    assert np.real(np.trace(w.entries)) == pytest.approx(1.0, abs=1e-15)


def test_states_are_immutable():
    w = make_density(np.eye(2) / 2)
    with pytest.raises(ValueError):
        w.entries[0, 0] = 1.0


def test_pure_state_norm():
    with pytest.raises(NotNormalized):
        make_pure([1.0, 1.0])
    psi = make_pure([1.0, 1.0], normalize=True)
    assert np.linalg.norm(psi.amplitudes) == pytest.approx(1.0)


def test_coordinate_projector():
    e = np.eye(4)
    p = projector_onto([e[0], e[1]], 4)
    assert np.allclose(p.entries, np.diag([1, 1, 0, 0]))


def test_empty_basis():
    with pytest.raises(EmptyBasis):
        projector_onto([], 4)


def test_non_orthonormal_names_pair():
    with pytest.raises(NotOrthonormal) as exc:
        projector_onto([np.array([1.0, 0, 0]), np.array([1.0, 1.0, 0]) / np.sqrt(2)], 3)
    assert {exc.value.i, exc.value.j} == {0, 1}


@settings(max_examples=30, deadline=None)
@given(dim=st.integers(2, 12), rank=st.integers(1, 6), seed=st.integers(0, 2**32 - 1))
def test_projector_idempotent(dim, rank, seed):
    rank = min(rank, dim)
    g = np.random.default_rng(seed).standard_normal((dim, dim)) + 0j
    q, _ = np.linalg.qr(g)
    p = projector_onto(q.T[:rank], dim).entries
    assert np.abs(p @ p - p).max() < 1e-10
    assert np.abs(p - p.conj().T).max() < 1e-10
    assert abs(np.real(np.trace(p)) - rank) < 1e-9


def test_spectral_m1(m1):
    es = spectral_decompose(m1.hamiltonian)
    expected = np.sort(-np.cos(2 * np.pi * np.arange(8) / 8))
    assert np.allclose(es.eigenvalues, expected, atol=1e-12)


def test_spectral_identity():
    es = spectral_decompose(make_operator(np.eye(5)))
    assert np.allclose(es.eigenvalues, 1.0)


def test_spectral_requires_hermitian():
    with pytest.raises(NotHermitian):
        spectral_decompose(make_operator(np.array([[0, 1], [0, 0]])))


@settings(max_examples=25, deadline=None)
@given(dim=st.integers(1, 64), seed=st.integers(0, 2**32 - 1))
def test_spectral_reconstruction(dim, seed):
    g = np.random.default_rng(seed).standard_normal((dim, dim, 2)) @ [1, 1j]
    h = make_operator(g + g.conj().T, hermitian=True)
    es = spectral_decompose(h)
    scale = np.abs(h.entries).max()
    assert np.abs(es.reconstruct() - h.entries).max() < 1e-8 * scale
    assert np.abs(es.eigenvectors.conj().T @ es.eigenvectors - np.eye(dim)).max() < 1e-8
    assert np.all(np.diff(es.eigenvalues) >= 0)


def test_expectation_identity_and_projectors(rng):
    w = random_density(6, rng)
    assert expectation(make_operator(np.eye(6)), w) == pytest.approx(1.0)
    e = np.eye(6)
    p = projector_onto([e[0], e[1]], 6)
    own = make_density(p.entries / 2)
    assert expectation(p, own) == pytest.approx(1.0)
    other = make_density(np.diag([0, 0, 0.5, 0.5, 0, 0]))
    assert abs(expectation(p, other)) < 1e-15


def test_expectation_dimension_mismatch(rng):
    with pytest.raises(DimensionMismatch):
        expectation(make_operator(np.eye(3)), random_density(4, rng))


def test_expectation_real_for_hermitian(rng):
    g = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    a = make_operator(g + g.conj().T)
    assert abs(expectation(a, random_density(5, rng)).imag) < 1e-10


def _spin_model(sites=2, k=2):
    return build_lattice_model({"particles": [{"mass": 1.0}], "sites": sites, "spin_k": k})


def test_partial_trace_product(rng):
    model = _spin_model(sites=3)
    ws = random_density(3, rng)
    w = make_density(np.kron(ws.entries, np.eye(2) / 2))
    assert np.allclose(partial_trace_spin(w, model).entries, ws.entries, atol=1e-12)


def test_partial_trace_trivial_spin(m1, rng):
    w = random_density(8, rng)
    assert partial_trace_spin(w, m1) is w


def test_partial_trace_entangled():
    model = _spin_model()
    # (|0,up> + |1,down>)/sqrt(2) in spatial (x) spin order
    v = np.zeros(4)
    v[0] = v[3] = 1 / np.sqrt(2)
    reduced = partial_trace_spin(make_pure(v).density(), model)
    assert reduced.purity() == pytest.approx(0.5, abs=1e-12)


def test_partial_trace_dimension_mismatch(rng):
    with pytest.raises(DimensionMismatch):
        partial_trace_spin(random_density(3, rng), _spin_model())


@settings(max_examples=20, deadline=None)
@given(a=st.floats(0, 1), seed=st.integers(0, 2**32 - 1))
def test_partial_trace_convex(a, seed):
    model = _spin_model(sites=3)
    gen = np.random.default_rng(seed)
    w1, w2 = random_density(6, gen), random_density(6, gen)
    mix = make_density(a * w1.entries + (1 - a) * w2.entries)
    lhs = partial_trace_spin(mix, model).entries
    rhs = a * partial_trace_spin(w1, model).entries + (1 - a) * partial_trace_spin(w2, model).entries
    assert np.abs(lhs - rhs).max() < 1e-10


@settings(max_examples=30, deadline=None)
@given(dim=st.integers(1, 16), seed=st.integers(0, 2**32 - 1), pure=st.booleans())
def test_purity_bounds(dim, seed, pure):
    gen = np.random.default_rng(seed)
    w = random_pure(dim, gen).density() if pure else random_density(dim, gen)
    p = w.purity()
    assert 0 < p <= 1 + 1e-9
    if pure:
        assert p == pytest.approx(1.0, abs=1e-9)


def test_tolerance_override_is_scoped():
    base = current().algebraic
    with override(algebraic=1e-3):
        make_density(np.diag([0.5, 0.5005]))
        assert current().algebraic == 1e-3
    assert current().algebraic == base
    with pytest.raises(TraceNotOne):
        make_density(np.diag([0.5, 0.5005]))
