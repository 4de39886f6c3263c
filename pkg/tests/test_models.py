import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from tauhusimi import models
from tauhusimi.errors import ValidationError

from oracles import coherent_ket_by_displacement, pauli, quadratures


def test_canonical_pair_dim2_by_hand():
    x, p = models.canonical_pair(models.HilbertConfig(2))
    s = 1 / math.sqrt(2)
    np.testing.assert_allclose(x, [[0, s], [s, 0]], atol=1e-15)
    np.testing.assert_allclose(p, [[0, -1j * s], [1j * s, 0]], atol=1e-15)


@pytest.mark.parametrize("dim", [2, 5, 17, 64])
def test_canonical_pair_zero_diagonal_and_tridiagonal(dim):
    for m in models.canonical_pair(models.HilbertConfig(dim)).observables:
        assert np.all(np.diag(m) == 0)
        assert np.all(np.triu(m, 2) == 0)


@pytest.mark.parametrize("hbar", [0.5, 1.0, 2.0])
def test_commutator_off_the_corner(hbar):
    dim = 32
    x, p = models.canonical_pair(models.HilbertConfig(dim, hbar))
    comm = x @ p - p @ x
    want = 1j * hbar * np.eye(dim)
    np.testing.assert_allclose(comm[:-1, :-1], want[:-1, :-1], atol=1e-12)
    # the truncation edge breaks the relation in the last entry only
    assert abs(comm[-1, -1] - want[-1, -1]) > 1
    ox, op = quadratures(dim, hbar)
    np.testing.assert_allclose(x, ox, atol=1e-15)
    np.testing.assert_allclose(p, op, atol=1e-15)


@pytest.mark.parametrize("hbar", [0.5, 1.0, 2.0])
def test_quadrature_square_sum_is_number_operator(hbar):
    dim = 24
    x, p = models.canonical_pair(models.HilbertConfig(dim, hbar))
    s = x @ x + p @ p
    want = hbar * (2 * np.arange(dim) + 1)
    np.testing.assert_allclose(s[: dim - 2, : dim - 2], np.diag(want[: dim - 2]), atol=1e-12)
    # last level: hbar * (dim - 1) instead of hbar * (2 dim - 1)
    assert s[-1, -1].real == pytest.approx(hbar * (dim - 1))


def test_pauli_set_matrices_and_algebra():
    sz = models.pauli_set("z")
    np.testing.assert_array_equal(sz[0], np.diag([1, -1]))
    s = models.pauli_set("xyz")
    ref = pauli()
    for k, key in enumerate("xyz"):
        np.testing.assert_array_equal(s[k], ref[key])
    for k in range(3):
        for ell in range(3):
            anti = s[k] @ s[ell] + s[ell] @ s[k]
            np.testing.assert_allclose(anti, 2 * (k == ell) * np.eye(2), atol=0)
    assert np.array_equal(sum(m @ m for m in s.observables), 3 * np.eye(2))
    x, y = models.pauli_set("xy").observables
    np.testing.assert_array_equal(x @ y, 1j * ref["z"])
    assert s.labels == ("Sx", "Sy", "Sz")


def test_pauli_set_rejects_empty_and_unknown():
    with pytest.raises(ValidationError):
        models.pauli_set("")
    with pytest.raises(ValidationError):
        models.pauli_set("q")


def test_fock_and_maximally_mixed():
    rho = models.make_state("fock:0", models.HilbertConfig(16))
    want = np.zeros((16, 16))
    want[0, 0] = 1
    np.testing.assert_array_equal(rho.matrix, want)
    np.testing.assert_allclose(models.make_state("bloch:0,0,0").matrix, np.eye(2) / 2)


def test_coherent_mean_number():
    cfg = models.HilbertConfig(32)
    rho = models.make_state("coherent:re=1.0,im=0.0", cfg)
    n_op = models.number_operator(cfg)[0]
    assert abs(rho.expectation(n_op) - 1.0) < 1e-8


def test_coherent_matches_displaced_vacuum():
    alpha = 0.8 - 0.4j
    rho = models.make_state(f"coherent:re={alpha.real},im={alpha.imag}", models.HilbertConfig(30))
    ket = coherent_ket_by_displacement(alpha, 30)
    np.testing.assert_allclose(rho.matrix, np.outer(ket, ket.conj()), atol=1e-10)


def test_coherent_tail_matches_poisson_and_is_rejected():
    dim = 10
    alpha = 2.0
    tail = stats.poisson.sf(dim - 1, alpha**2)
    with pytest.raises(ValidationError, match="tail"):
        models.make_state(f"coherent:re={alpha}", models.HilbertConfig(dim))
    rho = models.make_state(f"coherent:re={alpha}", models.HilbertConfig(dim), max_tail=1.0)
    assert tail > 1e-8
    assert np.trace(rho.matrix).real == pytest.approx(1.0)


def test_thermal_is_boltzmann():
    cfg = models.HilbertConfig(40)
    rho = models.make_state("thermal:0.5", cfg)
    q = 0.5 / 1.5
    w = (1 - q) * q ** np.arange(40)
    np.testing.assert_allclose(np.diag(rho.matrix).real, w / w.sum(), atol=1e-15)


def test_state_errors():
    with pytest.raises(ValidationError):
        models.make_state("thermal:-0.1", models.HilbertConfig(8))
    with pytest.raises(ValidationError, match="norm"):
        models.make_state("bloch:0,0,1.2")
    with pytest.raises(ValidationError):
        models.make_state("fock:9", models.HilbertConfig(8))
    with pytest.raises(ValidationError):
        models.parse_state_spec("squeezed:1")


@pytest.mark.parametrize(
    "text",
    ["fock:2", "thermal:0.5", "bloch:0.0,0.0,1.0", "coherent:re=1.0,im=-0.5", "cat:re=1.5,im=0.0,parity=-1",
     "random:seed=7,rank=2", "diag:0.3,0.7", "mixed:0.25@fock:0|0.75@fock:1"],
)
def test_state_spec_round_trip(text):
    spec = models.parse_state_spec(text)
    assert models.parse_state_spec(models.format_state_spec(spec)) == spec


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_random_states_are_valid(seed, rank):
    rho = models.make_state(f"random:seed={seed},rank={rank}", models.HilbertConfig(6))
    assert abs(np.trace(rho.matrix).real - 1) < 1e-10
    lam = np.linalg.eigvalsh(rho.matrix)
    assert lam.min() >= -1e-10
    assert np.sum(lam > 1e-12) <= rank
    np.testing.assert_allclose(rho.factor @ rho.factor.conj().T, rho.matrix, atol=1e-12)


def test_cat_parity():
    cfg = models.HilbertConfig(40)
    even = models.make_state("cat:re=1.5", cfg)
    odd = models.make_state("cat:re=1.5,parity=-1", cfg)
    parity = np.diag((-1.0) ** np.arange(40))
    assert even.expectation(parity) == pytest.approx(1.0, abs=1e-12)
    assert odd.expectation(parity) == pytest.approx(-1.0, abs=1e-12)


def test_bloch_vector_examples():
    np.testing.assert_allclose(models.bloch_vector(models.make_state("bloch:0,0,0")), 0, atol=1e-15)
    ground = models.DensityMatrix(np.diag([1.0, 0.0]))
    np.testing.assert_allclose(models.bloch_vector(ground), [0, 0, 1])
    with pytest.raises(ValidationError):
        models.bloch_vector(models.make_state("fock:0", models.HilbertConfig(3)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 2))
def test_bloch_vector_matches_component_traces(seed, rank):
    rho = models.random_qubit(seed, rank)
    s = pauli()
    want = [np.sum(rho.matrix * s[k].T).real for k in "xyz"]
    r = models.bloch_vector(rho)
    np.testing.assert_allclose(r, want, atol=1e-14)
    assert np.linalg.norm(r) <= 1 + 1e-10


def test_density_matrix_validation():
    with pytest.raises(ValidationError, match="trace"):
        models.DensityMatrix(np.eye(2))
    with pytest.raises(ValidationError, match="negative"):
        models.DensityMatrix(np.diag([1.5, -0.5]))


def test_embed_and_observable_labels():
    cfg = models.HilbertConfig(6, pad=4)
    obs = models.observables_from_labels(["X", "P"], cfg)
    assert obs.dim == 10 and obs.is_canonical_pair()
    rho = models.make_state("fock:1", cfg).embed(10)
    assert rho.matrix[1, 1] == 1 and rho.dim == 10
    with pytest.raises(ValidationError):
        models.observables_from_labels(["X", "Sz"], cfg)


def test_displace_moves_means():
    cfg = models.HilbertConfig(40)
    beta = 0.6 + 0.3j
    rho = models.displace(models.make_state("fock:0", cfg), beta)
    x, p = models.canonical_pair(cfg).observables
    assert rho.expectation(x) == pytest.approx(math.sqrt(2) * beta.real, abs=1e-10)
    assert rho.expectation(p) == pytest.approx(math.sqrt(2) * beta.imag, abs=1e-10)
