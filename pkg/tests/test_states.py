import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from entorder import linalg, states as S
from entorder.errors import (
    DimensionMismatch,
    DomainError,
    NotHermitian,
    NotPositive,
    NotUnitTrace,
    StateFileError,
)
from entorder.measures import concurrence

from oracles import H_025, H_090

seeds = st.integers(min_value=0, max_value=2**63 - 1)


def proj(v):
    return np.outer(v, np.conj(v))


# -- validate ----------------------------------------------------------------


def test_validate_maximally_mixed():
    rho = S.validate(np.eye(4) / 4, (2, 2))
    assert np.array_equal(rho.mat, np.eye(4) / 4)


@pytest.mark.parametrize(
    "mat, err, word",
    [
        (np.eye(4) / 2, NotUnitTrace, "trace"),
        (np.diag([1.5, -0.5, 0, 0]), NotPositive, "-5.000e-01"),
        (np.array([[0.5, 0.1], [0.2, 0.5]]), NotHermitian, "Hermitian"),
    ],
)
def test_validate_errors_name_invariant(mat, err, word):
    dims = (2, 2) if mat.shape[0] == 4 else (2, 1)
    with pytest.raises(err, match=word):
        S.validate(mat, dims)


def test_validate_clips_small_negatives():
    mat = np.diag([0.5 + 1e-9, 0.5, 0.0, -1e-9])
    rho = S.validate(mat, (2, 2))
    w = np.linalg.eigvalsh(rho.mat)
    assert w.min() >= 0
    assert np.trace(rho.mat).real == pytest.approx(1.0, abs=1e-15)


def test_validate_leaves_roundoff_alone():
    mat = np.diag([0.5, 0.5, 0.0, -1e-14]).astype(complex)
    assert S.validate(mat, (2, 2)).mat is not None
    assert np.array_equal(S.validate(mat, (2, 2)).mat, mat)


def test_validate_shape():
    with pytest.raises(DimensionMismatch):
        S.validate(np.eye(4) / 4, (2, 3))


# -- canonical families --------------------------------------------------------


def test_werner_endpoints():
    assert np.allclose(S.werner(1.0).mat, proj(S.PHI_PLUS), atol=1e-15)
    assert np.allclose(S.werner(0.25).mat, np.eye(4) / 4, atol=1e-15)


def test_werner_spectrum():
    w = np.linalg.eigvalsh(S.werner(0.75).mat)[::-1]
    assert np.allclose(w, [0.75, 1 / 12, 1 / 12, 1 / 12], atol=1e-15)


@pytest.mark.parametrize("F", [-0.1, 1.5])
def test_werner_domain(F):
    with pytest.raises(DomainError):
        S.werner(F)


def test_bell_diagonal_examples():
    assert np.allclose(S.bell_diagonal(1, 0, 0, 0).mat, proj(S.PHI_PLUS), atol=1e-15)
    assert np.allclose(S.bell_diagonal(0.25, 0.25, 0.25, 0.25).mat, np.eye(4) / 4, atol=1e-15)
    assert np.allclose(S.bell_diagonal(0.75, 1 / 12, 1 / 12, 1 / 12).mat, S.werner(0.75).mat, atol=1e-12)


def test_bell_basis_order():
    assert np.allclose(S.bell_diagonal(0, 0, 0, 1).mat, proj(np.array([0, 1, -1, 0]) / np.sqrt(2)))


@pytest.mark.parametrize("w", [(0.5, 0.5, 0.5, -0.5), (0.3, 0.3, 0.3, 0.3)])
def test_bell_diagonal_domain(w):
    with pytest.raises(DomainError):
        S.bell_diagonal(*w)


@pytest.mark.parametrize("F", np.linspace(0, 1, 101))
def test_werner_threshold(F):
    ppt = S.is_ppt(S.werner(F)).ppt
    assert ppt == (F <= 0.5 + 1e-9)


# -- samplers --------------------------------------------------------------------


def test_haar_norm_and_determinism():
    for i in range(50):
        seed = S.SeedSpec(11, i)
        psi = S.haar_pure((2, 2), seed)
        assert abs(np.linalg.norm(psi.amp) - 1) < 1e-12
        assert np.array_equal(psi.amp, S.haar_pure((2, 2), seed).amp)


def test_streams_differ():
    a = S.haar_pure((2, 2), S.SeedSpec(1, 0)).amp
    b = S.haar_pure((2, 2), S.SeedSpec(1, 1)).amp
    assert not np.allclose(a, b)


def test_derive_namespaces_are_disjoint():
    base = S.SeedSpec(7)
    keys = {base.derive(a).stream(i).rng().integers(2**62) for a in range(4) for i in range(50)}
    assert len(keys) == 200


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_ginibre_valid(k):
    for i in range(50):
        rho = S.ginibre_mixed((2, 2), k, S.SeedSpec(3, i))
        S.validate(rho.mat, rho.dims)
        assert np.linalg.matrix_rank(rho.mat, tol=1e-10) == k


def test_ginibre_k1_pure():
    rho = S.ginibre_mixed((2, 2), 1, S.SeedSpec(5))
    assert np.trace(rho.mat @ rho.mat).real == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("k", [0, 5])
def test_ginibre_domain(k):
    with pytest.raises(DomainError):
        S.ginibre_mixed((2, 2), k)


def test_separable_k1_is_product_pure():
    rho = S.random_separable(1, S.SeedSpec(8)).mat
    assert np.trace(rho @ rho).real == pytest.approx(1.0, abs=1e-12)
    ra = linalg.partial_trace(rho, (2, 2), "A")
    rb = linalg.partial_trace(rho, (2, 2), "B")
    assert np.allclose(rho, np.kron(ra, rb), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_separable_is_ppt_and_unentangled(seed):
    rho = S.random_separable(16, S.SeedSpec(seed))
    S.validate(rho.mat, rho.dims)
    assert S.is_ppt(rho).ppt
    assert concurrence(rho) < 1e-10


def test_sampler_validity_without_clipping():
    for i in range(2000):
        for rho in (S.ginibre_mixed((2, 2), 4, S.SeedSpec(21, i)), S.random_separable(16, S.SeedSpec(22, i))):
            out = S.validate(rho.mat, rho.dims)
            assert out.mat is rho.mat or np.array_equal(out.mat, rho.mat)


# -- PPT ------------------------------------------------------------------------


def test_ppt_bell():
    r = S.is_ppt(S.DensityMatrix((2, 2), proj(S.PHI_PLUS)))
    assert not r.ppt
    assert r.min_eigenvalue == pytest.approx(-0.5, abs=1e-14)


def test_ppt_werner():
    r = S.is_ppt(S.werner(0.75))
    assert not r.ppt
    assert r.min_eigenvalue == pytest.approx(-0.25, abs=1e-14)


# -- Schmidt states and binary entropy ----------------------------------------------


def test_schmidt_examples():
    assert np.allclose(S.pure_with_schmidt(0.5).amp, S.PHI_PLUS)
    assert np.allclose(S.pure_with_schmidt(0.0).amp, [0, 0, 0, 1])


@pytest.mark.parametrize("p", np.linspace(0, 1, 41))
def test_schmidt_entropy(p):
    psi = S.pure_with_schmidt(p)
    red = linalg.partial_trace(proj(psi.amp), (2, 2))
    assert abs(linalg.von_neumann_entropy(red) - S.binary_entropy(p)) < 1e-10


@pytest.mark.parametrize("p, h", [(0.5, 1.0), (0.0, 0.0), (1.0, 0.0), (0.25, H_025), (0.9, H_090)])
def test_binary_entropy(p, h):
    assert S.binary_entropy(p) == pytest.approx(h, abs=1e-15)


def test_invert_binary_entropy_examples():
    assert S.invert_binary_entropy(1.0) == 0.5
    assert S.invert_binary_entropy(0.0) == 0.0
    assert abs(S.invert_binary_entropy(H_025) - 0.25) < 1e-9


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=0.0, max_value=1.0))
def test_binary_entropy_roundtrip(E):
    p = S.invert_binary_entropy(E)
    assert 0 <= p <= 0.5
    assert abs(S.binary_entropy(p) - E) < 1e-10


@pytest.mark.parametrize("bad", [-0.1, 1.1])
def test_binary_entropy_domain(bad):
    with pytest.raises(DomainError):
        S.binary_entropy(bad)
    with pytest.raises(DomainError):
        S.invert_binary_entropy(bad)
    with pytest.raises(DomainError):
        S.pure_with_schmidt(bad)


# -- local-unitary orbit ----------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_local_unitary_orbit(seed):
    rng = np.random.default_rng(seed % 2**32)
    rho = S.ginibre_mixed((2, 2), 4, S.SeedSpec(seed))
    U = np.kron(*(np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))[0] for _ in range(2)))
    out = S.validate(U @ rho.mat @ U.conj().T, (2, 2))
    assert np.allclose(np.linalg.eigvalsh(out.mat), np.linalg.eigvalsh(rho.mat), atol=1e-10)


# -- specs and files --------------------------------------------------------------


def test_parse_specs():
    assert np.allclose(S.parse_state_spec("werner:0.75").mat, S.werner(0.75).mat)
    assert np.allclose(S.parse_state_spec("bell:0.7,0.1,0.1,0.1").mat, S.bell_diagonal(0.7, 0.1, 0.1, 0.1).mat)
    assert isinstance(S.parse_state_spec("schmidt:0.25"), S.PureState)
    assert isinstance(S.parse_state_spec("phi_plus"), S.PureState)
    g = S.parse_state_spec("ginibre:k=4,seed=7")
    assert np.array_equal(g.mat, S.ginibre_mixed((2, 2), 4, S.SeedSpec(7)).mat)
    h = S.parse_state_spec("haar:seed=3")
    assert np.array_equal(h.amp, S.haar_pure((2, 2), S.SeedSpec(3)).amp)


@pytest.mark.parametrize("spec", ["werner:abc", "bell:1,0", "nope:1", "ginibre:k=4,q=1", "werner:1.5"])
def test_parse_spec_errors(spec):
    with pytest.raises(DomainError):
        S.parse_state_spec(spec)


@pytest.mark.parametrize("state", [S.werner(0.6), S.pure_with_schmidt(0.3), S.ginibre_mixed((2, 2), 3, S.SeedSpec(1))])
def test_state_file_roundtrip(tmp_path, state):
    path = tmp_path / "s.json"
    S.save_state(state, path)
    back = S.load_state(path)
    assert type(back) is type(state)
    a = back.mat if isinstance(back, S.DensityMatrix) else back.amp
    b = state.mat if isinstance(state, S.DensityMatrix) else state.amp
    assert np.array_equal(a, b)


def test_state_file_corrupt(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"dims": [2, 2], "matrix": ')
    with pytest.raises(StateFileError, match="line 1"):
        S.load_state(path)


def test_state_file_missing(tmp_path):
    with pytest.raises(StateFileError):
        S.load_state(tmp_path / "absent.json")


def test_state_file_invalid_matrix(tmp_path):
    path = tmp_path / "neg.json"
    m = np.diag([1.5, -0.5, 0, 0])
    path.write_text(json.dumps({"dims": [2, 2], "matrix": linalg.matrix_to_json(m)}))
    with pytest.raises(NotPositive):
        S.load_state(path)


# -- cross-process determinism -------------------------------------------------------

_DIGEST = """
import hashlib
import numpy as np
from entorder import states as S
h = hashlib.sha256()
for i in range(20):
    s = S.SeedSpec(2**63 + 12345, i)
    h.update(S.haar_pure((2, 2), s).amp.tobytes())
    h.update(S.ginibre_mixed((2, 2), 3, s).mat.tobytes())
    h.update(S.random_separable(16, s.derive(4)).mat.tobytes())
print(h.hexdigest())
"""


def test_determinism_across_processes():
    runs = [subprocess.run([sys.executable, "-c", _DIGEST], capture_output=True, text=True, check=True).stdout for _ in range(2)]
    assert runs[0] == runs[1]
    assert len(runs[0].strip()) == 64
