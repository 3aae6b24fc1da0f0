"""Invariant suite behind ``entorder selftest``.

Each check runs at a reduced sample count by default and at the full count
with ``strict=True``. A failing check prints its invariant verbatim.
"""

import sys
import time
from typing import Callable, List, NamedTuple

import numpy as np

from . import linalg, measures as M, ordering as O, states as S
from .measures import MeasureId, OptimizerConfig

EF, ER, ES = MeasureId.FormationClosedForm, MeasureId.RelativeEntropyPPT, MeasureId.FormationSearch


class Check(NamedTuple):
    name: str
    invariant: str
    run: Callable[[bool], None]


CHECKS: List[Check] = []


def check(name: str, invariant: str):
    def wrap(fn):
        CHECKS.append(Check(name, invariant, fn))
        return fn

    return wrap


def _n(strict: bool, full: int, reduced: int) -> int:
    return full if strict else reduced


def _rng(tag: int) -> np.random.Generator:
    return S.SeedSpec(20261016, tag).rng()


def random_hermitian(rng, d=4) -> np.ndarray:
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return 0.5 * (z + z.conj().T)


def random_unitary(rng, d=2) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def ginibre(i: int, k: int = 4) -> S.DensityMatrix:
    return S.ginibre_mixed((2, 2), k, S.SeedSpec(77, i))


# -- linalg ------------------------------------------------------------------


@check("eig_residual", "||A - V diag(w) V^dagger||_F < 1e-10 ||A||_F and ||V^dagger V - I|| < 1e-10 for random Hermitian 4x4")
def _eig(strict):
    rng = _rng(1)
    for i in range(_n(strict, 1000, 100)):
        A = random_hermitian(rng)
        for method in ("lapack",) if i % 50 else ("lapack", "jacobi"):
            w, V = linalg.hermitian_eig(A, method)
            assert np.all(np.diff(w) <= 0)
            assert np.linalg.norm(A - (V * w) @ V.conj().T) < 1e-10 * np.linalg.norm(A)
            assert np.max(np.abs(V.conj().T @ V - np.eye(4))) < 1e-10


@check("partial_transpose", "partial transpose is a linear, trace-preserving, Hermiticity-preserving involution")
def _pt(strict):
    rng = _rng(2)
    for _ in range(_n(strict, 200, 20)):
        a, b = random_hermitian(rng), random_hermitian(rng)
        c = rng.standard_normal()
        pt = lambda x: linalg.partial_transpose(x, (2, 2), "B")
        assert np.allclose(pt(a + c * b), pt(a) + c * pt(b), atol=1e-12)
        assert abs(np.trace(pt(a)) - np.trace(a)) < 1e-12
        assert linalg.hermiticity_error(pt(a)) < 1e-12
        assert np.array_equal(pt(pt(a)), a)


@check("partial_trace_product", "partial_trace(kron(rho_A, rho_B), keep=A) = rho_A within 1e-12")
def _ptr(strict):
    for i in range(_n(strict, 200, 20)):
        ra = S.ginibre_mixed((1, 2), None, S.SeedSpec(3, 2 * i)).mat
        rb = S.ginibre_mixed((1, 2), None, S.SeedSpec(3, 2 * i + 1)).mat
        assert np.max(np.abs(linalg.partial_trace(np.kron(ra, rb), (2, 2), "A") - ra)) < 1e-12
        assert np.max(np.abs(linalg.partial_trace(np.kron(ra, rb), (2, 2), "B") - rb)) < 1e-12


@check("klein", "S(rho||sigma) >= 0 with value < 1e-9 iff ||rho - sigma||_F < 1e-6 on random full-rank pairs")
def _klein(strict):
    for i in range(_n(strict, 1000, 100)):
        r, s = ginibre(2 * i).mat, ginibre(2 * i + 1).mat
        d = linalg.quantum_relative_entropy(r, s)
        assert d >= 0
        assert (d < 1e-9) == (np.linalg.norm(r - s) < 1e-6)
        assert linalg.quantum_relative_entropy(r, r) < 1e-9


@check("entropy_unitary_invariance", "S(U rho U^dagger) = S(rho) within 1e-10 for random unitaries")
def _svn_u(strict):
    rng = _rng(5)
    for i in range(_n(strict, 200, 20)):
        r = ginibre(i, k=1 + i % 4).mat
        U = random_unitary(rng, 4)
        assert abs(linalg.von_neumann_entropy(U @ r @ U.conj().T) - linalg.von_neumann_entropy(r)) < 1e-10


# -- states ------------------------------------------------------------------


@check("sampler_validity", "every sampler output passes validate with zero clipping")
def _samplers(strict):
    for i in range(_n(strict, 10_000, 500)):
        seed = S.SeedSpec(6, i)
        for st in (S.ginibre_mixed((2, 2), 1 + i % 4, seed), S.random_separable(1 + i % 16, seed), S.haar_pure((2, 2), seed).density()):
            assert np.array_equal(S.validate(st.mat, st.dims).mat, st.mat)


@check("werner_threshold", "werner(F) is entangled (is_ppt false) iff F > 1/2 + 1e-9 on a 101-point grid")
def _werner(strict):
    for F in np.linspace(0, 1, 101):
        assert S.is_ppt(S.werner(F)).ppt == (not F > 0.5 + 1e-9)


@check("schmidt_entropy", "entanglement of pure_with_schmidt(p) equals binary_entropy(p) within 1e-10")
def _schmidt(strict):
    for p in np.linspace(0, 1, _n(strict, 1001, 101)):
        assert abs(M.entropy_of_entanglement(S.pure_with_schmidt(p)).value - S.binary_entropy(p)) < 1e-10


@check("seed_determinism", "identical SeedSpec gives bit-identical states")
def _det(strict):
    for i in range(_n(strict, 100, 10)):
        s = S.SeedSpec(123, i)
        assert np.array_equal(S.ginibre_mixed((2, 2), 4, s).mat, S.ginibre_mixed((2, 2), 4, s).mat)
        assert np.array_equal(S.haar_pure((2, 2), s).amp, S.haar_pure((2, 2), s).amp)
        assert np.array_equal(S.random_separable(16, s).mat, S.random_separable(16, s).mat)


@check("local_unitary_orbit", "validate((U⊗V) rho (U⊗V)^dagger) succeeds and the spectrum is preserved within 1e-10")
def _lu_states(strict):
    rng = _rng(7)
    for i in range(_n(strict, 200, 20)):
        r = ginibre(i)
        W = np.kron(random_unitary(rng), random_unitary(rng))
        out = S.validate(W @ r.mat @ W.conj().T, (2, 2))
        w1 = linalg.hermitian_eig(out.mat).eigenvalues
        w0 = linalg.hermitian_eig(r.mat).eigenvalues
        assert np.max(np.abs(w1 - w0)) < 1e-10


# -- measures ----------------------------------------------------------------


@check("pure_coincidence", "on Haar-random pure states |E_F - S(rho_A)| < 1e-9 and |E_R - S(rho_A)| < 5e-3")
def _pure(strict):
    for i in range(_n(strict, 100, 8)):
        psi = S.haar_pure((2, 2), S.SeedSpec(8, i))
        e = M.entropy_of_entanglement(psi).value
        assert abs(M.eof_closed_form(psi).value - e) < 1e-9
        cfg = OptimizerConfig(seed=S.SeedSpec(8, i))
        assert abs(M.relative_entropy_entanglement(psi, cfg)[0].value - e) < 5e-3


@check("local_unitary_invariance", "concurrence and E_F change < 1e-9 and E_R < 5e-3 under local unitaries")
def _lu(strict):
    rng = _rng(9)
    for i in range(_n(strict, 20, 3)):
        r = ginibre(100 + i)
        W = np.kron(random_unitary(rng), random_unitary(rng))
        r2 = S.validate(W @ r.mat @ W.conj().T, (2, 2))
        assert abs(M.concurrence(r) - M.concurrence(r2)) < 1e-9
        assert abs(M.eof_closed_form(r).value - M.eof_closed_form(r2).value) < 1e-9
        cfg = OptimizerConfig(seed=S.SeedSpec(9, i))
        assert abs(M.evaluate(ER, r, cfg).value - M.evaluate(ER, r2, cfg).value) < 5e-3


@check("interleaving", "E_R <= E_F + 5e-3 on every sampled state")
def _interleave(strict):
    for i in range(_n(strict, 200, 20)):
        r = ginibre(200 + i)
        cfg = OptimizerConfig(seed=S.SeedSpec(10, i))
        assert M.evaluate(ER, r, cfg).value <= M.eof_closed_form(r).value + 5e-3


@check("eof_oracle_agreement", "eof_decomposition_search - eof_closed_form lies in [-1e-9, 1e-3]")
def _eof_oracle(strict):
    for i in range(_n(strict, 200, 20)):
        r = ginibre(400 + i)
        cfg = OptimizerConfig(seed=S.SeedSpec(11, i))
        d = M.eof_decomposition_search(r, cfg)[0].value - M.eof_closed_form(r).value
        assert -1e-9 <= d <= 1e-3, d


@check("zero_on_separable", "on random separable states E_F search and E_R are < 5e-3 and concurrence is exactly 0")
def _sep(strict):
    for i in range(_n(strict, 200, 10)):
        r = S.random_separable(16, S.SeedSpec(12, i))
        cfg = OptimizerConfig(seed=S.SeedSpec(12, i))
        assert M.concurrence(r) == 0.0
        assert M.evaluate(ES, r, cfg).value < 5e-3
        assert M.evaluate(ER, r, cfg).value < 5e-3


@check("restart_monotone", "doubling restarts never increases E_R by more than 1e-9")
def _restarts(strict):
    for i in range(_n(strict, 10, 2)):
        r = ginibre(600 + i)
        cfg = OptimizerConfig(restarts=4, seed=S.SeedSpec(13, i))
        a = M.evaluate(ER, r, cfg).value
        b = M.evaluate(ER, r, OptimizerConfig(restarts=8, seed=S.SeedSpec(13, i))).value
        assert b <= a + 1e-9


@check("gradient_check", "analytic E_R gradient agrees with central differences (step 1e-5) to 1e-4 relative")
def _grad(strict):
    rng = _rng(14)
    for i in range(_n(strict, 50, 5)):
        r = ginibre(700 + i)
        x = rng.normal(size=80)
        f, g = M.rel_ent_objective(r, x, 16, 1e-3)
        num = np.array([
            (M.rel_ent_objective(r, x + 1e-5 * e, 16, 1e-3)[0] - M.rel_ent_objective(r, x - 1e-5 * e, 16, 1e-3)[0]) / 2e-5
            for e in np.eye(80)
        ])
        assert np.linalg.norm(num - g) <= 1e-4 * np.linalg.norm(g)


# -- ordering ----------------------------------------------------------------


def _fresh_witness_ok(w, id1, id2, delta, seed):
    cfg = OptimizerConfig(seed=S.SeedSpec(seed))
    a = (M.evaluate(id1, w.state_a, cfg).value, M.evaluate(id2, w.state_a, cfg).value)
    b = (M.evaluate(id1, w.state_b, cfg).value, M.evaluate(id2, w.state_b, cfg).value)
    return b[0] - a[0] > delta and a[1] - b[1] > delta


@check("witness_soundness", "every ViolationWitness keeps its margins when both measures are re-evaluated from scratch")
def _soundness(strict):
    w = O.witness_from_gap(S.werner(0.75), EF, ER, OptimizerConfig(), 0.01)
    assert w is not None and w.holds(0.01)
    assert _fresh_witness_ok(w, EF, ER, 0.01, 991)


@check("sandwich_chain", "E_F(phi) >= E_F(rho) >= E_F(psi) for eps = 0.01, and a witness exists whenever |E_F - E_R| > 2 eps + 5e-3")
def _sandwich(strict):
    count, i = 0, 0
    target = _n(strict, 50, 4)
    while count < target:
        r = ginibre(800 + i)
        i += 1
        ef = M.eof_closed_form(r).value
        if not 0.05 < ef < 0.95:
            continue
        count += 1
        phi, psi = O.sandwich_construct(r, 0.01)
        assert M.eof_closed_form(phi).value >= ef >= M.eof_closed_form(psi).value
        cfg = OptimizerConfig(seed=S.SeedSpec(15, i))
        er = M.evaluate(ER, r, cfg).value
        if abs(ef - er) > 2 * 0.01 + 5e-3:
            w = O.witness_from_gap(r, EF, ER, cfg, 0.01, known=(ef, er))
            assert w is not None and w.holds(0.01)


@check("same_order_symmetry", "swapping the measures maps violations to violations with margins swapped")
def _sym(strict):
    rng = _rng(16)
    for _ in range(_n(strict, 50, 10)):
        e1, e2 = rng.uniform(size=30), rng.uniform(size=30)
        a = O.same_order(e1, e2, 1e-3)
        b = O.same_order(e2, e1, 1e-3)
        ma = sorted((round(w.margins[0], 12), round(w.margins[1], 12)) for w in a.violations)
        mb = sorted((round(w.margins[1], 12), round(w.margins[0], 12)) for w in b.violations)
        assert ma == mb and a.ties == b.ties and a.agreements == b.agreements
        assert a.compared == len(e1) * (len(e1) - 1) // 2


@check("search_determinism", "random_search with identical seeds yields identical reports")
def _search_det(strict):
    import json

    n = _n(strict, 12, 4)
    cfg = OptimizerConfig(restarts=2)
    a = O.random_search(n, "ginibre:k=4", EF, ER, cfg, seed=5, threads=1)
    b = O.random_search(n, "ginibre:k=4", EF, ER, cfg, seed=5, threads=1)
    assert json.dumps(a.to_json()) == json.dumps(b.to_json())


@check("not_same_order", "E_F and E_R are not identical (gap at werner(0.75) > 10x tolerance) and a verified witness exists")
def _not_same_order(strict):
    rho = S.werner(0.75)
    gap = M.eof_closed_form(rho).value - M.evaluate(ER, rho).value
    assert gap > 10 * (EF.tolerance + ER.tolerance)
    w = O.witness_from_gap(rho, EF, ER, OptimizerConfig(), O.DEFAULT_DELTA)
    assert w is not None and _fresh_witness_ok(w, EF, ER, O.DEFAULT_DELTA, 992)


def run(strict: bool = False, out=None) -> int:
    out = out or sys.stdout
    failures = 0
    t0 = time.time()
    for c in CHECKS:
        t = time.time()
        try:
            c.run(strict)
        except Exception as exc:  # a check failing in any way is a failure
            failures += 1
            detail = f" ({type(exc).__name__}: {exc})" if str(exc) else f" ({type(exc).__name__})"
            print(f"FAIL {c.name}: {c.invariant}{detail}", file=out)
        else:
            print(f"PASS {c.name} [{time.time() - t:.1f}s]", file=out)
    print(f"{len(CHECKS) - failures}/{len(CHECKS)} checks passed in {time.time() - t0:.1f}s", file=out)
    return 1 if failures else 0
