"""Compiled inner loops for the two optimizers in :mod:`entorder.measures`.

Everything here works on plain arrays so numba can compile it with
``nogil=True``; the public wrappers in ``measures`` own validation, seeding
and result packaging.

Parameter layouts
-----------------
Separable ansatz (``K`` product terms), length ``5 * K``::

    x[:K]                weight logits (softmax)
    x[K + 4*k + 0..3]    theta_A, phi_A, theta_B, phi_B of term k

Decomposition unitary, length ``m * m``: the Hermitian generator ``H`` with
``x[:m]`` on the diagonal followed by (re, im) pairs of the strict upper
triangle in row-major order.
"""

import numpy as np
from numba import njit

LN2 = np.log(2.0)


@njit(cache=True, nogil=True)
def _divided_log2(lam):
    # Daleckii-Krein kernel of log2 at the eigenvalues lam.
    n = lam.shape[0]
    out = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            d = lam[i] - lam[j]
            if abs(d) > 1e-13 * max(lam[i], lam[j]):
                out[i, j] = (np.log2(lam[i]) - np.log2(lam[j])) / d
            else:
                out[i, j] = 1.0 / (0.5 * (lam[i] + lam[j]) * LN2)
    return out


@njit(cache=True, nogil=True)
def _local_states(x, K):
    a = np.empty((K, 2), np.complex128)
    b = np.empty((K, 2), np.complex128)
    # derivative of each local vector w.r.t. (theta, phi)
    da = np.empty((K, 2, 2), np.complex128)
    db = np.empty((K, 2, 2), np.complex128)
    for k in range(K):
        t1 = x[K + 4 * k]
        f1 = x[K + 4 * k + 1]
        t2 = x[K + 4 * k + 2]
        f2 = x[K + 4 * k + 3]
        c1, s1, e1 = np.cos(0.5 * t1), np.sin(0.5 * t1), np.exp(1j * f1)
        c2, s2, e2 = np.cos(0.5 * t2), np.sin(0.5 * t2), np.exp(1j * f2)
        a[k, 0] = c1
        a[k, 1] = e1 * s1
        b[k, 0] = c2
        b[k, 1] = e2 * s2
        da[k, 0, 0] = -0.5 * s1
        da[k, 0, 1] = 0.5 * e1 * c1
        da[k, 1, 0] = 0.0
        da[k, 1, 1] = 1j * e1 * s1
        db[k, 0, 0] = -0.5 * s2
        db[k, 0, 1] = 0.5 * e2 * c2
        db[k, 1, 0] = 0.0
        db[k, 1, 1] = 1j * e2 * s2
    return a, b, da, db


@njit(cache=True, nogil=True)
def softmax(w):
    p = np.exp(w - w.max())
    return p / p.sum()


@njit(cache=True, nogil=True)
def ansatz_sigma(x, K, tau):
    """Separable state induced by ``x``, mixed with ``tau * I/4``."""
    p = softmax(x[:K])
    a, b, _, _ = _local_states(x, K)
    sig = np.zeros((4, 4), np.complex128)
    for k in range(K):
        v = np.empty(4, np.complex128)
        for i in range(2):
            for j in range(2):
                v[2 * i + j] = a[k, i] * b[k, j]
        for i in range(4):
            for j in range(4):
                sig[i, j] += p[k] * v[i] * np.conj(v[j])
    for i in range(4):
        for j in range(4):
            sig[i, j] *= 1.0 - tau
        sig[i, i] += 0.25 * tau
    return sig


@njit(cache=True, nogil=True)
def rel_ent_objective(x, data):
    """S(rho || sigma(x)) in bits and its gradient.

    ``data = (rho, K, tau, rho_log_rho)`` where ``rho_log_rho = tr rho log2 rho``.
    """
    rho, K, tau, slr = data
    p = softmax(x[:K])
    a, b, da, db = _local_states(x, K)
    v = np.empty((K, 4), np.complex128)
    for k in range(K):
        for i in range(2):
            for j in range(2):
                v[k, 2 * i + j] = a[k, i] * b[k, j]
    sig = np.zeros((4, 4), np.complex128)
    for k in range(K):
        for i in range(4):
            for j in range(4):
                sig[i, j] += p[k] * v[k, i] * np.conj(v[k, j])
    for i in range(4):
        for j in range(4):
            sig[i, j] *= 1.0 - tau
        sig[i, i] += 0.25 * tau

    lam, U = np.linalg.eigh(sig)
    if lam[0] <= 0.0:
        return np.inf, np.zeros(x.shape[0])
    R = U.conj().T @ rho @ U
    f = slr
    for i in range(4):
        f -= R[i, i].real * np.log2(lam[i])

    gam = _divided_log2(lam)
    M = np.empty((4, 4), np.complex128)
    for i in range(4):
        for j in range(4):
            M[i, j] = gam[i, j] * R[i, j]
    # d f / d sigma_raw, Hermitian
    G = -(1.0 - tau) * (U @ M @ U.conj().T)

    g = np.empty(5 * K)
    gk = np.empty(K)
    for k in range(K):
        Gv = G @ v[k]
        s = 0.0
        for i in range(4):
            s += (np.conj(v[k, i]) * Gv[i]).real
        gk[k] = s
        for j in range(2):
            sa = 0.0
            sb = 0.0
            for i1 in range(2):
                for i2 in range(2):
                    c = np.conj(Gv[2 * i1 + i2])
                    sa += (c * da[k, j, i1] * b[k, i2]).real
                    sb += (c * a[k, i1] * db[k, j, i2]).real
            g[K + 4 * k + j] = 2.0 * p[k] * sa
            g[K + 4 * k + 2 + j] = 2.0 * p[k] * sb
    mean = 0.0
    for k in range(K):
        mean += p[k] * gk[k]
    for k in range(K):
        g[k] = p[k] * (gk[k] - mean)
    return f, g


@njit(cache=True, nogil=True)
def generator_from_params(x, m):
    H = np.zeros((m, m), np.complex128)
    for i in range(m):
        H[i, i] = x[i]
    idx = m
    for i in range(m):
        for j in range(i + 1, m):
            H[i, j] = x[idx] + 1j * x[idx + 1]
            H[j, i] = x[idx] - 1j * x[idx + 1]
            idx += 2
    return H


@njit(cache=True, nogil=True)
def unitary_from_params(x, m):
    mu, V = np.linalg.eigh(generator_from_params(x, m))
    D = np.diag(np.exp(1j * mu))
    return V @ D @ V.conj().T


@njit(cache=True, nogil=True)
def ensemble_from_unitary(U, W):
    """Rows ``phi_j = sum_i conj(U[j, i]) w_i`` for the columns ``w_i`` of ``W``."""
    m = U.shape[0]
    r = W.shape[1]
    phis = np.zeros((m, W.shape[0]), np.complex128)
    for j in range(m):
        for i in range(r):
            phis[j] += np.conj(U[j, i]) * W[:, i]
    return phis


@njit(cache=True, nogil=True)
def _reduced_a(phi):
    # tr_B |phi><phi| for a 2x2 vector, unnormalized
    r = np.empty((2, 2), np.complex128)
    for i in range(2):
        for j in range(2):
            r[i, j] = phi[2 * i] * np.conj(phi[2 * j]) + phi[2 * i + 1] * np.conj(phi[2 * j + 1])
    return r


@njit(cache=True, nogil=True)
def decomposition_objective(x, data):
    """Average pure-state entanglement of the ensemble generated by ``x``.

    ``data = (W, m)`` with ``W`` the 4 x rank matrix of sub-normalized
    eigenvectors. Returns the value in bits and its gradient in ``x``.
    """
    W, m = data
    H = generator_from_params(x, m)
    mu, V = np.linalg.eigh(H)
    E = np.exp(1j * mu)
    U = V @ np.diag(E) @ V.conj().T
    phis = ensemble_from_unitary(U, W)
    r = W.shape[1]

    f = 0.0
    C = np.zeros((m, m), np.complex128)
    for j in range(m):
        red = _reduced_a(phis[j])
        pj = (red[0, 0] + red[1, 1]).real
        if pj <= 1e-300:
            continue
        lam, Q = np.linalg.eigh(red)
        for i in range(2):
            if lam[i] > 0.0:
                f -= lam[i] * np.log2(lam[i] / pj)
        # derivative of  -tr r log2 r + tr r log2 tr r  w.r.t. r
        D = np.zeros((2, 2), np.complex128)
        for i in range(2):
            li = max(lam[i], 1e-300)
            coef = np.log2(pj) - np.log2(li)
            for s in range(2):
                for t in range(2):
                    D[s, t] += coef * Q[s, i] * np.conj(Q[t, i])
        y = np.empty(4, np.complex128)
        for s in range(2):
            for b in range(2):
                y[2 * s + b] = D[s, 0] * phis[j, b] + D[s, 1] * phis[j, 2 + b]
        for i in range(r):
            acc = 0.0 + 0.0j
            for q in range(4):
                acc += np.conj(y[q]) * W[q, i]
            C[j, i] = acc

    # Frechet derivative of exp(iH): df = 2 Re tr(dH B)
    F = np.empty((m, m), np.complex128)
    for k in range(m):
        for l in range(m):
            d = mu[k] - mu[l]
            if abs(d) > 1e-12:
                F[k, l] = (E[k] - E[l]) / d
            else:
                F[k, l] = 1j * E[k]
    T = V.conj().T @ C @ V
    for k in range(m):
        for l in range(m):
            T[k, l] *= np.conj(F[k, l])
    B = V @ T @ V.conj().T
    g = np.empty(m * m)
    for i in range(m):
        g[i] = 2.0 * B[i, i].real
    idx = m
    for i in range(m):
        for j in range(i + 1, m):
            g[idx] = 2.0 * (B[j, i] + B[i, j]).real
            g[idx + 1] = 2.0 * (1j * B[j, i] - 1j * B[i, j]).real
            idx += 2
    return f, g


REL_ENT = 0
DECOMPOSITION = 1


@njit(cache=True, nogil=True)
def _objective(kind, x, data):
    mat, size, tau, slr = data
    if kind == REL_ENT:
        return rel_ent_objective(x, (mat, size, tau, slr))
    return decomposition_objective(x, (mat, size))


@njit(cache=True, nogil=True)
def lbfgs(kind, x0, data, max_iter, gtol, ftol, step0, memory):
    """Limited-memory BFGS with step halving on non-improvement.

    ``kind`` selects the objective (:data:`REL_ENT` or :data:`DECOMPOSITION`);
    ``data = (matrix, size, tau, rho_log_rho)`` is shared by both, which is
    what lets numba cache a single compiled loop. Returns
    ``(x, f, grad_inf_norm, iterations, converged)``.
    """
    n = x0.shape[0]
    x = x0.copy()
    f, g = _objective(kind, x, data)
    S = np.zeros((memory, n))
    Y = np.zeros((memory, n))
    rhos = np.zeros(memory)
    stored = 0
    head = 0
    converged = False
    it = 0
    alpha = np.zeros(memory)
    while it < max_iter:
        gnorm = np.max(np.abs(g))
        if gnorm < gtol:
            converged = True
            break
        # two-loop recursion
        q = -g.copy()
        for c in range(stored):
            k = (head - 1 - c) % memory
            alpha[k] = rhos[k] * np.dot(S[k], q)
            q -= alpha[k] * Y[k]
        if stored > 0:
            k = (head - 1) % memory
            q *= np.dot(S[k], Y[k]) / np.dot(Y[k], Y[k])
        else:
            q *= step0 / max(1.0, np.sqrt(np.dot(g, g)))
        for c in range(stored):
            k = (head - stored + c) % memory
            beta = rhos[k] * np.dot(Y[k], q)
            q += (alpha[k] - beta) * S[k]
        slope = np.dot(g, q)
        if not slope < 0.0:
            q = -g * (step0 / max(1.0, np.sqrt(np.dot(g, g))))
            slope = np.dot(g, q)
            stored = 0
        t = 1.0
        accepted = False
        for _ in range(60):
            xn = x + t * q
            fn, gn = _objective(kind, xn, data)
            if np.isfinite(fn) and fn <= f + 1e-4 * t * slope:
                accepted = True
                break
            t *= 0.5
        it += 1
        if not accepted:
            # no descent at machine resolution: stationary for practical purposes
            converged = gnorm < 1e3 * gtol
            break
        s = xn - x
        y = gn - g
        sy = np.dot(s, y)
        if sy > 1e-12 * np.sqrt(np.dot(s, s) * np.dot(y, y)):
            S[head] = s
            Y[head] = y
            rhos[head] = 1.0 / sy
            head = (head + 1) % memory
            stored = min(stored + 1, memory)
        decrease = f - fn
        x = xn
        g = gn
        fold = f
        f = fn
        if decrease <= ftol * max(1.0, abs(fold), abs(fn)):
            converged = True
            break
    return x, f, np.max(np.abs(g)), it, converged
