"""Dense linear algebra on small Hermitian operators.

Matrices are plain ``numpy`` complex arrays. All logarithms and entropies are
base 2, so values come out in ebits.
"""

from typing import NamedTuple

import numpy as np

from .errors import DimensionMismatch, NegativeEigenvalue, NotHermitian

HERMITIAN_TOL = 1e-10
SUPPORT_CUTOFF = 1e-12
NEGATIVE_TOL = 1e-8
OVERLAP_TOL = 1e-9


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray  # real, descending
    eigenvectors: np.ndarray  # columns, orthonormal


def as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(a).T


def kron(a, b) -> np.ndarray:
    """Tensor product ``a ⊗ b``."""
    return np.kron(as_matrix(a), as_matrix(b))


def hermiticity_error(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - dagger(a)))) if a.size else 0.0


def _check_hermitian(a: np.ndarray, tol: float) -> None:
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"matrix is not square: {a.shape}")
    err = hermiticity_error(a)
    if err > tol:
        raise NotHermitian(f"max |A - A^dagger| entry is {err:.3e} > {tol:.0e}")


def jacobi_eigh(a, tol: float = 1e-15, max_sweeps: int = 100) -> EigenDecomposition:
    """Cyclic complex Jacobi eigensolver for a Hermitian matrix.

    Each pivot first rotates away the phase of ``a[p, q]`` and then applies
    the real symmetric Jacobi rotation. Slow in Python but dependency free
    and used to cross-check :func:`hermitian_eig`.
    """
    A = as_matrix(a).copy()
    _check_hermitian(A, HERMITIAN_TOL)
    A = 0.5 * (A + dagger(A))
    n = A.shape[0]
    V = np.eye(n, dtype=complex)
    scale = max(np.linalg.norm(A), 1e-300)
    for _ in range(max_sweeps):
        # summed directly: total minus diagonal cancels to sqrt(eps) noise
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                b = abs(A[p, q])
                if b < 1e-300:
                    continue
                phase = A[p, q] / b
                app, aqq = A[p, p].real, A[q, q].real
                zeta = (aqq - app) / (2.0 * b)
                t = (1.0 if zeta >= 0 else -1.0) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                # G acts on (p, q): columns (c, -s conj(phase)), (s, c conj(phase))
                G = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]])
                cols = A[:, [p, q]] @ G
                A[:, p], A[:, q] = cols[:, 0], cols[:, 1]
                rows = dagger(G) @ A[[p, q], :]
                A[p, :], A[q, :] = rows[0], rows[1]
                A[p, q] = A[q, p] = 0.0
                vc = V[:, [p, q]] @ G
                V[:, p], V[:, q] = vc[:, 0], vc[:, 1]
    w = np.real(np.diag(A))
    order = np.argsort(w)[::-1]
    return EigenDecomposition(w[order], V[:, order])


def hermitian_eig(a, method: str = "lapack") -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Parameters
    ----------
    a : array_like
        Square matrix, Hermitian within ``1e-10`` per entry.
    method : {"lapack", "jacobi"}
        ``"lapack"`` calls ``numpy.linalg.eigh``; ``"jacobi"`` uses
        :func:`jacobi_eigh`.

    Raises
    ------
    NotHermitian
        If any entry of ``a - a^dagger`` exceeds the tolerance.
    """
    A = as_matrix(a)
    if method == "jacobi":
        return jacobi_eigh(A)
    if method != "lapack":
        raise ValueError(f"unknown eigensolver {method!r}")
    _check_hermitian(A, HERMITIAN_TOL)
    w, V = np.linalg.eigh(0.5 * (A + dagger(A)))
    return EigenDecomposition(w[::-1].copy(), V[:, ::-1].copy())


def _side_index(side) -> int:
    if side in ("A", 0):
        return 0
    if side in ("B", 1):
        return 1
    raise ValueError(f"subsystem must be 'A' or 'B', got {side!r}")


def _check_bipartite(rho: np.ndarray, dims) -> tuple:
    dA, dB = (int(d) for d in dims)
    if rho.shape != (dA * dB, dA * dB):
        raise DimensionMismatch(f"matrix shape {rho.shape} does not match dims ({dA}, {dB})")
    return dA, dB


def partial_trace(rho, dims, keep="A") -> np.ndarray:
    """Reduced operator on the ``keep`` subsystem of a ``dA x dB`` system."""
    rho = as_matrix(rho)
    dA, dB = _check_bipartite(rho, dims)
    t = rho.reshape(dA, dB, dA, dB)
    if _side_index(keep) == 0:
        return np.einsum("ijkj->ik", t)
    return np.einsum("ijil->jl", t)


def partial_transpose(rho, dims, side="B") -> np.ndarray:
    """Transpose on one tensor factor; an exact involution."""
    rho = as_matrix(rho)
    dA, dB = _check_bipartite(rho, dims)
    t = rho.reshape(dA, dB, dA, dB)
    if _side_index(side) == 0:
        t = t.transpose(2, 1, 0, 3)
    else:
        t = t.transpose(0, 3, 2, 1)
    return t.reshape(dA * dB, dA * dB)


def _spectrum_psd(a, cutoff: float) -> EigenDecomposition:
    w, V = hermitian_eig(a)
    if w[-1] < -NEGATIVE_TOL:
        raise NegativeEigenvalue(f"eigenvalue {w[-1]:.3e} < -{NEGATIVE_TOL:.0e}")
    return EigenDecomposition(np.where(w > cutoff, w, 0.0), V)


def matrix_log_psd(a, cutoff: float = SUPPORT_CUTOFF):
    """Base-2 logarithm of a PSD operator on its support.

    Eigenvalues at or below ``cutoff`` are treated as null space; the log is
    zero there.

    Returns
    -------
    log_a : ndarray
    null : ndarray of bool
        Null-space flags aligned with the descending eigenvalues.
    """
    w, V = _spectrum_psd(a, cutoff)
    null = w <= cutoff
    logs = np.zeros_like(w)
    logs[~null] = np.log2(w[~null])
    return (V * logs) @ dagger(V), null


def matrix_exp2_hermitian(a) -> np.ndarray:
    w, V = hermitian_eig(a)
    return (V * np.exp2(w)) @ dagger(V)


def entropy_of_spectrum(p) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > SUPPORT_CUTOFF]
    return float(-np.sum(p * np.log2(p))) if p.size else 0.0


def von_neumann_entropy(rho) -> float:
    """``S(rho) = -tr rho log2 rho`` in ebits."""
    w, _ = _spectrum_psd(rho, SUPPORT_CUTOFF)
    return max(entropy_of_spectrum(w), 0.0)


def quantum_relative_entropy(rho, sigma) -> float:
    """``S(rho || sigma) = tr rho log2 rho - tr rho log2 sigma``.

    Returns ``inf`` when the support of ``rho`` is not contained in that of
    ``sigma``: some null direction of ``sigma`` carries ``rho`` weight above
    ``1e-9``.
    """
    rho = as_matrix(rho)
    sigma = as_matrix(sigma)
    if rho.shape != sigma.shape:
        raise DimensionMismatch(f"shapes differ: {rho.shape} vs {sigma.shape}")
    wr, _ = _spectrum_psd(rho, SUPPORT_CUTOFF)
    ws, Vs = _spectrum_psd(sigma, SUPPORT_CUTOFF)
    weights = np.real(np.einsum("ij,ik,kj->j", np.conj(Vs), rho, Vs))
    null = ws <= SUPPORT_CUTOFF
    if np.any(weights[null] > OVERLAP_TOL):
        return float("inf")
    cross = float(np.sum(weights[~null] * np.log2(ws[~null])))
    return max(-entropy_of_spectrum(wr) - cross, 0.0)


def matrix_to_json(a) -> dict:
    a = as_matrix(a)
    return {
        "rows": a.shape[0],
        "cols": a.shape[1],
        "re": a.real.tolist(),
        "im": a.imag.tolist(),
    }


def matrix_from_json(obj) -> np.ndarray:
    try:
        rows, cols = int(obj["rows"]), int(obj["cols"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros((rows, cols))), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed matrix JSON: {exc}") from exc
    if re.shape != (rows, cols) or im.shape != (rows, cols):
        raise ValueError(f"matrix JSON entries do not match declared shape ({rows}, {cols})")
    return re + 1j * im
