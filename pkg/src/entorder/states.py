"""Bipartite states: construction, validation, sampling and PPT testing."""

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Tuple

import numpy as np

from . import linalg
from .errors import (
    DimensionMismatch,
    DomainError,
    NotHermitian,
    NotPositive,
    NotUnitTrace,
    StateFileError,
)

TRACE_TOL = 1e-10
NORM_TOL = 1e-10
PPT_TOL = 1e-10
MAX_LOCAL_DIM = 6

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _golden_hash(index: int) -> int:
    return (int(index) * _GOLDEN) & _MASK64


def _splitmix64(z: int) -> int:
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class SeedSpec:
    """Reproducible random stream: ``master_seed`` xor a hash of the index."""

    master_seed: int = 0
    stream_index: int = 0

    def rng(self) -> np.random.Generator:
        mixed = (int(self.master_seed) & _MASK64) ^ _golden_hash(self.stream_index)
        return np.random.Generator(np.random.PCG64(mixed))

    def stream(self, index: int) -> "SeedSpec":
        return SeedSpec(self.master_seed, index)

    def derive(self, *path: int) -> "SeedSpec":
        """Independent child namespace; ``derive(a).stream(i)`` never collides
        with ``derive(b).stream(i)`` for ``a != b``."""
        m = (int(self.master_seed) & _MASK64) ^ _golden_hash(self.stream_index)
        for c in path:
            m = _splitmix64(m ^ _golden_hash(int(c) + 1))
        return SeedSpec(m, 0)


def _dims(dims) -> Tuple[int, int]:
    try:
        dA, dB = (int(d) for d in dims)
    except (TypeError, ValueError) as exc:
        raise DimensionMismatch(f"dims must be a pair of integers, got {dims!r}") from exc
    if not (1 <= dA <= MAX_LOCAL_DIM and 1 <= dB <= MAX_LOCAL_DIM):
        raise DimensionMismatch(f"local dimensions must lie in [1, {MAX_LOCAL_DIM}], got ({dA}, {dB})")
    return dA, dB


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    dims: Tuple[int, int]
    mat: np.ndarray

    @property
    def dim(self) -> int:
        return self.dims[0] * self.dims[1]

    def to_json(self) -> dict:
        return {"dims": list(self.dims), "matrix": linalg.matrix_to_json(self.mat)}


@dataclass(frozen=True, eq=False)
class PureState:
    dims: Tuple[int, int]
    amp: np.ndarray

    def density(self) -> DensityMatrix:
        return DensityMatrix(self.dims, np.outer(self.amp, np.conj(self.amp)))

    def to_json(self) -> dict:
        return {
            "dims": list(self.dims),
            "amp_re": self.amp.real.tolist(),
            "amp_im": self.amp.imag.tolist(),
        }


def validate(mat, dims) -> DensityMatrix:
    """Check a matrix against the density-matrix invariants.

    Eigenvalues in ``(-1e-8, -1e-12)`` are clipped to zero and the result
    renormalized; smaller negative values are round-off inside the null-space
    cutoff and leave the matrix untouched.

    Raises
    ------
    NotHermitian, NotUnitTrace, NotPositive
    """
    dims = _dims(dims)
    mat = linalg.as_matrix(mat)
    if mat.shape != (dims[0] * dims[1],) * 2:
        raise DimensionMismatch(f"matrix shape {mat.shape} does not match dims {dims}")
    err = linalg.hermiticity_error(mat)
    if err > linalg.HERMITIAN_TOL:
        raise NotHermitian(f"Hermitian invariant violated: max |A - A^dagger| = {err:.3e}")
    tr = np.trace(mat).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise NotUnitTrace(f"unit-trace invariant violated: trace = {tr:.12g}")
    w, V = linalg.hermitian_eig(mat)
    if w[-1] < -linalg.NEGATIVE_TOL:
        raise NotPositive(f"positivity invariant violated: minimum eigenvalue {w[-1]:.3e}")
    if w[-1] < -linalg.SUPPORT_CUTOFF:
        w = np.clip(w, 0.0, None)
        w /= w.sum()
        mat = (V * w) @ linalg.dagger(V)
    return DensityMatrix(dims, mat)


def pure_state(amp, dims) -> PureState:
    dims = _dims(dims)
    amp = np.asarray(amp, dtype=complex).ravel()
    if amp.size != dims[0] * dims[1]:
        raise DimensionMismatch(f"amplitude vector has length {amp.size}, expected {dims[0] * dims[1]}")
    norm = np.linalg.norm(amp)
    if abs(norm - 1.0) > NORM_TOL:
        raise DomainError(f"unit-norm invariant violated: norm = {norm:.12g}")
    return PureState(dims, amp)


def as_density(state) -> DensityMatrix:
    return state.density() if isinstance(state, PureState) else state


PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2)
PHI_MINUS = np.array([1, 0, 0, -1], dtype=complex) / math.sqrt(2)
PSI_PLUS = np.array([0, 1, 1, 0], dtype=complex) / math.sqrt(2)
PSI_MINUS = np.array([0, 1, -1, 0], dtype=complex) / math.sqrt(2)
BELL_BASIS = (PHI_PLUS, PHI_MINUS, PSI_PLUS, PSI_MINUS)


def bell_diagonal(l1: float, l2: float, l3: float, l4: float) -> DensityMatrix:
    """Mixture of the Bell states in the order (Phi+, Phi-, Psi+, Psi-)."""
    lam = np.array([l1, l2, l3, l4], dtype=float)
    if np.any(lam < 0) or abs(lam.sum() - 1.0) > 1e-12:
        raise DomainError(f"Bell weights must be a probability vector, got {lam.tolist()}")
    mat = sum(l * np.outer(b, np.conj(b)) for l, b in zip(lam, BELL_BASIS))
    return DensityMatrix((2, 2), mat)


def werner(F: float) -> DensityMatrix:
    """``F |Phi+><Phi+| + (1 - F)/3 (I - |Phi+><Phi+|)``; entangled iff F > 1/2."""
    if not 0.0 <= F <= 1.0:
        raise DomainError(f"Werner fidelity must lie in [0, 1], got {F}")
    r = (1.0 - F) / 3.0
    return bell_diagonal(F, r, r, 1.0 - F - 2.0 * r)


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def haar_pure(dims=(2, 2), seed: SeedSpec = SeedSpec()) -> PureState:
    dims = _dims(dims)
    z = _complex_normal(seed.rng(), dims[0] * dims[1])
    return PureState(dims, z / np.linalg.norm(z))


def ginibre_mixed(dims=(2, 2), k: int = None, seed: SeedSpec = SeedSpec()) -> DensityMatrix:
    """Induced-measure state ``G G^dagger / tr(G G^dagger)`` with ``G`` of shape ``d x k``."""
    dims = _dims(dims)
    d = dims[0] * dims[1]
    k = d if k is None else int(k)
    if not 1 <= k <= d:
        raise DomainError(f"Ginibre rank parameter k must lie in [1, {d}], got {k}")
    G = _complex_normal(seed.rng(), (d, k))
    m = G @ linalg.dagger(G)
    m = 0.5 * (m + linalg.dagger(m))
    return DensityMatrix(dims, m / np.trace(m).real)


def _bloch_qubit(theta, phi) -> np.ndarray:
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])


def random_separable(K: int = 16, seed: SeedSpec = SeedSpec()) -> DensityMatrix:
    """Dirichlet-weighted mixture of ``K`` Haar-random product qubit states."""
    if K < 1:
        raise DomainError(f"K must be at least 1, got {K}")
    rng = seed.rng()
    p = rng.dirichlet(np.ones(K))
    mat = np.zeros((4, 4), dtype=complex)
    for k in range(K):
        a = _complex_normal(rng, 2)
        b = _complex_normal(rng, 2)
        v = np.kron(a / np.linalg.norm(a), b / np.linalg.norm(b))
        mat += p[k] * np.outer(v, np.conj(v))
    mat = 0.5 * (mat + linalg.dagger(mat))
    return DensityMatrix((2, 2), mat / np.trace(mat).real)


def pure_with_schmidt(p: float) -> PureState:
    """``sqrt(p)|00> + sqrt(1-p)|11>``, whose entanglement is ``h(p)``."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"Schmidt weight must lie in [0, 1], got {p}")
    return PureState((2, 2), np.array([math.sqrt(p), 0, 0, math.sqrt(1.0 - p)], dtype=complex))


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"probability must lie in [0, 1], got {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def invert_binary_entropy(E: float) -> float:
    """The root ``p in [0, 1/2]`` of ``h(p) = E``, by bisection."""
    if not 0.0 <= E <= 1.0:
        raise DomainError(f"entropy must lie in [0, 1], got {E}")
    if E == 0.0:
        return 0.0
    if E == 1.0:
        # h is flat at its maximum: every p within ~1e-8 of 1/2 rounds to 1
        return 0.5
    lo, hi = 0.0, 0.5
    while True:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if binary_entropy(mid) < E:
            lo = mid
        else:
            hi = mid
    return lo if E - binary_entropy(lo) < binary_entropy(hi) - E else hi


class PPTResult(NamedTuple):
    ppt: bool
    min_eigenvalue: float


def is_ppt(rho) -> PPTResult:
    """Positivity of the partial transpose on B (decides separability for 2x2, 2x3)."""
    rho = as_density(rho)
    w, _ = linalg.hermitian_eig(linalg.partial_transpose(rho.mat, rho.dims, "B"))
    return PPTResult(bool(w[-1] >= -PPT_TOL), float(w[-1]))


# -- state specs and files ---------------------------------------------------


def _parse_kv(body: str) -> dict:
    out = {}
    for item in filter(None, (s.strip() for s in body.split(","))):
        if "=" not in item:
            raise DomainError(f"expected key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _num(text: str, what: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise DomainError(f"{what}: cannot parse {text!r} as a number") from exc


def parse_state_spec(spec: str):
    """Build a state from a compact spec string.

    Supported forms: ``werner:0.75``, ``bell:0.7,0.1,0.1,0.1``,
    ``schmidt:0.25``, ``ginibre:k=4,seed=7[,index=i]``,
    ``separable:K=16,seed=7``, ``haar:seed=7``, ``phi_plus``,
    ``maximally_mixed``.
    """
    name, _, body = spec.strip().partition(":")
    name = name.lower()
    if name == "werner":
        return werner(_num(body, "werner"))
    if name == "bell":
        vals = [_num(v, "bell") for v in body.split(",")]
        if len(vals) != 4:
            raise DomainError(f"bell spec needs 4 weights, got {len(vals)}")
        return bell_diagonal(*vals)
    if name == "schmidt":
        return pure_with_schmidt(_num(body, "schmidt"))
    if name == "phi_plus":
        return PureState((2, 2), PHI_PLUS.copy())
    if name == "maximally_mixed":
        return DensityMatrix((2, 2), np.eye(4, dtype=complex) / 4)
    if name in ("ginibre", "separable", "haar"):
        kv = _parse_kv(body)
        seed = SeedSpec(int(_num(kv.pop("seed", "0"), name)), int(_num(kv.pop("index", "0"), name)))
        if name == "ginibre":
            k = int(_num(kv.pop("k", "4"), name))
            out = ginibre_mixed((2, 2), k, seed)
        elif name == "separable":
            out = random_separable(int(_num(kv.pop("K", "16"), name)), seed)
        else:
            out = haar_pure((2, 2), seed)
        if kv:
            raise DomainError(f"unknown {name} parameters: {sorted(kv)}")
        return out
    raise DomainError(f"unknown state family {name!r}")


def state_from_json(obj):
    if not isinstance(obj, dict) or "dims" not in obj:
        raise StateFileError("state JSON must be an object with a 'dims' field")
    dims = obj["dims"]
    if "matrix" in obj:
        try:
            mat = linalg.matrix_from_json(obj["matrix"])
        except ValueError as exc:
            raise StateFileError(str(exc)) from exc
        return validate(mat, dims)
    if "amp_re" in obj:
        try:
            amp = np.asarray(obj["amp_re"], dtype=float) + 1j * np.asarray(
                obj.get("amp_im", np.zeros(len(obj["amp_re"]))), dtype=float
            )
        except (TypeError, ValueError) as exc:
            raise StateFileError(f"malformed amplitudes: {exc}") from exc
        return pure_state(amp, dims)
    raise StateFileError("state JSON needs either 'matrix' or 'amp_re'")


def load_state(path) -> "DensityMatrix | PureState":
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise StateFileError(f"cannot read state file {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StateFileError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return state_from_json(obj)


def save_state(state, path) -> None:
    Path(path).write_text(json.dumps(state.to_json()))
