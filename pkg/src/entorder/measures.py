"""Entanglement measures on bipartite states, in ebits.

Two-qubit entanglement of formation has a closed form via the concurrence;
:func:`eof_decomposition_search` minimizes the defining ensemble average
directly and serves as an independent check on it. The relative entropy of
entanglement is minimized over mixtures of product states (for two qubits the
separable and PPT sets coincide).
"""

import dataclasses
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Tuple

import numpy as np

from . import _kernels, linalg
from .errors import ConfigError, DimensionMismatch, IncompatibleMeasure
from .states import DensityMatrix, PureState, SeedSpec, as_density, binary_entropy

EXACT = "exact"
UPPER_BOUND = "upper_bound"

EXACT_TOL = 1e-9
OPTIMIZER_TOL = 5e-3

# barrier weight tau for sigma <- (1 - tau) sigma + tau I/4, one entry per phase
BARRIER_SCHEDULE = (1e-2, 1e-4, 1e-6, 1e-8, 1e-10)

_Y2 = np.array([[0, -1j], [1j, 0]])
_YY = np.kron(_Y2, _Y2)

# seed namespaces, so the two optimizers never share random streams
_NS_EOF = 1
_NS_REL = 2


class MeasureId(Enum):
    EntropyOfEntanglement = "entropy"
    FormationClosedForm = "eof"
    FormationSearch = "eof_search"
    RelativeEntropyPPT = "rel_ent"

    @classmethod
    def parse(cls, text: str) -> "MeasureId":
        for m in cls:
            if text in (m.value, m.name):
                return m
        names = ", ".join(m.value for m in cls)
        raise ConfigError(f"unknown measure {text!r}; choose from {names}")

    @property
    def tolerance(self) -> float:
        """Evaluation slack a comparison must exceed to be trusted."""
        exact = (MeasureId.EntropyOfEntanglement, MeasureId.FormationClosedForm)
        return EXACT_TOL if self in exact else OPTIMIZER_TOL


@dataclass(frozen=True)
class Diagnostics:
    restarts: int = 0
    iterations: int = 0
    best_gradient_norm: float = 0.0
    converged: bool = True


@dataclass(frozen=True)
class MeasureValue:
    value: float
    status: str
    measure: str = ""
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    def to_json(self) -> dict:
        return {
            "measure": self.measure,
            "value": self.value,
            "status": self.status,
            "converged": self.diagnostics.converged,
            "iterations": self.diagnostics.iterations,
            "restarts": self.diagnostics.restarts,
        }


@dataclass(frozen=True, eq=False)
class Ensemble:
    weights: np.ndarray
    members: List[PureState]

    def density(self) -> np.ndarray:
        return sum(p * s.density().mat for p, s in zip(self.weights, self.members))


@dataclass(frozen=True, eq=False)
class SeparableAnsatz:
    """Mixture of product qubit states, optionally blended with ``I/4``.

    ``angles[k] = (theta_A, phi_A, theta_B, phi_B)`` with ``theta`` in
    ``[0, pi]`` and ``phi`` in ``[0, 2 pi)``.
    """

    weights: np.ndarray
    angles: np.ndarray
    mixing: float = 0.0

    def product_vectors(self) -> np.ndarray:
        t1, f1, t2, f2 = self.angles.T
        a = np.stack([np.cos(t1 / 2), np.exp(1j * f1) * np.sin(t1 / 2)], axis=1)
        b = np.stack([np.cos(t2 / 2), np.exp(1j * f2) * np.sin(t2 / 2)], axis=1)
        return (a[:, :, None] * b[:, None, :]).reshape(-1, 4)

    def sigma(self) -> DensityMatrix:
        v = self.product_vectors()
        mat = (v.T * self.weights) @ np.conj(v)
        mat = (1.0 - self.mixing) * mat + self.mixing * np.eye(4) / 4
        mat = 0.5 * (mat + linalg.dagger(mat))
        return DensityMatrix((2, 2), mat / np.trace(mat).real)


@dataclass(frozen=True)
class OptimizerConfig:
    K: int = 16
    restarts: int = 8
    max_iterations: int = 2000
    initial_step: float = 1.0
    gradient_tol: float = 1e-7
    value_tol: float = 1e-9
    ensemble_size: int = 4
    seed: SeedSpec = SeedSpec()

    def __post_init__(self):
        for name in ("K", "restarts", "max_iterations", "ensemble_size"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"OptimizerConfig.{name} must be >= 1")
        if not self.initial_step > 0:
            raise ConfigError("OptimizerConfig.initial_step must be positive")

    def with_seed(self, seed: SeedSpec) -> "OptimizerConfig":
        return dataclasses.replace(self, seed=seed)

    @classmethod
    def from_json(cls, obj: dict) -> "OptimizerConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown optimizer fields: {sorted(unknown)}")
        kw = dict(obj)
        if "seed" in kw:
            s = kw["seed"]
            kw["seed"] = SeedSpec(int(s["master_seed"]), int(s.get("stream_index", 0))) if isinstance(s, dict) else SeedSpec(int(s))
        try:
            return cls(**kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad optimizer config: {exc}") from exc

    def to_json(self) -> dict:
        out = dataclasses.asdict(self)
        out["seed"] = dataclasses.asdict(self.seed)
        return out


def _require_qubits(rho: DensityMatrix) -> None:
    if tuple(rho.dims) != (2, 2):
        raise DimensionMismatch(f"two-qubit state required, got dims {tuple(rho.dims)}")


def _clamp(value: float, dims) -> float:
    # 0 <= E <= log2 min(dA, dB) holds for every measure here
    return min(max(value, 0.0), math.log2(min(dims)))


def entropy_of_entanglement(psi: PureState) -> MeasureValue:
    """Von Neumann entropy of the reduced state of a pure state."""
    rho = np.outer(psi.amp, np.conj(psi.amp))
    value = linalg.von_neumann_entropy(linalg.partial_trace(rho, psi.dims, keep="A"))
    return MeasureValue(_clamp(value, psi.dims), EXACT, MeasureId.EntropyOfEntanglement.value)


def _subnormalized_eigenvectors(rho: DensityMatrix) -> np.ndarray:
    w, V = linalg.hermitian_eig(rho.mat)
    keep = w > linalg.SUPPORT_CUTOFF
    return V[:, keep] * np.sqrt(w[keep])


def concurrence(rho) -> float:
    """Two-qubit concurrence ``max(0, mu1 - mu2 - mu3 - mu4)``.

    The ``mu_i`` are the square roots of the eigenvalues of
    ``rho (Y⊗Y) rho* (Y⊗Y)``, obtained here as singular values of
    ``W^dagger (Y⊗Y) W*`` where ``rho = W W^dagger``; this avoids taking
    square roots of round-off eigenvalues.
    """
    rho = as_density(rho)
    _require_qubits(rho)
    W = _subnormalized_eigenvectors(rho)
    tau = linalg.dagger(W) @ _YY @ np.conj(W)
    mu = np.zeros(4)
    s = np.linalg.svd(tau, compute_uv=False)
    mu[: s.size] = s
    return float(max(0.0, mu[0] - mu[1] - mu[2] - mu[3]))


def eof_from_concurrence(c: float) -> float:
    c = min(max(c, 0.0), 1.0)
    # q = (1 - sqrt(1 - c^2)) / 2, written to avoid cancellation
    q = c * c / (2.0 * (1.0 + math.sqrt(1.0 - c * c)))
    return binary_entropy(q)


def eof_closed_form(rho) -> MeasureValue:
    rho = as_density(rho)
    return MeasureValue(eof_from_concurrence(concurrence(rho)), EXACT, MeasureId.FormationClosedForm.value)


def _pure_entropy(amp: np.ndarray) -> float:
    s = np.linalg.svd(amp.reshape(2, 2), compute_uv=False) ** 2
    return linalg.entropy_of_spectrum(s / s.sum())


def eof_decomposition_search(rho, cfg: OptimizerConfig = OptimizerConfig()) -> Tuple[MeasureValue, Ensemble]:
    """Minimize the average pure-state entanglement over ensembles of ``rho``.

    Ensembles are generated as ``phi_j = sum_i conj(U[j, i]) w_i`` from the
    sub-normalized eigenvectors ``w_i`` and an ``m x m`` unitary
    ``U = exp(iH)``. Every ensemble found is a valid decomposition, so the
    result is an upper bound on the entanglement of formation.
    """
    rho = as_density(rho)
    _require_qubits(rho)
    W = _subnormalized_eigenvectors(rho)
    name = MeasureId.FormationSearch.value
    if W.shape[1] == 1:
        amp = W[:, 0] / np.linalg.norm(W[:, 0])
        ens = Ensemble(np.array([1.0]), [PureState((2, 2), amp)])
        return MeasureValue(_clamp(_pure_entropy(amp), rho.dims), UPPER_BOUND, name), ens

    m = max(cfg.ensemble_size, W.shape[1])
    base = cfg.seed.derive(_NS_EOF)
    best = (np.inf, None, np.inf, False)
    iterations = 0
    for r in range(cfg.restarts):
        x0 = base.stream(r).rng().normal(scale=math.pi, size=m * m)
        x, f, gnorm, it, conv = _kernels.lbfgs(
            _kernels.DECOMPOSITION, x0, (np.ascontiguousarray(W), m, 0.0, 0.0),
            cfg.max_iterations, cfg.gradient_tol, cfg.value_tol, cfg.initial_step, 10
        )
        iterations += it
        if f < best[0]:
            best = (f, x, gnorm, conv)
    f, x, gnorm, conv = best
    phis = _kernels.ensemble_from_unitary(_kernels.unitary_from_params(x, m), W)
    weights = np.sum(np.abs(phis) ** 2, axis=1)
    keep = weights > 0
    members = [PureState((2, 2), v / np.linalg.norm(v)) for v in phis[keep]]
    ens = Ensemble(weights[keep] / weights.sum(), members)
    diag = Diagnostics(cfg.restarts, iterations, float(gnorm), bool(conv))
    return MeasureValue(_clamp(float(f), rho.dims), UPPER_BOUND, name, diag), ens


def _canonical_angles(x: np.ndarray, K: int) -> np.ndarray:
    ang = x[K:].reshape(K, 4).copy()
    for col in (0, 2):
        th = np.mod(ang[:, col], 2 * np.pi)
        flip = th > np.pi
        # theta -> 2 pi - theta with phi -> phi + pi is the same projector
        th[flip] = 2 * np.pi - th[flip]
        ang[:, col] = th
        ang[flip, col + 1] += np.pi
        ang[:, col + 1] = np.mod(ang[:, col + 1], 2 * np.pi)
    return ang


def _initial_ansatz(rng: np.random.Generator, K: int) -> np.ndarray:
    logits = rng.normal(scale=0.1, size=K)
    theta = np.arccos(1.0 - 2.0 * rng.uniform(size=(K, 2)))
    phi = rng.uniform(0.0, 2 * np.pi, size=(K, 2))
    ang = np.stack([theta[:, 0], phi[:, 0], theta[:, 1], phi[:, 1]], axis=1)
    return np.concatenate([logits, ang.ravel()])


def rel_ent_objective(rho, x: np.ndarray, K: int, tau: float):
    """Objective ``S(rho || sigma_tau(x))`` and its analytic gradient.

    Exposed for gradient checks; ``x`` uses the ansatz layout documented in
    :mod:`entorder._kernels`.
    """
    rho = as_density(rho)
    w = np.clip(linalg.hermitian_eig(rho.mat).eigenvalues, 0.0, None)
    w = w[w > linalg.SUPPORT_CUTOFF]
    slr = float(np.sum(w * np.log2(w)))
    return _kernels.rel_ent_objective(np.asarray(x, float), (np.ascontiguousarray(rho.mat), K, tau, slr))


def _optimize_ansatz(rho_mat, slr, x0, cfg: OptimizerConfig):
    x = x0
    total = 0
    left = cfg.max_iterations
    data_rho = np.ascontiguousarray(rho_mat)
    n = len(BARRIER_SCHEDULE)
    for i, tau in enumerate(BARRIER_SCHEDULE):
        cap = max(1, left // (n - i))
        x, f, gnorm, it, conv = _kernels.lbfgs(
            _kernels.REL_ENT, x, (data_rho, cfg.K, tau, slr),
            cap, cfg.gradient_tol, cfg.value_tol, cfg.initial_step, 10
        )
        total += it
        left = max(left - it, 0)
    return x, f, gnorm, total, conv


def relative_entropy_entanglement(rho, cfg: OptimizerConfig = OptimizerConfig()) -> Tuple[MeasureValue, SeparableAnsatz]:
    """Upper bound on ``min_sigma S(rho || sigma)`` over separable ``sigma``.

    Each restart runs L-BFGS over the ansatz parameters through the barrier
    schedule; the final iterate of the best restart is returned together with
    the separable state it represents.
    """
    rho = as_density(rho)
    _require_qubits(rho)
    w = np.clip(linalg.hermitian_eig(rho.mat).eigenvalues, 0.0, None)
    w = w[w > linalg.SUPPORT_CUTOFF]
    slr = float(np.sum(w * np.log2(w)))

    base = cfg.seed.derive(_NS_REL)
    best = (np.inf, None, np.inf, False)
    iterations = 0
    for r in range(cfg.restarts):
        x0 = _initial_ansatz(base.stream(r).rng(), cfg.K)
        x, f, gnorm, it, conv = _optimize_ansatz(rho.mat, slr, x0, cfg)
        iterations += it
        if f < best[0]:
            best = (f, x, gnorm, conv)
    f, x, gnorm, conv = best
    ansatz = SeparableAnsatz(_kernels.softmax(x[: cfg.K]), _canonical_angles(x, cfg.K), BARRIER_SCHEDULE[-1])
    diag = Diagnostics(cfg.restarts, iterations, float(gnorm), bool(conv))
    value = MeasureValue(_clamp(float(f), rho.dims), UPPER_BOUND, MeasureId.RelativeEntropyPPT.value, diag)
    return value, ansatz


def distillable_upper_bound(rho, cfg: OptimizerConfig = OptimizerConfig()) -> MeasureValue:
    """Relative entropy of entanglement, reported as a bound on distillable entanglement."""
    v, _ = relative_entropy_entanglement(rho, cfg)
    return dataclasses.replace(v, measure="distillable_upper_bound")


def _as_pure(state) -> PureState:
    if isinstance(state, PureState):
        return state
    w, V = linalg.hermitian_eig(state.mat)
    if abs(w[0] - 1.0) > 1e-10:
        raise IncompatibleMeasure(
            f"entropy of entanglement needs a pure state; largest eigenvalue is {w[0]:.12g}"
        )
    return PureState(state.dims, V[:, 0])


def evaluate(measure: MeasureId, state, cfg: OptimizerConfig = OptimizerConfig()) -> MeasureValue:
    """Evaluate one measure on a pure or mixed state."""
    if measure is MeasureId.EntropyOfEntanglement:
        return entropy_of_entanglement(_as_pure(state))
    if measure is MeasureId.FormationClosedForm:
        return eof_closed_form(state)
    if measure is MeasureId.FormationSearch:
        return eof_decomposition_search(state, cfg)[0]
    if measure is MeasureId.RelativeEntropyPPT:
        return relative_entropy_entanglement(state, cfg)[0]
    raise IncompatibleMeasure(f"no evaluation routine for {measure!r}")
