"""Order comparisons between two entanglement measures.

Two measures order states the same way when ``E1(a) <= E1(b)`` exactly when
``E2(a) <= E2(b)``. Because all measures here agree on pure states, any state
where two of them differ can be paired with a pure state whose entanglement
lies strictly between the two values; that pair is ranked oppositely.
:func:`witness_from_gap` builds such pairs, and :func:`random_search` looks
for order reversals in bulk.
"""

import csv
import io
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import measures as M
from .errors import ConfigError, DomainError, EpsilonTooLarge, LengthMismatch
from .measures import MeasureId, OptimizerConfig
from .states import (
    PureState,
    SeedSpec,
    as_density,
    bell_diagonal,
    ginibre_mixed,
    haar_pure,
    invert_binary_entropy,
    pure_with_schmidt,
    random_separable,
    werner,
)

log = logging.getLogger(__name__)

DEFAULT_DELTA = 1e-3
DEFAULT_PAIR_CAP = 10**6

_NS_SAMPLE = 11
_NS_EVAL = 12
_NS_VERIFY = 13
_NS_PAIRS = 15


@dataclass(eq=False)
class ViolationWitness:
    """A pair ranked oppositely: ``E1(a) < E1(b)`` while ``E2(a) > E2(b)``."""

    state_a: object
    state_b: object
    e1_a: float
    e1_b: float
    e2_a: float
    e2_b: float

    @property
    def margins(self) -> Tuple[float, float]:
        return self.e1_b - self.e1_a, self.e2_a - self.e2_b

    def holds(self, delta: float) -> bool:
        m1, m2 = self.margins
        return m1 > delta and m2 > delta

    def to_json(self, ref: Callable = None) -> dict:
        ref = ref or _inline_ref
        return {
            "a": ref(self.state_a),
            "b": ref(self.state_b),
            "e1": [self.e1_a, self.e1_b],
            "e2": [self.e2_a, self.e2_b],
            "margins": list(self.margins),
        }


def _inline_ref(state):
    if isinstance(state, (int, np.integer)):
        return {"$ref": f"#/states/{int(state)}"}
    return state.to_json()


@dataclass(eq=False)
class OrderingReport:
    measures: Tuple[MeasureId, MeasureId]
    n: int
    delta: float
    violations: List[ViolationWitness] = field(default_factory=list)
    agreements: int = 0
    ties: int = 0
    gap_witnesses: List[ViolationWitness] = field(default_factory=list)
    states: Optional[list] = None
    values: Optional[Tuple[np.ndarray, np.ndarray]] = None
    pairs: Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]] = None

    @property
    def compared(self) -> int:
        return len(self.violations) + self.agreements + self.ties

    def to_json(self) -> dict:
        out = {
            "measures": [m.value for m in self.measures],
            "n": self.n,
            "delta": self.delta,
            "agreements": self.agreements,
            "ties": self.ties,
            "violations": [w.to_json() for w in self.violations],
            "gap_witnesses": [w.to_json() for w in self.gap_witnesses],
        }
        if self.values is not None:
            out["values"] = [list(map(float, v)) for v in self.values]
        if self.states is not None:
            out["states"] = [s.to_json() for s in self.states]
        return out

    def to_csv(self) -> str:
        """One row per compared pair."""
        if self.pairs is None or self.values is None:
            raise ValueError("report carries no pair table")
        e1, e2 = self.values
        ii, jj, cls = self.pairs
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "j", "e1_i", "e1_j", "e2_i", "e2_j", "outcome"])
        for i, j, c in zip(ii, jj, cls):
            w.writerow([i, j, repr(float(e1[i])), repr(float(e1[j])), repr(float(e2[i])), repr(float(e2[j])), c])
        return buf.getvalue()


_AGREE, _TIE, _VIOLATE = "agreement", "tie", "violation"


def _classify(e1, e2, ii, jj, delta, tolerances):
    d1 = e1[jj] - e1[ii]
    d2 = e2[jj] - e2[ii]
    tie = (np.abs(d1) <= delta + tolerances[0]) | (np.abs(d2) <= delta + tolerances[1])
    viol = ~tie & (d1 * d2 < 0)
    return tie, viol


def _all_pairs(n: int):
    ii, jj = np.triu_indices(n, k=1)
    return ii, jj


def same_order(
    e1: Sequence[float],
    e2: Sequence[float],
    delta: float = DEFAULT_DELTA,
    tolerances: Tuple[float, float] = (0.0, 0.0),
    pairs=None,
    measures=(MeasureId.FormationClosedForm, MeasureId.RelativeEntropyPPT),
) -> OrderingReport:
    """Compare the orders two measures induce on a list of states.

    ``e1[i]`` and ``e2[i]`` are the two measures' values on state ``i``. Every
    pair (or the given ``pairs = (ii, jj)``) is classified as a tie when either
    difference is within ``delta`` plus that measure's tolerance, as a
    violation when the differences have opposite signs, and as an agreement
    otherwise. Violations are oriented so ``E1(a) < E1(b)``; their states are
    the integer indices.
    """
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    if e1.shape != e2.shape or e1.ndim != 1:
        raise LengthMismatch(f"value lists differ: {e1.shape} vs {e2.shape}")
    if delta < 0:
        raise DomainError(f"margin delta must be >= 0, got {delta}")
    ii, jj = _all_pairs(len(e1)) if pairs is None else (np.asarray(pairs[0]), np.asarray(pairs[1]))
    tie, viol = _classify(e1, e2, ii, jj, delta, tolerances)
    witnesses = []
    for i, j in zip(ii[viol], jj[viol]):
        a, b = (i, j) if e1[i] < e1[j] else (j, i)
        witnesses.append(ViolationWitness(int(a), int(b), e1[a], e1[b], e2[a], e2[b]))
    labels = np.where(tie, _TIE, np.where(viol, _VIOLATE, _AGREE))
    return OrderingReport(
        measures=tuple(measures),
        n=len(e1),
        delta=delta,
        violations=witnesses,
        agreements=int(np.sum(~tie & ~viol)),
        ties=int(np.sum(tie)),
        values=(e1, e2),
        pairs=(ii, jj, labels),
    )


def sandwich_construct(rho, eps: float) -> Tuple[PureState, PureState]:
    """Pure states at ``E_F(rho) + eps`` and ``E_F(rho) - eps``.

    Raises
    ------
    EpsilonTooLarge
        Unless ``0 < eps < min(E_F, 1 - E_F)``.
    """
    ef = M.eof_closed_form(rho).value
    upper = min(ef, 1.0 - ef)
    if not 0.0 < eps < upper:
        raise EpsilonTooLarge(
            f"eps must lie in (0, {upper:.6g}) for E_F = {ef:.6g}; got {eps}"
        )
    phi = pure_with_schmidt(invert_binary_entropy(ef + eps))
    psi = pure_with_schmidt(invert_binary_entropy(ef - eps))
    for s, target in ((phi, ef + eps), (psi, ef - eps)):
        got = M.entropy_of_entanglement(s).value
        if abs(got - target) > 1e-9:
            raise ArithmeticError(f"Schmidt state misses target {target}: {got}")
    return phi, psi


@dataclass(eq=False)
class SandwichDemo:
    rho: object
    eps: float
    phi: PureState
    psi: PureState
    values: Dict[str, float]
    chain_holds: Dict[str, bool]

    def to_json(self) -> dict:
        return {
            "rho": as_density(self.rho).to_json(),
            "eps": self.eps,
            "phi": self.phi.to_json(),
            "psi": self.psi.to_json(),
            "values": self.values,
            "chain_holds": self.chain_holds,
        }


def sandwich_demo(rho, eps, id1: MeasureId, id2: MeasureId, cfg: OptimizerConfig = OptimizerConfig()) -> SandwichDemo:
    """Evaluate both measures on ``phi``, ``rho`` and ``psi``.

    The chain ``E(phi) >= E(rho) >= E(psi)`` holds for the reference measure
    by construction; for the second measure it is what a shared order would
    demand.
    """
    phi, psi = sandwich_construct(rho, eps)
    values, chain = {}, {}
    for mid in (id1, id2):
        v = {name: M.evaluate(mid, s, cfg).value for name, s in (("phi", phi), ("rho", rho), ("psi", psi))}
        for name, x in v.items():
            values[f"{mid.value}({name})"] = x
        chain[f"{mid.value}(phi) >= {mid.value}(rho)"] = bool(v["phi"] >= v["rho"])
        chain[f"{mid.value}(rho) >= {mid.value}(psi)"] = bool(v["rho"] >= v["psi"])
    return SandwichDemo(rho, eps, phi, psi, values, chain)


def _verify_cfg(cfg: OptimizerConfig) -> OptimizerConfig:
    return cfg.with_seed(cfg.seed.derive(_NS_VERIFY))


def witness_from_gap(
    rho,
    id1: MeasureId,
    id2: MeasureId,
    cfg: OptimizerConfig = OptimizerConfig(),
    delta: float = DEFAULT_DELTA,
    known: Optional[Tuple[float, float]] = None,
    fresh: Optional[Tuple[float, float]] = None,
) -> Optional[ViolationWitness]:
    """Order-violation witness built from the gap ``E1(rho) - E2(rho)``.

    A pure state ``chi`` with entanglement at the midpoint of the two values
    sits above ``rho`` for one measure and below it for the other. Both
    measures are re-evaluated on ``chi`` and ``rho`` with fresh optimizer
    seeds and the witness is returned only if both margins exceed ``delta``.

    ``known`` and ``fresh`` let callers pass already computed values on
    ``rho`` (first evaluation and fresh-seed re-evaluation).
    """
    rho = as_density(rho)
    if known is None:
        known = (M.evaluate(id1, rho, cfg).value, M.evaluate(id2, rho, cfg).value)
    e1, e2 = known
    gap = e1 - e2
    if abs(gap) <= 2 * delta + id1.tolerance + id2.tolerance:
        return None
    chi = pure_with_schmidt(invert_binary_entropy(0.5 * (e1 + e2)))
    vcfg = _verify_cfg(cfg)
    if fresh is None:
        fresh = (M.evaluate(id1, rho, vcfg).value, M.evaluate(id2, rho, vcfg).value)
    c1 = M.evaluate(id1, chi, vcfg).value
    c2 = M.evaluate(id2, chi, vcfg).value
    if gap > 0:
        w = ViolationWitness(chi, rho, c1, fresh[0], c2, fresh[1])
    else:
        w = ViolationWitness(rho, chi, fresh[0], c1, fresh[1], c2)
    return w if w.holds(delta) else None


# -- bulk experiments --------------------------------------------------------


def parallel_map(fn, items, threads: Optional[int] = None) -> list:
    """Order-preserving map; the numba kernels release the GIL."""
    items = list(items)
    threads = threads or os.cpu_count() or 1
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def parse_sampler(spec: str) -> Callable[[SeedSpec], object]:
    """Sampler from a spec string: ``ginibre[:k=4]``, ``haar``,
    ``separable[:K=16]``, ``werner`` (uniform F) or ``bell`` (Dirichlet
    weights)."""
    name, _, body = spec.strip().partition(":")
    kv = {}
    for item in filter(None, (s.strip() for s in body.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            raise ConfigError(f"sampler parameter must be key=value, got {item!r}")
        kv[key.strip()] = value.strip()
    try:
        if name == "ginibre":
            k = int(kv.pop("k", 4))
            if not 1 <= k <= 4:
                raise DomainError(f"Ginibre rank parameter k must lie in [1, 4], got {k}")
            fn = lambda s: ginibre_mixed((2, 2), k, s)
        elif name == "haar":
            fn = lambda s: haar_pure((2, 2), s)
        elif name == "separable":
            K = int(kv.pop("K", 16))
            if K < 1:
                raise DomainError(f"K must be at least 1, got {K}")
            fn = lambda s: random_separable(K, s)
        elif name == "werner":
            fn = lambda s: werner(float(s.rng().uniform()))
        elif name == "bell":
            fn = lambda s: bell_diagonal(*s.rng().dirichlet(np.ones(4)))
        else:
            raise ConfigError(f"unknown sampler {name!r}")
    except ValueError as exc:
        raise ConfigError(f"bad sampler spec {spec!r}: {exc}") from exc
    if kv:
        raise ConfigError(f"unknown {name} sampler parameters: {sorted(kv)}")
    return fn


def _sample_pairs(n: int, cap: int, seed: SeedSpec):
    total = n * (n - 1) // 2
    if total <= cap:
        return _all_pairs(n)
    rng = seed.rng()
    lin = np.unique(rng.integers(0, total, size=2 * cap))
    lin = rng.permutation(lin)[:cap]
    lin.sort()
    # invert the row-major upper-triangle enumeration
    i = (n - 2 - np.floor(np.sqrt(-8.0 * lin + 4.0 * n * (n - 1) - 7) / 2.0 - 0.5)).astype(np.int64)
    j = (lin + i + 1 - n * (n - 1) // 2 + (n - i) * ((n - i) - 1) // 2).astype(np.int64)
    return i, j


def random_search(
    n: int,
    sampler,
    id1: MeasureId,
    id2: MeasureId,
    cfg: OptimizerConfig = OptimizerConfig(),
    delta: float = DEFAULT_DELTA,
    seed: int = 0,
    cap: int = DEFAULT_PAIR_CAP,
    threads: Optional[int] = None,
) -> OrderingReport:
    """Sample ``n`` states and look for order violations between two measures.

    All pairs (or ``cap`` seeded random pairs) are compared with the
    measures' tolerances added to ``delta``. Every reported violation has been
    re-checked with values re-evaluated under fresh seeds; pairs that fail the
    re-check count as ties. :func:`witness_from_gap` additionally runs on
    every sampled state. The result depends only on the arguments.
    """
    if n < 2:
        raise ConfigError(f"random_search needs at least 2 samples, got {n}")
    if isinstance(sampler, str):
        sampler = parse_sampler(sampler)
    root = SeedSpec(int(seed))
    states = [sampler(root.derive(_NS_SAMPLE).stream(i)) for i in range(n)]
    cfgs = [cfg.with_seed(root.derive(_NS_EVAL).stream(i)) for i in range(n)]
    tol = (id1.tolerance, id2.tolerance)

    log.info("evaluating %s and %s on %d states", id1.value, id2.value, n)
    vals = parallel_map(lambda i: (M.evaluate(id1, states[i], cfgs[i]).value, M.evaluate(id2, states[i], cfgs[i]).value), range(n), threads)
    e1 = np.array([v[0] for v in vals])
    e2 = np.array([v[1] for v in vals])

    ii, jj = _sample_pairs(n, cap, root.derive(_NS_PAIRS))
    report = same_order(e1, e2, delta, tol, pairs=(ii, jj), measures=(id1, id2))
    report.states = states

    gap_idx = [i for i in range(n) if abs(e1[i] - e2[i]) > 2 * delta + tol[0] + tol[1]]
    needed = sorted({w.state_a for w in report.violations} | {w.state_b for w in report.violations} | set(gap_idx))
    log.info("re-evaluating %d states with fresh seeds", len(needed))

    def fresh_values(i):
        vcfg = _verify_cfg(cfgs[i])
        return M.evaluate(id1, states[i], vcfg).value, M.evaluate(id2, states[i], vcfg).value

    fresh = dict(zip(needed, parallel_map(fresh_values, needed, threads)))

    kept = []
    labels = report.pairs[2]
    viol_pos = np.flatnonzero(labels == _VIOLATE)
    for w, k in zip(report.violations, viol_pos):
        a, b = w.state_a, w.state_b
        f1a, f2a = fresh[a]
        f1b, f2b = fresh[b]
        if f1b - f1a > delta + tol[0] and f2a - f2b > delta + tol[1]:
            kept.append(w)
        else:
            labels[k] = _TIE
    report.ties += len(report.violations) - len(kept)
    report.violations = kept

    log.info("building gap witnesses for %d states", len(gap_idx))
    gw = parallel_map(
        lambda i: witness_from_gap(states[i], id1, id2, cfgs[i], delta, known=(e1[i], e2[i]), fresh=fresh[i]),
        gap_idx,
        threads,
    )
    for i, w in zip(gap_idx, gw):
        if w is None:
            continue
        # the sampled state is referenced by index, chi stays inline
        if isinstance(w.state_a, PureState):
            w.state_b = i
        else:
            w.state_a = i
        report.gap_witnesses.append(w)
    return report


# -- family scans ------------------------------------------------------------

FAMILIES = {
    "werner": ("F", werner),
    "schmidt": ("p", pure_with_schmidt),
}


def parse_grid(text: str) -> List[float]:
    """``start:stop:step`` (inclusive of ``stop``) or a comma list."""
    text = text.strip()
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if step <= 0 or stop < start:
                raise DomainError(f"grid {text!r} needs step > 0 and start <= stop")
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + k * step, 12) for k in range(count)]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise DomainError(f"cannot parse grid {text!r}: {exc}") from exc


def scan_family(family: str, grid: Sequence[float], ids: Sequence[MeasureId], cfg: OptimizerConfig = OptimizerConfig(), threads: Optional[int] = None) -> List[dict]:
    """Evaluate measures along a one-parameter family.

    Returns one dict per grid point: the parameter, ``<id>`` and
    ``<id>_status`` per measure, and ``error`` (``None`` unless the point was
    outside the family's domain).
    """
    if family not in FAMILIES:
        raise ConfigError(f"unknown family {family!r}; choose from {sorted(FAMILIES)}")
    pname, build = FAMILIES[family]

    def row(k):
        x = grid[k]
        out = {pname: x}
        try:
            state = build(x)
        except DomainError as exc:
            for mid in ids:
                out[mid.value] = None
                out[f"{mid.value}_status"] = None
            out["error"] = str(exc)
            return out
        pcfg = cfg.with_seed(cfg.seed.derive(k))
        for mid in ids:
            v = M.evaluate(mid, state, pcfg)
            out[mid.value] = v.value
            out[f"{mid.value}_status"] = v.status
        out["error"] = None
        return out

    return parallel_map(row, range(len(grid)), threads)


def rows_to_csv(rows: List[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if v is None else (repr(v) if isinstance(v, float) else v)) for k, v in r.items()})
    return buf.getvalue()
