"""Command-line interface.

Exit status: 0 success, 1 selftest failure, 2 configuration or domain error,
3 file or parse error. Machine-readable output goes to standard output (or
``--out``); progress and summaries go to standard error.

The Werner family is ``F |Phi+><Phi+| + (1 - F)/3 (I - |Phi+><Phi+|)``,
entangled iff ``F > 1/2``.
"""

import argparse
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from . import measures as M, ordering as O, selftest, states as S
from .errors import ConfigError, EntorderError, EpsilonTooLarge, StateFileError
from .measures import MeasureId, OptimizerConfig

log = logging.getLogger("entorder")

EXIT_OK, EXIT_SELFTEST, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3
COMMANDS = ("measure", "scan", "search", "witness", "selftest")


@dataclass
class RunConfig:
    command: str
    input: Optional[str] = None
    state_file: Optional[str] = None
    family: Optional[str] = None
    grid: Optional[str] = None
    sampler: str = "ginibre:k=4"
    measures: List[str] = field(default_factory=lambda: ["eof", "rel_ent"])
    optimizer: dict = field(default_factory=dict)
    seed: int = 0
    samples: int = 1000
    delta: float = O.DEFAULT_DELTA
    cap: int = O.DEFAULT_PAIR_CAP
    format: str = "json"
    out: Optional[str] = None
    threads: Optional[int] = None
    strict: bool = False

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.format not in ("json", "csv"):
            raise ConfigError(f"format must be json or csv, got {self.format!r}")
        if self.delta < 0:
            raise ConfigError(f"delta must be >= 0, got {self.delta}")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1")
        self.measure_ids()
        if self.command in ("measure", "witness") and not (self.input or self.state_file):
            raise ConfigError(f"{self.command} needs --state or --state-file")
        if self.command == "search" and self.samples < 2:
            raise ConfigError(f"search needs --samples >= 2, got {self.samples}")
        if self.command in ("search", "witness") and len(self.measures) != 2:
            raise ConfigError(f"{self.command} needs exactly two measures, got {self.measures}")
        if self.command == "scan" and not (self.family and self.grid):
            raise ConfigError("scan needs --family and --grid")

    def measure_ids(self) -> List[MeasureId]:
        return [MeasureId.parse(m) for m in self.measures]

    def optimizer_config(self) -> OptimizerConfig:
        opt = dict(self.optimizer)
        opt.setdefault("seed", self.seed)
        return OptimizerConfig.from_json(opt)

    @classmethod
    def from_json(cls, obj: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if "command" not in obj:
            raise ConfigError("config needs a 'command' field")
        try:
            cfg = cls(**obj)
        except TypeError as exc:
            raise ConfigError(f"bad config: {exc}") from exc
        for name, kind in (("samples", int), ("cap", int), ("seed", int), ("delta", (int, float))):
            if not isinstance(getattr(cfg, name), kind) or isinstance(getattr(cfg, name), bool):
                raise ConfigError(f"config field {name!r} has the wrong type")
        return cfg


def _default_seed() -> int:
    text = os.environ.get("ENTORDER_SEED")
    if text is None:
        return 0
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"ENTORDER_SEED must be an integer, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config; explicit flags override it")
    common.add_argument("--seed", type=int, help="master seed (default: $ENTORDER_SEED or 0)")
    common.add_argument("--measures", help="comma list from: entropy, eof, eof_search, rel_ent")
    common.add_argument("--format", choices=("json", "csv"))
    common.add_argument("--out", help="output path (default: standard output)")
    common.add_argument("--threads", type=int, help="worker threads (default: logical CPU count)")
    common.add_argument("--delta", type=float, help="ordering margin (default 1e-3)")
    common.add_argument("--restarts", type=int, help="optimizer restarts (default 8)")
    common.add_argument("--K", type=int, dest="K", help="product terms in the separable ansatz (default 16)")
    common.add_argument("--max-iterations", type=int, help="optimizer iterations per restart (default 2000)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="entorder",
        description="Entanglement measures and ordering-violation witnesses for two-qubit states.",
        epilog="Werner convention: F |Phi+><Phi+| + (1 - F)/3 (I - |Phi+><Phi+|), entangled iff F > 1/2.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def state_args(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--state", dest="input", help="spec such as werner:0.75, bell:0.7,0.1,0.1,0.1, ginibre:k=4,seed=7")
        g.add_argument("--state-file", help="state JSON file")

    p = sub.add_parser("measure", parents=[common], help="evaluate measures on one state")
    state_args(p)
    p = sub.add_parser("scan", parents=[common], help="measures along a state family")
    p.add_argument("--family", help="werner or schmidt")
    p.add_argument("--grid", help="start:stop:step (inclusive) or a comma list")
    p = sub.add_parser("search", parents=[common], help="random search for ordering violations")
    p.add_argument("--samples", type=int)
    p.add_argument("--sampler", help="ginibre:k=4 (default), haar, separable:K=16, werner, bell")
    p.add_argument("--cap", type=int, help="maximum compared pairs (default 1e6)")
    p = sub.add_parser("witness", parents=[common], help="violation witness and sandwich record for one state")
    state_args(p)
    p = sub.add_parser("selftest", parents=[common], help="run the invariant suite")
    p.add_argument("--strict", action="store_true", help="full sample counts")
    return parser


def _load_json_file(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise StateFileError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise StateFileError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def resolve_config(args: argparse.Namespace) -> RunConfig:
    base = {}
    if args.config:
        base = _load_json_file(args.config)
        if not isinstance(base, dict):
            raise ConfigError("config file must hold a JSON object")
        if base.get("command", args.command) != args.command:
            raise ConfigError(f"config is for {base['command']!r}, not {args.command!r}")
    base["command"] = args.command
    cfg = RunConfig.from_json(base)
    for name in ("input", "state_file", "family", "grid", "sampler", "samples", "cap", "format", "out", "threads", "delta"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if getattr(args, "strict", False):
        cfg.strict = True
    if args.measures is not None:
        cfg.measures = [m.strip() for m in args.measures.split(",") if m.strip()]
    if args.seed is not None:
        cfg.seed = args.seed
    elif "seed" not in base:
        cfg.seed = _default_seed()
    opt = dict(cfg.optimizer)
    for flag, key in (("restarts", "restarts"), ("K", "K"), ("max_iterations", "max_iterations")):
        value = getattr(args, flag, None)
        if value is not None:
            opt[key] = value
    cfg.optimizer = opt
    cfg.validate()
    return cfg


def _load_input(cfg: RunConfig):
    if cfg.state_file:
        return S.load_state(cfg.state_file)
    return S.parse_state_spec(cfg.input)


def _dumps(obj) -> str:
    return json.dumps(obj, allow_nan=False) + "\n"


def _csv_measures(values: List[M.MeasureValue]) -> str:
    rows = [v.to_json() for v in values]
    return O.rows_to_csv(rows)


def cmd_measure(cfg: RunConfig) -> str:
    state = _load_input(cfg)
    opt = cfg.optimizer_config()
    values = [M.evaluate(mid, state, opt) for mid in cfg.measure_ids()]
    if cfg.format == "csv":
        return _csv_measures(values)
    return _dumps([v.to_json() for v in values])


def cmd_scan(cfg: RunConfig) -> str:
    grid = O.parse_grid(cfg.grid)
    rows = O.scan_family(cfg.family, grid, cfg.measure_ids(), cfg.optimizer_config(), cfg.threads)
    if cfg.format == "csv":
        return O.rows_to_csv(rows)
    return _dumps(rows)


def cmd_search(cfg: RunConfig) -> str:
    id1, id2 = cfg.measure_ids()
    report = O.random_search(cfg.samples, cfg.sampler, id1, id2, cfg.optimizer_config(), cfg.delta, cfg.seed, cfg.cap, cfg.threads)
    print(
        f"search: n={report.n} compared={report.compared} agreements={report.agreements} "
        f"ties={report.ties} violations={len(report.violations)} gap_witnesses={len(report.gap_witnesses)}",
        file=sys.stderr,
    )
    if cfg.format == "csv":
        return report.to_csv()
    return _dumps(report.to_json())


def cmd_witness(cfg: RunConfig) -> str:
    id1, id2 = cfg.measure_ids()
    state = _load_input(cfg)
    opt = cfg.optimizer_config()
    w = O.witness_from_gap(state, id1, id2, opt, cfg.delta)
    out = {"measures": [id1.value, id2.value], "delta": cfg.delta}
    out["witness"] = "none" if w is None else w.to_json()
    if w is not None:
        out["witness"]["chi_schmidt_p"] = S.invert_binary_entropy(
            M.entropy_of_entanglement(w.state_a if isinstance(w.state_a, S.PureState) else w.state_b).value
        )
    try:
        out["sandwich"] = O.sandwich_demo(state, cfg.delta, id1, id2, opt).to_json()
    except EpsilonTooLarge as exc:
        out["sandwich"] = {"error": str(exc)}
    return _dumps(out)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(args)
        if cfg.command == "selftest":
            return selftest.run(strict=cfg.strict)
        text = {"measure": cmd_measure, "scan": cmd_scan, "search": cmd_search, "witness": cmd_witness}[cfg.command](cfg)
        if cfg.out:
            try:
                Path(cfg.out).write_text(text)
            except OSError as exc:
                raise StateFileError(f"cannot write {cfg.out}: {exc}") from exc
        else:
            sys.stdout.write(text)
        return EXIT_OK
    except StateFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EntorderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
