# src/storagebid/experiments/run.py
"""
Command-line entry point.

    storagebid benchmark --config desk --iterations 0,500,2000 --seeds 5 --out results/desk
    storagebid train     --config case-study --iterations 10000 --out results/train
    storagebid evaluate  --config case-study --policy table --table results/train/table.npz --out results/eval
    storagebid refine    --config desk --rounds 5 --out results/refine
    storagebid convert   export_01.csv export_02.csv --zone N.Y.C. --out data/nyc

Every command writes manifest.json last; failures write error.json and exit with code 2.
"""
from __future__ import annotations
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple
import argparse
import json
import logging
import platform
import sys

import numpy as np
import pandas as pd

import storagebid
from storagebid.adp.solver import TrainerConfig, train_post, train_pre
from storagebid.common.errors import CapabilityError, ConfigurationError, StorageBidError
from storagebid.common.io import ensure_dir, write_json, write_rows_csv
from storagebid.common.metrics import timer
from storagebid.common.table import ValueTable
from storagebid.data.convert import convert_many
from storagebid.data.datasets import Dataset, DatasetSpec, dataset_manifest, select_dataset
from storagebid.data.ingest import BuildReport, load_day_paths
from storagebid.exact.expectation import ExpectationEngine
from storagebid.exact.solver import backward_dp, refine_terminal, state_space_report
from storagebid.market.config import MarketConfig
from storagebid.market.contribution import EmpiricalContribution, ExactContribution
from storagebid.policies.base import GreedyPostPolicy, GreedyPrePolicy, IdlePolicy, Policy
from storagebid.policies.evaluate import evaluate, write_report
from storagebid.policies.rules import HourlyPriceStats, rule_policy_A, rule_policy_B, rule_policy_C
from storagebid.prices.historical import HOURS_PER_DAY, historical_replay
from storagebid.prices.instances import Instance, load_instance

logger = logging.getLogger("storagebid")

__all__ = ["RunManifest", "run_benchmark", "run_train", "run_evaluate", "run_refine", "build_parser", "main"]

LOG_FORMAT = "%(asctime)s %(name)s %(levelname)s %(message)s"
# days sampled from a synthetic model to build rule-policy statistics
RULE_STAT_DAYS = 200


@dataclass
class RunManifest:
    command: str
    config: Optional[str]
    seed: Optional[int]
    arguments: Dict[str, Any]
    wall_clock_sec: float = 0.0
    outputs: List[str] = field(default_factory=list)
    versions: Dict[str, str] = field(default_factory=lambda: {
        "storagebid": storagebid.__version__,
        "numpy": np.__version__,
        "pandas": pd.__version__,
        "python": platform.python_version(),
    })

    def write(self, out: Path) -> Path:
        return write_json(out / "manifest.json", asdict(self))


def _checkout_with(relative: Path) -> Optional[Path]:
    """`relative` under the nearest ancestor of this package that has it (the checkout with configs/ and data/)."""
    for parent in Path(__file__).resolve().parents:
        if (parent / relative).exists():
            return parent / relative
    return None


def _resolve_data(path: str) -> Path:
    # price files named in bundled configs are relative to the checkout, not the cwd
    p = Path(path)
    if p.is_absolute() or p.exists():
        return p
    return _checkout_with(p) or p


def _derived_seeds(seed: Optional[int], n: int) -> List[Optional[int]]:
    # RNG to derive different seeds per run (stable across algorithms and N)
    rng = np.random.default_rng(seed)
    return [None if seed is None else int(rng.integers(0, 2**31 - 1)) for _ in range(n)]


def _rel(out: Path, paths: Sequence[Path]) -> List[str]:
    return sorted(str(Path(p).relative_to(out)) for p in paths)


# ---------------------------
# Historical datasets
# ---------------------------

def load_dataset(instance: Instance, data: Optional[str] = None, target: Optional[str] = None,
                 mode: Optional[str] = None, day_offset: Optional[int] = None) -> Tuple[Dataset, BuildReport]:
    """Resolve the train/test split of a historical instance (CLI values override the config)."""
    prices = instance.prices
    csv_path = data or prices.get("csv")
    if not csv_path:
        raise ConfigurationError("historical instance needs a price file (config 'csv' or --data)")
    spec_d = dict(prices.get("dataset", {}))
    if target:
        spec_d["target"] = target
    if mode:
        spec_d["mode"] = mode
    if day_offset is not None:
        spec_d["day_offset"] = day_offset
    spec = DatasetSpec.from_dict(spec_d)
    cfg = instance.market
    build = load_day_paths([_resolve_data(csv_path)], M=cfg.M, price_bound=cfg.price_bound)
    return select_dataset(build.paths, spec), build


def _day_hours(cfg: MarketConfig, paths: Sequence[Any]) -> np.ndarray:
    return np.stack([np.asarray(p.prices, dtype=float).reshape(HOURS_PER_DAY, cfg.M) for p in paths])


# ---------------------------
# benchmark
# ---------------------------

def run_benchmark(
    instance: Instance,
    iterations: Sequence[int] = (0, 500, 2000),
    seeds: int = 3,
    seed: Optional[int] = 0,
    trainer: Optional[TrainerConfig] = None,
    algorithms: Sequence[str] = ("M-ADP", "AVI"),
    eval_paths: int = 1000,
    threads: int = 1,
    slice_t: Optional[int] = None,
    slice_r: Optional[int] = None,
    timing: bool = True,
    out: Optional[Path] = None,
) -> List[Path]:
    """
    Exact solve once, then pre-decision ADP at every N and seed.

    - iterations: the N values to train with
    - seeds: training runs per (algorithm, N); run seeds derive from `seed`
    - trainer: base trainer knobs (iterations, seed and projection are set per run)
    - algorithms: "M-ADP" (with projection) and/or "AVI" (without)
    - eval_paths: sample paths per policy evaluation; every policy sees the same paths
    - slice_t, slice_r: value slice exported to slices.csv (default t = T//2, R = min(3, R_max))
    - timing: False writes 0 for wall times so reruns are byte-identical
    """
    if instance.model is None:
        raise ConfigurationError("benchmark needs a synthetic price model")
    out = ensure_dir(out or Path("results") / "benchmark")
    cfg, model = instance.market, instance.model
    base = trainer or TrainerConfig()
    eval_seed, *run_seeds = _derived_seeds(seed, 1 + seeds)
    engine = ExpectationEngine(cfg, model)

    with timer(timing) as t_bdp:
        bdp = backward_dp(cfg, model, engine=engine)
    bdp_time = t_bdp()
    optimal = evaluate(GreedyPrePolicy(bdp, engine), model, eval_paths, eval_seed, threads=threads).mean
    logger.info("BDP policy value %.4f (%.2fs)", optimal, bdp_time)

    rows: List[Dict[str, Any]] = [{
        "algorithm": "BDP", "N": "", "seed": "", "policy_value": optimal,
        "pct_optimal": 100.0, "wall_time_sec": bdp_time,
    }]
    tables: Dict[str, ValueTable] = {"BDP": bdp}
    for alg in algorithms:
        if alg not in ("M-ADP", "AVI"):
            raise ConfigurationError(f"Unknown algorithm {alg!r}")
        for n in iterations:
            for s in run_seeds:
                cfg_run = TrainerConfig(**{**base.to_dict(), "iterations": int(n), "seed": s,
                                           "projection": alg == "M-ADP"})
                with timer(timing) as t_run:
                    table = train_pre(cfg, model, cfg_run, engine)
                wall = t_run()
                value = evaluate(GreedyPrePolicy(table, engine), model, eval_paths, eval_seed,
                                 threads=threads).mean
                row = {
                    "algorithm": alg, "N": int(n), "seed": s, "policy_value": value,
                    "pct_optimal": 100.0 * value / optimal if optimal else None,
                    "wall_time_sec": wall,
                }
                logger.info("%s", row)
                rows.append(row)
                if n == max(iterations) and s == run_seeds[0]:
                    tables[alg] = table

    written = [write_rows_csv(out / "benchmark.csv", rows,
                              ["algorithm", "N", "seed", "policy_value", "pct_optimal", "wall_time_sec"])]
    t_sl = cfg.T // 2 if slice_t is None else slice_t
    r_sl = min(3, cfg.R_max) if slice_r is None else slice_r
    written.append(write_rows_csv(out / "slices.csv", _slices(tables, t_sl, r_sl),
                                  ["source", "t", "R", "L", "price_state", "lo", "hi",
                                   "bid_low", "bid_high", "value"]))
    report = state_space_report(cfg, model.n_price_states)
    written.append(write_json(out / "cardinality.json", report))
    written.append(bdp.save(out / "bdp.npz"))
    return written


def _slices(tables: Dict[str, ValueTable], t: int, r: int) -> List[Dict[str, Any]]:
    """V_t(R=r, L=L0, previous bid, price state) for every feasible previous bid."""
    rows = []
    for source, table in tables.items():
        cfg = table.cfg
        if not 0 <= t <= cfg.T or not 0 <= r <= cfg.R_max:
            raise ConfigurationError(f"slice (t={t}, R={r}) is outside the lattice")
        for ps in range(table.n_price_states):
            for lo, hi in cfg.feasible_bids():
                rows.append({
                    "source": source, "t": t, "R": r, "L": cfg.L0, "price_state": ps,
                    "lo": lo, "hi": hi, "bid_low": cfg.bid_grid[lo], "bid_high": cfg.bid_grid[hi],
                    "value": float(table.values[t][r, cfg.L0, lo, hi, ps]),
                })
    return rows


# ---------------------------
# train
# ---------------------------

def run_train(instance: Instance, trainer: TrainerConfig, out: Path, data: Optional[str] = None,
              target: Optional[str] = None, mode: Optional[str] = None,
              export_csv: bool = False, timing: bool = True,
              day_offset: Optional[int] = None) -> List[Path]:
    """
    Post-decision training on historical replay (or on the instance's synthetic model).
    training.json records the trainer settings and the training wall time.
    """
    out = ensure_dir(out)
    cfg = instance.market
    written: List[Path] = []
    if instance.is_historical:
        dataset, build = load_dataset(instance, data, target, mode, day_offset)
        model = historical_replay(dataset.train, M=cfg.M, price_bound=cfg.price_bound)
        written.append(write_json(out / "dataset.json", dataset_manifest(dataset, build)))
    elif instance.model is not None:
        model = instance.model
    else:
        raise ConfigurationError("instance has no price model")
    with timer(timing) as t:
        table = train_post(cfg, model, trainer)
    summary = {**trainer.to_dict(), "algorithm": trainer.algorithm, "wall_time_sec": t()}
    written.append(table.save(out / "table.npz"))
    if export_csv:
        written.append(table.to_csv(out / "table.csv"))
    written.append(write_json(out / "training.json", summary))
    return written


# ---------------------------
# evaluate
# ---------------------------

def _table_policy(table: ValueTable, instance: Instance, train_hours: Optional[np.ndarray]) -> Policy:
    if table.post:
        if train_hours is not None:
            return GreedyPostPolicy(table, EmpiricalContribution(table.cfg, list(train_hours)))
        if instance.model is None or not instance.model.can_enumerate:
            raise CapabilityError("a post-decision table needs training days or an enumerable model")
        return GreedyPostPolicy(table, ExactContribution(ExpectationEngine(table.cfg, instance.model)))
    if instance.model is None or not instance.model.can_enumerate:
        raise CapabilityError("a pre-decision table needs an enumerable price model")
    return GreedyPrePolicy(table, ExpectationEngine(table.cfg, instance.model))


def run_evaluate(instance: Instance, policy_kind: str, out: Path, table_path: Optional[str] = None,
                 n_paths: int = 1000, seed: Optional[int] = 0, threads: int = 1,
                 h_star: int = 12, k_star: int = 10, alpha: float = 0.1,
                 data: Optional[str] = None, target: Optional[str] = None,
                 mode: Optional[str] = None, day_offset: Optional[int] = None) -> List[Path]:
    """
    Evaluate a value-table policy, the idle policy or rule policy A/B/C.
    Historical instances are scored on the held-out test days, synthetic ones
    on `n_paths` sampled paths.
    """
    out = ensure_dir(out)
    cfg = instance.market
    written: List[Path] = []
    train_hours: Optional[np.ndarray] = None
    if instance.is_historical:
        dataset, build = load_dataset(instance, data, target, mode, day_offset)
        train_hours = _day_hours(cfg, dataset.train)
        source: Any = dataset.test
        written.append(write_json(out / "dataset.json", dataset_manifest(dataset, build)))
    elif instance.model is not None:
        source = instance.model
    else:
        raise ConfigurationError("instance has no price model")

    def stats() -> HourlyPriceStats:
        if train_hours is not None:
            return HourlyPriceStats(cfg, train_hours)
        return HourlyPriceStats.from_model(cfg, instance.model, RULE_STAT_DAYS, np.random.default_rng(seed))

    builders: Dict[str, Callable[[], Policy]] = {
        "idle": lambda: IdlePolicy(cfg),
        "A": lambda: rule_policy_A(stats(), h_star),
        "B": lambda: rule_policy_B(stats(), k_star),
        "C": lambda: rule_policy_C(stats(), alpha),
    }
    if policy_kind == "table":
        if not table_path:
            raise ConfigurationError("--policy table needs --table")
        policy = _table_policy(ValueTable.load(table_path), instance, train_hours)
    elif policy_kind in builders:
        policy = builders[policy_kind]()
    else:
        raise ConfigurationError(f"Unknown policy {policy_kind!r}")

    report = evaluate(policy, source, n_paths, seed, cfg=policy.cfg, threads=threads)
    written += write_report(report, out)
    return written


# ---------------------------
# refine
# ---------------------------

def run_refine(instance: Instance, out: Path, rounds: int = 5, export_csv: bool = False) -> List[Path]:
    if instance.model is None:
        raise ConfigurationError("terminal refinement needs a synthetic price model")
    out = ensure_dir(out)
    table, used = refine_terminal(instance.market, instance.model, max_rounds=rounds)
    valid = table.space.valid_mask()
    v0 = table.values[0][valid]
    written = [table.save(out / "table.npz"), write_json(out / "refine.json", {
        "rounds": used, "max_rounds": rounds,
        "v0_min": float(v0.min()), "v0_max": float(v0.max()),
    })]
    if export_csv:
        written.append(table.to_csv(out / "table.csv"))
    return written


# ---------------------------
# argparse
# ---------------------------

def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--log-level", default="INFO")
    p.add_argument("--no-timing", action="store_true", help="write 0 for wall times (byte-identical reruns)")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="instance JSON file or preset name (A1..F2, desk, case-study)")
    p.add_argument("--seed", type=int, default=0)
    _add_output(p)


def _add_trainer(p: argparse.ArgumentParser) -> None:
    p.add_argument("--stepsize", default="harmonic", help="harmonic | constant:<c> | bakf[:<eta>]")
    p.add_argument("--explore", default="uniform", help="uniform | egreedy[:<eps>]")
    p.add_argument("--no-projection", action="store_true", help="approximate value iteration (AVI)")
    p.add_argument("--mode", default="exact", choices=["exact", "saa"], help="pre-decision observations")
    p.add_argument("--J", type=int, default=100, help="samples per SAA observation")


def _add_dataset(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", default=None, help="price CSV overriding the config's")
    p.add_argument("--target", default=None, help="test month YYYY-MM")
    p.add_argument("--dataset-mode", default=None, choices=["same-month-prior-year", "prior-month"])
    p.add_argument("--day-offset", type=int, default=None,
                   help="hour of the day the horizon starts at (0..23), e.g. where storage is usually low")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="storagebid", description=__doc__.split("\n\n")[0].strip())
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("benchmark", help="BDP vs M-ADP vs AVI on a synthetic instance")
    _add_common(b)
    _add_trainer(b)
    b.add_argument("--iterations", type=_int_list, default=[0, 500, 2000], help="comma-separated N values")
    b.add_argument("--seeds", type=int, default=3)
    b.add_argument("--eval-paths", type=int, default=1000)
    b.add_argument("--threads", type=int, default=1)
    b.add_argument("--slice-t", type=int, default=None)
    b.add_argument("--slice-r", type=int, default=None)

    t = sub.add_parser("train", help="post-decision M-ADP (distribution-free on historical data)")
    _add_common(t)
    _add_trainer(t)
    _add_dataset(t)
    t.add_argument("--iterations", type=int, default=1000)
    t.add_argument("--csv", action="store_true", help="also export the table as CSV")

    e = sub.add_parser("evaluate", help="score a policy on test days or sampled paths")
    _add_common(e)
    _add_dataset(e)
    e.add_argument("--policy", default="table", choices=["table", "idle", "A", "B", "C"])
    e.add_argument("--table", default=None)
    e.add_argument("--n-paths", type=int, default=1000)
    e.add_argument("--threads", type=int, default=1)
    e.add_argument("--h-star", type=int, default=12)
    e.add_argument("--k-star", type=int, default=10)
    e.add_argument("--alpha", type=float, default=0.1)

    r = sub.add_parser("refine", help="BDP with iterated terminal refinement")
    _add_common(r)
    r.add_argument("--rounds", type=int, default=5)
    r.add_argument("--csv", action="store_true")

    c = sub.add_parser("convert", help="turn ISO price exports into timestamp,price CSV")
    _add_output(c)
    c.add_argument("sources", nargs="+", help="ISO export CSV files")
    c.add_argument("--zone", default=None, help="keep only rows of this zone name")
    c.add_argument("--interval-ending", action="store_true", help="timestamps mark the end of each interval")
    c.add_argument("--M", type=int, default=12, help="settlements per hour")
    c.add_argument("--name", default="prices.csv", help="output file name inside --out")
    return parser


def _trainer(args: argparse.Namespace, iterations: int) -> TrainerConfig:
    return TrainerConfig(
        iterations=iterations,
        mode=args.mode,
        J=args.J,
        stepsize=args.stepsize,
        explore=args.explore,
        projection=not args.no_projection,
        seed=args.seed,
    )


def _dispatch(args: argparse.Namespace, out: Path) -> List[Path]:
    if args.command == "convert":
        dst = convert_many(args.sources, out / args.name, zone=args.zone,
                           interval_ending=args.interval_ending, M=args.M)
        return [dst]
    instance = load_instance(args.config)
    if args.command == "benchmark":
        algorithms = ("AVI",) if args.no_projection else ("M-ADP", "AVI")
        return run_benchmark(
            instance, args.iterations, args.seeds, args.seed, _trainer(args, 0), algorithms,
            args.eval_paths, args.threads, args.slice_t, args.slice_r, not args.no_timing, out,
        )
    if args.command == "train":
        return run_train(instance, _trainer(args, args.iterations), out, args.data, args.target,
                         args.dataset_mode, args.csv, not args.no_timing, args.day_offset)
    if args.command == "evaluate":
        return run_evaluate(instance, args.policy, out, args.table, args.n_paths, args.seed, args.threads,
                            args.h_star, args.k_star, args.alpha, args.data, args.target, args.dataset_mode,
                            args.day_offset)
    return run_refine(instance, out, args.rounds, args.csv)


def _fail(command: str, out: Path, e: BaseException) -> int:
    """Report a failed command on stderr and in error.json; exit code 2."""
    err: Dict[str, Any] = {"error": type(e).__name__, "message": str(e), "command": command}
    lines = getattr(e, "lines", None)
    if lines:
        err["lines"] = lines
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    try:
        write_json(ensure_dir(out) / "error.json", err)
    except OSError:
        logger.exception("Could not write error.json to %s", out)
    return 2


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format=LOG_FORMAT)
    out = args.out or Path("results") / args.command
    arguments = {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items())}
    config = getattr(args, "config", None)
    manifest = RunManifest(args.command, None if config is None else str(config), getattr(args, "seed", None),
                           arguments)
    try:
        with timer(not args.no_timing) as t:
            written = _dispatch(args, out)
    except StorageBidError as e:
        return _fail(args.command, out, e)
    except Exception as e:
        logger.exception("%s failed", args.command)
        return _fail(args.command, out, e)
    manifest.wall_clock_sec = t()
    manifest.outputs = _rel(out, written)
    manifest.write(out)
    logger.info("Wrote %d file(s) to %s", len(written) + 1, out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
