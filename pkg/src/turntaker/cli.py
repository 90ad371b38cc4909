"""Command-line pipeline: simulate, fit, evaluate, patterns, traits.

Exit codes: 0 success, 1 internal error, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from . import results
from .fitter import FitError, FitOptions, FitResult, ModelVariant, compare_split, fit
from .ingest import Dataset, IngestError, load_dataset, parse_traits, write_annotations
from .model import ModelError, TeamParams
from .patterns import (
    CoverageComparison,
    PatternEnsemble,
    STATISTICS,
    coverage_report,
    pattern_report,
)
from .simulator import SimConfig, ensemble_array, replicate_ensemble
from .stats import StatsError, chi_squared_yates, rank_trait_models

logger = logging.getLogger("turntaker")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str
    seed: int = 0
    replications: int = 10_000
    turns: int | None = None
    split: float = 0.8
    level: float = 0.95
    variant: str = "full"
    out: str | None = None
    format: str = "json"


def _emit(payload, cfg: RunConfig) -> None:
    text = results.dumps(payload, cfg.format)
    if cfg.out:
        Path(cfg.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _read_params(path: str) -> TeamParams:
    payload = results.load_results(path)
    if isinstance(payload, FitResult):
        return payload.team
    if isinstance(payload, TeamParams):
        return payload
    raise UsageError(f"{path} holds neither team parameters nor a fit result")


def _fit_options(args) -> FitOptions:
    opts = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            opts = json.load(fh)
        known = {f.name for f in fields(FitOptions)}
        unknown = set(opts) - known
        if unknown:
            raise UsageError(f"unknown fit option(s) {sorted(unknown)} in {args.config}")
    for name in ("restarts", "tol", "max_iter"):
        value = getattr(args, name, None)
        if value is not None:
            opts[name] = value
    opts.setdefault("seed", args.seed)
    return FitOptions(**opts)


def _config(args) -> RunConfig:
    cfg = RunConfig(args.command)
    for f in fields(RunConfig):
        if f.name != "subcommand" and getattr(args, f.name, None) is not None:
            setattr(cfg, f.name, getattr(args, f.name))
    return cfg


def cmd_simulate(args) -> int:
    cfg = _config(args)
    if not cfg.turns or cfg.turns < 1:
        raise UsageError("--turns must be a positive integer")
    team = _read_params(args.params)
    config = SimConfig(cfg.turns, cfg.seed, replications=args.meetings)
    seqs = replicate_ensemble(team, config)
    buf = io.StringIO()
    write_annotations([(f"m{j + 1}", s) for j, s in enumerate(seqs)], buf)
    if cfg.out:
        Path(cfg.out).write_text(buf.getvalue(), encoding="utf-8")
    else:
        sys.stdout.write(buf.getvalue())
    return 0


def cmd_fit(args) -> int:
    cfg = _config(args)
    ds = load_dataset(args.data)
    res = fit(ds.sequences, ds.roster, ModelVariant(cfg.variant), _fit_options(args))
    for w in res.warnings:
        logger.warning(w)
    _emit(res, cfg)
    print(f"train log-likelihood: {res.log_likelihood:.6f}", file=sys.stderr if not cfg.out else sys.stdout)
    return 0


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    if not 0.0 < cfg.split < 1.0:
        raise UsageError("--split must lie strictly between 0 and 1")
    opts = _fit_options(args)
    rows = []
    for path in args.data:
        ds = load_dataset(path)
        rows.append(compare_split(ds.sequences, ds.roster, cfg.split, opts, dataset=Path(path).stem))
    _emit(rows, cfg)
    out = sys.stdout if cfg.out else sys.stderr
    print(f"{'dataset':<20} {'no memory':>14} {'memory':>14}", file=out)
    for r in rows:
        print(f"{r.dataset:<20} {r.no_memory.test_ll:>14.4f} {r.memory.test_ll:>14.4f}", file=out)
    return 0


def _fitted(ds: Dataset, path: str | None, variant: ModelVariant, opts: FitOptions) -> TeamParams:
    if path:
        team = _read_params(path)
        if team.roster != ds.roster:
            raise UsageError(f"roster in {path} does not match the dataset")
        return team
    return fit(ds.sequences, ds.roster, variant, opts).team


def cmd_patterns(args) -> int:
    cfg = _config(args)
    if cfg.replications < 1:
        raise UsageError("--replications must be positive")
    if not 0.0 < cfg.level < 1.0:
        raise UsageError("--level must lie strictly between 0 and 1")
    if cfg.replications == 1:
        logger.warning("one replication gives degenerate intervals")
    ds = load_dataset(args.data)
    opts = _fit_options(args)
    observed = pattern_report(ds.sequences, ds.roster)
    if cfg.turns:
        lengths = None
        turns = cfg.turns
    else:
        lengths = [len(s) for s in ds.sequences]
        turns = max(lengths)
    reports = []
    for variant, path in ((ModelVariant.FULL, args.full), (ModelVariant.REDUCED, args.reduced)):
        team = _fitted(ds, path, variant, opts)
        blocks = ensemble_array(team, SimConfig(turns, cfg.seed, cfg.replications), lengths)
        ens = PatternEnsemble.from_arrays(blocks, ds.roster)
        reports.append(coverage_report(observed, ens, cfg.level, variant.value))
    chi = {}
    for stat in STATISTICS:
        table = [list(r.counts(stat)) for r in reports]
        try:
            chi[stat] = chi_squared_yates(table)
        except StatsError:
            chi[stat] = None
    comparison = CoverageComparison(tuple(reports), chi)
    _emit(comparison, cfg)
    out = sys.stdout if cfg.out else sys.stderr
    for stat in STATISTICS:
        parts = [f"{r.variant} {r.counts(stat)[0]}/{sum(r.counts(stat))}" for r in reports]
        test = "" if chi[stat] is None else f"  chi2={chi[stat][0]:.2f} p={chi[stat][1]:.3g}"
        print(f"{stat:<9} " + "  ".join(parts) + test, file=out)
    return 0


def cmd_traits(args) -> int:
    cfg = _config(args)
    if len(args.fits) < 2:
        raise UsageError("need fit results for at least two teams")
    with open(args.traits, newline="", encoding="utf-8") as fh:
        records = parse_traits(fh)
    pi_values: dict[str, float] = {}
    d_values: dict[str, float] = {}
    for path in args.fits:
        payload = results.load_results(path)
        team = payload.team if isinstance(payload, FitResult) else payload
        if not isinstance(team, TeamParams):
            raise UsageError(f"{path} is not a fit result")
        for member, p in zip(team.roster.members, team.params):
            if member in pi_values:
                raise UsageError(f"member {member!r} appears in more than one fit")
            pi_values[member] = p.pi
            d_values[member] = p.d
    rankings = [
        rank_trait_models(records, pi_values, target="pi"),
        rank_trait_models(records, d_values, target="d"),
    ]
    _emit(rankings, cfg)
    out = sys.stdout if cfg.out else sys.stderr
    for rk in rankings:
        print(f"target {rk.target} (n={rk.n})", file=out)
        for r in rk.rows:
            flag = "*" if r.top else " "
            print(f" {flag} {r.name:<18} k={r.k} AICc={r.aicc:8.2f} delta={r.delta:6.2f} w={r.weight:.3f}", file=out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="turntaker", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        if seed:
            p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--format", choices=("json", "csv"), default="json")

    def fit_flags(p):
        p.add_argument("--config", help="JSON file with fit options (restarts, tol, max_iter, seed)")
        p.add_argument("--restarts", type=int)
        p.add_argument("--tol", type=float)
        p.add_argument("--max-iter", dest="max_iter", type=int)

    p = sub.add_parser("simulate", help="generate synthetic conversations as annotation rows")
    p.add_argument("--params", required=True, help="team_params or fit_result file")
    p.add_argument("--turns", type=int, required=True)
    p.add_argument("--meetings", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="maximum-likelihood fit of one team")
    p.add_argument("--data", required=True, help="annotation file")
    p.add_argument("--variant", choices=[v.value for v in ModelVariant], default="full")
    fit_flags(p)
    common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("evaluate", help="held-out log-likelihood, no-memory vs memory")
    p.add_argument("--data", required=True, nargs="+", help="annotation file(s), one per team")
    p.add_argument("--split", type=float, default=0.8)
    fit_flags(p)
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("patterns", help="coverage of observed pattern statistics by simulation")
    p.add_argument("--data", required=True, help="annotation file")
    p.add_argument("--full", help="fit result for the full model (fitted if omitted)")
    p.add_argument("--reduced", help="fit result for the reduced model (fitted if omitted)")
    p.add_argument("--replications", type=int, default=10_000)
    p.add_argument("--turns", type=int, help="simulate one conversation of this length per replication")
    p.add_argument("--level", type=float, default=0.95)
    fit_flags(p)
    common(p)
    p.set_defaults(func=cmd_patterns)

    p = sub.add_parser("traits", help="AICc ranking of trait models for fitted pi and d")
    p.add_argument("--fits", required=True, nargs="+", help="full-model fit results, one per team")
    p.add_argument("--traits", required=True, help="trait file")
    common(p, seed=False)
    p.set_defaults(func=cmd_traits)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (UsageError, IngestError, results.SchemaError, ModelError, FitError, StatsError,
            FileNotFoundError, IsADirectoryError, json.JSONDecodeError, ValueError) as exc:
        print(f"turntaker {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - last-resort guard
        logger.exception("internal error: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
