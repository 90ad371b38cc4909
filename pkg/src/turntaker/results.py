"""Versioned persistence of fits, evaluations, coverage reports and rankings.

JSON files carry a top-level ``schema_version`` and ``kind``.  CSV files start
with one comment line ``# turntaker <json header>`` holding the same fields
plus any scalar metadata, followed by an ordinary table, so both formats load
back through :func:`load_results`.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any

from .fitter import FitResult, ModelVariant, SplitComparison, SplitEvaluation
from .model import Roster, TeamParams
from .patterns import CoverageComparison, CoverageReport, CoverageVerdict
from .stats import ModelRanking, RankingRow

__all__ = [
    "SCHEMA_VERSION",
    "SchemaError",
    "to_dict",
    "from_dict",
    "dumps",
    "loads",
    "save_results",
    "load_results",
]

SCHEMA_VERSION = 1
_CSV_MARK = "# turntaker "


class SchemaError(ValueError):
    pass


def _team(t: TeamParams) -> dict:
    return {
        "members": list(t.roster.members),
        "pi": [float(x) for x in t.pi],
        "d": [float(x) for x in t.d],
        "normalized": t.normalized,
    }


def _team_back(o: dict) -> TeamParams:
    return TeamParams.from_arrays(Roster(o["members"]), o["pi"], o["d"], normalize=o.get("normalized", True))


def _split(e: SplitEvaluation) -> dict:
    return {
        "train_ll": e.train_ll,
        "test_ll": e.test_ll,
        "variant": e.variant.value,
        "split_fraction": e.split_fraction,
        "n_train": e.n_train,
        "n_test": e.n_test,
    }


def _split_back(o: dict) -> SplitEvaluation:
    return SplitEvaluation(
        float(o["train_ll"]),
        float(o["test_ll"]),
        ModelVariant(o["variant"]),
        float(o["split_fraction"]),
        int(o["n_train"]),
        int(o["n_test"]),
    )


def _coverage(r: CoverageReport) -> dict:
    return {
        "level": r.level,
        "replications": r.replications,
        "variant": r.variant,
        "verdicts": [
            {
                "statistic": v.statistic,
                "subject": v.subject,
                "observed": v.observed,
                "ci_low": v.ci_low,
                "ci_high": v.ci_high,
                "covered": v.covered,
            }
            for v in r.verdicts
        ],
    }


def _coverage_back(o: dict) -> CoverageReport:
    verdicts = tuple(
        CoverageVerdict(
            v["statistic"],
            v["subject"],
            float(v["observed"]),
            float(v["ci_low"]),
            float(v["ci_high"]),
            bool(v["covered"]),
        )
        for v in o["verdicts"]
    )
    return CoverageReport(verdicts, float(o["level"]), int(o["replications"]), o.get("variant", ""))


def _ranking(r: ModelRanking) -> dict:
    return {
        "target": r.target,
        "n": r.n,
        "extras": dict(r.extras),
        "rows": [
            {
                "name": x.name,
                "k": x.k,
                "log_likelihood": x.log_likelihood,
                "aicc": x.aicc,
                "delta": x.delta,
                "weight": x.weight,
                "top": x.top,
            }
            for x in r.rows
        ],
    }


def _ranking_back(o: dict) -> ModelRanking:
    rows = tuple(
        RankingRow(
            x["name"],
            int(x["k"]),
            float(x["log_likelihood"]),
            float(x["aicc"]),
            float(x["delta"]),
            float(x["weight"]),
            bool(x["top"]),
        )
        for x in o["rows"]
    )
    return ModelRanking(rows, int(o["n"]), o.get("target", ""), {k: float(v) for k, v in o.get("extras", {}).items()})


def to_dict(payload: Any) -> dict:
    """Serialisable form with ``schema_version`` and ``kind``."""
    if isinstance(payload, TeamParams):
        kind, body = "team_params", _team(payload)
    elif isinstance(payload, FitResult):
        kind = "fit_result"
        body = {
            "team": _team(payload.team),
            "variant": payload.variant.value,
            "log_likelihood": payload.log_likelihood,
            "converged": payload.converged,
            "n_restarts_used": payload.n_restarts_used,
            "k": payload.k,
            "n_turns": payload.n_turns,
            "warnings": list(payload.warnings),
        }
    elif isinstance(payload, SplitEvaluation):
        kind, body = "split_evaluation", _split(payload)
    elif isinstance(payload, (list, tuple)) and payload and all(isinstance(p, SplitComparison) for p in payload):
        kind = "split_table"
        body = {
            "rows": [
                {"dataset": p.dataset, "no_memory": _split(p.no_memory), "memory": _split(p.memory)}
                for p in payload
            ]
        }
    elif isinstance(payload, CoverageReport):
        kind, body = "coverage_report", _coverage(payload)
    elif isinstance(payload, CoverageComparison):
        kind = "coverage_comparison"
        body = {
            "reports": [_coverage(r) for r in payload.reports],
            "chi_squared": {
                k: (None if v is None else list(v)) for k, v in payload.chi_squared.items()
            },
        }
    elif isinstance(payload, ModelRanking):
        kind, body = "model_ranking", _ranking(payload)
    elif isinstance(payload, (list, tuple)) and payload and all(isinstance(p, ModelRanking) for p in payload):
        kind, body = "model_rankings", {"rankings": [_ranking(r) for r in payload]}
    else:
        raise TypeError(f"cannot serialise {type(payload).__name__}")
    return {"schema_version": SCHEMA_VERSION, "kind": kind, **body}


def from_dict(o: dict) -> Any:
    version = o.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    kind = o.get("kind")
    if kind == "team_params":
        return _team_back(o)
    if kind == "fit_result":
        return FitResult(
            team=_team_back(o["team"]),
            variant=ModelVariant(o["variant"]),
            log_likelihood=float(o["log_likelihood"]),
            converged=bool(o["converged"]),
            n_restarts_used=int(o["n_restarts_used"]),
            k=int(o["k"]),
            n_turns=int(o.get("n_turns", 0)),
            warnings=tuple(o.get("warnings", ())),
        )
    if kind == "split_evaluation":
        return _split_back(o)
    if kind == "split_table":
        return [
            SplitComparison(r["dataset"], _split_back(r["no_memory"]), _split_back(r["memory"]))
            for r in o["rows"]
        ]
    if kind == "coverage_report":
        return _coverage_back(o)
    if kind == "coverage_comparison":
        return CoverageComparison(
            tuple(_coverage_back(r) for r in o["reports"]),
            {k: (None if v is None else (float(v[0]), float(v[1]))) for k, v in o["chi_squared"].items()},
        )
    if kind == "model_ranking":
        return _ranking_back(o)
    if kind == "model_rankings":
        return [_ranking_back(r) for r in o["rankings"]]
    raise SchemaError(f"unknown result kind {kind!r}")


def dumps(payload: Any, fmt: str = "json") -> str:
    if fmt == "csv":
        return _to_csv(payload)
    if fmt != "json":
        raise ValueError(f"unknown format {fmt!r}")
    # repr-based float output is the shortest string that round-trips exactly
    return json.dumps(to_dict(payload), indent=2, sort_keys=True) + "\n"


def loads(text: str) -> Any:
    if text.startswith(_CSV_MARK):
        return _from_csv(text)
    return from_dict(json.loads(text))


# ---------------------------------------------------------------- CSV tables


def _num(x) -> str:
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _csv_tables(o: dict) -> tuple[dict, list[str], list[list]]:
    kind = o["kind"]
    meta = dict(o)
    if kind in ("team_params", "fit_result"):
        team = o["team"] if kind == "fit_result" else o
        rows = [[m, p, d] for m, p, d in zip(team["members"], team["pi"], team["d"])]
        if kind == "fit_result":
            meta["team"] = {"normalized": team["normalized"]}
        else:
            meta = {k: v for k, v in o.items() if k not in ("members", "pi", "d")}
        return meta, ["member", "pi", "d"], rows
    if kind == "split_evaluation":
        cols = ["variant", "train_ll", "test_ll", "split_fraction", "n_train", "n_test"]
        return {k: o[k] for k in ("schema_version", "kind")}, cols, [[o[c] for c in cols]]
    if kind == "split_table":
        cols = [
            "dataset", "no_memory", "memory", "train_no_memory", "train_memory",
            "split_fraction", "n_train", "n_test",
        ]
        rows = [
            [
                r["dataset"], r["no_memory"]["test_ll"], r["memory"]["test_ll"],
                r["no_memory"]["train_ll"], r["memory"]["train_ll"],
                r["memory"]["split_fraction"], r["memory"]["n_train"], r["memory"]["n_test"],
            ]
            for r in o["rows"]
        ]
        return {k: o[k] for k in ("schema_version", "kind")}, cols, rows
    if kind in ("coverage_report", "coverage_comparison"):
        reports = [o] if kind == "coverage_report" else o["reports"]
        cols = ["variant", "statistic", "subject", "observed", "ci_low", "ci_high", "covered"]
        rows = [
            [r["variant"]] + [v[c] for c in cols[1:]] for r in reports for v in r["verdicts"]
        ]
        meta = {k: o[k] for k in ("schema_version", "kind")}
        meta["reports"] = [
            {k: r[k] for k in ("level", "replications", "variant")} for r in reports
        ]
        if kind == "coverage_comparison":
            meta["chi_squared"] = o["chi_squared"]
        return meta, cols, rows
    if kind in ("model_ranking", "model_rankings"):
        rankings = [o] if kind == "model_ranking" else o["rankings"]
        cols = ["target", "name", "k", "log_likelihood", "aicc", "delta", "weight", "top"]
        rows = [[r["target"]] + [x[c] for c in cols[1:]] for r in rankings for x in r["rows"]]
        meta = {k: o[k] for k in ("schema_version", "kind")}
        meta["rankings"] = [{k: r[k] for k in ("target", "n", "extras")} for r in rankings]
        return meta, cols, rows
    raise SchemaError(f"no CSV layout for {kind!r}")


def _to_csv(payload: Any) -> str:
    meta, cols, rows = _csv_tables(to_dict(payload))
    buf = io.StringIO()
    buf.write(_CSV_MARK + json.dumps(meta, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in rows:
        w.writerow([_num(x) for x in row])
    return buf.getvalue()


def _parse_cell(col: str, value: str):
    if col in ("variant", "statistic", "subject", "dataset", "target", "name", "member"):
        return value
    if col in ("covered", "top"):
        return value == "true"
    if col in ("k", "n_train", "n_test"):
        return int(value)
    return float(value)


def _from_csv(text: str) -> Any:
    head, _, body = text.partition("\n")
    meta = json.loads(head[len(_CSV_MARK):])
    if meta.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {meta.get('schema_version')!r}")
    reader = csv.DictReader(io.StringIO(body))
    rows = [{c: _parse_cell(c, v) for c, v in r.items()} for r in reader]
    kind = meta["kind"]
    o = dict(meta)
    if kind == "team_params":
        o.update(members=[r["member"] for r in rows], pi=[r["pi"] for r in rows], d=[r["d"] for r in rows])
    elif kind == "fit_result":
        o["team"] = {
            "members": [r["member"] for r in rows],
            "pi": [r["pi"] for r in rows],
            "d": [r["d"] for r in rows],
            "normalized": meta["team"]["normalized"],
        }
    elif kind == "split_evaluation":
        o.update(rows[0])
    elif kind == "split_table":
        o["rows"] = [
            {
                "dataset": r["dataset"],
                "no_memory": {
                    "train_ll": r["train_no_memory"], "test_ll": r["no_memory"], "variant": "reduced",
                    "split_fraction": r["split_fraction"], "n_train": r["n_train"], "n_test": r["n_test"],
                },
                "memory": {
                    "train_ll": r["train_memory"], "test_ll": r["memory"], "variant": "full",
                    "split_fraction": r["split_fraction"], "n_train": r["n_train"], "n_test": r["n_test"],
                },
            }
            for r in rows
        ]
    elif kind in ("coverage_report", "coverage_comparison"):
        reports = []
        for rep in meta["reports"]:
            verdicts = [
                {k: v for k, v in r.items() if k != "variant"} for r in rows if r["variant"] == rep["variant"]
            ]
            reports.append({**rep, "verdicts": verdicts})
        if kind == "coverage_report":
            o.pop("reports")
            o.update(reports[0])
        else:
            o["reports"] = reports
    elif kind in ("model_ranking", "model_rankings"):
        rankings = []
        for rk in meta["rankings"]:
            rrows = [{k: v for k, v in r.items() if k != "target"} for r in rows if r["target"] == rk["target"]]
            rankings.append({**rk, "rows": rrows})
        if kind == "model_ranking":
            o.update(rankings[0])
            o.pop("rankings")
        else:
            o["rankings"] = rankings
    return from_dict(o)


def save_results(path: str | Path, payload: Any, fmt: str | None = None) -> Path:
    """Write ``payload`` as JSON (default) or CSV (``fmt='csv'`` or a .csv path)."""
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "json")
    text = dumps(payload, fmt)
    path.write_text(text, encoding="utf-8")
    return path


def load_results(path: str | Path) -> Any:
    return loads(Path(path).read_text(encoding="utf-8"))
