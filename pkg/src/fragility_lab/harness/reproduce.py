"""File outputs for the named synthetic experiments.

Each name maps to a default :class:`ExperimentConfig`. Fresh numbers are
written next to the reported ones from :mod:`.reference`; the reported
values never enter a computation.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import NamedTuple, Optional

from ..exceptions import DomainError
from . import reference
from .experiments import ExperimentConfig, ExperimentResult, run_experiment
from .svg import line_chart

NAMES = ("table1", "table2", "fig2", "table3", "table4")


def default_config(name: str, **overrides) -> ExperimentConfig:
    base = {
        "table1": {"experiment": "table1", "d": 12, "target_valid": 10},
        "table2": {"experiment": "table2", "d": 12, "target_valid": 20},
        "fig2": {"experiment": "fig2_trend", "d": None, "d_list": reference.FIG2_D_LIST, "target_valid": 10},
        "table3": {"experiment": "table3_rho", "d": 12, "target_valid": 20, "activation": "relu"},
        "table4": {"experiment": "table4_perturb", "d": 17, "target_valid": 1},
    }
    if name not in base:
        raise DomainError(f"unknown experiment name {name!r}; expected one of {NAMES}")
    params = dict(base[name])
    params.update(overrides)
    return ExperimentConfig.from_dict(params)


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "%.6f" % value
    return str(value)


def to_csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _table1(result: ExperimentResult):
    ref = reference.TABLE1
    valid = [r for r in result.table.rows if r["valid"]]
    n = max(len(valid), len(ref["phi"]))
    rows = []
    for k in range(n):
        row = {"experiment": k + 1}
        if k < len(valid):
            row.update({c: valid[k][c] for c in ("cos_theta1", "cos_theta2", "phi")})
        if k < len(ref["phi"]):
            row.update(
                reported_cos_theta1=ref["cos_theta1"][k], reported_cos_theta2=ref["cos_theta2"][k], reported_phi=ref["phi"][k]
            )
        rows.append(row)
    cols = ("experiment", "cos_theta1", "cos_theta2", "phi", "reported_cos_theta1", "reported_cos_theta2", "reported_phi")
    return cols, rows


def _table2(result: ExperimentResult):
    ref = reference.TABLE2
    agg = result.table.aggregates[0]
    pairs = [
        ("avg_abs_cos_theta1", ref["avg_abs_cos_theta1"]),
        ("avg_phi", ref["avg_phi"]),
        ("avg_abs_gap", ref["avg_abs_gap"]),
        ("abs_avg_gap", None),
        ("avg_abs_cos_theta2", None),
        ("n_runs", ref["runs"]),
        ("n_valid", ref["valid_runs"]),
        ("n_filtered", ref["filtered_runs"]),
        ("valid_avg_abs_cos_theta1", None),
        ("valid_avg_phi", None),
        ("valid_abs_avg_gap", None),
    ]
    rows = [{"statistic": key, "fresh": agg[key], "reported": reported} for key, reported in pairs]
    return ("statistic", "fresh", "reported"), rows


def _fig2(result: ExperimentResult):
    cols = (
        "d", "n_valid", "valid_avg_phi", "valid_avg_abs_cos_theta1", "valid_abs_avg_gap",
        "n_filtered", "avg_phi", "avg_abs_cos_theta1", "abs_avg_gap",
    )
    return cols, result.table.aggregates


def _table3(result: ExperimentResult):
    ref = reference.TABLE3
    aggs = result.table.aggregates
    rows = []
    for k in range(max(len(aggs), len(ref["alpha"]))):
        row = {}
        if k < len(aggs):
            row.update(alpha=aggs[k]["alpha"], count=aggs[k]["count"], mean=aggs[k]["mean"], median=aggs[k]["median"])
        if k < len(ref["alpha"]):
            row.update(reported_alpha=ref["alpha"][k], reported_mean=ref["mean"][k], reported_median=ref["median"][k])
        rows.append(row)
    return ("alpha", "count", "mean", "median", "reported_alpha", "reported_mean", "reported_median"), rows


def _table4(result: ExperimentResult):
    ref = reference.TABLE4["rows"]
    keys = ("cos_theta_t", "delta", "m", "delta_over_m")
    rows = []
    for agg in result.table.aggregates:
        row = {"input": agg["group"], "count": agg["count"], "abs_cos_theta_t": agg["abs_cos_theta_t"]}
        row.update({k: agg[k] for k in keys})
        row.update({f"reported_{k}": ref.get(agg["group"], {}).get(k) for k in keys})
        rows.append(row)
    cols = ("input", "count", *keys, "abs_cos_theta_t", *(f"reported_{k}" for k in keys))
    return cols, rows


_LAYOUTS = {"table1": _table1, "table2": _table2, "fig2": _fig2, "table3": _table3, "table4": _table4}


class ReproduceOutput(NamedTuple):
    result: ExperimentResult
    files: dict


def fig2_svg(result: ExperimentResult) -> str:
    aggs = [a for a in result.table.aggregates if a["valid_avg_phi"] is not None]
    ds = [a["d"] for a in aggs]
    return line_chart(
        {
            "avg phi": (ds, [a["valid_avg_phi"] for a in aggs]),
            "avg |cos theta1|": (ds, [a["valid_avg_abs_cos_theta1"] for a in aggs]),
        },
        title="Predicted vs measured compression",
        xlabel="input dimension d",
        ylabel="ratio",
    )


def reproduce(name: str, out_dir, config: Optional[ExperimentConfig] = None) -> ReproduceOutput:
    """Run ``name`` and write ``<name>.csv``, ``<name>_runs.csv`` and ``<name>_records.json``.

    ``fig2`` also writes ``fig2.svg``. All CSV files are deterministic given
    the config; wall-clock times only appear in the JSON records.
    """
    if name not in NAMES:
        raise DomainError(f"unknown experiment name {name!r}; expected one of {NAMES}")
    config = config or default_config(name)
    result = run_experiment(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cols, rows = _LAYOUTS[name](result)
    files = {
        "table": out / f"{name}.csv",
        "runs": out / f"{name}_runs.csv",
        "records": out / f"{name}_records.json",
    }
    files["table"].write_text(to_csv(cols, rows), encoding="utf-8")
    files["runs"].write_text(to_csv(result.table.row_columns, result.table.rows), encoding="utf-8")
    payload = {
        "name": name,
        "complete": result.complete,
        "config": config.to_dict(),
        "summary": result.table.to_dict(),
        "records": [r.to_dict() for r in result.records],
    }
    files["records"].write_text(json.dumps(payload, indent=1), encoding="utf-8")
    if name == "fig2":
        files["svg"] = out / "fig2.svg"
        files["svg"].write_text(fig2_svg(result), encoding="utf-8")
    return ReproduceOutput(result, files)
