"""Seeded experiment runs and their aggregation.

Every run is a pure function of ``(config, d, run index)``: the run seed is
``child_seed(child_seed(master, d), index)`` and the data, initialization
and attack streams are children of that. Runs can therefore execute in a
process pool and still be merged in index order.
"""

from __future__ import annotations

import dataclasses
import math
import statistics
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from ..analysis import (
    CompressionReport,
    analyze_linear,
    cosine,
    compression_fraction,
    d_change,
    path_integral_m,
    path_profile,
)
from ..attacks import iterative_gradient_attack, thm5_attack
from ..datagen import boundary_pair, gen_hypercube, make_path
from ..exceptions import DegenerateError, DivergenceError, DomainError
from ..models import MLPClassifier, TrainConfig, TrainReport, ideal_hypercube_net
from ..rmt import child_seed, make_rng

EXPERIMENTS = ("table1", "table2", "fig2_trend", "table3_rho", "table4_perturb", "custom")
MEASURES = ("compression", "rho", "perturb")

_MEASURE_OF = {
    "table1": "compression",
    "table2": "compression",
    "fig2_trend": "compression",
    "table3_rho": "rho",
    "table4_perturb": "perturb",
}


class ShortfallWarning(UserWarning):
    """Fewer valid runs than requested were found within the seed budget."""


@dataclass
class ExperimentConfig:
    """Parameters of one experiment.

    ``seeds`` lists explicit run seeds; otherwise ``seed_count`` run seeds
    are derived from ``seed``. Runs stop early once ``target_valid`` valid
    runs (training accuracy 1) are collected for each dimension.
    """

    experiment: str = "table2"
    d: Optional[int] = 12
    d_list: Optional[list] = None
    seed: int = 0
    seed_count: int = 200
    seeds: Optional[list] = None
    target_valid: int = 20
    hidden_width: int = 256
    activation: str = "identity"
    train: TrainConfig = field(default_factory=TrainConfig)
    column_scale: float = 5.0
    sample_count: Optional[int] = None
    t: int = 1
    n_alpha: int = 10
    cos2_filter: float = 0.9
    points_per_class: int = 10
    model: str = "ideal"
    measure: Optional[str] = None
    workers: int = 1
    output_dir: Optional[str] = None

    def __post_init__(self):
        if isinstance(self.train, dict):
            self.train = TrainConfig.from_dict(self.train)
        if self.experiment not in EXPERIMENTS:
            raise DomainError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if self.seeds is not None:
            self.seeds = [int(s) for s in self.seeds]
            if not self.seeds:
                raise DomainError("seed list is empty")
            if min(self.seeds) < 0:
                raise DomainError("seeds must be nonnegative")
        elif self.seed_count < 1:
            raise DomainError("seed_count must be at least 1")
        if self.d_list is not None:
            self.d_list = [int(v) for v in self.d_list]
            if not self.d_list:
                raise DomainError("d_list is empty")
        elif self.d is None:
            raise DomainError("either d or d_list is required")
        if min(self.dims) < 2:
            raise DomainError("every d must be at least 2")
        if self.target_valid < 1:
            raise DomainError("target_valid must be at least 1")
        if self.n_alpha < 2:
            raise DomainError("n_alpha must be at least 2")
        if self.workers < 1:
            raise DomainError("workers must be at least 1")
        if self.model not in ("ideal", "relu"):
            raise DomainError("model must be 'ideal' or 'relu'")
        if self.measure is not None and self.measure not in MEASURES:
            raise DomainError(f"measure must be one of {MEASURES}")

    @property
    def dims(self) -> list:
        return list(self.d_list) if self.d_list is not None else [int(self.d)]

    @property
    def budget(self) -> int:
        return len(self.seeds) if self.seeds is not None else int(self.seed_count)

    @property
    def kind(self) -> str:
        if self.measure is not None:
            return self.measure
        if self.experiment == "custom":
            return "rho" if self.activation == "relu" else "compression"
        return _MEASURE_OF[self.experiment]

    def run_seed(self, d: int, index: int) -> int:
        if self.seeds is not None:
            return self.seeds[index]
        return child_seed(child_seed(self.seed, d), index)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["train"] = self.train.to_dict()
        return out

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(payload) - names
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
        return cls(**payload)


@dataclass
class RunRecord:
    config: dict
    d: int
    run_index: int
    seed: int
    train_report: Optional[TrainReport]
    report: Optional[CompressionReport]
    attacks: list = field(default_factory=list)
    wall_seconds: float = 0.0
    error: Optional[str] = None
    vectors: dict = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return self.error is None and self.train_report is not None and self.train_report.valid

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "d": self.d,
            "run_index": self.run_index,
            "seed": self.seed,
            "valid": self.valid,
            "train_report": None if self.train_report is None else self.train_report.to_dict(),
            "report": None if self.report is None else self.report.to_dict(),
            "attacks": [a.to_dict() for a in self.attacks],
            "wall_seconds": self.wall_seconds,
            "error": self.error,
            "vectors": {k: np.asarray(v).tolist() for k, v in self.vectors.items()},
        }


@dataclass
class SummaryTable:
    """Per-run rows plus aggregate rows computed from them alone."""

    kind: str
    rows: list
    aggregates: list
    cos2_filter: float = 0.9

    @property
    def row_columns(self) -> tuple:
        return ROW_COLUMNS[self.kind]

    @property
    def aggregate_columns(self) -> tuple:
        return AGGREGATE_COLUMNS[self.kind]

    def recompute(self) -> list:
        return aggregate_rows(self.kind, self.rows, self.cos2_filter)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "cos2_filter": self.cos2_filter, "rows": self.rows, "aggregates": self.aggregates}


class ExperimentResult(NamedTuple):
    table: SummaryTable
    records: list
    complete: bool


ROW_COLUMNS = {
    "compression": ("seed", "d", "valid", "cos_theta1", "cos_theta2", "phi", "abs_gap"),
    "rho": ("seed", "d", "valid", "alpha", "rho"),
    "perturb": ("seed", "d", "group", "index", "cos_theta_t", "delta", "m", "delta_over_m"),
}

AGGREGATE_COLUMNS = {
    "compression": (
        "d", "n_runs", "n_valid", "n_filtered",
        "avg_abs_cos_theta1", "avg_phi", "avg_abs_gap", "abs_avg_gap",
        "median_abs_cos_theta1", "median_phi", "avg_abs_cos_theta2",
        "valid_avg_abs_cos_theta1", "valid_avg_phi", "valid_abs_avg_gap",
    ),
    "rho": ("d", "alpha", "count", "mean", "median"),
    "perturb": ("d", "group", "count", "cos_theta_t", "abs_cos_theta_t", "delta", "m", "delta_over_m"),
}


# -- single runs ----------------------------------------------------------


def _train_hypercube_net(config: ExperimentConfig, d: int, seed: int):
    data = gen_hypercube(
        make_rng(child_seed(seed, 0)), d, sample_count=config.sample_count, column_scale=config.column_scale
    )
    tc = config.train
    model = MLPClassifier(
        hidden_layer_sizes=(config.hidden_width,),
        activation=config.activation,
        epochs=tc.epochs,
        learning_rate=tc.learning_rate,
        batch_size=tc.batch_size,
        beta_1=tc.adam_betas[0],
        beta_2=tc.adam_betas[1],
        epsilon=tc.adam_eps,
        loss=tc.loss,
        random_state=child_seed(seed, 1),
    )
    model.fit(data.inputs, data.labels)
    return data, model


def _compression_run(config, d, seed):
    data, model = _train_hypercube_net(config, d, seed)
    meta = {"seed": seed, "valid": model.train_report_.valid}
    report = analyze_linear(model, data, **meta)
    attacks = [thm5_attack(data, model, 0)] if model.train_report_.valid else []
    w = model.effective_weight()
    a = data.generator.a_matrix
    vectors = {
        "w_diff": w[0] - w[1],
        "w0": w[0],
        "a_last_column": a[:, -1],
        "a_inverse_last_row": np.linalg.solve(a.T, np.eye(d)[-1]),
    }
    return model.train_report_, report, attacks, vectors


def _rho_run(config, d, seed):
    data, model = _train_hypercube_net(config, d, seed)
    trained = model.train_report_
    meta = {"seed": seed, "d": d, "valid": trained.valid}
    if not trained.valid:
        return trained, CompressionReport(run_metadata=meta), [], {}
    b1, b2 = boundary_pair(make_rng(child_seed(seed, 2)), data)
    path = make_path(b2, b1, config.n_alpha)
    profile = path_profile(model, path, (0, 1))
    rhos = [abs(p.cos_theta) for p in profile if not p.vanished]
    start = profile[0]
    m_signed = None if start.vanished else path_integral_m(profile, start.grad_norm, path.length)
    report = CompressionReport(
        phi=compression_fraction(data.generator.a_matrix),
        rho=math.fsum(rhos) / len(rhos) if rhos else None,
        path_profile=profile,
        m_signed=m_signed,
        d_change=d_change(model, b2, b1, (0, 1)),
        run_metadata=meta,
    )
    return trained, report, [], {"b1": b1, "b2": b2}


def _perturb_run(config, d, seed):
    data = gen_hypercube(
        make_rng(child_seed(seed, 0)), d, sample_count=config.sample_count, column_scale=config.column_scale
    )
    if config.model == "ideal":
        model = ideal_hypercube_net(data)
        trained = TrainReport(float(np.mean(model.predict(data.inputs) == data.labels)), [])
    else:
        _, model = _train_hypercube_net(config, d, seed)
        trained = model.train_report_
    a_last = data.generator.a_matrix[:, -1]
    m = float(np.linalg.norm(a_last))
    meta = {"seed": seed, "d": d, "valid": trained.valid, "model": config.model}
    report = CompressionReport(phi=compression_fraction(data.generator.a_matrix), run_metadata=meta)
    if not trained.valid:
        return trained, report, [], {}
    rng = make_rng(child_seed(seed, 3))
    attacks = []
    for label in (0, 1):
        pool = np.flatnonzero(data.labels == label)
        picks = rng.choice(pool, size=min(config.points_per_class, pool.size), replace=False)
        for index in picks:
            b = data.inputs[index]
            outcome = iterative_gradient_attack(model, b, source=label, target=1 - label)
            grad = model.input_gradient(b + outcome.perturbation, 0, 1)
            outcome.details.update(
                group=f"b{label + 1}",
                index=int(index),
                cos_theta_t=cosine(grad, a_last),
                m=m,
            )
            attacks.append(outcome)
    return trained, report, attacks, {"a_last_column": a_last}


_RUNNERS = {"compression": _compression_run, "rho": _rho_run, "perturb": _perturb_run}


def execute_run(config: ExperimentConfig, d: int, run_index: int) -> RunRecord:
    """One run, reproducible from ``(config, d, run_index)`` alone."""
    seed = config.run_seed(d, run_index)
    began = time.perf_counter()
    try:
        trained, report, attacks, vectors = _RUNNERS[config.kind](config, d, seed)
        error = None
    except (DivergenceError, DegenerateError) as exc:
        trained, report, attacks, vectors = None, None, [], {}
        error = f"{type(exc).__name__}: {exc}"
    if report is not None:
        report.run_metadata.setdefault("d", d)
    return RunRecord(
        config.to_dict(), d, run_index, seed, trained, report, attacks, time.perf_counter() - began, error, vectors
    )


def _execute_payload(payload):
    config_dict, d, index = payload
    return execute_run(ExperimentConfig.from_dict(config_dict), d, index)


def _runs_for_dimension(config: ExperimentConfig, d: int, pool):
    target = 1 if config.kind == "perturb" and config.model == "ideal" else config.target_valid
    records, n_valid, index = [], 0, 0
    chunk = config.workers
    while n_valid < target and index < config.budget:
        batch = range(index, min(index + chunk, config.budget))
        if pool is None:
            results = [execute_run(config, d, k) for k in batch]
        else:
            payload = config.to_dict()
            results = list(pool.map(_execute_payload, [(payload, d, k) for k in batch]))
        for rec in results:
            records.append(rec)
            n_valid += rec.valid
            if n_valid >= target:
                break
        index = batch.stop
    return records, n_valid >= target


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run seeds in index order until enough valid runs exist for every ``d``.

    A shortfall is reported through ``complete=False`` and a
    :class:`ShortfallWarning`; the partial records are still summarized.
    """
    records, complete = [], True
    pool = ProcessPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
    try:
        for d in config.dims:
            recs, ok = _runs_for_dimension(config, d, pool)
            records.extend(recs)
            if not ok:
                complete = False
                warnings.warn(
                    f"d={d}: only {sum(r.valid for r in recs)} valid runs within {config.budget} seeds",
                    ShortfallWarning,
                    stacklevel=2,
                )
    finally:
        if pool is not None:
            pool.shutdown()
    return ExperimentResult(summarize(records, config.cos2_filter), records, complete)


# -- aggregation ----------------------------------------------------------


def _mean(values):
    values = list(values)
    return math.fsum(values) / len(values) if values else None


def _median(values):
    values = list(values)
    return float(statistics.median(values)) if values else None


def _record_kind(record: RunRecord) -> str:
    kind = record.config.get("measure")
    if kind:
        return kind
    experiment = record.config.get("experiment")
    if experiment == "custom":
        return "rho" if record.config.get("activation") == "relu" else "compression"
    return _MEASURE_OF[experiment]


def _rows(kind: str, record: RunRecord) -> list:
    rep = record.report
    if kind == "compression":
        if rep is None:
            return [{"seed": record.seed, "d": record.d, "valid": False, "cos_theta1": None,
                     "cos_theta2": None, "phi": None, "abs_gap": None}]
        return [{"seed": record.seed, "d": record.d, "valid": record.valid, "cos_theta1": rep.cos_theta1,
                 "cos_theta2": rep.cos_theta2, "phi": rep.phi, "abs_gap": rep.abs_gap}]
    if kind == "rho":
        if not record.valid or rep is None or not rep.path_profile:
            return [{"seed": record.seed, "d": record.d, "valid": False, "alpha": None, "rho": None}]
        return [
            {"seed": record.seed, "d": record.d, "valid": True, "alpha": p.alpha,
             "rho": None if p.vanished else abs(p.cos_theta)}
            for p in rep.path_profile
        ]
    rows = []
    for att in record.attacks:
        det = att.details
        rows.append({
            "seed": record.seed, "d": record.d, "group": det["group"], "index": det["index"],
            "cos_theta_t": det["cos_theta_t"], "delta": att.norm, "m": det["m"],
            "delta_over_m": att.norm / det["m"],
        })
    return rows


def aggregate_rows(kind: str, rows: list, cos2_filter: float = 0.9) -> list:
    """Aggregate rows of one kind. Depends only on the rows, not their order."""
    if kind == "compression":
        out = []
        for d in sorted({r["d"] for r in rows}):
            mine = [r for r in rows if r["d"] == d]
            valid = [r for r in mine if r["valid"]]
            kept = [r for r in valid if abs(r["cos_theta2"]) > cos2_filter]
            c1 = [abs(r["cos_theta1"]) for r in kept]
            phi = [r["phi"] for r in kept]
            vc1 = [abs(r["cos_theta1"]) for r in valid]
            vphi = [r["phi"] for r in valid]
            avg_c1, avg_phi = _mean(c1), _mean(phi)
            v_c1, v_phi = _mean(vc1), _mean(vphi)
            out.append({
                "d": d,
                "n_runs": len(mine),
                "n_valid": len(valid),
                "n_filtered": len(kept),
                "avg_abs_cos_theta1": avg_c1,
                "avg_phi": avg_phi,
                "avg_abs_gap": _mean(r["abs_gap"] for r in kept),
                "abs_avg_gap": None if avg_c1 is None else abs(avg_c1 - avg_phi),
                "median_abs_cos_theta1": _median(c1),
                "median_phi": _median(phi),
                "avg_abs_cos_theta2": _mean(abs(r["cos_theta2"]) for r in kept),
                "valid_avg_abs_cos_theta1": v_c1,
                "valid_avg_phi": v_phi,
                "valid_abs_avg_gap": None if v_c1 is None else abs(v_c1 - v_phi),
            })
        return out
    if kind == "rho":
        out = []
        usable = [r for r in rows if r["valid"] and r["rho"] is not None]
        for d in sorted({r["d"] for r in usable}):
            for alpha in sorted({r["alpha"] for r in usable if r["d"] == d}):
                vals = [r["rho"] for r in usable if r["d"] == d and r["alpha"] == alpha]
                out.append({"d": d, "alpha": alpha, "count": len(vals), "mean": _mean(vals), "median": _median(vals)})
        return out
    if kind == "perturb":
        out = []
        for d in sorted({r["d"] for r in rows}):
            for group in sorted({r["group"] for r in rows if r["d"] == d}):
                mine = [r for r in rows if r["d"] == d and r["group"] == group]
                out.append({
                    "d": d,
                    "group": group,
                    "count": len(mine),
                    "cos_theta_t": _mean(r["cos_theta_t"] for r in mine),
                    "abs_cos_theta_t": _mean(abs(r["cos_theta_t"]) for r in mine),
                    "delta": _mean(r["delta"] for r in mine),
                    "m": _mean(r["m"] for r in mine),
                    "delta_over_m": _mean(r["delta_over_m"] for r in mine),
                })
        return out
    raise DomainError(f"unknown summary kind {kind!r}")


def summarize(records, cos2_filter: float = 0.9) -> SummaryTable:
    """Rows for every record and per-``d`` aggregates over the valid ones.

    Compression aggregates are taken over valid runs with
    ``|cos_theta2| > cos2_filter``; the ``valid_*`` columns repeat the
    averages without that filter.
    """
    records = list(records)
    if not records:
        raise DomainError("no records to summarize")
    kinds = {_record_kind(r) for r in records}
    if len(kinds) != 1:
        raise DomainError(f"records mix summary kinds: {sorted(kinds)}")
    kind = kinds.pop()
    rows = [row for rec in records for row in _rows(kind, rec)]
    return SummaryTable(kind, rows, aggregate_rows(kind, rows, cos2_filter), cos2_filter)
