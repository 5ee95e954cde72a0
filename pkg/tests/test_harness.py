import json
import math
import random

import pytest

from fragility_lab.exceptions import DomainError
from fragility_lab.harness import (
    ExperimentConfig,
    ShortfallWarning,
    aggregate_rows,
    default_config,
    execute_run,
    reproduce,
    run_experiment,
    summarize,
    to_csv,
)
from fragility_lab.harness import reference
from fragility_lab.harness.svg import line_chart

FAST_TRAIN = {"epochs": 60, "learning_rate": 1e-2}


def small(**kw):
    params = {"experiment": "fig2_trend", "d": None, "d_list": [5, 6], "target_valid": 3,
              "seed_count": 30, "hidden_width": 16, "train": FAST_TRAIN}
    params.update(kw)
    return ExperimentConfig.from_dict(params)


@pytest.fixture(scope="module")
def compression_result():
    return run_experiment(small())


def test_config_validation():
    with pytest.raises(DomainError):
        ExperimentConfig(seeds=[])
    with pytest.raises(DomainError):
        ExperimentConfig(seed_count=0)
    with pytest.raises(DomainError):
        ExperimentConfig(d=1)
    with pytest.raises(DomainError):
        ExperimentConfig(d=None, d_list=[4, 1])
    with pytest.raises(DomainError):
        ExperimentConfig(experiment="table9")
    with pytest.raises(DomainError):
        ExperimentConfig.from_dict({"experiment": "table2", "hidden": 3})


def test_config_round_trip():
    cfg = small(seeds=[3, 1, 4])
    back = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert back == cfg
    assert back.budget == 3 and back.run_seed(5, 1) == 1


def test_run_seeds_distinct_across_d_and_index():
    cfg = small()
    seeds = {cfg.run_seed(d, k) for d in (5, 6) for k in range(30)}
    assert len(seeds) == 60


def test_records_reproducible_from_config_and_index(compression_result):
    rec = compression_result.records[2]
    again = execute_run(ExperimentConfig.from_dict(rec.config), rec.d, rec.run_index)
    assert again.seed == rec.seed
    assert again.report.to_dict() == rec.report.to_dict()
    assert again.train_report.to_dict() == rec.train_report.to_dict()


def test_valid_filter_is_training_accuracy(compression_result):
    assert compression_result.complete
    for rec in compression_result.records:
        assert rec.valid == (rec.train_report.final_train_accuracy == 1.0)
    for agg in compression_result.table.aggregates:
        assert agg["n_valid"] == 3


def test_aggregates_recomputable(compression_result):
    table = compression_result.table
    assert table.recompute() == table.aggregates
    for agg in table.aggregates:
        kept = [r for r in table.rows if r["d"] == agg["d"] and r["valid"] and abs(r["cos_theta2"]) > 0.9]
        assert agg["n_filtered"] == len(kept)
        if kept:
            assert agg["avg_phi"] == pytest.approx(sum(r["phi"] for r in kept) / len(kept), rel=1e-12)


def test_summarize_permutation_invariant(compression_result):
    records = list(compression_result.records)
    base = summarize(records).aggregates
    for seed in range(3):
        random.Random(seed).shuffle(records)
        assert summarize(records).aggregates == base


def test_summarize_single_record(compression_result):
    rec = next(r for r in compression_result.records if r.valid and abs(r.report.cos_theta2) > 0.9)
    agg = summarize([rec]).aggregates[0]
    assert agg["avg_abs_cos_theta1"] == abs(rec.report.cos_theta1)
    assert agg["avg_phi"] == rec.report.phi
    assert agg["median_phi"] == rec.report.phi
    assert agg["abs_avg_gap"] == pytest.approx(rec.report.abs_gap, abs=1e-15)
    assert agg["n_runs"] == agg["n_valid"] == 1


def test_summarize_errors(compression_result):
    with pytest.raises(DomainError):
        summarize([])
    rho = execute_run(small(experiment="table3_rho", d=5, d_list=None, activation="relu"), 5, 0)
    with pytest.raises(DomainError):
        summarize([compression_result.records[0], rho])
    with pytest.raises(DomainError):
        aggregate_rows("bogus", [])


def test_shortfall_warns_and_marks_incomplete():
    cfg = small(d_list=[5], seed_count=2, target_valid=5)
    with pytest.warns(ShortfallWarning):
        result = run_experiment(cfg)
    assert not result.complete
    assert len(result.records) == 2


def test_workers_do_not_change_results():
    serial = run_experiment(small(d_list=[5]))
    parallel = run_experiment(small(d_list=[5], workers=2))
    assert [r.seed for r in serial.records] == [r.seed for r in parallel.records]
    assert serial.table.rows == parallel.table.rows
    assert serial.table.aggregates == parallel.table.aggregates


def test_reproduce_fig2_byte_identical(tmp_path):
    cfg = small()
    first = reproduce("fig2", tmp_path / "a", cfg)
    second = reproduce("fig2", tmp_path / "b", cfg)
    for key in ("table", "runs", "svg"):
        assert first.files[key].read_bytes() == second.files[key].read_bytes()
    header = first.files["table"].read_text().splitlines()[0]
    assert header.startswith("d,")
    payload = json.loads(first.files["records"].read_text())
    assert payload["complete"] and payload["summary"]["kind"] == "compression"


def test_reproduce_table3_layout(tmp_path):
    cfg = default_config("table3", d=5, target_valid=2, hidden_width=16, train=FAST_TRAIN, seed_count=40)
    out = reproduce("table3", tmp_path, cfg)
    lines = out.files["table"].read_text().splitlines()
    assert len(lines) == 1 + len(reference.TABLE3["alpha"])
    rows = out.result.table.aggregates
    assert len(rows) == cfg.n_alpha
    assert all(0.0 <= r["mean"] <= 1.0 for r in rows)


def test_reproduce_table4_layout(tmp_path):
    cfg = default_config("table4", d=6, points_per_class=3)
    out = reproduce("table4", tmp_path, cfg)
    aggs = {a["group"]: a for a in out.result.table.aggregates}
    assert set(aggs) == {"b1", "b2"}
    for a in aggs.values():
        assert a["count"] == 3
        assert a["abs_cos_theta_t"] == pytest.approx(a["delta_over_m"], abs=1e-6)
    text = out.files["table"].read_text()
    assert "0.153245" in text or "-0.153245" in text


def test_reproduce_unknown_name(tmp_path):
    with pytest.raises(DomainError):
        reproduce("table9", tmp_path)
    with pytest.raises(DomainError):
        default_config("table9")


def test_to_csv_formatting():
    text = to_csv(("a", "b", "c", "d"), [{"a": 1.0 / 3, "b": True, "c": None, "d": 7}])
    assert text == "a,b,c,d\n0.333333,true,,7\n"


def test_reference_tables_shape():
    assert all(len(reference.TABLE1[k]) == 10 for k in ("cos_theta1", "cos_theta2", "phi"))
    assert reference.FIG2_D_LIST == [7, 8, 9, 10, 12, 14, 15, 16, 17]
    assert len(reference.TABLE3["alpha"]) == len(reference.TABLE3["mean"]) == 10


def test_svg_is_deterministic_and_well_formed():
    series = {"phi": ([8, 10, 12], [0.4, 0.35, 0.3]), "cos": ([8, 10, 12], [0.41, 0.33, 0.31])}
    a = line_chart(series, title="t", xlabel="d", ylabel="r")
    assert a == line_chart(series, title="t", xlabel="d", ylabel="r")
    assert a.startswith("<svg") and a.rstrip().endswith("</svg>")
    assert a.count("<polyline") == 2


def test_perturb_ideal_needs_one_run():
    result = run_experiment(default_config("table4", d=5, points_per_class=2))
    assert len(result.records) == 1 and result.complete
    for att in result.records[0].attacks:
        assert att.success
        assert math.isclose(abs(att.details["cos_theta_t"]), att.norm / att.details["m"], abs_tol=1e-6)
