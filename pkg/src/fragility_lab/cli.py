"""Command line entry point: ``fragility-lab <command> ...``.

Exit codes: 0 success, 2 usage or input error, 3 partial result (the seed
budget ran out before enough valid runs were found).
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import analysis, attacks, datagen, oracle
from .exceptions import FragilityError
from .harness import NAMES, ExperimentConfig, ShortfallWarning, default_config, reproduce, run_experiment, to_csv
from .harness.reproduce import fig2_svg
from .models import MLPClassifier, TrainConfig
from .rmt import make_rng

EXIT_OK, EXIT_USAGE, EXIT_PARTIAL = 0, 2, 3


def _read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FragilityError(f"cannot read JSON from {path}: {exc}") from exc


def _emit(payload, out):
    text = json.dumps(payload, indent=1)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _load_dataset(path):
    return datagen.Dataset.from_dict(_read_json(path))


def _load_model(path):
    return MLPClassifier.from_dict(_read_json(path))


def cmd_gen_data(args):
    rng = make_rng(args.seed)
    if args.kind == "orthogonal_label":
        data = datagen.gen_orthogonal_label(rng, args.d)
    elif args.kind == "generative_chain":
        data = datagen.gen_generative_chain(rng, args.d, args.t)
    else:
        data = datagen.gen_hypercube(rng, args.d, sample_count=args.sample_count, column_scale=args.column_scale)
    data.seed = args.seed
    _emit(data.to_dict(), args.out)
    return EXIT_OK


def cmd_train(args):
    data = _load_dataset(args.dataset)
    payload = _read_json(args.config) if args.config else {}
    arch = {k: payload.pop(k) for k in ("hidden_layer_sizes", "activation") if k in payload}
    tc = TrainConfig.from_dict(payload)
    if args.hidden is not None:
        arch["hidden_layer_sizes"] = tuple(args.hidden)
    if args.activation is not None:
        arch["activation"] = args.activation
    model = MLPClassifier(
        hidden_layer_sizes=tuple(arch.get("hidden_layer_sizes", (256,))),
        activation=arch.get("activation", "identity"),
        epochs=tc.epochs,
        learning_rate=tc.learning_rate,
        batch_size=tc.batch_size,
        beta_1=tc.adam_betas[0],
        beta_2=tc.adam_betas[1],
        epsilon=tc.adam_eps,
        loss=tc.loss,
        random_state=tc.seed,
    )
    model.fit(data.inputs, data.labels)
    _emit(model.to_dict(), args.out)
    report = model.train_report_.to_dict()
    if args.report:
        _emit(report, args.report)
    else:
        print(json.dumps({"final_train_accuracy": report["final_train_accuracy"]}), file=sys.stderr)
    return EXIT_OK


def _point(data, index):
    if index is None:
        raise FragilityError("--point is required for this method")
    if not 0 <= index < len(data):
        raise FragilityError(f"--point {index} out of range")
    return data.inputs[index]


def cmd_attack(args):
    data = _load_dataset(args.dataset)
    model = _load_model(args.model)
    if args.method == "thm1":
        outcome = attacks.thm1_attack(data, model)
    elif args.method == "thm5":
        if args.point is None:
            raise FragilityError("--point is required for thm5")
        outcome = attacks.thm5_attack(data, model, args.point)
    elif args.method == "local-proj":
        if args.x1 is None or args.x2 is None:
            raise FragilityError("--x1 and --x2 point indices are required for local-proj")
        x = _point(data, args.point)
        outcome = attacks.local_projection_attack(
            model, x, _point(data, args.x1), _point(data, args.x2), args.epsilon
        )
    else:
        x = _point(data, args.point)
        source = int(np.argmax(model.forward(x)))
        target = args.target if args.target is not None else (1 - source if model.output_dim == 2 else None)
        if target is None:
            raise FragilityError("--target is required for models with more than two classes")
        if args.method == "probe":
            outcome = attacks.probe_subspace_attack(model, x, source, target)
        else:
            outcome = attacks.iterative_gradient_attack(
                model, x, source, target, step=args.step, max_steps=args.max_steps, threshold=args.threshold
            )
    _emit(outcome.to_dict(), args.out)
    return EXIT_OK


def cmd_analyze(args):
    data = _load_dataset(args.dataset)
    model = _load_model(args.model)
    meta = {"seed": data.seed, "d": data.d}
    if model.is_linear:
        report = analysis.analyze_linear(model, data, **meta)
    else:
        if data.kind != "hypercube":
            raise FragilityError("nonlinear analysis needs a hypercube dataset")
        b1, b2 = datagen.boundary_pair(make_rng(args.pair_seed), data)
        path = datagen.make_path(b2, b1, args.n_alpha)
        profile = analysis.path_profile(model, path)
        live = [abs(p.cos_theta) for p in profile if not p.vanished]
        start = profile[0]
        report = analysis.CompressionReport(
            phi=analysis.compression_fraction(data.generator.a_matrix),
            rho=float(np.mean(live)) if live else None,
            path_profile=profile,
            m_signed=None if start.vanished else analysis.path_integral_m(profile, start.grad_norm, path.length),
            d_change=analysis.d_change(model, b2, b1),
            run_metadata=meta,
        )
    pred = model.predict(data.inputs)
    report.run_metadata["valid"] = bool(np.all(pred == data.labels))
    _emit(report.to_dict(), args.out)
    csv_text = to_csv(analysis.CSV_COLUMNS, [report.csv_row()])
    if args.csv:
        Path(args.csv).write_text(csv_text, encoding="utf-8")
    else:
        sys.stdout.write(csv_text)
    return EXIT_OK


def cmd_oracle(args):
    data = _load_dataset(args.dataset)
    radius, nearest = oracle.oracle_flip(data, args.point)
    _emit({"point": args.point, "flip_radius": radius, "nearest_cross_class_index": nearest}, args.out)
    return EXIT_OK


def _with_shortfall(fn):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ShortfallWarning)
        result = fn()
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return result


def cmd_reproduce(args):
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    config = default_config(args.name, **overrides)
    out = _with_shortfall(lambda: reproduce(args.name, args.out_dir, config))
    for path in out.files.values():
        print(path)
    return EXIT_OK if out.result.complete else EXIT_PARTIAL


def cmd_run(args):
    config = ExperimentConfig.from_dict(_read_json(args.config))
    result = _with_shortfall(lambda: run_experiment(config))
    out_dir = Path(args.out_dir or config.output_dir or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    table = result.table
    stem = config.experiment
    (out_dir / f"{stem}_runs.csv").write_text(to_csv(table.row_columns, table.rows), encoding="utf-8")
    (out_dir / f"{stem}_summary.csv").write_text(to_csv(table.aggregate_columns, table.aggregates), encoding="utf-8")
    records = {"config": config.to_dict(), "complete": result.complete, "records": [r.to_dict() for r in result.records]}
    (out_dir / f"{stem}_records.json").write_text(json.dumps(records, indent=1), encoding="utf-8")
    if config.experiment == "fig2_trend":
        (out_dir / "fig2.svg").write_text(fig2_svg(result), encoding="utf-8")
    sys.stdout.write(to_csv(table.aggregate_columns, table.aggregates))
    return EXIT_OK if result.complete else EXIT_PARTIAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fragility-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset as JSON")
    p.add_argument("--kind", choices=datagen.KINDS, default="hypercube")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t", type=int, default=1, help="generative chain length")
    p.add_argument("--sample-count", type=int)
    p.add_argument("--column-scale", type=float, default=5.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a network on a dataset JSON")
    p.add_argument("--dataset", required=True)
    p.add_argument("--config", help="JSON with training settings")
    p.add_argument("--hidden", type=int, nargs="*")
    p.add_argument("--activation", choices=("identity", "relu"))
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--report", help="training report JSON path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("attack", help="run one attack and print the outcome JSON")
    p.add_argument("--method", choices=attacks.METHODS, required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--point", type=int)
    p.add_argument("--target", type=int)
    p.add_argument("--step", type=float)
    p.add_argument("--max-steps", type=int, default=100_000)
    p.add_argument("--threshold", type=float, default=0.0)
    p.add_argument("--x1", type=int, help="local-proj: index of the first reference point")
    p.add_argument("--x2", type=int, help="local-proj: index of the second reference point")
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--out")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("analyze", help="compression diagnostics for a model and dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--n-alpha", type=int, default=10)
    p.add_argument("--pair-seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("oracle", help="flip radius of the minimum-distance classifier")
    p.add_argument("--dataset", required=True)
    p.add_argument("--point", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("reproduce", help="rerun a named experiment and write CSV/SVG")
    p.add_argument("name", choices=NAMES)
    p.add_argument("--out-dir", default="results")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("run", help="run an experiment described by a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FragilityError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
