"""Command-line interface: reproducible data, training, and evaluation runs.

Every artifact-producing command writes one JSON manifest next to its
outputs (command, config snapshot, seed, input/output paths, code version,
timestamp) so a run can be reproduced exactly.  Flags override config-file
values; the TEMPREL_CONFIG environment variable supplies a default config
path for ``train``.

Exit codes: 0 success, 2 usage errors, 3 data errors, 4 numeric failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .data import (
    adjudicate_timeline_instance,
    enhance_symmetry,
    generate_synthetic,
    read_instances,
    write_instances,
)
from .errors import (
    ConfigError,
    DataError,
    DivergenceError,
    FormatError,
    InputError,
    SchemaError,
    TempRelError,
)
from .encoder import load_precomputed
from .metrics import evaluate
from .schema import get_schema
from .training import (
    GRAD_CHECK_SELECTORS,
    Model,
    TrainConfig,
    grad_check,
    train,
    write_log,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

CONFIG_ENV_VAR = "TEMPREL_CONFIG"


def _write_manifest(
    command: str,
    anchor: Path,
    inputs: dict,
    outputs: dict,
    seed: int | None,
    config: dict | None,
) -> None:
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": {k: str(v) for k, v in inputs.items()},
        "outputs": {k: str(v) for k, v in outputs.items()},
        "code_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    path = Path(str(anchor) + ".manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cmd_generate(args) -> int:
    schema = get_schema(args.schema)
    instances = generate_synthetic(schema, args.n, args.vague_fraction, args.seed)
    out = Path(args.out)
    n = write_instances(instances, out)
    _write_manifest(
        "generate-synthetic",
        out,
        inputs={},
        outputs={"dataset": out},
        seed=args.seed,
        config={"schema": schema.name, "n": args.n, "vague_fraction": args.vague_fraction},
    )
    print(f"wrote {n} instances to {out}")
    return EXIT_OK


def _cmd_adjudicate(args) -> int:
    schema = get_schema(args.schema)
    raw = read_instances(args.input)
    resolved = []
    for inst in raw:
        try:
            adjudicated = adjudicate_timeline_instance(inst)
        except DataError as exc:
            raise DataError(f"{args.input}: instance {inst.id!r}: {exc}") from exc
        adjudicated.validate_labels(schema)
        resolved.append(adjudicated)
    out = Path(args.out)
    n = write_instances(resolved, out)
    _write_manifest(
        "adjudicate-udst",
        out,
        inputs={"raw": args.input},
        outputs={"dataset": out},
        seed=None,
        config={"schema": schema.name},
    )
    print(f"adjudicated {n} instances to {out}")
    return EXIT_OK


def _cmd_enhance(args) -> int:
    schema = get_schema(args.schema)
    instances = read_instances(args.input)
    enhanced = enhance_symmetry(instances, schema)
    out = Path(args.out)
    n = write_instances(enhanced, out)
    _write_manifest(
        "enhance",
        out,
        inputs={"dataset": args.input},
        outputs={"dataset": out},
        seed=None,
        config={"schema": schema.name},
    )
    print(f"wrote {n} instances (doubled from {len(instances)}) to {out}")
    return EXIT_OK


def _load_train_config(args) -> TrainConfig:
    config_path = args.config or os.environ.get(CONFIG_ENV_VAR)
    cfg = TrainConfig.from_file(config_path) if config_path else TrainConfig()
    overrides = {}
    for name in TrainConfig.__dataclass_fields__:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if overrides:
        cfg = TrainConfig.from_dict({**asdict(cfg), **overrides})
    return cfg


def _cmd_train(args) -> int:
    schema = get_schema(args.schema)
    cfg = _load_train_config(args)
    train_insts = read_instances(args.train)
    dev_insts = read_instances(args.dev) if args.dev else []
    precomputed = load_precomputed(args.precomputed) if args.precomputed else None
    if args.enhance:
        train_insts = enhance_symmetry(train_insts, schema)
    model, logs = train(train_insts, dev_insts, cfg, schema, precomputed=precomputed)
    out_model = Path(args.out_model)
    model.save(out_model)
    out_log = Path(args.out_log) if args.out_log else out_model.with_suffix(".log.jsonl")
    write_log(logs, out_log)
    _write_manifest(
        "train",
        out_model,
        inputs={
            "train": args.train,
            **({"dev": args.dev} if args.dev else {}),
            **({"precomputed": args.precomputed} if args.precomputed else {}),
        },
        outputs={"model": out_model, "log": out_log},
        seed=cfg.seed,
        config={**asdict(cfg), "schema": schema.name, "enhance": args.enhance},
    )
    best = max((e.dev_micro_f1 for e in logs if e.dev_micro_f1 is not None), default=None)
    if best is not None:
        print(f"trained {cfg.mode} for {cfg.epochs} epochs; best dev micro-F1 {100 * best:.1f}")
    else:
        print(f"trained {cfg.mode} for {cfg.epochs} epochs")
    return EXIT_OK


def _load_model(path: str) -> Model:
    if not Path(path).exists():
        raise InputError(f"model file not found: {path}")
    return Model.load(path)


def _cmd_evaluate(args) -> int:
    model = _load_model(args.model)
    insts = read_instances(args.data)
    for inst in insts:
        inst.validate_labels(model.schema)
    precomputed = load_precomputed(args.precomputed) if args.precomputed else None
    gold = [i.gold for i in insts]
    if any(g is None for g in gold):
        raise DataError(f"{args.data}: evaluation needs gold labels on every instance")
    pred = model.predict_labels(insts, precomputed)
    predictions = None
    if model.mode != "baseline":
        predictions = model.predict(insts, precomputed)
    report = evaluate(gold, pred, model.schema, predictions=predictions, insts=insts)
    out = Path(args.out_report)
    report.save(out, args.out_text)
    _write_manifest(
        "evaluate",
        out,
        inputs={"model": args.model, "data": args.data},
        outputs={
            "report": out,
            **({"text_report": args.out_text} if args.out_text else {}),
        },
        seed=None,
        config={"mode": model.mode},
    )
    print(report.to_text())
    return EXIT_OK


def _require_threshold_model(model: Model, command: str) -> None:
    if model.mode == "baseline":
        raise InputError(
            f"{command} needs a threshold model; the single-label baseline has no "
            "per-relation scores or threshold (use evaluate instead)"
        )


def _cmd_predict(args) -> int:
    model = _load_model(args.model)
    _require_threshold_model(model, "predict")
    insts = read_instances(args.data)
    precomputed = load_precomputed(args.precomputed) if args.precomputed else None
    predictions = model.predict(insts, precomputed)
    out = Path(args.out)
    with open(out, "w", encoding="utf-8") as fh:
        for inst, prediction in zip(insts, predictions):
            fh.write(json.dumps(prediction.to_record(inst.id), sort_keys=True))
            fh.write("\n")
    _write_manifest(
        "predict",
        out,
        inputs={"model": args.model, "data": args.data},
        outputs={"predictions": out},
        seed=None,
        config={"mode": model.mode},
    )
    print(f"wrote {len(predictions)} predictions to {out}")
    return EXIT_OK


def _cmd_explain(args) -> int:
    model = _load_model(args.model)
    _require_threshold_model(model, "explain")
    insts = read_instances(args.data)
    if args.id is not None:
        insts = [i for i in insts if i.id == args.id]
        if not insts:
            raise DataError(f"{args.data}: no instance with id {args.id!r}")
    precomputed = load_precomputed(args.precomputed) if args.precomputed else None
    predictions = model.predict(insts, precomputed)

    records = []
    for inst, prediction in zip(insts, predictions):
        if prediction.decision != "Vague":
            continue
        ranked = [
            {"relation": r, "score": float(prediction.scores[model.schema.index_of(r)])}
            for r in prediction.composition
        ]
        records.append(
            {
                "id": inst.id,
                "threshold": float(prediction.threshold),
                "composition": ranked,
                "no_confidence": not ranked,
            }
        )
    for rec in records:
        if rec["no_confidence"]:
            print(f"{rec['id']}: Vague (no-confidence: every score is below the threshold)")
        else:
            listing = ", ".join(f"{c['relation']}={c['score']:.3f}" for c in rec["composition"])
            print(f"{rec['id']}: Vague because of {listing} (threshold {rec['threshold']:.3f})")
    if args.out:
        out = Path(args.out)
        with open(out, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec, sort_keys=True))
                fh.write("\n")
        _write_manifest(
            "explain",
            out,
            inputs={"model": args.model, "data": args.data},
            outputs={"explanations": out},
            seed=None,
            config={"mode": model.mode, "id": args.id},
        )
    print(f"{len(records)} Vague predictions explained")
    return EXIT_OK


def _cmd_gradcheck(args) -> int:
    schema = get_schema(args.schema)
    failed = False
    for selector in GRAD_CHECK_SELECTORS:
        err = grad_check(
            selector, schema, seed=args.seed, epsilon=args.epsilon, trials=args.trials
        )
        status = "ok" if err < args.tolerance else "FAIL"
        if err >= args.tolerance:
            failed = True
        print(f"{selector:>10}: max relative error {err:.3e}  [{status}]")
    if failed:
        print(f"gradient check failed at tolerance {args.tolerance}")
        return EXIT_NUMERIC
    print(f"all gradient checks passed at tolerance {args.tolerance}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="temprel",
        description="Multi-label temporal relation extraction toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-synthetic", help="generate a deterministic cue-token corpus")
    p.add_argument("--schema", default="tbdense")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--vague-fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("adjudicate-udst", help="majority-vote raw timeline records into gold labels")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--schema", default="udst")
    p.set_defaults(func=_cmd_adjudicate)

    p = sub.add_parser("enhance", help="double a training set via pair symmetry")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--schema", default="tbdense")
    p.set_defaults(func=_cmd_enhance)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--train", required=True)
    p.add_argument("--dev", default=None)
    p.add_argument("--schema", default="tbdense")
    p.add_argument("--config", default=None, help=f"config JSON (default ${CONFIG_ENV_VAR})")
    p.add_argument("--out-model", required=True)
    p.add_argument("--out-log", default=None)
    p.add_argument("--precomputed", default=None, help="precomputed pair-vector file")
    p.add_argument("--enhance", action="store_true", help="apply symmetry enhancement to the training set")
    p.add_argument("--mode", choices=["metre", "metre_no_cs", "metre_pnt", "baseline"], default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--w-bar", dest="w_bar", type=float, default=None)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    p.add_argument("--momentum", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--d-e", dest="d_e", type=int, default=None)
    p.add_argument("--d-h", dest="d_h", type=int, default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--n-buckets", dest="n_buckets", type=int, default=None)
    p.add_argument("--window-radius", dest="window_radius", type=int, default=None)
    p.add_argument("--pooling", choices=["window", "span"], default=None)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="score a model on a labelled dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out-report", required=True)
    p.add_argument("--out-text", default=None)
    p.add_argument("--precomputed", default=None)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("predict", help="write scored predictions for a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--precomputed", default=None)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("explain", help="show what a Vague prediction is composed of")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--id", default=None, help="restrict to one instance id")
    p.add_argument("--out", default=None)
    p.add_argument("--precomputed", default=None)
    p.set_defaults(func=_cmd_explain)

    p = sub.add_parser("gradcheck", help="verify analytic gradients against finite differences")
    p.add_argument("--schema", default="tbdense")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=_cmd_gradcheck)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ConfigError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FormatError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TempRelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
