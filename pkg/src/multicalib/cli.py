"""Command-line entry point: measure, calibrate, multicalibrate, sweep, synth."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .calibrators import isotonic_fit, platt_fit, temperature_fit
from .config import load_experiment_config
from .core import ConfigurationError, GroupCollection, PatchedPredictor, SchemaError, ScoredDataset
from .harness.groups import DEFAULT_GAMMA, GroupPredicate, build_groups
from .harness.splits import SplitSpec
from .harness.sweep import evaluate, run_sweep
from .harness.synthetic import DEFAULT_SHIFTS, SyntheticSpec, gen_synthetic
from .hjz import ADVERSARIES, LEARNERS, HjzConfig, hjz_fit
from .hkrr import HkrrConfig, hkrr_fit
from .io import (
    emit_report,
    load_dataset,
    load_model,
    load_predicates,
    save_dataset,
    save_model,
    save_predicates,
    write_json,
)
from .metrics import brier, cross_entropy

log = logging.getLogger("multicalib")

CALIBRATORS = {"platt": platt_fit, "isotonic": isotonic_fit, "temperature": temperature_fit}


def measure_dataset(data: ScoredDataset, groups: GroupCollection) -> dict:
    """Metric document shared by ``measure`` and the metrics recorded by ``synth``."""
    doc = evaluate(data.scores, data.labels, groups).to_dict()
    doc["n"] = data.n
    doc["brier"] = brier(data.scores, data.labels)
    doc["cross_entropy"] = cross_entropy(data.scores, data.labels)
    doc["dropped_groups"] = list(groups.dropped)
    return doc


def _load_with_groups(data_path: str, groups_path: str, gamma: float | None) -> tuple[ScoredDataset, GroupCollection]:
    preds, file_gamma = load_predicates(groups_path)
    data = load_dataset(data_path)
    groups = build_groups(preds, data.attributes, file_gamma if gamma is None else gamma)
    return data.with_groups(groups), groups


def _masks_for_model(model: PatchedPredictor, data_path: str, groups_path: str) -> ScoredDataset:
    """Evaluate the model's groups on new data, unfiltered and in the model's column order."""
    preds, _ = load_predicates(groups_path)
    by_name = {p.label: p for p in preds}
    missing = [g for g in model.group_names if g not in by_name]
    if missing:
        raise SchemaError(f"group file lacks groups used by the model: {', '.join(missing)}")
    data = load_dataset(data_path)
    masks = [by_name[g].evaluate(data.attributes) for g in model.group_names]
    mat = np.stack(masks, axis=1) if masks else np.zeros((data.n, 0), dtype=bool)
    return data.with_groups(GroupCollection(model.group_names, mat))


def _write_scores(path: str, data: ScoredDataset, scores: np.ndarray) -> None:
    save_dataset(path, data.with_scores(scores))


def _emit(doc: dict, out: str | None) -> None:
    if out:
        write_json(out, doc)
    else:
        sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def cmd_measure(args) -> int:
    data, groups = _load_with_groups(args.data, args.groups, args.gamma)
    _emit(measure_dataset(data, groups), args.out)
    return 0


def _fit_or_load(args, fit):
    if args.model:
        return load_model(args.model)
    if not args.data:
        raise ConfigurationError("either --data (to fit) or --model (to apply) is required")
    model = fit()
    if args.model_out:
        save_model(args.model_out, model)
    return model


def cmd_calibrate(args) -> int:
    def fit():
        return CALIBRATORS[args.method](load_dataset(args.data))

    model = _fit_or_load(args, fit)
    if args.apply:
        data = load_dataset(args.apply)
        _write_scores(args.out, data, model.predict(data.scores, data.logits))
    elif not args.model_out:
        _emit(model.to_dict(), None)
    return 0


def cmd_multicalibrate(args) -> int:
    def fit():
        data, groups = _load_with_groups(args.data, args.groups, args.gamma)
        if args.method == "hkrr":
            if args.alpha is None:
                raise ConfigurationError("--alpha is required for hkrr")
            cfg = HkrrConfig(args.alpha, args.lam, args.max_sweeps, args.shuffle_seed)
            return hkrr_fit(data, groups, cfg)
        cfg = HjzConfig(
            args.learner,
            args.adversary,
            args.learner_decay,
            args.adversary_decay,
            args.rounds,
            args.lam,
            args.eta0_learner,
            args.eta0_adversary,
        )
        return hjz_fit(data, groups, cfg)

    model = _fit_or_load(args, fit)
    if not isinstance(model, PatchedPredictor):
        raise SchemaError("model file does not hold a patched predictor")
    if args.apply:
        data = _masks_for_model(model, args.apply, args.groups)
        _write_scores(args.out, data, model.predict_dataset(data))
    elif not args.model_out:
        _emit(model.to_dict(), None)
    return 0


def cmd_sweep(args) -> int:
    cfg, base = load_experiment_config(args.config)

    def resolve(p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else base / q

    if isinstance(cfg.groups, str):
        preds, gamma = load_predicates(resolve(cfg.groups))
        if "gamma" in cfg.model_fields_set:
            gamma = cfg.gamma
    else:
        preds, gamma = [GroupPredicate.from_dict(d) for d in cfg.groups], cfg.gamma
    data = load_dataset(resolve(cfg.dataset), preds, gamma)
    split = cfg.split.to_spec()
    if args.seed is not None:
        split = SplitSpec(split.ratios, 0.0, args.seed, split.n_splits, split.reuse_training_data)
    cf_values = args.cf if args.cf else cfg.split.calibration_fractions
    workers = args.workers or cfg.workers
    result = run_sweep(data, data.groups(), cfg.method_specs(), cf_values, split, workers)
    out = Path(args.out) if args.out else resolve(cfg.output_dir)
    for path in emit_report(result, out, cfg.formats):
        log.info("wrote %s", path)
    failed = sum(not r.ok for r in result.results)
    if failed:
        log.warning("%d of %d runs failed; see results.json", failed, len(result.results))
    return 0


def _parse_shift(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    try:
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"shift {value!r} is not a number") from None


def cmd_synth(args) -> int:
    shifts = dict(DEFAULT_SHIFTS) if args.default_shifts else {}
    shifts.update(dict(args.shift or ()))
    spec = SyntheticSpec(n=args.n, seed=args.seed, shifts=shifts, gamma=args.gamma)
    data = gen_synthetic(spec)
    save_dataset(args.out, data)
    groups_out = args.groups_out or str(Path(args.out).with_suffix(".groups.json"))
    save_predicates(groups_out, spec.predicates, spec.gamma)
    metrics_out = args.metrics_out or str(Path(args.out).with_suffix(".metrics.json"))
    doc = measure_dataset(data, build_groups(spec.predicates, data.attributes, spec.gamma))
    doc["generator"] = spec.to_dict()
    write_json(metrics_out, doc)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multicalib", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("measure", help="metrics of a prediction file, overall and per group")
    p.add_argument("--data", required=True)
    p.add_argument("--groups", required=True, help="group predicate file (YAML or JSON)")
    p.add_argument("--gamma", type=float, help="minimum group fraction (overrides the group file)")
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("calibrate", help="fit and/or apply a classic calibrator")
    p.add_argument("--method", choices=sorted(CALIBRATORS), required=True)
    p.add_argument("--data", help="calibration set to fit on")
    p.add_argument("--model", help="previously saved model to apply instead of fitting")
    p.add_argument("--model-out")
    p.add_argument("--apply", help="prediction file to transform")
    p.add_argument("--out", help="output prediction file (with --apply)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("multicalibrate", help="fit and/or apply HKRR or HJZ")
    p.add_argument("--method", choices=("hkrr", "hjz"), required=True)
    p.add_argument("--groups", required=True)
    p.add_argument("--data")
    p.add_argument("--model")
    p.add_argument("--model-out")
    p.add_argument("--apply")
    p.add_argument("--out")
    p.add_argument("--gamma", type=float)
    p.add_argument("--lam", type=float, default=0.1, help="bin width")
    p.add_argument("--alpha", type=float, help="hkrr tolerance (required for hkrr)")
    p.add_argument("--max-sweeps", type=int, default=500)
    p.add_argument("--shuffle-seed", type=int)
    p.add_argument("--learner", choices=LEARNERS, default="hedge")
    p.add_argument("--adversary", choices=ADVERSARIES, default="best_response")
    p.add_argument("--learner-decay", type=float, default=0.9)
    p.add_argument("--adversary-decay", type=float, default=0.9)
    p.add_argument("--rounds", type=int, default=30)
    p.add_argument("--eta0-learner", type=float, default=1.0)
    p.add_argument("--eta0-adversary", type=float, default=1.0)
    p.set_defaults(func=cmd_multicalibrate)

    p = sub.add_parser("sweep", help="run the full benchmark protocol from an experiment config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="overrides split.seed")
    p.add_argument("--cf", type=float, nargs="+", help="overrides split.calibration_fractions")
    p.add_argument("--out", help="overrides output_dir")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="emit a synthetic scored dataset with its group file and metrics")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--groups-out")
    p.add_argument("--metrics-out")
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    p.add_argument("--default-shifts", action="store_true", help="plant the built-in per-group shifts")
    p.add_argument("--shift", type=_parse_shift, action="append", metavar="GROUP=DELTA")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "apply", None) and not args.out:
        parser.error("--apply needs --out")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"multicalib {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
