"""Prediction files, group files, serialized models and sweep reports."""

from __future__ import annotations

import csv
import json
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from .calibrators import IsotonicMap, PlattParams, TemperatureParams
from .core import PatchedPredictor, SchemaError, ScoredDataset
from .harness.groups import DEFAULT_GAMMA, GroupPredicate, build_groups
from .harness.sweep import METHODS, SweepResult

REQUIRED_COLUMNS = ("score", "label")
RESERVED_COLUMNS = ("score", "label", "logit", "sample_id")
TABLE_COLUMNS = ("Model", "ECE", "Max ECE", "smECE", "Max smECE", "Acc")
TABLE_KEYS = ("ece", "max_ece", "smece", "max_smece", "accuracy")


class DatasetFormatError(SchemaError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _column(values: list[str]) -> np.ndarray:
    try:
        return np.asarray([float(x) for x in values], dtype=float)
    except ValueError:
        return np.asarray(values, dtype=str)


def load_dataset(
    path: str | Path,
    predicates: Sequence[GroupPredicate] = (),
    gamma: float = DEFAULT_GAMMA,
) -> ScoredDataset:
    """Parse a prediction file; row order is preserved.

    Columns other than score, label, logit and sample_id become attributes
    (numeric when every value parses as a float). Group masks are evaluated
    from ``predicates`` after the gamma filter.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing required column(s) {', '.join(missing)}")
        if len(set(header)) != len(header):
            raise SchemaError(f"{path}: duplicate column names")
        col = {name: i for i, name in enumerate(header)}
        scores, labels, logits = [], [], []
        raw: dict[str, list[str]] = {h: [] for h in header if h not in ("score", "label", "logit")}
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DatasetFormatError(line, f"expected {len(header)} fields, got {len(row)}")
            try:
                s = float(row[col["score"]])
            except ValueError:
                raise DatasetFormatError(line, f"score {row[col['score']]!r} is not a number") from None
            if not (0.0 <= s <= 1.0):
                raise DatasetFormatError(line, f"score {s} outside [0, 1]")
            lab = row[col["label"]].strip()
            if lab not in ("0", "1"):
                raise DatasetFormatError(line, f"label {lab!r} not in {{0, 1}}")
            scores.append(s)
            labels.append(int(lab))
            if "logit" in col:
                try:
                    logits.append(float(row[col["logit"]]))
                except ValueError:
                    raise DatasetFormatError(line, f"logit {row[col['logit']]!r} is not a number") from None
            for name in raw:
                raw[name].append(row[col[name]])
    if not scores:
        raise SchemaError(f"{path}: no data rows")
    ids = np.asarray(raw.pop("sample_id"), dtype=str) if "sample_id" in raw else None
    attrs = {name: _column(vals) for name, vals in raw.items()}
    data = ScoredDataset(
        scores=np.asarray(scores),
        labels=np.asarray(labels),
        logits=np.asarray(logits) if "logit" in col else None,
        attributes=attrs,
        sample_ids=ids,
    )
    if predicates:
        data = data.with_groups(build_groups(predicates, attrs, gamma))
    return data


def _cell(x: Any) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def save_dataset(path: str | Path, data: ScoredDataset) -> None:
    path = Path(path)
    header = []
    cols: list[Sequence] = []
    if data.sample_ids is not None:
        header.append("sample_id")
        cols.append(data.sample_ids)
    header += ["score", "label"]
    cols += [data.scores, data.labels]
    if data.logits is not None:
        header.append("logit")
        cols.append(data.logits)
    for name, values in data.attributes.items():
        if name in RESERVED_COLUMNS:
            raise SchemaError(f"attribute name {name!r} collides with a reserved column")
        header.append(name)
        cols.append(values)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(data.n):
            w.writerow([_cell(c[i]) for c in cols])


def _read_doc(path: Path) -> Any:
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        return json.loads(text)
    return yaml.safe_load(text)


def load_predicates(path: str | Path) -> tuple[list[GroupPredicate], float]:
    """Read a group file: a list of predicates, or ``{gamma, groups: [...]}``."""
    doc = _read_doc(Path(path))
    gamma = DEFAULT_GAMMA
    if isinstance(doc, Mapping):
        gamma = float(doc.get("gamma", DEFAULT_GAMMA))
        doc = doc.get("groups")
    if not isinstance(doc, list):
        raise SchemaError(f"{path}: expected a list of group predicates")
    return [GroupPredicate.from_dict(d) for d in doc], gamma


def save_predicates(path: str | Path, predicates: Sequence[GroupPredicate], gamma: float = DEFAULT_GAMMA) -> None:
    doc = {"gamma": gamma, "groups": [p.to_dict() for p in predicates]}
    write_json(path, doc)


def write_json(path: str | Path, doc: Any) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def save_model(path: str | Path, model) -> None:
    write_json(path, model.to_dict())


def load_model(path: str | Path):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    kind = doc.get("kind")
    if kind == "patched_predictor":
        return PatchedPredictor.from_dict(doc)
    if kind == "platt":
        return PlattParams(float(doc["a"]), float(doc["b"]))
    if kind == "isotonic":
        return IsotonicMap(tuple(doc["breakpoints"]), tuple(doc["values"]))
    if kind == "temperature":
        return TemperatureParams(float(doc["t"]))
    raise SchemaError(f"{path}: unknown model kind {kind!r}")


def round3(x: float) -> str:
    return str(Decimal(repr(float(x))).quantize(Decimal("0.001"), rounding=ROUND_HALF_UP))


def format_mean_std(mean: float, std: float) -> str:
    return f"{round3(mean)} ± {round3(std)}"


FORMATS = ("table", "json", "plot")


def emit_report(result: SweepResult, out_dir: str | Path, formats: Sequence[str] = FORMATS) -> list[Path]:
    """Write the selected-model table, the full structured results and plot data.

    table.csv   one row per method family, its validation-selected point
    results.json every run, every aggregated point and the selections
    plot_data.csv  one record per swept point: test accuracy vs max smECE
    """
    unknown = set(formats) - set(FORMATS)
    if unknown:
        raise ValueError(f"unknown report formats {sorted(unknown)}")
    if not result.points:
        raise ValueError("nothing to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "table" in formats:
        path = out / "table.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TABLE_COLUMNS)
            for method in METHODS:
                p = result.best_by_method.get(method)
                if p is None:
                    continue
                w.writerow([p.point_id] + [format_mean_std(*p.test[k]) for k in TABLE_KEYS])
        written.append(path)
    if "json" in formats:
        path = out / "results.json"
        doc = {
            "best": None if result.best is None else result.best.point_id,
            "best_by_method": {m: p.point_id for m, p in result.best_by_method.items()},
            "points": [p.to_dict() for p in result.points],
            "runs": [r.to_dict() for r in result.results],
        }
        write_json(path, doc)
        written.append(path)
    if "plot" in formats:
        path = out / "plot_data.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["point_id", "method", "cf", "accuracy", "max_smece"])
            for p in result.points:
                acc, mx = ("", "") if p.n_ok == 0 else (_cell(p.test["accuracy"][0]), _cell(p.test["max_smece"][0]))
                w.writerow([p.point_id, p.spec.method, _cell(p.cf), acc, mx])
        written.append(path)
    return written
