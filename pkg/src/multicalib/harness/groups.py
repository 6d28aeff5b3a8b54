"""Group predicates over attribute columns and the minimum-mass filter."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from ..core import GroupCollection, SchemaError

log = logging.getLogger(__name__)

DEFAULT_GAMMA = 0.005
KINDS = ("equals", "threshold_gt", "threshold_lt", "substring", "conjunction")


def _numeric(col: np.ndarray, name: str) -> np.ndarray:
    try:
        return np.asarray(col, dtype=float)
    except (TypeError, ValueError):
        raise SchemaError(f"column {name!r} is not numeric") from None


@dataclass(frozen=True)
class GroupPredicate:
    kind: str
    field: str = ""
    value: Any = None
    clauses: tuple["GroupPredicate", ...] = ()
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown predicate kind {self.kind!r}")
        if self.kind == "conjunction":
            if len(self.clauses) != 2:
                raise SchemaError("a conjunction needs exactly two clauses")
            if any(c.kind == "conjunction" for c in self.clauses):
                raise SchemaError("conjunction clauses must be simple predicates")
        elif not self.field:
            raise SchemaError(f"{self.kind} predicate needs a field")
        object.__setattr__(self, "clauses", tuple(self.clauses))

    def describe(self) -> str:
        if self.kind == "conjunction":
            return " & ".join(c.describe() for c in self.clauses)
        op = {"equals": "==", "threshold_gt": ">", "threshold_lt": "<", "substring": "contains"}[self.kind]
        return f"{self.field} {op} {self.value}"

    @property
    def label(self) -> str:
        return self.name or self.describe()

    def evaluate(self, attributes: Mapping[str, np.ndarray]) -> np.ndarray:
        if self.kind == "conjunction":
            a, b = self.clauses
            return a.evaluate(attributes) & b.evaluate(attributes)
        if self.field not in attributes:
            raise SchemaError(f"unknown field {self.field!r}")
        col = np.asarray(attributes[self.field])
        if self.kind == "threshold_gt":
            return _numeric(col, self.field) > float(self.value)
        if self.kind == "threshold_lt":
            return _numeric(col, self.field) < float(self.value)
        if self.kind == "substring":
            needle = str(self.value).lower()
            return np.array([needle in str(x).lower() for x in col], dtype=bool)
        if col.dtype.kind in "fiub" and not isinstance(self.value, str):
            return col == self.value
        if col.dtype.kind in "fiub":
            try:
                return col == float(self.value)
            except ValueError:
                return np.zeros(col.shape, dtype=bool)
        return np.array([str(x) == str(self.value) for x in col], dtype=bool)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind}
        if self.name:
            out["name"] = self.name
        if self.kind == "conjunction":
            out["clauses"] = [c.to_dict() for c in self.clauses]
        else:
            out["field"] = self.field
            out["value"] = self.value
        return out

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "GroupPredicate":
        if "kind" not in doc:
            raise SchemaError("predicate needs a 'kind'")
        clauses = tuple(cls.from_dict(c) for c in doc.get("clauses", ()))
        return cls(
            kind=doc["kind"],
            field=doc.get("field", ""),
            value=doc.get("value"),
            clauses=clauses,
            name=doc.get("name", ""),
        )


def build_groups(
    predicates: Sequence[GroupPredicate],
    attributes: Mapping[str, np.ndarray],
    gamma: float = DEFAULT_GAMMA,
) -> GroupCollection:
    """Evaluate predicates and keep groups holding strictly more than ``gamma`` of the rows."""
    if not attributes:
        raise SchemaError("dataset has no attribute columns to build groups from")
    n = len(next(iter(attributes.values())))
    kept, masks, descs, dropped = [], [], [], []
    for pred in predicates:
        mask = pred.evaluate(attributes)
        if mask.sum() / n > gamma:
            kept.append(pred.label)
            masks.append(mask)
            descs.append(pred.describe())
        else:
            dropped.append(pred.label)
    if dropped:
        log.info("dropped %d groups at or below gamma=%g: %s", len(dropped), gamma, ", ".join(dropped))
    if len(set(kept)) != len(kept):
        raise SchemaError("group names must be unique")
    mat = np.stack(masks, axis=1) if masks else np.zeros((n, 0), dtype=bool)
    return GroupCollection(tuple(kept), mat, tuple(descs), gamma, tuple(dropped))
