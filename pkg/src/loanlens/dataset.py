"""Loan-application datasets: schema, CSV I/O, cleaning, splitting.

Attribute values are stored as floats for continuous attributes and as
integer category indices for categorical/binary ones. Missing cells are
``None`` until :func:`prune_attributes` imputes or removes them; cleaned
datasets never expose a missing value downstream.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import ContractError, EmptyDatasetError, ParseError, SchemaError

ACCEPTED = "accepted"
REJECTED = "rejected"
LABELS = (ACCEPTED, REJECTED)

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
BINARY = "binary"
KINDS = (CONTINUOUS, CATEGORICAL, BINARY)

ID_COLUMN = "id"
SCHEMA_FORMAT = "loanlens-schema"
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class AttributeSpec:
    """One column of a loan dataset."""

    name: str
    kind: str
    categories: tuple[str, ...] = ()
    provenance: str = ""
    sensitive: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"unknown attribute kind {self.kind!r} for {self.name!r}")
        object.__setattr__(self, "categories", tuple(self.categories))
        if self.kind == CONTINUOUS and self.categories:
            raise ContractError(f"continuous attribute {self.name!r} must not list categories")
        if self.kind == CATEGORICAL and len(self.categories) < 2:
            raise ContractError(f"categorical attribute {self.name!r} needs >= 2 categories")
        if self.kind == BINARY and len(self.categories) != 2:
            raise ContractError(f"binary attribute {self.name!r} needs exactly 2 categories")
        if len(set(self.categories)) != len(self.categories):
            raise ContractError(f"duplicate categories on attribute {self.name!r}")

    @property
    def is_categorical(self) -> bool:
        return self.kind in (CATEGORICAL, BINARY)

    def category_index(self, label: str) -> int:
        try:
            return self.categories.index(label)
        except ValueError:
            raise ContractError(
                f"{label!r} is not a category of attribute {self.name!r}"
            ) from None

    def display_value(self, value: float) -> Any:
        """Raw value for UIs: category label, or the number itself."""
        if self.is_categorical:
            return self.categories[int(value)]
        return value


@dataclass(frozen=True)
class Application:
    """One loan application. ``values`` maps attribute name to scalar."""

    id: str
    values: Mapping[str, float | None]
    label: str | None = None

    def __post_init__(self):
        if self.label is not None and self.label not in LABELS:
            raise ContractError(f"application {self.id}: bad label {self.label!r}")

    def value(self, name: str) -> float:
        try:
            v = self.values[name]
        except KeyError:
            raise ContractError(f"application {self.id} lacks attribute {name!r}") from None
        if v is None:
            raise ContractError(f"application {self.id} has no value for {name!r}")
        return v


@dataclass(frozen=True)
class Dataset:
    """An ordered attribute schema plus the applications that conform to it."""

    attributes: tuple[AttributeSpec, ...]
    applications: tuple[Application, ...]
    label_name: str = "decision"
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        object.__setattr__(self, "applications", tuple(self.applications))
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise ContractError("attribute names must be unique")
        name_set = set(names)
        for app in self.applications:
            if set(app.values.keys()) != name_set:
                raise ContractError(
                    f"application {app.id} does not conform to the attribute list"
                )
            for spec in self.attributes:
                v = app.values[spec.name]
                if v is None:
                    continue
                if spec.is_categorical:
                    idx = int(v)
                    if idx != v or not 0 <= idx < len(spec.categories):
                        raise ContractError(
                            f"application {app.id}: {spec.name}={v!r} is not a valid "
                            f"category index"
                        )

    @property
    def attribute_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes)

    def spec(self, name: str) -> AttributeSpec:
        for a in self.attributes:
            if a.name == name:
                return a
        raise ContractError(f"no attribute named {name!r}")

    def missing_rate(self, name: str) -> float:
        if not self.applications:
            return 0.0
        missing = sum(1 for app in self.applications if app.values[name] is None)
        return missing / len(self.applications)

    def application(self, app_id: str) -> Application:
        for app in self.applications:
            if app.id == app_id:
                return app
        raise ContractError(f"no application with id {app_id!r}")

    def schema_hash(self) -> str:
        return schema_hash(self.attributes)


def schema_hash(attributes: Sequence[AttributeSpec]) -> str:
    doc = [
        {"name": a.name, "kind": a.kind, "categories": list(a.categories)}
        for a in attributes
    ]
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# schema sidecar (JSON) and CSV I/O
# ---------------------------------------------------------------------------

def save_schema(dataset: Dataset, path: str | Path) -> None:
    doc = {
        "format": SCHEMA_FORMAT,
        "version": SCHEMA_VERSION,
        "label_name": dataset.label_name,
        "attributes": [
            {
                "name": a.name,
                "kind": a.kind,
                "categories": list(a.categories),
                "provenance": a.provenance,
                "sensitive": a.sensitive,
            }
            for a in dataset.attributes
        ],
        "metadata": dict(dataset.metadata),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_schema(path: str | Path) -> tuple[tuple[AttributeSpec, ...], str, dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != SCHEMA_FORMAT:
        raise SchemaError(f"{path}: not a {SCHEMA_FORMAT} file")
    specs = tuple(
        AttributeSpec(
            name=a["name"],
            kind=a["kind"],
            categories=tuple(a.get("categories", ())),
            provenance=a.get("provenance", ""),
            sensitive=bool(a.get("sensitive", False)),
        )
        for a in doc["attributes"]
    )
    return specs, doc.get("label_name", "decision"), dict(doc.get("metadata", {}))


def save_csv(dataset: Dataset, path: str | Path) -> None:
    """UTF-8 comma-separated export; empty cell marks a missing value."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([ID_COLUMN, *dataset.attribute_names, dataset.label_name])
        for app in dataset.applications:
            row: list[str] = [app.id]
            for spec in dataset.attributes:
                v = app.values[spec.name]
                if v is None:
                    row.append("")
                elif spec.is_categorical:
                    row.append(spec.categories[int(v)])
                else:
                    row.append(repr(float(v)))
            row.append(app.label or "")
            writer.writerow(row)


def load_csv(
    path: str | Path,
    schema: Sequence[AttributeSpec],
    label_name: str = "decision",
    metadata: Mapping[str, Any] | None = None,
) -> Dataset:
    """Parse a CSV whose header is ``id, <attributes...>, <label_name>``.

    Missing cells (empty strings) are recorded as absent, never coerced to
    zero. Raises :class:`SchemaError` when the column set differs from the
    schema and :class:`ParseError` (with the row number) on malformed cells.
    """
    schema = tuple(schema)
    by_name = {a.name: a for a in schema}
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        expected = [ID_COLUMN, *[a.name for a in schema], label_name]
        if header != expected:
            unknown = sorted(set(header) - set(expected))
            missing = sorted(set(expected) - set(header))
            raise SchemaError(
                f"{path}: header does not match schema "
                f"(unknown columns: {unknown}, missing columns: {missing})"
            )
        apps: list[Application] = []
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(expected):
                raise ParseError(f"{path}:{row_no}: expected {len(expected)} cells", row=row_no)
            app_id = row[0]
            values: dict[str, float | None] = {}
            for cell, name in zip(row[1:-1], expected[1:-1]):
                spec = by_name[name]
                if cell == "":
                    values[name] = None
                elif spec.is_categorical:
                    if cell not in spec.categories:
                        raise ParseError(
                            f"{path}:{row_no}: {cell!r} is not a category of {name!r}",
                            row=row_no,
                        )
                    values[name] = float(spec.categories.index(cell))
                else:
                    try:
                        values[name] = float(cell)
                    except ValueError:
                        raise ParseError(
                            f"{path}:{row_no}: non-numeric value {cell!r} in continuous "
                            f"column {name!r}",
                            row=row_no,
                        ) from None
            label_cell = row[-1]
            if label_cell == "":
                label = None
            elif label_cell in LABELS:
                label = label_cell
            else:
                raise ParseError(
                    f"{path}:{row_no}: bad label {label_cell!r}", row=row_no
                )
            apps.append(Application(id=app_id, values=values, label=label))
    return Dataset(
        attributes=schema,
        applications=tuple(apps),
        label_name=label_name,
        metadata=dict(metadata or {}),
    )


# ---------------------------------------------------------------------------
# cleaning and splitting
# ---------------------------------------------------------------------------

def prune_attributes(dataset: Dataset, max_missing_rate: float = 0.10) -> Dataset:
    """Drop attributes whose missing rate exceeds the threshold (strictly),
    then impute the survivors' missing values: median for continuous,
    mode for categorical (ties resolved to the lowest category index).
    """
    if not 0 < max_missing_rate < 1:
        raise ContractError("max_missing_rate must lie strictly between 0 and 1")
    kept: list[AttributeSpec] = []
    pruned: list[str] = []
    for spec in dataset.attributes:
        if dataset.missing_rate(spec.name) > max_missing_rate:
            pruned.append(spec.name)
        else:
            kept.append(spec)
    if not kept:
        raise EmptyDatasetError("every attribute exceeded the missing-rate threshold")

    imputed: dict[str, float] = {}
    fills: dict[str, float] = {}
    for spec in kept:
        present = [
            app.values[spec.name]
            for app in dataset.applications
            if app.values[spec.name] is not None
        ]
        if len(present) == len(dataset.applications):
            continue
        if not present:
            raise EmptyDatasetError(f"attribute {spec.name!r} has no observed values")
        if spec.is_categorical:
            counts = np.bincount([int(v) for v in present], minlength=len(spec.categories))
            fills[spec.name] = float(int(np.argmax(counts)))
        else:
            fills[spec.name] = float(np.median(present))
        imputed[spec.name] = fills[spec.name]

    apps = []
    for app in dataset.applications:
        values = {}
        for spec in kept:
            v = app.values[spec.name]
            values[spec.name] = fills[spec.name] if v is None else v
        apps.append(Application(id=app.id, values=values, label=app.label))

    metadata = dict(dataset.metadata)
    metadata["pruning"] = {
        "max_missing_rate": max_missing_rate,
        "pruned_attributes": pruned,
        "imputed_values": imputed,
        "imputation": "median (continuous) / mode (categorical)",
    }
    return Dataset(
        attributes=tuple(kept),
        applications=tuple(apps),
        label_name=dataset.label_name,
        metadata=metadata,
    )


def split(dataset: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Deterministic disjoint partition with ``round(n * train_fraction)``
    applications in the training part."""
    if not 0 < train_fraction < 1:
        raise ContractError("train_fraction must lie strictly between 0 and 1")
    n = len(dataset.applications)
    n_train = int(round(n * train_fraction))
    order = np.random.default_rng(seed).permutation(n)
    train_idx = set(order[:n_train].tolist())
    train_apps = tuple(a for i, a in enumerate(dataset.applications) if i in train_idx)
    test_apps = tuple(a for i, a in enumerate(dataset.applications) if i not in train_idx)
    meta = dict(dataset.metadata)
    meta["split"] = {"train_fraction": train_fraction, "seed": seed}
    mk = lambda apps, part: Dataset(
        attributes=dataset.attributes,
        applications=apps,
        label_name=dataset.label_name,
        metadata={**meta, "part": part},
    )
    return mk(train_apps, "train"), mk(test_apps, "test")


def subset(dataset: Dataset, ids: Iterable[str]) -> Dataset:
    wanted = set(ids)
    apps = tuple(a for a in dataset.applications if a.id in wanted)
    return Dataset(
        attributes=dataset.attributes,
        applications=apps,
        label_name=dataset.label_name,
        metadata=dict(dataset.metadata),
    )
