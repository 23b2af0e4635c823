"""CSV ingestion with one-hot encoding, grid snapping, and 60/20/20 splits."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DataFormatError
from .schema import (BinaryFeature, CategoricalFeature, FeatureSchema, NumericFeature,
                     OrdinalFeature, Point, exact_number, number_str)

TRAIN_FRACTION = Fraction(3, 5)
VAL_FRACTION = Fraction(1, 5)


@dataclass(frozen=True)
class DatasetBundle:
    schema: FeatureSchema
    points: tuple[Point, ...]
    labels: tuple[int, ...]
    label_names: tuple[str, ...]
    train_idx: tuple[int, ...]
    val_idx: tuple[int, ...]
    test_idx: tuple[int, ...]
    seed: int

    def subset(self, idx):
        return [self.points[i] for i in idx], [self.labels[i] for i in idx]

    @property
    def train(self):
        return self.subset(self.train_idx)

    @property
    def val(self):
        return self.subset(self.val_idx)

    @property
    def test(self):
        return self.subset(self.test_idx)

    def write_csv(self, path: str, label_column: str = "label") -> None:
        """Serialize rows back out (feature order, exact value strings)."""
        schema = self.schema
        header = [f.name for f in schema.features] + [label_column]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for p, y in zip(self.points, self.labels):
                row = []
                for (tag, idx), feat in zip(schema.layout, schema.features):
                    if tag == "i":
                        axis = schema.interval_axes[idx]
                        v = axis.value(p.ivals[idx])
                        row.append(number_str(v) if axis.kind == "numeric" else str(int(v)))
                    else:
                        row.append(schema.groups[idx].categories[p.cats[idx]])
                row.append(self.label_names[y])
                w.writerow(row)


def _split_sizes(n: int) -> tuple[int, int, int]:
    n_train = int(round(TRAIN_FRACTION * n))
    n_val = int(round(VAL_FRACTION * n))
    n_test = n - n_train - n_val
    return n_train, n_val, n_test


def ingest_csv(path: str, schema_config: dict, label_column: str,
               seed: int = 0) -> DatasetBundle:
    """Read a header CSV, validate and snap every cell, split 60/20/20.

    Numeric features may omit lo/hi in the config; the observed min/max are
    then recorded (snapped outward to the grid). Unknown categories,
    non-numeric cells and missing labels raise row-indexed errors. Duplicate
    rows are preserved.
    """
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataFormatError(f"{path}: missing header row")
        rows = list(reader)
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    if label_column not in rows[0]:
        raise DataFormatError(f"{path}: no column named {label_column!r}")

    features_cfg = schema_config.get("features")
    if not features_cfg:
        raise DataFormatError("schema config must list features")
    for spec in features_cfg:
        if spec.get("name") is None:
            raise DataFormatError("every feature in the config needs a name")
        if spec["name"] not in rows[0]:
            raise DataFormatError(f"{path}: no column named {spec['name']!r}")

    def cell(row_i: int, name: str) -> str:
        v = rows[row_i].get(name)
        if v is None or v == "":
            raise DataFormatError(f"{path}: row {row_i}: missing value for {name!r}")
        return v

    # resolve numeric ranges where the config leaves them open
    feats = []
    for spec in features_cfg:
        kind = spec.get("kind")
        name = spec["name"]
        if kind == "numeric":
            delta = exact_number(spec["delta"])
            if "lo" in spec and "hi" in spec:
                lo, hi = exact_number(spec["lo"]), exact_number(spec["hi"])
            else:
                vals = []
                for i in range(len(rows)):
                    try:
                        vals.append(exact_number(cell(i, name)))
                    except DataFormatError as exc:
                        raise DataFormatError(
                            f"{path}: row {i}: non-numeric cell in {name!r}"
                        ) from exc
                lo_raw, hi_raw = min(vals), max(vals)
                lo = Fraction((lo_raw / delta).__floor__()) * delta
                hi = Fraction(-((-hi_raw / delta).__floor__())) * delta
                if lo == hi:
                    hi = lo + delta
            feats.append(NumericFeature(name, lo, hi, delta))
        elif kind == "ordinal":
            feats.append(OrdinalFeature(name, int(spec["levels"])))
        elif kind == "binary":
            feats.append(BinaryFeature(name))
        elif kind == "categorical":
            cats = spec.get("categories")
            if cats is None:
                cats = sorted({cell(i, name) for i in range(len(rows))})
            feats.append(CategoricalFeature(name, tuple(str(c) for c in cats)))
        else:
            raise DataFormatError(f"{name}: unknown feature kind {kind!r}")
    schema = FeatureSchema(feats)

    points: list[Point] = []
    raw_labels: list[str] = []
    for i in range(len(rows)):
        ivals: list[int] = []
        cats: list[int] = []
        for (tag, idx), feat in zip(schema.layout, schema.features):
            v = cell(i, feat.name)
            if tag == "i":
                axis = schema.interval_axes[idx]
                try:
                    num = exact_number(v)
                except DataFormatError as exc:
                    raise DataFormatError(
                        f"{path}: row {i}: non-numeric cell in {feat.name!r}"
                    ) from exc
                if axis.kind == "numeric":
                    ivals.append(axis.snap_index(num))
                else:
                    if num.denominator != 1 or not 0 <= num < axis.size:
                        raise DataFormatError(
                            f"{path}: row {i}: {feat.name!r} value {v} out of range"
                        )
                    ivals.append(int(num))
            else:
                grp = schema.groups[idx]
                if v not in grp.categories:
                    raise DataFormatError(
                        f"{path}: row {i}: unknown category {v!r} for {feat.name!r}"
                    )
                cats.append(grp.categories.index(v))
        points.append(Point(tuple(ivals), tuple(cats)))
        raw_labels.append(cell(i, label_column))

    label_names = tuple(sorted(set(raw_labels)))
    label_ids = {name: j for j, name in enumerate(label_names)}
    labels = tuple(label_ids[v] for v in raw_labels)

    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(rows))
    n_train, n_val, _ = _split_sizes(len(rows))
    train_idx = tuple(sorted(int(i) for i in perm[:n_train]))
    val_idx = tuple(sorted(int(i) for i in perm[n_train:n_train + n_val]))
    test_idx = tuple(sorted(int(i) for i in perm[n_train + n_val:]))
    return DatasetBundle(
        schema=schema,
        points=tuple(points),
        labels=labels,
        label_names=label_names,
        train_idx=train_idx,
        val_idx=val_idx,
        test_idx=test_idx,
        seed=seed,
    )
