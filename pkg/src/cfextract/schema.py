"""Quantized feature spaces: feature declarations, compiled axis tables, points.

Numeric features carry an explicit grid step, so the whole input domain is a
finite grid. Everything downstream (membership, splitting, distances,
equivalence) works on integer grid indices, which keeps the geometry exact.
Exact rationals (and decimal strings) only appear at the file boundary.

Axis accounting: a categorical feature with k categories contributes k
one-hot axes, so the total axis count is
``m = #numeric + #binary + #ordinal + sum(k_j)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import ClassVar, Sequence, Union

from .errors import ContractViolation, DataFormatError


def exact_number(x) -> Fraction:
    """Parse a number into an exact Fraction.

    Floats go through ``repr``, so a JSON ``0.1`` means literally 1/10.
    Strings accept both decimal ("0.25") and ratio ("1/3") forms.
    """
    if isinstance(x, bool):
        raise DataFormatError(f"expected a number, got {x!r}")
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    if isinstance(x, str):
        try:
            return Fraction(x)
        except (ValueError, ZeroDivisionError) as exc:
            raise DataFormatError(f"cannot parse number {x!r}") from exc
    raise DataFormatError(f"cannot interpret {x!r} as an exact number")


def number_str(v: Fraction) -> str:
    """Exact string form: terminating decimal when possible, else 'p/q'."""
    num, den = v.numerator, v.denominator
    if den == 1:
        return str(num)
    e2 = e5 = 0
    d = den
    while d % 2 == 0:
        d //= 2
        e2 += 1
    while d % 5 == 0:
        d //= 5
        e5 += 1
    if d != 1:
        return f"{num}/{den}"
    exp = max(e2, e5)
    scaled = abs(num) * 10**exp // den
    digits = str(scaled).rjust(exp + 1, "0")
    head, tail = digits[:-exp], digits[-exp:]
    sign = "-" if num < 0 else ""
    return f"{sign}{head}.{tail}"


@dataclass(frozen=True)
class NumericFeature:
    """A real-valued feature on the grid {lo, lo+delta, ..., hi}."""

    name: str
    lo: Fraction
    hi: Fraction
    delta: Fraction
    kind: ClassVar[str] = "numeric"

    def __post_init__(self):
        object.__setattr__(self, "lo", exact_number(self.lo))
        object.__setattr__(self, "hi", exact_number(self.hi))
        object.__setattr__(self, "delta", exact_number(self.delta))
        if self.delta <= 0:
            raise DataFormatError(f"{self.name}: delta must be positive")
        if not self.lo < self.hi:
            raise DataFormatError(f"{self.name}: requires lo < hi")
        steps = (self.hi - self.lo) / self.delta
        if steps.denominator != 1:
            raise DataFormatError(
                f"{self.name}: (hi - lo)/delta = {steps} is not an integer"
            )

    @property
    def steps(self) -> int:
        return int((self.hi - self.lo) / self.delta)


@dataclass(frozen=True)
class OrdinalFeature:
    """An integer-leveled feature taking values 0 .. levels-1."""

    name: str
    levels: int
    kind: ClassVar[str] = "ordinal"

    def __post_init__(self):
        if not isinstance(self.levels, int) or self.levels < 2:
            raise DataFormatError(f"{self.name}: ordinal needs levels >= 2")


@dataclass(frozen=True)
class BinaryFeature:
    name: str
    kind: ClassVar[str] = "binary"


@dataclass(frozen=True)
class CategoricalFeature:
    """A k-way categorical feature, represented as a one-hot group of k axes."""

    name: str
    categories: tuple[str, ...]
    kind: ClassVar[str] = "categorical"

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(self.categories))
        if len(self.categories) < 2:
            raise DataFormatError(f"{self.name}: categorical needs k >= 2")
        if len(set(self.categories)) != len(self.categories):
            raise DataFormatError(f"{self.name}: duplicate category names")

    @property
    def k(self) -> int:
        return len(self.categories)


FeatureSpec = Union[NumericFeature, OrdinalFeature, BinaryFeature, CategoricalFeature]


@dataclass(frozen=True)
class IntervalAxis:
    """Compiled view of a numeric/ordinal/binary feature.

    Grid indices run 0 .. size-1; ``value(i) = lo + i*step``.
    """

    name: str
    kind: str
    size: int
    lo: Fraction
    step: Fraction
    global_axis: int
    feature_index: int

    def value(self, idx: int) -> Fraction:
        return self.lo + idx * self.step

    def index(self, value) -> int:
        v = exact_number(value)
        q = (v - self.lo) / self.step
        if q.denominator != 1:
            raise ContractViolation(
                f"axis {self.name}: value {number_str(v)} is off-grid"
            )
        i = int(q)
        if not 0 <= i < self.size:
            raise ContractViolation(
                f"axis {self.name}: value {number_str(v)} outside [lo, hi]"
            )
        return i

    def snap_index(self, value) -> int:
        """Nearest grid index for a possibly off-grid value, clamped in range."""
        v = exact_number(value)
        q = (v - self.lo) / self.step
        i = (2 * q.numerator + q.denominator) // (2 * q.denominator)
        return min(max(int(i), 0), self.size - 1)


@dataclass(frozen=True)
class CategoryGroup:
    """Compiled view of a categorical feature's one-hot axis group."""

    name: str
    categories: tuple[str, ...]
    global_axis0: int
    feature_index: int

    @property
    def k(self) -> int:
        return len(self.categories)


@dataclass(frozen=True)
class Point:
    """A grid point: one index per interval axis, one category per group."""

    ivals: tuple[int, ...]
    cats: tuple[int, ...]


class FeatureSchema:
    """An ordered feature list compiled into flat axis tables."""

    def __init__(self, features: Sequence[FeatureSpec]):
        features = tuple(features)
        if not features:
            raise DataFormatError("schema needs at least one feature")
        names = [f.name for f in features]
        if len(set(names)) != len(names):
            raise DataFormatError("duplicate feature names")
        self.features: tuple[FeatureSpec, ...] = features

        interval_axes: list[IntervalAxis] = []
        groups: list[CategoryGroup] = []
        layout: list[tuple[str, int]] = []  # per feature: ("i", idx) or ("g", idx)
        axis_names: list[str] = []
        axis_table: list[tuple] = []  # per global axis: ("i", iv) or ("g", g, cat)
        g_axis = 0
        for fi, f in enumerate(features):
            if isinstance(f, NumericFeature):
                interval_axes.append(
                    IntervalAxis(f.name, "numeric", f.steps + 1, f.lo, f.delta, g_axis, fi)
                )
                layout.append(("i", len(interval_axes) - 1))
                axis_table.append(("i", len(interval_axes) - 1))
                axis_names.append(f.name)
                g_axis += 1
            elif isinstance(f, OrdinalFeature):
                interval_axes.append(
                    IntervalAxis(f.name, "ordinal", f.levels, Fraction(0), Fraction(1), g_axis, fi)
                )
                layout.append(("i", len(interval_axes) - 1))
                axis_table.append(("i", len(interval_axes) - 1))
                axis_names.append(f.name)
                g_axis += 1
            elif isinstance(f, BinaryFeature):
                interval_axes.append(
                    IntervalAxis(f.name, "binary", 2, Fraction(0), Fraction(1), g_axis, fi)
                )
                layout.append(("i", len(interval_axes) - 1))
                axis_table.append(("i", len(interval_axes) - 1))
                axis_names.append(f.name)
                g_axis += 1
            elif isinstance(f, CategoricalFeature):
                gi = len(groups)
                groups.append(CategoryGroup(f.name, f.categories, g_axis, fi))
                layout.append(("g", gi))
                for c, cname in enumerate(f.categories):
                    axis_table.append(("g", gi, c))
                    axis_names.append(f"{f.name}={cname}")
                g_axis += f.k
            else:  # pragma: no cover - guarded by typing
                raise DataFormatError(f"unknown feature spec {f!r}")

        self.interval_axes: tuple[IntervalAxis, ...] = tuple(interval_axes)
        self.groups: tuple[CategoryGroup, ...] = tuple(groups)
        self.layout: tuple[tuple[str, int], ...] = tuple(layout)
        self.axis_names: tuple[str, ...] = tuple(axis_names)
        self.axis_table: tuple[tuple, ...] = tuple(axis_table)
        self.m: int = g_axis
        self.iv_sizes: tuple[int, ...] = tuple(a.size for a in self.interval_axes)
        self.group_sizes: tuple[int, ...] = tuple(g.k for g in self.groups)

    # -- identity ---------------------------------------------------------
    def __eq__(self, other) -> bool:
        return isinstance(other, FeatureSchema) and self.features == other.features

    def __hash__(self) -> int:
        return hash(self.features)

    def __repr__(self) -> str:
        return f"FeatureSchema({len(self.features)} features, m={self.m})"

    # -- sizes ------------------------------------------------------------
    @property
    def grid_size(self) -> int:
        """Total number of grid points in the domain."""
        n = 1
        for s in self.iv_sizes:
            n *= s
        for k in self.group_sizes:
            n *= k
        return n

    # -- points -----------------------------------------------------------
    def validate_point(self, p: Point) -> None:
        if len(p.ivals) != len(self.interval_axes) or len(p.cats) != len(self.groups):
            raise ContractViolation("point has wrong arity for this schema")
        for axis, v in zip(self.interval_axes, p.ivals):
            if not 0 <= v < axis.size:
                raise ContractViolation(f"axis {axis.name}: index {v} out of range")
        for grp, c in zip(self.groups, p.cats):
            if not 0 <= c < grp.k:
                raise ContractViolation(f"group {grp.name}: category {c} out of range")

    def point_of(self, *feature_values) -> Point:
        """Build a point from one value per feature (categories by index or name)."""
        if len(feature_values) != len(self.features):
            raise ContractViolation("expected one value per feature")
        ivals: list[int] = []
        cats: list[int] = []
        for (tag, idx), v in zip(self.layout, feature_values):
            if tag == "i":
                ivals.append(self.interval_axes[idx].index(v))
            else:
                grp = self.groups[idx]
                if isinstance(v, str):
                    if v not in grp.categories:
                        raise ContractViolation(f"group {grp.name}: unknown category {v!r}")
                    cats.append(grp.categories.index(v))
                else:
                    if not 0 <= int(v) < grp.k:
                        raise ContractViolation(f"group {grp.name}: category {v} out of range")
                    cats.append(int(v))
        return Point(tuple(ivals), tuple(cats))

    def axis_values(self, p: Point) -> list:
        """Expand a point to its m-axis value vector (one-hot groups expanded)."""
        out: list = []
        for entry in self.axis_table:
            if entry[0] == "i":
                out.append(self.interval_axes[entry[1]].value(p.ivals[entry[1]]))
            else:
                _, gi, c = entry
                out.append(1 if p.cats[gi] == c else 0)
        return out

    def point_from_axis_values(self, values: Sequence) -> Point:
        if len(values) != self.m:
            raise ContractViolation(f"expected {self.m} axis values, got {len(values)}")
        ivals: list[int] = [0] * len(self.interval_axes)
        cats: list[int] = [-1] * len(self.groups)
        for entry, v in zip(self.axis_table, values):
            if entry[0] == "i":
                ivals[entry[1]] = self.interval_axes[entry[1]].index(v)
            else:
                _, gi, c = entry
                bit = int(exact_number(v))
                if bit not in (0, 1):
                    raise ContractViolation("one-hot axis value must be 0 or 1")
                if bit == 1:
                    if cats[gi] != -1:
                        raise ContractViolation(
                            f"group {self.groups[gi].name}: more than one active category"
                        )
                    cats[gi] = c
        for gi, c in enumerate(cats):
            if c == -1:
                raise ContractViolation(f"group {self.groups[gi].name}: no active category")
        return Point(tuple(ivals), tuple(cats))

    def point_json(self, p: Point) -> list:
        out: list = []
        for entry in self.axis_table:
            if entry[0] == "i":
                axis = self.interval_axes[entry[1]]
                v = axis.value(p.ivals[entry[1]])
                out.append(number_str(v) if axis.kind == "numeric" else int(v))
            else:
                _, gi, c = entry
                out.append(1 if p.cats[gi] == c else 0)
        return out

    def point_from_json(self, values: Sequence) -> Point:
        return self.point_from_axis_values(values)

    def lex_key(self, p: Point) -> tuple:
        """Feature-order comparison key (monotone in axis values)."""
        key: list[int] = []
        for tag, idx in self.layout:
            key.append(p.ivals[idx] if tag == "i" else p.cats[idx])
        return tuple(key)

    # -- serialization ----------------------------------------------------
    def to_config(self) -> dict:
        feats = []
        for f in self.features:
            if isinstance(f, NumericFeature):
                feats.append(
                    {
                        "name": f.name,
                        "kind": "numeric",
                        "lo": number_str(f.lo),
                        "hi": number_str(f.hi),
                        "delta": number_str(f.delta),
                    }
                )
            elif isinstance(f, OrdinalFeature):
                feats.append({"name": f.name, "kind": "ordinal", "levels": f.levels})
            elif isinstance(f, BinaryFeature):
                feats.append({"name": f.name, "kind": "binary"})
            else:
                feats.append(
                    {"name": f.name, "kind": "categorical", "categories": list(f.categories)}
                )
        return {"features": feats}

    @staticmethod
    def from_config(config: dict) -> "FeatureSchema":
        if not isinstance(config, dict) or "features" not in config:
            raise DataFormatError("schema config must be an object with a 'features' list")
        feats: list[FeatureSpec] = []
        for i, entry in enumerate(config["features"]):
            kind = entry.get("kind")
            name = entry.get("name", f"f{i}")
            if kind == "numeric":
                try:
                    feats.append(
                        NumericFeature(name, entry["lo"], entry["hi"], entry["delta"])
                    )
                except KeyError as exc:
                    raise DataFormatError(f"{name}: numeric needs lo/hi/delta") from exc
            elif kind == "ordinal":
                feats.append(OrdinalFeature(name, int(entry["levels"])))
            elif kind == "binary":
                feats.append(BinaryFeature(name))
            elif kind == "categorical":
                cats = entry.get("categories")
                if cats is None:
                    k = int(entry.get("k", 0))
                    cats = [str(j) for j in range(k)]
                feats.append(CategoricalFeature(name, tuple(str(c) for c in cats)))
            else:
                raise DataFormatError(f"{name}: unknown feature kind {kind!r}")
        return FeatureSchema(feats)


def save_schema(path: str, schema: FeatureSchema) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema.to_config(), fh, indent=2)
        fh.write("\n")


def load_schema(path: str) -> FeatureSchema:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            config = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: not valid JSON ({exc})") from exc
    return FeatureSchema.from_config(config)
