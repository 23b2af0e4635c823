"""Axis-aligned regions of a quantized feature space and their algebra.

A region is a product of inclusive grid-index intervals (one per
numeric/ordinal/binary axis) and non-empty allowed-category sets (one per
one-hot group). Regions are always non-empty by construction. All operations
here are pure and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ContractViolation
from .schema import FeatureSchema, Point, number_str


@dataclass(frozen=True)
class Region:
    intervals: tuple[tuple[int, int], ...]
    allowed: tuple[frozenset[int], ...]

    def __post_init__(self):
        for a, b in self.intervals:
            if a > b:
                raise ContractViolation(f"empty interval [{a}, {b}]")
        for s in self.allowed:
            if not s:
                raise ContractViolation("empty allowed-category set")

    @property
    def volume(self) -> int:
        n = 1
        for a, b in self.intervals:
            n *= b - a + 1
        for s in self.allowed:
            n *= len(s)
        return n


@dataclass(frozen=True)
class SplitStep:
    """One axis cut peeled off by ``split``.

    For interval cuts the reconstruction test is "value <= threshold goes
    left"; for category cuts it is "category == category goes left".
    ``x_left`` says which child the peeled x-side piece becomes.
    """

    axis: int  # global axis index
    iv_axis: int | None = None
    threshold: int | None = None
    group: int | None = None
    category: int | None = None
    x_left: bool = False


def full_region(schema: FeatureSchema) -> Region:
    return Region(
        tuple((0, size - 1) for size in schema.iv_sizes),
        tuple(frozenset(range(k)) for k in schema.group_sizes),
    )


def contains(region: Region, p: Point) -> bool:
    for (a, b), v in zip(region.intervals, p.ivals):
        if not a <= v <= b:
            return False
    for s, c in zip(region.allowed, p.cats):
        if c not in s:
            return False
    return True


def grid_volume(region: Region, schema: FeatureSchema) -> int:
    """Exact number of grid points in ``region`` under ``schema``."""
    if len(region.intervals) != len(schema.iv_sizes) or len(region.allowed) != len(
        schema.group_sizes
    ):
        raise ContractViolation("region has wrong arity for this schema")
    for (a, b), size in zip(region.intervals, schema.iv_sizes):
        if not (0 <= a and b < size):
            raise ContractViolation("region exceeds schema bounds")
    for s, k in zip(region.allowed, schema.group_sizes):
        if max(s) >= k or min(s) < 0:
            raise ContractViolation("region allows unknown categories")
    return region.volume


def center(region: Region) -> Point:
    """Center grid point: interval midpoints rounded down, lowest allowed category."""
    ivals = tuple((a + b) // 2 for a, b in region.intervals)
    cats = tuple(min(s) for s in region.allowed)
    return Point(ivals, cats)


def intersect(a: Region, b: Region) -> Region | None:
    intervals = []
    for (al, ah), (bl, bh) in zip(a.intervals, b.intervals):
        lo, hi = max(al, bl), min(ah, bh)
        if lo > hi:
            return None
        intervals.append((lo, hi))
    allowed = []
    for sa, sb in zip(a.allowed, b.allowed):
        s = sa & sb
        if not s:
            return None
        allowed.append(s)
    return Region(tuple(intervals), tuple(allowed))


def subtract(a: Region, b: Region) -> list[Region]:
    """Disjoint pieces covering a minus b (guillotine peel)."""
    inter = intersect(a, b)
    if inter is None:
        return [a]
    pieces: list[Region] = []
    cur_iv = list(a.intervals)
    cur_al = list(a.allowed)

    def emit(iv_override=None, al_override=None):
        iv = list(cur_iv)
        al = list(cur_al)
        if iv_override is not None:
            iv[iv_override[0]] = iv_override[1]
        if al_override is not None:
            al[al_override[0]] = al_override[1]
        pieces.append(Region(tuple(iv), tuple(al)))

    for i, ((al_, ah_), (bl_, bh_)) in enumerate(zip(a.intervals, inter.intervals)):
        if al_ < bl_:
            emit(iv_override=(i, (al_, bl_ - 1)))
        if ah_ > bh_:
            emit(iv_override=(i, (bh_ + 1, ah_)))
        cur_iv[i] = (bl_, bh_)
    for g, (sa, sb) in enumerate(zip(a.allowed, inter.allowed)):
        extra = sa - sb
        if extra:
            emit(al_override=(g, frozenset(extra)))
        cur_al[g] = sb
    return pieces


def split(
    region: Region, x: Point, x_cf: Point, schema: FeatureSchema
) -> tuple[list[Region], list[SplitStep]]:
    """Partition ``region`` along the axes where ``x`` and ``x_cf`` differ.

    Iterates differing axes in ascending global order, peeling off the side
    containing ``x`` each time; the final remainder contains ``x_cf``. Returns
    the pieces in peel order (remainder last) together with one SplitStep per
    peeled piece. Empty peels (possible within a one-hot group) are skipped.
    """
    if not contains(region, x):
        raise ContractViolation("query point outside region")
    if not contains(region, x_cf):
        raise ContractViolation("counterfactual outside region")
    if x == x_cf:
        raise ContractViolation("query equals counterfactual")

    events: list[tuple[int, tuple]] = []
    for iv, axis in enumerate(schema.interval_axes):
        if x.ivals[iv] != x_cf.ivals[iv]:
            events.append((axis.global_axis, ("i", iv)))
    for gi, grp in enumerate(schema.groups):
        cx, cv = x.cats[gi], x_cf.cats[gi]
        if cx != cv:
            events.append((grp.global_axis0 + cx, ("g", gi, cx, True)))
            events.append((grp.global_axis0 + cv, ("g", gi, cv, False)))
    events.sort(key=lambda e: e[0])

    pieces: list[Region] = []
    steps: list[SplitStep] = []
    rem_iv = list(region.intervals)
    rem_al = list(region.allowed)

    def region_with(iv_override=None, al_override=None) -> Region:
        iv = list(rem_iv)
        al = list(rem_al)
        if iv_override is not None:
            iv[iv_override[0]] = iv_override[1]
        if al_override is not None:
            al[al_override[0]] = al_override[1]
        return Region(tuple(iv), tuple(al))

    for g_axis, ev in events:
        if ev[0] == "i":
            iv = ev[1]
            a, b = rem_iv[iv]
            v = x_cf.ivals[iv]
            if v < x.ivals[iv]:
                # counterfactual below the query: x side keeps values >= v+1
                piece = region_with(iv_override=(iv, (v + 1, b)))
                rem_iv[iv] = (a, v)
                steps.append(
                    SplitStep(axis=g_axis, iv_axis=iv, threshold=v, x_left=False)
                )
            else:
                # counterfactual above: x side keeps values <= v-1
                piece = region_with(iv_override=(iv, (a, v - 1)))
                rem_iv[iv] = (v, b)
                steps.append(
                    SplitStep(axis=g_axis, iv_axis=iv, threshold=v - 1, x_left=True)
                )
            pieces.append(piece)
        else:
            gi, cat, is_x_cat = ev[1], ev[2], ev[3]
            s = rem_al[gi]
            if is_x_cat:
                # peel {category == cat}; remainder drops cat
                side = frozenset({cat}) & s
                rest = s - {cat}
                if not side or not rest:
                    continue
                pieces.append(region_with(al_override=(gi, side)))
                rem_al[gi] = rest
                steps.append(SplitStep(axis=g_axis, group=gi, category=cat, x_left=True))
            else:
                # peel {category != cat}; remainder keeps only cat
                side = s - {cat}
                if not side or cat not in s:
                    continue
                pieces.append(region_with(al_override=(gi, frozenset(side))))
                rem_al[gi] = frozenset({cat})
                steps.append(SplitStep(axis=g_axis, group=gi, category=cat, x_left=False))

    pieces.append(Region(tuple(rem_iv), tuple(rem_al)))
    return pieces, steps


def sample_point(region: Region, rng) -> Point:
    """Uniform grid point of ``region`` drawn from a numpy Generator."""
    ivals = tuple(int(rng.integers(a, b + 1)) for a, b in region.intervals)
    cats = tuple(
        sorted(s)[int(rng.integers(len(s)))] if len(s) > 1 else next(iter(s))
        for s in region.allowed
    )
    return Point(ivals, cats)


def region_json(region: Region, schema: FeatureSchema) -> list:
    """Per-axis [lo, hi] bounds; one-hot axes use {allowed -> hi=1} encoding."""
    out: list = []
    for entry in schema.axis_table:
        if entry[0] == "i":
            iv = entry[1]
            axis = schema.interval_axes[iv]
            a, b = region.intervals[iv]
            if axis.kind == "numeric":
                out.append([number_str(axis.value(a)), number_str(axis.value(b))])
            else:
                out.append([a, b])
        else:
            _, gi, c = entry
            s = region.allowed[gi]
            if c in s:
                out.append([1, 1] if len(s) == 1 else [0, 1])
            else:
                out.append([0, 0])
    return out


def region_from_json(data, schema: FeatureSchema) -> Region:
    if len(data) != schema.m:
        raise ContractViolation(f"expected {schema.m} axis bounds, got {len(data)}")
    intervals = [None] * len(schema.interval_axes)
    allowed = [set() for _ in schema.groups]
    for entry, bounds in zip(schema.axis_table, data):
        lo, hi = bounds
        if entry[0] == "i":
            iv = entry[1]
            axis = schema.interval_axes[iv]
            intervals[iv] = (axis.index(lo), axis.index(hi))
        else:
            _, gi, c = entry
            if int(hi) == 1:
                allowed[gi].add(c)
    return Region(tuple(intervals), tuple(frozenset(s) for s in allowed))
