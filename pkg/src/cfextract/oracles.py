"""The metered prediction + counterfactual API.

One billed call returns the query's label and, when one exists in the
requested region, a counterfactual point. The exact mode returns a global
distance minimizer among label-flipping grid points of the region (absence is
then a certificate); the heuristic mode scans server-side training data and
uniform samples, refining hits with a per-axis line search, and its absences
are only a search failure. Server-side computation (including every predict
issued internally) is not billed; only ``query`` calls count.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .distances import Distance
from .errors import CapacityError, ContractViolation
from .models import BoxSet, ForestModel, Model, TreeModel, cells_within
from .regions import Region, contains, sample_point
from .schema import FeatureSchema, Point


@dataclass
class OracleConfig:
    distance: str = "l2"
    mode: str = "exact"  # "exact" | "heuristic"
    sample_budget: int = 1000  # uniform draws tried by the heuristic search
    cell_cap: int = 100_000  # max enumerated cells for the exact ensemble search
    seed: int = 0
    audit_absences: bool = False  # heuristic only: re-check every "no counterfactual"

    def __post_init__(self):
        if self.mode not in ("exact", "heuristic"):
            raise ContractViolation(f"unknown oracle mode {self.mode!r}")
        if self.sample_budget < 1:
            raise ContractViolation("sample_budget must be >= 1")
        if self.cell_cap < 1:
            raise ContractViolation("cell_cap must be >= 1")


@dataclass(frozen=True)
class OracleResponse:
    label: int
    counterfactual: Point | None
    query_index: int


@dataclass(frozen=True)
class QueryRecord:
    index: int
    x: Point
    region: Region
    label: int
    counterfactual: Point | None


@dataclass
class QueryLog:
    """The billing meter: exactly one record per API call."""

    records: list[QueryRecord] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.records)

    def bill(self, x: Point, region: Region, label: int,
             counterfactual: Point | None) -> OracleResponse:
        index = len(self.records)
        self.records.append(QueryRecord(index, x, region, label, counterfactual))
        return OracleResponse(label, counterfactual, index)


def _exact_from_boxes(boxset: BoxSet, schema: FeatureSchema, dist: Distance,
                      x: Point, region: Region, y: int) -> Point | None:
    """Nearest label-flipping point among box-decomposition pieces in region."""
    n = len(boxset)
    if n == 0:
        return None
    reg_lo = np.array([a for a, _ in region.intervals], dtype=np.int64).reshape(1, -1)
    reg_hi = np.array([b for _, b in region.intervals], dtype=np.int64).reshape(1, -1)
    lo = np.maximum(boxset.lo, reg_lo)
    hi = np.minimum(boxset.hi, reg_hi)
    ok = boxset.labels != y
    if lo.size:
        ok &= (lo <= hi).all(axis=1)

    n_groups = len(schema.group_sizes)
    mismatch = np.zeros(n, dtype=np.int64)
    chosen_cats = np.empty((n, n_groups), dtype=np.int64)
    for g in range(n_groups):
        allowed = np.zeros(schema.group_sizes[g], dtype=bool)
        for c in region.allowed[g]:
            allowed[c] = True
        inter = boxset.cat_ok[g] & allowed
        any_ok = inter.any(axis=1)
        ok &= any_ok
        keep = inter[:, x.cats[g]]
        mismatch += ~keep
        first = inter.argmax(axis=1)
        chosen_cats[:, g] = np.where(keep, x.cats[g], first)

    if not ok.any():
        return None
    x_iv = np.asarray(x.ivals, dtype=np.int64)
    proj = np.clip(np.broadcast_to(x_iv, lo.shape), lo, hi) if lo.size else lo
    d = dist.scaled_rows(x, proj, mismatch)
    d = np.where(ok, d, np.iinfo(np.int64).max)
    best = int(d.min())
    ties = np.flatnonzero(d == best)
    cands = [
        Point(tuple(int(v) for v in proj[i]), tuple(int(c) for c in chosen_cats[i]))
        for i in ties
    ]
    return min(cands, key=schema.lex_key)


def exact_tree_cf(target: TreeModel, x: Point, region: Region,
                  dist: Distance) -> Point | None:
    """Globally nearest label flip inside ``region`` for a single tree.

    Projects the query onto every differently-labeled leaf region intersected
    with ``region``; ties break to the lexicographically smallest point.
    ``None`` certifies that no flip point exists in the region.
    """
    if not contains(region, x):
        raise ContractViolation("query point outside region")
    y = target.predict(x)
    return _exact_from_boxes(target.box_set(), target.schema, dist, x, region, y)


def exact_ensemble_cf(target: ForestModel, x: Point, region: Region,
                      dist: Distance, cell_cap: int) -> Point | None:
    """Exact oracle for forests via enumeration of the region's split-level cells.

    Requires the number of cells induced within ``region`` by the union of all
    trees' split levels to stay within ``cell_cap``; raises CapacityError
    otherwise (use the heuristic mode then).
    """
    if not contains(region, x):
        raise ContractViolation("query point outside region")
    y = target.predict(x)
    try:
        cells = target.cell_box_set(cell_cap)
    except CapacityError:
        cells = cells_within(target, region, cell_cap)
    return _exact_from_boxes(cells, target.schema, dist, x, region, y)


def line_search(target: Model, x: Point, x_cand: Point) -> Point:
    """Pull a valid counterfactual toward ``x`` axis by axis on the grid.

    Sweeps axes in ascending order, repeatedly: each differing interval
    coordinate moves toward the query as far as the label stays flipped
    (doubling steps, so long runs cost log probes); differing categories snap
    back to the query's category when that keeps the flip. At the fixpoint no
    single-axis one-step move toward ``x`` preserves the flip, which makes the
    result locally optimal.
    """
    y = target.predict(x)
    if target.predict(x_cand) == y:
        raise ContractViolation("line_search needs a label-flipped start point")
    ivals = list(x_cand.ivals)
    cats = list(x_cand.cats)
    moved = True
    while moved:
        moved = False
        for i in range(len(ivals)):
            gap = x.ivals[i] - ivals[i]
            if gap == 0:
                continue
            direction = 1 if gap > 0 else -1
            step = 1 << (abs(gap).bit_length() - 1)
            while step:
                if step <= abs(x.ivals[i] - ivals[i]):
                    trial = ivals[i] + direction * step
                    probe = Point(tuple(ivals[:i] + [trial] + ivals[i + 1:]), tuple(cats))
                    if target.predict(probe) != y:
                        ivals[i] = trial
                        moved = True
                        continue
                step >>= 1
        for g in range(len(cats)):
            if cats[g] != x.cats[g]:
                probe = Point(tuple(ivals), tuple(cats[:g] + [x.cats[g]] + cats[g + 1:]))
                if target.predict(probe) != y:
                    cats[g] = x.cats[g]
                    moved = True
    return Point(tuple(ivals), tuple(cats))


def heuristic_cf(target: Model, x: Point, region: Region,
                 training_data: Sequence[Point] | None, sample_budget: int,
                 rng) -> Point | None:
    """Training-data scan, then uniform sampling, then line-search refinement.

    Returns a locally optimal counterfactual when the search hits one;
    ``None`` only means the search failed, not that none exists.
    """
    y = target.predict(x)
    if training_data:
        for p in training_data:
            if contains(region, p) and target.predict(p) != y:
                return line_search(target, x, p)
    for _ in range(sample_budget):
        p = sample_point(region, rng)
        if target.predict(p) != y:
            return line_search(target, x, p)
    return None


def verify_local_optimality(target: Model, x: Point, x_cf: Point,
                            dist: Distance) -> bool:
    """Check every single-axis one-grid-step perturbation of the counterfactual.

    True iff each such neighbor either restores the query's label, does not
    get closer to the query, or leaves the domain.
    """
    schema = target.schema
    y = target.predict(x)
    if target.predict(x_cf) == y:
        raise ContractViolation("not a counterfactual of x")
    base = dist.scaled(x, x_cf)
    ivals = list(x_cf.ivals)
    for i, axis in enumerate(schema.interval_axes):
        for d in (-1, 1):
            v = ivals[i] + d
            if not 0 <= v < axis.size:
                continue
            probe = Point(tuple(ivals[:i] + [v] + ivals[i + 1:]), x_cf.cats)
            if target.predict(probe) == y:
                continue
            if dist.scaled(x, probe) < base:
                return False
    return True


class CounterfactualOracle:
    """Serves one fixed target model; every ``query`` call bills the meter.

    The label set of the target is treated as public API metadata (attacks
    use it to tell binary tasks apart from multi-class ones).
    """

    def __init__(self, target: Model, config: OracleConfig | None = None,
                 training_data: Sequence[Point] | None = None):
        self.target = target
        self.schema: FeatureSchema = target.schema
        self.config = config or OracleConfig()
        self.distance = Distance(self.schema, self.config.distance)
        self.training_data = tuple(training_data) if training_data else ()
        if self.config.mode == "heuristic" and not self.training_data:
            self.training_data = ()
        self.log = QueryLog()
        self.labels: tuple[int, ...] = target.labels
        self.false_absences: list[int] = []

    def _rng_for(self, region: Region):
        fingerprint = zlib.crc32(repr(
            (region.intervals, tuple(sorted(map(sorted, region.allowed))))
        ).encode())
        return np.random.default_rng(
            np.random.SeedSequence([self.config.seed, fingerprint])
        )

    def _exact(self, x: Point, region: Region) -> Point | None:
        if isinstance(self.target, ForestModel):
            return exact_ensemble_cf(self.target, x, region, self.distance,
                                     self.config.cell_cap)
        return exact_tree_cf(self.target, x, region, self.distance)

    def query(self, x: Point, region: Region) -> OracleResponse:
        if not contains(region, x):
            raise ContractViolation("query point outside the requested region")
        y = self.target.predict(x)
        if self.config.mode == "exact":
            cf = self._exact(x, region)
        else:
            cf = heuristic_cf(self.target, x, region, self.training_data,
                              self.config.sample_budget, self._rng_for(region))
            if cf is None and self.config.audit_absences:
                if self._exact(x, region) is not None:
                    self.false_absences.append(self.log.count)
        if cf is not None:
            assert contains(region, cf) and self.target.predict(cf) != y
        return self.log.bill(x, region, y, cf)
