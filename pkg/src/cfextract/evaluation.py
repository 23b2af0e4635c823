"""Verification and measurement: exact equivalence, fidelity, bounds, ratios.

The equivalence check never materializes the full product grid of split
levels; it walks one model's box decomposition and checks the other model for
constancy on each box, so tree-vs-tree comparisons stay near-linear. All
bound arithmetic is exact (Fractions).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import CapacityError, ContractViolation
from .models import (ForestModel, Leaf, Model, ModelStats, TreeModel, cells_within,
                     points_to_arrays, stats)
from .regions import Region, center, full_region, sample_point
from .schema import FeatureSchema, Point
from .tra import Snapshot

DEFAULT_CELL_BUDGET = 2_000_000


@dataclass(frozen=True)
class BoundReport:
    n: int
    s: tuple[int, ...]
    prop1_bound: int  # prod(s_i + 1)
    cor1_bound: Fraction  # (1 + n/m)^m
    worst_case_queries: int  # 2*prod(s_i + 1) - 1
    opt_queries_lower: int  # n + 1
    c_tra: Fraction  # worst_case / (n + 1)


@dataclass(frozen=True)
class FidelityReport:
    fidelity: float
    sample_count: int
    seed: int
    kind: str  # "uniform" | "test"


def _constant_witness(model: Model, region: Region, label: int,
                      budget: list[int]) -> Point | None:
    """A point of ``region`` where ``model`` != label, or None if constant."""
    if isinstance(model, TreeModel):
        stack = [(model.root, region)]
        while stack:
            budget[0] -= 1
            if budget[0] < 0:
                raise CapacityError(
                    "equivalence check exceeded its cell budget; use sampled fidelity"
                )
            i, reg = stack.pop()
            node = model.nodes[i]
            if isinstance(node, Leaf):
                if node.label != label:
                    return center(reg)
                continue
            if hasattr(node, "iv_axis"):
                a, b = reg.intervals[node.iv_axis]
                if node.threshold >= b:
                    stack.append((node.left, reg))
                elif node.threshold < a:
                    stack.append((node.right, reg))
                else:
                    iv = list(reg.intervals)
                    iv[node.iv_axis] = (a, node.threshold)
                    stack.append((node.left, Region(tuple(iv), reg.allowed)))
                    iv[node.iv_axis] = (node.threshold + 1, b)
                    stack.append((node.right, Region(tuple(iv), reg.allowed)))
            else:
                s = reg.allowed[node.group]
                if s == {node.category}:
                    stack.append((node.left, reg))
                elif node.category not in s:
                    stack.append((node.right, reg))
                else:
                    al = list(reg.allowed)
                    al[node.group] = frozenset({node.category})
                    stack.append((node.left, Region(reg.intervals, tuple(al))))
                    al[node.group] = s - {node.category}
                    stack.append((node.right, Region(reg.intervals, tuple(al))))
        return None
    cells = cells_within(model, region, budget[0])
    budget[0] -= len(cells)
    bad = np.flatnonzero(cells.labels != label)
    if bad.size:
        return center(cells.regions[int(bad[0])])
    return None


def functional_equivalence(
    f: Model, g: Model, schema: FeatureSchema, cell_budget: int = DEFAULT_CELL_BUDGET
) -> tuple[bool, Point | None]:
    """Exact agreement of two axis-parallel models over the whole grid.

    Returns (True, None) on equivalence, else (False, witness point). Raises
    CapacityError when the required cell work exceeds ``cell_budget``.
    """
    if f.schema != schema or g.schema != schema:
        raise ContractViolation("models must share the given schema")
    budget = [cell_budget]
    if isinstance(g, ForestModel) and isinstance(f, TreeModel):
        f, g = g, f  # walk the tree's leaves, constancy-check the forest
    if isinstance(g, TreeModel):
        boxes = g.leaf_regions()
    else:
        boxes = [(r, l) for r, l in zip(
            g.cell_box_set(cell_budget).regions,
            (int(v) for v in g.cell_box_set(cell_budget).labels),
        )]
    for region, label in boxes:
        if label is None:
            return False, center(region)
        w = _constant_witness(f, region, label, budget)
        if w is not None:
            return False, w
    return True, None


def uniform_points(schema: FeatureSchema, n: int, seed: int):
    """Uniform grid sample as index arrays (iv, cats)."""
    rng = np.random.default_rng(seed)
    n_iv = len(schema.iv_sizes)
    iv = np.empty((n, n_iv), dtype=np.int64)
    for i, size in enumerate(schema.iv_sizes):
        iv[:, i] = rng.integers(0, size, size=n)
    cats = np.empty((n, len(schema.group_sizes)), dtype=np.int64)
    for g, k in enumerate(schema.group_sizes):
        cats[:, g] = rng.integers(0, k, size=n)
    return iv, cats


def fidelity(f: Model, g: Model, schema: FeatureSchema, n_samples: int = 3000,
             seed: int = 0, kind: str = "uniform", points=None) -> FidelityReport:
    """Agreement fraction on uniform grid samples (or a supplied point set)."""
    if f.schema != schema or g.schema != schema:
        raise ContractViolation("models must share the given schema")
    if points is not None:
        iv, cats = points_to_arrays(schema, points)
        n_samples = len(points)
        kind = "test"
    else:
        iv, cats = uniform_points(schema, n_samples, seed)
    pf = f.predict_arrays(iv, cats)
    pg = g.predict_arrays(iv, cats)
    agree = (pf == pg) & (pf != -1) & (pg != -1)
    return FidelityReport(float(agree.mean()), n_samples, seed, kind)


def anytime_fidelity(runs, checkpoint: int = 20):
    """Mean-over-runs fidelity as a function of queries spent.

    ``runs`` is a sequence of (target, snapshots, eval_arrays) triples, where
    ``eval_arrays`` is an (iv, cats) pair of evaluation points. Snapshots are
    step functions: at each checkpoint the latest model at or before it
    counts, and finished runs keep contributing their final model. Checkpoints
    are multiples of ``checkpoint`` up to the longest run.
    """
    if not runs:
        raise ContractViolation("need at least one run")
    prepared = []
    horizon = 0
    for target, snapshots, eval_arrays in runs:
        if not snapshots:
            raise ContractViolation("run without snapshots")
        iv, cats = eval_arrays
        ref = target.predict_arrays(iv, cats)
        snaps = sorted(snapshots, key=lambda s: s.queries)
        horizon = max(horizon, snaps[-1].queries)
        prepared.append((ref, snaps, iv, cats))
    qs = list(range(checkpoint, horizon + 1, checkpoint))
    if not qs or qs[-1] < horizon:
        qs.append(horizon)
    curve = []
    for q in qs:
        vals = []
        for ref, snaps, iv, cats in prepared:
            current = None
            for s in snaps:
                if s.queries <= q:
                    current = s
                else:
                    break
            if current is None:
                vals.append(0.0)
                continue
            pred = current.model.predict_arrays(iv, cats)
            vals.append(float(((pred == ref) & (pred != -1)).mean()))
        curve.append((q, sum(vals) / len(vals)))
    return curve


def bound_report(arg) -> BoundReport:
    """Worst-case query bounds and competitive ratio from a model or an s vector."""
    if isinstance(arg, (TreeModel, ForestModel)):
        st = stats(arg)
        s = st.s
    elif isinstance(arg, ModelStats):
        s = arg.s
    else:
        s = tuple(int(v) for v in arg)
        if any(v < 0 for v in s):
            raise ContractViolation("split-level counts must be non-negative")
    n = sum(s)
    m = len(s)
    prod = 1
    for v in s:
        prod *= v + 1
    cor1 = (1 + Fraction(n, m)) ** m
    worst = 2 * prod - 1
    return BoundReport(
        n=n,
        s=s,
        prop1_bound=prod,
        cor1_bound=cor1,
        worst_case_queries=worst,
        opt_queries_lower=n + 1,
        c_tra=Fraction(worst, n + 1),
    )


def measured_ratio(query_count: int, target: Model, extracted: Model,
                   schema: FeatureSchema) -> Fraction:
    """Measured queries over the omniscient lower bound n+1.

    Only defined for equivalence-certified runs; raises otherwise.
    """
    ok, _ = functional_equivalence(target, extracted, schema)
    if not ok:
        raise ContractViolation("run is not equivalence-certified")
    n = stats(target).n
    return Fraction(query_count, n + 1)
