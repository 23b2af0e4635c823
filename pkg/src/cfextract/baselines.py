"""Comparison attacks: leaf-id PathFinding and the CF / DualCF surrogates.

PathFinding assumes a stronger API than the counterfactual attacks: each
query reveals a stable identifier of the tree leaf the point falls in (plus
its label), so it applies to single trees only. Every probe is billed.

CF trains a surrogate on (query, label) pairs augmented with the returned
counterfactuals; DualCF additionally queries the counterfactual of each
counterfactual, paying one extra call per round. Neither certifies
functional equivalence; their outputs are tagged non-certified.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .cart import TrainConfig, train_forest, train_tree
from .errors import ContractViolation, UnsupportedModelError
from .models import ForestModel, Leaf, Model, TreeModel, boxes_to_tree, stats
from .oracles import CounterfactualOracle, QueryLog
from .regions import Region, center, contains, full_region, intersect, sample_point, subtract
from .schema import FeatureSchema, Point, exact_number
from .tra import AttackResult, Snapshot


@dataclass(frozen=True)
class AttackBudget:
    max_queries: int

    def __post_init__(self):
        if self.max_queries < 1:
            raise ContractViolation("budget must be >= 1")


def default_budget(target: Model) -> AttackBudget:
    """50 queries per node of the target."""
    return AttackBudget(50 * stats(target).node_count)


@dataclass(frozen=True)
class SurrogateSpec:
    kind: str = "tree"  # "tree" | "forest"
    train: TrainConfig = TrainConfig()

    def __post_init__(self):
        if self.kind not in ("tree", "forest"):
            raise ContractViolation(f"unknown surrogate kind {self.kind!r}")


# -- PathFinding ---------------------------------------------------------------


class LeafIdOracle:
    """Billed access to (leaf id, label) of a single target tree."""

    def __init__(self, target: TreeModel):
        if not isinstance(target, TreeModel):
            raise UnsupportedModelError("leaf-id oracle requires a single tree")
        self.target = target
        self.schema = target.schema
        self.log = QueryLog()

    def query(self, x: Point) -> tuple[int, int]:
        i = self.target.root
        nodes = self.target.nodes
        while not isinstance(nodes[i], Leaf):
            node = nodes[i]
            if hasattr(node, "iv_axis"):
                i = node.left if x.ivals[node.iv_axis] <= node.threshold else node.right
            else:
                i = node.left if x.cats[node.group] == node.category else node.right
        self.log.bill(x, full_region(self.schema), nodes[i].label, None)
        return i, nodes[i].label


def _axis_tolerances(schema: FeatureSchema, epsilon) -> list[int]:
    eps = exact_number(epsilon)
    tols = []
    for axis in schema.interval_axes:
        if axis.kind == "numeric" and eps < axis.step:
            raise ContractViolation(
                f"precision {epsilon} is finer than the grid step of axis {axis.name}"
            )
        tols.append(max(1, int(eps / axis.step)))
    return tols


def pathfinding_extract(
    leaf_oracle: LeafIdOracle, schema: FeatureSchema, epsilon=Fraction(1, 100_000)
) -> tuple[TreeModel, QueryLog]:
    """Recover each leaf's box by per-axis bisection probes, then rebuild.

    A worklist of still-uncovered regions seeds discoveries; every bisection
    probe and category check is one billed leaf-id query. With ``epsilon``
    equal to the grid step the boundaries are exact and the reconstruction is
    functionally equivalent; coarser precision shrinks the discovered boxes
    conservatively and re-seeds the remaining slivers.
    """
    if schema != leaf_oracle.schema:
        raise ContractViolation("oracle and schema disagree")
    tols = _axis_tolerances(schema, epsilon)

    def probe(p: Point) -> int:
        return leaf_oracle.query(p)[0]

    def discover_box(seed: Point, seed_id: int) -> Region:
        intervals = []
        for i, axis in enumerate(schema.interval_axes):
            s = seed.ivals[i]
            lo = _boundary(seed, i, s, 0, -1, seed_id, probe, tols[i])
            hi = _boundary(seed, i, s, axis.size - 1, 1, seed_id, probe, tols[i])
            intervals.append((lo, hi))
        allowed = []
        for g, grp in enumerate(schema.groups):
            cats = {seed.cats[g]}
            for c in range(grp.k):
                if c == seed.cats[g]:
                    continue
                alt = Point(seed.ivals, seed.cats[:g] + (c,) + seed.cats[g + 1:])
                if probe(alt) == seed_id:
                    cats.add(c)
            allowed.append(frozenset(cats))
        return Region(tuple(intervals), tuple(allowed))

    worklist: list[Region] = [full_region(schema)]
    covered: list[tuple[Region, int]] = []
    while worklist:
        piece = worklist.pop()
        seed = center(piece)
        seed_id, label = leaf_oracle.query(seed)
        box = discover_box(seed, seed_id)
        # keep the covered set disjoint even when coarse precision re-finds a leaf
        fresh = [box]
        for done, _ in covered:
            fresh = [q for r in fresh for q in subtract(r, done)]
        for r in fresh:
            covered.append((r, label))
        remaining: list[Region] = []
        for w in [piece] + worklist:
            remaining.extend(subtract(w, box))
        worklist = remaining

    model = boxes_to_tree(schema, covered)
    return model, leaf_oracle.log


def _boundary(seed: Point, axis: int, start: int, limit: int, direction: int,
              seed_id: int, probe, tol: int) -> int:
    """Furthest index in ``direction`` still inside the seed's box."""
    if start == limit:
        return start

    def at(v: int) -> Point:
        return Point(seed.ivals[:axis] + (v,) + seed.ivals[axis + 1:], seed.cats)

    if probe(at(limit)) == seed_id:
        return limit
    inside, outside = start, limit
    while abs(outside - inside) > tol:
        mid = (inside + outside) // 2
        if probe(at(mid)) == seed_id:
            inside = mid
        else:
            outside = mid
    return inside


# -- CF / DualCF -----------------------------------------------------------------


def _train_surrogate(schema: FeatureSchema, points, labels,
                     spec: SurrogateSpec) -> Model:
    if not points:
        return TreeModel(schema, [Leaf(0)], 0)
    if spec.kind == "forest":
        return train_forest(schema, points, labels, spec.train)
    return train_tree(schema, points, labels, spec.train)


def _other_label(labels: tuple[int, ...], y: int) -> int:
    return labels[0] if y == labels[1] else labels[1]


def _surrogate_rounds(oracle: CounterfactualOracle, budget: AttackBudget,
                      surrogate: SurrogateSpec, seed: int, snapshot_every: int,
                      dual: bool) -> AttackResult:
    schema = oracle.schema
    rng = np.random.default_rng(seed)
    domain = full_region(schema)
    binary = len(oracle.labels) == 2
    pts: list[Point] = []
    lbls: list[int] = []
    snapshots: list[Snapshot] = []
    last_bucket = 0

    def maybe_snapshot():
        nonlocal last_bucket
        if not snapshot_every:
            return
        bucket = oracle.log.count // snapshot_every
        if bucket > last_bucket:
            last_bucket = bucket
            snapshots.append(Snapshot(
                oracle.log.count,
                _train_surrogate(schema, pts, lbls, surrogate),
                Fraction(0),
            ))

    def cf_label_of(point: Point, flipped_from: int) -> int | None:
        """Label of a returned counterfactual: free flip in binary tasks,
        one billed query otherwise."""
        if binary:
            return _other_label(oracle.labels, flipped_from)
        if oracle.log.count < budget.max_queries:
            return oracle.query(point, domain).label
        return None

    while oracle.log.count < budget.max_queries:
        x = sample_point(domain, rng)
        resp = oracle.query(x, domain)
        pts.append(x)
        lbls.append(resp.label)
        cf = resp.counterfactual
        if cf is not None:
            if dual:
                if oracle.log.count < budget.max_queries:
                    resp2 = oracle.query(cf, domain)
                    pts.append(cf)
                    lbls.append(resp2.label)
                    ccf = resp2.counterfactual
                    if ccf is not None:
                        lab = cf_label_of(ccf, resp2.label)
                        if lab is not None:
                            pts.append(ccf)
                            lbls.append(lab)
            else:
                lab = cf_label_of(cf, resp.label)
                if lab is not None:
                    pts.append(cf)
                    lbls.append(lab)
        maybe_snapshot()

    model = _train_surrogate(schema, pts, lbls, surrogate)
    snapshots.append(Snapshot(oracle.log.count, model, Fraction(0)))
    return AttackResult(
        model=model,
        log=oracle.log,
        snapshots=snapshots,
        method="dualcf" if dual else "cf",
        certified=False,
    )


def cf_attack(oracle: CounterfactualOracle, budget: AttackBudget,
              surrogate: SurrogateSpec = SurrogateSpec(), seed: int = 0,
              snapshot_every: int = 20) -> AttackResult:
    """Label + counterfactual pairs from uniform queries, fit a surrogate."""
    return _surrogate_rounds(oracle, budget, surrogate, seed, snapshot_every, dual=False)


def dualcf_attack(oracle: CounterfactualOracle, budget: AttackBudget,
                  surrogate: SurrogateSpec = SurrogateSpec(), seed: int = 0,
                  snapshot_every: int = 20) -> AttackResult:
    """CF plus one billed counterfactual-of-counterfactual query per round."""
    return _surrogate_rounds(oracle, budget, surrogate, seed, snapshot_every, dual=True)
