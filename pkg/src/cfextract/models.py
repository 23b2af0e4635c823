"""Axis-parallel classifiers: decision trees, majority-vote forests.

Evaluation semantics: at an interval split a point goes left iff its grid
index is <= the threshold index; at a category split it goes left iff its
category equals the tested one. Trees are validated on construction so every
root-to-leaf path carries a non-empty region (no dead branches).

Leaf labels are non-negative ints; ``None`` marks the provisionally unknown
leaves of in-progress reconstructions and never agrees with anything.
"""

from __future__ import annotations

import itertools
import json
import os
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import CapacityError, ContractViolation, DataFormatError
from .regions import Region, full_region, intersect
from .schema import FeatureSchema, Point, exact_number, number_str

UNKNOWN = -1  # array sentinel for None labels


@dataclass(frozen=True)
class SplitNode:
    iv_axis: int
    threshold: int
    left: int
    right: int


@dataclass(frozen=True)
class CatNode:
    group: int
    category: int
    left: int
    right: int


@dataclass(frozen=True)
class Leaf:
    label: int | None


Node = Union[SplitNode, CatNode, Leaf]


class TreeModel:
    def __init__(self, schema: FeatureSchema, nodes: Sequence[Node], root: int = 0,
                 validate: bool = True):
        self.schema = schema
        self.nodes: tuple[Node, ...] = tuple(nodes)
        self.root = root
        self._leaf_regions: list[tuple[Region, int | None]] | None = None
        self._boxset: BoxSet | None = None
        if validate:
            self._validate()

    def _validate(self) -> None:
        if not self.nodes:
            raise DataFormatError("tree has no nodes")
        if not 0 <= self.root < len(self.nodes):
            raise DataFormatError("root index out of range")
        seen = [False] * len(self.nodes)
        stack: list[tuple[int, Region]] = [(self.root, full_region(self.schema))]
        while stack:
            i, region = stack.pop()
            if not 0 <= i < len(self.nodes):
                raise DataFormatError(f"child index {i} out of range")
            if seen[i]:
                raise DataFormatError(f"node {i} reachable twice")
            seen[i] = True
            node = self.nodes[i]
            if isinstance(node, Leaf):
                if node.label is not None and (not isinstance(node.label, int) or node.label < 0):
                    raise DataFormatError(f"leaf {i}: bad label {node.label!r}")
            elif isinstance(node, SplitNode):
                a, b = region.intervals[node.iv_axis]
                if not a <= node.threshold < b:
                    raise DataFormatError(
                        f"node {i}: threshold {node.threshold} leaves a dead branch"
                    )
                iv = list(region.intervals)
                iv[node.iv_axis] = (a, node.threshold)
                stack.append((node.left, Region(tuple(iv), region.allowed)))
                iv[node.iv_axis] = (node.threshold + 1, b)
                stack.append((node.right, Region(tuple(iv), region.allowed)))
            elif isinstance(node, CatNode):
                s = region.allowed[node.group]
                if node.category not in s or len(s) < 2:
                    raise DataFormatError(f"node {i}: category test leaves a dead branch")
                al = list(region.allowed)
                al[node.group] = frozenset({node.category})
                stack.append((node.left, Region(region.intervals, tuple(al))))
                al[node.group] = s - {node.category}
                stack.append((node.right, Region(region.intervals, tuple(al))))
            else:
                raise DataFormatError(f"node {i}: unknown node type")
        if not all(seen):
            raise DataFormatError("tree contains unreachable nodes")

    # -- evaluation ---------------------------------------------------------
    def predict(self, p: Point) -> int | None:
        i = self.root
        nodes = self.nodes
        while True:
            node = nodes[i]
            if isinstance(node, Leaf):
                return node.label
            if isinstance(node, SplitNode):
                i = node.left if p.ivals[node.iv_axis] <= node.threshold else node.right
            else:
                i = node.left if p.cats[node.group] == node.category else node.right

    def predict_arrays(self, iv: np.ndarray, cats: np.ndarray) -> np.ndarray:
        n = iv.shape[0] if iv.ndim == 2 else cats.shape[0]
        out = np.empty(n, dtype=np.int64)
        stack: list[tuple[int, np.ndarray]] = [(self.root, np.arange(n))]
        while stack:
            i, sel = stack.pop()
            if sel.size == 0:
                continue
            node = self.nodes[i]
            if isinstance(node, Leaf):
                out[sel] = UNKNOWN if node.label is None else node.label
            elif isinstance(node, SplitNode):
                mask = iv[sel, node.iv_axis] <= node.threshold
                stack.append((node.left, sel[mask]))
                stack.append((node.right, sel[~mask]))
            else:
                mask = cats[sel, node.group] == node.category
                stack.append((node.left, sel[mask]))
                stack.append((node.right, sel[~mask]))
        return out

    # -- structure ----------------------------------------------------------
    def leaf_regions(self) -> list[tuple[Region, int | None]]:
        """Disjoint regions covering the grid, paired with their leaf labels."""
        if self._leaf_regions is None:
            out: list[tuple[Region, int | None]] = []
            stack = [(self.root, full_region(self.schema))]
            while stack:
                i, region = stack.pop()
                node = self.nodes[i]
                if isinstance(node, Leaf):
                    out.append((region, node.label))
                elif isinstance(node, SplitNode):
                    a, b = region.intervals[node.iv_axis]
                    iv = list(region.intervals)
                    iv[node.iv_axis] = (node.threshold + 1, b)
                    stack.append((node.right, Region(tuple(iv), region.allowed)))
                    iv[node.iv_axis] = (a, node.threshold)
                    stack.append((node.left, Region(tuple(iv), region.allowed)))
                else:
                    s = region.allowed[node.group]
                    al = list(region.allowed)
                    al[node.group] = s - {node.category}
                    stack.append((node.right, Region(region.intervals, tuple(al))))
                    al[node.group] = frozenset({node.category})
                    stack.append((node.left, Region(region.intervals, tuple(al))))
            self._leaf_regions = out
        return self._leaf_regions

    def box_set(self) -> "BoxSet":
        if self._boxset is None:
            self._boxset = BoxSet.from_labeled_regions(self.schema, self.leaf_regions())
        return self._boxset

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def leaf_count(self) -> int:
        return sum(1 for n in self.nodes if isinstance(n, Leaf))

    @property
    def depth(self) -> int:
        depths = {self.root: 0}
        best = 0
        stack = [self.root]
        while stack:
            i = stack.pop()
            node = self.nodes[i]
            if isinstance(node, Leaf):
                best = max(best, depths[i])
            else:
                for c in (node.left, node.right):
                    depths[c] = depths[i] + 1
                    stack.append(c)
        return best

    @property
    def labels(self) -> tuple[int, ...]:
        return tuple(sorted({n.label for n in self.nodes
                             if isinstance(n, Leaf) and n.label is not None}))

    @property
    def is_partial(self) -> bool:
        return any(isinstance(n, Leaf) and n.label is None for n in self.nodes)


class ForestModel:
    """Majority vote over trees; ties go to the lowest class id."""

    def __init__(self, schema: FeatureSchema, trees: Sequence[TreeModel]):
        if not trees:
            raise DataFormatError("forest needs at least one tree")
        for t in trees:
            if t.schema != schema:
                raise DataFormatError("all forest trees must share one schema")
            if t.is_partial:
                raise DataFormatError("forest trees cannot have unknown leaves")
        self.schema = schema
        self.trees: tuple[TreeModel, ...] = tuple(trees)
        self._cells: BoxSet | None = None

    def predict(self, p: Point) -> int:
        votes: dict[int, int] = {}
        for t in self.trees:
            lab = t.predict(p)
            votes[lab] = votes.get(lab, 0) + 1
        best = max(votes.items(), key=lambda kv: (kv[1], -kv[0]))
        return best[0]

    def predict_arrays(self, iv: np.ndarray, cats: np.ndarray) -> np.ndarray:
        votes = np.stack([t.predict_arrays(iv, cats) for t in self.trees])
        k = int(votes.max()) + 1
        n = votes.shape[1]
        counts = np.zeros((k, n), dtype=np.int32)
        idx = np.arange(n)
        for row in votes:
            np.add.at(counts, (row, idx), 1)
        return counts.argmax(axis=0)  # argmax takes the lowest id on ties

    @property
    def node_count(self) -> int:
        return sum(t.node_count for t in self.trees)

    @property
    def leaf_count(self) -> int:
        return sum(t.leaf_count for t in self.trees)

    @property
    def depth(self) -> int:
        return max(t.depth for t in self.trees)

    @property
    def labels(self) -> tuple[int, ...]:
        out: set[int] = set()
        for t in self.trees:
            out.update(t.labels)
        return tuple(sorted(out))

    def cell_box_set(self, cap: int) -> "BoxSet":
        """Cells of the union split-level grid, labeled by the forest vote."""
        if self._cells is None:
            self._cells = cells_within(self, full_region(self.schema), cap)
        return self._cells


Model = Union[TreeModel, ForestModel]


class BoxSet:
    """Array view of a labeled box decomposition (for vectorized geometry)."""

    def __init__(self, schema, lo, hi, cat_ok, labels, regions):
        self.schema = schema
        self.lo = lo  # (n, n_iv) int64
        self.hi = hi
        self.cat_ok = cat_ok  # per group: (n, k) bool
        self.labels = labels  # (n,) int64
        self.regions = regions  # tuple[Region, ...]

    @staticmethod
    def from_labeled_regions(schema, labeled: Sequence[tuple[Region, int | None]]) -> "BoxSet":
        n = len(labeled)
        n_iv = len(schema.iv_sizes)
        lo = np.zeros((n, n_iv), dtype=np.int64)
        hi = np.zeros((n, n_iv), dtype=np.int64)
        cat_ok = [np.zeros((n, k), dtype=bool) for k in schema.group_sizes]
        labels = np.empty(n, dtype=np.int64)
        for r, (region, label) in enumerate(labeled):
            for i, (a, b) in enumerate(region.intervals):
                lo[r, i] = a
                hi[r, i] = b
            for g, s in enumerate(region.allowed):
                for c in s:
                    cat_ok[g][r, c] = True
            labels[r] = UNKNOWN if label is None else label
        return BoxSet(schema, lo, hi, cat_ok, labels,
                      tuple(region for region, _ in labeled))

    def __len__(self) -> int:
        return len(self.labels)


def _split_levels(model: Model) -> set[tuple[int, int]]:
    """Distinct (global axis, threshold index) pairs used anywhere in the model."""
    levels: set[tuple[int, int]] = set()
    trees = model.trees if isinstance(model, ForestModel) else (model,)
    schema = model.schema
    for t in trees:
        for node in t.nodes:
            if isinstance(node, SplitNode):
                levels.add((schema.interval_axes[node.iv_axis].global_axis, node.threshold))
            elif isinstance(node, CatNode):
                levels.add((schema.groups[node.group].global_axis0 + node.category, 0))
    return levels


@dataclass(frozen=True)
class ModelStats:
    n: int
    s: tuple[int, ...]  # distinct split levels per global axis
    node_count: int
    leaf_count: int
    depth: int


def stats(model: Model) -> ModelStats:
    levels = _split_levels(model)
    s = [0] * model.schema.m
    for axis, _ in levels:
        s[axis] += 1
    return ModelStats(
        n=len(levels),
        s=tuple(s),
        node_count=model.node_count,
        leaf_count=model.leaf_count,
        depth=model.depth,
    )


def predict(model: Model, p: Point) -> int | None:
    """Label of ``p`` under ``model`` (validating the point first)."""
    model.schema.validate_point(p)
    return model.predict(p)


def points_to_arrays(schema: FeatureSchema, points: Sequence[Point]):
    iv = np.array([p.ivals for p in points], dtype=np.int64).reshape(
        len(points), len(schema.iv_sizes)
    )
    cats = np.array([p.cats for p in points], dtype=np.int64).reshape(
        len(points), len(schema.group_sizes)
    )
    return iv, cats


def cells_within(model: Model, region: Region, cap: int) -> BoxSet:
    """Cells induced inside ``region`` by the model's split levels.

    Interval axes are cut at every threshold falling strictly inside the
    region; groups that the model tests anywhere are refined to single
    categories. Within each cell every tree of the model is constant. Raises
    CapacityError when the cell count exceeds ``cap``.
    """
    schema = model.schema
    trees = model.trees if isinstance(model, ForestModel) else (model,)
    per_axis: list[list[int]] = [[] for _ in schema.iv_sizes]
    tested_groups: set[int] = set()
    for t in trees:
        for node in t.nodes:
            if isinstance(node, SplitNode):
                per_axis[node.iv_axis].append(node.threshold)
            elif isinstance(node, CatNode):
                tested_groups.add(node.group)

    segments: list[list[tuple[int, int]]] = []
    for iv, thresholds in enumerate(per_axis):
        a, b = region.intervals[iv]
        cuts = sorted({t for t in thresholds if a <= t < b})
        segs = []
        lo = a
        for t in cuts:
            segs.append((lo, t))
            lo = t + 1
        segs.append((lo, b))
        segments.append(segs)
    group_choices: list[list[frozenset[int]]] = []
    for g, s in enumerate(region.allowed):
        if g in tested_groups and len(s) > 1:
            group_choices.append([frozenset({c}) for c in sorted(s)])
        else:
            group_choices.append([s])

    count = 1
    for segs in segments:
        count *= len(segs)
    for choices in group_choices:
        count *= len(choices)
    if count > cap:
        raise CapacityError(
            f"{count} cells exceed the cap of {cap}; use sampled fidelity or "
            "the heuristic oracle"
        )

    labeled: list[tuple[Region, int]] = []
    reps: list[Point] = []
    for combo in itertools.product(*segments, *group_choices):
        intervals = tuple(combo[: len(segments)])
        allowed = tuple(combo[len(segments):])
        cell = Region(intervals, allowed)
        labeled.append((cell, 0))
        reps.append(Point(tuple(a for a, _ in intervals),
                          tuple(min(s) for s in allowed)))
    iv_arr, cat_arr = points_to_arrays(schema, reps)
    labels = model.predict_arrays(iv_arr, cat_arr)
    boxset = BoxSet.from_labeled_regions(schema, labeled)
    boxset.labels = labels.astype(np.int64)
    return boxset


def boxes_to_tree(schema: FeatureSchema, boxes: Sequence[tuple[Region, int]]) -> TreeModel:
    """Greedy tree agreeing with a disjoint, covering box labeling.

    Splits on any box edge (lowest global axis, lowest threshold first) and
    recurses; raises on overlapping or non-covering input.
    """
    if not boxes:
        raise ContractViolation("no boxes given")
    total = sum(r.volume for r, _ in boxes)
    domain = full_region(schema)
    if total != domain.volume:
        raise ContractViolation("boxes do not cover the domain exactly")
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            if intersect(boxes[i][0], boxes[j][0]) is not None:
                raise ContractViolation("boxes overlap")

    nodes: list[Node] = []

    def clip(items, region):
        out = []
        for box, label in items:
            inter = intersect(box, region)
            if inter is not None:
                out.append((inter, label))
        return out

    def build(region: Region, items) -> int:
        labels = {label for _, label in items}
        if len(labels) == 1:
            nodes.append(Leaf(next(iter(labels))))
            return len(nodes) - 1
        # lowest interval edge strictly inside the region
        for iv in range(len(schema.iv_sizes)):
            a, b = region.intervals[iv]
            if a == b:
                continue
            cand = set()
            for box, _ in items:
                bl, bh = box.intervals[iv]
                if bl > a:
                    cand.add(bl - 1)
                if bh < b:
                    cand.add(bh)
            if cand:
                t = min(cand)
                ivs = list(region.intervals)
                ivs[iv] = (a, t)
                left_r = Region(tuple(ivs), region.allowed)
                ivs[iv] = (t + 1, b)
                right_r = Region(tuple(ivs), region.allowed)
                left = build(left_r, clip(items, left_r))
                right = build(right_r, clip(items, right_r))
                nodes.append(SplitNode(iv, t, left, right))
                return len(nodes) - 1
        for g in range(len(schema.group_sizes)):
            s = region.allowed[g]
            if len(s) < 2:
                continue
            cand = {c for c in s for box, _ in items if c not in box.allowed[g]}
            if cand:
                c = min(cand)
                al = list(region.allowed)
                al[g] = frozenset({c})
                left_r = Region(region.intervals, tuple(al))
                al[g] = s - {c}
                right_r = Region(region.intervals, tuple(al))
                left = build(left_r, clip(items, left_r))
                right = build(right_r, clip(items, right_r))
                nodes.append(CatNode(g, c, left, right))
                return len(nodes) - 1
        raise ContractViolation("conflicting labels with no separating edge")

    root = build(domain, list(boxes))
    return TreeModel(schema, nodes, root)


# -- serialization -----------------------------------------------------------

def _tree_nodes_json(tree: TreeModel) -> dict:
    schema = tree.schema
    nodes = []
    for i, node in enumerate(tree.nodes):
        if isinstance(node, Leaf):
            nodes.append({"id": i, "kind": "leaf", "label": node.label})
        elif isinstance(node, SplitNode):
            axis = schema.interval_axes[node.iv_axis]
            nodes.append(
                {
                    "id": i,
                    "kind": "split",
                    "axis": axis.global_axis,
                    "threshold": number_str(axis.value(node.threshold)),
                    "left": node.left,
                    "right": node.right,
                }
            )
        else:
            grp = schema.groups[node.group]
            nodes.append(
                {
                    "id": i,
                    "kind": "split",
                    "axis": grp.global_axis0 + node.category,
                    "categories": [node.category],
                    "left": node.left,
                    "right": node.right,
                }
            )
    return {"root": tree.root, "nodes": nodes}


def _tree_from_json(schema: FeatureSchema, data: dict) -> TreeModel:
    raw = data.get("nodes")
    if not isinstance(raw, list):
        raise DataFormatError("model JSON: 'nodes' must be a list")
    nodes: list[Node | None] = [None] * len(raw)
    for entry in raw:
        i = entry["id"]
        kind = entry.get("kind")
        if kind == "leaf":
            label = entry.get("label")
            nodes[i] = Leaf(None if label is None else int(label))
        elif kind == "split":
            axis = entry["axis"]
            if not 0 <= axis < schema.m:
                raise DataFormatError(f"node {i}: axis {axis} out of range")
            spec = schema.axis_table[axis]
            if "categories" in entry:
                if spec[0] != "g":
                    raise DataFormatError(f"node {i}: categories on a non-group axis")
                _, gi, cat = spec
                if list(entry["categories"]) != [cat]:
                    raise DataFormatError(
                        f"node {i}: categories must be the singleton [{cat}] for axis {axis}"
                    )
                nodes[i] = CatNode(gi, cat, entry["left"], entry["right"])
            else:
                if spec[0] != "i":
                    raise DataFormatError(f"node {i}: threshold on a one-hot axis")
                iv = spec[1]
                t = schema.interval_axes[iv].index(exact_number(entry["threshold"]))
                nodes[i] = SplitNode(iv, t, entry["left"], entry["right"])
        else:
            raise DataFormatError(f"node {i}: unknown kind {kind!r}")
    if any(n is None for n in nodes):
        raise DataFormatError("model JSON: node ids must cover 0..n-1")
    return TreeModel(schema, nodes, data.get("root", 0))


def model_json_dict(model: Model, schema_ref: str) -> dict:
    if isinstance(model, ForestModel):
        return {
            "schema_ref": schema_ref,
            "kind": "forest",
            "trees": [_tree_nodes_json(t) for t in model.trees],
        }
    out = {"schema_ref": schema_ref, "kind": "tree"}
    out.update(_tree_nodes_json(model))
    return out


def model_from_json_dict(data: dict, schema: FeatureSchema) -> Model:
    kind = data.get("kind", "tree")
    if kind == "forest":
        trees = [_tree_from_json(schema, t) for t in data["trees"]]
        return ForestModel(schema, trees)
    if kind != "tree":
        raise DataFormatError(f"unknown model kind {kind!r}")
    return _tree_from_json(schema, data)


def save_model(path: str, model: Model, schema_ref: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_json_dict(model, schema_ref), fh, indent=2)
        fh.write("\n")


def load_model(path: str, schema: FeatureSchema | None = None) -> Model:
    from .schema import load_schema

    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: not valid JSON ({exc})") from exc
    if schema is None:
        ref = data.get("schema_ref")
        if not ref:
            raise DataFormatError(f"{path}: no schema_ref and no schema given")
        schema = load_schema(os.path.join(os.path.dirname(os.path.abspath(path)), ref))
    return model_from_json_dict(data, schema)
