"""Greedy decision-tree induction and random forests on the quantized grid.

Gini impurity with exact integer comparisons (no float ties), candidate
thresholds at floor midpoints between consecutive distinct grid values, and a
deterministic tie-break toward the lowest global axis then lowest threshold.
Cost-complexity pruning grid-searches 50 evenly spaced penalties over
[0, 0.2] against a validation set, preferring the larger penalty on ties.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import ContractViolation
from .models import CatNode, Leaf, Node, SplitNode, TreeModel, ForestModel, points_to_arrays
from .schema import FeatureSchema, Point

CCP_GRID: tuple[Fraction, ...] = tuple(
    Fraction(1, 5) * Fraction(i, 49) for i in range(50)
)


@dataclass(frozen=True)
class TrainConfig:
    max_depth: int | None = None
    min_samples_split: int = 2
    ccp_grid: tuple[Fraction, ...] = CCP_GRID
    n_trees: int = 10
    bootstrap: bool = True
    feature_subsampling: bool = True  # sqrt(m) axes per split, forests only
    seed: int = 0


def _majority(labels: np.ndarray) -> int:
    vals, counts = np.unique(labels, return_counts=True)
    return int(vals[np.argmax(counts)])  # unique() sorts, argmax keeps lowest id


class _Builder:
    def __init__(self, schema: FeatureSchema, iv: np.ndarray, cats: np.ndarray,
                 labels: np.ndarray, config: TrainConfig, rng=None):
        self.schema = schema
        self.iv = iv
        self.cats = cats
        self.labels = labels
        self.config = config
        self.rng = rng
        self.nodes: list[Node] = []
        m = schema.m
        self.n_sub = max(1, int(math.sqrt(m))) if (rng is not None and
                                                   config.feature_subsampling) else m

    def _axis_pool(self) -> list[int]:
        m = self.schema.m
        if self.n_sub >= m:
            return list(range(m))
        picked = self.rng.choice(m, size=self.n_sub, replace=False)
        return sorted(int(a) for a in picked)

    def _best_split(self, idx: np.ndarray):
        """Best (score, global_axis, spec) over candidate cuts, or None.

        The score maximized is sum_side (sum_c count_c^2) / n_side, compared
        exactly by cross-multiplication. Only strict improvements over the
        parent qualify.
        """
        labels = self.labels[idx]
        n = len(idx)
        classes, y = np.unique(labels, return_inverse=True)
        k = len(classes)
        total = np.bincount(y, minlength=k)
        s_parent = int((total.astype(object) ** 2).sum())
        best = None  # (num, den, global_axis, tie_t, spec)

        def consider(s_l, n_l, s_r, n_r, g_axis, tie_t, spec):
            nonlocal best
            num = s_l * n_r + s_r * n_l
            den = n_l * n_r
            # impure nodes split on the best candidate even at zero gain
            # (XOR-style patterns need the zero-gain first cut)
            if num * n < s_parent * den:
                return
            if best is not None:
                b_num, b_den, b_axis, b_t, _ = best
                lhs = num * b_den
                rhs = b_num * den
                if lhs < rhs or (lhs == rhs and (g_axis, tie_t) >= (b_axis, b_t)):
                    return
            best = (num, den, g_axis, tie_t, spec)

        pool = self._axis_pool()
        for g_axis in pool:
            entry = self.schema.axis_table[g_axis]
            if entry[0] == "i":
                ivx = entry[1]
                col = self.iv[idx, ivx]
                order = np.argsort(col, kind="stable")
                sv = col[order]
                sy = y[order]
                counts = np.zeros(k, dtype=np.int64)
                s_l = 0
                n_l = 0
                for j in range(n - 1):
                    c = sy[j]
                    s_l += 2 * counts[c] + 1
                    counts[c] += 1
                    n_l += 1
                    if sv[j] != sv[j + 1]:
                        t = int((int(sv[j]) + int(sv[j + 1])) // 2)
                        s_r = 0
                        rc = total - counts
                        s_r = int((rc.astype(object) ** 2).sum())
                        consider(int(s_l), n_l, s_r, n - n_l, g_axis, t,
                                 ("s", ivx, t))
            else:
                _, gi, c = entry
                col = self.cats[idx, gi]
                mask = col == c
                n_l = int(mask.sum())
                if n_l == 0 or n_l == n:
                    continue
                lc = np.bincount(y[mask], minlength=k)
                rc = total - lc
                s_l = int((lc.astype(object) ** 2).sum())
                s_r = int((rc.astype(object) ** 2).sum())
                consider(s_l, n_l, s_r, n - n_l, g_axis, 0, ("c", gi, c))
        return best

    def build(self, idx: np.ndarray, depth: int) -> int:
        labels = self.labels[idx]
        pure = labels.min() == labels.max()
        cfg = self.config
        if (
            pure
            or len(idx) < cfg.min_samples_split
            or (cfg.max_depth is not None and depth >= cfg.max_depth)
        ):
            self.nodes.append(Leaf(_majority(labels)))
            return len(self.nodes) - 1
        best = self._best_split(idx)
        if best is None:
            self.nodes.append(Leaf(_majority(labels)))
            return len(self.nodes) - 1
        _, _, _, _, spec = best
        if spec[0] == "s":
            _, ivx, t = spec
            mask = self.iv[idx, ivx] <= t
            left = self.build(idx[mask], depth + 1)
            right = self.build(idx[~mask], depth + 1)
            self.nodes.append(SplitNode(ivx, t, left, right))
        else:
            _, gi, c = spec
            mask = self.cats[idx, gi] == c
            left = self.build(idx[mask], depth + 1)
            right = self.build(idx[~mask], depth + 1)
            self.nodes.append(CatNode(gi, c, left, right))
        return len(self.nodes) - 1


def train_tree(schema: FeatureSchema, points: Sequence[Point], labels: Sequence[int],
               config: TrainConfig = TrainConfig(), _rng=None,
               _subsample=None) -> TreeModel:
    if len(points) == 0:
        raise ContractViolation("training needs at least one sample")
    if len(points) != len(labels):
        raise ContractViolation("points and labels disagree in length")
    iv, cats = points_to_arrays(schema, points)
    y = np.asarray(labels, dtype=np.int64)
    if y.min() < 0:
        raise ContractViolation("labels must be non-negative ints")
    idx = np.arange(len(points)) if _subsample is None else _subsample
    builder = _Builder(schema, iv, cats, y, config, rng=_rng)
    root = builder.build(idx, 0)
    return TreeModel(schema, builder.nodes, root)


def train_forest(schema: FeatureSchema, points: Sequence[Point],
                 labels: Sequence[int], config: TrainConfig = TrainConfig()) -> ForestModel:
    """Bootstrap-bagged trees with per-split feature subsampling."""
    if config.n_trees < 1:
        raise ContractViolation("n_trees must be >= 1")
    rng = np.random.default_rng(config.seed)
    n = len(points)
    trees = []
    for _ in range(config.n_trees):
        tree_rng = np.random.default_rng(rng.integers(0, 2**63 - 1))
        sub = tree_rng.integers(0, n, size=n) if config.bootstrap else None
        trees.append(
            train_tree(schema, points, labels, config, _rng=tree_rng, _subsample=sub)
        )
    return ForestModel(schema, trees)


# -- cost-complexity pruning ---------------------------------------------------

def _route_counts(tree: TreeModel, iv: np.ndarray, cats: np.ndarray,
                  labels: np.ndarray) -> dict[int, np.ndarray]:
    """Per-node class counts for the training sample."""
    k = int(labels.max()) + 1 if len(labels) else 1
    counts = {i: np.zeros(k, dtype=np.int64) for i in range(len(tree.nodes))}
    stack = [(tree.root, np.arange(len(labels)))]
    while stack:
        i, sel = stack.pop()
        counts[i] = np.bincount(labels[sel], minlength=k)
        node = tree.nodes[i]
        if isinstance(node, Leaf):
            continue
        if isinstance(node, SplitNode):
            mask = iv[sel, node.iv_axis] <= node.threshold
        else:
            mask = cats[sel, node.group] == node.category
        stack.append((node.left, sel[mask]))
        stack.append((node.right, sel[~mask]))
    return counts


def cost_complexity_prune(tree: TreeModel, train_points: Sequence[Point],
                          train_labels: Sequence[int], alpha) -> TreeModel:
    """Weakest-link pruning with penalty ``alpha`` on training misclassification.

    Collapses subtrees while the cheapest link's effective penalty stays
    strictly below ``alpha`` (so ``alpha = 0`` returns the tree unchanged).
    """
    alpha = Fraction(alpha) if not isinstance(alpha, Fraction) else alpha
    iv, cats = points_to_arrays(tree.schema, train_points)
    y = np.asarray(train_labels, dtype=np.int64)
    n_total = len(y)
    if n_total == 0:
        raise ContractViolation("pruning needs training samples")
    counts = _route_counts(tree, iv, cats, y)

    children: dict[int, tuple[int, int] | None] = {}
    for i, node in enumerate(tree.nodes):
        children[i] = None if isinstance(node, Leaf) else (node.left, node.right)

    def node_risk(i: int) -> Fraction:
        c = counts[i]
        return Fraction(int(c.sum() - c.max()), n_total) if c.sum() else Fraction(0)

    collapsed: set[int] = set()

    def subtree(i: int) -> tuple[Fraction, int]:
        """(risk, leaf count) for the current pruned structure below i."""
        if children[i] is None or i in collapsed:
            return node_risk(i), 1
        l, r = children[i]
        rl, nl = subtree(l)
        rr, nr = subtree(r)
        return rl + rr, nl + nr

    def internal_nodes() -> list[int]:
        out = []
        stack = [tree.root]
        while stack:
            i = stack.pop()
            if children[i] is not None and i not in collapsed:
                out.append(i)
                stack.extend(children[i])
        return out

    while True:
        live = internal_nodes()
        if not live:
            break
        best_g = None
        weakest: list[int] = []
        for i in live:
            r_sub, leaves = subtree(i)
            g = (node_risk(i) - r_sub) / (leaves - 1)
            if best_g is None or g < best_g:
                best_g, weakest = g, [i]
            elif g == best_g:
                weakest.append(i)
        if best_g >= alpha:
            break
        collapsed.update(weakest)

    # rebuild without the collapsed subtrees
    nodes: list[Node] = []

    def rebuild(i: int) -> int:
        if children[i] is None and i not in collapsed:
            nodes.append(Leaf(tree.nodes[i].label))
            return len(nodes) - 1
        if i in collapsed:
            c = counts[i]
            nodes.append(Leaf(int(c.argmax()) if c.sum() else 0))
            return len(nodes) - 1
        l, r = children[i]
        nl = rebuild(l)
        nr = rebuild(r)
        old = tree.nodes[i]
        if isinstance(old, SplitNode):
            nodes.append(SplitNode(old.iv_axis, old.threshold, nl, nr))
        else:
            nodes.append(CatNode(old.group, old.category, nl, nr))
        return len(nodes) - 1

    root = rebuild(tree.root)
    return TreeModel(tree.schema, nodes, root)


def accuracy(model, points: Sequence[Point], labels: Sequence[int]) -> Fraction:
    if not points:
        raise ContractViolation("empty evaluation set")
    iv, cats = points_to_arrays(model.schema, points)
    pred = model.predict_arrays(iv, cats)
    return Fraction(int((pred == np.asarray(labels)).sum()), len(points))


def prune(tree: TreeModel, train_points: Sequence[Point], train_labels: Sequence[int],
          val_points: Sequence[Point], val_labels: Sequence[int],
          config: TrainConfig = TrainConfig()) -> TreeModel:
    """Grid search the pruning penalty; best validation accuracy wins, ties
    go to the larger penalty (smaller tree)."""
    best = None  # (acc, alpha, model)
    for alpha in config.ccp_grid:
        cand = cost_complexity_prune(tree, train_points, train_labels, alpha)
        acc = accuracy(cand, val_points, val_labels)
        if best is None or (acc, alpha) > (best[0], best[1]):
            best = (acc, alpha, cand)
    return best[2]
