"""Region-queue model extraction through counterfactual queries (``tra``).

The attack maintains a queue of unexplored regions, initially the whole
domain. Each iteration pops a region, queries its center (one billed call
returning label + optional in-region counterfactual), and either finalizes
the region as a leaf (no counterfactual: the region is label-constant under
an exact oracle) or splits it along the axes where the counterfactual differs
from the query, materializing the cuts as tree nodes. Pieces on the query's
side inherit its label provisionally; the counterfactual's side gets the
complementary label in binary tasks and stays unknown otherwise, so partial
models are honest about unexplored space.

With an exact oracle the final tree is functionally equivalent to the target
on the entire grid. The queue order (FIFO, LIFO, random) shapes anytime
behavior only; the regions created, the final model, and the total query
count do not depend on it.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import CapacityError, ContractViolation
from .models import CatNode, Leaf, SplitNode, TreeModel
from .oracles import CounterfactualOracle, QueryLog
from .regions import Region, center, full_region, grid_volume, split

_ORDERS = ("fifo", "lifo", "random")


@dataclass(frozen=True)
class Snapshot:
    queries: int
    model: TreeModel
    certified_fraction: Fraction


@dataclass
class AttackResult:
    model: TreeModel
    log: QueryLog
    snapshots: list[Snapshot]
    method: str
    certified: bool  # whether every region was finalized through the oracle


class ExtractionState:
    """Node store plus work queue; regions in flight partition the domain."""

    def __init__(self, oracle: CounterfactualOracle, order: str, order_seed: int,
                 max_regions: int):
        if order not in _ORDERS:
            raise ContractViolation(f"unknown queue order {order!r}")
        self.oracle = oracle
        self.schema = oracle.schema
        self.order = order
        self.rng = np.random.default_rng(order_seed) if order == "random" else None
        self.max_regions = max_regions
        self.total_volume = full_region(self.schema).volume
        self.finalized_volume = 0
        # entries: ["pending", region, provisional] | ("leaf", label) | ("split", spec, l, r)
        self.nodes: list = [["pending", full_region(self.schema), None]]
        self.queue: deque[tuple[Region, int]] = deque()
        self.queue.append((full_region(self.schema), 0))

    @property
    def certified_fraction(self) -> Fraction:
        """Share of grid volume inside finalized leaves; lower-bounds uniform
        fidelity at any point of the run."""
        return Fraction(self.finalized_volume, self.total_volume)

    def pop(self) -> tuple[Region, int]:
        if self.order == "fifo":
            return self.queue.popleft()
        if self.order == "lifo":
            return self.queue.pop()
        i = int(self.rng.integers(len(self.queue)))
        self.queue.rotate(-i)
        item = self.queue.popleft()
        self.queue.rotate(i)
        return item

    def push(self, region: Region, slot: int) -> None:
        self.queue.append((region, slot))
        if len(self.nodes) > self.max_regions:
            raise CapacityError(
                f"extraction exceeded the safety bound of {self.max_regions} regions "
                f"(queue={len(self.queue)}, queries={self.oracle.log.count}); "
                "the target may be adversarial or the bound too small"
            )

    def materialize(self) -> TreeModel:
        nodes = []
        for entry in self.nodes:
            if entry[0] == "pending":
                nodes.append(Leaf(entry[2]))
            elif entry[0] == "leaf":
                nodes.append(Leaf(entry[1]))
            else:
                _, spec, left, right = entry
                if spec[0] == "s":
                    nodes.append(SplitNode(spec[1], spec[2], left, right))
                else:
                    nodes.append(CatNode(spec[1], spec[2], left, right))
        return TreeModel(self.schema, nodes, root=0)


def tra_extract(
    oracle: CounterfactualOracle,
    *,
    order: str = "fifo",
    order_seed: int = 0,
    snapshot_every: int = 20,
    max_regions: int = 10_000_000,
    stop_certified: float | Fraction | None = None,
) -> AttackResult:
    """Run the extraction until the queue drains (or ``stop_certified`` hits).

    Returns the reconstructed tree, the billed query log, and snapshots taken
    every ``snapshot_every`` queries plus one at termination.
    """
    state = ExtractionState(oracle, order, order_seed, max_regions)
    schema = oracle.schema
    binary = len(oracle.labels) == 2
    snapshots: list[Snapshot] = []
    stopped_early = False

    while state.queue:
        region, slot = state.pop()
        x = center(region)
        resp = oracle.query(x, region)
        y = resp.label
        if resp.counterfactual is None:
            state.nodes[slot] = ("leaf", y)
            state.finalized_volume += grid_volume(region, schema)
        else:
            pieces, steps = split(region, x, resp.counterfactual, schema)
            if binary:
                cf_label = oracle.labels[0] if y == oracle.labels[1] else oracle.labels[1]
            else:
                cf_label = None
            cur = slot
            for piece, step in zip(pieces[:-1], steps):
                piece_slot = len(state.nodes)
                state.nodes.append(["pending", piece, y])
                cont_slot = len(state.nodes)
                state.nodes.append(None)
                if step.iv_axis is not None:
                    spec = ("s", step.iv_axis, step.threshold)
                else:
                    spec = ("c", step.group, step.category)
                if step.x_left:
                    state.nodes[cur] = ("split", spec, piece_slot, cont_slot)
                else:
                    state.nodes[cur] = ("split", spec, cont_slot, piece_slot)
                state.push(piece, piece_slot)
                cur = cont_slot
            remainder = pieces[-1]
            state.nodes[cur] = ["pending", remainder, cf_label]
            state.push(remainder, cur)
        if snapshot_every and oracle.log.count % snapshot_every == 0:
            snapshots.append(
                Snapshot(oracle.log.count, state.materialize(), state.certified_fraction)
            )
        if stop_certified is not None and state.certified_fraction >= stop_certified:
            stopped_early = True
            break

    if not snapshots or snapshots[-1].queries != oracle.log.count:
        snapshots.append(
            Snapshot(oracle.log.count, state.materialize(), state.certified_fraction)
        )
    completed = not stopped_early
    if completed:
        assert state.certified_fraction == 1
    return AttackResult(
        model=state.materialize(),
        log=oracle.log,
        snapshots=snapshots,
        method="tra",
        certified=completed and oracle.config.mode == "exact",
    )
