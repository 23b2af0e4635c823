from fractions import Fraction

import numpy as np
import pytest

import cfextract as cx
from tests.conftest import make_schema
from tests.test_models import single_split_tree


# -- PathFinding ---------------------------------------------------------------


def test_pathfinding_single_leaf_costs_seed_plus_boundaries(schema_grid10):
    target = cx.TreeModel(schema_grid10, [cx.Leaf(0)])
    oracle = cx.LeafIdOracle(target)
    model, log = cx.pathfinding_extract(oracle, schema_grid10,
                                        epsilon=Fraction(1, 10))
    assert model.node_count == 1
    # one seed query plus one confirmation probe per axis side
    assert log.count == 1 + 2 * schema_grid10.m


def test_pathfinding_single_split_exact_and_costlier_than_tra():
    sch = cx.FeatureSchema([
        cx.NumericFeature("x1", 0, 1, Fraction(1, 1024)),
        cx.NumericFeature("x2", 0, 1, Fraction(1, 1024)),
    ])
    target = single_split_tree(sch, 0, 511)
    model, log = cx.pathfinding_extract(cx.LeafIdOracle(target), sch,
                                        epsilon=Fraction(1, 1024))
    ok, _ = cx.functional_equivalence(target, model, sch)
    assert ok
    tra_res = cx.tra_extract(cx.CounterfactualOracle(target))
    assert tra_res.log.count == 3
    # bisection pays out log2(1/delta) probes per discovered boundary
    assert log.count > 5 * tra_res.log.count


def test_pathfinding_equivalence_on_random_trees(schema_mixed):
    delta = min(ax.step for ax in schema_mixed.interval_axes)
    for seed in range(4):
        target = cx.gen_random_tree(schema_mixed, depth=5, seed=seed)
        model, log = cx.pathfinding_extract(cx.LeafIdOracle(target), schema_mixed, delta)
        ok, witness = cx.functional_equivalence(target, model, schema_mixed)
        assert ok, witness
        assert log.count > cx.stats(target).leaf_count  # strictly more than one per leaf


def test_pathfinding_rejects_forests(schema_mixed):
    forest = cx.gen_random_forest(schema_mixed, 2, 2, seed=0)
    with pytest.raises(cx.UnsupportedModelError):
        cx.LeafIdOracle(forest)


def test_pathfinding_epsilon_below_grid_rejected(schema_grid10):
    target = single_split_tree(schema_grid10, 0, 5)
    with pytest.raises(cx.ContractViolation):
        cx.pathfinding_extract(cx.LeafIdOracle(target), schema_grid10,
                               epsilon=Fraction(1, 100_000))


def test_pathfinding_coarse_epsilon_still_terminates():
    sch = cx.FeatureSchema([cx.NumericFeature("x", 0, 1, Fraction(1, 64))])
    target = cx.TreeModel(sch, [cx.Leaf(0), cx.Leaf(1), cx.SplitNode(0, 40, 0, 1)], root=2)
    model, log = cx.pathfinding_extract(cx.LeafIdOracle(target), sch,
                                        epsilon=Fraction(1, 8))
    assert model.leaf_count >= 2
    fid = cx.fidelity(target, model, sch, n_samples=1000, seed=0)
    assert fid.fidelity >= 0.9  # boundary located only to the coarse precision


# -- budgets -----------------------------------------------------------------------


def test_default_budget_is_fifty_times_nodes(schema_grid10):
    target = single_split_tree(schema_grid10, 0, 5)
    assert cx.default_budget(target).max_queries == 50 * 3


def test_budget_validation():
    with pytest.raises(cx.ContractViolation):
        cx.AttackBudget(0)


# -- CF ------------------------------------------------------------------------------


def test_cf_round_bills_one_query(schema_mixed):
    target = cx.gen_random_tree(schema_mixed, depth=4, seed=1)
    oracle = cx.CounterfactualOracle(target)
    res = cx.cf_attack(oracle, cx.AttackBudget(17), seed=0)
    assert res.log.count == 17
    assert res.method == "cf" and not res.certified


def test_cf_constant_target_constant_surrogate(schema_grid10):
    target = cx.TreeModel(schema_grid10, [cx.Leaf(1)])
    oracle = cx.CounterfactualOracle(target)
    res = cx.cf_attack(oracle, cx.AttackBudget(10), seed=0)
    assert all(rec.counterfactual is None for rec in res.log.records)
    assert res.model.node_count == 1
    assert cx.fidelity(target, res.model, schema_grid10, 500, seed=0).fidelity == 1.0


def test_cf_budget_one_trains_on_at_most_two_points():
    sch = make_schema("grid10")
    target = single_split_tree(sch, 0, 5)  # mid split: both priors 0.5
    oracle = cx.CounterfactualOracle(target)
    res = cx.cf_attack(oracle, cx.AttackBudget(1), seed=3)
    assert res.log.count == 1
    assert res.model.leaf_count <= 2
    fid = cx.fidelity(target, res.model, sch, 2000, seed=1).fidelity
    assert fid >= 0.5  # never below the max class prior here


# -- DualCF ---------------------------------------------------------------------------


def test_dualcf_round_bills_two_queries(schema_mixed):
    target = cx.gen_random_tree(schema_mixed, depth=4, seed=1)
    oracle = cx.CounterfactualOracle(target)
    res = cx.dualcf_attack(oracle, cx.AttackBudget(20), seed=0)
    assert res.log.count == 20
    # rounds alternate original and ccf queries over the full domain
    regions = {rec.region for rec in res.log.records}
    assert regions == {cx.full_region(schema_mixed)}


def test_dualcf_tightens_threshold_vs_cf():
    # single mid split: ccf points straddle the boundary from both sides, so
    # the dualcf surrogate's threshold lands at least as close to the truth
    sch = cx.FeatureSchema([cx.NumericFeature("x", 0, 1, Fraction(1, 256))])
    true_t = 128
    target = cx.TreeModel(sch, [cx.Leaf(0), cx.Leaf(1), cx.SplitNode(0, true_t, 0, 1)],
                          root=2)

    def learned_threshold(res):
        ts = [n.threshold for n in res.model.nodes if isinstance(n, cx.SplitNode)]
        return min(abs(t - true_t) for t in ts) if ts else 10**9

    budget = cx.AttackBudget(6)
    cf_res = cx.cf_attack(cx.CounterfactualOracle(target), budget, seed=5)
    dual_res = cx.dualcf_attack(cx.CounterfactualOracle(target), budget, seed=5)
    assert learned_threshold(dual_res) <= learned_threshold(cf_res)


def test_surrogate_fidelity_reasonable(schema_mixed):
    target = cx.gen_random_tree(schema_mixed, depth=4, seed=7)
    budget = cx.AttackBudget(300)
    cf_res = cx.cf_attack(cx.CounterfactualOracle(target), budget, seed=1)
    dual_res = cx.dualcf_attack(cx.CounterfactualOracle(target), budget, seed=1)
    for res in (cf_res, dual_res):
        fid = cx.fidelity(target, res.model, schema_mixed, 2000, seed=2).fidelity
        assert fid >= 0.8
        assert res.snapshots[-1].queries == 300


def test_forest_surrogate_kind(schema_mixed):
    target = cx.gen_random_tree(schema_mixed, depth=3, seed=2)
    oracle = cx.CounterfactualOracle(target)
    res = cx.cf_attack(oracle, cx.AttackBudget(40),
                       cx.SurrogateSpec(kind="forest", train=cx.TrainConfig(n_trees=3)),
                       seed=0)
    assert isinstance(res.model, cx.ForestModel)


def test_multiclass_cf_bills_extra_label_queries():
    sch = make_schema("grid10")
    target = cx.gen_chessboard(sch, (2, 1), n_classes=3)
    oracle = cx.CounterfactualOracle(target)
    res = cx.cf_attack(oracle, cx.AttackBudget(30), seed=0)
    assert res.log.count == 30
    # counterfactual labels come from their own billed queries here: some
    # queried points must coincide with previously returned counterfactuals
    xs = [rec.x for rec in res.log.records]
    cfs = [rec.counterfactual for rec in res.log.records if rec.counterfactual]
    assert any(cf in xs for cf in cfs)
