"""Command-line pipelines: gen | train | attack | eval | report.

Exit codes: 0 success, 1 usage error, 2 contract violation, 3 capacity.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from fractions import Fraction

import numpy as np

from . import __version__
from .baselines import (AttackBudget, LeafIdOracle, SurrogateSpec, cf_attack,
                        default_budget, dualcf_attack, pathfinding_extract)
from .cart import TrainConfig, prune, train_forest, train_tree, accuracy
from .datasets import ingest_csv
from .errors import CapacityError, ContractViolation, UnsupportedModelError
from .evaluation import (bound_report, fidelity, functional_equivalence,
                         measured_ratio, uniform_points)
from .generators import (AdversarialSpec, gen_adversarial, gen_chessboard,
                         gen_random_forest, gen_random_tree)
from .models import ForestModel, TreeModel, load_model, save_model, stats
from .oracles import CounterfactualOracle, OracleConfig
from .regions import full_region, region_json, sample_point
from .schema import load_schema, save_schema
from .tra import tra_extract


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError as exc:
        raise _UsageError(f"expected a comma-separated integer list, got {text!r}") from exc


def build_parser() -> _Parser:
    p = _Parser(prog="cfextract", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic target model")
    g.add_argument("--kind", required=True,
                   choices=["random-tree", "random-forest", "chessboard", "adversarial"])
    g.add_argument("--schema", help="schema JSON (random-* and chessboard kinds)")
    g.add_argument("--depth", type=int, default=4)
    g.add_argument("--trees", type=int, default=5)
    g.add_argument("--classes", type=int, default=2)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--s", help="comma-separated split counts (chessboard, adversarial)")
    g.add_argument("--epsilon", help="adversarial placement offset (exact number)")
    g.add_argument("--delta", help="adversarial grid step (exact number)")
    g.add_argument("--out", required=True, help="output model JSON")

    t = sub.add_parser("train", help="train a target on an ingested CSV dataset")
    t.add_argument("--data", required=True)
    t.add_argument("--schema-config", required=True)
    t.add_argument("--label", required=True, help="label column name")
    t.add_argument("--kind", choices=["tree", "forest"], default="tree")
    t.add_argument("--trees", type=int, default=10)
    t.add_argument("--max-depth", type=int)
    t.add_argument("--no-prune", action="store_true")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)

    a = sub.add_parser("attack", help="run an extraction attack against a model")
    a.add_argument("--method", required=True, choices=["tra", "pathfinding", "cf", "dualcf"])
    a.add_argument("--target", required=True, help="target model JSON")
    a.add_argument("--schema", help="schema JSON (defaults to the model's schema_ref)")
    a.add_argument("--oracle", choices=["exact", "heuristic"], default="exact")
    a.add_argument("--distance", choices=["l2", "l1"], default="l2")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--budget", help="query budget for cf/dualcf (int or 'auto')",
                   default="auto")
    a.add_argument("--order", choices=["fifo", "lifo", "random"], default="fifo")
    a.add_argument("--snapshot-every", type=int, default=20)
    a.add_argument("--epsilon", help="pathfinding split precision", default=None)
    a.add_argument("--surrogate", choices=["tree", "forest"], default="tree")
    a.add_argument("--oracle-samples", type=int, default=1000,
                   help="heuristic oracle: uniform draws per query")
    a.add_argument("--oracle-train-size", type=int, default=500,
                   help="heuristic oracle: size of its server-side labeled sample")
    a.add_argument("--fidelity-samples", type=int, default=3000)
    a.add_argument("--out", required=True, help="extracted model JSON")
    a.add_argument("--trace", help="JSON-lines query trace")
    a.add_argument("--curve", help="anytime curve CSV")

    e = sub.add_parser("eval", help="equivalence / fidelity / bounds / ratio reports")
    e.add_argument("--equivalence", nargs=2, metavar=("A", "B"))
    e.add_argument("--fidelity", nargs=2, metavar=("A", "B"))
    e.add_argument("--bounds", metavar="MODEL")
    e.add_argument("--ratio", action="store_true")
    e.add_argument("--target")
    e.add_argument("--extracted")
    e.add_argument("--trace")
    e.add_argument("--schema")
    e.add_argument("--samples", type=int, default=3000)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out")

    r = sub.add_parser("report", help="aggregate anytime curves (means over runs)")
    r.add_argument("curves", nargs="+", help="curve CSVs from 'attack'")
    r.add_argument("--out", required=True)
    return p


def _load_target(args):
    schema = load_schema(args.schema) if args.schema else None
    model = load_model(args.target, schema)
    return model, model.schema


def _write_trace(path, schema, log):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in log.records:
            fh.write(json.dumps({
                "index": rec.index,
                "x": schema.point_json(rec.x),
                "region": region_json(rec.region, schema),
                "label": rec.label,
                "counterfactual": None if rec.counterfactual is None
                else schema.point_json(rec.counterfactual),
            }) + "\n")


def _write_curve(path, method, target, schema, snapshots, samples, seed):
    iv, cats = uniform_points(schema, samples, seed)
    ref = target.predict_arrays(iv, cats)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["attack", "queries", "certified_fraction", "fidelity_uniform"])
        for snap in snapshots:
            pred = snap.model.predict_arrays(iv, cats)
            fid = float(((pred == ref) & (pred != -1)).mean())
            w.writerow([method, snap.queries, float(snap.certified_fraction), fid])


def _cmd_gen(args) -> int:
    if args.kind in ("random-tree", "random-forest", "chessboard"):
        if not args.schema:
            raise _UsageError(f"--schema is required for kind {args.kind}")
        schema = load_schema(args.schema)
        if args.kind == "random-tree":
            model = gen_random_tree(schema, args.depth, args.seed, args.classes)
        elif args.kind == "random-forest":
            model = gen_random_forest(schema, args.trees, args.depth, args.seed,
                                      args.classes)
        else:
            if not args.s:
                raise _UsageError("--s is required for chessboard")
            model = gen_chessboard(schema, _int_list(args.s), args.classes)
        schema_ref = os.path.relpath(
            os.path.abspath(args.schema), os.path.dirname(os.path.abspath(args.out)) or "."
        )
    else:
        if not args.s:
            raise _UsageError("--s is required for adversarial")
        spec = AdversarialSpec(
            _int_list(args.s),
            epsilon=Fraction(args.epsilon) if args.epsilon else None,
            delta=Fraction(args.delta) if args.delta else None,
        )
        model = gen_adversarial(spec)
        schema_path = args.out + ".schema.json"
        save_schema(schema_path, model.schema)
        schema_ref = os.path.basename(schema_path)
    save_model(args.out, model, schema_ref)
    st = stats(model)
    print(f"wrote {args.out}: n={st.n} nodes={st.node_count} leaves={st.leaf_count}")
    return 0


def _cmd_train(args) -> int:
    with open(args.schema_config, "r", encoding="utf-8") as fh:
        config = json.load(fh)
    bundle = ingest_csv(args.data, config, args.label, args.seed)
    cfg = TrainConfig(max_depth=args.max_depth, n_trees=args.trees, seed=args.seed)
    train_p, train_y = bundle.train
    if args.kind == "forest":
        model = train_forest(bundle.schema, train_p, train_y, cfg)
    else:
        model = train_tree(bundle.schema, train_p, train_y, cfg)
        if not args.no_prune and bundle.val_idx:
            val_p, val_y = bundle.val
            model = prune(model, train_p, train_y, val_p, val_y, cfg)
    schema_path = args.out + ".schema.json"
    save_schema(schema_path, bundle.schema)
    save_model(args.out, model, os.path.basename(schema_path))
    test_p, test_y = bundle.test
    acc = float(accuracy(model, test_p, test_y)) if test_p else float("nan")
    print(f"wrote {args.out}: test_accuracy={acc:.4f} nodes={stats(model).node_count}")
    return 0


def _cmd_attack(args) -> int:
    target, schema = _load_target(args)
    if args.method == "pathfinding":
        if isinstance(target, ForestModel):
            raise _UsageError("pathfinding applies to single trees only")
        oracle = LeafIdOracle(target)
        eps = Fraction(args.epsilon) if args.epsilon else min(
            (ax.step for ax in schema.interval_axes)
        )
        model, log = pathfinding_extract(oracle, schema, eps)
        snapshots = []
        result_method = "pathfinding"
    else:
        training = None
        if args.oracle == "heuristic":
            rng = np.random.default_rng(args.seed + 7_777_777)
            domain = full_region(schema)
            training = [sample_point(domain, rng) for _ in range(args.oracle_train_size)]
        oracle = CounterfactualOracle(
            target,
            OracleConfig(distance=args.distance, mode=args.oracle,
                         sample_budget=args.oracle_samples, seed=args.seed),
            training_data=training,
        )
        if args.method == "tra":
            res = tra_extract(oracle, order=args.order, order_seed=args.seed,
                              snapshot_every=args.snapshot_every)
        else:
            budget = (default_budget(target) if args.budget == "auto"
                      else AttackBudget(int(args.budget)))
            attack = cf_attack if args.method == "cf" else dualcf_attack
            res = attack(oracle, budget, SurrogateSpec(kind=args.surrogate,
                                                       train=TrainConfig(seed=args.seed)),
                         seed=args.seed, snapshot_every=args.snapshot_every)
        model, log, snapshots = res.model, res.log, res.snapshots
        result_method = res.method
    schema_path = args.out + ".schema.json"
    save_schema(schema_path, schema)
    save_model(args.out, model, os.path.basename(schema_path))
    if args.trace:
        _write_trace(args.trace, schema, log)
    if args.curve and snapshots:
        _write_curve(args.curve, result_method, target, schema, snapshots,
                     args.fidelity_samples, args.seed)
    print(f"{result_method}: {log.count} queries, extracted -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    report: dict = {}
    schema = load_schema(args.schema) if args.schema else None
    if args.equivalence:
        a = load_model(args.equivalence[0], schema)
        b = load_model(args.equivalence[1], a.schema)
        ok, witness = functional_equivalence(a, b, a.schema)
        report["equivalence"] = {
            "equivalent": ok,
            "witness": None if witness is None else a.schema.point_json(witness),
        }
    if args.fidelity:
        a = load_model(args.fidelity[0], schema)
        b = load_model(args.fidelity[1], a.schema)
        rep = fidelity(a, b, a.schema, n_samples=args.samples, seed=args.seed)
        report["fidelity"] = {
            "fidelity": rep.fidelity,
            "sample_count": rep.sample_count,
            "seed": rep.seed,
            "kind": rep.kind,
        }
    if args.bounds:
        model = load_model(args.bounds, schema)
        br = bound_report(model)
        report["bounds"] = {
            "n": br.n,
            "s": list(br.s),
            "prop1_bound": br.prop1_bound,
            "cor1_bound": str(br.cor1_bound),
            "cor1_bound_float": float(br.cor1_bound),
            "worst_case_queries": br.worst_case_queries,
            "opt_queries_lower": br.opt_queries_lower,
            "c_tra": str(br.c_tra),
            "c_tra_float": float(br.c_tra),
        }
    if args.ratio:
        if not (args.target and args.extracted and args.trace):
            raise _UsageError("--ratio needs --target, --extracted and --trace")
        target = load_model(args.target, schema)
        extracted = load_model(args.extracted, target.schema)
        with open(args.trace, "r", encoding="utf-8") as fh:
            queries = sum(1 for line in fh if line.strip())
        ratio = measured_ratio(queries, target, extracted, target.schema)
        report["ratio"] = {"queries": queries, "ratio": str(ratio),
                           "ratio_float": float(ratio)}
    if not report:
        raise _UsageError("eval needs at least one of --equivalence/--fidelity/--bounds/--ratio")
    text = json.dumps(report, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _cmd_report(args) -> int:
    """Mean fidelity (and certified fraction) per checkpoint, grouped by attack."""
    series: dict[str, dict[int, list[tuple[float, float]]]] = {}
    for path in args.curves:
        with open(path, "r", newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                attack = row["attack"]
                q = int(row["queries"])
                series.setdefault(attack, {}).setdefault(q, []).append(
                    (float(row["certified_fraction"]), float(row["fidelity_uniform"]))
                )
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["attack", "queries", "mean_certified_fraction", "mean_fidelity"])
        for attack in sorted(series):
            for q in sorted(series[attack]):
                vals = series[attack][q]
                w.writerow([
                    attack, q,
                    sum(v[0] for v in vals) / len(vals),
                    sum(v[1] for v in vals) / len(vals),
                ])
    print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "train": _cmd_train,
    "attack": _cmd_attack,
    "eval": _cmd_eval,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except UnsupportedModelError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ContractViolation as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return 2
    except CapacityError as exc:
        print(f"capacity exceeded: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:  # console script
    sys.exit(main())
