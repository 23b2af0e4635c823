"""Shared fixtures: schema builders and the brute-force reference oracle.

The brute-force counterfactual search below enumerates every grid point of a
region and is deliberately independent of the projection-based oracle it
checks against.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import settings

import cfextract as cx

settings.register_profile("suite", max_examples=50, deadline=None)
settings.load_profile("suite")


def make_schema(kind: str) -> cx.FeatureSchema:
    if kind == "2num":
        return cx.FeatureSchema([
            cx.NumericFeature("x1", 0, 1, Fraction(1, 256)),
            cx.NumericFeature("x2", 0, 1, Fraction(1, 256)),
        ])
    if kind == "grid10":
        return cx.FeatureSchema([
            cx.NumericFeature("x1", 0, 1, Fraction(1, 10)),
            cx.NumericFeature("x2", 0, 1, Fraction(1, 10)),
        ])
    if kind == "mixed":
        return cx.FeatureSchema([
            cx.NumericFeature("a", 0, 1, Fraction(1, 64)),
            cx.BinaryFeature("b"),
            cx.OrdinalFeature("c", 8),
            cx.CategoricalFeature("d", ("p", "q", "r")),
        ])
    if kind == "small3":
        return cx.FeatureSchema([
            cx.NumericFeature("a", 0, 1, Fraction(1, 31)),
            cx.OrdinalFeature("b", 16),
            cx.NumericFeature("c", 0, 1, Fraction(1, 15)),
        ])
    raise ValueError(kind)


@pytest.fixture
def schema_2num():
    return make_schema("2num")


@pytest.fixture
def schema_grid10():
    return make_schema("grid10")


@pytest.fixture
def schema_mixed():
    return make_schema("mixed")


def enumerate_region(schema: cx.FeatureSchema, region: cx.Region):
    """All grid points of a region as (iv, cats) index arrays."""
    axes = [np.arange(a, b + 1, dtype=np.int64) for a, b in region.intervals]
    cat_axes = [np.array(sorted(s), dtype=np.int64) for s in region.allowed]
    grids = np.meshgrid(*axes, *cat_axes, indexing="ij") if (axes or cat_axes) else []
    cols = [g.reshape(-1) for g in grids]
    n_iv = len(axes)
    n = cols[0].size if cols else 1
    iv = (np.stack(cols[:n_iv], axis=1) if n_iv
          else np.zeros((n, 0), dtype=np.int64))
    cats = (np.stack(cols[n_iv:], axis=1) if cat_axes
            else np.zeros((n, 0), dtype=np.int64))
    return iv, cats


def brute_force_cf(model, x: cx.Point, region: cx.Region, dist: cx.Distance):
    """Reference oracle: full enumeration of the region's grid points."""
    schema = model.schema
    iv, cats = enumerate_region(schema, region)
    labels = model.predict_arrays(iv, cats)
    y = model.predict(x)
    flip = labels != y
    if not flip.any():
        return None
    x_iv = np.asarray(x.ivals, dtype=np.int64)
    x_cat = np.asarray(x.cats, dtype=np.int64)
    w = np.asarray(dist.weights, dtype=np.int64)
    if iv.shape[1]:
        diff = (iv - x_iv) * w
        base = (diff * diff).sum(axis=1) if dist.kind == "l2" else np.abs(diff).sum(axis=1)
    else:
        base = np.zeros(len(labels), dtype=np.int64)
    if cats.shape[1]:
        base = base + (cats != x_cat).sum(axis=1) * dist.group_term
    d = np.where(flip, base, np.iinfo(np.int64).max)
    best = int(d.min())
    ties = np.flatnonzero(d == best)
    pts = [cx.Point(tuple(int(v) for v in iv[i]), tuple(int(c) for c in cats[i]))
           for i in ties]
    return best, min(pts, key=schema.lex_key)


def random_subregion(schema: cx.FeatureSchema, rng) -> cx.Region:
    intervals = []
    for size in schema.iv_sizes:
        a = int(rng.integers(0, size))
        b = int(rng.integers(a, size))
        intervals.append((a, b))
    allowed = []
    for k in schema.group_sizes:
        n_pick = int(rng.integers(1, k + 1))
        allowed.append(frozenset(int(c) for c in rng.choice(k, size=n_pick, replace=False)))
    return cx.Region(tuple(intervals), tuple(allowed))
