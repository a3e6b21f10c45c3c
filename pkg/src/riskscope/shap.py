"""Shapley attributions for the forest.

Two routes with one contract: an exact enumeration oracle (2^d coalition
values, usable only at small encoded dimensionality) and the polynomial
per-tree path recursion. Both use path-dependent expectations: a split
on an out-of-coalition column descends both children weighted by
training cover. Encoded-column values are summed back into one value per
schema feature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .attribution import Attribution, Contribution, describe_value, rank_contributions
from .errors import ExplainError
from .forest import DecisionTree, RandomForest
from .schema import PatientRecord


@dataclass(frozen=True)
class ShapConfig:
    mode: str = "tree"
    max_exact_features: int = 16

    def __post_init__(self):
        if self.mode not in ("exact", "tree"):
            raise ExplainError(f"unknown SHAP mode {self.mode!r}")
        if not (1 <= self.max_exact_features <= 20):
            raise ExplainError("max_exact_features must be in [1, 20]")


def _tree_shap_encoded(tree: DecisionTree, x: Sequence[float], d: int) -> np.ndarray:
    """Path-recursion Shapley values for one tree, shape (d, n_outputs)."""
    # plain lists: node fields are hit constantly and scalar indexing into
    # numpy arrays dominates the profile otherwise
    feature = tree.feature.tolist()
    threshold = tree.threshold.tolist()
    left = tree.left.tolist()
    right = tree.right.tolist()
    cover = tree.cover.tolist()
    value = tree.value
    # deferred accumulation: (column, scalar weight, leaf node) triples are
    # gathered into phi in one vectorized pass at the end
    acc_col: list[int] = []
    acc_w: list[float] = []
    acc_node: list[int] = []

    def unwound_sum(zs, os_, ws, r):
        # total path weight with entry r removed, without materializing it
        l = len(ws)
        o_i, z_i = os_[r], zs[r]
        total = 0.0
        if o_i != 0.0:
            n = ws[l - 1]
            for b in range(l - 2, -1, -1):
                t = n * l / ((b + 1) * o_i)
                total += t
                n = ws[b] - t * z_i * (l - 1 - b) / l
        else:
            for b in range(l - 2, -1, -1):
                total += ws[b] * l / (z_i * (l - 1 - b))
        return total

    def unwind(ds, zs, os_, ws, r):
        l = len(ws)
        o_i, z_i = os_[r], zs[r]
        n = ws[l - 1]
        ws2 = ws[: l - 1]
        if o_i != 0.0:
            for b in range(l - 2, -1, -1):
                t = ws2[b]
                ws2[b] = n * l / ((b + 1) * o_i)
                n = t - ws2[b] * z_i * (l - 1 - b) / l
        else:
            for b in range(l - 2, -1, -1):
                ws2[b] = ws2[b] * l / (z_i * (l - 1 - b))
        ds2 = ds[:r] + ds[r + 1 :]
        zs2 = zs[:r] + zs[r + 1 :]
        os2 = os_[:r] + os_[r + 1 :]
        return ds2, zs2, os2, ws2

    def recurse(node, ds, zs, os_, ws, pz, po, pi):
        # extend the path with the incoming split
        l = len(ws)
        ds = ds + [pi]
        zs = zs + [pz]
        os_ = os_ + [po]
        ws = ws + [1.0 if l == 0 else 0.0]
        for a in range(l - 1, -1, -1):
            ws[a + 1] += po * ws[a] * (a + 1) / (l + 1)
            ws[a] = pz * ws[a] * (l - a) / (l + 1)

        f = feature[node]
        if f < 0:
            for r in range(1, len(ws)):
                w_sum = unwound_sum(zs, os_, ws, r)
                acc_col.append(ds[r])
                acc_w.append(w_sum * (os_[r] - zs[r]))
                acc_node.append(node)
            return

        if x[f] <= threshold[node]:
            hot, cold = left[node], right[node]
        else:
            hot, cold = right[node], left[node]
        iz = io = 1.0
        k = -1
        for r in range(1, len(ds)):
            if ds[r] == f:
                k = r
                break
        if k >= 0:
            iz, io = zs[k], os_[k]
            ds, zs, os_, ws = unwind(ds, zs, os_, ws, k)
        cov = cover[node]
        recurse(hot, ds, zs, os_, ws, iz * cover[hot] / cov, io, f)
        recurse(cold, ds, zs, os_, ws, iz * cover[cold] / cov, 0.0, f)

    recurse(0, [], [], [], [], 1.0, 1.0, -1)
    phi = np.zeros((d, tree.n_outputs))
    if acc_col:
        contrib = np.asarray(acc_w)[:, None] * value[np.asarray(acc_node)]
        np.add.at(phi, np.asarray(acc_col), contrib)
    return phi


def _tree_coalition_values(tree: DecisionTree, x: np.ndarray, d: int) -> np.ndarray:
    """v(S) for every coalition bitmask, shape (2^d, n_outputs)."""
    n_masks = 1 << d
    masks = np.arange(n_masks)

    def rec(node) -> np.ndarray:
        if tree.is_leaf(node):
            return np.tile(tree.value[node], (n_masks, 1))
        f = int(tree.feature[node])
        vl = rec(int(tree.left[node]))
        vr = rec(int(tree.right[node]))
        follow = vl if x[f] <= tree.threshold[node] else vr
        cov = tree.cover[node]
        blended = (
            (tree.cover[tree.left[node]] / cov) * vl
            + (tree.cover[tree.right[node]] / cov) * vr
        )
        in_coalition = ((masks >> f) & 1).astype(bool)
        return np.where(in_coalition[:, None], follow, blended)

    return rec(0)


def forest_shap_encoded(model: RandomForest, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Tree-algorithm Shapley values plus base value for one encoded row.

    Returns (phi: (n_encoded, n_outcomes), base: (n_outcomes,)), both
    averaged over trees.
    """
    d = model.encoder.n_encoded
    k = len(model.outcomes)
    x_list = np.asarray(x, dtype=np.float64).tolist()
    phi = np.zeros((d, k))
    for tree in model.trees:
        phi += _tree_shap_encoded(tree, x_list, d)
    return phi / len(model.trees), model.expected_value()


def forest_shap_exact_encoded(
    model: RandomForest, x: np.ndarray, config: ShapConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Brute-force Shapley values over all 2^d coalitions."""
    d = model.encoder.n_encoded
    if d > config.max_exact_features:
        raise ExplainError(
            f"exact SHAP limited to {config.max_exact_features} encoded columns, model has {d}"
        )
    k = len(model.outcomes)
    n_masks = 1 << d
    v = np.zeros((n_masks, k))
    for tree in model.trees:
        v += _tree_coalition_values(tree, x, d)
    v /= len(model.trees)

    popcount = np.array([bin(m).count("1") for m in range(n_masks)])
    fact = [math.factorial(i) for i in range(d + 1)]
    weight_by_size = np.array(
        [fact[s] * fact[d - 1 - s] / fact[d] for s in range(d)], dtype=np.float64
    )
    masks = np.arange(n_masks)
    phi = np.zeros((d, k))
    for j in range(d):
        without = masks[(masks >> j) & 1 == 0]
        w = weight_by_size[popcount[without]]
        phi[j] = (w[:, None] * (v[without | (1 << j)] - v[without])).sum(axis=0)
    return phi, v[0].copy()


def _build_attribution(
    model: RandomForest,
    record: PatientRecord,
    outcome: str,
    phi_encoded: np.ndarray,
    base: np.ndarray,
) -> Attribution:
    k = model.schema.outcome_index(outcome)
    per_feature = model.encoder.aggregate(phi_encoded[:, k])
    prediction = float(model.predict_records([record])[0][k])
    items = [
        Contribution(
            feature=spec.name,
            condition=describe_value(spec, value),
            value=float(per_feature[fi]),
        )
        for fi, (spec, value) in enumerate(zip(model.schema.features, record.values))
    ]
    return Attribution(
        method="SHAP",
        outcome=outcome,
        base_value=float(base[k]),
        contributions=rank_contributions(items),
        prediction=prediction,
    )


def explain_shap_tree(model: RandomForest, record: PatientRecord, outcome: str) -> Attribution:
    model.schema.outcome_index(outcome)
    x = model.encoder.encode_record(record)
    phi, base = forest_shap_encoded(model, x)
    return _build_attribution(model, record, outcome, phi, base)


def explain_shap_exact(
    model: RandomForest,
    record: PatientRecord,
    outcome: str,
    config: ShapConfig | None = None,
) -> Attribution:
    config = config or ShapConfig(mode="exact")
    model.schema.outcome_index(outcome)
    x = model.encoder.encode_record(record)
    phi, base = forest_shap_exact_encoded(model, x, config)
    return _build_attribution(model, record, outcome, phi, base)
