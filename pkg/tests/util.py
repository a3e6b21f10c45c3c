"""Hand-built oracle models and brute-force reference implementations shared by tests."""

from __future__ import annotations

import numpy as np

from riskscope.encoding import FeatureEncoder
from riskscope.forest import DecisionTree, ForestConfig, RandomForest
from riskscope.schema import CohortSchema, Dataset


def fitted_encoder(dataset: Dataset) -> FeatureEncoder:
    return FeatureEncoder(dataset.schema).fit(dataset)


def constant_model(dataset: Dataset, value: float = 0.4) -> RandomForest:
    """One leaf, every outcome predicts `value` for every record."""
    schema = dataset.schema
    k = len(schema.outcomes)
    leaf = DecisionTree(
        feature=np.array([-1], dtype=np.int32),
        threshold=np.array([0.0]),
        left=np.array([-1], dtype=np.int32),
        right=np.array([-1], dtype=np.int32),
        value=np.full((1, k), value),
        cover=np.array([100], dtype=np.int64),
    )
    return RandomForest(
        schema=schema,
        encoder=fitted_encoder(dataset),
        trees=(leaf,),
        config=ForestConfig(n_trees=1),
        seed=0,
        dataset_fingerprint="constant-oracle",
        base_rates=np.full(k, value),
    )


def single_split_model(
    dataset: Dataset,
    feature: str = "glucose",
    threshold: float = 150.0,
    low: float = 0.1,
    high: float = 0.9,
    cover: tuple[int, int] = (50, 50),
) -> RandomForest:
    """One tree, one numerical split: <= threshold predicts low, else high."""
    schema = dataset.schema
    k = len(schema.outcomes)
    encoder = fitted_encoder(dataset)
    col = encoder.groups[schema.feature_index(feature)][0]
    root_value = (cover[0] * low + cover[1] * high) / sum(cover)
    tree = DecisionTree(
        feature=np.array([col, -1, -1], dtype=np.int32),
        threshold=np.array([threshold, 0.0, 0.0]),
        left=np.array([1, -1, -1], dtype=np.int32),
        right=np.array([2, -1, -1], dtype=np.int32),
        value=np.array([[root_value] * k, [low] * k, [high] * k]),
        cover=np.array([sum(cover), cover[0], cover[1]], dtype=np.int64),
    )
    return RandomForest(
        schema=schema,
        encoder=encoder,
        trees=(tree,),
        config=ForestConfig(n_trees=1),
        seed=0,
        dataset_fingerprint="single-split-oracle",
        base_rates=np.full(k, root_value),
    )


def auroc_bruteforce(scores, labels) -> float | None:
    """Pair counting: wins + half ties over positive-negative pairs."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    if not pos or not neg:
        return None
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def similar_bruteforce(dataset: Dataset, index, criteria) -> list:
    """Independent re-statement of the similarity definition."""
    schema = dataset.schema
    age_i = schema.feature_index(criteria.age_feature)
    exact_i = [schema.feature_index(name) for name in criteria.exact_match]
    com_i = [
        fi
        for fi, spec in enumerate(schema.features)
        if spec.kind == "binary" and "comorbidity" in spec.tags
    ]
    out = []
    for record in dataset.records:
        if record.id == index.id:
            continue
        a, b = record.values[age_i], index.values[age_i]
        if a is None or b is None or abs(a - b) > criteria.age_tolerance:
            continue
        if any(record.values[i] != index.values[i] for i in exact_i):
            continue
        if com_i:
            agree = sum(record.values[i] == index.values[i] for i in com_i) / len(com_i)
            if agree < criteria.comorbidity_threshold:
                continue
        out.append(record)
    return out


def shapley_bruteforce(predict_subset, n_features: int) -> np.ndarray:
    """Shapley values from the factorial definition over a coalition oracle.

    `predict_subset(mask)` returns the model's expected value when exactly
    the masked features are known. Exponential; keep n_features small.
    """
    import math

    phi = np.zeros(n_features)
    for j in range(n_features):
        for mask in range(1 << n_features):
            if mask & (1 << j):
                continue
            s = bin(mask).count("1")
            weight = (
                math.factorial(s)
                * math.factorial(n_features - s - 1)
                / math.factorial(n_features)
            )
            phi[j] += weight * (predict_subset(mask | (1 << j)) - predict_subset(mask))
    return phi


def tiny_schema() -> CohortSchema:
    """Four features, two outcomes; small enough for exhaustive oracles."""
    from riskscope.schema import FeatureSpec

    return CohortSchema(
        features=(
            FeatureSpec(name="age", kind="numerical", minimum=18, maximum=90, unit="years",
                        tags=frozenset({"demographic"}), precision=0),
            FeatureSpec(name="flag", kind="binary", tags=frozenset({"comorbidity"})),
            FeatureSpec(name="color", kind="categorical", levels=("red", "green", "blue")),
            FeatureSpec(name="lab", kind="numerical", minimum=0.0, maximum=10.0, unit="mg/dL",
                        tags=frozenset({"lab"}), mutable=True, normal_range=(2.0, 6.0)),
        ),
        outcomes=("bad", "worse"),
    )


def tiny_dataset(n: int = 60, seed: int = 0, labeled: bool = True) -> Dataset:
    """Random records over tiny_schema with labels correlated to `lab`."""
    from riskscope.schema import PatientRecord

    schema = tiny_schema()
    rng = np.random.default_rng(seed)
    records = []
    labels = np.zeros((n, 2), dtype=np.int8)
    for i in range(n):
        lab = float(rng.uniform(0, 10))
        values = (
            float(rng.integers(18, 91)),
            int(rng.integers(0, 2)),
            ("red", "green", "blue")[rng.integers(0, 3)],
            lab,
        )
        records.append(PatientRecord(id=f"T{i:03d}", values=schema.validate_values(values)))
        labels[i, 0] = rng.random() < (0.15 + 0.07 * lab)
        labels[i, 1] = rng.random() < 0.25
    return Dataset(schema=schema, records=tuple(records), labels=labels if labeled else None)
