"""Random forest with multi-output probability leaves.

Trees are grown greedily on Gini impurity over the encoded matrix, with
bootstrap sampling per tree. Each tree draws from its own seeded stream
(spawned from the training seed) so tree-level parallelism cannot change
the result. Every node stores its training mean and cover count, which
the Shapley explainer relies on for path-dependent expectations.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .encoding import FeatureEncoder
from .errors import ArtifactError, PredictionError, TrainingError
from .schema import CohortSchema, Dataset, PatientRecord

MODEL_FORMAT = "riskscope-model"
MODEL_FORMAT_VERSION = 1

_GAIN_EPS = 1e-12


@dataclass(frozen=True)
class ForestConfig:
    """Training hyperparameters.

    ``features_per_split`` may be an integer count, a fraction of the
    encoded column count in (0, 1], or None for the square-root rule.
    """

    n_trees: int = 300
    max_depth: int = 16
    min_leaf: int = 5
    features_per_split: int | float | None = None

    def __post_init__(self):
        if self.n_trees < 1:
            raise TrainingError("n_trees must be >= 1")
        if self.max_depth < 1:
            raise TrainingError("max_depth must be >= 1")
        if self.min_leaf < 1:
            raise TrainingError("min_leaf must be >= 1")
        f = self.features_per_split
        if f is not None:
            if isinstance(f, bool) or not isinstance(f, (int, float)):
                raise TrainingError("features_per_split must be a count, fraction, or None")
            if isinstance(f, float) and not (0.0 < f <= 1.0):
                raise TrainingError("fractional features_per_split must be in (0, 1]")
            if isinstance(f, int) and f < 1:
                raise TrainingError("features_per_split count must be >= 1")

    def resolve_features_per_split(self, n_encoded: int) -> int:
        f = self.features_per_split
        if f is None:
            m = round(math.sqrt(n_encoded))
        elif isinstance(f, float):
            m = round(f * n_encoded)
        else:
            m = f
        return max(1, min(int(m), n_encoded))

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "features_per_split": self.features_per_split,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ForestConfig":
        return cls(**doc)


@dataclass(frozen=True)
class DecisionTree:
    """Array-backed binary tree; node 0 is the root.

    ``feature`` holds the encoded column index, or -1 for leaves.
    ``value`` is the per-outcome training mean at every node (internal
    nodes included); ``cover`` the bootstrap row count.
    """

    feature: np.ndarray    # int32 (n_nodes,)
    threshold: np.ndarray  # float64 (n_nodes,)
    left: np.ndarray       # int32 (n_nodes,)
    right: np.ndarray      # int32 (n_nodes,)
    value: np.ndarray      # float64 (n_nodes, n_outputs)
    cover: np.ndarray      # int64 (n_nodes,)

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.value.shape[1]

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    def leaf_for(self, x: np.ndarray) -> int:
        node = 0
        while self.feature[node] >= 0:
            if x[self.feature[node]] <= self.threshold[node]:
                node = self.left[node]
            else:
                node = self.right[node]
        return int(node)

    def predict_row(self, x: np.ndarray) -> np.ndarray:
        return self.value[self.leaf_for(x)]

    def used_columns(self) -> set[int]:
        return {int(c) for c in self.feature if c >= 0}

    def expected_value(self) -> np.ndarray:
        """Cover-weighted leaf expectation (the empty-coalition value)."""
        total = np.zeros(self.n_outputs)
        stack = [(0, 1.0)]
        while stack:
            node, w = stack.pop()
            if self.is_leaf(node):
                total += w * self.value[node]
                continue
            cov = self.cover[node]
            stack.append((self.left[node], w * self.cover[self.left[node]] / cov))
            stack.append((self.right[node], w * self.cover[self.right[node]] / cov))
        return total

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "cover": self.cover.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DecisionTree":
        return cls(
            feature=np.asarray(doc["feature"], dtype=np.int32),
            threshold=np.asarray(doc["threshold"], dtype=np.float64),
            left=np.asarray(doc["left"], dtype=np.int32),
            right=np.asarray(doc["right"], dtype=np.int32),
            value=np.asarray(doc["value"], dtype=np.float64),
            cover=np.asarray(doc["cover"], dtype=np.int64),
        )


class PackedForest:
    """All trees concatenated into flat arrays for batched prediction."""

    def __init__(self, trees: Sequence[DecisionTree]):
        offsets = np.zeros(len(trees), dtype=np.int64)
        total = 0
        for i, t in enumerate(trees):
            offsets[i] = total
            total += t.n_nodes
        self.roots = offsets
        self.feature = np.concatenate([t.feature for t in trees])
        self.threshold = np.concatenate([t.threshold for t in trees])
        self.value = np.concatenate([t.value for t in trees], axis=0)
        # child pointers become absolute node indices
        self.left = np.concatenate(
            [np.where(t.left >= 0, t.left + off, -1) for t, off in zip(trees, offsets)]
        ).astype(np.int64)
        self.right = np.concatenate(
            [np.where(t.right >= 0, t.right + off, -1) for t, off in zip(trees, offsets)]
        ).astype(np.int64)
        self.n_trees = len(trees)
        self.n_outputs = trees[0].n_outputs

    def predict_matrix(self, X: np.ndarray, chunk: int = 2048) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        n = X.shape[0]
        out = np.empty((n, self.n_outputs), dtype=np.float64)
        for start in range(0, n, chunk):
            out[start : start + chunk] = self._predict_chunk(X[start : start + chunk])
        return out

    def _predict_chunk(self, X: np.ndarray) -> np.ndarray:
        n = X.shape[0]
        ptr = np.broadcast_to(self.roots, (n, self.n_trees)).copy()
        rows = np.arange(n)[:, None]
        while True:
            feat = self.feature[ptr]
            interior = feat >= 0
            if not interior.any():
                break
            xv = X[rows, np.where(interior, feat, 0)]
            go_left = xv <= self.threshold[ptr]
            nxt = np.where(go_left, self.left[ptr], self.right[ptr])
            ptr = np.where(interior, nxt, ptr)
        return self.value[ptr].mean(axis=1)


@dataclass(frozen=True)
class RiskPrediction:
    outcomes: tuple[str, ...]
    probabilities: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probabilities, dtype=np.float64)
        if probs.shape != (len(self.outcomes),):
            raise PredictionError("one probability per outcome required")
        object.__setattr__(self, "probabilities", probs)

    def __getitem__(self, outcome: str) -> float:
        return float(self.probabilities[self.outcomes.index(outcome)])

    def as_dict(self) -> dict[str, float]:
        return {o: float(p) for o, p in zip(self.outcomes, self.probabilities)}


class RandomForest:
    """Immutable trained ensemble plus its encoder and training metadata."""

    def __init__(
        self,
        schema: CohortSchema,
        encoder: FeatureEncoder,
        trees: Sequence[DecisionTree],
        config: ForestConfig,
        seed: int,
        dataset_fingerprint: str,
        base_rates: np.ndarray,
    ):
        self.schema = schema
        self.encoder = encoder
        self.trees = tuple(trees)
        self.config = config
        self.seed = seed
        self.dataset_fingerprint = dataset_fingerprint
        self.base_rates = np.asarray(base_rates, dtype=np.float64)
        self.packed = PackedForest(self.trees)
        self._fingerprint: str | None = None
        self._expected_value: np.ndarray | None = None

    @property
    def outcomes(self) -> tuple[str, ...]:
        return self.schema.outcomes

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        return self.packed.predict_matrix(X)

    def predict_records(self, records: Sequence[PatientRecord]) -> np.ndarray:
        return self.predict_matrix(self.encoder.encode_many(records))

    def used_columns(self) -> set[int]:
        used: set[int] = set()
        for t in self.trees:
            used |= t.used_columns()
        return used

    def expected_value(self) -> np.ndarray:
        """Mean over trees of the cover-weighted leaf expectation."""
        if self._expected_value is None:
            total = np.zeros(len(self.outcomes))
            for t in self.trees:
                total += t.expected_value()
            self._expected_value = total / len(self.trees)
        return self._expected_value.copy()

    def payload(self) -> dict:
        return {
            "schema": self.schema.to_dict(),
            "encoder": self.encoder.to_dict(),
            "config": self.config.to_dict(),
            "seed": self.seed,
            "dataset_fingerprint": self.dataset_fingerprint,
            "base_rates": self.base_rates.tolist(),
            "trees": [t.to_dict() for t in self.trees],
        }

    def fingerprint(self) -> str:
        if self._fingerprint is None:
            blob = json.dumps(self.payload(), sort_keys=True, separators=(",", ":"))
            self._fingerprint = hashlib.sha256(blob.encode()).hexdigest()
        return self._fingerprint


def _node_impurity(pos: np.ndarray, n: int) -> float:
    p = pos / n
    return float(2.0 * np.mean(p * (1.0 - p)))


def _grow_tree(
    X: np.ndarray,
    Y: np.ndarray,
    seed_seq: np.random.SeedSequence,
    config: ForestConfig,
    m_features: int,
    binary_cols: np.ndarray,
) -> DecisionTree:
    rng = np.random.default_rng(seed_seq)
    n_total, d = X.shape
    k_out = Y.shape[1]
    rows = rng.integers(0, n_total, size=n_total)
    Xb, Yb = X[rows], Y[rows]

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[np.ndarray] = []
    cover: list[int] = []

    def new_node(idx: np.ndarray) -> int:
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(Yb[idx].mean(axis=0))
        cover.append(len(idx))
        return node

    # Explicit preorder stack; candidate columns are drawn at pop time so
    # the rng consumption order is a pure function of the grown shape.
    root_idx = np.arange(n_total)
    root = new_node(root_idx)
    stack: list[tuple[int, np.ndarray, int]] = [(root, root_idx, 0)]
    while stack:
        node, idx, depth = stack.pop()
        n = len(idx)
        if depth >= config.max_depth or n < 2 * config.min_leaf:
            continue
        y_node = Yb[idx]
        pos = y_node.sum(axis=0)
        parent_imp = _node_impurity(pos, n)
        if parent_imp <= 0.0:
            continue
        cands = np.sort(rng.choice(d, size=m_features, replace=False))
        x_node = Xb[idx]

        best_w = parent_imp - _GAIN_EPS
        best_col = -1
        best_thr = 0.0

        bin_cands = cands[binary_cols[cands]]
        num_cands = cands[~binary_cols[cands]]

        if bin_cands.size:
            xs = x_node[:, bin_cands]
            n1 = xs.sum(axis=0)
            n0 = n - n1
            valid = (n1 >= config.min_leaf) & (n0 >= config.min_leaf)
            if valid.any():
                pos1 = xs.T @ y_node
                pos0 = pos - pos1
                with np.errstate(invalid="ignore", divide="ignore"):
                    p1 = pos1 / n1[:, None]
                    p0 = pos0 / n0[:, None]
                    g1 = 2.0 * (p1 * (1.0 - p1)).mean(axis=1)
                    g0 = 2.0 * (p0 * (1.0 - p0)).mean(axis=1)
                    weighted = (n0 * g0 + n1 * g1) / n
                weighted = np.where(valid, weighted, np.inf)
                # scan in ascending column order so ties keep the lowest index
                for j, col in enumerate(bin_cands):
                    if weighted[j] < best_w:
                        best_w = float(weighted[j])
                        best_col = int(col)
                        best_thr = 0.5

        for col in num_cands:
            v = x_node[:, col]
            order = np.argsort(v)
            sv = v[order]
            lo, hi = config.min_leaf, n - config.min_leaf
            if lo > hi:
                continue
            # split after sorted position i (left = 0..i); thresholds rise
            # with i, so the first argmin is also the lowest threshold
            n_left = np.arange(1, n)
            ok = (sv[:-1] < sv[1:]) & (n_left >= lo) & (n_left <= hi)
            if not ok.any():
                continue
            prefix = np.cumsum(y_node[order], axis=0)[:-1]
            n_right = n - n_left
            p_l = prefix / n_left[:, None]
            p_r = (pos - prefix) / n_right[:, None]
            g_l = 2.0 * (p_l * (1.0 - p_l)).mean(axis=1)
            g_r = 2.0 * (p_r * (1.0 - p_r)).mean(axis=1)
            weighted = np.where(ok, (n_left * g_l + n_right * g_r) / n, np.inf)
            j = int(np.argmin(weighted))
            if weighted[j] < best_w:
                mid = sv[j] + (sv[j + 1] - sv[j]) / 2.0
                if not (mid < sv[j + 1]):
                    mid = sv[j]
                best_w = float(weighted[j])
                best_col = int(col)
                best_thr = float(mid)

        if best_col < 0:
            continue
        mask = x_node[:, best_col] <= best_thr
        left_idx, right_idx = idx[mask], idx[~mask]
        feature[node] = best_col
        threshold[node] = best_thr
        ln = new_node(left_idx)
        rn = new_node(right_idx)
        left[node] = ln
        right[node] = rn
        # push right first so the left child is grown (and numbered) first
        stack.append((rn, right_idx, depth + 1))
        stack.append((ln, left_idx, depth + 1))

    return DecisionTree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        value=np.asarray(value, dtype=np.float64).reshape(len(feature), k_out),
        cover=np.asarray(cover, dtype=np.int64),
    )


def train_forest(
    dataset: Dataset,
    config: ForestConfig | None = None,
    seed: int = 0,
    n_jobs: int = 1,
) -> RandomForest:
    """Fit a forest on a labeled dataset; deterministic given seed.

    ``n_jobs`` only controls tree-level parallelism; the result is
    identical for any value because every tree consumes its own spawned
    stream.
    """
    config = config or ForestConfig()
    if len(dataset) == 0:
        raise TrainingError("dataset is empty")
    if not dataset.labeled:
        raise TrainingError("training requires a labeled dataset")
    Y = dataset.labels.astype(np.float64)
    for k, outcome in enumerate(dataset.schema.outcomes):
        total = int(Y[:, k].sum())
        if total == 0 or total == len(dataset):
            raise TrainingError(
                f"outcome {outcome!r} has a single class in the training data", field=outcome
            )

    encoder = FeatureEncoder(dataset.schema).fit(dataset)
    X = encoder.encode_dataset(dataset)
    d = X.shape[1]
    m = config.resolve_features_per_split(d)
    binary_cols = np.array(
        [dataset.schema.features[c.feature_index].kind != "numerical" for c in encoder.columns]
    )
    seeds = np.random.SeedSequence(seed).spawn(config.n_trees)

    def build(ss):
        return _grow_tree(X, Y, ss, config, m, binary_cols)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(build, seeds))
    else:
        trees = [build(ss) for ss in seeds]

    base_rates = PackedForest(trees).predict_matrix(X).mean(axis=0)
    return RandomForest(
        schema=dataset.schema,
        encoder=encoder,
        trees=trees,
        config=config,
        seed=seed,
        dataset_fingerprint=dataset.fingerprint(),
        base_rates=base_rates,
    )


def predict_proba(model: RandomForest, record: PatientRecord) -> RiskPrediction:
    """Mean of the trees' leaf vectors for one record."""
    if len(record.values) != len(model.schema.features):
        raise PredictionError(
            f"record has {len(record.values)} values, model schema declares "
            f"{len(model.schema.features)} features"
        )
    model.schema.validate_values(record.values)
    probs = model.predict_records([record])[0]
    return RiskPrediction(outcomes=model.outcomes, probabilities=probs)


def auroc_score(scores: np.ndarray, labels: np.ndarray) -> float | None:
    """Mann-Whitney AUROC with ties counted half; None when single-class."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(scores, method="average")
    pos_rank_sum = ranks[labels == 1].sum()
    u = pos_rank_sum - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_polyline(scores: np.ndarray, labels: np.ndarray) -> list[tuple[float, float]]:
    """(FPR, TPR) vertices from (0,0) to (1,1), one per distinct score."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        return []
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    tp = np.cumsum(labels[order] == 1)
    fp = np.cumsum(labels[order] == 0)
    # keep the last index of each tied block
    distinct = np.append(sorted_scores[1:] != sorted_scores[:-1], True)
    points = [(0.0, 0.0)]
    points += [
        (float(f) / n_neg, float(t) / n_pos) for f, t in zip(fp[distinct], tp[distinct])
    ]
    return points


@dataclass(frozen=True)
class AurocCurve:
    outcome: str
    auroc: float | None
    points: tuple[tuple[float, float], ...]

    def as_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "auroc": self.auroc,
            "points": [list(p) for p in self.points],
        }


def evaluate_auroc(model: RandomForest, dataset: Dataset) -> dict[str, AurocCurve]:
    """Per-outcome AUROC and ROC polyline; single-class outcomes report None."""
    if not dataset.labeled:
        raise PredictionError("evaluation requires a labeled dataset")
    scores = model.predict_records(dataset.records)
    out: dict[str, AurocCurve] = {}
    for k, outcome in enumerate(model.outcomes):
        labels = dataset.labels[:, k]
        auc = auroc_score(scores[:, k], labels)
        points = roc_polyline(scores[:, k], labels) if auc is not None else []
        out[outcome] = AurocCurve(outcome=outcome, auroc=auc, points=tuple(points))
    return out


def save_model(model: RandomForest, path: str | Path) -> str:
    """Write the versioned, checksummed artifact; returns the fingerprint."""
    payload = model.payload()
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    checksum = hashlib.sha256(blob.encode()).hexdigest()
    envelope = {
        "format": MODEL_FORMAT,
        "format_version": MODEL_FORMAT_VERSION,
        "checksum": checksum,
        "payload": payload,
    }
    Path(path).write_text(json.dumps(envelope, sort_keys=True, separators=(",", ":")))
    return checksum


def load_model(path: str | Path) -> RandomForest:
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"model file not found: {path}")
    try:
        envelope = json.loads(path.read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ArtifactError(f"model file is corrupted: {exc}")
    if not isinstance(envelope, dict) or envelope.get("format") != MODEL_FORMAT:
        raise ArtifactError("file is not a model artifact")
    version = envelope.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ArtifactError(
            f"unsupported model format version {version!r} (expected {MODEL_FORMAT_VERSION})"
        )
    payload = envelope.get("payload")
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    checksum = hashlib.sha256(blob.encode()).hexdigest()
    if checksum != envelope.get("checksum"):
        raise ArtifactError("model checksum mismatch; artifact is corrupted")

    schema = CohortSchema.from_dict(payload["schema"])
    encoder = FeatureEncoder.from_dict(schema, payload["encoder"])
    trees = [DecisionTree.from_dict(t) for t in payload["trees"]]
    model = RandomForest(
        schema=schema,
        encoder=encoder,
        trees=trees,
        config=ForestConfig.from_dict(payload["config"]),
        seed=payload["seed"],
        dataset_fingerprint=payload["dataset_fingerprint"],
        base_rates=np.asarray(payload["base_rates"], dtype=np.float64),
    )
    return model
