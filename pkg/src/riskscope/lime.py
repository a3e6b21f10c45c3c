"""Local surrogate explanations over an interpretable binary space.

Numerical features are discretized into training quartile bins, so each
feature contributes one binary unit: "is the perturbed value in the same
bin (same level, same flag) as the record's value". Perturbations are
resampled from training marginals, weighted by an exponential kernel on
normalized Hamming distance, and a ridge regression on the model's
probabilities yields signed per-feature contributions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .attribution import Attribution, Contribution, describe_value, format_number, rank_contributions
from .errors import ExplainError
from .forest import RandomForest
from .schema import CohortSchema, Dataset, PatientRecord


@dataclass(frozen=True)
class LimeConfig:
    n_samples: int = 5000
    kernel_width: float | None = None  # None resolves to 0.75 * sqrt(n_features)
    top_k: int = 10
    ridge_lambda: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 100:
            raise ExplainError("n_samples must be >= 100")
        if self.kernel_width is not None and not self.kernel_width > 0:
            raise ExplainError("kernel_width must be positive")
        if self.top_k < 1:
            raise ExplainError("top_k must be >= 1")
        if self.ridge_lambda < 0:
            raise ExplainError("ridge_lambda must be >= 0")

    def resolve_kernel_width(self, n_features: int) -> float:
        if self.kernel_width is not None:
            return self.kernel_width
        return 0.75 * math.sqrt(n_features)


@dataclass(frozen=True)
class _NumericalStats:
    cuts: tuple[float, float, float]
    pools: tuple[np.ndarray, ...]  # training values per quartile bin
    probs: np.ndarray              # bin frequencies
    median: float

    def bin_of(self, value: float) -> int:
        c0, c1, c2 = self.cuts
        if value <= c0:
            return 0
        if value <= c1:
            return 1
        if value <= c2:
            return 2
        return 3


@dataclass(frozen=True)
class _CategoricalStats:
    probs: np.ndarray  # level frequencies in schema level order


@dataclass(frozen=True)
class _BinaryStats:
    p_one: float


class LimeBackground:
    """Quartile cut points and marginal frequencies fit on training data."""

    def __init__(self, schema: CohortSchema, stats: tuple):
        self.schema = schema
        self.stats = stats

    @classmethod
    def fit(cls, dataset: Dataset) -> "LimeBackground":
        schema = dataset.schema
        stats = []
        for fi, spec in enumerate(schema.features):
            values = [r.values[fi] for r in dataset.records]
            if spec.kind == "numerical":
                observed = np.array([v for v in values if v is not None], dtype=np.float64)
                if observed.size == 0:
                    raise ExplainError(
                        f"feature {spec.name!r} has no observed values", field=spec.name
                    )
                cuts = tuple(np.quantile(observed, [0.25, 0.5, 0.75], method="linear"))
                bins = np.array([_bin_of(cuts, v) for v in observed])
                pools = tuple(observed[bins == b] for b in range(4))
                probs = np.array([p.size for p in pools], dtype=np.float64)
                stats.append(
                    _NumericalStats(
                        cuts=cuts,
                        pools=pools,
                        probs=probs / probs.sum(),
                        median=float(np.median(observed)),
                    )
                )
            elif spec.kind == "categorical":
                counts = np.array([values.count(level) for level in spec.levels], dtype=np.float64)
                if counts.sum() == 0:
                    raise ExplainError(f"feature {spec.name!r} has no values", field=spec.name)
                stats.append(_CategoricalStats(probs=counts / counts.sum()))
            else:
                arr = np.array(values, dtype=np.float64)
                stats.append(_BinaryStats(p_one=float(arr.mean())))
        return cls(schema, tuple(stats))


def _bin_of(cuts, value: float) -> int:
    if value <= cuts[0]:
        return 0
    if value <= cuts[1]:
        return 1
    if value <= cuts[2]:
        return 2
    return 3


def _bin_condition(spec, cuts, b: int) -> str:
    c = [format_number(spec, float(v)) for v in cuts]
    name = spec.display_name
    if b == 0:
        return f"{name} <= {c[0]}"
    if b == 1:
        return f"{c[0]} < {name} <= {c[1]}"
    if b == 2:
        return f"{c[1]} < {name} <= {c[2]}"
    return f"{name} > {c[2]}"


def explain_lime(
    model: RandomForest,
    record: PatientRecord,
    outcome: str,
    config: LimeConfig | None = None,
    background: LimeBackground | None = None,
    dataset: Dataset | None = None,
) -> Attribution:
    """Weighted ridge surrogate over marginal perturbations; seeded.

    ``background`` carries the fitted discretization; pass ``dataset``
    instead to fit one on the fly.

    Contribution values are surrogate coefficients — how much each
    condition raises or lowers the locally-fitted risk — not exact
    probability deltas of the underlying model.
    """
    config = config or LimeConfig()
    if background is None:
        if dataset is None:
            raise ExplainError("explain_lime needs a fitted background or a dataset")
        background = LimeBackground.fit(dataset)
    schema = model.schema
    if background.schema != schema:
        raise ExplainError("background schema does not match the model schema")
    k_out = schema.outcome_index(outcome)

    n = config.n_samples
    n_features = len(schema.features)
    rng = np.random.default_rng(config.seed)

    Z = np.empty((n, n_features))
    z_record = np.empty(n_features)
    X_enc = np.zeros((n, model.encoder.n_encoded))
    conditions: list[str] = []

    for fi, spec in enumerate(schema.features):
        stats = background.stats[fi]
        group = model.encoder.groups[fi]
        raw = record.values[fi]
        if spec.kind == "numerical":
            missing = raw is None
            value = stats.median if missing else float(raw)
            rec_bin = stats.bin_of(value)
            bins = rng.choice(4, size=n, p=stats.probs)
            vals = np.empty(n)
            for b in range(4):
                mask = bins == b
                count = int(mask.sum())
                if count:
                    pool = stats.pools[b]
                    vals[mask] = pool[rng.integers(0, pool.size, size=count)]
            Z[:, fi] = bins == rec_bin
            z_record[fi] = 1.0
            X_enc[:, group[0]] = vals
            text = _bin_condition(spec, stats.cuts, rec_bin)
            conditions.append(f"{spec.display_name} missing" if missing else text)
        elif spec.kind == "categorical":
            rec_code = spec.levels.index(raw)
            codes = rng.choice(len(spec.levels), size=n, p=stats.probs)
            Z[:, fi] = codes == rec_code
            z_record[fi] = 1.0
            X_enc[np.arange(n), group[0] + codes] = 1.0
            conditions.append(describe_value(spec, raw))
        else:
            draws = (rng.random(n) < stats.p_one).astype(np.float64)
            Z[:, fi] = draws == float(raw)
            z_record[fi] = 1.0
            X_enc[:, group[0]] = draws
            conditions.append(describe_value(spec, raw))

    if not (Z != Z[0]).any():
        raise ExplainError("perturbations collapsed to a single sample; cannot fit surrogate")

    y = model.predict_matrix(X_enc)[:, k_out]
    distance = (Z != z_record).mean(axis=1)
    kw = config.resolve_kernel_width(n_features)
    weights = np.exp(-(distance**2) / (kw**2))

    # weighted ridge with an unpenalized intercept, closed form
    A = np.hstack([np.ones((n, 1)), Z])
    wa = weights[:, None] * A
    M = A.T @ wa
    M[1:, 1:] += config.ridge_lambda * np.eye(n_features)
    beta = np.linalg.solve(M, wa.T @ y)

    y_hat = A @ beta
    w_sum = weights.sum()
    y_bar = float((weights * y).sum() / w_sum)
    ss_res = float((weights * (y - y_hat) ** 2).sum())
    ss_tot = float((weights * (y - y_bar) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot

    items = [
        Contribution(feature=spec.name, condition=conditions[fi], value=float(beta[1 + fi]))
        for fi, spec in enumerate(schema.features)
    ]
    ranked = rank_contributions(items)[: config.top_k]
    prediction = float(model.predict_records([record])[0][k_out])
    return Attribution(
        method="LIME",
        outcome=outcome,
        base_value=float(beta[0]),
        contributions=ranked,
        prediction=prediction,
        details={
            "r2": r2,
            "kernel_width": kw,
            "n_samples": n,
            "ridge_lambda": config.ridge_lambda,
            "seed": config.seed,
        },
    )
