"""Constrained counterfactual search over mutable lab features.

A genetic search proposes lab-vector candidates inside per-feature box
bounds (training 1st to 99th percentile), scoring validity (crossing the
risk threshold), proximity (MAD-normalized L1), sparsity, and diversity
against already-found candidates. Survivors are post-processed by greedy
single-change reversion so every returned change set is locally minimal,
then rounded to display precision and re-validated. The search is honest
about failure: it may return fewer than k results, or none.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .attribution import format_number
from .errors import CounterfactualError
from .forest import RandomForest
from .schema import CohortSchema, Dataset, PatientRecord, percentile_bounds

DIRECTIONS = ("decrease", "increase")
_CHANGE_EPS = 1e-6


@dataclass(frozen=True)
class CfConstraints:
    """Mutable feature set with box bounds and normalization scales."""

    features: tuple[str, ...]
    bounds: tuple[tuple[float, float], ...]
    scales: tuple[float, ...]  # MAD per feature, for L1 normalization
    threshold: float = 0.5
    direction: str = "decrease"

    def __post_init__(self):
        if not self.features:
            raise CounterfactualError("mutable feature set is empty")
        if len(self.bounds) != len(self.features) or len(self.scales) != len(self.features):
            raise CounterfactualError("bounds and scales must align with features")
        if not (0.0 < self.threshold < 1.0):
            raise CounterfactualError("threshold must be in (0, 1)")
        if self.direction not in DIRECTIONS:
            raise CounterfactualError(f"direction must be one of {DIRECTIONS}")
        for (lo, hi), scale in zip(self.bounds, self.scales):
            if not lo <= hi:
                raise CounterfactualError("box bound low must be <= high")
            if scale <= 0:
                raise CounterfactualError("normalization scale must be positive")

    @classmethod
    def from_training(
        cls,
        dataset: Dataset,
        threshold: float = 0.5,
        direction: str = "decrease",
        low_q: float = 0.01,
        high_q: float = 0.99,
    ) -> "CfConstraints":
        schema = dataset.schema
        mutable = schema.mutable_features
        if not mutable:
            raise CounterfactualError("schema declares no mutable features")
        for spec in mutable:
            if "lab" not in spec.tags:
                raise CounterfactualError(
                    f"mutable feature {spec.name!r} is not lab-tagged", field=spec.name
                )
        names, bounds, scales = [], [], []
        for spec in mutable:
            lo, hi = percentile_bounds(dataset, spec.name, low_q, high_q)
            col = dataset.numeric_column(spec.name)
            col = col[~np.isnan(col)]
            mad = float(np.median(np.abs(col - np.median(col))))
            if mad <= 0:
                mad = max((hi - lo) / 4.0, 1e-6)
            names.append(spec.name)
            bounds.append((lo, hi))
            scales.append(mad)
        return cls(
            features=tuple(names),
            bounds=tuple(bounds),
            scales=tuple(scales),
            threshold=threshold,
            direction=direction,
        )

    def bound_of(self, feature: str) -> tuple[float, float]:
        return self.bounds[self.features.index(feature)]


@dataclass(frozen=True)
class CfSearchConfig:
    population: int = 64
    lambda_proximity: float = 0.5
    lambda_sparsity: float = 0.1
    lambda_diversity: float = 0.2
    mutation_sigma_frac: float = 0.1  # fraction of box width
    mutate_gene_prob: float = 0.4
    init_resample_prob: float = 0.3
    patience: int = 15  # generations without archive growth once k found

    def __post_init__(self):
        if self.population < 4:
            raise CounterfactualError("population must be >= 4")


@dataclass(frozen=True)
class CfChange:
    feature: str
    raw_value: float | None
    new_value: float
    unit: str
    raw_display: str
    new_display: str

    def as_dict(self) -> dict:
        return {
            "feature": self.feature,
            "raw_value": self.raw_value,
            "new_value": self.new_value,
            "unit": self.unit,
            "raw_display": self.raw_display,
            "new_display": self.new_display,
        }


@dataclass(frozen=True)
class CounterfactualResult:
    changes: tuple[CfChange, ...]
    original_risk: float
    new_risk: float
    valid: bool
    evaluations: int
    elapsed_seconds: float

    def as_dict(self) -> dict:
        return {
            "changes": [c.as_dict() for c in self.changes],
            "original_risk": self.original_risk,
            "new_risk": self.new_risk,
            "valid": self.valid,
            "evaluations": self.evaluations,
            "elapsed_seconds": self.elapsed_seconds,
        }


def _crosses(risk: np.ndarray | float, constraints: CfConstraints):
    if constraints.direction == "decrease":
        return risk < constraints.threshold
    return risk > constraints.threshold


def _hinge(risk: np.ndarray, constraints: CfConstraints) -> np.ndarray:
    if constraints.direction == "decrease":
        return np.maximum(0.0, risk - constraints.threshold)
    return np.maximum(0.0, constraints.threshold - risk)


class _Scorer:
    """Batched risk evaluation of mutable-gene vectors with an eval counter."""

    def __init__(self, model: RandomForest, record: PatientRecord, outcome: str, columns):
        self.model = model
        self.k_out = model.schema.outcome_index(outcome)
        self.base_row = model.encoder.encode_record(record)
        self.columns = columns
        self.evaluations = 0

    def risks(self, genes: np.ndarray) -> np.ndarray:
        X = np.tile(self.base_row, (genes.shape[0], 1))
        X[:, self.columns] = genes
        self.evaluations += genes.shape[0]
        return self.model.predict_matrix(X)[:, self.k_out]


def _quantize(value: float, precision: int, lo: float, hi: float) -> float:
    r = round(value, precision)
    step = 10.0**-precision
    if r > hi:
        r = np.floor(hi / step) * step
    if r < lo:
        r = np.ceil(lo / step) * step
    return float(np.clip(r, lo, hi))


def find_counterfactuals(
    model: RandomForest,
    record: PatientRecord,
    outcome: str,
    constraints: CfConstraints,
    k: int = 3,
    budget: int = 20000,
    seed: int = 0,
    config: CfSearchConfig | None = None,
) -> list[CounterfactualResult]:
    """Genetic search for up to k locally-minimal threshold-crossing changes."""
    config = config or CfSearchConfig()
    if k < 1:
        raise CounterfactualError("k must be >= 1")
    if budget < config.population:
        raise CounterfactualError("budget must cover at least one generation")
    schema = model.schema
    for name in constraints.features:
        spec = schema.feature(name)
        if not spec.mutable:
            raise CounterfactualError(f"feature {name!r} is not mutable", field=name)

    started = time.perf_counter()
    specs = [schema.feature(name) for name in constraints.features]
    columns = [model.encoder.groups[schema.feature_index(name)][0] for name in constraints.features]
    scorer = _Scorer(model, record, outcome, columns)

    # baseline gene vector: the record's labs, imputed where missing
    baseline = scorer.base_row[columns].copy()
    raw_values = [record.values[schema.feature_index(name)] for name in constraints.features]

    original_risk = float(scorer.risks(baseline[None, :])[0])
    if _crosses(original_risk, constraints):
        side = "below" if constraints.direction == "decrease" else "above"
        raise CounterfactualError(
            f"record is already {side} the {constraints.threshold:.2f} threshold "
            f"for {outcome!r} (risk {original_risk:.3f})"
        )

    rng = np.random.default_rng(seed)
    m = len(constraints.features)
    lows = np.array([b[0] for b in constraints.bounds])
    highs = np.array([b[1] for b in constraints.bounds])
    widths = np.maximum(highs - lows, 1e-12)
    scales = np.array(constraints.scales)

    def normalized_l1(genes: np.ndarray) -> np.ndarray:
        return (np.abs(genes - baseline) / scales).sum(axis=1)

    def n_changed(genes: np.ndarray) -> np.ndarray:
        return ((np.abs(genes - baseline) / scales) > _CHANGE_EPS).sum(axis=1)

    # population seeded around the record
    pop = np.tile(baseline, (config.population, 1))
    resample = rng.random(pop.shape) < config.init_resample_prob
    uniform = lows + rng.random(pop.shape) * widths
    pop = np.where(resample, uniform, pop)
    pop[0] = baseline
    pop = np.clip(pop, lows, highs)

    archive: dict[tuple, np.ndarray] = {}

    def archive_elites() -> np.ndarray:
        genes = np.array(list(archive.values()))
        rank = np.lexsort((normalized_l1(genes), n_changed(genes)))
        return genes[rank[:k]]

    stale = 0
    while scorer.evaluations + config.population <= budget:
        risks = scorer.risks(pop)
        valid = _crosses(risks, constraints)
        grew = False
        for i in np.nonzero(valid)[0]:
            key = tuple(pop[i])
            if key not in archive:
                archive[key] = pop[i].copy()
                grew = True

        l1 = normalized_l1(pop)
        sparsity = n_changed(pop).astype(np.float64)
        fitness = (
            _hinge(risks, constraints)
            + config.lambda_proximity * l1
            + config.lambda_sparsity * sparsity
        )
        if archive:
            elite = archive_elites()
            div = np.abs(pop[:, None, :] - elite[None, :, :]) / scales
            fitness -= config.lambda_diversity * div.sum(axis=2).mean(axis=1) / m

        if archive and not grew:
            stale += 1
            if len(archive) >= k and stale >= config.patience:
                break
        else:
            stale = 0

        # truncation selection, uniform crossover, gaussian mutation
        order = np.argsort(fitness, kind="stable")
        parents = pop[order[: max(2, config.population // 2)]]
        pa = parents[rng.integers(0, len(parents), size=config.population)]
        pb = parents[rng.integers(0, len(parents), size=config.population)]
        cross = rng.random((config.population, m)) < 0.5
        children = np.where(cross, pa, pb)
        mutate = rng.random(children.shape) < config.mutate_gene_prob
        noise = rng.normal(0.0, config.mutation_sigma_frac, size=children.shape) * widths
        children = np.clip(np.where(mutate, children + noise, children), lows, highs)
        children[0] = parents[0]  # elitism
        pop = children

    # Post-process the most promising candidates: round to display
    # precision, re-validate, then greedily revert single changes to a
    # fixpoint so every survivor is locally minimal.
    def revert_to_fixpoint(genes: np.ndarray) -> np.ndarray | None:
        while True:
            changed_idx = [
                j for j in range(m) if abs(genes[j] - baseline[j]) / scales[j] > _CHANGE_EPS
            ]
            if not changed_idx:
                return None
            reverted = False
            for j in changed_idx:
                trial = genes.copy()
                trial[j] = baseline[j]
                if bool(_crosses(float(scorer.risks(trial[None, :])[0]), constraints)):
                    genes = trial
                    reverted = True
                    break
            if not reverted:
                return genes

    candidates: list[tuple[int, float, np.ndarray]] = []
    if archive:
        genes_all = np.array(list(archive.values()))
        rank = np.lexsort((normalized_l1(genes_all), n_changed(genes_all)))
        cap = max(32, 8 * k)
        candidates_raw = genes_all[rank[:cap]]
    else:
        candidates_raw = np.empty((0, m))

    seen: set[tuple] = set()
    for genes in candidates_raw:
        rounded = genes.copy()
        for j, spec in enumerate(specs):
            if abs(genes[j] - baseline[j]) / scales[j] > _CHANGE_EPS:
                rounded[j] = _quantize(genes[j], spec.precision, lows[j], highs[j])
        if not bool(_crosses(float(scorer.risks(rounded[None, :])[0]), constraints)):
            continue
        minimal = revert_to_fixpoint(rounded)
        if minimal is None:
            continue
        changed_idx = [
            j for j in range(m) if abs(minimal[j] - baseline[j]) / scales[j] > _CHANGE_EPS
        ]
        key = tuple((j, minimal[j]) for j in changed_idx)
        if key in seen:
            continue
        seen.add(key)
        l1 = float((np.abs(minimal - baseline) / scales).sum())
        candidates.append((len(changed_idx), l1, minimal))

    candidates.sort(key=lambda t: (t[0], t[1]))
    results: list[CounterfactualResult] = []
    final_genes = [genes for _, _, genes in candidates[:k]]
    if final_genes:
        final_risks = scorer.risks(np.array(final_genes))
    elapsed = time.perf_counter() - started
    for i, genes in enumerate(final_genes):
        changes = []
        for j in range(m):
            if abs(genes[j] - baseline[j]) / scales[j] <= _CHANGE_EPS:
                continue
            spec = specs[j]
            raw = raw_values[j]
            changes.append(
                CfChange(
                    feature=spec.name,
                    raw_value=None if raw is None else float(raw),
                    new_value=float(genes[j]),
                    unit=spec.unit,
                    raw_display="missing" if raw is None else format_number(spec, float(raw)),
                    new_display=format_number(spec, float(genes[j])),
                )
            )
        results.append(
            CounterfactualResult(
                changes=tuple(changes),
                original_risk=original_risk,
                new_risk=float(final_risks[i]),
                valid=True,
                evaluations=scorer.evaluations,
                elapsed_seconds=elapsed,
            )
        )
    return results


def apply_counterfactual(
    schema: CohortSchema, record: PatientRecord, result: CounterfactualResult
) -> PatientRecord:
    """Record with the result's changes applied (for independent re-scoring)."""
    return record.replace(schema, {c.feature: c.new_value for c in result.changes})
