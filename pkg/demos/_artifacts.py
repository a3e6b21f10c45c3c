"""Shared loader: reuse the artifacts demo 01 wrote, or build them quietly."""

from pathlib import Path

from riskscope import (
    Dataset,
    ForestConfig,
    RandomForest,
    default_generator_config,
    default_schema,
    generate_synthetic_cohort,
    load_csv,
    load_model,
    save_csv,
    save_model,
    train_forest,
)

OUT = Path(__file__).parent / "output"


def load_or_build() -> tuple[RandomForest, Dataset]:
    OUT.mkdir(exist_ok=True)
    model_path = OUT / "model.rsf"
    data_path = OUT / "cohort.csv"
    if not (model_path.exists() and data_path.exists()):
        schema = default_schema()
        cohort = generate_synthetic_cohort(
            schema, default_generator_config(schema), 3_000, seed=7
        )
        dev = cohort.subset(range(int(len(cohort) * 0.7)))
        model = train_forest(dev, ForestConfig(n_trees=80, max_depth=10, min_leaf=15), seed=0)
        save_model(model, model_path)
        save_csv(cohort, data_path)
    model = load_model(model_path)
    cohort = load_csv(data_path, model.schema, has_labels=True)
    return model, cohort


def riskiest_record(model: RandomForest, cohort: Dataset, outcome: str):
    """The encounter with the highest predicted risk for one outcome."""
    k = model.schema.outcome_index(outcome)
    risks = model.predict_matrix(model.encoder.encode_dataset(cohort))[:, k]
    row = int(risks.argmax())
    return cohort.records[row], float(risks[row])
