"""riskscope: explainable risk prediction for tabular clinical cohorts.

Train a random forest over a declarative feature schema, then answer
the five questions a reviewer asks of a risk score: why (LIME, SHAP),
why not (counterfactuals), how (model cards), what if (perturbed
re-scoring), and what else (similar-patient cohorts).
"""

from .attribution import Attribution, Contribution
from .counterfactual import (
    CfConstraints,
    CfSearchConfig,
    CounterfactualResult,
    apply_counterfactual,
    find_counterfactuals,
)
from .errors import (
    ArtifactError,
    CounterfactualError,
    DataError,
    ExplainError,
    PredictionError,
    RiskscopeError,
    SchemaError,
    TrainingError,
)
from .forest import (
    AurocCurve,
    ForestConfig,
    RandomForest,
    RiskPrediction,
    auroc_score,
    evaluate_auroc,
    load_model,
    predict_proba,
    roc_polyline,
    save_model,
    train_forest,
)
from .importance import Grouping, ImportanceConfig, default_groupings, global_importance
from .lime import LimeBackground, LimeConfig, explain_lime
from .modelcard import (
    CardConfig,
    CardText,
    CohortTable,
    ModelCard,
    build_model_card,
    render_html,
    render_markdown,
)
from .schema import (
    CohortSchema,
    Dataset,
    FeatureSpec,
    PatientRecord,
    default_schema,
    load_csv,
    load_schema,
    percentile_bounds,
    save_csv,
    save_schema,
)
from .shap import ShapConfig, explain_shap_exact, explain_shap_tree
from .similarity import CohortSummary, SimilarityCriteria, cohort_summary, find_similar
from .synth import (
    BinaryMarginal,
    CategoricalMarginal,
    GeneratorConfig,
    NumericalMarginal,
    OutcomeModel,
    RiskTerm,
    default_generator_config,
    generate_synthetic_cohort,
    true_risk,
)
from .whatif import WhatIfRequest, WhatIfResponse, whatif_predict

__version__ = "1.0.0"

__all__ = [
    "ArtifactError",
    "Attribution",
    "AurocCurve",
    "BinaryMarginal",
    "CardConfig",
    "CardText",
    "CategoricalMarginal",
    "CfConstraints",
    "CfSearchConfig",
    "CohortSchema",
    "CohortSummary",
    "CohortTable",
    "Contribution",
    "CounterfactualError",
    "CounterfactualResult",
    "DataError",
    "Dataset",
    "ExplainError",
    "FeatureSpec",
    "ForestConfig",
    "GeneratorConfig",
    "Grouping",
    "ImportanceConfig",
    "LimeBackground",
    "LimeConfig",
    "ModelCard",
    "NumericalMarginal",
    "OutcomeModel",
    "PatientRecord",
    "PredictionError",
    "RandomForest",
    "RiskPrediction",
    "RiskTerm",
    "RiskscopeError",
    "SchemaError",
    "SimilarityCriteria",
    "TrainingError",
    "WhatIfRequest",
    "WhatIfResponse",
    "apply_counterfactual",
    "auroc_score",
    "build_model_card",
    "cohort_summary",
    "default_generator_config",
    "default_groupings",
    "default_schema",
    "evaluate_auroc",
    "explain_lime",
    "explain_shap_exact",
    "explain_shap_tree",
    "find_counterfactuals",
    "find_similar",
    "generate_synthetic_cohort",
    "global_importance",
    "load_csv",
    "load_model",
    "load_schema",
    "percentile_bounds",
    "predict_proba",
    "render_html",
    "render_markdown",
    "roc_polyline",
    "save_csv",
    "save_model",
    "save_schema",
    "train_forest",
    "true_risk",
    "whatif_predict",
]
