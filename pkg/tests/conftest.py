import pytest

from riskscope.forest import ForestConfig, train_forest
from riskscope.schema import default_schema
from riskscope.synth import default_generator_config, generate_synthetic_cohort


@pytest.fixture(scope="session")
def schema():
    return default_schema()


@pytest.fixture(scope="session")
def gen_config(schema):
    return default_generator_config(schema)


@pytest.fixture(scope="session")
def cohort(schema, gen_config):
    return generate_synthetic_cohort(schema, gen_config, 400, seed=101)


@pytest.fixture(scope="session")
def desk_model(cohort):
    return train_forest(cohort, ForestConfig(n_trees=12, max_depth=6, min_leaf=8), seed=7)
