from .features import (
    CohortSkip,
    Feature,
    FeatureSchema,
    build_schema,
    cohort_encounters,
    encode_assertions,
    prepare_cohort_data,
)
from .kernels import BACKEND
from .model import CohortForest, DecisionTree, TreeParams, train_forest

__all__ = [
    "BACKEND",
    "CohortForest",
    "CohortSkip",
    "DecisionTree",
    "Feature",
    "FeatureSchema",
    "TreeParams",
    "build_schema",
    "cohort_encounters",
    "encode_assertions",
    "prepare_cohort_data",
    "train_forest",
]
