"""Explanation stability for tabular classifiers on longitudinal cohorts.

Trains per-scenario tree models, attributes their predictions with exact or
sampled interventional Shapley values and measures how consistently features
are ranked within a model, across label scenarios and across tasks.
"""
from .data import (ClassLabel, Dataset, DomainTag, LoadError, Schema, ScenarioError, ScenarioSpec, Task,
                   load_dataset, select_scenario, write_dataset)
from .kernels import BACKEND
from .models import (EvalMetrics, ForestModel, FunctionPredictor, TreeModel, evaluate, permutation_importance,
                     select_best_model, train_forest, train_tree)
from .preprocess import (FeatureMatrix, PreprocessConfig, apply_preprocessor, fit_preprocessor, kfold_subjects,
                         smote_oversample, subject_split)
from .shapley import (AttributionMatrix, BackgroundSet, Exact, ImportanceVector, Sampled, background_sample,
                      exact_shapley, explain_dataset, sampled_shapley, summarize)
from .stability import (ContributionVector, RankedList, StabilityRecord, UndefinedMetricError,
                        cross_scenario_analysis, cross_task_analysis, domain_contributions, jaccard_topk,
                        kendall_tau, mean_delta_abs_shap, precision_recall_top10, robust_spearman_top10,
                        sign_consistency, spearman, within_model_analysis)
from .synth import SynthConfig, generate_synthetic

__version__ = "0.1.0"
