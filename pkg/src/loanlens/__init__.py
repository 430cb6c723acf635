"""loanlens: a human-in-the-loop fairness debugging workbench for loan
decisions — train an interpretable scoring model, explain every decision,
collect fairness judgments and weight suggestions, and quantify the
fairness change they produce."""

from .dataset import (
    ACCEPTED,
    REJECTED,
    Application,
    AttributeSpec,
    Dataset,
    load_csv,
    load_schema,
    prune_attributes,
    save_csv,
    save_schema,
    split,
)
from .synthetic import DEFAULT_BIAS_STRENGTH, generate_synthetic, synthetic_schema
from .model import (
    CriticalityVector,
    Prediction,
    ScoringModel,
    ValueDistribution,
    criticality,
    load_model,
    predict,
    predict_all,
    save_model,
    similar_applications,
    similarity,
    train,
    value_distributions,
)
from .fairness import (
    FairnessReport,
    GroupSpec,
    OverviewCounts,
    audit_model,
    balanced_accuracy,
    disparate_impact,
    fairness_delta,
    group_spec_for,
    mean_unfairness_ratio,
    overview_counts,
    per_participant_models,
    unfairness_ratio,
)
from .feedback import (
    AdjustedDecisionSet,
    EventLog,
    FairnessJudgment,
    WeightSuggestion,
    aggregate,
    effective_judgments,
    effective_suggestions,
    slider_bounds,
    validate_suggestion,
)
from .culture import (
    CultureMatrix,
    CultureScores,
    DimensionGrouping,
    assign_groups,
    dimension_means,
    group_fairness_delta,
    load_scores,
    resolve_country,
)
from .analysis import (
    StudyReport,
    TestResult,
    kruskal_wallis,
    mann_whitney_u,
    pearson_r,
    steel_dwass,
    study_report,
)
from .service import create_app

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
