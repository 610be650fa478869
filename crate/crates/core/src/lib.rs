//! Fairness/utility trade-off analysis for threshold decision rules.
//!
//! A decision maker accepts individuals whose score reaches a (possibly group-specific)
//! threshold. Each rule is scored twice: by the decision maker's expected utility and by
//! a fairness score derived from decision-subject utilities of relevant positions under a
//! pattern of justice. Sweeping all threshold combinations and extracting the Pareto front
//! lays out the trade-off a stakeholder has to settle.

pub mod config;
pub mod digest;
pub mod error;
pub mod export;
pub mod ingest;
pub mod justice;
pub mod model;
pub mod sweep;
pub mod synth;
pub mod utility;

pub use config::{parse_config, parse_config_str, ColumnSpec, GridSpec, ValueConfig};
pub use error::{Error, ErrorClass, Result};
pub use export::{format_number, round_number, RuleRecord, SweepDocument};
pub use ingest::{parse_dataset, parse_dataset_str, DatasetSchema};
pub use justice::{
    claims_mask, fairness_score, position_utilities, ClaimsDifferentiator, CompareOp,
    PatternOfJustice, PositionUtilities,
};
pub use model::{
    apply_rule, groups, AttributeValue, Dataset, DecisionRule, DecisionVector, Individual,
    REJECT_ALL,
};
pub use sweep::{
    evaluate_rule, extreme_indices, extreme_points, filter_viable, front_path, pareto_flags,
    pareto_front, sweep, threshold_grid, AnalysisSpec, EvaluatedRule, RuleDetail, SweepOptions,
    SweepResult, ThresholdGrid, DEFAULT_GRID_SIZE, DEFAULT_SWEEP_CAP,
};
pub use utility::{
    dm_utility_individual, dm_utility_total, ds_utility_individual, optimal_uniform_threshold,
    Degeneracy, DmUtilitySpec, DsUtilitySpec, EvaluationMode, UtilityTable,
};
