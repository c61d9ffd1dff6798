//! Procedural cuboid scenes, cloud synthesis, idealized execution, training
//! data and the evaluation harness.

mod evaluation;
mod metrics;
mod objects;
mod synthesis;
mod training;

pub use evaluation::{
    comparison_table, derive_seed, evaluate_multistep, recheck_plan, summarize, EvaluationConfig,
    EvaluationReport, FailureCategory, GoalMode, RecheckFailure, Summary, TrialReport, DEFAULT_NOISE,
    SINGLE_STEP_SAMPLES,
};
pub use metrics::{orientation_error, PoseError};
pub use objects::{
    execute_plan, execute_subgoals, random_half_extents, sample_stable_pose, sample_stable_pose_in,
    sample_stable_pose_on_face, settle, stable_pose, ExecuteOptions, HALF_EXTENT_RANGE, SETTLE_ANGLE,
};
pub use synthesis::{
    add_depth_noise, add_depth_noise_from, synthesize_cloud, visible_faces, SyntheticCloud,
    DOWNSAMPLED_POINTS,
};
pub use training::{
    generate_training_data, generate_training_data_with, TrainingData, TrainingOptions, TrainingSample,
    TrainingYield, MASK_DISTANCE,
};
