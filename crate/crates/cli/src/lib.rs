//! Scenario-driven entry points: `plan`, `evaluate`, `gen-data`, `export`.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use commands::{run, Outcome};
pub use config::{parse_noise, parse_transform, relative_goal, SamplerConfig, ScenarioConfig, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "skillplan", version, about = "Multi-step manipulation planning on point clouds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario TOML file.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Depth noise `a,b` (sigma = a + b d^2).
    #[arg(long, allow_hyphen_values = true)]
    pub noise: Option<String>,
    /// Planner time budget, seconds.
    #[arg(long)]
    pub budget: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan once for a synthesized observation of the configured object.
    Plan {
        #[command(flatten)]
        common: Common,
        /// Goal transform `tx,ty,tz,qw,qx,qy,qz`.
        #[arg(long, allow_hyphen_values = true, conflicts_with = "goal_pair")]
        goal: Option<String>,
        /// Start and goal object poses; the goal transform is `B ∘ A⁻¹`.
        #[arg(long, num_args = 2, value_names = ["A", "B"], allow_hyphen_values = true)]
        goal_pair: Option<Vec<String>>,
        /// Overrides the config skeleton.
        #[arg(long)]
        skeleton: Option<String>,
    },
    /// Batch evaluation over procedurally generated tasks.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Trials per skeleton.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Generate replayable training samples for one skill.
    GenData {
        #[command(flatten)]
        common: Common,
        /// Skill letter: p, s, g or k.
        #[arg(long)]
        skill: String,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Write the scene and object clouds as PLY.
    Export {
        #[command(flatten)]
        common: Common,
    },
}
