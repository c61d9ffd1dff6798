//! Scenario files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use skillplan::planner::{PlanSkeleton, PlannerConfig};
use skillplan::samplers::{BaselineParams, BaselineSampler, ReplaySampler, SkillSampler};
use skillplan::scene::Scene;
use skillplan::sim::EvaluationConfig;
use skillplan::{RigidTransform, Vec3};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_skeleton")]
    pub skeleton: PlanSkeleton,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Depth noise `(a, b)`: sigma = a + b d^2 along the camera ray.
    #[serde(default)]
    pub noise: Option<[f64; 2]>,
    /// Goal transform `[tx, ty, tz, qw, qx, qy, qz]` for `plan`.
    #[serde(default)]
    pub goal: Option<RigidTransform>,
    #[serde(default)]
    pub scene: Scene,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub object: ObjectConfig,
    #[serde(default)]
    pub gen_data: GenDataConfig,
}

fn default_skeleton() -> PlanSkeleton {
    "pg".parse().expect("valid skeleton")
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerConfig {
    Baseline {
        #[serde(default)]
        params: BaselineParams,
    },
    /// Parameters recorded by `gen-data`; relative paths resolve against the
    /// config file's directory.
    Replay { path: PathBuf },
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self::Baseline {
            params: BaselineParams::default(),
        }
    }
}

/// The object observed by `plan` and `export`. Missing fields are drawn
/// from the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectConfig {
    pub half_extents: Option<Vec3>,
    pub pose: Option<RigidTransform>,
    /// Points synthesized on the visible faces.
    pub points: usize,
}

impl Default for ObjectConfig {
    fn default() -> Self {
        Self {
            half_extents: None,
            pose: None,
            points: 600,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenDataConfig {
    /// 0 uses one object per requested sample.
    pub n_objects: usize,
    pub points: usize,
    pub attempts_per_sample: usize,
}

impl Default for GenDataConfig {
    fn default() -> Self {
        Self {
            n_objects: 0,
            points: 600,
            attempts_per_sample: 50,
        }
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`; a relative replay path is resolved against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let SamplerConfig::Replay { path: replay } = &mut cfg.sampler {
            if replay.is_relative() {
                if let Some(dir) = path.parent() {
                    *replay = dir.join(&*replay);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.scene.validate().map_err(CliError::Config)?;
        self.planner.validate().map_err(CliError::Config)?;
        self.evaluation.validate().map_err(CliError::Config)?;
        if let Some([a, b]) = self.noise {
            if !(a >= 0.0 && b >= 0.0) {
                return Err(CliError::Config("noise coefficients must be non-negative".into()));
            }
        }
        if let Some(h) = self.object.half_extents {
            if !h.iter().all(|v| *v > 0.0) {
                return Err(CliError::Config("object half_extents must be positive".into()));
            }
        }
        if self.object.points < 100 || self.gen_data.points < 100 {
            return Err(CliError::Config("point counts must be at least 100".into()));
        }
        if self.gen_data.attempts_per_sample == 0 {
            return Err(CliError::Config("attempts_per_sample must be positive".into()));
        }
        Ok(())
    }

    pub fn sampler(&self) -> Result<Box<dyn SkillSampler>, CliError> {
        Ok(match &self.sampler {
            SamplerConfig::Baseline { params } => Box::new(BaselineSampler::with_params(&self.scene, params.clone())),
            SamplerConfig::Replay { path } => Box::new(
                ReplaySampler::from_file(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
            ),
        })
    }
}

/// Parses `tx ty tz qw qx qy qz`, separated by commas or whitespace.
pub fn parse_transform(s: &str) -> Result<RigidTransform, CliError> {
    let nums = s
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| CliError::Config(format!("bad number '{t}': {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let arr: [f64; 7] = nums
        .try_into()
        .map_err(|v: Vec<f64>| CliError::Config(format!("a transform needs 7 numbers, got {}", v.len())))?;
    RigidTransform::from_array(arr).map_err(|e| CliError::Config(e.to_string()))
}

/// Parses `a,b`.
pub fn parse_noise(s: &str) -> Result<[f64; 2], CliError> {
    let nums = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| CliError::Config(format!("bad noise value '{t}': {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    match nums[..] {
        [a, b] if a >= 0.0 && b >= 0.0 => Ok([a, b]),
        _ => Err(CliError::Config(format!("noise must be two non-negative numbers 'a,b', got '{s}'"))),
    }
}

/// Relative goal between two observed poses: `b ∘ a⁻¹`.
pub fn relative_goal(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    b.compose(&a.inverse())
}
