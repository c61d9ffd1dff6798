use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use skillplan::planner::{Exhaustion, PlanSkeleton, Planner, PlannerError, PlannerStats};
use skillplan::ply::save_ply;
use skillplan::scene::Cuboid;
use skillplan::sim::{
    add_depth_noise_from, derive_seed, evaluate_multistep, execute_plan, generate_training_data_with,
    random_half_extents, sample_stable_pose_in, synthesize_cloud, ExecuteOptions, PoseError, TrainingOptions,
    TrainingYield,
};
use skillplan::skills::{ContactPose, SkillType};
use skillplan::samplers::write_replay_record;
use skillplan::{PointCloud, RigidTransform, Vec3};

use crate::config::{parse_noise, parse_transform, relative_goal, ScenarioConfig};
use crate::{CliError, Command, Common};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// The planner ran but returned no plan.
    PlannerFailure,
}

pub fn run(command: Command) -> Result<Outcome, CliError> {
    match command {
        Command::Plan {
            common,
            goal,
            goal_pair,
            skeleton,
        } => {
            let mut cfg = load(&common)?;
            if let Some(s) = skeleton {
                cfg.skeleton = s.parse().map_err(|e| CliError::Config(format!("skeleton: {e}")))?;
            }
            let goal = match (goal, goal_pair) {
                (Some(g), _) => parse_transform(&g)?,
                (None, Some(pair)) => relative_goal(&parse_transform(&pair[0])?, &parse_transform(&pair[1])?),
                (None, None) => cfg
                    .goal
                    .ok_or_else(|| CliError::Config("no goal: pass --goal, --goal-pair or set `goal`".into()))?,
            };
            cmd_plan(&cfg, &goal)
        }
        Command::Evaluate { common, trials } => {
            let mut cfg = load(&common)?;
            if trials == Some(0) {
                return Err(CliError::Config("--trials must be positive".into()));
            }
            if trials.is_some() {
                cfg.evaluation.max_trials_per_skeleton = trials;
            }
            cmd_evaluate(&cfg)
        }
        Command::GenData { common, skill, samples } => {
            let cfg = load(&common)?;
            let mut letters = skill.chars();
            let skill = match (letters.next().and_then(SkillType::from_letter), letters.next()) {
                (Some(s), None) => s,
                _ => return Err(CliError::Config(format!("invalid skill '{skill}' (expected one of p, g, s, k)"))),
            };
            cmd_gen_data(&cfg, skill, samples)
        }
        Command::Export { common } => cmd_export(&load(&common)?),
    }
}

/// Loads the config and applies the command-line overrides.
fn load(common: &Common) -> Result<ScenarioConfig, CliError> {
    let mut cfg = ScenarioConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(noise) = &common.noise {
        cfg.noise = Some(parse_noise(noise)?);
    }
    if let Some(budget) = common.budget {
        cfg.planner.time_budget = budget;
    }
    cfg.evaluation.seed = cfg.seed;
    if cfg.noise.is_some() {
        cfg.evaluation.noise = cfg.noise;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &ScenarioConfig) -> Result<&Path, CliError> {
    fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::io(&cfg.output_dir, e))?;
    Ok(&cfg.output_dir)
}

fn write(path: PathBuf, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(&path, contents).map_err(|e| CliError::io(path, e))
}

fn write_cloud(path: PathBuf, cloud: &PointCloud) -> Result<(), CliError> {
    save_ply(cloud, &path).map_err(|e| CliError::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// The configured object, with missing fields drawn from the seed. The
/// start pose is stable inside the first skill's precondition region.
pub fn resolve_object(cfg: &ScenarioConfig) -> Cuboid {
    let half = cfg
        .object
        .half_extents
        .unwrap_or_else(|| random_half_extents(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "object", 0))));
    let pose = cfg.object.pose.unwrap_or_else(|| {
        let region = cfg.scene.workspace.regions.for_skill(cfg.skeleton.steps()[0]);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "start", 0));
        sample_stable_pose_in(&half, region, cfg.scene.table.height, &mut rng)
    });
    Cuboid::new(half, pose)
}

/// Synthesized observation of `object`, noisy when the config asks for it.
pub fn observe(cfg: &ScenarioConfig, object: &Cuboid) -> PointCloud {
    let synth = synthesize_cloud(&cfg.scene, object, cfg.object.points, derive_seed(cfg.seed, "cloud", 0));
    match cfg.noise {
        Some([a, b]) if a > 0.0 || b > 0.0 => add_depth_noise_from(
            &synth.dense,
            &cfg.scene.camera_positions(),
            &synth.camera,
            a,
            b,
            derive_seed(cfg.seed, "noise", 0),
        ),
        _ => synth.dense,
    }
}

#[derive(Serialize)]
struct StepRecord {
    skill: SkillType,
    subgoal: RigidTransform,
    contact: ContactPose,
    mask_points: Option<usize>,
}

#[derive(Serialize)]
struct ExecutionRecord {
    final_pose: RigidTransform,
    position_error: f64,
    orientation_angle_deg: f64,
    within_tolerance: bool,
}

#[derive(Serialize)]
struct PlanRecord {
    skeleton: PlanSkeleton,
    t_des: RigidTransform,
    half_extents: Vec3,
    start: RigidTransform,
    steps: Vec<StepRecord>,
    total_transform: RigidTransform,
    execution: ExecutionRecord,
}

#[derive(Serialize)]
struct StatsRecord {
    found: bool,
    failure: Option<Exhaustion>,
    samples_drawn: usize,
    stats: PlannerStats,
}

pub fn cmd_plan(cfg: &ScenarioConfig, goal: &RigidTransform) -> Result<Outcome, CliError> {
    let object = resolve_object(cfg);
    let observed = observe(cfg, &object);
    let sampler = cfg.sampler()?;
    let mut planner_cfg = cfg.planner.clone();
    planner_cfg.seed = derive_seed(cfg.seed, "planner", 0);
    let dir = out_dir(cfg)?;
    write_cloud(dir.join("observed.ply"), &observed)?;

    let result = match Planner::new(&cfg.scene, sampler.as_ref(), &planner_cfg).plan(&observed, goal, &cfg.skeleton) {
        Ok(r) => r,
        Err(PlannerError::Config(e)) => return Err(CliError::Config(e)),
        Err(e) => {
            eprintln!("planner failed: {e}");
            return Ok(Outcome::PlannerFailure);
        }
    };
    match result {
        Ok(success) => {
            let plan = &success.plan;
            for (i, cloud) in plan.predicted_clouds.iter().enumerate() {
                write_cloud(dir.join(format!("step_{i:02}.ply")), cloud)?;
            }
            let final_pose = execute_plan(plan, &cfg.scene, &object, ExecuteOptions::default());
            let desired = goal.compose(&object.pose);
            let err = PoseError::between(&final_pose, &desired);
            let record = PlanRecord {
                skeleton: cfg.skeleton.clone(),
                t_des: *goal,
                half_extents: object.half_extents,
                start: object.pose,
                steps: plan
                    .params
                    .iter()
                    .map(|p| StepRecord {
                        skill: p.skill,
                        subgoal: p.subgoal,
                        contact: p.contact,
                        mask_points: p.mask.as_ref().map(|m| m.iter().filter(|&&b| b).count()),
                    })
                    .collect(),
                total_transform: plan.total_transform,
                execution: ExecutionRecord {
                    final_pose,
                    position_error: err.position,
                    orientation_angle_deg: err.orientation_angle.to_degrees(),
                    within_tolerance: err.within(planner_cfg.position_tolerance, planner_cfg.orientation_tolerance()),
                },
            };
            write(dir.join("plan.json"), to_json(&record))?;
            write(
                dir.join("stats.json"),
                to_json(&StatsRecord {
                    found: true,
                    failure: None,
                    samples_drawn: success.stats.samples_drawn(),
                    stats: success.stats.clone(),
                }),
            )?;
            let skills: Vec<_> = plan.params.iter().map(|p| p.skill.name()).collect();
            println!(
                "plan found: {} ({} samples, {:.3} s); executed error {:.4} m / {:.2} deg",
                skills.join(" -> "),
                success.stats.samples_drawn(),
                success.elapsed.as_secs_f64(),
                err.position,
                err.orientation_angle.to_degrees()
            );
            Ok(Outcome::Success)
        }
        Err(failure) => {
            write(
                dir.join("stats.json"),
                to_json(&StatsRecord {
                    found: false,
                    failure: Some(failure.reason),
                    samples_drawn: failure.stats.samples_drawn(),
                    stats: failure.stats.clone(),
                }),
            )?;
            eprintln!(
                "no plan: {:?} after {} samples ({:.3} s)",
                failure.reason,
                failure.stats.samples_drawn(),
                failure.elapsed.as_secs_f64()
            );
            Ok(Outcome::PlannerFailure)
        }
    }
}

pub fn cmd_evaluate(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let sampler = cfg.sampler()?;
    let report = evaluate_multistep(&cfg.evaluation, &cfg.planner, &cfg.scene, sampler.as_ref())
        .map_err(|e| CliError::Config(e.to_string()))?;
    let dir = out_dir(cfg)?;
    write(dir.join("trials.jsonl"), report.trial_records())?;
    write(dir.join("timings.jsonl"), report.timing_records())?;
    write(dir.join("summary.json"), report.summary_json() + "\n")?;
    let table = report.table();
    write(dir.join("table.txt"), &table)?;
    print!("{table}");
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct SampleRecord {
    index: usize,
    skill: SkillType,
    half_extents: Vec3,
    start: RigidTransform,
    subgoal: RigidTransform,
    contact: ContactPose,
    mask_points: usize,
}

#[derive(Serialize)]
struct YieldRecord<'a> {
    skill: SkillType,
    requested: usize,
    objects: usize,
    seed: u64,
    #[serde(flatten)]
    stats: &'a TrainingYield,
}

pub fn cmd_gen_data(cfg: &ScenarioConfig, skill: SkillType, samples: usize) -> Result<Outcome, CliError> {
    let n_objects = if cfg.gen_data.n_objects == 0 { samples.max(1) } else { cfg.gen_data.n_objects };
    let opts = TrainingOptions {
        dense_points: cfg.gen_data.points,
        attempts_per_sample: cfg.gen_data.attempts_per_sample,
        path: cfg.planner.path,
    };
    let data = generate_training_data_with(n_objects, samples, skill, &cfg.scene, derive_seed(cfg.seed, "gen_data", 0), &opts);
    let dir = out_dir(cfg)?;
    let name = skill.name();

    let mut replay = format!("# {name}: {} samples, seed {}\n", data.samples.len(), cfg.seed);
    let mut meta = String::new();
    for (index, s) in data.samples.iter().enumerate() {
        replay.push_str(&write_replay_record(&s.to_replay()));
        replay.push('\n');
        let rec = SampleRecord {
            index,
            skill: s.skill,
            half_extents: s.object.half_extents,
            start: s.object.pose,
            subgoal: s.subgoal,
            contact: s.contact,
            mask_points: s.mask.iter().filter(|&&b| b).count(),
        };
        meta.push_str(&serde_json::to_string(&rec).expect("serializable"));
        meta.push('\n');
    }
    write(dir.join(format!("{name}.replay")), replay)?;
    write(dir.join(format!("{name}.samples.jsonl")), meta)?;
    let stats = YieldRecord {
        skill,
        requested: samples,
        objects: n_objects,
        seed: cfg.seed,
        stats: &data.stats,
    };
    write(dir.join(format!("{name}.yield.json")), to_json(&stats))?;
    let y = &data.stats;
    println!(
        "{name}: {} of {samples} samples from {} attempts (precondition {}, no contact {}, not admitted {}, infeasible {}, off target {})",
        y.emitted, y.attempts, y.precondition, y.no_contact, y.not_admitted, y.infeasible, y.off_target
    );
    Ok(Outcome::Success)
}

pub fn cmd_export(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let dir = out_dir(cfg)?;
    write_cloud(dir.join("table.ply"), &cfg.scene.table_cloud())?;
    if let Some(shelf) = cfg.scene.shelf_cloud() {
        write_cloud(dir.join("shelf.ply"), &shelf)?;
    }
    let object = resolve_object(cfg);
    write_cloud(dir.join("object.ply"), &observe(cfg, &object))?;
    write(dir.join("scenario.json"), to_json(cfg))?;
    write(dir.join("object.json"), to_json(&object))?;
    println!("exported scene and object to {}", dir.display());
    Ok(Outcome::Success)
}
