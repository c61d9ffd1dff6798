use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::PoseError;
use super::objects::{execute_plan, random_half_extents, sample_stable_pose_on_face, ExecuteOptions};
use super::synthesis::{add_depth_noise_from, synthesize_cloud};
use crate::analysis::KdTree;
use crate::feasibility::{check_motion, refine_contact_with_index, satisfies_preconditions, Infeasibility};
use crate::geometry::{RigidTransform, Vec3};
use crate::planner::{compose_in_order, Exhaustion, Plan, PlanSkeleton, Planner, PlannerConfig, PlannerError, PlannerStats};
use crate::samplers::{BaselineSampler, SegmentedCloud, SkillSampler};
use crate::scene::{Cuboid, Scene};
use crate::skills::{generate_path, PathParams, SkillType};

/// Default depth-noise coefficients `(a, b)`: 2 mm and 0.019 m⁻¹.
pub const DEFAULT_NOISE: [f64; 2] = [0.002, 0.019];

/// Sample cap of the single-step protocol.
pub const SINGLE_STEP_SAMPLES: usize = 15;

/// Seed for stream `label`/`index` under `master`: FNV-1a of the label mixed
/// through splitmix64.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut x = master ^ h.rotate_left(17) ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for _ in 0..2 {
        x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        x = z ^ (z >> 31);
    }
    x
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalMode {
    /// Goal from a sampled rollout of the skeleton on the noiseless cloud.
    Witness,
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub n_objects: usize,
    /// Trials per skeleton and object.
    pub trials_per_object: usize,
    pub skeletons: Vec<PlanSkeleton>,
    /// Cap on trials per skeleton; trials are ordered so that a capped run
    /// still cycles through the objects.
    pub max_trials_per_skeleton: Option<usize>,
    /// Depth noise `(a, b)` applied to the planner's observation.
    pub noise: Option<[f64; 2]>,
    pub dense_points: usize,
    pub settle: bool,
    /// Start trial `k` on face `k mod 6` instead of a random face.
    pub cycle_faces: bool,
    /// Sample-cap exhaustion is reported as a feasibility (or registration)
    /// failure instead of a timeout.
    pub single_step: bool,
    pub goal: GoalMode,
    /// Start poses tried before a trial's task is declared ungenerated.
    pub witness_restarts: usize,
    /// Draws per witness step.
    pub witness_draws: usize,
    pub seed: u64,
    /// Worker threads; 0 uses the available parallelism.
    pub threads: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            n_objects: 20,
            trials_per_object: 10,
            skeletons: ["pg", "gp", "pgp"].iter().map(|s| s.parse().expect("valid skeleton")).collect(),
            max_trials_per_skeleton: None,
            noise: None,
            dense_points: 600,
            settle: false,
            cycle_faces: false,
            single_step: false,
            goal: GoalMode::Witness,
            witness_restarts: 50,
            witness_draws: 50,
            seed: 0,
            threads: 0,
        }
    }
}

impl EvaluationConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_objects == 0 || self.trials_per_object == 0 {
            return Err("n_objects and trials_per_object must be positive".into());
        }
        if self.skeletons.is_empty() {
            return Err("at least one skeleton is required".into());
        }
        if self.dense_points < 100 {
            return Err("dense_points must be at least 100".into());
        }
        if let Some([a, b]) = self.noise {
            if !(a >= 0.0 && b >= 0.0) {
                return Err("noise coefficients must be non-negative".into());
            }
        }
        if self.max_trials_per_skeleton == Some(0) {
            return Err("max_trials_per_skeleton must be positive".into());
        }
        if self.witness_restarts == 0 || self.witness_draws == 0 {
            return Err("witness_restarts and witness_draws must be positive".into());
        }
        Ok(())
    }

    pub fn trials_per_skeleton(&self) -> usize {
        let all = self.n_objects * self.trials_per_object;
        self.max_trials_per_skeleton.map_or(all, |m| m.min(all))
    }

    pub fn trial_count(&self) -> usize {
        self.skeletons.len() * self.trials_per_skeleton()
    }

    /// The single-step protocol: 19 objects, six start faces, one skill.
    pub fn single_step(skill: SkillType) -> Self {
        Self {
            n_objects: 19,
            trials_per_object: 6,
            skeletons: vec![PlanSkeleton::new(vec![skill]).expect("one step")],
            cycle_faces: true,
            single_step: true,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCategory {
    Timeout,
    Precondition,
    Feasibility,
    Registration,
}

impl FailureCategory {
    pub fn name(self) -> &'static str {
        match self {
            Self::Timeout => "timeout",
            Self::Precondition => "precondition",
            Self::Feasibility => "feasibility",
            Self::Registration => "registration",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub skeleton: PlanSkeleton,
    pub object: usize,
    pub half_extents: Vec3,
    pub start: RigidTransform,
    pub t_des: RigidTransform,
    /// False when no solvable task could be generated; such trials are not
    /// scored.
    pub generated: bool,
    pub plan_found: bool,
    pub success: bool,
    pub position_error: Option<f64>,
    pub orientation_loss: Option<f64>,
    pub orientation_angle: Option<f64>,
    pub samples_drawn: usize,
    pub failure_category: Option<FailureCategory>,
    /// Every step of the returned plan re-passed preconditions and
    /// feasibility.
    pub recheck_passed: Option<bool>,
    pub stats: Option<PlannerStats>,
    #[serde(skip)]
    pub planning_time: Duration,
    #[serde(skip)]
    pub witness: Vec<SkillType>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub label: String,
    pub trials: usize,
    pub generated: usize,
    pub plans_found: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Plans found within the sample cap, over generated trials.
    pub feasibility_success_rate: f64,
    /// Fraction of found plans whose execution kept the object rigidly
    /// attached to the palms; always 1 under the sticking model.
    pub sticking_success_rate: f64,
    pub mean_position_error: Option<f64>,
    pub mean_orientation_loss: Option<f64>,
    pub mean_orientation_angle: Option<f64>,
    pub mean_planning_time: Option<f64>,
    pub mean_samples: f64,
    pub failures: BTreeMap<FailureCategory, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub trials: Vec<TrialReport>,
    pub per_skeleton: Vec<Summary>,
    pub overall: Summary,
}

impl EvaluationReport {
    /// One JSON object per trial, in trial order. Timing is excluded so the
    /// records are a function of the seeds alone.
    pub fn trial_records(&self) -> String {
        let mut out = String::new();
        for t in &self.trials {
            out.push_str(&serde_json::to_string(t).expect("serializable"));
            out.push('\n');
        }
        out
    }

    pub fn timing_records(&self) -> String {
        let mut out = String::new();
        for t in &self.trials {
            let _ = writeln!(out, "{{\"trial\":{},\"planning_time\":{}}}", t.trial, t.planning_time.as_secs_f64());
        }
        out
    }

    pub fn summary_json(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            per_skeleton: &'a [Summary],
            overall: &'a Summary,
        }
        serde_json::to_string_pretty(&Out {
            per_skeleton: &self.per_skeleton,
            overall: &self.overall,
        })
        .expect("serializable")
    }

    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<10} {:>6} {:>8} {:>9} {:>9} {:>9} {:>9}\n",
            "skeleton", "trials", "success", "pos_err", "ang_err", "time_s", "samples"
        );
        for s in self.per_skeleton.iter().chain(std::iter::once(&self.overall)) {
            let _ = writeln!(
                out,
                "{:<10} {:>6} {:>8.3} {:>9} {:>9} {:>9} {:>9.1}",
                s.label,
                s.generated,
                s.success_rate,
                fmt_opt(s.mean_position_error, 4),
                fmt_opt(s.mean_orientation_angle.map(f64::to_degrees), 2),
                fmt_opt(s.mean_planning_time, 3),
                s.mean_samples,
            );
        }
        out
    }
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.prec$}"))
}

/// Side-by-side success rates of two runs of the same suite.
pub fn comparison_table(clean: &EvaluationReport, noisy: &EvaluationReport) -> String {
    let mut out = format!(
        "{:<10} {:>10} {:>10} {:>10} {:>12} {:>12}\n",
        "skeleton", "clean", "noisy", "change", "clean_pos", "noisy_pos"
    );
    let rows = clean
        .per_skeleton
        .iter()
        .zip(&noisy.per_skeleton)
        .chain(std::iter::once((&clean.overall, &noisy.overall)));
    for (c, n) in rows {
        let _ = writeln!(
            out,
            "{:<10} {:>10.3} {:>10.3} {:>+10.3} {:>12} {:>12}",
            c.label,
            c.success_rate,
            n.success_rate,
            n.success_rate - c.success_rate,
            fmt_opt(c.mean_position_error, 4),
            fmt_opt(n.mean_position_error, 4),
        );
    }
    out
}

/// Why a re-checked plan step fails.
#[derive(Clone, Debug, PartialEq)]
pub enum RecheckFailure {
    Precondition(usize),
    Path(usize),
    Infeasible(usize, Option<Infeasibility>),
}

/// Re-verifies preconditions and motion feasibility at every step of a plan
/// from its predicted clouds.
pub fn recheck_plan(plan: &Plan, scene: &Scene, path: &PathParams) -> Result<(), RecheckFailure> {
    let supports: Vec<_> = scene.shelf.into_iter().collect();
    for (i, p) in plan.params.iter().enumerate() {
        let cloud = &plan.predicted_clouds[i];
        if !satisfies_preconditions(plan.skeleton[i], cloud, &scene.workspace) {
            return Err(RecheckFailure::Precondition(i));
        }
        let path = generate_path(p.skill, &p.contact, &p.subgoal, path).map_err(|_| RecheckFailure::Path(i))?;
        let report = check_motion(&path, cloud, &p.subgoal, &scene.workspace, &supports);
        if !report.feasible() {
            return Err(RecheckFailure::Infeasible(i, report.failure));
        }
    }
    Ok(())
}

struct Task {
    start: RigidTransform,
    t_des: RigidTransform,
    witness: Vec<SkillType>,
    observation: super::synthesis::SyntheticCloud,
}

/// Samples a start pose and a goal reachable by `skeleton` from it.
fn generate_task(
    cfg: &EvaluationConfig,
    scene: &Scene,
    witness_sampler: &BaselineSampler,
    half: &Vec3,
    skeleton: &PlanSkeleton,
    face: Option<usize>,
    seed: u64,
) -> Option<Task> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = skeleton.steps()[0];
    let region = scene.workspace.regions.for_skill(first);
    let path_params = PathParams::default();
    let supports: Vec<_> = scene.shelf.into_iter().collect();
    for _ in 0..cfg.witness_restarts {
        let f = face.unwrap_or_else(|| rng.random_range(0..6));
        let start = sample_stable_pose_on_face(half, f, region, scene.table.height, &mut rng);
        let cuboid = Cuboid::new(*half, start);
        let observation = synthesize_cloud(scene, &cuboid, cfg.dense_points, rng.random());
        if !satisfies_preconditions(first, &observation.dense, &scene.workspace) {
            continue;
        }
        if cfg.goal == GoalMode::Identity {
            return Some(Task {
                start,
                t_des: RigidTransform::identity(),
                witness: Vec::new(),
                observation,
            });
        }
        let Ok(mut seg) = witness_sampler.prepare(&observation.dense, scene, rng.random()) else {
            continue;
        };
        let mut subgoals = Vec::new();
        let mut skills = Vec::new();
        for &skill in skeleton.steps() {
            if !satisfies_preconditions(skill, &seg.cloud, &scene.workspace) {
                break;
            }
            let tree = KdTree::build(seg.cloud.points());
            let step = (0..cfg.witness_draws).find_map(|_| {
                let params = witness_sampler.draw(skill, &seg, scene, rng.random()).ok()?;
                let contact = refine_contact_with_index(&params.contact, &tree).contact;
                let path = generate_path(params.skill, &contact, &params.subgoal, &path_params).ok()?;
                check_motion(&path, &seg.cloud, &params.subgoal, &scene.workspace, &supports)
                    .feasible()
                    .then_some(params)
            });
            let Some(params) = step else { break };
            seg = SegmentedCloud::transformed(&seg, &params.subgoal);
            subgoals.push(params.subgoal);
            skills.push(params.skill);
        }
        if subgoals.len() == skeleton.len() {
            return Some(Task {
                start,
                t_des: compose_in_order(&subgoals),
                witness: skills,
                observation,
            });
        }
    }
    None
}

fn failure_category(reason: Exhaustion, stats: &PlannerStats, single_step: bool) -> FailureCategory {
    match reason {
        Exhaustion::Time => FailureCategory::Timeout,
        Exhaustion::Precondition => FailureCategory::Precondition,
        Exhaustion::Samples if !single_step => FailureCategory::Timeout,
        Exhaustion::Samples => {
            let drawn = stats.samples_drawn();
            if drawn > 0 && stats.registration_errors == drawn {
                FailureCategory::Registration
            } else if drawn == 0 && stats.precondition_failures.iter().sum::<usize>() > 0 {
                FailureCategory::Precondition
            } else {
                FailureCategory::Feasibility
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_trial(
    index: usize,
    skeleton: &PlanSkeleton,
    object: usize,
    local: usize,
    cfg: &EvaluationConfig,
    planner_cfg: &PlannerConfig,
    scene: &Scene,
    sampler: &dyn SkillSampler,
    witness_sampler: &BaselineSampler,
) -> Result<TrialReport, PlannerError> {
    let half = random_half_extents(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "object", object as u64)));
    let face = cfg.cycle_faces.then_some(local % 6);
    let task = generate_task(
        cfg,
        scene,
        witness_sampler,
        &half,
        skeleton,
        face,
        derive_seed(cfg.seed, "task", index as u64),
    );
    let mut report = TrialReport {
        trial: index,
        skeleton: skeleton.clone(),
        object,
        half_extents: half,
        start: RigidTransform::identity(),
        t_des: RigidTransform::identity(),
        generated: false,
        plan_found: false,
        success: false,
        position_error: None,
        orientation_loss: None,
        orientation_angle: None,
        samples_drawn: 0,
        failure_category: None,
        recheck_passed: None,
        stats: None,
        planning_time: Duration::ZERO,
        witness: Vec::new(),
    };
    let Some(task) = task else {
        return Ok(report);
    };
    report.generated = true;
    report.start = task.start;
    report.t_des = task.t_des;
    report.witness = task.witness;

    let observed = match cfg.noise {
        Some([a, b]) => add_depth_noise_from(
            &task.observation.dense,
            &scene.camera_positions(),
            &task.observation.camera,
            a,
            b,
            derive_seed(cfg.seed, "noise", index as u64),
        ),
        None => task.observation.dense.clone(),
    };
    let mut pc = planner_cfg.clone();
    pc.seed = derive_seed(cfg.seed, "planner", index as u64);
    if cfg.single_step {
        pc.max_samples = Some(pc.max_samples.map_or(SINGLE_STEP_SAMPLES, |m| m.min(SINGLE_STEP_SAMPLES)));
    }
    let planner = Planner::new(scene, sampler, &pc);
    let outcome = match planner.plan(&observed, &task.t_des, skeleton) {
        Ok(o) => o,
        Err(PlannerError::Observation(_)) => {
            report.failure_category = Some(FailureCategory::Registration);
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    match outcome {
        Ok(found) => {
            report.plan_found = true;
            report.planning_time = found.elapsed;
            report.samples_drawn = found.stats.samples_drawn();
            report.recheck_passed = Some(recheck_plan(&found.plan, scene, &pc.path).is_ok());
            let cuboid = Cuboid::new(half, task.start);
            let reached = execute_plan(&found.plan, scene, &cuboid, ExecuteOptions { settle: cfg.settle });
            let desired = task.t_des.compose(&task.start);
            let err = PoseError::between(&reached, &desired);
            report.position_error = Some(err.position);
            report.orientation_loss = Some(err.orientation_loss);
            report.orientation_angle = Some(err.orientation_angle);
            report.success = err.within(pc.position_tolerance, pc.orientation_tolerance());
            if !report.success {
                report.failure_category = Some(FailureCategory::Feasibility);
            }
            report.stats = Some(found.stats);
        }
        Err(fail) => {
            report.planning_time = fail.elapsed;
            report.samples_drawn = fail.stats.samples_drawn();
            report.failure_category = Some(failure_category(fail.reason, &fail.stats, cfg.single_step));
            report.stats = Some(fail.stats);
        }
    }
    Ok(report)
}

/// Runs every (skeleton, object, trial) combination and aggregates.
pub fn evaluate_multistep(
    cfg: &EvaluationConfig,
    planner_cfg: &PlannerConfig,
    scene: &Scene,
    sampler: &dyn SkillSampler,
) -> Result<EvaluationReport, PlannerError> {
    cfg.validate().map_err(PlannerError::Config)?;
    planner_cfg.validate().map_err(PlannerError::Config)?;
    let witness_sampler = BaselineSampler::new(scene);
    let mut jobs = Vec::with_capacity(cfg.trial_count());
    for skeleton in &cfg.skeletons {
        let pairs = (0..cfg.trials_per_object).flat_map(|local| (0..cfg.n_objects).map(move |object| (object, local)));
        for (object, local) in pairs.take(cfg.trials_per_skeleton()) {
            jobs.push((jobs.len(), skeleton, object, local));
        }
    }
    let threads = match cfg.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
    .min(jobs.len())
    .max(1);
    let run = |&(i, sk, obj, local): &(usize, &PlanSkeleton, usize, usize)| {
        run_trial(i, sk, obj, local, cfg, planner_cfg, scene, sampler, &witness_sampler)
    };
    let mut results: Vec<Option<Result<TrialReport, PlannerError>>> = vec![None; jobs.len()];
    if threads == 1 {
        for (slot, job) in results.iter_mut().zip(&jobs) {
            *slot = Some(run(job));
        }
    } else {
        let chunks: Vec<Vec<(usize, Result<TrialReport, PlannerError>)>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads)
                .map(|w| {
                    let jobs = &jobs;
                    let run = &run;
                    s.spawn(move || {
                        jobs.iter()
                            .skip(w)
                            .step_by(threads)
                            .map(|j| (j.0, run(j)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        for (i, r) in chunks.into_iter().flatten() {
            results[i] = Some(r);
        }
    }
    let trials = results
        .into_iter()
        .map(|r| r.expect("every trial ran"))
        .collect::<Result<Vec<_>, _>>()?;
    let per_skeleton = cfg
        .skeletons
        .iter()
        .map(|sk| summarize(sk.to_string(), trials.iter().filter(|t| &t.skeleton == sk)))
        .collect();
    let overall = summarize("all".into(), trials.iter());
    Ok(EvaluationReport {
        trials,
        per_skeleton,
        overall,
    })
}

pub fn summarize<'a>(label: String, trials: impl Iterator<Item = &'a TrialReport>) -> Summary {
    let trials: Vec<&TrialReport> = trials.collect();
    let generated: Vec<&&TrialReport> = trials.iter().filter(|t| t.generated).collect();
    let found: Vec<&&&TrialReport> = generated.iter().filter(|t| t.plan_found).collect();
    let wins: Vec<&&&TrialReport> = generated.iter().filter(|t| t.success).collect();
    let mean = |v: Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let rate = |n: usize| if generated.is_empty() { 0.0 } else { n as f64 / generated.len() as f64 };
    let mut failures = BTreeMap::new();
    for t in &generated {
        if let Some(c) = t.failure_category {
            *failures.entry(c).or_insert(0) += 1;
        }
    }
    Summary {
        label,
        trials: trials.len(),
        generated: generated.len(),
        plans_found: found.len(),
        successes: wins.len(),
        success_rate: rate(wins.len()),
        feasibility_success_rate: rate(found.len()),
        sticking_success_rate: if found.is_empty() { 0.0 } else { 1.0 },
        mean_position_error: mean(wins.iter().filter_map(|t| t.position_error).collect()),
        mean_orientation_loss: mean(wins.iter().filter_map(|t| t.orientation_loss).collect()),
        mean_orientation_angle: mean(wins.iter().filter_map(|t| t.orientation_angle).collect()),
        mean_planning_time: mean(found.iter().map(|t| t.planning_time.as_secs_f64()).collect()),
        mean_samples: mean(generated.iter().map(|t| t.samples_drawn as f64).collect()).unwrap_or(0.0),
        failures,
    }
}
