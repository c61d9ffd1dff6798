//! Buffer-based multi-step sampling planner.
//!
//! Each skeleton step owns a buffer of search nodes. A scheduler sweeps the
//! steps round-robin; each visit picks a random node from the step's buffer,
//! checks the skill's precondition, and draws up to `k_max` parameter samples
//! until one is feasible. The last step does not sample a subgoal: it is the
//! residual between the goal and the node's ancestry.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::KdTree;
use crate::feasibility::{check_motion, refine_contact_with_index, satisfies_preconditions, Infeasibility};
use crate::geometry::{PointCloud, RigidTransform};
use crate::samplers::{SamplerError, SegmentedCloud, SkillParams, SkillSampler};
use crate::scene::Scene;
use crate::skills::{generate_path, skill_admits, ContactPose, PathParams, SkillType};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PlanSkeleton {
    steps: Vec<SkillType>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SkeletonError {
    #[error("empty plan skeleton")]
    Empty,
    #[error("invalid skeleton character '{ch}' at position {pos} (expected one of p, g, s, k)")]
    BadChar { ch: char, pos: usize },
}

impl PlanSkeleton {
    pub fn new(steps: Vec<SkillType>) -> Result<Self, SkeletonError> {
        if steps.is_empty() {
            return Err(SkeletonError::Empty);
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[SkillType] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

impl FromStr for PlanSkeleton {
    type Err = SkeletonError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let steps = s
            .chars()
            .enumerate()
            .map(|(pos, ch)| SkillType::from_letter(ch).ok_or(SkeletonError::BadChar { ch, pos }))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(steps)
    }
}

impl fmt::Display for PlanSkeleton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.steps.iter().try_for_each(|s| write!(f, "{}", s.letter()))
    }
}

impl TryFrom<String> for PlanSkeleton {
    type Error = SkeletonError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<PlanSkeleton> for String {
    fn from(s: PlanSkeleton) -> String {
        s.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub k_max: usize,
    /// Seconds.
    pub time_budget: f64,
    /// Meters.
    pub position_tolerance: f64,
    /// Degrees.
    pub orientation_tolerance_deg: f64,
    pub seed: u64,
    /// Deterministic cap on the total number of sampler draws.
    pub max_samples: Option<usize>,
    pub path: PathParams,
    pub refine_contacts: bool,
    /// Keep a per-visit log in the statistics.
    pub record_visits: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            k_max: 10,
            time_budget: 300.0,
            position_tolerance: 0.03,
            orientation_tolerance_deg: 20.0,
            seed: 0,
            max_samples: None,
            path: PathParams::default(),
            refine_contacts: true,
            record_visits: false,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.k_max == 0 {
            return Err("k_max must be positive".into());
        }
        if !(self.time_budget > 0.0) {
            return Err("time_budget must be positive".into());
        }
        if !(self.position_tolerance > 0.0 && self.orientation_tolerance_deg > 0.0) {
            return Err("success tolerances must be positive".into());
        }
        if self.path.waypoints_per_phase == 0 {
            return Err("waypoints_per_phase must be positive".into());
        }
        Ok(())
    }

    pub fn orientation_tolerance(&self) -> f64 {
        self.orientation_tolerance_deg.to_radians()
    }
}

/// A search node: the object cloud after its step, and the parameters that
/// produced it.
#[derive(Clone, Debug)]
pub struct PlanNode {
    pub cloud: SegmentedCloud,
    pub subgoal: RigidTransform,
    pub contact: ContactPose,
    pub skill: Option<SkillType>,
    pub mask: Option<Vec<bool>>,
    /// (buffer, index) of the parent; `None` for the root.
    pub parent: Option<(usize, usize)>,
    /// Number of skills applied so far; equals the buffer index.
    pub step: usize,
}

impl PlanNode {
    pub fn root(cloud: SegmentedCloud) -> Self {
        Self {
            cloud,
            subgoal: RigidTransform::identity(),
            contact: ContactPose::default(),
            skill: None,
            mask: None,
            parent: None,
            step: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub skeleton: Vec<SkillType>,
    pub params: Vec<SkillParams>,
    /// The observed cloud followed by the cloud after every step.
    pub predicted_clouds: Vec<PointCloud>,
    pub total_transform: RigidTransform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisitRecord {
    pub step: usize,
    /// 0 when the buffer was empty or the precondition failed.
    pub draws: usize,
    pub success: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityCounts {
    pub palm_table_penetration: usize,
    pub unreachable: usize,
    pub palm_collision: usize,
    pub object_table_penetration: usize,
    pub unsupported: usize,
    pub stage1_failures: usize,
    pub stage2_failures: usize,
}

impl FeasibilityCounts {
    fn record(&mut self, f: Infeasibility, stage1: bool) {
        match f {
            Infeasibility::PalmTablePenetration => self.palm_table_penetration += 1,
            Infeasibility::Unreachable(_) => self.unreachable += 1,
            Infeasibility::PalmCollision => self.palm_collision += 1,
            Infeasibility::ObjectTablePenetration => self.object_table_penetration += 1,
            Infeasibility::Unsupported => self.unsupported += 1,
            Infeasibility::EmptyPath => {}
        }
        if stage1 {
            self.stage1_failures += 1;
        } else {
            self.stage2_failures += 1;
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlannerStats {
    pub samples_per_step: Vec<usize>,
    pub visits_per_step: Vec<usize>,
    pub precondition_failures: Vec<usize>,
    pub sampler_errors: usize,
    pub registration_errors: usize,
    pub not_admitted: usize,
    pub path_errors: usize,
    pub feasibility_checks: usize,
    pub feasibility: FeasibilityCounts,
    pub refine_warnings: usize,
    pub buffer_sizes: Vec<usize>,
    pub sweeps: usize,
    #[serde(skip)]
    pub visit_log: Vec<VisitRecord>,
}

impl PlannerStats {
    pub fn samples_drawn(&self) -> usize {
        self.samples_per_step.iter().sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exhaustion {
    /// Wall-clock budget.
    Time,
    /// `max_samples` cap.
    Samples,
    /// The observed object fails the first skill's precondition.
    Precondition,
}

#[derive(Debug, Clone)]
pub struct PlanSuccess {
    pub plan: Plan,
    pub stats: PlannerStats,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct PlanFailure {
    pub reason: Exhaustion,
    pub stats: PlannerStats,
    pub elapsed: Duration,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("corrupt tree: {0}")]
    CorruptTree(String),
    #[error("invalid planner config: {0}")]
    Config(String),
    #[error("observation: {0}")]
    Observation(#[from] SamplerError),
}

/// Subgoal for the last step: `t_des ∘ (a_n ∘ … ∘ a_1)⁻¹`, with the ancestry
/// given in execution order.
pub fn required_final_transform(ancestry: &[RigidTransform], t_des: &RigidTransform) -> RigidTransform {
    let product = compose_in_order(ancestry);
    t_des.compose(&product.inverse())
}

/// `a_n ∘ … ∘ a_1` for subgoals listed in execution order.
pub fn compose_in_order(subgoals: &[RigidTransform]) -> RigidTransform {
    subgoals
        .iter()
        .fold(RigidTransform::identity(), |acc, s| s.compose(&acc))
}

/// Follows parent links from `final_node` back to the root.
pub fn extract_plan(final_node: (usize, usize), buffers: &[Vec<PlanNode>]) -> Result<Plan, PlannerError> {
    let mut chain = Vec::new();
    let mut cursor = Some(final_node);
    while let Some((b, i)) = cursor {
        let node = buffers
            .get(b)
            .and_then(|buf| buf.get(i))
            .ok_or_else(|| PlannerError::CorruptTree(format!("no node at buffer {b}, index {i}")))?;
        if node.step != b {
            return Err(PlannerError::CorruptTree(format!("node in buffer {b} claims step {}", node.step)));
        }
        if let Some((pb, _)) = node.parent {
            if pb + 1 != b {
                return Err(PlannerError::CorruptTree(format!("parent of a buffer-{b} node lives in buffer {pb}")));
            }
        } else if b != 0 {
            return Err(PlannerError::CorruptTree(format!("parentless node in buffer {b}")));
        }
        chain.push(node);
        if chain.len() > buffers.len() {
            return Err(PlannerError::CorruptTree("parent cycle".into()));
        }
        cursor = node.parent;
    }
    chain.reverse();
    let params: Vec<SkillParams> = chain[1..]
        .iter()
        .map(|n| SkillParams {
            skill: n.skill.expect("non-root nodes carry a skill"),
            subgoal: n.subgoal,
            contact: n.contact,
            mask: n.mask.clone(),
        })
        .collect();
    let subgoals: Vec<RigidTransform> = params.iter().map(|p| p.subgoal).collect();
    Ok(Plan {
        skeleton: params.iter().map(|p| p.skill).collect(),
        total_transform: compose_in_order(&subgoals),
        predicted_clouds: chain.iter().map(|n| n.cloud.cloud.clone()).collect(),
        params,
    })
}

/// One planning session.
pub struct Planner<'a> {
    pub scene: &'a Scene,
    pub sampler: &'a dyn SkillSampler,
    pub config: &'a PlannerConfig,
}

enum Budget {
    Ok,
    Out(Exhaustion),
}

impl<'a> Planner<'a> {
    pub fn new(scene: &'a Scene, sampler: &'a dyn SkillSampler, config: &'a PlannerConfig) -> Self {
        Self { scene, sampler, config }
    }

    /// Plans from an observed cloud. Sampler preprocessing (normals, planes)
    /// happens here.
    pub fn plan(
        &self,
        observed: &PointCloud,
        t_des: &RigidTransform,
        skeleton: &PlanSkeleton,
    ) -> Result<Result<PlanSuccess, PlanFailure>, PlannerError> {
        let seg = self.sampler.prepare(observed, self.scene, self.config.seed)?;
        self.plan_prepared(seg, t_des, skeleton)
    }

    pub fn plan_prepared(
        &self,
        root: SegmentedCloud,
        t_des: &RigidTransform,
        skeleton: &PlanSkeleton,
    ) -> Result<Result<PlanSuccess, PlanFailure>, PlannerError> {
        self.config.validate().map_err(PlannerError::Config)?;
        let start = Instant::now();
        let cfg = self.config;
        let ws = &self.scene.workspace;
        let steps = skeleton.steps();
        let t_len = steps.len();
        let budget = Duration::from_secs_f64(cfg.time_budget);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut stats = PlannerStats {
            samples_per_step: vec![0; t_len],
            visits_per_step: vec![0; t_len],
            precondition_failures: vec![0; t_len],
            ..Default::default()
        };
        let mut buffers: Vec<Vec<PlanNode>> = vec![Vec::new(); t_len + 1];
        buffers[0].push(PlanNode::root(root));

        let finish_fail = |reason, mut stats: PlannerStats, buffers: &[Vec<PlanNode>]| {
            stats.buffer_sizes = buffers.iter().map(Vec::len).collect();
            Ok(Err(PlanFailure {
                reason,
                stats,
                elapsed: start.elapsed(),
            }))
        };

        if !satisfies_preconditions(steps[0], &buffers[0][0].cloud.cloud, ws) {
            stats.precondition_failures[0] += 1;
            return finish_fail(Exhaustion::Precondition, stats, &buffers);
        }

        let check_budget = |stats: &PlannerStats| -> Budget {
            if let Some(cap) = cfg.max_samples {
                if stats.samples_drawn() >= cap {
                    return Budget::Out(Exhaustion::Samples);
                }
            }
            if start.elapsed() >= budget {
                return Budget::Out(Exhaustion::Time);
            }
            Budget::Ok
        };

        loop {
            stats.sweeps += 1;
            for t in 0..t_len {
                if let Budget::Out(reason) = check_budget(&stats) {
                    return finish_fail(reason, stats, &buffers);
                }
                if buffers[t].is_empty() {
                    if cfg.record_visits {
                        stats.visit_log.push(VisitRecord { step: t, draws: 0, success: false });
                    }
                    continue;
                }
                stats.visits_per_step[t] += 1;
                let idx = rng.random_range(0..buffers[t].len());
                let node = &buffers[t][idx];
                let skill = steps[t];
                if !satisfies_preconditions(skill, &node.cloud.cloud, ws) {
                    stats.precondition_failures[t] += 1;
                    if cfg.record_visits {
                        stats.visit_log.push(VisitRecord { step: t, draws: 0, success: false });
                    }
                    continue;
                }
                let tree = KdTree::build(node.cloud.cloud.points());
                let last = t + 1 == t_len;

                let final_subgoal = if last {
                    let ancestry = ancestry_subgoals(&buffers, (t, idx));
                    let residual = required_final_transform(&ancestry, t_des);
                    if !skill_admits(skill, &residual) {
                        stats.not_admitted += 1;
                        if cfg.record_visits {
                            stats.visit_log.push(VisitRecord { step: t, draws: 0, success: false });
                        }
                        continue;
                    }
                    Some(if skill.is_planar() && !residual.project_se2().approx_eq(&residual, 1e-6, 1e-6) {
                        residual.project_se2()
                    } else {
                        residual
                    })
                } else {
                    None
                };

                let mut draws = 0;
                let mut child = None;
                for _ in 0..cfg.k_max {
                    if let Budget::Out(reason) = check_budget(&stats) {
                        if cfg.record_visits {
                            stats.visit_log.push(VisitRecord { step: t, draws, success: false });
                        }
                        return finish_fail(reason, stats, &buffers);
                    }
                    let seed = rng.next_u64();
                    stats.samples_per_step[t] += 1;
                    draws += 1;
                    let drawn = match &final_subgoal {
                        Some(sub) => self
                            .sampler
                            .draw_contact(skill, &node.cloud, self.scene, sub, seed)
                            .map(|(k, contact)| SkillParams {
                                skill: k,
                                subgoal: *sub,
                                contact,
                                mask: None,
                            }),
                        None => self.sampler.draw(skill, &node.cloud, self.scene, seed),
                    };
                    let params = match drawn {
                        Ok(p) if p.skill.same_family(skill) => p,
                        Ok(_) => {
                            stats.sampler_errors += 1;
                            continue;
                        }
                        Err(SamplerError::Registration(_)) => {
                            stats.registration_errors += 1;
                            continue;
                        }
                        Err(_) => {
                            stats.sampler_errors += 1;
                            continue;
                        }
                    };
                    if let Some(p) = self.evaluate(node, params, &tree, &mut stats) {
                        child = Some(p);
                        break;
                    }
                }
                if cfg.record_visits {
                    stats.visit_log.push(VisitRecord {
                        step: t,
                        draws,
                        success: child.is_some(),
                    });
                }
                let Some(params) = child else { continue };
                let cloud = node.cloud.transformed(&params.subgoal);
                buffers[t + 1].push(PlanNode {
                    cloud,
                    subgoal: params.subgoal,
                    contact: params.contact,
                    skill: Some(params.skill),
                    mask: params.mask,
                    parent: Some((t, idx)),
                    step: t + 1,
                });
                if last {
                    let plan = extract_plan((t_len, buffers[t_len].len() - 1), &buffers)?;
                    if plan.total_transform.approx_eq(t_des, cfg.position_tolerance, cfg.orientation_tolerance()) {
                        stats.buffer_sizes = buffers.iter().map(Vec::len).collect();
                        return Ok(Ok(PlanSuccess {
                            plan,
                            stats,
                            elapsed: start.elapsed(),
                        }));
                    }
                }
            }
        }
    }

    /// Refine, generate the path, and check it. Returns the accepted
    /// parameters with the refined contact.
    fn evaluate(&self, node: &PlanNode, mut params: SkillParams, tree: &KdTree, stats: &mut PlannerStats) -> Option<SkillParams> {
        if self.config.refine_contacts {
            let refined = refine_contact_with_index(&params.contact, tree);
            if refined.any_warning() {
                stats.refine_warnings += 1;
            }
            params.contact = refined.contact;
        }
        let path = match generate_path(params.skill, &params.contact, &params.subgoal, &self.config.path) {
            Ok(p) => p,
            Err(_) => {
                stats.path_errors += 1;
                return None;
            }
        };
        stats.feasibility_checks += 1;
        let supports: Vec<_> = self.scene.shelf.into_iter().collect();
        let report = check_motion(&path, &node.cloud.cloud, &params.subgoal, &self.scene.workspace, &supports);
        match report.failure {
            None => Some(params),
            Some(f) => {
                stats.feasibility.record(f, !report.stage1_passed);
                None
            }
        }
    }
}

/// Subgoals from the root down to `node`, in execution order.
fn ancestry_subgoals(buffers: &[Vec<PlanNode>], node: (usize, usize)) -> Vec<RigidTransform> {
    let mut out = Vec::new();
    let mut cursor = Some(node);
    while let Some((b, i)) = cursor {
        let n = &buffers[b][i];
        if n.parent.is_some() {
            out.push(n.subgoal);
        }
        cursor = n.parent;
    }
    out.reverse();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::scene::Cuboid;
    use nalgebra::UnitQuaternion;
    use rand::Rng;

    fn random_transform(rng: &mut ChaCha8Rng) -> RigidTransform {
        let axis = Vec3::new(rng.random(), rng.random(), rng.random::<f64>() + 0.1);
        RigidTransform::new(
            UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), rng.random_range(-3.0..3.0)),
            Vec3::new(rng.random(), rng.random(), rng.random()),
        )
    }

    #[test]
    fn skeleton_parsing() {
        let s: PlanSkeleton = "pgp".parse().unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.to_string(), "pgp");
        assert_eq!("pxq".parse::<PlanSkeleton>(), Err(SkeletonError::BadChar { ch: 'x', pos: 1 }));
        assert_eq!("".parse::<PlanSkeleton>(), Err(SkeletonError::Empty));
    }

    #[test]
    fn final_transform_closure() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t_des = random_transform(&mut rng);
        assert_eq!(required_final_transform(&[], &t_des), t_des);
        assert!(required_final_transform(&[t_des], &t_des).approx_eq(&RigidTransform::identity(), 1e-12, 1e-12));
        let ancestry: Vec<_> = (0..3).map(|_| random_transform(&mut rng)).collect();
        let last = required_final_transform(&ancestry, &t_des);
        let mut all = ancestry.clone();
        all.push(last);
        assert!(compose_in_order(&all).approx_eq(&t_des, 1e-9, 1e-9));
    }

    fn node(step: usize, parent: Option<(usize, usize)>, sub: RigidTransform, cloud: &SegmentedCloud) -> PlanNode {
        PlanNode {
            cloud: cloud.clone(),
            subgoal: sub,
            contact: ContactPose::default(),
            skill: (step > 0).then_some(SkillType::PullLeft),
            mask: None,
            parent,
            step,
        }
    }

    #[test]
    fn extraction_follows_parents_only() {
        let base = SegmentedCloud {
            cloud: PointCloud::from_points([[0.0, 0.0, 0.0], [0.1, 0.0, 0.0]]).unwrap(),
            planes: Vec::new().into(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut buffers: Vec<Vec<PlanNode>> = vec![vec![PlanNode::root(base.clone())], vec![], vec![], vec![]];
        // random tree with decoys
        for b in 1..4 {
            for _ in 0..6 {
                let parent = (b - 1, rng.random_range(0..buffers[b - 1].len()));
                let sub = RigidTransform::from_translation(Vec3::new(rng.random(), 0.0, 0.0));
                let cloud = buffers[parent.0][parent.1].cloud.transformed(&sub);
                buffers[b].push(node(b, Some(parent), sub, &cloud));
            }
        }
        let fin = (3, 4);
        let plan = extract_plan(fin, &buffers).unwrap();
        // independent ancestry oracle
        let mut expected = Vec::new();
        let mut cur = Some(fin);
        while let Some((b, i)) = cur {
            expected.push((b, i));
            cur = buffers[b][i].parent;
        }
        expected.reverse();
        assert_eq!(plan.params.len(), 3);
        for (k, &(b, i)) in expected[1..].iter().enumerate() {
            assert_eq!(plan.params[k].subgoal, buffers[b][i].subgoal);
        }
        for k in 0..3 {
            let next = plan.predicted_clouds[k].transformed(&plan.params[k].subgoal);
            for (a, b) in next.points().iter().zip(plan.predicted_clouds[k + 1].points()) {
                assert!((a - b).norm() < 1e-9);
            }
        }

        let mid = buffers[3][4].parent.unwrap().1;
        buffers[2][mid].parent = Some((1, 99));
        assert!(matches!(extract_plan(fin, &buffers), Err(PlannerError::CorruptTree(_))));
    }

    fn cube_observation() -> SegmentedCloud {
        let cub = Cuboid::new(Vec3::repeat(0.03), RigidTransform::from_translation(Vec3::new(0.0, -0.1, 0.03)));
        let mut pts = Vec::new();
        let mut normals = Vec::new();
        for f in cub.faces() {
            if f.index == 5 {
                continue;
            }
            for i in 0..8 {
                for j in 0..8 {
                    let a = -1.0 + 2.0 * (i as f64 + 0.5) / 8.0;
                    let b = -1.0 + 2.0 * (j as f64 + 0.5) / 8.0;
                    pts.push(f.center + f.u * a + f.v * b);
                    normals.push(f.normal);
                }
            }
        }
        SegmentedCloud {
            cloud: PointCloud::new(pts).unwrap().with_normals(normals).unwrap(),
            planes: Vec::new().into(),
        }
    }

    #[test]
    fn single_pull_closes_exactly() {
        let scene = Scene::tabletop();
        let sampler = crate::samplers::BaselineSampler::new(&scene);
        let cfg = PlannerConfig {
            time_budget: 20.0,
            ..Default::default()
        };
        let t_des = RigidTransform::new(
            UnitQuaternion::from_axis_angle(&Vec3::z_axis(), 0.4),
            Vec3::new(0.05, 0.02, 0.0),
        );
        let planner = Planner::new(&scene, &sampler, &cfg);
        let out = planner
            .plan_prepared(cube_observation(), &t_des, &"p".parse().unwrap())
            .unwrap()
            .expect("plan found");
        assert_eq!(out.plan.params.len(), 1);
        assert_eq!(out.plan.params[0].subgoal, t_des);
    }

    #[test]
    fn root_outside_precondition_fails_fast() {
        let scene = Scene::tabletop();
        let sampler = crate::samplers::BaselineSampler::new(&scene);
        let cfg = PlannerConfig::default();
        let far = cube_observation().transformed(&RigidTransform::from_translation(Vec3::new(2.0, 0.0, 0.0)));
        let out = Planner::new(&scene, &sampler, &cfg)
            .plan_prepared(far, &RigidTransform::identity(), &"g".parse().unwrap())
            .unwrap();
        assert_eq!(out.unwrap_err().reason, Exhaustion::Precondition);
    }
}
