//! Precondition checks, a geometric stand-in for motion feasibility, and
//! contact refinement against a dense cloud.

use serde::{Deserialize, Serialize};

use crate::analysis::KdTree;
use crate::geometry::{PointCloud, RigidTransform, Vec3};
use crate::scene::{Rect, Surface};
use crate::skills::{Arm, ContactPose, PalmPath, Phase, SkillType, Waypoint};

/// Reachable region of one arm: a sphere around the shoulder intersected with
/// an axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmReach {
    pub shoulder: Vec3,
    pub radius: f64,
    pub box_min: Vec3,
    pub box_max: Vec3,
}

impl ArmReach {
    pub fn contains(&self, p: &Vec3) -> bool {
        (p - self.shoulder).norm() <= self.radius
            && (0..3).all(|a| p[a] >= self.box_min[a] && p[a] <= self.box_max[a])
    }

    /// Whether the region reaches some point above `rect` within the box's
    /// height range.
    fn reaches_over(&self, rect: &Rect) -> bool {
        let clamp = |v: f64, lo: f64, hi: f64| v.max(lo).min(hi);
        let lo = Vec3::new(
            rect.x_min.max(self.box_min.x),
            rect.y_min.max(self.box_min.y),
            self.box_min.z,
        );
        let hi = Vec3::new(
            rect.x_max.min(self.box_max.x),
            rect.y_max.min(self.box_max.y),
            self.box_max.z,
        );
        if (0..3).any(|a| lo[a] > hi[a]) {
            return false;
        }
        let nearest = Vec3::new(
            clamp(self.shoulder.x, lo.x, hi.x),
            clamp(self.shoulder.y, lo.y, hi.y),
            clamp(self.shoulder.z, lo.z, hi.z),
        );
        (nearest - self.shoulder).norm() <= self.radius
    }
}

/// Per-skill rectangles the object centroid must occupy before the skill is
/// attempted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreconditionRegions {
    pub pull: Rect,
    pub push: Rect,
    pub grasp_reorient: Rect,
    pub pick_place: Rect,
}

impl PreconditionRegions {
    pub fn for_skill(&self, skill: SkillType) -> &Rect {
        match skill {
            SkillType::PullLeft | SkillType::PullRight => &self.pull,
            SkillType::PushLeft | SkillType::PushRight => &self.push,
            SkillType::GraspReorient => &self.grasp_reorient,
            SkillType::PickPlace => &self.pick_place,
        }
    }

    fn all(&self) -> [(&'static str, &Rect); 4] {
        [
            ("pull", &self.pull),
            ("push", &self.push),
            ("grasp_reorient", &self.grasp_reorient),
            ("pick_place", &self.pick_place),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkspaceModel {
    pub table: Surface,
    pub left: ArmReach,
    pub right: ArmReach,
    /// Half extents of the rectangular palm patch along palm x (front) and
    /// palm y, meters.
    pub palm_half_extents: [f64; 2],
    pub regions: PreconditionRegions,
    /// Allowed penetration into the table, meters.
    #[serde(default = "default_penetration_tolerance")]
    pub penetration_tolerance: f64,
}

fn default_penetration_tolerance() -> f64 {
    0.002
}

/// Palm patches are modeled as thin boxes of this half thickness when
/// checking palm-palm overlap.
const PALM_HALF_THICKNESS: f64 = 0.005;

impl WorkspaceModel {
    /// Default bimanual layout: the robot stands at the −y edge of the table.
    pub fn for_table(table: &Surface) -> Self {
        let (cx, cy) = table.rect.center();
        let h = table.height;
        let arm = |x: f64| ArmReach {
            shoulder: Vec3::new(cx + x, cy - 0.40, h + 0.30),
            radius: 0.65,
            box_min: Vec3::new(cx - 0.7, cy - 0.6, h),
            box_max: Vec3::new(cx + 0.7, cy + 0.6, h + 0.6),
        };
        Self {
            table: *table,
            left: arm(-0.15),
            right: arm(0.15),
            palm_half_extents: [0.025, 0.0125],
            regions: PreconditionRegions {
                pull: table.rect,
                push: table.rect,
                grasp_reorient: Rect::centered(cx, cy - 0.10, 0.40, 0.30),
                pick_place: Rect::centered(cx, cy - 0.10, 0.40, 0.30),
            },
            penetration_tolerance: default_penetration_tolerance(),
        }
    }

    pub fn arm(&self, arm: Arm) -> &ArmReach {
        match arm {
            Arm::Left => &self.left,
            Arm::Right => &self.right,
        }
    }

    /// Arm whose shoulder stays closest to a palm moving from `start` to
    /// `end`.
    pub fn arm_for(&self, start: &Vec3, end: &Vec3) -> Arm {
        let reach = |s: &Vec3| (start - s).norm().max((end - s).norm());
        if reach(&self.left.shoulder) <= reach(&self.right.shoulder) {
            Arm::Left
        } else {
            Arm::Right
        }
    }

    /// Assigns two palms to the arms with the smaller total shoulder
    /// distance.
    pub fn assign_bimanual(&self, a: RigidTransform, b: RigidTransform) -> ContactPose {
        let cost = |l: &RigidTransform, r: &RigidTransform| {
            (l.translation() - self.left.shoulder).norm() + (r.translation() - self.right.shoulder).norm()
        };
        if cost(&a, &b) <= cost(&b, &a) {
            ContactPose::bimanual(a, b)
        } else {
            ContactPose::bimanual(b, a)
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.palm_half_extents[0] > 0.0 && self.palm_half_extents[1] > 0.0) {
            return Err("palm half extents must be positive".into());
        }
        if !(self.left.radius > 0.0 && self.right.radius > 0.0) {
            return Err("reach radii must be positive".into());
        }
        if !(self.penetration_tolerance >= 0.0) {
            return Err("penetration tolerance must be non-negative".into());
        }
        for (name, r) in self.regions.all() {
            if r.is_empty() || !self.table.rect.contains_rect(r) {
                return Err(format!("precondition region '{name}' must lie within the table"));
            }
        }
        for (name, reach) in [("left", &self.left), ("right", &self.right)] {
            if !reach.reaches_over(&self.regions.grasp_reorient) {
                return Err(format!(
                    "{name} arm cannot reach the grasp_reorient precondition region"
                ));
            }
        }
        Ok(())
    }

    /// World corners of the palm patch at `pose`.
    pub fn palm_corners(&self, pose: &RigidTransform) -> [Vec3; 4] {
        let [hx, hy] = self.palm_half_extents;
        [(hx, hy), (hx, -hy), (-hx, hy), (-hx, -hy)]
            .map(|(x, y)| pose.transform_point(&Vec3::new(x, y, 0.0)))
    }

    fn palm_ok(&self, arm: Arm, pose: &RigidTransform) -> Result<(), Infeasibility> {
        let floor = self.table.height - self.penetration_tolerance;
        if self.palm_corners(pose).iter().any(|c| c.z < floor) {
            return Err(Infeasibility::PalmTablePenetration);
        }
        if !self.arm(arm).contains(pose.translation()) {
            return Err(Infeasibility::Unreachable(arm));
        }
        Ok(())
    }

    fn waypoint_ok(&self, w: &Waypoint) -> Result<(), Infeasibility> {
        for (arm, pose) in w.palms() {
            self.palm_ok(arm, pose)?;
        }
        Ok(())
    }

    fn palms_overlap(&self, a: &RigidTransform, b: &RigidTransform) -> bool {
        let h = Vec3::new(self.palm_half_extents[0], self.palm_half_extents[1], PALM_HALF_THICKNESS);
        obb_overlap(a, &h, b, &h)
    }
}

/// Separating-axis test between two oriented boxes.
fn obb_overlap(a: &RigidTransform, ha: &Vec3, b: &RigidTransform, hb: &Vec3) -> bool {
    let ra = a.rotation_matrix();
    let rb = b.rotation_matrix();
    let d = b.translation() - a.translation();
    let axes_a: [Vec3; 3] = std::array::from_fn(|i| ra.column(i).into_owned());
    let axes_b: [Vec3; 3] = std::array::from_fn(|i| rb.column(i).into_owned());
    let mut axes: Vec<Vec3> = axes_a.iter().chain(axes_b.iter()).copied().collect();
    for u in &axes_a {
        for v in &axes_b {
            let c = u.cross(v);
            if c.norm() > 1e-9 {
                axes.push(c.normalize());
            }
        }
    }
    axes.iter().all(|axis| {
        let pa: f64 = (0..3).map(|i| ha[i] * axes_a[i].dot(axis).abs()).sum();
        let pb: f64 = (0..3).map(|i| hb[i] * axes_b[i].dot(axis).abs()).sum();
        d.dot(axis).abs() <= pa + pb
    })
}

/// Whether the object may attempt `skill` from its current cloud.
pub fn satisfies_preconditions(skill: SkillType, cloud: &PointCloud, ws: &WorkspaceModel) -> bool {
    let c = cloud.centroid();
    ws.regions.for_skill(skill).contains(c.x, c.y)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Infeasibility {
    PalmTablePenetration,
    Unreachable(Arm),
    PalmCollision,
    ObjectTablePenetration,
    Unsupported,
    EmptyPath,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub stage1_passed: bool,
    /// `None` when stage 2 did not run.
    pub stage2_passed: Option<bool>,
    pub failure: Option<Infeasibility>,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.failure.is_none()
    }
}

pub fn feasible_motion(
    path: &PalmPath,
    object_cloud: &PointCloud,
    subgoal: &RigidTransform,
    ws: &WorkspaceModel,
) -> bool {
    check_motion(path, object_cloud, subgoal, ws, &[]).feasible()
}

/// Two-stage feasibility: a cheap check at the start and end of contact,
/// then the full sweep. Objects may rest on the table or on any of
/// `extra_supports`.
pub fn check_motion(
    path: &PalmPath,
    object_cloud: &PointCloud,
    subgoal: &RigidTransform,
    ws: &WorkspaceModel,
    extra_supports: &[Surface],
) -> FeasibilityReport {
    let fail1 = |f| FeasibilityReport {
        stage1_passed: false,
        stage2_passed: None,
        failure: Some(f),
    };
    let contact = path.waypoints.iter().find(|w| w.phase == Phase::Contact);
    let last = path.waypoints.iter().rev().find(|w| w.phase == Phase::Transport);
    let (Some(contact), Some(last)) = (contact, last) else {
        return fail1(Infeasibility::EmptyPath);
    };
    for w in [contact, last] {
        if let Err(f) = ws.waypoint_ok(w) {
            return fail1(f);
        }
    }

    let fail2 = |f| FeasibilityReport {
        stage1_passed: true,
        stage2_passed: Some(false),
        failure: Some(f),
    };
    for w in &path.waypoints {
        if let Err(f) = ws.waypoint_ok(w) {
            return fail2(f);
        }
        if let (Some(l), Some(r)) = (&w.left, &w.right) {
            if ws.palms_overlap(l, r) {
                return fail2(Infeasibility::PalmCollision);
            }
        }
    }
    let floor = ws.table.height - ws.penetration_tolerance;
    let supported = |c: &Vec3| {
        ws.table.rect.contains(c.x, c.y) || extra_supports.iter().any(|s| s.rect.contains(c.x, c.y))
    };
    for w in path.phase(Phase::Transport) {
        let motion = subgoal.interpolate_screw(w.fraction);
        let mut min_z = f64::INFINITY;
        let mut sum = Vec3::zeros();
        for p in object_cloud.points() {
            let q = motion.transform_point(p);
            min_z = min_z.min(q.z);
            sum += q;
        }
        if min_z < floor {
            return fail2(Infeasibility::ObjectTablePenetration);
        }
        if !supported(&(sum / object_cloud.len() as f64)) {
            return fail2(Infeasibility::Unsupported);
        }
    }
    FeasibilityReport {
        stage1_passed: true,
        stage2_passed: Some(true),
        failure: None,
    }
}

pub const REFINE_STEP: f64 = 0.001;
pub const REFINE_RANGE: f64 = 0.03;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefinedContact {
    pub contact: ContactPose,
    /// Set per palm when no cloud point was within range of its ray; that
    /// palm was left unchanged.
    pub left_warning: bool,
    pub right_warning: bool,
}

impl RefinedContact {
    pub fn any_warning(&self) -> bool {
        self.left_warning || self.right_warning
    }
}

/// Snaps each palm position onto the dense cloud by searching along the palm
/// normal. Orientations are left untouched.
pub fn refine_contact(contact: &ContactPose, dense_cloud: &PointCloud) -> RefinedContact {
    refine_contact_with_index(contact, &KdTree::build(dense_cloud.points()))
}

pub fn refine_contact_with_index(contact: &ContactPose, tree: &KdTree) -> RefinedContact {
    let steps = (REFINE_RANGE / REFINE_STEP).round() as i64;
    let refine = |pose: &RigidTransform| -> Option<RigidTransform> {
        let origin = *pose.translation();
        let normal = pose.transform_vector(&Vec3::z());
        let mut best: Option<(f64, usize)> = None;
        // offsets in order of increasing magnitude so ties favour small moves
        for k in 0..=steps {
            for s in if k == 0 { vec![0] } else { vec![-k, k] } {
                let sample = origin + normal * (s as f64 * REFINE_STEP);
                if let Some((j, d2)) = tree.nearest(&sample) {
                    if best.is_none_or(|(bd, _)| d2 < bd) {
                        best = Some((d2, j));
                    }
                }
            }
        }
        let (d2, j) = best?;
        if d2.sqrt() > REFINE_RANGE {
            return None;
        }
        Some(RigidTransform::new(*pose.rotation(), tree.points()[j]))
    };
    let mut out = RefinedContact {
        contact: *contact,
        left_warning: false,
        right_warning: false,
    };
    if let Some(l) = &contact.left {
        match refine(l) {
            Some(p) => out.contact.left = Some(p),
            None => out.left_warning = true,
        }
    }
    if let Some(r) = &contact.right {
        match refine(r) {
            Some(p) => out.contact.right = Some(p),
            None => out.right_warning = true,
        }
    }
    out
}
