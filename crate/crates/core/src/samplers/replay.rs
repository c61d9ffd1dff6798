use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{SegmentedCloud, SkillParams, SkillSampler, SamplerError};
use crate::geometry::RigidTransform;
use crate::scene::Scene;
use crate::skills::{ContactPose, SkillType};

/// One recorded skill invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayRecord {
    pub skill: SkillType,
    pub subgoal: RigidTransform,
    pub contact: ContactPose,
    pub mask_indices: Vec<usize>,
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn pose_field(field: &str) -> Result<Option<RigidTransform>, String> {
    let field = field.trim();
    if field == "-" {
        return Ok(None);
    }
    let nums: Vec<f64> = field
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| format!("bad number '{t}': {e}")))
        .collect::<Result<_, _>>()?;
    let arr: [f64; 7] = nums
        .try_into()
        .map_err(|v: Vec<f64>| format!("expected 7 numbers, got {}", v.len()))?;
    RigidTransform::from_array(arr).map(Some).map_err(|e| e.to_string())
}

/// Parses the line format
/// `skill ; tx ty tz qw qx qy qz ; left pose | - ; right pose | - ; mask indices`.
/// Blank lines and `#` comments are skipped; the mask field may be omitted.
pub fn parse_replay(text: &str) -> Result<Vec<ReplayRecord>, ReplayError> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| ReplayError::Parse { line: k + 1, message };
        let fields: Vec<&str> = line.split(';').collect();
        if !(4..=5).contains(&fields.len()) {
            return Err(err(format!("expected 4 or 5 ';'-separated fields, got {}", fields.len())));
        }
        let skill: SkillType = fields[0].trim().parse().map_err(err)?;
        let subgoal = pose_field(fields[1])
            .map_err(err)?
            .ok_or_else(|| err("subgoal cannot be '-'".into()))?;
        let contact = ContactPose {
            left: pose_field(fields[2]).map_err(err)?,
            right: pose_field(fields[3]).map_err(err)?,
        };
        contact.check_arity(skill).map_err(|e| err(e.to_string()))?;
        let mask_indices = match fields.get(4) {
            Some(f) => f
                .split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|e| err(format!("bad index '{t}': {e}"))))
                .collect::<Result<_, _>>()?,
            None => Vec::new(),
        };
        out.push(ReplayRecord {
            skill,
            subgoal,
            contact,
            mask_indices,
        });
    }
    Ok(out)
}

fn fmt_pose(pose: Option<&RigidTransform>) -> String {
    match pose {
        None => "-".into(),
        Some(p) => p.to_array().iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" "),
    }
}

/// One line of the replay format, without the trailing newline.
pub fn write_replay_record(rec: &ReplayRecord) -> String {
    let mut s = format!(
        "{} ; {} ; {} ; {} ;",
        rec.skill,
        fmt_pose(Some(&rec.subgoal)),
        fmt_pose(rec.contact.left.as_ref()),
        fmt_pose(rec.contact.right.as_ref()),
    );
    for i in &rec.mask_indices {
        let _ = write!(s, " {i}");
    }
    s
}

/// Replays recorded parameters, choosing uniformly (by seed) among the
/// records of the requested skill family.
#[derive(Clone, Debug, Default)]
pub struct ReplaySampler {
    records: Vec<ReplayRecord>,
}

impl ReplaySampler {
    pub fn new(records: Vec<ReplayRecord>) -> Self {
        Self { records }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ReplayError> {
        Ok(Self::new(parse_replay(&std::fs::read_to_string(path)?)?))
    }

    pub fn records(&self) -> &[ReplayRecord] {
        &self.records
    }

    fn pick(&self, skill: SkillType, seed: u64) -> Result<&ReplayRecord, SamplerError> {
        let matching: Vec<&ReplayRecord> = self.records.iter().filter(|r| r.skill.same_family(skill)).collect();
        if matching.is_empty() {
            return Err(SamplerError::NoRecord(skill));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(matching[rng.random_range(0..matching.len())])
    }
}

impl SkillSampler for ReplaySampler {
    fn draw(&self, skill: SkillType, cloud: &SegmentedCloud, _scene: &Scene, seed: u64) -> Result<SkillParams, SamplerError> {
        let rec = self.pick(skill, seed)?;
        let mask = (!rec.mask_indices.is_empty()).then(|| {
            let mut m = vec![false; cloud.cloud.len()];
            let n = m.len();
            for &i in rec.mask_indices.iter().filter(|&&i| i < n) {
                m[i] = true;
            }
            m
        });
        Ok(SkillParams {
            skill: rec.skill,
            subgoal: rec.subgoal,
            contact: rec.contact,
            mask,
        })
    }

    fn draw_contact(
        &self,
        skill: SkillType,
        _cloud: &SegmentedCloud,
        _scene: &Scene,
        _subgoal: &RigidTransform,
        seed: u64,
    ) -> Result<(SkillType, ContactPose), SamplerError> {
        let rec = self.pick(skill, seed)?;
        Ok((rec.skill, rec.contact))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::skills::{palm_pose, Arm};

    fn sample_records() -> Vec<ReplayRecord> {
        let palm = palm_pose(&-Vec3::z(), &Vec3::x(), &Vec3::new(0.0, -0.1, 0.06));
        vec![
            ReplayRecord {
                skill: SkillType::PullLeft,
                subgoal: RigidTransform::from_translation(Vec3::new(0.1, 0.0, 0.0)),
                contact: ContactPose::single(Arm::Left, palm),
                mask_indices: vec![],
            },
            ReplayRecord {
                skill: SkillType::GraspReorient,
                subgoal: RigidTransform::rotation_about(&Vec3::y(), 1.2, &Vec3::new(0.0, 0.0, 0.03)),
                contact: ContactPose::bimanual(
                    palm_pose(&Vec3::x(), &-Vec3::z(), &Vec3::new(-0.03, 0.0, 0.03)),
                    palm_pose(&-Vec3::x(), &-Vec3::z(), &Vec3::new(0.03, 0.0, 0.03)),
                ),
                mask_indices: vec![1, 5, 9],
            },
        ]
    }

    #[test]
    fn round_trip() {
        let recs = sample_records();
        let text: String = std::iter::once("# recorded\n".to_string())
            .chain(recs.iter().map(|r| write_replay_record(r) + "\n"))
            .collect();
        assert_eq!(parse_replay(&text).unwrap(), recs);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let bad = "pull_left ; 0 0 0 1 0 0 0 ; - ; - ;\n";
        let e = parse_replay(bad).unwrap_err().to_string();
        assert!(e.starts_with("line 1"), "{e}");
        let bad = "\nfly ; 0 0 0 1 0 0 0 ; - ; - ;\n";
        assert!(parse_replay(bad).unwrap_err().to_string().contains("line 2"));
    }

    #[test]
    fn draws_by_family() {
        let s = ReplaySampler::new(sample_records());
        let seg = SegmentedCloud {
            cloud: crate::geometry::PointCloud::from_points((0..12).map(|i| [i as f64, 0.0, 0.0])).unwrap(),
            planes: Vec::new().into(),
        };
        let scene = Scene::tabletop();
        let p = s.draw(SkillType::PullRight, &seg, &scene, 0).unwrap();
        assert_eq!(p.skill, SkillType::PullLeft);
        let g = s.draw(SkillType::GraspReorient, &seg, &scene, 4).unwrap();
        assert_eq!(g.mask.unwrap().iter().filter(|&&m| m).count(), 3);
        assert_eq!(s.draw(SkillType::PushLeft, &seg, &scene, 0), Err(SamplerError::NoRecord(SkillType::PushLeft)));
    }
}
