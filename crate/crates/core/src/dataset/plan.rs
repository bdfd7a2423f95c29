use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Phase;
use crate::error::{Error, Result};
use crate::pose::{ArmPose, CompositeOffset, JointOffset2D};

/// Single-axis offsets of the strength sweep: -15..=15 in steps of 3.
pub const PHASE1_OFFSETS: [f64; 11] = [
    -15.0, -12.0, -9.0, -6.0, -3.0, 0.0, 3.0, 6.0, 9.0, 12.0, 15.0,
];
/// Circle radii of the direction sweep.
pub const PHASE2_RADII: [f64; 5] = [12.0, 15.0, 18.0, 21.0, 24.0];
/// Directions per circle in the direction sweep (15 degree spacing).
pub const PHASE2_DIRECTIONS: usize = 24;
/// Elbow circle radii of the composite sweep.
pub const PHASE3_RADII: [f64; 4] = [9.0, 15.0, 21.0, 24.0];
/// Elbow directions per circle in the composite sweep.
pub const PHASE3_ELBOW_DIRECTIONS: usize = 8;
/// Shoulder offsets per pose in the composite sweep (45 degree spacing).
pub const PHASE3_SHOULDER_DIRECTIONS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanTask {
    pub pose_index: usize,
    pub offset: CompositeOffset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub phase: Phase,
    pub tasks: Vec<PlanTask>,
}

impl SamplingPlan {
    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    fn shuffled(phase: Phase, mut tasks: Vec<PlanTask>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        tasks.shuffle(&mut rng);
        SamplingPlan { phase, tasks }
    }
}

/// 2D offset of strength `radius` in direction `deg` (0 = +phi, 90 = +theta).
/// Components that are zero up to rounding are snapped to exactly zero.
pub fn polar_offset(radius: f64, deg: f64) -> JointOffset2D {
    let (s, c) = deg.to_radians().sin_cos();
    let snap = |v: f64| if v.abs() < 1e-12 { 0.0 } else { v };
    JointOffset2D::new(radius * snap(c), radius * snap(s))
}

fn require_poses(poses: &[ArmPose]) -> Result<()> {
    if poses.is_empty() {
        return Err(Error::invalid("sampling plan needs at least one pose"));
    }
    poses.iter().try_for_each(ArmPose::validate)
}

/// Strength sweep: every pose, each of the four axes alone, eleven values.
pub fn phase1_plan(poses: &[ArmPose], seed: u64) -> Result<SamplingPlan> {
    require_poses(poses)?;
    let mut tasks = Vec::with_capacity(poses.len() * 44);
    for pose_index in 0..poses.len() {
        for axis in 0..4 {
            for &v in &PHASE1_OFFSETS {
                let mut a = [0.0; 4];
                a[axis] = v;
                tasks.push(PlanTask {
                    pose_index,
                    offset: CompositeOffset::from_array(a),
                });
            }
        }
    }
    Ok(SamplingPlan::shuffled(Phase::P1, tasks, seed))
}

/// Direction sweep: every pose, each joint alone, 24 directions on 5 circles.
pub fn phase2_plan(poses: &[ArmPose], seed: u64) -> Result<SamplingPlan> {
    require_poses(poses)?;
    let mut tasks = Vec::with_capacity(poses.len() * 240);
    for pose_index in 0..poses.len() {
        for shoulder in [true, false] {
            for &r in &PHASE2_RADII {
                for d in 0..PHASE2_DIRECTIONS {
                    let o = polar_offset(r, d as f64 * 15.0);
                    let offset = if shoulder {
                        CompositeOffset::new(o, JointOffset2D::ZERO)
                    } else {
                        CompositeOffset::new(JointOffset2D::ZERO, o)
                    };
                    tasks.push(PlanTask { pose_index, offset });
                }
            }
        }
    }
    Ok(SamplingPlan::shuffled(Phase::P2, tasks, seed))
}

/// Composite sweep. For each pose and each of its eight shoulder offsets `s`,
/// elbow offsets lie on four circles centered at `-s` with eight directions
/// each.
pub fn phase3_plan(
    poses: &[ArmPose],
    shoulder_offsets: &[Vec<JointOffset2D>],
    seed: u64,
) -> Result<SamplingPlan> {
    require_poses(poses)?;
    if shoulder_offsets.len() != poses.len() {
        return Err(Error::invalid(format!(
            "need one shoulder-offset list per pose: {} poses, {} lists",
            poses.len(),
            shoulder_offsets.len()
        )));
    }
    let mut tasks = Vec::with_capacity(poses.len() * 256);
    for (pose_index, list) in shoulder_offsets.iter().enumerate() {
        if list.len() != PHASE3_SHOULDER_DIRECTIONS {
            return Err(Error::invalid(format!(
                "pose {pose_index}: expected {PHASE3_SHOULDER_DIRECTIONS} shoulder offsets, got {}",
                list.len()
            )));
        }
        for s in list {
            if !s.is_finite() {
                return Err(Error::invalid("shoulder offset must be finite"));
            }
            for &r in &PHASE3_RADII {
                for d in 0..PHASE3_ELBOW_DIRECTIONS {
                    let e = -*s + polar_offset(r, d as f64 * 45.0);
                    tasks.push(PlanTask {
                        pose_index,
                        offset: CompositeOffset::new(*s, e),
                    });
                }
            }
        }
    }
    Ok(SamplingPlan::shuffled(Phase::P3, tasks, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poses(n: usize) -> Vec<ArmPose> {
        (0..n)
            .map(|i| ArmPose::new(10.0 * i as f64, 20.0 + 5.0 * i as f64, 0.0, 30.0).unwrap())
            .collect()
    }

    fn shoulder_ring(r: f64) -> Vec<JointOffset2D> {
        (0..8).map(|d| polar_offset(r, d as f64 * 45.0)).collect()
    }

    fn sorted_keys(plan: &SamplingPlan) -> Vec<(usize, [i64; 4])> {
        let mut k: Vec<_> = plan
            .tasks
            .iter()
            .map(|t| {
                (
                    t.pose_index,
                    t.offset.to_array().map(|v| (v * 1e9).round() as i64),
                )
            })
            .collect();
        k.sort();
        k
    }

    #[test]
    fn task_counts() {
        assert_eq!(phase1_plan(&poses(10), 0).unwrap().len(), 440);
        assert_eq!(phase1_plan(&poses(1), 0).unwrap().len(), 44);
        assert_eq!(phase2_plan(&poses(4), 0).unwrap().len(), 960);
        assert_eq!(phase2_plan(&poses(1), 0).unwrap().len(), 240);
        let rings = vec![shoulder_ring(7.0); 4];
        assert_eq!(phase3_plan(&poses(4), &rings, 0).unwrap().len(), 1024);
        assert_eq!(phase3_plan(&poses(1), &rings[..1], 0).unwrap().len(), 256);
    }

    #[test]
    fn phase2_shoulder_only_block() {
        let plan = phase2_plan(&poses(1), 3).unwrap();
        let shoulder: Vec<_> = plan
            .tasks
            .iter()
            .filter(|t| t.offset.elbow.is_zero())
            .collect();
        assert_eq!(shoulder.len(), 120);
        assert_eq!(polar_offset(12.0, 0.0), JointOffset2D::new(12.0, 0.0));
        assert_eq!(polar_offset(12.0, 90.0), JointOffset2D::new(0.0, 12.0));
        assert!(shoulder
            .iter()
            .any(|t| t.offset.shoulder == JointOffset2D::new(12.0, 0.0)));
    }

    #[test]
    fn determinism_and_permutation() {
        let p = poses(3);
        let a = phase1_plan(&p, 7).unwrap();
        let b = phase1_plan(&p, 7).unwrap();
        let c = phase1_plan(&p, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.tasks, c.tasks);
        assert_eq!(sorted_keys(&a), sorted_keys(&c));

        let a = phase2_plan(&p, 1).unwrap();
        let c = phase2_plan(&p, 2).unwrap();
        assert_eq!(sorted_keys(&a), sorted_keys(&c));
    }

    #[test]
    fn touch_patterns() {
        let p = poses(2);
        for t in &phase1_plan(&p, 0).unwrap().tasks {
            let nonzero = t.offset.to_array().iter().filter(|v| **v != 0.0).count();
            assert!(nonzero <= 1);
        }
        for t in &phase2_plan(&p, 0).unwrap().tasks {
            assert!(t.offset.shoulder.is_zero() ^ t.offset.elbow.is_zero());
        }
        let rings = vec![shoulder_ring(7.0); 2];
        for t in &phase3_plan(&p, &rings, 0).unwrap().tasks {
            assert!(!t.offset.shoulder.is_zero());
            assert!(!t.offset.elbow.is_zero());
        }
    }

    #[test]
    fn phase3_circles_centered_opposite_shoulder() {
        let ring = vec![vec![JointOffset2D::new(10.0, 0.0); 8]];
        let plan = phase3_plan(&poses(1), &ring, 0).unwrap();
        let mut sum = JointOffset2D::ZERO;
        for t in &plan.tasks {
            sum = sum + t.offset.elbow;
            let rel = t.offset.elbow + t.offset.shoulder;
            let r = rel.magnitude();
            assert!(PHASE3_RADII.iter().any(|x| (x - r).abs() < 1e-9));
        }
        let n = plan.len() as f64;
        assert!((sum.d_phi / n + 10.0).abs() < 1e-9);
        assert!((sum.d_theta / n).abs() < 1e-9);
    }

    #[test]
    fn phase3_rejects_wrong_offset_count() {
        let ring = vec![shoulder_ring(7.0)[..7].to_vec()];
        assert!(phase3_plan(&poses(1), &ring, 0).is_err());
        assert!(phase3_plan(&poses(2), &[shoulder_ring(7.0)], 0).is_err());
        assert!(phase1_plan(&[], 0).is_err());
    }
}
