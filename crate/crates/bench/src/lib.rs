//! Shared fixtures for the benchmarks.

use armoffset::dataset::NoticeabilityDataset;
use armoffset::fitting::{fit_model, FittedNoticeabilityModel};
use armoffset::harness::{default_catalog, simulate_study, SyntheticOracle};
use armoffset::pose::ArmPose;

pub fn study(participants: usize, seed: u64) -> NoticeabilityDataset {
    simulate_study(
        &SyntheticOracle::default(),
        &default_catalog().poses(),
        participants,
        seed,
    )
    .expect("simulation succeeds")
}

pub fn model() -> FittedNoticeabilityModel {
    fit_model(&study(12, 0)).expect("fit succeeds")
}

/// Deterministic spread of poses across the joint ranges.
pub fn pose_grid(n: usize) -> Vec<ArmPose> {
    (0..n)
        .map(|i| {
            let t = i as f64 / n.max(1) as f64;
            ArmPose::new(
                -170.0 + 340.0 * t,
                180.0 * ((7.0 * t).fract()),
                -90.0 + 180.0 * ((3.0 * t).fract()),
                150.0 * ((5.0 * t).fract()),
            )
            .expect("grid poses are valid")
        })
        .collect()
}

/// Linear reach from rest to `to` in `n` steps.
pub fn reach(to: ArmPose, n: usize) -> Vec<armoffset::amplification::PoseFrame> {
    (0..=n)
        .map(|i| {
            let t = i as f64 / n as f64;
            armoffset::amplification::PoseFrame {
                t,
                pose: ArmPose::from_array(to.to_array().map(|v| t * v)).expect("valid pose"),
            }
        })
        .collect()
}
