use armoffset::pose::ArmPose;
use armoffset_bench::{pose_grid, reach};

#[test]
fn pose_grid_is_valid_and_spread() {
    let poses = pose_grid(300);
    assert_eq!(poses.len(), 300);
    let phis: Vec<f64> = poses.iter().map(|p| p.phi_s).collect();
    assert!(phis.iter().copied().fold(f64::INFINITY, f64::min) < -160.0);
    assert!(phis.iter().copied().fold(f64::NEG_INFINITY, f64::max) > 160.0);
}

#[test]
fn reach_ends_at_target() {
    let to = ArmPose::new(80.0, 120.0, 20.0, 70.0).unwrap();
    let frames = reach(to, 10);
    assert_eq!(frames.len(), 11);
    assert_eq!(frames[0].pose, ArmPose::REST);
    assert_eq!(frames[10].pose, to);
    assert!(frames.windows(2).all(|w| w[0].t < w[1].t));
}
