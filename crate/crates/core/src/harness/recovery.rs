use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::oracle::SyntheticOracle;
use super::study::StudyCells;
use crate::dataset::{polar_offset, NoticeabilityDataset, ProbabilityCell, PHASE2_DIRECTIONS};
use crate::error::{Error, Result};
use crate::fitting::{fit_model_from_cells, FittedNoticeabilityModel, ResolvedJoint, Sign};
use crate::pose::{ArmPose, Axis, Joint, JointOffset2D};

/// Level at which fitted and true offsets are compared.
pub const RECOVERY_LEVEL: f64 = 0.5;

const SHIFT_SEARCH_HALF_WIDTH: f64 = 10.0;
const SHIFT_GRID_STEP: f64 = 1.0;
const SHIFT_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRecovery {
    pub pose_index: usize,
    pub joint: Joint,
    pub axis: Axis,
    pub sign: Sign,
    pub fitted: f64,
    pub truth: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseRecovery {
    pub pose_index: usize,
    pub joint: Joint,
    /// Mean boundary-radius error over the sampled directions.
    pub mean_error: f64,
    pub max_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftRecovery {
    pub pose_index: usize,
    pub shoulder: JointOffset2D,
    pub fitted_center: JointOffset2D,
    pub expected_center: JointOffset2D,
    pub error: f64,
}

/// Errors of a fitted model against the oracle that generated its data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub axes: Vec<AxisRecovery>,
    pub ellipses: Vec<EllipseRecovery>,
    pub shifts: Vec<ShiftRecovery>,
    /// Root-mean-square error of the fitted model on direction-sweep cells.
    pub direction_rmse: f64,
    pub trials: [usize; 3],
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

impl RecoveryReport {
    pub fn mean_axis_error(&self) -> f64 {
        mean(self.axes.iter().map(|a| a.error))
    }

    pub fn max_axis_error(&self) -> f64 {
        self.axes.iter().map(|a| a.error).fold(0.0, f64::max)
    }

    pub fn mean_ellipse_error(&self) -> f64 {
        mean(self.ellipses.iter().map(|e| e.mean_error))
    }

    pub fn max_ellipse_error(&self) -> f64 {
        self.ellipses
            .iter()
            .map(|e| e.max_error)
            .fold(0.0, f64::max)
    }

    pub fn mean_shift_error(&self) -> f64 {
        mean(self.shifts.iter().map(|s| s.error))
    }

    pub fn max_shift_error(&self) -> f64 {
        self.shifts.iter().map(|s| s.error).fold(0.0, f64::max)
    }
}

pub fn evaluate_recovery(
    dataset: &NoticeabilityDataset,
    oracle: &SyntheticOracle,
) -> Result<RecoveryReport> {
    evaluate_recovery_cells(&StudyCells::from_dataset(dataset), oracle)
}

pub fn evaluate_recovery_cells(
    cells: &StudyCells,
    oracle: &SyntheticOracle,
) -> Result<RecoveryReport> {
    oracle.validate()?;
    let model = fit_model_from_cells(&cells.catalog, &cells.phase1)?;
    let pose_of = |i: usize| {
        cells
            .catalog
            .get(i)
            .copied()
            .ok_or_else(|| Error::invalid(format!("cell pose index {i} outside the catalog")))
    };

    let mut axes = Vec::new();
    for curves in model.poses() {
        let pose_index = cells
            .catalog
            .iter()
            .position(|p| *p == curves.pose)
            .expect("model poses come from the catalog");
        for joint in Joint::ALL {
            for axis in Axis::ALL {
                let truth = oracle.level(joint, axis, &curves.pose, RECOVERY_LEVEL)?;
                let (neg, pos) = curves.joint(joint).axis(axis).semi_axes(RECOVERY_LEVEL);
                for (sign, fitted) in [(Sign::Neg, neg), (Sign::Pos, pos)] {
                    axes.push(AxisRecovery {
                        pose_index,
                        joint,
                        axis,
                        sign,
                        fitted,
                        truth,
                        error: (fitted - truth).abs(),
                    });
                }
            }
        }
    }

    let mut sweep: Vec<usize> = cells.phase2.iter().map(|c| c.pose_index).collect();
    sweep.sort_unstable();
    sweep.dedup();
    let mut ellipses = Vec::new();
    for &pose_index in &sweep {
        let pose = pose_of(pose_index)?;
        let resolved = model.resolve(&pose)?;
        for joint in Joint::ALL {
            let fitted = resolved.joint(joint).axes(RECOVERY_LEVEL);
            let truth = oracle.level_axes(joint, &pose, RECOVERY_LEVEL)?;
            let mut errors = Vec::with_capacity(PHASE2_DIRECTIONS);
            for d in 0..PHASE2_DIRECTIONS {
                let dir = polar_offset(1.0, d as f64 * 360.0 / PHASE2_DIRECTIONS as f64);
                let f = fitted.ray_boundary(dir.d_phi, dir.d_theta)?.magnitude();
                let t = truth.ray_boundary(dir.d_phi, dir.d_theta)?.magnitude();
                errors.push((f - t).abs());
            }
            ellipses.push(EllipseRecovery {
                pose_index,
                joint,
                mean_error: mean(errors.iter().copied()),
                max_error: errors.iter().copied().fold(0.0, f64::max),
            });
        }
    }

    let direction_rmse = direction_rmse(&model, cells)?;

    let mut groups: BTreeMap<(usize, [i64; 2]), Vec<&ProbabilityCell>> = BTreeMap::new();
    for c in &cells.phase3 {
        if c.offset.shoulder.is_zero() || c.offset.elbow.is_zero() {
            continue;
        }
        let key =
            [c.offset.shoulder.d_phi, c.offset.shoulder.d_theta].map(|v| (v * 1e6).round() as i64);
        groups.entry((c.pose_index, key)).or_default().push(c);
    }
    let mut shifts = Vec::with_capacity(groups.len());
    for ((pose_index, _), group) in groups {
        let resolved = model.resolve(&pose_of(pose_index)?)?;
        let shoulder = group[0].offset.shoulder;
        let fitted_center = fit_shift_center(&resolved.elbow, &group);
        let expected_center = -shoulder;
        shifts.push(ShiftRecovery {
            pose_index,
            shoulder,
            fitted_center,
            expected_center,
            error: (fitted_center - expected_center).magnitude(),
        });
    }

    Ok(RecoveryReport {
        axes,
        ellipses,
        shifts,
        direction_rmse,
        trials: cells.trial_counts(),
    })
}

fn direction_rmse(model: &FittedNoticeabilityModel, cells: &StudyCells) -> Result<f64> {
    let (mut sse, mut n) = (0.0, 0usize);
    for c in &cells.phase2 {
        let pose: ArmPose = cells.catalog[c.pose_index];
        let resolved = model.resolve(&pose)?;
        let predicted = match (c.offset.shoulder.is_zero(), c.offset.elbow.is_zero()) {
            (false, true) => resolved.shoulder.probability(c.offset.shoulder),
            (true, false) => resolved.elbow.probability(c.offset.elbow),
            (true, true) => 0.5 * (resolved.shoulder.baseline() + resolved.elbow.baseline()),
            (false, false) => continue,
        };
        sse += c.n_trials as f64 * (predicted - c.p_hat).powi(2);
        n += c.n_trials;
    }
    Ok(if n == 0 {
        f64::NAN
    } else {
        (sse / n as f64).sqrt()
    })
}

/// Weighted squared error of `p ~ (a + F_e(e - center)) / 2` with the
/// shoulder term `a` solved in closed form.
fn shift_objective(
    elbow: &ResolvedJoint,
    group: &[&ProbabilityCell],
    center: JointOffset2D,
) -> f64 {
    let terms: Vec<(f64, f64, f64)> = group
        .iter()
        .map(|c| {
            let f = elbow.probability(c.offset.elbow - center);
            (c.n_trials as f64, c.p_hat, f)
        })
        .collect();
    let w: f64 = terms.iter().map(|t| t.0).sum();
    let a = terms.iter().map(|(n, p, f)| n * (2.0 * p - f)).sum::<f64>() / w;
    terms
        .iter()
        .map(|(n, p, f)| n * (p - 0.5 * (a + f)).powi(2))
        .sum()
}

/// Elbow distribution center of one shoulder-offset group: a grid search
/// around the mean elbow offset, then compass refinement.
fn fit_shift_center(elbow: &ResolvedJoint, group: &[&ProbabilityCell]) -> JointOffset2D {
    let n = group.len() as f64;
    let start = group
        .iter()
        .fold(JointOffset2D::ZERO, |acc, c| acc + c.offset.elbow)
        .scale(1.0 / n);
    let steps = (SHIFT_SEARCH_HALF_WIDTH / SHIFT_GRID_STEP).round() as i32;
    let mut best = (f64::INFINITY, start);
    for i in -steps..=steps {
        for j in -steps..=steps {
            let c = start + JointOffset2D::new(i as f64, j as f64).scale(SHIFT_GRID_STEP);
            let v = shift_objective(elbow, group, c);
            if v < best.0 {
                best = (v, c);
            }
        }
    }
    let mut step = 0.5 * SHIFT_GRID_STEP;
    while step > SHIFT_TOLERANCE {
        let mut moved = false;
        for d in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let c = best.1 + JointOffset2D::new(d.0, d.1).scale(step);
            let v = shift_objective(elbow, group, c);
            if v < best.0 {
                best = (v, c);
                moved = true;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    best.1
}
