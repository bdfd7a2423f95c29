use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::ArmPose;

/// Coefficients `(A, B, C, D, E)` of `A*phi_s + B*theta_s + C*phi_e + D*theta_e + E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearCoefficients {
    pub coefficients: [f64; 5],
    pub rmse: f64,
}

impl LinearCoefficients {
    pub fn predict(&self, pose: &ArmPose) -> f64 {
        let c = &self.coefficients;
        let v = pose.to_array();
        c[0] * v[0] + c[1] * v[1] + c[2] * v[2] + c[3] * v[3] + c[4]
    }
}

fn design_row(pose: &ArmPose) -> [f64; 5] {
    let v = pose.to_array();
    [v[0], v[1], v[2], v[3], 1.0]
}

/// Least-squares design over a fixed set of poses.
///
/// Keeps the pseudo-inverse so that several targets over the same poses can
/// be fitted, or a prediction expressed as a weighted sum of the targets.
#[derive(Debug, Clone)]
pub struct PoseDesign {
    poses: Vec<ArmPose>,
    pinv: DMatrix<f64>,
}

impl PoseDesign {
    pub fn new(poses: &[ArmPose]) -> Result<Self> {
        if poses.len() < 5 {
            return Err(Error::InsufficientData {
                what: "poses",
                needed: 5,
                got: poses.len(),
            });
        }
        let x = DMatrix::from_fn(poses.len(), 5, |i, j| design_row(&poses[i])[j]);
        let svd = SVD::new(x, true, true);
        let smax = svd.singular_values.max();
        let rank = svd
            .singular_values
            .iter()
            .filter(|s| **s > smax * 1e-10)
            .count();
        if rank < 5 {
            return Err(Error::DegenerateFit(format!(
                "pose design matrix has rank {rank} < 5; the poses are not affinely independent"
            )));
        }
        let pinv = svd
            .pseudo_inverse(smax * 1e-10)
            .map_err(|e| Error::DegenerateFit(e.to_string()))?;
        Ok(PoseDesign {
            poses: poses.to_vec(),
            pinv,
        })
    }

    pub fn poses(&self) -> &[ArmPose] {
        &self.poses
    }

    pub fn fit(&self, values: &[f64]) -> Result<LinearCoefficients> {
        if values.len() != self.poses.len() {
            return Err(Error::invalid(format!(
                "expected {} values, got {}",
                self.poses.len(),
                values.len()
            )));
        }
        let y = DVector::from_column_slice(values);
        let beta = &self.pinv * &y;
        let mut coefficients = [0.0; 5];
        coefficients.copy_from_slice(beta.as_slice());
        let mut out = LinearCoefficients {
            coefficients,
            rmse: 0.0,
        };
        let sse: f64 = self
            .poses
            .iter()
            .zip(values)
            .map(|(p, v)| (out.predict(p) - v).powi(2))
            .sum();
        out.rmse = (sse / values.len() as f64).sqrt();
        Ok(out)
    }

    /// Weights `w` such that the fitted prediction at `pose` equals
    /// `sum(w[i] * values[i])` for any target `values`.
    pub fn weights(&self, pose: &ArmPose) -> Vec<f64> {
        let row = DVector::from_column_slice(&design_row(pose));
        (self.pinv.transpose() * row).as_slice().to_vec()
    }
}

/// Fits the cross-pose linear relation from `(pose, value)` samples.
pub fn fit_pose_linear(samples: &[(ArmPose, f64)]) -> Result<LinearCoefficients> {
    if samples.iter().any(|(_, v)| !v.is_finite()) {
        return Err(Error::invalid("linear fit targets must be finite"));
    }
    let poses: Vec<ArmPose> = samples.iter().map(|s| s.0).collect();
    let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
    PoseDesign::new(&poses)?.fit(&values)
}
