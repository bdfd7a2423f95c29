use serde::{Deserialize, Serialize};

use super::quadratic::SingleAxisLevels;
use crate::error::{Error, Result};
use crate::pose::{ArmPose, Joint, JointOffset2D};

/// Quarter-ellipse semi-axes, one per half-axis. Zero and infinite
/// magnitudes are allowed; a zero semi-axis admits no offset along that half.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadrantAxes {
    pub phi_pos: f64,
    pub phi_neg: f64,
    pub theta_pos: f64,
    pub theta_neg: f64,
}

fn ratio_sq(v: f64, axis: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else if axis == 0.0 {
        f64::INFINITY
    } else {
        (v / axis).powi(2)
    }
}

impl QuadrantAxes {
    pub fn uniform(r: f64) -> Self {
        QuadrantAxes {
            phi_pos: r,
            phi_neg: r,
            theta_pos: r,
            theta_neg: r,
        }
    }

    /// Semi-axes `(a, b)` of the quadrant containing `(x, y)`.
    pub fn for_quadrant(&self, x: f64, y: f64) -> (f64, f64) {
        (
            if x >= 0.0 { self.phi_pos } else { self.phi_neg },
            if y >= 0.0 {
                self.theta_pos
            } else {
                self.theta_neg
            },
        )
    }

    /// `x^2/a^2 + y^2/b^2` for the quadrant of the point; `<= 1` inside.
    pub fn level_value(&self, o: JointOffset2D) -> f64 {
        let (a, b) = self.for_quadrant(o.d_phi, o.d_theta);
        ratio_sq(o.d_phi, a) + ratio_sq(o.d_theta, b)
    }

    pub fn contains(&self, o: JointOffset2D) -> bool {
        self.level_value(o) <= 1.0
    }

    /// Boundary point along the ray through `(dx, dy)`.
    pub fn ray_boundary(&self, dx: f64, dy: f64) -> Result<JointOffset2D> {
        let n = dx.hypot(dy);
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::invalid("direction must be nonzero and finite"));
        }
        let (ux, uy) = (dx / n, dy / n);
        let (a, b) = self.for_quadrant(ux, uy);
        let t = 1.0 / (ratio_sq(ux, a) + ratio_sq(uy, b)).sqrt();
        let scale = |u: f64| if u == 0.0 { 0.0 } else { t * u };
        Ok(JointOffset2D::new(scale(ux), scale(uy)))
    }

    /// Axis-aligned bounding box `(phi_min, phi_max, theta_min, theta_max)`.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        (-self.phi_neg, self.phi_pos, -self.theta_neg, self.theta_pos)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.phi_pos, self.phi_neg, self.theta_pos, self.theta_neg]
    }
}

/// Level set of one joint's noticing probability at a single pose: the
/// offsets on the boundary are noticed with probability `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseLevelSet {
    pub joint: Joint,
    pub pose: ArmPose,
    pub p: f64,
    pub axes: QuadrantAxes,
}

impl EllipseLevelSet {
    pub fn new(joint: Joint, pose: ArmPose, p: f64, axes: QuadrantAxes) -> Result<Self> {
        if axes.as_array().iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::invalid(format!(
                "ellipse semi-axes must be finite and positive, got {:?}",
                axes.as_array()
            )));
        }
        Ok(EllipseLevelSet {
            joint,
            pose,
            p,
            axes,
        })
    }

    pub fn contains(&self, o: JointOffset2D) -> bool {
        self.axes.contains(o)
    }

    pub fn level_value(&self, o: JointOffset2D) -> f64 {
        self.axes.level_value(o)
    }
}

/// Builds the quarter-ellipse level set from the crossings on each axis.
pub fn ellipse_from_single_axis(
    joint: Joint,
    pose: ArmPose,
    phi: &SingleAxisLevels,
    theta: &SingleAxisLevels,
) -> Result<EllipseLevelSet> {
    if (phi.p - theta.p).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "axis levels disagree on probability: {} vs {}",
            phi.p, theta.p
        )));
    }
    let axes = QuadrantAxes {
        phi_pos: phi.pos.abs(),
        phi_neg: phi.neg.abs(),
        theta_pos: theta.pos.abs(),
        theta_neg: theta.neg.abs(),
    };
    EllipseLevelSet::new(joint, pose, phi.p, axes)
}

/// Largest offset along `direction` that stays inside the level set.
pub fn max_offset_along_direction(
    level_set: &EllipseLevelSet,
    direction: (f64, f64),
) -> Result<JointOffset2D> {
    level_set.axes.ray_boundary(direction.0, direction.1)
}
