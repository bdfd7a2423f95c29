//! Arm pose representation in spherical polar angles.
//!
//! All angles are in degrees. The body frame is right-handed with
//! x = body-right, y = body-up and z = body-forward, with the shoulder at the
//! origin. The upper arm direction is
//! `u(phi, theta) = (sin theta cos phi, -cos theta, sin theta sin phi)`, so
//! `theta = 0` hangs the arm straight down. The forearm angles are measured in
//! a frame whose polar axis is `u` (`theta_e = 0` keeps the arm straight) and
//! whose azimuth reference is body-forward projected onto the plane
//! orthogonal to `u`, falling back to body-up when the upper arm points
//! (anti-)forward.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shoulder or elbow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Joint {
    Shoulder,
    Elbow,
}

impl Joint {
    pub const ALL: [Joint; 2] = [Joint::Shoulder, Joint::Elbow];

    pub fn name(self) -> &'static str {
        match self {
            Joint::Shoulder => "shoulder",
            Joint::Elbow => "elbow",
        }
    }
}

impl FromStr for Joint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "shoulder" | "s" => Ok(Joint::Shoulder),
            "elbow" | "e" => Ok(Joint::Elbow),
            other => Err(Error::invalid(format!("unknown joint `{other}`"))),
        }
    }
}

/// One of the two angular axes of a joint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Phi,
    Theta,
}

impl Axis {
    pub const ALL: [Axis; 2] = [Axis::Phi, Axis::Theta];

    pub fn name(self) -> &'static str {
        match self {
            Axis::Phi => "phi",
            Axis::Theta => "theta",
        }
    }
}

/// Wraps an azimuth into `(-180, 180]`.
pub fn wrap_phi(deg: f64) -> f64 {
    if deg > -180.0 && deg <= 180.0 {
        return deg;
    }
    let r = deg.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Clamps a polar angle into `[0, 180]`.
pub fn clamp_theta(deg: f64) -> f64 {
    deg.clamp(0.0, 180.0)
}

/// Upper-left-limb configuration: shoulder `(phi_s, theta_s)` relative to the
/// body and elbow `(phi_e, theta_e)` relative to the upper arm.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ArmPose {
    pub phi_s: f64,
    pub theta_s: f64,
    pub phi_e: f64,
    pub theta_e: f64,
}

impl ArmPose {
    /// Arm hanging straight down.
    pub const REST: ArmPose = ArmPose {
        phi_s: 0.0,
        theta_s: 0.0,
        phi_e: 0.0,
        theta_e: 0.0,
    };

    pub fn new(phi_s: f64, theta_s: f64, phi_e: f64, theta_e: f64) -> Result<Self> {
        let pose = ArmPose {
            phi_s,
            theta_s,
            phi_e,
            theta_e,
        };
        pose.validate()?;
        Ok(pose)
    }

    pub fn from_array(a: [f64; 4]) -> Result<Self> {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.phi_s, self.theta_s, self.phi_e, self.theta_e]
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.to_array();
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("pose has non-finite angle: {self}")));
        }
        for theta in [self.theta_s, self.theta_e] {
            if !(0.0..=180.0).contains(&theta) {
                return Err(Error::invalid(format!(
                    "polar angle {theta} outside [0, 180] in pose {self}"
                )));
            }
        }
        for phi in [self.phi_s, self.phi_e] {
            if !(phi > -180.0 && phi <= 180.0) {
                return Err(Error::invalid(format!(
                    "azimuth {phi} outside (-180, 180] in pose {self}"
                )));
            }
        }
        Ok(())
    }

    /// Angles of one joint as `(phi, theta)`.
    pub fn joint_angles(&self, joint: Joint) -> (f64, f64) {
        match joint {
            Joint::Shoulder => (self.phi_s, self.theta_s),
            Joint::Elbow => (self.phi_e, self.theta_e),
        }
    }

    /// Per-angle match within `tol` degrees.
    pub fn approx_eq(&self, other: &ArmPose, tol: f64) -> bool {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .all(|(a, b)| (a - b).abs() <= tol)
    }
}

impl fmt::Display for ArmPose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, {})",
            self.phi_s, self.theta_s, self.phi_e, self.theta_e
        )
    }
}

/// Parses `"phi_s,theta_s,phi_e,theta_e"`.
impl FromStr for ArmPose {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v = parse_four(s)?;
        ArmPose::from_array(v)
    }
}

pub(crate) fn parse_four(s: &str) -> Result<[f64; 4]> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(Error::invalid(format!(
            "expected 4 comma-separated values, got {} in `{s}`",
            parts.len()
        )));
    }
    let mut out = [0.0; 4];
    for (slot, part) in out.iter_mut().zip(&parts) {
        *slot = part
            .parse::<f64>()
            .map_err(|_| Error::invalid(format!("`{part}` is not a number")))?;
    }
    Ok(out)
}

/// Angular offset on one joint, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointOffset2D {
    pub d_phi: f64,
    pub d_theta: f64,
}

impl JointOffset2D {
    pub const ZERO: JointOffset2D = JointOffset2D {
        d_phi: 0.0,
        d_theta: 0.0,
    };

    pub const fn new(d_phi: f64, d_theta: f64) -> Self {
        JointOffset2D { d_phi, d_theta }
    }

    /// Offset strength.
    pub fn magnitude(&self) -> f64 {
        self.d_phi.hypot(self.d_theta)
    }

    pub fn is_zero(&self) -> bool {
        self.d_phi == 0.0 && self.d_theta == 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.d_phi.is_finite() && self.d_theta.is_finite()
    }

    pub fn component(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Phi => self.d_phi,
            Axis::Theta => self.d_theta,
        }
    }

    pub fn scale(self, k: f64) -> Self {
        JointOffset2D::new(self.d_phi * k, self.d_theta * k)
    }
}

impl std::ops::Add for JointOffset2D {
    type Output = JointOffset2D;
    fn add(self, rhs: Self) -> Self {
        JointOffset2D::new(self.d_phi + rhs.d_phi, self.d_theta + rhs.d_theta)
    }
}

impl std::ops::Sub for JointOffset2D {
    type Output = JointOffset2D;
    fn sub(self, rhs: Self) -> Self {
        JointOffset2D::new(self.d_phi - rhs.d_phi, self.d_theta - rhs.d_theta)
    }
}

impl std::ops::Neg for JointOffset2D {
    type Output = JointOffset2D;
    fn neg(self) -> Self {
        JointOffset2D::new(-self.d_phi, -self.d_theta)
    }
}

/// Simultaneous shoulder and elbow offsets.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CompositeOffset {
    pub shoulder: JointOffset2D,
    pub elbow: JointOffset2D,
}

impl CompositeOffset {
    pub const ZERO: CompositeOffset = CompositeOffset {
        shoulder: JointOffset2D::ZERO,
        elbow: JointOffset2D::ZERO,
    };

    pub const fn new(shoulder: JointOffset2D, elbow: JointOffset2D) -> Self {
        CompositeOffset { shoulder, elbow }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        CompositeOffset::new(
            JointOffset2D::new(a[0], a[1]),
            JointOffset2D::new(a[2], a[3]),
        )
    }

    pub fn to_array(self) -> [f64; 4] {
        [
            self.shoulder.d_phi,
            self.shoulder.d_theta,
            self.elbow.d_phi,
            self.elbow.d_theta,
        ]
    }

    pub fn joint(&self, joint: Joint) -> JointOffset2D {
        match joint {
            Joint::Shoulder => self.shoulder,
            Joint::Elbow => self.elbow,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.shoulder.is_finite() && self.elbow.is_finite()
    }

    pub fn is_zero(&self) -> bool {
        self.shoulder.is_zero() && self.elbow.is_zero()
    }
}

/// Parses `"d_phi,d_theta"`.
impl FromStr for JointOffset2D {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [a, b] = parts.as_slice() else {
            return Err(Error::invalid(format!(
                "expected 2 comma-separated values, got {} in `{s}`",
                parts.len()
            )));
        };
        let num = |t: &str| match t.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::invalid(format!("`{t}` is not a finite number"))),
        };
        Ok(JointOffset2D::new(num(a)?, num(b)?))
    }
}

/// Parses `"d_phi_s,d_theta_s,d_phi_e,d_theta_e"`.
impl FromStr for CompositeOffset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v = parse_four(s)?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("offset must be finite"));
        }
        Ok(CompositeOffset::from_array(v))
    }
}

/// Adds `offset` to `pose`, clamping polar angles to `[0, 180]` and wrapping
/// azimuths to `(-180, 180]`.
pub fn apply_offset(pose: &ArmPose, offset: &CompositeOffset) -> ArmPose {
    ArmPose {
        phi_s: wrap_phi(pose.phi_s + offset.shoulder.d_phi),
        theta_s: clamp_theta(pose.theta_s + offset.shoulder.d_theta),
        phi_e: wrap_phi(pose.phi_e + offset.elbow.d_phi),
        theta_e: clamp_theta(pose.theta_e + offset.elbow.d_theta),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimbLengths {
    pub upper_arm: f64,
    pub forearm: f64,
}

impl LimbLengths {
    pub const UNIT: LimbLengths = LimbLengths {
        upper_arm: 1.0,
        forearm: 1.0,
    };

    pub fn new(upper_arm: f64, forearm: f64) -> Result<Self> {
        if !(upper_arm > 0.0 && upper_arm.is_finite() && forearm > 0.0 && forearm.is_finite()) {
            return Err(Error::invalid(format!(
                "limb lengths must be positive, got ({upper_arm}, {forearm})"
            )));
        }
        Ok(LimbLengths { upper_arm, forearm })
    }
}

impl Default for LimbLengths {
    fn default() -> Self {
        LimbLengths {
            upper_arm: 0.3,
            forearm: 0.25,
        }
    }
}

/// Cartesian joint positions in the body frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointPositions {
    pub shoulder: [f64; 3],
    pub elbow: [f64; 3],
    pub wrist: [f64; 3],
}

impl JointPositions {
    pub fn as_list(&self) -> [[f64; 3]; 3] {
        [self.shoulder, self.elbow, self.wrist]
    }
}

fn unit_direction(phi_deg: f64, theta_deg: f64) -> Vector3<f64> {
    let (phi, theta) = (phi_deg.to_radians(), theta_deg.to_radians());
    Vector3::new(
        theta.sin() * phi.cos(),
        -theta.cos(),
        theta.sin() * phi.sin(),
    )
}

/// Orthonormal `(reference, binormal)` pair spanning the plane orthogonal to `u`.
fn elbow_frame(u: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let forward = Vector3::z();
    let seed = if u.dot(&forward).abs() > 1.0 - 1e-9 {
        Vector3::y()
    } else {
        forward
    };
    let reference = (seed - u * u.dot(&seed)).normalize();
    let binormal = u.cross(&reference);
    (reference, binormal)
}

pub fn forward_kinematics(pose: &ArmPose, lengths: &LimbLengths) -> JointPositions {
    let u = unit_direction(pose.phi_s, pose.theta_s);
    let (reference, binormal) = elbow_frame(&u);
    let (phi_e, theta_e) = (pose.phi_e.to_radians(), pose.theta_e.to_radians());
    let forearm_dir =
        u * theta_e.cos() + (reference * phi_e.cos() + binormal * phi_e.sin()) * theta_e.sin();

    let elbow = u * lengths.upper_arm;
    let wrist = elbow + forearm_dir * lengths.forearm;
    JointPositions {
        shoulder: [0.0; 3],
        elbow: [elbow.x, elbow.y, elbow.z],
        wrist: [wrist.x, wrist.y, wrist.z],
    }
}

/// Largest per-joint L1 distance between two joint lists.
pub fn skeletal_distance(a: &[[f64; 3]], b: &[[f64; 3]]) -> Result<f64> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::invalid(format!(
            "joint lists must be non-empty and equal length, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(p, q)| p.iter().zip(q).map(|(x, y)| (x - y).abs()).sum::<f64>())
        .fold(0.0, f64::max))
}

/// Skeletal distance of two poses under `lengths`.
pub fn pose_distance(a: &ArmPose, b: &ArmPose, lengths: &LimbLengths) -> f64 {
    let ja = forward_kinematics(a, lengths).as_list();
    let jb = forward_kinematics(b, lengths).as_list();
    // equal, non-empty lists
    skeletal_distance(&ja, &jb).unwrap_or(f64::NAN)
}

/// Upper-limb RULA proxy: upper-arm band score (1-4) plus lower-arm band
/// score (1-2). Wrist, neck and trunk terms are not modeled.
pub fn rula_arm_score(pose: &ArmPose) -> u8 {
    rula_upper_arm(pose.theta_s) + rula_lower_arm(pose.theta_e)
}

/// Upper-arm band from the flexion of the upper arm away from hanging down.
pub fn rula_upper_arm(theta_s: f64) -> u8 {
    if theta_s <= 20.0 {
        1
    } else if theta_s <= 45.0 {
        2
    } else if theta_s <= 90.0 {
        3
    } else {
        4
    }
}

/// Lower-arm band. Elbow flexion is the angle between forearm and the
/// upper-arm axis, which is `theta_e` in this parameterization.
pub fn rula_lower_arm(theta_e: f64) -> u8 {
    if (60.0..=100.0).contains(&theta_e) {
        1
    } else {
        2
    }
}
