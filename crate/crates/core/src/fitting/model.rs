use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use csv::WriterBuilder;
use serde::{Deserialize, Serialize};

use super::ellipse::{EllipseLevelSet, QuadrantAxes};
use super::linear::{LinearCoefficients, PoseDesign};
use super::quadratic::{fit_axis_quadratic, AxisQuadratic};
use crate::dataset::{aggregate, find_pose, NoticeabilityDataset, Phase, ProbabilityCell};
use crate::error::{create, open, Error, Result};
use crate::pose::{ArmPose, Axis, Joint, JointOffset2D};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Probability levels whose cross-pose coefficients are written to model files.
pub const EXPORTED_LEVELS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

// Stand-in for an unbounded semi-axis when blending poses.
const SEMI_AXIS_CAP: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointCurves {
    pub phi: AxisQuadratic,
    pub theta: AxisQuadratic,
}

impl JointCurves {
    pub fn axis(&self, axis: Axis) -> &AxisQuadratic {
        match axis {
            Axis::Phi => &self.phi,
            Axis::Theta => &self.theta,
        }
    }

    /// Mean of the two axis baselines, clamped to `[0, 1]`.
    pub fn baseline(&self) -> f64 {
        (0.5 * (self.phi.c + self.theta.c)).clamp(0.0, 1.0)
    }

    pub fn axes(&self, p: f64) -> QuadrantAxes {
        let (phi_neg, phi_pos) = self.phi.semi_axes(p);
        let (theta_neg, theta_pos) = self.theta.semi_axes(p);
        QuadrantAxes {
            phi_pos,
            phi_neg,
            theta_pos,
            theta_neg,
        }
    }
}

/// Per-pose axis curves for both joints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseCurves {
    pub pose: ArmPose,
    pub shoulder: JointCurves,
    pub elbow: JointCurves,
}

impl PoseCurves {
    pub fn joint(&self, joint: Joint) -> &JointCurves {
        match joint {
            Joint::Shoulder => &self.shoulder,
            Joint::Elbow => &self.elbow,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Pos,
    Neg,
}

/// Cross-pose coefficients for one (joint, axis, sign) at one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearEntry {
    pub joint: Joint,
    pub axis: Axis,
    pub sign: Sign,
    pub fit: LinearCoefficients,
}

/// Signed single-axis offsets at level `p` as linear functions of the pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseLinearModel {
    pub p: f64,
    pub entries: Vec<LinearEntry>,
}

impl PoseLinearModel {
    pub fn entry(&self, joint: Joint, axis: Axis, sign: Sign) -> Option<&LinearEntry> {
        self.entries
            .iter()
            .find(|e| e.joint == joint && e.axis == axis && e.sign == sign)
    }
}

/// One joint's curves at an arbitrary pose: either a catalog pose's own
/// curves, or a weighted blend of catalog curves reproducing the cross-pose
/// linear fit.
#[derive(Debug, Clone)]
pub struct ResolvedJoint {
    terms: Vec<(f64, JointCurves)>,
    baseline: f64,
}

impl ResolvedJoint {
    fn direct(curves: JointCurves) -> Self {
        ResolvedJoint {
            baseline: curves.baseline(),
            terms: vec![(1.0, curves)],
        }
    }

    fn blended(terms: Vec<(f64, JointCurves)>) -> Self {
        let baseline = terms
            .iter()
            .map(|(w, c)| w * 0.5 * (c.phi.c + c.theta.c))
            .sum::<f64>()
            .clamp(0.0, 1.0);
        ResolvedJoint { terms, baseline }
    }

    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    /// Quadrant semi-axes of the level-`p` set.
    pub fn axes(&self, p: f64) -> QuadrantAxes {
        if let [(_, c)] = self.terms.as_slice() {
            return c.axes(p);
        }
        let mut acc = [0.0; 4];
        for (w, c) in &self.terms {
            let a = c.axes(p).as_array();
            for (slot, v) in acc.iter_mut().zip(a) {
                *slot += w * v.min(SEMI_AXIS_CAP);
            }
        }
        let acc = acc.map(|v| v.max(0.0));
        QuadrantAxes {
            phi_pos: acc[0],
            phi_neg: acc[1],
            theta_pos: acc[2],
            theta_neg: acc[3],
        }
    }

    /// Noticing probability of a single-joint offset: the level whose set
    /// boundary passes through the offset.
    pub fn probability(&self, offset: JointOffset2D) -> f64 {
        let base = self.baseline;
        if offset.is_zero() || base >= 1.0 {
            return base;
        }
        let outside = |p: f64| self.axes(p).level_value(offset) > 1.0;
        if outside(1.0) {
            return 1.0;
        }
        if !outside(base) {
            return base;
        }
        let (mut lo, mut hi) = (base, 1.0);
        for _ in 0..200 {
            if hi - lo <= 1e-13 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if outside(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

/// Both joints resolved at one pose.
#[derive(Debug, Clone)]
pub struct ResolvedPose {
    pub pose: ArmPose,
    pub shoulder: ResolvedJoint,
    pub elbow: ResolvedJoint,
}

impl ResolvedPose {
    pub fn joint(&self, joint: Joint) -> &ResolvedJoint {
        match joint {
            Joint::Shoulder => &self.shoulder,
            Joint::Elbow => &self.elbow,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    poses: Vec<PoseCurves>,
    #[serde(default)]
    linear: Vec<PoseLinearModel>,
}

/// Fitted noticeability model: per-pose axis curves plus the cross-pose
/// linear generalization used for poses outside the catalog.
#[derive(Debug, Clone)]
pub struct FittedNoticeabilityModel {
    poses: Vec<PoseCurves>,
    design: std::result::Result<PoseDesign, String>,
}

impl FittedNoticeabilityModel {
    pub fn from_curves(poses: Vec<PoseCurves>) -> Result<Self> {
        if poses.is_empty() {
            return Err(Error::InsufficientData {
                what: "fitted poses",
                needed: 1,
                got: 0,
            });
        }
        for pc in &poses {
            pc.pose.validate()?;
            for j in Joint::ALL {
                for a in Axis::ALL {
                    let q = pc.joint(j).axis(a);
                    AxisQuadratic::new(q.a, q.b, q.c)?;
                }
            }
        }
        let catalog: Vec<ArmPose> = poses.iter().map(|p| p.pose).collect();
        let design = PoseDesign::new(&catalog).map_err(|e| e.to_string());
        if let Err(reason) = &design {
            log::info!("cross-pose generalization unavailable: {reason}");
        }
        Ok(FittedNoticeabilityModel { poses, design })
    }

    pub fn poses(&self) -> &[PoseCurves] {
        &self.poses
    }

    pub fn pose_catalog(&self) -> Vec<ArmPose> {
        self.poses.iter().map(|p| p.pose).collect()
    }

    pub fn catalog_index(&self, pose: &ArmPose) -> Option<usize> {
        find_pose(&self.pose_catalog(), pose)
    }

    pub fn generalizes(&self) -> bool {
        self.design.is_ok()
    }

    /// Curves for both joints at `pose`.
    pub fn resolve(&self, pose: &ArmPose) -> Result<ResolvedPose> {
        pose.validate()?;
        if let Some(i) = self.catalog_index(pose) {
            let pc = &self.poses[i];
            return Ok(ResolvedPose {
                pose: *pose,
                shoulder: ResolvedJoint::direct(pc.shoulder),
                elbow: ResolvedJoint::direct(pc.elbow),
            });
        }
        let design = self
            .design
            .as_ref()
            .map_err(|reason| Error::Unfitted(format!("pose {pose} (not in catalog; {reason})")))?;
        let w = design.weights(pose);
        let blend = |j: Joint| {
            ResolvedJoint::blended(
                w.iter()
                    .zip(&self.poses)
                    .map(|(wi, pc)| (*wi, *pc.joint(j)))
                    .collect(),
            )
        };
        Ok(ResolvedPose {
            pose: *pose,
            shoulder: blend(Joint::Shoulder),
            elbow: blend(Joint::Elbow),
        })
    }

    pub fn baseline(&self, joint: Joint, pose: &ArmPose) -> Result<f64> {
        Ok(self.resolve(pose)?.joint(joint).baseline())
    }

    /// Level-`p` set of one joint; fails when any semi-axis is zero or unbounded.
    pub fn level_set(&self, joint: Joint, pose: &ArmPose, p: f64) -> Result<EllipseLevelSet> {
        let r = self.resolve(pose)?;
        let rj = r.joint(joint);
        if !(p > rj.baseline() && p <= 1.0) {
            return Err(Error::NoCrossing {
                p,
                baseline: rj.baseline(),
            });
        }
        EllipseLevelSet::new(joint, *pose, p, rj.axes(p))
    }

    /// Cross-pose coefficients at level `p`, one entry per (joint, axis, sign).
    pub fn linear_model(&self, p: f64) -> Result<PoseLinearModel> {
        let design = self
            .design
            .as_ref()
            .map_err(|reason| Error::DegenerateFit(reason.clone()))?;
        let mut entries = Vec::with_capacity(8);
        for joint in Joint::ALL {
            for axis in Axis::ALL {
                for sign in [Sign::Pos, Sign::Neg] {
                    let values: Vec<f64> = self
                        .poses
                        .iter()
                        .map(|pc| {
                            let (neg, pos) = pc.joint(joint).axis(axis).semi_axes(p);
                            match sign {
                                Sign::Pos => pos.min(SEMI_AXIS_CAP),
                                Sign::Neg => -neg.min(SEMI_AXIS_CAP),
                            }
                        })
                        .collect();
                    entries.push(LinearEntry {
                        joint,
                        axis,
                        sign,
                        fit: design.fit(&values)?,
                    });
                }
            }
        }
        Ok(PoseLinearModel { p, entries })
    }

    pub fn to_json(&self) -> Result<String> {
        let linear = if self.generalizes() {
            EXPORTED_LEVELS
                .iter()
                .map(|p| self.linear_model(*p))
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        let file = ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            poses: self.poses.clone(),
            linear,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model schema version {} (expected {MODEL_SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        Self::from_curves(file.poses)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(create(path.as_ref())?);
        w.write_all(self.to_json()?.as_bytes())?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut text = String::new();
        std::io::Read::read_to_string(&mut BufReader::new(open(path.as_ref())?), &mut text)?;
        Self::from_json(&text)
    }

    /// Writes `d_phi,d_theta,p` rows over an `n x n` grid on `[-extent, extent]^2`.
    pub fn write_probability_grid(
        &self,
        joint: Joint,
        pose: &ArmPose,
        extent: f64,
        n: usize,
        out: impl Write,
    ) -> Result<()> {
        if n < 2 || !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::invalid("grid needs n >= 2 and a positive extent"));
        }
        let r = self.resolve(pose)?;
        let rj = r.joint(joint);
        let mut w = WriterBuilder::new().from_writer(out);
        w.write_record(["d_phi", "d_theta", "p"])?;
        let step = 2.0 * extent / (n - 1) as f64;
        for i in 0..n {
            for k in 0..n {
                let o = JointOffset2D::new(-extent + i as f64 * step, -extent + k as f64 * step);
                w.write_record([
                    format!("{}", o.d_phi),
                    format!("{}", o.d_theta),
                    format!("{}", rj.probability(o)),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Noticing probability of a single-joint offset at `pose`.
pub fn probability_2d(
    joint: Joint,
    pose: &ArmPose,
    offset: JointOffset2D,
    model: &FittedNoticeabilityModel,
) -> Result<f64> {
    if !offset.is_finite() {
        return Err(Error::invalid("offset must be finite"));
    }
    Ok(model.resolve(pose)?.joint(joint).probability(offset))
}

/// Fits per-pose axis curves from the strength-sweep records of `dataset`.
pub fn fit_model(dataset: &NoticeabilityDataset) -> Result<FittedNoticeabilityModel> {
    let cells = aggregate(&dataset.filter_phase(Phase::P1));
    fit_model_from_cells(dataset.pose_catalog(), &cells)
}

/// Fits per-pose axis curves from strength-sweep cells. Cells offsetting
/// more than one axis are ignored; the zero-offset cell joins all four fits.
pub fn fit_model_from_cells(
    catalog: &[ArmPose],
    cells: &[ProbabilityCell],
) -> Result<FittedNoticeabilityModel> {
    let mut fitted = Vec::new();
    for (pose_index, pose) in catalog.iter().enumerate() {
        let pose_cells: Vec<_> = cells
            .iter()
            .filter(|c| c.pose_index == pose_index)
            .collect();
        if pose_cells.is_empty() {
            continue;
        }
        let mut quads = Vec::with_capacity(4);
        for k in 0..4 {
            let pts: Vec<(f64, f64)> = pose_cells
                .iter()
                .filter_map(|c| {
                    let v = c.offset.to_array();
                    let others_zero = (0..4).all(|i| i == k || v[i] == 0.0);
                    others_zero.then_some((v[k], c.p_hat))
                })
                .collect();
            let q = fit_axis_quadratic(&pts)
                .map_err(|e| Error::invalid(format!("pose {pose}, axis {k}: {e}")))?;
            log::debug!(
                "pose {pose} axis {k}: a={} b={} c={} rmse={}",
                q.a,
                q.b,
                q.c,
                q.rmse
            );
            quads.push(q);
        }
        fitted.push(PoseCurves {
            pose: *pose,
            shoulder: JointCurves {
                phi: quads[0],
                theta: quads[1],
            },
            elbow: JointCurves {
                phi: quads[2],
                theta: quads[3],
            },
        });
    }
    if fitted.is_empty() {
        return Err(Error::InsufficientData {
            what: "poses with strength-sweep trials",
            needed: 1,
            got: 0,
        });
    }
    FittedNoticeabilityModel::from_curves(fitted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn quad(a: f64, c: f64) -> AxisQuadratic {
        AxisQuadratic::new(a, 0.0, c).unwrap()
    }

    fn curves(pose: ArmPose, s: f64) -> PoseCurves {
        PoseCurves {
            pose,
            shoulder: JointCurves {
                phi: quad(0.004 * s, 0.02),
                theta: quad(0.008 * s, 0.02),
            },
            elbow: JointCurves {
                phi: quad(0.003 * s, 0.02),
                theta: quad(0.002 * s, 0.02),
            },
        }
    }

    fn single_pose_model() -> FittedNoticeabilityModel {
        FittedNoticeabilityModel::from_curves(vec![curves(ArmPose::REST, 1.0)]).unwrap()
    }

    #[test]
    fn origin_is_baseline() {
        let m = single_pose_model();
        let p = probability_2d(Joint::Shoulder, &ArmPose::REST, JointOffset2D::ZERO, &m).unwrap();
        assert_eq!(p, 0.02);
    }

    #[test]
    fn boundary_point_has_its_level() {
        let m = single_pose_model();
        let set = m.level_set(Joint::Shoulder, &ArmPose::REST, 0.5).unwrap();
        for ang in [10.0f64, 80.0, 135.0, 260.0] {
            let (s, c) = ang.to_radians().sin_cos();
            let o = set.axes.ray_boundary(c, s).unwrap();
            let p = probability_2d(Joint::Shoulder, &ArmPose::REST, o, &m).unwrap();
            assert_abs_diff_eq!(p, 0.5, epsilon = 1e-6);
        }
    }

    #[test]
    fn radial_quadratic_truth() {
        // p = 0.02 + 0.004 x^2 + 0.008 y^2 exactly, while below 1
        let m = single_pose_model();
        for i in 0..25 {
            for k in 0..25 {
                let x = -8.0 + 16.0 * i as f64 / 24.0;
                let y = -8.0 + 16.0 * k as f64 / 24.0;
                let truth = (0.02 + 0.004 * x * x + 0.008 * y * y).min(1.0);
                let p = probability_2d(
                    Joint::Shoulder,
                    &ArmPose::REST,
                    JointOffset2D::new(x, y),
                    &m,
                )
                .unwrap();
                assert_abs_diff_eq!(p, truth, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn outside_unit_set_is_one() {
        let m = single_pose_model();
        let p = probability_2d(
            Joint::Elbow,
            &ArmPose::REST,
            JointOffset2D::new(100.0, 0.0),
            &m,
        )
        .unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn off_catalog_needs_generalization() {
        let m = single_pose_model();
        let q = ArmPose::new(10.0, 20.0, 0.0, 0.0).unwrap();
        assert!(matches!(m.resolve(&q), Err(Error::Unfitted(_))));
    }

    fn catalog() -> Vec<ArmPose> {
        [
            [0.0, 0.0, 0.0, 0.0],
            [90.0, 90.0, 0.0, 0.0],
            [180.0, 90.0, 0.0, 0.0],
            [0.0, 180.0, 0.0, 0.0],
            [30.0, 45.0, 20.0, 60.0],
            [60.0, 70.0, -30.0, 90.0],
        ]
        .iter()
        .map(|a| ArmPose::from_array(*a).unwrap())
        .collect()
    }

    #[test]
    fn blended_pose_interpolates_linear_semi_axes() {
        // semi-axis at p scales as 1/sqrt(a); choose a so that it is linear in pose
        let r50 = |p: &ArmPose| 12.0 + 0.01 * p.theta_s - 0.005 * p.phi_s + 0.004 * p.theta_e;
        let build = |p: &ArmPose| {
            let a = 0.48 / r50(p).powi(2);
            PoseCurves {
                pose: *p,
                shoulder: JointCurves {
                    phi: quad(a, 0.02),
                    theta: quad(a, 0.02),
                },
                elbow: JointCurves {
                    phi: quad(a, 0.02),
                    theta: quad(a, 0.02),
                },
            }
        };
        let m =
            FittedNoticeabilityModel::from_curves(catalog().iter().map(build).collect()).unwrap();
        let q = ArmPose::new(45.0, 60.0, 10.0, 30.0).unwrap();
        let set = m.level_set(Joint::Elbow, &q, 0.5).unwrap();
        assert_abs_diff_eq!(set.axes.phi_pos, r50(&q), epsilon = 1e-9);
        assert_abs_diff_eq!(set.axes.theta_neg, r50(&q), epsilon = 1e-9);
        let lm = m.linear_model(0.5).unwrap();
        let e = lm.entry(Joint::Elbow, Axis::Phi, Sign::Neg).unwrap();
        assert_abs_diff_eq!(e.fit.predict(&q), -r50(&q), epsilon = 1e-9);
        assert_abs_diff_eq!(
            m.baseline(Joint::Shoulder, &q).unwrap(),
            0.02,
            epsilon = 1e-12
        );
    }

    #[test]
    fn json_round_trip() {
        let m = FittedNoticeabilityModel::from_curves(
            catalog()
                .iter()
                .enumerate()
                .map(|(i, p)| curves(*p, 1.0 + i as f64 * 0.1))
                .collect(),
        )
        .unwrap();
        let text = m.to_json().unwrap();
        assert!(text.contains("\"schema_version\": 1"));
        let back = FittedNoticeabilityModel::from_json(&text).unwrap();
        assert_eq!(back.poses(), m.poses());
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn grid_export_shape() {
        let m = single_pose_model();
        let mut buf = Vec::new();
        m.write_probability_grid(Joint::Shoulder, &ArmPose::REST, 10.0, 5, &mut buf)
            .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "d_phi,d_theta,p");
        assert_eq!(text.lines().count(), 26);
    }

    proptest! {
        #[test]
        fn monotone_along_rays(ang in 0.0f64..360.0, r1 in 0.0f64..30.0, r2 in 0.0f64..30.0) {
            let m = single_pose_model();
            let (s, c) = ang.to_radians().sin_cos();
            let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            let f = |r: f64| probability_2d(Joint::Elbow, &ArmPose::REST,
                                            JointOffset2D::new(r * c, r * s), &m).unwrap();
            prop_assert!(f(lo) <= f(hi) + 1e-9);
        }

        #[test]
        fn level_sets_nest(p1 in 0.03f64..1.0, p2 in 0.03f64..1.0) {
            let m = single_pose_model();
            let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            let a = m.level_set(Joint::Shoulder, &ArmPose::REST, lo).unwrap().axes.as_array();
            let b = m.level_set(Joint::Shoulder, &ArmPose::REST, hi).unwrap().axes.as_array();
            for k in 0..4 {
                prop_assert!(a[k] <= b[k]);
            }
        }
    }
}
