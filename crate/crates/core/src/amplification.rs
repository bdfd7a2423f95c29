//! Dynamic movement amplification.
//!
//! The offset grows linearly with the ratio between the current joint angles
//! and those of an extreme pose, reaching the level-`p` boundary at the
//! extreme pose. `delta_s` and `delta_e = 1 - delta_s` split the offset
//! between shoulder and elbow.

use std::io::Write;
use std::path::Path;

use csv::WriterBuilder;
use serde::{Deserialize, Serialize};

use crate::dataset::io::{field_f64, fmt_f64, line_of, parse_err, read_rows};
use crate::error::{open, Error, Result};
use crate::fitting::FittedNoticeabilityModel;
use crate::offset_model::Combiner;
use crate::pose::{
    apply_offset, forward_kinematics, rula_arm_score, ArmPose, CompositeOffset, Joint,
    JointOffset2D, LimbLengths,
};

/// Bound on the current/extreme angle ratios.
pub const RATIO_LIMIT: f64 = 1.5;

pub const DEFAULT_MAX_PROBABILITY: f64 = 0.75;

#[derive(Debug, Clone, PartialEq)]
pub struct AmplifierConfig {
    extreme_pose: ArmPose,
    max_probability: f64,
    delta_s: f64,
    delta_e: f64,
    combiner: Combiner,
    shoulder_extreme: JointOffset2D,
    elbow_extreme: JointOffset2D,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseFrame {
    pub t: f64,
    pub pose: ArmPose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplifiedFrame {
    pub t: f64,
    pub physical: ArmPose,
    pub applied: CompositeOffset,
    #[serde(rename = "virtual")]
    pub virtual_pose: ArmPose,
}

fn ratio(current: f64, extreme: f64) -> f64 {
    if extreme == 0.0 {
        0.0
    } else {
        current / extreme
    }
}

// Scales both ratios together so that their direction is kept.
fn clamp_ratios(r: (f64, f64)) -> (f64, f64) {
    let m = r.0.abs().max(r.1.abs());
    if m > RATIO_LIMIT {
        let k = RATIO_LIMIT / m;
        (r.0 * k, r.1 * k)
    } else {
        r
    }
}

/// Configures amplification towards `extreme_pose` at noticing probability `p`.
pub fn configure(
    extreme_pose: &ArmPose,
    p: f64,
    delta_s: f64,
    model: &FittedNoticeabilityModel,
    combiner: Combiner,
) -> Result<AmplifierConfig> {
    extreme_pose.validate()?;
    if !(0.0..=1.0).contains(&delta_s) {
        return Err(Error::Config(format!(
            "delta_s must be in [0, 1], got {delta_s}"
        )));
    }
    let (phi_s, theta_s) = extreme_pose.joint_angles(Joint::Shoulder);
    let (phi_e, theta_e) = extreme_pose.joint_angles(Joint::Elbow);
    let shoulder_dir = phi_s != 0.0 || theta_s != 0.0;
    let elbow_dir = phi_e != 0.0 || theta_e != 0.0;
    if !shoulder_dir && !elbow_dir {
        return Err(Error::Config(
            "extreme pose has all-zero angles; nothing to amplify towards".into(),
        ));
    }
    let resolved = model.resolve(extreme_pose)?;
    let boundary = |joint: Joint, dir: (f64, f64)| -> Result<JointOffset2D> {
        let rj = resolved.joint(joint);
        if !(p > rj.baseline() && p <= 1.0) {
            return Err(Error::Config(format!(
                "probability {p} must exceed the {} baseline {} and be at most 1",
                joint.name(),
                rj.baseline()
            )));
        }
        let o = rj.axes(p).ray_boundary(dir.0, dir.1)?;
        if !o.is_finite() {
            return Err(Error::Config(format!(
                "{} level set at p = {p} is unbounded along the extreme direction",
                joint.name()
            )));
        }
        Ok(o)
    };
    let shoulder_extreme = if shoulder_dir {
        boundary(Joint::Shoulder, (phi_s, theta_s))?
    } else {
        JointOffset2D::ZERO
    };
    let elbow_extreme = if elbow_dir {
        boundary(Joint::Elbow, (phi_e, theta_e))?
    } else {
        JointOffset2D::ZERO
    };
    log::debug!(
        "amplifier: shoulder extreme offset {:?}, elbow extreme offset {:?}",
        shoulder_extreme,
        elbow_extreme
    );
    Ok(AmplifierConfig {
        extreme_pose: *extreme_pose,
        max_probability: p,
        delta_s,
        delta_e: 1.0 - delta_s,
        combiner,
        shoulder_extreme,
        elbow_extreme,
    })
}

impl AmplifierConfig {
    pub fn extreme_pose(&self) -> ArmPose {
        self.extreme_pose
    }

    pub fn max_probability(&self) -> f64 {
        self.max_probability
    }

    pub fn delta_s(&self) -> f64 {
        self.delta_s
    }

    pub fn delta_e(&self) -> f64 {
        self.delta_e
    }

    pub fn combiner(&self) -> Combiner {
        self.combiner
    }

    /// Shoulder offset on the level-`p` boundary along the extreme shoulder direction.
    pub fn shoulder_extreme(&self) -> JointOffset2D {
        self.shoulder_extreme
    }

    /// Elbow offset on the level-`p` boundary along the extreme elbow direction.
    pub fn elbow_extreme(&self) -> JointOffset2D {
        self.elbow_extreme
    }

    fn ratios(&self, pose: &ArmPose, joint: Joint) -> (f64, f64) {
        let (phi, theta) = pose.joint_angles(joint);
        let (phi_x, theta_x) = self.extreme_pose.joint_angles(joint);
        clamp_ratios((ratio(phi, phi_x), ratio(theta, theta_x)))
    }

    /// Offset applied at a physical pose.
    pub fn offset_at(&self, pose: &ArmPose) -> CompositeOffset {
        let rs = self.ratios(pose, Joint::Shoulder);
        let s = JointOffset2D::new(
            rs.0 * self.shoulder_extreme.d_phi,
            rs.1 * self.shoulder_extreme.d_theta,
        )
        .scale(self.delta_s);
        let re = self.ratios(pose, Joint::Elbow);
        // elbow maximum measured from the shifted center -s
        let q = JointOffset2D::new(
            re.0 * self.elbow_extreme.d_phi,
            re.1 * self.elbow_extreme.d_theta,
        );
        let e = (q - s).scale(self.delta_e);
        CompositeOffset::new(s, e)
    }

    /// Upper bound on `|offset(a) - offset(b)|_inf / |a - b|_inf`.
    pub fn lipschitz_bound(&self) -> f64 {
        let slope = |joint: Joint, o: JointOffset2D| {
            let (phi_x, theta_x) = self.extreme_pose.joint_angles(joint);
            ratio(o.d_phi, phi_x)
                .abs()
                .max(ratio(o.d_theta, theta_x).abs())
        };
        // the ratio clamp is a radial retraction, Lipschitz 2 in the max norm
        let ks = 2.0 * self.delta_s * slope(Joint::Shoulder, self.shoulder_extreme);
        let kq = 2.0 * slope(Joint::Elbow, self.elbow_extreme);
        ks.max(self.delta_e * (kq + ks))
    }
}

pub fn amplify_frame(config: &AmplifierConfig, frame: &PoseFrame) -> AmplifiedFrame {
    let applied = config.offset_at(&frame.pose);
    AmplifiedFrame {
        t: frame.t,
        physical: frame.pose,
        applied,
        virtual_pose: apply_offset(&frame.pose, &applied),
    }
}

/// Amplifies a trajectory with strictly increasing timestamps.
pub fn amplify_trajectory(
    config: &AmplifierConfig,
    frames: &[PoseFrame],
) -> Result<Vec<AmplifiedFrame>> {
    for (i, f) in frames.iter().enumerate() {
        if !f.t.is_finite() {
            return Err(Error::invalid(format!(
                "frame {i}: timestamp is not finite"
            )));
        }
        f.pose
            .validate()
            .map_err(|e| Error::invalid(format!("frame {i}: {e}")))?;
        if i > 0 && f.t <= frames[i - 1].t {
            return Err(Error::invalid(format!(
                "frame {i}: timestamp {} does not increase past {}",
                f.t,
                frames[i - 1].t
            )));
        }
    }
    Ok(frames.iter().map(|f| amplify_frame(config, f)).collect())
}

/// Physical pose whose amplified virtual pose equals `target`.
pub fn solve_physical_for_virtual(config: &AmplifierConfig, target: &ArmPose) -> Result<ArmPose> {
    target.validate()?;
    let t = target.to_array();
    let mut x = t;
    for _ in 0..500 {
        let pose = ArmPose::from_array(x).map_err(|_| {
            Error::invalid(format!(
                "no representable physical pose for virtual {target}"
            ))
        })?;
        let o = config.offset_at(&pose).to_array();
        let next = [t[0] - o[0], t[1] - o[1], t[2] - o[2], t[3] - o[3]];
        let step = next
            .iter()
            .zip(x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = next;
        if step < 1e-12 {
            return ArmPose::from_array(x);
        }
    }
    Err(Error::invalid(format!(
        "inverse amplification did not converge for virtual pose {target}"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathMetrics {
    pub physical_wrist_length: f64,
    pub virtual_wrist_length: f64,
    pub physical_elbow_length: f64,
    pub virtual_elbow_length: f64,
    /// Path length over the straight-line distance to the target.
    pub physical_wrist_ratio: f64,
    pub virtual_wrist_ratio: f64,
    pub physical_elbow_ratio: f64,
    pub virtual_elbow_ratio: f64,
    pub final_rula: u8,
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn path_length(points: &[[f64; 3]]) -> f64 {
    points.windows(2).map(|w| dist(w[0], w[1])).sum()
}

pub fn path_metrics(
    frames: &[AmplifiedFrame],
    lengths: &LimbLengths,
    target: &ArmPose,
) -> Result<PathMetrics> {
    if frames.len() < 2 {
        return Err(Error::InsufficientData {
            what: "frames",
            needed: 2,
            got: frames.len(),
        });
    }
    let goal = forward_kinematics(target, lengths);
    let phys: Vec<_> = frames
        .iter()
        .map(|f| forward_kinematics(&f.physical, lengths))
        .collect();
    let virt: Vec<_> = frames
        .iter()
        .map(|f| forward_kinematics(&f.virtual_pose, lengths))
        .collect();
    let ratio_of = |points: Vec<[f64; 3]>, goal: [f64; 3], what: &str| -> Result<(f64, f64)> {
        let len = path_length(&points);
        let d = dist(points[0], goal);
        if d <= 1e-12 {
            return Err(Error::invalid(format!(
                "{what} starts at the target; the path ratio is undefined"
            )));
        }
        Ok((len, len / d))
    };
    let (pw, pwr) = ratio_of(
        phys.iter().map(|j| j.wrist).collect(),
        goal.wrist,
        "physical wrist",
    )?;
    let (vw, vwr) = ratio_of(
        virt.iter().map(|j| j.wrist).collect(),
        goal.wrist,
        "virtual wrist",
    )?;
    let (pe, per) = ratio_of(
        phys.iter().map(|j| j.elbow).collect(),
        goal.elbow,
        "physical elbow",
    )?;
    let (ve, ver) = ratio_of(
        virt.iter().map(|j| j.elbow).collect(),
        goal.elbow,
        "virtual elbow",
    )?;
    Ok(PathMetrics {
        physical_wrist_length: pw,
        virtual_wrist_length: vw,
        physical_elbow_length: pe,
        virtual_elbow_length: ve,
        physical_wrist_ratio: pwr,
        virtual_wrist_ratio: vwr,
        physical_elbow_ratio: per,
        virtual_elbow_ratio: ver,
        final_rula: rula_arm_score(&frames[frames.len() - 1].physical),
    })
}

pub const TRAJECTORY_HEADER: [&str; 5] = ["t", "phi_s", "theta_s", "phi_e", "theta_e"];

pub const AMPLIFIED_HEADER: [&str; 13] = [
    "t",
    "phi_s",
    "theta_s",
    "phi_e",
    "theta_e",
    "off_phi_s",
    "off_theta_s",
    "off_phi_e",
    "off_theta_e",
    "v_phi_s",
    "v_theta_s",
    "v_phi_e",
    "v_theta_e",
];

/// Reads a trajectory CSV (`t,phi_s,theta_s,phi_e,theta_e`); the header line is optional.
pub fn read_trajectory(path: impl AsRef<Path>) -> Result<Vec<PoseFrame>> {
    let path = path.as_ref();
    let rows = read_rows(path, open(path)?)?;
    let mut frames = Vec::with_capacity(rows.len());
    for (i, rec) in rows.iter().enumerate() {
        if i == 0 && rec.iter().eq(TRAJECTORY_HEADER.iter().copied()) {
            continue;
        }
        if rec.len() != TRAJECTORY_HEADER.len() {
            return Err(parse_err(
                path,
                line_of(rec),
                format!(
                    "expected {} columns, got {}",
                    TRAJECTORY_HEADER.len(),
                    rec.len()
                ),
            ));
        }
        let mut v = [0.0; 5];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = field_f64(path, rec, k, TRAJECTORY_HEADER[k])?;
        }
        let pose = ArmPose::new(v[1], v[2], v[3], v[4])
            .map_err(|e| parse_err(path, line_of(rec), e.to_string()))?;
        frames.push(PoseFrame { t: v[0], pose });
    }
    Ok(frames)
}

pub fn write_amplified(frames: &[AmplifiedFrame], out: impl Write) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(out);
    w.write_record(AMPLIFIED_HEADER)?;
    for f in frames {
        let mut row = Vec::with_capacity(AMPLIFIED_HEADER.len());
        row.push(fmt_f64(f.t));
        row.extend(f.physical.to_array().map(fmt_f64));
        row.extend(f.applied.to_array().map(fmt_f64));
        row.extend(f.virtual_pose.to_array().map(fmt_f64));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
