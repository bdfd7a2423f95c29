use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Phase;
use crate::error::{Error, Result};
use crate::fitting::QuadrantAxes;
use crate::pose::{ArmPose, Axis, CompositeOffset, Joint, JointOffset2D};

pub const DEFAULT_FALSE_POSITIVE: f64 = 0.02;
pub const DEFAULT_LAPSE: f64 = 0.02;

// Lower bound on a ground-truth 50% offset, far from any catalog pose.
const MIN_R50: f64 = 5.0;

/// How simulated participants turn a ground-truth probability into answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseModel {
    /// One latent sensitivity draw per participant and stimulus block; a
    /// trial is noticed when the draw falls below the trial's probability.
    #[default]
    LatentThreshold,
    /// An independent Bernoulli draw per trial.
    Bernoulli,
    /// Evenly spread thresholds `(i + 0.5) / n` across participants, no randomness.
    Stratified,
}

impl ResponseModel {
    pub fn name(self) -> &'static str {
        match self {
            ResponseModel::LatentThreshold => "latent",
            ResponseModel::Bernoulli => "bernoulli",
            ResponseModel::Stratified => "stratified",
        }
    }
}

impl fmt::Display for ResponseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ResponseModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "latent" | "latent_threshold" => Ok(ResponseModel::LatentThreshold),
            "bernoulli" => Ok(ResponseModel::Bernoulli),
            "stratified" | "noiseless" => Ok(ResponseModel::Stratified),
            other => Err(Error::invalid(format!(
                "unknown response model `{other}` (expected latent, bernoulli or stratified)"
            ))),
        }
    }
}

/// Ground-truth 50% offset of one joint axis as a linear function of pose:
/// `A*phi_s + B*theta_s + C*phi_e + D*theta_e + E` degrees.
pub type TruthCoefficients = [f64; 5];

/// Synthetic participant population with a known noticeability function.
///
/// Each joint follows `fp + (1 - fp - lapse) * min(1, k * (x^2/r_phi^2 + y^2/r_theta^2))`
/// with `k = (0.5 - fp) / (1 - fp - lapse)`, so the 50% level set is the
/// ellipse with semi-axes `(r_phi, r_theta)`. A trial offsetting only one
/// joint is judged by that joint alone; with both joints offset the two
/// probabilities are averaged, the elbow evaluated relative to its shifted
/// center `-s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOracle {
    /// Rows: shoulder phi, shoulder theta, elbow phi, elbow theta.
    pub truth: [TruthCoefficients; 4],
    pub false_positive: f64,
    pub lapse: f64,
    pub shift_enabled: bool,
    pub response: ResponseModel,
}

impl Default for SyntheticOracle {
    fn default() -> Self {
        SyntheticOracle {
            truth: [
                [0.004, -0.008, 0.002, 0.003, 12.5],
                [-0.003, -0.006, 0.001, 0.004, 12.5],
                [0.002, 0.006, -0.004, -0.008, 14.0],
                [0.003, 0.004, 0.002, -0.010, 13.5],
            ],
            false_positive: DEFAULT_FALSE_POSITIVE,
            lapse: DEFAULT_LAPSE,
            shift_enabled: true,
            response: ResponseModel::LatentThreshold,
        }
    }
}

fn row(joint: Joint, axis: Axis) -> usize {
    match (joint, axis) {
        (Joint::Shoulder, Axis::Phi) => 0,
        (Joint::Shoulder, Axis::Theta) => 1,
        (Joint::Elbow, Axis::Phi) => 2,
        (Joint::Elbow, Axis::Theta) => 3,
    }
}

impl SyntheticOracle {
    pub fn new(false_positive: f64, lapse: f64, response: ResponseModel) -> Result<Self> {
        let o = SyntheticOracle {
            false_positive,
            lapse,
            response,
            ..Default::default()
        };
        o.validate()?;
        Ok(o)
    }

    /// Noise-free population: no false positives or lapses, stratified answers.
    pub fn noiseless() -> Self {
        SyntheticOracle {
            false_positive: 0.0,
            lapse: 0.0,
            response: ResponseModel::Stratified,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.1).contains(&self.false_positive) || !(0.0..=0.1).contains(&self.lapse) {
            return Err(Error::invalid(format!(
                "false-positive and lapse rates must lie in [0, 0.1], got {} and {}",
                self.false_positive, self.lapse
            )));
        }
        if self.truth.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("truth coefficients must be finite"));
        }
        Ok(())
    }

    fn gain(&self) -> f64 {
        1.0 - self.false_positive - self.lapse
    }

    fn k(&self) -> f64 {
        (0.5 - self.false_positive) / self.gain()
    }

    /// True 50% offset magnitude on one axis.
    pub fn r50(&self, joint: Joint, axis: Axis, pose: &ArmPose) -> f64 {
        let c = &self.truth[row(joint, axis)];
        let v = pose.to_array();
        (c[0] * v[0] + c[1] * v[1] + c[2] * v[2] + c[3] * v[3] + c[4]).max(MIN_R50)
    }

    /// True single-joint probability.
    pub fn joint_probability(&self, joint: Joint, pose: &ArmPose, o: JointOffset2D) -> f64 {
        let rp = self.r50(joint, Axis::Phi, pose);
        let rt = self.r50(joint, Axis::Theta, pose);
        let s = self.k() * ((o.d_phi / rp).powi(2) + (o.d_theta / rt).powi(2));
        self.false_positive + self.gain() * s.min(1.0)
    }

    /// True composite probability of a trial.
    pub fn ground_truth(&self, pose: &ArmPose, offset: &CompositeOffset) -> f64 {
        let s = offset.shoulder;
        let e = if self.shift_enabled {
            offset.elbow + offset.shoulder
        } else {
            offset.elbow
        };
        match (s.is_zero(), offset.elbow.is_zero()) {
            (true, true) => self.false_positive,
            (false, true) => self.joint_probability(Joint::Shoulder, pose, s),
            (true, false) => self.joint_probability(Joint::Elbow, pose, offset.elbow),
            (false, false) => {
                0.5 * (self.joint_probability(Joint::Shoulder, pose, s)
                    + self.joint_probability(Joint::Elbow, pose, e))
            }
        }
    }

    /// True single-axis offset magnitude at probability `p`.
    pub fn level(&self, joint: Joint, axis: Axis, pose: &ArmPose, p: f64) -> Result<f64> {
        let lo = self.false_positive;
        let hi = 1.0 - self.lapse;
        if !(p >= lo && p <= hi) {
            return Err(Error::invalid(format!(
                "probability {p} outside the oracle's range [{lo}, {hi}]"
            )));
        }
        Ok(self.r50(joint, axis, pose) * ((p - lo) / (0.5 - lo)).sqrt())
    }

    /// True level-`p` set of one joint.
    pub fn level_axes(&self, joint: Joint, pose: &ArmPose, p: f64) -> Result<QuadrantAxes> {
        let phi = self.level(joint, Axis::Phi, pose, p)?;
        let theta = self.level(joint, Axis::Theta, pose, p)?;
        Ok(QuadrantAxes {
            phi_pos: phi,
            phi_neg: phi,
            theta_pos: theta,
            theta_neg: theta,
        })
    }

    /// One Bernoulli answer for a trial.
    pub fn respond<R: Rng + ?Sized>(
        &self,
        pose: &ArmPose,
        offset: &CompositeOffset,
        rng: &mut R,
    ) -> bool {
        rng.random::<f64>() < self.ground_truth(pose, offset)
    }
}

/// Stimulus block sharing one latent draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Block {
    Axis(usize),
    Joint(usize),
    Shoulder([i64; 2]),
    Single(u64),
}

fn block_of(phase: Phase, offset: &CompositeOffset, counter: &mut u64) -> Block {
    let v = offset.to_array();
    let single = |counter: &mut u64| {
        *counter += 1;
        Block::Single(*counter)
    };
    match phase {
        Phase::P1 => match v.iter().position(|x| *x != 0.0) {
            Some(axis) => Block::Axis(axis),
            None => single(counter),
        },
        Phase::P2 => {
            if !offset.shoulder.is_zero() {
                Block::Joint(0)
            } else if !offset.elbow.is_zero() {
                Block::Joint(1)
            } else {
                single(counter)
            }
        }
        Phase::P3 => Block::Shoulder([v[0], v[1]].map(|x| (x * 1e6).round() as i64)),
    }
}

/// Answer stream of one simulated participant.
pub struct Participant<'a> {
    oracle: &'a SyntheticOracle,
    index: usize,
    n_participants: usize,
    rng: ChaCha8Rng,
    latent: BTreeMap<(Phase, usize, Block), f64>,
    singles: u64,
}

impl<'a> Participant<'a> {
    pub fn new(
        oracle: &'a SyntheticOracle,
        index: usize,
        n_participants: usize,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        Participant {
            oracle,
            index,
            n_participants: n_participants.max(1),
            rng,
            latent: BTreeMap::new(),
            singles: 0,
        }
    }

    pub fn answer(
        &mut self,
        phase: Phase,
        pose_index: usize,
        pose: &ArmPose,
        offset: &CompositeOffset,
    ) -> bool {
        let g = self.oracle.ground_truth(pose, offset);
        match self.oracle.response {
            ResponseModel::Bernoulli => self.rng.random::<f64>() < g,
            ResponseModel::Stratified => {
                (self.index as f64 + 0.5) / (self.n_participants as f64) < g
            }
            ResponseModel::LatentThreshold => {
                let block = block_of(phase, offset, &mut self.singles);
                let rng = &mut self.rng;
                let u = *self
                    .latent
                    .entry((phase, pose_index, block))
                    .or_insert_with(|| rng.random::<f64>());
                u < g
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pose() -> ArmPose {
        ArmPose::new(60.0, 45.0, 0.0, 60.0).unwrap()
    }

    #[test]
    fn zero_offset_is_false_positive_rate() {
        let o = SyntheticOracle::default();
        assert_eq!(o.ground_truth(&pose(), &CompositeOffset::ZERO), 0.02);
        let clean = SyntheticOracle::noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert!(!clean.respond(&pose(), &CompositeOffset::ZERO, &mut rng));
        }
    }

    #[test]
    fn far_offset_saturates() {
        let o = SyntheticOracle::noiseless();
        let far = CompositeOffset::from_array([80.0, 0.0, 0.0, 0.0]);
        assert_eq!(o.ground_truth(&pose(), &far), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert!(o.respond(&pose(), &far, &mut rng));
        }
    }

    #[test]
    fn levels_hit_their_probability() {
        let o = SyntheticOracle::default();
        for joint in Joint::ALL {
            for axis in Axis::ALL {
                for p in [0.1, 0.3, 0.5, 0.9] {
                    let x = o.level(joint, axis, &pose(), p).unwrap();
                    let off = match axis {
                        Axis::Phi => JointOffset2D::new(x, 0.0),
                        Axis::Theta => JointOffset2D::new(0.0, -x),
                    };
                    assert_abs_diff_eq!(
                        o.joint_probability(joint, &pose(), off),
                        p,
                        epsilon = 1e-12
                    );
                }
            }
        }
        assert_abs_diff_eq!(
            o.level(Joint::Elbow, Axis::Phi, &pose(), 0.5).unwrap(),
            o.r50(Joint::Elbow, Axis::Phi, &pose()),
            epsilon = 1e-12
        );
    }

    #[test]
    fn bernoulli_frequency_within_three_sigma() {
        let o = SyntheticOracle::default();
        let off = CompositeOffset::from_array([9.0, 0.0, 0.0, 0.0]);
        let g = o.ground_truth(&pose(), &off);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 10_000;
        let hits = (0..n)
            .filter(|_| o.respond(&pose(), &off, &mut rng))
            .count();
        let sigma = (n as f64 * g * (1.0 - g)).sqrt();
        assert!(
            (hits as f64 - n as f64 * g).abs() <= 3.0 * sigma,
            "{hits} vs {g}"
        );
    }

    #[test]
    fn shift_centers_elbow() {
        let o = SyntheticOracle::default();
        let s = JointOffset2D::new(6.0, -4.0);
        let centered = CompositeOffset::new(s, -s);
        let expect = 0.5 * (o.joint_probability(Joint::Shoulder, &pose(), s) + o.false_positive);
        assert_abs_diff_eq!(o.ground_truth(&pose(), &centered), expect, epsilon = 1e-15);
    }

    #[test]
    fn latent_answers_are_marginally_calibrated() {
        let o = SyntheticOracle::default();
        let off = CompositeOffset::from_array([0.0, 0.0, 0.0, 12.0]);
        let g = o.ground_truth(&pose(), &off);
        let n = 4000;
        let hits = (0..n)
            .filter(|i| Participant::new(&o, *i, n, 5).answer(Phase::P1, 0, &pose(), &off))
            .count();
        let sigma = (n as f64 * g * (1.0 - g)).sqrt();
        assert!((hits as f64 - n as f64 * g).abs() <= 3.0 * sigma);
    }

    #[test]
    fn stratified_is_deterministic_quantile() {
        let o = SyntheticOracle::noiseless();
        let off = CompositeOffset::from_array([0.0, 8.0, 0.0, 0.0]);
        let g = o.ground_truth(&pose(), &off);
        let n = 200;
        let hits = (0..n)
            .filter(|i| Participant::new(&o, *i, n, 0).answer(Phase::P1, 0, &pose(), &off))
            .count();
        assert!((hits as f64 / n as f64 - g).abs() <= 1.0 / n as f64);
    }

    #[test]
    fn parse_response_model() {
        assert_eq!(
            "latent".parse::<ResponseModel>().unwrap(),
            ResponseModel::LatentThreshold
        );
        assert_eq!(
            "noiseless".parse::<ResponseModel>().unwrap(),
            ResponseModel::Stratified
        );
        assert!("coin".parse::<ResponseModel>().is_err());
        assert!(SyntheticOracle::new(0.2, 0.0, ResponseModel::Bernoulli).is_err());
    }
}
