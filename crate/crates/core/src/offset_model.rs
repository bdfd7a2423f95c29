//! Two-joint composite model: the elbow shift rule, combiners and the
//! applicable offset set for a target noticing probability.
//!
//! A shoulder offset `s` moves the center of the elbow distribution to `-s`,
//! so the elbow term is evaluated at `e + s`.

use std::fmt;
use std::str::FromStr;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{FittedNoticeabilityModel, QuadrantAxes, ResolvedPose};
use crate::pose::{ArmPose, CompositeOffset, JointOffset2D};

/// Consecutive rejections after which sampling gives up.
pub const MAX_REJECTIONS: usize = 1_000_000;

// Sampling boxes never extend past this many degrees from their center.
const BOX_LIMIT: f64 = 180.0;

/// Rule combining the shoulder and shifted-elbow probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combiner {
    #[default]
    Mean,
    Max,
    NoisyOr,
}

impl Combiner {
    pub const ALL: [Combiner; 3] = [Combiner::Mean, Combiner::Max, Combiner::NoisyOr];

    pub fn combine(self, a: f64, b: f64) -> f64 {
        let v = match self {
            Combiner::Mean => 0.5 * (a + b),
            Combiner::Max => a.max(b),
            Combiner::NoisyOr => 1.0 - (1.0 - a) * (1.0 - b),
        };
        v.clamp(0.0, 1.0)
    }

    pub fn name(self) -> &'static str {
        match self {
            Combiner::Mean => "mean",
            Combiner::Max => "max",
            Combiner::NoisyOr => "noisy_or",
        }
    }
}

impl fmt::Display for Combiner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Combiner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "mean" => Ok(Combiner::Mean),
            "max" => Ok(Combiner::Max),
            "noisy_or" => Ok(Combiner::NoisyOr),
            other => Err(Error::invalid(format!(
                "unknown combiner `{other}` (expected mean, max or noisy_or)"
            ))),
        }
    }
}

/// Elbow offset as seen by the elbow distribution once it is re-centered at
/// the negated shoulder offset.
pub fn shifted_elbow(offset: &CompositeOffset) -> JointOffset2D {
    offset.elbow + offset.shoulder
}

/// Component probabilities `(F_s(s), F_e(e + s))` on an already resolved pose.
pub fn component_probabilities(resolved: &ResolvedPose, offset: &CompositeOffset) -> (f64, f64) {
    (
        resolved.shoulder.probability(offset.shoulder),
        resolved.elbow.probability(shifted_elbow(offset)),
    )
}

pub fn composite_on(resolved: &ResolvedPose, offset: &CompositeOffset, combiner: Combiner) -> f64 {
    let (ps, pe) = component_probabilities(resolved, offset);
    combiner.combine(ps, pe)
}

/// Noticing probability of a two-joint offset at `pose`.
pub fn composite_probability(
    pose: &ArmPose,
    offset: &CompositeOffset,
    model: &FittedNoticeabilityModel,
    combiner: Combiner,
) -> Result<f64> {
    if !offset.is_finite() {
        return Err(Error::invalid("offset must be finite"));
    }
    Ok(composite_on(&model.resolve(pose)?, offset, combiner))
}

/// All composite offsets at `pose` whose noticing probability is at most `p`.
///
/// Candidates are bounded per joint by the level `min(2p, 1)` regions
/// (the elbow one centered at `-s`); membership is the exact composite test.
#[derive(Debug, Clone)]
pub struct ApplicableSet {
    pose: ArmPose,
    p: f64,
    combiner: Combiner,
    resolved: ResolvedPose,
    candidate_level: f64,
    shoulder_region: QuadrantAxes,
    elbow_region: QuadrantAxes,
}

impl ApplicableSet {
    pub fn pose(&self) -> ArmPose {
        self.pose
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn combiner(&self) -> Combiner {
        self.combiner
    }

    /// Level of the per-joint candidate regions.
    pub fn candidate_level(&self) -> f64 {
        self.candidate_level
    }

    pub fn shoulder_region(&self) -> QuadrantAxes {
        self.shoulder_region
    }

    /// Elbow candidate region relative to its shifted center `-s`.
    pub fn elbow_region(&self) -> QuadrantAxes {
        self.elbow_region
    }

    pub fn resolved(&self) -> &ResolvedPose {
        &self.resolved
    }

    pub fn composite(&self, offset: &CompositeOffset) -> f64 {
        composite_on(&self.resolved, offset, self.combiner)
    }

    pub fn contains(&self, offset: &CompositeOffset) -> bool {
        let (ps, pe) = component_probabilities(&self.resolved, offset);
        ps <= self.candidate_level
            && pe <= self.candidate_level
            && self.combiner.combine(ps, pe) <= self.p
    }
}

/// Builds the applicable set for probability `p`.
pub fn applicable_set(
    pose: &ArmPose,
    p: f64,
    model: &FittedNoticeabilityModel,
    combiner: Combiner,
) -> Result<ApplicableSet> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(format!(
            "probability must be in (0, 1], got {p}"
        )));
    }
    let resolved = model.resolve(pose)?;
    let base = combiner.combine(resolved.shoulder.baseline(), resolved.elbow.baseline());
    if p < base - 1e-12 {
        return Err(Error::EmptySet(format!(
            "p = {p} is below the combined baseline {base} at pose {pose}"
        )));
    }
    let candidate_level = (2.0 * p).min(1.0);
    Ok(ApplicableSet {
        pose: *pose,
        p,
        combiner,
        shoulder_region: resolved.shoulder.axes(candidate_level),
        elbow_region: resolved.elbow.axes(candidate_level),
        candidate_level,
        resolved,
    })
}

fn capped_box(q: &QuadrantAxes) -> (f64, f64, f64, f64) {
    let (a, b, c, d) = q.bounding_box();
    (
        a.max(-BOX_LIMIT),
        b.min(BOX_LIMIT),
        c.max(-BOX_LIMIT),
        d.min(BOX_LIMIT),
    )
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Draws `n` members by rejection sampling in the candidate boxes.
pub fn sample_applicable(set: &ApplicableSet, n: usize, seed: u64) -> Result<Vec<CompositeOffset>> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let sb = capped_box(&set.shoulder_region);
    let eb = capped_box(&set.elbow_region);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut misses = 0usize;
    while out.len() < n {
        let s = JointOffset2D::new(uniform(&mut rng, sb.0, sb.1), uniform(&mut rng, sb.2, sb.3));
        let rel = JointOffset2D::new(uniform(&mut rng, eb.0, eb.1), uniform(&mut rng, eb.2, eb.3));
        let candidate = CompositeOffset::new(s, rel - s);
        if set.contains(&candidate) {
            out.push(candidate);
            misses = 0;
        } else {
            misses += 1;
            if misses >= MAX_REJECTIONS {
                return Err(Error::EmptySet(format!(
                    "no member found after {MAX_REJECTIONS} draws at p = {}",
                    set.p
                )));
            }
        }
    }
    Ok(out)
}
