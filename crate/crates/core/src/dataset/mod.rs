//! Trial records, sampling plans and aggregation into empirical noticing
//! probabilities.

pub(crate) mod io;
mod plan;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{ArmPose, CompositeOffset};

pub use io::{
    read_poses, read_trials, write_plan, write_poses, write_trials, write_trials_to, PLAN_HEADER,
    POSE_HEADER, TRIALS_HEADER,
};
pub use plan::{
    phase1_plan, phase2_plan, phase3_plan, polar_offset, PlanTask, SamplingPlan, PHASE1_OFFSETS,
    PHASE2_DIRECTIONS, PHASE2_RADII, PHASE3_ELBOW_DIRECTIONS, PHASE3_RADII,
    PHASE3_SHOULDER_DIRECTIONS,
};

/// Per-angle tolerance when matching a record's pose to the catalog.
pub const POSE_MATCH_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    P1,
    P2,
    P3,
}

impl Phase {
    pub fn number(self) -> u8 {
        match self {
            Phase::P1 => 1,
            Phase::P2 => 2,
            Phase::P3 => 3,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Phase::P1),
            2 => Ok(Phase::P2),
            3 => Ok(Phase::P3),
            _ => Err(Error::invalid(format!("phase must be 1, 2 or 3, got {n}"))),
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub participant: String,
    pub phase: Phase,
    pub pose: ArmPose,
    pub offset: CompositeOffset,
    pub noticed: bool,
}

/// Trial records plus the catalog of tested poses they refer to.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NoticeabilityDataset {
    records: Vec<TrialRecord>,
    pose_catalog: Vec<ArmPose>,
}

impl NoticeabilityDataset {
    /// Builds a dataset against an explicit catalog. Every record's pose must
    /// appear in the catalog.
    pub fn new(pose_catalog: Vec<ArmPose>, records: Vec<TrialRecord>) -> Result<Self> {
        for p in &pose_catalog {
            p.validate()?;
        }
        for (i, r) in records.iter().enumerate() {
            if !r.offset.is_finite() {
                return Err(Error::invalid(format!(
                    "record {i} has a non-finite offset"
                )));
            }
            if find_pose(&pose_catalog, &r.pose).is_none() {
                return Err(Error::invalid(format!(
                    "record {i} pose {} is not in the pose catalog",
                    r.pose
                )));
            }
        }
        Ok(NoticeabilityDataset {
            records,
            pose_catalog,
        })
    }

    /// Builds the catalog from the distinct poses in order of first appearance.
    pub fn from_records(records: Vec<TrialRecord>) -> Result<Self> {
        let mut catalog: Vec<ArmPose> = Vec::new();
        for r in &records {
            r.pose.validate()?;
            if find_pose(&catalog, &r.pose).is_none() {
                catalog.push(r.pose);
            }
        }
        Self::new(catalog, records)
    }

    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    pub fn pose_catalog(&self) -> &[ArmPose] {
        &self.pose_catalog
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn pose_index(&self, pose: &ArmPose) -> Option<usize> {
        find_pose(&self.pose_catalog, pose)
    }

    /// Records of one phase, keeping the catalog.
    pub fn filter_phase(&self, phase: Phase) -> NoticeabilityDataset {
        NoticeabilityDataset {
            records: self
                .records
                .iter()
                .filter(|r| r.phase == phase)
                .cloned()
                .collect(),
            pose_catalog: self.pose_catalog.clone(),
        }
    }

    /// Appends another dataset's records; its poses are merged into this catalog.
    pub fn extend(&mut self, other: NoticeabilityDataset) {
        for p in other.pose_catalog {
            if find_pose(&self.pose_catalog, &p).is_none() {
                self.pose_catalog.push(p);
            }
        }
        self.records.extend(other.records);
    }
}

pub(crate) fn find_pose(catalog: &[ArmPose], pose: &ArmPose) -> Option<usize> {
    catalog
        .iter()
        .position(|c| c.approx_eq(pose, POSE_MATCH_TOL))
}

/// Empirical noticing probability of one (pose, offset) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityCell {
    pub pose_index: usize,
    pub offset: CompositeOffset,
    pub n_trials: usize,
    pub n_noticed: usize,
    pub p_hat: f64,
}

fn offset_key(offset: &CompositeOffset) -> [i64; 4] {
    offset.to_array().map(|v| (v * 1e6).round() as i64)
}

/// Groups records by pose and offset (rounded to 1e-6 degrees).
pub fn aggregate(dataset: &NoticeabilityDataset) -> Vec<ProbabilityCell> {
    let mut cells: BTreeMap<(usize, [i64; 4]), ProbabilityCell> = BTreeMap::new();
    for r in &dataset.records {
        // validated on construction
        let pose_index = dataset.pose_index(&r.pose).expect("record pose in catalog");
        let cell = cells
            .entry((pose_index, offset_key(&r.offset)))
            .or_insert_with(|| ProbabilityCell {
                pose_index,
                offset: r.offset,
                n_trials: 0,
                n_noticed: 0,
                p_hat: 0.0,
            });
        cell.n_trials += 1;
        cell.n_noticed += usize::from(r.noticed);
    }
    cells
        .into_values()
        .map(|mut c| {
            c.p_hat = c.n_noticed as f64 / c.n_trials as f64;
            c
        })
        .collect()
}
