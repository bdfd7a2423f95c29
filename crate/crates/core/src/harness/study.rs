use super::oracle::{Participant, SyntheticOracle};
use crate::dataset::{
    aggregate, phase1_plan, phase2_plan, phase3_plan, polar_offset, NoticeabilityDataset, Phase,
    ProbabilityCell, SamplingPlan, TrialRecord, PHASE3_SHOULDER_DIRECTIONS,
};
use crate::error::{Error, Result};
use crate::fitting::{fit_model, FittedNoticeabilityModel, QuadrantAxes};
use crate::pose::{ArmPose, Joint, JointOffset2D};

/// Poses used by the direction and composite sweeps.
pub const SWEEP_POSES: usize = 4;

/// Probability level of the composite sweep's shoulder offsets.
pub const PHASE3_SHOULDER_LEVEL: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StudyOptions {
    /// Take the composite sweep's shoulder offsets from a fit of the
    /// strength sweep instead of the oracle's ground truth.
    pub chained: bool,
}

fn plan_seed(seed: u64, phase: Phase) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(phase.number() as u64)
}

/// Eight shoulder offsets, 45 degrees apart, on the boundary of `axes`.
pub fn shoulder_ring(axes: &QuadrantAxes) -> Result<Vec<JointOffset2D>> {
    (0..PHASE3_SHOULDER_DIRECTIONS)
        .map(|d| {
            let dir = polar_offset(1.0, d as f64 * 45.0);
            axes.ray_boundary(dir.d_phi, dir.d_theta)
        })
        .collect()
}

/// Shoulder offsets at the oracle's true composite-sweep level.
pub fn oracle_shoulder_rings(
    oracle: &SyntheticOracle,
    poses: &[ArmPose],
) -> Result<Vec<Vec<JointOffset2D>>> {
    poses
        .iter()
        .map(|p| shoulder_ring(&oracle.level_axes(Joint::Shoulder, p, PHASE3_SHOULDER_LEVEL)?))
        .collect()
}

/// Shoulder offsets at a fitted model's composite-sweep level.
pub fn model_shoulder_rings(
    model: &FittedNoticeabilityModel,
    poses: &[ArmPose],
) -> Result<Vec<Vec<JointOffset2D>>> {
    poses
        .iter()
        .map(|p| {
            let set = model.level_set(Joint::Shoulder, p, PHASE3_SHOULDER_LEVEL)?;
            shoulder_ring(&set.axes)
        })
        .collect()
}

/// The three plans of a study over `catalog`.
pub fn study_plans(
    shoulder_rings: &[Vec<JointOffset2D>],
    catalog: &[ArmPose],
    seed: u64,
) -> Result<[SamplingPlan; 3]> {
    let sweep = &catalog[..catalog.len().min(SWEEP_POSES)];
    Ok([
        phase1_plan(catalog, plan_seed(seed, Phase::P1))?,
        phase2_plan(sweep, plan_seed(seed, Phase::P2))?,
        phase3_plan(sweep, shoulder_rings, plan_seed(seed, Phase::P3))?,
    ])
}

fn participant_id(i: usize) -> String {
    format!("p{:02}", i + 1)
}

fn answer_plan(
    plan: &SamplingPlan,
    catalog: &[ArmPose],
    participants: &mut [Participant<'_>],
    out: &mut Vec<TrialRecord>,
) {
    for (i, person) in participants.iter_mut().enumerate() {
        for task in &plan.tasks {
            let pose = catalog[task.pose_index];
            out.push(TrialRecord {
                participant: participant_id(i),
                phase: plan.phase,
                pose,
                offset: task.offset,
                noticed: person.answer(plan.phase, task.pose_index, &pose, &task.offset),
            });
        }
    }
}

/// Runs the three-phase study with simulated participants.
pub fn simulate_study(
    oracle: &SyntheticOracle,
    catalog: &[ArmPose],
    n_participants: usize,
    seed: u64,
) -> Result<NoticeabilityDataset> {
    simulate_study_with(
        oracle,
        catalog,
        n_participants,
        seed,
        StudyOptions::default(),
    )
}

pub fn simulate_study_with(
    oracle: &SyntheticOracle,
    catalog: &[ArmPose],
    n_participants: usize,
    seed: u64,
    options: StudyOptions,
) -> Result<NoticeabilityDataset> {
    oracle.validate()?;
    if n_participants == 0 {
        return Err(Error::invalid("need at least one participant"));
    }
    if catalog.is_empty() {
        return Err(Error::invalid("pose catalog is empty"));
    }
    let sweep = &catalog[..catalog.len().min(SWEEP_POSES)];
    let mut participants: Vec<Participant<'_>> = (0..n_participants)
        .map(|i| Participant::new(oracle, i, n_participants, seed))
        .collect();

    let mut records = Vec::new();
    let p1 = phase1_plan(catalog, plan_seed(seed, Phase::P1))?;
    answer_plan(&p1, catalog, &mut participants, &mut records);
    let p2 = phase2_plan(sweep, plan_seed(seed, Phase::P2))?;
    answer_plan(&p2, catalog, &mut participants, &mut records);

    let rings = if options.chained {
        let so_far = NoticeabilityDataset::new(catalog.to_vec(), records.clone())?;
        model_shoulder_rings(&fit_model(&so_far)?, sweep)?
    } else {
        oracle_shoulder_rings(oracle, sweep)?
    };
    let p3 = phase3_plan(sweep, &rings, plan_seed(seed, Phase::P3))?;
    answer_plan(&p3, catalog, &mut participants, &mut records);
    log::info!(
        "simulated {} records from {n_participants} participants",
        records.len()
    );
    NoticeabilityDataset::new(catalog.to_vec(), records)
}

/// Aggregated cells of a study split by phase.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyCells {
    pub catalog: Vec<ArmPose>,
    pub phase1: Vec<ProbabilityCell>,
    pub phase2: Vec<ProbabilityCell>,
    pub phase3: Vec<ProbabilityCell>,
}

impl StudyCells {
    pub fn from_dataset(dataset: &NoticeabilityDataset) -> Self {
        let by = |phase| aggregate(&dataset.filter_phase(phase));
        StudyCells {
            catalog: dataset.pose_catalog().to_vec(),
            phase1: by(Phase::P1),
            phase2: by(Phase::P2),
            phase3: by(Phase::P3),
        }
    }

    /// Cells holding the oracle's exact probabilities, as if answered by
    /// infinitely many participants.
    pub fn expected(oracle: &SyntheticOracle, catalog: &[ArmPose], seed: u64) -> Result<Self> {
        let sweep = &catalog[..catalog.len().min(SWEEP_POSES)];
        let rings = oracle_shoulder_rings(oracle, sweep)?;
        let plans = study_plans(&rings, catalog, seed)?;
        let cells = |plan: &SamplingPlan| {
            let mut v: Vec<ProbabilityCell> = plan
                .tasks
                .iter()
                .map(|t| ProbabilityCell {
                    pose_index: t.pose_index,
                    offset: t.offset,
                    n_trials: 1,
                    n_noticed: 0,
                    p_hat: oracle.ground_truth(&catalog[t.pose_index], &t.offset),
                })
                .collect();
            // identical tasks (the shared zero offset) collapse into one cell
            v.sort_by(|a, b| {
                (a.pose_index, a.offset.to_array().map(f64::to_bits))
                    .cmp(&(b.pose_index, b.offset.to_array().map(f64::to_bits)))
            });
            v.dedup_by(|a, b| a.pose_index == b.pose_index && a.offset == b.offset);
            v
        };
        Ok(StudyCells {
            catalog: catalog.to_vec(),
            phase1: cells(&plans[0]),
            phase2: cells(&plans[1]),
            phase3: cells(&plans[2]),
        })
    }

    pub fn trial_counts(&self) -> [usize; 3] {
        let n = |c: &[ProbabilityCell]| c.iter().map(|x| x.n_trials).sum();
        [n(&self.phase1), n(&self.phase2), n(&self.phase3)]
    }
}
