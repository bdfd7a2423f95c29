//! Synthetic participants, study simulation, model-recovery evaluation and
//! representative-pose selection.

pub mod catalog;
pub mod oracle;
pub mod recovery;
pub mod study;

pub use catalog::{
    default_catalog, select_representative_poses, CatalogEntry, PoseCatalog, Provenance,
    EXTREME_POSES,
};
pub use oracle::{
    Participant, ResponseModel, SyntheticOracle, TruthCoefficients, DEFAULT_FALSE_POSITIVE,
    DEFAULT_LAPSE,
};
pub use recovery::{
    evaluate_recovery, evaluate_recovery_cells, AxisRecovery, EllipseRecovery, RecoveryReport,
    ShiftRecovery, RECOVERY_LEVEL,
};
pub use study::{
    model_shoulder_rings, oracle_shoulder_rings, shoulder_ring, simulate_study,
    simulate_study_with, study_plans, StudyCells, StudyOptions, PHASE3_SHOULDER_LEVEL, SWEEP_POSES,
};
