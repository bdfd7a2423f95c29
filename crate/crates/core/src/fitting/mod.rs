//! Fitting of the noticeability model: per-axis quadratic curves, quadrant
//! ellipse level sets and the cross-pose linear relation.

mod ellipse;
mod linear;
mod model;
mod quadratic;

pub use ellipse::{
    ellipse_from_single_axis, max_offset_along_direction, EllipseLevelSet, QuadrantAxes,
};
pub use linear::{fit_pose_linear, LinearCoefficients, PoseDesign};
pub use model::{
    fit_model, fit_model_from_cells, probability_2d, FittedNoticeabilityModel, JointCurves,
    LinearEntry, PoseCurves, PoseLinearModel, ResolvedJoint, ResolvedPose, Sign, EXPORTED_LEVELS,
    MODEL_SCHEMA_VERSION,
};
pub use quadratic::{fit_axis_quadratic, invert_quadratic, AxisQuadratic, SingleAxisLevels};
