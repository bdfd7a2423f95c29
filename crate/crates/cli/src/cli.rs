use std::path::PathBuf;

use armoffset::harness::{ResponseModel, DEFAULT_FALSE_POSITIVE, DEFAULT_LAPSE};
use armoffset::offset_model::Combiner;
use armoffset::pose::{ArmPose, Joint};
use clap::{Args, Parser, Subcommand};

/// Noticeability model for user-avatar arm offsets.
///
/// Logging is controlled by the OFFSET_MODEL_LOG environment variable
/// (error, warn, info or debug).
#[derive(Debug, Parser)]
#[command(name = "armoffset", version, propagate_version = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the trial plan of one study phase as CSV.
    Plan(PlanArgs),
    /// Simulate a three-phase study with synthetic participants.
    Simulate(SimulateArgs),
    /// Fit a model from a trials CSV.
    Fit(FitArgs),
    /// Noticing probability of an offset, or a probability grid.
    QueryProb(QueryProbArgs),
    /// Composite offsets at or below a noticing probability, as JSON.
    ApplicableSet(ApplicableSetArgs),
    /// Amplify an arm trajectory towards an extreme pose.
    Amplify(AmplifyArgs),
    /// RULA upper-limb score of one pose or a pose CSV.
    Rula(RulaArgs),
    /// Pick representative poses from a pose sample by k-medoids.
    ClusterPoses(ClusterArgs),
    /// Simulate studies and report how well the fit recovers the truth.
    EvalRecovery(EvalArgs),
}

fn parse_pose(s: &str) -> Result<ArmPose, String> {
    s.parse().map_err(|e: armoffset::Error| e.to_string())
}

fn parse_joint(s: &str) -> Result<Joint, String> {
    s.parse().map_err(|e: armoffset::Error| e.to_string())
}

fn parse_combiner(s: &str) -> Result<Combiner, String> {
    s.parse().map_err(|e: armoffset::Error| e.to_string())
}

fn parse_response(s: &str) -> Result<ResponseModel, String> {
    s.parse().map_err(|e: armoffset::Error| e.to_string())
}

fn parse_probability(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(p) if (0.0..=1.0).contains(&p) => Ok(p),
        _ => Err(format!("expected a probability in [0, 1], got `{s}`")),
    }
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Study phase: 1 (strength), 2 (direction) or 3 (composite).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub phase: u8,
    /// Pose CSV (`phi_s,theta_s,phi_e,theta_e`). Defaults to the built-in
    /// ten-pose catalog. Phases 2 and 3 use its first four poses.
    #[arg(long)]
    pub poses: Option<PathBuf>,
    /// Fitted model supplying the 30% shoulder offsets of phase 3.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Probability of noticing a zero offset.
    #[arg(long, default_value_t = DEFAULT_FALSE_POSITIVE)]
    pub fp: f64,
    /// Probability of missing a saturated offset.
    #[arg(long, default_value_t = DEFAULT_LAPSE)]
    pub lapse: f64,
    /// Answer model: latent, bernoulli or stratified.
    #[arg(long, default_value = "latent", value_parser = parse_response)]
    pub response: ResponseModel,
    /// Judge elbow offsets from the elbow's own origin instead of the
    /// shifted center.
    #[arg(long)]
    pub no_shift: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 12)]
    pub participants: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Pose CSV; defaults to the built-in catalog.
    #[arg(long)]
    pub poses: Option<PathBuf>,
    /// Take phase-3 shoulder offsets from a fit of phases 1 and 2 instead
    /// of the oracle's ground truth.
    #[arg(long)]
    pub chained: bool,
    #[command(flatten)]
    pub oracle: OracleArgs,
    /// Output trials CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Trials CSV.
    #[arg(long)]
    pub trials: PathBuf,
    /// Output model JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct QueryProbArgs {
    /// Model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Arm pose `phi_s,theta_s,phi_e,theta_e`.
    #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
    pub pose: ArmPose,
    /// Offset: four values for a composite query, two with --joint.
    #[arg(long, allow_hyphen_values = true, required_unless_present = "grid_out")]
    pub offset: Option<String>,
    /// Query a single joint (shoulder or elbow).
    #[arg(long, value_parser = parse_joint)]
    pub joint: Option<Joint>,
    /// Combiner for composite queries: mean, max or noisy_or.
    #[arg(long, default_value = "mean", value_parser = parse_combiner)]
    pub combiner: Combiner,
    /// Write a `d_phi,d_theta,p` grid for --joint to this CSV instead.
    #[arg(long, requires = "joint", conflicts_with = "offset")]
    pub grid_out: Option<PathBuf>,
    /// Grid half-width in degrees.
    #[arg(long, default_value_t = 30.0)]
    pub extent: f64,
    /// Grid points per axis.
    #[arg(long, default_value_t = 61)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct ApplicableSetArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
    pub pose: ArmPose,
    /// Target noticing probability.
    #[arg(long, value_parser = parse_probability)]
    pub p: f64,
    #[arg(long, default_value = "mean", value_parser = parse_combiner)]
    pub combiner: Combiner,
    /// Number of member offsets to sample.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output JSON (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AmplifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Pose at which the offset reaches the level-p boundary.
    #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
    pub extreme: ArmPose,
    /// Noticing probability at the extreme pose.
    #[arg(long, default_value_t = armoffset::amplification::DEFAULT_MAX_PROBABILITY, value_parser = parse_probability)]
    pub p: f64,
    /// Share of the offset given to the shoulder; the elbow gets the rest.
    #[arg(long, default_value_t = 0.5)]
    pub delta_s: f64,
    #[arg(long, default_value = "mean", value_parser = parse_combiner)]
    pub combiner: Combiner,
    /// Trajectory CSV `t,phi_s,theta_s,phi_e,theta_e`.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct RulaSource {
    #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
    pub pose: Option<ArmPose>,
    /// Pose CSV; prints one scored row per pose.
    #[arg(long)]
    pub poses: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RulaArgs {
    #[command(flatten)]
    pub source: RulaSource,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Pose sample CSV.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Number of medoids; the four extreme poses are appended.
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output pose CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Evaluate this trials CSV instead of simulating.
    #[arg(long)]
    pub trials: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    pub participants: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of simulated studies, seeded `seed, seed + 1, ...`.
    #[arg(long, default_value_t = 1, conflicts_with = "trials")]
    pub runs: u64,
    #[arg(long)]
    pub chained: bool,
    #[command(flatten)]
    pub oracle: OracleArgs,
    /// Include per-axis, per-ellipse and per-shift detail.
    #[arg(long)]
    pub full: bool,
}
