use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use armoffset::amplification::{amplify_trajectory, configure, read_trajectory, write_amplified};
use armoffset::dataset::{
    phase1_plan, phase2_plan, phase3_plan, read_poses, read_trials, write_plan, write_poses,
    write_trials_to,
};
use armoffset::fitting::{fit_model, probability_2d, FittedNoticeabilityModel, QuadrantAxes};
use armoffset::harness::{
    default_catalog, evaluate_recovery, model_shoulder_rings, select_representative_poses,
    simulate_study_with, RecoveryReport, StudyOptions, SyntheticOracle, SWEEP_POSES,
};
use armoffset::offset_model::{applicable_set, composite_probability, sample_applicable};
use armoffset::pose::{
    rula_arm_score, rula_lower_arm, rula_upper_arm, ArmPose, CompositeOffset, JointOffset2D,
};
use serde_json::{json, Value};

use crate::cli::*;

/// Bad flag combination detected after parsing; exits like a parse error.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json(value: &Value, path: Option<&Path>) -> Result<()> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn load_model(path: &Path) -> Result<FittedNoticeabilityModel> {
    FittedNoticeabilityModel::load(path)
        .with_context(|| format!("cannot load model {}", path.display()))
}

fn poses_or_default(path: Option<&PathBuf>) -> Result<Vec<ArmPose>> {
    match path {
        Some(p) => {
            let poses = read_poses(p)?;
            if poses.is_empty() {
                anyhow::bail!("{} contains no poses", p.display());
            }
            Ok(poses)
        }
        None => Ok(default_catalog().poses()),
    }
}

fn oracle(args: &OracleArgs) -> Result<SyntheticOracle> {
    let mut o = SyntheticOracle::new(args.fp, args.lapse, args.response)?;
    o.shift_enabled = !args.no_shift;
    Ok(o)
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Plan(a) => plan(a),
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::QueryProb(a) => query_prob(a),
        Command::ApplicableSet(a) => applicable(a),
        Command::Amplify(a) => amplify(a),
        Command::Rula(a) => rula(a),
        Command::ClusterPoses(a) => cluster(a),
        Command::EvalRecovery(a) => eval(a),
    }
}

fn plan(a: PlanArgs) -> Result<()> {
    let poses = poses_or_default(a.poses.as_ref())?;
    let sweep = &poses[..poses.len().min(SWEEP_POSES)];
    let plan = match a.phase {
        1 => phase1_plan(&poses, a.seed)?,
        2 => phase2_plan(sweep, a.seed)?,
        _ => {
            let Some(model) = &a.model else {
                return Err(usage("--phase 3 needs --model for its shoulder offsets"));
            };
            let rings = model_shoulder_rings(&load_model(model)?, sweep)?;
            phase3_plan(sweep, &rings, a.seed)?
        }
    };
    let mut out = output(a.out.as_deref())?;
    write_plan(&plan, &poses, &mut out)?;
    out.flush()?;
    log::info!("wrote {} phase-{} tasks", plan.len(), a.phase);
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    if a.participants == 0 {
        return Err(usage("--participants must be at least 1"));
    }
    let poses = poses_or_default(a.poses.as_ref())?;
    let ds = simulate_study_with(
        &oracle(&a.oracle)?,
        &poses,
        a.participants,
        a.seed,
        StudyOptions { chained: a.chained },
    )?;
    let mut out = output(a.out.as_deref())?;
    write_trials_to(&ds, &mut out)?;
    out.flush()?;
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let ds = read_trials(&a.trials)?;
    let model = fit_model(&ds)?;
    model.save(&a.out)?;
    let rmse: Vec<f64> = model
        .poses()
        .iter()
        .flat_map(|c| {
            [
                c.shoulder.phi.rmse,
                c.shoulder.theta.rmse,
                c.elbow.phi.rmse,
                c.elbow.theta.rmse,
            ]
        })
        .collect();
    let mean = rmse.iter().sum::<f64>() / rmse.len() as f64;
    println!(
        "fitted {} poses from {} trials; mean rmse {mean:.4}, max rmse {:.4}",
        model.poses().len(),
        ds.len(),
        rmse.iter().copied().fold(0.0, f64::max)
    );
    if !model.generalizes() {
        log::warn!("fewer than five independent poses; queries are limited to catalog poses");
    }
    Ok(())
}

fn query_prob(a: QueryProbArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    if let Some(path) = &a.grid_out {
        let joint = a.joint.expect("clap requires --joint with --grid-out");
        let mut out = output(Some(path))?;
        model.write_probability_grid(joint, &a.pose, a.extent, a.n, &mut out)?;
        out.flush()?;
        return Ok(());
    }
    let raw = a
        .offset
        .as_deref()
        .expect("clap requires --offset without --grid-out");
    let p = match a.joint {
        Some(joint) => {
            let o: JointOffset2D = raw
                .parse()
                .map_err(|e: armoffset::Error| usage(format!("--offset with --joint: {e}")))?;
            probability_2d(joint, &a.pose, o, &model)?
        }
        None => {
            let o: CompositeOffset = raw
                .parse()
                .map_err(|e: armoffset::Error| usage(format!("--offset: {e}")))?;
            composite_probability(&a.pose, &o, &model, a.combiner)?
        }
    };
    println!("{p}");
    Ok(())
}

fn axes_json(q: &QuadrantAxes) -> Value {
    json!({
        "phi_pos": q.phi_pos,
        "phi_neg": q.phi_neg,
        "theta_pos": q.theta_pos,
        "theta_neg": q.theta_neg,
    })
}

fn applicable(a: ApplicableSetArgs) -> Result<()> {
    if a.samples == 0 {
        return Err(usage("--samples must be at least 1"));
    }
    let model = load_model(&a.model)?;
    let set = applicable_set(&a.pose, a.p, &model, a.combiner)?;
    let samples = sample_applicable(&set, a.samples, a.seed)?;
    let value = json!({
        "pose": a.pose.to_array(),
        "p": a.p,
        "combiner": a.combiner.name(),
        "candidate_level": set.candidate_level(),
        "shoulder_region": { "semi_axes": axes_json(&set.shoulder_region()) },
        "elbow_region": { "semi_axes": axes_json(&set.elbow_region()) },
        "shift_rule": "elbow region centered at the negated shoulder offset",
        "n_samples": samples.len(),
        "samples": samples.iter().map(|o| o.to_array()).collect::<Vec<_>>(),
    });
    write_json(&value, a.out.as_deref())
}

fn amplify(a: AmplifyArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let cfg = configure(&a.extreme, a.p, a.delta_s, &model, a.combiner)?;
    let frames = read_trajectory(&a.input)?;
    let amplified = amplify_trajectory(&cfg, &frames)?;
    let mut out = output(a.out.as_deref())?;
    write_amplified(&amplified, &mut out)?;
    out.flush()?;
    Ok(())
}

fn rula(a: RulaArgs) -> Result<()> {
    if let Some(pose) = a.source.pose {
        println!("{}", rula_arm_score(&pose));
        return Ok(());
    }
    let path = a.source.poses.expect("clap requires --pose or --poses");
    let mut out = output(None)?;
    writeln!(out, "phi_s,theta_s,phi_e,theta_e,upper_arm,lower_arm,score")?;
    for p in read_poses(&path)? {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.phi_s,
            p.theta_s,
            p.phi_e,
            p.theta_e,
            rula_upper_arm(p.theta_s),
            rula_lower_arm(p.theta_e),
            rula_arm_score(&p)
        )?;
    }
    out.flush()?;
    Ok(())
}

fn cluster(a: ClusterArgs) -> Result<()> {
    let sample = read_poses(&a.input)?;
    if a.k == 0 || a.k > sample.len() {
        return Err(usage(format!(
            "--k must be between 1 and the sample size {}",
            sample.len()
        )));
    }
    let catalog = select_representative_poses(&sample, a.k, a.seed)?;
    for e in &catalog.entries {
        log::info!("{} ({:?}): {}", e.label, e.provenance, e.pose);
    }
    let mut out = output(a.out.as_deref())?;
    write_poses(&catalog.poses(), &mut out)?;
    out.flush()?;
    Ok(())
}

fn summary(r: &RecoveryReport) -> Value {
    json!({
        "mean_axis_error": r.mean_axis_error(),
        "max_axis_error": r.max_axis_error(),
        "mean_ellipse_error": r.mean_ellipse_error(),
        "max_ellipse_error": r.max_ellipse_error(),
        "mean_shift_error": r.mean_shift_error(),
        "max_shift_error": r.max_shift_error(),
        "direction_rmse": r.direction_rmse,
        "trials": r.trials,
    })
}

fn eval(a: EvalArgs) -> Result<()> {
    let oracle = oracle(&a.oracle)?;
    let mut runs = Vec::new();
    let mut reports = Vec::new();
    if let Some(path) = &a.trials {
        let r = evaluate_recovery(&read_trials(path)?, &oracle)?;
        runs.push(json!({ "trials_file": path.display().to_string(), "summary": summary(&r) }));
        reports.push(r);
    } else {
        if a.participants == 0 || a.runs == 0 {
            return Err(usage("--participants and --runs must be at least 1"));
        }
        let catalog = default_catalog().poses();
        for seed in a.seed..a.seed + a.runs {
            let ds = simulate_study_with(
                &oracle,
                &catalog,
                a.participants,
                seed,
                StudyOptions { chained: a.chained },
            )?;
            let r = evaluate_recovery(&ds, &oracle)?;
            runs.push(json!({ "seed": seed, "summary": summary(&r) }));
            reports.push(r);
        }
    }
    let mean =
        |f: fn(&RecoveryReport) -> f64| reports.iter().map(f).sum::<f64>() / reports.len() as f64;
    let mut value = json!({
        "response": oracle.response.name(),
        "false_positive": oracle.false_positive,
        "lapse": oracle.lapse,
        "mean_axis_error": mean(RecoveryReport::mean_axis_error),
        "mean_shift_error": mean(RecoveryReport::mean_shift_error),
        "runs": runs,
    });
    if a.full {
        value["reports"] = serde_json::to_value(&reports)?;
    }
    write_json(&value, None)
}
