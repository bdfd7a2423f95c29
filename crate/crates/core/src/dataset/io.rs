use std::io::{Read, Write};
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, WriterBuilder};

use super::{NoticeabilityDataset, Phase, SamplingPlan, TrialRecord};
use crate::error::{create, open, Error, Result};
use crate::pose::{ArmPose, CompositeOffset};

pub const TRIALS_HEADER: [&str; 11] = [
    "participant",
    "phase",
    "pose_phi_s",
    "pose_theta_s",
    "pose_phi_e",
    "pose_theta_e",
    "off_phi_s",
    "off_theta_s",
    "off_phi_e",
    "off_theta_e",
    "noticed",
];

pub const PLAN_HEADER: [&str; 9] = [
    "phase",
    "pose_phi_s",
    "pose_theta_s",
    "pose_phi_e",
    "pose_theta_e",
    "off_phi_s",
    "off_theta_s",
    "off_phi_e",
    "off_theta_e",
];

pub const POSE_HEADER: [&str; 4] = ["phi_s", "theta_s", "phi_e", "theta_e"];

pub(crate) fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub(crate) fn line_of(rec: &StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

pub(crate) fn field_f64(path: &Path, rec: &StringRecord, i: usize, name: &str) -> Result<f64> {
    let raw = rec[i].trim();
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_err(
            path,
            line_of(rec),
            format!("column `{name}`: expected a finite number, got `{raw}`"),
        )),
    }
}

pub(crate) fn read_rows(path: &Path, reader: impl Read) -> Result<Vec<StringRecord>> {
    let mut rdr = ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        rows.push(rec);
    }
    Ok(rows)
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn trial_from_row(path: &Path, rec: &StringRecord) -> Result<TrialRecord> {
    let line = line_of(rec);
    if rec.len() != TRIALS_HEADER.len() {
        return Err(parse_err(
            path,
            line,
            format!(
                "expected {} columns, got {}",
                TRIALS_HEADER.len(),
                rec.len()
            ),
        ));
    }
    let phase = rec[1]
        .parse::<u8>()
        .ok()
        .and_then(|n| Phase::from_number(n).ok())
        .ok_or_else(|| parse_err(path, line, format!("invalid phase `{}`", &rec[1])))?;
    let mut v = [0.0; 8];
    for (k, slot) in v.iter_mut().enumerate() {
        *slot = field_f64(path, rec, k + 2, TRIALS_HEADER[k + 2])?;
    }
    let pose =
        ArmPose::new(v[0], v[1], v[2], v[3]).map_err(|e| parse_err(path, line, e.to_string()))?;
    let noticed = match &rec[10] {
        "1" | "true" => true,
        "0" | "false" => false,
        other => {
            return Err(parse_err(
                path,
                line,
                format!("column `noticed` must be 0 or 1, got `{other}`"),
            ))
        }
    };
    Ok(TrialRecord {
        participant: rec[0].to_string(),
        phase,
        pose,
        offset: CompositeOffset::from_array([v[4], v[5], v[6], v[7]]),
        noticed,
    })
}

/// Reads a trials CSV. The header must match [`TRIALS_HEADER`].
pub fn read_trials(path: impl AsRef<Path>) -> Result<NoticeabilityDataset> {
    let path = path.as_ref();
    let rows = read_rows(path, open(path)?)?;
    let Some((header, body)) = rows.split_first() else {
        return Err(parse_err(path, 1, "missing header"));
    };
    if header.iter().ne(TRIALS_HEADER.iter().copied()) {
        return Err(parse_err(
            path,
            line_of(header),
            format!("header must be `{}`", TRIALS_HEADER.join(",")),
        ));
    }
    let records = body
        .iter()
        .map(|r| trial_from_row(path, r))
        .collect::<Result<Vec<_>>>()?;
    NoticeabilityDataset::from_records(records)
}

fn pose_fields(p: &ArmPose) -> [String; 4] {
    p.to_array().map(fmt_f64)
}

fn offset_fields(o: &CompositeOffset) -> [String; 4] {
    o.to_array().map(fmt_f64)
}

pub fn write_trials(dataset: &NoticeabilityDataset, path: impl AsRef<Path>) -> Result<()> {
    write_trials_to(dataset, create(path.as_ref())?)
}

pub fn write_trials_to(dataset: &NoticeabilityDataset, out: impl Write) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(out);
    w.write_record(TRIALS_HEADER)?;
    for r in dataset.records() {
        let mut row = Vec::with_capacity(11);
        row.push(r.participant.clone());
        row.push(r.phase.to_string());
        row.extend(pose_fields(&r.pose));
        row.extend(offset_fields(&r.offset));
        row.push(if r.noticed { "1" } else { "0" }.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a plan with the pose angles resolved against `poses`.
pub fn write_plan(plan: &SamplingPlan, poses: &[ArmPose], out: impl Write) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(out);
    w.write_record(PLAN_HEADER)?;
    for t in &plan.tasks {
        let pose = poses.get(t.pose_index).ok_or_else(|| {
            Error::invalid(format!("plan refers to missing pose {}", t.pose_index))
        })?;
        let mut row = Vec::with_capacity(9);
        row.push(plan.phase.to_string());
        row.extend(pose_fields(pose));
        row.extend(offset_fields(&t.offset));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a pose CSV (`phi_s,theta_s,phi_e,theta_e`); the header line is optional.
pub fn read_poses(path: impl AsRef<Path>) -> Result<Vec<ArmPose>> {
    let path = path.as_ref();
    let rows = read_rows(path, open(path)?)?;
    let mut poses = Vec::with_capacity(rows.len());
    for (i, rec) in rows.iter().enumerate() {
        if i == 0 && rec.iter().eq(POSE_HEADER.iter().copied()) {
            continue;
        }
        if rec.len() != 4 {
            return Err(parse_err(
                path,
                line_of(rec),
                format!("expected 4 columns, got {}", rec.len()),
            ));
        }
        let mut v = [0.0; 4];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = field_f64(path, rec, k, POSE_HEADER[k])?;
        }
        poses.push(
            ArmPose::from_array(v).map_err(|e| parse_err(path, line_of(rec), e.to_string()))?,
        );
    }
    Ok(poses)
}

pub fn write_poses(poses: &[ArmPose], out: impl Write) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(out);
    w.write_record(POSE_HEADER)?;
    for p in poses {
        w.write_record(pose_fields(p))?;
    }
    w.flush()?;
    Ok(())
}
