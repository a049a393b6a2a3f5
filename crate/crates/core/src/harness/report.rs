//! On-disk artifacts. Floats are written in `{:.16e}` so reruns with the
//! same config and seed are byte-identical.

use std::fs;
use std::path::Path;

use serde::Serialize;

use super::run::{DemoReport, OracleReport, PairRecord, RunRecord, ScalingReport, SweepReport};
use super::svg;
use super::HarnessError;
use crate::geom::Shape;
use crate::medial::MedialCloud;
use crate::projection::{Extent, ProjectionRange};

pub const SAMPLES_HEADER: [&str; 9] = [
    "px",
    "py",
    "ux",
    "uy",
    "rho",
    "rho_prime",
    "cosine",
    "c_dist",
    "bound_ok",
];
pub const CLOUD_HEADER: [&str; 8] = ["cx", "cy", "lambda", "px", "py", "ux", "uy", "source"];
pub const RANGES_HEADER: [&str; 7] = ["px", "py", "ux", "uy", "lambda", "status", "iterations"];

pub fn fmt_f64(x: f64) -> String {
    if x.is_infinite() && x > 0.0 {
        "inf".into()
    } else {
        format!("{x:.16e}")
    }
}

fn pair_fields(p: &PairRecord) -> Vec<String> {
    let mut row: Vec<String> = [
        p.p.x,
        p.p.y,
        p.u.x,
        p.u.y,
        p.rho,
        p.rho_prime,
        p.cosine,
        p.c_dist,
    ]
    .iter()
    .map(|&x| fmt_f64(x))
    .collect();
    row.push(p.bound_ok().to_string());
    row
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| HarnessError::Input(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_samples(path: &Path, pairs: &[PairRecord]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SAMPLES_HEADER)?;
    for p in pairs {
        w.write_record(pair_fields(p))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_cloud(path: &Path, cloud: &MedialCloud) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CLOUD_HEADER)?;
    for s in &cloud.samples {
        let mut row: Vec<String> = [
            s.center.x,
            s.center.y,
            s.radius,
            s.witness.x,
            s.witness.y,
            s.direction.x,
            s.direction.y,
        ]
        .iter()
        .map(|&x| fmt_f64(x))
        .collect();
        row.push(cloud.source.as_str().into());
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_ranges(path: &Path, ranges: &[ProjectionRange]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RANGES_HEADER)?;
    for r in ranges {
        let lambda = match r.extent {
            Extent::Finite(l) => l,
            Extent::Unbounded => f64::INFINITY,
        };
        let mut row: Vec<String> = [r.origin.x, r.origin.y, r.direction.x, r.direction.y, lambda]
            .iter()
            .map(|&x| fmt_f64(x))
            .collect();
        row.push(r.status().into());
        row.push(r.iterations.to_string());
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// `run.json`, `samples.csv`, both clouds and both range tables, and
/// optionally `figure.svg`.
pub fn write_run(
    dir: &Path,
    rec: &RunRecord,
    shape: Option<&Shape>,
    figure: bool,
) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("run.json"), rec)?;
    write_samples(&dir.join("samples.csv"), &rec.pairs)?;
    write_cloud(&dir.join("clouds_S.csv"), &rec.cloud_s)?;
    write_cloud(&dir.join("clouds_FS.csv"), &rec.cloud_fs)?;
    write_ranges(&dir.join("ranges_S.csv"), &rec.ranges_s)?;
    write_ranges(&dir.join("ranges_FS.csv"), &rec.ranges_fs)?;
    if let (true, Some(shape)) = (figure, shape) {
        fs::write(
            dir.join("figure.svg"),
            svg::render(
                shape,
                &[(&rec.cloud_s, svg::GREEN), (&rec.cloud_fs, svg::BLUE)],
            ),
        )?;
    }
    Ok(())
}

/// Per-run subdirectories `eps_NN`, a combined `samples.csv` with a leading
/// `eps` column, and `sweep.json`.
pub fn write_sweep(
    dir: &Path,
    rep: &SweepReport,
    shape: Option<&Shape>,
    figure: bool,
) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("samples.csv"))?;
    w.write_record(std::iter::once("eps").chain(SAMPLES_HEADER))?;
    for (i, (eps, rec)) in rep.eps.iter().zip(&rep.records).enumerate() {
        write_run(&dir.join(format!("eps_{i:02}")), rec, shape, figure)?;
        for p in &rec.pairs {
            w.write_record(std::iter::once(fmt_f64(*eps)).chain(pair_fields(p)))?;
        }
    }
    w.flush()?;
    write_json(&dir.join("sweep.json"), rep)
}

pub fn write_scaling(dir: &Path, rep: &ScalingReport) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    for (i, rec) in rep.records.iter().enumerate() {
        write_run(&dir.join(format!("lambda_{i:02}")), rec, None, false)?;
    }
    write_json(&dir.join("scaling.json"), rep)
}

pub fn write_oracle(
    dir: &Path,
    rep: &OracleReport,
    shape: Option<&Shape>,
    figure: bool,
) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("oracle.json"), rep)?;
    write_cloud(&dir.join("clouds_S.csv"), &rep.shooting_s)?;
    write_cloud(&dir.join("oracle_S.csv"), &rep.oracle_s)?;
    if let Some(c) = &rep.shooting_fs {
        write_cloud(&dir.join("clouds_FS.csv"), c)?;
    }
    if let Some(c) = &rep.oracle_fs {
        write_cloud(&dir.join("oracle_FS.csv"), c)?;
    }
    if let (true, Some(shape)) = (figure, shape) {
        fs::write(
            dir.join("figure.svg"),
            svg::render(
                shape,
                &[(&rep.oracle_s, svg::GRAY), (&rep.shooting_s, svg::GREEN)],
            ),
        )?;
    }
    Ok(())
}

pub fn write_demo(dir: &Path, rep: &DemoReport) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("demo.csv"))?;
    w.write_record(["window", "directed_dh"])?;
    for (win, d) in rep.windows.iter().zip(&rep.directed_dh) {
        w.write_record([fmt_f64(*win), fmt_f64(*d)])?;
    }
    w.flush()?;
    write_json(&dir.join("demo.json"), rep)
}
