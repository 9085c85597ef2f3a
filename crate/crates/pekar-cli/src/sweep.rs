//! Parameter sweeps written as one CSV row per point. A rerun keeps the rows
//! already finished with status `ok` and computes only the rest.

use crate::commands::{cmd_correction, cmd_solve};
use crate::config::{Pipeline, RunConfig, SweepParameter, SweepSpec};
use crate::report::{csv_number, RunReport, Status};
use rayon::prelude::*;
use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

const POINT_COLUMNS: [&str; 3] = ["side_length_L", "grid_points_n", "cutoff_Lambda"];

pub fn header() -> Vec<String> {
    let probe = RunReport::new("sweep", &placeholder());
    POINT_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(probe.csv_scalars().into_iter().map(|(k, _)| k.to_string()))
        .collect()
}

fn placeholder() -> RunConfig {
    RunConfig::from_toml("side_length_L = 1.0\ngrid_points_n = 4\n", Path::new("-")).expect("valid literal")
}

/// The CSV row describing `report`, run at `cfg`.
pub fn row(cfg: &RunConfig, report: &RunReport) -> Vec<String> {
    [csv_number(cfg.side_length), cfg.n.to_string(), csv_number(cfg.cutoff())]
        .into_iter()
        .chain(report.csv_scalars().into_iter().map(|(_, v)| v))
        .collect()
}

/// Runs one point; failures become rows rather than errors.
pub fn point(cfg: &RunConfig, pipeline: Pipeline) -> RunReport {
    if let Err(e) = cfg.validate() {
        let mut r = RunReport::new(pipeline_name(pipeline), cfg);
        r.status = Status::Failed;
        r.message = Some(e.to_string());
        return r;
    }
    let outcome = match pipeline {
        Pipeline::Solve => cmd_solve(cfg).map(|(r, _)| r),
        Pipeline::Correction => cmd_correction(cfg, None),
    };
    match outcome {
        Ok(r) => r,
        Err(f) => f.report().clone(),
    }
}

fn pipeline_name(p: Pipeline) -> &'static str {
    match p {
        Pipeline::Solve => "solve",
        Pipeline::Correction => "correction",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub points: usize,
    pub reused: usize,
    pub computed: usize,
    pub failed: usize,
}

/// Key identifying a finished row: the sweep value as printed, plus `n`.
fn key(parameter: SweepParameter, cfg: &RunConfig) -> (String, String) {
    let v = match parameter {
        SweepParameter::SideLength => cfg.side_length,
        SweepParameter::Cutoff => cfg.cutoff(),
    };
    (csv_number(v), cfg.n.to_string())
}

/// Finished rows of an existing table, keyed as in [`key`]. Truncated or
/// failed rows are dropped.
fn finished_rows(path: &Path, parameter: SweepParameter) -> Result<HashMap<(String, String), Vec<String>>, String> {
    let mut out = HashMap::new();
    if !path.exists() {
        return Ok(out);
    }
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let found: Vec<String> = reader
        .headers()
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?
        .iter()
        .map(String::from)
        .collect();
    let expected = header();
    if found != expected {
        return Err(format!(
            "{} has a different header; move it aside or use another --out",
            path.display()
        ));
    }
    let col = expected.iter().position(|c| c == parameter.column()).expect("parameter column exists");
    let status = expected.iter().position(|c| c == "status").expect("status column exists");
    for rec in reader.records().flatten() {
        if rec.len() != expected.len() || &rec[status] != "ok" {
            continue;
        }
        let fields: Vec<String> = rec.iter().map(String::from).collect();
        out.insert((fields[col].clone(), fields[1].clone()), fields);
    }
    Ok(out)
}

fn write_rows(path: &Path, rows: &[Vec<String>]) -> Result<(), String> {
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = csv::Writer::from_path(&tmp).map_err(|e| e.to_string())?;
        w.write_record(header()).map_err(|e| e.to_string())?;
        for r in rows {
            w.write_record(r).map_err(|e| e.to_string())?;
        }
        w.flush().map_err(|e| e.to_string())?;
    }
    std::fs::rename(&tmp, path).map_err(|e| e.to_string())
}

/// Runs the sweep into `path`. Points execute on the current rayon pool;
/// each finished row is appended immediately so an interrupted sweep can be
/// resumed.
pub fn run_sweep(cfg: &RunConfig, sweep: &SweepSpec, path: &Path) -> Result<SweepSummary, String> {
    let points = sweep.points().map_err(|e| e.to_string())?;
    let configs: Vec<RunConfig> = points.iter().map(|&p| cfg.at(sweep.parameter, p)).collect();
    let mut done = finished_rows(path, sweep.parameter)?;
    let kept: Vec<Vec<String>> = configs
        .iter()
        .filter_map(|c| done.get(&key(sweep.parameter, c)).cloned())
        .collect();
    write_rows(path, &kept)?;

    let todo: Vec<usize> = (0..configs.len())
        .filter(|&i| !done.contains_key(&key(sweep.parameter, &configs[i])))
        .collect();
    let file = std::fs::OpenOptions::new().append(true).open(path).map_err(|e| e.to_string())?;
    let writer = Mutex::new(csv::WriterBuilder::new().has_headers(false).from_writer(file));
    let computed: Vec<(usize, Vec<String>, bool)> = todo
        .par_iter()
        .map(|&i| {
            let report = point(&configs[i], sweep.pipeline);
            let r = row(&configs[i], &report);
            let mut w = writer.lock().expect("writer lock");
            // A lost row is recomputed on the next run.
            let _ = w.write_record(&r).and_then(|()| w.flush().map_err(csv::Error::from));
            (i, r, report.status == Status::Ok)
        })
        .collect();
    drop(writer);

    let failed = computed.iter().filter(|c| !c.2).count();
    let reused = configs.len() - computed.len();
    for (i, r, _) in &computed {
        done.insert(key(sweep.parameter, &configs[*i]), r.clone());
    }
    let by_point: Vec<Vec<String>> = configs
        .iter()
        .filter_map(|c| done.get(&key(sweep.parameter, c)).cloned())
        .collect();
    write_rows(path, &by_point)?;
    Ok(SweepSummary {
        points: configs.len(),
        reused,
        computed: todo.len(),
        failed,
    })
}
