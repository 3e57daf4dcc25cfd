//! Report building from outcome files and report serialisation.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::engine::Application;
use crate::error::{Error, Result};
use crate::metrics::{Aggregator, ExperimentReport, Interval, SeedAccumulator};
use crate::mobility::MobilityType;
use crate::outcome::{self, OutcomeReader};
use crate::privacy::Epsilon;

/// Names of the files [`write_report`] produces.
pub const REPORT_FILES: [&str; 7] = [
    "report.json",
    "table3.csv",
    "fig5.csv",
    "fig6.csv",
    "fig7.csv",
    "fig8.csv",
    "acceptance.csv",
];

/// Streams the outcome files of one seed, zipped across privacy levels.
pub fn accumulate_seed(dir: &Path, seed: u64, epsilons: &[Epsilon], resolution_s: f64) -> Result<SeedAccumulator> {
    if epsilons.is_empty() {
        return Err(Error::config("no privacy levels to report on"));
    }
    let mut readers = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let path = dir.join(outcome::file_name(seed, eps));
        if !path.exists() {
            return Err(Error::Pairing(format!(
                "missing outcome file for seed {seed}, epsilon {} ({})",
                eps.label(),
                path.display()
            )));
        }
        readers.push(OutcomeReader::open(&path)?);
    }
    let mut acc = SeedAccumulator::new(epsilons);
    let mut buf = Vec::with_capacity(epsilons.len());
    loop {
        buf.clear();
        let mut ended = Vec::new();
        for (i, r) in readers.iter_mut().enumerate() {
            match r.next() {
                Some(row) => {
                    let row = row?;
                    if row.seed != seed || row.epsilon != epsilons[i] {
                        return Err(Error::Pairing(format!(
                            "outcome file for seed {seed}, epsilon {} holds a row of seed {}, epsilon {}",
                            epsilons[i].label(),
                            row.seed,
                            row.epsilon.label()
                        )));
                    }
                    let timestep = (row.t / resolution_s).round() as u32;
                    buf.push(row.observation(timestep));
                }
                None => ended.push(epsilons[i].label()),
            }
        }
        if ended.len() == readers.len() {
            break;
        }
        if !ended.is_empty() {
            return Err(Error::Pairing(format!(
                "outcome files of seed {seed} end early for epsilon {}",
                ended.join(", ")
            )));
        }
        acc.add_paired(&buf).map_err(|e| match e {
            Error::Pairing(m) => Error::Pairing(format!("seed {seed}: {m}")),
            other => other,
        })?;
    }
    Ok(acc)
}

/// Builds the report over `seeds` x `epsilons` from an outcome directory.
pub fn report_from_outcomes(
    dir: &Path,
    seeds: &[u64],
    epsilons: &[Epsilon],
    resolution_s: f64,
) -> Result<ExperimentReport> {
    let accs: Vec<(u64, SeedAccumulator)> = seeds
        .par_iter()
        .map(|&s| accumulate_seed(dir, s, epsilons, resolution_s).map(|a| (s, a)))
        .collect::<Result<_>>()?;
    let mut agg = Aggregator::new();
    for (s, a) in accs {
        agg.insert(s, a)?;
    }
    Ok(agg.finish())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn interval(i: &Interval) -> String {
    format!("{},{},{}", opt(i.mean), opt(i.ci95), i.n_seeds)
}

fn mobility(m: Option<MobilityType>) -> &'static str {
    m.map_or("all", MobilityType::as_str)
}

fn app(a: Option<Application>) -> &'static str {
    a.map_or("all", Application::as_str)
}

pub fn table3_csv(r: &ExperimentReport) -> String {
    let mut s = String::from("class,app,mean,ci95,n_seeds\n");
    for row in &r.table3 {
        let _ = writeln!(s, "{},{},{}", row.class.as_str(), app(row.app), interval(&row.value));
    }
    s
}

pub fn fig5_csv(r: &ExperimentReport) -> String {
    let mut s = String::from("epsilon,category,mean,ci95,n_seeds,n_denied\n");
    for row in &r.fig5 {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            row.epsilon.label(),
            row.category,
            interval(&row.value),
            row.n_denied
        );
    }
    s
}

pub fn fig6_csv(r: &ExperimentReport) -> String {
    let mut s = String::from("epsilon,mobility,mean,ci95,n_seeds\n");
    for row in &r.fig6 {
        let _ = writeln!(
            s,
            "{},{},{}",
            row.epsilon.label(),
            mobility(row.mobility),
            interval(&row.value)
        );
    }
    s
}

pub fn fig7_csv(r: &ExperimentReport) -> String {
    let mut s = String::from(
        "epsilon,mobility,mean_pct,ci95,n_seeds,pooled_pct,mean_pct_all_requests,ci95_all_requests,n_requests,zero_ideal_excluded\n",
    );
    for row in &r.fig7 {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            row.epsilon.label(),
            mobility(row.mobility),
            interval(&row.value),
            opt(row.pooled_pct),
            opt(row.all_requests.mean),
            opt(row.all_requests.ci95),
            row.n_requests,
            row.zero_ideal_excluded
        );
    }
    s
}

pub fn fig8_csv(r: &ExperimentReport) -> String {
    let mut s = String::from("mobility,app,mean,ci95,n_seeds\n");
    for row in &r.fig8 {
        let _ = writeln!(
            s,
            "{},{},{}",
            mobility(row.mobility),
            row.app.as_str(),
            interval(&row.value)
        );
    }
    s
}

pub fn acceptance_csv(r: &ExperimentReport) -> String {
    let mut s = String::from("epsilon,app,mean,ci95,n_seeds\n");
    for row in &r.acceptance {
        let _ = writeln!(s, "{},{},{}", row.epsilon.label(), app(row.app), interval(&row.value));
    }
    s
}

/// Writes `report.json` and the per-figure CSVs into `dir`.
pub fn write_report(dir: &Path, report: &ExperimentReport, config_hash: &str) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut json = serde_json::to_value(report).map_err(|e| Error::Invariant(e.to_string()))?;
    json["config_hash"] = serde_json::Value::String(config_hash.to_string());
    let json = serde_json::to_string_pretty(&json).map_err(|e| Error::Invariant(e.to_string()))?;
    let contents = [
        json,
        table3_csv(report),
        fig5_csv(report),
        fig6_csv(report),
        fig7_csv(report),
        fig8_csv(report),
        acceptance_csv(report),
    ];
    let mut written = Vec::new();
    for (name, text) in REPORT_FILES.iter().zip(contents) {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
