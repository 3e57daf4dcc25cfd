//! Per-request outcome CSV.
//!
//! Columns: `seed,epsilon,t,user_id,mobility,app,true_bs,presumed_bs,
//! selected_mh,ideal_mh,accepted,reason_latency,reason_throughput,
//! reason_capacity,achieved_latency_ms,ideal_latency_ms,allocated_mbps`.
//! Rows are ordered by time, then user. Floats carry six decimals.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::engine::{Application, DenialReasons, RequestOutcome};
use crate::error::{Error, Result};
use crate::metrics::Observation;
use crate::mobility::MobilityType;
use crate::privacy::Epsilon;
use crate::topology::Topology;

pub const HEADER: &str = "seed,epsilon,t,user_id,mobility,app,true_bs,presumed_bs,selected_mh,ideal_mh,accepted,reason_latency,reason_throughput,reason_capacity,achieved_latency_ms,ideal_latency_ms,allocated_mbps";

/// File name of the outcome stream of one run.
pub fn file_name(seed: u64, epsilon: Epsilon) -> String {
    format!("outcomes_seed{seed}_eps{}.csv", epsilon.label())
}

/// Parsed outcome row; BS and MH fields are entity ids.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeRow {
    pub seed: u64,
    pub epsilon: Epsilon,
    pub t: f64,
    pub user_id: u32,
    pub mobility: MobilityType,
    pub application: Application,
    pub true_bs: u32,
    pub presumed_bs: u32,
    pub selected_mh: u32,
    pub ideal_mh: u32,
    pub accepted: bool,
    pub reasons: DenialReasons,
    pub achieved_latency_ms: f64,
    pub ideal_latency_ms: f64,
    pub allocated_mbps: f64,
}

impl OutcomeRow {
    pub fn observation(&self, timestep: u32) -> Observation {
        Observation {
            user: self.user_id,
            timestep,
            mobility: self.mobility,
            application: self.application,
            accepted: self.accepted,
            reasons: self.reasons,
            non_ideal: self.selected_mh != self.ideal_mh,
            achieved_latency_ms: self.achieved_latency_ms,
            ideal_latency_ms: self.ideal_latency_ms,
        }
    }
}

pub struct OutcomeWriter<W: Write> {
    out: W,
    seed: u64,
    epsilon: String,
    resolution_s: f64,
    bs_ids: Vec<u32>,
    mh_ids: Vec<u32>,
    line: Vec<u8>,
}

impl OutcomeWriter<BufWriter<File>> {
    pub fn create(path: &Path, seed: u64, epsilon: Epsilon, topology: &Topology, resolution_s: f64) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        OutcomeWriter::new(
            BufWriter::with_capacity(1 << 20, file),
            seed,
            epsilon,
            topology,
            resolution_s,
        )
        .map_err(|e| Error::io(path, e))
    }
}

impl<W: Write> OutcomeWriter<W> {
    pub fn new(
        mut out: W,
        seed: u64,
        epsilon: Epsilon,
        topology: &Topology,
        resolution_s: f64,
    ) -> std::io::Result<Self> {
        writeln!(out, "{HEADER}")?;
        Ok(OutcomeWriter {
            out,
            seed,
            epsilon: epsilon.label(),
            resolution_s,
            bs_ids: topology.base_stations().iter().map(|b| b.id).collect(),
            mh_ids: topology.mec_hosts().iter().map(|m| m.id).collect(),
            line: Vec::with_capacity(256),
        })
    }

    pub fn write(&mut self, outcomes: &[RequestOutcome]) -> std::io::Result<()> {
        for o in outcomes {
            let r = &o.request;
            let flag = |b: bool| if b { 1 } else { 0 };
            self.line.clear();
            writeln!(
                self.line,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.6},{:.6},{:.6}",
                self.seed,
                self.epsilon,
                r.timestep as f64 * self.resolution_s,
                r.user,
                o.mobility.as_str(),
                o.application.as_str(),
                self.bs_ids[r.true_bs as usize],
                self.bs_ids[r.presumed_bs as usize],
                self.mh_ids[r.selected_mh as usize],
                self.mh_ids[r.ideal_mh as usize],
                flag(o.accepted),
                flag(o.reasons.contains(DenialReasons::LATENCY)),
                flag(o.reasons.contains(DenialReasons::THROUGHPUT)),
                flag(o.reasons.contains(DenialReasons::CAPACITY)),
                o.achieved_latency_ms,
                o.ideal_latency_ms,
                o.allocated_bps / 1e6,
            )?;
            self.out.write_all(&self.line)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Streaming reader over an outcome CSV.
pub struct OutcomeReader {
    path: PathBuf,
    lines: std::io::Lines<BufReader<File>>,
    line_no: u64,
}

impl OutcomeReader {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::with_capacity(1 << 20, file).lines();
        match lines.next() {
            Some(Ok(h)) if h.trim_end() == HEADER => {}
            Some(Err(e)) => return Err(Error::io(path, e)),
            _ => return Err(Error::parse(path, "missing or unexpected outcome header")),
        }
        Ok(OutcomeReader {
            path: path.to_path_buf(),
            lines,
            line_no: 1,
        })
    }

    fn parse(&self, line: &str) -> Result<OutcomeRow> {
        let bad = |what: &str| Error::parse(&self.path, format!("line {}: bad {what}", self.line_no));
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 17 {
            return Err(bad("column count"));
        }
        let int = |i: usize, what: &str| f[i].parse::<u64>().map_err(|_| bad(what));
        let num = |i: usize, what: &str| f[i].parse::<f64>().map_err(|_| bad(what));
        let flag = |i: usize, what: &str| match f[i] {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(bad(what)),
        };
        Ok(OutcomeRow {
            seed: int(0, "seed")?,
            epsilon: f[1].parse().map_err(|_| bad("epsilon"))?,
            t: num(2, "t")?,
            user_id: int(3, "user_id")? as u32,
            mobility: MobilityType::parse(f[4]).ok_or_else(|| bad("mobility"))?,
            application: Application::parse(f[5]).ok_or_else(|| bad("app"))?,
            true_bs: int(6, "true_bs")? as u32,
            presumed_bs: int(7, "presumed_bs")? as u32,
            selected_mh: int(8, "selected_mh")? as u32,
            ideal_mh: int(9, "ideal_mh")? as u32,
            accepted: flag(10, "accepted")?,
            reasons: DenialReasons::from_flags(
                flag(11, "reason_latency")?,
                flag(12, "reason_throughput")?,
                flag(13, "reason_capacity")?,
            ),
            achieved_latency_ms: num(14, "achieved_latency_ms")?,
            ideal_latency_ms: num(15, "ideal_latency_ms")?,
            allocated_mbps: num(16, "allocated_mbps")?,
        })
    }
}

impl Iterator for OutcomeReader {
    type Item = Result<OutcomeRow>;

    fn next(&mut self) -> Option<Self::Item> {
        let line = match self.lines.next()? {
            Ok(l) => l,
            Err(e) => return Some(Err(Error::io(&self.path, e))),
        };
        self.line_no += 1;
        if line.trim().is_empty() {
            return self.next();
        }
        Some(self.parse(&line))
    }
}
