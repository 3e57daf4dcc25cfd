use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use edgepriv::engine::{run_contexts, seed_context, worker_pool, RequestOutcome, SeedContext};
use edgepriv::manifest::{RunManifest, RunRecord};
use edgepriv::mobility::{ingest_trace, MobilityTrace, PassengerAssignment, TraceFormat};
use edgepriv::outcome::OutcomeWriter;
use edgepriv::report::{report_from_outcomes, write_report, REPORT_FILES};
use edgepriv::topology::Topology;
use edgepriv::{Error, ExperimentConfig, Result};

use crate::layout::Layout;
use crate::Common;

fn refuse_existing(paths: &[PathBuf], overwrite: bool) -> Result<()> {
    let existing: Vec<PathBuf> = paths.iter().filter(|p| p.exists()).cloned().collect();
    if existing.is_empty() || overwrite {
        Ok(())
    } else {
        Err(Error::OutputExists(existing))
    }
}

fn manifest_for(command: &str, config: &ExperimentConfig, threads: usize) -> RunManifest {
    RunManifest::new(
        command,
        config.hash(),
        config.seeds.clone(),
        config.privacy.epsilon_per_meter.iter().map(|e| e.label()).collect(),
        threads,
    )
}

fn finish_manifest(mut m: RunManifest, layout: &Layout, artifacts: &[PathBuf], started: Instant) -> Result<()> {
    m.artifacts = artifacts.iter().map(|p| layout.relative(p)).collect();
    m.wall_clock_s = started.elapsed().as_secs_f64();
    m.write(&layout.manifest(&m.command))
}

/// One representative run seed per distinct deployment directory.
fn topology_dirs(config: &ExperimentConfig, layout: &Layout) -> BTreeMap<PathBuf, u64> {
    let mut dirs = BTreeMap::new();
    for &s in &config.seeds {
        dirs.entry(layout.topology_dir(config, s)).or_insert(s);
    }
    dirs
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) => std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        None => Ok(()),
    }
}

/// Writes the given deployments and traces; returns every file written.
fn generate_artifacts(
    config: &ExperimentConfig,
    layout: &Layout,
    topology_seeds: &[u64],
    trace_seeds: &[u64],
) -> Result<Vec<PathBuf>> {
    use rayon::prelude::*;

    let mut written = Vec::new();
    for &s in topology_seeds {
        let topo = config.build_topology(s)?;
        topo.write_csv(&layout.topology_dir(config, s))?;
        eprintln!(
            "generate: deployment {} ({} BSs, {} MHs)",
            layout.relative(&layout.topology_dir(config, s)),
            topo.base_stations().len(),
            topo.mec_hosts().len()
        );
        written.extend(layout.topology_files(config, s));
    }
    let traces: Vec<PathBuf> = trace_seeds
        .par_iter()
        .map(|&s| {
            let trace = config.build_trace(s)?;
            let path = layout.trace(s);
            create_parent(&path)?;
            trace.write_csv(&path)?;
            eprintln!(
                "generate: seed {s} trace ({} users x {} steps)",
                trace.users(),
                trace.steps()
            );
            Ok(path)
        })
        .collect::<Result<_>>()?;
    written.extend(traces);
    Ok(written)
}

pub fn generate(config: &ExperimentConfig, c: &Common) -> Result<()> {
    let started = Instant::now();
    let layout = Layout::new(&c.out_dir);
    let dirs = topology_dirs(config, &layout);
    let mut targets = vec![layout.config_copy(), layout.manifest("generate")];
    for &s in dirs.values() {
        targets.extend(layout.topology_files(config, s));
    }
    targets.extend(config.seeds.iter().map(|&s| layout.trace(s)));
    refuse_existing(&targets, c.overwrite)?;

    let pool = worker_pool(c.threads)?;
    let topology_seeds: Vec<u64> = dirs.values().copied().collect();
    let mut written = pool.install(|| generate_artifacts(config, &layout, &topology_seeds, &config.seeds))?;
    std::fs::create_dir_all(&layout.root).map_err(|e| Error::io(&layout.root, e))?;
    let copy = layout.config_copy();
    std::fs::write(&copy, config.to_toml_string()).map_err(|e| Error::io(&copy, e))?;
    written.push(copy);
    finish_manifest(
        manifest_for("generate", config, pool.current_num_threads()),
        &layout,
        &written,
        started,
    )
}

fn read_trace(config: &ExperimentConfig, path: &Path) -> Result<MobilityTrace> {
    let ingested = ingest_trace(
        path,
        TraceFormat::PositionsCsv,
        &config.population.users(),
        &PassengerAssignment::Identity,
        &config.area,
        config.resolution_s,
    )?;
    Ok(ingested.trace)
}

fn load_contexts(config: &ExperimentConfig, layout: &Layout) -> Result<Vec<SeedContext>> {
    use rayon::prelude::*;

    let mut topologies: BTreeMap<PathBuf, Arc<Topology>> = BTreeMap::new();
    for dir in topology_dirs(config, layout).into_keys() {
        let topo = Topology::read_csv(&dir, config.area)?;
        topologies.insert(dir, Arc::new(topo));
    }
    config
        .seeds
        .par_iter()
        .map(|&s| {
            let trace = read_trace(config, &layout.trace(s))?;
            let topo = topologies[&layout.topology_dir(config, s)].clone();
            seed_context(config, s, topo, Arc::new(trace))
        })
        .collect()
}

fn warn_on_config_drift(config: &ExperimentConfig, layout: &Layout) {
    if let Ok(m) = RunManifest::read(&layout.manifest("generate")) {
        if m.config_hash != config.hash() {
            eprintln!(
                "warning: artifacts were generated from a different configuration (hash {})",
                m.config_hash
            );
        }
    }
}

pub fn run(config: &ExperimentConfig, c: &Common, generate_missing: bool) -> Result<()> {
    let started = Instant::now();
    let layout = Layout::new(&c.out_dir);
    let epsilons = config.privacy.epsilon_per_meter.clone();
    let mut targets = vec![layout.manifest("run")];
    for &s in &config.seeds {
        targets.extend(epsilons.iter().map(|&e| layout.outcome(s, e)));
    }
    refuse_existing(&targets, c.overwrite)?;

    let missing_topologies: Vec<u64> = topology_dirs(config, &layout)
        .into_values()
        .filter(|&s| layout.topology_files(config, s).iter().any(|p| !p.exists()))
        .collect();
    let missing_traces: Vec<u64> = config
        .seeds
        .iter()
        .copied()
        .filter(|&s| !layout.trace(s).exists())
        .collect();
    let pool = worker_pool(c.threads)?;
    let threads = pool.current_num_threads();
    let mut written = Vec::new();
    if !missing_topologies.is_empty() || !missing_traces.is_empty() {
        if !generate_missing {
            let what: BTreeSet<String> = missing_topologies
                .iter()
                .map(|&s| layout.relative(&layout.topology_dir(config, s)))
                .chain(missing_traces.iter().map(|&s| layout.relative(&layout.trace(s))))
                .collect();
            return Err(Error::config(format!(
                "missing artifacts ({}); run `edgepriv generate` first or pass --generate",
                what.into_iter().collect::<Vec<_>>().join(", ")
            )));
        }
        written = pool.install(|| generate_artifacts(config, &layout, &missing_topologies, &missing_traces))?;
    } else {
        warn_on_config_drift(config, &layout);
    }

    let outcomes_dir = layout.outcomes_dir();
    std::fs::create_dir_all(&outcomes_dir).map_err(|e| Error::io(&outcomes_dir, e))?;
    let total = config.seeds.len() * epsilons.len();
    eprintln!(
        "run: {total} runs of {} requests on {threads} threads",
        config.requests_per_run()
    );
    let done = AtomicUsize::new(0);
    let steps = config.steps();
    let summaries = pool.install(|| {
        let contexts = load_contexts(config, &layout)?;
        run_contexts(
            config,
            &contexts,
            &epsilons,
            |seed, eps| {
                let topo = &contexts.iter().find(|x| x.seed == seed).expect("context of seed").topology;
                let path = layout.outcome(seed, eps);
                let mut writer = Some(OutcomeWriter::create(&path, seed, eps, topo, config.resolution_s)?);
                let mut calls = 0u32;
                Ok(move |outs: &[RequestOutcome]| -> Result<()> {
                    let w = writer.as_mut().expect("sink used after its last timestep");
                    w.write(outs).map_err(|e| Error::io(&path, e))?;
                    calls += 1;
                    if calls == steps {
                        writer.take().expect("writer").finish().map_err(|e| Error::io(&path, e))?;
                    }
                    Ok(())
                })
            },
            |s| {
                let k = done.fetch_add(1, Ordering::Relaxed) + 1;
                let c = &s.counters;
                eprintln!(
                    "[{k}/{total}] seed {} eps {}: {} requests, {:.2}% accepted, {} clipped reports, {} capacity denials",
                    s.seed,
                    s.epsilon.label(),
                    c.requests,
                    100.0 * c.accepted as f64 / c.requests.max(1) as f64,
                    c.clipped_reports,
                    c.capacity_denials
                );
            },
        )
    })?;

    for &s in &config.seeds {
        written.extend(epsilons.iter().map(|&e| layout.outcome(s, e)));
    }
    let mut m = manifest_for("run", config, threads);
    m.runs = summaries
        .iter()
        .map(|s| RunRecord {
            seed: s.seed,
            epsilon: s.epsilon.label(),
            requests: s.counters.requests,
            accepted: s.counters.accepted,
            clipped_reports: s.counters.clipped_reports,
        })
        .collect();
    finish_manifest(m, &layout, &written, started)
}

pub fn report(config: &ExperimentConfig, c: &Common) -> Result<()> {
    let started = Instant::now();
    let layout = Layout::new(&c.out_dir);
    let dir = layout.report_dir();
    let mut targets: Vec<PathBuf> = REPORT_FILES.iter().map(|f| dir.join(f)).collect();
    targets.push(layout.manifest("report"));
    refuse_existing(&targets, c.overwrite)?;

    let pool = worker_pool(c.threads)?;
    let epsilons = &config.privacy.epsilon_per_meter;
    let report =
        pool.install(|| report_from_outcomes(&layout.outcomes_dir(), &config.seeds, epsilons, config.resolution_s))?;
    let written = write_report(&dir, &report, &config.hash())?;
    eprintln!(
        "report: {} paired requests over {} seeds",
        report.requests,
        report.seeds.len()
    );
    for &eps in epsilons {
        if let Some(acc) = report.acceptance(eps, None).and_then(|i| i.mean) {
            eprintln!("report: eps {} accepted {:.2}%", eps.label(), 100.0 * acc);
        }
    }
    finish_manifest(
        manifest_for("report", config, pool.current_num_threads()),
        &layout,
        &written,
        started,
    )
}
