//! The per-timestep offloading protocol and the experiment driver.
//!
//! Every second each user issues one request. The network provider knows the
//! user's true BS; the MEC provider receives a (possibly obfuscated) location,
//! presumes the nearest BS to it, and picks that BS's ideal MH. The network
//! provider then measures latency between the *true* BS and the selected MH.
//! A request is accepted only if latency, post-sharing radio throughput, and
//! residual MH capacity all meet the application's demands.

use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::geometry::{Area, Point};
use crate::link::{bs_mh_latency, water_fill, LatencyParams, RadioParams};
use crate::mobility::{MobilityTrace, MobilityType, User};
use crate::privacy::{Epsilon, PrivacyMechanism};
use crate::rng;
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Application {
    Video,
    Ar,
    Vr,
}

impl Application {
    pub const ALL: [Application; 3] = [Application::Video, Application::Ar, Application::Vr];

    pub fn as_str(self) -> &'static str {
        match self {
            Application::Video => "video",
            Application::Ar => "ar",
            Application::Vr => "vr",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.as_str() == s)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Requirement {
    pub throughput_bps: f64,
    pub latency_ms: f64,
}

/// Application demands and the per-mobility-type usage mix (percent, in
/// video/AR/VR order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApplicationSpec {
    pub video: Requirement,
    pub ar: Requirement,
    pub vr: Requirement,
    pub mix_car: [f64; 3],
    pub mix_bus: [f64; 3],
    pub mix_pedestrian: [f64; 3],
}

impl Default for ApplicationSpec {
    fn default() -> Self {
        ApplicationSpec {
            video: Requirement {
                throughput_bps: 70e6,
                latency_ms: 10.0,
            },
            ar: Requirement {
                throughput_bps: 100e6,
                latency_ms: 30.0,
            },
            vr: Requirement {
                throughput_bps: 132e6,
                latency_ms: 14.0,
            },
            mix_car: [70.0, 15.0, 15.0],
            mix_bus: [70.0, 15.0, 15.0],
            mix_pedestrian: [70.0, 30.0, 0.0],
        }
    }
}

impl ApplicationSpec {
    pub fn requirement(&self, app: Application) -> Requirement {
        match app {
            Application::Video => self.video,
            Application::Ar => self.ar,
            Application::Vr => self.vr,
        }
    }

    pub fn mix(&self, mobility: MobilityType) -> [f64; 3] {
        match mobility {
            MobilityType::CarPassenger => self.mix_car,
            MobilityType::BusPassenger => self.mix_bus,
            MobilityType::Pedestrian => self.mix_pedestrian,
        }
    }

    pub(crate) fn validate(&self, problems: &mut Vec<String>) {
        for app in Application::ALL {
            let r = self.requirement(app);
            if !(r.throughput_bps > 0.0 && r.throughput_bps.is_finite()) {
                problems.push(format!("applications.{}.throughput_bps must be positive", app.as_str()));
            }
            if !(r.latency_ms > 0.0 && r.latency_ms.is_finite()) {
                problems.push(format!("applications.{}.latency_ms must be positive", app.as_str()));
            }
        }
        for m in MobilityType::ALL {
            let mix = self.mix(m);
            if mix.iter().any(|v| !(*v >= 0.0)) || (mix.iter().sum::<f64>() - 100.0).abs() > 1e-9 {
                problems.push(format!(
                    "applications.mix_{} must be non-negative and sum to 100, got {mix:?}",
                    m.as_str()
                ));
            }
        }
        if self.mix_pedestrian[Application::Vr.index()] != 0.0 {
            problems.push("applications.mix_pedestrian must give VR 0%".into());
        }
    }
}

/// Largest-remainder apportionment of `n` items over percentage `shares`.
/// Remainder ties go to the earlier share.
pub fn apportion(n: usize, shares: &[f64]) -> Vec<usize> {
    let total: f64 = shares.iter().sum();
    if n == 0 || total <= 0.0 {
        return vec![0; shares.len()];
    }
    let quotas: Vec<f64> = shares.iter().map(|s| n as f64 * s / total).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| (q + 1e-9).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - counts[a] as f64;
        let rb = quotas[b] - counts[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Application of every user, in user order. Exact per-type proportions up to
/// rounding; which users get which application is shuffled by `seed`.
pub fn assign_applications(users: &[User], spec: &ApplicationSpec, seed: u64) -> Vec<Application> {
    let mut apps = vec![Application::Video; users.len()];
    for m in MobilityType::ALL {
        let mut members: Vec<usize> = users
            .iter()
            .enumerate()
            .filter(|(_, u)| u.mobility == m)
            .map(|(i, _)| i)
            .collect();
        let counts = apportion(members.len(), &spec.mix(m));
        members.shuffle(&mut rng::keyed(seed, rng::tag::APPLICATIONS, m.index() as u64, 0));
        let mut it = members.into_iter();
        for (app, &count) in Application::ALL.iter().zip(&counts) {
            for i in it.by_ref().take(count) {
                apps[i] = *app;
            }
        }
    }
    apps
}

/// Set of failed admission conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct DenialReasons(u8);

impl DenialReasons {
    pub const NONE: DenialReasons = DenialReasons(0);
    pub const LATENCY: DenialReasons = DenialReasons(1);
    pub const THROUGHPUT: DenialReasons = DenialReasons(2);
    pub const CAPACITY: DenialReasons = DenialReasons(4);

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, other: DenialReasons) -> bool {
        self.0 & other.0 == other.0 && !other.is_empty()
    }

    pub fn insert(&mut self, other: DenialReasons) {
        self.0 |= other.0;
    }

    pub fn from_flags(latency: bool, throughput: bool, capacity: bool) -> Self {
        DenialReasons(latency as u8 | (throughput as u8) << 1 | (capacity as u8) << 2)
    }
}

/// One user's request at one timestep. BS and MH fields are topology slots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffloadRequest {
    pub user: u32,
    pub timestep: u32,
    pub true_location: Point,
    pub true_bs: u32,
    pub reported_location: Point,
    pub presumed_bs: u32,
    pub selected_mh: u32,
    pub ideal_mh: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RequestOutcome {
    pub request: OffloadRequest,
    pub mobility: MobilityType,
    pub application: Application,
    pub accepted: bool,
    pub reasons: DenialReasons,
    pub achieved_latency_ms: f64,
    pub ideal_latency_ms: f64,
    pub allocated_bps: f64,
}

/// Evaluates all three admission conditions and, on acceptance, charges the
/// selected MH. `residuals` is indexed by MH slot.
pub fn admit(
    request: &OffloadRequest,
    requirement: Requirement,
    achieved_latency_ms: f64,
    allocated_bps: f64,
    residuals: &mut [f64],
) -> Result<(bool, DenialReasons)> {
    let residual = residuals
        .get_mut(request.selected_mh as usize)
        .ok_or_else(|| Error::Invariant(format!("unknown MH slot {}", request.selected_mh)))?;
    let reasons = DenialReasons::from_flags(
        achieved_latency_ms > requirement.latency_ms,
        allocated_bps < requirement.throughput_bps,
        *residual < requirement.throughput_bps,
    );
    let accepted = reasons.is_empty();
    if accepted {
        *residual -= requirement.throughput_bps;
    }
    Ok((accepted, reasons))
}

/// Inputs that stay fixed for every privacy level of a seed.
#[derive(Debug, Clone)]
pub struct SeedContext {
    pub seed: u64,
    pub topology: Arc<Topology>,
    pub trace: Arc<MobilityTrace>,
    pub users: Arc<Vec<User>>,
    pub applications: Arc<Vec<Application>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub area: Area,
    pub radio: RadioParams,
    pub latency: LatencyParams,
    pub applications: ApplicationSpec,
    pub iterate_after_denial: bool,
}

impl SimParams {
    pub fn from_config(config: &ExperimentConfig) -> Self {
        SimParams {
            area: config.area,
            radio: config.radio.clone(),
            latency: config.latency.clone(),
            applications: config.applications.clone(),
            iterate_after_denial: config.pf.iterate_after_denial,
        }
    }
}

/// Per-run counters for stderr progress reporting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RunCounters {
    pub requests: u64,
    pub accepted: u64,
    pub clipped_reports: u64,
    pub capacity_denials: u64,
}

/// Mutable state of one (seed, epsilon) run plus reusable scratch buffers.
#[derive(Debug)]
pub struct RunState {
    residuals: Vec<f64>,
    order: Vec<u32>,
    wants: Vec<f64>,
    shares: Vec<f64>,
    active: Vec<bool>,
    pub counters: RunCounters,
}

impl RunState {
    pub fn new(topology: &Topology) -> Self {
        RunState {
            residuals: vec![0.0; topology.mec_hosts().len()],
            order: Vec::new(),
            wants: Vec::new(),
            shares: Vec::new(),
            active: Vec::new(),
            counters: RunCounters::default(),
        }
    }
}

/// Processes every user's request at `timestep`, replacing `out`.
pub fn step(
    ctx: &SeedContext,
    params: &SimParams,
    mechanism: &PrivacyMechanism,
    timestep: u32,
    state: &mut RunState,
    out: &mut Vec<RequestOutcome>,
) -> Result<()> {
    let topo = &*ctx.topology;
    let trace = &*ctx.trace;
    if timestep >= trace.steps() {
        return Err(Error::TraceGap { user: 0, timestep });
    }
    let n = ctx.users.len();
    if trace.users() as usize != n || ctx.applications.len() != n {
        return Err(Error::Invariant(
            "trace, population and applications disagree on user count".into(),
        ));
    }
    let positions = trace.at(timestep);
    let bss = topo.base_stations();
    let mhs = topo.mec_hosts();

    out.clear();
    state.wants.clear();
    for (u, &true_location) in positions.iter().enumerate() {
        let true_bs = topo.nearest_bs(true_location);
        let (reported_location, clipped) =
            mechanism.obfuscate(true_location, &params.area, ctx.seed, u as u32, timestep);
        state.counters.clipped_reports += clipped as u64;
        let presumed_bs = if mechanism.is_identity() {
            true_bs
        } else {
            topo.nearest_bs(reported_location)
        };
        let selected_mh = topo.ideal_mh(presumed_bs);
        let ideal_mh = topo.ideal_mh(true_bs);
        let bs_pos = bss[true_bs].position;
        let achieved = bs_mh_latency(bs_pos.distance(mhs[selected_mh].position), &params.latency);
        let ideal = if selected_mh == ideal_mh {
            achieved
        } else {
            bs_mh_latency(bs_pos.distance(mhs[ideal_mh].position), &params.latency)
        };
        let application = ctx.applications[u];
        let demand = params.applications.requirement(application).throughput_bps;
        state
            .wants
            .push(demand.min(params.radio.capacity_at(true_location.distance(bs_pos))));
        out.push(RequestOutcome {
            request: OffloadRequest {
                user: u as u32,
                timestep,
                true_location,
                true_bs: true_bs as u32,
                reported_location,
                presumed_bs: presumed_bs as u32,
                selected_mh: selected_mh as u32,
                ideal_mh: ideal_mh as u32,
            },
            mobility: ctx.users[u].mobility,
            application,
            accepted: false,
            reasons: DenialReasons::NONE,
            achieved_latency_ms: achieved,
            ideal_latency_ms: ideal,
            allocated_bps: 0.0,
        });
    }

    state.active.clear();
    state.active.resize(n, true);
    loop {
        share_base_stations(topo, out, state);
        state.residuals.clear();
        state.residuals.extend(mhs.iter().map(|m| m.capacity_bps));
        let mut removed = false;
        for o in out.iter_mut() {
            let req = params.applications.requirement(o.application);
            let (accepted, reasons) = admit(
                &o.request,
                req,
                o.achieved_latency_ms,
                o.allocated_bps,
                &mut state.residuals,
            )?;
            o.accepted = accepted;
            o.reasons = reasons;
            if params.iterate_after_denial {
                let u = o.request.user as usize;
                let leaves = reasons.contains(DenialReasons::LATENCY) || reasons.contains(DenialReasons::CAPACITY);
                if state.active[u] && leaves {
                    state.active[u] = false;
                    removed = true;
                }
            }
        }
        if !removed {
            break;
        }
    }

    let c = &mut state.counters;
    for o in out.iter() {
        c.requests += 1;
        c.accepted += o.accepted as u64;
        c.capacity_denials += o.reasons.contains(DenialReasons::CAPACITY) as u64;
    }
    Ok(())
}

/// Proportional-fair sharing of each true BS among its active users, from
/// the lone-UE wants in `state.wants`. Inactive users keep their last share.
fn share_base_stations(topo: &Topology, out: &mut [RequestOutcome], state: &mut RunState) {
    let RunState {
        order,
        wants,
        shares,
        active,
        ..
    } = state;
    order.clear();
    order.extend((0..out.len() as u32).filter(|&u| active[u as usize]));
    order.sort_unstable_by_key(|&u| (out[u as usize].request.true_bs, u));
    let bss = topo.base_stations();
    let mut group_wants = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let bs = out[order[i] as usize].request.true_bs;
        let mut j = i + 1;
        while j < order.len() && out[order[j] as usize].request.true_bs == bs {
            j += 1;
        }
        let members = &order[i..j];
        group_wants.clear();
        group_wants.extend(members.iter().map(|&u| wants[u as usize]));
        shares.clear();
        shares.resize(members.len(), 0.0);
        water_fill(&group_wants, bss[bs as usize].capacity_bps, shares);
        for (k, &u) in members.iter().enumerate() {
            out[u as usize].allocated_bps = shares[k];
        }
        i = j;
    }
}

/// Loads or builds everything shared by the privacy levels of `seed`.
pub fn prepare_seed(config: &ExperimentConfig, seed: u64) -> Result<SeedContext> {
    let topology = config.build_topology(seed)?;
    let trace = config.build_trace(seed)?;
    seed_context(config, seed, Arc::new(topology), Arc::new(trace))
}

pub fn seed_context(
    config: &ExperimentConfig,
    seed: u64,
    topology: Arc<Topology>,
    trace: Arc<MobilityTrace>,
) -> Result<SeedContext> {
    let users = config.population.users();
    let needed = config.steps();
    if trace.users() as usize != users.len() {
        return Err(Error::config(format!(
            "trace has {} users but the population declares {}",
            trace.users(),
            users.len()
        )));
    }
    if trace.steps() < needed && !users.is_empty() {
        return Err(Error::TraceGap {
            user: 0,
            timestep: trace.steps(),
        });
    }
    let applications = assign_applications(&users, &config.applications, seed);
    Ok(SeedContext {
        seed,
        topology,
        trace,
        users: Arc::new(users),
        applications: Arc::new(applications),
    })
}

/// Runs one (seed, epsilon) pair, handing each timestep's outcomes to `sink`.
pub fn run_single<F>(ctx: &SeedContext, config: &ExperimentConfig, epsilon: Epsilon, mut sink: F) -> Result<RunCounters>
where
    F: FnMut(&[RequestOutcome]) -> Result<()>,
{
    let params = SimParams::from_config(config);
    let mechanism = config.privacy.mechanism(epsilon);
    let mut state = RunState::new(&ctx.topology);
    let mut out = Vec::with_capacity(ctx.users.len());
    for t in 0..config.steps() {
        step(ctx, &params, &mechanism, t, &mut state, &mut out)?;
        sink(&out)?;
    }
    Ok(state.counters)
}

/// Runs every epsilon of a seed in lockstep, handing `sink` the outcomes of
/// one timestep for all levels at once (same order as `epsilons`).
pub fn run_paired<F>(
    ctx: &SeedContext,
    config: &ExperimentConfig,
    epsilons: &[Epsilon],
    mut sink: F,
) -> Result<Vec<RunCounters>>
where
    F: FnMut(u32, &[Vec<RequestOutcome>]) -> Result<()>,
{
    let params = SimParams::from_config(config);
    let mechanisms: Vec<_> = epsilons.iter().map(|&e| config.privacy.mechanism(e)).collect();
    let mut states: Vec<_> = epsilons.iter().map(|_| RunState::new(&ctx.topology)).collect();
    let mut outs: Vec<Vec<RequestOutcome>> = epsilons.iter().map(|_| Vec::with_capacity(ctx.users.len())).collect();
    for t in 0..config.steps() {
        for ((m, state), out) in mechanisms.iter().zip(&mut states).zip(&mut outs) {
            step(ctx, &params, m, t, state, out)?;
        }
        sink(t, &outs)?;
    }
    Ok(states.into_iter().map(|s| s.counters).collect())
}

/// Result of one (seed, epsilon) run of [`run_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub epsilon: Epsilon,
    pub counters: RunCounters,
}

/// Runs the full seeds x epsilons grid on `threads` workers (0 means all
/// cores). Each seed's context is built once and shared by its privacy
/// levels; `make_sink` opens the outcome sink of one run.
pub fn run_experiment<S, F>(config: &ExperimentConfig, threads: usize, make_sink: F) -> Result<Vec<RunSummary>>
where
    F: Fn(u64, Epsilon) -> Result<S> + Sync,
    S: FnMut(&[RequestOutcome]) -> Result<()>,
{
    use rayon::prelude::*;

    config.validate()?;
    worker_pool(threads)?.install(|| {
        let contexts: Vec<SeedContext> = config
            .seeds
            .par_iter()
            .map(|&s| prepare_seed(config, s))
            .collect::<Result<_>>()?;
        run_contexts(config, &contexts, &config.privacy.epsilon_per_meter, &make_sink, |_| {})
    })
}

pub fn worker_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Invariant(format!("cannot start worker pool: {e}")))
}

/// Runs every (context, epsilon) pair on the current rayon pool, one run per
/// worker; `on_done` sees each summary as its run completes. Results come
/// back in grid order whatever the completion order.
pub fn run_contexts<S, F, D>(
    config: &ExperimentConfig,
    contexts: &[SeedContext],
    epsilons: &[Epsilon],
    make_sink: F,
    on_done: D,
) -> Result<Vec<RunSummary>>
where
    F: Fn(u64, Epsilon) -> Result<S> + Sync,
    S: FnMut(&[RequestOutcome]) -> Result<()>,
    D: Fn(&RunSummary) + Sync,
{
    use rayon::prelude::*;

    let jobs: Vec<(&SeedContext, Epsilon)> = contexts
        .iter()
        .flat_map(|c| epsilons.iter().map(move |&e| (c, e)))
        .collect();
    jobs.par_iter()
        .with_max_len(1)
        .map(|&(ctx, eps)| {
            let sink = make_sink(ctx.seed, eps)?;
            let counters = run_single(ctx, config, eps, sink)?;
            let summary = RunSummary {
                seed: ctx.seed,
                epsilon: eps,
                counters,
            };
            on_done(&summary);
            Ok(summary)
        })
        .collect()
}
