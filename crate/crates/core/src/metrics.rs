//! Aggregate analyses over paired outcome streams.
//!
//! Accumulation is split per seed and holds only counts and fixed-point sums,
//! so merging partial accumulators is exact and order-independent. Means and
//! confidence intervals are computed at finalisation, with the seed as the
//! unit of replication.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::engine::{Application, DenialReasons, RequestOutcome};
use crate::error::{Error, Result};
use crate::mobility::MobilityType;
use crate::privacy::Epsilon;

/// The part of an outcome the analyses look at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub user: u32,
    pub timestep: u32,
    pub mobility: MobilityType,
    pub application: Application,
    pub accepted: bool,
    pub reasons: DenialReasons,
    pub non_ideal: bool,
    pub achieved_latency_ms: f64,
    pub ideal_latency_ms: f64,
}

impl From<&RequestOutcome> for Observation {
    fn from(o: &RequestOutcome) -> Self {
        Observation {
            user: o.request.user,
            timestep: o.request.timestep,
            mobility: o.mobility,
            application: o.application,
            accepted: o.accepted,
            reasons: o.reasons,
            non_ideal: o.request.selected_mh != o.request.ideal_mh,
            achieved_latency_ms: o.achieved_latency_ms,
            ideal_latency_ms: o.ideal_latency_ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestClass {
    AlwaysOffloaded,
    PrivacyDependent,
    NeverOffloaded,
}

impl RequestClass {
    pub const ALL: [RequestClass; 3] = [
        RequestClass::AlwaysOffloaded,
        RequestClass::PrivacyDependent,
        RequestClass::NeverOffloaded,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RequestClass::AlwaysOffloaded => "always_offloaded",
            RequestClass::PrivacyDependent => "privacy_dependent",
            RequestClass::NeverOffloaded => "never_offloaded",
        }
    }
}

/// Class of one request from its acceptance under every privacy level.
pub fn classify(accepted: impl IntoIterator<Item = bool>) -> RequestClass {
    let (mut yes, mut no) = (false, false);
    for a in accepted {
        if a {
            yes = true;
        } else {
            no = true;
        }
    }
    match (yes, no) {
        (true, false) => RequestClass::AlwaysOffloaded,
        (false, _) => RequestClass::NeverOffloaded,
        (true, true) => RequestClass::PrivacyDependent,
    }
}

/// Fig. 5 style category of a denied request; `None` for capacity-only denials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DenialCategory {
    LatencyOnly,
    ThroughputOnly,
    Both,
}

impl DenialCategory {
    pub const ALL: [DenialCategory; 3] = [
        DenialCategory::LatencyOnly,
        DenialCategory::ThroughputOnly,
        DenialCategory::Both,
    ];

    pub fn of(reasons: DenialReasons) -> Option<Self> {
        match (
            reasons.contains(DenialReasons::LATENCY),
            reasons.contains(DenialReasons::THROUGHPUT),
        ) {
            (true, false) => Some(DenialCategory::LatencyOnly),
            (false, true) => Some(DenialCategory::ThroughputOnly),
            (true, true) => Some(DenialCategory::Both),
            (false, false) => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DenialCategory::LatencyOnly => "latency",
            DenialCategory::ThroughputOnly => "throughput",
            DenialCategory::Both => "both",
        }
    }
}

/// Sum of values in units of 1e-9, exact under any merge order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct FixedSum(i128);

impl FixedSum {
    fn add(&mut self, v: f64) {
        self.0 += (v * 1e9).round() as i128;
    }

    fn value(self) -> f64 {
        self.0 as f64 / 1e9
    }

    fn merge(&mut self, o: FixedSum) {
        self.0 += o.0;
    }
}

fn key_hash(user: u32, timestep: u32) -> u64 {
    // splitmix64 finaliser
    let mut z = ((user as u64) << 32 | timestep as u64).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Default, PartialEq)]
struct MobilityAcc {
    requests: u64,
    non_ideal: u64,
    increase_sum: FixedSum,
    increase_n: u64,
    zero_ideal_excluded: u64,
}

impl MobilityAcc {
    fn merge(&mut self, o: &MobilityAcc) {
        self.requests += o.requests;
        self.non_ideal += o.non_ideal;
        self.increase_sum.merge(o.increase_sum);
        self.increase_n += o.increase_n;
        self.zero_ideal_excluded += o.zero_ideal_excluded;
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct LevelAcc {
    requests: u64,
    accepted: u64,
    denied: u64,
    categories: [u64; 3],
    capacity_only: u64,
    throughput_involved: u64,
    /// XOR of key hashes of throughput-involved requests; order-independent.
    throughput_digest: u64,
    by_mobility: [MobilityAcc; 3],
    requests_by_app: [u64; 3],
    accepted_by_app: [u64; 3],
}

impl LevelAcc {
    fn add(&mut self, o: &Observation) {
        self.requests += 1;
        let a = o.application.index();
        self.requests_by_app[a] += 1;
        if o.accepted {
            self.accepted += 1;
            self.accepted_by_app[a] += 1;
        } else {
            self.denied += 1;
            match DenialCategory::of(o.reasons) {
                Some(c) => self.categories[c as usize] += 1,
                None => self.capacity_only += 1,
            }
        }
        if o.reasons.contains(DenialReasons::THROUGHPUT) {
            self.throughput_involved += 1;
            self.throughput_digest ^= key_hash(o.user, o.timestep);
        }
        let m = &mut self.by_mobility[o.mobility.index()];
        m.requests += 1;
        if o.non_ideal {
            m.non_ideal += 1;
            if o.ideal_latency_ms > 0.0 {
                m.increase_sum
                    .add(100.0 * (o.achieved_latency_ms - o.ideal_latency_ms) / o.ideal_latency_ms);
                m.increase_n += 1;
            } else {
                m.zero_ideal_excluded += 1;
            }
        }
    }

    fn merge(&mut self, o: &LevelAcc) {
        self.requests += o.requests;
        self.accepted += o.accepted;
        self.denied += o.denied;
        for i in 0..3 {
            self.categories[i] += o.categories[i];
            self.by_mobility[i].merge(&o.by_mobility[i]);
            self.requests_by_app[i] += o.requests_by_app[i];
            self.accepted_by_app[i] += o.accepted_by_app[i];
        }
        self.capacity_only += o.capacity_only;
        self.throughput_involved += o.throughput_involved;
        self.throughput_digest ^= o.throughput_digest;
    }
}

/// Counts for one seed over all privacy levels of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedAccumulator {
    levels: Vec<Epsilon>,
    requests: u64,
    classes: [u64; 3],
    requests_by_app: [u64; 3],
    classes_by_app: [[u64; 3]; 3],
    /// Accepted at no privacy, denied at every other level; by (mobility, app).
    impact: [[u64; 3]; 3],
    impact_cells: [[u64; 3]; 3],
    per_level: Vec<LevelAcc>,
}

impl SeedAccumulator {
    pub fn new(levels: &[Epsilon]) -> Self {
        SeedAccumulator {
            levels: levels.to_vec(),
            requests: 0,
            classes: [0; 3],
            requests_by_app: [0; 3],
            classes_by_app: [[0; 3]; 3],
            impact: [[0; 3]; 3],
            impact_cells: [[0; 3]; 3],
            per_level: vec![LevelAcc::default(); levels.len()],
        }
    }

    pub fn levels(&self) -> &[Epsilon] {
        &self.levels
    }

    /// Adds one paired request: its observation under every level, in level order.
    pub fn add_paired(&mut self, per_level: &[Observation]) -> Result<()> {
        if per_level.len() != self.levels.len() {
            return Err(Error::Pairing(format!(
                "expected {} privacy levels, got {}",
                self.levels.len(),
                per_level.len()
            )));
        }
        let first = per_level[0];
        for o in &per_level[1..] {
            if (o.user, o.timestep, o.application, o.mobility)
                != (first.user, first.timestep, first.application, first.mobility)
            {
                return Err(Error::Pairing(format!(
                    "user {} t {} does not line up with user {} t {} across privacy levels",
                    o.user, o.timestep, first.user, first.timestep
                )));
            }
        }
        self.requests += 1;
        let class = classify(per_level.iter().map(|o| o.accepted)) as usize;
        self.classes[class] += 1;
        let a = first.application.index();
        self.requests_by_app[a] += 1;
        self.classes_by_app[a][class] += 1;
        if let Some(none) = self.levels.iter().position(|e| e.is_none()) {
            if self.levels.len() > 1 {
                let m = first.mobility.index();
                self.impact_cells[m][a] += 1;
                let others_denied = per_level.iter().enumerate().all(|(i, o)| i == none || !o.accepted);
                if per_level[none].accepted && others_denied {
                    self.impact[m][a] += 1;
                }
            }
        }
        for (acc, o) in self.per_level.iter_mut().zip(per_level) {
            acc.add(o);
        }
        Ok(())
    }

    /// Adds one timestep given every level's outcomes (same user order).
    pub fn add_timestep(&mut self, per_level: &[Vec<RequestOutcome>]) -> Result<()> {
        let n = per_level.first().map_or(0, Vec::len);
        if per_level.iter().any(|v| v.len() != n) {
            return Err(Error::Pairing(
                "privacy levels produced different request counts".into(),
            ));
        }
        let mut buf = Vec::with_capacity(per_level.len());
        for i in 0..n {
            buf.clear();
            buf.extend(per_level.iter().map(|v| Observation::from(&v[i])));
            self.add_paired(&buf)?;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &SeedAccumulator) -> Result<()> {
        if self.levels != other.levels {
            return Err(Error::Pairing(
                "cannot merge accumulators over different privacy levels".into(),
            ));
        }
        self.requests += other.requests;
        for i in 0..3 {
            self.classes[i] += other.classes[i];
            self.requests_by_app[i] += other.requests_by_app[i];
            for j in 0..3 {
                self.classes_by_app[i][j] += other.classes_by_app[i][j];
                self.impact[i][j] += other.impact[i][j];
                self.impact_cells[i][j] += other.impact_cells[i][j];
            }
        }
        for (a, b) in self.per_level.iter_mut().zip(&other.per_level) {
            a.merge(b);
        }
        Ok(())
    }

    pub fn requests(&self) -> u64 {
        self.requests
    }

    /// Exact class counts; they always sum to [`Self::requests`].
    pub fn class_counts(&self) -> [u64; 3] {
        self.classes
    }

    /// Number and digest of throughput-involved denials at each level.
    pub fn throughput_signature(&self) -> Vec<(u64, u64)> {
        self.per_level
            .iter()
            .map(|l| (l.throughput_involved, l.throughput_digest))
            .collect()
    }
}

/// Mean of per-seed values with a two-sided 95% Student-t interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub mean: Option<f64>,
    pub ci95: Option<f64>,
    pub n_seeds: usize,
}

impl Interval {
    pub fn lower(&self) -> Option<f64> {
        Some(self.mean? - self.ci95?)
    }

    pub fn upper(&self) -> Option<f64> {
        Some(self.mean? + self.ci95?)
    }
}

pub fn confidence_interval(values: &[f64]) -> Interval {
    let n = values.len();
    if n == 0 {
        return Interval {
            mean: None,
            ci95: None,
            n_seeds: 0,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return Interval {
            mean: Some(mean),
            ci95: None,
            n_seeds: n,
        };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    Interval {
        mean: Some(mean),
        ci95: Some(t * (var / n as f64).sqrt()),
        n_seeds: n,
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn interval_of<I: Iterator<Item = Option<f64>>>(values: I) -> Interval {
    let v: Vec<f64> = values.flatten().collect();
    confidence_interval(&v)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassRow {
    pub class: RequestClass,
    /// `None` for all applications together.
    pub app: Option<Application>,
    #[serde(flatten)]
    pub value: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenialRow {
    pub epsilon: Epsilon,
    /// `latency`, `throughput`, `both` (fractions of latency/throughput denials),
    /// `capacity_only` (fraction of all denials) or `denied` (fraction of requests).
    pub category: &'static str,
    #[serde(flatten)]
    pub value: Interval,
    pub n_denied: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonIdealRow {
    pub epsilon: Epsilon,
    pub mobility: Option<MobilityType>,
    #[serde(flatten)]
    pub value: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyIncreaseRow {
    pub epsilon: Epsilon,
    pub mobility: Option<MobilityType>,
    /// Mean percent increase over non-ideal selections, per-seed means.
    #[serde(flatten)]
    pub value: Interval,
    /// Same, pooled over all non-ideal requests of all seeds.
    pub pooled_pct: Option<f64>,
    /// Percent increase averaged over every request (ideal ones count as 0).
    pub all_requests: Interval,
    pub n_requests: u64,
    pub zero_ideal_excluded: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpactRow {
    pub mobility: Option<MobilityType>,
    pub app: Application,
    #[serde(flatten)]
    pub value: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcceptanceRow {
    pub epsilon: Epsilon,
    pub app: Option<Application>,
    #[serde(flatten)]
    pub value: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThroughputInvariance {
    pub seed: u64,
    pub identical_across_levels: bool,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub seeds: Vec<u64>,
    pub epsilons: Vec<Epsilon>,
    pub requests: u64,
    pub table3: Vec<ClassRow>,
    pub fig5: Vec<DenialRow>,
    pub fig6: Vec<NonIdealRow>,
    pub fig7: Vec<LatencyIncreaseRow>,
    pub fig8: Vec<ImpactRow>,
    pub acceptance: Vec<AcceptanceRow>,
    pub throughput_invariance: Vec<ThroughputInvariance>,
}

impl ExperimentReport {
    pub fn non_ideal(&self, epsilon: Epsilon, mobility: Option<MobilityType>) -> Option<&Interval> {
        self.fig6
            .iter()
            .find(|r| r.epsilon == epsilon && r.mobility == mobility)
            .map(|r| &r.value)
    }

    pub fn denial(&self, epsilon: Epsilon, category: &str) -> Option<&DenialRow> {
        self.fig5
            .iter()
            .find(|r| r.epsilon == epsilon && r.category == category)
    }

    pub fn latency_increase(&self, epsilon: Epsilon, mobility: Option<MobilityType>) -> Option<&LatencyIncreaseRow> {
        self.fig7
            .iter()
            .find(|r| r.epsilon == epsilon && r.mobility == mobility)
    }

    pub fn acceptance(&self, epsilon: Epsilon, app: Option<Application>) -> Option<&Interval> {
        self.acceptance
            .iter()
            .find(|r| r.epsilon == epsilon && r.app == app)
            .map(|r| &r.value)
    }

    pub fn privacy_impact(&self, mobility: Option<MobilityType>, app: Application) -> Option<&Interval> {
        self.fig8
            .iter()
            .find(|r| r.mobility == mobility && r.app == app)
            .map(|r| &r.value)
    }

    pub fn class(&self, class: RequestClass, app: Option<Application>) -> Option<&Interval> {
        self.table3
            .iter()
            .find(|r| r.class == class && r.app == app)
            .map(|r| &r.value)
    }
}

/// Per-seed accumulators keyed by seed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Aggregator {
    seeds: BTreeMap<u64, SeedAccumulator>,
}

impl Aggregator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, seed: u64, acc: SeedAccumulator) -> Result<()> {
        match self.seeds.get_mut(&seed) {
            Some(existing) => existing.merge(&acc),
            None => {
                if let Some(first) = self.seeds.values().next() {
                    if first.levels != acc.levels {
                        return Err(Error::Pairing("seeds disagree on privacy levels".into()));
                    }
                }
                self.seeds.insert(seed, acc);
                Ok(())
            }
        }
    }

    pub fn seed(&self, seed: u64) -> Option<&SeedAccumulator> {
        self.seeds.get(&seed)
    }

    pub fn finish(&self) -> ExperimentReport {
        let accs: Vec<&SeedAccumulator> = self.seeds.values().collect();
        let levels = accs.first().map(|a| a.levels.clone()).unwrap_or_default();

        let mut table3 = Vec::new();
        for class in RequestClass::ALL {
            let c = class as usize;
            table3.push(ClassRow {
                class,
                app: None,
                value: interval_of(accs.iter().map(|a| ratio(a.classes[c], a.requests))),
            });
            for app in Application::ALL {
                let i = app.index();
                table3.push(ClassRow {
                    class,
                    app: Some(app),
                    value: interval_of(accs.iter().map(|a| ratio(a.classes_by_app[i][c], a.requests_by_app[i]))),
                });
            }
        }

        let mut fig5 = Vec::new();
        let mut fig6 = Vec::new();
        let mut fig7 = Vec::new();
        let mut acceptance = Vec::new();
        for (li, &eps) in levels.iter().enumerate() {
            let lv = |a: &&SeedAccumulator| -> LevelAcc { a.per_level[li].clone() };
            let level_accs: Vec<LevelAcc> = accs.iter().map(lv).collect();
            let n_denied: u64 = level_accs.iter().map(|l| l.denied).sum();
            fig5.push(DenialRow {
                epsilon: eps,
                category: "denied",
                value: interval_of(level_accs.iter().map(|l| ratio(l.denied, l.requests))),
                n_denied,
            });
            for cat in DenialCategory::ALL {
                fig5.push(DenialRow {
                    epsilon: eps,
                    category: cat.as_str(),
                    value: interval_of(
                        level_accs
                            .iter()
                            .map(|l| ratio(l.categories[cat as usize], l.categories.iter().sum())),
                    ),
                    n_denied,
                });
            }
            fig5.push(DenialRow {
                epsilon: eps,
                category: "capacity_only",
                value: interval_of(level_accs.iter().map(|l| ratio(l.capacity_only, l.denied))),
                n_denied,
            });

            let mobility_keys: Vec<Option<MobilityType>> = std::iter::once(None)
                .chain(MobilityType::ALL.into_iter().map(Some))
                .collect();
            for mob in mobility_keys {
                let m_accs: Vec<MobilityAcc> = level_accs
                    .iter()
                    .map(|l| match mob {
                        Some(m) => l.by_mobility[m.index()].clone(),
                        None => l.by_mobility.iter().fold(MobilityAcc::default(), |mut acc, x| {
                            acc.merge(x);
                            acc
                        }),
                    })
                    .collect();
                fig6.push(NonIdealRow {
                    epsilon: eps,
                    mobility: mob,
                    value: interval_of(m_accs.iter().map(|m| ratio(m.non_ideal, m.requests))),
                });
                let pooled_sum: i128 = m_accs.iter().map(|m| m.increase_sum.0).sum();
                let pooled_n: u64 = m_accs.iter().map(|m| m.increase_n).sum();
                fig7.push(LatencyIncreaseRow {
                    epsilon: eps,
                    mobility: mob,
                    value: interval_of(
                        m_accs
                            .iter()
                            .map(|m| (m.increase_n > 0).then(|| m.increase_sum.value() / m.increase_n as f64)),
                    ),
                    pooled_pct: (pooled_n > 0).then(|| FixedSum(pooled_sum).value() / pooled_n as f64),
                    all_requests: interval_of(
                        m_accs
                            .iter()
                            .map(|m| (m.requests > 0).then(|| m.increase_sum.value() / m.requests as f64)),
                    ),
                    n_requests: pooled_n,
                    zero_ideal_excluded: m_accs.iter().map(|m| m.zero_ideal_excluded).sum(),
                });
            }

            acceptance.push(AcceptanceRow {
                epsilon: eps,
                app: None,
                value: interval_of(level_accs.iter().map(|l| ratio(l.accepted, l.requests))),
            });
            for app in Application::ALL {
                let i = app.index();
                acceptance.push(AcceptanceRow {
                    epsilon: eps,
                    app: Some(app),
                    value: interval_of(
                        level_accs
                            .iter()
                            .map(|l| ratio(l.accepted_by_app[i], l.requests_by_app[i])),
                    ),
                });
            }
        }

        let mut fig8 = Vec::new();
        for mob in std::iter::once(None).chain(MobilityType::ALL.into_iter().map(Some)) {
            for app in Application::ALL {
                let a = app.index();
                let cell = |s: &SeedAccumulator| -> Option<f64> {
                    let (hit, n) = match mob {
                        Some(m) => (s.impact[m.index()][a], s.impact_cells[m.index()][a]),
                        None => (0..3).fold((0, 0), |(h, n), m| (h + s.impact[m][a], n + s.impact_cells[m][a])),
                    };
                    ratio(hit, n)
                };
                fig8.push(ImpactRow {
                    mobility: mob,
                    app,
                    value: interval_of(accs.iter().map(|s| cell(s))),
                });
            }
        }

        let throughput_invariance = self
            .seeds
            .iter()
            .map(|(&seed, a)| {
                let sig = a.throughput_signature();
                ThroughputInvariance {
                    seed,
                    identical_across_levels: sig.windows(2).all(|w| w[0] == w[1]),
                    counts: sig.iter().map(|s| s.0).collect(),
                }
            })
            .collect();

        ExperimentReport {
            seeds: self.seeds.keys().copied().collect(),
            epsilons: levels,
            requests: accs.iter().map(|a| a.requests).sum(),
            table3,
            fig5,
            fig6,
            fig7,
            fig8,
            acceptance,
            throughput_invariance,
        }
    }
}
