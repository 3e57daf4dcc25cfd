//! UE-BS radio throughput, per-BS proportional-fair sharing, and BS-MH latency.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioParams {
    pub bandwidth_per_ue_hz: f64,
    pub tx_power_dbm: f64,
    pub noise_power_dbm: f64,
    pub pathloss_exponent: f64,
    /// Path loss at `ref_distance_m`.
    pub pathloss_ref_db: f64,
    pub ref_distance_m: f64,
    /// Distances below this are treated as this.
    pub min_distance_m: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            bandwidth_per_ue_hz: 20.0e6,
            tx_power_dbm: 30.0,
            noise_power_dbm: -96.0,
            pathloss_exponent: 3.5,
            pathloss_ref_db: 38.0,
            ref_distance_m: 1.0,
            min_distance_m: 1.0,
        }
    }
}

impl RadioParams {
    pub(crate) fn validate(&self, problems: &mut Vec<String>) {
        if !(self.bandwidth_per_ue_hz > 0.0) {
            problems.push("radio.bandwidth_per_ue_hz must be positive".into());
        }
        if !(self.pathloss_exponent >= 2.0) {
            problems.push("radio.pathloss_exponent must be at least 2".into());
        }
        if !(self.min_distance_m > 0.0) {
            problems.push("radio.min_distance_m must be positive".into());
        }
        if !(self.ref_distance_m > 0.0) {
            problems.push("radio.ref_distance_m must be positive".into());
        }
        for (k, v) in [
            ("tx_power_dbm", self.tx_power_dbm),
            ("noise_power_dbm", self.noise_power_dbm),
            ("pathloss_ref_db", self.pathloss_ref_db),
        ] {
            if !v.is_finite() {
                problems.push(format!("radio.{k} must be finite"));
            }
        }
    }

    /// Achievable rate of a lone UE at `distance` from its BS.
    pub fn capacity_at(&self, distance: f64) -> f64 {
        shannon_capacity(self.bandwidth_per_ue_hz, snr_linear(distance, self))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyParams {
    pub base_ms: f64,
    pub ms_per_km: f64,
}

impl Default for LatencyParams {
    fn default() -> Self {
        LatencyParams {
            base_ms: 5.0,
            ms_per_km: 37.0,
        }
    }
}

impl LatencyParams {
    pub(crate) fn validate(&self, problems: &mut Vec<String>) {
        if !(self.base_ms >= 0.0 && self.base_ms.is_finite()) {
            problems.push("latency.base_ms must be non-negative".into());
        }
        if !(self.ms_per_km >= 0.0 && self.ms_per_km.is_finite()) {
            problems.push("latency.ms_per_km must be non-negative".into());
        }
    }
}

/// Log-distance path-loss SNR as a linear ratio.
pub fn snr_linear(distance: f64, params: &RadioParams) -> f64 {
    let d = distance.max(params.min_distance_m);
    let pathloss = params.pathloss_ref_db + 10.0 * params.pathloss_exponent * (d / params.ref_distance_m).log10();
    let snr_db = params.tx_power_dbm - pathloss - params.noise_power_dbm;
    10f64.powf(snr_db / 10.0)
}

/// `bandwidth * log2(1 + snr)` in bits/s.
pub fn shannon_capacity(bandwidth_hz: f64, snr: f64) -> f64 {
    bandwidth_hz * snr.ln_1p() / std::f64::consts::LN_2
}

/// BS to MH latency in milliseconds.
pub fn bs_mh_latency(distance_m: f64, params: &LatencyParams) -> f64 {
    params.base_ms + params.ms_per_km * distance_m / 1000.0
}

/// Proportional-fair split of `capacity` among users who each want at most
/// `min(demand, cap)`.
///
/// Maximises the sum of log allocations. The optimum is a water level: every
/// user gets `min(want, level)` with the level raised until capacity runs out.
/// Users whose want is below the level are frozen at their want and the
/// residual is split equally among the rest.
pub fn proportional_fair_allocate(demands: &[f64], caps: &[f64], capacity: f64) -> Vec<f64> {
    assert_eq!(demands.len(), caps.len(), "one cap per demand");
    let wants: Vec<f64> = demands.iter().zip(caps).map(|(&d, &c)| d.min(c).max(0.0)).collect();
    let mut out = vec![0.0; wants.len()];
    water_fill(&wants, capacity.max(0.0), &mut out);
    out
}

/// In-place water-filling into `out`. Allocation-free when nobody competes.
pub(crate) fn water_fill(wants: &[f64], capacity: f64, out: &mut [f64]) {
    let total: f64 = wants.iter().sum();
    if total <= capacity {
        out.copy_from_slice(wants);
        return;
    }
    let mut order: Vec<usize> = (0..wants.len()).collect();
    order.sort_by(|&a, &b| wants[a].total_cmp(&wants[b]).then(a.cmp(&b)));
    let mut remaining = capacity;
    let mut left = wants.len();
    let mut level = 0.0;
    let mut frozen = 0;
    for (k, &i) in order.iter().enumerate() {
        let share = remaining / left as f64;
        if wants[i] <= share {
            out[i] = wants[i];
            remaining -= wants[i];
            left -= 1;
            frozen = k + 1;
        } else {
            level = share;
            break;
        }
    }
    for &i in &order[frozen..] {
        out[i] = level;
    }
}
