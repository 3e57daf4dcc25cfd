//! Browser bindings for three small interactive views of the simulator:
//! the obfuscation cloud of one location, MH selection for a clicked
//! point, and proportional-fair sharing of one BS.
//!
//! Arrays cross the boundary as flat `Float64Array`s.

use edgepriv::geometry::{Area, Point};
use edgepriv::link::{bs_mh_latency, proportional_fair_allocate, LatencyParams};
use edgepriv::privacy::{MechanismKind, PrivacyMechanism};
use edgepriv::rng;
use edgepriv::topology::{build_topology, Placement, Topology, TopologySpec};
use wasm_bindgen::prelude::*;

fn mechanism(epsilon: f64, kind: &str) -> Result<PrivacyMechanism, String> {
    let kind = match kind {
        "laplace" | "planar-laplace" => MechanismKind::PlanarLaplace,
        "uniform" | "uniform-disk" => MechanismKind::UniformDisk,
        other => return Err(format!("unknown mechanism {other:?}")),
    };
    PrivacyMechanism::new(kind, epsilon).map_err(|e| e.to_string())
}

/// `n` unclipped reports of `(x, y)`, flattened as `[x0, y0, x1, y1, ...]`.
pub fn cloud(x: f64, y: f64, epsilon: f64, kind: &str, n: u32, seed: u64) -> Result<Vec<f64>, String> {
    let m = mechanism(epsilon, kind)?;
    let origin = Point::new(x, y);
    let mut out = Vec::with_capacity(2 * n as usize);
    for i in 0..n {
        let mut r = rng::keyed(seed, rng::tag::DIAGNOSTIC, i as u64, epsilon.to_bits());
        let p = m.perturb(origin, &mut r);
        out.extend([p.x, p.y]);
    }
    Ok(out)
}

/// `[mean, p50, p95]` displacement of a cloud from its centre.
pub fn cloud_stats(points: &[f64], x: f64, y: f64) -> Vec<f64> {
    let mut d: Vec<f64> = points
        .chunks_exact(2)
        .map(|p| Point::new(p[0], p[1]).distance(Point::new(x, y)))
        .collect();
    if d.is_empty() {
        return vec![0.0; 3];
    }
    d.sort_by(f64::total_cmp);
    let q = |p: f64| d[((d.len() - 1) as f64 * p).round() as usize];
    vec![d.iter().sum::<f64>() / d.len() as f64, q(0.5), q(0.95)]
}

#[wasm_bindgen(js_name = obfuscationCloud)]
pub fn obfuscation_cloud(
    x: f64,
    y: f64,
    epsilon: f64,
    mechanism: &str,
    n: u32,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    cloud(x, y, epsilon, mechanism, n, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = cloudStats)]
pub fn cloud_stats_js(points: &[f64], x: f64, y: f64) -> Vec<f64> {
    cloud_stats(points, x, y)
}

/// Demand-capped proportional-fair shares of one BS; `caps` may be empty.
#[wasm_bindgen(js_name = pfAllocate)]
pub fn pf_allocate(demands: &[f64], caps: &[f64], capacity: f64) -> Result<Vec<f64>, JsError> {
    if !caps.is_empty() && caps.len() != demands.len() {
        return Err(JsError::new("caps must be empty or match demands"));
    }
    let caps = if caps.is_empty() {
        vec![f64::INFINITY; demands.len()]
    } else {
        caps.to_vec()
    };
    Ok(proportional_fair_allocate(demands, &caps, capacity))
}

/// A deployment over a square area.
#[wasm_bindgen]
pub struct Scene {
    topology: Topology,
    latency: LatencyParams,
}

impl Scene {
    pub fn build(side_m: f64, base_stations: u32, mec_hosts: u32, seed: u64) -> Result<Scene, String> {
        let area = Area::new(side_m, side_m).map_err(|e| e.to_string())?;
        let spec = TopologySpec {
            placement: Placement::FixedCount,
            bs_count: base_stations,
            mh_count: mec_hosts,
            ..TopologySpec::default()
        };
        let topology = build_topology(&spec, area, seed).map_err(|e| e.to_string())?;
        Ok(Scene {
            topology,
            latency: LatencyParams::default(),
        })
    }

    /// `[true_bs, ideal_mh, ideal_latency]` followed, per report, by
    /// `[rx, ry, presumed_bs, selected_mh, latency]`. Entities are slots.
    pub fn selections(
        &self,
        x: f64,
        y: f64,
        epsilon: f64,
        kind: &str,
        draws: u32,
        seed: u64,
    ) -> Result<Vec<f64>, String> {
        let topo = &self.topology;
        let area = topo.area();
        let truth = Point::new(x, y);
        let true_bs = topo.nearest_bs(truth);
        let bs_pos = topo.base_stations()[true_bs].position;
        let latency = |mh: usize| bs_mh_latency(bs_pos.distance(topo.mec_hosts()[mh].position), &self.latency);
        let ideal = topo.ideal_mh(true_bs);
        let mut out = vec![true_bs as f64, ideal as f64, latency(ideal)];
        let m = if epsilon.is_finite() {
            mechanism(epsilon, kind)?
        } else {
            PrivacyMechanism {
                kind: MechanismKind::PlanarLaplace,
                epsilon_per_meter: f64::INFINITY,
                radius_factor: 3.0,
            }
        };
        for i in 0..draws {
            let (report, _) = m.obfuscate(truth, area, seed, i, 0);
            let presumed = topo.nearest_bs(report);
            let selected = topo.ideal_mh(presumed);
            out.extend([report.x, report.y, presumed as f64, selected as f64, latency(selected)]);
        }
        Ok(out)
    }
}

#[wasm_bindgen]
impl Scene {
    #[wasm_bindgen(constructor)]
    pub fn new(side_m: f64, base_stations: u32, mec_hosts: u32, seed: u64) -> Result<Scene, JsError> {
        Scene::build(side_m, base_stations, mec_hosts, seed).map_err(|e| JsError::new(&e))
    }

    /// BS positions as `[x0, y0, ...]`.
    #[wasm_bindgen(js_name = baseStations)]
    pub fn base_stations(&self) -> Vec<f64> {
        self.topology
            .base_stations()
            .iter()
            .flat_map(|b| [b.position.x, b.position.y])
            .collect()
    }

    #[wasm_bindgen(js_name = mecHosts)]
    pub fn mec_hosts(&self) -> Vec<f64> {
        self.topology
            .mec_hosts()
            .iter()
            .flat_map(|m| [m.position.x, m.position.y])
            .collect()
    }

    /// MH of each BS slot under truthful reporting.
    #[wasm_bindgen(js_name = idealHosts)]
    pub fn ideal_hosts(&self) -> Vec<u32> {
        (0..self.topology.base_stations().len())
            .map(|b| self.topology.ideal_mh(b) as u32)
            .collect()
    }

    #[wasm_bindgen(js_name = select)]
    pub fn select_js(
        &self,
        x: f64,
        y: f64,
        epsilon: f64,
        mechanism: &str,
        draws: u32,
        seed: u64,
    ) -> Result<Vec<f64>, JsError> {
        self.selections(x, y, epsilon, mechanism, draws, seed)
            .map_err(|e| JsError::new(&e))
    }
}
