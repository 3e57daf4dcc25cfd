//! Base-station and MEC-host deployment over the service area.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Area, Point};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Exactly `*_count` uniform points (a Poisson process conditioned on its count).
    FixedCount,
    /// Poisson-distributed count with mean `*_intensity_per_km2 * area`.
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologySpec {
    pub placement: Placement,
    pub bs_count: u32,
    pub mh_count: u32,
    pub bs_intensity_per_km2: f64,
    pub mh_intensity_per_km2: f64,
    pub bs_capacity_bps: f64,
    pub mh_capacity_bps: f64,
    /// Draw a fresh deployment for every run seed instead of one shared one.
    pub resample_topology_per_seed: bool,
    /// Seed of the shared deployment when not resampling per run seed.
    pub seed: u64,
}

impl Default for TopologySpec {
    fn default() -> Self {
        TopologySpec {
            placement: Placement::FixedCount,
            bs_count: 475,
            mh_count: 95,
            bs_intensity_per_km2: 118.75,
            mh_intensity_per_km2: 23.75,
            bs_capacity_bps: 10.0e9,
            mh_capacity_bps: 10.41e9,
            resample_topology_per_seed: false,
            seed: 0,
        }
    }
}

impl TopologySpec {
    pub(crate) fn validate(&self, problems: &mut Vec<String>) {
        match self.placement {
            Placement::FixedCount => {
                if self.bs_count == 0 {
                    problems.push("topology.bs_count must be at least 1".into());
                }
                if self.mh_count == 0 {
                    problems.push("topology.mh_count must be at least 1".into());
                }
            }
            Placement::Poisson => {
                for (name, v) in [
                    ("bs_intensity_per_km2", self.bs_intensity_per_km2),
                    ("mh_intensity_per_km2", self.mh_intensity_per_km2),
                ] {
                    if !(v > 0.0 && v.is_finite()) {
                        problems.push(format!("topology.{name} must be positive, got {v}"));
                    }
                }
            }
        }
        for (name, v) in [
            ("bs_capacity_bps", self.bs_capacity_bps),
            ("mh_capacity_bps", self.mh_capacity_bps),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                problems.push(format!("topology.{name} must be positive, got {v}"));
            }
        }
    }

    /// Seed that determines the deployment used for run seed `run_seed`.
    pub fn deployment_seed(&self, run_seed: u64) -> u64 {
        if self.resample_topology_per_seed {
            run_seed
        } else {
            self.seed
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseStation {
    pub id: u32,
    pub position: Point,
    pub capacity_bps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MecHost {
    pub id: u32,
    pub position: Point,
    pub capacity_bps: f64,
}

/// Homogeneous Poisson point process over `area`.
pub fn sample_hppp<R: Rng + ?Sized>(intensity_per_km2: f64, area: &Area, rng: &mut R) -> Vec<Point> {
    let mean = intensity_per_km2 * area.km2();
    if mean <= 0.0 {
        return Vec::new();
    }
    let count = Poisson::new(mean).expect("finite positive Poisson mean").sample(rng) as usize;
    sample_hppp_fixed_count(count, area, rng)
}

/// `count` i.i.d. uniform points over `area`.
pub fn sample_hppp_fixed_count<R: Rng + ?Sized>(count: usize, area: &Area, rng: &mut R) -> Vec<Point> {
    (0..count)
        .map(|_| Point::new(rng.gen::<f64>() * area.width, rng.gen::<f64>() * area.height))
        .collect()
}

/// Uniform bucket grid over a point set, answering exact nearest-neighbour
/// queries by expanding square rings of cells around the query.
///
/// Entries are identified by their slot, i.e. their position in the slice the
/// index was built from. Ties are broken by the lower slot.
#[derive(Debug, Clone)]
pub struct GridIndex {
    origin: Point,
    cell: f64,
    nx: i64,
    ny: i64,
    /// CSR offsets into `entries`, one per cell plus a sentinel.
    starts: Vec<u32>,
    entries: Vec<(Point, u32)>,
}

impl GridIndex {
    /// Cell side is the expected nearest-neighbour distance of a Poisson
    /// process with the same density, `1/sqrt(pi * lambda)`.
    pub fn build(points: &[Point], area: &Area) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::config("cannot index an empty point set"));
        }
        let density = points.len() as f64 / (area.width * area.height);
        let cell = (1.0 / (std::f64::consts::PI * density).sqrt()).max(1e-6);
        Self::with_cell_size(points, area, cell)
    }

    pub fn with_cell_size(points: &[Point], area: &Area, cell: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::config("cannot index an empty point set"));
        }
        // The grid spans the area and every point, so each point lies inside its cell.
        let (mut lo, mut hi) = (Point::new(0.0, 0.0), Point::new(area.width, area.height));
        for p in points {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let nx = (((hi.x - lo.x) / cell).floor() as i64 + 1).max(1);
        let ny = (((hi.y - lo.y) / cell).floor() as i64 + 1).max(1);
        let ncells = (nx * ny) as usize;
        let cell_of = |p: &Point| -> usize {
            let cx = (((p.x - lo.x) / cell).floor() as i64).clamp(0, nx - 1);
            let cy = (((p.y - lo.y) / cell).floor() as i64).clamp(0, ny - 1);
            (cy * nx + cx) as usize
        };
        let mut counts = vec![0u32; ncells + 1];
        for p in points {
            counts[cell_of(p) + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let starts = counts.clone();
        let mut fill = counts;
        let mut entries = vec![(Point::default(), 0u32); points.len()];
        // Slots are visited in ascending order, so each cell lists them ascending.
        for (slot, p) in points.iter().enumerate() {
            let c = cell_of(p);
            entries[fill[c] as usize] = (*p, slot as u32);
            fill[c] += 1;
        }
        Ok(GridIndex {
            origin: lo,
            cell,
            nx,
            ny,
            starts,
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    #[inline]
    fn scan_cell(&self, cx: i64, cy: i64, q: Point, best: &mut (f64, u32)) {
        let c = (cy * self.nx + cx) as usize;
        let (lo, hi) = (self.starts[c] as usize, self.starts[c + 1] as usize);
        for &(p, slot) in &self.entries[lo..hi] {
            let d = q.distance_sq(p);
            if d < best.0 || (d == best.0 && slot < best.1) {
                *best = (d, slot);
            }
        }
    }

    /// Slot of the entry closest to `q`.
    pub fn nearest(&self, q: Point) -> usize {
        let qx = ((q.x - self.origin.x) / self.cell).floor();
        let qy = ((q.y - self.origin.y) / self.cell).floor();
        // Out-of-range queries still work: the query cell may lie outside the grid.
        let qx = qx.clamp(-1.0e9, 1.0e9) as i64;
        let qy = qy.clamp(-1.0e9, 1.0e9) as i64;
        let reach = qx
            .abs()
            .max((self.nx - 1 - qx).abs())
            .max(qy.abs())
            .max((self.ny - 1 - qy).abs());
        let mut best = (f64::INFINITY, u32::MAX);
        let mut r: i64 = 0;
        loop {
            let (x0, x1) = ((qx - r).max(0), (qx + r).min(self.nx - 1));
            let (y0, y1) = ((qy - r).max(0), (qy + r).min(self.ny - 1));
            if x0 <= x1 && y0 <= y1 {
                for cy in y0..=y1 {
                    if (cy - qy).abs() == r {
                        for cx in x0..=x1 {
                            self.scan_cell(cx, cy, q, &mut best);
                        }
                    } else {
                        if (0..self.nx).contains(&(qx - r)) {
                            self.scan_cell(qx - r, cy, q, &mut best);
                        }
                        if r > 0 && (0..self.nx).contains(&(qx + r)) {
                            self.scan_cell(qx + r, cy, q, &mut best);
                        }
                    }
                }
            }
            // Anything outside rings 0..=r differs from q by more than r cells
            // along some axis. Stop only on a strict bound so ties resolve by slot.
            let bound = r as f64 * self.cell * (1.0 - 1e-12);
            if best.1 != u32::MAX && best.0 < bound * bound {
                break;
            }
            if r >= reach {
                break;
            }
            r += 1;
        }
        best.1 as usize
    }
}

/// Immutable deployment of base stations and MEC hosts.
#[derive(Debug, Clone)]
pub struct Topology {
    area: Area,
    base_stations: Vec<BaseStation>,
    mec_hosts: Vec<MecHost>,
    bs_index: GridIndex,
    mh_index: GridIndex,
    /// Slot of the MH nearest to each BS slot.
    ideal_mh: Vec<u32>,
}

impl Topology {
    /// Builds the indices and the BS to ideal-MH table. Entities are ordered
    /// by id, so slot ties resolve to the lowest id.
    pub fn from_parts(area: Area, mut base_stations: Vec<BaseStation>, mut mec_hosts: Vec<MecHost>) -> Result<Self> {
        let mut problems = Vec::new();
        if base_stations.is_empty() {
            problems.push("topology has no base stations".to_string());
        }
        if mec_hosts.is_empty() {
            problems.push("topology has no MEC hosts".to_string());
        }
        base_stations.sort_by_key(|b| b.id);
        mec_hosts.sort_by_key(|m| m.id);
        if base_stations.windows(2).any(|w| w[0].id == w[1].id) {
            problems.push("duplicate base station id".into());
        }
        if mec_hosts.windows(2).any(|w| w[0].id == w[1].id) {
            problems.push("duplicate MEC host id".into());
        }
        for b in &base_stations {
            if !area.contains(b.position) {
                problems.push(format!("base station {} lies outside the area", b.id));
            }
            if !(b.capacity_bps > 0.0) {
                problems.push(format!("base station {} has non-positive capacity", b.id));
            }
        }
        for m in &mec_hosts {
            if !area.contains(m.position) {
                problems.push(format!("MEC host {} lies outside the area", m.id));
            }
            if !(m.capacity_bps > 0.0) {
                problems.push(format!("MEC host {} has non-positive capacity", m.id));
            }
        }
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        let bs_points: Vec<Point> = base_stations.iter().map(|b| b.position).collect();
        let mh_points: Vec<Point> = mec_hosts.iter().map(|m| m.position).collect();
        let bs_index = GridIndex::build(&bs_points, &area)?;
        let mh_index = GridIndex::build(&mh_points, &area)?;
        let ideal_mh = bs_points.iter().map(|&p| mh_index.nearest(p) as u32).collect();
        Ok(Topology {
            area,
            base_stations,
            mec_hosts,
            bs_index,
            mh_index,
            ideal_mh,
        })
    }

    pub fn area(&self) -> &Area {
        &self.area
    }

    pub fn base_stations(&self) -> &[BaseStation] {
        &self.base_stations
    }

    pub fn mec_hosts(&self) -> &[MecHost] {
        &self.mec_hosts
    }

    /// Slot of the BS nearest to `p`.
    #[inline]
    pub fn nearest_bs(&self, p: Point) -> usize {
        self.bs_index.nearest(p)
    }

    /// Slot of the MH nearest to `p`.
    #[inline]
    pub fn nearest_mh(&self, p: Point) -> usize {
        self.mh_index.nearest(p)
    }

    /// Slot of the MH nearest to BS slot `bs`.
    #[inline]
    pub fn ideal_mh(&self, bs: usize) -> usize {
        self.ideal_mh[bs] as usize
    }

    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let rows_bs = self.base_stations.iter().map(|b| (b.id, b.position, b.capacity_bps));
        write_entities(&dir.join("bs.csv"), rows_bs)?;
        let rows_mh = self.mec_hosts.iter().map(|m| (m.id, m.position, m.capacity_bps));
        write_entities(&dir.join("mh.csv"), rows_mh)
    }

    pub fn read_csv(dir: &Path, area: Area) -> Result<Self> {
        let bs = read_entities(&dir.join("bs.csv"))?
            .into_iter()
            .map(|(id, position, capacity_bps)| BaseStation {
                id,
                position,
                capacity_bps,
            })
            .collect();
        let mh = read_entities(&dir.join("mh.csv"))?
            .into_iter()
            .map(|(id, position, capacity_bps)| MecHost {
                id,
                position,
                capacity_bps,
            })
            .collect();
        Topology::from_parts(area, bs, mh)
    }
}

fn write_entities(path: &Path, rows: impl Iterator<Item = (u32, Point, f64)>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "id,x,y,capacity_bps").map_err(io)?;
    for (id, p, cap) in rows {
        writeln!(w, "{id},{},{},{cap}", p.x, p.y).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn read_entities(path: &Path) -> Result<Vec<(u32, Point, f64)>> {
    #[derive(Deserialize)]
    struct Row {
        id: u32,
        x: f64,
        y: f64,
        capacity_bps: f64,
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    reader
        .deserialize::<Row>()
        .map(|row| {
            let r = row.map_err(|e| Error::parse(path, e.to_string()))?;
            Ok((r.id, Point::new(r.x, r.y), r.capacity_bps))
        })
        .collect()
}

/// Samples a deployment for `spec` from the keyed streams of `seed`.
pub fn build_topology(spec: &TopologySpec, area: Area, seed: u64) -> Result<Topology> {
    let mut problems = Vec::new();
    spec.validate(&mut problems);
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    let mut bs_rng = rng::keyed(seed, rng::tag::BASE_STATIONS, 0, 0);
    let mut mh_rng = rng::keyed(seed, rng::tag::MEC_HOSTS, 0, 0);
    let (bs_points, mh_points) = match spec.placement {
        Placement::FixedCount => (
            sample_hppp_fixed_count(spec.bs_count as usize, &area, &mut bs_rng),
            sample_hppp_fixed_count(spec.mh_count as usize, &area, &mut mh_rng),
        ),
        Placement::Poisson => (
            sample_hppp(spec.bs_intensity_per_km2, &area, &mut bs_rng),
            sample_hppp(spec.mh_intensity_per_km2, &area, &mut mh_rng),
        ),
    };
    let bs = bs_points
        .into_iter()
        .enumerate()
        .map(|(i, position)| BaseStation {
            id: i as u32,
            position,
            capacity_bps: spec.bs_capacity_bps,
        })
        .collect();
    let mh = mh_points
        .into_iter()
        .enumerate()
        .map(|(i, position)| MecHost {
            id: i as u32,
            position,
            capacity_bps: spec.mh_capacity_bps,
        })
        .collect();
    Topology::from_parts(area, bs, mh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn brute(points: &[Point], q: Point) -> usize {
        let mut best = 0;
        for (i, p) in points.iter().enumerate() {
            if q.distance_sq(*p) < q.distance_sq(points[best]) {
                best = i;
            }
        }
        best
    }

    #[test]
    fn zero_intensity_is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_hppp(0.0, &Area::default(), &mut rng).is_empty());
    }

    #[test]
    fn fixed_count_is_exact_and_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let area = Area::default();
        for n in [1, 95, 475] {
            let pts = sample_hppp_fixed_count(n, &area, &mut rng);
            assert_eq!(pts.len(), n);
            assert!(pts.iter().all(|p| area.contains(*p)));
        }
    }

    #[test]
    fn single_entity_is_always_nearest() {
        let area = Area::default();
        let idx = GridIndex::build(&[Point::new(1900.0, 10.0)], &area).unwrap();
        for q in [
            Point::new(0.0, 0.0),
            Point::new(2000.0, 2000.0),
            Point::new(-50.0, 3000.0),
        ] {
            assert_eq!(idx.nearest(q), 0);
        }
    }

    #[test]
    fn equidistant_tie_goes_to_lowest_slot() {
        let area = Area::default();
        let mut pts: Vec<Point> = (0..10).map(|i| Point::new(100.0 * i as f64 + 50.0, 1500.0)).collect();
        pts[3] = Point::new(900.0, 1000.0);
        pts[7] = Point::new(1100.0, 1000.0);
        let idx = GridIndex::build(&pts, &area).unwrap();
        assert_eq!(idx.nearest(Point::new(1000.0, 1000.0)), 3);
    }

    #[test]
    fn grid_matches_brute_force() {
        let area = Area::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bs = sample_hppp_fixed_count(475, &area, &mut rng);
        let idx = GridIndex::build(&bs, &area).unwrap();
        for q in sample_hppp_fixed_count(1000, &area, &mut rng) {
            assert_eq!(idx.nearest(q), brute(&bs, q));
            assert_eq!(idx.nearest(q), idx.nearest(q));
        }
    }

    #[test]
    fn empty_topology_is_a_config_error() {
        let spec = TopologySpec {
            mh_count: 0,
            ..Default::default()
        };
        let err = build_topology(&spec, Area::default(), 0).unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn ideal_mh_is_nearest_to_each_bs() {
        let topo = build_topology(&TopologySpec::default(), Area::default(), 11).unwrap();
        assert_eq!(topo.base_stations().len(), 475);
        assert_eq!(topo.mec_hosts().len(), 95);
        for (b, bs) in topo.base_stations().iter().enumerate() {
            let ideal = topo.mec_hosts()[topo.ideal_mh(b)].position;
            let d = bs.position.distance(ideal);
            assert!(topo.mec_hosts().iter().all(|m| d <= bs.position.distance(m.position)));
        }
    }

    #[test]
    fn csv_round_trip_preserves_deployment() {
        let dir = tempfile::tempdir().unwrap();
        let topo = build_topology(&TopologySpec::default(), Area::default(), 5).unwrap();
        topo.write_csv(dir.path()).unwrap();
        let back = Topology::read_csv(dir.path(), Area::default()).unwrap();
        assert_eq!(back.base_stations(), topo.base_stations());
        assert_eq!(back.mec_hosts(), topo.mec_hosts());
        assert_eq!(back.ideal_mh, topo.ideal_mh);
    }
}
