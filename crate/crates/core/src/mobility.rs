//! Per-second user position streams.
//!
//! Traces come either from an external mobility simulator export (a positions
//! CSV or floating-car-data XML) or from the built-in Manhattan-grid generator.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use quick_xml::events::Event;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Area, Point};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MobilityType {
    CarPassenger,
    BusPassenger,
    Pedestrian,
}

impl MobilityType {
    pub const ALL: [MobilityType; 3] = [
        MobilityType::CarPassenger,
        MobilityType::BusPassenger,
        MobilityType::Pedestrian,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MobilityType::CarPassenger => "car",
            MobilityType::BusPassenger => "bus",
            MobilityType::Pedestrian => "pedestrian",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationSpec {
    pub cars: u32,
    pub buses: u32,
    pub passengers_per_bus: u32,
    pub pedestrians: u32,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        PopulationSpec {
            cars: 400,
            buses: 40,
            passengers_per_bus: 10,
            pedestrians: 450,
        }
    }
}

/// A simulated user. Car and bus passengers carry the id of their vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub id: u32,
    pub mobility: MobilityType,
    pub vehicle_id: Option<u32>,
}

impl PopulationSpec {
    pub fn user_count(&self) -> u32 {
        self.cars + self.buses * self.passengers_per_bus + self.pedestrians
    }

    /// Users in id order: car passengers, then bus passengers grouped by bus,
    /// then pedestrians. Vehicle ids number cars first, then buses.
    pub fn users(&self) -> Vec<User> {
        let mut users = Vec::with_capacity(self.user_count() as usize);
        for car in 0..self.cars {
            users.push((MobilityType::CarPassenger, Some(car)));
        }
        for bus in 0..self.buses {
            for _ in 0..self.passengers_per_bus {
                users.push((MobilityType::BusPassenger, Some(self.cars + bus)));
            }
        }
        for _ in 0..self.pedestrians {
            users.push((MobilityType::Pedestrian, None));
        }
        users
            .into_iter()
            .enumerate()
            .map(|(id, (mobility, vehicle_id))| User {
                id: id as u32,
                mobility,
                vehicle_id,
            })
            .collect()
    }
}

/// Positions of every user at every timestep, stored timestep-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityTrace {
    users: u32,
    steps: u32,
    resolution_s: f64,
    positions: Vec<Point>,
}

impl MobilityTrace {
    pub fn from_positions(users: u32, steps: u32, resolution_s: f64, positions: Vec<Point>) -> Result<Self> {
        if positions.len() != users as usize * steps as usize {
            return Err(Error::Invariant(format!(
                "trace holds {} positions, expected {users} users x {steps} steps",
                positions.len()
            )));
        }
        Ok(MobilityTrace {
            users,
            steps,
            resolution_s,
            positions,
        })
    }

    pub fn users(&self) -> u32 {
        self.users
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn resolution_s(&self) -> f64 {
        self.resolution_s
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Positions of all users at `step`, indexed by user id.
    #[inline]
    pub fn at(&self, step: u32) -> &[Point] {
        let u = self.users as usize;
        let s = step as usize * u;
        &self.positions[s..s + u]
    }

    #[inline]
    pub fn position(&self, step: u32, user: u32) -> Point {
        self.positions[step as usize * self.users as usize + user as usize]
    }

    /// Canonical `t,user_id,x,y` CSV, ordered by time then user.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::with_capacity(1 << 20, file);
        let io = |e| Error::io(path, e);
        writeln!(w, "t,user_id,x,y").map_err(io)?;
        for step in 0..self.steps {
            let t = step as f64 * self.resolution_s;
            for (u, p) in self.at(step).iter().enumerate() {
                writeln!(w, "{t},{u},{},{}", p.x, p.y).map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceFormat {
    PositionsCsv,
    FloatingCarDataXml,
}

/// What kind of mover an ingested track belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Car,
    Bus,
    Pedestrian,
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSource {
    pub kind: SourceKind,
    pub positions: Vec<Option<Point>>,
}

/// Parsed trace file before it is mapped onto users.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawTrace {
    pub steps: u32,
    pub sources: BTreeMap<String, RawSource>,
}

impl RawTrace {
    fn record(&mut self, id: &str, kind: SourceKind, step: u32, p: Point) {
        let src = self.sources.entry(id.to_string()).or_insert_with(|| RawSource {
            kind,
            positions: Vec::new(),
        });
        if src.positions.len() <= step as usize {
            src.positions.resize(step as usize + 1, None);
        }
        src.positions[step as usize] = Some(p);
        self.steps = self.steps.max(step + 1);
    }
}

/// How ingested tracks map onto the declared users.
#[derive(Debug, Clone, PartialEq)]
pub enum PassengerAssignment {
    /// User `u` follows the track whose id is `u`.
    Identity,
    /// Car passengers and pedestrians take car and pedestrian tracks one to
    /// one in id order; bus passengers are dealt round-robin over bus tracks.
    RoundRobin,
    /// Track id for every user, indexed by user id.
    Explicit(Vec<String>),
}

fn time_to_step(t: f64, resolution_s: f64) -> Option<u32> {
    let s = t / resolution_s;
    let r = s.round();
    ((s - r).abs() < 1e-6 && r >= 0.0 && r < u32::MAX as f64).then_some(r as u32)
}

pub fn read_raw_trace(path: &Path, format: TraceFormat, resolution_s: f64) -> Result<RawTrace> {
    match format {
        TraceFormat::PositionsCsv => read_positions_csv(path, resolution_s),
        TraceFormat::FloatingCarDataXml => read_fcd_xml(path, resolution_s),
    }
}

fn read_positions_csv(path: &Path, resolution_s: f64) -> Result<RawTrace> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::parse(path, e.to_string()))?;
    let headers = reader.headers().map_err(|e| Error::parse(path, e.to_string()))?.clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["t", "user_id", "x", "y"] {
        return Err(Error::parse(path, "expected header t,user_id,x,y"));
    }
    let mut raw = RawTrace::default();
    let mut record = csv::StringRecord::new();
    let mut line = 1u64;
    while reader
        .read_record(&mut record)
        .map_err(|e| Error::parse(path, e.to_string()))?
    {
        line += 1;
        let field = |i: usize| record.get(i).map(str::trim).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            field(i)
                .parse::<f64>()
                .map_err(|_| Error::parse(path, format!("line {line}: bad number {:?}", field(i))))
        };
        let t = num(0)?;
        let step = time_to_step(t, resolution_s)
            .ok_or_else(|| Error::parse(path, format!("line {line}: time {t} is off the {resolution_s} s grid")))?;
        raw.record(field(1), SourceKind::Unknown, step, Point::new(num(2)?, num(3)?));
    }
    Ok(raw)
}

fn read_fcd_xml(path: &Path, resolution_s: f64) -> Result<RawTrace> {
    let mut reader = quick_xml::Reader::from_file(path).map_err(|e| Error::parse(path, e.to_string()))?;
    let mut buf = Vec::new();
    let mut raw = RawTrace::default();
    let mut step: Option<u32> = None;
    loop {
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|e| Error::parse(path, format!("at byte {}: {e}", reader.buffer_position())))?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let name = e.name();
                let mut attr = BTreeMap::new();
                for a in e.attributes() {
                    let a = a.map_err(|err| Error::parse(path, err.to_string()))?;
                    let value = a.unescape_value().map_err(|err| Error::parse(path, err.to_string()))?;
                    attr.insert(String::from_utf8_lossy(a.key.as_ref()).into_owned(), value.into_owned());
                }
                match name.as_ref() {
                    b"timestep" => {
                        let t: f64 = attr
                            .get("time")
                            .and_then(|v| v.parse().ok())
                            .ok_or_else(|| Error::parse(path, "timestep without numeric time"))?;
                        step =
                            Some(time_to_step(t, resolution_s).ok_or_else(|| {
                                Error::parse(path, format!("time {t} is off the {resolution_s} s grid"))
                            })?);
                    }
                    tag @ (b"vehicle" | b"person") => {
                        let step = step.ok_or_else(|| Error::parse(path, "mover outside a timestep"))?;
                        let get = |k: &str| -> Result<f64> {
                            attr.get(k)
                                .and_then(|v| v.parse().ok())
                                .ok_or_else(|| Error::parse(path, format!("mover without numeric {k}")))
                        };
                        let id = attr.get("id").ok_or_else(|| Error::parse(path, "mover without id"))?;
                        let kind = if tag == b"person" {
                            SourceKind::Pedestrian
                        } else if attr.get("type").is_some_and(|t| t.to_ascii_lowercase().contains("bus")) {
                            SourceKind::Bus
                        } else {
                            SourceKind::Car
                        };
                        raw.record(id, kind, step, Point::new(get("x")?, get("y")?));
                    }
                    _ => {}
                }
            }
            Event::End(ref e) if e.name().as_ref() == b"timestep" => step = None,
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    Ok(raw)
}

/// Track id each user follows.
pub fn resolve_assignment(users: &[User], raw: &RawTrace, assignment: &PassengerAssignment) -> Result<Vec<String>> {
    match assignment {
        PassengerAssignment::Identity => Ok(users.iter().map(|u| u.id.to_string()).collect()),
        PassengerAssignment::Explicit(ids) => {
            if ids.len() != users.len() {
                return Err(Error::config(format!(
                    "explicit assignment lists {} tracks for {} users",
                    ids.len(),
                    users.len()
                )));
            }
            Ok(ids.clone())
        }
        PassengerAssignment::RoundRobin => {
            let of_kind = |k: SourceKind| -> Vec<&String> {
                raw.sources
                    .iter()
                    .filter(|(_, s)| s.kind == k)
                    .map(|(id, _)| id)
                    .collect()
            };
            let cars = of_kind(SourceKind::Car);
            let buses = of_kind(SourceKind::Bus);
            let peds = of_kind(SourceKind::Pedestrian);
            let (mut next_car, mut next_bus, mut next_ped) = (0, 0, 0);
            let mut out = Vec::with_capacity(users.len());
            for u in users {
                let id = match u.mobility {
                    MobilityType::CarPassenger => {
                        next_car += 1;
                        cars.get(next_car - 1)
                    }
                    MobilityType::BusPassenger => {
                        next_bus += 1;
                        (!buses.is_empty()).then(|| &buses[(next_bus - 1) % buses.len()])
                    }
                    MobilityType::Pedestrian => {
                        next_ped += 1;
                        peds.get(next_ped - 1)
                    }
                };
                let id = id.ok_or_else(|| {
                    Error::config(format!(
                        "trace has too few {} tracks for the declared population",
                        u.mobility.as_str()
                    ))
                })?;
                out.push((*id).clone());
            }
            Ok(out)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestedTrace {
    pub trace: MobilityTrace,
    /// Track points moved onto the area boundary.
    pub clipped: u64,
}

/// Parses `path` and expands it to one stream per user.
pub fn ingest_trace(
    path: &Path,
    format: TraceFormat,
    users: &[User],
    assignment: &PassengerAssignment,
    area: &Area,
    resolution_s: f64,
) -> Result<IngestedTrace> {
    let raw = read_raw_trace(path, format, resolution_s)?;
    expand_raw_trace(&raw, users, assignment, area, resolution_s)
}

pub fn expand_raw_trace(
    raw: &RawTrace,
    users: &[User],
    assignment: &PassengerAssignment,
    area: &Area,
    resolution_s: f64,
) -> Result<IngestedTrace> {
    let tracks = resolve_assignment(users, raw, assignment)?;
    let steps = if users.is_empty() { 0 } else { raw.steps };
    let n = users.len();
    let mut clipped = 0u64;
    let mut sources: BTreeMap<&str, Vec<Point>> = BTreeMap::new();
    for (user, track) in users.iter().zip(&tracks) {
        if sources.contains_key(track.as_str()) {
            continue;
        }
        let src = raw.sources.get(track).ok_or(Error::TraceGap {
            user: user.id,
            timestep: 0,
        })?;
        let mut pts = Vec::with_capacity(steps as usize);
        for step in 0..steps {
            let p = src
                .positions
                .get(step as usize)
                .copied()
                .flatten()
                .ok_or(Error::TraceGap {
                    user: user.id,
                    timestep: step,
                })?;
            let (q, moved) = area.clip(p);
            clipped += moved as u64;
            pts.push(q);
        }
        sources.insert(track.as_str(), pts);
    }
    let mut positions = vec![Point::default(); n * steps as usize];
    for (u, track) in tracks.iter().enumerate() {
        let pts = &sources[track.as_str()];
        for step in 0..steps as usize {
            positions[step * n + u] = pts[step];
        }
    }
    Ok(IngestedTrace {
        trace: MobilityTrace::from_positions(n as u32, steps, resolution_s, positions)?,
        clipped,
    })
}

/// Manhattan-grid movement parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub block_m: f64,
    pub sidewalk_offset_m: f64,
    pub car_speed_mps: [f64; 2],
    pub light_cycle_s: f64,
    pub bus_speed_mps: [f64; 2],
    pub bus_stop_spacing_m: f64,
    pub bus_dwell_s: f64,
    /// Bus loop side length range in blocks.
    pub bus_route_blocks: [u32; 2],
    pub pedestrian_speed_mps: [f64; 2],
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            block_m: 100.0,
            sidewalk_offset_m: 5.0,
            car_speed_mps: [8.0, 14.0],
            light_cycle_s: 30.0,
            bus_speed_mps: [6.0, 10.0],
            bus_stop_spacing_m: 500.0,
            bus_dwell_s: 20.0,
            bus_route_blocks: [3, 10],
            pedestrian_speed_mps: [1.0, 1.9],
        }
    }
}

impl SyntheticSpec {
    pub(crate) fn validate(&self, area: &Area, problems: &mut Vec<String>) {
        if !(self.block_m > 0.0) || self.block_m > area.width.min(area.height) {
            problems.push("mobility.synthetic.block_m must be positive and fit the area".into());
        }
        if !(self.sidewalk_offset_m > 0.0 && self.sidewalk_offset_m < self.block_m / 2.0) {
            problems.push("mobility.synthetic.sidewalk_offset_m must lie in (0, block_m/2)".into());
        }
        for (k, [lo, hi]) in [
            ("car_speed_mps", self.car_speed_mps),
            ("bus_speed_mps", self.bus_speed_mps),
            ("pedestrian_speed_mps", self.pedestrian_speed_mps),
        ] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                problems.push(format!("mobility.synthetic.{k} must be an increasing positive range"));
            }
        }
        if !(self.light_cycle_s > 0.0) || !(self.bus_dwell_s >= 0.0) || !(self.bus_stop_spacing_m > 0.0) {
            problems.push("mobility.synthetic light cycle, bus dwell and stop spacing must be positive".into());
        }
        let [lo, hi] = self.bus_route_blocks;
        if lo == 0 || lo > hi {
            problems.push("mobility.synthetic.bus_route_blocks must be an increasing positive range".into());
        }
    }

    /// Upper bound on speed for each mobility type.
    pub fn max_speed(&self, mobility: MobilityType) -> f64 {
        match mobility {
            MobilityType::CarPassenger => self.car_speed_mps[1],
            MobilityType::BusPassenger => self.bus_speed_mps[1],
            MobilityType::Pedestrian => self.pedestrian_speed_mps[1],
        }
    }

    /// True if `p` lies on a street centre line.
    pub fn on_street(&self, p: Point) -> bool {
        on_lattice(p.x, self.block_m, 0.0) || on_lattice(p.y, self.block_m, 0.0)
    }

    /// True if `p` lies on a sidewalk line.
    pub fn on_sidewalk(&self, p: Point) -> bool {
        let o = self.sidewalk_offset_m;
        [o, -o]
            .iter()
            .any(|&off| on_lattice(p.x, self.block_m, off) || on_lattice(p.y, self.block_m, off))
    }
}

fn on_lattice(v: f64, block: f64, offset: f64) -> bool {
    let k = ((v - offset) / block).round();
    (v - offset - k * block).abs() < 1e-6
}

fn uniform<R: Rng>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

struct StreetGrid {
    block: f64,
    nx: i64,
    ny: i64,
}

impl StreetGrid {
    fn new(area: &Area, block: f64) -> Self {
        StreetGrid {
            block,
            nx: (area.width / block + 1e-9).floor() as i64,
            ny: (area.height / block + 1e-9).floor() as i64,
        }
    }

    fn point(&self, (i, j): (i64, i64)) -> Point {
        Point::new(i as f64 * self.block, j as f64 * self.block)
    }

    fn neighbors(&self, (i, j): (i64, i64)) -> impl Iterator<Item = (i64, i64)> + '_ {
        [(1, 0), (-1, 0), (0, 1), (0, -1)]
            .into_iter()
            .map(move |(di, dj)| (i + di, j + dj))
            .filter(|&(a, b)| a >= 0 && b >= 0 && a <= self.nx && b <= self.ny)
    }
}

/// Car on a random-turn walk over street intersections with fixed-cycle lights.
struct Car<'a> {
    grid: &'a StreetGrid,
    cycle: f64,
    speed: f64,
    from: (i64, i64),
    to: (i64, i64),
    progress: f64,
    wait: f64,
}

impl<'a> Car<'a> {
    fn new(grid: &'a StreetGrid, spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Self {
        let from = (rng.gen_range(0..=grid.nx), rng.gen_range(0..=grid.ny));
        let nbrs: Vec<_> = grid.neighbors(from).collect();
        let to = nbrs[rng.gen_range(0..nbrs.len())];
        Car {
            grid,
            cycle: spec.light_cycle_s,
            speed: uniform(rng, spec.car_speed_mps),
            from,
            to,
            progress: rng.gen::<f64>() * grid.block,
            wait: 0.0,
        }
    }

    fn position(&self) -> Point {
        let (a, b) = (self.grid.point(self.from), self.grid.point(self.to));
        let f = self.progress / self.grid.block;
        Point::new(a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f)
    }

    /// Horizontal approaches are green during the first half of the cycle,
    /// vertical ones during the second, with a per-intersection phase offset.
    fn red_wait(&self, node: (i64, i64), horizontal: bool, now: f64) -> f64 {
        let offset = ((node.0 * 7 + node.1 * 13) as f64 * 1.7) % self.cycle;
        let phase = (now + offset).rem_euclid(self.cycle);
        let half = self.cycle / 2.0;
        match (horizontal, phase < half) {
            (true, true) | (false, false) => 0.0,
            (true, false) => self.cycle - phase,
            (false, true) => half - phase,
        }
    }

    fn advance(&mut self, now: f64, dt: f64, rng: &mut ChaCha8Rng) {
        let mut left = dt;
        while left > 0.0 {
            if self.wait > 0.0 {
                let w = self.wait.min(left);
                self.wait -= w;
                left -= w;
                continue;
            }
            let need = (self.grid.block - self.progress) / self.speed;
            if need > left {
                self.progress += self.speed * left;
                break;
            }
            left -= need;
            let node = self.to;
            let horizontal = self.to.1 == self.from.1;
            let options: Vec<_> = self.grid.neighbors(node).filter(|&n| n != self.from).collect();
            let next = if options.is_empty() {
                self.from
            } else {
                options[rng.gen_range(0..options.len())]
            };
            if options.len() >= 2 {
                self.wait = self.red_wait(node, horizontal, now + dt - left);
            }
            self.from = node;
            self.to = next;
            self.progress = 0.0;
        }
    }
}

/// Bus on a rectangular loop with regularly spaced stops.
struct Bus {
    corners: [Point; 4],
    perimeter: f64,
    speed: f64,
    s: f64,
    stop_spacing: f64,
    dwell: f64,
    wait: f64,
}

impl Bus {
    fn new(grid: &StreetGrid, spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Self {
        let [lo, hi] = spec.bus_route_blocks;
        let side = |n: i64, rng: &mut ChaCha8Rng| -> (i64, i64) {
            let max = (hi as i64).min(n).max(1);
            let len = rng.gen_range((lo as i64).min(max)..=max);
            let start = rng.gen_range(0..=(n - len).max(0));
            (start, start + len)
        };
        let (x0, x1) = side(grid.nx, rng);
        let (y0, y1) = side(grid.ny, rng);
        let corners = [
            grid.point((x0, y0)),
            grid.point((x1, y0)),
            grid.point((x1, y1)),
            grid.point((x0, y1)),
        ];
        let perimeter = 2.0 * (corners[1].x - corners[0].x + corners[3].y - corners[0].y);
        Bus {
            corners,
            perimeter,
            speed: uniform(rng, spec.bus_speed_mps),
            s: rng.gen::<f64>() * perimeter,
            stop_spacing: spec.bus_stop_spacing_m,
            dwell: spec.bus_dwell_s,
            wait: 0.0,
        }
    }

    fn position(&self) -> Point {
        let mut s = self.s;
        for k in 0..4 {
            let (a, b) = (self.corners[k], self.corners[(k + 1) % 4]);
            let len = a.distance(b);
            if s <= len || k == 3 {
                let f = if len > 0.0 { (s / len).min(1.0) } else { 0.0 };
                return Point::new(a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f);
            }
            s -= len;
        }
        unreachable!()
    }

    fn advance(&mut self, dt: f64) {
        let mut left = dt;
        while left > 0.0 {
            if self.wait > 0.0 {
                let w = self.wait.min(left);
                self.wait -= w;
                left -= w;
                continue;
            }
            let next_stop = ((self.s / self.stop_spacing).floor() + 1.0) * self.stop_spacing;
            let target = next_stop.min(self.perimeter);
            let need = (target - self.s) / self.speed;
            if need > left {
                self.s += self.speed * left;
                break;
            }
            left -= need;
            self.s = target;
            if self.s >= self.perimeter {
                self.s = 0.0;
            }
            // Stop at every spacing mark and at the loop origin.
            self.wait = self.dwell;
        }
    }
}

/// Pedestrian walking between random sidewalk-lattice waypoints.
struct Pedestrian {
    xs: Vec<f64>,
    ys: Vec<f64>,
    speed_range: [f64; 2],
    speed: f64,
    pos: Point,
    /// Remaining legs, each axis-aligned along a sidewalk line.
    legs: Vec<Point>,
}

impl Pedestrian {
    fn new(area: &Area, spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Self {
        let lattice = |extent: f64| -> Vec<f64> {
            let n = (extent / spec.block_m + 1e-9).floor() as i64;
            let mut v = Vec::new();
            for k in 0..=n {
                for off in [-spec.sidewalk_offset_m, spec.sidewalk_offset_m] {
                    let c = k as f64 * spec.block_m + off;
                    if (0.0..=extent).contains(&c) {
                        v.push(c);
                    }
                }
            }
            v
        };
        let xs = lattice(area.width);
        let ys = lattice(area.height);
        let pos = Point::new(xs[rng.gen_range(0..xs.len())], ys[rng.gen_range(0..ys.len())]);
        let mut p = Pedestrian {
            xs,
            ys,
            speed_range: spec.pedestrian_speed_mps,
            speed: 0.0,
            pos,
            legs: Vec::new(),
        };
        p.plan(rng);
        p
    }

    fn plan(&mut self, rng: &mut ChaCha8Rng) {
        let dest = Point::new(
            self.xs[rng.gen_range(0..self.xs.len())],
            self.ys[rng.gen_range(0..self.ys.len())],
        );
        let corner = if rng.gen::<bool>() {
            Point::new(dest.x, self.pos.y)
        } else {
            Point::new(self.pos.x, dest.y)
        };
        self.legs = vec![dest, corner];
        self.speed = uniform(rng, self.speed_range);
    }

    fn advance(&mut self, dt: f64, rng: &mut ChaCha8Rng) {
        let mut budget = self.speed * dt;
        let mut replans = 0;
        while budget > 0.0 {
            let Some(&target) = self.legs.last() else {
                replans += 1;
                if replans > 8 {
                    break;
                }
                // The new speed applies from the next step on.
                self.plan(rng);
                continue;
            };
            let d = self.pos.distance(target);
            if d > budget {
                let f = budget / d;
                self.pos = Point::new(
                    self.pos.x + (target.x - self.pos.x) * f,
                    self.pos.y + (target.y - self.pos.y) * f,
                );
                break;
            }
            budget -= d;
            self.pos = target;
            self.legs.pop();
        }
    }
}

/// Generates a `steps`-long trace for `population` on a Manhattan grid.
pub fn generate_synthetic(
    population: &PopulationSpec,
    spec: &SyntheticSpec,
    area: &Area,
    steps: u32,
    resolution_s: f64,
    seed: u64,
) -> Result<MobilityTrace> {
    let mut problems = Vec::new();
    spec.validate(area, &mut problems);
    if !(resolution_s > 0.0) {
        problems.push("resolution must be positive".into());
    }
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    let users = population.users();
    let n = users.len();
    let steps = if n == 0 { 0 } else { steps };
    let grid = StreetGrid::new(area, spec.block_m);
    let mut positions = vec![Point::default(); n * steps as usize];
    let mut fill = |user_ids: std::ops::Range<usize>, step: usize, p: Point| {
        for u in user_ids {
            positions[step * n + u] = p;
        }
    };
    let bus_base = population.cars as usize;
    let ped_base = bus_base + (population.buses * population.passengers_per_bus) as usize;

    for car in 0..population.cars as usize {
        let mut r = rng::keyed(seed, rng::tag::MOBILITY, 0, car as u64);
        let mut c = Car::new(&grid, spec, &mut r);
        for step in 0..steps as usize {
            fill(car..car + 1, step, c.position());
            c.advance(step as f64 * resolution_s, resolution_s, &mut r);
        }
    }
    let ppb = population.passengers_per_bus as usize;
    for bus in 0..population.buses as usize {
        let mut r = rng::keyed(seed, rng::tag::MOBILITY, 1, bus as u64);
        let mut b = Bus::new(&grid, spec, &mut r);
        let first = bus_base + bus * ppb;
        for step in 0..steps as usize {
            fill(first..first + ppb, step, b.position());
            b.advance(resolution_s);
        }
    }
    for ped in 0..population.pedestrians as usize {
        let mut r = rng::keyed(seed, rng::tag::MOBILITY, 2, ped as u64);
        let mut p = Pedestrian::new(area, spec, &mut r);
        let u = ped_base + ped;
        for step in 0..steps as usize {
            fill(u..u + 1, step, p.pos);
            p.advance(resolution_s, &mut r);
        }
    }
    MobilityTrace::from_positions(n as u32, steps, resolution_s, positions)
}
