//! Location obfuscation under geo-indistinguishability.
//!
//! The network provider knows where a user really is; the MEC provider only
//! sees the location produced here. Privacy grows as epsilon shrinks, and
//! epsilon = infinity reports the true location unchanged.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::{Area, Point};
use crate::rng;

/// Privacy parameter in inverse meters; `Epsilon::NONE` is infinity.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Epsilon(f64);

impl Epsilon {
    pub const NONE: Epsilon = Epsilon(f64::INFINITY);

    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 {
            Ok(Epsilon(value))
        } else {
            Err(Error::config(format!("epsilon must be positive or inf, got {value}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_none(self) -> bool {
        self.0.is_infinite()
    }

    /// Stable label used in file names and CSV columns.
    pub fn label(self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_none() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for Epsilon {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "none" | "∞" => Ok(Epsilon::NONE),
            other => other
                .parse::<f64>()
                .map_err(|_| Error::config(format!("cannot parse epsilon {s:?}")))
                .and_then(Epsilon::new),
        }
    }
}

impl Serialize for Epsilon {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_none() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Epsilon {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let eps = match Raw::deserialize(d)? {
            Raw::Num(v) if v.is_infinite() && v > 0.0 => Ok(Epsilon::NONE),
            Raw::Num(v) => Epsilon::new(v),
            Raw::Text(s) => s.parse(),
        };
        eps.map_err(serde::de::Error::custom)
    }
}

/// The three named levels used in the reference experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrivacyLevel {
    None,
    Medium,
    High,
}

impl PrivacyLevel {
    pub const ALL: [PrivacyLevel; 3] = [PrivacyLevel::None, PrivacyLevel::Medium, PrivacyLevel::High];

    pub fn epsilon(self) -> Epsilon {
        match self {
            PrivacyLevel::None => Epsilon::NONE,
            PrivacyLevel::Medium => Epsilon(0.1),
            PrivacyLevel::High => Epsilon(0.01),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    /// Uniform angle, radius with density `eps^2 r exp(-eps r)`.
    #[default]
    PlanarLaplace,
    /// Uniform point on a disk of radius `radius_factor / eps`.
    UniformDisk,
}

/// Obfuscation settings shared by all privacy levels of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrivacySpec {
    pub mechanism: MechanismKind,
    /// Privacy levels of the experiment grid, in inverse meters.
    pub epsilon_per_meter: Vec<Epsilon>,
    /// Disk radius is `uniform_radius_factor / epsilon` for [`MechanismKind::UniformDisk`].
    pub uniform_radius_factor: f64,
}

impl Default for PrivacySpec {
    fn default() -> Self {
        PrivacySpec {
            mechanism: MechanismKind::PlanarLaplace,
            epsilon_per_meter: PrivacyLevel::ALL.iter().map(|l| l.epsilon()).collect(),
            uniform_radius_factor: 3.0,
        }
    }
}

impl PrivacySpec {
    pub(crate) fn validate(&self, problems: &mut Vec<String>) {
        if self.epsilon_per_meter.is_empty() {
            problems.push("privacy.epsilon_per_meter must list at least one level".into());
        }
        for (i, a) in self.epsilon_per_meter.iter().enumerate() {
            if self.epsilon_per_meter[..i].contains(a) {
                problems.push(format!("privacy.epsilon_per_meter lists {a} twice"));
            }
        }
        if !(self.uniform_radius_factor > 0.0 && self.uniform_radius_factor.is_finite()) {
            problems.push("privacy.uniform_radius_factor must be positive".into());
        }
    }

    pub fn mechanism(&self, epsilon: Epsilon) -> PrivacyMechanism {
        PrivacyMechanism {
            kind: self.mechanism,
            epsilon_per_meter: epsilon.value(),
            radius_factor: self.uniform_radius_factor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyMechanism {
    pub kind: MechanismKind,
    pub epsilon_per_meter: f64,
    pub radius_factor: f64,
}

impl PrivacyMechanism {
    pub fn new(kind: MechanismKind, epsilon_per_meter: f64) -> Result<Self> {
        if !(epsilon_per_meter > 0.0) {
            return Err(Error::config(format!(
                "epsilon must be positive or inf, got {epsilon_per_meter}"
            )));
        }
        Ok(PrivacyMechanism {
            kind,
            epsilon_per_meter,
            radius_factor: 3.0,
        })
    }

    pub fn is_identity(&self) -> bool {
        self.epsilon_per_meter.is_infinite()
    }

    /// Disk radius of the uniform variant.
    pub fn disk_radius(&self) -> f64 {
        self.radius_factor / self.epsilon_per_meter
    }

    /// Noise radius for one draw.
    pub fn sample_radius<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.is_identity() {
            return 0.0;
        }
        let u: f64 = rng.gen();
        match self.kind {
            MechanismKind::PlanarLaplace => planar_laplace_radius(self.epsilon_per_meter, u),
            MechanismKind::UniformDisk => self.disk_radius() * u.sqrt(),
        }
    }

    /// Unclipped obfuscated location.
    pub fn perturb<R: Rng + ?Sized>(&self, location: Point, rng: &mut R) -> Point {
        if self.is_identity() {
            return location;
        }
        let radius = self.sample_radius(rng);
        let theta = rng.gen::<f64>() * std::f64::consts::TAU;
        Point::new(location.x + radius * theta.cos(), location.y + radius * theta.sin())
    }

    /// Reported location of `user` at `timestep` for run seed `seed`, clipped
    /// to the area. The flag tells whether clipping moved the point.
    pub fn obfuscate(&self, location: Point, area: &Area, seed: u64, user: u32, timestep: u32) -> (Point, bool) {
        if self.is_identity() {
            return (location, false);
        }
        let mut rng = rng::keyed(
            seed,
            rng::tag::PRIVACY ^ ((self.kind as u64) << 56),
            ((user as u64) << 32) | timestep as u64,
            self.epsilon_per_meter.to_bits(),
        );
        area.clip(self.perturb(location, &mut rng))
    }
}

/// Inverse of the planar-Laplace radial CDF `1 - (1 + eps r) exp(-eps r)` at `p`.
pub fn planar_laplace_radius(epsilon: f64, p: f64) -> f64 {
    let w = lambert_w_minus1((p - 1.0) / std::f64::consts::E);
    (-(w + 1.0) / epsilon).max(0.0)
}

/// Lower branch `W_{-1}` of the Lambert W function on `[-1/e, 0)`.
pub fn lambert_w_minus1(x: f64) -> f64 {
    const INV_E: f64 = 1.0 / std::f64::consts::E;
    if x <= -INV_E {
        return -1.0;
    }
    if x >= 0.0 {
        return f64::NEG_INFINITY;
    }
    let mut w = if x < -0.25 {
        // Branch-point series in p = -sqrt(2 (1 + e x)).
        let p = -(2.0 * (1.0 + std::f64::consts::E * x)).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else {
        let l1 = (-x).ln();
        let l2 = (-l1).ln();
        l1 - l2 + l2 / l1
    };
    // Halley iteration on f(w) = w e^w - x.
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= 1e-15 * w.abs().max(1.0) {
            break;
        }
    }
    w.min(-1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DisplacementStats {
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
}

/// Displacement statistics of `n` unclipped draws of `mechanism`.
pub fn displacement_stats<R: Rng + ?Sized>(
    mechanism: &PrivacyMechanism,
    n: usize,
    rng: &mut R,
) -> Result<DisplacementStats> {
    if n == 0 {
        return Err(Error::config("displacement_stats needs at least one sample"));
    }
    let origin = Point::new(0.0, 0.0);
    let mut d: Vec<f64> = (0..n)
        .map(|_| mechanism.perturb(origin, rng).distance(origin))
        .collect();
    d.sort_by(f64::total_cmp);
    let mean = d.iter().sum::<f64>() / n as f64;
    Ok(DisplacementStats {
        mean,
        p50: quantile_sorted(&d, 0.5),
        p95: quantile_sorted(&d, 0.95),
    })
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}
