//! Distributional checks of the samplers against closed-form oracles.

use edgepriv::geometry::{Area, Point};
use edgepriv::privacy::{planar_laplace_radius, MechanismKind, PrivacyMechanism};
use edgepriv::rng;
use edgepriv::topology::{sample_hppp, sample_hppp_fixed_count};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Asymptotic Kolmogorov critical value at significance 0.01.
const KS_01: f64 = 1.6276;

fn ks_statistic(mut samples: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn chi_square(counts: &[u64], expected: f64) -> f64 {
    counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum()
}

fn chi_critical(bins: usize) -> f64 {
    ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(0.99)
}

fn displacements(kind: MechanismKind, eps: f64, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let m = PrivacyMechanism::new(kind, eps).unwrap();
    let mut r = rng::keyed(seed, rng::tag::DIAGNOSTIC, 7, eps.to_bits());
    let origin = Point::new(0.0, 0.0);
    (0..n)
        .map(|_| {
            let p = m.perturb(origin, &mut r);
            (p.distance(origin), p.y.atan2(p.x))
        })
        .unzip()
}

fn laplace_cdf(eps: f64) -> impl Fn(f64) -> f64 {
    move |r| 1.0 - (1.0 + eps * r) * (-eps * r).exp()
}

#[test]
fn laplace_radii_follow_the_gamma_cdf() {
    for eps in [0.1, 0.01] {
        let (r, _) = displacements(MechanismKind::PlanarLaplace, eps, 10_000, 11);
        let d = ks_statistic(r, laplace_cdf(eps));
        assert!(d < KS_01 / 100.0, "eps {eps}: D = {d}");
    }
}

#[test]
fn laplace_mean_displacement_is_two_over_epsilon() {
    for eps in [0.1, 0.01] {
        let (r, _) = displacements(MechanismKind::PlanarLaplace, eps, 10_000, 12);
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        assert!((mean * eps / 2.0 - 1.0).abs() < 0.02, "eps {eps}: mean {mean}");
    }
}

#[test]
fn angles_are_uniform() {
    for kind in [MechanismKind::PlanarLaplace, MechanismKind::UniformDisk] {
        let (_, theta) = displacements(kind, 0.05, 36_000, 13);
        let mut counts = [0u64; 36];
        for t in theta {
            let b = ((t + std::f64::consts::PI) / std::f64::consts::TAU * 36.0) as usize;
            counts[b.min(35)] += 1;
        }
        assert!(chi_square(&counts, 1000.0) < chi_critical(36));
    }
}

#[test]
fn uniform_disk_radii_follow_area_law() {
    let eps = 0.01;
    let radius = 3.0 / eps;
    let (r, _) = displacements(MechanismKind::UniformDisk, eps, 10_000, 14);
    assert!(r.iter().all(|&x| x <= radius));
    let d = ks_statistic(r, |x| (x / radius).powi(2).min(1.0));
    assert!(d < KS_01 / 100.0, "D = {d}");
}

#[test]
fn inverse_cdf_matches_bisection() {
    for eps in [0.5, 0.1, 0.01] {
        let cdf = laplace_cdf(eps);
        for k in 1..200 {
            let p = k as f64 / 200.0;
            let (mut lo, mut hi) = (0.0, 100.0 / eps);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if cdf(mid) < p {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let r = planar_laplace_radius(eps, p);
            assert!((r - lo).abs() <= 1e-9 * (1.0 + lo), "eps {eps} p {p}: {r} vs {lo}");
        }
    }
}

/// Smaller epsilon displaces further: Mann-Whitney U on two samples.
#[test]
fn stronger_privacy_dominates_displacement() {
    let (strong, _) = displacements(MechanismKind::PlanarLaplace, 0.01, 2_000, 15);
    let (weak, _) = displacements(MechanismKind::PlanarLaplace, 0.1, 2_000, 16);
    let mut all: Vec<(f64, bool)> = strong
        .iter()
        .map(|&x| (x, true))
        .chain(weak.iter().map(|&x| (x, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let rank_sum: f64 = all
        .iter()
        .enumerate()
        .filter(|(_, (_, s))| *s)
        .map(|(i, _)| (i + 1) as f64)
        .sum();
    let (n1, n2) = (strong.len() as f64, weak.len() as f64);
    let u = rank_sum - n1 * (n1 + 1.0) / 2.0;
    let z = (u - n1 * n2 / 2.0) / (n1 * n2 * (n1 + n2 + 1.0) / 12.0).sqrt();
    assert!(z > 2.326, "z = {z}");
}

#[test]
fn hppp_count_has_poisson_mean() {
    let area = Area::default();
    let lambda = 23.75;
    let expected = lambda * area.km2();
    let draws = 400;
    let total: usize = (0..draws)
        .map(|i| sample_hppp(lambda, &area, &mut rng::keyed(i, rng::tag::MEC_HOSTS, 0, 0)).len())
        .sum();
    let mean = total as f64 / draws as f64;
    let se = (expected / draws as f64).sqrt();
    assert!((mean - expected).abs() < 3.0 * se, "mean {mean}, expected {expected}");
}

#[test]
fn hppp_points_are_uniform() {
    let area = Area::new(2000.0, 1000.0).unwrap();
    let mut counts = [0u64; 50];
    for i in 0..20 {
        for p in sample_hppp_fixed_count(500, &area, &mut rng::keyed(i, rng::tag::BASE_STATIONS, 0, 0)) {
            assert!(area.contains(p));
            let (bx, by) = ((p.x / 200.0) as usize, (p.y / 200.0) as usize);
            counts[by.min(4) * 10 + bx.min(9)] += 1;
        }
    }
    assert!(chi_square(&counts, 200.0) < chi_critical(50));
}
