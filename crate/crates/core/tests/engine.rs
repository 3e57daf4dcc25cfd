use std::collections::BTreeMap;

use edgepriv::engine::{prepare_seed, run_paired, run_single, DenialReasons, RequestOutcome};
use edgepriv::geometry::Area;
use edgepriv::mobility::PopulationSpec;
use edgepriv::privacy::Epsilon;
use edgepriv::ExperimentConfig;

fn small_config() -> ExperimentConfig {
    let mut c = ExperimentConfig {
        seeds: vec![1, 2],
        duration_s: 120.0,
        area: Area::new(1000.0, 1000.0).unwrap(),
        population: PopulationSpec {
            cars: 40,
            buses: 3,
            passengers_per_bus: 10,
            pedestrians: 40,
        },
        ..Default::default()
    };
    c.topology.bs_count = 119;
    c.topology.mh_count = 24;
    c
}

fn collect(config: &ExperimentConfig, seed: u64) -> Vec<Vec<Vec<RequestOutcome>>> {
    let ctx = prepare_seed(config, seed).unwrap();
    let eps = config.privacy.epsilon_per_meter.clone();
    let mut steps = Vec::new();
    run_paired(&ctx, config, &eps, |_, outs| {
        steps.push(outs.to_vec());
        Ok(())
    })
    .unwrap();
    steps
}

#[test]
fn levels_are_paired_request_by_request() {
    let c = small_config();
    for (t, levels) in collect(&c, 1).iter().enumerate() {
        let base = &levels[0];
        assert_eq!(base.len(), c.population.user_count() as usize);
        for level in levels {
            for (a, b) in base.iter().zip(level) {
                assert_eq!(a.request.timestep as usize, t);
                assert_eq!(
                    (a.request.user, a.mobility, a.application),
                    (b.request.user, b.mobility, b.application)
                );
                assert_eq!(a.request.true_location, b.request.true_location);
                assert_eq!(a.request.true_bs, b.request.true_bs);
                assert_eq!(a.request.ideal_mh, b.request.ideal_mh);
            }
        }
    }
}

#[test]
fn paired_and_single_runs_agree() {
    let c = small_config();
    let ctx = prepare_seed(&c, 2).unwrap();
    let paired = collect(&c, 2);
    for (li, &eps) in c.privacy.epsilon_per_meter.iter().enumerate() {
        let mut t = 0;
        run_single(&ctx, &c, eps, |outs| {
            assert_eq!(outs, paired[t][li].as_slice());
            t += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(t, paired.len());
    }
}

#[test]
fn no_privacy_always_selects_the_ideal_host() {
    let mut c = small_config();
    c.privacy.epsilon_per_meter = vec![Epsilon::NONE];
    for levels in collect(&c, 1) {
        for o in &levels[0] {
            assert_eq!(o.request.selected_mh, o.request.ideal_mh);
            assert_eq!(o.request.presumed_bs, o.request.true_bs);
            assert_eq!(o.request.reported_location, o.request.true_location);
            assert_eq!(o.achieved_latency_ms, o.ideal_latency_ms);
        }
    }
}

#[test]
fn recorded_reasons_match_the_recorded_quantities() {
    let c = small_config();
    let apps = &c.applications;
    for levels in collect(&c, 1) {
        for level in &levels {
            for o in level {
                let req = apps.requirement(o.application);
                assert_eq!(
                    o.reasons.contains(DenialReasons::LATENCY),
                    o.achieved_latency_ms > req.latency_ms
                );
                assert_eq!(
                    o.reasons.contains(DenialReasons::THROUGHPUT),
                    o.allocated_bps < req.throughput_bps
                );
                assert_eq!(o.accepted, o.reasons.is_empty());
            }
        }
    }
}

#[test]
fn throughput_denials_do_not_depend_on_privacy() {
    let c = small_config();
    for seed in c.seeds.clone() {
        let mut sets: Vec<Vec<(u32, u32)>> = vec![Vec::new(); c.privacy.epsilon_per_meter.len()];
        for levels in collect(&c, seed) {
            for (li, level) in levels.iter().enumerate() {
                sets[li].extend(
                    level
                        .iter()
                        .filter(|o| o.reasons.contains(DenialReasons::THROUGHPUT))
                        .map(|o| (o.request.user, o.request.timestep)),
                );
            }
        }
        assert!(!sets[0].is_empty(), "seed {seed} has no throughput denials to compare");
        for s in &sets[1..] {
            assert_eq!(s, &sets[0]);
        }
    }
}

#[test]
fn shares_and_charges_respect_capacities() {
    let mut c = small_config();
    c.topology.bs_count = 30;
    c.topology.bs_capacity_bps = 600e6;
    c.topology.mh_count = 3;
    c.topology.mh_capacity_bps = 250e6;
    let ctx = prepare_seed(&c, 1).unwrap();
    let topo = ctx.topology.clone();
    let mut capacity_denials = 0;
    for levels in collect(&c, 1) {
        for level in &levels {
            let mut per_bs: BTreeMap<u32, f64> = BTreeMap::new();
            let mut per_mh: BTreeMap<u32, f64> = BTreeMap::new();
            for o in level {
                *per_bs.entry(o.request.true_bs).or_default() += o.allocated_bps;
                if o.accepted {
                    *per_mh.entry(o.request.selected_mh).or_default() +=
                        c.applications.requirement(o.application).throughput_bps;
                }
                capacity_denials += o.reasons.contains(DenialReasons::CAPACITY) as usize;
            }
            for (bs, used) in per_bs {
                assert!(used <= topo.base_stations()[bs as usize].capacity_bps * (1.0 + 1e-12));
            }
            for (mh, used) in per_mh {
                assert!(used <= topo.mec_hosts()[mh as usize].capacity_bps * (1.0 + 1e-12));
            }
        }
    }
    assert!(capacity_denials > 0);
}

#[test]
fn iterating_after_denials_never_lowers_shares() {
    let mut c = small_config();
    c.topology.bs_count = 10;
    c.topology.bs_capacity_bps = 800e6;
    let once = collect(&c, 1);
    c.pf.iterate_after_denial = true;
    let iterated = collect(&c, 1);
    let mut raised = 0;
    for (a, b) in once.iter().zip(&iterated) {
        for (la, lb) in a.iter().zip(b) {
            for (x, y) in la.iter().zip(lb) {
                let keeps = !y.reasons.contains(DenialReasons::LATENCY) && !y.reasons.contains(DenialReasons::CAPACITY);
                if keeps {
                    assert!(y.allocated_bps >= x.allocated_bps - 1e-6);
                    raised += (y.allocated_bps > x.allocated_bps + 1e-6) as usize;
                }
            }
        }
    }
    assert!(raised > 0);
}

#[test]
fn default_latency_usually_meets_the_video_bound_without_privacy() {
    let mut c = ExperimentConfig::desk_scale();
    c.duration_s = 120.0;
    c.privacy.epsilon_per_meter = vec![Epsilon::NONE];
    let bound = c.applications.video.latency_ms;
    let mut latencies = Vec::new();
    for seed in c.seeds.clone() {
        for levels in collect(&c, seed) {
            latencies.extend(
                levels[0]
                    .iter()
                    .filter(|o| o.application == edgepriv::engine::Application::Video)
                    .map(|o| o.ideal_latency_ms),
            );
        }
    }
    latencies.sort_by(f64::total_cmp);
    let median = latencies[latencies.len() / 2];
    assert!(median < bound, "median {median} ms");
}
