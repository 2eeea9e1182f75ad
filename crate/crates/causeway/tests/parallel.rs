//! The rayon-backed analyses must equal the sequential core functions.

use causeway::analysis::{run_problem, sample_parallel, test_implications_parallel};
use causeway_core::citest::{test_implications, CiConfig};
use causeway_core::estimate::{adjusted_problem, estimate_effect, EstimateConfig};
use causeway_core::graph::AdjustmentSet;
use causeway_core::synth::scenarios;

#[test]
fn parallel_sampling_equals_sequential() {
    for name in scenarios::NAMES {
        let m = scenarios::by_name(name).unwrap();
        for seed in [0, 1, 99] {
            assert_eq!(
                sample_parallel(&m, 777, seed).unwrap(),
                m.sample(777, seed).unwrap(),
                "{name}/{seed}"
            );
        }
    }
}

#[test]
fn parallel_implications_equal_sequential() {
    let m = scenarios::reference_study();
    let t = m.sample(3000, 4).unwrap();
    let pilot = causeway::assets::pilot_graph();
    for g in [m.graph(), &pilot] {
        let cfg = CiConfig::default();
        assert_eq!(
            test_implications_parallel(g, &t, &cfg).unwrap(),
            test_implications(g, &t, &cfg).unwrap()
        );
    }
}

#[test]
fn parallel_bootstrap_equals_sequential() {
    let m = scenarios::reference_study();
    let t = m.sample(2000, 5).unwrap();
    let config = EstimateConfig {
        outcome_level: Some("ExitA".into()),
        replicates: 150,
        seed: 21,
        ..EstimateConfig::default()
    };
    let adj = AdjustmentSet::new(["SocialImpact", "Urgency"]);
    let (problem, cert) = adjusted_problem(m.graph(), &t, "Traffic", "RouteChoice", &adj, &config).unwrap();
    let parallel = run_problem(&problem, cert).unwrap();
    let sequential = estimate_effect(m.graph(), &t, "Traffic", "RouteChoice", &adj, &config).unwrap();
    assert_eq!(parallel, sequential);
}
