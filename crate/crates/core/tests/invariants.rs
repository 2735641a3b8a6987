mod common;

use proptest::prelude::*;
use warnsim_core::routing::{dsw_update, MetricVector, MetricWeights, METRIC_COUNT};

use common::*;

fn protocol() -> impl Strategy<Value = warnsim_core::scenario::Protocol> {
    proptest::sample::select(PROTOCOLS.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn same_seed_same_reports(p in protocol(), seed in 0u64..1000) {
        prop_assert_eq!(check_determinism(p, seed), Ok(()));
    }

    #[test]
    fn run_log_invariants(p in protocol(), seed in 0u64..1000) {
        let out = run_logged(p, seed);
        let floor = small_config(p).routing.w_floor;
        prop_assert_eq!(check_run(p, &out, floor), Ok(()));
    }
}

proptest! {
    #[test]
    fn weights_stay_normalized_over_update_chains(
        rounds in proptest::collection::vec(
            proptest::collection::vec(proptest::array::uniform5(0.0..1.0f64), 0..12),
            1..20,
        ),
        lambda in 0.0..=1.0f64,
        floor in 0.0..=0.2f64,
    ) {
        let mut w = MetricWeights::equal();
        for snaps in rounds {
            let snaps: Vec<MetricVector> = snaps.into_iter().map(MetricVector::from_array).collect();
            w = dsw_update(&snaps, &w, lambda, floor);
            prop_assert_eq!(check_weight_vector(&w, floor), Ok(()));
        }
        prop_assert_eq!(w.to_array().len(), METRIC_COUNT);
    }
}

#[test]
fn dsw_runs_record_weight_updates() {
    let out = run_logged(warnsim_core::scenario::Protocol::MrpDsw, 3);
    let log = out.log.unwrap();
    assert!(!log.weights.is_empty());
}

#[test]
fn logged_runs_contain_relays() {
    for p in PROTOCOLS {
        let log = run_logged(p, 5).log.unwrap();
        let relays = log.tx.iter().filter(|t| t.sender != t.origin).count();
        assert!(relays > 0, "{p:?}: no relayed transmissions");
        assert!(log.rx.iter().any(|r| !r.duplicate), "{p:?}: nothing received");
    }
}
