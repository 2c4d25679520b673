use proptest::prelude::*;

use sparseloc::harness::{paperlike13, resolve_network, NetworkSource};
use sparseloc::measurement::{inject_faults, measure};
use sparseloc::oracle::brute_force_l0_recover;
use sparseloc::recoverability::{
    l0_recovery_limit, max_colinear_count_default, nsp_check_3d_distance, sigma_qs, NspSearch, NspVerdict,
};
use sparseloc::rigidity::rigidity_matrix;
use sparseloc::solver::{scp_recover, ScpParams};
use sparseloc::{BlockVector, FaultOptions, MeasurementKind};

fn planar(n: usize, seed: u64) -> sparseloc::harness::Network {
    let source = NetworkSource::Generated { n, dim: 2, radius: 100.0, box_side: 10.0, seed };
    resolve_network(&source, MeasurementKind::Distance, None).unwrap()
}

fn long_run() -> ScpParams {
    ScpParams { max_iterations: 20, initial_slack: 1.0, ..ScpParams::default() }
}

#[test]
fn scp_matches_oracle_on_six_agents() {
    for seed in 0..5 {
        let net = planar(6, seed);
        let cfg = &net.configuration;
        let state = inject_faults(cfg, &[seed as usize % 6], FaultOptions::default(), seed).unwrap();
        let r = rigidity_matrix(MeasurementKind::Distance, cfg, &net.graph).unwrap().matrix;
        let oracle = brute_force_l0_recover(&r, &(&r * state.true_error.to_dvector()), 2, 1).unwrap();
        assert!(oracle.unique);

        let y = measure(MeasurementKind::Distance, cfg, &net.graph).unwrap();
        let result = scp_recover(&state.estimates, &y, &net.graph, &long_run()).unwrap();
        assert_eq!(result.support, oracle.value.support, "seed {seed}");
        assert!((&result.x_star - &state.true_error).norm2() < 1e-4, "seed {seed}");
    }
}

#[test]
fn two_faults_on_seven_agents() {
    let net = planar(7, 42);
    let cfg = &net.configuration;
    assert!(l0_recovery_limit(7, MeasurementKind::Distance, 2, max_colinear_count_default(cfg)) >= 2);
    let state = inject_faults(cfg, &[1, 4], FaultOptions::default(), 3).unwrap();
    let y = measure(MeasurementKind::Distance, cfg, &net.graph).unwrap();
    let params = ScpParams { initial_slack: 2.0, ..long_run() };
    let result = scp_recover(&state.estimates, &y, &net.graph, &params).unwrap();
    assert_eq!(result.support, vec![1, 4]);
    assert!(result.converged);
}

#[test]
fn thirteen_agents_cannot_certify_six_errors() {
    let net = paperlike13(1).unwrap();
    let cfg = &net.configuration;
    assert_eq!(l0_recovery_limit(13, MeasurementKind::Distance, 3, max_colinear_count_default(cfg)), 5);
    let cert = nsp_check_3d_distance(cfg, 6, 1.0, NspSearch::coarse()).unwrap();
    assert_eq!(cert.holds, NspVerdict::Violated, "margin {}", cert.margin);
}

fn block_vector() -> impl Strategy<Value = (BlockVector, usize)> {
    (2usize..=3, 1usize..12).prop_flat_map(|(d, n)| {
        (prop::collection::vec(-5.0f64..5.0, d * n), 0..=n)
            .prop_map(move |(data, s)| (BlockVector::new(d, data).unwrap(), s))
    })
}

proptest! {
    #[test]
    fn sigma_is_bounded_by_the_full_norm((x, s) in block_vector()) {
        let sigma = sigma_qs(&x, s, 1.0);
        prop_assert!(sigma >= 0.0);
        prop_assert!(sigma <= x.block_norm(1.0) + 1e-12);
        if s < x.num_blocks() {
            prop_assert!(sigma_qs(&x, s + 1, 1.0) <= sigma + 1e-12);
        } else {
            prop_assert_eq!(sigma, 0.0);
        }
    }
}
