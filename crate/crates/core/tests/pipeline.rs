use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sic_core::canceller::{cancel, cancellation_db, CancellerState, EstimatorMode};
use sic_core::channel::{apply_channel, mix, receive_mixture, scenario};
use sic_core::dnn::TrainConfig;
use sic_core::harness::{ExperimentConfig, ProbeData};
use sic_core::modem::PskScheme;
use sic_core::pulse::PulseConfig;
use sic_core::ComplexSample;

fn trained_validation(window: usize) -> CancellerState {
    let sc = scenario("validation").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let probe = ProbeData::collect(&sc, PskScheme::Qpsk, PulseConfig::default(), window, 600, &mut rng).unwrap();
    let mut state = probe.with_window(window).unwrap();
    let cfg = TrainConfig {
        seed: 4,
        ..TrainConfig::default()
    };
    state.train(&probe.x, &probe.y, EstimatorMode::JointIq, &cfg).unwrap();
    state
}

#[test]
fn validation_remote_stream_recovered() {
    let state = trained_validation(16);
    let sc = scenario("validation").unwrap();
    let tx: Vec<u8> = (1..=20).collect();
    let remote: Vec<u8> = (101..=120).collect();
    let rx = receive_mixture(
        &state.transmit_frame(&tx),
        &state.transmit_frame(&remote),
        &sc,
        &mut ChaCha8Rng::seed_from_u64(0),
    )
    .unwrap();
    assert_eq!(state.run_pipeline(&tx, &rx).unwrap(), remote);
}

#[test]
fn validation_byte_error_rate_below_one_percent() {
    let state = trained_validation(16);
    let sc = scenario("validation").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let tx: Vec<u8> = (0..1000).map(|_| rng.random()).collect();
    let remote: Vec<u8> = (0..1000).map(|_| rng.random()).collect();
    let rx = receive_mixture(&state.transmit_frame(&tx), &state.transmit_frame(&remote), &sc, &mut rng).unwrap();
    let got = state.run_pipeline(&tx, &rx).unwrap();
    let wrong = got.iter().zip(&remote).filter(|(a, b)| a != b).count();
    assert!(wrong < 10, "{wrong} byte errors");
}

#[test]
fn trained_estimate_tracks_true_si() {
    let state = trained_validation(16);
    let sc = scenario("validation").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let data: Vec<u8> = (0..300).map(|_| rng.random()).collect();
    let x = state.transmit_frame(&data);
    let mut y = apply_channel(&x, &sc, &mut rng).unwrap();
    y.truncate(x.len());
    let y_hat = state.estimate_stream(&x).unwrap();
    let residual = cancel(&y, &y_hat).unwrap();
    let db = cancellation_db(&y, &residual).unwrap();
    assert!(db >= 15.0, "{db} dB");
}

#[test]
fn linear_channel_network_reaches_fifteen_db_next_to_exact_oracle() {
    let cfg = ExperimentConfig {
        probe_bytes: 600,
        ..ExperimentConfig::default()
    };
    let r = sic_core::harness::eval_cancellation(&cfg, 16).unwrap();
    let dnn = r.value("validation", "qpsk", Some(16), "joint-iq.cancellation_db").unwrap();
    let ls = r.value("validation", "qpsk", Some(16), "ls.cancellation_db").unwrap();
    assert!(dnn >= 15.0, "network {dnn} dB");
    assert!(ls >= 60.0, "oracle {ls} dB");
}

#[test]
fn per_component_mode_trains_and_cancels_real_taps() {
    let sc = scenario("validation").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let probe = ProbeData::collect(&sc, PskScheme::Qpsk, PulseConfig::default(), 8, 400, &mut rng).unwrap();
    let mut state = probe.with_window(8).unwrap();
    let (outcome, eval) = probe
        .fit(&mut state, EstimatorMode::PerComponent, &TrainConfig::default())
        .unwrap();
    assert_eq!(outcome.i_history.len(), 30);
    // Real taps keep I and Q separate, so the split networks suffice here.
    assert!(eval.cancellation_db > 15.0, "{} dB", eval.cancellation_db);
}

fn complex_vec(len: usize) -> impl Strategy<Value = Vec<ComplexSample>> {
    prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64).prop_map(|(a, b)| ComplexSample::new(a, b)), len)
}

proptest! {
    #[test]
    fn cancel_inverts_mix((si, u) in (1usize..64).prop_flat_map(|n| (complex_vec(n), complex_vec(n)))) {
        let m = cancel(&mix(&si, &u).unwrap(), &si).unwrap();
        for (a, b) in m.iter().zip(&u) {
            prop_assert!((a - b).norm() <= 1e-12);
        }
    }
}

#[test]
fn window_covering_channel_beats_two_samples_tenfold() {
    // Three symbol-spaced taps at sps 4.
    let mut sc = scenario("validation").unwrap();
    sc.si_taps = vec![ComplexSample::default(); 9];
    sc.si_taps[0] = ComplexSample::new(1.0, 0.0);
    sc.si_taps[4] = ComplexSample::new(0.0, 0.6);
    sc.si_taps[8] = ComplexSample::new(-0.4, 0.0);
    let cfg = ExperimentConfig {
        scenario: sc,
        probe_bytes: 600,
        ..ExperimentConfig::default()
    };
    let r = sic_core::harness::sweep_k(&cfg, &[2, 12]).unwrap();
    let short = r.value("validation", "qpsk", Some(2), "final_loss").unwrap();
    let long = r.value("validation", "qpsk", Some(12), "final_loss").unwrap();
    assert!(long * 10.0 < short, "K=12 {long}, K=2 {short}");
}
