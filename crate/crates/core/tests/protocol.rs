use cvbell::bell::{rotated_marginal, sign_correlation};
use cvbell::mc::{acquisition_time, chi_square_gof, run_protocol, sample_joint_quadratures, ProtocolConfig};
use cvbell::{chsh, Error, ExperimentParams};
use std::f64::consts::FRAC_PI_4;

fn realistic() -> ExperimentParams {
    ExperimentParams::new(0.6, 0.95, 0.3, 0.95).unwrap()
}

#[test]
fn sampled_sign_correlation_matches_closed_form() {
    let params = ExperimentParams::new(0.5, 0.95, 0.3, 1.0).unwrap();
    let m = rotated_marginal(&params.conditional_state().unwrap(), 0.0, -FRAC_PI_4).unwrap();
    let n = 1_000_000;
    let samples = sample_joint_quadratures(&m, n, 21).unwrap();
    let e_hat = samples.iter().map(|&(x, y)| if x * y >= 0.0 { 1.0 } else { -1.0 }).sum::<f64>() / n as f64;
    let e = sign_correlation(&m);
    let stderr = ((1.0 - e * e) / n as f64).sqrt();
    assert!((e_hat - e).abs() < 3.0 * stderr, "{e_hat} vs {e} ({stderr})");
}

#[test]
fn sampled_marginals_pass_goodness_of_fit() {
    let state = realistic().conditional_state().unwrap();
    for (k, (theta, phi)) in [(0.0, -FRAC_PI_4), (std::f64::consts::FRAC_PI_2, FRAC_PI_4)].into_iter().enumerate() {
        let m = rotated_marginal(&state, theta, phi).unwrap();
        let samples = sample_joint_quadratures(&m, 200_000, 100 + k as u64).unwrap();
        let fit = chi_square_gof(&samples, &m, 30).unwrap();
        assert!(fit.p_value > 1e-3, "{fit:?}");
    }
}

#[test]
fn realistic_run_resolves_the_violation() {
    let expected = chsh(&realistic()).unwrap();
    let result = run_protocol(&ProtocolConfig::new(realistic(), 1_000_000, 2024)).unwrap();
    let (s, err) = (result.s_hat.unwrap(), result.stderr_s.unwrap());
    assert!((s - expected.s).abs() < 3.0 * err, "{s} vs {} ({err})", expected.s);
    assert!(s - 2.0 > 2.0 * err, "{s} +- {err}");
    let rate = result.events_per_second();
    let nominal = expected.success_prob * 1e6;
    assert!(rate > nominal / 2.0 && rate < nominal * 2.0, "{rate} events/s");
    // relative error of a geometric-gap rate estimate is 1 / sqrt(events)
    let p_err = expected.success_prob / (result.events as f64).sqrt();
    assert!((result.p_hat - expected.success_prob).abs() < 4.0 * p_err);
}

#[test]
fn estimator_converges_with_event_count() {
    let expected = chsh(&realistic()).unwrap().s;
    let mut errors = Vec::new();
    for n in [10_000, 40_000, 100_000, 1_000_000] {
        let r = run_protocol(&ProtocolConfig::new(realistic(), n, 7)).unwrap();
        let (s, err) = (r.s_hat.unwrap(), r.stderr_s.unwrap());
        assert!((s - expected).abs() < 3.0 * err, "n={n}: {s} vs {expected} ({err})");
        errors.push(err);
    }
    // stderr(4n) = stderr(n) / 2
    assert!((errors[0] / errors[1] - 2.0).abs() < 0.4, "{errors:?}");
}

#[test]
fn result_is_reproducible_and_shard_independent() {
    let mut config = ProtocolConfig::new(realistic(), 50_000, 99);
    config.shards = 1;
    let one = run_protocol(&config).unwrap();
    config.shards = 7;
    let seven = run_protocol(&config).unwrap();
    assert_eq!(one, seven);
    assert_eq!(one, run_protocol(&config).unwrap());
    config.seed = 100;
    assert_ne!(one, run_protocol(&config).unwrap());
}

#[test]
fn degenerate_setting_choice_leaves_s_unavailable() {
    let mut config = ProtocolConfig::new(realistic(), 5_000, 3);
    config.angle_choice_probs = [1.0, 0.0];
    let r = run_protocol(&config).unwrap();
    let e = r.correlators();
    assert!(e[0][0].is_some() && e[0][1].is_none() && e[1][0].is_none() && e[1][1].is_none());
    assert!(r.s_hat.is_none() && r.stderr_s.is_none());
    assert_eq!(r.correlator_counts[0][0].events, 5_000);
}

#[test]
fn vacuum_source_is_rejected() {
    let params = ExperimentParams::new(0.0, 0.95, 0.3, 0.95).unwrap();
    assert!(matches!(
        run_protocol(&ProtocolConfig::new(params, 10, 1)),
        Err(Error::InvalidRegime(_))
    ));
}

#[test]
fn percent_violation_within_an_hour() {
    let bell = chsh(&realistic()).unwrap();
    let t = acquisition_time(bell.success_prob, 1e6, 0.005, &bell, [0.5, 0.5]).unwrap();
    assert!(t < 3600.0, "{t} s");
}
