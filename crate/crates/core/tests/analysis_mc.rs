use mcdmac::analysis::{monte_carlo_probabilities, rate_probabilities, AnalysisScenario};
use mcdmac::exec::Execution;
use mcdmac::propagation::{ChannelPlan, PropagationParams, RadiusScaling, RateTable};
use mcdmac::protocol::MacTimings;

fn scenario(powers: Vec<f64>, interference: Vec<f64>, area: f64) -> AnalysisScenario {
    let params = PropagationParams::default();
    AnalysisScenario {
        powers,
        interference,
        table: RateTable::default_for(0.1, &params).unwrap(),
        plan: ChannelPlan::default_six(),
        params,
        p_max: 0.1,
        area_radius: area,
        timings: MacTimings::default(),
        radius_scaling: RadiusScaling::Inverse,
    }
}

#[test]
fn sampled_rates_agree_with_closed_form() {
    let cases = [
        scenario(vec![0.1], vec![0.0], 250.0),
        scenario(vec![0.03, 0.05], vec![2e-10, 0.0], 250.0),
        scenario(
            vec![0.02, 0.02, 0.02, 0.02],
            vec![0.0, 1e-10, 5e-10, 1e-9],
            180.0,
        ),
    ];
    let n = 400_000;
    for (i, s) in cases.iter().enumerate() {
        for m in 0..s.n_channels() {
            let exact = rate_probabilities(m, s);
            let mc =
                monte_carlo_probabilities(m, s, n, 10 + i as u64, Execution::Parallel).unwrap();
            for (q, (p, e)) in exact.iter().zip(&mc).enumerate() {
                let sigma = (p * (1.0 - p) / n as f64).sqrt().max(1.0 / n as f64);
                assert!(
                    (p - e).abs() <= 3.0 * sigma,
                    "case {i} channel {m} outcome {q}: {p} vs {e}"
                );
            }
        }
    }
}

#[test]
fn monte_carlo_is_identical_on_both_paths() {
    let s = scenario(vec![0.05], vec![1e-10], 250.0);
    let a = monte_carlo_probabilities(0, &s, 200_000, 4, Execution::Sequential).unwrap();
    let b = monte_carlo_probabilities(0, &s, 200_000, 4, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}
