//! Single-link simulator checked against the closed-form sojourn times.

use eee_bundle::link_sim::{simulate_link_events, SimWindow};
use eee_bundle::model::{link_energy, toff};
use eee_bundle::traffic::{gen_poisson, poisson_arrivals};
use eee_bundle::{Distribution, GovernorSpec, LinkParams, TrafficSpec};

const PKT: u32 = 1000;

fn link() -> LinkParams<f64> {
    LinkParams::ten_gbase_t()
}

fn spec(rho: f64) -> TrafficSpec<f64> {
    TrafficSpec::new(link().service_rate(PKT as f64), rho, Distribution::PoissonExact).unwrap()
}

/// Long enough for `cycles` sleep cycles on average.
fn horizon_for(rho: f64, gov: &GovernorSpec<f64>, cycles: f64) -> f64 {
    let p = link();
    let t_off = toff(&spec(rho), gov, &p).unwrap();
    let cycle = (t_off + p.ts + p.tw) / (1.0 - rho);
    cycles * cycle
}

#[test]
fn frame_idle_period_matches_model() {
    let gov = GovernorSpec::Frame;
    for (k, rho) in [0.1, 0.3, 0.5, 0.7].into_iter().enumerate() {
        let duration = horizon_for(rho, &gov, 1.3e5);
        let rate = rho * link().capacity_bps;
        let events = poisson_arrivals(rate, PKT, duration, 11 + k as u64).unwrap();
        let out = simulate_link_events(events, &link(), &gov, SimWindow::full(duration).unwrap()).unwrap();
        assert!(out.energy.sleep_cycles >= 100_000, "{} cycles at {rho}", out.energy.sleep_cycles);
        let measured = out.energy.mean_idle_period();
        let expected = toff(&spec(rho), &gov, &link()).unwrap();
        let rel = (measured - expected).abs() / expected;
        assert!(rel < 0.05, "rho {rho}: measured {measured:e}, model {expected:e}");
    }
}

#[test]
fn frame_energy_matches_model_at_half_load() {
    let gov = GovernorSpec::Frame;
    let duration = 2.0;
    let events = poisson_arrivals(5e9, PKT, duration, 3).unwrap();
    let window = SimWindow::new(0.2, duration).unwrap();
    let out = simulate_link_events(events, &link(), &gov, window).unwrap();
    let model = link_energy(&spec(0.5), &gov, &link()).unwrap();
    assert!((out.normalized_energy - model).abs() < 0.03, "{} vs {model}", out.normalized_energy);
}

#[test]
fn burst_energy_tracks_model_in_both_regimes() {
    let gov = GovernorSpec::default_burst();
    // 0.05 is timer driven, 0.5 count driven
    for rho in [0.05, 0.5] {
        let duration = 2.0;
        let events = poisson_arrivals(rho * 1e10, PKT, duration, 21).unwrap();
        let out = simulate_link_events(events, &link(), &gov, SimWindow::new(0.2, duration).unwrap()).unwrap();
        let model = link_energy(&spec(rho), &gov, &link()).unwrap();
        assert!((out.normalized_energy - model).abs() < 0.03, "rho {rho}: {} vs {model}", out.normalized_energy);
    }
}

#[test]
fn accumulators_cover_the_window() {
    for gov in [GovernorSpec::Frame, GovernorSpec::default_burst()] {
        for rho in [0.0, 0.2, 0.9] {
            let duration = 0.05;
            let stream = if rho > 0.0 {
                gen_poisson(rho * 1e10, PKT, duration, 5).unwrap()
            } else {
                eee_bundle::TraceStream::new(vec![], duration).unwrap()
            };
            let window = SimWindow::new(0.01, duration).unwrap();
            let out = simulate_link_events(stream.events().iter().copied(), &link(), &gov, window).unwrap();
            assert!((out.energy.total_time() - window.length()).abs() < 1e-9);
            assert_eq!(out.sent_bytes + out.residual_bytes, stream.total_bytes());
            assert!(out.normalized_energy >= link().sigma_off - 1e-12 && out.normalized_energy <= 1.0 + 1e-12);
        }
    }
}

#[test]
fn identical_inputs_give_identical_accumulators() {
    let stream = gen_poisson(4e9, PKT, 0.05, 8).unwrap();
    let gov = GovernorSpec::default_burst();
    let w = SimWindow::full(0.05).unwrap();
    let a = simulate_link_events(stream.events().iter().copied(), &link(), &gov, w).unwrap();
    let b = simulate_link_events(stream.events().iter().copied(), &link(), &gov, w).unwrap();
    assert_eq!(a, b);
}

#[test]
fn burst_high_poisson_matches_monte_carlo_erlang() {
    // the idle period ends at the Qw-th arrival counted from the end of the sleep
    // transition, minus the arrivals already queued during it
    use rand::SeedableRng;
    use rand_distr::{Distribution as _, Exp};
    let p = link();
    let qw = 20u32;
    let gov = GovernorSpec::burst(qw, 1.0).unwrap();
    let mut rng = rand_pcg::Pcg64::seed_from_u64(99);
    for rho in [0.2, 0.5, 0.8] {
        let lambda = rho * p.service_rate(PKT as f64);
        let exp = Exp::new(lambda).unwrap();
        let trials = 200_000;
        let mut sum = 0.0;
        for _ in 0..trials {
            let mut t = 0.0;
            for _ in 0..qw {
                t += exp.sample(&mut rng);
            }
            sum += (t - p.ts).max(0.0);
        }
        let mc = sum / trials as f64;
        let model = toff(&spec(rho), &gov, &p).unwrap();
        assert!((mc - model).abs() / model < 0.01, "rho {rho}: mc {mc:e} vs {model:e}");
    }
}
