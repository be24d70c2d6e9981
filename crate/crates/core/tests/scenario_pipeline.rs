//! Cross-module pipeline: spectral grid -> analytic rates -> window
//! optimization -> network plan, with a Monte Carlo cross-check of one
//! channel's error rate.

use keymux_core::montecarlo::{count_coincidences, simulate, MatchMode, SimConfig};
use keymux_core::network::assign_channels;
use keymux_core::optimizer::{total_key_rate, CapMode, PowerSweep, ScenarioConfig};
use keymux_core::rates::{
    accidental_coincidences, total_qber, true_coincidences, window_acceptance, DetectorParams,
    SourceParams,
};
use keymux_core::spectral::{default_profile, WdmGrid};

fn scenario() -> ScenarioConfig {
    ScenarioConfig {
        grid: WdmGrid::new(193.4e12, 100e9, 8, 0.75).unwrap(),
        profile: default_profile(),
        source: SourceParams::new(4.10e6, 60.0, 0.004, 1550.12).unwrap(),
        detectors: DetectorParams::default(),
        link_loss_db_a: 0.0,
        link_loss_db_b: 0.0,
        power_sweep: PowerSweep { min_mw: 20.0, max_mw: 200.0, steps: 10 },
        cap_mode: CapMode::LossOnly,
    }
}

#[test]
fn channel_reports_recompose_from_the_kernels() {
    let config = scenario();
    let (total, reports) = total_key_rate(&config, 60.0);
    assert_eq!(reports.len(), 8);
    let sum: f64 = reports.iter().map(|r| r.rates.secure_rate_bps).sum();
    assert_eq!(total.to_bits(), sum.to_bits());

    let sigma_c = keymux_core::rates::coherence_time(1550.12, 100e9, 0.75);
    for r in &reports {
        // re-derive the report from the raw kernels at the chosen window
        let pair_rate = 4.10e6 * 60.0 * keymux_core::spectral::channel_width_nm(100e9, 1550.12);
        let acc = window_acceptance(r.rates.t_cc_s, 38e-12, sigma_c);
        let cc_true = true_coincidences(pair_rate, r.eta_a, r.eta_b, acc);
        let cc_acc = accidental_coincidences(pair_rate, r.eta_a, r.eta_b, 100.0, r.rates.t_cc_s);
        assert!((cc_true - r.rates.cc_true).abs() <= 1e-9 * cc_true.max(1.0));
        assert!((cc_acc - r.rates.cc_acc).abs() <= 1e-9 * cc_acc.max(1.0));
        let qber = total_qber(cc_true, cc_acc, 0.004).unwrap();
        assert!((qber - r.rates.qber).abs() <= 1e-12);
    }
}

#[test]
fn plan_distributes_the_computed_rates() {
    let config = scenario();
    let (_, reports) = total_key_rate(&config, 60.0);
    let rated: Vec<_> = reports.iter().map(|r| (r.pair, r.rates.secure_rate_bps)).collect();
    let plan = assign_channels(4, &rated).unwrap();
    assert_eq!(plan.links.len(), 6);
    assert_eq!(plan.leftover_pairs, 2);
    // the two dropped channels are the two slowest
    let mut rates: Vec<f64> = rated.iter().map(|(_, r)| *r).collect();
    rates.sort_by(|a, b| b.total_cmp(a));
    let expect: f64 = rates[..6].iter().sum();
    assert!((plan.total_rate_bps() - expect).abs() <= 1e-9 * expect);
}

#[test]
fn simulated_channel_qber_tracks_the_analytic_value() {
    // low pump keeps the event count inside the simulator budget
    let config = scenario();
    let (_, reports) = total_key_rate(&config, 5.0);
    let r = &reports[0];
    let pair_rate = 4.10e6 * 5.0 * keymux_core::spectral::channel_width_nm(100e9, 1550.12);
    let sigma_c = keymux_core::rates::coherence_time(1550.12, 100e9, 0.75);

    let sim = SimConfig {
        pair_rate,
        eta_a: r.eta_a,
        eta_b: r.eta_b,
        jitter_fwhm_per_detector_s: 38e-12 / std::f64::consts::SQRT_2,
        sigma_c_s: sigma_c,
        dead_time_s: 0.0,
        dark_rate: 200.0,
        e_pol: 0.004,
        duration_s: 2.0,
        seed: 99,
        max_events: 5e7,
    };
    let streams = simulate(&sim).unwrap();
    let counted = count_coincidences(&streams, r.rates.t_cc_s, MatchMode::AllPairs);
    let observed_qber = (counted.cc_true_tagged as f64 * 0.004
        + 0.5 * counted.cc_acc_tagged as f64)
        / counted.cc_total as f64;
    let tol = 3.0 * 0.5 / (counted.cc_total as f64).sqrt() + 1e-4;
    assert!(
        (observed_qber - r.rates.qber).abs() <= tol,
        "sim {observed_qber} vs analytic {}",
        r.rates.qber
    );
}
