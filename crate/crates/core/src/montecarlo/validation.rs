//! Simulator-versus-analytics validation suite.
//!
//! Runs the event simulator over a 3x3x3 grid of (pair rate, coincidence
//! window, coherence broadening) and checks the tagged true and accidental
//! coincidence counts against the analytic kernels, cell by cell, inside
//! central 3-sigma Poisson intervals (exact intervals below mean 100, the
//! normal approximation above). Counting uses the all-pairs convention,
//! which is the statistics the analytic accidental product describes; the
//! greedy matcher is checked against all-pairs separately at low occupancy.
//!
//! The suite also refits the correlation-peak width at the reference jitter
//! and re-derives visibility and Klyshko efficiency from a clean run.

use crate::rates::{accidental_coincidences, true_coincidences, window_acceptance};

use super::{
    count_coincidences, estimate_klyshko, estimate_visibility, g2_histogram, simulate, MatchMode,
    SimConfig, SimError,
};

/// Two-sided coverage outside a central 3-sigma interval.
const THREE_SIGMA_TAIL: f64 = 0.002699796063260207; // 1 - erf(3/sqrt(2))

const PAIR_RATES: [f64; 3] = [2e5, 6e5, 1.8e6];
const WINDOWS_S: [f64; 3] = [40e-12, 150e-12, 1.2e-9];
const SIGMA_CS_S: [f64; 3] = [0.0, 25e-12, 60e-12];

/// Fixed per-arm parameters of the validation runs.
#[derive(Debug, Clone, Copy)]
pub struct GridSettings {
    pub duration_s: f64,
    pub seed: u64,
    pub eta: f64,
    /// Dark rate per detector stream; enters the analytic singles as twice
    /// the per-detector dark rate of the rate kernels.
    pub dark_rate: f64,
    /// Combined two-detector jitter FWHM; each simulated detector gets
    /// this over sqrt(2).
    pub combined_jitter_fwhm_s: f64,
    pub e_pol: f64,
}

impl GridSettings {
    pub const DEFAULT_SEED: u64 = 0xC01C1DE5;
}

impl Default for GridSettings {
    fn default() -> Self {
        Self {
            duration_s: 10.0,
            seed: Self::DEFAULT_SEED,
            eta: 0.25,
            dark_rate: 2e4,
            combined_jitter_fwhm_s: 38e-12,
            e_pol: 0.004,
        }
    }
}

/// One grid cell comparison.
#[derive(Debug, Clone, Copy)]
pub struct CellCheck {
    pub pair_rate: f64,
    pub t_cc_s: f64,
    pub sigma_c_s: f64,
    pub expected_true: f64,
    pub observed_true: u64,
    pub z_true: f64,
    pub pass_true: bool,
    pub expected_acc: f64,
    pub observed_acc: u64,
    pub z_acc: f64,
    pub pass_acc: bool,
}

impl CellCheck {
    pub fn pass(&self) -> bool {
        self.pass_true && self.pass_acc
    }
}

/// Correlation-peak width refit.
#[derive(Debug, Clone, Copy)]
pub struct JitterCheck {
    pub expected_fwhm_s: f64,
    pub fitted_fwhm_s: Option<f64>,
    pub pass: bool,
}

/// Visibility and Klyshko re-derivation from one low-accidental run.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorCheck {
    pub expected_visibility: f64,
    pub observed_visibility: f64,
    pub pass_visibility: bool,
    pub configured_eta: f64,
    pub observed_klyshko: f64,
    pub pass_klyshko: bool,
    /// Brightness times Klyshko squared reproduces the coincidence count.
    pub pass_brightness_identity: bool,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub cells: Vec<CellCheck>,
    pub jitter: JitterCheck,
    pub estimators: EstimatorCheck,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.cells.iter().all(CellCheck::pass)
            && self.jitter.pass
            && self.estimators.pass_visibility
            && self.estimators.pass_klyshko
            && self.estimators.pass_brightness_identity
    }
}

/// Central interval containing all but the 3-sigma two-sided tail mass
/// (0.0027) of a Poisson distribution: exact tail sums below mean 100,
/// `mu +/- 3 sqrt(mu)` above.
pub fn poisson_three_sigma_bounds(mu: f64) -> (f64, f64) {
    if mu >= 100.0 {
        let half = 3.0 * mu.sqrt();
        return (mu - half, mu + half);
    }
    if mu <= 0.0 {
        return (0.0, 0.0);
    }
    let tail = THREE_SIGMA_TAIL / 2.0;
    let mut p = (-mu).exp();
    let mut cdf = p;
    let mut k: u64 = 0;
    // lower bound: largest lo with P(X < lo) <= tail
    let mut lo = 0u64;
    while cdf <= tail {
        k += 1;
        p *= mu / k as f64;
        cdf += p;
        lo = k;
    }
    // upper bound: smallest hi with P(X > hi) <= tail
    let mut hi = k.max(lo);
    while 1.0 - cdf > tail {
        k += 1;
        p *= mu / k as f64;
        cdf += p;
        hi = k;
    }
    (lo as f64, hi as f64)
}

fn in_bounds(observed: u64, mu: f64) -> (bool, f64) {
    let (lo, hi) = poisson_three_sigma_bounds(mu);
    let z = if mu > 0.0 { (observed as f64 - mu) / mu.sqrt() } else { observed as f64 };
    ((observed as f64) >= lo && (observed as f64) <= hi, z)
}

fn cell_sim_config(settings: &GridSettings, pair_rate: f64, sigma_c: f64, salt: u64) -> SimConfig {
    SimConfig {
        pair_rate,
        eta_a: settings.eta,
        eta_b: settings.eta,
        jitter_fwhm_per_detector_s: settings.combined_jitter_fwhm_s / std::f64::consts::SQRT_2,
        sigma_c_s: sigma_c,
        dead_time_s: 0.0,
        dark_rate: settings.dark_rate,
        e_pol: settings.e_pol,
        duration_s: settings.duration_s,
        seed: settings.seed.wrapping_add(salt),
        max_events: super::DEFAULT_MAX_EVENTS,
    }
}

/// Analytic predictions for one cell, in counts over the run duration.
/// The simulator's per-stream dark rate corresponds to twice the
/// per-detector dark-count parameter of the accidental kernel.
pub fn cell_expectations(
    settings: &GridSettings,
    pair_rate: f64,
    t_cc_s: f64,
    sigma_c_s: f64,
) -> (f64, f64) {
    let acceptance = window_acceptance(t_cc_s, settings.combined_jitter_fwhm_s, sigma_c_s);
    let cc_true = true_coincidences(pair_rate, settings.eta, settings.eta, acceptance);
    let cc_acc = accidental_coincidences(
        pair_rate,
        settings.eta,
        settings.eta,
        settings.dark_rate / 2.0,
        t_cc_s,
    );
    (cc_true * settings.duration_s, cc_acc * settings.duration_s)
}

/// Runs the full 27-cell grid plus the jitter and estimator checks.
pub fn run_grid(settings: &GridSettings) -> Result<ValidationReport, SimError> {
    let mut cells = Vec::with_capacity(27);
    for (ri, &pair_rate) in PAIR_RATES.iter().enumerate() {
        for (si, &sigma_c) in SIGMA_CS_S.iter().enumerate() {
            // one stream per (rate, sigma); the window only affects counting
            let salt = (ri * 3 + si) as u64;
            let config = cell_sim_config(settings, pair_rate, sigma_c, salt);
            let streams = simulate(&config)?;
            for &t_cc in &WINDOWS_S {
                let result = count_coincidences(&streams, t_cc, MatchMode::AllPairs);
                let (exp_true, exp_acc) = cell_expectations(settings, pair_rate, t_cc, sigma_c);
                let (pass_true, z_true) = in_bounds(result.cc_true_tagged, exp_true);
                let (pass_acc, z_acc) = in_bounds(result.cc_acc_tagged, exp_acc);
                cells.push(CellCheck {
                    pair_rate,
                    t_cc_s: t_cc,
                    sigma_c_s: sigma_c,
                    expected_true: exp_true,
                    observed_true: result.cc_true_tagged,
                    z_true,
                    pass_true,
                    expected_acc: exp_acc,
                    observed_acc: result.cc_acc_tagged,
                    z_acc,
                    pass_acc,
                });
            }
        }
    }

    let jitter = check_jitter(settings)?;
    let estimators = check_estimators(settings)?;
    Ok(ValidationReport { cells, jitter, estimators })
}

fn check_jitter(settings: &GridSettings) -> Result<JitterCheck, SimError> {
    let config = SimConfig {
        pair_rate: 1e6,
        dark_rate: 0.0,
        e_pol: 0.0,
        duration_s: 2.0,
        sigma_c_s: 0.0,
        ..cell_sim_config(settings, 1e6, 0.0, 101)
    };
    let streams = simulate(&config)?;
    let hist = g2_histogram(&streams, 1e-12, 500e-12);
    let expected = settings.combined_jitter_fwhm_s;
    let pass = hist
        .fitted_fwhm_s
        .map(|f| (f - expected).abs() <= 0.05 * expected)
        .unwrap_or(false);
    Ok(JitterCheck { expected_fwhm_s: expected, fitted_fwhm_s: hist.fitted_fwhm_s, pass })
}

fn check_estimators(settings: &GridSettings) -> Result<EstimatorCheck, SimError> {
    // low power regime: negligible accidentals, clean estimators
    let config = SimConfig {
        pair_rate: 2e5,
        dark_rate: 0.0,
        duration_s: 10.0,
        sigma_c_s: 0.0,
        ..cell_sim_config(settings, 2e5, 0.0, 202)
    };
    let streams = simulate(&config)?;
    let result = count_coincidences(&streams, 400e-12, MatchMode::GreedyNearest);
    let cc = result.cc_total as f64;

    let observed_visibility = estimate_visibility(&result);
    let expected_visibility = 1.0 - 2.0 * settings.e_pol;
    let sigma_v = 2.0 * (settings.e_pol * (1.0 - settings.e_pol) / cc).sqrt();
    let pass_visibility = (observed_visibility - expected_visibility).abs() <= 3.0 * sigma_v;

    let observed_klyshko = estimate_klyshko(&result);
    let sigma_eta = settings.eta / cc.sqrt();
    let pass_klyshko = (observed_klyshko - settings.eta).abs() <= 3.0 * sigma_eta;

    let brightness = result.singles_a as f64 * result.singles_b as f64 / cc;
    let pass_brightness_identity =
        (brightness * observed_klyshko * observed_klyshko - cc).abs() <= 1e-9 * cc;

    Ok(EstimatorCheck {
        expected_visibility,
        observed_visibility,
        pass_visibility,
        configured_eta: settings.eta,
        observed_klyshko,
        pass_klyshko,
        pass_brightness_identity,
    })
}
