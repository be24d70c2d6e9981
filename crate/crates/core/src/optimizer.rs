//! Coincidence-window and pump-power optimization over a WDM grid.
//!
//! Each channel pair gets its own coincidence window: widening the window
//! recovers more of the jitter- and coherence-broadened true coincidences
//! (an erf saturation) while admitting accidentals linearly, so the
//! per-channel key rate has a single interior maximum or grows toward the
//! acceptance plateau. The pump power is shared by all channels and is
//! swept or optimized globally.

use rayon::prelude::*;

use crate::rates::{
    accidental_coincidences, channel_key_rate, coherence_time, total_pair_rate, total_qber,
    true_coincidences, window_acceptance, ChannelRates, DetectorParams, SourceParams,
};
use crate::spectral::{channel_width_nm, effective_efficiency, ChannelPair, SpectralProfile, WdmGrid};

/// Lower edge of the window search interval, seconds.
const WINDOW_MIN_S: f64 = 0.1e-12;
/// Upper edge in units of the combined Gaussian FWHM; acceptance gains
/// beyond this are below 1e-12.
const WINDOW_MAX_WIDTHS: f64 = 50.0;
/// Golden-section tolerance for the window search, seconds.
const WINDOW_TOL_S: f64 = 0.05e-12;
/// Coarse-scan points used to bracket the window maximum.
const WINDOW_SCAN_POINTS: usize = 64;
/// Golden-section tolerance for the pump-power search, mW.
const POWER_TOL_MW: f64 = 1.0;

/// How the detector count-rate ceiling is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CapMode {
    /// Only the linear dead-time loss; singles above the ceiling are
    /// flagged but not clipped.
    #[default]
    LossOnly,
    /// Additionally clip the effective singles at the ceiling by scaling
    /// the arm efficiency down.
    Clamp,
}

/// Pump-power grid for sweeps.
#[derive(Debug, Clone, Copy)]
pub struct PowerSweep {
    pub min_mw: f64,
    pub max_mw: f64,
    pub steps: u32,
}

impl PowerSweep {
    pub fn powers(&self) -> Vec<f64> {
        if self.steps <= 1 {
            return vec![self.min_mw];
        }
        let step = (self.max_mw - self.min_mw) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.min_mw + i as f64 * step).collect()
    }
}

/// Everything needed to evaluate one demultiplexing scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub grid: WdmGrid,
    pub profile: SpectralProfile,
    pub source: SourceParams,
    pub detectors: DetectorParams,
    pub link_loss_db_a: f64,
    pub link_loss_db_b: f64,
    pub power_sweep: PowerSweep,
    pub cap_mode: CapMode,
}

/// Analytic description of a single channel pair, after all efficiency
/// scalings have been folded into `eta_a` / `eta_b`.
#[derive(Debug, Clone, Copy)]
pub struct ChannelModel {
    pub pair_rate: f64,
    pub eta_a: f64,
    pub eta_b: f64,
    pub dark_counts: f64,
    pub jitter_fwhm_s: f64,
    pub sigma_c_s: f64,
    pub e_pol: f64,
}

impl ChannelModel {
    /// Full rate breakdown at a given coincidence window.
    pub fn rates_at(&self, t_cc_s: f64) -> ChannelRates {
        let acceptance = window_acceptance(t_cc_s, self.jitter_fwhm_s, self.sigma_c_s);
        let cc_true = true_coincidences(self.pair_rate, self.eta_a, self.eta_b, acceptance);
        let cc_acc = accidental_coincidences(
            self.pair_rate,
            self.eta_a,
            self.eta_b,
            self.dark_counts,
            t_cc_s,
        );
        let qber = total_qber(cc_true, cc_acc, self.e_pol).unwrap_or(0.0);
        ChannelRates {
            singles_a: self.pair_rate * self.eta_a + 2.0 * self.dark_counts,
            singles_b: self.pair_rate * self.eta_b + 2.0 * self.dark_counts,
            cc_true,
            cc_acc,
            qber,
            t_cc_s,
            secure_rate_bps: channel_key_rate(cc_true, cc_acc, self.e_pol),
        }
    }

    fn key_rate_at(&self, t_cc_s: f64) -> f64 {
        let acceptance = window_acceptance(t_cc_s, self.jitter_fwhm_s, self.sigma_c_s);
        let cc_true = true_coincidences(self.pair_rate, self.eta_a, self.eta_b, acceptance);
        let cc_acc = accidental_coincidences(
            self.pair_rate,
            self.eta_a,
            self.eta_b,
            self.dark_counts,
            t_cc_s,
        );
        channel_key_rate(cc_true, cc_acc, self.e_pol)
    }
}

/// Result of applying the count-rate ceiling to one detector.
#[derive(Debug, Clone, Copy)]
pub struct CapResult {
    pub effective_singles: f64,
    pub loss_factor: f64,
    pub saturated: bool,
}

/// Per-channel outcome inside a scenario evaluation.
#[derive(Debug, Clone)]
pub struct ChannelReport {
    pub pair: ChannelPair,
    /// Effective efficiencies after fill factor, link loss, detector
    /// efficiency and dead-time loss.
    pub eta_a: f64,
    pub eta_b: f64,
    pub rates: ChannelRates,
    pub saturated_a: bool,
    pub saturated_b: bool,
}

/// One pump power of a sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub pump_power_mw: f64,
    pub total_bps: f64,
    pub channels: Vec<ChannelReport>,
}

impl SweepRow {
    pub fn any_saturated(&self) -> bool {
        self.channels.iter().any(|c| c.saturated_a || c.saturated_b)
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

/// Outcome of the global pump-power optimization.
#[derive(Debug, Clone, Copy)]
pub struct PowerOptimum {
    pub power_mw: f64,
    pub rate_bps: f64,
    /// Set when the rate is monotone over the sweep interval and the
    /// returned power is an interval edge rather than an interior optimum.
    pub monotone: bool,
}

/// Golden-section maximization of a unimodal `f` on `[a, b]`.
fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Finds the coincidence window maximizing the channel key rate.
///
/// A 64-point coarse scan brackets the maximum (guarding the unimodality
/// assumption), then golden-section refines it to 0.05 ps. When the rate
/// never decreases over the whole interval — negligible accidentals — the
/// interval's upper bound is returned, where the acceptance factor has
/// saturated.
pub fn optimize_window(model: &ChannelModel) -> (f64, ChannelRates) {
    let width =
        (model.jitter_fwhm_s * model.jitter_fwhm_s + model.sigma_c_s * model.sigma_c_s).sqrt();
    let lo = WINDOW_MIN_S;
    let hi = (WINDOW_MAX_WIDTHS * width).max(lo * 2.0);
    let n = WINDOW_SCAN_POINTS;
    let step = (hi - lo) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| lo + i as f64 * step).collect();
    let vals: Vec<f64> = xs.iter().map(|&t| model.key_rate_at(t)).collect();

    let mut best = 0;
    let mut nondecreasing = true;
    for i in 1..n {
        if vals[i] > vals[best] {
            best = i;
        }
        // relative slack: an erf-saturated tail with vanishing accidentals
        // counts as flat, not as an interior maximum
        if vals[i] < vals[i - 1] * (1.0 - 1e-12) {
            nondecreasing = false;
        }
    }
    if nondecreasing {
        return (hi, model.rates_at(hi));
    }
    let a = if best == 0 { lo } else { xs[best - 1] };
    let b = if best == n - 1 { hi } else { xs[best + 1] };
    let (t, _) = golden_section_max(|t| model.key_rate_at(t), a, b, WINDOW_TOL_S);
    (t, model.rates_at(t))
}

/// Linear dead-time model anchored at one published operating point:
/// `loss = deadtime_loss_at_max * singles / max_count_rate`. The effective
/// singles are additionally clipped at the ceiling, with a flag.
pub fn apply_detector_cap(singles: f64, detectors: &DetectorParams) -> CapResult {
    let loss_factor =
        (1.0 - detectors.deadtime_loss_at_max * singles / detectors.max_count_rate).max(0.0);
    let after_loss = singles * loss_factor;
    let saturated = after_loss > detectors.max_count_rate;
    CapResult {
        effective_singles: after_loss.min(detectors.max_count_rate),
        loss_factor,
        saturated,
    }
}

fn arm_efficiency(
    config: &ScenarioConfig,
    pair_rate: f64,
    lambda_nm: f64,
    width_nm: f64,
    link_loss_db: f64,
) -> (f64, bool) {
    let mut eta = effective_efficiency(&config.profile, lambda_nm, width_nm, config.grid.fill_factor);
    eta *= 10f64.powf(-link_loss_db / 10.0);
    if !config.detectors.efficiency_included_in_profile {
        eta *= config.detectors.quantum_efficiency;
    }
    let raw_singles = pair_rate * eta + 2.0 * config.detectors.dark_counts;
    let cap = apply_detector_cap(raw_singles, &config.detectors);
    eta *= cap.loss_factor;
    if config.cap_mode == CapMode::Clamp && cap.saturated {
        eta *= cap.effective_singles / (raw_singles * cap.loss_factor);
    }
    (eta, cap.saturated)
}

/// Total secure key rate at one pump power: per-channel efficiencies from
/// the profile at each arm's own wavelength, per-channel window
/// optimization, channels summed in index order (deterministic regardless
/// of the worker count).
pub fn total_key_rate(config: &ScenarioConfig, pump_power_mw: f64) -> (f64, Vec<ChannelReport>) {
    let source = SourceParams { pump_power_mw, ..config.source };
    let width0 = channel_width_nm(config.grid.spacing_hz, source.lambda0_nm);
    let pair_rate = total_pair_rate(&source, width0);
    let sigma_c = coherence_time(source.lambda0_nm, config.grid.spacing_hz, config.grid.fill_factor);
    let pairs = config.grid.pairs();

    let reports: Vec<ChannelReport> = pairs
        .into_par_iter()
        .map(|pair| {
            let (eta_a, sat_a) = arm_efficiency(
                config,
                pair_rate,
                pair.lambda_low_nm,
                pair.width_nm_low,
                config.link_loss_db_a,
            );
            let (eta_b, sat_b) = arm_efficiency(
                config,
                pair_rate,
                pair.lambda_high_nm,
                pair.width_nm_high,
                config.link_loss_db_b,
            );
            let model = ChannelModel {
                pair_rate,
                eta_a,
                eta_b,
                dark_counts: config.detectors.dark_counts,
                jitter_fwhm_s: config.detectors.jitter_fwhm_s,
                sigma_c_s: sigma_c,
                e_pol: config.source.e_pol,
            };
            let (_, rates) = optimize_window(&model);
            ChannelReport { pair, eta_a, eta_b, rates, saturated_a: sat_a, saturated_b: sat_b }
        })
        .collect();

    let total = reports.iter().map(|r| r.rates.secure_rate_bps).sum();
    (total, reports)
}

/// Evaluates [`total_key_rate`] on the configured power grid.
pub fn sweep_power(config: &ScenarioConfig) -> SweepResult {
    let rows = config
        .power_sweep
        .powers()
        .into_iter()
        .map(|p| {
            let (total_bps, channels) = total_key_rate(config, p);
            SweepRow { pump_power_mw: p, total_bps, channels }
        })
        .collect();
    SweepResult { rows }
}

/// Locates the pump power maximizing the total rate: coarse sweep to
/// bracket, golden-section to 1 mW. Monotone landscapes are flagged and
/// return the better interval edge.
pub fn optimize_power(config: &ScenarioConfig) -> PowerOptimum {
    let sweep = PowerSweep {
        steps: config.power_sweep.steps.max(17),
        ..config.power_sweep
    };
    let powers = sweep.powers();
    let totals: Vec<f64> = powers.iter().map(|&p| total_key_rate(config, p).0).collect();

    let mut best = 0;
    for i in 1..totals.len() {
        if totals[i] > totals[best] {
            best = i;
        }
    }
    let increasing = totals.windows(2).all(|w| w[1] >= w[0]);
    let decreasing = totals.windows(2).all(|w| w[1] <= w[0]);
    if increasing || decreasing || totals.len() < 3 {
        return PowerOptimum { power_mw: powers[best], rate_bps: totals[best], monotone: true };
    }
    let a = powers[best.saturating_sub(1)];
    let b = powers[(best + 1).min(powers.len() - 1)];
    let (p, r) = golden_section_max(|p| total_key_rate(config, p).0, a, b, POWER_TOL_MW);
    PowerOptimum { power_mw: p, rate_bps: r, monotone: false }
}

/// Short-distance low-loss approximation: transmission loss multiplies the
/// optimized rate, `rate * 10^(-loss_db / 10)`.
pub fn apply_link_loss_approx(rate_bps: f64, total_loss_db: f64) -> f64 {
    rate_bps * 10f64.powf(-total_loss_db / 10.0)
}
