//! Strict TOML run configuration.
//!
//! Every physical quantity carries its unit in the key name; unknown keys
//! are rejected. Defaults reproduce the reference scenario: built-in
//! profile, 100 GHz grid filling the source band, 400 mW pump.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use keymux_core::montecarlo::{validation::GridSettings, SimConfig, DEFAULT_MAX_EVENTS};
use keymux_core::optimizer::{CapMode, PowerSweep, ScenarioConfig};
use keymux_core::rates::{DetectorParams, SourceParams};
use keymux_core::spectral::{default_profile, SpectralProfile, WdmGrid};

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub profile: ProfileSection,
    #[serde(default)]
    pub source: SourceSection,
    #[serde(default)]
    pub detectors: DetectorSection,
    #[serde(default)]
    pub link: LinkSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub validation: ValidationSection,
    #[serde(default)]
    pub network: NetworkSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Anchor of the degenerate channel. Default 193.4 THz.
    #[serde(default = "d_center_thz")]
    pub center_frequency_thz: f64,
    /// Channel spacing. Default 100 GHz.
    #[serde(default = "d_spacing_ghz")]
    pub spacing_ghz: f64,
    /// Channel pairs per side; default fills the usable source band.
    #[serde(default)]
    pub num_pairs: Option<u32>,
    /// Passband FWHM over spacing. Default 0.75.
    #[serde(default = "d_fill")]
    pub fill_factor: f64,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    /// Optional measured profile (`wavelength_nm,efficiency` CSV), resolved
    /// relative to the config file. Default: built-in calibrated stand-in.
    #[serde(default)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    /// Created pairs per second, mW and nm. Default 4.10e6.
    #[serde(default = "d_brightness")]
    pub spectral_brightness_cps_per_mw_nm: f64,
    /// Default 400 mW.
    #[serde(default = "d_pump")]
    pub pump_power_mw: f64,
    /// Polarization error probability. Default 0.004.
    #[serde(default = "d_epol")]
    pub e_pol: f64,
    /// Degenerate wavelength. Default 1550.12 nm.
    #[serde(default = "d_lambda0")]
    pub center_wavelength_nm: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    /// Combined two-detector jitter FWHM. Default 38 ps.
    #[serde(default = "d_jitter_ps")]
    pub jitter_fwhm_ps: f64,
    /// Dark counts per detector. Default 100 cps.
    #[serde(default = "d_dark")]
    pub dark_counts_cps: f64,
    /// Default 0.8; applied only when the profile excludes it.
    #[serde(default = "d_qe")]
    pub quantum_efficiency: f64,
    /// Default true.
    #[serde(default = "d_true")]
    pub efficiency_included_in_profile: bool,
    /// Default 200 MHz.
    #[serde(default = "d_max_rate_mhz")]
    pub max_count_rate_mhz: f64,
    /// Fractional dead-time loss at the maximum rate. Default 0.02.
    #[serde(default = "d_dt_loss")]
    pub deadtime_loss_at_max: f64,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    /// Transmission loss on each arm, dB. Default 0.
    #[serde(default)]
    pub loss_db_a: f64,
    #[serde(default)]
    pub loss_db_b: f64,
    /// `loss-only` (default) or `clamp`.
    #[serde(default)]
    pub cap_mode: CapModeConfig,
}

#[derive(Debug, Deserialize, Clone, Copy, Default, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum CapModeConfig {
    #[default]
    LossOnly,
    Clamp,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Default 20 mW.
    #[serde(default = "d_sweep_min")]
    pub min_mw: f64,
    /// Default 1000 mW.
    #[serde(default = "d_sweep_max")]
    pub max_mw: f64,
    /// Default 50.
    #[serde(default = "d_sweep_steps")]
    pub steps: u32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    /// Default 1e6 pairs/s.
    #[serde(default = "d_sim_rate")]
    pub pair_rate_cps: f64,
    /// Default 0.25 each arm.
    #[serde(default = "d_sim_eta")]
    pub eta_a: f64,
    #[serde(default = "d_sim_eta")]
    pub eta_b: f64,
    /// Per-detector jitter FWHM. Default 26.87 ps (38 ps combined).
    #[serde(default = "d_sim_jitter_ps")]
    pub detector_jitter_fwhm_ps: f64,
    /// Coherence broadening of the pair delay. Default 0.
    #[serde(default)]
    pub sigma_c_ps: f64,
    /// Non-paralyzable dead time. Default 0.
    #[serde(default)]
    pub dead_time_ns: f64,
    /// Dark counts per detector stream. Default 0.
    #[serde(default)]
    pub dark_rate_cps: f64,
    /// Default 0.004.
    #[serde(default = "d_epol")]
    pub e_pol: f64,
    /// Default 1 s.
    #[serde(default = "d_one")]
    pub duration_s: f64,
    /// Default 1.
    #[serde(default = "d_seed")]
    pub seed: u64,
    /// Expected-event budget. Default 5e7.
    #[serde(default = "d_max_events")]
    pub max_events: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationSection {
    /// Simulated duration per grid cell. Default 10 s.
    #[serde(default = "d_val_duration")]
    pub duration_s: f64,
    /// Default seed of the validation runs.
    #[serde(default = "d_val_seed")]
    pub seed: u64,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    /// Users to connect; default: the maximum the grid supports.
    #[serde(default)]
    pub users: Option<u32>,
}

fn d_center_thz() -> f64 { 193.4 }
fn d_spacing_ghz() -> f64 { 100.0 }
fn d_fill() -> f64 { 0.75 }
fn d_brightness() -> f64 { 4.10e6 }
fn d_pump() -> f64 { 400.0 }
fn d_epol() -> f64 { 0.004 }
fn d_lambda0() -> f64 { 1550.12 }
fn d_jitter_ps() -> f64 { 38.0 }
fn d_dark() -> f64 { 100.0 }
fn d_qe() -> f64 { 0.8 }
fn d_true() -> bool { true }
fn d_max_rate_mhz() -> f64 { 200.0 }
fn d_dt_loss() -> f64 { 0.02 }
fn d_sweep_min() -> f64 { 20.0 }
fn d_sweep_max() -> f64 { 1000.0 }
fn d_sweep_steps() -> u32 { 50 }
fn d_sim_rate() -> f64 { 1e6 }
fn d_sim_eta() -> f64 { 0.25 }
fn d_sim_jitter_ps() -> f64 { 38.0 / std::f64::consts::SQRT_2 }
fn d_one() -> f64 { 1.0 }
fn d_seed() -> u64 { 1 }
fn d_max_events() -> f64 { DEFAULT_MAX_EVENTS }
fn d_val_duration() -> f64 { 10.0 }
fn d_val_seed() -> u64 { GridSettings::DEFAULT_SEED }

impl Default for GridSection {
    fn default() -> Self {
        Self {
            center_frequency_thz: d_center_thz(),
            spacing_ghz: d_spacing_ghz(),
            num_pairs: None,
            fill_factor: d_fill(),
        }
    }
}

impl Default for SourceSection {
    fn default() -> Self {
        Self {
            spectral_brightness_cps_per_mw_nm: d_brightness(),
            pump_power_mw: d_pump(),
            e_pol: d_epol(),
            center_wavelength_nm: d_lambda0(),
        }
    }
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            jitter_fwhm_ps: d_jitter_ps(),
            dark_counts_cps: d_dark(),
            quantum_efficiency: d_qe(),
            efficiency_included_in_profile: d_true(),
            max_count_rate_mhz: d_max_rate_mhz(),
            deadtime_loss_at_max: d_dt_loss(),
        }
    }
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { min_mw: d_sweep_min(), max_mw: d_sweep_max(), steps: d_sweep_steps() }
    }
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            pair_rate_cps: d_sim_rate(),
            eta_a: d_sim_eta(),
            eta_b: d_sim_eta(),
            detector_jitter_fwhm_ps: d_sim_jitter_ps(),
            sigma_c_ps: 0.0,
            dead_time_ns: 0.0,
            dark_rate_cps: 0.0,
            e_pol: d_epol(),
            duration_s: d_one(),
            seed: d_seed(),
            max_events: d_max_events(),
        }
    }
}

impl Default for ValidationSection {
    fn default() -> Self {
        Self { duration_s: d_val_duration(), seed: d_val_seed() }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).context("config parse failed")
    }

    /// Builds the analytic scenario; `base_dir` anchors a relative profile
    /// CSV path.
    pub fn scenario(&self, base_dir: &Path) -> Result<ScenarioConfig> {
        let g = &self.grid;
        let spacing_hz = g.spacing_ghz * 1e9;
        if !(spacing_hz > 0.0) {
            bail!("grid.spacing_ghz must be positive, got {}", g.spacing_ghz);
        }
        let num_pairs = match g.num_pairs {
            Some(n) => n,
            None => WdmGrid::default_num_pairs(spacing_hz),
        };
        let grid = WdmGrid::new(g.center_frequency_thz * 1e12, spacing_hz, num_pairs, g.fill_factor)
            .context("config [grid]")?;

        let profile = self.load_profile(base_dir)?;

        let s = &self.source;
        let source = SourceParams::new(
            s.spectral_brightness_cps_per_mw_nm,
            s.pump_power_mw,
            s.e_pol,
            s.center_wavelength_nm,
        )
        .context("config [source]")?;

        let d = &self.detectors;
        let detectors = DetectorParams {
            jitter_fwhm_s: d.jitter_fwhm_ps * 1e-12,
            dark_counts: d.dark_counts_cps,
            quantum_efficiency: d.quantum_efficiency,
            efficiency_included_in_profile: d.efficiency_included_in_profile,
            max_count_rate: d.max_count_rate_mhz * 1e6,
            deadtime_loss_at_max: d.deadtime_loss_at_max,
        };
        detectors.validate().context("config [detectors]")?;

        let l = &self.link;
        if !(l.loss_db_a >= 0.0 && l.loss_db_b >= 0.0) {
            bail!("config [link]: losses must be nonnegative");
        }

        let sw = &self.sweep;
        if !(sw.max_mw >= sw.min_mw) || sw.steps < 1 || sw.min_mw < 0.0 {
            bail!(
                "config [sweep]: need 0 <= min_mw <= max_mw and steps >= 1, got {} .. {} x{}",
                sw.min_mw,
                sw.max_mw,
                sw.steps
            );
        }

        Ok(ScenarioConfig {
            grid,
            profile,
            source,
            detectors,
            link_loss_db_a: l.loss_db_a,
            link_loss_db_b: l.loss_db_b,
            power_sweep: PowerSweep { min_mw: sw.min_mw, max_mw: sw.max_mw, steps: sw.steps },
            cap_mode: match l.cap_mode {
                CapModeConfig::LossOnly => CapMode::LossOnly,
                CapModeConfig::Clamp => CapMode::Clamp,
            },
        })
    }

    fn load_profile(&self, base_dir: &Path) -> Result<SpectralProfile> {
        match &self.profile.csv {
            None => Ok(default_profile()),
            Some(path) => {
                let full = if path.is_absolute() { path.clone() } else { base_dir.join(path) };
                let text = std::fs::read_to_string(&full)
                    .with_context(|| format!("config [profile]: cannot read {}", full.display()))?;
                SpectralProfile::from_csv(&text).context("config [profile]")
            }
        }
    }

    /// Builds the simulator configuration, with an optional seed override.
    pub fn sim_config(&self, seed_override: Option<u64>) -> Result<SimConfig> {
        let s = &self.simulation;
        let config = SimConfig {
            pair_rate: s.pair_rate_cps,
            eta_a: s.eta_a,
            eta_b: s.eta_b,
            jitter_fwhm_per_detector_s: s.detector_jitter_fwhm_ps * 1e-12,
            sigma_c_s: s.sigma_c_ps * 1e-12,
            dead_time_s: s.dead_time_ns * 1e-9,
            dark_rate: s.dark_rate_cps,
            e_pol: s.e_pol,
            duration_s: s.duration_s,
            seed: seed_override.unwrap_or(s.seed),
            max_events: s.max_events,
        };
        config.validate().context("config [simulation]")?;
        Ok(config)
    }

    pub fn validation_settings(&self, seed_override: Option<u64>) -> Result<GridSettings> {
        let v = &self.validation;
        if !(v.duration_s > 0.0) {
            bail!("config [validation]: duration_s must be positive, got {}", v.duration_s);
        }
        Ok(GridSettings {
            duration_s: v.duration_s,
            seed: seed_override.unwrap_or(v.seed),
            ..GridSettings::default()
        })
    }
}
