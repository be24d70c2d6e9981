//! Command implementations. Each builds its full output in memory and
//! returns it with the exit status, so runs with identical inputs are
//! byte-identical.

use std::fmt::Write as _;

use anyhow::Result;

use keymux_core::montecarlo::{self, validation};
use keymux_core::network::{assign_channels, max_fully_connected_users, point_to_point_users};
use keymux_core::optimizer::{sweep_power, total_key_rate, ScenarioConfig};
use keymux_core::spectral::itu_channel_number;

use crate::config::RunConfig;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_SATURATED: u8 = 3;

pub struct CommandOutput {
    pub bytes: Vec<u8>,
    pub exit: u8,
}

fn version_comment(config_hash: &str) -> String {
    format!("# keymux {} config_sha256={}\n", env!("CARGO_PKG_VERSION"), config_hash)
}

/// Per-channel rate table at the configured pump power.
pub fn cmd_rates(scenario: &ScenarioConfig, config_hash: &str) -> Result<CommandOutput> {
    let (total, reports) = total_key_rate(scenario, scenario.source.pump_power_mw);
    let mut out = version_comment(config_hash);
    let _ = writeln!(out, "# pump_power_mw={} total_secure_bps={}", scenario.source.pump_power_mw, total);
    out.push_str(
        "pair_index,itu_low,itu_high,lambda_low_nm,lambda_high_nm,eta_a,eta_b,\
         singles_a_cps,singles_b_cps,cc_true_cps,cc_acc_cps,qber,t_cc_ps,secure_bps,\
         saturated_a,saturated_b\n",
    );
    let mut saturated = false;
    for r in &reports {
        saturated |= r.saturated_a || r.saturated_b;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.pair.index,
            itu_channel_number(r.pair.freq_low_hz),
            itu_channel_number(r.pair.freq_high_hz),
            r.pair.lambda_low_nm,
            r.pair.lambda_high_nm,
            r.eta_a,
            r.eta_b,
            r.rates.singles_a,
            r.rates.singles_b,
            r.rates.cc_true,
            r.rates.cc_acc,
            r.rates.qber,
            r.rates.t_cc_s * 1e12,
            r.rates.secure_rate_bps,
            r.saturated_a,
            r.saturated_b,
        );
    }
    Ok(CommandOutput {
        bytes: out.into_bytes(),
        exit: if saturated { EXIT_SATURATED } else { EXIT_OK },
    })
}

/// Total key rate over the configured pump-power grid.
pub fn cmd_sweep(scenario: &ScenarioConfig, config_hash: &str) -> Result<CommandOutput> {
    let result = sweep_power(scenario);
    let mut out = version_comment(config_hash);
    out.push_str("power_mw,total_bps,spacing_ghz,n_pairs\n");
    let mut saturated = false;
    for row in &result.rows {
        saturated |= row.any_saturated();
        let _ = writeln!(
            out,
            "{},{},{},{}",
            row.pump_power_mw,
            row.total_bps,
            scenario.grid.spacing_hz / 1e9,
            scenario.grid.num_pairs,
        );
    }
    Ok(CommandOutput {
        bytes: out.into_bytes(),
        exit: if saturated { EXIT_SATURATED } else { EXIT_OK },
    })
}

/// Simulator-versus-analytics report over the 27-cell grid.
pub fn cmd_validate(run: &RunConfig, seed: Option<u64>, config_hash: &str) -> Result<CommandOutput> {
    let settings = run.validation_settings(seed)?;
    let report = validation::run_grid(&settings).map_err(anyhow::Error::from)?;

    let mut out = version_comment(config_hash);
    let _ = writeln!(out, "# seed={} duration_s={}", settings.seed, settings.duration_s);
    for c in &report.cells {
        let _ = writeln!(
            out,
            "cell rate={:.1e} t_cc={}ps sigma_c={}ps | true obs={} exp={:.1} z={:+.2} {} | acc obs={} exp={:.1} z={:+.2} {}",
            c.pair_rate,
            c.t_cc_s * 1e12,
            c.sigma_c_s * 1e12,
            c.observed_true,
            c.expected_true,
            c.z_true,
            pass_str(c.pass_true),
            c.observed_acc,
            c.expected_acc,
            c.z_acc,
            pass_str(c.pass_acc),
        );
    }
    match report.jitter.fitted_fwhm_s {
        Some(f) => {
            let _ = writeln!(
                out,
                "g2 peak fwhm fitted={:.2}ps expected={:.2}ps {}",
                f * 1e12,
                report.jitter.expected_fwhm_s * 1e12,
                pass_str(report.jitter.pass),
            );
        }
        None => {
            let _ = writeln!(out, "g2 peak fwhm fit failed FAIL");
        }
    }
    let e = &report.estimators;
    let _ = writeln!(
        out,
        "visibility obs={:.5} exp={:.5} {}",
        e.observed_visibility,
        e.expected_visibility,
        pass_str(e.pass_visibility),
    );
    let _ = writeln!(
        out,
        "klyshko obs={:.5} exp={:.5} {}",
        e.observed_klyshko,
        e.configured_eta,
        pass_str(e.pass_klyshko),
    );
    let _ = writeln!(out, "brightness identity {}", pass_str(e.pass_brightness_identity));
    let all = report.all_pass();
    let _ = writeln!(out, "overall {}", pass_str(all));
    Ok(CommandOutput {
        bytes: out.into_bytes(),
        exit: if all { EXIT_OK } else { EXIT_FAILURE },
    })
}

fn pass_str(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Fully-connected network plan over the per-channel rates.
pub fn cmd_network(
    run: &RunConfig,
    scenario: &ScenarioConfig,
    config_hash: &str,
) -> Result<CommandOutput> {
    let (_, reports) = total_key_rate(scenario, scenario.source.pump_power_mw);
    let rated: Vec<_> = reports.iter().map(|r| (r.pair, r.rates.secure_rate_bps)).collect();
    let max_users = max_fully_connected_users(rated.len() as u64);
    let users = run.network.users.unwrap_or(max_users.min(u32::MAX as u64) as u32);
    let plan = assign_channels(users, &rated)?;
    let (p2p_min, p2p_max) = point_to_point_users(rated.len() as u64);

    let mut out = version_comment(config_hash);
    let _ = writeln!(
        out,
        "# users={} max_users={} point_to_point_users={}..{} leftover_pairs={} total_rate_bps={} min_link_bps={}",
        plan.users,
        max_users,
        p2p_min,
        p2p_max,
        plan.leftover_pairs,
        plan.total_rate_bps(),
        plan.min_link_rate_bps(),
    );
    out.push_str("user_i,user_j,channel_low_index,channel_high_index,rate_bps\n");
    for l in &plan.links {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            l.user_i,
            l.user_j,
            itu_channel_number(l.pair.freq_low_hz),
            itu_channel_number(l.pair.freq_high_hz),
            l.rate_bps,
        );
    }
    Ok(CommandOutput { bytes: out.into_bytes(), exit: EXIT_OK })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpFormat {
    Csv,
    Binary,
}

/// Time-tag stream dump, CSV or raw binary records.
pub fn cmd_simulate(
    run: &RunConfig,
    seed: Option<u64>,
    format: DumpFormat,
    config_hash: &str,
) -> Result<CommandOutput> {
    let sim = run.sim_config(seed)?;
    let streams = montecarlo::simulate(&sim)?;
    let merged = montecarlo::merge_streams(&streams);
    let mut bytes = Vec::new();
    match format {
        DumpFormat::Binary => montecarlo::write_tags_binary(&mut bytes, &merged)?,
        DumpFormat::Csv => {
            bytes.extend_from_slice(version_comment(config_hash).as_bytes());
            bytes.extend_from_slice(format!("# seed={}\n", sim.seed).as_bytes());
            montecarlo::write_tags_csv(&mut bytes, &merged)?;
        }
    }
    Ok(CommandOutput { bytes, exit: EXIT_OK })
}
