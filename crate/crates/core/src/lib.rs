//! Secure-key-rate engine for a continuous-wave entangled-photon source
//! demultiplexed into ITU wavelength channels.
//!
//! The crate models a broadband photon-pair source whose spectrum is split
//! into frequency-symmetric channel pairs, each pair carrying an independent
//! polarization-entangled stream:
//!
//! - [`spectral`] — wavelength-dependent collection efficiency and ITU grid
//!   construction with energy-conserving channel pairing.
//! - [`rates`] — analytic kernels: true/accidental coincidence rates, QBER,
//!   binary entropy and the per-channel asymptotic secure key rate.
//! - [`optimizer`] — per-channel coincidence-window optimization, channel
//!   summation, pump-power sweeps and detector count-rate handling.
//! - [`montecarlo`] — a discrete-event time-tag simulator that re-derives
//!   coincidence statistics from first principles to validate the analytics.
//! - [`network`] — fully-connected multi-user network planning over the
//!   available channel pairs.

// parameter validation uses negated comparisons on purpose: `!(x > 0.0)`
// also rejects NaN, which `x <= 0.0` lets through
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod erf;
pub mod montecarlo;
pub mod network;
pub mod optimizer;
pub mod rates;
pub mod spectral;
