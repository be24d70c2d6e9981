//! Source spectrum and ITU wavelength-grid construction.
//!
//! A [`SpectralProfile`] maps wavelength to the end-to-end collection
//! efficiency of one arm (source, multiplexer, fiber and detector losses
//! folded in). A [`WdmGrid`] slices the spectrum into frequency-symmetric
//! [`ChannelPair`]s around the degenerate channel; energy conservation in
//! the pair-creation process guarantees that the two photons of a pair
//! land in channels mirrored about the center frequency.

use thiserror::Error;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

/// Degenerate (central) wavelength of the modeled source spectrum, nm.
pub const DEGENERATE_WAVELENGTH_NM: f64 = 1550.12;

/// Default grid anchor: the ITU frequency closest to the degenerate
/// wavelength (193.4 THz <-> 1550.12 nm).
pub const DEFAULT_CENTER_FREQUENCY_HZ: f64 = 193.4e12;

/// Passband FWHM over channel spacing for off-the-shelf demultiplexers.
pub const DEFAULT_FILL_FACTOR: f64 = 0.75;

/// Usable half-bandwidth of the built-in source spectrum in Hz. The default
/// channel count for a given spacing fills this span on each side.
pub const HALF_BANDWIDTH_HZ: f64 = 6.6125e12;

const ITU_ANCHOR_HZ: f64 = 190.0e12;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("profile needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("profile wavelengths must be strictly increasing at sample {0}")]
    NonMonotonicWavelength(usize),
    #[error("profile efficiency {value} at sample {index} is outside [0, 1]")]
    EfficiencyOutOfRange { index: usize, value: f64 },
    #[error("channel spacing must be positive, got {0} Hz")]
    NonPositiveSpacing(f64),
    #[error("center frequency must be positive and finite, got {0} Hz")]
    InvalidCenterFrequency(f64),
    #[error("fill factor must be in (0, 1], got {0}")]
    FillFactorOutOfRange(f64),
    #[error("grid needs at least one channel pair")]
    NoPairs,
    #[error("grid span {span_hz} Hz reaches past the center frequency {center_hz} Hz")]
    SpanExceedsCenter { span_hz: f64, center_hz: f64 },
    #[error("pair index 0 is the degenerate channel and never carries a pair")]
    DegenerateChannel,
    #[error("pair index {index} out of range, grid has {num_pairs} pairs")]
    PairOutOfRange { index: u32, num_pairs: u32 },
    #[error("channel pair {index} lies entirely outside the profile support")]
    NoSupport { index: u32 },
    #[error("profile csv line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

/// Wavelength-resolved end-to-end collection efficiency of one arm.
///
/// Piecewise-linear between samples and zero outside the sampled range
/// (no photons are collected outside the source spectrum).
#[derive(Debug, Clone)]
pub struct SpectralProfile {
    wavelength_nm: Vec<f64>,
    efficiency: Vec<f64>,
}

impl SpectralProfile {
    pub fn new(samples: &[(f64, f64)]) -> Result<Self, SpectralError> {
        let (wl, eff): (Vec<f64>, Vec<f64>) = samples.iter().copied().unzip();
        Self::from_columns(wl, eff)
    }

    pub fn from_columns(
        wavelength_nm: Vec<f64>,
        efficiency: Vec<f64>,
    ) -> Result<Self, SpectralError> {
        let n = wavelength_nm.len().min(efficiency.len());
        if n < 2 {
            return Err(SpectralError::TooFewSamples(n));
        }
        for i in 1..n {
            if !(wavelength_nm[i] > wavelength_nm[i - 1]) {
                return Err(SpectralError::NonMonotonicWavelength(i));
            }
        }
        for (i, &e) in efficiency.iter().enumerate() {
            if !(0.0..=1.0).contains(&e) || !e.is_finite() {
                return Err(SpectralError::EfficiencyOutOfRange { index: i, value: e });
            }
        }
        Ok(Self { wavelength_nm, efficiency })
    }

    /// Parses the two-column `wavelength_nm,efficiency` CSV format.
    /// The header row is mandatory; wavelengths must increase.
    pub fn from_csv(text: &str) -> Result<Self, SpectralError> {
        let mut lines = text.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((i, l)) => break (i, l),
                None => {
                    return Err(SpectralError::Csv {
                        line: 1,
                        reason: "empty file".into(),
                    })
                }
            }
        };
        let cols: Vec<&str> = header.1.split(',').map(str::trim).collect();
        if cols != ["wavelength_nm", "efficiency"] {
            return Err(SpectralError::Csv {
                line: header.0 + 1,
                reason: format!("expected header `wavelength_nm,efficiency`, got `{}`", header.1),
            });
        }
        let mut wl = Vec::new();
        let mut eff = Vec::new();
        for (i, l) in lines {
            let l = l.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let mut parts = l.split(',');
            let (a, b) = (parts.next(), parts.next());
            if parts.next().is_some() {
                return Err(SpectralError::Csv {
                    line: i + 1,
                    reason: "expected exactly two columns".into(),
                });
            }
            let parse = |s: Option<&str>| {
                s.and_then(|v| v.trim().parse::<f64>().ok()).ok_or_else(|| SpectralError::Csv {
                    line: i + 1,
                    reason: format!("cannot parse `{l}`"),
                })
            };
            wl.push(parse(a)?);
            eff.push(parse(b)?);
        }
        Self::from_columns(wl, eff)
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.wavelength_nm.iter().copied().zip(self.efficiency.iter().copied())
    }

    /// Sampled wavelength range (first, last) in nm.
    pub fn support(&self) -> (f64, f64) {
        (self.wavelength_nm[0], *self.wavelength_nm.last().unwrap())
    }

    /// Collection efficiency at `lambda_nm`; zero outside the support.
    pub fn value(&self, lambda_nm: f64) -> f64 {
        let wl = &self.wavelength_nm;
        if lambda_nm < wl[0] || lambda_nm > *wl.last().unwrap() {
            return 0.0;
        }
        // index of the first sample > lambda
        let hi = wl.partition_point(|&w| w <= lambda_nm);
        if hi == 0 {
            return self.efficiency[0];
        }
        if hi == wl.len() {
            return *self.efficiency.last().unwrap();
        }
        let (w0, w1) = (wl[hi - 1], wl[hi]);
        let (e0, e1) = (self.efficiency[hi - 1], self.efficiency[hi]);
        e0 + (e1 - e0) * (lambda_nm - w0) / (w1 - w0)
    }

    /// Integral of the piecewise-linear profile over `[lo, hi]` nm, with the
    /// zero extension outside the support. Exact for the interpolant
    /// (trapezoids on interior samples plus partial edge segments).
    pub fn integrate(&self, lo: f64, hi: f64) -> f64 {
        let (s0, s1) = self.support();
        let lo = lo.max(s0);
        let hi = hi.min(s1);
        if hi <= lo {
            return 0.0;
        }
        let wl = &self.wavelength_nm;
        // interior sample indices strictly inside (lo, hi)
        let first = wl.partition_point(|&w| w <= lo);
        let last = wl.partition_point(|&w| w < hi); // first index with w >= hi
        let mut xs = Vec::with_capacity(last - first + 2);
        let mut ys = Vec::with_capacity(last - first + 2);
        xs.push(lo);
        ys.push(self.value(lo));
        for (&w, &e) in wl[first..last].iter().zip(&self.efficiency[first..last]) {
            xs.push(w);
            ys.push(e);
        }
        xs.push(hi);
        ys.push(self.value(hi));
        let mut acc = 0.0;
        for i in 1..xs.len() {
            acc += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
        }
        acc
    }
}

/// Built-in stand-in for the source's measured collection-efficiency curve:
/// a super-Gaussian `0.259 * exp(-((lambda - 1550.12)/44)^8)` sampled at
/// 0.1 nm over 1550.12 +/- 53 nm. Peak and width are calibrated so the
/// band average over +/-28.15 nm stays above 0.20 and the tails drop below
/// 0.01 at the edge of the 106 nm span. Replace with a measured CSV profile
/// via [`SpectralProfile::from_csv`] when real data is available.
pub fn default_profile() -> SpectralProfile {
    const PEAK: f64 = 0.259;
    const WIDTH_NM: f64 = 44.0;
    const ORDER: i32 = 8;
    const HALF_SPAN_NM: f64 = 53.0;
    const STEP_NM: f64 = 0.1;
    let half_steps = (HALF_SPAN_NM / STEP_NM).round() as i64;
    let mut wl = Vec::with_capacity((2 * half_steps + 1) as usize);
    let mut eff = Vec::with_capacity(wl.capacity());
    for i in -half_steps..=half_steps {
        let lambda = DEGENERATE_WAVELENGTH_NM + i as f64 * STEP_NM;
        let u = (lambda - DEGENERATE_WAVELENGTH_NM).abs() / WIDTH_NM;
        wl.push(lambda);
        eff.push(PEAK * (-u.powi(ORDER)).exp());
    }
    SpectralProfile::from_columns(wl, eff).expect("built-in profile is valid")
}

/// Converts a frequency in Hz to the vacuum wavelength in nm.
pub fn frequency_to_wavelength_nm(freq_hz: f64) -> f64 {
    SPEED_OF_LIGHT_M_S / freq_hz * 1e9
}

/// Converts a vacuum wavelength in nm to frequency in Hz.
pub fn wavelength_to_frequency_hz(lambda_nm: f64) -> f64 {
    SPEED_OF_LIGHT_M_S / (lambda_nm * 1e-9)
}

/// ITU channel number of a frequency, counted in 100 GHz units from
/// 190 THz (fractional for sub-100 GHz grids). Display convention only.
pub fn itu_channel_number(freq_hz: f64) -> f64 {
    (freq_hz - ITU_ANCHOR_HZ) / 100e9
}

/// Width of a channel in nm at its own center wavelength:
/// `dlambda = lambda^2 * dnu / c`.
pub fn channel_width_nm(spacing_hz: f64, lambda_center_nm: f64) -> f64 {
    lambda_center_nm * lambda_center_nm * 1e-9 * spacing_hz / SPEED_OF_LIGHT_M_S
}

/// Fill-factor-weighted mean collection efficiency over one channel window:
/// `eta = fill / width * integral of the profile over [center +/- width/2]`.
///
/// Windows reaching outside the profile support integrate the zero
/// extension, so the result can only shrink there.
pub fn effective_efficiency(
    profile: &SpectralProfile,
    lambda_center_nm: f64,
    width_nm: f64,
    fill_factor: f64,
) -> f64 {
    let half = width_nm / 2.0;
    fill_factor * profile.integrate(lambda_center_nm - half, lambda_center_nm + half) / width_nm
}

/// One frequency-symmetric channel pair: `freq_low + freq_high` equals twice
/// the grid center frequency exactly, so the two channels jointly carry one
/// entangled stream.
#[derive(Debug, Clone, Copy)]
pub struct ChannelPair {
    /// 1-based distance from the degenerate channel.
    pub index: u32,
    pub freq_low_hz: f64,
    pub freq_high_hz: f64,
    /// Wavelength of the high-frequency channel (shorter wavelength), nm.
    pub lambda_low_nm: f64,
    /// Wavelength of the low-frequency channel (longer wavelength), nm.
    pub lambda_high_nm: f64,
    pub width_nm_low: f64,
    pub width_nm_high: f64,
}

/// A symmetric WDM grid around a center frequency.
#[derive(Debug, Clone, Copy)]
pub struct WdmGrid {
    pub center_frequency_hz: f64,
    pub spacing_hz: f64,
    pub fill_factor: f64,
    pub num_pairs: u32,
}

impl WdmGrid {
    pub fn new(
        center_frequency_hz: f64,
        spacing_hz: f64,
        num_pairs: u32,
        fill_factor: f64,
    ) -> Result<Self, SpectralError> {
        if !(spacing_hz > 0.0 && spacing_hz.is_finite()) {
            return Err(SpectralError::NonPositiveSpacing(spacing_hz));
        }
        if !center_frequency_hz.is_finite() || center_frequency_hz <= 0.0 {
            return Err(SpectralError::InvalidCenterFrequency(center_frequency_hz));
        }
        if !(fill_factor > 0.0 && fill_factor <= 1.0) {
            return Err(SpectralError::FillFactorOutOfRange(fill_factor));
        }
        if num_pairs == 0 {
            return Err(SpectralError::NoPairs);
        }
        if num_pairs as f64 * spacing_hz >= center_frequency_hz {
            return Err(SpectralError::SpanExceedsCenter {
                span_hz: num_pairs as f64 * spacing_hz,
                center_hz: center_frequency_hz,
            });
        }
        Ok(Self { center_frequency_hz, spacing_hz, fill_factor, num_pairs })
    }

    /// Default channel-pair count for a spacing: as many pairs as fit in the
    /// source's usable half-bandwidth on each side of the center.
    pub fn default_num_pairs(spacing_hz: f64) -> u32 {
        (HALF_BANDWIDTH_HZ / spacing_hz).floor() as u32
    }

    /// Channel pair `j` counted outward from the center; `j = 0` is the
    /// degenerate channel and is rejected, it never carries a pair.
    pub fn pair(&self, index: u32) -> Result<ChannelPair, SpectralError> {
        if index == 0 {
            return Err(SpectralError::DegenerateChannel);
        }
        if index > self.num_pairs {
            return Err(SpectralError::PairOutOfRange { index, num_pairs: self.num_pairs });
        }
        let offset = index as f64 * self.spacing_hz;
        let freq_low = self.center_frequency_hz - offset;
        // mirror about the center so the pair sum hits 2c at the ulp level
        let freq_high = 2.0 * self.center_frequency_hz - freq_low;
        let lambda_high = frequency_to_wavelength_nm(freq_low);
        let lambda_low = frequency_to_wavelength_nm(freq_high);
        Ok(ChannelPair {
            index,
            freq_low_hz: freq_low,
            freq_high_hz: freq_high,
            lambda_low_nm: lambda_low,
            lambda_high_nm: lambda_high,
            width_nm_low: channel_width_nm(self.spacing_hz, lambda_low),
            width_nm_high: channel_width_nm(self.spacing_hz, lambda_high),
        })
    }

    /// All channel pairs, innermost first.
    pub fn pairs(&self) -> Vec<ChannelPair> {
        (1..=self.num_pairs).map(|j| self.pair(j).expect("index in range")).collect()
    }

    /// Like [`WdmGrid::pairs`], but rejects grids whose outer channels have
    /// no overlap with the profile support at all.
    pub fn pairs_strict(&self, profile: &SpectralProfile) -> Result<Vec<ChannelPair>, SpectralError> {
        let pairs = self.pairs();
        for p in &pairs {
            let lo = effective_efficiency(profile, p.lambda_low_nm, p.width_nm_low, 1.0);
            let hi = effective_efficiency(profile, p.lambda_high_nm, p.width_nm_high, 1.0);
            if lo == 0.0 && hi == 0.0 {
                return Err(SpectralError::NoSupport { index: p.index });
            }
        }
        Ok(pairs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::SmallRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn default_profile_hits_calibration_anchors() {
        let p = default_profile();
        assert!((p.value(DEGENERATE_WAVELENGTH_NM) - 0.259).abs() < 1e-12);
        // band average over +/- 28.15 nm stays at or above 0.20
        let mean = p.integrate(DEGENERATE_WAVELENGTH_NM - 28.15, DEGENERATE_WAVELENGTH_NM + 28.15)
            / 56.3;
        assert!(mean >= 0.20, "band mean {mean}");
        // negligible at the span edge, zero outside the sampled range
        assert!(p.value(DEGENERATE_WAVELENGTH_NM + 52.9) < 0.01);
        assert_eq!(p.value(DEGENERATE_WAVELENGTH_NM + 60.0), 0.0);
        assert_eq!(p.value(DEGENERATE_WAVELENGTH_NM - 60.0), 0.0);
    }

    #[test]
    fn profile_validation_rejects_bad_input() {
        assert!(matches!(
            SpectralProfile::new(&[(1550.0, 0.2)]),
            Err(SpectralError::TooFewSamples(1))
        ));
        assert!(matches!(
            SpectralProfile::new(&[(1550.0, 0.2), (1550.0, 0.2)]),
            Err(SpectralError::NonMonotonicWavelength(1))
        ));
        assert!(matches!(
            SpectralProfile::new(&[(1550.0, 0.2), (1551.0, 1.2)]),
            Err(SpectralError::EfficiencyOutOfRange { index: 1, .. })
        ));
    }

    #[test]
    fn csv_round_trip_and_header_enforcement() {
        let text = "wavelength_nm,efficiency\n1540.0,0.1\n1550.0,0.25\n1560.0,0.05\n";
        let p = SpectralProfile::from_csv(text).unwrap();
        assert_eq!(p.samples().count(), 3);
        assert!((p.value(1545.0) - 0.175).abs() < 1e-15);

        assert!(matches!(
            SpectralProfile::from_csv("lambda,eff\n1,2\n"),
            Err(SpectralError::Csv { .. })
        ));
        assert!(matches!(
            SpectralProfile::from_csv("wavelength_nm,efficiency\n1550.0,0.2\n1540.0,0.3\n"),
            Err(SpectralError::NonMonotonicWavelength(_))
        ));
    }

    #[test]
    fn grid_rejects_nonfinite_parameters() {
        assert!(matches!(
            WdmGrid::new(f64::NAN, 100e9, 1, 0.75),
            Err(SpectralError::InvalidCenterFrequency(_))
        ));
        assert!(matches!(
            WdmGrid::new(193.4e12, f64::NAN, 1, 0.75),
            Err(SpectralError::NonPositiveSpacing(_))
        ));
        assert!(matches!(
            WdmGrid::new(193.4e12, 100e9, 1, f64::NAN),
            Err(SpectralError::FillFactorOutOfRange(_))
        ));
    }

    #[test]
    fn grid_matches_itu_examples() {
        // 100 GHz, first pair: 193.3 / 193.5 THz = ITU channels 33 + 35
        let g = WdmGrid::new(193.4e12, 100e9, 66, 0.75).unwrap();
        let p1 = g.pair(1).unwrap();
        assert!((p1.freq_low_hz - 193.3e12).abs() < 1.0);
        assert!((p1.freq_high_hz - 193.5e12).abs() < 1.0);
        assert!((itu_channel_number(p1.freq_low_hz) - 33.0).abs() < 1e-6);
        assert!((itu_channel_number(p1.freq_high_hz) - 35.0).abs() < 1e-6);

        // channels 31 + 37 (193.1 / 193.7 THz) sit 300 GHz out: j = 3 on the
        // 100 GHz grid
        let p3 = g.pair(3).unwrap();
        assert!((itu_channel_number(p3.freq_low_hz) - 31.0).abs() < 1e-6);
        assert!((itu_channel_number(p3.freq_high_hz) - 37.0).abs() < 1e-6);

        // 200 GHz, third pair sits 600 GHz out: 192.8 / 194.0 THz
        let g200 = WdmGrid::new(193.4e12, 200e9, 8, 0.75).unwrap();
        let q3 = g200.pair(3).unwrap();
        assert!((q3.freq_low_hz - 192.8e12).abs() < 1.0);
        assert!((q3.freq_high_hz - 194.0e12).abs() < 1.0);

        assert!(matches!(g.pair(0), Err(SpectralError::DegenerateChannel)));
        assert!(matches!(g.pair(67), Err(SpectralError::PairOutOfRange { .. })));
    }

    #[test]
    fn pairing_is_exactly_frequency_symmetric() {
        let mut rng = SmallRng::seed_from_u64(7);
        for _ in 0..200 {
            let center = rng.random_range(100e12..400e12);
            let n = rng.random_range(1..200u32);
            // keep the span on the physical side of zero frequency
            let spacing = rng.random_range(1e9..0.9 * center / n as f64);
            let g = WdmGrid::new(center, spacing, n, 0.75).unwrap();
            for p in g.pairs() {
                let sum = p.freq_low_hz + p.freq_high_hz;
                let twice = 2.0 * center;
                assert!((sum - twice).abs() <= 2.0 * f64::EPSILON * twice);
                assert!(p.lambda_low_nm < p.lambda_high_nm);
            }
        }
    }

    #[test]
    fn width_matches_hand_arithmetic_and_round_trips() {
        // lambda^2 * dnu / c at 1550.12 nm
        assert!((channel_width_nm(100e9, 1550.12) - 0.801511829360297).abs() < 1e-12);
        assert!((channel_width_nm(12.5e9, 1550.12) - 0.100188978670037).abs() < 1e-13);
        assert_eq!(channel_width_nm(0.0, 1550.12), 0.0);

        // frequency reconstruction: dnu = width * c / lambda^2
        for spacing in [12.5e9, 25e9, 50e9, 100e9, 200e9, 2500e9] {
            let w = channel_width_nm(spacing, 1550.12);
            let back = w * SPEED_OF_LIGHT_M_S / (1550.12 * 1550.12 * 1e-9);
            assert!((back - spacing).abs() / spacing < 1e-9);
        }
    }

    #[test]
    fn effective_efficiency_on_flat_profile() {
        let flat = SpectralProfile::new(&[(1500.0, 0.20), (1600.0, 0.20)]).unwrap();
        assert!((effective_efficiency(&flat, 1550.0, 0.8, 0.75) - 0.15).abs() < 1e-12);
        let flat259 = SpectralProfile::new(&[(1500.0, 0.259), (1600.0, 0.259)]).unwrap();
        assert!((effective_efficiency(&flat259, 1550.0, 2.0, 0.75) - 0.19425).abs() < 1e-12);
        // window fully outside the support
        assert_eq!(effective_efficiency(&flat, 1700.0, 1.0, 0.75), 0.0);
    }

    #[test]
    fn effective_efficiency_is_linear_in_profile_scale() {
        let p = default_profile();
        let mut rng = SmallRng::seed_from_u64(11);
        for _ in 0..50 {
            let s: f64 = rng.random_range(0.0..1.0);
            let scaled = SpectralProfile::from_columns(
                p.samples().map(|(w, _)| w).collect(),
                p.samples().map(|(_, e)| e * s).collect(),
            )
            .unwrap();
            let center = rng.random_range(1500.0..1600.0);
            let width = rng.random_range(0.1..30.0);
            let a = effective_efficiency(&scaled, center, width, 0.75);
            let b = s * effective_efficiency(&p, center, width, 0.75);
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-30), "a={a} b={b}");
        }
    }

    #[test]
    fn widening_window_never_beats_fill_times_peak() {
        let p = default_profile();
        let fill = 0.75;
        let mut prev_cap_ok = true;
        for k in 1..=120 {
            let width = k as f64 * 0.5;
            let eta = effective_efficiency(&p, DEGENERATE_WAVELENGTH_NM, width, fill);
            prev_cap_ok &= eta <= fill * 0.259 + 1e-12;
        }
        assert!(prev_cap_ok);
    }

    #[test]
    fn strict_mode_rejects_unsupported_outer_channels() {
        let p = default_profile();
        // 2500 GHz * 5 pairs reaches 12.5 THz off-center: far outside support
        let g = WdmGrid::new(193.4e12, 2500e9, 5, 0.75).unwrap();
        assert!(matches!(g.pairs_strict(&p), Err(SpectralError::NoSupport { .. })));
        let ok = WdmGrid::new(193.4e12, 100e9, 66, 0.75).unwrap();
        assert_eq!(ok.pairs_strict(&p).unwrap().len(), 66);
    }

    #[test]
    fn interpolation_is_zero_outside_and_linear_inside() {
        let p = SpectralProfile::new(&[(1500.0, 0.0), (1510.0, 0.1), (1520.0, 0.3)]).unwrap();
        assert_eq!(p.value(1499.999), 0.0);
        assert_eq!(p.value(1520.001), 0.0);
        assert!((p.value(1505.0) - 0.05).abs() < 1e-15);
        assert!((p.value(1515.0) - 0.2).abs() < 1e-15);
        // integral of the full triangle-ish shape
        let total = p.integrate(1490.0, 1530.0);
        assert!((total - (0.5 + 2.0)).abs() < 1e-12);
    }
}
