//! Discrete-event time-tag simulator and coincidence analysis.
//!
//! Pairs are emitted as a homogeneous Poisson process. Each photon is
//! detected with its arm's efficiency, smeared by per-detector Gaussian
//! jitter, and the B photon additionally by the coherence-time broadening
//! of the pair's arrival-time difference. Dark counts are independent
//! Poisson processes per detector; a non-paralyzable dead time drops events
//! too close to the previous accepted one.
//!
//! Polarization is modeled as one uniformly random bit per pair, flipped on
//! the B side with probability `e_pol`; uncorrelated events carry uniform
//! bits. A coincidence whose bits disagree is an error, which makes true
//! pairs err with probability `e_pol` and accidentals with probability 1/2
//! — the two QBER contributions of the analytic model.
//!
//! Every event keeps its origin (pair id or dark) as ground truth for
//! tagging coincidences true/accidental; the external dump formats omit it,
//! matching what a real time tagger records.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp, Normal};
use thiserror::Error;

/// Time-difference bin width used for coincidence histograms, seconds.
pub const HISTOGRAM_BIN_S: f64 = 1e-12;

/// Default ceiling on the expected number of generated events.
pub const DEFAULT_MAX_EVENTS: f64 = 5e7;

const GAUSS_FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_4; // 2 sqrt(2 ln 2)
const DARK_ORIGIN: u32 = u32::MAX;

// Fixed stream labels deriving per-purpose generators from one seed.
const STREAM_PAIRS: u64 = 1;
const STREAM_DARK_A: u64 = 2;
const STREAM_DARK_B: u64 = 3;

pub mod validation;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{name} = {value} outside {range}")]
    ParameterOutOfRange { name: &'static str, value: f64, range: &'static str },
    #[error("expected event count {expected:.3e} exceeds the budget {budget:.3e}")]
    EventBudgetExceeded { expected: f64, budget: f64 },
}

/// Simulation parameters; rates in 1/s, times in seconds.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub pair_rate: f64,
    pub eta_a: f64,
    pub eta_b: f64,
    /// Jitter FWHM of each detector separately. A combined two-detector
    /// jitter `t` corresponds to `t / sqrt(2)` here.
    pub jitter_fwhm_per_detector_s: f64,
    /// FWHM of the pair's intrinsic arrival-time-difference spread.
    pub sigma_c_s: f64,
    pub dead_time_s: f64,
    /// Dark counts per second on each detector stream.
    pub dark_rate: f64,
    pub e_pol: f64,
    pub duration_s: f64,
    pub seed: u64,
    /// Budget on the expected event count across both streams.
    pub max_events: f64,
}

impl SimConfig {
    /// Expected generated events across both detectors before dead time.
    pub fn expected_events(&self) -> f64 {
        self.duration_s * (self.pair_rate * (self.eta_a + self.eta_b) + 2.0 * self.dark_rate)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let check_nonneg = |name: &'static str, value: f64| {
            if value >= 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(SimError::ParameterOutOfRange { name, value, range: "[0, inf)" })
            }
        };
        check_nonneg("pair_rate", self.pair_rate)?;
        check_nonneg("jitter_fwhm_per_detector_s", self.jitter_fwhm_per_detector_s)?;
        check_nonneg("sigma_c_s", self.sigma_c_s)?;
        check_nonneg("dead_time_s", self.dead_time_s)?;
        check_nonneg("dark_rate", self.dark_rate)?;
        for (name, value) in [("eta_a", self.eta_a), ("eta_b", self.eta_b)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SimError::ParameterOutOfRange { name, value, range: "[0, 1]" });
            }
        }
        if !(0.0..0.5).contains(&self.e_pol) {
            return Err(SimError::ParameterOutOfRange {
                name: "e_pol",
                value: self.e_pol,
                range: "[0, 0.5)",
            });
        }
        if !(self.duration_s > 0.0) {
            return Err(SimError::ParameterOutOfRange {
                name: "duration_s",
                value: self.duration_s,
                range: "(0, inf)",
            });
        }
        let expected = self.expected_events();
        if expected > self.max_events {
            return Err(SimError::EventBudgetExceeded { expected, budget: self.max_events });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detector {
    A,
    B,
}

/// One detection event.
#[derive(Debug, Clone, Copy)]
pub struct TimeTag {
    pub time_s: f64,
    /// Measured polarization bit in the shared analysis basis.
    pub outcome: bool,
    pub detector: Detector,
    origin: u32,
}

impl TimeTag {
    /// Ground-truth pair id, `None` for dark counts. Only the simulator
    /// knows this; dump formats omit it.
    pub fn origin_pair(&self) -> Option<u32> {
        (self.origin != DARK_ORIGIN).then_some(self.origin)
    }
}

/// The two time-sorted detector streams of one run.
#[derive(Debug, Clone)]
pub struct TimeTagStreams {
    pub a: Vec<TimeTag>,
    pub b: Vec<TimeTag>,
}

/// Coincidence-matching convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchMode {
    /// Events scanned in time order, each matched to its nearest available
    /// partner at most once.
    #[default]
    GreedyNearest,
    /// Every (A, B) combination inside the window counts.
    AllPairs,
}

/// Counts from one coincidence pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoincidenceResult {
    pub cc_total: u64,
    /// Coincidences whose events share a pair id (ground truth).
    pub cc_true_tagged: u64,
    /// Coincidences across different origins.
    pub cc_acc_tagged: u64,
    /// Coincidences with disagreeing polarization bits.
    pub cc_error: u64,
    pub singles_a: u64,
    pub singles_b: u64,
    /// Matched time differences `t_b - t_a`, binned at [`HISTOGRAM_BIN_S`].
    pub histogram: BTreeMap<i64, u64>,
}

fn stream_rng(seed: u64, label: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(label);
    rng
}

fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / GAUSS_FWHM_PER_SIGMA
}

/// Runs the event simulation, returning both time-sorted streams.
/// Identical configs produce identical streams; the three random processes
/// (pairs, dark A, dark B) draw from independent substreams of the seed.
pub fn simulate(config: &SimConfig) -> Result<TimeTagStreams, SimError> {
    config.validate()?;
    let mut a: Vec<TimeTag> = Vec::new();
    let mut b: Vec<TimeTag> = Vec::new();

    let jitter = Normal::new(0.0, fwhm_to_sigma(config.jitter_fwhm_per_detector_s))
        .expect("sigma >= 0");
    let coherence = Normal::new(0.0, fwhm_to_sigma(config.sigma_c_s)).expect("sigma >= 0");

    if config.pair_rate > 0.0 {
        let mut rng = stream_rng(config.seed, STREAM_PAIRS);
        let inter = Exp::new(config.pair_rate).expect("rate > 0");
        let mut t = 0.0;
        let mut pair_id: u32 = 0;
        loop {
            t += inter.sample(&mut rng);
            if t > config.duration_s {
                break;
            }
            let bit = rng.random_bool(0.5);
            if rng.random_bool(config.eta_a) {
                let ta = t + jitter.sample(&mut rng);
                if (0.0..=config.duration_s).contains(&ta) {
                    a.push(TimeTag { time_s: ta, outcome: bit, detector: Detector::A, origin: pair_id });
                }
            }
            if rng.random_bool(config.eta_b) {
                let err = config.e_pol > 0.0 && rng.random_bool(config.e_pol);
                let tb = t + jitter.sample(&mut rng) + coherence.sample(&mut rng);
                if (0.0..=config.duration_s).contains(&tb) {
                    b.push(TimeTag {
                        time_s: tb,
                        outcome: bit ^ err,
                        detector: Detector::B,
                        origin: pair_id,
                    });
                }
            }
            pair_id = pair_id.wrapping_add(1);
        }
    }

    for (stream, label, detector) in
        [(&mut a, STREAM_DARK_A, Detector::A), (&mut b, STREAM_DARK_B, Detector::B)]
    {
        if config.dark_rate > 0.0 {
            let mut rng = stream_rng(config.seed, label);
            let inter = Exp::new(config.dark_rate).expect("rate > 0");
            let mut t = 0.0;
            loop {
                t += inter.sample(&mut rng);
                if t > config.duration_s {
                    break;
                }
                let bit = rng.random_bool(0.5);
                stream.push(TimeTag { time_s: t, outcome: bit, detector, origin: DARK_ORIGIN });
            }
        }
    }

    for stream in [&mut a, &mut b] {
        stream.sort_by(|x, y| x.time_s.total_cmp(&y.time_s));
        if config.dead_time_s > 0.0 {
            apply_dead_time(stream, config.dead_time_s);
        }
    }
    Ok(TimeTagStreams { a, b })
}

// Non-paralyzable: an accepted event blinds the detector for `dead_time`;
// rejected events do not extend the blind window.
fn apply_dead_time(stream: &mut Vec<TimeTag>, dead_time: f64) {
    let mut last_accepted = f64::NEG_INFINITY;
    stream.retain(|tag| {
        if tag.time_s - last_accepted >= dead_time {
            last_accepted = tag.time_s;
            true
        } else {
            false
        }
    });
}

/// Pairs up the two streams within a full window `t_cc` (accepting
/// `|t_a - t_b| <= t_cc / 2`) and tags each coincidence with simulation
/// ground truth. `t_cc <= 0` matches nothing: the window has zero measure
/// in continuous time.
pub fn count_coincidences(streams: &TimeTagStreams, t_cc_s: f64, mode: MatchMode) -> CoincidenceResult {
    let mut result = CoincidenceResult {
        cc_total: 0,
        cc_true_tagged: 0,
        cc_acc_tagged: 0,
        cc_error: 0,
        singles_a: streams.a.len() as u64,
        singles_b: streams.b.len() as u64,
        histogram: BTreeMap::new(),
    };
    if t_cc_s <= 0.0 {
        return result;
    }
    let half = t_cc_s / 2.0;
    match mode {
        MatchMode::GreedyNearest => greedy_match(streams, half, &mut result),
        MatchMode::AllPairs => all_pairs_match(streams, half, &mut result),
    }
    result
}

fn record(result: &mut CoincidenceResult, x: &TimeTag, y: &TimeTag) {
    result.cc_total += 1;
    if x.origin != DARK_ORIGIN && x.origin == y.origin {
        result.cc_true_tagged += 1;
    } else {
        result.cc_acc_tagged += 1;
    }
    if x.outcome != y.outcome {
        result.cc_error += 1;
    }
    let bin = ((y.time_s - x.time_s) / HISTOGRAM_BIN_S).round() as i64;
    *result.histogram.entry(bin).or_insert(0) += 1;
}

fn greedy_match(streams: &TimeTagStreams, half: f64, result: &mut CoincidenceResult) {
    let (a, b) = (&streams.a, &streams.b);
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() && j < b.len() {
        let mut dt = b[j].time_s - a[i].time_s;
        if dt.abs() <= half {
            // nearest available partner for a[i]; skipped b's lie behind
            // every later a and cannot match anything else
            while j + 1 < b.len() {
                let next = b[j + 1].time_s - a[i].time_s;
                if next.abs() >= dt.abs() {
                    break;
                }
                j += 1;
                dt = next;
            }
            record(result, &a[i], &b[j]);
            i += 1;
            j += 1;
        } else if b[j].time_s < a[i].time_s {
            j += 1;
        } else {
            i += 1;
        }
    }
}

fn all_pairs_match(streams: &TimeTagStreams, half: f64, result: &mut CoincidenceResult) {
    let (a, b) = (&streams.a, &streams.b);
    let mut lo = 0usize;
    for ta in a {
        while lo < b.len() && b[lo].time_s < ta.time_s - half {
            lo += 1;
        }
        let mut j = lo;
        while j < b.len() && b[j].time_s <= ta.time_s + half {
            record(result, ta, &b[j]);
            j += 1;
        }
    }
}

/// Cross-correlation histogram of all pairwise time differences within
/// `+/- span`, plus a Gaussian FWHM estimate of the peak when one stands
/// out from the baseline.
#[derive(Debug, Clone)]
pub struct G2Histogram {
    /// Bin counts over `[-span, span]`, centered on zero delay.
    pub bins: Vec<u64>,
    pub bin_width_s: f64,
    pub span_s: f64,
    /// Least-squares Gaussian FWHM of the correlation peak, if fittable.
    pub fitted_fwhm_s: Option<f64>,
}

impl G2Histogram {
    /// Delay at the center of bin `i`, seconds.
    pub fn delay_at(&self, i: usize) -> f64 {
        (i as f64 - (self.bins.len() as f64 - 1.0) / 2.0) * self.bin_width_s
    }
}

/// Builds the g2-style histogram of all A-B time differences in
/// `[-span, span]` and fits the peak FWHM.
pub fn g2_histogram(streams: &TimeTagStreams, bin_width_s: f64, span_s: f64) -> G2Histogram {
    let half_bins = (span_s / bin_width_s).round() as i64;
    let n_bins = (2 * half_bins + 1) as usize;
    let mut bins = vec![0u64; n_bins];
    let (a, b) = (&streams.a, &streams.b);
    let mut lo = 0usize;
    let reach = span_s + bin_width_s / 2.0;
    for ta in a {
        while lo < b.len() && b[lo].time_s < ta.time_s - reach {
            lo += 1;
        }
        let mut j = lo;
        while j < b.len() && b[j].time_s <= ta.time_s + reach {
            let bin = ((b[j].time_s - ta.time_s) / bin_width_s).round() as i64;
            if bin.abs() <= half_bins {
                bins[(bin + half_bins) as usize] += 1;
            }
            j += 1;
        }
    }
    let fitted = fit_gaussian_fwhm(&bins, bin_width_s);
    G2Histogram { bins, bin_width_s, span_s, fitted_fwhm_s: fitted }
}

// Parabola fit to ln(counts - baseline) around the peak (Caruana's method).
// Baseline is the mean of the outer eighths of the histogram.
fn fit_gaussian_fwhm(bins: &[u64], bin_width: f64) -> Option<f64> {
    let n = bins.len();
    if n < 5 {
        return None;
    }
    let edge = (n / 8).max(1);
    let baseline: f64 = bins[..edge]
        .iter()
        .chain(bins[n - edge..].iter())
        .map(|&c| c as f64)
        .sum::<f64>()
        / (2 * edge) as f64;
    let (peak_idx, &peak) = bins.iter().enumerate().max_by_key(|&(_, &c)| c)?;
    let height = peak as f64 - baseline;
    // require a peak well above baseline fluctuations
    if height < 5.0 * (baseline + 1.0).sqrt() {
        return None;
    }
    let threshold = baseline + 0.2 * height;
    let mut lo = peak_idx;
    while lo > 0 && bins[lo - 1] as f64 > threshold {
        lo -= 1;
    }
    let mut hi = peak_idx;
    while hi + 1 < n && bins[hi + 1] as f64 > threshold {
        hi += 1;
    }
    if hi - lo + 1 < 3 {
        return None;
    }
    // least squares for ln y = c0 + c1 x + c2 x^2, x in bin units so the
    // normal matrix stays well scaled
    let (mut s0, mut s1, mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut t0, mut t1, mut t2) = (0.0, 0.0, 0.0);
    for (i, &count) in bins.iter().enumerate().take(hi + 1).skip(lo) {
        let y = count as f64 - baseline;
        if y <= 0.0 {
            continue;
        }
        let x = i as f64 - peak_idx as f64;
        let l = y.ln();
        let x2 = x * x;
        s0 += 1.0;
        s1 += x;
        s2 += x2;
        s3 += x2 * x;
        s4 += x2 * x2;
        t0 += l;
        t1 += x * l;
        t2 += x2 * l;
    }
    // Cramer's rule on the symmetric normal matrix
    // [s0 s1 s2; s1 s2 s3; s2 s3 s4] for the quadratic coefficient
    let det = s0 * (s2 * s4 - s3 * s3) - s1 * (s1 * s4 - s3 * s2) + s2 * (s1 * s3 - s2 * s2);
    if det.abs() < 1e-30 {
        return None;
    }
    let det_c2 = s0 * (s2 * t2 - s3 * t1) - s1 * (s1 * t2 - s2 * t1) + t0 * (s1 * s3 - s2 * s2);
    let c2 = det_c2 / det;
    if c2 >= 0.0 {
        return None;
    }
    let sigma_bins = (-0.5 / c2).sqrt();
    Some(sigma_bins * bin_width * GAUSS_FWHM_PER_SIGMA)
}

/// Klyshko efficiency from simulated counts: `CC / sqrt(S_A * S_B)`.
pub fn estimate_klyshko(result: &CoincidenceResult) -> f64 {
    result.cc_total as f64 / ((result.singles_a as f64) * (result.singles_b as f64)).sqrt()
}

/// Polarization visibility from simulated counts:
/// `V = 1 - 2 * errors / total`.
pub fn estimate_visibility(result: &CoincidenceResult) -> f64 {
    1.0 - 2.0 * result.cc_error as f64 / result.cc_total as f64
}

/// Merges both streams into one time-sorted sequence for dumping.
pub fn merge_streams(streams: &TimeTagStreams) -> Vec<TimeTag> {
    let mut all: Vec<TimeTag> = streams.a.iter().chain(streams.b.iter()).copied().collect();
    all.sort_by(|x, y| {
        x.time_s
            .total_cmp(&y.time_s)
            .then_with(|| (x.detector == Detector::B).cmp(&(y.detector == Detector::B)))
    });
    all
}

/// Binary record dump: per event a little-endian u64 timestamp in
/// picoseconds, one detector byte (0 = A, 1 = B) and one outcome byte.
pub fn write_tags_binary<W: Write>(mut w: W, tags: &[TimeTag]) -> io::Result<()> {
    for tag in tags {
        let ps = (tag.time_s * 1e12).round().max(0.0) as u64;
        w.write_all(&ps.to_le_bytes())?;
        w.write_all(&[matches!(tag.detector, Detector::B) as u8, tag.outcome as u8])?;
    }
    Ok(())
}

/// CSV alternative of the binary dump: `time_ps,detector,outcome`.
pub fn write_tags_csv<W: Write>(mut w: W, tags: &[TimeTag]) -> io::Result<()> {
    writeln!(w, "time_ps,detector,outcome")?;
    for tag in tags {
        let ps = (tag.time_s * 1e12).round().max(0.0) as u64;
        writeln!(
            w,
            "{},{},{}",
            ps,
            if matches!(tag.detector, Detector::A) { "A" } else { "B" },
            tag.outcome as u8
        )?;
    }
    Ok(())
}
