//! Synthetic per-packet OFDM channel estimates for the Bob and Eve links.
//!
//! Each link is a tapped delay line whose complex tap gains follow a
//! Gauss-Markov (AR(1)) recursion from packet to packet. The frequency
//! response on the active subcarriers plus i.i.d. complex Gaussian estimation
//! error gives the estimate the receiver would see. An attack schedule drawn
//! as i.i.d. Bernoulli(P_AI) decides which link produced each packet.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::label::{has_both_classes, TransmitterLabel};
use crate::rng::stream_rng;
use crate::trace::{TraceDataset, TraceRecord};

mod bins;

pub use bins::active_bins;

/// How many times a rejected attack schedule is redrawn before giving up.
pub const MAX_SCHEDULE_RETRIES: usize = 10_000;

const SCHEDULE_STREAM: u64 = 0x5C4E_D01E;
const NOISE_STREAM: u64 = 0x0015_E000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("invalid link model: {0}")]
    InvalidLinkModel(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("noise standard deviation must be >= 0, got {0}")]
    NegativeNoise(f64),
    #[error("could not draw an attack schedule with both transmitters in every training guard after {0} attempts")]
    ScheduleRetriesExceeded(usize),
}

/// Tapped-delay-line description of one transmitter-receiver link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkModel {
    /// Tap delays in samples, strictly increasing.
    pub tap_delays: Vec<usize>,
    /// Mean linear tap powers, summing to one.
    pub tap_powers: Vec<f64>,
    /// Per-packet AR(1) coefficient in `[0, 1]`. One means a static channel.
    pub temporal_correlation: f64,
    pub seed: u64,
}

impl LinkModel {
    pub fn new(
        tap_delays: Vec<usize>,
        tap_powers: Vec<f64>,
        temporal_correlation: f64,
        seed: u64,
    ) -> Result<Self, ChannelError> {
        let model = Self {
            tap_delays,
            tap_powers,
            temporal_correlation,
            seed,
        };
        model.validate()?;
        Ok(model)
    }

    /// Exponentially decaying power-delay profile, normalized to unit power.
    pub fn exponential(
        tap_delays: Vec<usize>,
        decay_per_sample: f64,
        temporal_correlation: f64,
        seed: u64,
    ) -> Result<Self, ChannelError> {
        let raw: Vec<f64> = tap_delays
            .iter()
            .map(|&d| (-(d as f64) * decay_per_sample).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        let powers = raw.into_iter().map(|p| p / total).collect();
        Self::new(tap_delays, powers, temporal_correlation, seed)
    }

    pub fn tap_count(&self) -> usize {
        self.tap_delays.len()
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |msg: String| Err(ChannelError::InvalidLinkModel(msg));
        if self.tap_delays.is_empty() {
            return bad("at least one tap is required".into());
        }
        if self.tap_delays.len() != self.tap_powers.len() {
            return bad(format!(
                "{} delays but {} powers",
                self.tap_delays.len(),
                self.tap_powers.len()
            ));
        }
        if self.tap_delays.windows(2).any(|w| w[0] >= w[1]) {
            return bad("tap delays must be strictly increasing".into());
        }
        if self
            .tap_powers
            .iter()
            .any(|&p| !(p > 0.0) || !p.is_finite())
        {
            return bad("tap powers must be positive and finite".into());
        }
        let total: f64 = self.tap_powers.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("tap powers sum to {total}, expected 1"));
        }
        if !(0.0..=1.0).contains(&self.temporal_correlation) {
            return bad(format!(
                "temporal correlation {} outside [0, 1]",
                self.temporal_correlation
            ));
        }
        Ok(())
    }

    fn validate_for_fft(&self, fft_size: usize) -> Result<(), ChannelError> {
        self.validate()?;
        if let Some(&d) = self.tap_delays.iter().find(|&&d| d >= fft_size) {
            return Err(ChannelError::InvalidLinkModel(format!(
                "tap delay {d} not below FFT size {fft_size}"
            )));
        }
        Ok(())
    }
}

/// Current tap gains of a link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkState {
    pub taps: Vec<Complex64>,
    pub packet_index: u64,
}

/// Complex estimate of the per-subcarrier gains of one packet.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub gains: Vec<Complex64>,
}

impl ChannelEstimate {
    pub fn new(gains: Vec<Complex64>) -> Self {
        Self { gains }
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.gains
            .iter()
            .all(|g| g.re.is_finite() && g.im.is_finite())
    }
}

/// Half-open packet range `[offset, offset + len)` that must contain both
/// transmitters for the schedule to be accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainGuard {
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub m_subcarriers: usize,
    pub fft_size: usize,
    pub n_packets: usize,
    /// Probability that a packet slot is taken by Eve.
    pub attack_intensity: f64,
    /// Per real/imaginary component standard deviation of the estimation error.
    pub noise_std: f64,
    pub bob_link: LinkModel,
    pub eve_link: LinkModel,
    pub packet_period_ms: f64,
    pub seed: u64,
    /// Packet ranges that must each contain both labels. The default guards
    /// the first ten packets.
    pub train_guards: Vec<TrainGuard>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "synthetic".into(),
            m_subcarriers: 48,
            fft_size: 64,
            n_packets: 5000,
            attack_intensity: 0.25,
            noise_std: 0.05,
            bob_link: LinkModel::exponential(vec![0, 2, 5, 9], 0.25, 1.0, 0xB0B)
                .expect("valid default Bob link"),
            eve_link: LinkModel::exponential(vec![0, 3, 7, 12, 15], 0.15, 1.0, 0xE7E)
                .expect("valid default Eve link"),
            packet_period_ms: 10.0,
            seed: 0,
            train_guards: vec![TrainGuard { offset: 0, len: 10 }],
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |msg: String| Err(ChannelError::InvalidScenario(msg));
        if self.m_subcarriers == 0 || self.m_subcarriers > self.fft_size {
            return bad(format!(
                "{} active subcarriers do not fit an FFT of size {}",
                self.m_subcarriers, self.fft_size
            ));
        }
        if self.n_packets < 2 {
            return bad(format!("need at least 2 packets, got {}", self.n_packets));
        }
        if !(self.attack_intensity > 0.0 && self.attack_intensity < 1.0) {
            return bad(format!(
                "attack intensity {} must lie strictly between 0 and 1",
                self.attack_intensity
            ));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return Err(ChannelError::NegativeNoise(self.noise_std));
        }
        for guard in &self.train_guards {
            if guard.len < 2 {
                return bad(format!(
                    "training guard {guard:?} must span at least 2 packets"
                ));
            }
            if guard.offset + guard.len > self.n_packets {
                return bad(format!(
                    "training guard {guard:?} exceeds the {} packets of the trace",
                    self.n_packets
                ));
            }
        }
        self.bob_link.validate_for_fft(self.fft_size)?;
        self.eve_link.validate_for_fft(self.fft_size)?;
        Ok(())
    }
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// Draws the initial tap gains: circular complex Gaussian with variance
/// equal to each tap's mean power.
pub fn init_link(model: &LinkModel) -> Result<LinkState, ChannelError> {
    model.validate()?;
    let mut rng = stream_rng(model.seed, 0);
    let taps = model
        .tap_powers
        .iter()
        .map(|&p| complex_gaussian(&mut rng, p))
        .collect();
    Ok(LinkState {
        taps,
        packet_index: 0,
    })
}

/// Advances the link by one packet: `h' = rho*h + sqrt(1 - rho^2)*w`.
///
/// The innovation stream is keyed on `(model.seed, packet_index)`, so the
/// result is a pure function of its inputs.
pub fn evolve_link(state: &LinkState, model: &LinkModel) -> Result<LinkState, ChannelError> {
    if state.taps.len() != model.tap_count() {
        return Err(ChannelError::InvalidLinkModel(format!(
            "state has {} taps, model has {}",
            state.taps.len(),
            model.tap_count()
        )));
    }
    let rho = model.temporal_correlation;
    let next_index = state.packet_index + 1;
    if rho == 1.0 {
        return Ok(LinkState {
            taps: state.taps.clone(),
            packet_index: next_index,
        });
    }
    let innovation = (1.0 - rho * rho).sqrt();
    let mut rng = stream_rng(model.seed, next_index);
    let taps = state
        .taps
        .iter()
        .zip(&model.tap_powers)
        .map(|(&h, &p)| h * rho + complex_gaussian(&mut rng, p) * innovation)
        .collect();
    Ok(LinkState {
        taps,
        packet_index: next_index,
    })
}

/// Phase-rotation table `exp(-j 2 pi d bin / N)` for every (bin, tap) pair.
struct SteeringTable {
    rows: Vec<Vec<Complex64>>,
}

impl SteeringTable {
    fn new(delays: &[usize], bins: &[i64], fft_size: usize) -> Self {
        let rows = bins
            .iter()
            .map(|&bin| {
                delays
                    .iter()
                    .map(|&d| {
                        // Reduce the phase index modulo N before scaling to keep
                        // the argument small.
                        let idx = (d as i64 * bin).rem_euclid(fft_size as i64) as f64;
                        Complex64::from_polar(1.0, -2.0 * PI * idx / fft_size as f64)
                    })
                    .collect()
            })
            .collect();
        Self { rows }
    }

    fn apply(&self, taps: &[Complex64]) -> ChannelEstimate {
        let gains = self
            .rows
            .iter()
            .map(|row| row.iter().zip(taps).map(|(s, h)| s * h).sum())
            .collect();
        ChannelEstimate { gains }
    }
}

/// Frequency response of the link on the active subcarriers.
pub fn freq_response(
    state: &LinkState,
    model: &LinkModel,
    config: &ScenarioConfig,
) -> Result<ChannelEstimate, ChannelError> {
    model.validate_for_fft(config.fft_size)?;
    if state.taps.len() != model.tap_count() {
        return Err(ChannelError::InvalidLinkModel(
            "state and model tap counts differ".into(),
        ));
    }
    let bins = active_bins(config.m_subcarriers, config.fft_size)?;
    Ok(SteeringTable::new(&model.tap_delays, &bins, config.fft_size).apply(&state.taps))
}

/// Adds i.i.d. complex Gaussian estimation error with per-component
/// standard deviation `noise_std`.
pub fn add_estimation_noise<R: Rng + ?Sized>(
    h: &ChannelEstimate,
    noise_std: f64,
    rng: &mut R,
) -> Result<ChannelEstimate, ChannelError> {
    if !(noise_std >= 0.0) {
        return Err(ChannelError::NegativeNoise(noise_std));
    }
    if noise_std == 0.0 {
        return Ok(h.clone());
    }
    let gains = h
        .gains
        .iter()
        .map(|&g| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            g + Complex64::new(re * noise_std, im * noise_std)
        })
        .collect();
    Ok(ChannelEstimate { gains })
}

/// Draws the Bernoulli(P_AI) transmitter schedule, redrawing until every
/// training guard sees both transmitters.
pub fn draw_schedule(config: &ScenarioConfig) -> Result<Vec<TransmitterLabel>, ChannelError> {
    config.validate()?;
    let mut rng = stream_rng(config.seed, SCHEDULE_STREAM);
    for _ in 0..MAX_SCHEDULE_RETRIES {
        let labels: Vec<TransmitterLabel> = (0..config.n_packets)
            .map(|_| {
                if rng.random::<f64>() < config.attack_intensity {
                    TransmitterLabel::Eve
                } else {
                    TransmitterLabel::Bob
                }
            })
            .collect();
        let accepted = config
            .train_guards
            .iter()
            .all(|g| has_both_classes(&labels[g.offset..g.offset + g.len]));
        if accepted {
            return Ok(labels);
        }
    }
    Err(ChannelError::ScheduleRetriesExceeded(MAX_SCHEDULE_RETRIES))
}

/// Generates one full trace. Both links evolve every packet; the scheduled
/// transmitter's response, plus estimation noise, is recorded.
pub fn synthesize_trace(config: &ScenarioConfig) -> Result<TraceDataset, ChannelError> {
    let labels = draw_schedule(config)?;
    let bins = active_bins(config.m_subcarriers, config.fft_size)?;
    let bob_table = SteeringTable::new(&config.bob_link.tap_delays, &bins, config.fft_size);
    let eve_table = SteeringTable::new(&config.eve_link.tap_delays, &bins, config.fft_size);

    let mut bob = init_link(&config.bob_link)?;
    let mut eve = init_link(&config.eve_link)?;
    let mut noise_rng = stream_rng(config.seed, NOISE_STREAM);
    let mut records = Vec::with_capacity(config.n_packets);
    for (k, &label) in labels.iter().enumerate() {
        if k > 0 {
            bob = evolve_link(&bob, &config.bob_link)?;
            eve = evolve_link(&eve, &config.eve_link)?;
        }
        let clean = match label {
            TransmitterLabel::Bob => bob_table.apply(&bob.taps),
            TransmitterLabel::Eve => eve_table.apply(&eve.taps),
        };
        let noisy = add_estimation_noise(&clean, config.noise_std, &mut noise_rng)?;
        records.push(TraceRecord {
            label,
            gains: noisy.gains,
        });
    }

    let mut metadata = BTreeMap::new();
    metadata.insert("scenario".to_string(), config.name.clone());
    metadata.insert("seed".to_string(), config.seed.to_string());
    metadata.insert("period_ms".to_string(), config.packet_period_ms.to_string());
    metadata.insert("fft_size".to_string(), config.fft_size.to_string());
    metadata.insert(
        "attack_intensity".to_string(),
        config.attack_intensity.to_string(),
    );
    metadata.insert("noise_std".to_string(), config.noise_std.to_string());
    Ok(
        TraceDataset::from_parts(config.m_subcarriers, records, metadata)
            .expect("synthesized records have the configured width"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_tap(seed: u64, rho: f64) -> LinkModel {
        LinkModel::new(vec![0], vec![1.0], rho, seed).unwrap()
    }

    fn full_grid_config(fft: usize) -> ScenarioConfig {
        ScenarioConfig {
            m_subcarriers: fft,
            fft_size: fft,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn init_rejects_bad_powers() {
        let m = LinkModel {
            tap_delays: vec![0, 1],
            tap_powers: vec![0.5, 0.6],
            temporal_correlation: 0.5,
            seed: 1,
        };
        assert!(matches!(
            init_link(&m),
            Err(ChannelError::InvalidLinkModel(_))
        ));
        let m = LinkModel {
            tap_delays: vec![3, 1],
            tap_powers: vec![0.5, 0.5],
            temporal_correlation: 0.5,
            seed: 1,
        };
        assert!(init_link(&m).is_err());
        assert!(LinkModel::new(vec![0], vec![1.0], 1.5, 0).is_err());
    }

    #[test]
    fn init_is_deterministic() {
        let m = single_tap(42, 0.9);
        assert_eq!(init_link(&m).unwrap(), init_link(&m).unwrap());
        assert_ne!(
            init_link(&m).unwrap(),
            init_link(&single_tap(43, 0.9)).unwrap()
        );
    }

    #[test]
    fn init_unit_power_over_seeds() {
        let n = 100_000;
        let mean_power: f64 = (0..n)
            .map(|s| init_link(&single_tap(s, 0.0)).unwrap().taps[0].norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((mean_power - 1.0).abs() < 0.02, "mean power {mean_power}");
    }

    #[test]
    fn static_link_never_changes() {
        let m = LinkModel::new(vec![0, 4], vec![0.7, 0.3], 1.0, 9).unwrap();
        let s0 = init_link(&m).unwrap();
        let s1 = evolve_link(&s0, &m).unwrap();
        assert_eq!(s0.taps, s1.taps);
        assert_eq!(s1.packet_index, 1);
    }

    #[test]
    fn white_link_decorrelates() {
        let m = single_tap(5, 0.0);
        let mut s = init_link(&m).unwrap();
        let n = 100_000;
        let mut xs = Vec::with_capacity(n);
        for _ in 0..n {
            xs.push(s.taps[0]);
            s = evolve_link(&s, &m).unwrap();
        }
        // Lag-one sample correlation of the real parts.
        let re: Vec<f64> = xs.iter().map(|c| c.re).collect();
        let mean = re.iter().sum::<f64>() / n as f64;
        let var = re.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
        let cov: f64 = re.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        assert!((cov / var).abs() < 0.02, "lag-1 correlation {}", cov / var);
    }

    #[test]
    fn ar1_preserves_tap_variance() {
        for rho in [0.0, 0.5, 0.95] {
            let m = LinkModel::new(vec![0, 3], vec![0.8, 0.2], rho, 77).unwrap();
            let mut s = init_link(&m).unwrap();
            let n = 100_000;
            let mut acc = [0.0; 2];
            for _ in 0..n {
                s = evolve_link(&s, &m).unwrap();
                acc[0] += s.taps[0].norm_sqr();
                acc[1] += s.taps[1].norm_sqr();
            }
            // High rho shrinks the effective sample count; widen accordingly.
            let tol = if rho > 0.9 { 0.06 } else { 0.02 };
            for (a, p) in acc.iter().zip(&m.tap_powers) {
                let v = a / n as f64;
                assert!((v / p - 1.0).abs() < tol, "rho {rho}: variance {v} vs {p}");
            }
        }
    }

    #[test]
    fn flat_channel_response() {
        let m = single_tap(1, 1.0);
        let cfg = ScenarioConfig::default();
        let state = LinkState {
            taps: vec![Complex64::new(1.0, 0.0)],
            packet_index: 0,
        };
        let h = freq_response(&state, &m, &cfg).unwrap();
        assert_eq!(h.len(), 48);
        assert!(h.gains.iter().all(|g| *g == Complex64::new(1.0, 0.0)));

        let g = Complex64::new(0.3, -1.2);
        let state = LinkState {
            taps: vec![g],
            packet_index: 0,
        };
        let h = freq_response(&state, &m, &cfg).unwrap();
        assert!(h.gains.iter().all(|x| (*x - g).norm() < 1e-15));
    }

    fn direct_dft(taps: &[(usize, Complex64)], fft: usize) -> Vec<Complex64> {
        // Zero-padded impulse response, then a textbook O(N^2) DFT.
        let mut impulse = vec![Complex64::new(0.0, 0.0); fft];
        for &(d, h) in taps {
            impulse[d] += h;
        }
        (0..fft)
            .map(|k| {
                impulse
                    .iter()
                    .enumerate()
                    .map(|(n, x)| {
                        x * Complex64::from_polar(1.0, -2.0 * PI * (k * n) as f64 / fft as f64)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn two_tap_response_matches_dft_and_has_period_four() {
        let m = LinkModel::new(vec![0, 16], vec![0.5, 0.5], 1.0, 3).unwrap();
        let cfg = full_grid_config(64);
        let state = init_link(&m).unwrap();
        let h = freq_response(&state, &m, &cfg).unwrap();
        let oracle = direct_dft(&[(0, state.taps[0]), (16, state.taps[1])], 64);
        for (a, b) in h.gains.iter().zip(&oracle) {
            assert!((a - b).norm() < 1e-9);
        }
        for k in 0..60 {
            assert!((h.gains[k] - h.gains[k + 4]).norm() < 1e-9);
        }
    }

    #[test]
    fn active_bins_follow_dft_oracle() {
        let m = LinkModel::exponential(vec![0, 2, 5, 9], 0.3, 1.0, 11).unwrap();
        let cfg = ScenarioConfig::default();
        let state = init_link(&m).unwrap();
        let h = freq_response(&state, &m, &cfg).unwrap();
        let taps: Vec<_> = m
            .tap_delays
            .iter()
            .copied()
            .zip(state.taps.iter().copied())
            .collect();
        let oracle = direct_dft(&taps, 64);
        let bins = active_bins(48, 64).unwrap();
        for (g, bin) in h.gains.iter().zip(bins) {
            let idx = bin.rem_euclid(64) as usize;
            assert!((g - oracle[idx]).norm() < 1e-9);
        }
    }

    #[test]
    fn noise_statistics() {
        let h = ChannelEstimate::new(vec![Complex64::new(0.5, -0.25); 10]);
        let mut rng = stream_rng(1, 2);
        assert_eq!(add_estimation_noise(&h, 0.0, &mut rng).unwrap(), h);
        assert!(add_estimation_noise(&h, -1.0, &mut rng).is_err());

        let sigma = 0.3;
        let n = 100_000;
        let (mut sum_re, mut sum_im, mut sq_re, mut sq_im) = (0.0, 0.0, 0.0, 0.0);
        let one = ChannelEstimate::new(vec![Complex64::new(0.5, -0.25)]);
        for _ in 0..n {
            let e = add_estimation_noise(&one, sigma, &mut rng).unwrap().gains[0] - one.gains[0];
            sum_re += e.re;
            sum_im += e.im;
            sq_re += e.re * e.re;
            sq_im += e.im * e.im;
        }
        let bound = 3.0 * sigma / (n as f64).sqrt();
        assert!((sum_re / n as f64).abs() < bound);
        assert!((sum_im / n as f64).abs() < bound);
        for sq in [sq_re, sq_im] {
            let var = sq / n as f64;
            assert!((var / (sigma * sigma) - 1.0).abs() < 0.02, "variance {var}");
        }
    }

    #[test]
    fn eve_fraction_tracks_attack_intensity() {
        let cfg = ScenarioConfig {
            n_packets: 1000,
            attack_intensity: 0.25,
            seed: 2024,
            ..ScenarioConfig::default()
        };
        let ds = synthesize_trace(&cfg).unwrap();
        let eve = ds.records.iter().filter(|r| r.label.is_eve()).count();
        let frac = eve as f64 / 1000.0;
        assert!((0.20..=0.30).contains(&frac), "Eve fraction {frac}");
    }

    #[test]
    fn first_packets_contain_both_transmitters() {
        for seed in 0..50 {
            let cfg = ScenarioConfig {
                n_packets: 200,
                attack_intensity: 0.05,
                seed,
                ..ScenarioConfig::default()
            };
            let ds = synthesize_trace(&cfg).unwrap();
            let first: Vec<_> = ds.records[..10].iter().map(|r| r.label).collect();
            assert!(has_both_classes(&first));
        }
    }

    #[test]
    fn synthesis_is_deterministic() {
        let cfg = ScenarioConfig {
            n_packets: 300,
            seed: 99,
            ..ScenarioConfig::default()
        };
        assert_eq!(
            synthesize_trace(&cfg).unwrap(),
            synthesize_trace(&cfg).unwrap()
        );
    }

    #[test]
    fn impossible_guard_exhausts_retries() {
        let cfg = ScenarioConfig {
            n_packets: 100,
            attack_intensity: 1e-9,
            train_guards: vec![TrainGuard { offset: 0, len: 2 }],
            ..ScenarioConfig::default()
        };
        assert_eq!(
            synthesize_trace(&cfg),
            Err(ChannelError::ScheduleRetriesExceeded(MAX_SCHEDULE_RETRIES))
        );
    }

    #[test]
    fn independent_links_are_spatially_decorrelated() {
        // Independent link seeds with fast fading: sequences of first-bin gains
        // over 10^4 packets should be nearly uncorrelated.
        let bob = LinkModel::exponential(vec![0, 2, 5], 0.2, 0.5, 1).unwrap();
        let eve = LinkModel::exponential(vec![0, 2, 5], 0.2, 0.5, 2).unwrap();
        let cfg = ScenarioConfig::default();
        let (mut sb, mut se) = (init_link(&bob).unwrap(), init_link(&eve).unwrap());
        let n = 10_000;
        let (mut xb, mut xe) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for _ in 0..n {
            xb.push(freq_response(&sb, &bob, &cfg).unwrap().gains[0].re);
            xe.push(freq_response(&se, &eve, &cfg).unwrap().gains[0].re);
            sb = evolve_link(&sb, &bob).unwrap();
            se = evolve_link(&se, &eve).unwrap();
        }
        let mb = xb.iter().sum::<f64>() / n as f64;
        let me = xe.iter().sum::<f64>() / n as f64;
        let cov: f64 = xb.iter().zip(&xe).map(|(a, b)| (a - mb) * (b - me)).sum();
        let vb: f64 = xb.iter().map(|a| (a - mb).powi(2)).sum();
        let ve: f64 = xe.iter().map(|b| (b - me).powi(2)).sum();
        let corr = cov / (vb * ve).sqrt();
        assert!(corr.abs() < 0.05, "cross correlation {corr}");
    }
}
