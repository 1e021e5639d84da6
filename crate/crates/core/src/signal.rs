//! Sample buffers, excitation noise, FIR plant design and frequency response.
//!
//! Everything here is a pure function of its arguments. Random sequences are
//! drawn from ChaCha8 seeded with a 64-bit seed, so a given [`NoiseSpec`]
//! produces the same samples on every platform.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Magnitudes below this are clamped before taking logarithms.
pub const MAGNITUDE_FLOOR: f64 = 1e-15;

/// Sliding regressor `(x[n], x[n-1], ..., x[n-L+1])`, newest sample first.
#[derive(Debug, Clone, PartialEq)]
pub struct TapDelayLine {
    taps: Vec<f64>,
}

impl TapDelayLine {
    /// A line of `length` taps, all exactly zero.
    pub fn new(length: usize) -> Result<Self> {
        if length == 0 {
            return Err(Error::invalid(
                "length",
                "tap delay line needs at least one tap",
            ));
        }
        Ok(Self {
            taps: vec![0.0; length],
        })
    }

    pub fn from_taps(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::invalid(
                "length",
                "tap delay line needs at least one tap",
            ));
        }
        Ok(Self { taps })
    }

    /// Shifts every tap one place towards the tail and stores `x` at the head.
    /// The oldest sample falls off the end.
    pub fn push(&mut self, x: f64) {
        let len = self.taps.len();
        self.taps.copy_within(0..len - 1, 1);
        self.taps[0] = x;
    }

    /// Value-returning form of [`TapDelayLine::push`].
    pub fn pushed(mut self, x: f64) -> Self {
        self.push(x);
        self
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Squared Euclidean norm of the taps.
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t * t).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    White,
    Ar1Colored,
    FirColored,
}

/// Description of an excitation sequence.
///
/// `ar_coefficient` is read only for [`NoiseKind::Ar1Colored`] and
/// `fir_coefficients` only for [`NoiseKind::FirColored`].
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub sigma: f64,
    pub ar_coefficient: f64,
    pub fir_coefficients: Vec<f64>,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn white(sigma: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::White,
            sigma,
            ar_coefficient: 0.0,
            fir_coefficients: Vec::new(),
            seed,
        }
    }

    pub fn ar1(ar_coefficient: f64, sigma: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::Ar1Colored,
            ar_coefficient,
            ..Self::white(sigma, seed)
        }
    }

    pub fn fir(fir_coefficients: Vec<f64>, sigma: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::FirColored,
            fir_coefficients,
            ..Self::white(sigma, seed)
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::invalid(
                "sigma",
                format!("must be > 0, got {}", self.sigma),
            ));
        }
        match self.kind {
            NoiseKind::White => {}
            NoiseKind::Ar1Colored => {
                let a = self.ar_coefficient;
                if !(a.is_finite() && a.abs() < 1.0) {
                    return Err(Error::invalid(
                        "ar_coefficient",
                        format!("AR(1) pole must satisfy |a| < 1, got {a}"),
                    ));
                }
            }
            NoiseKind::FirColored => {
                if self.fir_coefficients.is_empty() {
                    return Err(Error::invalid("fir_coefficients", "must not be empty"));
                }
                if self.fir_coefficients.iter().any(|c| !c.is_finite()) {
                    return Err(Error::invalid("fir_coefficients", "must be finite"));
                }
            }
        }
        Ok(())
    }

    /// Stationary variance of the generated process.
    pub fn stationary_variance(&self) -> f64 {
        let s2 = self.sigma * self.sigma;
        match self.kind {
            NoiseKind::White => s2,
            NoiseKind::Ar1Colored => s2 / (1.0 - self.ar_coefficient * self.ar_coefficient),
            NoiseKind::FirColored => s2 * self.fir_coefficients.iter().map(|c| c * c).sum::<f64>(),
        }
    }
}

/// `count` i.i.d. Gaussian(0, sigma^2) samples from ChaCha8 stream `stream`
/// of `seed`. Distinct streams of one seed are independent sequences.
pub fn gaussian_sequence(seed: u64, stream: u64, sigma: f64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..count)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sigma * z
        })
        .collect()
}

/// Generates `count` samples of the process described by `spec`.
pub fn generate_noise(spec: &NoiseSpec, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::invalid("count", "must be positive"));
    }
    spec.validate()?;
    let white = gaussian_sequence(spec.seed, 0, spec.sigma, count);
    Ok(match spec.kind {
        NoiseKind::White => white,
        NoiseKind::Ar1Colored => {
            let a = spec.ar_coefficient;
            let mut prev = 0.0;
            white
                .into_iter()
                .map(|w| {
                    prev = a * prev + w;
                    prev
                })
                .collect()
        }
        NoiseKind::FirColored => {
            let c = &spec.fir_coefficients;
            (0..count)
                .map(|n| {
                    c.iter()
                        .enumerate()
                        .take(n + 1)
                        .map(|(k, ck)| ck * white[n - k])
                        .sum()
                })
                .collect()
        }
    })
}

/// Linear-phase (Type I) high-pass FIR by the windowed-sinc method.
///
/// `cutoff_fn` is normalized so that 1 is the Nyquist frequency. The
/// Hamming-windowed low-pass prototype is scaled to unit DC gain, spectrally
/// inverted around the centre tap and finally scaled to unit gain at Nyquist.
pub fn design_highpass_fir(num_taps: usize, cutoff_fn: f64) -> Result<Vec<f64>> {
    if num_taps == 0 || num_taps.is_multiple_of(2) {
        return Err(Error::invalid(
            "num_taps",
            format!("high-pass design needs an odd positive tap count, got {num_taps}"),
        ));
    }
    if !(cutoff_fn > 0.0 && cutoff_fn < 1.0) {
        return Err(Error::invalid(
            "cutoff_fn",
            format!("must lie in (0, 1), got {cutoff_fn}"),
        ));
    }
    if num_taps == 1 {
        return Ok(vec![1.0]);
    }

    let center = (num_taps - 1) / 2;
    let span = (num_taps - 1) as f64;
    let mut lowpass: Vec<f64> = (0..num_taps)
        .map(|k| {
            let window = 0.54 - 0.46 * (2.0 * PI * k as f64 / span).cos();
            let m = k as f64 - center as f64;
            let ideal = if k == center {
                cutoff_fn
            } else {
                (PI * cutoff_fn * m).sin() / (PI * m)
            };
            window * ideal
        })
        .collect();
    let dc: f64 = lowpass.iter().sum();
    lowpass.iter_mut().for_each(|h| *h /= dc);

    let mut highpass: Vec<f64> = lowpass.iter().map(|h| -h).collect();
    highpass[center] += 1.0;

    let nyquist: f64 = highpass
        .iter()
        .enumerate()
        .map(|(k, h)| if k % 2 == 0 { *h } else { -*h })
        .sum::<f64>()
        .abs();
    highpass.iter_mut().for_each(|h| *h /= nyquist);

    // Both halves are computed independently above; mirror them so the
    // symmetry is exact in floating point.
    for k in 0..center {
        highpass[num_taps - 1 - k] = highpass[k];
    }
    Ok(highpass)
}

/// Magnitude response sampled on a uniform grid over `[0, pi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    /// Angular frequencies in radians/sample, strictly increasing.
    pub omegas: Vec<f64>,
    pub magnitude_db: Vec<f64>,
}

/// Evaluates the DTFT of `w` at `k_points` equally spaced frequencies from
/// 0 to pi inclusive.
pub fn frequency_response(w: &[f64], k_points: usize) -> Result<FrequencyResponse> {
    if k_points < 2 {
        return Err(Error::invalid(
            "k_points",
            "need at least two frequency points",
        ));
    }
    let omegas: Vec<f64> = (0..k_points)
        .map(|j| j as f64 * PI / (k_points - 1) as f64)
        .collect();
    let magnitude_db = omegas
        .iter()
        .map(|&omega| {
            let (re, im) = w.iter().enumerate().fold((0.0, 0.0), |(re, im), (k, wk)| {
                let phase = omega * k as f64;
                (re + wk * phase.cos(), im - wk * phase.sin())
            });
            20.0 * re.hypot(im).max(MAGNITUDE_FLOOR).log10()
        })
        .collect();
    Ok(FrequencyResponse {
        omegas,
        magnitude_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_shifts_towards_tail() {
        let line = TapDelayLine::new(3).unwrap();
        assert_eq!(line.taps(), &[0.0, 0.0, 0.0]);
        let line = line.pushed(5.0);
        assert_eq!(line.taps(), &[5.0, 0.0, 0.0]);
        let line = line.pushed(7.0);
        assert_eq!(line.taps(), &[7.0, 5.0, 0.0]);
    }

    #[test]
    fn push_past_capacity_discards_oldest() {
        let len = 5;
        let mut line = TapDelayLine::new(len).unwrap();
        for s in 1..=len + 1 {
            line.push(s as f64);
        }
        let expected: Vec<f64> = (2..=len + 1).rev().map(|s| s as f64).collect();
        assert_eq!(line.taps(), expected.as_slice());
    }

    #[test]
    fn zero_length_line_rejected() {
        assert!(TapDelayLine::new(0).is_err());
    }

    #[test]
    fn white_noise_moments() {
        let x = generate_noise(&NoiseSpec::white(1.0, 42), 100_000).unwrap();
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((0.95..=1.05).contains(&var), "var {var}");
    }

    #[test]
    fn ar1_with_zero_pole_is_white() {
        let white = generate_noise(&NoiseSpec::white(1.3, 9), 1000).unwrap();
        let ar = generate_noise(&NoiseSpec::ar1(0.0, 1.3, 9), 1000).unwrap();
        assert_eq!(white, ar);
    }

    #[test]
    fn ar1_stationary_variance() {
        let spec = NoiseSpec::ar1(0.9, 1.0, 3);
        let x = generate_noise(&spec, 1_000_000).unwrap();
        let n = x.len() as f64;
        let var = x.iter().map(|v| v * v).sum::<f64>() / n;
        let expected = 1.0 / (1.0 - 0.81);
        assert!((var - expected).abs() / expected < 0.05, "var {var}");
        assert!((spec.stationary_variance() - expected).abs() < 1e-12);
    }

    #[test]
    fn fir_coloring_is_causal_convolution() {
        let coeffs = vec![1.0, -0.5, 0.25];
        let spec = NoiseSpec::fir(coeffs.clone(), 2.0, 11);
        let white = gaussian_sequence(11, 0, 2.0, 50);
        let colored = generate_noise(&spec, 50).unwrap();
        for n in 0..50 {
            let mut acc = 0.0;
            for (k, c) in coeffs.iter().enumerate() {
                if n >= k {
                    acc += c * white[n - k];
                }
            }
            assert_eq!(colored[n], acc);
        }
    }

    #[test]
    fn noise_rejects_bad_input() {
        assert!(generate_noise(&NoiseSpec::white(1.0, 0), 0).is_err());
        assert!(generate_noise(&NoiseSpec::white(0.0, 0), 10).is_err());
        assert!(generate_noise(&NoiseSpec::ar1(1.0, 1.0, 0), 10).is_err());
        assert!(generate_noise(&NoiseSpec::ar1(-1.2, 1.0, 0), 10).is_err());
        assert!(generate_noise(&NoiseSpec::fir(vec![], 1.0, 0), 10).is_err());
    }

    #[test]
    fn streams_are_distinct() {
        let a = gaussian_sequence(5, 0, 1.0, 16);
        let b = gaussian_sequence(5, 1, 1.0, 16);
        assert_ne!(a, b);
        assert_eq!(a, gaussian_sequence(5, 0, 1.0, 16));
    }

    #[test]
    fn highpass_13_taps() {
        let h = design_highpass_fir(13, 0.4).unwrap();
        assert_eq!(h.len(), 13);
        for k in 0..13 {
            assert_eq!(h[k], h[12 - k]);
        }
        assert!(h.iter().sum::<f64>().abs() < 1e-3);
    }

    #[test]
    fn highpass_single_tap() {
        assert_eq!(design_highpass_fir(1, 0.3).unwrap(), vec![1.0]);
    }

    #[test]
    fn highpass_rejects_bad_arguments() {
        assert!(design_highpass_fir(12, 0.4).is_err());
        assert!(design_highpass_fir(0, 0.4).is_err());
        assert!(design_highpass_fir(13, 0.0).is_err());
        assert!(design_highpass_fir(13, 1.0).is_err());
    }

    #[test]
    fn impulse_is_allpass() {
        let fr = frequency_response(&[1.0], 64).unwrap();
        assert!(fr.magnitude_db.iter().all(|m| *m == 0.0));
        assert_eq!(fr.omegas[0], 0.0);
        assert_eq!(fr.omegas[63], PI);
    }

    #[test]
    fn averager_nulls_nyquist() {
        let fr = frequency_response(&[0.5, 0.5], 3).unwrap();
        assert!(fr.magnitude_db[0].abs() < 1e-12);
        // |H(pi)| = |0.5 - 0.5 e^{-i pi}| evaluates to ~6e-17 before clamping.
        assert_eq!(fr.magnitude_db[2], 20.0 * MAGNITUDE_FLOOR.log10());
    }

    #[test]
    fn highpass_response_edges() {
        let h = design_highpass_fir(13, 0.4).unwrap();
        let fr = frequency_response(&h, 257).unwrap();
        assert!(fr.magnitude_db[0] < -60.0, "dc {}", fr.magnitude_db[0]);
        assert!(fr.magnitude_db[256].abs() < 0.1);
    }

    #[test]
    fn frequency_response_needs_two_points() {
        assert!(frequency_response(&[1.0], 1).is_err());
    }
}
