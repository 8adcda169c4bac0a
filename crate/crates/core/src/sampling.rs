//! PDF-bounded utility distributions on `[0, 1]` and seeded random streams.
//!
//! Every sample is produced by inverse-CDF transform of a uniform variate, so
//! a stream plus a distribution fully determines the sampled values.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Name and version of the generator behind [`SeedStream`]. Changing either
/// changes every sampled instance.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9, seed_from_u64 + set_stream)";

pub const QUANTILE_TOLERANCE: f64 = 1e-12;
pub const QUANTILE_MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error("unknown distribution `{0}` (expected `uniform` or `linear:a=<value>`)")]
    UnknownFamily(String),
    #[error("linear density parameter a = {0} must lie in (0, 2)")]
    InvalidSlope(f64),
    #[error("probability {0} must lie strictly inside (0, 1)")]
    ProbabilityOutOfRange(f64),
    #[error("truncation point c = {0} must lie in (0, 1]")]
    InvalidCutoff(f64),
    #[error("order statistic needs k >= 1")]
    ZeroDraws,
    #[error("matrix dimensions must be positive, got {n} x {m}")]
    EmptyMatrix { n: usize, m: usize },
}

/// A distribution on `[0, 1]` whose density is bounded in `[alpha, beta]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum DistributionSpec {
    /// Uniform on `[0, 1]`.
    Uniform,
    /// Density `a + 2(1 - a) x` for `a` in `(0, 2)`.
    Linear { a: f64 },
}

impl DistributionSpec {
    pub fn linear(a: f64) -> Result<Self, SamplingError> {
        if a > 0.0 && a < 2.0 {
            Ok(DistributionSpec::Linear { a })
        } else {
            Err(SamplingError::InvalidSlope(a))
        }
    }

    /// Lower density bound.
    pub fn alpha(&self) -> f64 {
        match *self {
            DistributionSpec::Uniform => 1.0,
            DistributionSpec::Linear { a } => a.min(2.0 - a),
        }
    }

    /// Upper density bound.
    pub fn beta(&self) -> f64 {
        match *self {
            DistributionSpec::Uniform => 1.0,
            DistributionSpec::Linear { a } => a.max(2.0 - a),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DistributionSpec::Uniform => 0.5,
            DistributionSpec::Linear { a } => a / 2.0 + 2.0 * (1.0 - a) / 3.0,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        match *self {
            DistributionSpec::Uniform => 1.0,
            DistributionSpec::Linear { a } => a + 2.0 * (1.0 - a) * x,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match *self {
            DistributionSpec::Uniform => x,
            DistributionSpec::Linear { a } => a * x + (1.0 - a) * x * x,
        }
    }

    /// Closed-form `F^{-1}(p)` for `p` in `[0, 1]`.
    pub fn inverse_cdf(&self, p: f64) -> f64 {
        match *self {
            DistributionSpec::Uniform => p,
            // Root of (1-a) x^2 + a x - p = 0 in the cancellation-free form.
            DistributionSpec::Linear { a } => {
                let disc = a * a + 4.0 * (1.0 - a) * p;
                (2.0 * p / (a + disc.max(0.0).sqrt())).clamp(0.0, 1.0)
            }
        }
    }

    /// Threshold `tau` with `Pr[X <= tau] = p`.
    pub fn quantile(&self, p: f64) -> Result<f64, SamplingError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(SamplingError::ProbabilityOutOfRange(p));
        }
        Ok(self.inverse_cdf(p))
    }

    /// Spot-checks the density bounds on a grid and the mean by Simpson
    /// quadrature. Returns the worst mean error on success.
    pub fn check_metadata(&self) -> Result<f64, String> {
        let (alpha, beta) = (self.alpha(), self.beta());
        if !(alpha > 0.0 && alpha <= beta) {
            return Err(format!("bad density bounds [{alpha}, {beta}]"));
        }
        const GRID: usize = 1000;
        for k in 0..=GRID {
            let x = k as f64 / GRID as f64;
            let f = self.pdf(x);
            if f < alpha - 1e-12 || f > beta + 1e-12 {
                return Err(format!("density {f} at x = {x} escapes [{alpha}, {beta}]"));
            }
        }
        let quad = simpson(|x| x * self.pdf(x), 0.0, 1.0, 2000);
        let err = (quad - self.mean()).abs();
        if err > 1e-9 {
            return Err(format!("mean {} but quadrature gives {quad}", self.mean()));
        }
        Ok(err)
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistributionSpec::Uniform => write!(f, "uniform"),
            DistributionSpec::Linear { a } => write!(f, "linear:a={a}"),
        }
    }
}

impl FromStr for DistributionSpec {
    type Err = SamplingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "uniform" {
            return Ok(DistributionSpec::Uniform);
        }
        let a = s
            .strip_prefix("linear:a=")
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| SamplingError::UnknownFamily(s.to_owned()))?;
        DistributionSpec::linear(a)
    }
}

impl From<DistributionSpec> for String {
    fn from(d: DistributionSpec) -> Self {
        d.to_string()
    }
}

impl TryFrom<String> for DistributionSpec {
    type Error = SamplingError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Generic inverse of a monotone CDF on `[0, 1]` by bisection.
pub fn quantile_by_bisection(cdf: impl Fn(f64) -> f64, p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..QUANTILE_MAX_ITERATIONS {
        if hi - lo <= QUANTILE_TOLERANCE {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let intervals = intervals + intervals % 2;
    let h = (b - a) / intervals as f64;
    let inner: f64 = (1..intervals)
        .map(|k| {
            let weight = if k % 2 == 1 { 4.0 } else { 2.0 };
            weight * f(a + k as f64 * h)
        })
        .sum();
    (f(a) + inner + f(b)) * h / 3.0
}

/// Identifies one reproducible random stream: a 64-bit root seed plus a
/// stream index. Equal `(root, index)` pairs yield bit-identical samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedStream {
    pub root: u64,
    pub index: u64,
}

impl SeedStream {
    pub fn new(root: u64, index: u64) -> Self {
        SeedStream { root, index }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.root);
        rng.set_stream(self.index);
        rng
    }

    /// Independent child stream: the root is a hash of `(root, index)`.
    pub fn substream(&self, index: u64) -> SeedStream {
        SeedStream::new(mix64(self.root, self.index), index)
    }
}

/// SplitMix64 finalizer over the pair.
fn mix64(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform variate in `[0, 1)`.
#[inline]
pub fn uniform01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

/// `n x m` i.i.d. utilities, filled row by row.
pub fn sample_matrix<R: RngCore + ?Sized>(
    spec: &DistributionSpec,
    n: usize,
    m: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>, SamplingError> {
    if n == 0 || m == 0 {
        return Err(SamplingError::EmptyMatrix { n, m });
    }
    Ok((0..n)
        .map(|_| (0..m).map(|_| spec.inverse_cdf(uniform01(rng))).collect())
        .collect())
}

/// One draw from `D` conditioned on `[0, c]`, as `F^{-1}(U F(c))`.
pub fn sample_conditional_below<R: RngCore + ?Sized>(
    spec: &DistributionSpec,
    c: f64,
    rng: &mut R,
) -> Result<f64, SamplingError> {
    check_cutoff(c)?;
    let u = uniform01(rng);
    Ok(spec.inverse_cdf(u * spec.cdf(c)).min(c))
}

/// Maximum of `k` independent draws from `D` conditioned on `[0, c]`.
///
/// Uses a single uniform: the maximum has CDF `(F(x)/F(c))^k` on `[0, c]`,
/// so it equals `F^{-1}(F(c) U^{1/k})`.
pub fn sample_max_of_k<R: RngCore + ?Sized>(
    spec: &DistributionSpec,
    c: f64,
    k: usize,
    rng: &mut R,
) -> Result<f64, SamplingError> {
    check_cutoff(c)?;
    if k == 0 {
        return Err(SamplingError::ZeroDraws);
    }
    let u = uniform01(rng).powf(1.0 / k as f64);
    Ok(spec.inverse_cdf(u * spec.cdf(c)).min(c))
}

fn check_cutoff(c: f64) -> Result<(), SamplingError> {
    if c > 0.0 && c <= 1.0 {
        Ok(())
    } else {
        Err(SamplingError::InvalidCutoff(c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINEAR_HALF: DistributionSpec = DistributionSpec::Linear { a: 0.5 };

    #[test]
    fn metadata_of_builtin_families() {
        let u = DistributionSpec::Uniform;
        assert_eq!((u.alpha(), u.beta(), u.mean()), (1.0, 1.0, 0.5));
        assert_eq!((LINEAR_HALF.alpha(), LINEAR_HALF.beta()), (0.5, 1.5));
        assert!((LINEAR_HALF.mean() - 7.0 / 12.0).abs() < 1e-15);
        for spec in [u, LINEAR_HALF, DistributionSpec::Linear { a: 1.7 }, DistributionSpec::Linear { a: 0.05 }] {
            spec.check_metadata().unwrap();
        }
        let falling = DistributionSpec::Linear { a: 1.5 };
        assert_eq!((falling.alpha(), falling.beta()), (0.5, 1.5));
    }

    #[test]
    fn parse_and_display() {
        assert_eq!("uniform".parse::<DistributionSpec>().unwrap(), DistributionSpec::Uniform);
        assert_eq!("linear:a=0.5".parse::<DistributionSpec>().unwrap(), LINEAR_HALF);
        assert_eq!(LINEAR_HALF.to_string(), "linear:a=0.5");
        assert!("linear:a=2".parse::<DistributionSpec>().is_err());
        assert!("normal".parse::<DistributionSpec>().is_err());
        let json = serde_json::to_string(&LINEAR_HALF).unwrap();
        assert_eq!(json, "\"linear:a=0.5\"");
        assert_eq!(serde_json::from_str::<DistributionSpec>(&json).unwrap(), LINEAR_HALF);
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(DistributionSpec::Uniform.quantile(0.125).unwrap(), 0.125);
        // 0.5x + 0.5x^2 = 0.5  =>  x = (sqrt(5) - 1) / 2.
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        let q = LINEAR_HALF.quantile(0.5).unwrap();
        assert!((q - golden).abs() < 1e-12);
        let bisected = quantile_by_bisection(|x| LINEAR_HALF.cdf(x), 0.5);
        assert!((bisected - golden).abs() < 1e-12);
        for bad in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(DistributionSpec::Uniform.quantile(bad).is_err());
        }
    }

    #[test]
    fn inverse_property_on_grid() {
        for spec in [DistributionSpec::Uniform, LINEAR_HALF, DistributionSpec::Linear { a: 1.9 }] {
            for k in 1..1000 {
                let p = k as f64 / 1000.0;
                let x = spec.quantile(p).unwrap();
                assert!((spec.cdf(x) - p).abs() < 1e-9, "{spec} p={p}");
                let b = quantile_by_bisection(|t| spec.cdf(t), p);
                assert!((x - b).abs() < 1e-11, "{spec} p={p}: {x} vs {b}");
            }
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let s = SeedStream::new(7, 3);
        let a = sample_matrix(&LINEAR_HALF, 3, 5, &mut s.rng()).unwrap();
        let b = sample_matrix(&LINEAR_HALF, 3, 5, &mut s.rng()).unwrap();
        assert_eq!(a, b);
        let c = sample_matrix(&LINEAR_HALF, 3, 5, &mut SeedStream::new(7, 4).rng()).unwrap();
        assert_ne!(a, c);
        assert_ne!(s.substream(0), s.substream(1));
        assert_ne!(s.substream(0).root, SeedStream::new(7, 4).substream(0).root);
        assert!(a.iter().flatten().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn argument_guards() {
        let mut rng = SeedStream::new(1, 0).rng();
        let u = DistributionSpec::Uniform;
        assert!(sample_matrix(&u, 0, 3, &mut rng).is_err());
        assert_eq!(sample_conditional_below(&u, 0.0, &mut rng), Err(SamplingError::InvalidCutoff(0.0)));
        assert_eq!(sample_max_of_k(&u, 1.0, 0, &mut rng), Err(SamplingError::ZeroDraws));
        assert!(sample_max_of_k(&u, 1.5, 1, &mut rng).is_err());
    }

    #[test]
    fn conditional_samples_respect_cutoff() {
        let mut rng = SeedStream::new(11, 0).rng();
        for _ in 0..10_000 {
            let x = sample_conditional_below(&LINEAR_HALF, 0.3, &mut rng).unwrap();
            assert!((0.0..=0.3).contains(&x));
            let y = sample_max_of_k(&LINEAR_HALF, 0.3, 4, &mut rng).unwrap();
            assert!((0.0..=0.3).contains(&y));
        }
    }
}
