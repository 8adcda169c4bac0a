//! Small statistics helpers: Wilson score intervals and Kolmogorov–Smirnov tests.

use serde::Serialize;

/// Two-sided 97.5% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Success fraction with a Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl Estimate {
    pub fn from_counts(successes: u64, trials: u64) -> Self {
        let (ci_lo, ci_hi) = wilson_interval(successes, trials, Z_95);
        Estimate {
            successes,
            trials,
            estimate: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
            ci_lo,
            ci_hi,
        }
    }

    pub fn overlaps(&self, other: &Estimate) -> bool {
        self.ci_lo <= other.ci_hi && other.ci_lo <= self.ci_hi
    }
}

/// Wilson score interval for `successes` out of `trials` at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // Clamp against rounding at p = 0 or 1 so the interval always contains p.
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

/// Outcome of a Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub effective_n: f64,
    pub p_value: f64,
}

impl KsOutcome {
    pub fn passes(&self, significance: f64) -> bool {
        self.p_value >= significance
    }
}

/// One-sample KS test of `samples` against a continuous `cdf`.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> KsOutcome {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = cdf(x);
            (f - k as f64 / n).max((k + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    KsOutcome {
        statistic,
        effective_n: n,
        p_value: kolmogorov_survival(statistic * n.sqrt()),
    }
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsOutcome {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut statistic = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        statistic = statistic.max((i as f64 / na - j as f64 / nb).abs());
    }
    let effective_n = na * nb / (na + nb);
    KsOutcome {
        statistic,
        effective_n,
        p_value: kolmogorov_survival(statistic * effective_n.sqrt()),
    }
}

/// `Pr[K > lambda]` for the limiting Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_reference_value() {
        // 180 / 200: closed form gives [0.8506, 0.9343].
        let e = Estimate::from_counts(180, 200);
        assert_eq!(e.estimate, 0.9);
        assert!((e.ci_lo - 0.850_6).abs() < 5e-4, "{}", e.ci_lo);
        assert!((e.ci_hi - 0.934_3).abs() < 5e-4, "{}", e.ci_hi);
    }

    #[test]
    fn wilson_edges() {
        let all = Estimate::from_counts(50, 50);
        assert_eq!((all.estimate, all.ci_hi), (1.0, 1.0));
        assert!(all.ci_lo < 1.0);
        let none = Estimate::from_counts(0, 100);
        assert_eq!((none.estimate, none.ci_lo), (0.0, 0.0));
        assert!(none.ci_hi > 0.0 && none.ci_hi < 0.05);
    }

    #[test]
    fn kolmogorov_tail_reference_points() {
        // Standard table: K_{0.05} = 1.3581, K_{0.001} = 1.9495.
        assert!((kolmogorov_survival(1.358_1) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_survival(1.949_5) - 0.001).abs() < 1e-5);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
    }

    #[test]
    fn ks_detects_shift() {
        let grid: Vec<f64> = (0..2000).map(|k| (k as f64 + 0.5) / 2000.0).collect();
        assert!(ks_one_sample(&grid, |x| x).passes(0.5));
        let shifted: Vec<f64> = grid.iter().map(|x| x * x).collect();
        assert!(!ks_one_sample(&shifted, |x| x).passes(0.001));
        assert!(ks_two_sample(&grid, &grid).statistic == 0.0);
        assert!(!ks_two_sample(&grid, &shifted).passes(0.001));
    }
}
