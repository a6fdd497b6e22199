//! Small statistics toolbox: compensated summation, sample summaries,
//! covariance, the Kolmogorov asymptotic p-value and a chi-square
//! goodness-of-fit p-value.

use crate::error::{Error, Result};

/// Kahan compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Mean/variance summary of a sample with standard errors.
///
/// `se_var` is the normal-theory standard error of the sample variance,
/// `s^2 * sqrt(2/(n-1))`; good enough for the ensemble sizes used here.
#[derive(Debug, Clone, Copy)]
pub struct SampleStats {
    pub n: usize,
    pub mean: f64,
    pub var: f64,
    pub se_mean: f64,
    pub se_var: f64,
}

impl SampleStats {
    pub fn from_sample(xs: &[f64]) -> Self {
        let n = xs.len();
        assert!(n >= 2, "need at least two observations");
        let mut s = KahanSum::new();
        for &x in xs {
            s.add(x);
        }
        let mean = s.value() / n as f64;
        let mut sq = KahanSum::new();
        for &x in xs {
            let d = x - mean;
            sq.add(d * d);
        }
        let var = sq.value() / (n - 1) as f64;
        SampleStats {
            n,
            mean,
            var,
            se_mean: (var / n as f64).sqrt(),
            se_var: var * (2.0 / (n - 1) as f64).sqrt(),
        }
    }
}

/// Unbiased sample covariance of two equal-length samples.
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    assert!(n >= 2);
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let mut s = KahanSum::new();
    for (&x, &y) in xs.iter().zip(ys) {
        s.add((x - mx) * (y - my));
    }
    s.value() / (n - 1) as f64
}

/// Normal-theory standard error of a sample covariance estimate:
/// sqrt((C_xx C_yy + C_xy^2)/n).
pub fn covariance_se(var_x: f64, var_y: f64, cov_xy: f64, n: usize) -> f64 {
    ((var_x * var_y + cov_xy * cov_xy) / n as f64).sqrt()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + statrs::function::erf::erf(x / std::f64::consts::SQRT_2))
}

/// Survival function of the Kolmogorov distribution, `P(K > t)`.
///
/// Uses the alternating series for t >= 1.18 and the theta-dual series
/// below it (the alternating series converges poorly for small t).
pub fn kolmogorov_sf(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t >= 1.18 {
        let mut sum = 0.0;
        for k in 1..=100 {
            let term = (-2.0 * (k as f64) * (k as f64) * t * t).exp();
            let signed = if k % 2 == 1 { term } else { -term };
            sum += signed;
            if term < 1e-16 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        let f = std::f64::consts::PI * std::f64::consts::PI / (8.0 * t * t);
        for k in 0..100 {
            let m = 2 * k + 1;
            let term = (-f * (m as f64) * (m as f64)).exp();
            sum += term;
            if term < 1e-16 {
                break;
            }
        }
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / t * sum;
        (1.0 - cdf).clamp(0.0, 1.0)
    }
}

/// One-sample Kolmogorov-Smirnov test of `samples` against the CDF `cdf`,
/// returning the asymptotic p-value.
pub fn ks_test_cdf(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("NaN in sample"));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    Ok(kolmogorov_sf(n.sqrt() * d))
}

/// Chi-square goodness-of-fit p-value for observed counts vs expected counts.
pub fn chi_square_pvalue(observed: &[u64], expected: &[f64]) -> Result<f64> {
    if observed.len() != expected.len() || observed.len() < 2 {
        return Err(Error::InvalidArgument(
            "need matching count/expectation vectors with >= 2 cells".into(),
        ));
    }
    let mut stat = 0.0;
    for (&o, &e) in observed.iter().zip(expected) {
        if e <= 0.0 {
            return Err(Error::InvalidArgument(
                "expected count must be positive".into(),
            ));
        }
        let d = o as f64 - e;
        stat += d * d / e;
    }
    let df = (observed.len() - 1) as f64;
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let chi = ChiSquared::new(df)
        .map_err(|e| Error::InvalidArgument(format!("chi-square setup: {e}")))?;
    Ok(1.0 - chi.cdf(stat))
}

/// Checks that a symmetric matrix is PSD up to `jitter` by attempting a
/// Cholesky factorization of `m + jitter*I`.
pub fn is_psd_within(m: &[Vec<f64>], jitter: f64) -> bool {
    let n = m.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[i][j] + if i == j { jitter } else { 0.0 };
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s < 0.0 {
                    return false;
                }
                l[i][j] = s.sqrt();
            } else if l[j][j] > 0.0 {
                l[i][j] = s / l[j][j];
            } else if s.abs() > jitter {
                return false;
            }
        }
    }
    true
}
