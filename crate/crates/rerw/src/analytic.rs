//! Closed-form constants of the walk: the drift factor `gamma_n`, the
//! martingale scale `a_n`, the partial sums `v_n = sum a_k^2` and
//! `w_n = sum a_k`, the limit variances and covariance kernels of the three
//! regimes, the limit matrices of the two-dimensional martingale, and the
//! first two moments of the superdiffusive limit L_c.
//!
//! Every gamma-function ratio is evaluated through log-gamma differences;
//! raw arguments never reach `exp` before cancellation, so n up to 10^8 is
//! safe. Gamma poles at excluded parameter corners return errors naming the
//! offending argument.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Regime, WalkParams};
use crate::stats::KahanSum;

fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0, "ln_gamma argument {x} must be positive");
    statrs::function::gamma::ln_gamma(x)
}

fn require_regime(params: &WalkParams, required: Regime) -> Result<()> {
    let actual = params.regime();
    if actual == required {
        Ok(())
    } else {
        Err(Error::WrongRegime {
            required: required.as_str(),
            actual: actual.as_str(),
        })
    }
}

/// `gamma_n = 1 + (a+c)/((c+1)n - c)`, the one-step multiplier of
/// `E[Y_{n+1} | F_n] = gamma_n Y_n`. Algebraically equal to
/// `(n + a*lambda)/(n - c*lambda)`.
pub fn gamma_n(params: &WalkParams, n: u64) -> f64 {
    assert!(n >= 1);
    1.0 + (params.a() + params.c()) / params.total_weight(n)
}

/// `a_n = prod_{k<n} gamma_k^{-1}
///      = Gamma(n - c*lambda) Gamma(1 + a*lambda) / (Gamma(n + a*lambda) Gamma(lambda))`,
/// evaluated via log-gamma differences.
pub fn a_n(params: &WalkParams, n: u64) -> Result<f64> {
    assert!(n >= 1);
    let (a, c, lam) = (params.a(), params.c(), params.lambda());
    let one_plus_a_lam = 1.0 + a * lam;
    if one_plus_a_lam <= 0.0 {
        // only reachable at p = 0, c = 0
        return Err(Error::GammaPole {
            name: "1 + a*lambda",
            value: one_plus_a_lam,
        });
    }
    let nf = n as f64;
    Ok((ln_gamma(nf - c * lam) + ln_gamma(one_plus_a_lam)
        - ln_gamma(nf + a * lam)
        - ln_gamma(lam))
    .exp())
}

/// Incremental producer of a_k along a walk: `a_{k+1} = a_k / gamma_k`,
/// re-anchored to the log-gamma value every 2^16 steps so multiplicative
/// rounding cannot accumulate over 10^8-step runs.
#[derive(Debug, Clone)]
pub struct AnSequence {
    params: WalkParams,
    k: u64,
    a_k: f64,
    // ln Gamma(1 + a*lambda) - ln Gamma(lambda), the n-independent part
    ln_const: f64,
}

const AN_ANCHOR_INTERVAL: u64 = 1 << 16;

impl AnSequence {
    pub fn new(params: WalkParams) -> Result<Self> {
        let (a, lam) = (params.a(), params.lambda());
        if 1.0 + a * lam <= 0.0 {
            return Err(Error::GammaPole {
                name: "1 + a*lambda",
                value: 1.0 + a * lam,
            });
        }
        Ok(AnSequence {
            params,
            k: 1,
            a_k: 1.0,
            ln_const: ln_gamma(1.0 + a * lam) - ln_gamma(lam),
        })
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    /// a_k at the current index.
    pub fn current(&self) -> f64 {
        self.a_k
    }

    /// gamma_k at the current index.
    pub fn gamma(&self) -> f64 {
        gamma_n(&self.params, self.k)
    }

    /// Advances to k+1.
    pub fn advance(&mut self) {
        self.a_k /= self.gamma();
        self.k += 1;
        if self.k % AN_ANCHOR_INTERVAL == 0 {
            let (a, c, lam) = (self.params.a(), self.params.c(), self.params.lambda());
            let nf = self.k as f64;
            self.a_k =
                (ln_gamma(nf - c * lam) - ln_gamma(nf + a * lam) + self.ln_const).exp();
        }
    }
}

/// Partial sums `v_n = sum_{k<=n} a_k^2` and `w_n = sum_{k<=n} a_k` by
/// compensated streaming summation (no closed form exists at finite n).
pub fn vn_wn(params: &WalkParams, n: u64) -> Result<(f64, f64)> {
    assert!(n >= 1);
    let mut seq = AnSequence::new(*params)?;
    let mut v = KahanSum::new();
    let mut w = KahanSum::new();
    loop {
        let a_k = seq.current();
        v.add(a_k * a_k);
        w.add(a_k);
        if seq.k() == n {
            break;
        }
        seq.advance();
    }
    Ok((v.value(), w.value()))
}

/// Diffusive-regime limit of `v_n / n^{1-2(a+c)*lambda}`:
/// `(1/(1-2(a+c)*lambda)) * (Gamma(1+a*lambda)/Gamma(lambda))^2`.
pub fn vn_diffusive_limit(params: &WalkParams) -> Result<f64> {
    require_regime(params, Regime::Diffusive)?;
    let (a, c, lam) = (params.a(), params.c(), params.lambda());
    if 1.0 + a * lam <= 0.0 {
        return Err(Error::GammaPole {
            name: "1 + a*lambda",
            value: 1.0 + a * lam,
        });
    }
    let ratio = (ln_gamma(1.0 + a * lam) - ln_gamma(lam)).exp();
    Ok(ratio * ratio / (1.0 - 2.0 * (a + c) * lam))
}

/// Critical-regime limit of `v_n / log n`:
/// `(Gamma((c+3)/(2(c+1))) / Gamma(1/(c+1)))^2`.
pub fn vn_critical_limit(params: &WalkParams) -> Result<f64> {
    require_regime(params, Regime::Critical)?;
    let c = params.c();
    let ratio = (ln_gamma((c + 3.0) / (2.0 * (c + 1.0))) - ln_gamma(1.0 / (c + 1.0))).exp();
    Ok(ratio * ratio)
}

/// `(2ac + c - 1)/(2a + c - 1)`, the variance of the diffusive limit of
/// `S_n/sqrt(n)`.
pub fn diffusive_variance(params: &WalkParams) -> Result<f64> {
    require_regime(params, Regime::Diffusive)?;
    let (a, c) = (params.a(), params.c());
    Ok((2.0 * a * c + c - 1.0) / (2.0 * a + c - 1.0))
}

/// Covariance kernel of the diffusive limit process for 0 < s <= t:
/// `a(1-c^2)/((a+c)(1-2a-c)) * s (t/s)^{lambda(a+c)} + c(a+1)/(a+c) * s`.
pub fn diffusive_kernel(params: &WalkParams, s: f64, t: f64) -> Result<f64> {
    require_regime(params, Regime::Diffusive)?;
    if !(s > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "kernel time s = {s} must be positive"
        )));
    }
    if s > t {
        return Err(Error::InvalidArgument(format!(
            "kernel arguments out of order: s = {s} > t = {t}"
        )));
    }
    let (a, c, lam) = (params.a(), params.c(), params.lambda());
    let first = a * (1.0 - c * c) / ((a + c) * (1.0 - 2.0 * a - c));
    let second = c * (a + 1.0) / (a + c);
    Ok(first * s * (t / s).powf(lam * (a + c)) + second * s)
}

/// Variance of the diffusive limit of the center of mass `G_n/sqrt(n)`:
/// `(2 - c(c+1+3ca+3a-2a^2)) / (3(2+c-a)(1-2a-c))`.
pub fn com_variance(params: &WalkParams) -> Result<f64> {
    require_regime(params, Regime::Diffusive)?;
    let (a, c) = (params.a(), params.c());
    Ok((2.0 - c * (c + 1.0 + 3.0 * c * a + 3.0 * a - 2.0 * a * a))
        / (3.0 * (2.0 + c - a) * (1.0 - 2.0 * a - c)))
}

/// The critical-regime constant `(c-1)^2/(c+1)`, returned twice:
/// it is both the variance of the `S_n/sqrt(n log n)` limit and the
/// law-of-iterated-logarithm constant.
pub fn critical_constants(params: &WalkParams) -> Result<(f64, f64)> {
    require_regime(params, Regime::Critical)?;
    let c = params.c();
    let k = (c - 1.0) * (c - 1.0) / (c + 1.0);
    Ok((k, k))
}

/// Brownian covariance of the critical limit: `min(s,t) * (c-1)^2/(c+1)`.
pub fn critical_kernel(params: &WalkParams, s: f64, t: f64) -> Result<f64> {
    require_regime(params, Regime::Critical)?;
    if s < 0.0 || t < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "kernel times must be non-negative (got s = {s}, t = {t})"
        )));
    }
    let c = params.c();
    Ok(s.min(t) * (c - 1.0) * (c - 1.0) / (c + 1.0))
}

/// First two moments of the superdiffusive limit L_c of
/// `S_n / n^{(a+c)lambda}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LcMoments {
    pub mean: f64,
    pub second_moment: f64,
}

impl LcMoments {
    pub fn variance(&self) -> f64 {
        self.second_moment - self.mean * self.mean
    }
}

/// Moments of L_c (superdiffusive regime only):
///
/// ```text
/// E[L_c]   = a (2q-1) Gamma(lambda) / ((a+c) Gamma(1 + a*lambda))
/// E[L_c^2] = (a/(a+c))^2 Gamma(lambda)
///            * ( sigma^2 / (lambda (2a+c-1) Gamma((2a+c)lambda))
///                - (sigma^2 - 1) / Gamma(1 + (2a+c)lambda) )
/// ```
///
/// with `sigma^2 = 1 + 2ac + c^2`. The second moment is the n -> infinity
/// limit of `E[Y_n^2]/n^{2(a+c)lambda}` scaled by `(a/(a+c))^2`, obtained by
/// solving `E[Y_{n+1}^2] = sigma^2 + (2gamma_n - 1) E[Y_n^2]` from
/// `E[Y_1^2] = 1`; the `(sigma^2 - 1)` term carries the initial condition
/// and vanishes when c = 0.
pub fn lc_moments(params: &WalkParams) -> Result<LcMoments> {
    require_regime(params, Regime::Superdiffusive)?;
    let (a, c, lam, q) = (params.a(), params.c(), params.lambda(), params.q());
    let one_plus_a_lam = 1.0 + a * lam;
    if one_plus_a_lam <= 0.0 {
        return Err(Error::GammaPole {
            name: "1 + a*lambda",
            value: one_plus_a_lam,
        });
    }
    let beta = (2.0 * a + c) * lam; // > lambda > 0 in this regime
    let sigma_sq = params.sigma_sq();
    let mean = a / (a + c) * (2.0 * q - 1.0) * (ln_gamma(lam) - ln_gamma(one_plus_a_lam)).exp();
    let ratio = a / (a + c);
    let term_main =
        sigma_sq / (lam * (2.0 * a + c - 1.0)) * (ln_gamma(lam) - ln_gamma(beta)).exp();
    let term_init = (sigma_sq - 1.0) * (ln_gamma(lam) - ln_gamma(1.0 + beta)).exp();
    let second_moment = ratio * ratio * (term_main - term_init);
    Ok(LcMoments {
        mean,
        second_moment,
    })
}

/// Limit matrix V of the normalized quadratic variation
/// `V_n <M>_n V_n^T` in the diffusive regime:
///
/// ```text
/// V = 1/(a+c)^2 * [ c^2(1-a^2)          ac(c+1)(1+a)
///                   ac(c+1)(1+a)        a^2 (1+2ac+c^2)(c+1)/(1-c-2a) ]
/// ```
pub fn limit_matrix_v(params: &WalkParams) -> Result<[[f64; 2]; 2]> {
    require_regime(params, Regime::Diffusive)?;
    let (a, c) = (params.a(), params.c());
    let denom = (a + c) * (a + c);
    let off = a * c * (c + 1.0) * (1.0 + a) / denom;
    Ok([
        [c * c * (1.0 - a * a) / denom, off],
        [
            off,
            a * a * params.sigma_sq() * (c + 1.0) / ((1.0 - c - 2.0 * a) * denom),
        ],
    ])
}

/// Critical-regime replacement for V: `((c-1)^2/(c+1)) * diag(0, 1)`.
pub fn limit_matrix_w(params: &WalkParams) -> Result<[[f64; 2]; 2]> {
    require_regime(params, Regime::Critical)?;
    let c = params.c();
    let k = (c - 1.0) * (c - 1.0) / (c + 1.0);
    Ok([[0.0, 0.0], [0.0, k]])
}

/// All closed-form limit constants available for a parameter set; fields
/// are populated according to the regime.
#[derive(Debug, Clone, Serialize)]
pub struct RegimeLimits {
    pub regime: Regime,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clt_variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qsl_constant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lil_constant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub com_variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lc_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lc_second_moment: Option<f64>,
}

/// Assembles [`RegimeLimits`] for the classified regime.
pub fn regime_limits(params: &WalkParams) -> Result<RegimeLimits> {
    let regime = params.regime();
    let mut limits = RegimeLimits {
        regime,
        clt_variance: None,
        qsl_constant: None,
        lil_constant: None,
        com_variance: None,
        lc_mean: None,
        lc_second_moment: None,
    };
    match regime {
        Regime::Diffusive => {
            let v = diffusive_variance(params)?;
            limits.clt_variance = Some(v);
            limits.qsl_constant = Some(v);
            limits.com_variance = Some(com_variance(params)?);
        }
        Regime::Critical => {
            let (v, lil) = critical_constants(params)?;
            limits.clt_variance = Some(v);
            limits.qsl_constant = Some(v);
            limits.lil_constant = Some(lil);
        }
        Regime::Superdiffusive => {
            let lc = lc_moments(params)?;
            limits.lc_mean = Some(lc.mean);
            limits.lc_second_moment = Some(lc.second_moment);
        }
    }
    Ok(limits)
}
