//! Exact finite-n moments of (S_n, Y_n): linear recursions valid in every
//! regime, plus a gamma-function closed form for E[Y_n^2] away from the
//! critical line.
//!
//! With D_n = (c+1)n - c and gamma_n = 1 + (a+c)/D_n, the conditional
//! expectations of the step rule give, taking expectations:
//!
//! ```text
//! E[Y_{n+1}]       = gamma_n E[Y_n]
//! E[Y_{n+1}^2]     = (1 + 2ac + c^2) + (2 gamma_n - 1) E[Y_n^2]
//! E[S_{n+1}]       = E[S_n] + (a/D_n) E[Y_n]
//! E[S_{n+1}Y_{n+1}] = gamma_n E[S_n Y_n] + (a/D_n) E[Y_n^2] + (1 + ca)
//! E[S_{n+1}^2]     = E[S_n^2] + (2a/D_n) E[S_n Y_n] + 1
//! ```
//!
//! started from E[S_1] = E[Y_1] = 2q - 1 and
//! E[S_1^2] = E[Y_1^2] = E[S_1 Y_1] = 1. The cross recursion follows from
//! expanding (S_n + alpha X_beta)(Y_n + (alpha+c) X_beta) and using
//! E[alpha] = a, E[X_beta | F_n] = Y_n/D_n, X_beta^2 = 1,
//! E[alpha(alpha+c)] = 1 + ca.

use crate::analytic::{a_n, gamma_n};
use crate::error::{Error, Result};
use crate::model::WalkParams;
use crate::stats::KahanSum;

/// Exact moments of the walk at a single time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentTable {
    pub n: u64,
    pub e_y: f64,
    pub e_y2: f64,
    pub e_s: f64,
    pub e_sy: f64,
    pub e_s2: f64,
}

/// `E[Y_n] = (2q - 1) / a_n`.
pub fn mean_y(params: &WalkParams, n: u64) -> Result<f64> {
    Ok((2.0 * params.q() - 1.0) / a_n(params, n)?)
}

/// `E[Y_n^2]` by the exact O(n) recursion; valid in all regimes, the
/// critical line included.
pub fn second_moment_y_recursive(params: &WalkParams, n: u64) -> f64 {
    assert!(n >= 1);
    let sigma_sq = params.sigma_sq();
    let mut e = 1.0;
    for k in 1..n {
        e = sigma_sq + (2.0 * gamma_n(params, k) - 1.0) * e;
    }
    e
}

/// `E[Y_n^2]` in closed form via gamma ratios. Solving the one-step
/// recursion from E[Y_1^2] = 1 gives, with beta = (2a+c)lambda and
/// sigma^2 = 1 + 2ac + c^2:
///
/// ```text
/// E[Y_n^2] = sigma^2 Gamma(n+beta) / (lambda (2a+c-1) Gamma(n-c*lambda))
///            * ( Gamma(lambda)/Gamma(beta) - Gamma(n+lambda)/Gamma(n+beta) )
///            - (sigma^2 - 1) Gamma(n+beta) Gamma(lambda)
///              / (Gamma(1+beta) Gamma(n-c*lambda))
/// ```
///
/// Undefined on the critical line (2a + c = 1); requires beta > 0.
pub fn second_moment_y_closed(params: &WalkParams, n: u64) -> Result<f64> {
    assert!(n >= 1);
    let (a, c, lam) = (params.a(), params.c(), params.lambda());
    let two_a_plus_c = 2.0 * a + c;
    if (two_a_plus_c - 1.0).abs() <= 1e-12 {
        return Err(Error::WrongRegime {
            required: "non-critical (2a + c != 1); use the recursive form",
            actual: params.regime().as_str(),
        });
    }
    let beta = two_a_plus_c * lam;
    if beta <= 0.0 {
        return Err(Error::GammaPole {
            name: "(2a + c) * lambda",
            value: beta,
        });
    }
    let sigma_sq = params.sigma_sq();
    let lg = statrs::function::gamma::ln_gamma;
    let nf = n as f64;
    let ln_front = lg(nf + beta) - lg(nf - c * lam);
    let main = sigma_sq / (lam * (two_a_plus_c - 1.0))
        * ((ln_front + lg(lam) - lg(beta)).exp()
            - (ln_front + lg(nf + lam) - lg(nf + beta)).exp());
    let init = (sigma_sq - 1.0) * (ln_front + lg(lam) - lg(1.0 + beta)).exp();
    Ok(main - init)
}

/// Full exact moment table at time n (O(n)).
pub fn joint_moments(params: &WalkParams, n: u64) -> MomentTable {
    moment_series(params, &[n]).pop().expect("one entry")
}

/// Exact moment tables at several times in one O(max n) sweep.
/// `at` must be strictly increasing and start at 1 or later.
pub fn moment_series(params: &WalkParams, at: &[u64]) -> Vec<MomentTable> {
    assert!(!at.is_empty());
    assert!(at.windows(2).all(|w| w[0] < w[1]), "indices must increase");
    assert!(at[0] >= 1);
    let (a, c, q) = (params.a(), params.c(), params.q());
    let sigma_sq = params.sigma_sq();

    let mut e_y = 2.0 * q - 1.0;
    let mut e_y2 = 1.0;
    let mut e_s = KahanSum::new();
    e_s.add(2.0 * q - 1.0);
    let mut e_sy = 1.0;
    let mut e_s2 = KahanSum::new();
    e_s2.add(1.0);

    let mut out = Vec::with_capacity(at.len());
    let mut wanted = at.iter().copied().peekable();
    let push_if =
        |k: u64,
         wanted: &mut std::iter::Peekable<std::iter::Copied<std::slice::Iter<u64>>>,
         out: &mut Vec<MomentTable>,
         e_y: f64,
         e_y2: f64,
         e_s: f64,
         e_sy: f64,
         e_s2: f64| {
            if wanted.peek() == Some(&k) {
                wanted.next();
                out.push(MomentTable {
                    n: k,
                    e_y,
                    e_y2,
                    e_s,
                    e_sy,
                    e_s2,
                });
            }
        };
    push_if(1, &mut wanted, &mut out, e_y, e_y2, e_s.value(), e_sy, e_s2.value());

    let last = *at.last().unwrap();
    for k in 1..last {
        let d = params.total_weight(k);
        let g = 1.0 + (a + c) / d;
        let new_s_incr = (a / d) * e_y;
        let new_sy = g * e_sy + (a / d) * e_y2 + (1.0 + c * a);
        e_s2.add((2.0 * a / d) * e_sy + 1.0);
        e_s.add(new_s_incr);
        e_sy = new_sy;
        e_y *= g;
        e_y2 = sigma_sq + (2.0 * g - 1.0) * e_y2;
        push_if(
            k + 1,
            &mut wanted,
            &mut out,
            e_y,
            e_y2,
            e_s.value(),
            e_sy,
            e_s2.value(),
        );
    }
    out
}

impl MomentTable {
    /// Jensen and Cauchy-Schwarz sanity of the table entries.
    pub fn satisfies_moment_inequalities(&self, tol: f64) -> bool {
        let jensen_y = self.e_y2 + tol >= self.e_y * self.e_y;
        let jensen_s = self.e_s2 + tol >= self.e_s * self.e_s;
        let cs = self.e_sy * self.e_sy <= self.e_s2 * self.e_y2 + tol;
        jensen_y && jensen_s && cs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: f64, c: f64, q: f64) -> WalkParams {
        WalkParams::new(p, c, q).unwrap()
    }

    #[test]
    fn mean_y_examples() {
        let pm = params(0.75, 1.0, 0.5);
        for n in [1u64, 5, 50] {
            assert_eq!(mean_y(&pm, n).unwrap(), 0.0);
        }
        let pm = params(0.3, 2.0, 0.8);
        assert!((mean_y(&pm, 1).unwrap() - 0.6).abs() < 1e-15);
        let pm = params(0.75, 1.0, 1.0);
        assert!((mean_y(&pm, 2).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn second_moment_recursive_examples() {
        let pm = params(0.75, 1.0, 0.5);
        assert_eq!(second_moment_y_recursive(&pm, 1), 1.0);
        assert!((second_moment_y_recursive(&pm, 2) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn closed_matches_recursive_to_1e9() {
        for (p, c) in [(0.9, 1.0), (0.35, 1.0), (0.6, 0.5), (0.8, 0.0), (0.52, 2.5)] {
            let pm = params(p, c, 0.5);
            for n in [1u64, 2, 10, 1000] {
                let rec = second_moment_y_recursive(&pm, n);
                let closed = second_moment_y_closed(&pm, n).unwrap();
                let rel = (rec - closed).abs() / rec.abs();
                assert!(rel < 1e-9, "p={p} c={c} n={n}: rel={rel:.2e}");
            }
        }
    }

    #[test]
    fn closed_frozen_value() {
        // independently computed with 40-digit arithmetic
        let pm = params(0.9, 1.0, 0.5);
        let v = second_moment_y_closed(&pm, 1000).unwrap();
        assert!((v / 1.235487211197e6 - 1.0).abs() < 1e-10, "v = {v}");
    }

    #[test]
    fn closed_gates() {
        // critical line 2a + c = 1
        let crit = params(0.25, 2.0, 0.5);
        assert!(matches!(
            second_moment_y_closed(&crit, 10),
            Err(Error::WrongRegime { .. })
        ));
        // beta <= 0 pole: p = 0.1, c = 0.5 gives 2a + c = -1.1
        let pole = params(0.1, 0.5, 0.5);
        assert!(matches!(
            second_moment_y_closed(&pole, 10),
            Err(Error::GammaPole { .. })
        ));
        // the recursion still works there
        let r = second_moment_y_recursive(&crit, 100);
        assert!(r.is_finite() && r > 0.0);
        let r2 = second_moment_y_recursive(&pole, 100);
        assert!(r2.is_finite() && r2 > 0.0);
    }

    #[test]
    fn superdiffusive_scaled_second_moment_converges() {
        // E[Y_n^2] / n^{2(a+c)lambda} approaches the limit that also feeds
        // E[L_c^2]; check the trend at increasing n
        let pm = params(0.9, 1.0, 1.0);
        let lc = crate::analytic::lc_moments(&pm).unwrap();
        let ratio = pm.a() / (pm.a() + pm.c());
        let target = lc.second_moment / (ratio * ratio);
        let e = 2.0 * (pm.a() + pm.c()) * pm.lambda();
        let at_1e4 = second_moment_y_recursive(&pm, 10_000) / (10_000f64).powf(e);
        assert!((at_1e4 / target - 1.0).abs() < 0.01, "at_1e4 = {at_1e4}, target = {target}");
    }

    #[test]
    fn joint_moments_examples() {
        let pm = params(0.75, 1.0, 1.0);
        let t = joint_moments(&pm, 2);
        assert!((t.e_s - 1.5).abs() < 1e-14);
        assert!((t.e_y - 2.5).abs() < 1e-14);
        assert!((t.e_y2 - 7.0).abs() < 1e-14);
        // q = 1/2: sign-flip symmetry kills E[S_n] at every n
        let sym = params(0.75, 1.0, 0.5);
        for t in moment_series(&sym, &[1, 2, 10, 100, 1000]) {
            assert!(t.e_s.abs() < 1e-12, "E[S_{}] = {}", t.n, t.e_s);
            assert!(t.e_y.abs() < 1e-12);
        }
    }

    #[test]
    fn c_zero_collapses_s_and_y() {
        let pm = params(0.65, 0.0, 0.3);
        for t in moment_series(&pm, &[1, 7, 64, 512]) {
            let y2 = second_moment_y_recursive(&pm, t.n);
            assert!((t.e_s2 - y2).abs() < 1e-10 * y2.max(1.0));
            assert!((t.e_sy - y2).abs() < 1e-10 * y2.max(1.0));
        }
    }

    #[test]
    fn moment_inequalities_hold() {
        for (p, c, q) in [(0.35, 1.0, 0.5), (0.9, 1.0, 1.0), (0.25, 2.0, 0.3), (0.6, 0.5, 0.9)] {
            let pm = params(p, c, q);
            let at: Vec<u64> = (1..=500).collect();
            for t in moment_series(&pm, &at) {
                assert!(
                    t.satisfies_moment_inequalities(1e-9),
                    "violated at n={} for p={p} c={c} q={q}: {t:?}",
                    t.n
                );
            }
        }
    }

    #[test]
    fn series_matches_single_calls() {
        let pm = params(0.35, 1.0, 0.7);
        let series = moment_series(&pm, &[1, 3, 17, 200]);
        for t in series {
            let single = joint_moments(&pm, t.n);
            assert_eq!(t, single);
        }
    }
}
