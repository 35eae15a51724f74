//! Closed-form bounds and constants of the convergence analysis.
//!
//! Everything here is a pure function. Bounds larger than one (the vacuous
//! regime at small `t`) are returned as computed, never clamped.

use serde::Serialize;

use crate::error::{Error, Result};

/// Default number of standard errors allowed when comparing Monte Carlo means
/// against a bound.
pub const DEFAULT_SIGMA_SLACK: f64 = 3.0;

/// `ln(1 - n^{-e})`, accurate when `n^{-e}` is tiny.
fn log_one_minus_inverse_power(n: f64, exponent: f64) -> f64 {
    (-(-exponent * n.ln()).exp()).ln_1p()
}

/// Constants of the expected log-error rate `E[ln|z_i(t+1) - x̄|] <= c0 - c1 t`,
/// valid for `t >= t_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateConstants {
    pub n: usize,
    pub block: usize,
    pub epsilon: f64,
    pub x0_l1norm: f64,
    /// `epsilon^(2(n-1))`, a lower bound on the probability that a B-window is irreducible.
    pub p: f64,
    pub c0: f64,
    pub c1: f64,
    /// `B + 2nB/p`
    pub t_min: f64,
}

impl RateConstants {
    /// `c0 - c1 t`.
    pub fn bound_at(&self, t: f64) -> f64 {
        self.c0 - self.c1 * t
    }

    pub fn is_valid_time(&self, t: f64) -> bool {
        t >= self.t_min
    }
}

/// `p = ε^{2(n-1)}`,
/// `c0 = ln(2‖x0‖₁) + ln(n)(nB/p + B) + ln 15`,
/// `c1 = -(p / 2nB) ln(1 - n^{-4nB/p})`, `t_min = B + 2nB/p`.
///
/// For very small `p` the term `n^{-4nB/p}` underflows and `c1` evaluates to 0.
pub fn rate_constants(n: usize, block: usize, epsilon: f64, x0_l1norm: f64) -> Result<RateConstants> {
    if n < 2 {
        return Err(Error::Domain(format!("rate constants need n >= 2, got {n}")));
    }
    if block == 0 {
        return Err(Error::Domain("B must be >= 1".into()));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    if !(x0_l1norm > 0.0) {
        return Err(Error::Domain(format!("‖x0‖₁ must be positive, got {x0_l1norm}")));
    }
    let nf = n as f64;
    let bf = block as f64;
    let p = epsilon.powi(2 * (n as i32 - 1));
    let c0 = (2.0 * x0_l1norm).ln() + expected_log_inv_y_bound(n, block, p) + 15f64.ln();
    let c1 = -(p / (2.0 * nf * bf)) * log_one_minus_inverse_power(nf, 4.0 * nf * bf / p);
    Ok(RateConstants {
        n,
        block,
        epsilon,
        x0_l1norm,
        p,
        c0,
        c1,
        t_min: bf + 2.0 * nf * bf / p,
    })
}

/// Pathwise error bound `2‖x0‖₁ Λ_{t,0} / y_i(t+1)`.
pub fn pathwise_bound(x0_l1norm: f64, y_i: f64, lambda: f64) -> Result<f64> {
    if !(y_i > 0.0) {
        return Err(Error::Domain(format!("y_i must be positive, got {y_i}")));
    }
    Ok(2.0 * x0_l1norm * lambda / y_i)
}

/// `E[Λ_{t,0}] <= exp(-β_t² (t/B - 2)) + 2 (1 - n^{-4nB/p})^{pt/(2nB)}` with
/// `β_t = p/2 - 2pB/t`, for `t >= B + 2nB/p`.
pub fn expected_lambda_bound(t: f64, n: usize, block: usize, p: f64) -> Result<f64> {
    let (first, second) = expected_lambda_terms(t, n, block, p)?;
    Ok(first + second)
}

/// The two summands of [`expected_lambda_bound`].
pub fn expected_lambda_terms(t: f64, n: usize, block: usize, p: f64) -> Result<(f64, f64)> {
    if n < 2 || block == 0 || !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain(format!(
            "need n >= 2, B >= 1, p in (0, 1]; got n = {n}, B = {block}, p = {p}"
        )));
    }
    let nf = n as f64;
    let bf = block as f64;
    let t_min = bf + 2.0 * nf * bf / p;
    if t < t_min {
        return Err(Error::Domain(format!("t = {t} below validity threshold {t_min}")));
    }
    let beta = p / 2.0 - 2.0 * p * bf / t;
    let first = (-beta * beta * (t / bf - 2.0)).exp();
    let exponent = p * t / (2.0 * nf * bf);
    let second = 2.0 * (exponent * log_one_minus_inverse_power(nf, 4.0 * nf * bf / p)).exp();
    Ok((first, second))
}

/// `E[ln(1/y_i(t))] <= ln(n) (nB/p + B)`.
pub fn expected_log_inv_y_bound(n: usize, block: usize, p: f64) -> f64 {
    let nf = n as f64;
    let bf = block as f64;
    nf.ln() * (nf * bf / p + bf)
}

/// `n^{-nB}`: every weight clears this floor right after `n` consecutive
/// irreducible B-blocks.
pub fn y_floor(n: usize, block: usize) -> f64 {
    (-((n * block) as f64) * (n as f64).ln()).exp()
}

/// Hoeffding tail `exp(-2 α² count)` for `Pr(Σ (X_i - E X_i) <= -α count)`.
pub fn hoeffding_bound(count: usize, alpha: f64) -> Result<f64> {
    if count == 0 || !(alpha > 0.0) {
        return Err(Error::Argument(format!(
            "need count >= 1 and alpha > 0; got {count}, {alpha}"
        )));
    }
    Ok((-2.0 * alpha * alpha * count as f64).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProductMaxCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// `Π (1 - n^{-l_i}) <= (1 - n^{-t/q})^q` with `t = Σ l_i`.
pub fn product_max_check(ls: &[u32], n: usize) -> Result<ProductMaxCheck> {
    if ls.is_empty() {
        return Err(Error::Argument("need at least one window length".into()));
    }
    if n < 2 {
        return Err(Error::Argument(format!("need n >= 2, got {n}")));
    }
    let nf = n as f64;
    let q = ls.len() as f64;
    let lhs: f64 = ls.iter().map(|&l| 1.0 - nf.powi(-(l as i32))).product();
    let total: f64 = ls.iter().map(|&l| l as f64).sum();
    let rhs = (1.0 - nf.powf(-total / q)).powf(q);
    Ok(ProductMaxCheck {
        lhs,
        rhs,
        ok: lhs <= rhs + 1e-12,
    })
}

/// Numeric check of the inequality chain that turns the two-term `E[Λ]` bound
/// into the single geometric rate behind `c1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimplificationCheck {
    pub n: usize,
    pub block: usize,
    pub epsilon: f64,
    pub t: f64,
    /// `exp(-β_t²(t/B - 2)) <= 13 exp(-p² t / 4B)`
    pub first_term_ok: bool,
    /// `exp(-pn/2) <= 1 - n^{-4nB/p}`
    pub base_ok: bool,
    /// `exp(-p) <= 1 - 2^{-8/p}`
    pub scalar_ok: bool,
    /// two-term bound `<= 15 (1 - n^{-4nB/p})^{pt/(2nB)}`
    pub combined_ok: bool,
}

impl SimplificationCheck {
    pub fn passed(&self) -> bool {
        self.first_term_ok && self.base_ok && self.scalar_ok && self.combined_ok
    }
}

pub fn simplification_check(n: usize, block: usize, epsilon: f64, t: f64) -> Result<SimplificationCheck> {
    let rc = rate_constants(n, block, epsilon, 1.0)?;
    let p = rc.p;
    let nf = n as f64;
    let bf = block as f64;
    let (first, second) = expected_lambda_terms(t, n, block, p)?;
    let rel = 1.0 + 1e-12;
    let thirteen = 13.0 * (-p * p * t / (4.0 * bf)).exp();
    let log_base = log_one_minus_inverse_power(nf, 4.0 * nf * bf / p);
    let base_ok = -p * nf / 2.0 <= log_base;
    let scalar_ok = -p <= log_one_minus_inverse_power(2.0, 8.0 / p);
    let fifteen = 15.0 * (p * t / (2.0 * nf * bf) * log_base).exp();
    Ok(SimplificationCheck {
        n,
        block,
        epsilon,
        t,
        first_term_ok: first <= thirteen * rel,
        base_ok,
        scalar_ok,
        combined_ok: first + second <= fifteen * rel,
    })
}
