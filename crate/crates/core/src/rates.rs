//! Closed-form error-rate expressions for sparse principal subspace
//! estimation, the sparsity/dimension diagnostics they are phrased in,
//! and checkers for the named parameter-regime conditions.
//!
//! Every rate function returns a squared-error-scale value (matching
//! `E ||sin Theta||_F^2`); results stated on the root scale are squared
//! here so the harness never mixes scales. The universal constants the
//! theory leaves unspecified are configuration ([`RateConstants`], plus a
//! leading `c` passed per call); `c` multiplies the squared-scale value
//! once. All logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SubspaceError};

/// Unspecified universal constants, exposed as configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RateConstants {
    /// Consistency-regime ceiling: the scaled error expression must stay
    /// at or below this for consistent estimation to be possible.
    pub m: f64,
    /// Exponent in the sparsity-versus-MSE comparisons, required < 1.
    pub a: f64,
    /// Empirical-process constant on the sqrt(d/n) log n term.
    pub c1: f64,
    /// Empirical-process constant on the epsilon_n (log n)^{5/2} terms.
    pub c3: f64,
}

impl Default for RateConstants {
    fn default() -> Self {
        Self {
            m: 1.0,
            a: 0.5,
            c1: 1.0,
            c3: 1.0,
        }
    }
}

/// Parameters of one estimation problem: dimensions, sparsity, and the
/// spectrum summary (top eigenvalue, the gap pair at index d, and the
/// effective noise derived from them).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProblemParams {
    pub p: usize,
    pub n: usize,
    pub d: usize,
    /// Sparsity exponent in [0, 2).
    pub q: f64,
    /// Sparsity radius R_q.
    pub r_q: f64,
    pub lambda1: f64,
    pub lambda_d: f64,
    pub lambda_d1: f64,
    /// Effective noise `lambda1 * lambda_{d+1} / gap^2`; must agree with
    /// the spectrum within 1e-9 relative error.
    pub sigma_sq: f64,
    #[serde(default)]
    pub constants: RateConstants,
}

impl ProblemParams {
    /// Builds parameters from an explicit spectrum summary, deriving the
    /// effective noise.
    #[allow(clippy::too_many_arguments)]
    pub fn from_spectrum(
        p: usize,
        n: usize,
        d: usize,
        q: f64,
        r_q: f64,
        lambda1: f64,
        lambda_d: f64,
        lambda_d1: f64,
        constants: RateConstants,
    ) -> Result<Self> {
        let gap = lambda_d - lambda_d1;
        let sigma_sq = lambda1 * lambda_d1 / (gap * gap);
        let params = Self {
            p,
            n,
            d,
            q,
            r_q,
            lambda1,
            lambda_d,
            lambda_d1,
            sigma_sq,
            constants,
        };
        params.validate()?;
        Ok(params)
    }

    /// Builds parameters from a target effective noise by synthesizing
    /// the spiked spectrum `(1+b, .., 1+b, 1, .., 1)` that realizes it.
    pub fn from_sigma(
        p: usize,
        n: usize,
        d: usize,
        q: f64,
        r_q: f64,
        sigma_sq: f64,
        constants: RateConstants,
    ) -> Result<Self> {
        if !sigma_sq.is_finite() || sigma_sq <= 0.0 {
            return Err(SubspaceError::InvalidParameter(format!(
                "effective noise must be positive, got {sigma_sq}"
            )));
        }
        let b = crate::covariance::spike_for_noise_variance(sigma_sq)?;
        Self::from_spectrum(p, n, d, q, r_q, 1.0 + b, 1.0 + b, 1.0, constants)
    }

    /// Checks all structural invariants. Every rate function calls this,
    /// so deserialized parameters cannot bypass it.
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d >= self.p {
            return Err(SubspaceError::InvalidParameter(format!(
                "needs 1 <= d < p, got p={}, d={}",
                self.p, self.d
            )));
        }
        if self.n == 0 {
            return Err(SubspaceError::InvalidParameter(
                "sample count must be at least 1".into(),
            ));
        }
        if !self.q.is_finite() || !(0.0..2.0).contains(&self.q) {
            return Err(SubspaceError::InvalidParameter(format!(
                "sparsity exponent must lie in [0, 2), got {}",
                self.q
            )));
        }
        if !self.r_q.is_finite() || self.r_q <= 0.0 {
            return Err(SubspaceError::InvalidParameter(format!(
                "sparsity radius must be positive, got {}",
                self.r_q
            )));
        }
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda_d", self.lambda_d),
            ("lambda_d1", self.lambda_d1),
            ("sigma_sq", self.sigma_sq),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(SubspaceError::InvalidParameter(format!(
                    "{name} must be a positive real, got {v}"
                )));
            }
        }
        if self.lambda1 < self.lambda_d || self.lambda_d <= self.lambda_d1 {
            return Err(SubspaceError::DegenerateGap(format!(
                "spectrum must satisfy lambda1 >= lambda_d > lambda_d1, got {}, {}, {}",
                self.lambda1, self.lambda_d, self.lambda_d1
            )));
        }
        let gap = self.lambda_d - self.lambda_d1;
        let implied = self.lambda1 * self.lambda_d1 / (gap * gap);
        if (implied - self.sigma_sq).abs() > 1e-9 * implied.max(1.0) {
            return Err(SubspaceError::InvalidParameter(format!(
                "stated noise {} disagrees with the spectrum's {implied}",
                self.sigma_sq
            )));
        }
        if !self.constants.a.is_finite() || self.constants.a >= 1.0 || self.constants.a <= 0.0 {
            return Err(SubspaceError::InvalidParameter(format!(
                "exponent constant must lie in (0, 1), got {}",
                self.constants.a
            )));
        }
        for (name, v) in [
            ("m", self.constants.m),
            ("c1", self.constants.c1),
            ("c3", self.constants.c3),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(SubspaceError::InvalidParameter(format!(
                    "constant {name} must be a positive real, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn pf(&self) -> f64 {
        self.p as f64
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    fn df(&self) -> f64 {
        self.d as f64
    }

    fn gap(&self) -> f64 {
        self.lambda_d - self.lambda_d1
    }
}

/// One evaluated parameter condition: `satisfied` reflects the stated
/// inequality between `lhs` and `rhs` (non-strict except where a
/// condition's own statement is strict).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionReport {
    pub name: String,
    pub satisfied: bool,
    pub lhs: f64,
    pub rhs: f64,
}

/// Relative sparsity `T = (R_q - d)/(p - d)^{1-q/2}`.
pub fn sparsity_t(params: &ProblemParams) -> Result<f64> {
    params.validate()?;
    require_radius_above(params, params.df())?;
    Ok((params.r_q - params.df()) / (params.pf() - params.df()).powf(1.0 - params.q / 2.0))
}

/// Classic dense-PCA mean squared error scale `gamma = (p - d) sigma^2 / n`.
pub fn classic_mse_gamma(params: &ProblemParams) -> Result<f64> {
    params.validate()?;
    Ok((params.pf() - params.df()) * params.sigma_sq / params.nf())
}

/// Column-sparse analogue `T* = d (R_q - 1)/(p - d)^{1-q/2}`.
pub fn sparsity_t_star(params: &ProblemParams) -> Result<f64> {
    params.validate()?;
    require_radius_above(params, 1.0)?;
    Ok(params.df() * (params.r_q - 1.0)
        / (params.pf() - params.df()).powf(1.0 - params.q / 2.0))
}

/// Rate proxy `epsilon_n = sqrt(2) R_q^{1/2} ((d + log p)/n)^{1/2 - q/4}`.
pub fn epsilon_n(params: &ProblemParams) -> Result<f64> {
    params.validate()?;
    let base = (params.df() + params.pf().ln()) / params.nf();
    Ok(2.0_f64.sqrt() * params.r_q.sqrt() * base.powf(0.5 - params.q / 4.0))
}

/// Row-sparse lower rate
/// `c (R_q - d) {sigma^2/n [d + log((p-d)^{1-q/2}/(R_q - d))]}^{1-q/2}`.
pub fn lower_rate_row(params: &ProblemParams, c: f64) -> Result<f64> {
    params.validate()?;
    require_radius_above(params, params.df())?;
    let spread = params.r_q - params.df();
    let log_arg = (params.pf() - params.df()).powf(1.0 - params.q / 2.0) / spread;
    let inner = params.sigma_sq / params.nf() * (params.df() + log_arg.ln());
    if inner <= 0.0 {
        return Err(SubspaceError::InvalidParameter(format!(
            "rate bracket {inner} is not positive; radius too close to the ambient dimension"
        )));
    }
    Ok(c * spread * inner.powf(1.0 - params.q / 2.0))
}

/// Row-sparse upper rate `c R_q (sigma^2 (d + log p)/n)^{1-q/2}`.
pub fn upper_rate_row(params: &ProblemParams, c: f64) -> Result<f64> {
    params.validate()?;
    let inner = params.sigma_sq * (params.df() + params.pf().ln()) / params.nf();
    Ok(c * params.r_q * inner.powf(1.0 - params.q / 2.0))
}

/// The weaker q = 0 bound carrying the extra spectral factor:
/// `c R_0 (lambda1/lambda_{d+1}) sigma^2 (d + log p)/n`.
pub fn rate_row_q0_weak(params: &ProblemParams, c: f64) -> Result<f64> {
    params.validate()?;
    if params.q != 0.0 {
        return Err(SubspaceError::InvalidParameter(format!(
            "this bound is specific to q = 0, got q = {}",
            params.q
        )));
    }
    Ok(c * params.r_q * (params.lambda1 / params.lambda_d1) * params.sigma_sq
        * (params.df() + params.pf().ln())
        / params.nf())
}

/// Column-sparse lower rate
/// `c d(R_q - 1) {sigma^2/n [1 + log((p-d)^{1-q/2}/(d(R_q - 1)))]}^{1-q/2}`.
pub fn lower_rate_column(params: &ProblemParams, c: f64) -> Result<f64> {
    params.validate()?;
    require_radius_above(params, 1.0)?;
    let spread = params.df() * (params.r_q - 1.0);
    let log_arg = (params.pf() - params.df()).powf(1.0 - params.q / 2.0) / spread;
    let inner = params.sigma_sq / params.nf() * (1.0 + log_arg.ln());
    if inner <= 0.0 {
        return Err(SubspaceError::InvalidParameter(format!(
            "rate bracket {inner} is not positive; radius too close to the ambient dimension"
        )));
    }
    Ok(c * spread * inner.powf(1.0 - params.q / 2.0))
}

/// Column-sparse upper rate `c d R_q (sigma^2 (d + log p)/n)^{1-q/2}`.
pub fn upper_rate_column(params: &ProblemParams, c: f64) -> Result<f64> {
    params.validate()?;
    let inner = params.sigma_sq * (params.df() + params.pf().ln()) / params.nf();
    Ok(c * params.df() * params.r_q * inner.powf(1.0 - params.q / 2.0))
}

/// Variable-selection part of the row-sparse lower bound, on the squared
/// scale and clamped at 1. Branches on `T < gamma^{q/2}` (at q = 0 the
/// right side is 1, so the sparse branch applies whenever T < 1).
pub fn variable_selection_rate(params: &ProblemParams, c: f64) -> Result<f64> {
    params.validate()?;
    require_radius_above(params, params.df())?;
    let t = sparsity_t(params)?;
    let gamma = classic_mse_gamma(params)?;
    let threshold = gamma.powf(params.q / 2.0);
    let value = if t < threshold {
        let inner = params.sigma_sq / params.nf() * (1.0 - (t / threshold).ln());
        ((params.r_q - params.df()) * inner.powf(1.0 - params.q / 2.0)).min(1.0)
    } else {
        gamma.min(1.0)
    };
    Ok(c * value)
}

/// Parameter-estimation part of the row-sparse lower bound, on the
/// squared scale and clamped at d. Branches on `T < (d gamma)^{q/2}`.
pub fn estimation_rate(params: &ProblemParams, c: f64) -> Result<f64> {
    params.validate()?;
    require_radius_above(params, params.df())?;
    let t = sparsity_t(params)?;
    let gamma = classic_mse_gamma(params)?;
    let threshold = (params.df() * gamma).powf(params.q / 2.0);
    let value = if t < threshold {
        let inner = params.df() * params.sigma_sq / params.nf();
        ((params.r_q - params.df()) * inner.powf(1.0 - params.q / 2.0)).min(params.df())
    } else {
        (params.df() * (params.pf() - params.df()) * params.sigma_sq / params.nf())
            .min(params.df())
    };
    Ok(c * value)
}

/// Additive overhead separating the expectation bound from the
/// probability bound: `d (log n / n + 1/p)`. Diagnostic only; it is not
/// folded into any rate.
pub fn expectation_overhead(params: &ProblemParams) -> Result<f64> {
    params.validate()?;
    Ok(params.df() * (params.nf().ln() / params.nf() + 1.0 / params.pf()))
}

/// Evaluates every named parameter condition, one report per condition:
///
/// * consistent regime: the scaled row lower-rate expression is at most M;
/// * nontrivial row-sparse parameters: `4 <= p - d` and
///   `2d <= R_q - d <= (p-d)^{1-q/2}` (the report carries the
///   sub-inequality with the least slack, named in brackets);
/// * row sparsity dominates MSE: `T^a <= gamma^{q/2}`;
/// * nontrivial column-sparse parameters: `4d <= p - d` and
///   `d <= d(R_q - 1) <= (p-d)^{1-q/2}` (binding sub-inequality reported);
/// * column sparsity dominates MSE: `T*^a <= gamma^{q/2}`;
/// * rate proxy at most one: `epsilon_n <= 1`;
/// * noise terms below half the gap (strict):
///   `c1 sqrt(d/n) log n lambda1 + c3 eps_n (log n)^{5/2} lambda_{d+1} < gap/2`;
/// * linear noise term within the lq scale:
///   `c3 eps_n (log n)^{5/2} lambda_{d+1} <= (lambda1 lambda_{d+1})^{(1-q/2)/2} gap^{q/2}`;
/// * quadratic noise term within the lq scale:
///   `c3 eps_n^2 (log n)^{5/2} lambda_{d+1} <= (lambda1 lambda_{d+1})^{(2-q)/2} gap^{q-1}`.
///
/// Degenerate inputs (e.g. a radius at or below d) surface as NaN sides
/// with `satisfied = false`, never as a missing report.
pub fn check_conditions(params: &ProblemParams) -> Result<Vec<ConditionReport>> {
    params.validate()?;
    let mut reports = Vec::with_capacity(9);
    let k = params.constants;
    let (pf, nf, df) = (params.pf(), params.nf(), params.df());
    let gap = params.gap();

    let consistent_lhs = lower_rate_row(params, 1.0).unwrap_or(f64::NAN);
    reports.push(simple_report(
        "consistent regime",
        consistent_lhs,
        k.m,
        false,
    ));

    let row_power = (pf - df).powf(1.0 - params.q / 2.0);
    reports.push(compound_report(
        "nontrivial row-sparse parameters",
        &[
            ("4 <= p - d", 4.0, pf - df),
            ("2d <= R_q - d", 2.0 * df, params.r_q - df),
            ("R_q - d <= (p-d)^(1-q/2)", params.r_q - df, row_power),
        ],
    ));

    let gamma = classic_mse_gamma(params)?;
    let gamma_pow = gamma.powf(params.q / 2.0);
    let t = (params.r_q - df) / row_power;
    reports.push(simple_report(
        "row sparsity dominates MSE",
        t.powf(k.a),
        gamma_pow,
        false,
    ));

    let col_spread = df * (params.r_q - 1.0);
    reports.push(compound_report(
        "nontrivial column-sparse parameters",
        &[
            ("4d <= p - d", 4.0 * df, pf - df),
            ("d <= d(R_q - 1)", df, col_spread),
            ("d(R_q - 1) <= (p-d)^(1-q/2)", col_spread, row_power),
        ],
    ));

    let t_star = col_spread / row_power;
    reports.push(simple_report(
        "column sparsity dominates MSE",
        t_star.powf(k.a),
        gamma_pow,
        false,
    ));

    let eps = epsilon_n(params)?;
    reports.push(simple_report("rate proxy at most one", eps, 1.0, false));

    let log_n = nf.ln();
    let noise_linear = k.c3 * eps * log_n.powf(2.5) * params.lambda_d1;
    reports.push(simple_report(
        "noise terms below half the gap",
        k.c1 * (df / nf).sqrt() * log_n * params.lambda1 + noise_linear,
        gap / 2.0,
        true,
    ));

    let cross = params.lambda1 * params.lambda_d1;
    reports.push(simple_report(
        "linear noise term within the lq scale",
        noise_linear,
        cross.powf((1.0 - params.q / 2.0) / 2.0) * gap.powf(params.q / 2.0),
        false,
    ));

    reports.push(simple_report(
        "quadratic noise term within the lq scale",
        k.c3 * eps * eps * log_n.powf(2.5) * params.lambda_d1,
        cross.powf((2.0 - params.q) / 2.0) * gap.powf(params.q - 1.0),
        false,
    ));

    Ok(reports)
}

fn simple_report(name: &str, lhs: f64, rhs: f64, strict: bool) -> ConditionReport {
    let satisfied = if strict { lhs < rhs } else { lhs <= rhs };
    ConditionReport {
        name: name.to_string(),
        satisfied,
        lhs,
        rhs,
    }
}

/// For a conjunction of inequalities, reports the sub-inequality with the
/// least slack (largest lhs - rhs); `satisfied` covers the whole
/// conjunction.
fn compound_report(name: &str, parts: &[(&str, f64, f64)]) -> ConditionReport {
    let satisfied = parts.iter().all(|&(_, lhs, rhs)| lhs <= rhs);
    let binding = parts
        .iter()
        .max_by(|a, b| {
            (a.1 - a.2)
                .partial_cmp(&(b.1 - b.2))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("conjunction has at least one part");
    ConditionReport {
        name: format!("{name} [{}]", binding.0),
        satisfied,
        lhs: binding.1,
        rhs: binding.2,
    }
}

fn require_radius_above(params: &ProblemParams, floor: f64) -> Result<()> {
    if params.r_q <= floor {
        return Err(SubspaceError::InvalidParameter(format!(
            "radius {} must exceed {floor} for this rate",
            params.r_q
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spiked(p: usize, n: usize, d: usize, q: f64, r_q: f64, b: f64) -> ProblemParams {
        ProblemParams::from_spectrum(
            p,
            n,
            d,
            q,
            r_q,
            1.0 + b,
            1.0 + b,
            1.0,
            RateConstants::default(),
        )
        .unwrap()
    }

    #[test]
    fn sparsity_diagnostics_match_hand_arithmetic() {
        // q=0, R = d+1, p = d+2.
        let params = spiked(4, 100, 2, 0.0, 3.0, 1.0);
        assert_abs_diff_eq!(sparsity_t(&params).unwrap(), 0.5, epsilon = 1e-15);
        // q=1, p=103, d=3, R=13: 10/sqrt(100).
        let params = spiked(103, 100, 3, 1.0, 13.0, 1.0);
        assert_abs_diff_eq!(sparsity_t(&params).unwrap(), 1.0, epsilon = 1e-15);
        // T at the q=0 boundary R - d = p - d.
        let params = spiked(12, 100, 2, 0.0, 12.0, 1.0);
        assert_abs_diff_eq!(sparsity_t(&params).unwrap(), 1.0, epsilon = 1e-15);
        // T*: d=2, R=3, q=0, p=18.
        let params = spiked(18, 100, 2, 0.0, 3.0, 1.0);
        assert_abs_diff_eq!(sparsity_t_star(&params).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn gamma_matches_hand_arithmetic() {
        let params = spiked(102, 200, 2, 0.0, 5.0, 1.0); // sigma_sq = 2
        assert_abs_diff_eq!(classic_mse_gamma(&params).unwrap(), 1.0, epsilon = 1e-12);
        let params = spiked(64, 496, 2, 0.0, 5.0, 1.0);
        assert_abs_diff_eq!(classic_mse_gamma(&params).unwrap(), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_radii_are_rejected() {
        let params = spiked(10, 100, 2, 0.0, 2.0, 1.0); // R_q = d
        assert!(sparsity_t(&params).is_err());
        assert!(lower_rate_row(&params, 1.0).is_err());
        let params = spiked(10, 100, 2, 0.0, 1.0, 1.0); // R_q = 1
        assert!(sparsity_t_star(&params).is_err());
        assert!(lower_rate_column(&params, 1.0).is_err());
    }

    #[test]
    fn epsilon_n_is_pinned_and_scales_in_n() {
        let params = spiked(3, 31, 2, 0.0, 2.0, 1.0);
        assert_abs_diff_eq!(
            epsilon_n(&params).unwrap(),
            6.323139572026737e-1,
            epsilon = 1e-14
        );
        let doubled = spiked(3, 62, 2, 0.0, 2.0, 1.0);
        assert_abs_diff_eq!(
            epsilon_n(&params).unwrap() / epsilon_n(&doubled).unwrap(),
            2.0_f64.sqrt(),
            epsilon = 1e-12
        );
        let bigger_radius = spiked(3, 31, 2, 0.0, 2.5, 1.0);
        assert!(epsilon_n(&bigger_radius).unwrap() > epsilon_n(&params).unwrap());
    }

    #[test]
    fn rate_values_are_pinned() {
        // b = 1 gives sigma_sq = 2.
        let params = spiked(2981, 100, 2, 0.0, 6.0, 1.0);
        assert_abs_diff_eq!(
            upper_rate_row(&params, 1.0).unwrap(),
            1.2000016912413687,
            epsilon = 1e-12
        );
        let params = spiked(10, 100, 2, 0.0, 5.0, 1.0);
        assert_abs_diff_eq!(
            lower_rate_row(&params, 1.0).unwrap(),
            1.7884975518070356e-1,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            variable_selection_rate(&params, 1.0).unwrap(),
            1.1884975518070356e-1,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            estimation_rate(&params, 1.0).unwrap(),
            0.12,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            expectation_overhead(&params).unwrap(),
            2.9210340371976184e-1,
            epsilon = 1e-14
        );
        let params = spiked(103, 50, 3, 1.0, 13.0, 1.0);
        assert_abs_diff_eq!(
            lower_rate_row(&params, 1.0).unwrap(),
            3.4641016151377544,
            epsilon = 1e-12
        );
    }

    #[test]
    fn column_rates_are_pinned() {
        // sigma_sq = 1 needs b = (1 + sqrt(5))/2.
        let b = (1.0 + 5.0_f64.sqrt()) / 2.0;
        let params = ProblemParams::from_spectrum(
            18,
            40,
            2,
            0.0,
            3.0,
            1.0 + b,
            1.0 + b,
            1.0,
            RateConstants::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(params.sigma_sq, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            lower_rate_column(&params, 1.0).unwrap(),
            2.3862943611198909e-1,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            upper_rate_column(&params, 1.0).unwrap(),
            7.335557636844248e-1,
            epsilon = 1e-14
        );
    }

    #[test]
    fn weak_bound_carries_the_spectral_factor() {
        let params = spiked(50, 200, 2, 0.0, 6.0, 1.0); // lambda1/lambda_d1 = 2
        let weak = rate_row_q0_weak(&params, 1.0).unwrap();
        let tight = upper_rate_row(&params, 1.0).unwrap();
        assert_abs_diff_eq!(weak, 2.0 * tight, epsilon = 1e-12);
        let q_half = spiked(50, 200, 2, 0.5, 6.0, 1.0);
        assert!(rate_row_q0_weak(&q_half, 1.0).is_err());
    }

    #[test]
    fn upper_lower_ratio_is_free_of_noise_and_sample_size() {
        let mut ratios = Vec::new();
        for (n, b) in [(100, 1.0), (1000, 1.0), (100, 3.0)] {
            let params = spiked(40, n, 2, 0.0, 6.0, b);
            let ratio = upper_rate_row(&params, 1.0).unwrap()
                / lower_rate_row(&params, 1.0).unwrap();
            ratios.push(ratio);
        }
        assert_abs_diff_eq!(ratios[0], ratios[1], epsilon = 1e-12);
        assert_abs_diff_eq!(ratios[0], ratios[2], epsilon = 1e-12);
        // The ratio factors into the radius part and the log part.
        let expect = (6.0 / 4.0) * (2.0 + 40.0_f64.ln()) / (2.0 + (38.0_f64 / 4.0).ln());
        assert_abs_diff_eq!(ratios[0], expect, epsilon = 1e-12);
    }

    #[test]
    fn rates_are_monotone_in_sample_size_and_noise() {
        let fns: [fn(&ProblemParams, f64) -> Result<f64>; 6] = [
            lower_rate_row,
            upper_rate_row,
            lower_rate_column,
            upper_rate_column,
            variable_selection_rate,
            estimation_rate,
        ];
        for f in fns {
            let mut prev = f64::INFINITY;
            for n in [50, 100, 400, 1600] {
                let params = spiked(40, n, 2, 0.5, 6.0, 1.0);
                let v = f(&params, 1.0).unwrap();
                assert!(v <= prev + 1e-12, "rate rose from {prev} to {v} as n grew");
                prev = v;
            }
            let quiet = f(&spiked(40, 100, 2, 0.5, 6.0, 4.0), 1.0).unwrap();
            let loud = f(&spiked(40, 100, 2, 0.5, 6.0, 1.0), 1.0).unwrap();
            // Smaller spike means larger effective noise, so b=1 is noisier.
            assert!(loud >= quiet - 1e-12);
        }
    }

    #[test]
    fn rates_are_continuous_in_the_exponent() {
        for f in [lower_rate_row, upper_rate_row, variable_selection_rate] {
            for q in [0.0, 0.3, 0.7, 0.999] {
                let here = f(&spiked(40, 100, 2, q, 6.0, 1.0), 1.0).unwrap();
                let near = f(&spiked(40, 100, 2, q + 0.0005, 6.0, 1.0), 1.0).unwrap();
                assert!(
                    (here - near).abs() < 0.01 * here.max(1e-3),
                    "jump at q={q}: {here} vs {near}"
                );
            }
        }
    }

    #[test]
    fn branch_functions_are_continuous_at_the_q0_boundary() {
        // At q = 0 the sparse branch applies iff T < 1; approach T = 1
        // from both sides and compare.
        let (p, d) = (42, 2);
        let below = spiked(p, 400, d, 0.0, (p - d) as f64 + d as f64 - 1e-6, 1.0);
        let above = spiked(p, 400, d, 0.0, (p - d) as f64 + d as f64 + 1e-6, 1.0);
        let vs = (
            variable_selection_rate(&below, 1.0).unwrap(),
            variable_selection_rate(&above, 1.0).unwrap(),
        );
        assert!((vs.0 - vs.1).abs() < 1e-4, "{} vs {}", vs.0, vs.1);
        let er = (
            estimation_rate(&below, 1.0).unwrap(),
            estimation_rate(&above, 1.0).unwrap(),
        );
        assert!((er.0 - er.1).abs() < 1e-4, "{} vs {}", er.0, er.1);
    }

    #[test]
    fn condition_reports_cover_every_named_condition_once() {
        let params = spiked(200, 10_000_000_000, 2, 0.0, 8.0, 1.0);
        let reports = check_conditions(&params).unwrap();
        assert_eq!(reports.len(), 9);
        for r in &reports {
            assert!(
                r.satisfied,
                "expected '{}' to hold: lhs={}, rhs={}",
                r.name, r.lhs, r.rhs
            );
        }
        let names: Vec<&str> = reports.iter().map(|r| r.name.as_str()).collect();
        assert!(names.iter().any(|n| n.starts_with("consistent regime")));
        assert!(names
            .iter()
            .any(|n| n.starts_with("nontrivial row-sparse parameters")));
        assert!(names
            .iter()
            .any(|n| n.starts_with("nontrivial column-sparse parameters")));
    }

    #[test]
    fn boundary_and_violation_reports_read_correctly() {
        // p - d = 4 exactly: boundary satisfied.
        let params = spiked(5, 1_000_000_000, 1, 0.0, 3.0, 1.0);
        let reports = check_conditions(&params).unwrap();
        let row = reports
            .iter()
            .find(|r| r.name.starts_with("nontrivial row-sparse"))
            .unwrap();
        assert!(row.satisfied);

        // Small n blows up the rate proxy.
        let params = spiked(50, 4, 2, 0.0, 8.0, 1.0);
        let reports = check_conditions(&params).unwrap();
        let proxy = reports
            .iter()
            .find(|r| r.name == "rate proxy at most one")
            .unwrap();
        assert!(!proxy.satisfied);
        assert_abs_diff_eq!(proxy.lhs, epsilon_n(&params).unwrap(), epsilon = 1e-12);
        assert_eq!(proxy.rhs, 1.0);

        // A radius below d makes T negative and T^a NaN; the report stays
        // present and unsatisfied.
        let degenerate = spiked(50, 100, 2, 0.5, 1.0, 1.0);
        let reports = check_conditions(&degenerate).unwrap();
        assert_eq!(reports.len(), 9);
        let t_report = reports
            .iter()
            .find(|r| r.name == "row sparsity dominates MSE")
            .unwrap();
        assert!(!t_report.satisfied);
    }

    #[test]
    fn q0_sparsity_condition_reduces_to_t_at_most_one() {
        let params = spiked(30, 100, 2, 0.0, 10.0, 1.0);
        let t = sparsity_t(&params).unwrap();
        assert!(t < 1.0);
        let reports = check_conditions(&params).unwrap();
        let r = reports
            .iter()
            .find(|r| r.name == "row sparsity dominates MSE")
            .unwrap();
        assert!(r.satisfied);
        assert_eq!(r.rhs, 1.0);
    }

    #[test]
    fn constructors_enforce_consistency() {
        let params = spiked(10, 100, 2, 0.0, 5.0, 1.0);
        assert_abs_diff_eq!(params.sigma_sq, 2.0, epsilon = 1e-12);
        let via_sigma =
            ProblemParams::from_sigma(10, 100, 2, 0.0, 5.0, 2.0, RateConstants::default())
                .unwrap();
        assert_abs_diff_eq!(via_sigma.lambda1, 2.0, epsilon = 1e-12);

        let mut broken = params;
        broken.sigma_sq = 3.0;
        assert!(broken.validate().is_err());
        let mut flat = params;
        flat.lambda_d1 = flat.lambda_d;
        assert!(flat.validate().is_err());
        let mut wide = params;
        wide.q = 2.0;
        assert!(wide.validate().is_err());
    }
}
