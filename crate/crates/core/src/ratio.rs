//! Two-stage sieve least-squares estimation of the unconditional ratio
//! r(y, z) = f_Y f_Z / f_{Y,Z} and the conditional ratio
//! π(x, y, z) = f_{X|Z} f_{Y|Z} / f_{X,Y|Z}.
//!
//! Coefficients and normal-equation matrices are held in the working
//! coordinates of the basis (standardized columns by default). Fitted
//! functions do not depend on that choice; `raw_coefficients` gives the
//! coefficients on the plain monomials.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{eval_u, eval_v, BasisSpec};
use crate::design::{EvaluatedBasis, PairSums};
use crate::error::{Error, Result};
use crate::linalg::SymFactor;
use crate::sample::Sample;

/// Numerical choices shared by every fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitOptions {
    /// Center and scale non-constant basis columns before solving.
    pub standardize: bool,
    pub pair_sums: PairSums,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            standardize: true,
            pair_sums: PairSums::Separable,
        }
    }
}

impl FitOptions {
    pub(crate) fn evaluate(
        &self,
        sample: &Sample,
        terms: &[crate::basis::Monomial],
    ) -> EvaluatedBasis {
        let b = EvaluatedBasis::evaluate(sample, terms, self.pair_sums);
        if self.standardize {
            b.standardize()
        } else {
            b
        }
    }
}

/// Non-fatal conditions noticed while fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Warning {
    /// r̂ is negative at some sample points.
    NegativeRatioWeights { count: usize },
    /// The r̂-weighted Gram matrix Ĥ is not positive definite.
    IndefiniteWeightedGram { min_eigenvalue: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::NegativeRatioWeights { count } => {
                write!(f, "unconditional ratio estimate is negative at {count} sample points")
            }
            Warning::IndefiniteWeightedGram { min_eigenvalue } => write!(
                f,
                "weighted Gram matrix is not positive definite (min eigenvalue {min_eigenvalue:.3e})"
            ),
        }
    }
}

/// Fitted unconditional ratio r̂(y, z) = γ̂ᵀ u(y, z) with γ̂ = Σ̂⁻¹ b̂.
#[derive(Debug, Clone)]
pub struct UncondRatioFit {
    spec: BasisSpec,
    options: FitOptions,
    gamma: DVector<f64>,
    sigma_mat: DMatrix<f64>,
    b_vec: DVector<f64>,
    raw_coef: DVector<f64>,
    fitted: DVector<f64>,
    factor: SymFactor,
}

impl UncondRatioFit {
    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }
    pub fn options(&self) -> FitOptions {
        self.options
    }
    /// γ̂ in working coordinates.
    pub fn gamma(&self) -> &DVector<f64> {
        &self.gamma
    }
    /// Σ̂ = n⁻¹ Σ_t u_t u_tᵀ.
    pub fn sigma_mat(&self) -> &DMatrix<f64> {
        &self.sigma_mat
    }
    /// b̂ = {n(n−1)}⁻¹ Σ_{i≠j} u(Y_i, Z_j).
    pub fn b_vec(&self) -> &DVector<f64> {
        &self.b_vec
    }
    /// Coefficients on the raw u monomials, in `spec.u_terms()` order.
    pub fn raw_coefficients(&self) -> &DVector<f64> {
        &self.raw_coef
    }
    /// r̂ at each sample point.
    pub fn fitted(&self) -> &DVector<f64> {
        &self.fitted
    }
    pub fn rcond(&self) -> f64 {
        self.factor.rcond()
    }
    pub(crate) fn factor(&self) -> &SymFactor {
        &self.factor
    }
}

/// Fitted conditional ratio π̂(x, y, z) = β̂ᵀ v(x, y, z) with β̂ = Ĥ⁻¹ ĥ.
#[derive(Debug, Clone)]
pub struct CondRatioFit {
    spec: BasisSpec,
    beta: DVector<f64>,
    h_mat: DMatrix<f64>,
    h_vec: DVector<f64>,
    raw_coef: DVector<f64>,
    fitted: DVector<f64>,
    factor: SymFactor,
    warnings: Vec<Warning>,
}

impl CondRatioFit {
    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }
    /// β̂ in working coordinates.
    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }
    /// Ĥ = n⁻¹ Σ_t r̂_t v_t v_tᵀ.
    pub fn h_mat(&self) -> &DMatrix<f64> {
        &self.h_mat
    }
    /// ĥ = {n(n−1)}⁻¹ Σ_{i≠j} v(X_i, Y_j, Z_i).
    pub fn h_vec(&self) -> &DVector<f64> {
        &self.h_vec
    }
    pub fn raw_coefficients(&self) -> &DVector<f64> {
        &self.raw_coef
    }
    /// π̂ at each sample point.
    pub fn fitted(&self) -> &DVector<f64> {
        &self.fitted
    }
    pub fn rcond(&self) -> f64 {
        self.factor.rcond()
    }
    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }
    pub(crate) fn h_inverse(&self) -> &DMatrix<f64> {
        self.factor.inverse()
    }
}

fn check_size(n: usize, need: usize, k: usize, what: &str) -> Result<()> {
    if n < need {
        return Err(Error::InvalidSample(format!(
            "{what} basis has {k} terms but only {n} observations (need at least {need})"
        )));
    }
    Ok(())
}

/// Weighted Gram matrix `n⁻¹ Σ_t w_t b_t b_tᵀ`.
pub(crate) fn weighted_gram(design: &DMatrix<f64>, weights: Option<&DVector<f64>>) -> DMatrix<f64> {
    let n = design.nrows() as f64;
    let gram = match weights {
        None => design.tr_mul(design),
        Some(w) => {
            let mut scaled = design.clone();
            for (mut row, wt) in scaled.row_iter_mut().zip(w.iter()) {
                row *= *wt;
            }
            design.tr_mul(&scaled)
        }
    };
    let mut gram = gram / n;
    // enforce exact symmetry
    let k = gram.nrows();
    for i in 0..k {
        for j in 0..i {
            let avg = 0.5 * (gram[(i, j)] + gram[(j, i)]);
            gram[(i, j)] = avg;
            gram[(j, i)] = avg;
        }
    }
    gram
}

/// Fits r̂ from an already evaluated u basis.
pub(crate) fn fit_unconditional_on(
    u: &EvaluatedBasis,
    spec: &BasisSpec,
    options: FitOptions,
) -> Result<UncondRatioFit> {
    // Σ̂ is u-only and can be nonsingular with n = K₀
    check_size(u.n(), u.k(), u.k(), "u")?;
    let sigma_mat = weighted_gram(u.diag(), None);
    let b_vec = u.offdiag().clone();
    let factor = SymFactor::new(&sigma_mat).map_err(|s| Error::CollinearBasis {
        spec: format!("u={{{}}}", join_terms(spec.u_terms())),
        rcond: s.rcond,
    })?;
    let gamma = factor.solve(&b_vec);
    let fitted = u.diag() * &gamma;
    let raw_coef = u.raw_coefficients(&gamma);
    Ok(UncondRatioFit {
        spec: spec.clone(),
        options,
        gamma,
        sigma_mat,
        b_vec,
        raw_coef,
        fitted,
        factor,
    })
}

/// Fits π̂ from an evaluated v basis and the fitted r̂ at the sample points.
pub(crate) fn fit_conditional_on(
    v: &EvaluatedBasis,
    spec: &BasisSpec,
    r_fitted: &DVector<f64>,
    h_mat: DMatrix<f64>,
) -> Result<CondRatioFit> {
    check_size(v.n(), v.k() + 1, v.k(), "v")?;
    let h_vec = v.offdiag().clone();
    let factor = SymFactor::new(&h_mat).map_err(|s| Error::CollinearBasis {
        spec: spec.to_string(),
        rcond: s.rcond,
    })?;
    let beta = factor.solve(&h_vec);
    let fitted = v.diag() * &beta;
    let raw_coef = v.raw_coefficients(&beta);
    let mut warnings = Vec::new();
    let negative = r_fitted.iter().filter(|r| **r < 0.0).count();
    if negative > 0 {
        warnings.push(Warning::NegativeRatioWeights { count: negative });
    }
    if let Some(min_eigenvalue) = factor.min_eigenvalue() {
        warnings.push(Warning::IndefiniteWeightedGram { min_eigenvalue });
    }
    Ok(CondRatioFit {
        spec: spec.clone(),
        beta,
        h_mat,
        h_vec,
        raw_coef,
        fitted,
        factor,
        warnings,
    })
}

pub(crate) fn join_terms(terms: &[crate::basis::Monomial]) -> String {
    terms
        .iter()
        .map(|m| m.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Estimates the unconditional ratio with default options.
pub fn fit_unconditional(sample: &Sample, spec: &BasisSpec) -> Result<UncondRatioFit> {
    fit_unconditional_with(sample, spec, FitOptions::default())
}

pub fn fit_unconditional_with(
    sample: &Sample,
    spec: &BasisSpec,
    options: FitOptions,
) -> Result<UncondRatioFit> {
    let u = options.evaluate(sample, spec.u_terms());
    fit_unconditional_on(&u, spec, options)
}

/// r̂(y, z).
pub fn eval_r(fit: &UncondRatioFit, y: &[f64], z: &[f64]) -> f64 {
    fit.raw_coef
        .dot(&DVector::from_vec(eval_u(&fit.spec, y, z)))
}

/// Estimates the conditional ratio, weighting by `r_fit` (fitted on the same
/// sample with the same spec).
pub fn fit_conditional(
    sample: &Sample,
    spec: &BasisSpec,
    r_fit: &UncondRatioFit,
) -> Result<CondRatioFit> {
    if r_fit.fitted.len() != sample.n() {
        return Err(Error::InvalidConfig(
            "unconditional fit was produced from a different sample".into(),
        ));
    }
    let v = r_fit.options.evaluate(sample, spec.v_terms());
    let h_mat = weighted_gram(v.diag(), Some(&r_fit.fitted));
    fit_conditional_on(&v, spec, &r_fit.fitted, h_mat)
}

/// π̂(x, y, z).
pub fn eval_pi(fit: &CondRatioFit, x: &[f64], y: &[f64], z: &[f64]) -> f64 {
    fit.raw_coef
        .dot(&DVector::from_vec(eval_v(&fit.spec, x, y, z)))
}

/// Residuals of the two balancing identities:
/// `n⁻¹ Σ r̂_t u_t − b̂` and `n⁻¹ Σ π̂_t r̂_t v_t − ĥ`, in working coordinates.
pub fn balance_residuals(
    sample: &Sample,
    spec: &BasisSpec,
    r_fit: &UncondRatioFit,
    pi_fit: &CondRatioFit,
) -> (DVector<f64>, DVector<f64>) {
    let opts = r_fit.options;
    let n = sample.n() as f64;
    let u = opts.evaluate(sample, spec.u_terms());
    let v = opts.evaluate(sample, spec.v_terms());
    let r = &r_fit.fitted;
    let first = u.diag().tr_mul(r) / n - &r_fit.b_vec;
    let weights = r.component_mul(&pi_fit.fitted);
    let second = v.diag().tr_mul(&weights) / n - &pi_fit.h_vec;
    (first, second)
}
