//! The standardized conditional density ratio statistic.
//!
//! Î = (2n)⁻¹ Σ_t (π̂_t − 1)² r̂_t is centered by the bias estimate B̂ and
//! scaled by σ̂, both built from the per-observation influence vectors v̂_i.
//! The test rejects when 2n(Î − B̂)/σ̂ exceeds the upper α normal quantile.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisSpec, Monomial};
use crate::design::EvaluatedBasis;
use crate::error::{Error, Result};
use crate::normal;
use crate::ratio::{
    fit_conditional_on, fit_unconditional_on, weighted_gram, CondRatioFit, FitOptions,
    UncondRatioFit, Warning,
};
use crate::sample::{rank_transform, Sample};

/// Below this σ̂ the standardized statistic is treated as undefined.
pub const SIGMA_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOptions {
    pub alpha: f64,
    /// Replace every column by its empirical CDF before fitting.
    pub rank_transform: bool,
    pub fit: FitOptions,
    pub influence: InfluenceForm,
}

/// Which per-observation influence vectors feed B̂ and σ̂.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum InfluenceForm {
    /// Four-term form: n⁻¹Σ_j v(X_i,Y_j,Z_i) − MΣ̂⁻¹ n⁻¹Σ_j u(Y_j,Z_i)
    /// + n⁻¹Σ_t v_t r̂_t − v_i r̂_i.
    #[default]
    FourTerm,
    /// First-order expansion of ĥ − M̂Σ̂⁻¹b̂ with every pair-average and
    /// every sample moment linearized, centered to mean zero.
    Full,
}

impl Default for TestOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            rank_transform: true,
            fit: FitOptions::default(),
            influence: InfluenceForm::default(),
        }
    }
}

impl TestOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Outcome of one test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub i_hat: f64,
    /// Î through the balanced form (2n)⁻¹ Σ π̂² r̂ − 1/2; equal to `i_hat` up
    /// to rounding.
    pub i_hat_equiv: f64,
    pub b_hat: f64,
    pub sigma_hat: f64,
    /// 2n(Î − B̂)/σ̂.
    pub t_stat: f64,
    /// 1 − Φ(t_stat).
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    pub spec: BasisSpec,
    pub n: usize,
    pub warnings: Vec<Warning>,
}

/// Both algebraic forms of Î.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IHat {
    pub value: f64,
    pub equivalent_form: f64,
}

impl IHat {
    pub fn difference(&self) -> f64 {
        self.value - self.equivalent_form
    }
}

fn i_hat_from(r: &DVector<f64>, pi: &DVector<f64>) -> IHat {
    let n = r.len() as f64;
    let mut dev = 0.0;
    let mut sq = 0.0;
    for (rt, pt) in r.iter().zip(pi.iter()) {
        dev += (pt - 1.0) * (pt - 1.0) * rt;
        sq += pt * pt * rt;
    }
    IHat {
        value: dev / (2.0 * n),
        equivalent_form: sq / (2.0 * n) - 0.5,
    }
}

/// Î from fits on `sample`.
pub fn compute_i(
    sample: &Sample,
    _spec: &BasisSpec,
    r_fit: &UncondRatioFit,
    pi_fit: &CondRatioFit,
) -> IHat {
    debug_assert_eq!(sample.n(), r_fit.fitted().len());
    i_hat_from(r_fit.fitted(), pi_fit.fitted())
}

/// Rows v̂_i of the estimated influence function (n × K).
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceMatrix {
    rows: DMatrix<f64>,
}

impl InfluenceMatrix {
    pub fn new(rows: DMatrix<f64>) -> Self {
        Self { rows }
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn n(&self) -> usize {
        self.rows.nrows()
    }
}

/// d_i = c_i + c'_i − v_i r̂_i − Cᵀ(w_i + w'_i − u_i r̂_i), centered, with
/// C = Σ̂⁻¹Mᵀ and c, c' (w, w') the two one-sided pair averages of v (u).
fn full_influence_rows(
    u: &EvaluatedBasis,
    v: &EvaluatedBasis,
    r_fit: &UncondRatioFit,
) -> DMatrix<f64> {
    let n = v.n() as f64;
    let r = r_fit.fitted();
    let m_t = u.diag().tr_mul(v.diag()) / n;
    let c = r_fit.factor().inverse() * m_t;
    let mut v_part = v.cross() + v.cross_y();
    let mut u_part = u.cross() + u.cross_y();
    for i in 0..v_part.nrows() {
        let ri = r[i];
        for k in 0..v_part.ncols() {
            v_part[(i, k)] -= v.diag()[(i, k)] * ri;
        }
        for k in 0..u_part.ncols() {
            u_part[(i, k)] -= u.diag()[(i, k)] * ri;
        }
    }
    let mut rows = v_part - u_part * c;
    for mut col in rows.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    rows
}

/// Rows of the influence matrix. Four-term form:
/// v̂_i = n⁻¹Σ_j v(X_i,Y_j,Z_i) − M Σ̂⁻¹ n⁻¹Σ_j u(Y_j,Z_i) + n⁻¹Σ_t v_t r̂_t − v_i r̂_i
/// with M = n⁻¹ Σ_t v_t u_tᵀ. The Σ̂⁻¹ factor is the identity for an
/// orthonormalized u basis and keeps v̂ invariant to recombinations of u.
pub(crate) fn influence_rows_with(
    u: &EvaluatedBasis,
    v: &EvaluatedBasis,
    r_fit: &UncondRatioFit,
    form: InfluenceForm,
) -> DMatrix<f64> {
    if form == InfluenceForm::Full {
        return full_influence_rows(u, v, r_fit);
    }
    let n = v.n() as f64;
    let r = r_fit.fitted();
    let m_t = u.diag().tr_mul(v.diag()) / n; // K0 × K
    let c = r_fit.factor().inverse() * m_t;
    let mut rows = v.cross() - u.cross() * c;
    let mean_vr = v.diag().tr_mul(r) / n;
    for (i, mut row) in rows.row_iter_mut().enumerate() {
        let ri = r[i];
        for (k, e) in row.iter_mut().enumerate() {
            *e += mean_vr[k] - v.diag()[(i, k)] * ri;
        }
    }
    rows
}

/// Four-term influence rows, in the coordinates of `r_fit`.
pub fn influence_matrix(
    sample: &Sample,
    spec: &BasisSpec,
    r_fit: &UncondRatioFit,
) -> InfluenceMatrix {
    influence_matrix_with(sample, spec, r_fit, InfluenceForm::FourTerm)
}

pub fn influence_matrix_with(
    sample: &Sample,
    spec: &BasisSpec,
    r_fit: &UncondRatioFit,
    form: InfluenceForm,
) -> InfluenceMatrix {
    let opts = r_fit.options();
    let u = opts.evaluate(sample, spec.u_terms());
    let v = opts.evaluate(sample, spec.v_terms());
    InfluenceMatrix::new(influence_rows_with(&u, &v, r_fit, form))
}

/// Σ_i W_ii and Σ_{i≠j} W_ij² for W = V̂ Ĥ⁻¹ V̂ᵀ, without forming W.
/// `gram` is V̂ᵀV̂.
fn w_moments(inv_h: &DMatrix<f64>, gram: &DMatrix<f64>, vhat: &DMatrix<f64>) -> (f64, f64) {
    let p = inv_h * gram;
    let trace = p.trace();
    // ‖W‖_F² = tr(Ĥ⁻¹ G Ĥ⁻¹ G)
    let k = p.nrows();
    let mut frob = 0.0;
    for a in 0..k {
        for b in 0..k {
            frob += p[(a, b)] * p[(b, a)];
        }
    }
    let proj = vhat * inv_h;
    let mut diag_sq = 0.0;
    for i in 0..vhat.nrows() {
        let w_ii = proj.row(i).dot(&vhat.row(i));
        diag_sq += w_ii * w_ii;
    }
    (trace, (frob - diag_sq).max(0.0))
}

fn b_from_trace(trace: f64, n: usize) -> f64 {
    let n = n as f64;
    trace / (2.0 * n * n)
}

fn sigma_from_offdiag(offdiag_sq: f64, n: usize) -> Result<f64> {
    let n = n as f64;
    let sigma = (2.0 / (n * (n - 1.0)) * offdiag_sq).sqrt();
    if !(sigma > SIGMA_FLOOR) {
        return Err(Error::DegenerateStatistic);
    }
    Ok(sigma)
}

/// B̂ = (2n²)⁻¹ Σ_i v̂_iᵀ Ĥ⁻¹ v̂_i.
pub fn compute_b(influence: &InfluenceMatrix, pi_fit: &CondRatioFit) -> f64 {
    let rows = influence.rows();
    let trace = (pi_fit.h_inverse() * rows.tr_mul(rows)).trace();
    b_from_trace(trace, influence.n())
}

/// σ̂ = [2/(n(n−1)) Σ_{i≠j} (v̂_iᵀ Ĥ⁻¹ v̂_j)²]^{1/2}.
pub fn compute_sigma(influence: &InfluenceMatrix, pi_fit: &CondRatioFit) -> Result<f64> {
    let rows = influence.rows();
    let (_, off) = w_moments(pi_fit.h_inverse(), &rows.tr_mul(rows), rows);
    sigma_from_offdiag(off, influence.n())
}

/// Runs the test with one basis specification.
pub fn run_test(sample: &Sample, spec: &BasisSpec, options: &TestOptions) -> Result<TestResult> {
    evaluate_candidates(sample, std::slice::from_ref(spec), options)
        .pop()
        .expect("one candidate in, one result out")
}

fn selected_square(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

/// Runs the test for each candidate on the same sample.
///
/// Candidates sharing a u basis share one r̂ fit; their v bases are evaluated
/// once as a union, and every candidate works on a column subset of it.
pub fn evaluate_candidates(
    sample: &Sample,
    candidates: &[BasisSpec],
    options: &TestOptions,
) -> Vec<Result<TestResult>> {
    if let Err(e) = options.validate() {
        return candidates.iter().map(|_| Err(e.clone())).collect();
    }
    let ranked;
    let data = if options.rank_transform {
        ranked = rank_transform(sample);
        &ranked
    } else {
        sample
    };

    let mut groups: Vec<(&[Monomial], Vec<usize>)> = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        match groups.iter_mut().find(|(u, _)| *u == c.u_terms()) {
            Some((_, members)) => members.push(i),
            None => groups.push((c.u_terms(), vec![i])),
        }
    }

    let mut out: Vec<Option<Result<TestResult>>> = vec![None; candidates.len()];
    for (u_terms, members) in groups {
        let results = evaluate_group(data, candidates, u_terms, &members, options);
        for (slot, res) in members.into_iter().zip(results) {
            out[slot] = Some(res);
        }
    }
    out.into_iter()
        .map(|r| r.expect("every candidate evaluated"))
        .collect()
}

fn evaluate_group(
    data: &Sample,
    candidates: &[BasisSpec],
    u_terms: &[Monomial],
    members: &[usize],
    options: &TestOptions,
) -> Vec<Result<TestResult>> {
    let fit_opts = options.fit;
    let u = fit_opts.evaluate(data, u_terms);
    let r_fit = match fit_unconditional_on(&u, &candidates[members[0]], fit_opts) {
        Ok(f) => f,
        Err(e) => return members.iter().map(|_| Err(e.clone())).collect(),
    };
    let r = r_fit.fitted();

    let mut union: Vec<Monomial> = Vec::new();
    let positions: Vec<Vec<usize>> = members
        .iter()
        .map(|&m| {
            candidates[m]
                .v_terms()
                .iter()
                .map(|t| match union.iter().position(|x| x == t) {
                    Some(p) => p,
                    None => {
                        union.push(*t);
                        union.len() - 1
                    }
                })
                .collect()
        })
        .collect();

    let v_all = fit_opts.evaluate(data, &union);
    let h_all = weighted_gram(v_all.diag(), Some(r));
    let vhat_all = influence_rows_with(&u, &v_all, &r_fit, options.influence);
    let gram_all = vhat_all.tr_mul(&vhat_all);

    members
        .iter()
        .zip(&positions)
        .map(|(&m, idx)| {
            let v = v_all.select(idx);
            let h = selected_square(&h_all, idx);
            let vhat = vhat_all.select_columns(idx);
            let gram = selected_square(&gram_all, idx);
            finish(&candidates[m], &v, r, h, &vhat, &gram, options)
        })
        .collect()
}

fn finish(
    spec: &BasisSpec,
    v: &EvaluatedBasis,
    r: &DVector<f64>,
    h: DMatrix<f64>,
    vhat: &DMatrix<f64>,
    gram: &DMatrix<f64>,
    options: &TestOptions,
) -> Result<TestResult> {
    let n = v.n();
    let pi_fit = fit_conditional_on(v, spec, r, h)?;
    let ihat = i_hat_from(r, pi_fit.fitted());
    let (trace, off) = w_moments(pi_fit.h_inverse(), gram, vhat);
    let b_hat = b_from_trace(trace, n);
    let sigma_hat = sigma_from_offdiag(off, n)?;
    let t_stat = 2.0 * n as f64 * (ihat.value - b_hat) / sigma_hat;
    Ok(TestResult {
        i_hat: ihat.value,
        i_hat_equiv: ihat.equivalent_form,
        b_hat,
        sigma_hat,
        t_stat,
        p_value: normal::upper_tail(t_stat),
        alpha: options.alpha,
        reject: t_stat > normal::quantile(1.0 - options.alpha),
        spec: spec.clone(),
        n,
        warnings: pi_fit.warnings().to_vec(),
    })
}

/// Runs the test with the bases replaced by `a_u · u` and `a_v · v` for
/// invertible `a_u` (K₀ × K₀) and `a_v` (K × K). The spans, and hence every
/// fitted function and the statistic, are unchanged up to rounding.
pub fn run_test_recombined(
    sample: &Sample,
    spec: &BasisSpec,
    options: &TestOptions,
    a_u: &DMatrix<f64>,
    a_v: &DMatrix<f64>,
) -> Result<TestResult> {
    options.validate()?;
    if a_u.shape() != (spec.k0(), spec.k0()) || a_v.shape() != (spec.k(), spec.k()) {
        return Err(Error::InvalidConfig(format!(
            "recombination matrices must be {0}x{0} and {1}x{1}",
            spec.k0(),
            spec.k()
        )));
    }
    let data = if options.rank_transform {
        rank_transform(sample)
    } else {
        sample.clone()
    };
    let u = options.fit.evaluate(&data, spec.u_terms()).recombine(a_u);
    let r_fit = fit_unconditional_on(&u, spec, options.fit)?;
    let r = r_fit.fitted();
    let v = options.fit.evaluate(&data, spec.v_terms()).recombine(a_v);
    let h = weighted_gram(v.diag(), Some(r));
    let vhat = influence_rows_with(&u, &v, &r_fit, options.influence);
    let gram = vhat.tr_mul(&vhat);
    finish(spec, &v, r, h, &vhat, &gram, options)
}
