//! A basis evaluated on a sample: the three families of averages the
//! estimators consume, kept together so that every linear change of basis
//! (standardization, recombination, column selection) is applied to all of
//! them consistently.

use nalgebra::{DMatrix, DVector};

use crate::basis::Monomial;
use crate::sample::Sample;

/// How the pairwise (i ≠ j) averages are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairSums {
    /// Products of marginal sums, O(n·K).
    #[default]
    Separable,
    /// Explicit double loop, O(n²·K). Kept as a reference.
    BruteForce,
}

/// Basis values on a sample, in working coordinates.
///
/// For a term `b(x, y, z)` the three pieces are
/// - `diag[t]`  = b(X_t, Y_t, Z_t)
/// - `cross[i]` = n⁻¹ Σ_j b(X_i, Y_j, Z_i)
/// - `cross_y[i]` = n⁻¹ Σ_j b(X_j, Y_i, Z_j)
/// - `offdiag`  = {n(n−1)}⁻¹ Σ_{i≠j} b(X_i, Y_j, Z_i)
///
/// `map` sends the raw monomial values to working coordinates.
#[derive(Debug, Clone)]
pub struct EvaluatedBasis {
    terms: Vec<Monomial>,
    diag: DMatrix<f64>,
    cross: DMatrix<f64>,
    cross_y: DMatrix<f64>,
    offdiag: DVector<f64>,
    map: DMatrix<f64>,
}

struct PowerTable {
    // powers[e][t] = base[t]^e
    powers: Vec<Vec<f64>>,
}

impl PowerTable {
    fn new(base: &[f64], max_exp: u32) -> Self {
        let mut powers = vec![vec![1.0; base.len()]];
        for e in 1..=max_exp as usize {
            let next: Vec<f64> = powers[e - 1].iter().zip(base).map(|(p, b)| p * b).collect();
            powers.push(next);
        }
        Self { powers }
    }

    #[inline]
    fn get(&self, e: u32) -> &[f64] {
        &self.powers[e as usize]
    }
}

impl EvaluatedBasis {
    /// Evaluates `terms` on the sample, in raw monomial coordinates.
    pub fn evaluate(sample: &Sample, terms: &[Monomial], mode: PairSums) -> Self {
        let n = sample.n();
        let k = terms.len();
        let [px, py, pz] = sample.coordinate_products();
        let max = |f: fn(&Monomial) -> u32| terms.iter().map(f).max().unwrap_or(0);
        let tx = PowerTable::new(&px, max(|m| m.ex));
        let ty = PowerTable::new(&py, max(|m| m.ey));
        let tz = PowerTable::new(&pz, max(|m| m.ez));

        let mut diag = DMatrix::zeros(n, k);
        let mut cross = DMatrix::zeros(n, k);
        let mut cross_y = DMatrix::zeros(n, k);
        let mut offdiag = DVector::zeros(k);
        let nf = n as f64;
        let pairs = nf * (nf - 1.0);

        for (col, m) in terms.iter().enumerate() {
            let xs = tx.get(m.ex);
            let ys = ty.get(m.ey);
            let zs = tz.get(m.ez);
            let mut diag_sum = 0.0;
            for t in 0..n {
                let v = xs[t] * ys[t] * zs[t];
                diag[(t, col)] = v;
                diag_sum += v;
            }
            match mode {
                PairSums::Separable => {
                    let y_sum: f64 = ys.iter().sum();
                    let y_mean = y_sum / nf;
                    let mut xz_sum = 0.0;
                    for i in 0..n {
                        let xz = xs[i] * zs[i];
                        cross[(i, col)] = xz * y_mean;
                        xz_sum += xz;
                    }
                    offdiag[col] = (xz_sum * y_sum - diag_sum) / pairs;
                    let xz_mean = xz_sum / nf;
                    for i in 0..n {
                        cross_y[(i, col)] = ys[i] * xz_mean;
                    }
                }
                PairSums::BruteForce => {
                    let mut off = 0.0;
                    for i in 0..n {
                        let xz = xs[i] * zs[i];
                        let mut row = 0.0;
                        for (j, yj) in ys.iter().enumerate() {
                            let v = xz * yj;
                            row += v;
                            if j != i {
                                off += v;
                            }
                        }
                        cross[(i, col)] = row / nf;
                    }
                    for j in 0..n {
                        let col_sum: f64 = (0..n).map(|i| xs[i] * zs[i] * ys[j]).sum();
                        cross_y[(j, col)] = col_sum / nf;
                    }
                    offdiag[col] = off / pairs;
                }
            }
        }

        Self {
            terms: terms.to_vec(),
            diag,
            cross,
            cross_y,
            offdiag,
            map: DMatrix::identity(k, k),
        }
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn n(&self) -> usize {
        self.diag.nrows()
    }

    pub fn k(&self) -> usize {
        self.diag.ncols()
    }

    pub fn diag(&self) -> &DMatrix<f64> {
        &self.diag
    }

    pub fn cross(&self) -> &DMatrix<f64> {
        &self.cross
    }

    pub fn cross_y(&self) -> &DMatrix<f64> {
        &self.cross_y
    }

    pub fn offdiag(&self) -> &DVector<f64> {
        &self.offdiag
    }

    pub fn map(&self) -> &DMatrix<f64> {
        &self.map
    }

    fn constant_index(&self) -> Option<usize> {
        self.terms.iter().position(Monomial::is_constant)
    }

    /// Centers and scales every non-constant column by its mean and standard
    /// deviation over the diagonal evaluations. Columns with zero spread are
    /// left untouched (they are collinear with the constant and will be
    /// caught by the condition check).
    pub fn standardize(mut self) -> Self {
        let Some(c) = self.constant_index() else {
            return self;
        };
        let n = self.n() as f64;
        for col in 0..self.k() {
            if col == c {
                continue;
            }
            let column = self.diag.column(col);
            let mean = column.sum() / n;
            let var = column.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let sd = var.sqrt();
            if !(sd > 0.0) || !sd.is_finite() {
                continue;
            }
            for v in self.diag.column_mut(col).iter_mut() {
                *v = (*v - mean) / sd;
            }
            for v in self.cross.column_mut(col).iter_mut() {
                *v = (*v - mean) / sd;
            }
            for v in self.cross_y.column_mut(col).iter_mut() {
                *v = (*v - mean) / sd;
            }
            self.offdiag[col] = (self.offdiag[col] - mean) / sd;
            let const_row = self.map.row(c).clone_owned();
            let mut row = self.map.row_mut(col);
            row -= const_row * mean;
            row /= sd;
        }
        self
    }

    /// Replaces the basis `b` by `A b` for an invertible `A` (K × K).
    pub fn recombine(self, a: &DMatrix<f64>) -> Self {
        assert_eq!(
            a.shape(),
            (self.k(), self.k()),
            "recombination must be K x K"
        );
        Self {
            terms: self.terms,
            diag: &self.diag * a.transpose(),
            cross: &self.cross * a.transpose(),
            cross_y: &self.cross_y * a.transpose(),
            offdiag: a * &self.offdiag,
            map: a * &self.map,
        }
    }

    /// Keeps the listed columns. Valid when the working coordinates of the kept
    /// columns only involve kept raw terms (true for raw and standardized bases
    /// whose selection includes the constant).
    pub fn select(&self, cols: &[usize]) -> Self {
        let n = self.n();
        let k = cols.len();
        let mut diag = DMatrix::zeros(n, k);
        let mut cross = DMatrix::zeros(n, k);
        let mut cross_y = DMatrix::zeros(n, k);
        let mut offdiag = DVector::zeros(k);
        let mut map = DMatrix::zeros(k, k);
        for (dst, &src) in cols.iter().enumerate() {
            diag.set_column(dst, &self.diag.column(src));
            cross.set_column(dst, &self.cross.column(src));
            cross_y.set_column(dst, &self.cross_y.column(src));
            offdiag[dst] = self.offdiag[src];
            for (d2, &s2) in cols.iter().enumerate() {
                map[(dst, d2)] = self.map[(src, s2)];
            }
        }
        Self {
            terms: cols.iter().map(|&c| self.terms[c]).collect(),
            diag,
            cross,
            cross_y,
            offdiag,
            map,
        }
    }

    /// Converts working-coordinate coefficients to coefficients on the raw
    /// monomials, so that `coef · working(p) = raw_coef · raw(p)`.
    pub fn raw_coefficients(&self, coef: &DVector<f64>) -> DVector<f64> {
        self.map.transpose() * coef
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::tensor_terms;

    fn sample() -> Sample {
        Sample::from_columns(
            &[0.1, 0.7, 0.3, 0.9, 0.5],
            &[0.4, 0.2, 0.8, 0.6, 1.0],
            &[0.9, 0.3, 0.5, 0.1, 0.7],
        )
        .unwrap()
    }

    #[test]
    fn separable_matches_brute_force() {
        let s = sample();
        let terms = tensor_terms(2, 2, 2);
        let fast = EvaluatedBasis::evaluate(&s, &terms, PairSums::Separable);
        let slow = EvaluatedBasis::evaluate(&s, &terms, PairSums::BruteForce);
        for (a, b) in fast.offdiag().iter().zip(slow.offdiag().iter()) {
            assert!((a - b).abs() <= 1e-13 * b.abs().max(1e-300));
        }
        assert!((fast.cross() - slow.cross()).amax() < 1e-15);
        assert!((fast.cross_y() - slow.cross_y()).amax() < 1e-15);
        assert_eq!(fast.diag(), slow.diag());
    }

    #[test]
    fn standardization_keeps_raw_coefficients_consistent() {
        let s = sample();
        let terms = tensor_terms(1, 1, 1);
        let raw = EvaluatedBasis::evaluate(&s, &terms, PairSums::Separable);
        let std = raw.clone().standardize();
        let coef = DVector::from_fn(terms.len(), |i, _| 0.3 * i as f64 - 0.5);
        let raw_coef = std.raw_coefficients(&coef);
        let lhs = std.diag() * &coef;
        let rhs = raw.diag() * &raw_coef;
        assert!((lhs - rhs).amax() < 1e-12);
        for col in 1..terms.len() {
            assert!(std.diag().column(col).sum().abs() < 1e-12);
        }
    }
}
