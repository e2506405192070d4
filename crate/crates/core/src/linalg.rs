//! Symmetric linear systems: factorization with a reciprocal-condition check.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

/// Systems whose 1-norm reciprocal condition falls below this are rejected.
pub const RCOND_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone)]
enum Factor {
    Cholesky(Cholesky<f64, Dyn>),
    Eigen(SymmetricEigen<f64, Dyn>),
}

/// Factorization of a symmetric matrix. Positive definite matrices use a
/// Cholesky factor; anything else falls back to a symmetric eigendecomposition.
#[derive(Debug, Clone)]
pub struct SymFactor {
    factor: Factor,
    inverse: DMatrix<f64>,
    rcond: f64,
}

/// Failure to factor: the reciprocal condition that was observed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singular {
    pub rcond: f64,
}

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

impl SymFactor {
    pub fn new(a: &DMatrix<f64>) -> Result<Self, Singular> {
        debug_assert!(a.is_square());
        let anorm = norm1(a);
        if !(anorm.is_finite()) || anorm == 0.0 {
            return Err(Singular { rcond: 0.0 });
        }
        let (factor, inverse) = match Cholesky::new(a.clone()) {
            Some(ch) => {
                let inv = ch.inverse();
                (Factor::Cholesky(ch), inv)
            }
            None => {
                let eig = SymmetricEigen::new(a.clone());
                let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if eig
                    .eigenvalues
                    .iter()
                    .any(|l| l.abs() <= scale * f64::EPSILON)
                {
                    return Err(Singular { rcond: 0.0 });
                }
                let q = &eig.eigenvectors;
                let inv_l = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
                let inv = q * inv_l * q.transpose();
                (Factor::Eigen(eig), inv)
            }
        };
        let rcond = 1.0 / (anorm * norm1(&inverse));
        if !(rcond >= RCOND_THRESHOLD) {
            return Err(Singular {
                rcond: if rcond.is_finite() { rcond } else { 0.0 },
            });
        }
        Ok(Self {
            factor,
            inverse,
            rcond,
        })
    }

    pub fn rcond(&self) -> f64 {
        self.rcond
    }

    pub fn is_positive_definite(&self) -> bool {
        matches!(self.factor, Factor::Cholesky(_))
    }

    /// Smallest eigenvalue when the eigendecomposition path was taken.
    pub fn min_eigenvalue(&self) -> Option<f64> {
        match &self.factor {
            Factor::Cholesky(_) => None,
            Factor::Eigen(e) => e.eigenvalues.iter().copied().reduce(f64::min),
        }
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        match &self.factor {
            Factor::Cholesky(ch) => ch.solve(b),
            Factor::Eigen(e) => {
                let qt_b = e.eigenvectors.transpose() * b;
                let scaled = qt_b.component_div(&e.eigenvalues);
                &e.eigenvectors * scaled
            }
        }
    }
}

/// `‖a x − b‖ / ‖b‖`, or the absolute residual when `b` is zero.
pub fn relative_residual(a: &DMatrix<f64>, x: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let r = (a * x - b).norm();
    let bn = b.norm();
    if bn > 0.0 {
        r / bn
    } else {
        r
    }
}
