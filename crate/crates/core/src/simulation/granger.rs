//! Linear Granger baseline and series preprocessing.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::linalg::SymFactor;
use crate::sample::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearGrangerResult {
    /// OLS coefficient on X.
    pub coefficient: f64,
    pub t_stat: f64,
    /// Two-sided Student-t p-value with n − 3 degrees of freedom.
    pub p_value: f64,
    pub reject: bool,
}

/// OLS of Y on (1, Z, X) and the t-test of a zero X coefficient.
pub fn linear_granger_test(sample: &Sample, alpha: f64) -> Result<LinearGrangerResult> {
    if !sample.is_scalar() {
        return Err(Error::InvalidSample(
            "linear Granger test needs scalar X, Y, Z".into(),
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let n = sample.n();
    if n < 4 {
        return Err(Error::InvalidSample(format!(
            "need at least 4 rows, got {n}"
        )));
    }
    let design = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => sample.z()[(i, 0)],
        _ => sample.x()[(i, 0)],
    });
    let y = DVector::from_fn(n, |i, _| sample.y()[(i, 0)]);
    let xtx = design.tr_mul(&design);
    let factor = SymFactor::new(&xtx).map_err(|s| Error::RankDeficient { rcond: s.rcond })?;
    if !factor.is_positive_definite() {
        return Err(Error::RankDeficient {
            rcond: factor.rcond(),
        });
    }
    let coef = factor.solve(&design.tr_mul(&y));
    let resid = &y - &design * &coef;
    let df = (n - 3) as f64;
    let s2 = resid.norm_squared() / df;
    let se = (s2 * factor.inverse()[(2, 2)]).sqrt();
    let t_stat = coef[2] / se;
    let p_value = if t_stat.is_finite() {
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
        (2.0 * dist.sf(t_stat.abs())).min(1.0)
    } else if se == 0.0 && coef[2] != 0.0 {
        0.0
    } else {
        1.0
    };
    Ok(LinearGrangerResult {
        coefficient: coef[2],
        t_stat,
        p_value,
        reject: p_value < alpha,
    })
}

/// `100 · (ln s_t − ln s_{t−1})` for t = 1..len.
pub fn log_diff_transform(series: &[f64]) -> Result<Vec<f64>> {
    if let Some((i, v)) = series
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
    {
        return Err(Error::Domain(format!(
            "series value {v} at position {i} is not positive"
        )));
    }
    Ok(series
        .windows(2)
        .map(|w| 100.0 * (w[1].ln() - w[0].ln()))
        .collect())
}

/// Triples (X, Y, Z) = (a_{t−lag}, b_t, b_{t−lag}): whether `a` Granger-causes `b`.
pub fn lagged_triples(a: &[f64], b: &[f64], lag: usize) -> Result<Sample> {
    if lag < 1 {
        return Err(Error::InvalidConfig("lag must be >= 1".into()));
    }
    if a.len() != b.len() {
        return Err(Error::InvalidSample(format!(
            "series lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < lag + 2 {
        return Err(Error::InvalidSample(format!(
            "series of length {} too short for lag {lag}",
            a.len()
        )));
    }
    let m = a.len() - lag;
    Sample::from_columns(&a[..m], &b[lag..], &b[..m])
}
