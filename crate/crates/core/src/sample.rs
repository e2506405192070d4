//! Aligned (X, Y, Z) observations and the rank transform.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Three aligned column groups of observations, one row per time point.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    z: DMatrix<f64>,
}

impl Sample {
    /// Builds a sample from three `n × d` matrices with a common row count.
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>, z: DMatrix<f64>) -> Result<Self> {
        let n = x.nrows();
        if y.nrows() != n || z.nrows() != n {
            return Err(Error::InvalidSample(format!(
                "row counts differ: x={}, y={}, z={}",
                n,
                y.nrows(),
                z.nrows()
            )));
        }
        if n < 2 {
            return Err(Error::InvalidSample(format!(
                "need at least 2 rows, got {n}"
            )));
        }
        for (name, m) in [("x", &x), ("y", &y), ("z", &z)] {
            if m.ncols() == 0 {
                return Err(Error::InvalidSample(format!("{name} has no columns")));
            }
            if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidSample(format!(
                    "{name} has a non-finite entry at row {}",
                    pos % n
                )));
            }
        }
        Ok(Self { x, y, z })
    }

    /// Scalar X, Y, Z columns.
    pub fn from_columns(x: &[f64], y: &[f64], z: &[f64]) -> Result<Self> {
        Self::new(
            DMatrix::from_column_slice(x.len(), 1, x),
            DMatrix::from_column_slice(y.len(), 1, y),
            DMatrix::from_column_slice(z.len(), 1, z),
        )
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.x.ncols(), self.y.ncols(), self.z.ncols())
    }

    /// Whether every group is a single column.
    pub fn is_scalar(&self) -> bool {
        self.dims() == (1, 1, 1)
    }

    /// Per-row product of the coordinates of each group; a monomial with
    /// exponent `e` on a vector group evaluates to this product raised to `e`.
    pub(crate) fn coordinate_products(&self) -> [Vec<f64>; 3] {
        let prod = |m: &DMatrix<f64>| -> Vec<f64> {
            (0..m.nrows())
                .map(|i| m.row(i).iter().product::<f64>())
                .collect()
        };
        [prod(&self.x), prod(&self.y), prod(&self.z)]
    }
}

/// Replaces each coordinate column by its empirical CDF value `rank / n`,
/// using average ranks for ties. Output entries lie in `(0, 1]`.
pub fn rank_transform(sample: &Sample) -> Sample {
    let ranked = |m: &DMatrix<f64>| -> DMatrix<f64> {
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for (j, col) in m.column_iter().enumerate() {
            let values: Vec<f64> = col.iter().copied().collect();
            for (i, r) in ecdf_ranks(&values).into_iter().enumerate() {
                out[(i, j)] = r;
            }
        }
        out
    };
    Sample {
        x: ranked(&sample.x),
        y: ranked(&sample.y),
        z: ranked(&sample.z),
    }
}

/// Average-rank empirical CDF of one column.
pub fn ecdf_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; n];
    let nf = n as f64;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // 1-based positions start+1 ..= end share their mean
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            out[idx] = avg / nf;
        }
        start = end;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distinct_values() {
        assert_eq!(
            ecdf_ranks(&[3.0, 1.0, 2.0]),
            vec![1.0, 1.0 / 3.0, 2.0 / 3.0]
        );
    }

    #[test]
    fn monotone_map_gives_identical_ranks() {
        let raw = [3.0f64, 1.0, 2.0];
        let mapped: Vec<f64> = raw.iter().map(|v| v.exp()).collect();
        assert_eq!(ecdf_ranks(&raw), ecdf_ranks(&mapped));
    }

    #[test]
    fn ties_get_average_rank() {
        assert_eq!(ecdf_ranks(&[1.0, 1.0, 2.0]), vec![0.5, 0.5, 1.0]);
    }

    #[test]
    fn rejects_mismatched_rows() {
        let err = Sample::from_columns(&[1.0, 2.0], &[1.0, 2.0, 3.0], &[1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidSample(_)));
    }

    #[test]
    fn rejects_non_finite() {
        let err = Sample::from_columns(&[1.0, f64::NAN], &[1.0, 2.0], &[1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidSample(_)));
    }

    #[test]
    fn rejects_single_row() {
        assert!(Sample::from_columns(&[1.0], &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn rank_transform_is_idempotent_without_ties() {
        let s = Sample::from_columns(
            &[0.3, -1.0, 2.5, 0.1],
            &[4.0, 3.0, 2.0, 1.0],
            &[1.0, 9.0, 5.0, 7.0],
        )
        .unwrap();
        let once = rank_transform(&s);
        assert_eq!(rank_transform(&once), once);
    }
}
