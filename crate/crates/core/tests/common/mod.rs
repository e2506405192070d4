#![allow(dead_code)]

use drci::rng::{stream, StreamRng};
use drci::{Monomial, Sample};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn normals(rng: &mut StreamRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn uniforms(rng: &mut StreamRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// X, Y, Z on (0, 1) with Y depending on Z and mildly on X.
pub fn mixed_sample(n: usize, seed: u64) -> Sample {
    let mut rng = stream(seed, &[0xA5]);
    let x = uniforms(&mut rng, n);
    let z = uniforms(&mut rng, n);
    let e = uniforms(&mut rng, n);
    let y: Vec<f64> = (0..n)
        .map(|i| 0.5 * z[i] + 0.2 * x[i] + 0.3 * e[i])
        .collect();
    Sample::from_columns(&x, &y, &z).unwrap()
}

/// Independent standard normal X, Y, Z.
pub fn iid_normal_sample(n: usize, seed: u64) -> Sample {
    let mut rng = stream(seed, &[0x5A]);
    let x = normals(&mut rng, n);
    let y = normals(&mut rng, n);
    let z = normals(&mut rng, n);
    Sample::from_columns(&x, &y, &z).unwrap()
}

pub fn col(m: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    m.column(0).iter().copied().collect()
}

/// Monomial value computed term by term with powf, independent of the
/// library's power tables.
pub fn naive_monomial(m: &Monomial, x: f64, y: f64, z: f64) -> f64 {
    x.powf(m.ex as f64) * y.powf(m.ey as f64) * z.powf(m.ez as f64)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
