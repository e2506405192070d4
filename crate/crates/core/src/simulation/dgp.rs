//! Bivariate time-series designs. Each produces the lag-1 triple
//! (X_{t−1}, Y_t, Y_{t−1}), so conditional independence of the first two
//! given the third is Granger non-causality from X to Y.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::Sample;

/// Size designs end in `s` (X does not cause Y); power designs end in `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DgpKind {
    Dgp1s,
    Dgp2s,
    Dgp3s,
    Dgp1p,
    Dgp2p,
    Dgp3p,
    Dgp4p,
    Dgp5p,
    Dgp6p,
}

impl DgpKind {
    pub const ALL: [DgpKind; 9] = [
        DgpKind::Dgp1s,
        DgpKind::Dgp2s,
        DgpKind::Dgp3s,
        DgpKind::Dgp1p,
        DgpKind::Dgp2p,
        DgpKind::Dgp3p,
        DgpKind::Dgp4p,
        DgpKind::Dgp5p,
        DgpKind::Dgp6p,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DgpKind::Dgp1s => "DGP1s",
            DgpKind::Dgp2s => "DGP2s",
            DgpKind::Dgp3s => "DGP3s",
            DgpKind::Dgp1p => "DGP1p",
            DgpKind::Dgp2p => "DGP2p",
            DgpKind::Dgp3p => "DGP3p",
            DgpKind::Dgp4p => "DGP4p",
            DgpKind::Dgp5p => "DGP5p",
            DgpKind::Dgp6p => "DGP6p",
        }
    }

    /// Whether X_{t−1} ⊥ Y_t | Y_{t−1} holds.
    pub fn is_null(self) -> bool {
        matches!(self, DgpKind::Dgp1s | DgpKind::Dgp2s | DgpKind::Dgp3s)
    }

    fn index(self) -> u64 {
        DgpKind::ALL.iter().position(|k| *k == self).unwrap() as u64
    }
}

impl fmt::Display for DgpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DgpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DgpKind::ALL
            .iter()
            .copied()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown DGP '{s}'; expected one of {}",
                    DgpKind::ALL
                        .map(|k| k.name().to_ascii_lowercase())
                        .join(", ")
                ))
            })
    }
}

/// One simulation design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub kind: DgpKind,
    /// Number of triples returned.
    pub n: usize,
    /// Initial steps discarded.
    pub burn_in: usize,
    pub seed: u64,
}

impl DgpSpec {
    pub const DEFAULT_BURN_IN: usize = 200;

    pub fn new(kind: DgpKind, n: usize, seed: u64) -> Self {
        Self {
            kind,
            n,
            burn_in: Self::DEFAULT_BURN_IN,
            seed,
        }
    }

    pub(crate) fn stream_key(&self) -> [u64; 2] {
        [self.kind.index(), self.n as u64]
    }
}

fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// [`generate`] on the stream keyed by the spec's own seed, kind and length.
pub fn generate_seeded(dgp: &DgpSpec) -> Result<Sample> {
    let key = dgp.stream_key();
    generate(dgp, &mut crate::rng::stream(dgp.seed, &key))
}

/// Simulates the two series and returns `n` triples.
///
/// States start at zero and conditional variances at their intercept 0.01.
pub fn generate<R: Rng + ?Sized>(dgp: &DgpSpec, rng: &mut R) -> Result<Sample> {
    if dgp.n < 10 {
        return Err(Error::InvalidConfig(format!(
            "series length must be >= 10, got {}",
            dgp.n
        )));
    }
    let steps = dgp.burn_in + dgp.n + 1;
    let mut xs = Vec::with_capacity(steps);
    let mut ys = Vec::with_capacity(steps);
    let (mut x, mut y) = (0.0f64, 0.0f64);
    let (mut h1, mut h2) = (0.01f64, 0.01f64);
    for step in 0..steps {
        let e1: f64 = rng.sample(StandardNormal);
        let e2: f64 = rng.sample(StandardNormal);
        let (xp, yp) = (x, y);
        match dgp.kind {
            DgpKind::Dgp1s => {
                y = 0.5 * yp + e1;
                x = 0.5 * xp + e2;
            }
            DgpKind::Dgp2s => {
                let h = 0.01 + 0.5 * yp * yp;
                y = h.sqrt() * e1;
                x = 0.5 * xp + e2;
            }
            DgpKind::Dgp3s => {
                h1 = 0.01 + 0.9 * h1 + 0.05 * yp * yp;
                h2 = 0.01 + 0.9 * h2 + 0.05 * xp * xp;
                y = h1.sqrt() * e1;
                x = h2.sqrt() * e2;
            }
            DgpKind::Dgp1p => {
                y = 0.5 * yp + 0.5 * xp + e1;
                x = 0.5 * xp + e2;
            }
            DgpKind::Dgp2p => {
                y = 0.5 * yp + 0.5 * xp * xp + e1;
                x = 0.5 * xp + e2;
            }
            DgpKind::Dgp3p => {
                y = 0.5 * yp * xp + e1;
                x = 0.5 * xp + e2;
            }
            DgpKind::Dgp4p => {
                y = 0.5 * yp + 0.5 * xp * e1;
                x = 0.5 * xp + e2;
            }
            DgpKind::Dgp5p => {
                h1 = 0.01 + 0.1 * h1 + 0.4 * yp * yp + 0.1 * xp * xp;
                h2 = 0.01 + 0.9 * h2 + 0.05 * xp * xp;
                y = h1.sqrt() * e1;
                x = h2.sqrt() * e2;
            }
            DgpKind::Dgp6p => {
                y = 0.5 * yp + 4.0 * phi(yp / 0.1) * xp + e1;
                x = 0.5 * xp + e2;
            }
        }
        if !(x.is_finite() && y.is_finite() && h1.is_finite() && h2.is_finite()) {
            return Err(Error::Generation {
                dgp: dgp.kind.name().to_string(),
                step,
            });
        }
        xs.push(x);
        ys.push(y);
    }
    let xs = &xs[dgp.burn_in..];
    let ys = &ys[dgp.burn_in..];
    Sample::from_columns(&xs[..dgp.n], &ys[1..], &ys[..dgp.n])
}
