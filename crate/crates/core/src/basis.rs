//! Polynomial sieve bases: monomial terms, basis specifications, pointwise
//! evaluation and the default candidate grid.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A tensor monomial `x^ex · y^ey · z^ez`.
///
/// On a vector-valued group the exponent applies to every coordinate, so the
/// monomial evaluates to the product of coordinates raised to that exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Monomial {
    pub ex: u32,
    pub ey: u32,
    pub ez: u32,
}

impl Monomial {
    pub const CONSTANT: Monomial = Monomial {
        ex: 0,
        ey: 0,
        ez: 0,
    };

    pub const fn new(ex: u32, ey: u32, ez: u32) -> Self {
        Self { ex, ey, ez }
    }

    pub fn is_constant(&self) -> bool {
        *self == Self::CONSTANT
    }

    pub fn degree(&self) -> u32 {
        self.ex + self.ey + self.ez
    }

    /// Value at a point given the coordinate products of each group.
    #[inline]
    pub fn eval_products(&self, px: f64, py: f64, pz: f64) -> f64 {
        px.powi(self.ex as i32) * py.powi(self.ey as i32) * pz.powi(self.ez as i32)
    }

    pub fn eval(&self, x: &[f64], y: &[f64], z: &[f64]) -> f64 {
        self.eval_products(x.iter().product(), y.iter().product(), z.iter().product())
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_constant() {
            return write!(f, "1");
        }
        let mut first = true;
        for (sym, e) in [("X", self.ex), ("Y", self.ey), ("Z", self.ez)] {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "{sym}")?;
            } else {
                write!(f, "{sym}^{e}")?;
            }
        }
        Ok(())
    }
}

/// The pair of sieve bases: `u` for the unconditional ratio r(y, z) and
/// `v` for the conditional ratio π(x, y, z).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisSpec {
    u_terms: Vec<Monomial>,
    v_terms: Vec<Monomial>,
}

impl BasisSpec {
    /// Validates the invariants: both bases hold the constant, `u` has no
    /// x-exponents, no duplicates, and every `u` term appears in `v`.
    pub fn new(u_terms: Vec<Monomial>, v_terms: Vec<Monomial>) -> Result<Self> {
        let spec = Self { u_terms, v_terms };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(format!("basis {self}: {msg}")));
        if !self.u_terms.contains(&Monomial::CONSTANT) {
            return bad("u basis lacks the constant term".into());
        }
        if !self.v_terms.contains(&Monomial::CONSTANT) {
            return bad("v basis lacks the constant term".into());
        }
        if let Some(m) = self.u_terms.iter().find(|m| m.ex != 0) {
            return bad(format!("u term {m} depends on x"));
        }
        for (name, terms) in [("u", &self.u_terms), ("v", &self.v_terms)] {
            for (i, m) in terms.iter().enumerate() {
                if terms[..i].contains(m) {
                    return bad(format!("duplicate {name} term {m}"));
                }
            }
        }
        if let Some(m) = self.u_terms.iter().find(|m| !self.v_terms.contains(m)) {
            return bad(format!("u term {m} is not spanned by v"));
        }
        Ok(())
    }

    pub fn u_terms(&self) -> &[Monomial] {
        &self.u_terms
    }

    pub fn v_terms(&self) -> &[Monomial] {
        &self.v_terms
    }

    /// K₀, the dimension of the u basis.
    pub fn k0(&self) -> usize {
        self.u_terms.len()
    }

    /// K, the dimension of the v basis.
    pub fn k(&self) -> usize {
        self.v_terms.len()
    }

    /// The default u basis {1, Y, Z, YZ}.
    pub fn default_u() -> Vec<Monomial> {
        vec![
            Monomial::CONSTANT,
            Monomial::new(0, 1, 0),
            Monomial::new(0, 0, 1),
            Monomial::new(0, 1, 1),
        ]
    }

    /// Default u basis with the nested tensor family
    /// `{X^i Y^j Z^l : i ≤ p1, j ≤ p2, l ≤ p3}` for v.
    pub fn nested(p1: u32, p2: u32, p3: u32) -> Result<Self> {
        if p2 < 1 || p3 < 1 {
            return Err(Error::InvalidConfig(format!(
                "nested order ({p1},{p2},{p3}) needs y and z orders >= 1 to span the u basis"
            )));
        }
        Self::new(Self::default_u(), tensor_terms(p1, p2, p3))
    }
}

impl fmt::Display for BasisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |terms: &[Monomial]| {
            terms
                .iter()
                .map(|m| m.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        write!(
            f,
            "u={{{}}} v={{{}}}",
            join(&self.u_terms),
            join(&self.v_terms)
        )
    }
}

/// All monomials with exponents bounded by `(p1, p2, p3)`, ordered by x, then
/// y, then z exponent.
pub fn tensor_terms(p1: u32, p2: u32, p3: u32) -> Vec<Monomial> {
    let mut out = Vec::with_capacity(((p1 + 1) * (p2 + 1) * (p3 + 1)) as usize);
    for i in 0..=p1 {
        for j in 0..=p2 {
            for l in 0..=p3 {
                out.push(Monomial::new(i, j, l));
            }
        }
    }
    out
}

/// Evaluates the u basis at `(y, z)`.
pub fn eval_u(spec: &BasisSpec, y: &[f64], z: &[f64]) -> Vec<f64> {
    let py: f64 = y.iter().product();
    let pz: f64 = z.iter().product();
    spec.u_terms
        .iter()
        .map(|m| m.eval_products(1.0, py, pz))
        .collect()
}

/// Evaluates the v basis at `(x, y, z)`.
pub fn eval_v(spec: &BasisSpec, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
    let px: f64 = x.iter().product();
    let py: f64 = y.iter().product();
    let pz: f64 = z.iter().product();
    spec.v_terms
        .iter()
        .map(|m| m.eval_products(px, py, pz))
        .collect()
}

/// The default candidate family: u fixed at {1, Y, Z, YZ}, v ranging over the
/// nested tensor families for every `1 ≤ p1 ≤ max_ex`, `1 ≤ p2 ≤ max_ey`,
/// `1 ≤ p3 ≤ max_ez`.
pub fn candidate_grid(max_ex: u32, max_ey: u32, max_ez: u32) -> Result<Vec<BasisSpec>> {
    if max_ex < 1 || max_ey < 1 || max_ez < 1 {
        return Err(Error::InvalidConfig(format!(
            "candidate grid maxima ({max_ex},{max_ey},{max_ez}) must all be >= 1"
        )));
    }
    let mut out = Vec::new();
    for p1 in 1..=max_ex {
        for p2 in 1..=max_ey {
            for p3 in 1..=max_ez {
                out.push(BasisSpec::nested(p1, p2, p3)?);
            }
        }
    }
    Ok(out)
}
