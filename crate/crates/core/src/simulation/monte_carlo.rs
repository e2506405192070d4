//! Monte Carlo size/power studies over the simulation designs.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{candidate_grid, BasisSpec};
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::rng::stream;
use crate::simulation::dgp::{generate, DgpKind, DgpSpec};
use crate::simulation::granger::linear_granger_test;
use crate::statistic::{run_test, TestOptions};
use crate::tuning::{select_basis, TuningConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TestKind {
    /// Density-ratio test.
    Dr,
    /// Linear Granger t-test.
    Lin,
}

impl TestKind {
    pub fn name(self) -> &'static str {
        match self {
            TestKind::Dr => "DR",
            TestKind::Lin => "LIN",
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dr" => Ok(TestKind::Dr),
            "lin" => Ok(TestKind::Lin),
            other => Err(Error::InvalidConfig(format!(
                "unknown test '{other}'; expected dr or lin"
            ))),
        }
    }
}

/// How the DR test picks its basis in each replication.
#[derive(Debug, Clone, PartialEq)]
pub enum DrBasis {
    /// Bootstrap selection over the nested grid with these maxima.
    Tuned {
        max_orders: (u32, u32, u32),
        bootstrap_reps: usize,
        size_band: f64,
    },
    Fixed(BasisSpec),
}

impl Default for DrBasis {
    fn default() -> Self {
        DrBasis::Tuned {
            max_orders: (4, 2, 2),
            bootstrap_reps: 100,
            size_band: 0.025,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub alpha: f64,
    pub seed: u64,
    pub burn_in: usize,
    pub dr: DrBasis,
    pub test: TestOptions,
    pub exec: ExecMode,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            seed: 0,
            burn_in: DgpSpec::DEFAULT_BURN_IN,
            dr: DrBasis::default(),
            test: TestOptions::default(),
            exec: ExecMode::default(),
        }
    }
}

/// Rejection rate of one test on one design at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub dgp: DgpKind,
    pub n: usize,
    pub test: TestKind,
    pub rate: f64,
    pub rejections: usize,
    /// Replications where the test could not be computed (counted as
    /// non-rejections).
    pub failures: usize,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub rows: Vec<McRow>,
    pub reps: usize,
    pub seed: u64,
    pub wall_time: Duration,
}

impl McReport {
    pub fn rate(&self, dgp: DgpKind, n: usize, test: TestKind) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.dgp == dgp && r.n == n && r.test == test)
            .map(|r| r.rate)
    }

    pub const CSV_HEADER: &'static str = "dgp,n,test,rate,reps,seed";

    /// CSV with columns `dgp,n,test,rate,reps,seed`, one row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.3},{},{}\n",
                r.dgp.name(),
                r.n,
                r.test.name(),
                r.rate,
                r.reps,
                r.seed
            ));
        }
        out
    }
}

struct Outcome {
    decisions: Vec<Option<bool>>,
}

fn replicate(
    dgp: DgpKind,
    n: usize,
    rep: usize,
    tests: &[TestKind],
    grid: &[BasisSpec],
    cfg: &McConfig,
) -> Result<Outcome> {
    let spec = DgpSpec {
        kind: dgp,
        n,
        burn_in: cfg.burn_in,
        seed: cfg.seed,
    };
    let key = spec.stream_key();
    let mut rng = stream(cfg.seed, &[key[0], key[1], rep as u64]);
    let sample = generate(&spec, &mut rng)?;
    let tuning_seed: u64 = rng.random();
    let options = TestOptions {
        alpha: cfg.alpha,
        ..cfg.test
    };
    let decisions = tests
        .iter()
        .map(|t| match t {
            TestKind::Lin => linear_granger_test(&sample, cfg.alpha)
                .ok()
                .map(|r| r.reject),
            TestKind::Dr => match &cfg.dr {
                DrBasis::Fixed(basis) => run_test(&sample, basis, &options).ok().map(|r| r.reject),
                DrBasis::Tuned {
                    bootstrap_reps,
                    size_band,
                    ..
                } => {
                    let tcfg = TuningConfig {
                        bootstrap_reps: *bootstrap_reps,
                        alpha: cfg.alpha,
                        size_band: *size_band,
                        seed: tuning_seed,
                        test: options,
                        exec: ExecMode::Sequential,
                        ..TuningConfig::default()
                    };
                    select_basis(&sample, grid, &tcfg)
                        .ok()
                        .map(|r| r.chosen_result.reject)
                }
            },
        })
        .collect();
    Ok(Outcome { decisions })
}

/// Rejection rates for every (design, n, test) cell over `reps` replications.
///
/// Replication `r` of a cell draws its data from a stream keyed by
/// `(seed, design, n, r)`, so rates do not depend on scheduling.
pub fn monte_carlo(
    dgps: &[DgpKind],
    ns: &[usize],
    reps: usize,
    tests: &[TestKind],
    config: &McConfig,
) -> Result<McReport> {
    if reps < 1 {
        return Err(Error::InvalidConfig("reps must be >= 1".into()));
    }
    if dgps.is_empty() || ns.is_empty() || tests.is_empty() {
        return Err(Error::InvalidConfig(
            "need at least one design, sample size and test".into(),
        ));
    }
    if let Some(n) = ns.iter().find(|n| **n < 10) {
        return Err(Error::InvalidConfig(format!(
            "sample size {n} below the minimum of 10"
        )));
    }
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha must lie in (0, 1), got {}",
            config.alpha
        )));
    }
    let grid = match &config.dr {
        DrBasis::Tuned {
            max_orders,
            bootstrap_reps,
            ..
        } => {
            if *bootstrap_reps < 1 {
                return Err(Error::InvalidConfig("bootstrap_reps must be >= 1".into()));
            }
            candidate_grid(max_orders.0, max_orders.1, max_orders.2)?
        }
        DrBasis::Fixed(_) => Vec::new(),
    };

    let start = Instant::now();
    let cells: Vec<(DgpKind, usize)> = dgps
        .iter()
        .flat_map(|d| ns.iter().map(move |n| (*d, *n)))
        .collect();
    let per_cell = reps;
    let outcomes: Vec<Result<Outcome>> = config.exec.map(cells.len() * per_cell, |item| {
        let (dgp, n) = cells[item / per_cell];
        replicate(dgp, n, item % per_cell, tests, &grid, config)
    });

    let mut rows = Vec::new();
    for (c, &(dgp, n)) in cells.iter().enumerate() {
        let chunk = &outcomes[c * per_cell..(c + 1) * per_cell];
        for (ti, &test) in tests.iter().enumerate() {
            let mut rejections = 0;
            let mut failures = 0;
            for o in chunk {
                match o {
                    Ok(o) => match o.decisions[ti] {
                        Some(true) => rejections += 1,
                        Some(false) => {}
                        None => failures += 1,
                    },
                    Err(_) => failures += 1,
                }
            }
            rows.push(McRow {
                dgp,
                n,
                test,
                rate: rejections as f64 / reps as f64,
                rejections,
                failures,
                reps,
                seed: config.seed,
            });
        }
    }
    Ok(McReport {
        rows,
        reps,
        seed: config.seed,
        wall_time: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_reps_is_invalid() {
        let err = monte_carlo(
            &[DgpKind::Dgp1s],
            &[100],
            0,
            &[TestKind::Lin],
            &McConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn csv_layout() {
        let cfg = McConfig {
            seed: 7,
            ..McConfig::default()
        };
        let rep = monte_carlo(&[DgpKind::Dgp1s], &[100], 20, &[TestKind::Lin], &cfg).unwrap();
        let csv = rep.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "dgp,n,test,rate,reps,seed");
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("DGP1s,100,LIN,"));
        assert!(lines[1].ends_with(",20,7"));
    }

    #[test]
    fn report_independent_of_exec_mode() {
        let base = McConfig {
            seed: 3,
            dr: DrBasis::Fixed(BasisSpec::nested(1, 1, 1).unwrap()),
            ..McConfig::default()
        };
        let tests = [TestKind::Dr, TestKind::Lin];
        let a = monte_carlo(&[DgpKind::Dgp1p], &[60], 8, &tests, &base).unwrap();
        let b = monte_carlo(
            &[DgpKind::Dgp1p],
            &[60],
            8,
            &tests,
            &McConfig {
                exec: ExecMode::Sequential,
                ..base
            },
        )
        .unwrap();
        assert_eq!(a.rows, b.rows);
    }
}
