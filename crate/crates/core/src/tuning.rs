//! Data-driven choice of the sieve bases.
//!
//! Bootstrap samples that satisfy the null by construction are drawn from a
//! Gaussian-kernel smoothing of the data. Each candidate's rejection rate on
//! them estimates its size; among the candidates whose rate is close to the
//! nominal level, the one with the largest standardized statistic on the
//! original sample is chosen.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::basis::BasisSpec;
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::rng::stream;
use crate::sample::{rank_transform, Sample};
use crate::statistic::{evaluate_candidates, TestOptions, TestResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningConfig {
    /// Number of bootstrap samples B.
    pub bootstrap_reps: usize,
    /// Nominal size; overrides `test.alpha`.
    pub alpha: f64,
    /// A candidate is admissible when |rate − alpha| ≤ size_band.
    pub size_band: f64,
    pub seed: u64,
    pub test: TestOptions,
    pub exec: ExecMode,
    pub bootstrap_scale: BootstrapScale,
}

/// Coordinates in which the smoothed bootstrap is run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BootstrapScale {
    /// The sample as given, bandwidth h in every coordinate.
    Unit,
    /// Every column rescaled to unit sample standard deviation first.
    #[default]
    Standardized,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            bootstrap_reps: 100,
            alpha: 0.05,
            size_band: 0.025,
            seed: 0,
            test: TestOptions::default(),
            exec: ExecMode::default(),
            bootstrap_scale: BootstrapScale::default(),
        }
    }
}

impl TuningConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bootstrap_reps < 1 {
            return Err(Error::InvalidConfig("bootstrap_reps must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.size_band > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "size_band must be positive, got {}",
                self.size_band
            )));
        }
        Ok(())
    }

    fn test_options(&self) -> TestOptions {
        TestOptions {
            alpha: self.alpha,
            ..self.test
        }
    }
}

/// Rejection count of one candidate over a set of bootstrap samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionTally {
    pub rejections: usize,
    /// Samples on which the fit failed; counted as non-rejections.
    pub failures: usize,
    pub total: usize,
}

impl RejectionTally {
    pub fn rate(&self) -> f64 {
        self.rejections as f64 / self.total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub spec: BasisSpec,
    pub tally: RejectionTally,
    pub rate: f64,
    pub admissible: bool,
    /// Standardized statistic on the original sample, if the fit succeeded.
    pub t_stat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub candidates: Vec<CandidateSummary>,
    /// Indices of the admissible set.
    pub admissible: Vec<usize>,
    pub chosen: usize,
    pub chosen_spec: BasisSpec,
    pub chosen_result: TestResult,
    /// True when no admissible candidate existed and the closest-to-nominal
    /// rate was used instead.
    pub fallback: bool,
    pub bandwidth: f64,
}

impl TuningReport {
    pub fn chosen_t_stat(&self) -> f64 {
        self.chosen_result.t_stat
    }
}

/// Kernel bandwidth h = (4/3)^{−1/5} n^{−1/5}.
pub fn bandwidth(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "bandwidth needs n >= 2, got {n}"
        )));
    }
    Ok((4.0f64 / 3.0).powf(-0.2) * (n as f64).powf(-0.2))
}

/// One draw of n points with X* ⊥ Y* | Z*.
///
/// Z* is an exact draw from the kernel density of Z (a resampled point plus
/// h-scaled Gaussian noise). X* and Y* are exact draws from the kernel
/// estimates of f(x | Z*) and f(y | Z*): each picks its own index j with
/// probability proportional to Ψ_h(Z_j − Z*) and adds fresh noise.
pub fn smoothed_bootstrap_sample<R: Rng + ?Sized>(sample: &Sample, h: f64, rng: &mut R) -> Sample {
    assert!(h > 0.0, "bandwidth must be positive");
    let n = sample.n();
    let (dx, dy, dz) = sample.dims();
    let (x, y, z) = (sample.x(), sample.y(), sample.z());
    let mut xs = DMatrix::zeros(n, dx);
    let mut ys = DMatrix::zeros(n, dy);
    let mut zs = DMatrix::zeros(n, dz);
    let mut zstar = vec![0.0; dz];
    let mut cumulative = vec![0.0; n];
    let inv_two_h2 = 1.0 / (2.0 * h * h);

    for t in 0..n {
        let source = rng.random_range(0..n);
        for c in 0..dz {
            let e: f64 = rng.sample(StandardNormal);
            zstar[c] = z[(source, c)] + h * e;
            zs[(t, c)] = zstar[c];
        }
        let mut max_log = f64::NEG_INFINITY;
        for j in 0..n {
            let d2: f64 = (0..dz).map(|c| (z[(j, c)] - zstar[c]).powi(2)).sum();
            cumulative[j] = -d2 * inv_two_h2;
            max_log = max_log.max(cumulative[j]);
        }
        let mut acc = 0.0;
        for w in cumulative.iter_mut() {
            acc += (*w - max_log).exp();
            *w = acc;
        }
        let pick = |rng: &mut R| -> usize {
            let target = rng.random::<f64>() * acc;
            cumulative.partition_point(|c| *c <= target).min(n - 1)
        };
        let jx = pick(rng);
        for c in 0..dx {
            let e: f64 = rng.sample(StandardNormal);
            xs[(t, c)] = x[(jx, c)] + h * e;
        }
        let jy = pick(rng);
        for c in 0..dy {
            let e: f64 = rng.sample(StandardNormal);
            ys[(t, c)] = y[(jy, c)] + h * e;
        }
    }
    Sample::new(xs, ys, zs).expect("bootstrap draws are finite and aligned")
}

fn column_scales(m: &DMatrix<f64>) -> Vec<(f64, f64)> {
    let n = m.nrows() as f64;
    m.column_iter()
        .map(|col| {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let sd = var.sqrt();
            (mean, if sd > 0.0 && sd.is_finite() { sd } else { 1.0 })
        })
        .collect()
}

fn rescale(m: &DMatrix<f64>, scales: &[(f64, f64)], forward: bool) -> DMatrix<f64> {
    let mut out = m.clone();
    for (c, &(mean, sd)) in scales.iter().enumerate() {
        for v in out.column_mut(c).iter_mut() {
            *v = if forward {
                (*v - mean) / sd
            } else {
                *v * sd + mean
            };
        }
    }
    out
}

/// [`smoothed_bootstrap_sample`] run in the coordinates chosen by `scale`.
/// Standardized draws are mapped back to the scale of `sample`.
pub fn scaled_bootstrap_sample<R: Rng + ?Sized>(
    sample: &Sample,
    h: f64,
    scale: BootstrapScale,
    rng: &mut R,
) -> Sample {
    if scale == BootstrapScale::Unit {
        return smoothed_bootstrap_sample(sample, h, rng);
    }
    let sx = column_scales(sample.x());
    let sy = column_scales(sample.y());
    let sz = column_scales(sample.z());
    let unit = Sample::new(
        rescale(sample.x(), &sx, true),
        rescale(sample.y(), &sy, true),
        rescale(sample.z(), &sz, true),
    )
    .expect("rescaling keeps the sample valid");
    let draw = smoothed_bootstrap_sample(&unit, h, rng);
    Sample::new(
        rescale(draw.x(), &sx, false),
        rescale(draw.y(), &sy, false),
        rescale(draw.z(), &sz, false),
    )
    .expect("rescaling keeps the sample valid")
}

/// Fraction of `bootstrap_samples` on which `candidate` rejects.
pub fn rejection_frequency(
    candidate: &BasisSpec,
    bootstrap_samples: &[Sample],
    options: &TestOptions,
) -> RejectionTally {
    let mut tally = RejectionTally {
        rejections: 0,
        failures: 0,
        total: bootstrap_samples.len(),
    };
    for s in bootstrap_samples {
        match evaluate_candidates(s, std::slice::from_ref(candidate), options).pop() {
            Some(Ok(r)) if r.reject => tally.rejections += 1,
            Some(Ok(_)) => {}
            _ => tally.failures += 1,
        }
    }
    tally
}

/// The selection rule on precomputed per-candidate numbers.
///
/// Candidates with `|rate − alpha| ≤ band` are admissible; the admissible one
/// with the largest statistic wins. With no admissible candidate the rate
/// closest to `alpha` wins and the flag is set. Ties go to the smaller `k`,
/// then to the earlier index. Candidates whose statistic is `None` (failed
/// fit) are never chosen; `None` is returned when all failed.
pub fn choose_candidate(
    rates: &[f64],
    t_stats: &[Option<f64>],
    ks: &[usize],
    alpha: f64,
    band: f64,
) -> Option<(usize, bool)> {
    assert!(
        rates.len() == t_stats.len() && rates.len() == ks.len(),
        "candidate arrays differ in length"
    );
    let argbest =
        |pool: &mut dyn Iterator<Item = usize>, key: &dyn Fn(usize) -> f64| -> Option<usize> {
            pool.filter(|&c| t_stats[c].is_some())
                .fold(None, |best, c| match best {
                    None => Some(c),
                    Some(b) => {
                        let (kc, kb) = (key(c), key(b));
                        let better = kc > kb || (kc == kb && ks[c] < ks[b]);
                        Some(if better { c } else { b })
                    }
                })
        };
    let admissible = |c: &usize| (rates[*c] - alpha).abs() <= band;
    let by_stat = |c: usize| t_stats[c].unwrap_or(f64::NEG_INFINITY);
    if let Some(c) = argbest(&mut (0..rates.len()).filter(admissible), &by_stat) {
        return Some((c, false));
    }
    let by_closeness = |c: usize| -(rates[c] - alpha).abs();
    argbest(&mut (0..rates.len()), &by_closeness).map(|c| (c, true))
}

/// Picks the candidate with the largest standardized statistic among those
/// whose bootstrap size is within `size_band` of `alpha`.
pub fn select_basis(
    sample: &Sample,
    candidates: &[BasisSpec],
    config: &TuningConfig,
) -> Result<TuningReport> {
    config.validate()?;
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("no basis candidates".into()));
    }
    let options = config.test_options();
    let h = bandwidth(sample.n())?;
    let b_reps = config.bootstrap_reps;
    // resample in the coordinates the statistic works in
    let base = if options.rank_transform {
        rank_transform(sample)
    } else {
        sample.clone()
    };

    // one decision row per bootstrap sample, shared across candidates
    let decisions: Vec<Vec<Option<bool>>> = config.exec.map(b_reps, |b| {
        let mut rng = stream(config.seed, &[b as u64]);
        let boot = scaled_bootstrap_sample(&base, h, config.bootstrap_scale, &mut rng);
        evaluate_candidates(&boot, candidates, &options)
            .into_iter()
            .map(|r| r.ok().map(|r| r.reject))
            .collect()
    });

    let original = evaluate_candidates(sample, candidates, &options);

    let mut summaries = Vec::with_capacity(candidates.len());
    for (c, spec) in candidates.iter().enumerate() {
        let mut tally = RejectionTally {
            rejections: 0,
            failures: 0,
            total: b_reps,
        };
        for row in &decisions {
            match row[c] {
                Some(true) => tally.rejections += 1,
                Some(false) => {}
                None => tally.failures += 1,
            }
        }
        let rate = tally.rate();
        summaries.push(CandidateSummary {
            spec: spec.clone(),
            tally,
            rate,
            admissible: (rate - config.alpha).abs() <= config.size_band,
            t_stat: original[c].as_ref().ok().map(|r| r.t_stat),
        });
    }

    let admissible: Vec<usize> = (0..candidates.len())
        .filter(|&c| summaries[c].admissible)
        .collect();
    let ks: Vec<usize> = candidates.iter().map(BasisSpec::k).collect();
    let rates: Vec<f64> = summaries.iter().map(|c| c.rate).collect();
    let t_stats: Vec<Option<f64>> = summaries.iter().map(|c| c.t_stat).collect();
    let Some((chosen, fallback)) =
        choose_candidate(&rates, &t_stats, &ks, config.alpha, config.size_band)
    else {
        let first = original[0].as_ref().unwrap_err();
        return Err(Error::InvalidConfig(format!(
            "every basis candidate failed on the sample (first failure: {first})"
        )));
    };

    Ok(TuningReport {
        chosen_spec: candidates[chosen].clone(),
        chosen_result: original[chosen].clone().expect("chosen candidate fitted"),
        candidates: summaries,
        admissible,
        chosen,
        fallback,
        bandwidth: h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::candidate_grid;

    fn sample(n: usize) -> Sample {
        let mut rng = stream(99, &[]);
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = z
            .iter()
            .map(|v| v + rng.sample::<f64, _>(StandardNormal))
            .collect();
        Sample::from_columns(&x, &y, &z).unwrap()
    }

    #[test]
    fn bandwidth_closed_form() {
        assert!((bandwidth(100).unwrap() - 0.375_850).abs() < 1e-5);
        assert!(bandwidth(1).is_err());
        assert!(bandwidth(200).unwrap() < bandwidth(100).unwrap());
    }

    #[test]
    fn bootstrap_has_n_finite_rows() {
        let s = sample(50);
        let b = smoothed_bootstrap_sample(&s, 0.3, &mut stream(1, &[]));
        assert_eq!(b.n(), 50);
        assert!(b
            .x()
            .iter()
            .chain(b.y().iter())
            .chain(b.z().iter())
            .all(|v| v.is_finite()));
    }

    #[test]
    fn tiny_bandwidth_resamples_observed_z() {
        let s = sample(40);
        let b = smoothed_bootstrap_sample(&s, 1e-12, &mut stream(2, &[]));
        for &zb in b.z().iter() {
            assert!(s.z().iter().any(|z| (z - zb).abs() < 1e-8));
        }
    }

    #[test]
    fn counting_rejections() {
        let t = RejectionTally {
            rejections: 1,
            failures: 0,
            total: 4,
        };
        assert_eq!(t.rate(), 0.25);
    }

    #[test]
    fn single_candidate_is_always_chosen() {
        let s = sample(80);
        let spec = BasisSpec::nested(1, 1, 1).unwrap();
        let cfg = TuningConfig {
            bootstrap_reps: 10,
            seed: 4,
            ..TuningConfig::default()
        };
        let rep = select_basis(&s, std::slice::from_ref(&spec), &cfg).unwrap();
        assert_eq!(rep.chosen, 0);
        assert_eq!(rep.chosen_spec, spec);
        assert_eq!(rep.fallback, rep.admissible.is_empty());
    }

    #[test]
    fn deterministic_and_mode_independent() {
        let s = sample(60);
        let grid = candidate_grid(2, 1, 2).unwrap();
        let cfg = TuningConfig {
            bootstrap_reps: 12,
            seed: 8,
            ..TuningConfig::default()
        };
        let a = select_basis(&s, &grid, &cfg).unwrap();
        let b = select_basis(
            &s,
            &grid,
            &TuningConfig {
                exec: ExecMode::Sequential,
                ..cfg
            },
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_config() {
        let s = sample(30);
        let grid = candidate_grid(1, 1, 1).unwrap();
        let cfg = TuningConfig {
            bootstrap_reps: 0,
            ..TuningConfig::default()
        };
        assert!(select_basis(&s, &grid, &cfg).is_err());
        assert!(select_basis(&s, &[], &TuningConfig::default()).is_err());
    }

    #[test]
    fn over_rejecting_candidate_is_excluded() {
        // the second candidate has the larger statistic but a 0.40 bootstrap size
        let pick = choose_candidate(
            &[0.05, 0.40],
            &[Some(1.0), Some(9.0)],
            &[8, 12],
            0.05,
            0.025,
        );
        assert_eq!(pick, Some((0, false)));
    }

    #[test]
    fn selection_ties_and_fallback() {
        let t = [Some(2.0), Some(2.0), Some(2.0)];
        assert_eq!(
            choose_candidate(&[0.05; 3], &t, &[12, 8, 8], 0.05, 0.025),
            Some((1, false))
        );
        let pick = choose_candidate(
            &[0.3, 0.12, 0.0],
            &[Some(5.0), Some(1.0), Some(3.0)],
            &[8, 8, 8],
            0.05,
            0.025,
        );
        assert_eq!(pick, Some((2, true)));
        assert_eq!(choose_candidate(&[0.05], &[None], &[8], 0.05, 0.025), None);
    }
}
