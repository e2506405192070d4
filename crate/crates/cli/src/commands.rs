use drci::simulation::{
    lagged_triples, linear_granger_test, log_diff_transform, monte_carlo, DgpKind, DrBasis,
    McConfig, McRow, TestKind,
};
use drci::{
    candidate_grid, select_basis, BasisSpec, ExecMode, InfluenceForm, Monomial, Sample,
    TestOptions, TestResult, TuningConfig, TuningReport,
};
use serde::Serialize;

use crate::args::{Format, GrangerArgs, Influence, InputArgs, SimulateArgs, StatArgs, TestArgs};
use crate::input::Table;
use crate::CliError;

const SIZE_BAND: f64 = 0.025;

#[derive(Serialize)]
struct BasisOut {
    u: Vec<[u32; 3]>,
    v: Vec<[u32; 3]>,
}

impl From<&BasisSpec> for BasisOut {
    fn from(spec: &BasisSpec) -> Self {
        let exps = |t: &[Monomial]| t.iter().map(|m| [m.ex, m.ey, m.ez]).collect();
        Self {
            u: exps(spec.u_terms()),
            v: exps(spec.v_terms()),
        }
    }
}

#[derive(Serialize)]
struct TestOut {
    statistic: f64,
    i_hat: f64,
    b_hat: f64,
    sigma_hat: f64,
    p_value: f64,
    reject: bool,
    alpha: f64,
    n: usize,
    basis: BasisOut,
    warnings: Vec<String>,
}

impl From<&TestResult> for TestOut {
    fn from(r: &TestResult) -> Self {
        Self {
            statistic: r.t_stat,
            i_hat: r.i_hat,
            b_hat: r.b_hat,
            sigma_hat: r.sigma_hat,
            p_value: r.p_value,
            reject: r.reject,
            alpha: r.alpha,
            n: r.n,
            basis: (&r.spec).into(),
            warnings: r.warnings.iter().map(ToString::to_string).collect(),
        }
    }
}

#[derive(Serialize)]
struct CandidateOut {
    index: usize,
    k: usize,
    basis: BasisOut,
    rate: f64,
    failures: usize,
    admissible: bool,
    statistic: Option<f64>,
}

#[derive(Serialize)]
struct TuneOut {
    bandwidth: f64,
    bootstrap_reps: usize,
    size_band: f64,
    chosen: usize,
    fallback: bool,
    candidates: Vec<CandidateOut>,
    result: TestOut,
}

#[derive(Serialize)]
struct GrangerEntry {
    direction: String,
    cause: String,
    effect: String,
    test: &'static str,
    statistic: f64,
    p_value: f64,
    reject: bool,
}

#[derive(Serialize)]
struct GrangerOut {
    n: usize,
    lag: usize,
    alpha: f64,
    tests: Vec<GrangerEntry>,
}

#[derive(Serialize)]
struct SimulateOut<'a> {
    reps: usize,
    seed: u64,
    rows: &'a [McRow],
}

fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::numerical(format!("serializing output: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn parse_orders(text: &str, what: &str) -> Result<(u32, u32, u32), CliError> {
    let parts: Vec<u32> = text
        .split(',')
        .map(|p| p.trim().parse::<u32>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::input(format!("{what} must look like 2,2,2, got '{text}'")))?;
    match parts[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(CliError::input(format!(
            "{what} needs three orders, got '{text}'"
        ))),
    }
}

/// `None` for "auto".
fn fixed_basis(stat: &StatArgs) -> Result<Option<BasisSpec>, CliError> {
    if stat.basis.trim().eq_ignore_ascii_case("auto") {
        return Ok(None);
    }
    let (a, b, c) = parse_orders(&stat.basis, "--basis")?;
    BasisSpec::nested(a, b, c)
        .map(Some)
        .map_err(|e| CliError::core("basis", e))
}

fn grid(stat: &StatArgs) -> Result<Vec<BasisSpec>, CliError> {
    let (a, b, c) = parse_orders(&stat.max_orders, "--max-orders")?;
    candidate_grid(a, b, c).map_err(|e| CliError::core("basis grid", e))
}

fn test_options(stat: &StatArgs) -> Result<TestOptions, CliError> {
    if !(stat.alpha > 0.0 && stat.alpha < 1.0) {
        return Err(CliError::input(format!(
            "--alpha must lie in (0, 1), got {}",
            stat.alpha
        )));
    }
    if stat.bootstrap_reps < 1 {
        return Err(CliError::input("--bootstrap-reps must be >= 1"));
    }
    Ok(TestOptions {
        alpha: stat.alpha,
        rank_transform: !stat.no_rank_transform,
        influence: match stat.influence {
            Influence::FourTerm => InfluenceForm::FourTerm,
            Influence::Full => InfluenceForm::Full,
        },
        ..TestOptions::default()
    })
}

fn tuning_config(stat: &StatArgs, options: TestOptions, seed: u64) -> TuningConfig {
    TuningConfig {
        bootstrap_reps: stat.bootstrap_reps,
        alpha: stat.alpha,
        size_band: SIZE_BAND,
        seed,
        test: options,
        exec: ExecMode::Parallel,
        ..TuningConfig::default()
    }
}

fn check_lag(lag: usize) -> Result<(), CliError> {
    if lag < 1 {
        return Err(CliError::input("--lag must be >= 1"));
    }
    Ok(())
}

fn load_sample(input: &InputArgs) -> Result<Sample, CliError> {
    check_lag(input.lag)?;
    let table = Table::read(&input.input)?;
    let sample = match (
        &input.x,
        &input.y,
        &input.z,
        &input.series_a,
        &input.series_b,
    ) {
        (Some(x), Some(y), Some(z), None, None) => {
            Sample::from_columns(table.column(x)?, table.column(y)?, table.column(z)?)
        }
        (None, None, None, Some(a), Some(b)) => {
            lagged_triples(table.column(a)?, table.column(b)?, input.lag)
        }
        _ => {
            return Err(CliError::input(
                "give either --x, --y and --z, or --series-a and --series-b",
            ))
        }
    };
    sample.map_err(|e| CliError::core("input", e))
}

/// Runs the test with a fixed basis, or selects one when `basis` is "auto".
fn run(sample: &Sample, stat: &StatArgs, seed: u64) -> Result<TestResult, CliError> {
    let options = test_options(stat)?;
    match fixed_basis(stat)? {
        Some(spec) => {
            drci::run_test(sample, &spec, &options).map_err(|e| CliError::core("test", e))
        }
        None => select_basis(sample, &grid(stat)?, &tuning_config(stat, options, seed))
            .map(|r| r.chosen_result)
            .map_err(|e| CliError::core("basis selection", e)),
    }
}

fn csv_line(fields: &[String]) -> String {
    let mut line = fields.join(",");
    line.push('\n');
    line
}

pub fn test(args: &TestArgs) -> Result<String, CliError> {
    let sample = load_sample(&args.input)?;
    let result = run(&sample, &args.stat, args.stat.seed)?;
    match args.format {
        Format::Json => json(&TestOut::from(&result)),
        Format::Csv => Ok(
            String::from("statistic,i_hat,b_hat,sigma_hat,p_value,reject,alpha,n\n")
                + &csv_line(&[
                    result.t_stat.to_string(),
                    result.i_hat.to_string(),
                    result.b_hat.to_string(),
                    result.sigma_hat.to_string(),
                    result.p_value.to_string(),
                    result.reject.to_string(),
                    result.alpha.to_string(),
                    result.n.to_string(),
                ]),
        ),
    }
}

pub fn tune(args: &TestArgs) -> Result<String, CliError> {
    let sample = load_sample(&args.input)?;
    let options = test_options(&args.stat)?;
    let candidates = match fixed_basis(&args.stat)? {
        Some(spec) => vec![spec],
        None => grid(&args.stat)?,
    };
    let report: TuningReport = select_basis(
        &sample,
        &candidates,
        &tuning_config(&args.stat, options, args.stat.seed),
    )
    .map_err(|e| CliError::core("basis selection", e))?;
    let out = TuneOut {
        bandwidth: report.bandwidth,
        bootstrap_reps: args.stat.bootstrap_reps,
        size_band: SIZE_BAND,
        chosen: report.chosen,
        fallback: report.fallback,
        candidates: report
            .candidates
            .iter()
            .enumerate()
            .map(|(index, c)| CandidateOut {
                index,
                k: c.spec.k(),
                basis: (&c.spec).into(),
                rate: c.rate,
                failures: c.tally.failures,
                admissible: c.admissible,
                statistic: c.t_stat,
            })
            .collect(),
        result: (&report.chosen_result).into(),
    };
    match args.format {
        Format::Json => json(&out),
        Format::Csv => {
            let mut s = String::from("index,k,basis,rate,failures,admissible,statistic,chosen\n");
            for (c, cand) in report.candidates.iter().enumerate() {
                s += &csv_line(&[
                    c.to_string(),
                    cand.spec.k().to_string(),
                    format!("\"{}\"", cand.spec),
                    cand.rate.to_string(),
                    cand.tally.failures.to_string(),
                    cand.admissible.to_string(),
                    cand.t_stat.map(|t| t.to_string()).unwrap_or_default(),
                    (c == report.chosen).to_string(),
                ]);
            }
            Ok(s)
        }
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<String, CliError> {
    let dgps = args
        .dgp
        .iter()
        .map(|d| d.parse::<DgpKind>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::core("--dgp", e))?;
    let tests = args
        .tests
        .iter()
        .map(|t| t.parse::<TestKind>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::core("--tests", e))?;
    let options = test_options(&args.stat)?;
    let dr = match fixed_basis(&args.stat)? {
        Some(spec) => DrBasis::Fixed(spec),
        None => DrBasis::Tuned {
            max_orders: parse_orders(&args.stat.max_orders, "--max-orders")?,
            bootstrap_reps: args.stat.bootstrap_reps,
            size_band: SIZE_BAND,
        },
    };
    let config = McConfig {
        alpha: args.stat.alpha,
        seed: args.stat.seed,
        dr,
        test: options,
        exec: ExecMode::Parallel,
        ..McConfig::default()
    };
    let report = monte_carlo(&dgps, &args.n, args.reps, &tests, &config)
        .map_err(|e| CliError::core("simulation", e))?;
    match args.format {
        Format::Csv => Ok(report.to_csv()),
        Format::Json => json(&SimulateOut {
            reps: report.reps,
            seed: report.seed,
            rows: &report.rows,
        }),
    }
}

pub fn granger(args: &GrangerArgs) -> Result<String, CliError> {
    check_lag(args.lag)?;
    let table = Table::read(&args.input)?;
    let a = log_diff_transform(table.column(&args.series_a)?)
        .map_err(|e| CliError::core(&format!("series '{}'", args.series_a), e))?;
    let b = log_diff_transform(table.column(&args.series_b)?)
        .map_err(|e| CliError::core(&format!("series '{}'", args.series_b), e))?;
    test_options(&args.stat)?;

    let mut entries = Vec::with_capacity(4);
    let mut n = 0;
    let directions = [
        (&args.series_a, &a, &args.series_b, &b),
        (&args.series_b, &b, &args.series_a, &a),
    ];
    for (cause_name, cause, effect_name, effect) in directions {
        let sample =
            lagged_triples(cause, effect, args.lag).map_err(|e| CliError::core("input", e))?;
        n = sample.n();
        let direction = format!("{cause_name}->{effect_name}");
        let lin = linear_granger_test(&sample, args.stat.alpha)
            .map_err(|e| CliError::core(&format!("LIN test {direction}"), e))?;
        entries.push(GrangerEntry {
            direction: direction.clone(),
            cause: cause_name.clone(),
            effect: effect_name.clone(),
            test: "LIN",
            statistic: lin.t_stat,
            p_value: lin.p_value,
            reject: lin.reject,
        });
        let dr = run(&sample, &args.stat, args.stat.seed).map_err(|e| e.context(&direction))?;
        entries.push(GrangerEntry {
            direction,
            cause: cause_name.clone(),
            effect: effect_name.clone(),
            test: "DR",
            statistic: dr.t_stat,
            p_value: dr.p_value,
            reject: dr.reject,
        });
    }
    match args.format {
        Format::Json => json(&GrangerOut {
            n,
            lag: args.lag,
            alpha: args.stat.alpha,
            tests: entries,
        }),
        Format::Csv => {
            let mut s = String::from("direction,test,statistic,p_value,reject\n");
            for e in &entries {
                s += &csv_line(&[
                    e.direction.clone(),
                    e.test.to_string(),
                    e.statistic.to_string(),
                    e.p_value.to_string(),
                    e.reject.to_string(),
                ]);
            }
            Ok(s)
        }
    }
}
