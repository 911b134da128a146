//! Command-line front end: argument parsing, dispatch, and rendering of
//! results as JSON or CSV.
//!
//! Exit status: 0 when every checked inequality holds, 1 when any is
//! violated, 2 for usage errors.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bounds::{
    centered_binomial_bennett, delta_condition_report, lemma44_45_check, lemma46_check,
    ratio_experiment, RatioModel, TestFunction,
};
use crate::dependence::{independence_check, two_runs_graph, DependencyGraph, IndicatorModel};
use crate::error::{invalid, Error, Result};
use crate::models::{
    delta_condition_2runs, matching_law, pbt_law, two_runs_law_transfer, ExactLaw, MatchingModel,
    PoissonBinomialModel, TwoRunsModel,
};
use crate::poisson::{verify_lemma41, verify_lemma42, PoissonLaw};
use crate::rational::{self, parse_rational};
use crate::report::{fmt_num, BoundReport, ReportSet};
use crate::size_bias::{
    matching_coupling_enumerate, matching_coupling_sample, pbt_coupling_delta_law,
    size_bias_identity_check, verify_tv_bound, worker_count, DeltaLaw, RngStream,
};
use crate::stein::{
    default_w_max, forward_diff, g1, stein_solution, verify_diff_bounds, verify_g1_bound, G1Method,
};

#[derive(Debug, Parser)]
#[command(
    name = "poisson-md",
    version,
    about = "Poisson approximation in the moderate-deviation regime: exact laws, Stein solutions and bound checks"
)]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the artifact here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Poisson pmf and upper tails P(Y >= k).
    Tail {
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        k_min: u64,
        #[arg(long)]
        k_max: u64,
    },
    /// Stein solution f_h for h = 1{w >= k}, with residuals and differences.
    Stein {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        k: u64,
        /// Table length; defaults to k + ceil(10 sqrt(lambda)) + 50.
        #[arg(long)]
        w_max: Option<u64>,
    },
    /// The auxiliary function g1 by all three methods.
    G1 {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        w_max: u64,
    },
    /// Exact law of W.
    Model(ModelArgs),
    /// Joint law of (W, Delta) for a size-bias coupling.
    Coupling {
        #[command(flatten)]
        model: ModelArgs,
        /// Enumerate exactly instead of sampling.
        #[arg(long)]
        exact: bool,
        /// Seed for sampling; required unless --exact.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
    },
    /// Clustering table delta(w) = E(2T | W = w)/w^2 for 2-runs.
    DeltaCondition {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: String,
        /// Defaults to max(floor(np/50), 2).
        #[arg(long)]
        theta: Option<u64>,
        /// Fail when the fitted constant exceeds this.
        #[arg(long)]
        budget: Option<f64>,
    },
    /// Exact tail ratio P(W >= k)/P(Y >= k) - 1 against the bound shape.
    Ratio {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        range: RatioArgs,
    },
    /// Check one inequality; exit 1 on any violation.
    Verify {
        #[command(subcommand)]
        target: VerifyTarget,
    },
    /// Ratio experiments over a grid of n and p, evaluated in parallel.
    Sweep {
        #[arg(long)]
        model: String,
        /// Comma-separated sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        /// Comma-separated probabilities (ignored for matching).
        #[arg(long, value_delimiter = ',')]
        p: Vec<String>,
        #[command(flatten)]
        range: RatioArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// pbt, matching or two-runs.
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub n: Option<usize>,
    /// Success probability, as a decimal or a fraction a/b.
    #[arg(long)]
    pub p: Option<String>,
    /// Comma-separated per-indicator probabilities (pbt only).
    #[arg(long, value_delimiter = ',')]
    pub probs: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct RatioArgs {
    /// Defaults to ceil(lambda).
    #[arg(long)]
    pub k_min: Option<u64>,
    /// Defaults to the smaller of the support maximum and lambda + 10 sqrt(lambda) + 20.
    #[arg(long)]
    pub k_max: Option<u64>,
    /// Admissible region is shape <= smallness; defaults per model.
    #[arg(long)]
    pub smallness: Option<f64>,
    /// Fail when the fitted constant exceeds this.
    #[arg(long)]
    pub budget: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum VerifyTarget {
    /// The tail series against its (1 + w/lambda)/w shape.
    Lemma41 {
        #[arg(long, value_delimiter = ',', required = true)]
        lambda: Vec<f64>,
        #[arg(long, default_value_t = 200)]
        w_max: u64,
        #[arg(long)]
        budget: Option<f64>,
    },
    /// Poisson tail and point-mass inequalities.
    Lemma42 {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        k_max: u64,
        #[arg(long)]
        budget: Option<f64>,
    },
    /// g1 monotonicity and its upper bound.
    Lemma43 {
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 40)]
        w_max: u64,
        #[arg(long)]
        budget: Option<f64>,
    },
    /// Bounds on the forward differences of the Stein solution.
    SteinDiff {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        k: u64,
        #[arg(long)]
        w_max: Option<u64>,
        #[arg(long)]
        budget: Option<f64>,
    },
    /// Total variation bound through the size-bias coupling.
    Tv {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        budget: Option<f64>,
    },
    /// Truncated expectations under W against Poisson ones.
    #[command(name = "lemma44-45")]
    Lemma4445 {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        k: u64,
        /// g1, mono:Q, ind:J or table:V0,V1,...
        #[arg(long, default_value = "g1")]
        g: String,
        #[arg(long)]
        budget: Option<f64>,
    },
    /// Truncated mean of 2-runs and the colouring premise.
    Lemma46 {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: String,
        /// Comma-separated thresholds; defaults to 1..=n.
        #[arg(long, value_delimiter = ',')]
        x: Vec<u64>,
        #[arg(long)]
        budget: Option<f64>,
    },
    /// Bennett's inequality on centered binomial sums.
    Bennett {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: String,
        #[arg(long, default_value_t = 8)]
        points: usize,
        #[arg(long)]
        budget: Option<f64>,
    },
    /// Exact independence of each indicator from its non-neighbours.
    Independence {
        #[command(flatten)]
        model: ModelArgs,
        /// natural (cyclic for two-runs, singletons for pbt) or singletons.
        #[arg(long, default_value = "natural")]
        graph: String,
    },
    /// E W^{q+1} = lambda E (W^s)^q for q up to --degree.
    Identity {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 6)]
        degree: u32,
    },
}

/// Everything a command produces.
pub struct Artifact {
    pub json: Value,
    pub csv: Vec<u8>,
    pub passed: bool,
    pub summary: String,
}

impl Artifact {
    fn new(json: Value, csv: Vec<u8>, passed: bool, summary: String) -> Self {
        Artifact {
            json,
            csv,
            passed,
            summary,
        }
    }

    pub fn render(&self, format: Format) -> Vec<u8> {
        match format {
            Format::Json => {
                let mut s =
                    serde_json::to_string_pretty(&self.json).expect("json values serialize");
                s.push('\n');
                s.into_bytes()
            }
            Format::Csv => self.csv.clone(),
        }
    }
}

/// Parses arguments, runs the command, writes the artifact and returns
/// the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(artifact) => {
            let bytes = artifact.render(cli.format);
            let written = match &cli.out {
                Some(path) => fs::write(path, &bytes),
                None => io::stdout().lock().write_all(&bytes),
            };
            if let Err(e) = written {
                eprintln!("error: cannot write output: {e}");
                return 2;
            }
            let status = if artifact.passed { "ok" } else { "FAIL" };
            eprintln!("{status}: {}", artifact.summary);
            if artifact.passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {}", usage_message(&e));
            match e {
                Error::Inconsistent(_) => 1,
                _ => 2,
            }
        }
    }
}

fn usage_message(e: &Error) -> String {
    match e {
        Error::RightTailOnly { k, lambda } => format!(
            "k = {k} is below lambda = {lambda}; only right tails k >= lambda are supported"
        ),
        Error::SizeLimit { what, value, limit } => {
            format!("{what} = {value} exceeds the exact-mode limit {limit}; use a smaller instance")
        }
        other => other.to_string(),
    }
}

pub fn run(cli: &Cli) -> Result<Artifact> {
    match &cli.command {
        Command::Tail {
            lambda,
            k_min,
            k_max,
        } => tail(*lambda, *k_min, *k_max),
        Command::Stein { lambda, k, w_max } => stein(*lambda, *k, *w_max),
        Command::G1 { lambda, w_max } => g1_table(*lambda, *w_max),
        Command::Model(m) => model(m),
        Command::Coupling {
            model,
            exact,
            seed,
            samples,
        } => coupling(model, *exact, *seed, *samples),
        Command::DeltaCondition {
            n,
            p,
            theta,
            budget,
        } => delta_condition(*n, p, *theta, *budget),
        Command::Ratio { model, range } => ratio(model, range),
        Command::Verify { target } => verify(target),
        Command::Sweep { model, n, p, range } => sweep(model, n, p, range),
    }
}

enum Model {
    Pbt(PoissonBinomialModel),
    Matching(MatchingModel),
    TwoRuns(TwoRunsModel),
}

impl Model {
    fn law(&self) -> ExactLaw {
        match self {
            Model::Pbt(m) => pbt_law(m),
            Model::Matching(m) => matching_law(m),
            Model::TwoRuns(m) => two_runs_law_transfer(m),
        }
    }

    fn lambda(&self) -> f64 {
        match self {
            Model::Pbt(m) => m.lambda_f64(),
            Model::Matching(m) => m.lambda(),
            Model::TwoRuns(m) => m.lambda_f64(),
        }
    }

    fn describe(&self) -> String {
        match self {
            Model::Pbt(m) => m.describe(),
            Model::Matching(m) => m.describe(),
            Model::TwoRuns(m) => m.describe(),
        }
    }

    fn into_ratio(self) -> RatioModel {
        match self {
            Model::Pbt(m) => RatioModel::Pbt(m),
            Model::Matching(m) => RatioModel::Matching(m),
            Model::TwoRuns(m) => RatioModel::TwoRuns(m),
        }
    }
}

fn require<T: Copy>(v: Option<T>, name: &'static str, model: &str) -> Result<T> {
    v.ok_or_else(|| invalid(name, format!("--{name} is required for model {model}")))
}

fn parse_model(args: &ModelArgs) -> Result<Model> {
    match args.model.as_str() {
        "pbt" => {
            if !args.probs.is_empty() {
                let p = args
                    .probs
                    .iter()
                    .map(|s| parse_rational(s))
                    .collect::<Result<Vec<_>>>()?;
                return Ok(Model::Pbt(PoissonBinomialModel::new(p)?));
            }
            let n = require(args.n, "n", "pbt")?;
            let p = parse_rational(
                args.p
                    .as_deref()
                    .ok_or_else(|| invalid("p", "--p or --probs is required for model pbt"))?,
            )?;
            Ok(Model::Pbt(PoissonBinomialModel::iid(n, p)?))
        }
        "matching" => Ok(Model::Matching(MatchingModel::new(require(
            args.n, "n", "matching",
        )?)?)),
        "two-runs" | "two_runs" => {
            let n = require(args.n, "n", "two-runs")?;
            let p = parse_rational(
                args.p
                    .as_deref()
                    .ok_or_else(|| invalid("p", "--p is required for model two-runs"))?,
            )?;
            Ok(Model::TwoRuns(TwoRunsModel::cycle(n, p)?))
        }
        other => Err(invalid(
            "model",
            format!("unknown model `{other}`; expected pbt, matching or two-runs"),
        )),
    }
}

fn to_json<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("report types serialize")
}

fn csv_table(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn report_csv(report: &BoundReport) -> Vec<u8> {
    let mut buf = Vec::new();
    report.write_csv(&mut buf).expect("in-memory write");
    buf
}

fn set_csv(set: &ReportSet) -> Vec<u8> {
    let mut buf = Vec::new();
    set.write_csv(&mut buf).expect("in-memory write");
    buf
}

fn fitted(report: &BoundReport) -> String {
    match report.fitted_c {
        Some(c) => format!("{} fitted_C={}", report.id, fmt_num(c)),
        None => format!("{} fitted_C=none", report.id),
    }
}

fn set_artifact(set: ReportSet, budget: Option<f64>) -> Artifact {
    let set = match budget {
        Some(b) => set.with_budget(b),
        None => set,
    };
    let summary = format!(
        "{}: {}",
        set.subject,
        set.reports
            .iter()
            .map(fitted)
            .collect::<Vec<_>>()
            .join(", ")
    );
    Artifact::new(to_json(&set), set_csv(&set), set.passed(), summary)
}

fn report_artifact(report: BoundReport, subject: &str, budget: Option<f64>) -> Artifact {
    let report = match budget {
        Some(b) => report.with_budget(b),
        None => report,
    };
    let summary = format!("{subject}: {}", fitted(&report));
    Artifact::new(to_json(&report), report_csv(&report), report.pass, summary)
}

fn tail(lambda: f64, k_min: u64, k_max: u64) -> Result<Artifact> {
    let law = PoissonLaw::new(lambda)?;
    if k_max < k_min {
        return Err(invalid("k_max", "must be >= k_min"));
    }
    let rows: Vec<Value> = (k_min..=k_max)
        .map(|k| {
            json!({
                "k": k,
                "xi": (k as f64 - lambda) / lambda.sqrt(),
                "pmf": law.pmf(k).prob(),
                "tail": law.tail(k).prob(),
                "ln_tail": law.ln_tail(k),
            })
        })
        .collect();
    let csv_rows: Vec<Vec<String>> = (k_min..=k_max)
        .map(|k| {
            vec![
                k.to_string(),
                fmt_num((k as f64 - lambda) / lambda.sqrt()),
                fmt_num(law.pmf(k).prob()),
                fmt_num(law.tail(k).prob()),
                fmt_num(law.ln_tail(k)),
            ]
        })
        .collect();
    Ok(Artifact::new(
        json!({ "lambda": lambda, "rows": rows }),
        csv_table(&["k", "xi", "pmf", "tail", "ln_tail"], &csv_rows),
        true,
        format!("poisson tails lambda={lambda}, k={k_min}..={k_max}"),
    ))
}

fn stein(lambda: f64, k: u64, w_max: Option<u64>) -> Result<Artifact> {
    let w_max = w_max.unwrap_or_else(|| default_w_max(lambda, k));
    let sol = stein_solution(lambda, k, w_max)?;
    let mut values = Vec::new();
    let mut worst = 0.0f64;
    for w in 1..w_max {
        let f = sol.value(w)?;
        let residual = sol.residual(w)?;
        worst = worst.max(residual.abs());
        values.push((w, f, forward_diff(&sol, w)?, residual));
    }
    let rows: Vec<Vec<String>> = values
        .iter()
        .map(|&(w, f, d, r)| vec![w.to_string(), fmt_num(f), fmt_num(d), fmt_num(r)])
        .collect();
    let json_rows: Vec<Value> = values
        .iter()
        .map(|&(w, f, d, r)| json!({ "w": w, "f": f, "diff": d, "residual": r }))
        .collect();
    Ok(Artifact::new(
        json!({ "lambda": lambda, "k": k, "w_max": w_max, "max_abs_residual": worst, "rows": json_rows }),
        csv_table(&["w", "f", "diff", "residual"], &rows),
        true,
        format!(
            "stein solution lambda={lambda} k={k}: max |residual|={}",
            fmt_num(worst)
        ),
    ))
}

fn g1_table(lambda: f64, w_max: u64) -> Result<Artifact> {
    let methods = [
        G1Method::Factorial,
        G1Method::IntegralSeries,
        G1Method::SteinDiff,
    ];
    let mut rows = Vec::new();
    let mut json_rows = Vec::new();
    let mut spread = 0.0f64;
    for w in 0..=w_max {
        let v = methods
            .iter()
            .map(|&m| g1(lambda, w, m).map(|g| g.value))
            .collect::<Result<Vec<_>>>()?;
        if v[1] != 0.0 {
            spread = spread.max(v.iter().map(|x| (x / v[1] - 1.0).abs()).fold(0.0, f64::max));
        }
        json_rows.push(
            json!({ "w": w, "factorial": v[0], "integral_series": v[1], "stein_diff": v[2] }),
        );
        rows.push(vec![
            w.to_string(),
            fmt_num(v[0]),
            fmt_num(v[1]),
            fmt_num(v[2]),
        ]);
    }
    Ok(Artifact::new(
        json!({ "lambda": lambda, "max_relative_disagreement": spread, "rows": json_rows }),
        csv_table(&["w", "factorial", "integral_series", "stein_diff"], &rows),
        true,
        format!(
            "g1 lambda={lambda}: max relative disagreement={}",
            fmt_num(spread)
        ),
    ))
}

fn model(args: &ModelArgs) -> Result<Artifact> {
    let m = parse_model(args)?;
    let law = m.law();
    let rows: Vec<Vec<String>> = (0..=law.w_max())
        .map(|w| {
            vec![
                w.to_string(),
                fmt_num(law.mass_f64(w)),
                rational::format_rational(&law.mass(w)),
            ]
        })
        .collect();
    Ok(Artifact::new(
        to_json(&law),
        csv_table(&["w", "mass", "mass_exact"], &rows),
        true,
        format!("{}: lambda={}", m.describe(), fmt_num(m.lambda())),
    ))
}

fn delta_law(m: &Model) -> Result<DeltaLaw> {
    match m {
        Model::Pbt(p) => Ok(pbt_coupling_delta_law(p)),
        Model::Matching(p) => matching_coupling_enumerate(p),
        Model::TwoRuns(_) => Err(invalid(
            "model",
            "two-runs has no size-bias coupling here; use pbt or matching",
        )),
    }
}

fn delta_law_csv(d: &DeltaLaw) -> Vec<u8> {
    let rows: Vec<Vec<String>> = (0..=d.w_max())
        .map(|w| {
            let mut r = vec![w.to_string()];
            for s in [-1i8, 0, 1] {
                r.push(rational::format_rational(&d.mass(w, s)));
            }
            r
        })
        .collect();
    csv_table(&["w", "minus", "zero", "plus"], &rows)
}

fn coupling(args: &ModelArgs, exact: bool, seed: Option<u64>, samples: u64) -> Result<Artifact> {
    let m = parse_model(args)?;
    if exact {
        let d = delta_law(&m)?;
        let summary = format!(
            "{} coupling: E|Delta|={}",
            m.describe(),
            fmt_num(rational::to_f64(&d.e_abs_delta()))
        );
        return Ok(Artifact::new(to_json(&d), delta_law_csv(&d), true, summary));
    }
    let seed = seed.ok_or_else(|| invalid("seed", "--seed is required unless --exact is given"))?;
    let Model::Matching(mm) = &m else {
        return Err(invalid(
            "model",
            "sampling is implemented for matching only; use --exact",
        ));
    };
    let stats = matching_coupling_sample(mm, &RngStream::new(seed), samples)?;
    let rows: Vec<Vec<String>> = stats
        .counts
        .iter()
        .enumerate()
        .map(|(w, c)| {
            vec![
                w.to_string(),
                c[0].to_string(),
                c[1].to_string(),
                c[2].to_string(),
            ]
        })
        .collect();
    let summary = format!(
        "{} sampled coupling seed={seed} samples={samples}: E|Delta|={} (se {})",
        m.describe(),
        fmt_num(stats.e_abs_diff),
        fmt_num(stats.e_abs_diff_se)
    );
    Ok(Artifact::new(
        to_json(&stats),
        csv_table(&["w", "minus", "zero", "plus"], &rows),
        true,
        summary,
    ))
}

fn default_theta(n: usize, p: &BigRational) -> u64 {
    let np = rational::to_f64(p) * n as f64;
    ((np / 50.0).floor() as u64).max(2)
}

fn delta_condition(n: usize, p: &str, theta: Option<u64>, budget: Option<f64>) -> Result<Artifact> {
    let model = TwoRunsModel::cycle(n, parse_rational(p)?)?;
    let theta = theta.unwrap_or_else(|| default_theta(n, model.p()));
    let table = delta_condition_2runs(&model, theta)?;
    let report = delta_condition_report(&model, theta)?;
    let report = match budget {
        Some(b) => report.with_budget(b),
        None => report,
    };
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                r.w.to_string(),
                r.delta.map(fmt_num).unwrap_or_default(),
                r.delta_exact.clone().unwrap_or_default(),
            ]
        })
        .collect();
    let summary = format!(
        "{} theta={theta}: delta*={} fitted_C={}",
        model.describe(),
        fmt_num(table.delta_star),
        fmt_num(table.fitted_c)
    );
    Ok(Artifact::new(
        json!({ "table": to_json(&table), "report": to_json(&report) }),
        csv_table(&["w", "delta", "delta_exact"], &rows),
        report.pass,
        summary,
    ))
}

fn ratio_report(m: Model, range: &RatioArgs) -> Result<(BoundReport, String)> {
    let lambda = m.lambda();
    let support = m.law().w_max();
    let describe = m.describe();
    let rm = m.into_ratio();
    let k_min = range.k_min.unwrap_or(lambda.ceil() as u64);
    let k_max = range
        .k_max
        .unwrap_or_else(|| ((lambda + 10.0 * lambda.sqrt() + 20.0).floor() as u64).min(support));
    if k_max < k_min {
        return Err(invalid("k_max", format!("must be >= k_min = {k_min}")));
    }
    let smallness = range.smallness.unwrap_or_else(|| rm.default_smallness());
    let report = ratio_experiment(&rm, k_min..=k_max, smallness)?;
    let report = match range.budget {
        Some(b) => report.with_budget(b),
        None => report,
    };
    Ok((report, describe))
}

const RATIO_HEADER: [&str; 8] = [
    "k",
    "xi",
    "ratio_minus_1",
    "shape",
    "fitted_C",
    "c_point",
    "admissible",
    "excluded",
];

fn ratio_rows(report: &BoundReport) -> Vec<Vec<String>> {
    let c = report.fitted_c.map(fmt_num).unwrap_or_default();
    report
        .rows
        .iter()
        .map(|r| {
            vec![
                fmt_num(r.params.get("k").unwrap_or(f64::NAN)),
                fmt_num(r.params.get("xi").unwrap_or(f64::NAN)),
                fmt_num(r.lhs),
                fmt_num(r.rhs_shape),
                c.clone(),
                fmt_num(r.ratio),
                r.admissible.to_string(),
                r.excluded.clone().unwrap_or_default(),
            ]
        })
        .collect()
}

fn ratio(args: &ModelArgs, range: &RatioArgs) -> Result<Artifact> {
    let (report, describe) = ratio_report(parse_model(args)?, range)?;
    let summary = format!("{describe}: {}", fitted(&report));
    Ok(Artifact::new(
        to_json(&report),
        csv_table(&RATIO_HEADER, &ratio_rows(&report)),
        report.pass,
        summary,
    ))
}

fn sweep(model: &str, ns: &[usize], ps: &[String], range: &RatioArgs) -> Result<Artifact> {
    let mut points: Vec<(usize, Option<String>)> = Vec::new();
    for &n in ns {
        if model == "matching" {
            points.push((n, None));
        } else {
            if ps.is_empty() {
                return Err(invalid("p", format!("--p is required for model {model}")));
            }
            for p in ps {
                points.push((n, Some(p.clone())));
            }
        }
    }
    // canonical order: by n, then by the numeric value of p
    let mut keyed = points
        .into_iter()
        .map(|(n, p)| {
            let v = match &p {
                Some(s) => Some(parse_rational(s)?),
                None => None,
            };
            Ok((n, v, p))
        })
        .collect::<Result<Vec<_>>>()?;
    keyed.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    keyed.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| Error::Inconsistent(format!("thread pool: {e}")))?;
    let results: Vec<Result<(BoundReport, String)>> = pool.install(|| {
        keyed
            .par_iter()
            .map(|(n, _, p)| {
                let args = ModelArgs {
                    model: model.to_string(),
                    n: Some(*n),
                    p: p.clone(),
                    probs: Vec::new(),
                };
                ratio_report(parse_model(&args)?, range)
            })
            .collect()
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mut header = vec!["model", "n", "p"];
    header.extend(RATIO_HEADER);
    let mut rows = Vec::new();
    let mut instances = Vec::new();
    let mut constants = Vec::new();
    for ((n, _, p), (report, describe)) in keyed.iter().zip(&results) {
        for r in ratio_rows(report) {
            let mut row = vec![
                model.to_string(),
                n.to_string(),
                p.clone().unwrap_or_default(),
            ];
            row.extend(r);
            rows.push(row);
        }
        if let Some(c) = report.fitted_c {
            constants.push(c);
        }
        instances.push(json!({ "instance": describe, "report": to_json(report) }));
    }
    let lo = constants.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = constants.iter().copied().fold(0.0, f64::max);
    let spread = if constants.is_empty() {
        f64::NAN
    } else {
        hi / lo
    };
    let passed = results.iter().all(|(r, _)| r.pass);
    let summary = format!(
        "sweep {model} over {} instances: fitted_C in [{}, {}], spread {}",
        results.len(),
        fmt_num(lo),
        fmt_num(hi),
        fmt_num(spread)
    );
    Ok(Artifact::new(
        json!({
            "model": model,
            "fitted_c_min": lo,
            "fitted_c_max": hi,
            "spread": spread,
            "instances": instances,
        }),
        csv_table(&header, &rows),
        passed,
        summary,
    ))
}

fn verify(target: &VerifyTarget) -> Result<Artifact> {
    match target {
        VerifyTarget::Lemma41 {
            lambda,
            w_max,
            budget,
        } => Ok(report_artifact(
            verify_lemma41(lambda, *w_max)?,
            "lemma41",
            *budget,
        )),
        VerifyTarget::Lemma42 {
            lambda,
            k_max,
            budget,
        } => Ok(set_artifact(
            verify_lemma42(&PoissonLaw::new(*lambda)?, *k_max)?,
            *budget,
        )),
        VerifyTarget::Lemma43 {
            lambda,
            w_max,
            budget,
        } => Ok(set_artifact(verify_g1_bound(*lambda, *w_max)?, *budget)),
        VerifyTarget::SteinDiff {
            lambda,
            k,
            w_max,
            budget,
        } => {
            let w_max = w_max.unwrap_or_else(|| default_w_max(*lambda, *k));
            let sol = stein_solution(*lambda, *k, w_max)?;
            Ok(set_artifact(verify_diff_bounds(&sol)?, *budget))
        }
        VerifyTarget::Tv { model, budget } => {
            let m = parse_model(model)?;
            let report = verify_tv_bound(&delta_law(&m)?)?;
            Ok(report_artifact(report, &m.describe(), *budget))
        }
        VerifyTarget::Lemma4445 {
            model,
            k,
            g,
            budget,
        } => {
            let m = parse_model(model)?;
            let g = TestFunction::parse(g)?;
            Ok(set_artifact(
                lemma44_45_check(&m.law(), m.lambda(), *k, &g)?,
                *budget,
            ))
        }
        VerifyTarget::Lemma46 { n, p, x, budget } => {
            let model = TwoRunsModel::cycle(*n, parse_rational(p)?)?;
            let grid: Vec<u64> = if x.is_empty() {
                (1..=*n as u64).collect()
            } else {
                x.clone()
            };
            let mut r = lemma46_check(&model, &grid)?;
            if let Some(b) = budget {
                r.bound = r.bound.with_budget(*b);
            }
            let summary = format!(
                "{}: {}, colouring classes independent: {}",
                model.describe(),
                fitted(&r.bound),
                r.coloring.passed
            );
            Ok(Artifact::new(
                to_json(&r),
                report_csv(&r.bound),
                r.passed(),
                summary,
            ))
        }
        VerifyTarget::Bennett {
            n,
            p,
            points,
            budget,
        } => Ok(set_artifact(
            centered_binomial_bennett(*n, &parse_rational(p)?, *points)?,
            *budget,
        )),
        VerifyTarget::Independence { model, graph } => {
            let m = parse_model(model)?;
            let (indicators, natural) = match m {
                Model::Pbt(p) => {
                    let n = p.n();
                    (IndicatorModel::Pbt(p), DependencyGraph::singletons(n)?)
                }
                Model::TwoRuns(t) => {
                    let g = two_runs_graph(t.n())?;
                    (IndicatorModel::TwoRuns(t), g)
                }
                Model::Matching(_) => return Err(invalid(
                    "model",
                    "matching indicators have no local dependence structure; use pbt or two-runs",
                )),
            };
            let g = match graph.as_str() {
                "natural" => natural,
                "singletons" => DependencyGraph::singletons(indicators.n())?,
                other => {
                    return Err(invalid(
                        "graph",
                        format!("unknown graph `{other}`; expected natural or singletons"),
                    ))
                }
            };
            let report = independence_check(&indicators, &g)?;
            let failures: usize = report.rows.iter().map(|r| r.failures).sum();
            let rows: Vec<Vec<String>> = report
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.i.to_string(),
                        r.assignments.to_string(),
                        r.failures.to_string(),
                    ]
                })
                .collect();
            let summary = format!(
                "independence n={} m={} graph={graph}: {failures} failing assignments",
                report.n, report.m
            );
            Ok(Artifact::new(
                to_json(&report),
                csv_table(&["i", "assignments", "failures"], &rows),
                report.passed,
                summary,
            ))
        }
        VerifyTarget::Identity { model, degree } => {
            let m = parse_model(model)?;
            let d = delta_law(&m)?;
            let report = size_bias_identity_check(&d.w_law(), &d.ws_law(), *degree);
            let rows: Vec<Vec<String>> = report
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.q.to_string(),
                        r.lhs.clone(),
                        r.rhs.clone(),
                        r.holds.to_string(),
                    ]
                })
                .collect();
            let summary = format!(
                "{} size-bias identity up to degree {degree}: {}",
                m.describe(),
                if report.passed { "holds" } else { "fails" }
            );
            Ok(Artifact::new(
                to_json(&report),
                csv_table(&["q", "lhs", "rhs", "holds"], &rows),
                report.passed,
                summary,
            ))
        }
    }
}
