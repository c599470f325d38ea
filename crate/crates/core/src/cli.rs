//! Command-line front end: `gen`, `solve`, `eval`, `bounds`, `verify`, `sweep`.
//!
//! Exit codes: 0 on success, 1 on domain errors, 2 on usage errors.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{self, Metric, OnlineAlgorithm, PolicyAlgorithm};
use crate::bounds::{self, Target};
use crate::construction::{self, ConstructionParams};
use crate::engine::{self, Policy};
use crate::error::{Error, Result};
use crate::exact::{self, ExactNumber, Precision};
use crate::instance::PriorFamily;

/// Default cap on the number of sweep points.
pub const DEFAULT_MAX_POINTS: usize = 10_000;

#[derive(Debug, Parser)]
#[command(name = "secretary-lab", version, about = "Exact hardness verification for the secretary problem with predictions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the hardness family as a JSON family file.
    Gen(GenArgs),
    /// Solve for the optimal (1-consistent by default) stopping policy.
    Solve(SolveArgs),
    /// Evaluate an online algorithm exactly or by Monte Carlo.
    Eval(EvalArgs),
    /// Print closed-form bounds for one parameter point.
    Bounds(BoundsArgs),
    /// Run the full verification for a preset or explicit parameters.
    Verify(VerifyArgs),
    /// Sweep a parameter grid and write a CSV.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct ParamArgs {
    /// Prior mass on the prediction row (rational, e.g. 1/10).
    #[arg(long)]
    eps: Option<String>,
    /// Ladder base s > 1.
    #[arg(long)]
    s: Option<String>,
    /// Even ladder length k >= 4.
    #[arg(long)]
    k: Option<u32>,
    /// Candidate count (columns past the third are padded with 1).
    #[arg(long, default_value_t = 3)]
    n: usize,
}

impl ParamArgs {
    fn given(&self) -> bool {
        self.eps.is_some() || self.s.is_some() || self.k.is_some()
    }

    fn params(&self) -> Result<ConstructionParams> {
        let missing = |f: &str| Error::InvalidParams(format!("--{f} is required"));
        let eps = exact::parse_value(self.eps.as_deref().ok_or_else(|| missing("eps"))?, None)?;
        let s = exact::parse_value(self.s.as_deref().ok_or_else(|| missing("s"))?, None)?;
        let k = self.k.ok_or_else(|| missing("k"))?;
        ConstructionParams::new(eps, s, k, self.n)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Render {
    Md,
    Csv,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Family file to write (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also write a table next to the family file.
    #[arg(long, value_enum)]
    render: Option<Render>,
}

#[derive(Debug, Args)]
struct FamilySource {
    /// Family file to load instead of generating one.
    #[arg(long, conflicts_with_all = ["eps", "s", "k"])]
    family: Option<PathBuf>,
    #[command(flatten)]
    params: ParamArgs,
}

impl FamilySource {
    fn load(&self) -> Result<PriorFamily> {
        match &self.family {
            Some(path) => PriorFamily::from_json(&std::fs::read_to_string(path)?),
            None => construction::build_hard_family(&self.params.params()?),
        }
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    source: FamilySource,
    /// Drop the 1-consistency constraint.
    #[arg(long)]
    unconstrained: bool,
    /// Report file (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Write the optimal policy dump here.
    #[arg(long)]
    policy_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricArg {
    Ratio,
    Success,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// `dynkin`, `pred-argmax`, or `policy:<file>`.
    #[arg(long)]
    alg: String,
    #[arg(long, conflicts_with_all = ["family", "eps", "s", "k"])]
    /// Single scenario with distinct values 1..=N instead of a family.
    classic: Option<usize>,
    #[command(flatten)]
    source: FamilySource,
    /// Exhaustive enumeration over scenarios and orders (default).
    #[arg(long, conflicts_with = "mc")]
    exact: bool,
    /// Monte Carlo estimate.
    #[arg(long)]
    mc: bool,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = MetricArg::Ratio)]
    metric: MetricArg,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Registry preset: paper-19-20, corrected-76-78, one-third-plus.
    #[arg(long, conflicts_with_all = ["eps", "s", "k"])]
    preset: Option<String>,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Comma-separated mix_eps values.
    #[arg(long, value_delimiter = ',', required = true)]
    eps: Vec<String>,
    /// Comma-separated s values.
    #[arg(long, value_delimiter = ',', required = true)]
    s: Vec<String>,
    /// Comma-separated even k values.
    #[arg(long, value_delimiter = ',', required = true)]
    k: Vec<u32>,
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Decimal digits in the `_dec` columns.
    #[arg(long, default_value_t = 12)]
    digits: u32,
    /// Columns to write (default: all).
    #[arg(long, value_delimiter = ',')]
    fields: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_MAX_POINTS)]
    max_points: usize,
}

/// Parses `argv` (including the program name), runs one subcommand, and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
        Command::Eval(a) => eval(a),
        Command::Bounds(a) => bounds_cmd(a),
        Command::Verify(a) => verify(a),
        Command::Sweep(a) => sweep(a),
    }
}

/// Writes through a temp file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn emit(output: Option<&Path>, contents: &str) -> Result<()> {
    match output {
        Some(path) => write_atomic(path, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("serializable");
    out.push('\n');
    out
}

fn gen(a: GenArgs) -> Result<()> {
    let family = construction::build_hard_family(&a.params.params()?)?;
    emit(a.output.as_deref(), &family.to_json())?;
    if let Some(kind) = a.render {
        let (table, ext) = match kind {
            Render::Md => (construction::render_markdown(&family), "md"),
            Render::Csv => (construction::render_csv(&family), "csv"),
        };
        match &a.output {
            Some(path) => write_atomic(&path.with_extension(ext), &table)?,
            None => print!("{table}"),
        }
    }
    Ok(())
}

fn solve(a: SolveArgs) -> Result<()> {
    let family = a.source.load()?;
    let report = engine::solve_optimal(&family, !a.unconstrained)?;
    if let Some(path) = &a.policy_out {
        write_atomic(path, &report.policy.to_json(&family.codec()))?;
    }
    emit(a.output.as_deref(), &to_json(&report.summary()))
}

#[derive(Serialize)]
struct ExactEval {
    algorithm: String,
    #[serde(with = "exact::serde_rich")]
    expected: ExactNumber,
}

#[derive(Serialize)]
struct McEval {
    algorithm: String,
    #[serde(flatten)]
    estimate: baselines::MonteCarloEstimate,
}

fn eval(a: EvalArgs) -> Result<()> {
    let family = match a.classic {
        Some(n) if n >= 1 => baselines::classic_family(n),
        Some(_) => return Err(Error::InvalidParams("--classic needs N >= 1".to_string())),
        None => a.source.load()?,
    };
    let alg: Box<dyn OnlineAlgorithm> = match a.alg.strip_prefix("policy:") {
        Some(path) => {
            let policy = Policy::from_json(&std::fs::read_to_string(path)?, &family.codec())?;
            Box::new(PolicyAlgorithm::new(a.alg.clone(), policy, &family)?)
        }
        None => baselines::algorithm_by_name(&a.alg, &family)?,
    };
    let out = if a.mc {
        let metric = match a.metric {
            MetricArg::Ratio => Metric::Ratio,
            MetricArg::Success => Metric::Success,
        };
        let estimate = baselines::monte_carlo_estimate(alg.as_ref(), &family, a.trials, a.seed, metric)?;
        to_json(&McEval {
            algorithm: alg.name(),
            estimate,
        })
    } else {
        let expected = baselines::exact_expected_ratio(alg.as_ref(), &family)?;
        to_json(&ExactEval {
            algorithm: alg.name(),
            expected,
        })
    };
    emit(a.output.as_deref(), &out)
}

#[derive(Serialize)]
struct BoundsOut {
    #[serde(with = "exact::serde_rich")]
    alpha: ExactNumber,
    beta_enclosure: bounds::EnclosureRecord,
    threshold: Option<bounds::EnclosureRecord>,
    #[serde(with = "exact::serde_rich")]
    ub_display: ExactNumber,
    #[serde(with = "exact::serde_rich")]
    oracle_optimum: ExactNumber,
}

fn bounds_cmd(a: BoundsArgs) -> Result<()> {
    let p = a.params.params()?;
    let precision = Precision::from_env();
    let threshold = match bounds::threshold_value(&p.mix_eps, &precision) {
        Ok(t) => Some((&t).into()),
        Err(Error::NonpositiveBudget) => None,
        Err(e) => return Err(e),
    };
    let out = BoundsOut {
        alpha: bounds::alpha_value(&p.mix_eps, &p.s, p.k)?,
        beta_enclosure: (&bounds::beta_bounds(precision.start_digits)).into(),
        threshold,
        ub_display: bounds::ub_display(&p.mix_eps, &p.s, p.k)?,
        oracle_optimum: bounds::oracle_optimum(&p.mix_eps, &p.s, p.k)?,
    };
    emit(a.output.as_deref(), &to_json(&out))
}

fn verify(a: VerifyArgs) -> Result<()> {
    let target = match (&a.preset, a.params.given()) {
        (Some(name), _) => Target::Preset(name.clone()),
        (None, true) => Target::Params(a.params.params()?),
        (None, false) => {
            return Err(Error::InvalidParams("give --preset or --eps/--s/--k".to_string()))
        }
    };
    let report = bounds::verify_theorem(&target, &Precision::from_env())?;
    emit(a.output.as_deref(), &report.to_json())
}

/// Columns of the sweep CSV, in output order.
pub const SWEEP_COLUMNS: [&str; 11] = [
    "eps",
    "s",
    "k",
    "row_count",
    "alpha",
    "alpha_dec",
    "ub_display",
    "ub_display_dec",
    "dp_optimum",
    "dp_optimum_dec",
    "vs_inv_e",
];

struct SweepRow {
    cells: Vec<String>,
}

fn sweep_point(p: &ConstructionParams, digits: u32, precision: &Precision) -> Result<SweepRow> {
    let alpha = bounds::alpha_value(&p.mix_eps, &p.s, p.k)?;
    let ub = bounds::ub_display(&p.mix_eps, &p.s, p.k)?;
    let dp = engine::solve_optimal(&construction::build_hard_family(p)?, true)?.optimum;
    let verdict = exact::compare_to_inv_e(&dp, precision)?;
    Ok(SweepRow {
        cells: vec![
            exact::render(&p.mix_eps),
            exact::render(&p.s),
            p.k.to_string(),
            p.row_count().to_string(),
            exact::render(&alpha),
            exact::to_decimal(&alpha, digits),
            exact::render(&ub),
            exact::to_decimal(&ub, digits),
            exact::render(&dp),
            exact::to_decimal(&dp, digits),
            verdict.to_string(),
        ],
    })
}

fn sweep(a: SweepArgs) -> Result<()> {
    let points = a.eps.len() * a.s.len() * a.k.len();
    if points > a.max_points {
        return Err(Error::InvalidParams(format!(
            "sweep has {points} points, above the cap of {}",
            a.max_points
        )));
    }
    let selected: Vec<usize> = if a.fields.is_empty() {
        (0..SWEEP_COLUMNS.len()).collect()
    } else {
        a.fields
            .iter()
            .map(|f| {
                SWEEP_COLUMNS
                    .iter()
                    .position(|c| c == f)
                    .ok_or_else(|| Error::InvalidParams(format!("unknown sweep field {f:?}")))
            })
            .collect::<Result<_>>()?
    };
    let mut grid = Vec::with_capacity(points);
    for eps in &a.eps {
        let eps = exact::parse_value(eps, None)?;
        for s in &a.s {
            let s = exact::parse_value(s, None)?;
            for &k in &a.k {
                grid.push(ConstructionParams::new(eps.clone(), s.clone(), k, a.n)?);
            }
        }
    }
    let precision = Precision::from_env();
    let rows: Vec<SweepRow> = grid
        .par_iter()
        .map(|p| sweep_point(p, a.digits, &precision))
        .collect::<Result<_>>()?;

    let mut csv = selected.iter().map(|&i| SWEEP_COLUMNS[i]).collect::<Vec<_>>().join(",");
    csv.push('\n');
    for row in rows {
        csv.push_str(&selected.iter().map(|&i| row.cells[i].as_str()).collect::<Vec<_>>().join(","));
        csv.push('\n');
    }
    emit(a.output.as_deref(), &csv)
}
