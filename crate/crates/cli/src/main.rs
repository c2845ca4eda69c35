use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mtm_core::chain::stationary_full;
use mtm_core::distributions::{destination, spatial};
use mtm_core::downtown::{build_downtown, errata_report, DownTownParams};
use mtm_core::error::MtmError;
use mtm_core::io::{load_model, Table};
use mtm_core::manhattan::{self, CountingConvention};
use mtm_core::modular::SlownessSpec;
use mtm_core::scalar::{parse_rational, Exact, NumericMode, Scalar};
use mtm_core::simulate::{compare, simulate, SimConfig, StartMode};
use mtm_core::trace::{MTModel, PointId};
use mtm_core::verify::{run_suite, Suite};

#[derive(Parser)]
#[command(
    name = "mtm",
    version,
    about = "Markov trace mobility models: stationary, spatial and destination distributions"
)]
struct Cli {
    /// Arithmetic: exact rationals or binary64.
    #[arg(long, global = true, default_value = "exact")]
    mode: NumericMode,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a model given as JSON.
    Generic {
        #[arg(long)]
        model: PathBuf,
        /// Emit the spatial distribution (the default when --dest is absent).
        #[arg(long)]
        spatial: bool,
        /// Emit the destination distribution at this point (id or name).
        #[arg(long)]
        dest: Option<String>,
    },
    /// Random way-point on an N×N grid.
    Manhattan {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "B")]
        convention: CountingConvention,
        #[arg(long, group = "which")]
        closed_form: bool,
        #[arg(long, group = "which")]
        exact: bool,
        #[arg(long, group = "which")]
        both: bool,
        /// Destination distribution conditioned on the cell "i,j".
        #[arg(long)]
        dest: Option<String>,
        /// Add the continuum density at each cell centre (unit square).
        #[arg(long)]
        density: bool,
    },
    /// DownTown street grid built from route bundles.
    Downtown {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "1")]
        m: usize,
        /// const:<v> | linear:<a>,<b> | table:<file>
        #[arg(long, default_value = "const:1")]
        slowness: String,
        #[arg(long, default_value = "1")]
        wait: String,
        #[arg(long, default_value = "1")]
        crc: String,
        /// Also write the formula check report as JSON.
        #[arg(long)]
        errata_report: Option<PathBuf>,
    },
    /// Monte Carlo agents started from the stationary distribution.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        agents: usize,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        warmup: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run an oracle suite and print a pass/fail table.
    Verify {
        #[arg(long)]
        suite: Suite,
        #[arg(long, default_value_t = 5)]
        max_n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Invalid(String),
    Verification(Vec<String>),
}

impl From<MtmError> for Failure {
    fn from(e: MtmError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Invalid(msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            eprintln!("{}", text.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(1);
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("{msg}");
        return ExitCode::from(1);
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Verification(mismatches)) => {
            eprintln!("verification failed:");
            for m in mismatches.iter().take(10) {
                eprintln!("  {m}");
            }
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(v) = std::env::var("MTM_THREADS") else { return Ok(()) };
    let n: usize = v.parse().map_err(|_| format!("MTM_THREADS must be a positive integer, got '{v}'"))?;
    if n == 0 {
        return Err("MTM_THREADS must be a positive integer, got '0'".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn run(cli: &Cli) -> Outcome<()> {
    let text = match &cli.command {
        Command::Verify { suite, max_n, seed } => return verify(cli, *suite, *max_n, *seed),
        Command::Generic { model, spatial, dest } => match cli.mode {
            NumericMode::Exact => generic::<Exact>(model, *spatial, dest.as_deref())?,
            NumericMode::Float => generic::<f64>(model, *spatial, dest.as_deref())?,
        },
        Command::Manhattan { n, convention, closed_form, exact, both, dest, density } => {
            let which = Which::pick(*convention, *closed_form, *exact, *both)?;
            let dest = dest.as_deref().map(|d| parse_cell(d, *n)).transpose()?;
            match cli.mode {
                NumericMode::Exact => manhattan_table::<Exact>(*n, *convention, which, dest, *density)?,
                NumericMode::Float => manhattan_table::<f64>(*n, *convention, which, dest, *density)?,
            }
        }
        Command::Downtown { n, m, slowness, wait, crc, errata_report } => {
            let p = DownTownParams {
                n: *n,
                m: *m,
                slowness: SlownessSpec::parse(slowness)?,
                wait: rational_flag("wait", wait)?,
                crc: rational_flag("crc", crc)?,
            };
            downtown(&p, cli.mode, errata_report.as_deref())?
        }
        Command::Simulate { model, agents, steps, warmup, seed } => {
            let cfg = SimConfig {
                agents: *agents,
                steps: *steps,
                warmup: *warmup,
                seed: *seed,
                start: StartMode::Stationary,
                record_destinations: false,
            };
            match cli.mode {
                NumericMode::Exact => simulate_table::<Exact>(model, &cfg)?,
                NumericMode::Float => simulate_table::<f64>(model, &cfg)?,
            }
        }
    };
    emit(cli, &text)
}

fn emit(cli: &Cli, table: &Table) -> Outcome<()> {
    let text = match cli.format {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json(),
    };
    write_out(cli.out.as_deref(), &text)
}

fn write_out(path: Option<&Path>, text: &str) -> Outcome<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| invalid(format!("Io: {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn rational_flag(name: &str, text: &str) -> Outcome<Exact> {
    parse_rational(text).ok_or_else(|| invalid(format!("Parse: --{name} expects a rational, got '{text}'")))
}

fn find_point<S: Scalar>(mtm: &MTModel<S>, key: &str) -> Outcome<PointId> {
    let points = mtm.trace_set().points();
    points
        .iter()
        .find(|p| p.name.as_deref() == Some(key))
        .or_else(|| key.parse::<usize>().ok().and_then(|id| points.iter().find(|p| p.id == id)))
        .map(|p| p.id)
        .ok_or_else(|| invalid(format!("UnknownPoint: '{key}'")))
}

fn generic<S: Scalar>(path: &Path, want_spatial: bool, dest: Option<&str>) -> Outcome<Table> {
    let mtm = load_model::<S>(path)?;
    let pi = stationary_full(&mtm)?;
    let points = mtm.trace_set().points();
    let mut t = Table::new(&["distribution", "point", "name", "probability"]);
    if want_spatial || dest.is_none() {
        for (p, v) in points.iter().zip(&spatial(&mtm, &pi)?.values) {
            t.push(vec!["spatial".into(), p.id.to_string(), p.label(), v.render()]);
        }
    }
    if let Some(key) = dest {
        let at = find_point(&mtm, key)?;
        let label = format!("destination@{}", points[at].label());
        for (p, v) in points.iter().zip(&destination(&mtm, &pi, at)?.values) {
            t.push(vec![label.clone(), p.id.to_string(), p.label(), v.render()]);
        }
    }
    Ok(t)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Which {
    ClosedForm,
    Exact,
    Both,
}

impl Which {
    fn pick(conv: CountingConvention, closed: bool, exact: bool, both: bool) -> Outcome<Which> {
        let w = if both {
            Which::Both
        } else if closed {
            Which::ClosedForm
        } else if exact {
            Which::Exact
        } else if conv == CountingConvention::A {
            Which::ClosedForm
        } else {
            Which::Exact
        };
        if conv == CountingConvention::B && w != Which::Exact {
            return Err(invalid("InvalidParameter: convention B has no closed form, use --exact"));
        }
        Ok(w)
    }
}

fn parse_cell(text: &str, n: usize) -> Outcome<manhattan::Cell> {
    let bad = || invalid(format!("Parse: cell must be 'i,j' with 0 <= i,j < {n}, got '{text}'"));
    let (a, b) = text.split_once(',').ok_or_else(bad)?;
    let (i, j) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if i >= n || j >= n {
        return Err(bad());
    }
    Ok((i, j))
}

fn to_mode<S: Scalar>(x: &Exact) -> S {
    S::from_exact(x)
}

/// Convention A "exact" is Γ normalised to sum one; convention B "exact"
/// is the chain's |𝒯_u|/|S|.
fn manhattan_table<S: Scalar>(
    n: usize,
    conv: CountingConvention,
    which: Which,
    dest: Option<manhattan::Cell>,
    density: bool,
) -> Outcome<Table> {
    if n < 2 {
        return Err(invalid(format!("InvalidParameter: N must be at least 2, got {n}")));
    }
    let cells: Vec<manhattan::Cell> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let (closed, exact): (Vec<Exact>, Vec<Exact>) = match (conv, dest) {
        (CountingConvention::A, None) => {
            let gammas: Vec<i64> = cells.iter().map(|&c| manhattan::gamma(n, c)).collect();
            let total: i64 = gammas.iter().sum();
            (
                cells.iter().map(|&c| manhattan::spatial_closed(n, c)).collect(),
                gammas.iter().map(|&g| Exact::from_ratio(g, total)).collect(),
            )
        }
        (CountingConvention::A, Some(at)) => {
            let etas: Vec<i64> = cells.iter().map(|&d| manhattan::eta(n, d, at)).collect();
            let total: i64 = etas.iter().sum();
            (
                cells.iter().map(|&d| manhattan::dest_closed(n, at, d)).collect(),
                etas.iter().map(|&e| Exact::from_ratio(e, total)).collect(),
            )
        }
        (CountingConvention::B, None) => (Vec::new(), manhattan::spatial_exact(n)?),
        (CountingConvention::B, Some(at)) => {
            let mtm = manhattan::build_manhattan::<Exact>(n)?;
            let pi = stationary_full(&mtm)?;
            (Vec::new(), destination(&mtm, &pi, manhattan::cell_id(n, at))?.values)
        }
    };
    let mut headers = vec!["i", "j"];
    match which {
        Which::ClosedForm | Which::Exact => headers.push("probability"),
        Which::Both => headers.extend(["closed_form", "exact"]),
    }
    if density {
        headers.push("density");
    }
    let mut t = Table::new(&headers);
    for (k, &(i, j)) in cells.iter().enumerate() {
        let mut row = vec![i.to_string(), j.to_string()];
        match which {
            Which::ClosedForm => row.push(to_mode::<S>(&closed[k]).render()),
            Which::Exact => row.push(to_mode::<S>(&exact[k]).render()),
            Which::Both => {
                row.push(to_mode::<S>(&closed[k]).render());
                row.push(to_mode::<S>(&exact[k]).render());
            }
        }
        if density {
            let (x, y) = (manhattan::cell_centre(1.0, n, i), manhattan::cell_centre(1.0, n, j));
            // The conditioned density is infinite on the cross through the
            // conditioning cell.
            let d = match dest {
                None => Some(manhattan::density_spatial(1.0, x, y)),
                Some(at) => {
                    let a = (manhattan::cell_centre(1.0, n, at.0), manhattan::cell_centre(1.0, n, at.1));
                    match manhattan::density_dest(1.0, a, (x, y))? {
                        manhattan::DestDensity::Quadrant(v) => Some(v),
                        manhattan::DestDensity::Cross(_) => None,
                    }
                }
            };
            row.push(d.map_or_else(|| "inf".to_string(), |v| v.render()));
        }
        t.push(row);
    }
    Ok(t)
}

fn downtown(p: &DownTownParams, mode: NumericMode, report: Option<&Path>) -> Outcome<Table> {
    let dt = build_downtown(p)?;
    let values: Vec<String> = match mode {
        NumericMode::Exact => dt.spatial::<Exact>()?.values.iter().map(Scalar::render).collect(),
        NumericMode::Float => dt.spatial::<f64>()?.values.iter().map(Scalar::render).collect(),
    };
    let mut t = Table::new(&["role", "i", "j", "stripe", "k", "probability"]);
    for (c, v) in dt.cells.iter().zip(values) {
        let role = serde_json::to_value(c.role).expect("serialisable");
        t.push(vec![
            role.as_str().unwrap_or_default().to_string(),
            c.i.to_string(),
            c.j.to_string(),
            c.stripe.map(|s| s.symbol().to_string()).unwrap_or_default(),
            c.k.to_string(),
            v,
        ]);
    }
    if let Some(path) = report {
        let r = errata_report(&dt)?;
        let json = serde_json::to_string_pretty(&r).expect("serialisable") + "\n";
        write_out(Some(path), &json)?;
    }
    Ok(t)
}

fn simulate_table<S: Scalar>(path: &Path, cfg: &SimConfig) -> Outcome<Table> {
    let mtm = load_model::<S>(path)?;
    let pi = stationary_full(&mtm)?;
    let analytic = spatial(&mtm, &pi)?;
    let h = simulate(&mtm, Some(&pi), cfg)?;
    let c = compare(&h, &analytic)?;
    eprintln!(
        "samples={} tv={} chi2={} dof={} p={}",
        h.samples,
        c.tv.render(),
        c.chi2.render(),
        c.dof,
        c.chi2_pvalue.render()
    );
    // Same columns as `generic`, so the two exports line up row by row.
    let mut t = Table::new(&["distribution", "point", "name", "probability"]);
    let points = mtm.trace_set().points();
    for (p, v) in points.iter().zip(&analytic.values) {
        t.push(vec!["spatial".into(), p.id.to_string(), p.label(), v.render()]);
    }
    for (p, &c) in points.iter().zip(&h.occupancy) {
        let f = S::from_ratio(c as i64, h.samples as i64);
        t.push(vec!["empirical".into(), p.id.to_string(), p.label(), f.render()]);
    }
    Ok(t)
}

fn verify(cli: &Cli, suite: Suite, max_n: usize, seed: u64) -> Outcome<()> {
    let report = run_suite(suite, max_n, seed)?;
    let mut t = Table::new(&["suite", "check", "result", "detail"]);
    for c in &report.checks {
        let result = if c.passed { "PASS" } else { "FAIL" };
        t.push(vec![report.suite.clone(), c.name.clone(), result.into(), c.detail.clone()]);
    }
    let text = match cli.format {
        Format::Json => serde_json::to_string_pretty(&report).expect("serialisable") + "\n",
        Format::Csv => t.to_csv(),
    };
    write_out(cli.out.as_deref(), &text)?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Verification(report.mismatches))
    }
}
