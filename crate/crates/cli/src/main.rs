use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, ValueEnum};
use volterra_sa::problem_file::load_problem;
use volterra_sa::{
    builtin_example, render, render_sweep, run, GridMode, OutputFormat, Plain, ProblemSpec, RunOptions, RunReport,
    SaConfig, SaContext, StopReason, StoppingRule, SweepEntry,
};

const EXIT_MAX_N: u8 = 2;
const EXIT_UNSTABLE: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Sa,
    FpaAbs,
    FpaCorr,
    FpaDisc,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Table,
    Csv,
    Jsonl,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Grid {
    /// Same as `limit`.
    Default,
    /// Uniform grid; the r = a row is replaced by its derivative.
    Limit,
    /// Nodes a + (b - a)(i + 1)/(n + 1), all interior.
    Shifted,
    /// Uniform grid taken literally; singular when a = 0.
    Paper,
}

/// Solve a first-kind Volterra equation by Taylor collocation and stop the
/// degree loop with stochastic arithmetic or a classical tolerance.
#[derive(Debug, Parser)]
#[command(name = "volterra-sa", version)]
#[command(group(ArgGroup::new("source").required(true).args(["example", "problem"])))]
struct Cli {
    /// Built-in problem, 1 to 5.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=5))]
    example: Option<u32>,
    /// Problem file.
    #[arg(long)]
    problem: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "sa")]
    mode: Mode,
    /// Tolerance for the fpa-* modes.
    #[arg(long)]
    eps: Option<f64>,
    /// Evaluation point (overrides the problem's).
    #[arg(long)]
    point: Option<f64>,
    /// Largest n = degree + 1 to try.
    #[arg(long)]
    max_n: Option<usize>,
    /// Simpson panels per integral (even).
    #[arg(long)]
    panels: Option<usize>,
    /// Samples per stochastic number.
    #[arg(long)]
    samples: Option<usize>,
    /// Student quantile.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Mantissa bits for stochastic runs (24 or 53); defaults to the problem's.
    #[arg(long)]
    precision: Option<u32>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    #[arg(long, value_enum, default_value = "default")]
    grid: Grid,
    /// Expansion centre (overrides the problem's).
    #[arg(long)]
    center: Option<f64>,
    /// Comma-separated tolerances; prints iterations per tolerance.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    sweep_eps: Option<Vec<String>>,
}

struct Usage(String);

impl<E: std::fmt::Display> From<E> for Usage {
    fn from(e: E) -> Self {
        Usage(e.to_string())
    }
}

fn rule_for(mode: Mode, eps: Option<f64>) -> StoppingRule {
    let epsilon = eps.unwrap_or(0.0);
    match mode {
        Mode::Sa => StoppingRule::SaSuccessive,
        Mode::FpaAbs => StoppingRule::FpaAbsolute { epsilon },
        Mode::FpaCorr => StoppingRule::FpaCorrection { epsilon },
        Mode::FpaDisc => StoppingRule::FpaDiscrepancy { epsilon },
    }
}

fn load_spec(cli: &Cli) -> Result<ProblemSpec, Usage> {
    let mut spec = match (&cli.example, &cli.problem) {
        (Some(id), _) => builtin_example(*id)?,
        (None, Some(path)) => load_problem(path)?,
        (None, None) => unreachable!("clap enforces a source"),
    };
    if let Some(p) = cli.point {
        spec.point = p;
    }
    if let Some(c) = cli.center {
        spec.c = c;
    }
    spec.validate()?;
    Ok(spec)
}

fn check_flags(cli: &Cli) -> Result<(), Usage> {
    let sa = matches!(cli.mode, Mode::Sa);
    if sa {
        if cli.eps.is_some() {
            return Err(Usage("--eps only applies to the fpa-* modes".into()));
        }
        if cli.sweep_eps.is_some() {
            return Err(Usage("--sweep-eps only applies to the fpa-* modes".into()));
        }
    } else {
        if cli.eps.is_some() == cli.sweep_eps.is_some() {
            return Err(Usage("fpa-* modes need exactly one of --eps or --sweep-eps".into()));
        }
        for (flag, set) in [
            ("--samples", cli.samples.is_some()),
            ("--tau", cli.tau.is_some()),
            ("--precision", cli.precision.is_some()),
        ] {
            if set {
                return Err(Usage(format!("{flag} only applies to --mode sa")));
            }
        }
    }
    Ok(())
}

fn options(cli: &Cli, spec: &ProblemSpec, rule: StoppingRule) -> RunOptions {
    let mut opts = RunOptions::new(spec, rule);
    if let Some(m) = cli.max_n {
        opts.max_n = m;
    }
    if let Some(p) = cli.panels {
        opts.panels = p;
    }
    opts.grid = match cli.grid {
        Grid::Default | Grid::Limit => GridMode::Limit,
        Grid::Shifted => GridMode::Shifted,
        Grid::Paper => GridMode::Paper,
    };
    opts
}

fn exit_code(reason: &StopReason) -> u8 {
    match reason {
        StopReason::RuleFired { .. } => 0,
        StopReason::MaxN => EXIT_MAX_N,
        StopReason::UnstableSystem { .. } => EXIT_UNSTABLE,
    }
}

fn output_format(f: Format) -> OutputFormat {
    match f {
        Format::Table => OutputFormat::Table,
        Format::Csv => OutputFormat::Csv,
        Format::Jsonl => OutputFormat::Jsonl,
    }
}

fn single(cli: &Cli, spec: &ProblemSpec) -> Result<(String, u8), Usage> {
    let opts = options(cli, spec, rule_for(cli.mode, cli.eps));
    let report: RunReport = if matches!(cli.mode, Mode::Sa) {
        let mut config = SaConfig::with_seed(cli.seed);
        config.precision_bits = cli.precision.or(spec.precision_bits).unwrap_or(53);
        if let Some(l) = cli.samples {
            config.samples = l;
        }
        if let Some(t) = cli.tau {
            config.tau = t;
        }
        let ctx = SaContext::new(config)?;
        run(&ctx, spec, &opts)?
    } else {
        run(&Plain, spec, &opts)?
    };
    let code = exit_code(&report.stop_reason);
    Ok((render(&report, output_format(cli.format)), code))
}

fn sweep(cli: &Cli, spec: &ProblemSpec, labels: &[String]) -> Result<(String, u8), Usage> {
    let mut entries = Vec::with_capacity(labels.len());
    let mut code = 0;
    for label in labels {
        let label = label.trim();
        let epsilon: f64 = label
            .parse()
            .map_err(|_| Usage(format!("--sweep-eps: `{label}` is not a number")))?;
        let opts = options(cli, spec, rule_for(cli.mode, Some(epsilon)));
        let report = run(&Plain, spec, &opts)?;
        code = code.max(exit_code(&report.stop_reason));
        entries.push(SweepEntry {
            label: label.to_string(),
            epsilon,
            n: report.records.last().map(|r| r.n),
            stop_reason: report.stop_reason,
        });
    }
    Ok((render_sweep(&entries, output_format(cli.format)), code))
}

fn execute(cli: &Cli) -> Result<(String, u8), Usage> {
    check_flags(cli)?;
    let spec = load_spec(cli)?;
    match &cli.sweep_eps {
        Some(labels) => sweep(cli, &spec, labels),
        None => single(cli, &spec),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok((text, code)) => {
            let mut out = std::io::stdout().lock();
            if out.write_all(text.as_bytes()).and_then(|_| out.flush()).is_err() {
                return ExitCode::FAILURE;
            }
            ExitCode::from(code)
        }
        Err(Usage(msg)) => {
            eprintln!("volterra-sa: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
