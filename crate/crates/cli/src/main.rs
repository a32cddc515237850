use clap::{Args, Parser, Subcommand};
use liouville::catalog::{list_systems, SystemParams};
use liouville::report::{
    actions_report, analyze_report, cartan_report, completion_report, mf_report, parse_point, rank_report,
    resolve_system, simulate_report, verify_report, AnalysisReport, Outcome, ReportError, SimulateOptions,
};
use liouville::sysfile::write_system_file;
use liouville::SeedStream;
use std::path::PathBuf;
use std::process::ExitCode;

/// Lie-algebraic integrability analysis of Hamiltonian systems.
///
/// SYSTEM is a path to a system file or `catalog:<name>`.
#[derive(Parser, Debug)]
#[command(name = "liouville", version)]
struct Cli {
    /// Seed for all sampling.
    #[arg(long, global = true, env = "LIOUVILLE_SEED", default_value_t = 42)]
    seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Exit with status 1 on negative verdicts.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct SystemArg {
    /// System file or catalog:<name>.
    system: String,
    /// Catalog parameter override, e.g. `xi=1,1,-2` (repeatable).
    #[arg(long = "param", value_name = "NAME=VALUES")]
    params: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closure, structure constants, solvability and independence.
    Analyze(SystemArg),
    /// Rank of the algebra from the bracket matrix.
    Rank(SystemArg),
    /// Cartan subalgebra at a regular element.
    Cartan {
        #[command(flatten)]
        system: SystemArg,
        /// Values of the invariants, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        h: Vec<f64>,
    },
    /// Mishchenko–Fomenko dimension condition.
    MfCheck(SystemArg),
    /// Polynomial completion to an abelian algebra.
    Complete {
        #[command(flatten)]
        system: SystemArg,
        #[arg(long, default_value_t = 2)]
        degree: usize,
        /// Invariant names used as generators (default: all).
        #[arg(long, value_delimiter = ',')]
        generators: Option<Vec<String>>,
        /// Regular element; defaults to the values at the first probe.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        h: Option<Vec<f64>>,
    },
    /// Integrate the Hamiltonian flow.
    Simulate {
        #[command(flatten)]
        system: SystemArg,
        /// Final time (negative integrates backwards).
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
        /// Initial point `q1,..,qn|p1,..,pn`; defaults to the first probe.
        #[arg(long, allow_hyphen_values = true)]
        from: Option<String>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Use the fixed-step fourth-order scheme with this step.
        #[arg(long)]
        step: Option<f64>,
        /// Stop when two vortices come within 1e-3 of each other.
        #[arg(long)]
        collision_guard: bool,
        /// Write the trajectory CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Action variables, times and frequencies from the [chart] section.
    Actions {
        #[command(flatten)]
        system: SystemArg,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        h: Option<Vec<f64>>,
        /// Tabulate the spectral curve of this degree.
        #[arg(long)]
        curve: Option<usize>,
        /// Where to write the spectral-curve CSV.
        #[arg(long, requires = "curve")]
        curve_csv: Option<PathBuf>,
    },
    /// Run the reference checks and print a pass/fail table.
    VerifyPaper,
    /// List catalog systems and their parameters.
    List,
    /// Print a system in the system-file format.
    Export(SystemArg),
}

fn parse_params(raw: &[String]) -> Result<SystemParams, ReportError> {
    let mut out = SystemParams::new();
    for item in raw {
        let (name, values) = item
            .split_once('=')
            .ok_or_else(|| ReportError::Usage(format!("--param expects NAME=VALUES, got `{item}`")))?;
        let values = values
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| ReportError::Usage(format!("`{v}` in --param {name} is not a number")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.insert(name.trim().to_string(), values);
    }
    Ok(out)
}

fn write_file(path: &PathBuf, text: &str) -> Result<(), ReportError> {
    std::fs::write(path, text).map_err(|e| ReportError::Usage(format!("cannot write {}: {e}", path.display())))
}

enum Output {
    Report(AnalysisReport),
    Text(String),
}

fn run(cli: &Cli) -> Result<Output, ReportError> {
    let seeds = SeedStream::new(cli.seed);
    let args = vec![format!("{:?}", cli.command)];
    let load = |s: &SystemArg| resolve_system(&s.system, &parse_params(&s.params)?);
    let report = |name: &str, out: Outcome, def| Output::Report(out.into_report(name, &args, def, cli.seed));
    Ok(match &cli.command {
        Command::Analyze(s) => {
            let def = load(s)?;
            report("analyze", analyze_report(&def, &seeds)?, Some(&def))
        }
        Command::Rank(s) => {
            let def = load(s)?;
            report("rank", rank_report(&def, &seeds)?, Some(&def))
        }
        Command::Cartan { system, h } => {
            let def = load(system)?;
            report("cartan", cartan_report(&def, Some(h.clone()), &seeds)?, Some(&def))
        }
        Command::MfCheck(s) => {
            let def = load(s)?;
            report("mf-check", mf_report(&def, &seeds)?, Some(&def))
        }
        Command::Complete {
            system,
            degree,
            generators,
            h,
        } => {
            let def = load(system)?;
            let out = completion_report(&def, *degree, generators.clone(), h.clone(), &seeds)?;
            report("complete", out, Some(&def))
        }
        Command::Simulate {
            system,
            t,
            from,
            tol,
            step,
            collision_guard,
            csv,
        } => {
            let def = load(system)?;
            let opts = SimulateOptions {
                t: *t,
                from: from.as_deref().map(parse_point).transpose()?,
                tol: *tol,
                step: *step,
                collision_guard: *collision_guard,
            };
            let (out, table) = simulate_report(&def, &opts)?;
            if let Some(path) = csv {
                write_file(path, &table)?;
            }
            report("simulate", out, Some(&def))
        }
        Command::Actions {
            system,
            h,
            curve,
            curve_csv,
        } => {
            let def = load(system)?;
            let (out, table) = actions_report(&def, h.clone(), *curve)?;
            if let (Some(path), Some(table)) = (curve_csv, table) {
                write_file(path, &table)?;
            }
            report("actions", out, Some(&def))
        }
        Command::VerifyPaper => {
            let (out, results) = verify_report(&seeds);
            for r in &results {
                eprintln!("{r}");
            }
            let passed = results.iter().filter(|r| r.passed).count();
            eprintln!("{passed}/{} criteria passed", results.len());
            report("verify-paper", out, None)
        }
        Command::List => {
            let mut text = String::new();
            for info in list_systems() {
                text.push_str(&format!("{:<22} {}\n", info.name, info.summary));
                for p in info.params {
                    let default: Vec<String> = p.default.iter().map(|v| v.to_string()).collect();
                    text.push_str(&format!("    {:<8} {} (default {})\n", p.name, p.description, default.join(",")));
                }
            }
            Output::Text(text)
        }
        Command::Export(s) => Output::Text(write_system_file(&load(s)?)),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Output::Text(text)) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Ok(Output::Report(report)) => {
            let json = report.to_json();
            match &cli.out {
                Some(path) => {
                    if let Err(e) = write_file(path, &json) {
                        eprintln!("error: {e}");
                        return ExitCode::from(2);
                    }
                }
                None => print!("{json}"),
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if cli.strict && !report.verdict {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
