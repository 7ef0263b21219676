//! Command-line driver: computes the spectral and conjugate indices of a
//! Morse–Sturm system and checks that they agree.
//!
//! Exit status: 0 verified, 1 usage or input error, 2 `t = 1` is a conjugate
//! instant, 3 numerical failure or failed check.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use morse_index::presets::{all_presets, preset};
use morse_index::specflow::{axiom_suite, spectral_index};
use morse_index::verify::{
    emit_trace, inertia_csv, instants_csv, random_suite, report_csv, suite_csv, verify,
    OutputFormat, RunConfig, DEFAULT_AXIOM_CASES,
};
use morse_index::winding::DEFAULT_CONTOUR_HEIGHT;
use morse_index::{conjugate, Error, Method, SystemSpec};

const EXIT_USAGE: u8 = 1;
const EXIT_ENDPOINT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "morse-index",
    version,
    about = "Spectral and conjugate indices of Morse-Sturm systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute both indices and all diagnostics; exit 0 iff they agree and every check passes.
    Verify(RunArgs),
    /// Conjugate instants and the winding-number conjugate index.
    ConjugateIndex(RunArgs),
    /// Spectral index by Galerkin inertia and/or crossing forms.
    SpectralIndex(RunArgs),
    /// Verify seeded random trig-polynomial systems.
    RandomSuite(SuiteArgs),
    /// Spectral-flow axioms on random finite-dimensional paths.
    Axioms(AxiomArgs),
    /// Write the built-in preset systems as JSON files.
    EmitPresets(EmitArgs),
}

#[derive(Args, Debug, Clone)]
struct SystemArgs {
    /// System JSON file.
    #[arg(long, conflicts_with = "preset")]
    system: Option<PathBuf>,
    /// Built-in system: flat[:n,nu], riemannian-const[:kappa[,n]], lorentz-split[:kappa], multiplicity-2[:kappa].
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args, Debug, Clone)]
struct NumericArgs {
    /// Half-height h of the contour [-h, 1+h] x [-h, h].
    #[arg(long, default_value_t = DEFAULT_CONTOUR_HEIGHT)]
    contour_height: f64,
    /// RK4 steps on [0, 1].
    #[arg(long, default_value_t = morse_index::propagator::DEFAULT_STEPS)]
    ode_steps: usize,
    /// Initial number of sine modes per component.
    #[arg(long = "galerkin-N", default_value_t = morse_index::specflow::DEFAULT_GALERKIN_MODES)]
    galerkin_n: usize,
    /// Shift of the perturbed path A_t + delta for the crossing-form method.
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Spectral-index method: inertia, crossing or both.
    #[arg(long, default_value = "both")]
    method: String,
    /// Seed for every randomized check.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    /// Write the main output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for contour, scan and inertia traces plus the JSON report.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
    /// Output format: json or csv.
    #[arg(long, default_value = "json")]
    format: String,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    numeric: NumericArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Write the contour trace CSV (re_z, im_z, re_f, im_f, cum_arg) to this file.
    #[arg(long)]
    emit_trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SuiteArgs {
    /// Number of random systems (at most 200).
    #[arg(long, default_value_t = 50)]
    count: usize,
    /// Largest system dimension (at most 4).
    #[arg(long, default_value_t = 2)]
    max_n: usize,
    #[command(flatten)]
    numeric: NumericArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct AxiomArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random paths per axiom.
    #[arg(long, default_value_t = DEFAULT_AXIOM_CASES)]
    cases: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EmitArgs {
    /// Directory receiving one `<name>.json` per preset.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// A failure together with the exit status it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn from_computation(e: Error) -> Self {
        let code = if e.is_endpoint_conjugate() {
            EXIT_ENDPOINT
        } else {
            match e {
                Error::RejectedInput(_)
                | Error::InvalidConfig(_)
                | Error::Io(_)
                | Error::Json(_) => EXIT_USAGE,
                _ => EXIT_NUMERICAL,
            }
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::from_computation(e)
    }
}

type CliResult = Result<u8, Failure>;

fn load_system(args: &SystemArgs) -> Result<SystemSpec, Failure> {
    match (&args.system, &args.preset) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
            SystemSpec::from_json(&text)
                .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
        }
        (None, Some(name)) => preset(name).map_err(Failure::from),
        (None, None) => Err(Failure::usage("one of --system or --preset is required")),
        (Some(_), Some(_)) => Err(Failure::usage(
            "--system and --preset are mutually exclusive",
        )),
    }
}

fn run_config(numeric: &NumericArgs, output: &OutputArgs) -> Result<RunConfig, Failure> {
    let method: Method = numeric.method.parse()?;
    let format: OutputFormat = output.format.parse()?;
    let config = RunConfig {
        contour_height: numeric.contour_height,
        ode_steps: numeric.ode_steps,
        galerkin_modes: numeric.galerkin_n,
        delta: numeric.delta,
        method,
        seed: numeric.seed,
        format,
        trace_dir: output.trace_dir.as_ref().map(|p| p.display().to_string()),
        ..RunConfig::default()
    };
    config.validate()?;
    Ok(config)
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    let text = if text.ends_with('\n') {
        text.to_string()
    } else {
        format!("{text}\n")
    };
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value).map_err(|e| Failure::from(Error::from(e)))
}

fn run_verify(args: RunArgs) -> CliResult {
    let spec = load_system(&args.system)?;
    let config = run_config(&args.numeric, &args.output)?;
    let report = verify(&spec, &config)?;
    let text = match config.format {
        OutputFormat::Json => report.to_json_pretty()?,
        OutputFormat::Csv => report_csv(&report)?,
    };
    write_output(args.output.out.as_deref(), &text)?;
    if let Some(dir) = &args.output.trace_dir {
        emit_trace(&report, dir)?;
    }
    if let (Some(path), Some(conj)) = (&args.emit_trace, &report.conjugate) {
        conj.trace.write_csv_file(path)?;
    }
    if let Some(msg) = &report.message {
        eprintln!("morse-index: {msg}");
    }
    Ok(report.exit_code as u8)
}

fn run_conjugate(args: RunArgs) -> CliResult {
    let spec = load_system(&args.system)?;
    let config = run_config(&args.numeric, &args.output)?;
    let (system, _) = spec.build::<f64>()?;
    let report = conjugate::conjugate_index(&system, &config.conjugate_config())?;
    let text = match config.format {
        OutputFormat::Json => json(&report)?,
        OutputFormat::Csv => instants_csv(&report)?,
    };
    write_output(args.output.out.as_deref(), &text)?;
    if let Some(path) = &args.emit_trace {
        report.trace.write_csv_file(path)?;
    }
    if let Some(dir) = &args.output.trace_dir {
        std::fs::create_dir_all(dir).map_err(Error::from)?;
        report.trace.write_csv_file(&dir.join("contour.csv"))?;
    }
    Ok(0)
}

fn run_spectral(args: RunArgs) -> CliResult {
    let spec = load_system(&args.system)?;
    let config = run_config(&args.numeric, &args.output)?;
    let (system, _) = spec.build::<f64>()?;
    let report = spectral_index(&system, &config.spectral_config())?;
    let text = match config.format {
        OutputFormat::Json => json(&report)?,
        OutputFormat::Csv => inertia_csv(&report.inertia_table)?,
    };
    write_output(args.output.out.as_deref(), &text)?;
    if let Some(dir) = &args.output.trace_dir {
        std::fs::create_dir_all(dir).map_err(Error::from)?;
        std::fs::write(dir.join("inertia.csv"), inertia_csv(&report.inertia_table)?)
            .map_err(Error::from)?;
    }
    let agree = match (
        report.mu_spec_inertia,
        report.mu_spec_crossing,
        report.sfl_l,
    ) {
        (Some(a), Some(c), _) if a != c => false,
        (Some(a), _, Some(l)) => l == -a,
        _ => true,
    };
    Ok(if agree { 0 } else { EXIT_NUMERICAL })
}

fn run_suite(args: SuiteArgs) -> CliResult {
    let config = run_config(&args.numeric, &args.output)?;
    let summary = random_suite(args.count, args.max_n, args.numeric.seed, &config)?;
    let text = match config.format {
        OutputFormat::Json => json(&summary)?,
        OutputFormat::Csv => suite_csv(&summary)?,
    };
    write_output(args.output.out.as_deref(), &text)?;
    Ok(if summary.all_passed() {
        0
    } else {
        EXIT_NUMERICAL
    })
}

fn run_axioms(args: AxiomArgs) -> CliResult {
    let outcomes = axiom_suite(args.seed, args.cases)?;
    write_output(args.out.as_deref(), &json(&outcomes)?)?;
    Ok(if outcomes.iter().all(|o| o.passed) {
        0
    } else {
        EXIT_NUMERICAL
    })
}

fn run_emit_presets(args: EmitArgs) -> CliResult {
    std::fs::create_dir_all(&args.out)
        .map_err(|e| Failure::usage(format!("cannot create {}: {e}", args.out.display())))?;
    for (name, spec) in all_presets() {
        let path = args.out.join(format!("{name}.json"));
        write_output(Some(&path), &spec.to_json_pretty()?)?;
        println!("{}", path.display());
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Verify(a) => run_verify(a),
        Command::ConjugateIndex(a) => run_conjugate(a),
        Command::SpectralIndex(a) => run_spectral(a),
        Command::RandomSuite(a) => run_suite(a),
        Command::Axioms(a) => run_axioms(a),
        Command::EmitPresets(a) => run_emit_presets(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("morse-index: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
