use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ctrlsynth::simulate::NoiseModel;
use ctrlsynth::{FixedPointFormat, Limits, Rounding};
use ctrlsynth_cli::report::{to_json, to_text};
use ctrlsynth_cli::spec::SpecError;
use ctrlsynth_cli::{
    load_benchmark, load_controller, parse_format, run_verify, synthesize, timeout, Engine, SynthOptions,
    TraceRequest,
};

/// Synthesize and verify fixed-point digital controllers for uncertain plants.
#[derive(Debug, Parser)]
#[command(name = "ctrlsynth", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EngineArg {
    Two,
    One,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RoundingArg {
    Truncate,
    Nearest,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportArg {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NoiseArg {
    Zero,
    WorstCase,
    Uniform,
}

#[derive(Debug, clap::Args)]
struct Output {
    #[arg(long, value_enum, default_value = "text")]
    report: ReportArg,
    /// Write the closed-loop step response as CSV.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    /// Quantization noise injected into the trace, sized by the controller format.
    #[arg(long, value_enum, default_value = "zero")]
    noise: NoiseArg,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Search for a controller that stabilizes every plant of a benchmark.
    Synth {
        benchmark: PathBuf,
        #[arg(long, value_enum, default_value = "two")]
        engine: EngineArg,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = Limits::default().max_iterations)]
        max_iters: usize,
        /// Highest plant precision as `I,F`.
        #[arg(long, value_parser = parse_format, default_value = "32,32")]
        max_precision: FixedPointFormat,
        /// Wall-clock budget in seconds.
        #[arg(long)]
        timeout: Option<f64>,
        /// Cost evaluations per search step.
        #[arg(long, default_value_t = Limits::default().search_budget)]
        search_budget: usize,
        /// Omit wall time so repeated runs produce identical reports.
        #[arg(long)]
        no_timing: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Check a given controller against a benchmark.
    Verify {
        benchmark: PathBuf,
        #[arg(long)]
        controller: PathBuf,
        /// Overrides the rounding named in the controller file (default truncate).
        #[arg(long, value_enum)]
        rounding: Option<RoundingArg>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
}

fn noise_model(arg: NoiseArg, format: FixedPointFormat) -> NoiseModel {
    let q = ctrlsynth::rational::to_f64(&format.ulp());
    match arg {
        NoiseArg::Zero => NoiseModel::zero(),
        NoiseArg::WorstCase => NoiseModel::worst_case(q, q),
        NoiseArg::Uniform => NoiseModel::uniform(q, q),
    }
}

fn print<T: serde::Serialize>(report: &T, kind: ReportArg) {
    let text = match kind {
        ReportArg::Json => to_json(report) + "\n",
        ReportArg::Text => to_text(report),
    };
    // a closed pipe is not worth a panic
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn write_trace(path: &PathBuf, trace: &ctrlsynth::SimulationTrace) -> Result<(), String> {
    std::fs::write(path, trace.to_csv()).map_err(|e| format!("{}: {e}", path.display()))
}

fn usage_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(2)
}

fn run(cli: Cli) -> Result<ExitCode, ExitCode> {
    match cli.command {
        Command::Synth {
            benchmark,
            engine,
            seed,
            max_iters,
            max_precision,
            timeout: secs,
            search_budget,
            no_timing,
            output,
        } => {
            let spec = load_benchmark(&benchmark).map_err(spec_error)?;
            if secs.is_some_and(|s| !(s >= 0.0 && s.is_finite())) {
                return Err(usage_error("--timeout must be a nonnegative number of seconds"));
            }
            let options = SynthOptions {
                engine: match engine {
                    EngineArg::Two => Engine::TwoStage,
                    EngineArg::One => Engine::OneStage,
                },
                seed,
                limits: Limits {
                    max_iterations: max_iters,
                    max_precision,
                    timeout: timeout(secs),
                    search_budget,
                },
                timing: !no_timing,
            };
            let (report, controller) = synthesize(&spec, options);
            if let (Some(path), Some(c)) = (&output.trace_out, &controller) {
                let noise = noise_model(output.noise, spec.controller_format);
                let trace = ctrlsynth::step_response(c, &spec.plant, spec.sample_time_f64(), output.steps, noise, seed)
                    .map_err(usage_error)?;
                write_trace(path, &trace).map_err(usage_error)?;
            }
            print(&report, output.report);
            Ok(if report.is_success() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Verify {
            benchmark,
            controller,
            rounding,
            seed,
            output,
        } => {
            let spec = load_benchmark(&benchmark).map_err(spec_error)?;
            let cspec = load_controller(&controller).map_err(spec_error)?;
            let rounding = match rounding {
                Some(RoundingArg::Truncate) => Rounding::Truncate,
                Some(RoundingArg::Nearest) => Rounding::Nearest,
                None => cspec.rounding.unwrap_or(Rounding::Truncate),
            };
            let c = cspec.controller(rounding).map_err(usage_error)?;
            let request = TraceRequest {
                steps: output.steps,
                noise: noise_model(output.noise, c.format()),
                seed,
            };
            let (report, trace) = run_verify(&spec, &c, output.trace_out.as_ref().map(|_| request));
            if let (Some(path), Some(trace)) = (&output.trace_out, &trace) {
                write_trace(path, trace).map_err(usage_error)?;
            }
            print(&report, output.report);
            Ok(if report.is_stable() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn spec_error(e: SpecError) -> ExitCode {
    usage_error(e)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    run(cli).unwrap_or_else(|code| code)
}
