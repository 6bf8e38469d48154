//! Front end for synthesizing and checking fixed-point controllers.
//!
//! [`run_synthesis`] and [`run_verify`] turn a parsed benchmark into a
//! report; the binary only handles flags, files and exit codes.

pub mod report;
pub mod spec;

use std::time::Duration;

use ctrlsynth::cegis::{certify, spot_check};
use ctrlsynth::simulate::{step_response, NoiseModel, SimulationTrace};
use ctrlsynth::stability::root_oracle;
use ctrlsynth::transfer::{cancellation_on_or_outside_unit_circle, DEFAULT_CANCELLATION_TOL};
use ctrlsynth::{
    cegis_one_stage, cegis_two_stage, char_poly, frequency_margins, jury_stable, Controller, JuryStatus, Limits, MarginLoop,
    SynthesisOutcome,
};

pub use report::{SynthesisReport, VerifyReport};
pub use ctrlsynth::simulate::SimulationError;
pub use spec::{load_benchmark, load_controller, parse_benchmark, parse_controller, BenchmarkSpec, ControllerSpec};

use report::{CertificateReport, ControllerReport, LimitsReport, MarginReport, NominalReport, TraceReport};

/// Plants sampled for the spot check after a successful synthesis.
pub const SPOT_CHECK_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    TwoStage,
    OneStage,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::TwoStage => "two-stage",
            Engine::OneStage => "one-stage",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub engine: Engine,
    pub seed: u64,
    pub limits: Limits,
    /// Leave out wall time so reports of equal runs are byte-identical.
    pub timing: bool,
}

pub fn run_synthesis(spec: &BenchmarkSpec, options: SynthOptions) -> SynthesisReport {
    synthesize(spec, options).0
}

/// Like [`run_synthesis`], also returning the controller on success.
pub fn synthesize(spec: &BenchmarkSpec, options: SynthOptions) -> (SynthesisReport, Option<Controller>) {
    let family = spec.family();
    let engine = match options.engine {
        Engine::TwoStage => cegis_two_stage,
        Engine::OneStage => cegis_one_stage,
    };
    let result = engine(&family, spec.controller_format, spec.orders, options.seed, options.limits);
    let last_precision = result
        .transcript
        .last()
        .map_or_else(|| spec.plant_format.to_string(), |r| r.precision.clone());
    let (outcome, failure, controller, iterations, spot) = match &result.outcome {
        SynthesisOutcome::Success {
            controller,
            plant_format,
            iterations,
        } => {
            let fam = family.with_plant_format(*plant_format);
            let check = spot_check(controller, &fam, SPOT_CHECK_SAMPLES, options.seed);
            ("success", None, Some(ControllerReport::from(controller)), *iterations, Some(check))
        }
        SynthesisOutcome::Failure(f) => {
            let iterations = result.transcript.last().map_or(0, |r| r.iteration);
            ("failure", Some(format!("{f:?}")), None, iterations, None)
        }
    };
    let report = SynthesisReport {
        format_version: report::FORMAT_VERSION,
        command: "synth",
        benchmark: spec.name.clone(),
        engine: options.engine.name().to_string(),
        seed: options.seed,
        limits: LimitsReport {
            max_iterations: options.limits.max_iterations,
            max_precision: options.limits.max_precision.to_string(),
            timeout_s: options.limits.timeout.map(|d| d.as_secs_f64()),
            search_budget: options.limits.search_budget,
        },
        outcome,
        failure,
        controller,
        plant_format: last_precision,
        iterations,
        certificate: result.certificate.as_ref().map(CertificateReport::from),
        spot_check: spot,
        transcript: result.transcript,
        wall_time_s: options.timing.then_some(result.elapsed.as_secs_f64()),
    };
    (report, result.outcome.controller().cloned())
}

/// Closed-loop step response requested alongside a verification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRequest {
    pub steps: usize,
    pub noise: NoiseModel,
    pub seed: u64,
}

fn noise_name(noise: &NoiseModel) -> String {
    format!("{:?} q1={} q2={}", noise.mode, noise.q1, noise.q2)
}

pub fn run_verify(
    spec: &BenchmarkSpec,
    controller: &Controller,
    trace: Option<TraceRequest>,
) -> (VerifyReport, Option<SimulationTrace>) {
    let family = spec.family();
    let t = spec.sample_time_f64();
    let mut nominal_stable = false;
    let nominal = match char_poly(controller, &spec.plant) {
        Ok(s) => {
            let v = jury_stable(&s);
            nominal_stable = v.status == JuryStatus::Stable;
            NominalReport {
                jury: v.status.to_string(),
                violated: v.violated.map(|c| c.to_string()),
                max_root_modulus: root_oracle(&s),
                unstable_cancellation: cancellation_on_or_outside_unit_circle(
                    controller,
                    &spec.plant,
                    DEFAULT_CANCELLATION_TOL,
                ),
            }
        }
        Err(e) => NominalReport {
            jury: JuryStatus::Unstable.to_string(),
            violated: Some(e.to_string()),
            max_root_modulus: f64::INFINITY,
            unstable_cancellation: false,
        },
    };
    let cert = certify(controller, &family);
    let mut margins = Vec::new();
    let mut margin_error = None;
    for (kind, which) in [("open", MarginLoop::Open), ("closed", MarginLoop::Closed)] {
        match frequency_margins(controller, &spec.plant, t, which) {
            Ok(m) => margins.push(MarginReport::new(kind, &m)),
            Err(e) => margin_error = Some(format!("{kind}: {e}")),
        }
    }
    let mut simulated = None;
    let trace_report = trace.map(|req| match step_response(controller, &spec.plant, t, req.steps, req.noise, req.seed) {
        Ok(tr) => {
            let r = TraceReport {
                steps: req.steps,
                noise: noise_name(&req.noise),
                bounded: tr.is_bounded(),
                diverged_at: tr.diverged_at,
                max_abs_output: tr.max_abs_output(),
                error: None,
            };
            simulated = Some(tr);
            r
        }
        Err(e) => TraceReport {
            steps: req.steps,
            noise: noise_name(&req.noise),
            bounded: false,
            diverged_at: None,
            max_abs_output: f64::INFINITY,
            error: Some(e.to_string()),
        },
    });
    let stable = nominal_stable && !nominal.unstable_cancellation && cert.is_stable();
    let report = VerifyReport {
        format_version: report::FORMAT_VERSION,
        command: "verify",
        benchmark: spec.name.clone(),
        controller: ControllerReport::from(controller),
        plant_format: spec.plant_format.to_string(),
        nominal,
        family: CertificateReport::from(&cert),
        margins,
        margin_error,
        trace: trace_report,
        verdict: if stable { "stable" } else { "unstable" },
    };
    (report, simulated)
}

/// Parse `I,F`.
pub fn parse_format(text: &str) -> Result<ctrlsynth::FixedPointFormat, String> {
    let (i, f) = text.split_once(',').ok_or("expected I,F")?;
    let i: u32 = i.trim().parse().map_err(|_| format!("bad integer bits {i:?}"))?;
    let f: u32 = f.trim().parse().map_err(|_| format!("bad fraction bits {f:?}"))?;
    ctrlsynth::FixedPointFormat::new(i, f).map_err(|e| e.to_string())
}

pub fn timeout(seconds: Option<f64>) -> Option<Duration> {
    seconds.map(Duration::from_secs_f64)
}
