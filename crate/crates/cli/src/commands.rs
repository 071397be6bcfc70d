//! Subcommand bodies.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use vargibbs_core::circuits::{
    energy_estimation_cost, entropy_estimation_cost, entropy_estimation_cost_for_series,
    QueryCostReport,
};
use vargibbs_core::fourierlog::{assemble_log_series, CertifiedLogSeries};
use vargibbs_core::hamiltonians::{random_instance, AdiabaticFamily, Coupling, MAX_QUBITS};
use vargibbs_core::numkernel::{random_density_matrix, random_spectrum, ComplexMatrix, DensityMatrix};
use vargibbs_core::variational::{
    derive_seed, entropy_fourier, run_experiment, von_neumann_entropy, EntropyMode,
    ExperimentResult, Readout, StopReason,
};

use crate::config::{ExperimentConfig, ResolvedExperiment};
use crate::output::{to_json, write_atomic, write_json};
use crate::{CliError, EntropyArgs, InstanceArgs, PrepareArgs, ResourcesArgs, SeriesArgs};

/// Uses the given seed or draws a fresh one and reports it for replay.
fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed: {s}");
        s
    })
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    print!("{}", String::from_utf8(to_json(value)?).map_err(anyhow::Error::from)?);
    Ok(())
}

pub fn series(a: &SeriesArgs) -> Result<(), CliError> {
    let built = assemble_log_series(a.p_min, a.eps)?;
    write_json(&a.out, &built)?;
    print_json(&built.certificate)?;
    if !built.certificate.passed {
        return Err(CliError::Certificate(format!(
            "max error {:e} exceeds eps {:e}; series written to {}",
            built.certificate.max_error,
            a.eps,
            a.out.display()
        )));
    }
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("reading {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{what} {}: {e}", path.display())))
}

/// Loads a series file; an uncertified series is a certificate failure.
fn load_series(path: &Path) -> Result<CertifiedLogSeries, CliError> {
    let s: CertifiedLogSeries = read_json(path, "series")?;
    s.series.validate()?;
    if !s.certificate.passed {
        return Err(CliError::Certificate(format!(
            "series {} failed its certificate (max error {:e})",
            path.display(),
            s.certificate.max_error
        )));
    }
    Ok(s)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StateFile {
    re: Vec<Vec<f64>>,
    #[serde(default)]
    im: Option<Vec<Vec<f64>>>,
}

fn load_state(path: &Path) -> Result<DensityMatrix, CliError> {
    let f: StateFile = read_json(path, "state")?;
    let d = f.re.len();
    let square = |rows: &[Vec<f64>]| rows.len() == d && rows.iter().all(|r| r.len() == d);
    if d == 0 || !square(&f.re) || !f.im.as_deref().is_none_or(square) {
        return Err(CliError::Validation("state must be a non-empty square matrix".into()));
    }
    let m = ComplexMatrix::from_fn(d, d, |i, j| {
        let im = f.im.as_ref().map_or(0.0, |v| v[i][j]);
        num_complex::Complex64::new(f.re[i][j], im)
    });
    Ok(DensityMatrix::new(m)?)
}

#[derive(Serialize)]
struct EntropyReport {
    mode: EntropyMode,
    exact: f64,
    estimate: f64,
    abs_error: f64,
    min_eigenvalue: f64,
    below_p_min: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    warning: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cost: Option<QueryCostReport>,
}

pub fn estimate_entropy(a: &EntropyArgs) -> Result<(), CliError> {
    let mode = EntropyMode::from(a.mode);
    let series = a.series.as_deref().map(load_series).transpose()?;
    if mode != EntropyMode::Exact && series.is_none() {
        return Err(CliError::Validation("Fourier modes need --series".into()));
    }
    if mode == EntropyMode::FourierShots && a.shots == 0 {
        return Err(CliError::Validation("--shots must be at least 1".into()));
    }
    let needs_seed = a.random || mode == EntropyMode::FourierShots;
    let seed = needs_seed.then(|| resolve_seed(a.seed));
    let rho = if a.random {
        let floor = series
            .as_ref()
            .map(|s| s.p_min)
            .ok_or_else(|| CliError::Validation("--random needs --series to set the spectrum floor".into()))?;
        if a.qubits == 0 || a.qubits > MAX_QUBITS {
            return Err(CliError::Validation(format!("--qubits must lie in 1..={MAX_QUBITS}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or_default());
        let spectrum = random_spectrum(1 << a.qubits, floor, &mut rng)?;
        random_density_matrix(&spectrum, &mut rng)?
    } else {
        load_state(a.state.as_deref().expect("clap requires --state without --random"))?
    };
    let exact = von_neumann_entropy(&rho);
    let min_eigenvalue = rho.spectrum()[0];
    let (estimate, below_p_min) = match (mode, &series) {
        (EntropyMode::Exact, s) => (exact, s.as_ref().is_some_and(|s| min_eigenvalue < s.p_min)),
        (EntropyMode::FourierExact, Some(s)) => {
            let e = entropy_fourier(&rho, s, Readout::Exact)?;
            (e.value, e.below_p_min)
        }
        (EntropyMode::FourierShots, Some(s)) => {
            let readout = Readout::Shots {
                shots: a.shots,
                seed: derive_seed(seed.unwrap_or_default(), &[1]),
            };
            let e = entropy_fourier(&rho, s, readout)?;
            (e.value, e.below_p_min)
        }
        _ => unreachable!("Fourier modes checked for a series above"),
    };
    let warning = below_p_min.then(|| {
        format!(
            "spectrum minimum {min_eigenvalue:e} lies below p_min {}; the error bound does not apply",
            series.as_ref().map_or(0.0, |s| s.p_min)
        )
    });
    let cost = series
        .as_ref()
        .map(|s| entropy_estimation_cost_for_series(&s.series, s.eps))
        .transpose()?;
    let report = EntropyReport {
        mode,
        exact,
        estimate,
        abs_error: (estimate - exact).abs(),
        min_eigenvalue,
        below_p_min,
        warning,
        seed,
        cost,
    };
    if let Some(out) = &a.out {
        write_json(out, &report)?;
    }
    print_json(&report)
}

#[derive(Serialize)]
struct ResourcesReport {
    entropy: QueryCostReport,
    energy: QueryCostReport,
}

pub fn resources(a: &ResourcesArgs) -> Result<(), CliError> {
    let report = ResourcesReport {
        entropy: entropy_estimation_cost(a.p_min, a.eps)?,
        energy: energy_estimation_cost(a.alpha_norm, a.eps)?,
    };
    if let Some(out) = &a.out {
        write_json(out, &report)?;
    }
    print_json(&report)
}

#[derive(Serialize)]
struct TraceDocument<'a> {
    config: &'a ExperimentConfig,
    seed: u64,
    instance: &'a AdiabaticFamily,
    result: &'a ExperimentResult,
}

#[derive(Serialize)]
struct Summary {
    seed: u64,
    f_gibbs: f64,
    final_best_f: f64,
    final_delta_f: f64,
    final_trace_distance: f64,
    evals_used: u64,
    stop: StopReason,
    converged: bool,
    notes: Vec<String>,
}

fn trace_csv(result: &ExperimentResult) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["evals", "best_F", "delta_F", "trace_distance"])
        .map_err(anyhow::Error::from)?;
    for r in &result.records {
        w.write_record([
            r.evals.to_string(),
            r.best_f.to_string(),
            r.delta_f.to_string(),
            r.trace_distance.to_string(),
        ])
        .map_err(anyhow::Error::from)?;
    }
    Ok(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)
}

pub fn prepare_gibbs(a: &PrepareArgs) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(&a.config)?;
    let ResolvedExperiment {
        config,
        seed,
        family,
        ansatz,
        objective,
    } = cfg.resolve(|| resolve_seed(None))?;
    log::info!("running {} parameters on {} qubits", ansatz.num_params(), ansatz.n);
    let result = run_experiment(
        &family,
        &ansatz,
        &objective,
        config.init,
        config.optimizer,
        seed,
        config.trace_interval,
    )?;
    let summary = Summary {
        seed,
        f_gibbs: result.f_gibbs,
        final_best_f: result.last().best_f,
        final_delta_f: result.final_delta_f(),
        final_trace_distance: result.final_trace_distance(),
        evals_used: result.evals_used,
        stop: result.stop,
        converged: result.stop == StopReason::Converged,
        notes: result.notes.clone(),
    };
    let doc = TraceDocument {
        config: &config,
        seed,
        instance: &family,
        result: &result,
    };
    write_atomic(&config.output.trace_csv, &trace_csv(&result)?)?;
    write_json(&config.output.trace_json, &doc)?;
    write_json(&config.output.summary, &summary)?;
    print_json(&summary)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub coupling: Option<Coupling>,
    pub h0: vargibbs_core::hamiltonians::PauliSum,
    pub h1: vargibbs_core::hamiltonians::PauliSum,
}

pub fn instance(a: &InstanceArgs) -> Result<(), CliError> {
    if a.n == 0 || a.n > MAX_QUBITS {
        return Err(CliError::Validation(format!("--n must lie in 1..={MAX_QUBITS}")));
    }
    let seed = resolve_seed(a.seed);
    let coupling = Coupling::from(a.coupling);
    let fam = random_instance(a.n, seed, coupling)?;
    let file = InstanceFile {
        seed: Some(seed),
        coupling: Some(coupling),
        h0: fam.h0,
        h1: fam.h1,
    };
    Ok(write_json(&a.out, &file)?)
}
