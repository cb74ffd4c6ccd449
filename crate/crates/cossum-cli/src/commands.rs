//! The five subcommands: generate, recover, noise-bench, bessel, dct.

use crate::io::{
    emit_report, fmt17, read_params, read_samples, usage, write_csv, CliError, Config, ErrorsJson,
    RunReport, Timings,
};
use clap::{Args, ValueEnum};
use cossum::bessel::{bessel_mod, BesselSpec};
use cossum::espira::{espira1_recover, espira2_recover};
use cossum::esprit::{esprit_recover, EspritConfig};
use cossum::model::{
    add_noise, relative_errors, sample, snr_psnr, CosineSum, SampleVector, SamplingGrid,
};
use cossum::oracle::prony_solve;
use cossum::transforms::{dct2, g_vector};
use rayon::prelude::*;
use std::path::PathBuf;
use std::time::Instant;

const DEFAULT_TOL: f64 = 1e-13;
const DEFAULT_EPS: f64 = 1e-10;
const BESSEL_SCAN_STEP: f64 = 1e-3;
/// Relative slack when checking the time column against the grid nodes.
const NODE_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Esprit,
    Espira1,
    Espira2,
    Prony,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Esprit => "esprit",
            Method::Espira1 => "espira1",
            Method::Espira2 => "espira2",
            Method::Prony => "prony",
        }
    }

    fn from_name(name: &str) -> Result<Method, CliError> {
        match name {
            "esprit" => Ok(Method::Esprit),
            "espira1" => Ok(Method::Espira1),
            "espira2" => Ok(Method::Espira2),
            "prony" => Ok(Method::Prony),
            other => Err(usage(format!(
                "unknown method `{other}` (expected esprit, espira1, espira2, or prony)"
            ))),
        }
    }
}

fn resolve_method(
    flag: Option<Method>,
    config: &Config,
    default: Method,
) -> Result<Method, CliError> {
    if let Some(method) = flag {
        return Ok(method);
    }
    match &config.method {
        Some(name) => Method::from_name(name),
        None => Ok(default),
    }
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

struct SolveOutcome {
    sum: CosineSum,
    warnings: Vec<String>,
}

/// Dispatches one recovery run. Solver failures map to exit code 4; a
/// missing `--fixed-m` for prony is a usage error.
fn run_method(
    method: Method,
    samples: &SampleVector,
    tol: f64,
    eps: f64,
    fixed_m: Option<usize>,
    upper_l: Option<usize>,
) -> Result<SolveOutcome, CliError> {
    let solver = |e: String| CliError::Solver(format!("{}: {e}", method.name()));
    match method {
        Method::Esprit => {
            let config = EspritConfig {
                upper_l,
                eps,
                fixed_m,
            };
            let rec = esprit_recover(samples, &config).map_err(|e| solver(e.to_string()))?;
            Ok(SolveOutcome {
                sum: rec.sum,
                warnings: rec.warnings,
            })
        }
        Method::Espira1 => {
            let rec = espira1_recover(samples, tol, fixed_m).map_err(|e| solver(e.to_string()))?;
            let mut warnings = rec.warnings;
            for entry in &rec.grid_report.entries {
                warnings.push(format!(
                    "grid frequency at index {}: phi {:.6}, gamma {:.6}",
                    entry.index, entry.phi, entry.gamma
                ));
            }
            Ok(SolveOutcome {
                sum: rec.sum,
                warnings,
            })
        }
        Method::Espira2 => {
            let rec = espira2_recover(samples, tol, fixed_m).map_err(|e| solver(e.to_string()))?;
            Ok(SolveOutcome {
                sum: rec.sum,
                warnings: rec.warnings,
            })
        }
        Method::Prony => {
            let m = fixed_m
                .ok_or_else(|| usage("prony needs an explicit term count: pass --fixed-m"))?;
            let sum = prony_solve(samples, m).map_err(|e| solver(e.to_string()))?;
            Ok(SolveOutcome {
                sum,
                warnings: Vec::new(),
            })
        }
    }
}

fn require_n(flag: Option<usize>, config: &Config) -> Result<usize, CliError> {
    flag.or(config.n)
        .ok_or_else(|| usage("sample count required: pass --n or set `n` in the config"))
}

fn require_k(flag: Option<f64>, config: &Config) -> Result<f64, CliError> {
    flag.or(config.k)
        .ok_or_else(|| usage("frequency bound required: pass --k or set `k` in the config"))
}

fn make_grid(n: usize, k: f64) -> Result<SamplingGrid, CliError> {
    SamplingGrid::new(n, k).map_err(|e| usage(e.to_string()))
}

/// Checks the CSV time column against the grid implied by N and K, so a
/// mismatched `--k` fails loudly instead of recovering garbage.
fn check_nodes(ts: &[f64], grid: &SamplingGrid, label: &str) -> Result<(), CliError> {
    for (j, &t) in ts.iter().enumerate() {
        let expect = grid.node(j);
        if (t - expect).abs() > NODE_MATCH_TOL * expect.abs().max(1.0) {
            return Err(CliError::Parse(format!(
                "{label}: row {j} has t = {t} but a K = {} grid puts node {j} at {expect}",
                grid.freq_bound()
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Parameter TOML with `gamma = [...]` and `phi = [...]` arrays.
    #[arg(long, value_name = "FILE")]
    pub params: PathBuf,
    /// Number of samples.
    #[arg(long)]
    pub n: Option<usize>,
    /// Frequency bound K; the grid step is pi/K.
    #[arg(long)]
    pub k: Option<f64>,
    /// Uniform noise amplitude; omit for clean samples.
    #[arg(long)]
    pub noise: Option<f64>,
    /// RNG seed for the noise.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV path.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

pub fn cmd_generate(args: GenerateArgs, config: &Config) -> Result<(), CliError> {
    let sum = read_params(&args.params)?;
    let n = require_n(args.n, config)?;
    let k = require_k(args.k, config)?;
    let grid = make_grid(n, k)?;
    let clean = sample(&sum, &grid);
    match args.noise.or(config.noise) {
        Some(amplitude) => {
            let seed = args.seed.or(config.seed).unwrap_or(0);
            let noisy =
                add_noise(&clean, amplitude, seed).map_err(|e| usage(e.to_string()))?;
            write_csv(
                &args.out,
                "k,t,value,clean",
                (0..n).map(|j| {
                    vec![
                        j.to_string(),
                        fmt17(grid.node(j)),
                        fmt17(noisy.values()[j]),
                        fmt17(clean.values()[j]),
                    ]
                }),
            )
        }
        None => write_csv(
            &args.out,
            "k,t,value",
            (0..n).map(|j| {
                vec![
                    j.to_string(),
                    fmt17(grid.node(j)),
                    fmt17(clean.values()[j]),
                ]
            }),
        ),
    }
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    /// Sample CSV produced by `generate` (header `k,t,value`).
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Recovery method.
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Frequency bound K the samples were taken with.
    #[arg(long)]
    pub k: Option<f64>,
    /// Rational approximation tolerance (relative to the data scale).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Singular value cutoff for rank detection.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Skip model-order detection and recover exactly this many terms.
    #[arg(long)]
    pub fixed_m: Option<usize>,
    /// Pencil window size (esprit only).
    #[arg(long)]
    pub upper_l: Option<usize>,
    /// Parameter TOML of the true signal; adds an error section.
    #[arg(long, value_name = "FILE")]
    pub truth: Option<PathBuf>,
    /// Right end of the interval the errors are measured on.
    #[arg(long)]
    pub error_interval: Option<f64>,
    /// Report path; omit to print to stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

pub fn cmd_recover(args: RecoverArgs, config: &Config) -> Result<(), CliError> {
    let started = Instant::now();
    let method = resolve_method(args.method, config, Method::Espira1)?;
    let k = require_k(args.k, config)?;
    let (ts, values) = read_samples(&args.input)?;
    let grid = make_grid(values.len(), k)?;
    check_nodes(&ts, &grid, &args.input.display().to_string())?;
    let samples = SampleVector::new(grid, values).map_err(|e| CliError::Parse(e.to_string()))?;
    let parse = ms_since(started);

    let tol = args.tol.or(config.tol).unwrap_or(DEFAULT_TOL);
    let eps = args.eps.or(config.eps).unwrap_or(DEFAULT_EPS);
    let fixed_m = args.fixed_m.or(config.fixed_m);
    let upper_l = args.upper_l.or(config.upper_l);

    let solve_started = Instant::now();
    let outcome = run_method(method, &samples, tol, eps, fixed_m, upper_l)?;
    let solve = ms_since(solve_started);

    let sorted = outcome.sum.sorted_by_phi();
    let errors = match &args.truth {
        Some(path) => {
            let truth = read_params(path)?;
            let interval = args
                .error_interval
                .or(config.error_interval)
                .unwrap_or(grid.h() * grid.n() as f64);
            let report = relative_errors(&truth, &sorted, interval);
            Some(ErrorsJson {
                e_f: report.e_f,
                e_phi: report.e_phi,
                e_gamma: report.e_gamma,
            })
        }
        None => None,
    };

    emit_report(
        &RunReport {
            schema: 1,
            method: method.name().to_string(),
            m: sorted.terms(),
            phi: sorted.phi().to_vec(),
            gamma: sorted.gamma().to_vec(),
            errors,
            max_error: None,
            timings_ms: Timings {
                parse,
                solve,
                total: ms_since(started),
            },
            diagnostics: outcome.warnings,
        },
        args.out.as_deref(),
    )
}

#[derive(Debug, Args)]
pub struct NoiseBenchArgs {
    /// Parameter TOML of the signal to perturb.
    #[arg(long, value_name = "FILE")]
    pub params: PathBuf,
    /// Number of samples per trial.
    #[arg(long)]
    pub n: Option<usize>,
    /// Frequency bound K.
    #[arg(long)]
    pub k: Option<f64>,
    /// Uniform noise amplitude.
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Number of noise realizations.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Term count handed to every method; defaults to the true count.
    #[arg(long)]
    pub fixed_m: Option<usize>,
    /// Comma-separated methods to benchmark.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub methods: Vec<Method>,
    /// Base RNG seed; trial i uses seed base + i.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Right end of the interval the errors are measured on.
    #[arg(long)]
    pub error_interval: Option<f64>,
    /// Output CSV path.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

struct MethodRun {
    e_f: Option<f64>,
    e_phi: Option<f64>,
    e_gamma: Option<f64>,
    note: String,
}

struct Trial {
    seed: u64,
    snr: f64,
    psnr: f64,
    runs: Vec<MethodRun>,
}

fn opt17(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

/// Mean/min/max over the trials where a method produced the statistic.
fn stats(values: &[Option<f64>]) -> (Option<f64>, Option<f64>, Option<f64>) {
    let present: Vec<f64> = values.iter().filter_map(|v| *v).collect();
    if present.is_empty() {
        return (None, None, None);
    }
    let min = present.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = present.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean = present.iter().sum::<f64>() / present.len() as f64;
    (Some(min), Some(max), Some(mean))
}

pub fn cmd_noise_bench(args: NoiseBenchArgs, config: &Config) -> Result<(), CliError> {
    let truth = read_params(&args.params)?;
    let n = require_n(args.n, config)?;
    let k = require_k(args.k, config)?;
    let amplitude = args.amplitude.or(config.amplitude).ok_or_else(|| {
        usage("noise amplitude required: pass --amplitude or set `amplitude` in the config")
    })?;
    let trials = args.trials.or(config.trials).unwrap_or(10);
    if trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let methods = if args.methods.is_empty() {
        vec![Method::Esprit, Method::Espira2]
    } else {
        args.methods.clone()
    };
    let fixed_m = args.fixed_m.or(config.fixed_m).unwrap_or(truth.terms());
    let base_seed = args.seed.or(config.seed).unwrap_or(1);
    let tol = config.tol.unwrap_or(DEFAULT_TOL);
    let eps = config.eps.unwrap_or(DEFAULT_EPS);

    let grid = make_grid(n, k)?;
    let clean = sample(&truth, &grid);
    let interval = args
        .error_interval
        .or(config.error_interval)
        .unwrap_or(grid.h() * n as f64);

    let results: Vec<Result<Trial, CliError>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed.wrapping_add(i as u64);
            let noisy =
                add_noise(&clean, amplitude, seed).map_err(|e| usage(e.to_string()))?;
            let (snr, psnr) =
                snr_psnr(&clean, &noisy).map_err(|e| CliError::Solver(e.to_string()))?;
            let runs = methods
                .iter()
                .map(|&method| {
                    match run_method(method, &noisy, tol, eps, Some(fixed_m), None) {
                        Ok(outcome) => {
                            let sorted = outcome.sum.sorted_by_phi();
                            let report = relative_errors(&truth, &sorted, interval);
                            MethodRun {
                                e_f: Some(report.e_f),
                                e_phi: report.e_phi,
                                e_gamma: report.e_gamma,
                                note: String::new(),
                            }
                        }
                        Err(e) => MethodRun {
                            e_f: None,
                            e_phi: None,
                            e_gamma: None,
                            note: e.to_string().replace(',', ";").replace('\n', " "),
                        },
                    }
                })
                .collect();
            Ok(Trial {
                seed,
                snr,
                psnr,
                runs,
            })
        })
        .collect();
    let trials_done: Vec<Trial> = results.into_iter().collect::<Result<_, _>>()?;

    let mut rows: Vec<Vec<String>> = Vec::new();
    for trial in &trials_done {
        for (method, run) in methods.iter().zip(&trial.runs) {
            rows.push(vec![
                "trial".into(),
                trial.seed.to_string(),
                method.name().into(),
                opt17(run.e_f),
                opt17(run.e_phi),
                opt17(run.e_gamma),
                fmt17(trial.snr),
                fmt17(trial.psnr),
                run.note.clone(),
            ]);
        }
    }
    let snrs = stats(&trials_done.iter().map(|t| Some(t.snr)).collect::<Vec<_>>());
    let psnrs = stats(&trials_done.iter().map(|t| Some(t.psnr)).collect::<Vec<_>>());
    for (j, method) in methods.iter().enumerate() {
        let pick = |f: fn(&MethodRun) -> Option<f64>| {
            trials_done
                .iter()
                .map(|t| f(&t.runs[j]))
                .collect::<Vec<_>>()
        };
        let e_f = stats(&pick(|r| r.e_f));
        let e_phi = stats(&pick(|r| r.e_phi));
        let e_gamma = stats(&pick(|r| r.e_gamma));
        let ok = pick(|r| r.e_f).iter().flatten().count();
        let note = format!("{ok}/{} trials", trials_done.len());
        let kinds = ["min", "max", "average"];
        let picks = [0, 1, 2];
        for (kind, idx) in kinds.iter().zip(picks) {
            let select = |s: (Option<f64>, Option<f64>, Option<f64>)| match idx {
                0 => s.0,
                1 => s.1,
                _ => s.2,
            };
            rows.push(vec![
                (*kind).into(),
                String::new(),
                method.name().into(),
                opt17(select(e_f)),
                opt17(select(e_phi)),
                opt17(select(e_gamma)),
                opt17(select(snrs)),
                opt17(select(psnrs)),
                note.clone(),
            ]);
        }
    }
    write_csv(
        &args.out,
        "kind,seed,method,e_f,e_phi,e_gamma,snr_db,psnr_db,note",
        rows.into_iter(),
    )
}

#[derive(Debug, Args)]
pub struct BesselArgs {
    /// Bessel order; must be odd so the scaled function has an even extension.
    #[arg(long, default_value_t = 3)]
    pub order: u32,
    /// Right end B of the approximation interval.
    #[arg(long, default_value_t = 126.0)]
    pub endpoint: f64,
    /// Number of cosine terms in the approximant.
    #[arg(long, default_value_t = 25)]
    pub terms: usize,
    /// Number of samples.
    #[arg(long)]
    pub n: Option<usize>,
    /// Frequency bound K.
    #[arg(long)]
    pub k: Option<f64>,
    /// Recovery method.
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Report path; omit to print to stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Optional CSV dump of the error scan (t,target,approx,error).
    #[arg(long, value_name = "FILE")]
    pub scan_out: Option<PathBuf>,
}

pub fn cmd_bessel(args: BesselArgs, config: &Config) -> Result<(), CliError> {
    let started = Instant::now();
    if args.order.is_multiple_of(2) {
        return Err(usage(format!(
            "order must be odd for a cosine expansion, got {}",
            args.order
        )));
    }
    let spec = BesselSpec::new(args.order, args.endpoint).map_err(|e| usage(e.to_string()))?;
    let method = resolve_method(args.method, config, Method::Espira2)?;
    let n = args.n.or(config.n).unwrap_or(400);
    let k = args.k.or(config.k).unwrap_or(10.0);
    if args.terms == 0 || 2 * args.terms >= n {
        return Err(usage(format!(
            "need 0 < 2*terms < n, got terms {} with n {n}",
            args.terms
        )));
    }
    let grid = make_grid(n, k)?;
    if grid.node(n - 1) > args.endpoint {
        return Err(usage(format!(
            "last sample node {} lies outside [0, {}]; lower --n or raise --endpoint",
            grid.node(n - 1),
            args.endpoint
        )));
    }
    let values: Vec<f64> = (0..n)
        .map(|j| bessel_mod(&spec, grid.node(j)))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Solver(e.to_string()))?;
    let samples =
        SampleVector::new(grid, values).map_err(|e| CliError::Solver(e.to_string()))?;
    let parse = ms_since(started);

    let tol = config.tol.unwrap_or(DEFAULT_TOL);
    let eps = config.eps.unwrap_or(DEFAULT_EPS);
    let solve_started = Instant::now();
    let outcome = run_method(method, &samples, tol, eps, Some(args.terms), None)?;
    let solve = ms_since(solve_started);
    let sorted = outcome.sum.sorted_by_phi();

    let steps = (args.endpoint / BESSEL_SCAN_STEP).round() as usize;
    let mut max_error = 0.0f64;
    let mut scan_rows: Vec<Vec<String>> = Vec::new();
    for i in 0..=steps {
        let t = (i as f64 * BESSEL_SCAN_STEP).min(args.endpoint);
        let target = bessel_mod(&spec, t).map_err(|e| CliError::Solver(e.to_string()))?;
        let approx = sorted.evaluate(t);
        let error = (target - approx).abs();
        max_error = max_error.max(error);
        if args.scan_out.is_some() {
            scan_rows.push(vec![fmt17(t), fmt17(target), fmt17(approx), fmt17(error)]);
        }
    }
    if let Some(path) = &args.scan_out {
        write_csv(path, "t,target,approx,error", scan_rows.into_iter())?;
    }

    emit_report(
        &RunReport {
            schema: 1,
            method: method.name().to_string(),
            m: sorted.terms(),
            phi: sorted.phi().to_vec(),
            gamma: sorted.gamma().to_vec(),
            errors: None,
            max_error: Some(max_error),
            timings_ms: Timings {
                parse,
                solve,
                total: ms_since(started),
            },
            diagnostics: outcome.warnings,
        },
        args.out.as_deref(),
    )
}

#[derive(Debug, Args)]
pub struct DctArgs {
    /// Sample CSV (header `k,t,value`).
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Frequency bound K; inferred from the first time node when omitted.
    #[arg(long)]
    pub k: Option<f64>,
    /// Keep only the lower half of the spectrum (noise-robust variant).
    #[arg(long)]
    pub half_spectrum: bool,
    /// Output CSV path.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

pub fn cmd_dct(args: DctArgs, config: &Config) -> Result<(), CliError> {
    let (ts, values) = read_samples(&args.input)?;
    let k = match args.k.or(config.k) {
        Some(k) => k,
        None => {
            // The first node sits at h/2, so h = 2 t_0 and K = pi / h.
            let t0 = ts[0];
            if !t0.is_finite() || t0 <= 0.0 {
                return Err(CliError::Parse(format!(
                    "{}: cannot infer K from first time node {t0}",
                    args.input.display()
                )));
            }
            std::f64::consts::PI / (2.0 * t0)
        }
    };
    let half = args.half_spectrum || config.half_spectrum.unwrap_or(false);
    let grid = make_grid(values.len(), k)?;
    check_nodes(&ts, &grid, &args.input.display().to_string())?;
    let samples = SampleVector::new(grid, values).map_err(|e| CliError::Parse(e.to_string()))?;
    let fhat = dct2(&samples);
    let data = g_vector(&fhat, half);
    write_csv(
        &args.out,
        "k,fhat,z,g",
        (0..data.len()).map(|j| {
            vec![
                j.to_string(),
                fmt17(fhat.values()[j]),
                fmt17(data.z()[j]),
                fmt17(data.g()[j]),
            ]
        }),
    )
}
