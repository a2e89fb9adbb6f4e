use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use ssmc::data::{self, PgmOptions, SynthSpec};
use ssmc::solver::{affinity_from_tensor, solve_self_representation};
use ssmc::spectral::{spectral_cluster, SpectralClustering};
use ssmc::theory::{theorem3_check_with_trials, SubmoduleSample, TheoremReport};
use ssmc::{AffinityMatrix, ClusterLabels, SolverConfig, SolverReport, Tensor3};

use crate::{CheckArgs, ClusterArgs, Format, InputArgs, SolverArgs, SweepArgs, SynthArgs, SynthDataArgs};

pub const SCHEMA: &str = "ssmc/1";

#[derive(Debug)]
pub enum CliError {
    Parameter(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Data(_) => 2,
            CliError::Parameter(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parameter(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

impl From<ssmc::Error> for CliError {
    fn from(e: ssmc::Error) -> Self {
        if e.is_data_error() {
            CliError::Data(e.to_string())
        } else {
            CliError::Parameter(e.to_string())
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn param(msg: impl Into<String>) -> CliError {
    CliError::Parameter(msg.into())
}

fn data_err(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}

fn solver_config(args: &SolverArgs, lambda_g: f64) -> CliResult<SolverConfig> {
    let cfg = SolverConfig {
        lambda_g,
        lambda_h: args.lambda_h,
        affine: args.affine,
        rho: args.rho,
        max_iters: args.max_iters,
        tol_abs: args.tol_abs,
        tol_rel: args.tol_rel,
        normalize_columns: args.normalize_columns,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn parse_crop(s: &str) -> CliResult<(usize, usize)> {
    let bad = || param(format!("--crop expects A:B with 1 <= A <= B, got {s:?}"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if a == 0 || a > b {
        return Err(bad());
    }
    Ok((a, b))
}

pub fn parse_grid(s: &str) -> CliResult<Vec<f64>> {
    let grid: Vec<f64> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| param(format!("bad grid value {t:?}"))))
        .collect::<CliResult<_>>()?;
    if grid.is_empty() {
        return Err(param("--grid must list at least one lambda_g"));
    }
    if let Some(v) = grid.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(param(format!("grid values must be positive, got {v}")));
    }
    Ok(grid)
}

/// Reads labels from a JSON array, a JSON object with a `labels` array, or
/// an IDX1 label file.
fn read_truth(path: &Path) -> CliResult<ClusterLabels> {
    let bytes = fs::read(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    let labels: Vec<usize> = if bytes.starts_with(&[0, 0, 8, 1]) {
        data::parse_idx_labels(&bytes)?.into_iter().map(usize::from).collect()
    } else {
        let value: serde_json::Value =
            serde_json::from_slice(&bytes).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
        let array = value.get("labels").unwrap_or(&value);
        serde_json::from_value(array.clone())
            .map_err(|e| data_err(format!("{}: expected a list of labels: {e}", path.display())))?
    };
    Ok(ClusterLabels::from_labels(labels)?)
}

struct LoadedInput {
    tensor: Tensor3,
    truth: Option<ClusterLabels>,
}

fn load_input(args: &InputArgs) -> CliResult<LoadedInput> {
    if args.decimate == 0 {
        return Err(param("--decimate must be at least 1"));
    }
    let crop = args.crop.as_deref().map(parse_crop).transpose()?;
    if !args.input.exists() {
        return Err(data_err(format!("input {} does not exist", args.input.display())));
    }
    let tensor = match args.format {
        Format::Tsr1 => Tensor3::read_tsr1(&args.input)?,
        Format::Idx => {
            let t = data::load_idx_images(&args.input)?;
            match args.limit {
                Some(0) => return Err(param("--limit must be at least 1")),
                Some(lim) if lim < t.n() => t.select_columns(&(0..lim).collect::<Vec<_>>()),
                _ => t,
            }
        }
        Format::Pgmdir => {
            let opts = PgmOptions {
                decimate: args.decimate,
                crop,
            };
            data::load_pgm_dir(&args.input, &opts)?.0
        }
    };
    let truth = match &args.truth {
        None => None,
        Some(path) => {
            let mut labels = read_truth(path)?;
            if args.limit.is_some() && labels.len() > tensor.n() {
                labels = ClusterLabels::from_labels(labels.labels()[..tensor.n()].to_vec())?;
            }
            if labels.len() != tensor.n() {
                return Err(data_err(format!(
                    "{} labels for {} samples",
                    labels.len(),
                    tensor.n()
                )));
            }
            Some(labels)
        }
    };
    Ok(LoadedInput { tensor, truth })
}

struct PipelineOutput {
    clustering: SpectralClustering,
    report: SolverReport,
    affinity: AffinityMatrix,
}

fn check_k(k: usize, n: usize) -> CliResult<()> {
    if k == 0 || k > n {
        return Err(param(format!("--k {k} must be between 1 and the sample count {n}")));
    }
    Ok(())
}

fn run_pipeline(y: &Tensor3, cfg: &SolverConfig, k: usize, seed: u64) -> ssmc::Result<PipelineOutput> {
    let (c, report) = solve_self_representation(y, cfg)?;
    let affinity = affinity_from_tensor(&c)?;
    let clustering = spectral_cluster(&affinity, k, seed)?;
    Ok(PipelineOutput {
        clustering,
        report,
        affinity,
    })
}

fn write_json(value: &impl Serialize, out: Option<&Path>) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| data_err(e.to_string()))?;
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text).map_err(|e| data_err(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn path_string(p: &Path) -> String {
    p.display().to_string()
}

#[derive(Serialize)]
struct ClusterOutput {
    schema: &'static str,
    command: &'static str,
    input: String,
    n: usize,
    k: usize,
    seed: u64,
    solver_config: SolverConfig,
    solver_report: SolverReport,
    labels: Vec<usize>,
    eigenvalues: Vec<f64>,
    isolated_vertices: Vec<usize>,
    affinity_path: Option<String>,
    error: Option<f64>,
}

pub fn cluster(args: &ClusterArgs) -> CliResult<()> {
    let cfg = solver_config(&args.solver, args.lambda_g)?;
    let input = load_input(&args.input)?;
    check_k(args.k, input.tensor.n())?;
    let out = run_pipeline(&input.tensor, &cfg, args.k, args.seed)?;
    if let Some(path) = &args.affinity_out {
        out.affinity.to_tensor().write_tsr1(path)?;
    }
    let error = input
        .truth
        .as_ref()
        .map(|t| data::clustering_error(&out.clustering.labels, t))
        .transpose()?;
    let result = ClusterOutput {
        schema: SCHEMA,
        command: "cluster",
        input: path_string(&args.input.input),
        n: input.tensor.n(),
        k: args.k,
        seed: args.seed,
        solver_config: cfg,
        solver_report: out.report,
        labels: out.clustering.labels.labels().to_vec(),
        eigenvalues: out.clustering.eigenvalues,
        isolated_vertices: out.clustering.isolated_vertices,
        affinity_path: args.affinity_out.as_deref().map(path_string),
        error,
    };
    write_json(&result, args.out.as_deref())
}

#[derive(Serialize, Clone, Debug, PartialEq)]
struct SweepRecord {
    lambda_g: f64,
    clustering_error: Option<f64>,
    iterations: Option<usize>,
    objective: Option<f64>,
    converged: Option<bool>,
    failure: Option<String>,
}

#[derive(Serialize)]
struct SweepOutput {
    schema: &'static str,
    command: &'static str,
    input: String,
    n: usize,
    k: usize,
    seed: u64,
    records: Vec<SweepRecord>,
}

fn sweep_point(input: &LoadedInput, cfg: &SolverConfig, k: usize, seed: u64) -> SweepRecord {
    let outcome = run_pipeline(&input.tensor, cfg, k, seed).and_then(|out| {
        let err = input
            .truth
            .as_ref()
            .map(|t| data::clustering_error(&out.clustering.labels, t))
            .transpose()?;
        Ok((out.report, err))
    });
    match outcome {
        Ok((report, err)) => SweepRecord {
            lambda_g: cfg.lambda_g,
            clustering_error: err,
            iterations: Some(report.iterations),
            objective: Some(report.objective),
            converged: Some(report.converged),
            failure: None,
        },
        Err(e) => SweepRecord {
            lambda_g: cfg.lambda_g,
            clustering_error: None,
            iterations: None,
            objective: None,
            converged: None,
            failure: Some(e.to_string()),
        },
    }
}

fn csv_cell<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

fn sweep_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from("lambda_g,clustering_error,iterations,objective,converged,failure\n");
    for r in records {
        let failure = r.failure.as_deref().unwrap_or("").replace('"', "\"\"");
        out.push_str(&format!(
            "{},{},{},{},{},\"{}\"\n",
            r.lambda_g,
            csv_cell(&r.clustering_error),
            csv_cell(&r.iterations),
            csv_cell(&r.objective),
            csv_cell(&r.converged),
            failure
        ));
    }
    out
}

pub fn sweep(args: &SweepArgs) -> CliResult<()> {
    let grid = parse_grid(&args.grid)?;
    let configs: Vec<SolverConfig> = grid
        .iter()
        .map(|&lg| solver_config(&args.solver, lg))
        .collect::<CliResult<_>>()?;
    let input = load_input(&args.input)?;
    check_k(args.k, input.tensor.n())?;

    let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(configs.len());
    let mut records: Vec<Option<SweepRecord>> = vec![None; configs.len()];
    std::thread::scope(|scope| {
        let chunk = configs.len().div_ceil(workers);
        for (cfgs, slots) in configs.chunks(chunk).zip(records.chunks_mut(chunk)) {
            let input = &input;
            scope.spawn(move || {
                for (cfg, slot) in cfgs.iter().zip(slots) {
                    *slot = Some(sweep_point(input, cfg, args.k, args.seed));
                }
            });
        }
    });
    let records: Vec<SweepRecord> = records.into_iter().map(|r| r.expect("every grid point ran")).collect();

    let csv_path: Option<PathBuf> = args
        .csv_out
        .clone()
        .or_else(|| args.out.as_ref().map(|p| p.with_extension("csv")));
    if let Some(path) = &csv_path {
        fs::write(path, sweep_csv(&records)).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    }
    let result = SweepOutput {
        schema: SCHEMA,
        command: "sweep",
        input: path_string(&args.input.input),
        n: input.tensor.n(),
        k: args.k,
        seed: args.seed,
        records,
    };
    write_json(&result, args.out.as_deref())
}

fn synth_spec(d: &SynthDataArgs) -> CliResult<SynthSpec> {
    if d.clusters == 0 {
        return Err(param("--clusters must be at least 1"));
    }
    let spec = SynthSpec {
        h: d.h,
        d_per_cluster: vec![d.dim; d.clusters],
        samples_per_cluster: vec![d.per_cluster; d.clusters],
        depth: d.depth,
        noise_sigma: d.noise,
        affine: d.affine_data,
        shift_model: d.shift_model,
        shift_jitter: d.shift_jitter,
        seed: d.seed,
    };
    spec.validate()?;
    Ok(spec)
}

#[derive(Serialize)]
struct LabelsFile<'a> {
    schema: &'static str,
    labels: &'a [usize],
}

#[derive(Serialize)]
struct SynthOutput {
    schema: &'static str,
    command: &'static str,
    spec: SynthSpec,
    k: usize,
    solver_config: SolverConfig,
    solver_report: SolverReport,
    labels: Vec<usize>,
    truth: Vec<usize>,
    error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    runtime_seconds: Option<f64>,
}

pub fn synth(args: &SynthArgs) -> CliResult<()> {
    let spec = synth_spec(&args.data)?;
    let cfg = solver_config(&args.solver, args.lambda_g)?;
    let k = args.k.unwrap_or(args.data.clusters);
    let n: usize = spec.samples_per_cluster.iter().sum();
    check_k(k, n)?;

    let started = Instant::now();
    let sample = data::generate_synthetic(&spec)?;
    let out = run_pipeline(&sample.tensor, &cfg, k, spec.seed)?;
    let error = data::clustering_error(&out.clustering.labels, &sample.truth)?;
    let runtime = started.elapsed().as_secs_f64();

    if let Some(path) = &args.data_out {
        sample.tensor.write_tsr1(path)?;
    }
    if let Some(path) = &args.truth_out {
        let file = LabelsFile {
            schema: SCHEMA,
            labels: sample.truth.labels(),
        };
        write_json(&file, Some(path))?;
    }
    let mut result = SynthOutput {
        schema: SCHEMA,
        command: "synth",
        spec,
        k,
        solver_config: cfg,
        solver_report: out.report,
        labels: out.clustering.labels.labels().to_vec(),
        truth: sample.truth.labels().to_vec(),
        error,
        runtime_seconds: None,
    };
    if let Some(path) = &args.out {
        write_json(&result, Some(path))?;
    }
    // wall time only goes to stdout so result files stay reproducible
    result.runtime_seconds = Some(runtime.max(f64::MIN_POSITIVE));
    write_json(&result, None)
}

#[derive(Serialize)]
struct ClusterCheck {
    cluster: usize,
    #[serde(flatten)]
    report: TheoremReport,
}

#[derive(Serialize)]
struct CheckOutput {
    schema: &'static str,
    command: &'static str,
    source: String,
    budget: usize,
    trials: usize,
    seed: u64,
    reports: Vec<ClusterCheck>,
}

/// Splits a labelled tensor into per-cluster samples whose first `dim`
/// points act as generators.
fn samples_from_labels(t: &Tensor3, truth: &ClusterLabels, dim: usize) -> CliResult<Vec<SubmoduleSample>> {
    let mut out = Vec::new();
    for c in 0..truth.k() {
        let cols: Vec<usize> = (0..truth.len()).filter(|&j| truth.labels()[j] == c).collect();
        if cols.len() < dim {
            return Err(data_err(format!("cluster {c} has {} samples, fewer than --dim {dim}", cols.len())));
        }
        let points = t.select_columns(&cols);
        let generators = t.select_columns(&cols[..dim]);
        out.push(SubmoduleSample::new(generators, points, None)?);
    }
    Ok(out)
}

pub fn check(args: &CheckArgs) -> CliResult<()> {
    let (samples, source) = match &args.input {
        Some(path) => {
            let truth_path = args.truth.as_ref().ok_or_else(|| param("--input requires --truth"))?;
            if !path.exists() {
                return Err(data_err(format!("input {} does not exist", path.display())));
            }
            let t = Tensor3::read_tsr1(path)?;
            let truth = read_truth(truth_path)?;
            if truth.len() != t.n() {
                return Err(data_err(format!("{} labels for {} samples", truth.len(), t.n())));
            }
            (samples_from_labels(&t, &truth, args.data.dim)?, path_string(path))
        }
        None => {
            let spec = synth_spec(&args.data)?;
            (data::generate_synthetic_samples(&spec)?.1, "synthetic".to_string())
        }
    };
    let targets: Vec<usize> = match args.cluster {
        Some(c) if c >= samples.len() => {
            return Err(param(format!("--cluster {c} out of range ({} clusters)", samples.len())))
        }
        Some(c) => vec![c],
        None => (0..samples.len()).collect(),
    };
    let reports = targets
        .into_iter()
        .map(|i| {
            let report = theorem3_check_with_trials(&samples, i, args.budget, args.trials, args.data.seed)?;
            Ok(ClusterCheck { cluster: i, report })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let result = CheckOutput {
        schema: SCHEMA,
        command: "check",
        source,
        budget: args.budget,
        trials: args.trials,
        seed: args.data.seed,
        reports,
    };
    write_json(&result, args.out.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("1e-2, 1,1e2").unwrap(), vec![0.01, 1.0, 100.0]);
        assert!(matches!(parse_grid(""), Err(CliError::Parameter(_))));
        assert!(parse_grid("1,-2").is_err());
        assert!(parse_grid("1,x").is_err());
    }

    #[test]
    fn crop_parsing() {
        assert_eq!(parse_crop("30:140").unwrap(), (30, 140));
        assert!(parse_crop("0:4").is_err());
        assert!(parse_crop("5:4").is_err());
        assert!(parse_crop("5").is_err());
    }

    #[test]
    fn csv_quotes_failures() {
        let r = SweepRecord {
            lambda_g: 1.0,
            clustering_error: None,
            iterations: None,
            objective: None,
            converged: None,
            failure: Some("bad \"x\", y".into()),
        };
        assert!(sweep_csv(&[r]).ends_with("1,,,,,\"bad \"\"x\"\", y\"\n"));
    }
}
