//! Experiment harness behind the `trarc-bench` binary.
//!
//! A spec expands into a grid of runs (algorithm × variant × fraction ×
//! seed). Each run writes one CSV of per-iteration telemetry plus a
//! non-CSV sidecar with wall-clock timing; a summary CSV is written after
//! all grid points finish. Every CSV is a pure function of the spec and
//! seeds, so identical invocations produce byte-identical files (timing
//! lives only in the sidecars).

pub mod csvio;
pub mod kv;
pub mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use trarc::data::{self, Dataset};
use trarc::model::CubicCorrection;
use trarc::optim::{self, Algorithm, RunTrace, SizeRule, Variant, VariantConfig};
use trarc::problem::{full_value, FiniteSumProblem, NllsLogisticProblem};
use trarc::sampling::{lemma_tolerances_arc, lemma_tolerances_tr};

/// Parameters of the offline synthetic classification set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub nnz_per_row: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 20_000,
            d: 123,
            nnz_per_row: 16,
            seed: 0,
        }
    }
}

/// Where the training (and optional test) data comes from.
#[derive(Debug, Clone)]
pub enum DataSource {
    Files {
        train: PathBuf,
        test: Option<PathBuf>,
    },
    Synthetic(SyntheticSpec),
}

/// One full experiment: the grid axes plus every shared hyperparameter.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub data: DataSource,
    pub algorithms: Vec<Algorithm>,
    pub variants: Vec<Variant>,
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    pub eta: f64,
    pub shrink_factor: f64,
    pub grow_factor: f64,
    pub delta0: f64,
    pub delta_max: f64,
    pub sigma0: f64,
    pub sigma_min: f64,
    pub eps_grad_target: f64,
    pub eps_hess_target: f64,
    /// Derive `(ε_g, ε_B, ε_h)` from the targets and `η` via the
    /// radius/penalty bound fractions instead of the half-target default.
    pub lemma_tolerances: bool,
    pub size_rule: SizeRule,
    pub cubic_correction: CubicCorrection,
    pub budget_props: Option<u64>,
    pub max_iters: usize,
    /// Coordinates of the start point are uniform in `[-x0_scale, x0_scale)`.
    pub x0_scale: f64,
    pub out_dir: PathBuf,
    /// Worker threads for the grid (0 = rayon default).
    pub jobs: usize,
}

impl ExperimentSpec {
    pub fn new(data: DataSource, out_dir: PathBuf) -> Self {
        Self {
            data,
            algorithms: vec![Algorithm::TrustRegion],
            variants: vec![Variant::Shgf],
            fractions: vec![0.05],
            seeds: vec![0],
            eta: 0.1,
            shrink_factor: 0.5,
            grow_factor: 2.0,
            delta0: 8.0,
            delta_max: 1e3,
            sigma0: 1.0,
            sigma_min: 1e-4,
            eps_grad_target: 1e-4,
            eps_hess_target: 1e-2,
            lemma_tolerances: false,
            size_rule: SizeRule::Fraction,
            cubic_correction: CubicCorrection::default(),
            budget_props: None,
            max_iters: 1000,
            x0_scale: 1.0,
            out_dir,
            jobs: 0,
        }
    }
}

/// One cell of the experiment grid.
#[derive(Debug, Clone, Copy)]
pub struct GridPoint {
    pub algorithm: Algorithm,
    pub variant: Variant,
    pub fraction: f64,
    pub seed: u64,
}

impl GridPoint {
    /// Deterministic file stem for this grid point.
    pub fn stem(&self, dataset: &str) -> String {
        format!(
            "{}_{}_{}_f{}_s{}",
            dataset,
            algo_name(self.algorithm),
            self.variant.name(),
            self.fraction,
            self.seed
        )
    }
}

pub fn algo_name(a: Algorithm) -> &'static str {
    match a {
        Algorithm::TrustRegion => "str",
        Algorithm::CubicReg => "sarc",
    }
}

/// Summary of one finished run.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub file: String,
    pub dataset: String,
    pub algorithm: Algorithm,
    pub variant: Variant,
    pub fraction: f64,
    pub seed: u64,
    pub iterations: usize,
    pub cum_props: u64,
    pub final_train_loss: f64,
    pub final_test_error: Option<f64>,
    pub termination: &'static str,
}

/// Everything an experiment produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub run_files: Vec<PathBuf>,
    pub summary_file: PathBuf,
    pub rows: Vec<SummaryRow>,
}

/// Loads or synthesizes the train/test pair named by the spec.
pub fn load_data(source: &DataSource) -> Result<(Dataset, Option<Dataset>)> {
    match source {
        DataSource::Files { train, test } => {
            let (tr, te) = data::load_train_test(train, test.as_deref())
                .with_context(|| format!("loading dataset {}", train.display()))?;
            Ok((tr, te))
        }
        DataSource::Synthetic(s) => Ok((
            data::synthetic_dataset(s.n, s.d, s.nnz_per_row, s.seed),
            None,
        )),
    }
}

/// Seeded start point with coordinates uniform in `[-scale, scale)`.
pub fn initial_point(d: usize, seed: u64, scale: f64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1));
    DVector::from_fn(d, |_, _| rng.gen_range(-scale..scale))
}

/// Builds the per-run optimizer configuration for one grid point.
pub fn build_config(spec: &ExperimentSpec, gp: &GridPoint) -> VariantConfig {
    let mut c = VariantConfig::new(gp.algorithm, gp.variant);
    c.eta = spec.eta;
    c.shrink_factor = spec.shrink_factor;
    c.grow_factor = spec.grow_factor;
    c.delta0 = spec.delta0;
    c.delta_max = spec.delta_max;
    c.sigma0 = spec.sigma0;
    c.sigma_min = spec.sigma_min;
    c.sample_fraction = gp.fraction;
    c.size_rule = spec.size_rule;
    c.cubic_correction = spec.cubic_correction;
    c.max_iters = spec.max_iters;
    c.max_props = spec.budget_props;
    c.seed = gp.seed;
    c.budget.eps_grad_target = spec.eps_grad_target;
    c.budget.eps_hess_target = spec.eps_hess_target;
    let (eps_g, eps_b, eps_h) = if spec.lemma_tolerances {
        match gp.algorithm {
            Algorithm::TrustRegion => {
                lemma_tolerances_tr(spec.eps_grad_target, spec.eps_hess_target, spec.eta)
            }
            Algorithm::CubicReg => {
                lemma_tolerances_arc(spec.eps_grad_target, spec.eps_hess_target, spec.eta)
            }
        }
    } else {
        (spec.eps_grad_target / 2.0, spec.eps_hess_target / 2.0, spec.eps_hess_target / 2.0)
    };
    c.budget.eps_g = eps_g;
    c.budget.eps_b = eps_b;
    c.budget.eps_h = eps_h;
    c
}

/// Per-iteration objective telemetry recomputed from the stored iterates.
/// The full-objective evaluations here are reporting, not algorithm cost,
/// and are not charged to the propagation counter.
pub fn objective_curves(
    trace: &RunTrace,
    train: &NllsLogisticProblem,
    test: Option<&NllsLogisticProblem>,
) -> (Vec<f64>, Option<Vec<f64>>) {
    let losses: Vec<f64> = trace
        .records
        .iter()
        .map(|r| full_value(train, &r.x_after).expect("dimensions fixed by run"))
        .collect();
    let errors = test.map(|t| {
        trace
            .records
            .iter()
            .map(|r| t.misclassification_rate(&r.x_after))
            .collect()
    });
    (losses, errors)
}

/// Runs the whole grid and writes run CSVs, sidecars, and the summary CSV.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let (train_ds, test_ds) = load_data(&spec.data)?;
    let dataset_name = train_ds.name.clone();
    let train = NllsLogisticProblem::new(train_ds.features.clone(), train_ds.labels.clone())
        .context("building train problem")?;
    let test = match &test_ds {
        Some(ds) => Some(
            NllsLogisticProblem::new(ds.features.clone(), ds.labels.clone())
                .context("building test problem")?,
        ),
        None => None,
    };

    fs::create_dir_all(&spec.out_dir)
        .with_context(|| format!("creating {}", spec.out_dir.display()))?;

    let mut grid: Vec<GridPoint> = Vec::new();
    for &algorithm in &spec.algorithms {
        for &variant in &spec.variants {
            for &fraction in &spec.fractions {
                for &seed in &spec.seeds {
                    grid.push(GridPoint {
                        algorithm,
                        variant,
                        fraction,
                        seed,
                    });
                }
            }
        }
    }
    if grid.is_empty() {
        bail!("empty grid: no algorithm/variant/fraction/seed combinations");
    }

    let run_one = |gp: &GridPoint| -> Result<(PathBuf, SummaryRow)> {
        let config = build_config(spec, gp);
        let x0 = initial_point(train.dim(), gp.seed, spec.x0_scale);
        let started = Instant::now();
        let trace = optim::run(&train, &x0, &config)
            .with_context(|| format!("run {}", gp.stem(&dataset_name)))?;
        let wall_ms = started.elapsed().as_secs_f64() * 1e3;
        let (losses, errors) = objective_curves(&trace, &train, test.as_ref());

        let stem = gp.stem(&dataset_name);
        let csv_path = spec.out_dir.join(format!("{stem}.csv"));
        let meta = csvio::RunMeta {
            dataset: dataset_name.clone(),
            algorithm: gp.algorithm,
            variant: gp.variant,
            fraction: gp.fraction,
            seed: gp.seed,
            eta: spec.eta,
            shrink_factor: spec.shrink_factor,
            grow_factor: spec.grow_factor,
            delta0: spec.delta0,
            sigma0: spec.sigma0,
            budget_props: spec.budget_props,
        };
        csvio::write_run_csv(&csv_path, &meta, &trace, &losses, errors.as_deref())?;
        // Timing is deliberately kept out of the CSVs so reruns of the same
        // spec are byte-identical; it lands in a sidecar instead.
        let sidecar = spec.out_dir.join(format!("{stem}.meta.txt"));
        fs::write(
            &sidecar,
            format!(
                "wall_ms = {wall_ms:.3}\niterations = {}\ntermination = {}\n",
                trace.records.len(),
                trace.termination.name()
            ),
        )?;

        let row = SummaryRow {
            file: format!("{stem}.csv"),
            dataset: dataset_name.clone(),
            algorithm: gp.algorithm,
            variant: gp.variant,
            fraction: gp.fraction,
            seed: gp.seed,
            iterations: trace.records.len(),
            cum_props: trace.records.last().map_or(0, |r| r.cum_props),
            final_train_loss: losses.last().copied().unwrap_or(f64::NAN),
            final_test_error: errors.as_ref().and_then(|e| e.last().copied()),
            termination: trace.termination.name(),
        };
        Ok((csv_path, row))
    };

    let results: Vec<Result<(PathBuf, SummaryRow)>> = if spec.jobs == 1 {
        grid.iter().map(run_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.jobs)
            .build()
            .context("building worker pool")?;
        pool.install(|| grid.par_iter().map(run_one).collect())
    };

    let mut run_files = Vec::new();
    let mut rows = Vec::new();
    for r in results {
        let (path, row) = r?;
        run_files.push(path);
        rows.push(row);
    }
    // The summary is written once, after the join, in grid order.
    let summary_file = spec.out_dir.join("summary.csv");
    csvio::write_summary_csv(&summary_file, &rows)?;
    Ok(ExperimentOutput {
        run_files,
        summary_file,
        rows,
    })
}

/// Resolves a dataset argument against `TRARC_DATA_DIR` when the path does
/// not exist as given.
pub fn resolve_data_path(arg: &str) -> PathBuf {
    let p = Path::new(arg);
    if p.exists() {
        return p.to_path_buf();
    }
    if let Ok(dir) = std::env::var("TRARC_DATA_DIR") {
        let candidate = Path::new(&dir).join(arg);
        if candidate.exists() {
            return candidate;
        }
    }
    p.to_path_buf()
}
