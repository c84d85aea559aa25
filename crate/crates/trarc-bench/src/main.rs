//! Command-line experiment runner.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use trarc::data;
use trarc::model::CubicCorrection;
use trarc::optim::{Algorithm, SizeRule, Variant};

use trarc_bench::plot::{emit_plot_data, Metric};
use trarc_bench::{
    kv, resolve_data_path, run_experiment, DataSource, ExperimentSpec, SyntheticSpec,
};

#[derive(Parser)]
#[command(
    name = "trarc-bench",
    about = "Propagation-count benchmarks for stochastic trust-region and cubic-regularization methods"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment grid and write per-run CSVs plus a summary.
    Run(Box<RunArgs>),
    /// Collapse run CSVs into tidy long-format plot data.
    PlotData(PlotArgs),
    /// Run the oracle verification battery and print a pass/fail table.
    SelfCheck,
    /// Print dataset statistics.
    Stats(StatsArgs),
    /// Write a seeded synthetic classification dataset in LIBSVM format.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat key-value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training set in LIBSVM format (searched in $TRARC_DATA_DIR if not
    /// found as given).
    #[arg(long)]
    dataset: Option<String>,
    /// Optional test set in LIBSVM format.
    #[arg(long)]
    test: Option<String>,
    /// Use the builtin synthetic dataset instead of files; optional value
    /// `n,d,nnz,seed` (default 20000,123,16,0).
    #[arg(long, num_args = 0..=1, default_missing_value = "")]
    synthetic: Option<String>,
    /// Comma-separated algorithms: str, sarc.
    #[arg(long)]
    algo: Option<String>,
    /// Comma-separated variants: full, sh, shg, shgf.
    #[arg(long)]
    variant: Option<String>,
    /// Comma-separated subsample fractions of n.
    #[arg(long)]
    fraction: Option<String>,
    /// Comma-separated RNG seeds (one run per seed).
    #[arg(long)]
    seed: Option<String>,
    /// Acceptance threshold in (0,1).
    #[arg(long)]
    eta: Option<f64>,
    /// Contraction factor in (0,1).
    #[arg(long)]
    r1: Option<f64>,
    /// Expansion factor >= 1.
    #[arg(long)]
    r2: Option<f64>,
    #[arg(long)]
    delta0: Option<f64>,
    #[arg(long)]
    delta_max: Option<f64>,
    #[arg(long)]
    sigma0: Option<f64>,
    #[arg(long)]
    sigma_min: Option<f64>,
    /// Gradient-norm optimality target.
    #[arg(long)]
    eps_grad_target: Option<f64>,
    /// Curvature optimality target.
    #[arg(long)]
    eps_hess_target: Option<f64>,
    /// Derive the inexactness tolerances from the targets and eta.
    #[arg(long)]
    lemma_tolerances: bool,
    /// Subsample-size rule: fraction, theorem, bernstein.
    #[arg(long)]
    size_rule: Option<String>,
    /// Cubic ratio correction: sigma (2eps_h/sigma^2) or step
    /// (2eps_h*step_norm^2).
    #[arg(long)]
    sarc_correction: Option<String>,
    /// Stop each run before exceeding this many propagations.
    #[arg(long)]
    budget_props: Option<u64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Start coordinates are uniform in [-x0_scale, x0_scale).
    #[arg(long)]
    x0_scale: Option<f64>,
    /// Output directory for CSVs and sidecars.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct PlotArgs {
    /// Metric to extract: train_loss or test_error.
    #[arg(long)]
    metric: String,
    /// Keep at most this many rows per run (first and last always kept).
    #[arg(long)]
    downsample: Option<usize>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run CSV files.
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    dataset: String,
    #[arg(long)]
    test: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 20_000)]
    n: usize,
    #[arg(long, default_value_t = 123)]
    d: usize,
    #[arg(long, default_value_t = 16)]
    nnz: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Run(args) => cmd_run(*args),
        Cmd::PlotData(args) => cmd_plot(args),
        Cmd::SelfCheck => cmd_self_check(),
        Cmd::Stats(args) => cmd_stats(args),
        Cmd::Synth(args) => cmd_synth(args),
    }
}

/// Flag value, else config-file value, else default.
fn merged<T: FromStr + Clone>(
    flag: &Option<T>,
    cfg: &HashMap<String, String>,
    key: &str,
    default: T,
) -> Result<T>
where
    <T as FromStr>::Err: std::fmt::Display,
{
    if let Some(v) = flag {
        return Ok(v.clone());
    }
    match cfg.get(key) {
        Some(raw) => raw
            .parse::<T>()
            .map_err(|e| anyhow::anyhow!("config key {key}={raw:?}: {e}")),
        None => Ok(default),
    }
}

fn parse_list<T: FromStr>(raw: &str, what: &str) -> Result<Vec<T>>
where
    <T as FromStr>::Err: std::fmt::Display,
{
    let items: Result<Vec<T>> = raw
        .split(',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|e| anyhow::anyhow!("bad {what} entry {s:?}: {e}"))
        })
        .collect();
    let items = items?;
    if items.is_empty() {
        bail!("empty {what} list");
    }
    Ok(items)
}

fn parse_algorithms(raw: &str) -> Result<Vec<Algorithm>> {
    raw.split(',')
        .filter(|s| !s.is_empty())
        .map(|s| match s.trim() {
            "str" => Ok(Algorithm::TrustRegion),
            "sarc" => Ok(Algorithm::CubicReg),
            other => bail!("unknown algorithm {other:?} (expected str or sarc)"),
        })
        .collect()
}

fn parse_variants(raw: &str) -> Result<Vec<Variant>> {
    raw.split(',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            Variant::parse(s.trim())
                .ok_or_else(|| anyhow::anyhow!("unknown variant {s:?} (full|sh|shg|shgf)"))
        })
        .collect()
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let cfg: HashMap<String, String> = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            kv::parse_kv(&text)?
        }
        None => HashMap::new(),
    };
    let spec = assemble_spec(&args, &cfg)?;
    let output = run_experiment(&spec)?;
    for row in &output.rows {
        eprintln!(
            "{}: iters={} props={} final_loss={:.6} termination={}",
            row.file, row.iterations, row.cum_props, row.final_train_loss, row.termination
        );
    }
    println!("{}", output.summary_file.display());
    Ok(())
}

/// Builds the experiment spec from flags and config-file entries; flags win.
fn assemble_spec(args: &RunArgs, cfg: &HashMap<String, String>) -> Result<ExperimentSpec> {
    let dataset = args.dataset.clone().or_else(|| cfg.get("dataset").cloned());
    let test = args.test.clone().or_else(|| cfg.get("test").cloned());
    let synthetic_raw = args
        .synthetic
        .clone()
        .or_else(|| cfg.get("synthetic").cloned());

    let data = match (dataset, synthetic_raw) {
        (Some(_), Some(_)) => bail!("--dataset and --synthetic are mutually exclusive"),
        (Some(d), None) => DataSource::Files {
            train: resolve_data_path(&d),
            test: test.map(|t| resolve_data_path(&t)),
        },
        (None, Some(raw)) => {
            let mut s = SyntheticSpec::default();
            if !raw.is_empty() {
                let parts: Vec<&str> = raw.split(',').collect();
                if parts.len() != 4 {
                    bail!("--synthetic expects n,d,nnz,seed; got {raw:?}");
                }
                s.n = parts[0].trim().parse().context("synthetic n")?;
                s.d = parts[1].trim().parse().context("synthetic d")?;
                s.nnz_per_row = parts[2].trim().parse().context("synthetic nnz")?;
                s.seed = parts[3].trim().parse().context("synthetic seed")?;
            }
            DataSource::Synthetic(s)
        }
        (None, None) => bail!("one of --dataset or --synthetic is required"),
    };

    let out = args
        .out
        .clone()
        .or_else(|| cfg.get("out").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"));

    let mut spec = ExperimentSpec::new(data, out);
    spec.algorithms = parse_algorithms(&merged(&args.algo, cfg, "algo", "str".into())?)?;
    spec.variants = parse_variants(&merged(&args.variant, cfg, "variant", "shgf".into())?)?;
    spec.fractions = parse_list(&merged(&args.fraction, cfg, "fraction", "0.05".into())?, "fraction")?;
    spec.seeds = parse_list(&merged(&args.seed, cfg, "seed", "0".into())?, "seed")?;
    spec.eta = merged(&args.eta, cfg, "eta", spec.eta)?;
    spec.shrink_factor = merged(&args.r1, cfg, "r1", spec.shrink_factor)?;
    spec.grow_factor = merged(&args.r2, cfg, "r2", spec.grow_factor)?;
    spec.delta0 = merged(&args.delta0, cfg, "delta0", spec.delta0)?;
    spec.delta_max = merged(&args.delta_max, cfg, "delta_max", spec.delta_max)?;
    spec.sigma0 = merged(&args.sigma0, cfg, "sigma0", spec.sigma0)?;
    spec.sigma_min = merged(&args.sigma_min, cfg, "sigma_min", spec.sigma_min)?;
    spec.eps_grad_target = merged(&args.eps_grad_target, cfg, "eps_grad_target", spec.eps_grad_target)?;
    spec.eps_hess_target = merged(&args.eps_hess_target, cfg, "eps_hess_target", spec.eps_hess_target)?;
    spec.lemma_tolerances = args.lemma_tolerances
        || cfg
            .get("lemma_tolerances")
            .is_some_and(|v| v == "true" || v == "1");
    spec.size_rule = match merged(&args.size_rule, cfg, "size_rule", "fraction".to_string())?.as_str()
    {
        "fraction" => SizeRule::Fraction,
        "theorem" => SizeRule::Theorem,
        "bernstein" => SizeRule::Bernstein,
        other => bail!("unknown size rule {other:?} (fraction|theorem|bernstein)"),
    };
    spec.cubic_correction =
        match merged(&args.sarc_correction, cfg, "sarc_correction", "sigma".to_string())?.as_str()
        {
            "sigma" => CubicCorrection::SigmaSquared,
            "step" => CubicCorrection::StepNorm,
            other => bail!("unknown correction {other:?} (sigma|step)"),
        };
    spec.budget_props = match args.budget_props {
        Some(b) => Some(b),
        None => cfg
            .get("budget_props")
            .map(|v| v.parse().context("config budget_props"))
            .transpose()?,
    };
    spec.max_iters = merged(&args.max_iters, cfg, "max_iters", spec.max_iters)?;
    spec.x0_scale = merged(&args.x0_scale, cfg, "x0_scale", spec.x0_scale)?;
    spec.jobs = merged(&args.jobs, cfg, "jobs", spec.jobs)?;
    Ok(spec)
}

fn cmd_plot(args: PlotArgs) -> Result<()> {
    let metric = Metric::parse(&args.metric)
        .ok_or_else(|| anyhow::anyhow!("unknown metric {:?} (train_loss|test_error)", args.metric))?;
    let mut buf: Vec<u8> = Vec::new();
    emit_plot_data(&args.files, metric, args.downsample, &mut buf)?;
    match args.out {
        Some(path) => fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(())
}

fn cmd_self_check() -> Result<()> {
    let results = trarc::oracle::self_check();
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut failures = 0;
    for r in &results {
        println!(
            "{:<width$}  {}  {}",
            r.name,
            if r.pass { "PASS" } else { "FAIL" },
            r.detail,
        );
        if !r.pass {
            failures += 1;
        }
    }
    if failures > 0 {
        bail!("{failures} self-check(s) failed");
    }
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> Result<()> {
    let train_path = resolve_data_path(&args.dataset);
    let test_path = args.test.as_deref().map(resolve_data_path);
    let (train, test) = data::load_train_test(&train_path, test_path.as_deref())?;
    for ds in std::iter::once(&train).chain(test.iter()) {
        let s = ds.stats();
        println!(
            "{} ({:?}): n={} d={} nnz={} label_balance={:.4}",
            ds.name, ds.split, s.n, s.d, s.nnz, s.label_balance
        );
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let ds = data::synthetic_dataset(args.n, args.d, args.nnz, args.seed);
    let file = fs::File::create(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let mut w = std::io::BufWriter::new(file);
    data::write_libsvm(&ds, &mut w)?;
    w.flush()?;
    eprintln!("wrote {} ({} rows, {} features)", args.out.display(), ds.n(), ds.d());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_args() -> RunArgs {
        match Cli::try_parse_from(["trarc-bench", "run", "--synthetic"])
            .expect("baseline args parse")
            .cmd
        {
            Cmd::Run(args) => *args,
            _ => unreachable!(),
        }
    }

    #[test]
    fn cli_parses_full_run_invocation() {
        let cli = Cli::try_parse_from([
            "trarc-bench",
            "run",
            "--synthetic",
            "2000,30,8,1",
            "--algo",
            "str,sarc",
            "--variant",
            "full,shgf",
            "--fraction",
            "0.05,0.1",
            "--seed",
            "1,2,3",
            "--budget-props",
            "1000000",
            "--sarc-correction",
            "step",
            "--size-rule",
            "bernstein",
            "--lemma-tolerances",
            "--out",
            "runs",
        ])
        .unwrap();
        let Cmd::Run(args) = cli.cmd else {
            panic!("expected run subcommand")
        };
        let spec = assemble_spec(&args, &HashMap::new()).unwrap();
        assert_eq!(spec.algorithms.len(), 2);
        assert_eq!(spec.variants, vec![Variant::Full, Variant::Shgf]);
        assert_eq!(spec.fractions, vec![0.05, 0.1]);
        assert_eq!(spec.seeds, vec![1, 2, 3]);
        assert_eq!(spec.budget_props, Some(1_000_000));
        assert_eq!(spec.cubic_correction, CubicCorrection::StepNorm);
        assert_eq!(spec.size_rule, SizeRule::Bernstein);
        assert!(spec.lemma_tolerances);
        match spec.data {
            DataSource::Synthetic(s) => {
                assert_eq!((s.n, s.d, s.nnz_per_row, s.seed), (2000, 30, 8, 1));
            }
            _ => panic!("expected synthetic source"),
        }
    }

    #[test]
    fn config_entries_apply_when_flags_absent() {
        let args = base_args();
        let cfg = kv::parse_kv(
            "eta = 0.25\nfraction = 0.2\nseed = 5,6\nvariant = sh\nsarc_correction = step\n",
        )
        .unwrap();
        let spec = assemble_spec(&args, &cfg).unwrap();
        assert_eq!(spec.eta, 0.25);
        assert_eq!(spec.fractions, vec![0.2]);
        assert_eq!(spec.seeds, vec![5, 6]);
        assert_eq!(spec.variants, vec![Variant::Sh]);
        assert_eq!(spec.cubic_correction, CubicCorrection::StepNorm);
    }

    #[test]
    fn flags_override_config_entries() {
        let mut args = base_args();
        args.eta = Some(0.4);
        args.fraction = Some("0.01".into());
        let cfg = kv::parse_kv("eta = 0.25\nfraction = 0.2\n").unwrap();
        let spec = assemble_spec(&args, &cfg).unwrap();
        assert_eq!(spec.eta, 0.4);
        assert_eq!(spec.fractions, vec![0.01]);
    }

    #[test]
    fn dataset_and_synthetic_are_mutually_exclusive() {
        let mut args = base_args();
        args.dataset = Some("a9a".into());
        let err = assemble_spec(&args, &HashMap::new()).unwrap_err();
        assert!(err.to_string().contains("mutually exclusive"));
    }

    #[test]
    fn bad_lists_are_rejected() {
        assert!(parse_algorithms("str,unknown").is_err());
        assert!(parse_variants("fulll").is_err());
        let mut args = base_args();
        args.size_rule = Some("theoremm".into());
        assert!(assemble_spec(&args, &HashMap::new()).is_err());
    }
}
