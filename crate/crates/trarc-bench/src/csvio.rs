//! Run and summary CSV schema.
//!
//! A run file starts with one comment line carrying the schema version and
//! the grid-point metadata, then a header row and one row per iteration:
//!
//! ```text
//! # trarc-run schema=1 dataset=a9a algo=str variant=shgf fraction=0.05 seed=7 ...
//! iter,cum_props,train_loss,test_error,rho_tilde,rho_hat,accepted,delta_or_sigma,step_norm,gamma,size_h,size_g,size_b
//! ```
//!
//! The `test_error` column is present only when the dataset has a test
//! split. Floats print in Rust's shortest round-trip form; degenerate
//! ratios appear as `-inf`. Wall-clock timing is excluded by design (it
//! lives in the `.meta.txt` sidecars) so identical specs write identical
//! bytes.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};

use trarc::optim::{Algorithm, RunTrace, Variant};

use crate::{algo_name, SummaryRow};

pub const SCHEMA_VERSION: u32 = 1;

/// Metadata embedded in the run file's comment line.
#[derive(Debug, Clone)]
pub struct RunMeta {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub variant: Variant,
    pub fraction: f64,
    pub seed: u64,
    pub eta: f64,
    pub shrink_factor: f64,
    pub grow_factor: f64,
    pub delta0: f64,
    pub sigma0: f64,
    pub budget_props: Option<u64>,
}

pub fn write_run_csv(
    path: &Path,
    meta: &RunMeta,
    trace: &RunTrace,
    train_losses: &[f64],
    test_errors: Option<&[f64]>,
) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    writeln!(
        w,
        "# trarc-run schema={} dataset={} algo={} variant={} fraction={} seed={} eta={} r1={} r2={} delta0={} sigma0={} budget_props={}",
        SCHEMA_VERSION,
        meta.dataset,
        algo_name(meta.algorithm),
        meta.variant.name(),
        meta.fraction,
        meta.seed,
        meta.eta,
        meta.shrink_factor,
        meta.grow_factor,
        meta.delta0,
        meta.sigma0,
        meta.budget_props.map_or("none".to_string(), |b| b.to_string()),
    )?;
    let with_test = test_errors.is_some();
    if with_test {
        writeln!(
            w,
            "iter,cum_props,train_loss,test_error,rho_tilde,rho_hat,accepted,delta_or_sigma,step_norm,gamma,size_h,size_g,size_b"
        )?;
    } else {
        writeln!(
            w,
            "iter,cum_props,train_loss,rho_tilde,rho_hat,accepted,delta_or_sigma,step_norm,gamma,size_h,size_g,size_b"
        )?;
    }
    for (k, r) in trace.records.iter().enumerate() {
        let loss = train_losses[k];
        if let Some(errs) = test_errors {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.iter,
                r.cum_props,
                loss,
                errs[k],
                r.rho_tilde,
                r.rho_hat,
                r.accepted as u8,
                r.reg_value,
                r.step_norm,
                r.gamma,
                r.sizes.h,
                r.sizes.g,
                r.sizes.b,
            )?;
        } else {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.iter,
                r.cum_props,
                loss,
                r.rho_tilde,
                r.rho_hat,
                r.accepted as u8,
                r.reg_value,
                r.step_norm,
                r.gamma,
                r.sizes.h,
                r.sizes.g,
                r.sizes.b,
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# trarc-summary schema={SCHEMA_VERSION}")?;
    writeln!(
        w,
        "file,dataset,algo,variant,fraction,seed,iterations,cum_props,final_train_loss,final_test_error,termination"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.file,
            r.dataset,
            algo_name(r.algorithm),
            r.variant.name(),
            r.fraction,
            r.seed,
            r.iterations,
            r.cum_props,
            r.final_train_loss,
            r.final_test_error.map_or(String::new(), |e| e.to_string()),
            r.termination,
        )?;
    }
    w.flush()?;
    Ok(())
}

/// A run CSV read back: metadata map, header, and raw string cells.
#[derive(Debug, Clone)]
pub struct ParsedRun {
    pub meta: HashMap<String, String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ParsedRun {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

pub fn read_run_csv(path: &Path) -> Result<ParsedRun> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut lines = BufReader::new(file).lines();
    let meta_line = match lines.next() {
        Some(l) => l?,
        None => bail!("{}: empty file", path.display()),
    };
    let Some(meta_body) = meta_line.strip_prefix("# trarc-run ") else {
        bail!("{}: missing trarc-run metadata line", path.display());
    };
    let mut meta = HashMap::new();
    for tok in meta_body.split_ascii_whitespace() {
        if let Some((k, v)) = tok.split_once('=') {
            meta.insert(k.to_string(), v.to_string());
        }
    }
    match meta.get("schema").map(String::as_str) {
        Some("1") => {}
        other => bail!("{}: unsupported schema {:?}", path.display(), other),
    }
    let header_line = match lines.next() {
        Some(l) => l?,
        None => bail!("{}: missing header", path.display()),
    };
    let header: Vec<String> = header_line.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let cells: Vec<String> = line.split(',').map(str::to_string).collect();
        if cells.len() != header.len() {
            bail!(
                "{}: row has {} cells, header has {}",
                path.display(),
                cells.len(),
                header.len()
            );
        }
        rows.push(cells);
    }
    Ok(ParsedRun { meta, header, rows })
}
