use std::path::PathBuf;

use anisowave::campaign::{run_campaign, ExperimentConfig, Suite};
use anisowave::norms::TLParams;
use anisowave::{Error, Result};
use clap::{Args, Subcommand};
use serde_json::{json, Value};

use crate::input;
use crate::Outcome;

/// Flags that override the JSON config, or build one from scratch.
#[derive(Debug, Args)]
pub struct ConfigFlags {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    matrix: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    half_extent: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    peetre_m: Option<usize>,
    /// One exponent set `p=..,q=..,alpha=..,beta=..`; repeat for more.
    #[arg(long)]
    params: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report bundle directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum VerifyOp {
    /// Runs the suite and exits 1 when a check fails.
    Verify(ConfigFlags),
}

#[derive(Debug, Subcommand)]
pub enum CampaignOp {
    /// Runs the selected suites and writes the report bundle.
    Run {
        #[command(flatten)]
        flags: ConfigFlags,
        /// Comma-separated suite names.
        #[arg(long)]
        only: Option<String>,
    },
}

impl ConfigFlags {
    fn resolve(&self, suites: Option<Vec<Suite>>) -> Result<ExperimentConfig> {
        let mut v: Value = match &self.config {
            Some(path) => serde_json::from_str(&input::read_text(path)?)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
            None => {
                if self.matrix.is_none() {
                    return Err(Error::Config("either --config or --matrix is required".into()));
                }
                json!({
                    "grid": { "n": 64, "halfExtent": 8.0, "m": 32 },
                    "params": [
                        { "p": 2.0, "q": 2.0, "alpha": 0.0, "beta": 1.1 },
                        { "p": 1.0, "q": 2.0, "alpha": 0.0, "beta": 1.1 }
                    ]
                })
            }
        };
        let obj = v.as_object_mut().ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
        if let Some(m) = &self.matrix {
            obj.insert("matrix".into(), json!(input::matrix_rows(m)?));
        }
        if !self.params.is_empty() {
            let list = self.params.iter().map(|p| TLParams::parse(p)).collect::<Result<Vec<_>>>()?;
            obj.insert("params".into(), json!(list));
        }
        if let Some(seed) = self.seed {
            obj.insert("seed".into(), json!(seed));
        }
        if let Some(out) = &self.out {
            obj.insert("output".into(), json!(out));
        }
        if let Some(s) = suites {
            obj.insert("suites".into(), json!(s));
        }
        let grid = obj.entry("grid").or_insert_with(|| json!({}));
        let grid = grid.as_object_mut().ok_or_else(|| Error::Config("grid must be a JSON object".into()))?;
        if grid.contains_key("X") && self.half_extent.is_some() {
            grid.remove("X");
        }
        for (key, val) in [
            ("n", self.n.map(|v| json!(v))),
            ("halfExtent", self.half_extent.map(|v| json!(v))),
            ("m", self.m.map(|v| json!(v))),
            ("peetreM", self.peetre_m.map(|v| json!(v))),
        ] {
            if let Some(val) = val {
                grid.insert(key.into(), val);
            }
        }
        ExperimentConfig::parse(&v.to_string())
    }
}

fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    let report = run_campaign(cfg)?;
    for s in &report.suites {
        let status = if s.pass { "pass" } else { "FAIL" };
        match &s.error {
            Some(e) => eprintln!("{status} {}: {e}", s.suite.name()),
            None => eprintln!("{status} {} ({} checks)", s.suite.name(), s.checks.len()),
        }
    }
    if let Some(dir) = &cfg.output {
        report.write_bundle(std::path::Path::new(dir))?;
    }
    println!("{}", report.to_json());
    Ok(Outcome::from_pass(report.pass))
}

pub fn verify(op: VerifyOp, suite: Suite) -> Result<Outcome> {
    let VerifyOp::Verify(flags) = op;
    execute(&flags.resolve(Some(vec![suite]))?)
}

pub fn campaign(op: CampaignOp) -> Result<Outcome> {
    let CampaignOp::Run { flags, only } = op;
    let suites = only
        .map(|list| list.split(',').filter(|s| !s.trim().is_empty()).map(Suite::parse).collect::<Result<Vec<_>>>())
        .transpose()?;
    execute(&flags.resolve(suites)?)
}
