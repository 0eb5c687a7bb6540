//! Command-line experiment runner: each subcommand resolves a configuration,
//! validates it completely, runs one experiment and writes its tables.

pub mod config;
pub mod output;

#[cfg(test)]
mod e2e;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use oamtopo::channel::LinkConfig;
use oamtopo::geometry::{ArrayTopology, GeometryError, TopologyDocument};
use oamtopo::metrics::{ber_monte_carlo, se_surface, se_vs_snr, SweepResult, SurfaceError};
use oamtopo::optimizer::{alternating_optimize, FamilyOutcome, OptimizerError, SearchFamily, TraceEntry};
use oamtopo::reconfig::{catalog_with_count, cost_matrix};
use oamtopo::transceiver::{TransceiverError, TransceiverPlan};
use serde::Serialize;

use config::{ExperimentConfig, FamilyName, Format, TopologySpec};
use output::{csv_text, json_text, num, slug, write_atomic, RunMeta};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<TransceiverError> for CliError {
    fn from(e: TransceiverError) -> Self {
        match e {
            TransceiverError::Numeric(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<SurfaceError> for CliError {
    fn from(e: SurfaceError) -> Self {
        match e {
            SurfaceError::Transceiver(t) => t.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "oamtopo", version, about = "OAM array topology experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Build, validate and export array layouts.
    Topology,
    /// Spectral efficiency against SNR.
    Se,
    /// Spectral efficiency over link distance and aperture.
    Surface,
    /// Monte-Carlo bit error rate against SNR.
    Ber,
    /// Alternating topology search.
    Optimize,
    /// Pairwise switching costs.
    Switchcost,
}

/// Flags that override fields of the configuration document.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    #[arg(long, global = true)]
    pub catalog: bool,
    #[arg(long, global = true, value_enum)]
    pub family: Option<FamilyName>,
    #[arg(long, global = true)]
    pub rings: Option<usize>,
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub count: Option<usize>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub frames: Option<u64>,
}

impl Overrides {
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(f) = self.format {
            cfg.format = f;
        }
        if let Some(b) = self.budget {
            cfg.budget = b;
            cfg.optimizer.budget = b;
        }
        if let Some(f) = self.frames {
            cfg.frames = f;
        }
        if self.catalog {
            cfg.catalog = true;
        }
        if let Some(family) = self.family {
            cfg.catalog = false;
            cfg.topologies = vec![TopologySpec {
                family: Some(family),
                rings: self.rings,
                k: self.k,
                count: self.count,
                radii: self.radii.clone(),
                ..Default::default()
            }];
        } else if self.rings.is_some() || self.k.is_some() || self.count.is_some() || self.radii.is_some() {
            return Err(CliError::Config("--rings/--k/--count/--radii need --family".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs `command` on a resolved configuration and returns the files written.
pub fn run(command: Command, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let meta = RunMeta::new(cfg);
    match command {
        Command::Topology => cmd_topology(cfg, &meta),
        Command::Se => cmd_se(cfg, &meta),
        Command::Surface => cmd_surface(cfg, &meta),
        Command::Ber => cmd_ber(cfg, &meta),
        Command::Optimize => cmd_optimize(cfg, &meta),
        Command::Switchcost => cmd_switchcost(cfg, &meta),
    }
}

fn unique_names(labels: impl Iterator<Item = String>) -> Vec<String> {
    let mut seen: Vec<String> = Vec::new();
    for l in labels {
        let base = slug(&l);
        let mut name = base.clone();
        let mut i = 2;
        while seen.contains(&name) {
            name = format!("{base}_{i}");
            i += 1;
        }
        seen.push(name);
    }
    seen
}

fn position_rows(topo: &ArrayTopology, positions: &[[f64; 3]]) -> Vec<Vec<String>> {
    topo.element_labels()
        .iter()
        .zip(positions)
        .map(|(&(g, i), p)| vec![g.to_string(), i.to_string(), num(p[0]), num(p[1]), num(p[2])])
        .collect()
}

const POSITION_HEADER: [&str; 5] = ["ring", "index", "x_m", "y_m", "z_m"];

fn cmd_topology(cfg: &ExperimentConfig, meta: &RunMeta) -> Result<Vec<PathBuf>, CliError> {
    let topos = cfg.topologies()?;
    let limits = cfg.limits();
    let names = unique_names(topos.iter().map(|(l, _)| l.clone()));
    let mut written = Vec::new();
    for ((_, topo), name) in topos.iter().zip(names) {
        let doc: TopologyDocument = topo.to_document(&limits);
        let (file, bytes) = match cfg.format {
            Format::Csv => (format!("{name}.csv"), csv_text(meta, &POSITION_HEADER, &position_rows(topo, &doc.positions))?),
            Format::Json => (format!("{name}.json"), json_text(meta, &doc)?),
        };
        written.push(write_atomic(&cfg.out, &file, &bytes)?);
    }
    Ok(written)
}

fn ring_topologies(cfg: &ExperimentConfig) -> Result<Vec<(String, ArrayTopology)>, CliError> {
    let topos = cfg.topologies()?;
    if let Some((l, _)) = topos.iter().find(|(_, t)| !t.family().is_ring_structured()) {
        return Err(CliError::Config(format!("{l} carries no OAM modes; pick UCA, CUCA or FUCA layouts")));
    }
    Ok(topos)
}

fn snr_grid(cfg: &ExperimentConfig) -> Result<Vec<f64>, CliError> {
    let g = cfg.snr_db.values()?;
    if g.is_empty() {
        return Err(CliError::Config("SNR grid is empty".into()));
    }
    Ok(g)
}

#[derive(Serialize)]
struct Curves<'a> {
    metric: &'static str,
    axis: &'static str,
    curves: &'a [SweepResult],
}

fn write_curves(cfg: &ExperimentConfig, meta: &RunMeta, name: &str, metric: &'static str, curves: &[SweepResult]) -> Result<Vec<PathBuf>, CliError> {
    let bytes = match cfg.format {
        Format::Csv => {
            let rows: Vec<Vec<String>> = curves
                .iter()
                .flat_map(|c| c.axis.iter().zip(&c.values).map(|(a, v)| vec![c.label.clone(), num(*a), num(*v)]))
                .collect();
            csv_text(meta, &["topology", "snr_db", metric], &rows)?
        }
        Format::Json => json_text(meta, &Curves { metric, axis: "snr_db", curves })?,
    };
    let ext = if cfg.format == Format::Csv { "csv" } else { "json" };
    Ok(vec![write_atomic(&cfg.out, &format!("{name}.{ext}"), &bytes)?])
}

fn cmd_se(cfg: &ExperimentConfig, meta: &RunMeta) -> Result<Vec<PathBuf>, CliError> {
    let grid = snr_grid(cfg)?;
    let topos = ring_topologies(cfg)?;
    for (_, t) in &topos {
        TransceiverPlan::for_link(t, t, cfg.link.power_budget)?;
    }
    let curves = se_vs_snr(&topos, &cfg.link, &grid, cfg.method)?;
    write_curves(cfg, meta, "se_vs_snr", "se_bps", &curves)
}

fn cmd_ber(cfg: &ExperimentConfig, meta: &RunMeta) -> Result<Vec<PathBuf>, CliError> {
    let grid = snr_grid(cfg)?;
    let topos = ring_topologies(cfg)?;
    let plans = topos
        .iter()
        .map(|(_, t)| TransceiverPlan::for_link(t, t, cfg.link.power_budget))
        .collect::<Result<Vec<_>, _>>()?;
    let mut curves = Vec::new();
    for ((label, t), plan) in topos.iter().zip(&plans) {
        curves.push(ber_monte_carlo(label, t, t, &cfg.link, plan, &grid, cfg.frames, cfg.seed, cfg.constellation)?);
    }
    write_curves(cfg, meta, "ber_vs_snr", "ber", &curves)
}

fn cmd_surface(cfg: &ExperimentConfig, meta: &RunMeta) -> Result<Vec<PathBuf>, CliError> {
    if cfg.catalog || cfg.topologies.is_empty() {
        return Err(CliError::Config("surface needs explicit topologies".into()));
    }
    let distances = cfg.distances_m.values()?;
    let apertures = cfg.apertures_m.values()?;
    let base = cfg.link.aperture;
    for spec in &cfg.topologies {
        for &r in &apertures {
            spec.at_aperture(base, r).build(r)?;
        }
        if !matches!(spec.family()?, FamilyName::Uca | FamilyName::Cuca | FamilyName::Fuca) {
            return Err(CliError::Config("surface needs UCA, CUCA or FUCA layouts".into()));
        }
    }
    let topos = cfg.topologies()?;
    let names = unique_names(topos.iter().map(|(l, _)| l.clone()));
    let mut written = Vec::new();
    for ((spec, (label, _)), name) in cfg.topologies.iter().zip(&topos).zip(names) {
        let build = |r: f64| {
            spec.at_aperture(base, r)
                .build(r)
                .map_err(|e| GeometryError::InvalidParameter(e.to_string()))
        };
        let s = se_surface(label, build, &cfg.link, &distances, &apertures, cfg.method)?;
        let bytes = match cfg.format {
            Format::Csv => {
                let mut rows = Vec::with_capacity(s.values.len());
                for (i, d) in s.distances.iter().enumerate() {
                    for (j, r) in s.radii.iter().enumerate() {
                        rows.push(vec![num(*d), num(*r), num(s.at(i, j))]);
                    }
                }
                csv_text(meta, &["d_m", "r_m", "se_bps"], &rows)?
            }
            Format::Json => json_text(meta, &s)?,
        };
        let ext = if cfg.format == Format::Csv { "csv" } else { "json" };
        written.push(write_atomic(&cfg.out, &format!("surface_{name}.{ext}"), &bytes)?);
    }
    Ok(written)
}

type Cplx = [f64; 2];

#[derive(Serialize)]
struct OptimizeReport<'a> {
    family: SearchFamily,
    #[serde(rename = "N")]
    rings: usize,
    #[serde(rename = "K")]
    k: usize,
    radii: &'a [f64],
    capacity_bps: f64,
    trace: &'a [TraceEntry],
    families: &'a [FamilyOutcome],
    positions: &'a [[f64; 3]],
    rx_positions: &'a [[f64; 3]],
    /// Per-ring modulation matrices, row-major, `[re, im]` entries.
    beamformers: Vec<Vec<Vec<Cplx>>>,
    seed: u64,
    cfg: &'a ExperimentConfig,
}

fn cmd_optimize(cfg: &ExperimentConfig, meta: &RunMeta) -> Result<Vec<PathBuf>, CliError> {
    let link: LinkConfig = cfg.link;
    let r = alternating_optimize(&cfg.optimizer, &link).map_err(|e| match e {
        OptimizerError::Config(m) => CliError::Config(m),
        OptimizerError::Infeasible => CliError::Numeric(e.to_string()),
    })?;
    let beamformers = r
        .beamformers
        .iter()
        .map(|w| (0..w.rows()).map(|i| (0..w.cols()).map(|j| [w[(i, j)].re, w[(i, j)].im]).collect()).collect())
        .collect();
    let report = OptimizeReport {
        family: r.family,
        rings: r.params.rings,
        k: r.params.k,
        radii: &r.params.radii,
        capacity_bps: r.capacity_bps,
        trace: &r.trace,
        families: &r.families,
        positions: &r.tx_positions,
        rx_positions: &r.rx_positions,
        beamformers,
        seed: cfg.seed,
        cfg,
    };
    let mut written = vec![write_atomic(&cfg.out, "optimize.json", &json_text(meta, &report)?)?];
    if cfg.format == Format::Csv {
        let topo = r.params.to_topology().map_err(|e| CliError::Numeric(e.to_string()))?;
        let bytes = csv_text(meta, &POSITION_HEADER, &position_rows(&topo, &r.tx_positions))?;
        written.push(write_atomic(&cfg.out, "optimize_positions.csv", &bytes)?);
    }
    Ok(written)
}

fn cmd_switchcost(cfg: &ExperimentConfig, meta: &RunMeta) -> Result<Vec<PathBuf>, CliError> {
    let topos: Vec<ArrayTopology> = if cfg.catalog {
        catalog_with_count(cfg.budget, cfg.link.aperture)
    } else {
        cfg.topologies()?.into_iter().map(|(_, t)| t).collect()
    };
    if topos.is_empty() {
        return Err(CliError::Config(format!("no layouts with {} elements", cfg.budget)));
    }
    let m = cost_matrix(&topos).map_err(|e| CliError::Config(e.to_string()))?;
    let bytes = match cfg.format {
        Format::Csv => {
            let mut rows = Vec::new();
            for (i, a) in m.labels.iter().enumerate() {
                for (j, b) in m.labels.iter().enumerate() {
                    rows.push(vec![a.clone(), b.clone(), num(m.values[i][j])]);
                }
            }
            csv_text(meta, &["from", "to", "distance_m"], &rows)?
        }
        Format::Json => json_text(meta, &m)?,
    };
    let ext = if cfg.format == Format::Csv { "csv" } else { "json" };
    Ok(vec![write_atomic(&cfg.out, &format!("switchcost.{ext}"), &bytes)?])
}
