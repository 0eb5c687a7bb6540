//! Experiment configuration: a JSON document whose omitted fields fall back
//! to the reference link parameters.

use std::path::{Path, PathBuf};

use oamtopo::channel::{LinkConfig, Method};
use oamtopo::geometry::{
    build_auxiliary, build_cuca, build_cuca_uniform, build_fuca, build_uca, validate, ArrayTopology, Auxiliary,
    FucaSpec, Limits, RingSpec,
};
use oamtopo::optimizer::OptimizerConfig;
use oamtopo::transceiver::Constellation;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Uca,
    Cuca,
    Fuca,
    Ura,
    Rla,
    Spiral,
    Qfuca,
}

/// An axis given either as explicit values or as an inclusive range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        match self {
            Grid::Values(v) => {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(CliError::Config("grid values must be finite".into()));
                }
                Ok(v.clone())
            }
            &Grid::Range { start, stop, step } => {
                if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
                    return Err(CliError::Config(format!(
                        "range needs start <= stop and step > 0, got {start}..{stop} by {step}"
                    )));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
                // rounded so that e.g. 0.2 + 3·0.02 prints as 0.26
                Ok((0..n).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect())
            }
        }
    }
}

/// One topology selection. Fields that do not apply to a family are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub family: Option<FamilyName>,
    /// Ring count (CUCA) or sub-array count (FUCA).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rings: Option<usize>,
    /// Elements per ring or sub-array.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Total element count for the layout-only families.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    /// CUCA ring radii outermost first; FUCA `[primary, secondary]`; UCA `[radius]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arms: Option<usize>,
    /// Per-ring rotation step σ (rad).
    #[serde(default)]
    pub rotation: f64,
}

fn need(v: Option<usize>, what: &str, family: &str) -> Result<usize, CliError> {
    v.ok_or_else(|| CliError::Config(format!("{family} needs `{what}`")))
}

impl TopologySpec {
    pub fn family(&self) -> Result<FamilyName, CliError> {
        self.family.ok_or_else(|| CliError::Config("topology entry needs `family`".into()))
    }

    /// Builds the layout with outer radius `aperture` wherever radii are not given.
    pub fn build(&self, aperture: f64) -> Result<ArrayTopology, CliError> {
        let radii = self.radii.as_deref();
        let topo = match self.family()? {
            FamilyName::Uca => {
                let k = need(self.k.or(self.count), "k", "uca")?;
                let r = match radii {
                    None => aperture,
                    Some([r]) => *r,
                    Some(_) => return Err(CliError::Config("uca takes one radius".into())),
                };
                build_uca(k, r, self.rotation)
            }
            FamilyName::Cuca => {
                let n = need(self.rings, "rings", "cuca")?;
                let k = need(self.k, "k", "cuca")?;
                match radii {
                    None => build_cuca_uniform(n, k, aperture, self.rotation),
                    Some(r) if r.len() == n => build_cuca(
                        &r.iter()
                            .enumerate()
                            .map(|(i, &ri)| RingSpec::new(ri, k, (i + 1) as f64 * self.rotation))
                            .collect::<Vec<_>>(),
                    ),
                    Some(r) => {
                        return Err(CliError::Config(format!("cuca with {n} rings got {} radii", r.len())))
                    }
                }
            }
            FamilyName::Fuca => {
                let n = need(self.rings, "rings", "fuca")?;
                let k = need(self.k, "k", "fuca")?;
                let (p, s) = match radii {
                    None => (0.6 * aperture, 0.4 * aperture),
                    Some([p, s]) => (*p, *s),
                    Some(_) => return Err(CliError::Config("fuca takes radii [primary, secondary]".into())),
                };
                let mut spec = FucaSpec::new(n, k, p, s);
                spec.subarray_rotation = self.rotation;
                build_fuca(&spec)
            }
            other => {
                let count = need(self.count.or(self.k), "count", "layout")?;
                if radii.is_some() {
                    return Err(CliError::Config("layout-only families take no radii".into()));
                }
                let kind = match other {
                    FamilyName::Ura => Auxiliary::Ura,
                    FamilyName::Spiral => Auxiliary::Spiral,
                    FamilyName::Qfuca => Auxiliary::QfucaLayout,
                    _ => Auxiliary::Rla {
                        arms: self.arms.unwrap_or(if count % 4 == 0 { 4 } else { 2 }),
                    },
                };
                build_auxiliary(kind, count, aperture)
            }
        };
        topo.map_err(|e| CliError::Config(e.to_string()))
    }

    /// The same selection with every radius scaled to a new aperture.
    pub fn at_aperture(&self, from: f64, to: f64) -> TopologySpec {
        let mut s = self.clone();
        if let Some(r) = &mut s.radii {
            r.iter_mut().for_each(|x| *x *= to / from);
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub link: LinkConfig,
    pub topologies: Vec<TopologySpec>,
    /// Use the generated catalog instead of `topologies`.
    pub catalog: bool,
    /// Element budget for catalogs; the `--budget` flag also sets `optimizer.budget`.
    pub budget: usize,
    pub snr_db: Grid,
    pub distances_m: Grid,
    pub apertures_m: Grid,
    pub frames: u64,
    pub seed: u64,
    pub constellation: Constellation,
    pub method: Method,
    pub optimizer: OptimizerConfig,
    /// Never serialized: excluded from the config hash and the recorded config.
    #[serde(skip_serializing)]
    pub out: PathBuf,
    pub format: Format,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            link: LinkConfig::default(),
            topologies: Vec::new(),
            catalog: false,
            budget: 16,
            snr_db: Grid::Range { start: 0.0, stop: 30.0, step: 5.0 },
            distances_m: Grid::Values(vec![100.0]),
            apertures_m: Grid::Range { start: 0.22, stop: 2.0, step: 0.02 },
            frames: 10_000,
            seed: 0,
            constellation: Constellation::Qpsk,
            method: Method::Discrete,
            optimizer: OptimizerConfig::default(),
            out: PathBuf::from("out"),
            format: Format::Csv,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn limits(&self) -> Limits {
        Limits::new(self.link.min_spacing, self.link.aperture)
    }

    /// Checks the link and every shared field; command-specific checks live with the commands.
    pub fn validate(&self) -> Result<(), CliError> {
        self.link.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.optimizer.validate().map_err(CliError::Config)?;
        if self.budget < 4 {
            return Err(CliError::Config(format!("budget must be at least 4, got {}", self.budget)));
        }
        if self.frames == 0 {
            return Err(CliError::Config("frames must be at least 1".into()));
        }
        self.snr_db.values()?;
        self.distances_m.values()?;
        self.apertures_m.values()?;
        Ok(())
    }

    /// Named topologies, each validated against the link limits.
    pub fn topologies(&self) -> Result<Vec<(String, ArrayTopology)>, CliError> {
        if self.catalog {
            return Ok(oamtopo::reconfig::catalog_for_budget(self.budget, self.link.aperture)
                .into_iter()
                .map(|t| (t.label(), t))
                .collect());
        }
        if self.topologies.is_empty() {
            return Err(CliError::Config("no topologies selected".into()));
        }
        let limits = self.limits();
        self.topologies
            .iter()
            .map(|s| {
                let t = s.build(self.link.aperture)?;
                let report = validate(&t, &limits);
                if !report.is_valid() {
                    return Err(CliError::Config(format!("{} violates constraints: {:?}", t.label(), report.violations)));
                }
                Ok((t.label(), t))
            })
            .collect()
    }
}
