//! Alternating search over topology family, ring structure and radii for the
//! largest sum spectral efficiency with identical transmit and receive arrays.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{LinkConfig, Method};
use crate::geometry::{
    build_cuca, build_fuca, build_uca, validate, ArrayTopology, FucaSpec, GeometryError, Limits, Point, RingSpec,
};
use crate::metrics::symmetric_se;
use crate::numerics::ComplexMatrix;
use crate::transceiver::modulation_matrix;

/// Relative margin a capacity must exceed to count as an improvement.
const IMPROVEMENT_RTOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchFamily {
    Cuca,
    Fuca,
}

/// Ring structure and radii. CUCA radii are listed outermost ring first;
/// FUCA radii are `[primary, secondary]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyParams {
    pub family: SearchFamily,
    pub rings: usize,
    pub k: usize,
    pub radii: Vec<f64>,
}

impl TopologyParams {
    /// Uniformly reduced ring radii (CUCA) or the 0.6/0.4 split (FUCA).
    pub fn with_default_radii(family: SearchFamily, rings: usize, k: usize, aperture: f64) -> Self {
        let radii = match family {
            SearchFamily::Cuca => (0..rings).map(|n| aperture * (rings - n) as f64 / rings as f64).collect(),
            SearchFamily::Fuca => vec![0.6 * aperture, 0.4 * aperture],
        };
        Self { family, rings, k, radii }
    }

    pub fn element_count(&self) -> usize {
        self.rings * self.k
    }

    pub fn to_topology(&self) -> Result<ArrayTopology, GeometryError> {
        match self.family {
            SearchFamily::Cuca if self.rings == 1 => build_uca(self.k, self.radii[0], 0.0),
            SearchFamily::Cuca => {
                let rings: Vec<RingSpec> = self.radii.iter().map(|&r| RingSpec::new(r, self.k, 0.0)).collect();
                build_cuca(&rings)
            }
            SearchFamily::Fuca => build_fuca(&FucaSpec::new(self.rings, self.k, self.radii[0], self.radii[1])),
        }
    }

    /// Deterministic preference among equal capacities: fewer rings, then
    /// larger K, then lexicographically smaller radii.
    fn preference(&self, other: &Self) -> Ordering {
        self.rings
            .cmp(&other.rings)
            .then(other.k.cmp(&self.k))
            .then_with(|| {
                for (a, b) in self.radii.iter().zip(&other.radii) {
                    match a.total_cmp(b) {
                        Ordering::Equal => continue,
                        o => return o,
                    }
                }
                self.radii.len().cmp(&other.radii.len())
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Element budget per array.
    pub budget: usize,
    /// Largest allowed radius (m).
    pub aperture: f64,
    /// Convergence threshold on the capacity change (bit/s).
    pub epsilon: f64,
    /// Radius grid step (m).
    pub resolution: f64,
    pub max_iterations: usize,
    pub method: Method,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            budget: 16,
            aperture: 2.0,
            epsilon: 1.0,
            resolution: 0.02,
            max_iterations: 50,
            method: Method::Discrete,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.budget < 4 {
            return Err(format!("budget must be at least 4, got {}", self.budget));
        }
        if !(self.aperture > 0.0) || !self.aperture.is_finite() {
            return Err(format!("aperture must be positive, got {}", self.aperture));
        }
        if !(self.epsilon > 0.0) {
            return Err(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.resolution > 0.0) || !self.resolution.is_finite() {
            return Err(format!("resolution must be positive, got {}", self.resolution));
        }
        if self.max_iterations == 0 {
            return Err("max_iterations must be positive".into());
        }
        Ok(())
    }
}

/// Capacity of a parameter set, or `None` when it is infeasible.
pub fn capacity(params: &TopologyParams, cfg: &OptimizerConfig, link: &LinkConfig) -> Option<f64> {
    if params.element_count() > cfg.budget || params.radii.iter().any(|&r| r > cfg.aperture + 1e-12) {
        return None;
    }
    let topo = params.to_topology().ok()?;
    let limits = Limits::new(link.min_spacing, cfg.aperture).with_budget(cfg.budget);
    if !validate(&topo, &limits).is_valid() {
        return None;
    }
    symmetric_se(&topo, link, cfg.method).ok().map(|r| r.total_bps)
}

fn improves(new: f64, old: f64) -> bool {
    new > old + IMPROVEMENT_RTOL * old.abs().max(1.0)
}

fn structures(family: SearchFamily, budget: usize) -> impl Iterator<Item = (usize, usize)> {
    let min_rings = if family == SearchFamily::Fuca { 2 } else { 1 };
    (min_rings..=budget / 4).flat_map(move |n| (4..=budget / n).step_by(2).map(move |k| (n, k)))
}

/// Candidate set around `current`: every structure `(N', K')` with
/// `|N' − N| ≤ 1`, `K'` even and at least 4 and `N'·K' ≤ budget`, plus on the
/// first iteration every structure using the full budget. The candidate
/// sharing the current structure keeps the current radii; the others start
/// from default radii. Infeasible candidates are dropped.
pub fn generate_candidates(
    family: SearchFamily,
    current: &TopologyParams,
    cfg: &OptimizerConfig,
    link: &LinkConfig,
    first_iteration: bool,
) -> Vec<TopologyParams> {
    let mut out: Vec<TopologyParams> = structures(family, cfg.budget)
        .filter(|&(n, k)| n.abs_diff(current.rings) <= 1 || (first_iteration && n * k == cfg.budget))
        .map(|(n, k)| {
            if family == current.family && (n, k) == (current.rings, current.k) {
                current.clone()
            } else {
                TopologyParams::with_default_radii(family, n, k, cfg.aperture)
            }
        })
        .filter(|p| capacity_feasible(p, cfg, link))
        .collect();
    out.sort_by(|a, b| a.preference(b));
    out
}

fn capacity_feasible(p: &TopologyParams, cfg: &OptimizerConfig, link: &LinkConfig) -> bool {
    if p.element_count() > cfg.budget {
        return false;
    }
    match p.to_topology() {
        Ok(t) => validate(&t, &Limits::new(link.min_spacing, cfg.aperture).with_budget(cfg.budget)).is_valid(),
        Err(_) => false,
    }
}

// drops accumulated grid round-off below a picometer
fn snap(r: f64) -> f64 {
    (r * 1e12).round() / 1e12
}

fn radius_grid(cfg: &OptimizerConfig) -> Vec<f64> {
    let steps = (cfg.aperture / cfg.resolution + 1e-9).floor() as usize;
    (0..steps.max(1))
        .map(|i| snap(cfg.aperture - i as f64 * cfg.resolution))
        .filter(|r| *r > 1e-9)
        .collect()
}

/// Refines the radii of a fixed structure. Returns `None` when the starting
/// radii are infeasible.
pub fn optimize_radii(candidate: &TopologyParams, cfg: &OptimizerConfig, link: &LinkConfig) -> Option<(TopologyParams, f64)> {
    let mut best = candidate.clone();
    let mut best_c = capacity(&best, cfg, link)?;
    match candidate.family {
        SearchFamily::Cuca => {
            let grid = radius_grid(cfg);
            for _ in 0..MAX_SWEEPS {
                let mut improved = false;
                for n in 0..best.rings {
                    for &g in &grid {
                        if g == best.radii[n] {
                            continue;
                        }
                        let mut trial = best.clone();
                        trial.radii[n] = g;
                        if let Some(c) = capacity(&trial, cfg, link) {
                            if improves(c, best_c) {
                                best = trial;
                                best_c = c;
                                improved = true;
                            }
                        }
                    }
                }
                if !improved {
                    break;
                }
            }
        }
        SearchFamily::Fuca => {
            let total = cfg.aperture;
            let steps = (0.5 * total / cfg.resolution - 1e-9).ceil() as usize;
            let trials: Vec<TopologyParams> = (1..steps)
                .map(|i| {
                    let secondary = snap(i as f64 * cfg.resolution);
                    TopologyParams {
                        radii: vec![snap(total - secondary), secondary],
                        ..candidate.clone()
                    }
                })
                .collect();
            let evaluated: Vec<Option<f64>> = trials.par_iter().map(|t| capacity(t, cfg, link)).collect();
            for (t, c) in trials.into_iter().zip(evaluated) {
                if let Some(c) = c {
                    if improves(c, best_c) {
                        best = t;
                        best_c = c;
                    }
                }
            }
        }
    }
    Some((best, best_c))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    CandidatesExhausted,
    MaxIterations,
    NoFeasibleStart,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub family: SearchFamily,
    pub iteration: usize,
    pub candidates: usize,
    pub capacity_bps: f64,
    pub params: TopologyParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyOutcome {
    pub family: SearchFamily,
    pub stop: StopReason,
    pub best: Option<TopologyParams>,
    pub capacity_bps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub family: SearchFamily,
    pub params: TopologyParams,
    pub capacity_bps: f64,
    pub tx_positions: Vec<Point>,
    pub rx_positions: Vec<Point>,
    /// One `K × K` modulation matrix per ring.
    pub beamformers: Vec<ComplexMatrix>,
    pub trace: Vec<TraceEntry>,
    pub families: Vec<FamilyOutcome>,
}

fn initial(family: SearchFamily, cfg: &OptimizerConfig) -> TopologyParams {
    match family {
        SearchFamily::Cuca => {
            let k = cfg.budget - cfg.budget % 2;
            TopologyParams::with_default_radii(family, 1, k, cfg.aperture)
        }
        SearchFamily::Fuca => {
            let k = (cfg.budget / 2) - (cfg.budget / 2) % 2;
            TopologyParams::with_default_radii(family, 2, k.max(4), cfg.aperture)
        }
    }
}

fn search_family(
    family: SearchFamily,
    cfg: &OptimizerConfig,
    link: &LinkConfig,
    trace: &mut Vec<TraceEntry>,
) -> FamilyOutcome {
    let mut current = initial(family, cfg);
    let Some(mut current_c) = capacity(&current, cfg, link) else {
        return FamilyOutcome { family, stop: StopReason::NoFeasibleStart, best: None, capacity_bps: 0.0 };
    };
    trace.push(TraceEntry { family, iteration: 0, candidates: 0, capacity_bps: current_c, params: current.clone() });
    let mut stop = StopReason::MaxIterations;
    for it in 1..=cfg.max_iterations {
        let cands = generate_candidates(family, &current, cfg, link, it == 1);
        if cands.is_empty() {
            stop = StopReason::CandidatesExhausted;
            break;
        }
        let refined: Vec<Option<(TopologyParams, f64)>> =
            cands.par_iter().map(|c| optimize_radii(c, cfg, link)).collect();
        // candidates are in preference order; only a strict gain displaces an earlier one
        let mut best: Option<(TopologyParams, f64)> = None;
        for (p, c) in refined.into_iter().flatten() {
            if best.as_ref().is_none_or(|(_, bc)| improves(c, *bc)) {
                best = Some((p, c));
            }
        }
        let previous = current_c;
        if let Some((p, c)) = best {
            if improves(c, current_c) {
                current = p;
                current_c = c;
            }
        }
        trace.push(TraceEntry {
            family,
            iteration: it,
            candidates: cands.len(),
            capacity_bps: current_c,
            params: current.clone(),
        });
        if (current_c - previous).abs() < cfg.epsilon {
            stop = StopReason::Converged;
            break;
        }
    }
    FamilyOutcome { family, stop, best: Some(current), capacity_bps: current_c }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OptimizerError {
    #[error("invalid optimizer configuration: {0}")]
    Config(String),
    #[error("no feasible topology for the given budget and aperture")]
    Infeasible,
}

/// Searches CUCA and FUCA in turn and keeps the better family.
pub fn alternating_optimize(cfg: &OptimizerConfig, link: &LinkConfig) -> Result<OptimizationResult, OptimizerError> {
    cfg.validate().map_err(OptimizerError::Config)?;
    link.validate().map_err(|e| OptimizerError::Config(e.to_string()))?;
    let mut trace = Vec::new();
    let families: Vec<FamilyOutcome> = [SearchFamily::Cuca, SearchFamily::Fuca]
        .into_iter()
        .map(|f| search_family(f, cfg, link, &mut trace))
        .collect();
    let mut winner: Option<&FamilyOutcome> = None;
    for f in families.iter().filter(|f| f.best.is_some()) {
        if winner.is_none_or(|w| improves(f.capacity_bps, w.capacity_bps)) {
            winner = Some(f);
        }
    }
    let winner = winner.ok_or(OptimizerError::Infeasible)?;
    let params = winner.best.clone().expect("filtered");
    let topo = params.to_topology().map_err(|_| OptimizerError::Infeasible)?;
    let beamformers = (0..params.rings)
        .map(|n| modulation_matrix(params.k, n, 0.0).expect("K validated by construction"))
        .collect();
    Ok(OptimizationResult {
        family: winner.family,
        capacity_bps: winner.capacity_bps,
        tx_positions: topo.element_positions().to_vec(),
        rx_positions: topo.at_plane(link.distance).element_positions().to_vec(),
        beamformers,
        params,
        trace,
        families,
    })
}
