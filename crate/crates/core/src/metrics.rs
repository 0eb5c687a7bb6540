//! Spectral efficiency under zero-forcing, SNR and geometry sweeps, and
//! Monte-Carlo bit error rate.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{LinkConfig, Method, ModeChannels};
use crate::geometry::{ArrayTopology, GeometryError};
use crate::numerics::{gram_inverse, ComplexMatrix, NumericError, DEFAULT_CONDITION_BOUND};
use crate::transceiver::{frame_rng, Constellation, Link, SymbolFrame, TransceiverError, TransceiverPlan};

/// Element noise power and the per-mode variance after `1/V` demodulation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub element_noise_power: f64,
    pub demodulated_variance: f64,
}

impl NoiseModel {
    pub fn new(element_noise_power: f64, receive_elements_per_ring: usize) -> Self {
        Self {
            element_noise_power,
            demodulated_variance: element_noise_power / receive_elements_per_ring as f64,
        }
    }
}

/// `Σ_n B·log₂(1 + p_n / (δ²·[(HᴴH)⁻¹]_nn))`.
pub fn se_per_mode(h: &ComplexMatrix, alloc: &[f64], delta2: f64, bandwidth: f64) -> Result<f64, NumericError> {
    let amp = noise_amplification(h)?;
    se_from_amplification(&amp, alloc, delta2, bandwidth)
}

/// Diagonal of `(HᴴH)⁻¹`.
pub fn noise_amplification(h: &ComplexMatrix) -> Result<Vec<f64>, NumericError> {
    let g = gram_inverse(h, DEFAULT_CONDITION_BOUND)?;
    Ok((0..h.cols()).map(|n| g.inverse[(n, n)].re).collect())
}

fn se_from_amplification(amp: &[f64], alloc: &[f64], delta2: f64, bandwidth: f64) -> Result<f64, NumericError> {
    if amp.len() != alloc.len() {
        return Err(NumericError::Shape(format!("{} allocations for {} streams", alloc.len(), amp.len())));
    }
    Ok(amp
        .iter()
        .zip(alloc)
        .map(|(a, p)| bandwidth * (1.0 + p / (delta2 * a)).log2())
        .sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSe {
    pub mode: i32,
    pub se_bps: f64,
    pub singular: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeReport {
    pub total_bps: f64,
    pub per_mode: Vec<ModeSe>,
}

impl SeReport {
    pub fn singular_modes(&self) -> Vec<i32> {
        self.per_mode.iter().filter(|m| m.singular).map(|m| m.mode).collect()
    }
}

/// Noise amplifications of every mode in a plan; independent of noise and power.
#[derive(Clone, Debug)]
pub struct SeModel {
    plan: TransceiverPlan,
    amplifications: Vec<Option<Vec<f64>>>,
    rx_per_ring: usize,
    bandwidth: f64,
}

impl SeModel {
    pub fn new(
        tx: &ArrayTopology,
        rx: &ArrayTopology,
        cfg: &LinkConfig,
        plan: &TransceiverPlan,
        method: Method,
    ) -> Result<Self, TransceiverError> {
        plan.validate(f64::INFINITY)?;
        let mut ch = ModeChannels::new(tx, rx, cfg)?;
        if ch.tx_ring_count() != plan.ring_count || ch.tx_elements_per_ring() != plan.elements_per_ring {
            return Err(TransceiverError::Dimension(format!(
                "plan {}x{} does not match transmit array {}x{}",
                plan.ring_count,
                plan.elements_per_ring,
                ch.tx_ring_count(),
                ch.tx_elements_per_ring()
            )));
        }
        let mut amplifications = Vec::with_capacity(plan.modes.len());
        for &l in &plan.modes {
            let h = ch.matrix(l, method)?;
            amplifications.push(match noise_amplification(&h) {
                Ok(a) => Some(a),
                Err(NumericError::Singular { .. }) => None,
                Err(e) => return Err(e.into()),
            });
        }
        Ok(Self {
            plan: plan.clone(),
            amplifications,
            rx_per_ring: ch.rx_elements_per_ring(),
            bandwidth: cfg.bandwidth,
        })
    }

    /// SE with the plan's allocation scaled by `power_scale` and element noise `noise_power`.
    pub fn report(&self, noise_power: f64, power_scale: f64) -> SeReport {
        let delta2 = NoiseModel::new(noise_power, self.rx_per_ring).demodulated_variance;
        let lcount = self.plan.modes.len();
        let per_mode: Vec<ModeSe> = self
            .plan
            .modes
            .iter()
            .enumerate()
            .map(|(i, &mode)| match &self.amplifications[i] {
                Some(amp) => {
                    let alloc: Vec<f64> = (0..self.plan.ring_count)
                        .map(|n| self.plan.allocation[n * lcount + i] * power_scale)
                        .collect();
                    ModeSe {
                        mode,
                        se_bps: se_from_amplification(amp, &alloc, delta2, self.bandwidth).expect("shapes match"),
                        singular: false,
                    }
                }
                None => ModeSe { mode, se_bps: 0.0, singular: true },
            })
            .collect();
        SeReport {
            total_bps: per_mode.iter().map(|m| m.se_bps).sum(),
            per_mode,
        }
    }
}

/// Total SE over the plan's modes. Singular modes contribute zero and are flagged.
pub fn total_se(
    tx: &ArrayTopology,
    rx: &ArrayTopology,
    cfg: &LinkConfig,
    plan: &TransceiverPlan,
    method: Method,
) -> Result<SeReport, TransceiverError> {
    Ok(SeModel::new(tx, rx, cfg, plan, method)?.report(cfg.noise_power, 1.0))
}

/// SE of a topology linked to itself with the equal-power plan.
pub fn symmetric_se(topology: &ArrayTopology, cfg: &LinkConfig, method: Method) -> Result<SeReport, TransceiverError> {
    let plan = TransceiverPlan::for_link(topology, topology, cfg.power_budget)?;
    total_se(topology, topology, cfg, &plan, method)
}

/// One curve: metric values over an axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub label: String,
    pub axis: Vec<f64>,
    pub values: Vec<f64>,
    pub seed: Option<u64>,
}

/// SE against transmit SNR `P_max/σ²` (dB) for each topology linked to itself.
pub fn se_vs_snr(
    topologies: &[(String, ArrayTopology)],
    cfg: &LinkConfig,
    snr_grid_db: &[f64],
    method: Method,
) -> Result<Vec<SweepResult>, TransceiverError> {
    topologies
        .par_iter()
        .map(|(label, topo)| {
            let plan = TransceiverPlan::for_link(topo, topo, cfg.power_budget)?;
            let model = SeModel::new(topo, topo, cfg, &plan, method)?;
            let values = snr_grid_db
                .iter()
                .map(|&snr| model.report(cfg.with_snr_db(snr).noise_power, 1.0).total_bps)
                .collect();
            Ok(SweepResult {
                label: label.clone(),
                axis: snr_grid_db.to_vec(),
                values,
                seed: None,
            })
        })
        .collect()
}

/// SE over a `(distance, aperture)` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeSurface {
    pub label: String,
    pub distances: Vec<f64>,
    pub radii: Vec<f64>,
    /// Distance-major: `values[i·radii.len() + j]` is at `(distances[i], radii[j])`.
    pub values: Vec<f64>,
}

impl SeSurface {
    pub fn at(&self, di: usize, ri: usize) -> f64 {
        self.values[di * self.radii.len() + ri]
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SurfaceError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Transceiver(#[from] TransceiverError),
    #[error("grid must be non-empty, positive and ascending")]
    Grid,
}

/// `build(R_E)` yields the topology at aperture `R_E`; SE is evaluated for
/// the topology linked to itself at every `(d, R_E)`.
pub fn se_surface<F>(
    label: &str,
    build: F,
    cfg: &LinkConfig,
    distance_grid: &[f64],
    radius_grid: &[f64],
    method: Method,
) -> Result<SeSurface, SurfaceError>
where
    F: Fn(f64) -> Result<ArrayTopology, GeometryError> + Sync,
{
    let ok = |g: &[f64]| !g.is_empty() && g.iter().all(|v| *v > 0.0 && v.is_finite()) && g.windows(2).all(|w| w[0] < w[1]);
    if !ok(distance_grid) || !ok(radius_grid) {
        return Err(SurfaceError::Grid);
    }
    let cells: Vec<(f64, f64)> = distance_grid
        .iter()
        .flat_map(|&d| radius_grid.iter().map(move |&r| (d, r)))
        .collect();
    let values = cells
        .par_iter()
        .map(|&(d, r)| -> Result<f64, SurfaceError> {
            let topo = build(r)?;
            let mut c = *cfg;
            c.distance = d;
            c.aperture = r;
            Ok(symmetric_se(&topo, &c, method)?.total_bps)
        })
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(SeSurface {
        label: label.to_string(),
        distances: distance_grid.to_vec(),
        radii: radius_grid.to_vec(),
        values,
    })
}

/// Bit error counts at one SNR point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitCount {
    pub errors: u64,
    pub bits: u64,
}

impl BitCount {
    pub fn rate(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.errors as f64 / self.bits as f64
        }
    }
}

/// Runs `frames` frames through `link`; frame `f` at grid point `point`
/// draws its data and noise from `frame_rng(seed, point, f)`, so counts do
/// not depend on thread scheduling. Streams of singular modes are decided
/// from a zero estimate. `noise == false` gives a noiseless run.
pub fn count_bit_errors(link: &Link, constellation: Constellation, frames: u64, seed: u64, point: u64, noise: bool) -> BitCount {
    let plan = link.plan();
    let bps = constellation.bits_per_symbol();
    let mask = ((1u16 << bps) - 1) as u8;
    (0..frames)
        .into_par_iter()
        .map(|f| {
            let mut rng = frame_rng(seed, point, f);
            let mut frame = SymbolFrame::zeros(plan.ring_count, &plan.modes);
            let mut sent = Vec::with_capacity(frame.symbols.len());
            for z in &mut frame.symbols {
                let b: u8 = rng.random::<u8>() & mask;
                sent.push(b);
                *z = constellation.map(b);
            }
            let est = if noise {
                link.run(&frame, Some(&mut rng))
            } else {
                link.run::<rand_chacha::ChaCha8Rng>(&frame, None)
            }
            .expect("frame matches plan");
            let mut errors = 0u64;
            for (b, e) in sent.iter().zip(est) {
                let got = constellation.demap(e.unwrap_or_default());
                errors += u64::from((b ^ got).count_ones());
            }
            BitCount { errors, bits: (sent.len() * bps) as u64 }
        })
        .reduce(BitCount::default, |a, b| BitCount {
            errors: a.errors + b.errors,
            bits: a.bits + b.bits,
        })
}

/// Monte-Carlo BER against transmit SNR, averaged over all streams and modes.
#[allow(clippy::too_many_arguments)]
pub fn ber_monte_carlo(
    label: &str,
    tx: &ArrayTopology,
    rx: &ArrayTopology,
    cfg: &LinkConfig,
    plan: &TransceiverPlan,
    snr_grid_db: &[f64],
    frames_per_point: u64,
    seed: u64,
    constellation: Constellation,
) -> Result<SweepResult, TransceiverError> {
    if frames_per_point == 0 {
        return Err(TransceiverError::Plan("frames_per_point must be at least 1".into()));
    }
    let mut link = Link::new(tx, rx, cfg, plan, Method::Discrete)?;
    let mut values = Vec::with_capacity(snr_grid_db.len());
    for (p, &snr) in snr_grid_db.iter().enumerate() {
        link.set_noise_power(cfg.with_snr_db(snr).noise_power);
        values.push(count_bit_errors(&link, constellation, frames_per_point, seed, p as u64, true).rate());
    }
    Ok(SweepResult {
        label: label.to_string(),
        axis: snr_grid_db.to_vec(),
        values,
        seed: Some(seed),
    })
}
