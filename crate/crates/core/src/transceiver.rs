//! OAM modulation per ring, spatial-DFT demodulation, zero-forcing detection
//! and the composed noisy link.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{full_element_matrix, mode_set, ChannelError, LinkConfig, Method, ModeChannels};
use crate::geometry::ArrayTopology;
use crate::numerics::{zf_pseudo_inverse, ComplexMatrix, NumericError};

const ROTATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransceiverError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("mode {mode} outside ±{limit}")]
    ModeRange { mode: i32, limit: usize },
}

/// Modes, rotations and per-(ring, mode) power for one link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransceiverPlan {
    pub modes: Vec<i32>,
    pub ring_count: usize,
    pub elements_per_ring: usize,
    /// Ring `n` (0-based) is rotated by `(n + 1)·tx_rotation`.
    pub tx_rotation: f64,
    pub rx_rotation: f64,
    /// Watts per stream, ring-major over `(ring, mode index)`.
    pub allocation: Vec<f64>,
}

impl TransceiverPlan {
    /// Full mode set with the power budget split equally over all streams.
    pub fn equal_power(ring_count: usize, elements_per_ring: usize, power_budget: f64) -> Self {
        let modes = mode_set(elements_per_ring);
        let streams = ring_count * modes.len();
        let p = if streams == 0 { 0.0 } else { power_budget / streams as f64 };
        Self {
            modes,
            ring_count,
            elements_per_ring,
            tx_rotation: 0.0,
            rx_rotation: 0.0,
            allocation: vec![p; streams],
        }
    }

    /// Equal-power plan matching the ring structure and rotations of `tx` and `rx`.
    pub fn for_link(tx: &ArrayTopology, rx: &ArrayTopology, power_budget: f64) -> Result<Self, TransceiverError> {
        let (n, k, st) = ring_structure(tx)?;
        let (m, v, sr) = ring_structure(rx)?;
        if (n, k) != (m, v) {
            return Err(TransceiverError::Plan(format!(
                "transmit {n}x{k} and receive {m}x{v} ring structures differ"
            )));
        }
        let mut plan = Self::equal_power(n, k, power_budget);
        plan.tx_rotation = st;
        plan.rx_rotation = sr;
        Ok(plan)
    }

    pub fn stream_count(&self) -> usize {
        self.ring_count * self.modes.len()
    }

    pub fn power(&self, ring: usize, mode_index: usize) -> f64 {
        self.allocation[ring * self.modes.len() + mode_index]
    }

    pub fn total_power(&self) -> f64 {
        self.allocation.iter().sum()
    }

    pub fn validate(&self, power_budget: f64) -> Result<(), TransceiverError> {
        let k = self.elements_per_ring;
        if k < 4 || k % 2 != 0 {
            return Err(TransceiverError::Plan(format!("elements per ring must be even and >= 4, got {k}")));
        }
        for &l in &self.modes {
            if l < 1 - (k / 2) as i32 || l > (k / 2) as i32 {
                return Err(TransceiverError::ModeRange { mode: l, limit: k / 2 });
            }
        }
        let mut sorted = self.modes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.modes.len() {
            return Err(TransceiverError::Plan("duplicate modes".into()));
        }
        if self.allocation.len() != self.stream_count() {
            return Err(TransceiverError::Dimension(format!(
                "{} allocations for {} streams",
                self.allocation.len(),
                self.stream_count()
            )));
        }
        if self.allocation.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(TransceiverError::Plan("allocations must be finite and non-negative".into()));
        }
        if self.total_power() > power_budget * (1.0 + 1e-12) + 1e-15 {
            return Err(TransceiverError::Plan(format!(
                "allocated {} W exceeds budget {} W",
                self.total_power(),
                power_budget
            )));
        }
        Ok(())
    }

    fn tx_azimuth(&self, ring: usize, k: usize) -> f64 {
        element_azimuth(self.elements_per_ring, ring, k, self.tx_rotation)
    }
}

fn element_azimuth(k_count: usize, ring: usize, k: usize, sigma: f64) -> f64 {
    2.0 * PI * k as f64 / k_count as f64 + (ring + 1) as f64 * sigma
}

/// `(rings, elements per ring, rotation step)`; rejects per-ring element
/// counts and rotations that are not multiples of one step.
fn ring_structure(topo: &ArrayTopology) -> Result<(usize, usize, f64), TransceiverError> {
    let rings = topo
        .rings()
        .ok_or_else(|| TransceiverError::Plan(format!("{} carries no ring structure", topo.family())))?;
    let k = rings[0].element_count;
    if rings.iter().any(|r| r.element_count != k) {
        return Err(TransceiverError::Plan("all rings must carry the same element count".into()));
    }
    let sigma = rings[0].rotation;
    for (n, r) in rings.iter().enumerate() {
        if (r.rotation - (n + 1) as f64 * sigma).abs() > ROTATION_TOL {
            return Err(TransceiverError::Plan(format!(
                "ring {n} rotation {} is not {}·{sigma}",
                r.rotation,
                n + 1
            )));
        }
    }
    Ok((rings.len(), k, sigma))
}

/// `K × K` matrix whose column for mode `l` (ordered `1 − K/2 … K/2`) holds
/// `e^{jlφ_k}` over the elements of ring `ring` (0-based).
pub fn modulation_matrix(k: usize, ring: usize, sigma_t: f64) -> Result<ComplexMatrix, TransceiverError> {
    if k < 4 || k % 2 != 0 {
        return Err(TransceiverError::Plan(format!("K must be even and >= 4, got {k}")));
    }
    let modes = mode_set(k);
    Ok(ComplexMatrix::from_fn(k, k, |row, col| {
        Complex64::from_polar(1.0, modes[col] as f64 * element_azimuth(k, ring, row, sigma_t))
    }))
}

/// Data symbols indexed by `(ring, mode index)`, ring-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolFrame {
    pub ring_count: usize,
    pub modes: Vec<i32>,
    pub symbols: Vec<Complex64>,
}

impl SymbolFrame {
    pub fn zeros(ring_count: usize, modes: &[i32]) -> Self {
        Self {
            ring_count,
            modes: modes.to_vec(),
            symbols: vec![Complex64::new(0.0, 0.0); ring_count * modes.len()],
        }
    }

    pub fn get(&self, ring: usize, mode_index: usize) -> Complex64 {
        self.symbols[ring * self.modes.len() + mode_index]
    }

    pub fn set(&mut self, ring: usize, mode_index: usize, z: Complex64) {
        let w = self.modes.len();
        self.symbols[ring * w + mode_index] = z;
    }

    /// Debug dump with header `ring,mode,re,im`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "ring,mode,re,im")?;
        for n in 0..self.ring_count {
            for (i, l) in self.modes.iter().enumerate() {
                let z = self.get(n, i);
                writeln!(out, "{n},{l},{},{}", z.re, z.im)?;
            }
        }
        Ok(())
    }
}

fn check_frame(frame: &SymbolFrame, plan: &TransceiverPlan) -> Result<(), TransceiverError> {
    if frame.ring_count != plan.ring_count || frame.modes != plan.modes || frame.symbols.len() != plan.stream_count() {
        return Err(TransceiverError::Dimension(format!(
            "frame {}x{} does not match plan {}x{}",
            frame.ring_count,
            frame.modes.len(),
            plan.ring_count,
            plan.modes.len()
        )));
    }
    Ok(())
}

/// Element excitations `x_{n,k} = Σ_l √(p_{n,l}/K)·s_{n,l}·e^{jlφ_{n,k}}`, ring-major.
pub fn modulate(frame: &SymbolFrame, plan: &TransceiverPlan) -> Result<Vec<Complex64>, TransceiverError> {
    check_frame(frame, plan)?;
    let k = plan.elements_per_ring;
    let norm = 1.0 / (k as f64).sqrt();
    let mut x = vec![Complex64::new(0.0, 0.0); plan.ring_count * k];
    for n in 0..plan.ring_count {
        for kk in 0..k {
            let phi = plan.tx_azimuth(n, kk);
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, &l) in plan.modes.iter().enumerate() {
                let amp = norm * plan.power(n, i).sqrt();
                acc += frame.get(n, i) * Complex64::from_polar(amp, l as f64 * phi);
            }
            x[n * k + kk] = acc;
        }
    }
    Ok(x)
}

/// `r_l = (1/V)·Σ_v r_v·e^{−jlθ_v}` over the `V` samples of receive ring `ring`.
pub fn demodulate(samples: &[Complex64], ring: usize, sigma_r: f64, modes: &[i32]) -> Result<Vec<Complex64>, TransceiverError> {
    let v_count = samples.len();
    if v_count == 0 || v_count % 2 != 0 {
        return Err(TransceiverError::Dimension(format!("V must be even and positive, got {v_count}")));
    }
    modes
        .iter()
        .map(|&l| {
            if l.unsigned_abs() as usize > v_count / 2 {
                return Err(TransceiverError::ModeRange { mode: l, limit: v_count / 2 });
            }
            let acc: Complex64 = samples
                .iter()
                .enumerate()
                .map(|(v, r)| r * Complex64::from_polar(1.0, -(l as f64) * element_azimuth(v_count, ring, v, sigma_r)))
                .sum();
            Ok(acc / v_count as f64)
        })
        .collect()
}

/// `(HᴴH)⁻¹Hᴴ·r`.
pub fn zf_detect(h: &ComplexMatrix, r: &[Complex64]) -> Result<Vec<Complex64>, TransceiverError> {
    if r.len() != h.rows() {
        return Err(TransceiverError::Dimension(format!("{} samples for {} receive rings", r.len(), h.rows())));
    }
    Ok(zf_pseudo_inverse(h)?.mul_vec(r))
}

/// Key for the noise generator of one Monte-Carlo frame.
pub fn frame_rng(seed: u64, point: u64, frame: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&point.to_le_bytes());
    key[16..24].copy_from_slice(&frame.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Circularly symmetric complex Gaussian sample of variance `var`.
pub fn complex_gaussian<R: rand::Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Precomputed link: element channel, per-mode ZF detectors. Modes whose
/// effective channel is singular have no detector.
pub struct Link {
    plan: TransceiverPlan,
    elements: ComplexMatrix,
    detectors: Vec<Result<ComplexMatrix, NumericError>>,
    mode_matrices: Vec<ComplexMatrix>,
    rx_per_ring: usize,
    noise_power: f64,
    // e^{jlφ}·√(p/K) per (tx element, mode index)
    tx_table: Vec<Complex64>,
    // e^{−jlθ}/V per (rx ring, mode index, element)
    rx_table: Vec<Complex64>,
}

impl Link {
    pub fn new(
        tx: &ArrayTopology,
        rx: &ArrayTopology,
        cfg: &LinkConfig,
        plan: &TransceiverPlan,
        method: Method,
    ) -> Result<Self, TransceiverError> {
        plan.validate(cfg.power_budget)?;
        let (n, k, _) = ring_structure(tx)?;
        let (m, v, _) = ring_structure(rx)?;
        if n != plan.ring_count || k != plan.elements_per_ring {
            return Err(TransceiverError::Dimension(format!(
                "plan {}x{} does not match transmit array {n}x{k}",
                plan.ring_count, plan.elements_per_ring
            )));
        }
        if m < n {
            return Err(TransceiverError::Dimension(format!("{m} receive rings cannot separate {n} streams")));
        }
        for &l in &plan.modes {
            if l.unsigned_abs() as usize > v / 2 {
                return Err(TransceiverError::ModeRange { mode: l, limit: v / 2 });
            }
        }
        let elements = full_element_matrix(tx, rx, cfg)?;
        let mut ch = ModeChannels::new(tx, rx, cfg)?;
        let mut detectors = Vec::with_capacity(plan.modes.len());
        let mut mode_matrices = Vec::with_capacity(plan.modes.len());
        for &l in &plan.modes {
            let h = ch.matrix(l, method)?;
            detectors.push(match zf_pseudo_inverse(&h) {
                Err(e @ NumericError::Singular { .. }) => Err(e),
                other => Ok(other?),
            });
            mode_matrices.push(h);
        }
        let lcount = plan.modes.len();
        let mut tx_table = Vec::with_capacity(n * k * lcount);
        for ring in 0..n {
            for kk in 0..k {
                let phi = plan.tx_azimuth(ring, kk);
                for (i, &l) in plan.modes.iter().enumerate() {
                    let amp = (plan.power(ring, i) / k as f64).sqrt();
                    tx_table.push(Complex64::from_polar(amp, l as f64 * phi));
                }
            }
        }
        let mut rx_table = Vec::with_capacity(m * lcount * v);
        for ring in 0..m {
            for &l in &plan.modes {
                for vv in 0..v {
                    let theta = element_azimuth(v, ring, vv, plan.rx_rotation);
                    rx_table.push(Complex64::from_polar(1.0 / v as f64, -(l as f64) * theta));
                }
            }
        }
        Ok(Self {
            plan: plan.clone(),
            elements,
            detectors,
            mode_matrices,
            rx_per_ring: v,
            noise_power: cfg.noise_power,
            tx_table,
            rx_table,
        })
    }

    pub fn plan(&self) -> &TransceiverPlan {
        &self.plan
    }

    pub fn mode_matrix(&self, mode_index: usize) -> &ComplexMatrix {
        &self.mode_matrices[mode_index]
    }

    pub fn is_singular(&self, mode_index: usize) -> bool {
        self.detectors[mode_index].is_err()
    }

    /// The singularity error of the first mode without a detector, if any.
    pub fn first_singular(&self) -> Option<NumericError> {
        self.detectors.iter().find_map(|d| d.as_ref().err().cloned())
    }

    /// Per receive element samples, with optional noise.
    pub fn propagate<R: rand::Rng + ?Sized>(&self, x: &[Complex64], noise: Option<&mut R>) -> Vec<Complex64> {
        let mut y = self.elements.mul_vec(x);
        if let Some(rng) = noise {
            for s in &mut y {
                *s += complex_gaussian(rng, self.noise_power);
            }
        }
        y
    }

    /// Replaces the per-element noise power used by [`Link::propagate`].
    pub fn set_noise_power(&mut self, noise_power: f64) {
        self.noise_power = noise_power;
    }

    /// Same map as [`modulate`] with precomputed phases.
    pub fn modulate(&self, frame: &SymbolFrame) -> Result<Vec<Complex64>, TransceiverError> {
        check_frame(frame, &self.plan)?;
        let lcount = self.plan.modes.len();
        let k = self.plan.elements_per_ring;
        Ok(self
            .tx_table
            .chunks_exact(lcount)
            .enumerate()
            .map(|(e, row)| {
                let ring = e / k;
                row.iter().enumerate().map(|(i, w)| w * frame.get(ring, i)).sum()
            })
            .collect())
    }

    /// Demodulated samples `r_{m,l}`, ring-major over receive rings.
    pub fn demodulate(&self, y: &[Complex64]) -> Vec<Complex64> {
        let v = self.rx_per_ring;
        let lcount = self.plan.modes.len();
        self.rx_table
            .chunks_exact(v)
            .enumerate()
            .map(|(idx, w)| {
                let ring = idx / lcount;
                w.iter().zip(&y[ring * v..(ring + 1) * v]).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// ZF outputs per stream (power-scaled), `None` for streams of singular modes.
    pub fn detect(&self, y: &[Complex64]) -> Vec<Option<Complex64>> {
        let lcount = self.plan.modes.len();
        let demod = self.demodulate(y);
        let m_count = demod.len() / lcount;
        let mut out = vec![None; self.plan.stream_count()];
        let mut r = vec![Complex64::new(0.0, 0.0); m_count];
        for (i, det) in self.detectors.iter().enumerate() {
            let Ok(g) = det else { continue };
            for (m, slot) in r.iter_mut().enumerate() {
                *slot = demod[m * lcount + i];
            }
            for (n, e) in g.mul_vec(&r).into_iter().enumerate() {
                out[n * lcount + i] = Some(e);
            }
        }
        out
    }

    pub fn run<R: rand::Rng + ?Sized>(&self, frame: &SymbolFrame, noise: Option<&mut R>) -> Result<Vec<Option<Complex64>>, TransceiverError> {
        let x = self.modulate(frame)?;
        let y = self.propagate(&x, noise);
        Ok(self.detect(&y))
    }
}

/// Outcome of one pass through the link.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    /// ZF output `√p·s + noise` per stream.
    pub scaled: SymbolFrame,
    /// `scaled / √p`; streams with zero power keep the raw ZF output.
    pub symbols: SymbolFrame,
}

/// Modulate, propagate over exact element channels, add `CN(0, σ²)` per
/// receive element when `noise_seed` is set, demodulate and zero-force each
/// mode with its discrete effective channel.
pub fn end_to_end(
    tx: &ArrayTopology,
    rx: &ArrayTopology,
    cfg: &LinkConfig,
    plan: &TransceiverPlan,
    frame: &SymbolFrame,
    noise_seed: Option<u64>,
) -> Result<Estimate, TransceiverError> {
    let link = Link::new(tx, rx, cfg, plan, Method::Discrete)?;
    if let Some(e) = link.first_singular() {
        return Err(e.into());
    }
    let out = match noise_seed {
        Some(seed) => link.run(frame, Some(&mut frame_rng(seed, 0, 0)))?,
        None => link.run::<ChaCha8Rng>(frame, None)?,
    };
    let mut scaled = SymbolFrame::zeros(plan.ring_count, &plan.modes);
    scaled.symbols = out.into_iter().map(|z| z.expect("all modes regular")).collect();
    let mut symbols = scaled.clone();
    for (z, p) in symbols.symbols.iter_mut().zip(&plan.allocation) {
        if *p > 0.0 {
            *z /= p.sqrt();
        }
    }
    Ok(Estimate { scaled, symbols })
}

/// Unit-energy Gray-mapped constellations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constellation {
    Qpsk,
    Qam16,
}

const QAM16_SCALE: f64 = 0.316_227_766_016_837_94; // 1/√10

impl Constellation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Constellation::Qpsk => 2,
            Constellation::Qam16 => 4,
        }
    }

    /// Maps the low `bits_per_symbol` bits of `bits` (first bit in the LSB).
    pub fn map(self, bits: u8) -> Complex64 {
        match self {
            Constellation::Qpsk => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let re = if bits & 1 == 0 { s } else { -s };
                let im = if bits & 2 == 0 { s } else { -s };
                Complex64::new(re, im)
            }
            Constellation::Qam16 => {
                let level = |b: u8| -> f64 {
                    // Gray: 00 → 3, 01 → 1, 11 → −1, 10 → −3
                    match b & 3 {
                        0b00 => 3.0,
                        0b01 => 1.0,
                        0b11 => -1.0,
                        _ => -3.0,
                    }
                };
                Complex64::new(level(bits) * QAM16_SCALE, level(bits >> 2) * QAM16_SCALE)
            }
        }
    }

    /// Minimum-distance decision, inverse of [`Constellation::map`].
    pub fn demap(self, z: Complex64) -> u8 {
        match self {
            Constellation::Qpsk => u8::from(z.re < 0.0) | (u8::from(z.im < 0.0) << 1),
            Constellation::Qam16 => {
                let slice = |x: f64| -> u8 {
                    let t = x / QAM16_SCALE;
                    if t >= 2.0 {
                        0b00
                    } else if t >= 0.0 {
                        0b01
                    } else if t >= -2.0 {
                        0b11
                    } else {
                        0b10
                    }
                };
                slice(z.re) | (slice(z.im) << 2)
            }
        }
    }
}
