//! Free-space line-of-sight channels between coaxial arrays and the per-mode
//! effective channel matrices seen after OAM modulation and spatial-DFT
//! demodulation.
//!
//! The transmit array lies in the plane `z = 0` and the receive array in the
//! plane `z = d`; the planar coordinates of each topology are used as-is.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    fuca_projection, ArrayTopology, Family, Point, Ring, DEFAULT_CARRIER_HZ, DEFAULT_MIN_SPACING, SPEED_OF_LIGHT,
};
use crate::numerics::{bessel_j, ComplexMatrix, NumericError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("invalid link configuration: {0}")]
    Config(String),
    #[error("coincident transmit and receive points")]
    Coincident,
    #[error("incompatible topologies: {0}")]
    Incompatible(String),
    #[error("mode {mode} outside the supported range for {elements} elements per ring")]
    ModeRange { mode: i32, elements: usize },
}

/// Physical link parameters. `Default` gives the reference simulation setup.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    /// Transmit-receive plane separation (m).
    pub distance: f64,
    /// Carrier frequency (Hz).
    pub carrier_hz: f64,
    /// Dimensionless path-loss constant.
    pub beta: f64,
    /// Per receive element noise power (W).
    pub noise_power: f64,
    /// Total transmit power budget (W).
    pub power_budget: f64,
    /// Bandwidth (Hz).
    pub bandwidth: f64,
    /// Minimum element spacing (m).
    pub min_spacing: f64,
    /// Aperture radius of the moving region (m).
    pub aperture: f64,
    /// Number of RF chains. Stored only.
    pub rf_chain_budget: usize,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            distance: 100.0,
            carrier_hz: DEFAULT_CARRIER_HZ,
            beta: 4.0 * PI,
            noise_power: 0.01,
            power_budget: 1.0,
            bandwidth: 10e6,
            min_spacing: DEFAULT_MIN_SPACING,
            aperture: 2.0,
            rf_chain_budget: 64,
        }
    }
}

impl LinkConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Free-space wavenumber κ₀ = 2π/λ.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength()
    }

    /// Transmit SNR `P_max/σ²` in dB.
    pub fn snr_db(&self) -> f64 {
        10.0 * (self.power_budget / self.noise_power).log10()
    }

    /// Copy with the noise power set so that `P_max/σ²` equals `snr_db`.
    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        self.noise_power = self.power_budget / 10f64.powf(snr_db / 10.0);
        self
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let fields = [
            ("distance", self.distance),
            ("carrier_hz", self.carrier_hz),
            ("beta", self.beta),
            ("noise_power", self.noise_power),
            ("bandwidth", self.bandwidth),
            ("min_spacing", self.min_spacing),
            ("aperture", self.aperture),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ChannelError::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.power_budget >= 0.0) || !self.power_budget.is_finite() {
            return Err(ChannelError::Config(format!(
                "power_budget must be non-negative, got {}",
                self.power_budget
            )));
        }
        if self.rf_chain_budget == 0 {
            return Err(ChannelError::Config("rf_chain_budget must be positive".into()));
        }
        Ok(())
    }
}

/// OAM mode set `{1 − K/2, …, K/2}` for `K` elements per ring.
pub fn mode_set(k: usize) -> Vec<i32> {
    let half = (k / 2) as i32;
    (1 - half..=half).collect()
}

/// `β·e^{−jκ₀dₑ}/(2κ₀dₑ)` with `dₑ` the exact distance between the points.
pub fn exact_element_channel(tx: Point, rx: Point, cfg: &LinkConfig) -> Result<Complex64, ChannelError> {
    let de = ((rx[0] - tx[0]).powi(2) + (rx[1] - tx[1]).powi(2) + (rx[2] - tx[2]).powi(2)).sqrt();
    if de == 0.0 {
        return Err(ChannelError::Coincident);
    }
    Ok(distance_channel(de, cfg.beta, cfg.wavenumber()))
}

fn distance_channel(de: f64, beta: f64, k0: f64) -> Complex64 {
    Complex64::from_polar(beta / (2.0 * k0 * de), -k0 * de)
}

/// Paraxial distance between a receive point at `(r_rx, θ)` and a transmit
/// point at `(r_tx, φ)` on planes `d` apart.
pub fn approx_ring_distance(r_rx: f64, r_tx: f64, theta: f64, phi: f64, d: f64) -> f64 {
    let s = (d * d + r_rx * r_rx + r_tx * r_tx).sqrt();
    s - r_rx * r_tx * (theta - phi).cos() / s
}

/// Element-level channel, receive elements × transmit elements, ring-major.
pub fn full_element_matrix(tx: &ArrayTopology, rx: &ArrayTopology, cfg: &LinkConfig) -> Result<ComplexMatrix, ChannelError> {
    let k0 = cfg.wavenumber();
    let tp = tx.element_positions();
    let rp = rx.element_positions();
    let d = cfg.distance;
    let mut out = ComplexMatrix::zeros(rp.len(), tp.len());
    for (i, r) in rp.iter().enumerate() {
        for (j, t) in tp.iter().enumerate() {
            let de = ((r[0] - t[0]).powi(2) + (r[1] - t[1]).powi(2) + d * d).sqrt();
            if de == 0.0 {
                return Err(ChannelError::Coincident);
            }
            out[(i, j)] = distance_channel(de, cfg.beta, k0);
        }
    }
    Ok(out)
}

fn j_pow(l: i32) -> Complex64 {
    match l.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Closed-form mode gain between two coaxial rings of radii `r_rx`, `r_tx`,
/// with `k` transmit elements.
pub fn ring_mode_gain(r_rx: f64, r_tx: f64, k: usize, l: i32, cfg: &LinkConfig) -> Result<Complex64, ChannelError> {
    let k0 = cfg.wavenumber();
    let d = cfg.distance;
    let s = (d * d + r_rx * r_rx + r_tx * r_tx).sqrt();
    let amp = cfg.beta * (k as f64).sqrt() / (2.0 * k0 * d);
    let bessel = bessel_j(l, k0 * r_rx * r_tx / s)?;
    Ok(j_pow(l) * Complex64::from_polar(amp * bessel, -k0 * s))
}

/// Closed-form gain for mode `l` from transmit ring `n` to receive ring `m`
/// of coaxial UCA/CUCA arrays.
pub fn mode_gain_cuca(
    m: usize,
    n: usize,
    l: i32,
    tx: &ArrayTopology,
    rx: &ArrayTopology,
    cfg: &LinkConfig,
) -> Result<Complex64, ChannelError> {
    let (tr, rr) = ring_pair(tx, rx)?;
    if !matches!(tx.family(), Family::Uca | Family::Cuca) {
        return Err(ChannelError::Incompatible(format!("{} is not a concentric array", tx.family())));
    }
    let (t, r) = index_rings(&tr, &rr, n, m)?;
    check_mode(l, t.element_count)?;
    ring_mode_gain(r.radius, t.radius, t.element_count, l, cfg)
}

/// Closed-form contribution of receive element `v` of sub-array `m` to the
/// mode-`l` gain from transmit sub-array `n`, measured on the virtual ring
/// around the projected transmit center. Includes the phase offset between
/// the virtual azimuth and the element's own demodulation azimuth, so that
/// the mean over `v` is the effective sub-array gain.
pub fn mode_gain_fuca(
    m: usize,
    n: usize,
    v: usize,
    l: i32,
    tx: &ArrayTopology,
    rx: &ArrayTopology,
    cfg: &LinkConfig,
) -> Result<Complex64, ChannelError> {
    let (st, sr) = match (tx.fuca_spec(), rx.fuca_spec()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(ChannelError::Incompatible("fractal gain needs two FUCA topologies".into())),
    };
    if n >= st.subarray_count || m >= sr.subarray_count || v >= sr.elements_per_subarray {
        return Err(ChannelError::Incompatible(format!("index (m={m}, n={n}, v={v}) out of range")));
    }
    check_mode(l, st.elements_per_subarray)?;
    let g = fuca_projection(st, sr, n, m, v);
    let base = ring_mode_gain(g.virtual_radius, st.secondary_radius, st.elements_per_subarray, l, cfg)?;
    let theta = sr.element_azimuth(m, v);
    Ok(base * Complex64::from_polar(1.0, (g.virtual_azimuth - theta) * l as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Closed-form Bessel model.
    Analytic,
    /// Exact modulate, propagate, demodulate composition.
    Discrete,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Analytic => "analytic",
            Method::Discrete => "discrete",
        }
    }
}

fn ring_pair(tx: &ArrayTopology, rx: &ArrayTopology) -> Result<(Vec<Ring>, Vec<Ring>), ChannelError> {
    let fam = |f: Family| match f {
        Family::Uca | Family::Cuca => Some(0),
        Family::Fuca => Some(1),
        _ => None,
    };
    match (fam(tx.family()), fam(rx.family())) {
        (Some(a), Some(b)) if a == b => {}
        _ => {
            return Err(ChannelError::Incompatible(format!(
                "mode channels need matching UCA/CUCA or FUCA arrays, got {} and {}",
                tx.family(),
                rx.family()
            )))
        }
    }
    let tr = tx.rings().expect("ring-structured family");
    let rr = rx.rings().expect("ring-structured family");
    for rings in [&tr, &rr] {
        let k = rings[0].element_count;
        if rings.iter().any(|r| r.element_count != k) {
            return Err(ChannelError::Incompatible("rings must share a common element count".into()));
        }
    }
    Ok((tr, rr))
}

fn index_rings<'a>(tr: &'a [Ring], rr: &'a [Ring], n: usize, m: usize) -> Result<(&'a Ring, &'a Ring), ChannelError> {
    match (tr.get(n), rr.get(m)) {
        (Some(t), Some(r)) => Ok((t, r)),
        _ => Err(ChannelError::Incompatible(format!("ring index (m={m}, n={n}) out of range"))),
    }
}

fn check_mode(l: i32, k: usize) -> Result<(), ChannelError> {
    if l.unsigned_abs() as usize > k / 2 {
        return Err(ChannelError::ModeRange { mode: l, elements: k });
    }
    Ok(())
}

/// Per-mode effective channels for one transmit/receive pair. The element
/// matrix is computed once and reused across modes.
pub struct ModeChannels<'a> {
    tx: &'a ArrayTopology,
    rx: &'a ArrayTopology,
    cfg: LinkConfig,
    tx_rings: Vec<Ring>,
    rx_rings: Vec<Ring>,
    elements: Option<ComplexMatrix>,
}

impl<'a> ModeChannels<'a> {
    pub fn new(tx: &'a ArrayTopology, rx: &'a ArrayTopology, cfg: &LinkConfig) -> Result<Self, ChannelError> {
        cfg.validate()?;
        let (tx_rings, rx_rings) = ring_pair(tx, rx)?;
        Ok(Self { tx, rx, cfg: *cfg, tx_rings, rx_rings, elements: None })
    }

    pub fn tx_elements_per_ring(&self) -> usize {
        self.tx_rings[0].element_count
    }

    pub fn rx_elements_per_ring(&self) -> usize {
        self.rx_rings[0].element_count
    }

    pub fn tx_ring_count(&self) -> usize {
        self.tx_rings.len()
    }

    pub fn rx_ring_count(&self) -> usize {
        self.rx_rings.len()
    }

    fn element_matrix(&mut self) -> Result<&ComplexMatrix, ChannelError> {
        if self.elements.is_none() {
            self.elements = Some(full_element_matrix(self.tx, self.rx, &self.cfg)?);
        }
        Ok(self.elements.as_ref().expect("just computed"))
    }

    fn check_modes(&self, target: i32, source: i32) -> Result<(), ChannelError> {
        check_mode(source, self.tx_elements_per_ring())?;
        check_mode(target, self.rx_elements_per_ring())
    }

    /// Gain from source mode `source` on the transmit rings to demodulated
    /// mode `target` on the receive rings, exact element channels.
    pub fn discrete_coupling(&mut self, target: i32, source: i32) -> Result<ComplexMatrix, ChannelError> {
        self.check_modes(target, source)?;
        let k = self.tx_elements_per_ring();
        let v_count = self.rx_elements_per_ring();
        let tx_w: Vec<Vec<Complex64>> = self
            .tx_rings
            .iter()
            .map(|r| {
                (0..k)
                    .map(|i| Complex64::from_polar(1.0 / (k as f64).sqrt(), r.element_azimuth(i) * source as f64))
                    .collect()
            })
            .collect();
        let rx_w: Vec<Vec<Complex64>> = self
            .rx_rings
            .iter()
            .map(|r| {
                (0..v_count)
                    .map(|v| Complex64::from_polar(1.0 / v_count as f64, -r.element_azimuth(v) * target as f64))
                    .collect()
            })
            .collect();
        let (mc, nc) = (self.rx_ring_count(), self.tx_ring_count());
        let h = self.element_matrix()?;
        let mut out = ComplexMatrix::zeros(mc, nc);
        for m in 0..mc {
            for n in 0..nc {
                let mut acc = Complex64::new(0.0, 0.0);
                for (v, wv) in rx_w[m].iter().enumerate() {
                    let row = h.row(m * v_count + v);
                    let mut inner = Complex64::new(0.0, 0.0);
                    for (kk, wk) in tx_w[n].iter().enumerate() {
                        inner += row[n * k + kk] * wk;
                    }
                    acc += inner * wv;
                }
                out[(m, n)] = acc;
            }
        }
        Ok(out)
    }

    pub fn analytic(&self, l: i32) -> Result<ComplexMatrix, ChannelError> {
        self.check_modes(l, l)?;
        let (mc, nc) = (self.rx_ring_count(), self.tx_ring_count());
        let mut out = ComplexMatrix::zeros(mc, nc);
        if self.tx.family() == Family::Fuca {
            let v_count = self.rx_elements_per_ring();
            for m in 0..mc {
                for n in 0..nc {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for v in 0..v_count {
                        acc += mode_gain_fuca(m, n, v, l, self.tx, self.rx, &self.cfg)?;
                    }
                    out[(m, n)] = acc / v_count as f64;
                }
            }
        } else {
            let k = self.tx_elements_per_ring();
            for m in 0..mc {
                for n in 0..nc {
                    out[(m, n)] = ring_mode_gain(self.rx_rings[m].radius, self.tx_rings[n].radius, k, l, &self.cfg)?;
                }
            }
        }
        Ok(out)
    }

    pub fn matrix(&mut self, l: i32, method: Method) -> Result<ComplexMatrix, ChannelError> {
        match method {
            Method::Analytic => self.analytic(l),
            Method::Discrete => self.discrete_coupling(l, l),
        }
    }
}

/// Effective `M × N` channel of mode `l`.
pub fn mode_channel_matrix(
    tx: &ArrayTopology,
    rx: &ArrayTopology,
    l: i32,
    cfg: &LinkConfig,
    method: Method,
) -> Result<ComplexMatrix, ChannelError> {
    ModeChannels::new(tx, rx, cfg)?.matrix(l, method)
}

/// Cross-mode leakage tensor over `modes`, discrete model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeCoupling {
    pub modes: Vec<i32>,
    /// Row-major over (target index, source index).
    pub blocks: Vec<ComplexMatrix>,
}

impl ModeCoupling {
    pub fn block(&self, target: usize, source: usize) -> &ComplexMatrix {
        &self.blocks[target * self.modes.len() + source]
    }

    /// Largest off-diagonal magnitude relative to the largest diagonal magnitude.
    pub fn max_leakage_ratio(&self) -> f64 {
        let nm = self.modes.len();
        let mut diag = 0.0f64;
        let mut off = 0.0f64;
        for t in 0..nm {
            for s in 0..nm {
                let a = self.block(t, s).max_abs();
                if t == s {
                    diag = diag.max(a);
                } else {
                    off = off.max(a);
                }
            }
        }
        if diag == 0.0 {
            return if off == 0.0 { 0.0 } else { f64::INFINITY };
        }
        off / diag
    }
}

pub fn mode_coupling(tx: &ArrayTopology, rx: &ArrayTopology, cfg: &LinkConfig, modes: &[i32]) -> Result<ModeCoupling, ChannelError> {
    let mut ch = ModeChannels::new(tx, rx, cfg)?;
    let mut blocks = Vec::with_capacity(modes.len() * modes.len());
    for &t in modes {
        for &s in modes {
            blocks.push(ch.discrete_coupling(t, s)?);
        }
    }
    Ok(ModeCoupling { modes: modes.to_vec(), blocks })
}

/// Channel dump with header `mode,m,n,re,im,method`, one row per entry.
pub fn write_mode_matrices_csv<W: Write>(mut out: W, method: Method, matrices: &[(i32, ComplexMatrix)]) -> io::Result<()> {
    writeln!(out, "mode,m,n,re,im,method")?;
    for (l, h) in matrices {
        for m in 0..h.rows() {
            for n in 0..h.cols() {
                let z = h[(m, n)];
                writeln!(out, "{l},{m},{n},{},{},{}", z.re, z.im, method.as_str())?;
            }
        }
    }
    Ok(())
}

impl ModeCoupling {
    /// Leakage dump with header `l_target,l_source,m,n,abs`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "l_target,l_source,m,n,abs")?;
        for (t, lt) in self.modes.iter().enumerate() {
            for (s, ls) in self.modes.iter().enumerate() {
                let b = self.block(t, s);
                for m in 0..b.rows() {
                    for n in 0..b.cols() {
                        writeln!(out, "{lt},{ls},{m},{n},{}", b[(m, n)].norm())?;
                    }
                }
            }
        }
        Ok(())
    }
}
