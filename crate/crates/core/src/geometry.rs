//! Array topologies: construction, validation, element positions, and the
//! projection geometry between non-coaxial fractal sub-arrays.
//!
//! Element ordering is ring-major: all elements of ring (or sub-array, arm,
//! grid row) 0 first, then ring 1, and so on. Channel and beamforming matrices
//! index elements in exactly this order.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Default carrier (Hz).
pub const DEFAULT_CARRIER_HZ: f64 = 5.8e9;
/// Half a wavelength at the default carrier.
pub const DEFAULT_MIN_SPACING: f64 = SPEED_OF_LIGHT / DEFAULT_CARRIER_HZ / 2.0;

const GEOM_EPS: f64 = 1e-9;

pub type Point = [f64; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Uca,
    Cuca,
    Fuca,
    Ura,
    Rla,
    Spiral,
    QfucaLayout,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Uca => "uca",
            Family::Cuca => "cuca",
            Family::Fuca => "fuca",
            Family::Ura => "ura",
            Family::Rla => "rla",
            Family::Spiral => "spiral",
            Family::QfucaLayout => "qfuca_layout",
        }
    }

    /// Families that carry mode-multiplexed transmission.
    pub fn is_ring_structured(self) -> bool {
        matches!(self, Family::Uca | Family::Cuca | Family::Fuca)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Disk-shaped feasible moving region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub radius: f64,
    /// Position of the array plane along boresight (0 at the transmitter, `d` at the receiver).
    pub plane_offset: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingSpec {
    pub radius: f64,
    pub element_count: usize,
    pub rotation: f64,
}

impl RingSpec {
    pub fn new(radius: f64, element_count: usize, rotation: f64) -> Self {
        Self { radius, element_count, rotation }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FucaSpec {
    pub subarray_count: usize,
    pub elements_per_subarray: usize,
    /// Distance from the array center to each sub-array center.
    pub primary_radius: f64,
    /// Radius of each sub-array.
    pub secondary_radius: f64,
    /// Rotation step; sub-array `n` (0-based) is rotated by `(n + 1)·subarray_rotation`.
    pub subarray_rotation: f64,
}

impl FucaSpec {
    pub fn new(subarray_count: usize, elements_per_subarray: usize, primary_radius: f64, secondary_radius: f64) -> Self {
        Self {
            subarray_count,
            elements_per_subarray,
            primary_radius,
            secondary_radius,
            subarray_rotation: 0.0,
        }
    }

    pub fn aperture(&self) -> f64 {
        self.primary_radius + self.secondary_radius
    }

    /// Azimuth of sub-array `n`'s center on the primary circle.
    pub fn center_azimuth(&self, n: usize) -> f64 {
        2.0 * PI * n as f64 / self.subarray_count as f64
    }

    pub fn center(&self, n: usize) -> [f64; 2] {
        let a = self.center_azimuth(n);
        [self.primary_radius * a.cos(), self.primary_radius * a.sin()]
    }

    /// Local azimuth of element `k` on sub-array `n`.
    pub fn element_azimuth(&self, n: usize, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.elements_per_subarray as f64 + (n + 1) as f64 * self.subarray_rotation
    }
}

/// Layout-only families used for switching-cost studies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Auxiliary {
    Ura,
    Rla { arms: usize },
    Spiral,
    QfucaLayout,
}

impl Auxiliary {
    pub fn family(self) -> Family {
        match self {
            Auxiliary::Ura => Family::Ura,
            Auxiliary::Rla { .. } => Family::Rla,
            Auxiliary::Spiral => Family::Spiral,
            Auxiliary::QfucaLayout => Family::QfucaLayout,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "snake_case")]
pub enum Layout {
    Rings { rings: Vec<RingSpec> },
    Fractal { spec: FucaSpec },
    Auxiliary { kind: Auxiliary, element_count: usize, aperture: f64 },
}

/// One circular sub-array as seen by the modulator and demodulator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ring {
    pub center: [f64; 2],
    pub radius: f64,
    pub rotation: f64,
    pub element_count: usize,
}

impl Ring {
    pub fn element_azimuth(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.element_count as f64 + self.rotation
    }
}

/// An immutable array layout. Positions are derived once at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrayTopology {
    family: Family,
    layout: Layout,
    region: Region,
    positions: Vec<Point>,
    groups: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid topology parameter: {0}")]
    InvalidParameter(String),
    #[error("topology violates constraints: {0}")]
    Violations(ValidationReport),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "constraint", rename_all = "snake_case")]
pub enum Violation {
    /// Two rings share a radius.
    DuplicateRadius { ring_a: usize, ring_b: usize },
    /// An element lies outside the allowed disk.
    OutsideRegion { element: usize, radius: f64, limit: f64 },
    /// Two elements are closer than the minimum spacing.
    Spacing { element_a: usize, element_b: usize, distance: f64, minimum: f64 },
    /// Fractal secondary radius not below the primary radius.
    FractalRadii { primary: f64, secondary: f64 },
    /// A ring carries an odd or too small element count.
    ElementCount { ring: usize, count: usize },
    /// More elements than the budget allows.
    Budget { count: usize, budget: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| format!("{v:?}")).collect();
        f.write_str(&parts.join("; "))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub min_spacing: f64,
    pub max_radius: f64,
    pub budget: Option<usize>,
}

impl Limits {
    pub fn new(min_spacing: f64, max_radius: f64) -> Self {
        Self { min_spacing, max_radius, budget: None }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = Some(budget);
        self
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), GeometryError> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(GeometryError::InvalidParameter(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

impl ArrayTopology {
    fn assemble(family: Family, layout: Layout, region_radius: f64) -> Self {
        let (positions, groups) = derive_positions(&layout);
        Self {
            family,
            layout,
            region: Region { radius: region_radius, plane_offset: 0.0 },
            positions,
            groups,
        }
    }

    fn checked(self) -> Result<Self, GeometryError> {
        let report = validate(&self, &Limits::new(DEFAULT_MIN_SPACING, self.region.radius));
        if report.is_valid() {
            Ok(self)
        } else {
            Err(GeometryError::Violations(report))
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn element_count(&self) -> usize {
        self.positions.len()
    }

    /// Copy of this topology placed at a different plane along boresight.
    pub fn at_plane(&self, plane_offset: f64) -> Self {
        let mut out = self.clone();
        out.region.plane_offset = plane_offset;
        for p in &mut out.positions {
            p[2] = plane_offset;
        }
        out
    }

    /// Element positions in meters, ring-major.
    pub fn element_positions(&self) -> &[Point] {
        &self.positions
    }

    /// `(group, index)` label of each element: ring/sub-array/arm/row and the index within it.
    pub fn element_labels(&self) -> &[(usize, usize)] {
        &self.groups
    }

    /// Circular sub-arrays for UCA/CUCA/FUCA; `None` for layout-only families.
    pub fn rings(&self) -> Option<Vec<Ring>> {
        match &self.layout {
            Layout::Rings { rings } => Some(
                rings
                    .iter()
                    .map(|r| Ring {
                        center: [0.0, 0.0],
                        radius: r.radius,
                        rotation: r.rotation,
                        element_count: r.element_count,
                    })
                    .collect(),
            ),
            Layout::Fractal { spec } => Some(
                (0..spec.subarray_count)
                    .map(|n| Ring {
                        center: spec.center(n),
                        radius: spec.secondary_radius,
                        rotation: (n + 1) as f64 * spec.subarray_rotation,
                        element_count: spec.elements_per_subarray,
                    })
                    .collect(),
            ),
            Layout::Auxiliary { .. } => None,
        }
    }

    pub fn fuca_spec(&self) -> Option<&FucaSpec> {
        match &self.layout {
            Layout::Fractal { spec } => Some(spec),
            _ => None,
        }
    }

    /// Short human-readable label, e.g. `CUCA 4x4`.
    pub fn label(&self) -> String {
        match &self.layout {
            Layout::Rings { rings } if rings.len() == 1 => format!("UCA-{}", rings[0].element_count),
            Layout::Rings { rings } => format!("CUCA {}x{}", rings.len(), rings[0].element_count),
            Layout::Fractal { spec } => format!("FUCA {}x{}", spec.subarray_count, spec.elements_per_subarray),
            Layout::Auxiliary { kind, element_count, .. } => match kind {
                Auxiliary::Ura => format!("URA-{element_count}"),
                Auxiliary::Rla { arms } => format!("RLA-{element_count}/{arms}"),
                Auxiliary::Spiral => format!("SPIRAL-{element_count}"),
                Auxiliary::QfucaLayout => format!("QFUCA-{element_count}"),
            },
        }
    }
}

fn derive_positions(layout: &Layout) -> (Vec<Point>, Vec<(usize, usize)>) {
    let mut pts = Vec::new();
    let mut groups = Vec::new();
    match layout {
        Layout::Rings { rings } => {
            for (n, r) in rings.iter().enumerate() {
                for k in 0..r.element_count {
                    let a = 2.0 * PI * k as f64 / r.element_count as f64 + r.rotation;
                    pts.push([r.radius * a.cos(), r.radius * a.sin(), 0.0]);
                    groups.push((n, k));
                }
            }
        }
        Layout::Fractal { spec } => {
            for n in 0..spec.subarray_count {
                let c = spec.center(n);
                for k in 0..spec.elements_per_subarray {
                    let a = spec.element_azimuth(n, k);
                    pts.push([
                        c[0] + spec.secondary_radius * a.cos(),
                        c[1] + spec.secondary_radius * a.sin(),
                        0.0,
                    ]);
                    groups.push((n, k));
                }
            }
        }
        Layout::Auxiliary { kind, element_count, aperture } => {
            auxiliary_positions(*kind, *element_count, *aperture, &mut pts, &mut groups);
        }
    }
    (pts, groups)
}

/// Golden angle in radians.
const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

// Quasi-fractal layout: one central 4-element ring plus (count/4 - 1) outer
// 4-element sub-arrays on a primary circle, sharing the fractal 0.6/0.4 split.
const QFUCA_SUB: usize = 4;

fn auxiliary_positions(kind: Auxiliary, count: usize, aperture: f64, pts: &mut Vec<Point>, groups: &mut Vec<(usize, usize)>) {
    match kind {
        Auxiliary::Ura => {
            let side = (count as f64).sqrt().round() as usize;
            let half = aperture / 2f64.sqrt();
            let step = 2.0 * half / (side - 1) as f64;
            for row in 0..side {
                for col in 0..side {
                    pts.push([-half + col as f64 * step, -half + row as f64 * step, 0.0]);
                    groups.push((row, col));
                }
            }
        }
        Auxiliary::Rla { arms } => {
            let per_arm = count / arms;
            for a in 0..arms {
                let ang = 2.0 * PI * a as f64 / arms as f64;
                for i in 0..per_arm {
                    let r = aperture * (i + 1) as f64 / per_arm as f64;
                    pts.push([r * ang.cos(), r * ang.sin(), 0.0]);
                    groups.push((a, i));
                }
            }
        }
        Auxiliary::Spiral => {
            for t in 0..count {
                let r = aperture * t as f64 / (count - 1) as f64;
                let ang = t as f64 * GOLDEN_ANGLE;
                pts.push([r * ang.cos(), r * ang.sin(), 0.0]);
                groups.push((0, t));
            }
        }
        Auxiliary::QfucaLayout => {
            let primary = 0.6 * aperture;
            let secondary = 0.4 * aperture;
            let inner = 0.5 * (primary - secondary);
            for k in 0..QFUCA_SUB {
                let a = 2.0 * PI * k as f64 / QFUCA_SUB as f64;
                pts.push([inner * a.cos(), inner * a.sin(), 0.0]);
                groups.push((0, k));
            }
            let outer = count / QFUCA_SUB - 1;
            for s in 0..outer {
                let ca = 2.0 * PI * s as f64 / outer as f64;
                let c = [primary * ca.cos(), primary * ca.sin()];
                for k in 0..QFUCA_SUB {
                    let a = 2.0 * PI * k as f64 / QFUCA_SUB as f64;
                    pts.push([c[0] + secondary * a.cos(), c[1] + secondary * a.sin(), 0.0]);
                    groups.push((s + 1, k));
                }
            }
        }
    }
}

/// Single-ring uniform circular array.
pub fn build_uca(element_count: usize, radius: f64, rotation: f64) -> Result<ArrayTopology, GeometryError> {
    if element_count < 4 || element_count % 2 != 0 {
        return Err(GeometryError::InvalidParameter(format!(
            "UCA needs an even element count >= 4, got {element_count}"
        )));
    }
    check_positive("radius", radius)?;
    ArrayTopology::assemble(
        Family::Uca,
        Layout::Rings { rings: vec![RingSpec::new(radius, element_count, rotation)] },
        radius,
    )
    .checked()
}

/// Concentric rings sharing one center. A single ring yields a UCA.
pub fn build_cuca(rings: &[RingSpec]) -> Result<ArrayTopology, GeometryError> {
    if rings.is_empty() {
        return Err(GeometryError::InvalidParameter("CUCA needs at least one ring".into()));
    }
    for r in rings {
        check_positive("ring radius", r.radius)?;
        if r.element_count < 2 || r.element_count % 2 != 0 {
            return Err(GeometryError::InvalidParameter(format!(
                "ring element count must be even and >= 2, got {}",
                r.element_count
            )));
        }
    }
    if rings.len() == 1 {
        return build_uca(rings[0].element_count, rings[0].radius, rings[0].rotation);
    }
    let outer = rings.iter().map(|r| r.radius).fold(0.0, f64::max);
    ArrayTopology::assemble(Family::Cuca, Layout::Rings { rings: rings.to_vec() }, outer).checked()
}

/// `ring_count` rings of `k` elements with radii uniformly reduced from
/// `aperture` toward the center: `aperture·(N − n)/N` for ring `n = 0..N`.
/// Ring `n` is rotated by `(n + 1)·rotation_step`.
pub fn build_cuca_uniform(ring_count: usize, k: usize, aperture: f64, rotation_step: f64) -> Result<ArrayTopology, GeometryError> {
    if ring_count == 0 {
        return Err(GeometryError::InvalidParameter("ring count must be positive".into()));
    }
    let rings: Vec<RingSpec> = (0..ring_count)
        .map(|n| {
            RingSpec::new(
                aperture * (ring_count - n) as f64 / ring_count as f64,
                k,
                (n + 1) as f64 * rotation_step,
            )
        })
        .collect();
    if ring_count == 1 {
        return build_uca(k, aperture, rotation_step);
    }
    build_cuca(&rings)
}

/// Fractal UCA: sub-arrays on a primary circle.
pub fn build_fuca(spec: &FucaSpec) -> Result<ArrayTopology, GeometryError> {
    if spec.subarray_count == 0 {
        return Err(GeometryError::InvalidParameter("FUCA needs at least one sub-array".into()));
    }
    if spec.elements_per_subarray < 4 || spec.elements_per_subarray % 2 != 0 {
        return Err(GeometryError::InvalidParameter(format!(
            "sub-array element count must be even and >= 4, got {}",
            spec.elements_per_subarray
        )));
    }
    check_positive("secondary radius", spec.secondary_radius)?;
    let degenerate = spec.subarray_count == 1 && spec.primary_radius == 0.0;
    if !degenerate {
        check_positive("primary radius", spec.primary_radius)?;
    }
    let topo = ArrayTopology::assemble(Family::Fuca, Layout::Fractal { spec: *spec }, spec.aperture());
    if !degenerate && spec.secondary_radius >= spec.primary_radius {
        return Err(GeometryError::Violations(ValidationReport {
            violations: vec![Violation::FractalRadii {
                primary: spec.primary_radius,
                secondary: spec.secondary_radius,
            }],
        }));
    }
    topo.checked()
}

/// Layout-only families normalized to `aperture`.
pub fn build_auxiliary(kind: Auxiliary, element_count: usize, aperture: f64) -> Result<ArrayTopology, GeometryError> {
    check_positive("aperture", aperture)?;
    if element_count < 2 {
        return Err(GeometryError::InvalidParameter("need at least two elements".into()));
    }
    match kind {
        Auxiliary::Ura => {
            let side = (element_count as f64).sqrt().round() as usize;
            if side * side != element_count || side < 2 {
                return Err(GeometryError::InvalidParameter(format!(
                    "URA needs a perfect-square count >= 4, got {element_count}"
                )));
            }
        }
        Auxiliary::Rla { arms } => {
            if arms < 2 || element_count % arms != 0 {
                return Err(GeometryError::InvalidParameter(format!(
                    "RLA needs >= 2 arms dividing {element_count}, got {arms}"
                )));
            }
        }
        Auxiliary::Spiral => {}
        Auxiliary::QfucaLayout => {
            if element_count % QFUCA_SUB != 0 || element_count / QFUCA_SUB < 3 {
                return Err(GeometryError::InvalidParameter(format!(
                    "QF-UCA layout needs a multiple of {QFUCA_SUB} with at least 12 elements, got {element_count}"
                )));
            }
        }
    }
    ArrayTopology::assemble(
        kind.family(),
        Layout::Auxiliary { kind, element_count, aperture },
        aperture,
    )
    .checked()
}

/// Checks structural constraints, region containment, spacing and budget.
/// Violations are returned as data; an empty report means valid.
pub fn validate(topology: &ArrayTopology, limits: &Limits) -> ValidationReport {
    let mut violations = Vec::new();
    match &topology.layout {
        Layout::Rings { rings } => {
            for (i, a) in rings.iter().enumerate() {
                if a.element_count < 2 || a.element_count % 2 != 0 {
                    violations.push(Violation::ElementCount { ring: i, count: a.element_count });
                }
                for (j, b) in rings.iter().enumerate().skip(i + 1) {
                    if (a.radius - b.radius).abs() <= GEOM_EPS {
                        violations.push(Violation::DuplicateRadius { ring_a: i, ring_b: j });
                    }
                }
            }
        }
        Layout::Fractal { spec } => {
            let degenerate = spec.subarray_count == 1 && spec.primary_radius == 0.0;
            if !degenerate && spec.secondary_radius >= spec.primary_radius {
                violations.push(Violation::FractalRadii {
                    primary: spec.primary_radius,
                    secondary: spec.secondary_radius,
                });
            }
            if spec.elements_per_subarray % 2 != 0 {
                violations.push(Violation::ElementCount { ring: 0, count: spec.elements_per_subarray });
            }
        }
        Layout::Auxiliary { .. } => {}
    }
    let pts = &topology.positions;
    for (i, p) in pts.iter().enumerate() {
        let r = p[0].hypot(p[1]);
        if r > limits.max_radius + GEOM_EPS {
            violations.push(Violation::OutsideRegion { element: i, radius: r, limit: limits.max_radius });
        }
    }
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let dist = (pts[i][0] - pts[j][0]).hypot(pts[i][1] - pts[j][1]);
            if dist < limits.min_spacing - 1e-12 {
                violations.push(Violation::Spacing {
                    element_a: i,
                    element_b: j,
                    distance: dist,
                    minimum: limits.min_spacing,
                });
            }
        }
    }
    if let Some(budget) = limits.budget {
        if pts.len() > budget {
            violations.push(Violation::Budget { count: pts.len(), budget });
        }
    }
    ValidationReport { violations }
}

/// Virtual ring seen by a receive element from the projected center of a
/// (possibly non-coaxial) transmit sub-array.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionGeometry {
    pub virtual_radius: f64,
    pub virtual_azimuth: f64,
    pub center_offset: f64,
    pub offset_azimuth: f64,
}

/// Projects transmit sub-array `tx_subarray` onto the receive plane and
/// measures receive element `rx_element` of sub-array `rx_subarray` from it.
/// Indices are 0-based. The arrays are coaxial, so the projection of a
/// transmit center keeps its planar coordinates.
pub fn fuca_projection(
    spec_tx: &FucaSpec,
    spec_rx: &FucaSpec,
    tx_subarray: usize,
    rx_subarray: usize,
    rx_element: usize,
) -> ProjectionGeometry {
    let projected = spec_tx.center(tx_subarray);
    let rx_center = spec_rx.center(rx_subarray);
    let offset = [rx_center[0] - projected[0], rx_center[1] - projected[1]];
    let theta = spec_rx.element_azimuth(rx_subarray, rx_element);
    if offset == [0.0, 0.0] {
        return ProjectionGeometry {
            virtual_radius: spec_rx.secondary_radius,
            virtual_azimuth: theta,
            center_offset: 0.0,
            offset_azimuth: 0.0,
        };
    }
    let vx = offset[0] + spec_rx.secondary_radius * theta.cos();
    let vy = offset[1] + spec_rx.secondary_radius * theta.sin();
    ProjectionGeometry {
        virtual_radius: vx.hypot(vy),
        virtual_azimuth: vy.atan2(vx),
        center_offset: offset[0].hypot(offset[1]),
        offset_azimuth: offset[1].atan2(offset[0]),
    }
}

/// Serializable topology document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyDocument {
    pub family: Family,
    pub label: String,
    pub parameters: Layout,
    pub region: Region,
    pub positions: Vec<Point>,
    pub validation: ValidationReport,
}

fn round_sig(v: f64, digits: usize) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{:.*e}", digits - 1, v).parse().unwrap_or(v)
}

impl ArrayTopology {
    /// JSON-ready document; positions rounded to 12 significant digits.
    pub fn to_document(&self, limits: &Limits) -> TopologyDocument {
        TopologyDocument {
            family: self.family,
            label: self.label(),
            parameters: self.layout.clone(),
            region: self.region,
            positions: self
                .positions
                .iter()
                .map(|p| [round_sig(p[0], 12), round_sig(p[1], 12), round_sig(p[2], 12)])
                .collect(),
            validation: validate(self, limits),
        }
    }

    /// Rebuilds a topology from its parameters. Positions are re-derived, not trusted.
    pub fn from_document(doc: &TopologyDocument) -> Result<Self, GeometryError> {
        let topo = match &doc.parameters {
            Layout::Rings { rings } => build_cuca(rings)?,
            Layout::Fractal { spec } => build_fuca(spec)?,
            Layout::Auxiliary { kind, element_count, aperture } => build_auxiliary(*kind, *element_count, *aperture)?,
        };
        Ok(topo.at_plane(doc.region.plane_offset))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Point, b: Point, tol: f64) -> bool {
        (0..3).all(|i| (a[i] - b[i]).abs() < tol)
    }

    #[test]
    fn uca_quarter_symmetry() {
        let t = build_uca(4, 1.0, 0.0).unwrap();
        let expect = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]];
        for (p, e) in t.element_positions().iter().zip(expect) {
            assert!(close(*p, e, 1e-15), "{p:?} vs {e:?}");
        }
        let r = build_uca(4, 1.0, PI / 4.0).unwrap();
        let h = 0.5f64.sqrt();
        for p in r.element_positions() {
            assert!((p[0].abs() - h).abs() < 1e-15 && (p[1].abs() - h).abs() < 1e-15);
        }
    }

    #[test]
    fn uca_sixteen() {
        let t = build_uca(16, 2.0, 0.0).unwrap();
        assert_eq!(t.element_count(), 16);
        for p in t.element_positions() {
            assert!((p[0].hypot(p[1]) - 2.0).abs() < 1e-14);
        }
        assert_eq!(t.label(), "UCA-16");
    }

    #[test]
    fn cuca_ring_major_order() {
        let t = build_cuca(&[RingSpec::new(2.0, 8, 0.0), RingSpec::new(1.0, 8, 0.0)]).unwrap();
        assert_eq!(t.element_count(), 16);
        for (i, p) in t.element_positions().iter().enumerate() {
            let r = p[0].hypot(p[1]);
            let want = if i < 8 { 2.0 } else { 1.0 };
            assert!((r - want).abs() < 1e-14);
        }
        let u = build_cuca_uniform(4, 4, 2.0, 0.0).unwrap();
        let radii: Vec<f64> = u.rings().unwrap().iter().map(|r| r.radius).collect();
        assert_eq!(radii, vec![2.0, 1.5, 1.0, 0.5]);
    }

    #[test]
    fn single_ring_cuca_is_uca() {
        let a = build_cuca(&[RingSpec::new(1.5, 8, 0.1)]).unwrap();
        let b = build_uca(8, 1.5, 0.1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cuca_duplicate_radii_rejected() {
        let err = build_cuca(&[RingSpec::new(1.0, 4, 0.0), RingSpec::new(1.0, 4, 0.0)]).unwrap_err();
        match err {
            GeometryError::Violations(rep) => assert!(rep
                .violations
                .iter()
                .any(|v| matches!(v, Violation::DuplicateRadius { ring_a: 0, ring_b: 1 }))),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn fuca_element_positions() {
        let spec = FucaSpec::new(4, 4, 1.2, 0.8);
        let t = build_fuca(&spec).unwrap();
        assert_eq!(t.element_count(), 16);
        // first element of first sub-array: Φ = 0, φ = 0
        assert!(close(t.element_positions()[0], [2.0, 0.0, 0.0], 1e-15));
        // sub-array 1, element 1
        let p = t.element_positions()[5];
        let phi_c = PI / 2.0;
        let phi_e = PI / 2.0;
        let want = [1.2 * phi_c.cos() + 0.8 * phi_e.cos(), 1.2 * phi_c.sin() + 0.8 * phi_e.sin(), 0.0];
        assert!(close(p, want, 1e-15));
        assert!(build_fuca(&FucaSpec::new(4, 8, 1.2, 0.8)).is_ok());
    }

    #[test]
    fn fuca_radius_order_enforced() {
        let err = build_fuca(&FucaSpec::new(4, 4, 0.8, 1.2)).unwrap_err();
        assert!(matches!(err, GeometryError::Violations(_)));
    }

    #[test]
    fn degenerate_fuca_is_a_uca() {
        let f = build_fuca(&FucaSpec::new(1, 8, 0.0, 0.9)).unwrap();
        let u = build_uca(8, 0.9, 0.0).unwrap();
        for (a, b) in f.element_positions().iter().zip(u.element_positions()) {
            assert!(close(*a, *b, 1e-15));
        }
    }

    #[test]
    fn ura_grid_inscribed() {
        let t = build_auxiliary(Auxiliary::Ura, 16, 2.0).unwrap();
        let s = 2.0 * (2.0 / 2f64.sqrt()) / 3.0;
        let p = t.element_positions();
        assert!((p[1][0] - p[0][0] - s).abs() < 1e-14);
        assert!((p[4][1] - p[0][1] - s).abs() < 1e-14);
        assert!(p.iter().all(|q| q[0].hypot(q[1]) <= 2.0 + 1e-12));
        assert!(build_auxiliary(Auxiliary::Ura, 15, 2.0).is_err());
    }

    #[test]
    fn rla_and_spiral() {
        let t = build_auxiliary(Auxiliary::Rla { arms: 4 }, 16, 2.0).unwrap();
        for (i, p) in t.element_positions().iter().enumerate() {
            let arm = i / 4;
            let ang = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
            assert!((ang - arm as f64 * PI / 2.0).abs() < 1e-12);
        }
        assert!(build_auxiliary(Auxiliary::Rla { arms: 3 }, 16, 2.0).is_err());
        let s = build_auxiliary(Auxiliary::Spiral, 16, 2.0).unwrap();
        let last = s.element_positions()[15];
        assert!((last[0].hypot(last[1]) - 2.0).abs() < 1e-14);
        let q = build_auxiliary(Auxiliary::QfucaLayout, 16, 2.0).unwrap();
        assert_eq!(q.element_count(), 16);
    }

    #[test]
    fn dense_uca_violates_spacing() {
        let t = ArrayTopology::assemble(
            Family::Uca,
            Layout::Rings { rings: vec![RingSpec::new(0.1, 64, 0.0)] },
            0.1,
        );
        let rep = validate(&t, &Limits::new(DEFAULT_MIN_SPACING, 2.0));
        assert!(rep.violations.iter().any(|v| matches!(v, Violation::Spacing { .. })));
        assert!(build_uca(64, 0.1, 0.0).is_err());
    }

    #[test]
    fn valid_cuca_has_empty_report() {
        let t = build_cuca_uniform(4, 4, 2.0, 0.0).unwrap();
        assert!(validate(&t, &Limits::new(DEFAULT_MIN_SPACING, 2.0).with_budget(16)).is_valid());
        let rep = validate(&t, &Limits::new(DEFAULT_MIN_SPACING, 2.0).with_budget(8));
        assert!(matches!(rep.violations[..], [Violation::Budget { count: 16, budget: 8 }]));
    }

    #[test]
    fn projection_coaxial_and_offsets() {
        let s = FucaSpec::new(4, 4, 1.2, 0.8);
        for v in 0..4 {
            let g = fuca_projection(&s, &s, 2, 2, v);
            assert_eq!(g.virtual_radius, 0.8);
            assert_eq!(g.virtual_azimuth, s.element_azimuth(2, v));
            assert_eq!(g.center_offset, 0.0);
        }
        let two = FucaSpec::new(2, 4, 1.2, 0.8);
        let g = fuca_projection(&two, &two, 0, 1, 0);
        assert!((g.center_offset - 2.4).abs() < 1e-14);
        let g = fuca_projection(&s, &s, 0, 1, 0);
        let chord = 2.0 * 1.2 * (PI / 4.0).sin();
        assert!((g.center_offset - chord).abs() < 1e-12);
        assert!((g.center_offset - 1.697_056_274_847_714).abs() < 1e-12);
    }

    #[test]
    fn document_round_trip() {
        let t = build_fuca(&FucaSpec::new(4, 4, 1.2, 0.8)).unwrap().at_plane(100.0);
        let limits = Limits::new(DEFAULT_MIN_SPACING, 2.0);
        let doc = t.to_document(&limits);
        let json = serde_json::to_string(&doc).unwrap();
        let back: TopologyDocument = serde_json::from_str(&json).unwrap();
        let t2 = ArrayTopology::from_document(&back).unwrap();
        assert_eq!(t, t2);
        assert!(doc.validation.is_valid());
    }
}
