use std::ops::{Index, IndexMut, Mul};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::NumericError;

/// Default upper bound on the 1-norm condition estimate of `HᴴH`.
pub const DEFAULT_CONDITION_BOUND: f64 = 1e12;

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds from row-major entries; fails if the count does not match or an entry is not finite.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self, NumericError> {
        if data.len() != rows * cols {
            return Err(NumericError::Shape(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(NumericError::Domain("non-finite matrix entry".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.cols, "matrix-vector shape mismatch");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn norm_1(&self) -> f64 {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| self[(r, c)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix product shape mismatch");
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..rhs.cols {
                    out[(r, c)] += a * rhs[(k, c)];
                }
            }
        }
        out
    }
}

/// `(HᴴH)⁻¹` together with its condition estimate.
#[derive(Clone, Debug)]
pub struct GramInverse {
    pub inverse: ComplexMatrix,
    pub condition: f64,
    /// Left inverse `(HᴴH)⁻¹Hᴴ`.
    pub pseudo_inverse: ComplexMatrix,
}

/// Householder QR of a tall matrix: returns `(R⁻¹, Qᴴ)` restricted to the
/// leading `cols` rows of `Qᴴ`, or `None` when a diagonal entry of `R` vanishes.
fn qr_left_inverse(h: &ComplexMatrix) -> Option<(ComplexMatrix, ComplexMatrix)> {
    let (m, n) = (h.rows, h.cols);
    let mut a = h.clone();
    let mut qh = ComplexMatrix::identity(m);
    let scale = h.max_abs();
    for j in 0..n {
        let norm: f64 = (j..m).map(|i| a[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if !(norm > f64::EPSILON * scale * m as f64) {
            return None;
        }
        let x0 = a[(j, j)];
        let phase = if x0.norm() == 0.0 { Complex64::new(1.0, 0.0) } else { x0 / x0.norm() };
        let alpha = -phase * norm;
        let mut v: Vec<Complex64> = (j..m).map(|i| a[(i, j)]).collect();
        v[0] -= alpha;
        let vnorm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for z in &mut v {
            *z /= vnorm;
        }
        // apply I − 2vvᴴ to the trailing rows of A and of Qᴴ
        for target in [&mut a, &mut qh] {
            for c in 0..target.cols {
                let dot: Complex64 = v.iter().enumerate().map(|(i, vi)| vi.conj() * target[(j + i, c)]).sum();
                for (i, vi) in v.iter().enumerate() {
                    target[(j + i, c)] -= 2.0 * vi * dot;
                }
            }
        }
    }
    // R⁻¹ by back substitution on the upper triangle of A
    let mut rinv = ComplexMatrix::zeros(n, n);
    for c in 0..n {
        for r in (0..=c).rev() {
            let mut s = if r == c { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            for k in r + 1..=c {
                s -= a[(r, k)] * rinv[(k, c)];
            }
            rinv[(r, c)] = s / a[(r, r)];
        }
    }
    let qh_top = ComplexMatrix::from_fn(n, m, |r, c| qh[(r, c)]);
    Some((rinv, qh_top))
}

/// `(HᴴH)⁻¹` and the ZF left inverse from a Householder QR of `H`, so the
/// accuracy depends on cond(H) rather than cond(HᴴH).
///
/// The condition estimate is `‖A‖₁·‖A⁻¹‖₁` with `A = HᴴH`; anything above
/// `bound`, or a vanishing pivot, is reported as singular.
pub fn gram_inverse(h: &ComplexMatrix, bound: f64) -> Result<GramInverse, NumericError> {
    if h.rows < h.cols {
        return Err(NumericError::Shape(format!(
            "zero-forcing needs rows >= cols, got {}x{}",
            h.rows, h.cols
        )));
    }
    let Some((rinv, qh)) = qr_left_inverse(h) else {
        return Err(NumericError::Singular { condition: f64::INFINITY });
    };
    let inverse = &rinv * &rinv.adjoint();
    let a = &h.adjoint() * h;
    let condition = a.norm_1() * inverse.norm_1();
    if !condition.is_finite() || condition > bound {
        return Err(NumericError::Singular { condition });
    }
    let pseudo_inverse = &rinv * &qh;
    Ok(GramInverse { inverse, condition, pseudo_inverse })
}

/// Zero-forcing detector `G = (HᴴH)⁻¹Hᴴ`.
pub fn zf_pseudo_inverse(h: &ComplexMatrix) -> Result<ComplexMatrix, NumericError> {
    zf_pseudo_inverse_bounded(h, DEFAULT_CONDITION_BOUND)
}

pub fn zf_pseudo_inverse_bounded(h: &ComplexMatrix, bound: f64) -> Result<ComplexMatrix, NumericError> {
    Ok(gram_inverse(h, bound)?.pseudo_inverse)
}

/// Noise enhancement `[(HᴴH)⁻¹]_{nn}` of stream `stream` under zero forcing.
pub fn zf_noise_amplification(h: &ComplexMatrix, stream: usize) -> Result<f64, NumericError> {
    let g = gram_inverse(h, DEFAULT_CONDITION_BOUND)?;
    if stream >= g.inverse.rows() {
        return Err(NumericError::Shape(format!(
            "stream {stream} out of range for {} streams",
            g.inverse.rows()
        )));
    }
    Ok(g.inverse[(stream, stream)].re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexMatrix::from_fn(rows, cols, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn identity_and_scaled_identity() {
        let i3 = ComplexMatrix::identity(3);
        assert!(zf_pseudo_inverse(&i3).unwrap().max_abs_diff(&i3) < 1e-15);
        let two = ComplexMatrix::identity(2).scale(c(2.0, 0.0));
        let g = zf_pseudo_inverse(&two).unwrap();
        assert!(g.max_abs_diff(&ComplexMatrix::identity(2).scale(c(0.5, 0.0))) < 1e-15);
        for s in 0..3 {
            assert!((zf_noise_amplification(&i3, s).unwrap() - 1.0).abs() < 1e-15);
        }
        assert!((zf_noise_amplification(&two, 1).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn tall_random_left_inverse() {
        let h = random_matrix(4, 2, 7);
        let g = zf_pseudo_inverse(&h).unwrap();
        assert!((&g * &h).max_abs_diff(&ComplexMatrix::identity(2)) < 1e-9);
        // noise enhancement equals the squared row norm of G
        for n in 0..2 {
            let row_norm: f64 = g.row(n).iter().map(|z| z.norm_sqr()).sum();
            assert!((zf_noise_amplification(&h, n).unwrap() - row_norm).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_deficient_is_singular() {
        let h = ComplexMatrix::from_fn(3, 2, |r, _| c(r as f64 + 1.0, 0.5));
        match zf_pseudo_inverse(&h) {
            Err(NumericError::Singular { .. }) => {}
            other => panic!("expected singular, got {other:?}"),
        }
        let wide = ComplexMatrix::zeros(2, 3);
        assert!(matches!(zf_pseudo_inverse(&wide), Err(NumericError::Shape(_))));
    }

    #[test]
    fn from_vec_rejects_bad_input() {
        assert!(ComplexMatrix::from_vec(2, 2, vec![c(1.0, 0.0); 3]).is_err());
        assert!(ComplexMatrix::from_vec(1, 1, vec![c(f64::NAN, 0.0)]).is_err());
    }
}
