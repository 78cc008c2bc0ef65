//! Small dense square matrices over a generic scalar field.

use crate::scalar::{Scalar, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct Mat<S> {
    dim: usize,
    data: Vec<S>,
}

impl<S: Scalar> Mat<S> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![S::zero(); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = S::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> crate::Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(crate::Error::Dimension(format!("matrix with {dim} rows is not square")));
        }
        Ok(Self { dim, data: rows.into_iter().flatten().collect() })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &S {
        &self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.dim + j] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = &self.data[i * d + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..d {
                    let prod = a.clone() * rhs.data[k * d + j].clone();
                    let slot = &mut out.data[i * d + j];
                    *slot = slot.clone() + prod;
                }
            }
        }
        out
    }

    pub fn add_assign(&mut self, rhs: &Self) {
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a = a.clone() + b.clone();
        }
    }

    pub fn scale(&self, s: &S) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|x| x.clone() * s.clone()).collect() }
    }

    pub fn apply(&self, v: &[S]) -> Vec<S> {
        let d = self.dim;
        (0..d)
            .map(|i| {
                (0..d).fold(S::zero(), |acc, k| acc + self.data[i * d + k].clone() * v[k].clone())
            })
            .collect()
    }

    /// Operator ∞-norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        let d = self.dim;
        (0..d)
            .map(|i| (0..d).map(|j| self.data[i * d + j].modulus()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_c64(&self) -> Mat<C64> {
        Mat { dim: self.dim, data: self.data.iter().map(|x| x.to_c64()).collect() }
    }

    pub fn column_norm_inf(&self, j: usize) -> f64 {
        (0..self.dim).map(|i| self.get(i, j).modulus()).fold(0.0, f64::max)
    }
}

impl Mat<C64> {
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<C64> {
        nalgebra::DMatrix::from_fn(self.dim, self.dim, |i, j| *self.get(i, j))
    }

    pub fn rows(&self) -> Vec<Vec<C64>> {
        (0..self.dim).map(|i| self.data[i * self.dim..(i + 1) * self.dim].to_vec()).collect()
    }
}

/// Spectral radius: dense eigenvalues up to dimension 64, power iteration above.
pub fn spectral_radius(m: &Mat<C64>) -> f64 {
    let d = m.dim();
    if d == 0 {
        return 0.0;
    }
    if d == 1 {
        return m.get(0, 0).norm();
    }
    if d == 2 {
        let (a, b, c, e) = (*m.get(0, 0), *m.get(0, 1), *m.get(1, 0), *m.get(1, 1));
        let tr = a + e;
        let det = a * e - b * c;
        let disc = (tr * tr - det * 4.0).sqrt();
        return ((tr + disc) * 0.5).norm().max(((tr - disc) * 0.5).norm());
    }
    if d <= 64 {
        let eig = m.to_nalgebra().schur().eigenvalues();
        if let Some(ev) = eig {
            return ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
        }
    }
    power_iteration_radius(m, 2000, 1e-10)
}

/// Gelfand-type estimate `‖M^k‖^{1/k}` refined until successive estimates
/// agree to `tol`.
pub fn power_iteration_radius(m: &Mat<C64>, max_iter: usize, tol: f64) -> f64 {
    let mut p = m.clone();
    let mut log_scale = 0.0f64;
    let mut prev = f64::INFINITY;
    let mut k = 1u32;
    for _ in 0..max_iter.min(40) {
        let n = p.norm_inf();
        if n == 0.0 {
            return 0.0;
        }
        let est = ((n.ln() + log_scale) / f64::from(k)).exp();
        if (est - prev).abs() <= tol * est.max(1e-300) {
            return est;
        }
        prev = est;
        let normalized = p.scale(&C64::new(1.0 / n, 0.0));
        log_scale += n.ln();
        p = normalized.mul(&normalized);
        log_scale *= 2.0;
        k *= 2;
        if k > (1 << 30) {
            break;
        }
    }
    prev
}
