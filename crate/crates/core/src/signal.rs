//! Piecewise-constant, right-continuous switching signals with rational
//! breakpoints.

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::rational::Q;
use crate::scalar::Scalar;

/// An `N`-tuple of `d × d` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixTuple<S> {
    mats: Vec<Mat<S>>,
}

impl<S: Scalar> MatrixTuple<S> {
    pub fn new(mats: Vec<Mat<S>>) -> Result<Self> {
        let Some(first) = mats.first() else {
            return Err(Error::invalid("matrix tuple is empty"));
        };
        let d = first.dim();
        if mats.iter().any(|m| m.dim() != d) {
            return Err(Error::Dimension("matrices in a tuple must share their dimension".into()));
        }
        Ok(Self { mats })
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        Self { mats: vec![Mat::zeros(d); n] }
    }

    /// Scalar tuple `(a_1, …, a_N)` with `d = 1`.
    pub fn scalars(values: &[S]) -> Self {
        Self { mats: values.iter().map(|a| Mat::from_fn(1, |_, _| a.clone())).collect() }
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.mats[0].dim()
    }

    pub fn get(&self, j: usize) -> &Mat<S> {
        &self.mats[j]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Mat<S>> {
        self.mats.iter()
    }

    pub fn map(&self, mut f: impl FnMut(usize, &Mat<S>) -> Mat<S>) -> Self {
        Self { mats: self.mats.iter().enumerate().map(|(j, m)| f(j, m)).collect() }
    }

    pub fn sum(&self) -> Mat<S> {
        let mut acc = Mat::zeros(self.dim());
        for m in &self.mats {
            acc.add_assign(m);
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.mats.iter().all(Mat::is_zero)
    }
}

/// Piecewise-constant map `t ↦ value`, right-continuous, constant before the
/// first and after the last breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Piecewise<T> {
    breakpoints: Vec<Q>,
    values: Vec<T>,
}

impl<T> Piecewise<T> {
    pub fn new(breakpoints: Vec<Q>, values: Vec<T>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::Dimension(format!(
                "{} values for {} breakpoints (expected {})",
                values.len(),
                breakpoints.len(),
                breakpoints.len() + 1
            )));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("breakpoints must be strictly increasing"));
        }
        Ok(Self { breakpoints, values })
    }

    pub fn constant(value: T) -> Self {
        Self { breakpoints: Vec::new(), values: vec![value] }
    }

    pub fn breakpoints(&self) -> &[Q] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn index_at(&self, t: &Q) -> usize {
        self.breakpoints.partition_point(|b| b <= t)
    }

    pub fn at(&self, t: &Q) -> &T {
        &self.values[self.index_at(t)]
    }

    /// Value at a floating-point time; used only for plotting-style queries.
    pub fn at_f64(&self, t: f64) -> &T {
        let i = self.breakpoints.partition_point(|b| crate::rational::to_f64(b) <= t);
        &self.values[i]
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Piecewise<U> {
        Piecewise { breakpoints: self.breakpoints.clone(), values: self.values.iter().map(f).collect() }
    }

    /// Signal `s ↦ self(s + tau)`.
    pub fn shifted(&self, tau: &Q) -> Self
    where
        T: Clone,
    {
        Piecewise {
            breakpoints: self.breakpoints.iter().map(|b| b - tau).collect(),
            values: self.values.clone(),
        }
    }
}

pub type SwitchingSignal<S> = Piecewise<MatrixTuple<S>>;

impl<S: Scalar> SwitchingSignal<S> {
    pub fn validate_tuples(&self) -> Result<(usize, usize)> {
        let first = &self.values[0];
        let (n, d) = (first.len(), first.dim());
        if self.values.iter().any(|v| v.len() != n || v.dim() != d) {
            return Err(Error::Dimension("signal values must share tuple length and dimension".into()));
        }
        Ok((n, d))
    }

    pub fn tuple_len(&self) -> usize {
        self.values[0].len()
    }

    pub fn dim(&self) -> usize {
        self.values[0].dim()
    }
}
