//! Representation coefficients of `u(t) = Σ A_j(t) u(t - L_j)`.
//!
//! `Ξ_{n,t}` is the sum, over all increasing lattice paths from `0` to `n`,
//! of ordered products of the coefficient matrices evaluated at the times at
//! which the path visits its vertices. Grouping multi-indices with equal
//! weighted length `L·n` gives `Ξ̂`, and `Θ` combines `Ξ̂` with the last step
//! of each path so that the solution is a finite sum of `Θ` applied to the
//! initial condition.

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::rational::Q;
use crate::ratlattice::{class_members, ClassKey, LevelFrame};
use crate::scalar::Scalar;
use crate::signal::SwitchingSignal;
use num::{Signed, Zero};
use std::collections::HashMap;

/// Largest `|n|₁` accepted by the recursions.
pub const DEPTH_CAP: u64 = 64;

/// Largest `|n|₁` accepted by the path enumeration oracle by default.
pub const PATHSUM_CAP: u64 = 12;

fn l1(n: &[i64]) -> u64 {
    n.iter().map(|x| x.unsigned_abs()).sum()
}

fn check_depth(n: &[i64]) -> Result<()> {
    let len = l1(n);
    if len > DEPTH_CAP {
        return Err(Error::DepthCap { len, cap: DEPTH_CAP });
    }
    Ok(())
}

fn weighted(n: &[i64], delays: &[Q]) -> Q {
    n.iter().zip(delays).fold(Q::zero(), |acc, (&k, l)| acc + Q::from_integer(k.into()) * l)
}

/// Partition of delay indices into groups of equal delay (equal rows of the
/// lattice matrix).
pub fn delay_groups(frame: &LevelFrame) -> Vec<Vec<usize>> {
    let lattice = frame.lattice();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for j in 0..lattice.len() {
        match groups.iter_mut().find(|g| lattice.row(g[0]) == lattice.row(j)) {
            Some(g) => g.push(j),
            None => groups.push(vec![j]),
        }
    }
    groups
}

/// Memoized coefficient computations for one signal and one delay frame.
pub struct CoefficientTable<'a, S> {
    signal: &'a SwitchingSignal<S>,
    frame: &'a LevelFrame,
    groups: Vec<Vec<usize>>,
    dim: usize,
    forward: HashMap<(Vec<i64>, Q), Mat<S>>,
    reverse: HashMap<(Vec<i64>, Q), Mat<S>>,
    members: HashMap<ClassKey, Vec<Vec<i64>>>,
}

impl<'a, S: Scalar> CoefficientTable<'a, S> {
    pub fn new(signal: &'a SwitchingSignal<S>, frame: &'a LevelFrame) -> Result<Self> {
        let (n, dim) = signal.validate_tuples()?;
        if n != frame.delays().len() {
            return Err(Error::Dimension(format!(
                "signal has {n} matrices per tuple but there are {} delays",
                frame.delays().len()
            )));
        }
        Ok(Self {
            signal,
            frame,
            groups: delay_groups(frame),
            dim,
            forward: HashMap::new(),
            reverse: HashMap::new(),
            members: HashMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame(&self) -> &LevelFrame {
        self.frame
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    fn a(&self, j: usize, t: &Q) -> &Mat<S> {
        self.signal.at(t).get(j)
    }

    /// `Ξ_{n,t}` by the left-factor recursion `Σ_k A_k(t) Ξ_{n-e_k, t-L_k}`.
    pub fn xi(&mut self, n: &[i64], t: &Q) -> Result<Mat<S>> {
        check_depth(n)?;
        Ok(self.xi_forward(n, t))
    }

    fn xi_forward(&mut self, n: &[i64], t: &Q) -> Mat<S> {
        if n.iter().any(|&x| x < 0) {
            return Mat::zeros(self.dim);
        }
        if n.iter().all(|&x| x == 0) {
            return Mat::identity(self.dim);
        }
        let key = (n.to_vec(), t.clone());
        if let Some(m) = self.forward.get(&key) {
            return m.clone();
        }
        let mut acc = Mat::zeros(self.dim);
        let mut m = n.to_vec();
        for k in 0..n.len() {
            if n[k] == 0 {
                continue;
            }
            m[k] -= 1;
            let shifted = t - &self.frame.delays()[k];
            let inner = self.xi_forward(&m, &shifted);
            m[k] += 1;
            if !inner.is_zero() {
                acc.add_assign(&self.a(k, t).mul(&inner));
            }
        }
        self.forward.insert(key, acc.clone());
        acc
    }

    /// `Ξ_{n,t}` by the right-factor recursion
    /// `Σ_k Ξ_{n-e_k,t} A_k(t - L·n + L_k)`; every term lives at the same `t`.
    pub fn xi_reverse(&mut self, n: &[i64], t: &Q) -> Result<Mat<S>> {
        check_depth(n)?;
        Ok(self.xi_backward(n, t))
    }

    fn xi_backward(&mut self, n: &[i64], t: &Q) -> Mat<S> {
        if n.iter().any(|&x| x < 0) {
            return Mat::zeros(self.dim);
        }
        if n.iter().all(|&x| x == 0) {
            return Mat::identity(self.dim);
        }
        let key = (n.to_vec(), t.clone());
        if let Some(m) = self.reverse.get(&key) {
            return m.clone();
        }
        let level = weighted(n, self.frame.delays());
        let mut acc = Mat::zeros(self.dim);
        let mut m = n.to_vec();
        for k in 0..n.len() {
            if n[k] == 0 {
                continue;
            }
            m[k] -= 1;
            let inner = self.xi_backward(&m, t);
            m[k] += 1;
            if !inner.is_zero() {
                let s = t - &level + &self.frame.delays()[k];
                acc.add_assign(&inner.mul(self.a(k, &s)));
            }
        }
        self.reverse.insert(key, acc.clone());
        acc
    }

    /// `Ξ_{n,t}` as an explicit sum over increasing paths (test oracle).
    pub fn xi_pathsum(&self, n: &[i64], t: &Q, cap: u64) -> Result<Mat<S>> {
        if n.iter().any(|&x| x < 0) {
            return Err(Error::invalid("path enumeration needs a nonnegative multi-index"));
        }
        let len = l1(n);
        if len > cap {
            return Err(Error::DepthCap { len, cap });
        }
        let mut acc = Mat::zeros(self.dim);
        let mut remaining = n.to_vec();
        self.paths(&mut remaining, t.clone(), Mat::identity(self.dim), &mut acc);
        Ok(acc)
    }

    fn paths(&self, remaining: &mut Vec<i64>, time: Q, prefix: Mat<S>, acc: &mut Mat<S>) {
        if remaining.iter().all(|&x| x == 0) {
            acc.add_assign(&prefix);
            return;
        }
        for k in 0..remaining.len() {
            if remaining[k] == 0 {
                continue;
            }
            remaining[k] -= 1;
            let next = prefix.mul(self.a(k, &time));
            let next_time = &time - &self.frame.delays()[k];
            self.paths(remaining, next_time, next, acc);
            remaining[k] += 1;
        }
    }

    fn members_of(&mut self, key: &ClassKey) -> Vec<Vec<i64>> {
        if let Some(m) = self.members.get(key) {
            return m.clone();
        }
        let m = class_members(key, self.frame.lattice());
        self.members.insert(key.clone(), m.clone());
        m
    }

    /// `Ξ̂_{[n],t} = Σ_{n' ∈ [n] ∩ ℕ^N} Ξ_{n',t}`.
    pub fn xi_hat(&mut self, key: &ClassKey, t: &Q) -> Result<Mat<S>> {
        let mut acc = Mat::zeros(self.dim);
        for n in self.members_of(key) {
            check_depth(&n)?;
            acc.add_assign(&self.xi_backward(&n, t));
        }
        Ok(acc)
    }

    /// `Â_{[j]}(t)`: sum of the matrices whose delays equal those in `group`.
    pub fn a_hat(&self, group: &[usize], t: &Q) -> Mat<S> {
        let mut acc = Mat::zeros(self.dim);
        for &j in group {
            acc.add_assign(self.a(j, t));
        }
        acc
    }

    /// `Θ_{[n],t} = Σ_{[j] : L·n - L_j ≤ t} Ξ̂_{[n-e_j],t} Â_{[j]}(t - L·n + L_j)`.
    pub fn theta(&mut self, key: &ClassKey, t: &Q) -> Result<Mat<S>> {
        let mut acc = Mat::zeros(self.dim);
        if t.is_negative() {
            return Ok(acc);
        }
        let level = self.frame.level(key);
        let groups = self.groups.clone();
        for group in &groups {
            let j = group[0];
            let lj = &self.frame.delays()[j];
            if &level - lj > *t {
                continue;
            }
            let prev = key.minus_row(self.frame.lattice().row(j));
            if prev.has_negative() {
                continue;
            }
            let hat = self.xi_hat(&prev, t)?;
            if hat.is_zero() {
                continue;
            }
            let s = t - &level + lj;
            acc.add_assign(&hat.mul(&self.a_hat(group, &s)));
        }
        Ok(acc)
    }

    /// Left-factor recursion for `Ξ̂`:
    /// `Σ_{[j]} Â_{[j]}(t) Ξ̂_{[n-e_j], t-L_j}` (consistency check).
    pub fn xi_hat_left(&mut self, key: &ClassKey, t: &Q) -> Result<Mat<S>> {
        let mut acc = Mat::zeros(self.dim);
        let groups = self.groups.clone();
        for group in &groups {
            let j = group[0];
            let prev = key.minus_row(self.frame.lattice().row(j));
            if prev.has_negative() {
                continue;
            }
            let s = t - &self.frame.delays()[j];
            let hat = self.xi_hat(&prev, &s)?;
            acc.add_assign(&self.a_hat(group, t).mul(&hat));
        }
        Ok(acc)
    }

    /// Right-factor recursion for `Ξ̂`:
    /// `Σ_{[j]} Ξ̂_{[n-e_j], t} Â_{[j]}(t - L·n + L_j)` (consistency check).
    pub fn xi_hat_right(&mut self, key: &ClassKey, t: &Q) -> Result<Mat<S>> {
        let mut acc = Mat::zeros(self.dim);
        let level = self.frame.level(key);
        let groups = self.groups.clone();
        for group in &groups {
            let j = group[0];
            let prev = key.minus_row(self.frame.lattice().row(j));
            if prev.has_negative() {
                continue;
            }
            let hat = self.xi_hat(&prev, t)?;
            let s = t - &level + &self.frame.delays()[j];
            acc.add_assign(&hat.mul(&self.a_hat(group, &s)));
        }
        Ok(acc)
    }

    /// Drops memoized `Ξ` values to bound memory between unrelated queries.
    pub fn clear(&mut self) {
        self.forward.clear();
        self.reverse.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};
    use crate::ratlattice::DelayVector;
    use crate::scalar::C64;
    use crate::signal::{MatrixTuple, Piecewise};

    fn scalar_signal(values: &[f64]) -> SwitchingSignal<C64> {
        Piecewise::constant(MatrixTuple::scalars(&values.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>()))
    }

    #[test]
    fn base_cases() {
        let d = DelayVector::commensurate(&[1, 2], qi(1)).unwrap();
        let frame = LevelFrame::own(&d).unwrap();
        let sig = scalar_signal(&[0.3, -0.7]);
        let mut table = CoefficientTable::new(&sig, &frame).unwrap();
        assert_eq!(table.xi(&[0, 0], &q(5, 3)).unwrap(), Mat::identity(1));
        assert_eq!(*table.xi(&[1, 0], &qi(0)).unwrap().get(0, 0), C64::new(0.3, 0.0));
        assert!(table.xi(&[-1, 2], &qi(0)).unwrap().is_zero());
        assert!(table.xi(&[65, 0], &qi(0)).is_err());
    }

    #[test]
    fn geometric_scalar() {
        let d = DelayVector::commensurate(&[1], qi(1)).unwrap();
        let frame = LevelFrame::own(&d).unwrap();
        let sig = scalar_signal(&[0.5]);
        let mut table = CoefficientTable::new(&sig, &frame).unwrap();
        for n in 0..10 {
            let x = table.xi(&[n], &q(7, 2)).unwrap();
            assert!((x.get(0, 0).re - 0.5f64.powi(n as i32)).abs() < 1e-15);
        }
        // Θ_{n,t} = a^n on (n-1, n).
        let th = table.theta(&ClassKey(vec![4]), &q(7, 2)).unwrap();
        assert!((th.get(0, 0).re - 0.0625).abs() < 1e-15);
        assert!(table.theta(&ClassKey(vec![4]), &q(-1, 2)).unwrap().is_zero());
        assert!(table.theta(&ClassKey(vec![0]), &qi(1)).unwrap().is_zero());
    }

    #[test]
    fn two_orderings() {
        let d = DelayVector::independent(vec![qi(1), q(3, 2)]).unwrap();
        let frame = LevelFrame::own(&d).unwrap();
        let sig = Piecewise::new(
            vec![q(1, 2)],
            vec![
                MatrixTuple::scalars(&[C64::new(1.0, 0.0), C64::new(2.0, 0.0)]),
                MatrixTuple::scalars(&[C64::new(3.0, 0.0), C64::new(5.0, 0.0)]),
            ],
        )
        .unwrap();
        let mut table = CoefficientTable::new(&sig, &frame).unwrap();
        let t = qi(1);
        // A1(t)A2(t-1) + A2(t)A1(t-3/2) = 3*2 + 5*1
        assert_eq!(table.xi(&[1, 1], &t).unwrap().get(0, 0).re, 11.0);
        assert_eq!(table.xi_pathsum(&[1, 1], &t, PATHSUM_CAP).unwrap().get(0, 0).re, 11.0);
        assert_eq!(table.xi_reverse(&[1, 1], &t).unwrap().get(0, 0).re, 11.0);
        assert!(table.xi_pathsum(&[-1, 1], &t, PATHSUM_CAP).is_err());
    }

    #[test]
    fn xi_hat_and_a_hat() {
        let d = DelayVector::commensurate(&[1, 2], qi(1)).unwrap();
        let frame = LevelFrame::own(&d).unwrap();
        let (a, b) = (0.3, -0.7);
        let sig = scalar_signal(&[a, b]);
        let mut table = CoefficientTable::new(&sig, &frame).unwrap();
        let hat = table.xi_hat(&ClassKey(vec![2]), &qi(3)).unwrap();
        assert!((hat.get(0, 0).re - (a * a + b)).abs() < 1e-15);
        assert!(table.xi_hat(&ClassKey(vec![-1]), &qi(3)).unwrap().is_zero());

        let same = DelayVector::commensurate(&[1, 1], qi(1)).unwrap();
        let frame2 = LevelFrame::own(&same).unwrap();
        let table2 = CoefficientTable::new(&sig, &frame2).unwrap();
        assert_eq!(table2.groups(), &[vec![0, 1]]);
        assert!((table2.a_hat(&[0, 1], &qi(0)).get(0, 0).re - (a + b)).abs() < 1e-15);
    }
}
