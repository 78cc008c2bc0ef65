//! Solutions of `u(t) = Σ_j A_j(t) u(t - L_j)` with initial data on
//! `[-L_max, 0)`: direct recursion, coefficient representation, growth-rate
//! estimates and worst-case initial conditions.

use crate::coefficients::CoefficientTable;
use crate::error::{Error, Result};
use crate::rational::{qi, to_f64, Q};
use crate::ratlattice::{ClassKey, LevelFrame};
use crate::scalar::Scalar;
use crate::signal::SwitchingSignal;
use num::{Signed, Zero};
use serde::Serialize;
use std::collections::{BTreeSet, HashMap};

/// One polynomial piece, `Σ_k c_k (t - start)^k` per component.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment<S> {
    pub start: Q,
    pub coeffs: Vec<Vec<S>>,
}

/// Initial condition on `[-L_max, 0)`, piecewise polynomial with rational
/// breakpoints. Outside its domain it evaluates to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialCondition<S> {
    l_max: Q,
    dim: usize,
    segments: Vec<Segment<S>>,
}

impl<S: Scalar> InitialCondition<S> {
    pub fn new(l_max: Q, dim: usize, mut segments: Vec<Segment<S>>) -> Result<Self> {
        segments.sort_by(|a, b| a.start.cmp(&b.start));
        if segments.windows(2).any(|w| w[0].start == w[1].start) {
            return Err(Error::invalid("initial condition segments must start at distinct times"));
        }
        if segments.iter().any(|s| s.coeffs.len() != dim) {
            return Err(Error::Dimension("segment coefficient count differs from dimension".into()));
        }
        if let Some(first) = segments.first() {
            if first.start > -l_max.clone() {
                return Err(Error::invalid("initial condition must cover [-L_max, 0)"));
            }
        } else {
            return Err(Error::invalid("initial condition has no segments"));
        }
        Ok(Self { l_max, dim, segments })
    }

    pub fn constant(l_max: Q, value: Vec<S>) -> Self {
        let dim = value.len();
        let start = -l_max.clone();
        Self { l_max, dim, segments: vec![Segment { start, coeffs: value.into_iter().map(|v| vec![v]).collect() }] }
    }

    pub fn zero(l_max: Q, dim: usize) -> Self {
        Self::constant(l_max, vec![S::zero(); dim])
    }

    /// Piecewise-constant data: `values[k]` on `[-L_max + k·step, -L_max + (k+1)·step)`.
    pub fn from_cells(l_max: Q, step: &Q, values: Vec<Vec<S>>) -> Result<Self> {
        let dim = values.first().map_or(0, Vec::len);
        let segments = values
            .into_iter()
            .enumerate()
            .map(|(k, v)| Segment {
                start: -l_max.clone() + step * qi(k as i64),
                coeffs: v.into_iter().map(|x| vec![x]).collect(),
            })
            .collect();
        Self::new(l_max, dim, segments)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn l_max(&self) -> &Q {
        &self.l_max
    }

    pub fn segments(&self) -> &[Segment<S>] {
        &self.segments
    }

    pub fn eval(&self, t: &Q) -> Vec<S> {
        if t.is_positive() || t.is_zero() || *t < -self.l_max.clone() {
            return vec![S::zero(); self.dim];
        }
        let idx = self.segments.partition_point(|s| &s.start <= t);
        let seg = &self.segments[idx - 1];
        let x = S::from_q(&(t - &seg.start));
        seg.coeffs
            .iter()
            .map(|c| c.iter().rev().fold(S::zero(), |acc, ck| acc * x.clone() + ck.clone()))
            .collect()
    }

    pub fn scaled_sum(&self, alpha: &S, other: &Self, beta: &S) -> Result<Self> {
        if self.dim != other.dim || self.l_max != other.l_max {
            return Err(Error::Dimension("initial conditions live on different spaces".into()));
        }
        let starts: BTreeSet<Q> =
            self.segments.iter().chain(&other.segments).map(|s| s.start.clone()).collect();
        let mut segments = Vec::new();
        for start in starts {
            let a = self.segment_at(&start);
            let b = other.segment_at(&start);
            let coeffs = (0..self.dim)
                .map(|c| {
                    let pa = shift_poly(&a.coeffs[c], &(&start - &a.start));
                    let pb = shift_poly(&b.coeffs[c], &(&start - &b.start));
                    let len = pa.len().max(pb.len());
                    (0..len)
                        .map(|k| {
                            let x = pa.get(k).cloned().unwrap_or_else(S::zero);
                            let y = pb.get(k).cloned().unwrap_or_else(S::zero);
                            alpha.clone() * x + beta.clone() * y
                        })
                        .collect()
                })
                .collect();
            segments.push(Segment { start, coeffs });
        }
        Self::new(self.l_max.clone(), self.dim, segments)
    }

    fn segment_at(&self, t: &Q) -> &Segment<S> {
        let idx = self.segments.partition_point(|s| &s.start <= t);
        &self.segments[idx.max(1) - 1]
    }

    /// Sup norm sampled on the grid `-L_max + k·step`.
    pub fn sup_norm(&self, step: &Q) -> f64 {
        let mut s = -self.l_max.clone();
        let mut best = 0.0f64;
        while s.is_negative() {
            best = best.max(vec_norm(&self.eval(&s)));
            s += step;
        }
        best
    }
}

/// Re-expands a polynomial in `x` as a polynomial in `y = x - shift`.
fn shift_poly<S: Scalar>(c: &[S], shift: &Q) -> Vec<S> {
    // p(y + shift) via repeated synthetic division.
    let s = S::from_q(shift);
    let mut coeffs = c.to_vec();
    let n = coeffs.len();
    for i in 0..n {
        for k in (i..n.saturating_sub(1)).rev() {
            let add = coeffs[k + 1].clone() * s.clone();
            coeffs[k] = coeffs[k].clone() + add;
        }
    }
    coeffs
}

pub fn vec_norm<S: Scalar>(v: &[S]) -> f64 {
    v.iter().map(Scalar::modulus).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    Representation,
}

#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub times: Vec<Q>,
    pub values: Vec<Vec<S>>,
    pub method: Method,
}

/// Memoized direct solver: `u(t)` from `u(t - L_j)` down to the initial data.
pub struct DirectSolver<'a, S> {
    u0: &'a InitialCondition<S>,
    signal: &'a SwitchingSignal<S>,
    delays: Vec<Q>,
    memo: HashMap<Q, Vec<S>>,
}

impl<'a, S: Scalar> DirectSolver<'a, S> {
    pub fn new(u0: &'a InitialCondition<S>, signal: &'a SwitchingSignal<S>, delays: &[Q]) -> Result<Self> {
        let (n, d) = signal.validate_tuples()?;
        if n != delays.len() || d != u0.dim() {
            return Err(Error::Dimension("signal, delays and initial condition disagree".into()));
        }
        let l_max = delays.iter().max().cloned().expect("nonempty");
        if &l_max != u0.l_max() {
            return Err(Error::invalid("initial condition domain must be [-L_max, 0)"));
        }
        Ok(Self { u0, signal, delays: delays.to_vec(), memo: HashMap::new() })
    }

    pub fn eval(&mut self, t: &Q) -> Vec<S> {
        if t.is_negative() {
            return self.u0.eval(t);
        }
        if let Some(v) = self.memo.get(t) {
            return v.clone();
        }
        // Collect all nonnegative times the value depends on, then fill them
        // in increasing order so each lookup hits either data or the memo.
        let mut pending = vec![t.clone()];
        let mut needed = BTreeSet::new();
        while let Some(s) = pending.pop() {
            if s.is_negative() || self.memo.contains_key(&s) || !needed.insert(s.clone()) {
                continue;
            }
            for l in &self.delays {
                pending.push(&s - l);
            }
        }
        for s in needed {
            let tuple = self.signal.at(&s);
            let mut acc = vec![S::zero(); self.u0.dim()];
            for (j, l) in self.delays.iter().enumerate() {
                let back = &s - l;
                let prev = if back.is_negative() { self.u0.eval(&back) } else { self.memo[&back].clone() };
                for (a, b) in acc.iter_mut().zip(tuple.get(j).apply(&prev)) {
                    *a = a.clone() + b;
                }
            }
            self.memo.insert(s, acc);
        }
        self.memo[t].clone()
    }

    /// `‖u_t‖_∞` sampled on `t - L_max + k·step`, `k = 0, 1, …` while `< t`.
    pub fn window_norm(&mut self, t: &Q, step: &Q) -> f64 {
        let l_max = self.u0.l_max().clone();
        let mut s = t - &l_max;
        let mut best = 0.0f64;
        while &s < t {
            best = best.max(vec_norm(&self.eval(&s)));
            s += step;
        }
        best
    }
}

pub fn evaluate_direct<S: Scalar>(
    u0: &InitialCondition<S>,
    signal: &SwitchingSignal<S>,
    delays: &[Q],
    t: &Q,
) -> Result<Vec<S>> {
    Ok(DirectSolver::new(u0, signal, delays)?.eval(t))
}

/// `u(t) = Σ_{[n] : t < L·n ≤ t + L_max} Θ_{[n],t} u₀(t - L·n)` for `t ≥ 0`.
pub fn evaluate_representation<S: Scalar>(
    u0: &InitialCondition<S>,
    table: &mut CoefficientTable<'_, S>,
    t: &Q,
) -> Result<Vec<S>> {
    if t.is_negative() {
        return Err(Error::OutOfRange("representation formula needs t ≥ 0".into()));
    }
    let frame = table.frame().clone();
    let l_max = frame.max_delay();
    let upper = t + &l_max;
    let mut acc = vec![S::zero(); u0.dim()];
    for (key, level) in frame.classes_up_to(&upper) {
        if &level <= t {
            continue;
        }
        let theta = table.theta(&key, t)?;
        if theta.is_zero() {
            continue;
        }
        let data = u0.eval(&(t - &level));
        for (a, b) in acc.iter_mut().zip(theta.apply(&data)) {
            *a = a.clone() + b;
        }
    }
    Ok(acc)
}

/// Sample times inside the open window `(L·n - L_max, L·n)`: the points where
/// `Θ_{[n],·}` may jump (shifted signal breakpoints and `L·n - L_j`) together
/// with the midpoints between consecutive points.
pub fn window_samples<S: Scalar>(
    signal: &SwitchingSignal<S>,
    frame: &LevelFrame,
    level: &Q,
    lower_levels: &[Q],
) -> Vec<Q> {
    let lo = level - frame.max_delay();
    let hi = level.clone();
    let mut cuts: BTreeSet<Q> = BTreeSet::new();
    cuts.insert(lo.clone());
    cuts.insert(hi.clone());
    for l in frame.delays() {
        cuts.insert(level - l);
    }
    for b in signal.breakpoints() {
        for m in lower_levels {
            let c = b + m;
            if c > lo && c < hi {
                cuts.insert(c);
            }
        }
    }
    let cuts: Vec<Q> = cuts.into_iter().filter(|c| *c >= lo && *c <= hi).collect();
    let two = qi(2);
    let mut out = BTreeSet::new();
    for w in cuts.windows(2) {
        if w[0] > lo {
            out.insert(w[0].clone());
        }
        out.insert((&w[0] + &w[1]) / &two);
    }
    out.into_iter().filter(|s| s.is_positive()).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovEstimate {
    /// `None` when every sampled coefficient vanished (the rate is `-∞`).
    pub value: Option<f64>,
    pub window_lo: f64,
    pub window_hi: f64,
    pub samples: usize,
}

/// `max ln|Θ_{[n],t}| / t` over classes with `L·n ∈ [horizon/2, horizon]`,
/// over the given signals and over sampled `t ∈ (L·n - L_max, L·n)`.
pub fn lyapunov_theta<S: Scalar>(
    signals: &[SwitchingSignal<S>],
    frame: &LevelFrame,
    horizon: &Q,
) -> Result<LyapunovEstimate> {
    let l_max = frame.max_delay();
    if *horizon < &l_max * qi(3) {
        return Err(Error::OutOfRange("horizon must be at least 3·L_max".into()));
    }
    let lo = horizon / qi(2);
    let classes = frame.classes_up_to(horizon);
    let levels: Vec<Q> = classes.iter().map(|(_, l)| l.clone()).collect();
    let mut best: Option<f64> = None;
    let mut samples = 0;
    for signal in signals {
        let mut table = CoefficientTable::new(signal, frame)?;
        for (key, level) in classes.iter().filter(|(_, l)| *l >= lo) {
            let below: Vec<Q> = levels.iter().filter(|l| *l < level).cloned().collect();
            for t in window_samples(signal, frame, level, &below) {
                samples += 1;
                let norm = table.theta(key, &t)?.norm_inf();
                if norm > 0.0 {
                    let r = norm.ln() / to_f64(&t);
                    best = Some(best.map_or(r, |b: f64| b.max(r)));
                }
            }
            table.clear();
        }
    }
    Ok(LyapunovEstimate { value: best, window_lo: to_f64(&lo), window_hi: to_f64(horizon), samples })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub holds: bool,
    pub constant: f64,
    /// `(t, ‖u_t‖, bound)` at the first violation.
    pub violation: Option<(f64, f64, f64)>,
}

/// Checks `‖u_t‖ ≤ C (t+1)^{N-1} max_{[t-L_max, t]} f · ‖u₀‖` on sampled
/// window norms, with `C` fitted at `t = 0`.
pub fn exponential_bound_check(
    samples: &[(f64, f64)],
    u0_norm: f64,
    f: &dyn Fn(f64) -> f64,
    l_max: f64,
    n_delays: usize,
) -> BoundCheck {
    if u0_norm == 0.0 {
        return BoundCheck { holds: true, constant: 0.0, violation: None };
    }
    let fmax = |t: f64| -> f64 {
        let steps = 256;
        (0..=steps).map(|k| f(t - l_max + l_max * k as f64 / steps as f64)).fold(f64::MIN, f64::max)
    };
    let first = samples.iter().find(|(t, _)| *t == 0.0).map_or(u0_norm, |&(_, n)| n);
    let constant = first / (fmax(0.0) * u0_norm);
    let slack = 1e-12;
    for &(t, norm) in samples {
        let bound = constant * (t + 1.0).powi(n_delays as i32 - 1) * fmax(t) * u0_norm;
        if norm > bound * (1.0 + slack) + slack {
            return BoundCheck { holds: false, constant, violation: Some((t, norm, bound)) };
        }
    }
    BoundCheck { holds: true, constant, violation: None }
}

#[derive(Debug, Clone)]
pub struct Witness<S> {
    pub initial: InitialCondition<S>,
    pub coordinate: usize,
    pub theta_norm: f64,
}

/// Initial condition `u₀(s) = μ(s - t₀ + L·n₀) e_{j₀}` with a hat bump `μ`
/// of half-width `δ`; the solution near `t₀` then reduces to the single term
/// `Θ_{[n₀], t₀+s} μ(s) e_{j₀}`.
pub fn adversarial_witness<S: Scalar>(
    table: &mut CoefficientTable<'_, S>,
    key: &ClassKey,
    t0: &Q,
    delta: &Q,
) -> Result<Witness<S>> {
    let frame = table.frame().clone();
    let l_max = frame.max_delay();
    let level = frame.level(key);
    if !(*t0 > &level - &l_max && *t0 < level) {
        return Err(Error::OutOfRange("t0 must lie in (L·n0 - L_max, L·n0)".into()));
    }
    let two_delta = delta * qi(2);
    let mut limit = [t0 * qi(2), &level - t0, t0 - &level + &l_max].into_iter().min().expect("nonempty");
    for (_, other) in frame.classes_up_to(&(&level + &l_max)) {
        let gap = (&other - &level).abs();
        if !gap.is_zero() && gap < limit {
            limit = gap;
        }
    }
    if !delta.is_positive() || two_delta >= limit {
        return Err(Error::OutOfRange(format!(
            "2δ must be below {} for this lattice and window",
            crate::rational::format_q(&limit)
        )));
    }
    let theta = table.theta(key, t0)?;
    if theta.is_zero() {
        return Err(Error::Degenerate("Θ vanishes at this class and time; no witness".into()));
    }
    let d = theta.dim();
    let coordinate = (0..d)
        .max_by(|&a, &b| theta.column_norm_inf(a).total_cmp(&theta.column_norm_inf(b)).then(b.cmp(&a)))
        .expect("nonempty");
    // The constraints on δ keep the bump [c - δ, c + δ] strictly inside (-L_max, 0).
    let center = t0 - &level;
    let inv = S::from_q(&(Q::from_integer(1.into()) / delta));
    let ramp = |coeffs: Vec<S>| {
        let mut c = vec![vec![S::zero()]; d];
        c[coordinate] = coeffs;
        c
    };
    let segments = vec![
        Segment { start: -l_max.clone(), coeffs: ramp(vec![S::zero()]) },
        Segment { start: &center - delta, coeffs: ramp(vec![S::zero(), inv.clone()]) },
        Segment { start: center.clone(), coeffs: ramp(vec![S::one(), -inv]) },
        Segment { start: &center + delta, coeffs: ramp(vec![S::zero()]) },
    ];
    let initial = InitialCondition::new(l_max, d, segments)?;
    Ok(Witness { initial, coordinate, theta_norm: theta.norm_inf() })
}

/// Scales each `A_j` by `e^{μ L_j}`; solutions then pick up the factor `e^{μt}`.
pub fn exponentially_shifted(
    signal: &SwitchingSignal<crate::scalar::C64>,
    delays: &[Q],
    mu: f64,
) -> SwitchingSignal<crate::scalar::C64> {
    signal.map(|tuple| {
        tuple.map(|j, m| m.scale(&crate::scalar::C64::new((mu * to_f64(&delays[j])).exp(), 0.0)))
    })
}

/// Evaluates a direct trajectory at the given times.
pub fn trajectory<S: Scalar>(solver: &mut DirectSolver<'_, S>, times: &[Q]) -> Trajectory<S> {
    Trajectory { times: times.to_vec(), values: times.iter().map(|t| solver.eval(t)).collect(), method: Method::Direct }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use crate::ratlattice::DelayVector;
    use crate::scalar::C64;
    use crate::signal::{MatrixTuple, Piecewise};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn scalar(a: f64) -> SwitchingSignal<C64> {
        Piecewise::constant(MatrixTuple::scalars(&[c(a)]))
    }

    #[test]
    fn geometric_decay() {
        let sig = scalar(0.5);
        let u0 = InitialCondition::constant(qi(1), vec![c(1.0)]);
        let mut solver = DirectSolver::new(&u0, &sig, &[qi(1)]).unwrap();
        assert_eq!(solver.eval(&q(-1, 3)), vec![c(1.0)]);
        for (t, k) in [(q(0, 1), 1), (q(5, 2), 3), (qi(7), 8)] {
            assert!((solver.eval(&t)[0].re - 0.5f64.powi(k)).abs() < 1e-15);
        }
    }

    #[test]
    fn representation_small_time_and_zero_data() {
        let d = DelayVector::independent(vec![qi(1), q(3, 2)]).unwrap();
        let frame = LevelFrame::own(&d).unwrap();
        let sig = Piecewise::constant(MatrixTuple::scalars(&[c(0.4), c(-0.3)]));
        let u0 = InitialCondition::new(
            q(3, 2),
            1,
            vec![Segment { start: q(-3, 2), coeffs: vec![vec![c(1.0), c(2.0)]] }],
        )
        .unwrap();
        let mut table = CoefficientTable::new(&sig, &frame).unwrap();
        let t = q(1, 2);
        let rep = evaluate_representation(&u0, &mut table, &t).unwrap();
        let small = c(0.4) * u0.eval(&(&t - qi(1)))[0] + c(-0.3) * u0.eval(&(&t - q(3, 2)))[0];
        assert!((rep[0] - small).norm() < 1e-14);
        let zero = InitialCondition::zero(q(3, 2), 1);
        assert_eq!(evaluate_representation(&zero, &mut table, &qi(4)).unwrap(), vec![c(0.0)]);
    }

    #[test]
    fn linear_combination_of_data() {
        let a = InitialCondition::new(
            qi(2),
            1,
            vec![
                Segment { start: qi(-2), coeffs: vec![vec![c(1.0), c(1.0)]] },
                Segment { start: q(-1, 2), coeffs: vec![vec![c(3.0)]] },
            ],
        )
        .unwrap();
        let b = InitialCondition::new(
            qi(2),
            1,
            vec![
                Segment { start: qi(-2), coeffs: vec![vec![c(0.5)]] },
                Segment { start: qi(-1), coeffs: vec![vec![c(0.0), c(0.0), c(1.0)]] },
            ],
        )
        .unwrap();
        let mix = a.scaled_sum(&c(2.0), &b, &c(-1.0)).unwrap();
        for t in [q(-2, 1), q(-3, 2), q(-1, 1), q(-3, 4), q(-1, 2), q(-1, 10)] {
            let expect = c(2.0) * a.eval(&t)[0] - b.eval(&t)[0];
            assert!((mix.eval(&t)[0] - expect).norm() < 1e-13, "{t}");
        }
    }

    #[test]
    fn scalar_lyapunov() {
        let d = DelayVector::commensurate(&[1], qi(1)).unwrap();
        let frame = LevelFrame::own(&d).unwrap();
        let est = lyapunov_theta(&[scalar(0.5)], &frame, &qi(40)).unwrap();
        assert!((est.value.unwrap() - 0.5f64.ln()).abs() < 0.01, "{est:?}");
        let zero = lyapunov_theta(&[scalar(0.0)], &frame, &qi(6)).unwrap();
        assert!(zero.value.is_none());
        assert!(lyapunov_theta(&[scalar(0.5)], &frame, &qi(2)).is_err());
    }

    #[test]
    fn bound_check() {
        let ok = [(0.0, 1.0), (1.0, 0.5), (2.0, 0.25), (3.0, 0.125)];
        let r = exponential_bound_check(&ok, 1.0, &|t| 0.6f64.powf(t), 1.0, 1);
        assert!(r.holds, "{r:?}");
        let grow = [(0.0, 1.0), (1.0, 2.0), (2.0, 4.0)];
        let r = exponential_bound_check(&grow, 1.0, &|_| 0.01, 1.0, 1);
        assert!(!r.holds);
        assert_eq!(r.violation.unwrap().0, 1.0);
        assert!(exponential_bound_check(&grow, 0.0, &|_| 1.0, 1.0, 1).holds);
    }

    #[test]
    fn witness_scalar() {
        let d = DelayVector::commensurate(&[1], qi(1)).unwrap();
        let frame = LevelFrame::own(&d).unwrap();
        let sig = scalar(0.5);
        let mut table = CoefficientTable::new(&sig, &frame).unwrap();
        let w = adversarial_witness(&mut table, &ClassKey(vec![3]), &q(5, 2), &q(1, 10)).unwrap();
        assert_eq!(w.coordinate, 0);
        assert!((w.initial.eval(&q(-1, 2))[0].re - 1.0).abs() < 1e-15);
        assert!(w.initial.eval(&q(-3, 10))[0].re.abs() < 1e-15);
        let mut solver = DirectSolver::new(&w.initial, &sig, &[qi(1)]).unwrap();
        let norm = solver.window_norm(&q(26, 10), &q(1, 10));
        assert!(norm >= 0.125 - 1e-12, "{norm}");
        assert!(adversarial_witness(&mut table, &ClassKey(vec![3]), &q(5, 2), &q(1, 2)).is_err());
        assert!(adversarial_witness(&mut table, &ClassKey(vec![3]), &q(1, 2), &q(1, 10)).is_err());
    }
}
