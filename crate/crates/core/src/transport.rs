//! Unit-speed transport on `N` intervals coupled at their left ends by a
//! time-varying transmission matrix, solved through the equivalent
//! difference equation on the boundary traces.
//!
//! Space is discretized in cells of width `h` centred at `x_k = (k + ½)h`,
//! and the left boundary trace `v_i` is stored at `τ_p = (p - ½)h`, so that
//! `u_i(mh, x_k) = v_i(τ_{m-k})` with no interpolation.

use crate::diffeq::{DirectSolver, InitialCondition};
use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::rational::{exact_multiple, q, qi, to_f64, Q};
use crate::scalar::{Scalar, C64};
use crate::signal::{MatrixTuple, Piecewise, SwitchingSignal};
use num::{Signed, Zero};
use rayon::prelude::*;

/// Matrix-valued, piecewise-constant transmission signal.
pub type TransmissionSignal = Piecewise<Mat<C64>>;

/// `A_i = M P_i`: the `i`-th column of `M` in column `i`, zeros elsewhere.
pub fn to_difference<S: Scalar>(m: &Mat<S>) -> MatrixTuple<S> {
    let n = m.dim();
    let mats = (0..n)
        .map(|i| Mat::from_fn(n, |r, c| if c == i { m.get(r, c).clone() } else { S::zero() }))
        .collect();
    MatrixTuple::new(mats).expect("square and nonempty")
}

#[derive(Debug, Clone)]
pub struct TransportSystem {
    lengths: Vec<Q>,
    transmission: TransmissionSignal,
}

impl TransportSystem {
    pub fn new(lengths: Vec<Q>, transmission: TransmissionSignal) -> Result<Self> {
        if lengths.is_empty() || lengths.iter().any(|l| !l.is_positive()) {
            return Err(Error::invalid("edge lengths must be positive"));
        }
        if transmission.values().iter().any(|m| m.dim() != lengths.len()) {
            return Err(Error::Dimension("transmission matrix size differs from the number of edges".into()));
        }
        Ok(Self { lengths, transmission })
    }

    pub fn lengths(&self) -> &[Q] {
        &self.lengths
    }

    pub fn transmission(&self) -> &TransmissionSignal {
        &self.transmission
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn difference_signal(&self) -> SwitchingSignal<C64> {
        self.transmission.map(to_difference)
    }
}

/// Cell counts `n_i = L_i / h`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportGrid {
    step: Q,
    cells: Vec<usize>,
}

impl TransportGrid {
    pub fn new(lengths: &[Q], step: &Q) -> Result<Self> {
        if !step.is_positive() {
            return Err(Error::OutOfRange("grid step must be positive".into()));
        }
        let cells = lengths
            .iter()
            .map(|l| match exact_multiple(l, step) {
                Some(n) if n > 0 => Ok(n as usize),
                _ => Err(Error::InexactTime(format!(
                    "step {} does not divide length {}",
                    crate::rational::format_q(step),
                    crate::rational::format_q(l)
                ))),
            })
            .collect::<Result<_>>()?;
        Ok(Self { step: step.clone(), cells })
    }

    pub fn step(&self) -> &Q {
        &self.step
    }

    pub fn h(&self) -> f64 {
        to_f64(&self.step)
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn max_cells(&self) -> usize {
        self.cells.iter().copied().max().unwrap_or(0)
    }

    /// Cell-centre coordinates of edge `i`.
    pub fn centres(&self, i: usize) -> Vec<f64> {
        let h = self.h();
        (0..self.cells[i]).map(|k| (k as f64 + 0.5) * h).collect()
    }

    /// Samples `f(i, x)` at the cell centres of every edge.
    pub fn sample(&self, f: impl Fn(usize, f64) -> C64) -> Vec<Vec<C64>> {
        (0..self.cells.len()).map(|i| self.centres(i).into_iter().map(|x| f(i, x)).collect()).collect()
    }

    /// `τ_p = (p - ½)h`.
    pub fn trace_time(&self, p: i64) -> Q {
        &self.step * (qi(p) - q(1, 2))
    }
}

/// Boundary traces of a transport simulation on its grid.
#[derive(Debug, Clone)]
pub struct TransportRun {
    grid: TransportGrid,
    offset: usize,
    traces: Vec<Vec<C64>>,
    steps: usize,
}

impl TransportRun {
    pub fn grid(&self) -> &TransportGrid {
        &self.grid
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `v_i(τ_p)`; zero before the initial data.
    pub fn trace(&self, i: usize, p: i64) -> C64 {
        let idx = p + self.offset as i64;
        if idx < 0 {
            return C64::zero();
        }
        self.traces[i][idx as usize]
    }

    /// `u_i(mh, x_k)` for all cells `k`.
    pub fn field(&self, i: usize, m: usize) -> Vec<C64> {
        (0..self.grid.cells[i]).map(|k| self.trace(i, m as i64 - k as i64)).collect()
    }

    pub fn fields(&self, m: usize) -> Vec<Vec<C64>> {
        (0..self.grid.cells.len()).map(|i| self.field(i, m)).collect()
    }

    /// `w_i(τ_p) = u_i(τ_p, L_i) = v_i(τ_p - L_i)`.
    pub fn right_trace(&self, p: i64) -> Vec<C64> {
        (0..self.grid.cells.len()).map(|i| self.trace(i, p - self.grid.cells[i] as i64)).collect()
    }

    /// `½ h Σ_i Σ_k |u_i(mh, x_k)|²`, the squared norm scaled for wave energy.
    pub fn half_energy(&self, m: usize) -> f64 {
        0.5 * self.grid.h() * self.fields(m).iter().flatten().map(|z| z.norm_sqr()).sum::<f64>()
    }
}

fn check_profiles(grid: &TransportGrid, profiles: &[Vec<C64>]) -> Result<()> {
    if profiles.len() != grid.cells.len() || profiles.iter().zip(&grid.cells).any(|(p, &n)| p.len() != n) {
        return Err(Error::Dimension("profiles must have one sample per cell of each edge".into()));
    }
    Ok(())
}

/// Advances the transport system `steps` grid steps from cell-sampled
/// profiles. The transmission matrix is sampled at the trace times `τ_p`.
pub fn simulate_transport(
    system: &TransportSystem,
    profiles: &[Vec<C64>],
    step: &Q,
    steps: usize,
) -> Result<TransportRun> {
    let grid = TransportGrid::new(system.lengths(), step)?;
    check_profiles(&grid, profiles)?;
    let n = system.len();
    let offset = grid.max_cells().saturating_sub(1);
    let mut traces: Vec<Vec<C64>> = vec![vec![C64::zero(); offset + 1 + steps]; n];
    // v_i(τ_p) = u_{i,0}(x_{-p}) for -n_i < p ≤ 0.
    for (i, prof) in profiles.iter().enumerate() {
        for (k, &val) in prof.iter().enumerate() {
            traces[i][offset - k] = val;
        }
    }
    for p in 1..=steps {
        let m = system.transmission.at(&grid.trace_time(p as i64));
        let back: Vec<C64> = (0..n)
            .map(|j| {
                let idx = offset as i64 + p as i64 - grid.cells[j] as i64;
                if idx < 0 { C64::zero() } else { traces[j][idx as usize] }
            })
            .collect();
        let next = m.apply(&back);
        for (i, val) in next.into_iter().enumerate() {
            traces[i][offset + p] = val;
        }
    }
    Ok(TransportRun { grid, offset, traces, steps })
}

/// Exact pointwise field values `u_i(t, x)` for piecewise-constant cell
/// data, evaluated through the difference equation at arbitrary rational
/// `(t, x)`.
pub fn exact_field_values(
    system: &TransportSystem,
    profiles: &[Vec<C64>],
    step: &Q,
    queries: &[(usize, Q, Q)],
) -> Result<Vec<C64>> {
    let grid = TransportGrid::new(system.lengths(), step)?;
    check_profiles(&grid, profiles)?;
    let n = system.len();
    let total = grid.max_cells();
    let l_max = step * qi(total as i64);
    // Cell c covers [-L_max + c h, -L_max + (c+1) h), i.e. profile cell total-1-c.
    let cells: Vec<Vec<C64>> = (0..total)
        .map(|c| {
            let k = total - 1 - c;
            (0..n).map(|i| profiles[i].get(k).copied().unwrap_or_else(C64::zero)).collect()
        })
        .collect();
    let u0 = InitialCondition::from_cells(l_max, step, cells)?;
    let signal = system.difference_signal();
    let mut solver = DirectSolver::new(&u0, &signal, system.lengths())?;
    queries
        .iter()
        .map(|(i, t, x)| {
            if *i >= n || x.is_negative() || x > &system.lengths[*i] || t.is_negative() {
                return Err(Error::OutOfRange("query outside the space-time domain".into()));
            }
            Ok(solver.eval(&(t - x))[*i])
        })
        .collect()
}

/// `r × N` complex constraint matrix defining `{u : R ∫u = 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMatrix {
    rows: Vec<Vec<C64>>,
    cols: usize,
}

impl ConstraintMatrix {
    pub fn new(rows: Vec<Vec<C64>>, cols: usize) -> Result<Self> {
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension(format!("constraint rows must have {cols} entries")));
        }
        if rows.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("constraint entries must be finite"));
        }
        Ok(Self { rows, cols })
    }

    pub fn empty(cols: usize) -> Self {
        Self { rows: Vec::new(), cols }
    }

    pub fn rows(&self) -> &[Vec<C64>] {
        &self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.rows.iter().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// `max |R X - R|` entrywise, for a square `X`.
    pub fn right_invariance(&self, x: &Mat<C64>) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| {
                (0..self.cols).map(move |c| {
                    let rx: C64 = (0..self.cols).map(|k| r[k] * x.get(k, c)).sum();
                    (rx - r[c]).norm()
                })
            })
            .fold(0.0, f64::max)
    }
}

fn max_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest `|Σ_j ρ_ij ∫ u_j|` over rows, integrals by the cell (midpoint) rule.
pub fn y_residual(profiles: &[Vec<C64>], r: &ConstraintMatrix, step: &Q) -> f64 {
    let h = to_f64(step);
    let integrals: Vec<C64> = profiles.iter().map(|p| p.iter().sum::<C64>() * h).collect();
    max_norm(&r.apply(&integrals))
}

pub fn y_projection_check(profiles: &[Vec<C64>], r: &ConstraintMatrix, step: &Q, tol: f64) -> bool {
    y_residual(profiles, r, step) <= tol
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct InvarianceResidual {
    /// `max_p |R (M(τ_p) - id) w(τ_p)|`.
    pub algebraic: f64,
    /// `max_m |R ∫ (u(mh) - u(0))|`, from the reconstructed fields.
    pub integral: f64,
}

impl InvarianceResidual {
    pub fn holds(&self, tol: f64) -> bool {
        self.algebraic <= tol && self.integral <= tol
    }
}

pub fn invariance_residual(
    r: &ConstraintMatrix,
    system: &TransportSystem,
    run: &TransportRun,
) -> Result<InvarianceResidual> {
    if r.cols() != system.len() {
        return Err(Error::Dimension("constraint matrix width differs from the number of edges".into()));
    }
    let grid = run.grid();
    let algebraic = (1..=run.steps())
        .into_par_iter()
        .map(|p| {
            let mut m = system.transmission.at(&grid.trace_time(p as i64)).clone();
            for i in 0..m.dim() {
                let d = *m.get(i, i) - C64::new(1.0, 0.0);
                m.set(i, i, d);
            }
            max_norm(&r.apply(&m.apply(&run.right_trace(p as i64))))
        })
        .reduce(|| 0.0, f64::max);
    let h = grid.h();
    let integral_at = |m: usize| -> Vec<C64> { run.fields(m).iter().map(|f| f.iter().sum::<C64>() * h).collect() };
    let base = integral_at(0);
    let integral = (0..=run.steps())
        .into_par_iter()
        .map(|m| {
            let diff: Vec<C64> = integral_at(m).iter().zip(&base).map(|(a, b)| a - b).collect();
            max_norm(&r.apply(&diff))
        })
        .reduce(|| 0.0, f64::max);
    Ok(InvarianceResidual { algebraic, integral })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn constant_system(lengths: Vec<Q>, m: Mat<C64>) -> TransportSystem {
        TransportSystem::new(lengths, Piecewise::constant(m)).unwrap()
    }

    #[test]
    fn column_decomposition() {
        let m = Mat::from_fn(3, |i, j| c((i * 3 + j) as f64 - 4.0));
        let t = to_difference(&m);
        assert_eq!(t.sum(), m);
        for i in 0..3 {
            for r in 0..3 {
                for col in 0..3 {
                    if col != i {
                        assert!(t.get(i).get(r, col).is_zero());
                    }
                }
            }
        }
        assert_eq!(to_difference(&Mat::<C64>::identity(2)).get(1), &Mat::from_fn(2, |r, s| c((r == 1 && s == 1) as u8 as f64)));
        assert!(to_difference(&Mat::<C64>::zeros(2)).is_zero());
    }

    #[test]
    fn circular_transport_on_one_edge() {
        let sys = constant_system(vec![qi(1)], Mat::identity(1));
        let step = q(1, 8);
        let grid = TransportGrid::new(sys.lengths(), &step).unwrap();
        let u0 = grid.sample(|_, x| c((x * 7.0).sin() + x));
        let run = simulate_transport(&sys, &u0, &step, 40).unwrap();
        assert_eq!(run.fields(0), u0);
        for m in 0..=40usize {
            let f = run.field(0, m);
            for (k, val) in f.iter().enumerate() {
                let src = (k as i64 - m as i64).rem_euclid(8) as usize;
                assert_eq!(*val, u0[0][src]);
            }
        }
        let zero = simulate_transport(&sys, &[vec![c(0.0); 8]], &step, 10).unwrap();
        assert!(zero.field(0, 10).iter().all(|z| z.is_zero()));
        assert!(simulate_transport(&sys, &u0, &q(1, 3), 1).is_err());
    }

    #[test]
    fn grid_matches_exact_evaluator() {
        let m = Mat::from_rows(vec![vec![c(0.2), c(-0.7)], vec![c(0.9), c(0.1)]]).unwrap();
        let m2 = Mat::from_rows(vec![vec![c(-0.5), c(0.3)], vec![c(0.0), c(0.8)]]).unwrap();
        let sig = Piecewise::new(vec![q(3, 4)], vec![m, m2]).unwrap();
        let sys = TransportSystem::new(vec![qi(1), q(1, 2)], sig).unwrap();
        let step = q(1, 4);
        let grid = TransportGrid::new(sys.lengths(), &step).unwrap();
        let u0 = grid.sample(|i, x| c(1.0 + i as f64 + x * x));
        let run = simulate_transport(&sys, &u0, &step, 20).unwrap();
        let mut queries = Vec::new();
        let mut expected = Vec::new();
        for mstep in [0usize, 3, 7, 20] {
            for i in 0..2 {
                for (k, val) in run.field(i, mstep).into_iter().enumerate() {
                    queries.push((i, &step * qi(mstep as i64), &step * (qi(k as i64) + q(1, 2))));
                    expected.push(val);
                }
            }
        }
        let exact = exact_field_values(&sys, &u0, &step, &queries).unwrap();
        for (a, b) in exact.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
        // Boundary law at every grid time.
        for p in 1..=20i64 {
            let mt = sys.transmission().at(&grid.trace_time(p));
            let lhs: Vec<C64> = (0..2).map(|i| run.trace(i, p)).collect();
            let rhs = mt.apply(&run.right_trace(p));
            assert!(lhs.iter().zip(&rhs).all(|(a, b)| (a - b).norm() < 1e-12));
        }
    }

    #[test]
    fn y_checks() {
        let step = q(1, 100);
        let grid = TransportGrid::new(&[qi(2)], &step).unwrap();
        let r = ConstraintMatrix::new(vec![vec![c(1.0)]], 1).unwrap();
        let sine = grid.sample(|_, x| c((std::f64::consts::PI * x).sin()));
        assert!(y_projection_check(&sine, &r, &step, 1e-10));
        assert!(!y_projection_check(&grid.sample(|_, _| c(1.0)), &r, &step, 1e-10));
        assert!(y_projection_check(&grid.sample(|_, _| c(0.0)), &r, &step, 0.0));
    }

    #[test]
    fn invariance_examples() {
        let sys = constant_system(vec![qi(1), qi(1)], Mat::identity(2));
        let step = q(1, 10);
        let grid = TransportGrid::new(sys.lengths(), &step).unwrap();
        let u0 = grid.sample(|i, x| c(x + i as f64));
        let run = simulate_transport(&sys, &u0, &step, 30).unwrap();
        let r = ConstraintMatrix::new(vec![vec![c(1.0), c(-2.0)]], 2).unwrap();
        let res = invariance_residual(&r, &sys, &run).unwrap();
        assert_eq!(res.algebraic, 0.0);
        assert!(res.integral < 1e-12);
        let res = invariance_residual(&ConstraintMatrix::empty(2), &sys, &run).unwrap();
        assert!(res.holds(0.0));

        let swap = Mat::from_rows(vec![vec![c(0.0), c(1.0)], vec![c(1.0), c(0.0)]]).unwrap();
        let sys = constant_system(vec![qi(1), qi(1)], swap);
        let run = simulate_transport(&sys, &u0, &step, 30).unwrap();
        let sum = ConstraintMatrix::new(vec![vec![c(1.0), c(1.0)]], 2).unwrap();
        assert!(invariance_residual(&sum, &sys, &run).unwrap().holds(1e-12));
        let diff = ConstraintMatrix::new(vec![vec![c(1.0), c(-1.0)]], 2).unwrap();
        assert!(!invariance_residual(&diff, &sys, &run).unwrap().holds(1e-6));
    }
}
