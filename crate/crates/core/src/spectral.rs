//! Generalized joint spectral radii of switched delay equations.
//!
//! Products of coefficient matrices along increasing lattice paths are
//! accumulated level by level: a level is a value `Λ·n`, and each level
//! carries its own element of the family. The growth rate of these sums,
//! maximized over all level assignments, decides stability for every delay
//! vector with the same rational structure.

use crate::error::{Error, Result};
use crate::matrix::{spectral_radius, Mat};
use crate::rational::{to_f64, Q};
use crate::ratlattice::{ClassKey, DelayVector, LevelFrame};
use crate::scalar::{Scalar, C64};
use crate::signal::{MatrixTuple, Piecewise, SwitchingSignal};
use num::Signed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::f64::consts::TAU;

/// Default bound on the number of level assignments visited exhaustively.
pub const SEARCH_CAP: u64 = 1_000_000;

/// A finite set of matrix tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFamily {
    elements: Vec<MatrixTuple<C64>>,
}

impl MatrixFamily {
    pub fn new(elements: Vec<MatrixTuple<C64>>) -> Result<Self> {
        let Some(first) = elements.first() else {
            return Err(Error::invalid("matrix family is empty"));
        };
        let (n, d) = (first.len(), first.dim());
        if elements.iter().any(|e| e.len() != n || e.dim() != d) {
            return Err(Error::Dimension("family elements must share tuple length and dimension".into()));
        }
        Ok(Self { elements })
    }

    pub fn singleton(tuple: MatrixTuple<C64>) -> Self {
        Self { elements: vec![tuple] }
    }

    pub fn elements(&self) -> &[MatrixTuple<C64>] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn tuple_len(&self) -> usize {
        self.elements[0].len()
    }

    /// The family `{(e^{-νL_1}B_1, …, e^{-νL_N}B_N)}`.
    pub fn shifted(&self, nu: f64, delays: &[Q]) -> Self {
        let factors: Vec<C64> = delays.iter().map(|l| C64::new((-nu * to_f64(l)).exp(), 0.0)).collect();
        Self { elements: self.elements.iter().map(|e| e.map(|j, m| m.scale(&factors[j]))).collect() }
    }
}

/// Levels `Λ·n ≤ upper` together with, for each level and delay, the index
/// of the level one step below.
#[derive(Debug, Clone)]
pub struct LevelLattice {
    keys: Vec<ClassKey>,
    levels: Vec<Q>,
    index: HashMap<ClassKey, usize>,
    preds: Vec<Vec<Option<usize>>>,
}

impl LevelLattice {
    pub fn new(delays: &DelayVector, upper: &Q) -> Result<Self> {
        let frame = LevelFrame::own(delays)?;
        let classes = frame.classes_up_to(upper);
        let index: HashMap<ClassKey, usize> = classes.iter().enumerate().map(|(i, (k, _))| (k.clone(), i)).collect();
        let preds = classes
            .iter()
            .map(|(key, _)| {
                (0..delays.len())
                    .map(|j| {
                        let prev = key.minus_row(delays.row(j));
                        if prev.has_negative() {
                            None
                        } else {
                            index.get(&prev).copied()
                        }
                    })
                    .collect()
            })
            .collect();
        let (keys, levels) = classes.into_iter().unzip();
        Ok(Self { keys, levels, index, preds })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[ClassKey] {
        &self.keys
    }

    pub fn levels(&self) -> &[Q] {
        &self.levels
    }

    pub fn index_of(&self, key: &ClassKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    /// Index of `x - Λ_j`, if that is a level.
    pub fn pred(&self, i: usize, j: usize) -> Option<usize> {
        self.preds[i][j]
    }

    fn tuple_len(&self) -> usize {
        self.preds.first().map_or(0, Vec::len)
    }
}

/// `G(x_i)` for every level, with `choice(r)` the tuple attached to level `r`.
fn dp_all<'t, S: Scalar>(
    lattice: &LevelLattice,
    dim: usize,
    upto: usize,
    choice: impl Fn(usize) -> &'t MatrixTuple<S>,
) -> Vec<Mat<S>> {
    let mut g: Vec<Mat<S>> = Vec::with_capacity(upto + 1);
    g.push(Mat::identity(dim));
    for i in 1..=upto {
        g.push(dp_step(lattice, dim, &g, i, &choice));
    }
    g
}

fn dp_step<'t, S: Scalar>(
    lattice: &LevelLattice,
    dim: usize,
    g: &[Mat<S>],
    i: usize,
    choice: &impl Fn(usize) -> &'t MatrixTuple<S>,
) -> Mat<S> {
    let mut acc = Mat::zeros(dim);
    for j in 0..lattice.tuple_len() {
        if let Some(p) = lattice.pred(i, j) {
            acc.add_assign(&g[p].mul(choice(p).get(j)));
        }
    }
    acc
}

/// `G(x) = Σ_j G(x - Λ_j) · B_j^{x - Λ_j}`, `G(0) = id`, where `B^r` is the
/// tuple chosen for level `r`.
pub fn level_dp<S: Scalar>(
    choices: &BTreeMap<ClassKey, MatrixTuple<S>>,
    lattice: &LevelLattice,
    x: &ClassKey,
    dim: usize,
) -> Result<Mat<S>> {
    let target = lattice
        .index_of(x)
        .ok_or_else(|| Error::OutOfRange("target is not a level of the lattice".into()))?;
    let mut per_level = Vec::with_capacity(target);
    for key in &lattice.keys()[..target] {
        let tuple = choices
            .get(key)
            .ok_or_else(|| Error::invalid(format!("no element chosen for level {:?}", key.0)))?;
        if tuple.dim() != dim || tuple.len() != lattice.tuple_len() {
            return Err(Error::Dimension("choice tuples do not match the lattice and dimension".into()));
        }
        per_level.push(tuple);
    }
    Ok(dp_all(lattice, dim, target, |r| per_level[r]).pop().expect("nonempty"))
}

/// Brute-force sum over increasing paths, used as an oracle for [`level_dp`].
pub fn level_paths<S: Scalar>(
    choices: &BTreeMap<ClassKey, MatrixTuple<S>>,
    delays: &DelayVector,
    x: &ClassKey,
    dim: usize,
) -> Result<Mat<S>> {
    fn walk<S: Scalar>(
        key: ClassKey,
        prod: Mat<S>,
        x: &ClassKey,
        delays: &DelayVector,
        choices: &BTreeMap<ClassKey, MatrixTuple<S>>,
        acc: &mut Mat<S>,
    ) -> Result<()> {
        if &key == x {
            acc.add_assign(&prod);
            return Ok(());
        }
        for j in 0..delays.len() {
            let next = key.plus_row(delays.row(j));
            if x.minus_row(&next.0).has_negative() {
                continue;
            }
            let b = choices
                .get(&key)
                .ok_or_else(|| Error::invalid(format!("no element chosen for level {:?}", key.0)))?;
            walk(next, prod.mul(b.get(j)), x, delays, choices, acc)?;
        }
        Ok(())
    }
    let mut acc = Mat::zeros(dim);
    walk(ClassKey::zero(delays.generators()), Mat::identity(dim), x, delays, choices, &mut acc)?;
    Ok(acc)
}

/// How level assignments are searched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Search {
    /// Every assignment, refused above `cap`.
    Exhaustive { cap: u64 },
    /// Random restarts with greedy improvement; lower bounds only.
    Sampled { restarts: usize, seed: u64 },
}

impl Default for Search {
    fn default() -> Self {
        Search::Exhaustive { cap: SEARCH_CAP }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelValue {
    #[serde(with = "crate::rational::serde_q")]
    pub level: Q,
    /// Largest `‖G(x)‖_∞` found.
    pub norm: f64,
    /// `norm^{1/x}`.
    pub root: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MuReport {
    /// Growth factor fitted on the tail of the level window.
    pub mu_hat: f64,
    /// Largest `‖G(x)‖^{1/x}` over the tail window.
    pub root_max: f64,
    pub values: Vec<LevelValue>,
    pub search: Search,
    /// Sampled searches only bound the supremum from below.
    pub lower_bound_only: bool,
    pub assignments: u64,
}

/// Least-squares slope of `ln y` against `x` on the points with `y > 0`,
/// after replacing each value by its running maximum over one window width
/// to smooth out oscillating cancellations.
fn tail_rate(points: &[(f64, f64)], window: f64) -> Option<f64> {
    if points.iter().all(|p| p.1 == 0.0) {
        return Some(f64::NEG_INFINITY);
    }
    let env: Vec<(f64, f64)> = points
        .iter()
        .map(|&(x, _)| {
            let m = points.iter().filter(|&&(y, _)| y <= x && y > x - window).map(|p| p.1).fold(0.0, f64::max);
            (x, m)
        })
        .filter(|&(_, y)| y > 0.0)
        .collect();
    if env.len() < 2 {
        return None;
    }
    let n = env.len() as f64;
    let mx = env.iter().map(|p| p.0).sum::<f64>() / n;
    let my = env.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxx: f64 = env.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = env.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum();
    Some(sxy / sxx)
}

fn summarize(points: &[(f64, f64)], lo: f64, window: f64) -> (f64, f64) {
    let tail: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.0 >= lo && p.0 > 0.0).collect();
    let root_max = tail.iter().map(|&(x, y)| if y > 0.0 { y.powf(1.0 / x) } else { 0.0 }).fold(0.0, f64::max);
    let mu = match tail_rate(&tail, window) {
        Some(r) if r == f64::NEG_INFINITY => 0.0,
        Some(r) => r.exp(),
        None => root_max,
    };
    (mu, root_max)
}

fn assignment_count(options: usize, slots: usize) -> f64 {
    (options as f64).powi(slots as i32)
}

/// Per-level maxima of `‖G(x)‖` over all assignments, by depth-first search
/// on the levels below the top one.
fn exhaustive_levels(lattice: &LevelLattice, family: &MatrixFamily, upto: usize) -> Vec<f64> {
    fn dfs(
        i: usize,
        upto: usize,
        lattice: &LevelLattice,
        family: &MatrixFamily,
        assign: &mut Vec<usize>,
        g: &mut Vec<Mat<C64>>,
        best: &mut [f64],
    ) {
        best[i] = best[i].max(g[i].norm_inf());
        if i == upto {
            return;
        }
        for c in 0..family.len() {
            assign[i] = c;
            let next = dp_step(lattice, family.dim(), g, i + 1, &|r| &family.elements[assign[r]]);
            g.push(next);
            dfs(i + 1, upto, lattice, family, assign, g, best);
            g.pop();
        }
    }
    let run = |first: Option<usize>| {
        let mut assign = vec![0; upto + 1];
        let mut g = vec![Mat::identity(family.dim())];
        let mut best = vec![0.0; upto + 1];
        match first {
            None => dfs(0, upto, lattice, family, &mut assign, &mut g, &mut best),
            Some(c) => {
                best[0] = 1.0;
                assign[0] = c;
                g.push(dp_step(lattice, family.dim(), &g, 1, &|r| &family.elements[assign[r]]));
                dfs(1, upto, lattice, family, &mut assign, &mut g, &mut best);
            }
        }
        best
    };
    if upto == 0 {
        return run(None);
    }
    (0..family.len())
        .into_par_iter()
        .map(|c| run(Some(c)))
        .reduce(|| vec![0.0; upto + 1], |a, b| a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect())
}

fn sampled_levels(
    lattice: &LevelLattice,
    family: &MatrixFamily,
    upto: usize,
    tail_lo: f64,
    restarts: usize,
    seed: u64,
    evaluations: &mut u64,
) -> Vec<f64> {
    let levels: Vec<f64> = lattice.levels()[..=upto].iter().map(to_f64).collect();
    let mut best = vec![0.0f64; upto + 1];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut evaluate = |assign: &[usize], best: &mut Vec<f64>| {
        *evaluations += 1;
        let g = dp_all(lattice, family.dim(), upto, |r| &family.elements[assign[r]]);
        let mut objective = 0.0f64;
        for (i, m) in g.iter().enumerate() {
            let n = m.norm_inf();
            best[i] = best[i].max(n);
            if levels[i] >= tail_lo && levels[i] > 0.0 && n > 0.0 {
                objective = objective.max(n.powf(1.0 / levels[i]));
            }
        }
        objective
    };
    for _ in 0..restarts.max(1) {
        let mut assign: Vec<usize> = (0..=upto).map(|_| rng.gen_range(0..family.len())).collect();
        let mut current = evaluate(&assign, &mut best);
        for _pass in 0..3 {
            let mut improved = false;
            for i in 0..upto {
                let mut keep = assign[i];
                for c in 0..family.len() {
                    if c == keep {
                        continue;
                    }
                    assign[i] = c;
                    let value = evaluate(&assign, &mut best);
                    if value > current {
                        current = value;
                        keep = c;
                        improved = true;
                    }
                }
                assign[i] = keep;
            }
            if !improved {
                break;
            }
        }
    }
    best
}

/// Estimates `μ(Λ, 𝔅)` from the levels up to `x_max`.
pub fn mu_estimate(delays: &DelayVector, family: &MatrixFamily, x_max: &Q, search: Search) -> Result<MuReport> {
    if family.tuple_len() != delays.len() {
        return Err(Error::Dimension("family tuples do not match the number of delays".into()));
    }
    if !x_max.is_positive() {
        return Err(Error::OutOfRange("x_max must be positive".into()));
    }
    let lattice = LevelLattice::new(delays, x_max)?;
    let upto = lattice.len() - 1;
    let tail_lo = to_f64(x_max) / 2.0;
    let mut assignments = 0u64;
    let norms = match search {
        Search::Exhaustive { cap } => {
            let count = assignment_count(family.len(), upto);
            if count > cap as f64 {
                return Err(Error::SearchCap { size: count, cap });
            }
            assignments = count as u64;
            exhaustive_levels(&lattice, family, upto)
        }
        Search::Sampled { restarts, seed } => {
            sampled_levels(&lattice, family, upto, tail_lo, restarts, seed, &mut assignments)
        }
    };
    let values: Vec<LevelValue> = lattice
        .levels()
        .iter()
        .zip(&norms)
        .map(|(l, &n)| {
            let x = to_f64(l);
            LevelValue { level: l.clone(), norm: n, root: if x > 0.0 { n.powf(1.0 / x) } else { n } }
        })
        .collect();
    let points: Vec<(f64, f64)> = values.iter().map(|v| (to_f64(&v.level), v.norm)).collect();
    let window = to_f64(&delays.max_delay().expect("numeric"));
    let (mu_hat, root_max) = summarize(&points, tail_lo, window);
    Ok(MuReport {
        mu_hat,
        root_max,
        values,
        search,
        lower_bound_only: matches!(search, Search::Sampled { .. }),
        assignments,
    })
}

/// `max_ν ρ(Σ_j A_j e^{i(Bν)_j})` over a uniform `m^h` grid of `[0, 2π)^h`.
pub fn rho_hs(delays: &DelayVector, tuple: &MatrixTuple<C64>, m: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::OutOfRange("grid resolution must be at least 2".into()));
    }
    if tuple.len() != delays.len() {
        return Err(Error::Dimension("tuple does not match the number of delays".into()));
    }
    let grid = phase_grid(delays, m)?;
    Ok(grid
        .par_iter()
        .map(|phases| {
            let mut sum = Mat::zeros(tuple.dim());
            for (j, a) in tuple.iter().enumerate() {
                sum.add_assign(&a.scale(&C64::from_polar(1.0, phases[j])));
            }
            spectral_radius(&sum)
        })
        .reduce(|| 0.0, f64::max))
}

/// Phases `θ = Bν` for `ν` on the uniform grid.
fn phase_grid(delays: &DelayVector, m: usize) -> Result<Vec<Vec<f64>>> {
    let h = delays.generators();
    let total = (m as f64).powi(h as i32);
    if total > 1e8 {
        return Err(Error::SearchCap { size: total, cap: 100_000_000 });
    }
    let total = total as usize;
    Ok((0..total)
        .map(|mut idx| {
            let mut nu = vec![0.0; h];
            for v in nu.iter_mut() {
                *v = TAU * (idx % m) as f64 / m as f64;
                idx /= m;
            }
            (0..delays.len()).map(|j| delays.row(j).iter().zip(&nu).map(|(&b, v)| b as f64 * v).sum()).collect()
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct MuHsReport {
    pub mu_hs: f64,
    pub root_max: f64,
    /// Largest `‖X_n‖_∞` found, for `n = 1, …, n_max`.
    pub norms: Vec<f64>,
    pub grid: usize,
    pub search: Search,
    pub lower_bound_only: bool,
}

/// `‖Σ_{|v|=n} Π B^{r_k}_{v_k} e^{iθ_{v_k}}‖` for `n = 1..=n_max`, by the
/// recursion on (path length, level).
fn hs_norms(lattice: &LevelLattice, family: &MatrixFamily, assign: &[usize], phases: &[f64], n_max: usize) -> Vec<f64> {
    let dim = family.dim();
    let rotated: Vec<MatrixTuple<C64>> = family
        .elements
        .iter()
        .map(|e| e.map(|j, m| m.scale(&C64::from_polar(1.0, phases[j]))))
        .collect();
    let len = lattice.len();
    let mut layer: Vec<Option<Mat<C64>>> = vec![None; len];
    layer[0] = Some(Mat::identity(dim));
    let mut out = Vec::with_capacity(n_max);
    for _ in 0..n_max {
        let mut next: Vec<Option<Mat<C64>>> = vec![None; len];
        for (i, slot) in next.iter_mut().enumerate() {
            for j in 0..lattice.tuple_len() {
                let Some(p) = lattice.pred(i, j) else { continue };
                let Some(prev) = &layer[p] else { continue };
                let term = prev.mul(rotated[assign[p]].get(j));
                match slot {
                    Some(acc) => acc.add_assign(&term),
                    None => *slot = Some(term),
                }
            }
        }
        let mut total = Mat::zeros(dim);
        for m in next.iter().flatten() {
            total.add_assign(m);
        }
        out.push(total.norm_inf());
        layer = next;
    }
    out
}

/// Estimates `μ_HS(Λ, 𝔅)` from path lengths up to `n_max` and a phase grid
/// of resolution `m`.
pub fn mu_hs_estimate(
    delays: &DelayVector,
    family: &MatrixFamily,
    n_max: usize,
    m: usize,
    search: Search,
) -> Result<MuHsReport> {
    if family.tuple_len() != delays.len() {
        return Err(Error::Dimension("family tuples do not match the number of delays".into()));
    }
    if n_max == 0 || m < 2 {
        return Err(Error::OutOfRange("need n_max ≥ 1 and grid resolution ≥ 2".into()));
    }
    let top = delays.max_delay().expect("numeric") * Q::from_integer((n_max as i64).into());
    let lattice = LevelLattice::new(delays, &top)?;
    let grid = phase_grid(delays, m)?;
    let slots = lattice.len();
    let assignments: Vec<Vec<usize>> = match search {
        Search::Exhaustive { cap } => {
            let count = assignment_count(family.len(), slots.saturating_sub(1));
            if count > cap as f64 {
                return Err(Error::SearchCap { size: count, cap });
            }
            (0..count as usize)
                .map(|mut idx| {
                    (0..slots)
                        .map(|_| {
                            let c = idx % family.len();
                            idx /= family.len();
                            c
                        })
                        .collect()
                })
                .collect()
        }
        Search::Sampled { restarts, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..restarts.max(1)).map(|_| (0..slots).map(|_| rng.gen_range(0..family.len())).collect()).collect()
        }
    };
    let norms = grid
        .par_iter()
        .map(|phases| {
            assignments.iter().fold(vec![0.0f64; n_max], |best, a| {
                best.iter().zip(hs_norms(&lattice, family, a, phases, n_max)).map(|(x, y)| x.max(y)).collect()
            })
        })
        .reduce(|| vec![0.0f64; n_max], |a, b| a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect());
    let points: Vec<(f64, f64)> = norms.iter().enumerate().map(|(i, &n)| ((i + 1) as f64, n)).collect();
    let (mu_hs, root_max) = summarize(&points, n_max as f64 / 2.0, 1.0);
    Ok(MuHsReport {
        mu_hs,
        root_max,
        norms,
        grid: m,
        search,
        lower_bound_only: matches!(search, Search::Sampled { .. }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Unstable,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct DelayVerdict {
    pub verdict: Verdict,
    pub mu_hat: f64,
    pub margin: f64,
    /// `inf{ν : μ̂(𝔅_{-ν}) < 1}`, or `None` when every shift is stable.
    pub lyapunov: Option<f64>,
    pub report: MuReport,
}

/// Stability of `u(t) = Σ A_j(t) u(t - L_j)` for all signals with values in
/// the family and all delays with the structure of `delays`.
pub fn stability_verdict_delays(
    delays: &DelayVector,
    family: &MatrixFamily,
    x_max: &Q,
    cap: u64,
    relative_tol: f64,
) -> Result<DelayVerdict> {
    let search = Search::Exhaustive { cap };
    let report = mu_estimate(delays, family, x_max, search)?;
    let mu_hat = report.mu_hat;
    let margin = (mu_hat - report.root_max).abs().max(relative_tol * mu_hat);
    let verdict = if mu_hat + margin < 1.0 {
        Verdict::Stable
    } else if mu_hat - margin > 1.0 {
        Verdict::Unstable
    } else {
        Verdict::Inconclusive
    };
    let ell = delays.delays().expect("numeric");
    let mu_at = |nu: f64| mu_estimate(delays, &family.shifted(nu, &ell), x_max, search).map(|r| r.mu_hat);
    let lyapunov = bisect_threshold(mu_at)?;
    Ok(DelayVerdict { verdict, mu_hat, margin, lyapunov, report })
}

/// Smallest `ν` with `f(ν) < 1` for a nonincreasing `f`, to `1e-10`.
fn bisect_threshold(f: impl Fn(f64) -> Result<f64>) -> Result<Option<f64>> {
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    let mut guard = 0;
    while f(hi)? >= 1.0 {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 60 {
            return Err(Error::Degenerate("growth rate is unbounded".into()));
        }
    }
    guard = 0;
    while f(lo)? < 1.0 {
        hi = lo;
        lo *= 2.0;
        guard += 1;
        if guard > 60 {
            return Ok(None);
        }
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Bounds on the exponent for delays `l` in the range of `Λ`, given
/// `ln μ(Λ, 𝔅)`: the exponent for `l` is at most `m₁ ln μ`.
pub fn transferred_bound(lambda: &[Q], l: &[Q], log_mu: f64) -> f64 {
    let ratios = lambda.iter().zip(l).map(|(a, b)| to_f64(a) / to_f64(b));
    let m1 = if log_mu < 0.0 {
        ratios.fold(f64::INFINITY, f64::min)
    } else {
        ratios.fold(f64::NEG_INFINITY, f64::max)
    };
    m1 * log_mu
}

/// Piecewise-constant signal equal to `choices[r]` on `(-r - ζ, -r + ζ)` for
/// each level `r`, and to `filler` elsewhere.
pub fn signal_from_choices<S: Scalar>(
    choices: &BTreeMap<ClassKey, MatrixTuple<S>>,
    frame: &LevelFrame,
    zeta: &Q,
    filler: &MatrixTuple<S>,
) -> Result<SwitchingSignal<S>> {
    if !zeta.is_positive() {
        return Err(Error::OutOfRange("ζ must be positive".into()));
    }
    let mut placed: BTreeMap<Q, &MatrixTuple<S>> = BTreeMap::new();
    for (key, tuple) in choices {
        let level = frame.level(key);
        if placed.insert(-level, tuple).is_some() {
            return Err(Error::invalid("two chosen classes share a level"));
        }
    }
    let times: Vec<&Q> = placed.keys().collect();
    if times.windows(2).any(|w| w[1] - w[0] <= zeta * Q::from_integer(2.into())) {
        return Err(Error::OutOfRange("ζ must be below half the smallest gap between levels".into()));
    }
    let mut breakpoints = Vec::new();
    let mut values = vec![filler.clone()];
    for (t, tuple) in &placed {
        breakpoints.push(t - zeta);
        values.push((*tuple).clone());
        breakpoints.push(t + zeta);
        values.push(filler.clone());
    }
    Piecewise::new(breakpoints, values)
}
