//! Damped wave propagation on networks of strings.
//!
//! A state `(u', v)` on each edge is split into two travelling waves
//! (d'Alembert), which turns the network into a transport system whose
//! boundary coupling matrix encodes the vertex conditions. Stability under
//! arbitrary switching of the dampings depends only on the topology.
//!
//! Transport components are numbered from zero: component `2j` carries the
//! wave moving from `ω(j)` to `α(j)` and component `2j + 1` the wave moving
//! from `α(j)` to `ω(j)`.

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::rational::{rational_gcd, to_f64, Q};
use crate::ratlattice::DelayVector;
use crate::scalar::C64;
use crate::signal::Piecewise;
use crate::transport::{
    simulate_transport, ConstraintMatrix, TransmissionSignal, TransportGrid, TransportRun, TransportSystem,
};
use num::{BigInt, Integer, One, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, VecDeque};
use std::f64::consts::TAU;

/// Largest number of elementary paths enumerated by [`classify`].
pub const PATH_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexRole {
    Interior,
    Damped,
    Undamped,
}

/// A connected oriented graph with edge lengths; edge `j` runs from
/// `edges[j].0 = α(j)` to `edges[j].1 = ω(j)`.
#[derive(Debug, Clone)]
pub struct Network {
    names: Vec<String>,
    roles: Vec<VertexRole>,
    edges: Vec<(usize, usize)>,
    lengths: DelayVector,
    incident: Vec<Vec<usize>>,
}

impl Network {
    pub fn new(names: Vec<String>, roles: Vec<VertexRole>, edges: Vec<(usize, usize)>, lengths: DelayVector) -> Result<Self> {
        let nv = names.len();
        if roles.len() != nv {
            return Err(Error::Dimension("one role per vertex is required".into()));
        }
        if edges.is_empty() {
            return Err(Error::invalid("network has no edges"));
        }
        if lengths.len() != edges.len() {
            return Err(Error::Dimension("one length per edge is required".into()));
        }
        lengths.require_numeric()?;
        let unique: BTreeSet<&String> = names.iter().collect();
        if unique.len() != nv {
            return Err(Error::invalid("vertex names must be unique"));
        }
        let mut incident = vec![Vec::new(); nv];
        let mut seen = BTreeSet::new();
        for (j, &(a, b)) in edges.iter().enumerate() {
            if a >= nv || b >= nv {
                return Err(Error::invalid(format!("edge {j} refers to an unknown vertex")));
            }
            if a == b {
                return Err(Error::invalid(format!("edge {j} is a self-loop")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::invalid(format!("edge {j} duplicates another edge")));
            }
            incident[a].push(j);
            incident[b].push(j);
        }
        for (q, role) in roles.iter().enumerate() {
            let exterior = incident[q].len() <= 1;
            match (role, exterior) {
                (VertexRole::Interior, true) => {
                    return Err(Error::invalid(format!("vertex {} has degree ≤ 1 and cannot be interior", names[q])))
                }
                (VertexRole::Damped | VertexRole::Undamped, false) => {
                    return Err(Error::invalid(format!("vertex {} has degree ≥ 2 and must be interior", names[q])))
                }
                _ => {}
            }
        }
        if !roles.contains(&VertexRole::Damped) || !roles.contains(&VertexRole::Undamped) {
            return Err(Error::invalid("at least one damped and one undamped vertex are required"));
        }
        let net = Self { names, roles, edges, lengths, incident };
        if !net.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(net)
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.names.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(q) = queue.pop_front() {
            for &j in &self.incident[q] {
                let p = self.other_end(j, q);
                if !seen[p] {
                    seen[p] = true;
                    queue.push_back(p);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn roles(&self) -> &[VertexRole] {
        &self.roles
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn vertex_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn lengths(&self) -> &DelayVector {
        &self.lengths
    }

    pub fn edge_lengths(&self) -> Vec<Q> {
        self.lengths.delays().expect("numeric lengths")
    }

    pub fn incident(&self, q: usize) -> &[usize] {
        &self.incident[q]
    }

    pub fn other_end(&self, j: usize, q: usize) -> usize {
        let (a, b) = self.edges[j];
        if a == q {
            b
        } else {
            a
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    fn with_role(&self, role: VertexRole) -> Vec<usize> {
        (0..self.names.len()).filter(|&q| self.roles[q] == role).collect()
    }

    /// Damped vertices in index order; damping vectors follow this order.
    pub fn damped(&self) -> Vec<usize> {
        self.with_role(VertexRole::Damped)
    }

    pub fn undamped(&self) -> Vec<usize> {
        self.with_role(VertexRole::Undamped)
    }

    pub fn interior(&self) -> Vec<usize> {
        self.with_role(VertexRole::Interior)
    }

    pub fn with_lengths(&self, lengths: DelayVector) -> Result<Self> {
        Self::new(self.names.clone(), self.roles.clone(), self.edges.clone(), lengths)
    }

    /// Same network with the orientation of edge `j` reversed.
    pub fn flipped(&self, j: usize) -> Self {
        let mut out = self.clone();
        let (a, b) = out.edges[j];
        out.edges[j] = (b, a);
        out
    }

    /// Transport component whose right end (`x = L_j`) sits at `q`.
    fn incoming_component(&self, j: usize, q: usize) -> usize {
        if self.edges[j].0 == q {
            2 * j
        } else {
            2 * j + 1
        }
    }

    /// Transport component whose left end (`x = 0`) sits at `q`.
    fn outgoing_component(&self, j: usize, q: usize) -> usize {
        if self.edges[j].0 == q {
            2 * j + 1
        } else {
            2 * j
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Cycle,
    UndampedPair,
    /// From an undamped vertex to a damped one; used only for witnesses.
    ToDamped,
}

/// An elementary path `(q_1, …, q_n)` with the edges it crosses and its
/// signature (`+1` along the orientation, `-1` against, `0` off the path).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ElementaryPath {
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
    pub kind: PathKind,
    pub signature: Vec<i8>,
}

impl ElementaryPath {
    fn from_vertices(net: &Network, vertices: Vec<usize>, kind: PathKind) -> Self {
        let mut signature = vec![0i8; net.edge_count()];
        let mut edges = Vec::with_capacity(vertices.len() - 1);
        for w in vertices.windows(2) {
            let j = *net.incident(w[0]).iter().find(|&&j| net.other_end(j, w[0]) == w[1]).expect("adjacent");
            signature[j] = if net.edges[j].0 == w[0] { 1 } else { -1 };
            edges.push(j);
        }
        Self { vertices, edges, kind, signature }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub is_tree: bool,
    pub exterior: Vec<usize>,
    pub interior: Vec<usize>,
    /// Cycles (once up to rotation and reversal) and paths between
    /// undamped vertices (once per unordered pair of endpoints and route).
    pub paths: Vec<ElementaryPath>,
}

fn simple_paths(net: &Network, from: usize, to: usize, out: &mut Vec<Vec<usize>>) -> Result<()> {
    fn dfs(net: &Network, path: &mut Vec<usize>, on: &mut [bool], to: usize, out: &mut Vec<Vec<usize>>) -> Result<()> {
        let q = *path.last().expect("nonempty");
        if q == to {
            if out.len() >= PATH_CAP {
                return Err(Error::SearchCap { size: out.len() as f64, cap: PATH_CAP as u64 });
            }
            out.push(path.clone());
            return Ok(());
        }
        for &j in net.incident(q) {
            let p = net.other_end(j, q);
            if !on[p] {
                on[p] = true;
                path.push(p);
                dfs(net, path, on, to, out)?;
                path.pop();
                on[p] = false;
            }
        }
        Ok(())
    }
    let mut on = vec![false; net.vertex_count()];
    on[from] = true;
    dfs(net, &mut vec![from], &mut on, to, out)
}

fn cycles(net: &Network) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    for start in 0..net.vertex_count() {
        // Cycles whose smallest vertex is `start`, each found in both
        // directions; keep the one whose second vertex is smaller than its last.
        fn dfs(
            net: &Network,
            start: usize,
            path: &mut Vec<usize>,
            on: &mut [bool],
            out: &mut Vec<Vec<usize>>,
        ) -> Result<()> {
            let q = *path.last().expect("nonempty");
            for &j in net.incident(q) {
                let p = net.other_end(j, q);
                if p == start && path.len() >= 3 && path[1] < path[path.len() - 1] {
                    if out.len() >= PATH_CAP {
                        return Err(Error::SearchCap { size: out.len() as f64, cap: PATH_CAP as u64 });
                    }
                    let mut cycle = path.clone();
                    cycle.push(start);
                    out.push(cycle);
                } else if p > start && !on[p] {
                    on[p] = true;
                    path.push(p);
                    dfs(net, start, path, on, out)?;
                    path.pop();
                    on[p] = false;
                }
            }
            Ok(())
        }
        let mut on = vec![false; net.vertex_count()];
        on[start] = true;
        dfs(net, start, &mut vec![start], &mut on, &mut out)?;
    }
    Ok(out)
}

pub fn classify(net: &Network) -> Result<Classification> {
    if !net.is_connected() {
        return Err(Error::Disconnected);
    }
    let is_tree = net.edge_count() + 1 == net.vertex_count();
    let mut paths: Vec<ElementaryPath> =
        cycles(net)?.into_iter().map(|c| ElementaryPath::from_vertices(net, c, PathKind::Cycle)).collect();
    let undamped = net.undamped();
    for (i, &a) in undamped.iter().enumerate() {
        for &b in &undamped[i + 1..] {
            let mut found = Vec::new();
            simple_paths(net, a, b, &mut found)?;
            paths.extend(found.into_iter().map(|p| ElementaryPath::from_vertices(net, p, PathKind::UndampedPair)));
        }
    }
    let interior = net.interior();
    let exterior = (0..net.vertex_count()).filter(|q| !interior.contains(q)).collect();
    Ok(Classification { is_tree, exterior, interior, paths })
}

/// One row per qualifying path, `ρ_{i,2j} = ρ_{i,2j+1} = s_i(j)`.
pub fn build_r(net: &Network, classes: &Classification) -> ConstraintMatrix {
    let rows = classes
        .paths
        .iter()
        .filter(|p| p.kind != PathKind::ToDamped)
        .map(|p| p.signature.iter().flat_map(|&s| [C64::new(f64::from(s), 0.0); 2]).collect())
        .collect();
    ConstraintMatrix::new(rows, 2 * net.edge_count()).expect("rows have 2N entries")
}

/// Reflection coefficient `(1 - η)/(1 + η)` of a damped leaf.
pub fn reflection(eta: f64) -> f64 {
    (1.0 - eta) / (1.0 + eta)
}

fn sign(c: usize) -> f64 {
    if c.is_multiple_of(2) {
        -1.0
    } else {
        1.0
    }
}

/// Boundary coupling `F(t, 0) = M F(t, L)` of the transport system, with
/// `eta` ordered as [`Network::damped`].
pub fn build_m(net: &Network, eta: &[f64]) -> Result<Mat<C64>> {
    let damped = net.damped();
    if eta.len() != damped.len() {
        return Err(Error::Dimension(format!("{} damping values for {} damped vertices", eta.len(), damped.len())));
    }
    if eta.iter().any(|&e| !e.is_finite() || e < 0.0) {
        return Err(Error::invalid("damping values must be finite and nonnegative"));
    }
    let n2 = 2 * net.edge_count();
    let mut sum = vec![0.0f64; n2 * n2];
    for q in 0..net.vertex_count() {
        let edges = net.incident(q);
        let ins: Vec<usize> = edges.iter().map(|&j| net.incoming_component(j, q)).collect();
        let outs: Vec<usize> = edges.iter().map(|&j| net.outgoing_component(j, q)).collect();
        let nq = edges.len() as f64;
        let scale = match net.roles[q] {
            VertexRole::Interior => 1.0,
            VertexRole::Undamped => 1.0,
            VertexRole::Damped => reflection(eta[damped.iter().position(|&d| d == q).expect("damped")]),
        };
        for (a, &o) in outs.iter().enumerate() {
            for (b, &i) in ins.iter().enumerate() {
                let local = match net.roles[q] {
                    VertexRole::Interior => f64::from(u8::from(a == b)) - 2.0 / nq,
                    _ => f64::from(u8::from(a == b)),
                };
                sum[o * n2 + i] += scale * local;
            }
        }
    }
    Ok(Mat::from_fn(n2, |r, c| C64::new(-sign(r) * sign(c) * sum[r * n2 + c], 0.0)))
}

/// `|MᵀM - (id - Σ_q 4η_q/(1+η_q)² Π_inᵀΠ_in)|_∞` entrywise.
pub fn check_m_identity(m: &Mat<C64>, net: &Network, eta: &[f64]) -> f64 {
    let n2 = m.dim();
    let mut expected = vec![1.0f64; n2];
    for (k, &q) in net.damped().iter().enumerate() {
        let e = eta[k];
        for &j in net.incident(q) {
            expected[net.incoming_component(j, q)] -= 4.0 * e / (1.0 + e).powi(2);
        }
    }
    let mut worst = 0.0f64;
    for (r, &diag) in expected.iter().enumerate() {
        for c in 0..n2 {
            let mtm: C64 = (0..n2).map(|k| m.get(k, r).conj() * m.get(k, c)).sum();
            let target = if r == c { diag } else { 0.0 };
            worst = worst.max((mtm - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

pub fn check_rm(r: &ConstraintMatrix, m: &Mat<C64>) -> f64 {
    r.right_invariance(m)
}

/// Cell samples of `(u'_j, v_j)` on every edge.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    step: Q,
    du: Vec<Vec<C64>>,
    v: Vec<Vec<C64>>,
}

impl WaveState {
    pub fn new(net: &Network, step: &Q, du: Vec<Vec<C64>>, v: Vec<Vec<C64>>) -> Result<Self> {
        let grid = TransportGrid::new(&net.edge_lengths(), step)?;
        let ok = |x: &Vec<Vec<C64>>| x.len() == grid.cells().len() && x.iter().zip(grid.cells()).all(|(p, &n)| p.len() == n);
        if !ok(&du) || !ok(&v) {
            return Err(Error::Dimension("state samples must match the edge grids".into()));
        }
        Ok(Self { step: step.clone(), du, v })
    }

    pub fn zero(net: &Network, step: &Q) -> Result<Self> {
        let grid = TransportGrid::new(&net.edge_lengths(), step)?;
        let z = grid.sample(|_, _| C64::zero());
        Ok(Self { step: step.clone(), du: z.clone(), v: z })
    }

    pub fn step(&self) -> &Q {
        &self.step
    }

    pub fn du(&self) -> &[Vec<C64>] {
        &self.du
    }

    pub fn v(&self) -> &[Vec<C64>] {
        &self.v
    }

    /// `Σ_j ∫ |u'_j|² + |v_j|²` by the cell rule.
    pub fn energy(&self) -> f64 {
        let h = to_f64(&self.step);
        h * self.du.iter().chain(&self.v).flatten().map(|z| z.norm_sqr()).sum::<f64>()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.du
            .iter()
            .chain(&self.v)
            .flatten()
            .zip(other.du.iter().chain(&other.v).flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Vertex values of the displacement obtained by integrating `u'` from
    /// the first undamped vertex, and the largest mismatch found on edges
    /// closing a cycle or at the other undamped vertices.
    pub fn potentials(&self, net: &Network) -> (Vec<C64>, f64) {
        potentials(net, &self.du, to_f64(&self.step))
    }

    pub fn compatibility_residual(&self, net: &Network) -> f64 {
        self.potentials(net).1
    }

    /// Displacement `u_j(kh)` at the nodes `k = 0, …, n_j` of each edge.
    pub fn displacement(&self, net: &Network) -> Vec<Vec<C64>> {
        let h = to_f64(&self.step);
        let (pot, _) = self.potentials(net);
        self.du
            .iter()
            .enumerate()
            .map(|(j, d)| {
                let mut acc = pot[net.edges[j].0];
                let mut out = vec![acc];
                for x in d {
                    acc += x * h;
                    out.push(acc);
                }
                out
            })
            .collect()
    }

    /// State in the network with edge `j` reversed: `u_j(x) ↦ u_j(L_j - x)`.
    pub fn flipped(&self, j: usize) -> Self {
        let mut out = self.clone();
        out.du[j] = self.du[j].iter().rev().map(|z| -z).collect();
        out.v[j] = self.v[j].iter().rev().copied().collect();
        out
    }
}

fn potentials(net: &Network, du: &[Vec<C64>], h: f64) -> (Vec<C64>, f64) {
    let rise: Vec<C64> = du.iter().map(|d| d.iter().sum::<C64>() * h).collect();
    let nv = net.vertex_count();
    let anchor = net.undamped()[0];
    let mut pot: Vec<Option<C64>> = vec![None; nv];
    pot[anchor] = Some(C64::zero());
    let mut tree_edge = vec![false; net.edge_count()];
    let mut queue = VecDeque::from([anchor]);
    while let Some(q) = queue.pop_front() {
        for &j in net.incident(q) {
            let p = net.other_end(j, q);
            if pot[p].is_none() {
                let base = pot[q].expect("visited");
                pot[p] = Some(if net.edges[j].0 == q { base + rise[j] } else { base - rise[j] });
                tree_edge[j] = true;
                queue.push_back(p);
            }
        }
    }
    let pot: Vec<C64> = pot.into_iter().map(|p| p.expect("connected")).collect();
    let mut residual = 0.0f64;
    for (j, &(a, b)) in net.edges.iter().enumerate() {
        if !tree_edge[j] {
            residual = residual.max((pot[b] - pot[a] - rise[j]).norm());
        }
    }
    for q in net.undamped() {
        residual = residual.max(pot[q].norm());
    }
    (pot, residual)
}

/// `f_{2j}(x) = u'_j(L_j - x) + v_j(L_j - x)`, `f_{2j+1}(x) = u'_j(x) - v_j(x)`.
pub fn dalembert_forward(state: &WaveState) -> Vec<Vec<C64>> {
    let mut out = Vec::with_capacity(2 * state.du.len());
    for (du, v) in state.du.iter().zip(&state.v) {
        out.push(du.iter().zip(v).rev().map(|(a, b)| a + b).collect());
        out.push(du.iter().zip(v).map(|(a, b)| a - b).collect());
    }
    out
}

fn split_profiles(f: &[Vec<C64>]) -> (Vec<Vec<C64>>, Vec<Vec<C64>>) {
    f.chunks(2)
        .map(|pair| {
            let (back, fwd) = (&pair[0], &pair[1]);
            let n = fwd.len();
            let du = (0..n).map(|k| (back[n - 1 - k] + fwd[k]) * 0.5).collect();
            let v = (0..n).map(|k| (back[n - 1 - k] - fwd[k]) * 0.5).collect();
            (du, v)
        })
        .unzip()
}

/// Inverse decomposition; fails when the profiles violate the constraints
/// by more than `tol`, since the displacement is then path dependent.
pub fn dalembert_inverse(profiles: &[Vec<C64>], net: &Network, step: &Q, tol: f64) -> Result<WaveState> {
    if profiles.len() != 2 * net.edge_count() {
        return Err(Error::Dimension("expected two profiles per edge".into()));
    }
    if profiles.chunks(2).any(|p| p[0].len() != p[1].len()) {
        return Err(Error::Dimension("paired profiles must share their grid".into()));
    }
    let (du, v) = split_profiles(profiles);
    let state = WaveState::new(net, step, du, v)?;
    let residual = state.compatibility_residual(net);
    if residual > tol {
        return Err(Error::NotInConstraintSpace { residual, tol });
    }
    Ok(state)
}

/// Piecewise-constant damping values, ordered as [`Network::damped`].
pub type DampingSignal = Piecewise<Vec<Q>>;

/// Moves every breakpoint to the nearest multiple of `step`, keeping the
/// later value when two breakpoints merge.
pub fn snap_to_grid<T: Clone>(signal: &Piecewise<T>, step: &Q) -> Result<Piecewise<T>> {
    let mut breakpoints: Vec<Q> = Vec::new();
    let mut values = vec![signal.values()[0].clone()];
    for (b, v) in signal.breakpoints().iter().zip(&signal.values()[1..]) {
        let snapped = (b / step).round() * step;
        if breakpoints.last() == Some(&snapped) {
            *values.last_mut().expect("nonempty") = v.clone();
        } else {
            breakpoints.push(snapped);
            values.push(v.clone());
        }
    }
    Piecewise::new(breakpoints, values)
}

fn damping_f64(values: &[Q]) -> Vec<f64> {
    values.iter().map(to_f64).collect()
}

pub fn transmission_signal(net: &Network, damping: &DampingSignal, step: &Q) -> Result<TransmissionSignal> {
    let snapped = snap_to_grid(damping, step)?;
    if snapped.values().iter().flatten().any(|e| e.is_negative()) {
        return Err(Error::invalid("damping values must be nonnegative"));
    }
    let mats = snapped.values().iter().map(|e| build_m(net, &damping_f64(e))).collect::<Result<Vec<_>>>()?;
    Piecewise::new(snapped.breakpoints().to_vec(), mats)
}

/// A simulated wave trajectory on the transport grid.
#[derive(Debug, Clone)]
pub struct WaveRun {
    network: Network,
    run: TransportRun,
    damping: DampingSignal,
    energies: Vec<f64>,
}

impl WaveRun {
    pub fn transport(&self) -> &TransportRun {
        &self.run
    }

    pub fn steps(&self) -> usize {
        self.run.steps()
    }

    pub fn h(&self) -> f64 {
        self.run.grid().h()
    }

    pub fn times(&self) -> Vec<f64> {
        let h = self.h();
        (0..=self.steps()).map(|m| m as f64 * h).collect()
    }

    /// `‖U(mh)‖²` at every grid time.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn state_at(&self, m: usize) -> Result<WaveState> {
        let (du, v) = split_profiles(&self.run.fields(m));
        WaveState::new(&self.network, self.run.grid().step(), du, v)
    }
}

pub fn simulate_wave(state0: &WaveState, net: &Network, damping: &DampingSignal, steps: usize) -> Result<WaveRun> {
    let step = state0.step().clone();
    let damping = snap_to_grid(damping, &step)?;
    let transmission = transmission_signal(net, &damping, &step)?;
    let mut lengths = Vec::with_capacity(2 * net.edge_count());
    for l in net.edge_lengths() {
        lengths.push(l.clone());
        lengths.push(l);
    }
    let system = TransportSystem::new(lengths, transmission)?;
    let run = simulate_transport(&system, &dalembert_forward(state0), &step, steps)?;
    let energies = (0..=steps).map(|m| run.half_energy(m)).collect();
    Ok(WaveRun { network: net.clone(), run, damping, energies })
}

/// Largest violation of `‖U(b)‖² - ‖U(a)‖² + ∫_a^b Σ_q 2η_q |∂u/∂n(τ, q)|² dτ = 0`
/// over pairs of grid times. The boundary derivative is recovered from the
/// incoming wave `g = (1 + η) ∂u/∂n`, interpolated to grid times and
/// integrated by the trapezoid rule.
pub fn energy_identity_residual(run: &WaveRun) -> f64 {
    let net = &run.network;
    let h = run.h();
    let grid = run.run.grid();
    let damped = net.damped();
    let comps: Vec<usize> = damped.iter().map(|&q| net.incoming_component(net.incident(q)[0], q)).collect();
    let incoming = |p: i64| -> Vec<C64> {
        let w = run.run.right_trace(p);
        comps.iter().map(|&c| w[c]).collect()
    };
    let at_node = |m: usize| -> Vec<C64> {
        let (a, b) = (incoming(m as i64), incoming(m as i64 + 1));
        a.iter().zip(&b).map(|(x, y)| (x + y) * 0.5).collect()
    };
    let mut cumulative = 0.0f64;
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    let mut left = at_node(0);
    for m in 0..run.steps() {
        let right = at_node(m + 1);
        let eta = damping_f64(run.damping.at(&grid.trace_time(m as i64 + 1)));
        let rate = |g: &[C64]| -> f64 {
            g.iter().zip(&eta).map(|(z, &e)| 2.0 * e * z.norm_sqr() / (1.0 + e).powi(2)).sum()
        };
        cumulative += 0.5 * h * (rate(&left) + rate(&right));
        let r = run.energies[m + 1] - run.energies[0] + cumulative;
        lo = lo.min(r);
        hi = hi.max(r);
        left = right;
    }
    hi - lo
}

/// Admissible damping values: a finite list of vectors or a box of
/// per-vertex intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingSet {
    Finite(#[serde(with = "crate::rational::serde_q::nested")] Vec<Vec<Q>>),
    Box(#[serde(with = "crate::rational::serde_q::pairs")] Vec<(Q, Q)>),
}

impl DampingSet {
    pub fn infima(&self, d: usize) -> Result<Vec<Q>> {
        match self {
            DampingSet::Finite(points) => {
                if points.is_empty() || points.iter().any(|p| p.len() != d) {
                    return Err(Error::Dimension(format!("damping points must have {d} entries")));
                }
                Ok((0..d).map(|k| points.iter().map(|p| p[k].clone()).min().expect("nonempty")).collect())
            }
            DampingSet::Box(bounds) => {
                if bounds.len() != d || bounds.iter().any(|(a, b)| a > b) {
                    return Err(Error::Dimension(format!("damping box must have {d} ordered intervals")));
                }
                Ok(bounds.iter().map(|(a, _)| a.clone()).collect())
            }
        }
    }

    fn has_negative(&self) -> bool {
        match self {
            DampingSet::Finite(points) => points.iter().flatten().any(Signed::is_negative),
            DampingSet::Box(bounds) => bounds.iter().any(|(a, _)| a.is_negative()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveVerdict {
    pub stable: bool,
    pub reasons: Vec<String>,
}

/// Stable under arbitrary switching within the set iff the graph is a tree,
/// there is a single undamped vertex, and every damping is bounded away
/// from zero.
pub fn stability_verdict_wave(net: &Network, set: &DampingSet) -> Result<WaveVerdict> {
    if set.has_negative() {
        return Err(Error::invalid("damping values must be nonnegative"));
    }
    let classes = classify(net)?;
    let damped = net.damped();
    let infima = set.infima(damped.len())?;
    let mut reasons = Vec::new();
    if !classes.is_tree {
        reasons.push("not a tree".to_string());
    }
    let undamped = net.undamped();
    if undamped.len() > 1 {
        reasons.push(format!("{} undamped vertices", undamped.len()));
    }
    for (q, inf) in damped.iter().zip(&infima) {
        if inf.is_zero() {
            reasons.push(format!("damping not bounded away from zero at vertex {}", net.names[*q]));
        }
    }
    Ok(WaveVerdict { stable: reasons.is_empty(), reasons })
}

/// Paths that support a periodic solution for the given damping set:
/// cycles, paths between undamped vertices, and paths from an undamped
/// vertex to a damped vertex whose damping may vanish.
pub fn witness_paths(net: &Network, set: &DampingSet) -> Result<Vec<ElementaryPath>> {
    let mut paths = classify(net)?.paths;
    let damped = net.damped();
    let infima = set.infima(damped.len())?;
    for (q, inf) in damped.iter().zip(&infima) {
        if inf.is_zero() {
            for &u in &net.undamped() {
                let mut found = Vec::new();
                simple_paths(net, u, *q, &mut found)?;
                paths.extend(found.into_iter().map(|p| ElementaryPath::from_vertices(net, p, PathKind::ToDamped)));
            }
        }
    }
    Ok(paths)
}

/// The network rescaled so that all lengths are integers, together with the
/// state of `u_j(t, x) = s(j) sin(2πt) sin(2πx)` at `t = 0` on the path edges.
#[derive(Debug, Clone)]
pub struct PeriodicWitness {
    pub network: Network,
    pub scale: Q,
    pub path: ElementaryPath,
    pub state: WaveState,
}

pub fn periodic_witness(net: &Network, path: &ElementaryPath, step: &Q) -> Result<PeriodicWitness> {
    if path.signature.len() != net.edge_count() {
        return Err(Error::Dimension("path signature does not match the network".into()));
    }
    let ell = net.lengths().require_numeric()?;
    let scale = Q::from_integer(ell.iter().fold(BigInt::one(), |acc, g| acc.lcm(g.denom())));
    let network = net.with_lengths(net.lengths().scaled(&scale)?)?;
    let lengths = network.edge_lengths();
    if lengths.iter().any(|l| !l.is_integer()) {
        return Err(Error::Degenerate("rescaled lengths are not integers".into()));
    }
    if lengths.iter().any(|l| l.to_integer().to_i64().is_none()) {
        return Err(Error::Overflow);
    }
    let grid = TransportGrid::new(&lengths, step)?;
    let du = grid.sample(|_, _| C64::zero());
    let v = grid.sample(|j, x| C64::new(TAU * f64::from(path.signature[j]) * (TAU * x).sin(), 0.0));
    let state = WaveState::new(&network, step, du, v)?;
    Ok(PeriodicWitness { network, scale, path: path.clone(), state })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub rate: f64,
    pub r2: f64,
}

/// Least-squares slope of `ln E` against `t` over the trailing half.
pub fn decay_rate_fit(times: &[f64], energies: &[f64]) -> Result<RateFit> {
    if times.len() != energies.len() || times.len() < 4 {
        return Err(Error::invalid("need at least four matching samples"));
    }
    if energies.iter().any(|&e| e.is_nan() || e <= 0.0) {
        return Err(Error::invalid("energies must be positive"));
    }
    let start = times.len() / 2;
    let xs = &times[start..];
    let ys: Vec<f64> = energies[start..].iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("sample times coincide".into()));
    }
    let rate = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(RateFit { rate, r2 })
}

/// A random state satisfying the vertex conditions: random velocities and
/// vertex values (zero at undamped vertices), with `u'` adjusted on each
/// edge to integrate to the difference of its end values.
pub fn random_state(net: &Network, step: &Q, rng: &mut impl Rng) -> Result<WaveState> {
    let grid = TransportGrid::new(&net.edge_lengths(), step)?;
    let h = grid.h();
    let pot: Vec<C64> = net
        .roles()
        .iter()
        .map(|r| if *r == VertexRole::Undamped { C64::zero() } else { C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) })
        .collect();
    let mut du = grid.sample(|_, _| C64::zero());
    for (j, prof) in du.iter_mut().enumerate() {
        let raw: Vec<C64> = prof.iter().map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let n = raw.len() as f64;
        let mean = raw.iter().sum::<C64>() / n;
        let (a, b) = net.edges[j];
        let slope = (pot[b] - pot[a]) / (n * h);
        *prof = raw.iter().map(|z| z - mean + slope).collect();
    }
    let v = grid
        .cells()
        .iter()
        .map(|&n| (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
        .collect();
    WaveState::new(net, step, du, v)
}

/// Lengths as multiples of their greatest common divisor.
pub fn commensurate_lengths(lengths: &[Q]) -> Result<DelayVector> {
    if lengths.iter().any(|l| !l.is_positive()) {
        return Err(Error::invalid("edge lengths must be positive"));
    }
    let g = rational_gcd(lengths).ok_or_else(|| Error::invalid("no edge lengths"))?;
    let multiples = lengths
        .iter()
        .map(|l| (l / &g).to_integer().to_i64().ok_or(Error::Overflow))
        .collect::<Result<Vec<_>>>()?;
    DelayVector::commensurate(&multiples, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn network(roles: &[(&str, VertexRole)], edges: &[(usize, usize)], lengths: &[i64]) -> Network {
        Network::new(
            roles.iter().map(|(n, _)| n.to_string()).collect(),
            roles.iter().map(|(_, r)| *r).collect(),
            edges.to_vec(),
            integer_lengths(lengths).unwrap(),
        )
        .unwrap()
    }

    fn integer_lengths(values: &[i64]) -> Result<DelayVector> {
        commensurate_lengths(&values.iter().map(|&v| Q::from_integer(v.into())).collect::<Vec<_>>())
    }

    use VertexRole::{Damped as D, Interior as I, Undamped as U};

    fn single_edge() -> Network {
        network(&[("a", U), ("b", D)], &[(0, 1)], &[1])
    }

    fn star(undamped: usize) -> Network {
        let roles = [("c", I), ("x", if undamped >= 1 { U } else { D }), ("y", if undamped >= 2 { U } else { D }), ("z", D)];
        network(&roles, &[(0, 1), (0, 2), (3, 0)], &[1, 1, 1])
    }

    fn triangle() -> Network {
        let roles = [("p", I), ("r", I), ("s", I), ("u", U), ("d", D)];
        network(&roles, &[(0, 1), (1, 2), (2, 0), (3, 0), (1, 4)], &[1, 1, 1, 1, 1])
    }

    #[test]
    fn validation() {
        let names = |n: usize| (0..n).map(|i| format!("v{i}")).collect::<Vec<_>>();
        let l1 = integer_lengths(&[1]).unwrap();
        assert!(Network::new(names(2), vec![I, D], vec![(0, 1)], l1.clone()).is_err());
        assert!(Network::new(names(2), vec![D, D], vec![(0, 1)], l1.clone()).is_err());
        assert!(Network::new(names(2), vec![U, D], vec![(0, 0)], l1).is_err());
        let l2 = integer_lengths(&[1, 1]).unwrap();
        assert!(matches!(
            Network::new(names(4), vec![U, D, U, D], vec![(0, 1), (2, 3)], l2.clone()),
            Err(Error::Disconnected)
        ));
        assert!(Network::new(names(2), vec![U, D], vec![(0, 1), (1, 0)], l2).is_err());
    }

    #[test]
    fn classification() {
        let c = classify(&star(2)).unwrap();
        assert!(c.is_tree);
        assert_eq!(c.paths.len(), 1);
        assert_eq!(c.paths[0].kind, PathKind::UndampedPair);
        assert_eq!(c.paths[0].signature, vec![-1, 1, 0]);
        assert!(classify(&single_edge()).unwrap().paths.is_empty());
        let c = classify(&triangle()).unwrap();
        assert!(!c.is_tree);
        assert_eq!(c.paths.len(), 1);
        assert_eq!(c.paths[0].kind, PathKind::Cycle);
        assert_eq!(c.paths[0].signature, vec![1, 1, 1, 0, 0]);
        let three = network(&[("c", I), ("a", U), ("b", U), ("d", U), ("e", D)], &[(0, 1), (0, 2), (0, 3), (0, 4)], &[1, 1, 1, 1]);
        assert_eq!(classify(&three).unwrap().paths.len(), 3);
    }

    #[test]
    fn constraint_rows() {
        let net = star(2);
        let r = build_r(&net, &classify(&net).unwrap());
        assert_eq!(r.rows().len(), 1);
        let row: Vec<f64> = r.rows()[0].iter().map(|z| z.re).collect();
        assert_eq!(row, vec![-1.0, -1.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn single_edge_matrix() {
        let net = single_edge();
        let m = build_m(&net, &[0.5]).unwrap();
        assert!((m.get(1, 0).re - 1.0).abs() < 1e-15);
        assert!((m.get(0, 1).re - reflection(0.5)).abs() < 1e-15);
        assert_eq!(m.get(0, 0).norm() + m.get(1, 1).norm(), 0.0);
        assert_eq!(build_m(&net, &[1.0]).unwrap().get(0, 1).norm(), 0.0);
        assert!(build_m(&net, &[-1.0]).is_err());
    }

    #[test]
    fn matrix_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for net in [star(1), star(2), triangle()] {
            let r = build_r(&net, &classify(&net).unwrap());
            for _ in 0..5 {
                let eta: Vec<f64> = net.damped().iter().map(|_| rng.gen_range(0.0..3.0)).collect();
                let m = build_m(&net, &eta).unwrap();
                assert!(check_m_identity(&m, &net, &eta) < 1e-12);
                assert!(check_rm(&r, &m) < 1e-12);
            }
        }
    }

    #[test]
    fn dalembert_constant_and_roundtrip() {
        let net = single_edge();
        let step = q(1, 10);
        let c = C64::new(0.7, 0.0);
        let state = WaveState::new(&net, &step, vec![vec![c; 10]], vec![vec![C64::zero(); 10]]).unwrap();
        let f = dalembert_forward(&state);
        assert!(f.iter().flatten().all(|z| (z - c).norm() < 1e-15));
        let back = dalembert_inverse(&f, &net, &step, 1e-12).unwrap();
        assert!(back.max_abs_diff(&state) < 1e-15);

        let net = star(2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = random_state(&net, &q(1, 20), &mut rng).unwrap();
        assert!(s.compatibility_residual(&net) < 1e-12);
        let back = dalembert_inverse(&dalembert_forward(&s), &net, &q(1, 20), 1e-10).unwrap();
        assert!(back.max_abs_diff(&s) < 1e-12);
        let mut bad = dalembert_forward(&s);
        bad[0][0] += C64::new(1.0, 0.0);
        assert!(matches!(dalembert_inverse(&bad, &net, &q(1, 20), 1e-10), Err(Error::NotInConstraintSpace { .. })));
    }

    #[test]
    fn flipping_an_edge_preserves_energy_and_constraints() {
        let net = star(2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = random_state(&net, &q(1, 10), &mut rng).unwrap();
        let flipped = net.flipped(1);
        let t = s.flipped(1);
        assert!((s.energy() - t.energy()).abs() < 1e-12);
        assert!(t.compatibility_residual(&flipped) < 1e-12);
    }

    fn bump_state(net: &Network, step: &Q) -> WaveState {
        let grid = TransportGrid::new(&net.edge_lengths(), step).unwrap();
        let du = grid.sample(|_, x| C64::new(4.0 * PI * (PI * x).sin().powi(3) * (PI * x).cos(), 0.0));
        let v = grid.sample(|_, x| C64::new((PI * x).sin().powi(4), 0.0));
        WaveState::new(net, step, du, v).unwrap()
    }

    #[test]
    fn damped_energy_is_monotone_and_balanced() {
        let net = single_edge();
        let damping = Piecewise::new(vec![q(3, 2)], vec![vec![q(1, 2)], vec![q(2, 1)]]).unwrap();
        let mut residuals = Vec::new();
        for n in [40, 80] {
            let step = q(1, n);
            let run = simulate_wave(&bump_state(&net, &step), &net, &damping, 3 * n as usize).unwrap();
            assert!(run.energies().windows(2).all(|w| w[1] <= w[0] + 1e-12));
            assert!(run.energies().last().unwrap() < &(0.5 * run.energies()[0]));
            residuals.push(energy_identity_residual(&run));
        }
        let ratio = residuals[0] / residuals[1];
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}, residuals {residuals:?}");
    }

    #[test]
    fn simulation_keeps_constraints() {
        for net in [star(2), triangle()] {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let step = q(1, 8);
            let s = random_state(&net, &step, &mut rng).unwrap();
            let eta = vec![q(1, 3); net.damped().len()];
            let run = simulate_wave(&s, &net, &Piecewise::constant(eta), 24).unwrap();
            for m in [0, 7, 24] {
                assert!(run.state_at(m).unwrap().compatibility_residual(&net) < 1e-10);
            }
            assert!((run.energies()[0] - s.energy()).abs() < 1e-12);
        }
    }

    #[test]
    fn verdicts() {
        let bx = |d: usize| DampingSet::Box(vec![(q(1, 2), q(2, 1)); d]);
        assert!(stability_verdict_wave(&star(1), &bx(2)).unwrap().stable);
        let v = stability_verdict_wave(&star(2), &bx(1)).unwrap();
        assert!(!v.stable && v.reasons.len() == 1);
        assert!(!stability_verdict_wave(&triangle(), &bx(1)).unwrap().stable);
        let zero = DampingSet::Finite(vec![vec![q(1, 1), q(0, 1)], vec![q(2, 1), q(1, 1)]]);
        assert!(!stability_verdict_wave(&star(1), &zero).unwrap().stable);
        assert!(stability_verdict_wave(&star(1), &DampingSet::Box(vec![(q(-1, 1), q(1, 1)); 2])).is_err());
        assert!(stability_verdict_wave(&star(1), &bx(3)).is_err());
    }

    #[test]
    fn periodic_witness_conserves_energy() {
        let set = DampingSet::Box(vec![(q(1, 2), q(2, 1))]);
        for net in [triangle(), star(2)] {
            let paths = witness_paths(&net, &set).unwrap();
            assert_eq!(paths.len(), 1);
            let w = periodic_witness(&net, &paths[0], &q(1, 16)).unwrap();
            let damping = Piecewise::new(vec![q(1, 3)], vec![vec![q(1, 2)], vec![q(2, 1)]]).unwrap();
            let run = simulate_wave(&w.state, &w.network, &damping, 16 * 3).unwrap();
            let e0 = run.energies()[0];
            assert!(e0 > 1.0);
            assert!(run.energies().iter().all(|e| (e - e0).abs() < 1e-9 * e0));
        }
    }

    #[test]
    fn witness_rescales_lengths() {
        let base = star(2);
        let net = base.with_lengths(commensurate_lengths(&[q(1, 2), q(1, 3), q(1, 1)]).unwrap()).unwrap();
        let path = &witness_paths(&net, &DampingSet::Box(vec![(q(1, 1), q(1, 1))])).unwrap()[0];
        let w = periodic_witness(&net, path, &q(1, 4)).unwrap();
        assert_eq!(w.scale, q(6, 1));
        assert_eq!(w.network.edge_lengths(), vec![q(3, 1), q(2, 1), q(6, 1)]);
        assert!(w.state.compatibility_residual(&w.network) < 1e-12);
    }

    #[test]
    fn zero_damping_adds_witness_paths() {
        let set = DampingSet::Box(vec![(q(0, 1), q(1, 1)), (q(1, 2), q(1, 1))]);
        let paths = witness_paths(&star(1), &set).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].kind, PathKind::ToDamped);
    }

    #[test]
    fn rate_fit() {
        let t: Vec<f64> = (0..20).map(f64::from).collect();
        let e: Vec<f64> = t.iter().map(|t| 3.0 * (-0.25 * t).exp()).collect();
        let fit = decay_rate_fit(&t, &e).unwrap();
        assert!((fit.rate + 0.25).abs() < 1e-12 && fit.r2 > 0.999_999);
        assert!(decay_rate_fit(&t, &[0.0; 20]).is_err());
    }
}
