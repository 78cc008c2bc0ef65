#![allow(dead_code)]

use netwave::diffeq::{InitialCondition, Segment};
use netwave::rational::{q, qi};
use netwave::ratlattice::DelayVector;
use netwave::signal::{MatrixTuple, Piecewise, SwitchingSignal};
use netwave::wavenet::{commensurate_lengths, Network, VertexRole};
use netwave::{ExactComplex, Mat, Q, C64};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn small_q(rng: &mut impl Rng) -> Q {
    q(rng.gen_range(-3..=3), rng.gen_range(1..=4))
}

pub fn exact(rng: &mut impl Rng, complex: bool) -> ExactComplex {
    let im = if complex { small_q(rng) } else { qi(0) };
    ExactComplex::new(small_q(rng), im)
}

/// A delay vector with `n` delays: independent, commensurate or mixed.
pub fn random_delays(rng: &mut impl Rng, n: usize) -> DelayVector {
    match rng.gen_range(0..3) {
        0 => {
            let mut ell: Vec<Q> = Vec::new();
            while ell.len() < n {
                let x = q(rng.gen_range(2..=8), rng.gen_range(2..=4));
                if !ell.contains(&x) {
                    ell.push(x);
                }
            }
            // Numeric generators are taken as independent; only the structure matters.
            DelayVector::independent(ell).unwrap()
        }
        1 => {
            let mut m: Vec<i64> = (1..=3).collect();
            m.shuffle(rng);
            DelayVector::commensurate(&m[..n], q(1, rng.gen_range(1..=2))).unwrap()
        }
        _ if n >= 2 => {
            let mut b = vec![vec![1, 0], vec![0, 1]];
            if n == 3 {
                b.push(vec![1, 1]);
            }
            DelayVector::numeric(b, vec![qi(1), q(3, 2)]).unwrap()
        }
        _ => DelayVector::commensurate(&[1], q(2, 3)).unwrap(),
    }
}

pub fn random_tuple(rng: &mut impl Rng, n: usize, d: usize, complex: bool) -> MatrixTuple<ExactComplex> {
    MatrixTuple::new((0..n).map(|_| Mat::from_fn(d, |_, _| exact(rng, complex))).collect()).unwrap()
}

/// Piecewise-constant exact signal with up to three breakpoints in `(-1, span)`.
pub fn random_signal(rng: &mut impl Rng, n: usize, d: usize, span: i64) -> SwitchingSignal<ExactComplex> {
    let complex = rng.gen_bool(0.5);
    let mut breaks: Vec<Q> = (0..rng.gen_range(0..=3)).map(|_| q(rng.gen_range(-4..4 * span), 4)).collect();
    breaks.sort();
    breaks.dedup();
    let values = (0..=breaks.len()).map(|_| random_tuple(rng, n, d, complex)).collect();
    Piecewise::new(breaks, values).unwrap()
}

pub fn to_float(signal: &SwitchingSignal<ExactComplex>) -> SwitchingSignal<C64> {
    Piecewise::new(
        signal.breakpoints().to_vec(),
        signal.values().iter().map(|t| MatrixTuple::new(t.iter().map(Mat::to_c64).collect()).unwrap()).collect(),
    )
    .unwrap()
}

/// Piecewise-linear data on `[-l_max, 0)` with random rational breakpoints.
pub fn random_initial(rng: &mut impl Rng, l_max: &Q, d: usize) -> InitialCondition<C64> {
    let mut starts = vec![-l_max.clone()];
    for _ in 0..rng.gen_range(0..=3) {
        let s = -l_max.clone() * q(rng.gen_range(1..8), 8);
        if !starts.contains(&s) {
            starts.push(s);
        }
    }
    let segments = starts
        .into_iter()
        .map(|start| Segment {
            start,
            coeffs: (0..d).map(|_| vec![C64::new(rng.gen_range(-1.0..1.0), 0.0), C64::new(rng.gen_range(-1.0..1.0), 0.0)]).collect(),
        })
        .collect();
    InitialCondition::new(l_max.clone(), d, segments).unwrap()
}

use VertexRole::{Damped as D, Interior as I, Undamped as U};

pub fn network(roles: &[VertexRole], edges: &[(usize, usize)], lengths: &[Q]) -> Network {
    Network::new(
        (0..roles.len()).map(|i| format!("v{i}")).collect(),
        roles.to_vec(),
        edges.to_vec(),
        commensurate_lengths(lengths).unwrap(),
    )
    .unwrap()
}

fn ones(n: usize) -> Vec<Q> {
    vec![qi(1); n]
}

/// Single edge from an undamped vertex to a damped one.
pub fn single_edge() -> Network {
    network(&[U, D], &[(0, 1)], &ones(1))
}

/// Three edges around an interior centre: one undamped and two damped leaves.
pub fn star() -> Network {
    network(&[I, U, D, D], &[(0, 1), (0, 2), (3, 0)], &ones(3))
}

/// A triangle with an undamped and a damped pendant edge.
pub fn triangle() -> Network {
    network(&[I, I, I, U, D], &[(0, 1), (1, 2), (2, 0), (3, 0), (1, 4)], &ones(5))
}

/// Two undamped leaves and a damped leaf around a centre.
pub fn two_undamped() -> Network {
    network(&[I, U, U, D], &[(0, 1), (0, 2), (3, 0)], &ones(3))
}

/// Path undamped - interior - damped with unequal lengths.
pub fn chain() -> Network {
    network(&[U, I, D], &[(0, 1), (1, 2)], &[qi(1), q(1, 2)])
}

/// A tree with two levels of branching and one undamped leaf.
pub fn branched() -> Network {
    network(&[I, I, U, D, D, D], &[(0, 1), (0, 2), (1, 3), (4, 1), (0, 5)], &[qi(1), q(1, 2), qi(1), q(3, 2), qi(1)])
}

/// A square with one damped and one undamped pendant edge.
pub fn square() -> Network {
    network(&[I, I, I, I, U, D], &[(0, 1), (1, 2), (2, 3), (3, 0), (4, 0), (2, 5)], &ones(6))
}

/// Connected network with at most `max_edges` edges; leaves are exterior,
/// at least one damped and one undamped.
pub fn random_network(rng: &mut impl Rng, max_edges: usize) -> Network {
    loop {
        let k = rng.gen_range(2..=6.min(max_edges + 1));
        let mut edges: Vec<(usize, usize)> = (1..k).map(|v| (rng.gen_range(0..v), v)).collect();
        let degree = |edges: &[(usize, usize)], v: usize| edges.iter().filter(|&&(a, b)| a == v || b == v).count();
        let inner: Vec<usize> = (0..k).filter(|&v| degree(&edges, v) >= 2).collect();
        for _ in 0..rng.gen_range(0..=3) {
            if inner.len() < 2 || edges.len() >= max_edges {
                break;
            }
            let a = *inner.choose(rng).unwrap();
            let b = *inner.choose(rng).unwrap();
            if a != b && !edges.iter().any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a)) {
                edges.push((a, b));
            }
        }
        let leaves: Vec<usize> = (0..k).filter(|&v| degree(&edges, v) == 1).collect();
        if leaves.len() < 2 || edges.len() > max_edges {
            continue;
        }
        let mut roles = vec![I; k];
        for (i, &v) in leaves.iter().enumerate() {
            roles[v] = match i {
                0 => U,
                1 => D,
                _ => *[U, D].choose(rng).unwrap(),
            };
        }
        for e in edges.iter_mut() {
            if rng.gen_bool(0.5) {
                *e = (e.1, e.0);
            }
        }
        let lengths: Vec<Q> = edges.iter().map(|_| q(rng.gen_range(1..=4), 2)).collect();
        return network(&roles, &edges, &lengths);
    }
}
