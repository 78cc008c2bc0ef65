//! Exact arithmetic on the delay lattice.
//!
//! Delays are described as `L = B ℓ` with `B` a nonnegative integer `N × h`
//! matrix of full column rank and `ℓ` a vector of positive generators. All
//! combinatorial structure (integer relations, equivalence classes of
//! multi-indices) depends on `B` only.

use crate::error::{Error, Result};
use crate::rational::{qi, Q};
use num::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashSet, VecDeque};

/// Integer coefficient matrix, row `j` describes delay `j` in the generators.
pub type IntMatrix = Vec<Vec<i64>>;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DelayVector {
    b: IntMatrix,
    h: usize,
    ell: Option<Vec<Q>>,
}

/// Key of the equivalence class `[n]`, the integer vector `Bᵀ n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassKey(pub Vec<i64>);

impl ClassKey {
    pub fn zero(h: usize) -> Self {
        ClassKey(vec![0; h])
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }

    pub fn plus_row(&self, row: &[i64]) -> Self {
        ClassKey(self.0.iter().zip(row).map(|(a, b)| a + b).collect())
    }

    pub fn minus_row(&self, row: &[i64]) -> Self {
        ClassKey(self.0.iter().zip(row).map(|(a, b)| a - b).collect())
    }

    pub fn has_negative(&self) -> bool {
        self.0.iter().any(|&x| x < 0)
    }
}

impl DelayVector {
    /// Symbolic delay structure: generators are left uninstantiated.
    pub fn symbolic(b: IntMatrix) -> Result<Self> {
        let h = validate_shape(&b)?;
        let rank = rank_of(&b, h)?;
        if rank < h {
            return Err(Error::RankDeficient { rank, expected: h });
        }
        Ok(Self { b, h, ell: None })
    }

    /// Delay structure instantiated with positive rational generators.
    pub fn numeric(b: IntMatrix, ell: Vec<Q>) -> Result<Self> {
        let mut d = Self::symbolic(b)?;
        if ell.len() != d.h {
            return Err(Error::Dimension(format!(
                "{} generator values for {} generators",
                ell.len(),
                d.h
            )));
        }
        d.ell = Some(ell);
        let delays = d.delays().expect("instantiated");
        if delays.iter().any(|x| !x.is_positive()) {
            return Err(Error::invalid("every delay must be strictly positive"));
        }
        Ok(d)
    }

    /// Independent delays `L_j = ℓ_j` (identity coefficient matrix).
    pub fn independent(ell: Vec<Q>) -> Result<Self> {
        let n = ell.len();
        let b = (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect();
        Self::numeric(b, ell)
    }

    /// Commensurate delays `L_j = k_j ℓ` over a single generator.
    pub fn commensurate(multiples: &[i64], ell: Q) -> Result<Self> {
        Self::numeric(multiples.iter().map(|&k| vec![k]).collect(), vec![ell])
    }

    pub fn coeffs(&self) -> &IntMatrix {
        &self.b
    }

    pub fn row(&self, j: usize) -> &[i64] {
        &self.b[j]
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    pub fn generators(&self) -> usize {
        self.h
    }

    pub fn generator_values(&self) -> Option<&[Q]> {
        self.ell.as_deref()
    }

    pub fn is_numeric(&self) -> bool {
        self.ell.is_some()
    }

    /// Same coefficient matrix with new generator values.
    pub fn with_generators(&self, ell: Vec<Q>) -> Result<Self> {
        Self::numeric(self.b.clone(), ell)
    }

    /// Scales every generator by a positive rational.
    pub fn scaled(&self, factor: &Q) -> Result<Self> {
        let ell = self.require_numeric()?;
        self.with_generators(ell.iter().map(|x| x * factor).collect())
    }

    pub fn require_numeric(&self) -> Result<&[Q]> {
        self.ell.as_deref().ok_or_else(|| Error::invalid("delay structure has symbolic generators"))
    }

    /// The numeric delays `B ℓ`.
    pub fn delays(&self) -> Option<Vec<Q>> {
        let ell = self.ell.as_ref()?;
        Some(self.b.iter().map(|row| dot_int(row, ell)).collect())
    }

    pub fn delay(&self, j: usize) -> Option<Q> {
        self.ell.as_ref().map(|ell| dot_int(&self.b[j], ell))
    }

    pub fn max_delay(&self) -> Option<Q> {
        self.delays()?.into_iter().max()
    }

    pub fn min_delay(&self) -> Option<Q> {
        self.delays()?.into_iter().min()
    }

    /// Numeric value `Λ·n` of a class.
    pub fn level(&self, key: &ClassKey) -> Option<Q> {
        self.ell.as_ref().map(|ell| dot_int(&key.0, ell))
    }

    pub fn class_key(&self, n: &[i64]) -> ClassKey {
        class_key(n, self)
    }
}

fn dot_int(row: &[i64], ell: &[Q]) -> Q {
    row.iter().zip(ell).fold(Q::zero(), |acc, (&k, l)| acc + qi(k) * l)
}

fn validate_shape(b: &IntMatrix) -> Result<usize> {
    let Some(first) = b.first() else {
        return Err(Error::invalid("delay matrix has no rows"));
    };
    let h = first.len();
    if h == 0 {
        return Err(Error::invalid("delay matrix has no generator columns"));
    }
    for (j, row) in b.iter().enumerate() {
        if row.len() != h {
            return Err(Error::Dimension(format!("row {j} has {} entries, expected {h}", row.len())));
        }
        if row.iter().any(|&x| x < 0) {
            return Err(Error::invalid(format!("row {j} has a negative entry")));
        }
        if row.iter().all(|&x| x == 0) {
            return Err(Error::invalid(format!("row {j} is zero (delay must be positive)")));
        }
    }
    Ok(h)
}

fn rank_of(b: &IntMatrix, h: usize) -> Result<usize> {
    let n = b.len();
    let mut cols: Vec<Vec<i128>> = (0..n).map(|j| b[j].iter().map(|&x| i128::from(x)).collect()).collect();
    // Rows of Bᵀ are the generator coordinates; columns are delays.
    column_echelon(&mut cols, h, None)
}

/// Reduces the `h × n` matrix whose columns are `cols` to column echelon form
/// by unimodular column operations, mirrored on `track` when given. Returns
/// the rank.
fn column_echelon(
    cols: &mut [Vec<i128>],
    h: usize,
    mut track: Option<&mut [Vec<i128>]>,
) -> Result<usize> {
    let n = cols.len();
    let mut k = 0;
    for r in 0..h {
        if k == n {
            break;
        }
        loop {
            // Column with smallest nonzero |entry| in row r, ties to smallest index.
            let pivot = (k..n)
                .filter(|&c| cols[c][r] != 0)
                .min_by_key(|&c| (cols[c][r].unsigned_abs(), c));
            let Some(p) = pivot else { break };
            let mut done = true;
            for c in k..n {
                if c == p || cols[c][r] == 0 {
                    continue;
                }
                let f = cols[c][r] / cols[p][r];
                sub_multiple(cols, c, p, f)?;
                if let Some(t) = track.as_deref_mut() {
                    sub_multiple(t, c, p, f)?;
                }
                if cols[c][r] != 0 {
                    done = false;
                }
            }
            if done {
                cols.swap(k, p);
                if let Some(t) = track.as_deref_mut() {
                    t.swap(k, p);
                }
                k += 1;
                break;
            }
        }
    }
    Ok(k)
}

fn sub_multiple(cols: &mut [Vec<i128>], target: usize, source: usize, f: i128) -> Result<()> {
    for i in 0..cols[target].len() {
        let v = cols[source][i].checked_mul(f).ok_or(Error::Overflow)?;
        cols[target][i] = cols[target][i].checked_sub(v).ok_or(Error::Overflow)?;
    }
    Ok(())
}

/// Basis of the integer relations `{n ∈ ℤ^N : Bᵀ n = 0}` in Hermite normal
/// form (echelon rows, positive pivots, entries above pivots reduced).
pub fn integer_kernel(b: &IntMatrix) -> Result<Vec<Vec<i64>>> {
    let h = validate_shape(b)?;
    let n = b.len();
    let mut cols: Vec<Vec<i128>> = (0..n).map(|j| b[j].iter().map(|&x| i128::from(x)).collect()).collect();
    let mut unimod: Vec<Vec<i128>> =
        (0..n).map(|j| (0..n).map(|i| i128::from(i == j)).collect()).collect();
    let rank = column_echelon(&mut cols, h, Some(&mut unimod))?;
    if rank < h {
        return Err(Error::RankDeficient { rank, expected: h });
    }
    let basis: Vec<Vec<i128>> = unimod[rank..].to_vec();
    let hnf = hermite_rows(basis)?;
    hnf.into_iter()
        .map(|row| row.into_iter().map(|x| i64::try_from(x).map_err(|_| Error::Overflow)).collect())
        .collect()
}

/// Row Hermite normal form of a full-row-rank integer matrix.
fn hermite_rows(mut rows: Vec<Vec<i128>>) -> Result<Vec<Vec<i128>>> {
    let m = rows.len();
    if m == 0 {
        return Ok(rows);
    }
    let n = rows[0].len();
    let mut r = 0;
    for c in 0..n {
        if r == m {
            break;
        }
        loop {
            let pivot = (r..m).filter(|&i| rows[i][c] != 0).min_by_key(|&i| (rows[i][c].unsigned_abs(), i));
            let Some(p) = pivot else { break };
            let mut done = true;
            for i in r..m {
                if i == p || rows[i][c] == 0 {
                    continue;
                }
                let f = rows[i][c] / rows[p][c];
                sub_multiple(&mut rows, i, p, f)?;
                if rows[i][c] != 0 {
                    done = false;
                }
            }
            if done {
                rows.swap(r, p);
                if rows[r][c] < 0 {
                    for x in rows[r].iter_mut() {
                        *x = -*x;
                    }
                }
                for i in 0..r {
                    let f = rows[i][c].div_euclid(rows[r][c]);
                    if f != 0 {
                        sub_multiple(&mut rows, i, r, f)?;
                    }
                }
                r += 1;
                break;
            }
        }
    }
    Ok(rows)
}

pub fn class_key(n: &[i64], delays: &DelayVector) -> ClassKey {
    let mut key = vec![0i64; delays.h];
    for (nj, row) in n.iter().zip(&delays.b) {
        for (k, &bjk) in key.iter_mut().zip(row) {
            *k += nj * bjk;
        }
    }
    ClassKey(key)
}

/// All `n ∈ ℕ^N` with `Bᵀ n = key`, sorted lexicographically.
///
/// Since `B` is nonnegative with nonzero rows, `|n|₁ ≤ Σ_k key_k`, which
/// bounds the search.
pub fn class_members(key: &ClassKey, delays: &DelayVector) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    if key.0.len() != delays.h || key.has_negative() {
        return out;
    }
    let mut current = vec![0i64; delays.len()];
    let mut remaining = key.0.clone();
    members_dfs(0, &delays.b, &mut remaining, &mut current, &mut out);
    out
}

fn members_dfs(
    j: usize,
    b: &IntMatrix,
    remaining: &mut Vec<i64>,
    current: &mut Vec<i64>,
    out: &mut Vec<Vec<i64>>,
) {
    if j == b.len() {
        if remaining.iter().all(|&x| x == 0) {
            out.push(current.clone());
        }
        return;
    }
    let row = &b[j];
    let max = row
        .iter()
        .zip(remaining.iter())
        .filter(|(&bjk, _)| bjk > 0)
        .map(|(&bjk, &r)| r / bjk)
        .min()
        .unwrap_or(0);
    let mut taken = 0;
    for count in 0..=max {
        current[j] = count;
        members_dfs(j + 1, b, remaining, current, out);
        for (r, &bjk) in remaining.iter_mut().zip(row) {
            *r -= bjk;
        }
        taken += 1;
    }
    for (r, &bjk) in remaining.iter_mut().zip(row) {
        *r += bjk * taken;
    }
    current[j] = 0;
}

/// A delay vector to be tested against a lattice, either in generator form
/// or as plain rationals.
#[derive(Debug, Clone)]
pub enum DelayOperand {
    Symbolic(DelayVector),
    Numeric(Vec<Q>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Membership {
    Outside,
    /// `L = B ℓ'` with the given generator values.
    Numeric(Vec<Q>),
    /// `B' = B C` column by column (`C` stored as `h × h'` rows).
    Symbolic(Vec<Vec<Q>>),
}

impl Membership {
    pub fn is_member(&self) -> bool {
        !matches!(self, Membership::Outside)
    }
}

/// Membership in `V(Λ) = range B`, with a witness when true.
pub fn membership_v(l: &DelayOperand, lattice: &DelayVector) -> Result<Membership> {
    match l {
        DelayOperand::Numeric(v) => {
            if v.len() != lattice.len() {
                return Err(Error::Dimension(format!("{} delays against {}", v.len(), lattice.len())));
            }
            if v.iter().any(|x| !x.is_positive()) {
                return Err(Error::invalid("delays must be strictly positive"));
            }
            Ok(match solve_range(&lattice.b, v) {
                Some(w) => Membership::Numeric(w),
                None => Membership::Outside,
            })
        }
        DelayOperand::Symbolic(other) => {
            if other.len() != lattice.len() {
                return Err(Error::Dimension(format!("{} delays against {}", other.len(), lattice.len())));
            }
            let mut c_cols = Vec::with_capacity(other.h);
            for col in 0..other.h {
                let target: Vec<Q> = other.b.iter().map(|row| qi(row[col])).collect();
                match solve_range(&lattice.b, &target) {
                    Some(w) => c_cols.push(w),
                    None => return Ok(Membership::Outside),
                }
            }
            let c = (0..lattice.h).map(|i| c_cols.iter().map(|col| col[i].clone()).collect()).collect();
            Ok(Membership::Symbolic(c))
        }
    }
}

/// Membership in `W(Λ)`: both integer relation lattices coincide. Only
/// defined for generator-form operands.
pub fn membership_w(l: &DelayOperand, lattice: &DelayVector) -> Result<bool> {
    match l {
        DelayOperand::Numeric(_) => Err(Error::invalid(
            "rational independence of numeric delays cannot be decided; give the delays in generator form",
        )),
        DelayOperand::Symbolic(other) => {
            if other.len() != lattice.len() {
                return Err(Error::Dimension(format!("{} delays against {}", other.len(), lattice.len())));
            }
            Ok(integer_kernel(&other.b)? == integer_kernel(&lattice.b)?)
        }
    }
}

/// Solves `B x = target` over the rationals (B has full column rank).
fn solve_range(b: &IntMatrix, target: &[Q]) -> Option<Vec<Q>> {
    let n = b.len();
    let h = b[0].len();
    let mut a: Vec<Vec<Q>> = (0..n)
        .map(|i| {
            let mut row: Vec<Q> = b[i].iter().map(|&x| qi(x)).collect();
            row.push(target[i].clone());
            row
        })
        .collect();
    let mut r = 0;
    let mut pivots = Vec::new();
    for c in 0..h {
        let Some(p) = (r..n).find(|&i| !a[i][c].is_zero()) else { continue };
        a.swap(r, p);
        let inv = a[r][c].clone();
        for x in a[r].iter_mut() {
            *x = &*x / &inv;
        }
        for i in 0..n {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                let pivot_row = a[r].clone();
                for (x, p) in a[i].iter_mut().zip(&pivot_row) {
                    *x = &*x - p * &f;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    if a[r..].iter().any(|row| !row[h].is_zero()) {
        return None;
    }
    let mut x = vec![Q::zero(); h];
    for (i, &c) in pivots.iter().enumerate() {
        x[c] = a[i][h].clone();
    }
    Some(x)
}

/// Frame in which class keys of one lattice are assigned numeric levels for a
/// delay vector `L ∈ V₊(Λ)`.
#[derive(Debug, Clone)]
pub struct LevelFrame {
    lattice: DelayVector,
    coords: Vec<Q>,
    delays: Vec<Q>,
}

impl LevelFrame {
    /// Levels of `lattice` classes measured with the delays of `l`.
    pub fn new(lattice: &DelayVector, l: &[Q]) -> Result<Self> {
        match membership_v(&DelayOperand::Numeric(l.to_vec()), lattice)? {
            Membership::Numeric(coords) => Ok(Self { lattice: lattice.clone(), coords, delays: l.to_vec() }),
            _ => Err(Error::invalid("delay vector is not in the range of the lattice matrix")),
        }
    }

    /// Frame of a numerically instantiated structure measured with its own delays.
    pub fn own(delays: &DelayVector) -> Result<Self> {
        let ell = delays.require_numeric()?.to_vec();
        let l = delays.delays().expect("numeric");
        Ok(Self { lattice: delays.clone(), coords: ell, delays: l })
    }

    pub fn lattice(&self) -> &DelayVector {
        &self.lattice
    }

    pub fn delays(&self) -> &[Q] {
        &self.delays
    }

    pub fn level(&self, key: &ClassKey) -> Q {
        dot_int(&key.0, &self.coords)
    }

    pub fn max_delay(&self) -> Q {
        self.delays.iter().max().cloned().expect("nonempty")
    }

    pub fn min_delay(&self) -> Q {
        self.delays.iter().min().cloned().expect("nonempty")
    }

    /// All nonempty classes with level `≤ upper`, sorted by level then key.
    pub fn classes_up_to(&self, upper: &Q) -> Vec<(ClassKey, Q)> {
        let mut seen: HashSet<ClassKey> = HashSet::new();
        let mut queue = VecDeque::new();
        let zero = ClassKey::zero(self.lattice.h);
        seen.insert(zero.clone());
        queue.push_back(zero);
        while let Some(key) = queue.pop_front() {
            for row in &self.lattice.b {
                let next = key.plus_row(row);
                if !seen.contains(&next) && &self.level(&next) <= upper {
                    seen.insert(next.clone());
                    queue.push_back(next);
                }
            }
        }
        let mut out: BTreeSet<(Q, ClassKey)> = BTreeSet::new();
        for k in seen {
            out.insert((self.level(&k), k));
        }
        out.into_iter().map(|(lv, k)| (k, lv)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn kernel_examples() {
        assert_eq!(integer_kernel(&vec![vec![1], vec![2]]).unwrap(), vec![vec![2, -1]]);
        assert!(integer_kernel(&vec![vec![1, 0], vec![0, 1]]).unwrap().is_empty());
        assert_eq!(
            integer_kernel(&vec![vec![1, 0], vec![0, 1], vec![1, 1]]).unwrap(),
            vec![vec![1, 1, -1]]
        );
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let err = integer_kernel(&vec![vec![1, 2], vec![2, 4]]).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { rank: 1, expected: 2 }));
        assert!(DelayVector::symbolic(vec![vec![1, 1], vec![1, 1]]).is_err());
        assert!(DelayVector::symbolic(vec![vec![0]]).is_err());
        assert!(DelayVector::symbolic(vec![vec![-1]]).is_err());
    }

    #[test]
    fn class_keys() {
        let d = DelayVector::symbolic(vec![vec![1], vec![2]]).unwrap();
        assert_eq!(class_key(&[0, 0], &d), ClassKey(vec![0]));
        assert_eq!(class_key(&[2, 0], &d), class_key(&[0, 1], &d));
        assert_ne!(class_key(&[1, 0], &d), class_key(&[0, 1], &d));
    }

    #[test]
    fn members() {
        let d = DelayVector::symbolic(vec![vec![1], vec![2]]).unwrap();
        assert_eq!(class_members(&ClassKey(vec![2]), &d), vec![vec![0, 1], vec![2, 0]]);
        assert!(class_members(&ClassKey(vec![-1]), &d).is_empty());
        let id = DelayVector::symbolic(vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]).unwrap();
        assert_eq!(class_members(&ClassKey(vec![3, 0, 2]), &id), vec![vec![3, 0, 2]]);
    }

    #[test]
    fn range_membership() {
        let d = DelayVector::numeric(vec![vec![1], vec![2]], vec![qi(1)]).unwrap();
        let own = DelayOperand::Numeric(d.delays().unwrap());
        assert_eq!(membership_v(&own, &d).unwrap(), Membership::Numeric(vec![qi(1)]));
        assert_eq!(membership_v(&DelayOperand::Numeric(vec![qi(1), qi(3)]), &d).unwrap(), Membership::Outside);
        assert_eq!(
            membership_v(&DelayOperand::Numeric(vec![q(3, 2), qi(3)]), &d).unwrap(),
            Membership::Numeric(vec![q(3, 2)])
        );
        assert!(membership_v(&DelayOperand::Numeric(vec![qi(1)]), &d).is_err());
    }

    #[test]
    fn kernel_membership() {
        let b12 = DelayVector::symbolic(vec![vec![1], vec![2]]).unwrap();
        let id2 = DelayVector::symbolic(vec![vec![1, 0], vec![0, 1]]).unwrap();
        assert!(membership_w(&DelayOperand::Symbolic(b12.clone()), &b12).unwrap());
        assert!(!membership_w(&DelayOperand::Symbolic(id2), &b12).unwrap());
        let b11 = DelayVector::symbolic(vec![vec![1], vec![1]]).unwrap();
        let b22 = DelayVector::symbolic(vec![vec![2], vec![2]]).unwrap();
        assert!(membership_w(&DelayOperand::Symbolic(b22), &b11).unwrap());
        assert!(membership_w(&DelayOperand::Numeric(vec![qi(1), qi(1)]), &b11).is_err());
    }

    #[test]
    fn levels_are_sorted() {
        let d = DelayVector::numeric(vec![vec![1], vec![2]], vec![qi(1)]).unwrap();
        let frame = LevelFrame::own(&d).unwrap();
        let classes = frame.classes_up_to(&qi(5));
        let levels: Vec<Q> = classes.iter().map(|(_, l)| l.clone()).collect();
        assert_eq!(levels, (0..=5).map(qi).collect::<Vec<_>>());
    }
}
