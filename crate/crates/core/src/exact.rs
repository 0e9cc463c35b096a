//! Exact rational linear algebra.
//!
//! Everything downstream (face lattices, graded pieces, kernels, covers) is
//! reduced to linear algebra over the rationals. Vectors are sparse because
//! the degreewise matrices of restriction and multiplication maps have very
//! few nonzero entries per column.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// The ground field.
pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn q_frac(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Sparse vector with strictly increasing indices and no stored zeros.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SparseVec {
    entries: Vec<(usize, Q)>,
}

impl SparseVec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn unit(i: usize) -> Self {
        Self { entries: vec![(i, Q::one())] }
    }

    pub fn from_dense(v: &[Q]) -> Self {
        let entries = v
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| (i, c.clone()))
            .collect();
        Self { entries }
    }

    /// Builds from arbitrary (index, value) pairs, summing duplicates.
    pub fn from_pairs<I: IntoIterator<Item = (usize, Q)>>(pairs: I) -> Self {
        let mut map: BTreeMap<usize, Q> = BTreeMap::new();
        for (i, c) in pairs {
            *map.entry(i).or_insert_with(Q::zero) += c;
        }
        let entries = map.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        Self { entries }
    }

    pub fn to_dense(&self, len: usize) -> Vec<Q> {
        let mut out = vec![Q::zero(); len];
        for (i, c) in &self.entries {
            out[*i] = c.clone();
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Q)> + '_ {
        self.entries.iter().map(|(i, c)| (*i, c))
    }

    pub fn get(&self, i: usize) -> Q {
        match self.entries.binary_search_by_key(&i, |(j, _)| *j) {
            Ok(pos) => self.entries[pos].1.clone(),
            Err(_) => Q::zero(),
        }
    }

    pub fn leading(&self) -> Option<(usize, &Q)> {
        self.entries.first().map(|(i, c)| (*i, c))
    }

    pub fn max_index(&self) -> Option<usize> {
        self.entries.last().map(|(i, _)| *i)
    }

    pub fn scale(&mut self, a: &Q) {
        if a.is_zero() {
            self.entries.clear();
            return;
        }
        for (_, c) in self.entries.iter_mut() {
            *c *= a;
        }
    }

    pub fn scaled(&self, a: &Q) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    pub fn neg(&self) -> Self {
        self.scaled(&-Q::one())
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: &Q, other: &SparseVec) {
        if a.is_zero() || other.is_zero() {
            return;
        }
        let mut out = Vec::with_capacity(self.entries.len() + other.entries.len());
        let mut lhs = std::mem::take(&mut self.entries).into_iter().peekable();
        let mut rhs = other.entries.iter().peekable();
        loop {
            match (lhs.peek(), rhs.peek()) {
                (Some((i, _)), Some((j, _))) => {
                    if i < j {
                        out.push(lhs.next().unwrap());
                    } else if j < i {
                        let (j, c) = rhs.next().unwrap();
                        out.push((*j, a * c));
                    } else {
                        let (i, c) = lhs.next().unwrap();
                        let (_, d) = rhs.next().unwrap();
                        let s = c + a * d;
                        if !s.is_zero() {
                            out.push((i, s));
                        }
                    }
                }
                (Some(_), None) => out.push(lhs.next().unwrap()),
                (None, Some(_)) => {
                    let (j, c) = rhs.next().unwrap();
                    out.push((*j, a * c));
                }
                (None, None) => break,
            }
        }
        self.entries = out;
    }

    pub fn add(&self, other: &SparseVec) -> SparseVec {
        let mut out = self.clone();
        out.axpy(&Q::one(), other);
        out
    }

    pub fn sub(&self, other: &SparseVec) -> SparseVec {
        let mut out = self.clone();
        out.axpy(&-Q::one(), other);
        out
    }

    /// Shifts every index by `offset`.
    pub fn shifted(&self, offset: usize) -> SparseVec {
        Self { entries: self.entries.iter().map(|(i, c)| (i + offset, c.clone())).collect() }
    }

    /// Keeps the entries with index in `range`, re-based to start at zero.
    pub fn slice(&self, start: usize, end: usize) -> SparseVec {
        let entries = self
            .entries
            .iter()
            .filter(|(i, _)| *i >= start && *i < end)
            .map(|(i, c)| (i - start, c.clone()))
            .collect();
        Self { entries }
    }

    pub fn dot(&self, other: &SparseVec) -> Q {
        let mut acc = Q::zero();
        let (mut a, mut b) = (0, 0);
        while a < self.entries.len() && b < other.entries.len() {
            let (i, ref x) = self.entries[a];
            let (j, ref y) = other.entries[b];
            match i.cmp(&j) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    acc += x * y;
                    a += 1;
                    b += 1;
                }
            }
        }
        acc
    }

    /// Linear image under the map whose columns are `columns`.
    pub fn apply(&self, columns: &[SparseVec]) -> SparseVec {
        let mut out = SparseVec::new();
        for (i, c) in self.iter() {
            out.axpy(c, &columns[i]);
        }
        out
    }

    /// Concatenation of blocks with the given offsets.
    pub fn concat<'a, I: IntoIterator<Item = (usize, &'a SparseVec)>>(blocks: I) -> SparseVec {
        let mut entries = Vec::new();
        for (offset, v) in blocks {
            entries.extend(v.entries.iter().map(|(i, c)| (i + offset, c.clone())));
        }
        entries.sort_by_key(|(i, _)| *i);
        SparseVec { entries }
    }
}

/// A subspace held in row echelon form, keyed by pivot column.
///
/// Rows are normalized to a leading coefficient of one; entries after the
/// pivot are not back-substituted.
#[derive(Clone, Debug, Default)]
pub struct Echelon {
    rows: BTreeMap<usize, SparseVec>,
}

impl Echelon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_vectors<'a, I: IntoIterator<Item = &'a SparseVec>>(vs: I) -> Self {
        let mut e = Self::new();
        for v in vs {
            e.insert(v.clone());
        }
        e
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn pivots(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows.keys().copied()
    }

    /// Reduces `v` against the stored rows in place.
    pub fn reduce(&self, v: &mut SparseVec) {
        let mut pos = 0;
        while pos < v.entries.len() {
            let (idx, c) = (v.entries[pos].0, v.entries[pos].1.clone());
            match self.rows.get(&idx) {
                Some(row) => v.axpy(&-c, row),
                None => pos += 1,
            }
        }
    }

    pub fn contains(&self, v: &SparseVec) -> bool {
        let mut w = v.clone();
        self.reduce(&mut w);
        w.is_zero()
    }

    /// Inserts `v`; returns true iff it was independent of the stored rows.
    pub fn insert(&mut self, mut v: SparseVec) -> bool {
        self.reduce(&mut v);
        match v.leading() {
            None => false,
            Some((p, c)) => {
                let inv = c.recip();
                v.scale(&inv);
                self.rows.insert(p, v);
                true
            }
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = &SparseVec> + '_ {
        self.rows.values()
    }
}

/// Column reduction that remembers how each row was produced from the
/// source basis, so kernels and preimages come out of the same pass.
#[derive(Clone, Debug, Default)]
pub struct TrackedEchelon {
    rows: BTreeMap<usize, (SparseVec, SparseVec)>,
    kernel: Vec<SparseVec>,
    columns: usize,
}

impl TrackedEchelon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reduces every column of the map `e_j -> columns[j]`.
    pub fn from_columns(columns: &[SparseVec]) -> Self {
        let mut t = Self::new();
        for c in columns {
            t.push_column(c.clone());
        }
        t
    }

    pub fn push_column(&mut self, mut image: SparseVec) {
        let j = self.columns;
        self.columns += 1;
        let mut combo = SparseVec::unit(j);
        self.reduce_tracked(&mut image, &mut combo, true);
        match image.leading() {
            None => self.kernel.push(combo),
            Some((p, c)) => {
                let inv = c.recip();
                image.scale(&inv);
                combo.scale(&inv);
                self.rows.insert(p, (image, combo));
            }
        }
    }

    fn reduce_tracked(&self, v: &mut SparseVec, combo: &mut SparseVec, subtract: bool) {
        let mut pos = 0;
        while pos < v.entries.len() {
            let (idx, c) = (v.entries[pos].0, v.entries[pos].1.clone());
            match self.rows.get(&idx) {
                Some((row, how)) => {
                    v.axpy(&-c.clone(), row);
                    if subtract {
                        combo.axpy(&-c, how);
                    } else {
                        combo.axpy(&c, how);
                    }
                }
                None => pos += 1,
            }
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn source_dim(&self) -> usize {
        self.columns
    }

    /// Basis of the kernel, one vector per dependent column.
    pub fn kernel(&self) -> &[SparseVec] {
        &self.kernel
    }

    pub fn into_kernel(self) -> Vec<SparseVec> {
        self.kernel
    }

    /// Some `s` with `f(s) = target`, if the target lies in the image.
    pub fn preimage(&self, target: &SparseVec) -> Option<SparseVec> {
        let mut v = target.clone();
        let mut combo = SparseVec::new();
        self.reduce_tracked(&mut v, &mut combo, false);
        v.is_zero().then_some(combo)
    }

    pub fn in_image(&self, target: &SparseVec) -> bool {
        let mut v = target.clone();
        let mut combo = SparseVec::new();
        self.reduce_tracked(&mut v, &mut combo, false);
        v.is_zero()
    }
}

/// Rank of the span of `vectors`.
pub fn rank_of(vectors: &[SparseVec]) -> usize {
    Echelon::from_vectors(vectors).dim()
}

/// Dense helpers for the small matrices that appear in cone geometry.
pub mod dense {
    use super::*;

    /// Rank of a list of row vectors.
    pub fn rank(rows: &[Vec<Q>]) -> usize {
        rank_of(&rows.iter().map(|r| SparseVec::from_dense(r)).collect::<Vec<_>>())
    }

    /// Basis of `{x : row . x = 0 for every row}` in `Q^width`.
    pub fn nullspace(rows: &[Vec<Q>], width: usize) -> Vec<Vec<Q>> {
        // columns of the map x -> (row . x)
        let columns: Vec<SparseVec> = (0..width)
            .map(|j| SparseVec::from_pairs(rows.iter().enumerate().map(|(i, r)| (i, r[j].clone()))))
            .collect();
        TrackedEchelon::from_columns(&columns)
            .into_kernel()
            .into_iter()
            .map(|k| k.to_dense(width))
            .collect()
    }

    /// Solves `sum_j x_j * columns[j] = target`, if solvable.
    pub fn solve(columns: &[Vec<Q>], target: &[Q]) -> Option<Vec<Q>> {
        let cols: Vec<SparseVec> = columns.iter().map(|c| SparseVec::from_dense(c)).collect();
        let t = TrackedEchelon::from_columns(&cols);
        t.preimage(&SparseVec::from_dense(target)).map(|s| s.to_dense(columns.len()))
    }

    /// Determinant of a square matrix by fraction-producing elimination.
    pub fn det(m: &[Vec<Q>]) -> Q {
        let n = m.len();
        let mut a: Vec<Vec<Q>> = m.to_vec();
        let mut det = Q::one();
        for col in 0..n {
            let Some(p) = (col..n).find(|&r| !a[r][col].is_zero()) else {
                return Q::zero();
            };
            if p != col {
                a.swap(p, col);
                det = -det;
            }
            let pivot = a[col][col].clone();
            det *= &pivot;
            for r in col + 1..n {
                if a[r][col].is_zero() {
                    continue;
                }
                let f = &a[r][col] / &pivot;
                for c in col..n {
                    let v = &a[col][c] * &f;
                    a[r][c] -= v;
                }
            }
        }
        det
    }

    pub fn dot(a: &[Q], b: &[Q]) -> Q {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    pub fn to_q(v: &[i64]) -> Vec<Q> {
        v.iter().map(|&x| q(x)).collect()
    }

    /// Clears denominators and divides by the content. Returns the primitive
    /// integer vector pointing in the same direction.
    pub fn primitive_integer(v: &[Q]) -> Vec<i64> {
        let mut lcm = BigInt::one();
        for x in v {
            lcm = lcm.lcm(x.denom());
        }
        let ints: Vec<BigInt> = v.iter().map(|x| (x * Q::from_integer(lcm.clone())).to_integer()).collect();
        let mut g = BigInt::zero();
        for x in &ints {
            g = g.gcd(x);
        }
        if g.is_zero() {
            return vec![0; v.len()];
        }
        ints.iter()
            .map(|x| {
                let y: BigInt = x / &g;
                i64::try_from(y).expect("coordinate fits in i64")
            })
            .collect()
    }

    pub fn sign(x: &Q) -> i32 {
        if x.is_positive() {
            1
        } else if x.is_negative() {
            -1
        } else {
            0
        }
    }
}
