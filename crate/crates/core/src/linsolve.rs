//! Exact sparse linear algebra over ℚ.
//!
//! Elimination runs on primitive integer rows (rows are cleared of denominators
//! and divided by their content after every update), which keeps entry growth in
//! check without Bareiss bookkeeping. Pivot rule: smallest column first, then the
//! sparsest candidate row, ties broken by row index.

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{EdrcError, Result};
use crate::poly::Scalar;

/// Sorted `(index, value)` pairs with no zeros.
pub type SparseVec = Vec<(usize, Scalar)>;

type IRow = Vec<(usize, BigInt)>;

/// Upper limit on either matrix dimension, from `EDRC_MAX_MATRIX` (default 400000).
pub fn max_matrix() -> usize {
    static CAP: OnceLock<usize> = OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var("EDRC_MAX_MATRIX")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(400_000)
    })
}

pub fn check_size(rows: usize, cols: usize) -> Result<()> {
    let cap = max_matrix();
    if rows > cap || cols > cap {
        return Err(EdrcError::computation(
            "linsolve",
            format!("system {rows}x{cols} exceeds EDRC_MAX_MATRIX={cap}"),
        ));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: BTreeMap<(usize, usize), Scalar>,
}

impl SparseMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        SparseMatrix {
            rows,
            cols,
            entries: BTreeMap::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = SparseMatrix::new(n, n);
        for i in 0..n {
            m.set(i, i, Scalar::one());
        }
        m
    }

    pub fn from_dense(rows: &[Vec<Scalar>]) -> Self {
        let cols = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut m = SparseMatrix::new(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                m.set(i, j, v.clone());
            }
        }
        m
    }

    pub fn from_rows(cols: usize, rows: &[SparseVec]) -> Self {
        let mut m = SparseMatrix::new(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            for (j, v) in r {
                m.set(i, *j, v.clone());
            }
        }
        m
    }

    /// Matrix whose columns are the given sparse vectors.
    pub fn from_columns(rows: usize, cols: &[SparseVec]) -> Self {
        let mut m = SparseMatrix::new(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for (i, v) in c {
                m.set(*i, j, v.clone());
            }
        }
        m
    }

    pub fn set(&mut self, r: usize, c: usize, v: Scalar) {
        assert!(r < self.rows && c < self.cols, "index out of bounds");
        if v.is_zero() {
            self.entries.remove(&(r, c));
        } else {
            self.entries.insert((r, c), v);
        }
    }

    pub fn get(&self, r: usize, c: usize) -> Scalar {
        self.entries.get(&(r, c)).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn row_vecs(&self) -> Vec<SparseVec> {
        let mut out = vec![Vec::new(); self.rows];
        for ((r, c), v) in &self.entries {
            out[*r].push((*c, v.clone()));
        }
        out
    }

    pub fn mul_vec(&self, x: &[Scalar]) -> Vec<Scalar> {
        let mut out = vec![Scalar::zero(); self.rows];
        for ((r, c), v) in &self.entries {
            out[*r] += v * &x[*c];
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceBasis {
    pub ambient_dim: usize,
    pub basis_vectors: Vec<SparseVec>,
}

impl SubspaceBasis {
    pub fn dim(&self) -> usize {
        self.basis_vectors.len()
    }

    /// Span of arbitrary vectors, stored as a reduced echelon basis.
    pub fn span(ambient_dim: usize, vecs: &[SparseVec]) -> Self {
        let rows: Vec<IRow> = vecs.iter().map(to_irow).filter(|r| !r.is_empty()).collect();
        let mut ech = echelon_rows(rows);
        back_reduce(&mut ech);
        SubspaceBasis {
            ambient_dim,
            basis_vectors: ech.iter().map(normalized).collect(),
        }
    }

    pub fn standard(n: usize) -> Self {
        SubspaceBasis {
            ambient_dim: n,
            basis_vectors: (0..n).map(|i| vec![(i, Scalar::one())]).collect(),
        }
    }
}

// ---------- integer row kernels ----------

fn primitive(row: &mut IRow) {
    let mut g = BigInt::zero();
    for (_, v) in row.iter() {
        g = g.gcd(v);
        if g.is_one() {
            break;
        }
    }
    if row.first().map(|(_, v)| v.is_negative()).unwrap_or(false) {
        g = -g;
    }
    if !g.is_one() && !g.is_zero() {
        for (_, v) in row.iter_mut() {
            *v = &*v / &g;
        }
    }
}

fn to_irow(v: &SparseVec) -> IRow {
    let mut l = BigInt::one();
    for (_, c) in v {
        if !c.denom().is_one() {
            l = l.lcm(c.denom());
        }
    }
    let mut row: IRow = v
        .iter()
        .filter(|(_, c)| !c.is_zero())
        .map(|(i, c)| (*i, c.numer() * (&l / c.denom())))
        .collect();
    row.sort_by_key(|(i, _)| *i);
    primitive(&mut row);
    row
}

fn normalized(row: &IRow) -> SparseVec {
    let lead = Scalar::from_integer(row[0].1.clone());
    row.iter()
        .map(|(i, v)| (*i, Scalar::from_integer(v.clone()) / &lead))
        .collect()
}

fn coeff_at(row: &IRow, col: usize) -> Option<&BigInt> {
    row.binary_search_by_key(&col, |(i, _)| *i).ok().map(|k| &row[k].1)
}

/// `a*target - t*pivot` where the combination kills `col`; result made primitive.
fn eliminate(target: &IRow, pivot: &IRow, col: usize) -> IRow {
    let t = coeff_at(target, col).expect("column present in target");
    let p = coeff_at(pivot, col).expect("column present in pivot");
    let g = t.gcd(p);
    let a = p / &g;
    let b = t / &g;
    let mut out = Vec::with_capacity(target.len() + pivot.len());
    let (mut i, mut j) = (0, 0);
    while i < target.len() || j < pivot.len() {
        let ci = target.get(i).map(|e| e.0).unwrap_or(usize::MAX);
        let cj = pivot.get(j).map(|e| e.0).unwrap_or(usize::MAX);
        if ci < cj {
            out.push((ci, &a * &target[i].1));
            i += 1;
        } else if cj < ci {
            out.push((cj, -(&b * &pivot[j].1)));
            j += 1;
        } else {
            let v = &a * &target[i].1 - &b * &pivot[j].1;
            if !v.is_zero() {
                out.push((ci, v));
            }
            i += 1;
            j += 1;
        }
    }
    primitive(&mut out);
    out
}

/// Forward elimination; returns pivot rows sorted by leading column.
fn echelon_rows(rows: Vec<IRow>) -> Vec<IRow> {
    let mut store: Vec<Option<IRow>> = Vec::with_capacity(rows.len());
    let mut buckets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for r in rows {
        if r.is_empty() {
            continue;
        }
        buckets.entry(r[0].0).or_default().push(store.len());
        store.push(Some(r));
    }
    let mut out = Vec::new();
    while let Some((col, ids)) = buckets.pop_first() {
        let best = *ids
            .iter()
            .min_by_key(|&&k| (store[k].as_ref().unwrap().len(), k))
            .unwrap();
        let pivot = store[best].take().unwrap();
        for &k in &ids {
            if k == best {
                continue;
            }
            let r = store[k].take().unwrap();
            let nr = eliminate(&r, &pivot, col);
            if !nr.is_empty() {
                buckets.entry(nr[0].0).or_default().push(k);
                store[k] = Some(nr);
            }
        }
        out.push(pivot);
    }
    out
}

/// Clear every pivot column from the other pivot rows (reduced echelon form).
fn back_reduce(rows: &mut [IRow]) {
    let pivot_of: HashMap<usize, usize> = rows.iter().enumerate().map(|(i, r)| (r[0].0, i)).collect();
    for i in (0..rows.len()).rev() {
        let cols: Vec<usize> = rows[i][1..]
            .iter()
            .map(|e| e.0)
            .filter(|c| pivot_of.contains_key(c))
            .collect();
        for c in cols {
            let k = pivot_of[&c];
            if coeff_at(&rows[i], c).is_some() {
                let nr = eliminate(&rows[i], &rows[k], c);
                rows[i] = nr;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RrefResult {
    pub rref: SparseMatrix,
    pub pivots: Vec<usize>,
    pub rank: usize,
}

/// Reduced row echelon form with pivots normalized to 1.
pub fn rref(m: &SparseMatrix) -> RrefResult {
    let rows: Vec<IRow> = m.row_vecs().iter().map(to_irow).collect();
    let mut ech = echelon_rows(rows);
    back_reduce(&mut ech);
    let rank = ech.len();
    let pivots = ech.iter().map(|r| r[0].0).collect();
    let normal: Vec<SparseVec> = ech.iter().map(normalized).collect();
    let mut out = SparseMatrix::new(m.rows, m.cols);
    for (i, r) in normal.iter().enumerate() {
        for (j, v) in r {
            out.set(i, *j, v.clone());
        }
    }
    RrefResult {
        rref: out,
        pivots,
        rank,
    }
}

pub fn rank_dense(rows: &[Vec<Scalar>]) -> usize {
    let m = SparseMatrix::from_dense(rows);
    let irows = m.row_vecs().iter().map(to_irow).collect();
    echelon_rows(irows).len()
}

/// One solution of `m x = rhs` with free variables set to zero, or `None`.
pub fn solve_particular(m: &SparseMatrix, rhs: &[Scalar]) -> Result<Option<Vec<Scalar>>> {
    if rhs.len() != m.rows {
        return Err(EdrcError::DimensionMismatch(format!(
            "rhs has length {} but matrix has {} rows",
            rhs.len(),
            m.rows
        )));
    }
    let mut rows = m.row_vecs();
    for (i, r) in rows.iter_mut().enumerate() {
        if !rhs[i].is_zero() {
            r.push((m.cols, rhs[i].clone()));
        }
    }
    Ok(solve_rows(m.cols, rows)?.map(|sv| {
        let mut x = vec![Scalar::zero(); m.cols];
        for (i, v) in sv {
            x[i] = v;
        }
        x
    }))
}

/// Rows already augmented with the rhs in column `ncols`.
fn solve_rows(ncols: usize, rows: Vec<SparseVec>) -> Result<Option<SparseVec>> {
    check_size(rows.len(), ncols + 1)?;
    let irows = rows.iter().map(to_irow).collect();
    let mut ech = echelon_rows(irows);
    if ech.iter().any(|r| r[0].0 == ncols) {
        return Ok(None);
    }
    back_reduce(&mut ech);
    let mut x: SparseVec = ech
        .iter()
        .filter_map(|r| {
            coeff_at(r, ncols).map(|v| (r[0].0, Scalar::new(v.clone(), r[0].1.clone())))
        })
        .collect();
    x.sort_by_key(|e| e.0);
    Ok(Some(x))
}

/// Solve `Σ_j x_j cols[j] = rhs` for sparse columns over `nrows` rows.
pub fn solve_columns(nrows: usize, cols: &[SparseVec], rhs: &SparseVec) -> Result<Option<SparseVec>> {
    let n = cols.len();
    let mut rows: Vec<SparseVec> = vec![Vec::new(); nrows];
    for (j, c) in cols.iter().enumerate() {
        for (i, v) in c {
            rows[*i].push((j, v.clone()));
        }
    }
    for (i, v) in rhs {
        rows[*i].push((n, v.clone()));
    }
    solve_rows(n, rows)
}

/// Null-space basis; one vector per free column, in ascending free-column order.
pub fn kernel_basis(m: &SparseMatrix) -> SubspaceBasis {
    let rows: Vec<IRow> = m.row_vecs().iter().map(to_irow).collect();
    kernel_from_irows(m.cols, rows)
}

fn kernel_from_irows(ncols: usize, rows: Vec<IRow>) -> SubspaceBasis {
    let mut ech = echelon_rows(rows);
    back_reduce(&mut ech);
    let pivots: HashMap<usize, usize> = ech.iter().enumerate().map(|(i, r)| (r[0].0, i)).collect();
    // column -> list of (pivot row, coefficient) for free columns
    let mut by_free: BTreeMap<usize, Vec<(usize, Scalar)>> = BTreeMap::new();
    for r in &ech {
        let lead = Scalar::from_integer(r[0].1.clone());
        for (c, v) in &r[1..] {
            by_free
                .entry(*c)
                .or_default()
                .push((r[0].0, -Scalar::from_integer(v.clone()) / &lead));
        }
    }
    let mut basis = Vec::new();
    for f in 0..ncols {
        if pivots.contains_key(&f) {
            continue;
        }
        let mut v: SparseVec = by_free.remove(&f).unwrap_or_default();
        v.push((f, Scalar::one()));
        v.sort_by_key(|e| e.0);
        basis.push(v);
    }
    SubspaceBasis {
        ambient_dim: ncols,
        basis_vectors: basis,
    }
}

/// Kernel of the map given by sparse columns.
pub fn kernel_of_columns(nrows: usize, cols: &[SparseVec]) -> Result<SubspaceBasis> {
    check_size(nrows, cols.len())?;
    let mut rows: Vec<SparseVec> = vec![Vec::new(); nrows];
    for (j, c) in cols.iter().enumerate() {
        for (i, v) in c {
            rows[*i].push((j, v.clone()));
        }
    }
    Ok(kernel_from_irows(cols.len(), rows.iter().map(to_irow).collect()))
}

/// Incrementally built echelon basis supporting membership and reduction.
#[derive(Clone, Debug, Default)]
pub struct Echelon {
    pivots: BTreeMap<usize, IRow>,
}

impl Echelon {
    pub fn new() -> Self {
        Echelon::default()
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    fn reduce_irow(&self, mut row: IRow) -> IRow {
        let mut k = 0;
        while k < row.len() {
            let c = row[k].0;
            if let Some(p) = self.pivots.get(&c) {
                row = eliminate(&row, p, c);
                // entries before position k are untouched by the pivot (it starts at c)
                k = row.partition_point(|e| e.0 < c);
            } else {
                k += 1;
            }
        }
        row
    }

    /// Insert; returns true when the vector was independent of the current span.
    pub fn insert(&mut self, v: &SparseVec) -> bool {
        let r = self.reduce_irow(to_irow(v));
        if r.is_empty() {
            return false;
        }
        self.pivots.insert(r[0].0, r);
        true
    }

    pub fn contains(&self, v: &SparseVec) -> bool {
        self.reduce_irow(to_irow(v)).is_empty()
    }

    /// Exact remainder of `v` modulo the span, with no entries in pivot columns.
    pub fn reduce_exact(&self, v: &SparseVec) -> SparseVec {
        let mut acc: BTreeMap<usize, Scalar> = v.iter().cloned().collect();
        let mut from = 0usize;
        loop {
            let next = acc.range(from..).map(|(c, _)| *c).find(|c| self.pivots.contains_key(c));
            let Some(c) = next else { break };
            let p = &self.pivots[&c];
            let t = acc.remove(&c).unwrap() / Scalar::from_integer(p[0].1.clone());
            for (j, pv) in &p[1..] {
                let e = acc.entry(*j).or_insert_with(Scalar::zero);
                *e -= &t * Scalar::from_integer(pv.clone());
                if e.is_zero() {
                    acc.remove(j);
                }
            }
            from = c + 1;
        }
        acc.into_iter().collect()
    }

    /// Reduced remainder of `v`, scaled to a primitive integer vector.
    pub fn remainder(&self, v: &SparseVec) -> SparseVec {
        self.reduce_irow(to_irow(v))
            .into_iter()
            .map(|(i, c)| (i, Scalar::from_integer(c)))
            .collect()
    }
}

/// `big / small` with representatives picked greedily by ascending `weight` of each
/// big-basis vector (the maximum column weight on its support).
pub fn quotient_basis<W: Ord>(
    big: &SubspaceBasis,
    small: &SubspaceBasis,
    weight: impl Fn(usize) -> W,
) -> Result<(usize, Vec<SparseVec>)> {
    if big.ambient_dim != small.ambient_dim {
        return Err(EdrcError::DimensionMismatch("quotient of different ambients".into()));
    }
    let mut bigspan = Echelon::new();
    for v in &big.basis_vectors {
        bigspan.insert(v);
    }
    if small.basis_vectors.iter().any(|v| !bigspan.contains(v)) {
        return Err(EdrcError::precondition("small subspace is not contained in big"));
    }
    let mut ech = Echelon::new();
    for v in &small.basis_vectors {
        ech.insert(v);
    }
    let mut order: Vec<(W, usize)> = big
        .basis_vectors
        .iter()
        .enumerate()
        .map(|(k, v)| (v.iter().map(|(i, _)| weight(*i)).max().unwrap_or_else(|| weight(0)), k))
        .collect();
    order.sort();
    let mut reps = Vec::new();
    for (_, k) in order {
        let v = &big.basis_vectors[k];
        if ech.insert(v) {
            reps.push(v.clone());
        }
    }
    let dim = bigspan.rank() - ech.rank() + reps.len();
    debug_assert_eq!(dim, reps.len());
    Ok((reps.len(), reps))
}

pub fn dot(a: &SparseVec, b: &[Scalar]) -> Scalar {
    a.iter().map(|(i, v)| v * &b[*i]).fold(Scalar::zero(), |x, y| x + y)
}

/// `Σ c_j cols[j]` as a sparse vector.
pub fn combine(cols: &[SparseVec], coeffs: &SparseVec) -> SparseVec {
    let mut acc: BTreeMap<usize, Scalar> = BTreeMap::new();
    for (j, c) in coeffs {
        for (i, v) in &cols[*j] {
            *acc.entry(*i).or_insert_with(Scalar::zero) += v * c;
        }
    }
    acc.into_iter().filter(|(_, v)| !v.is_zero()).collect()
}

/// Assigns row numbers to keys in first-seen order (deterministic for deterministic input).
#[derive(Clone, Debug)]
pub struct RowIndex<K: std::hash::Hash + Eq + Clone> {
    map: HashMap<K, usize>,
    keys: Vec<K>,
}

impl<K: std::hash::Hash + Eq + Clone> Default for RowIndex<K> {
    fn default() -> Self {
        RowIndex {
            map: HashMap::new(),
            keys: Vec::new(),
        }
    }
}

impl<K: std::hash::Hash + Eq + Clone> RowIndex<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn id(&mut self, k: &K) -> usize {
        if let Some(&i) = self.map.get(k) {
            return i;
        }
        let i = self.keys.len();
        self.map.insert(k.clone(), i);
        self.keys.push(k.clone());
        i
    }

    pub fn get(&self, k: &K) -> Option<usize> {
        self.map.get(k).copied()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn key(&self, i: usize) -> &K {
        &self.keys[i]
    }

    /// Sparse vector from `(key, value)` pairs, summing duplicates.
    pub fn vector(&mut self, entries: impl IntoIterator<Item = (K, Scalar)>) -> SparseVec {
        let mut acc: BTreeMap<usize, Scalar> = BTreeMap::new();
        for (k, v) in entries {
            let i = self.id(&k);
            *acc.entry(i).or_insert_with(Scalar::zero) += v;
        }
        acc.into_iter().filter(|(_, v)| !v.is_zero()).collect()
    }
}
