//! Truncated de Rham and Čech–de Rham complexes of localized rings, realized as
//! finite slices of the double filtration and solved with exact linear algebra.
//!
//! A complex is given by divisors `g_0..g_t` (cells are the nonempty index sets `I`,
//! living on `X_{g_I}`) and relations on polynomial numerators: ideal generators `h`
//! contribute `hΩ + dh∧Ω`, power generators `P` contribute `P^s Ω` at order `s`.
//! An element of total degree `k` at order `s` is one numerator `α_I` per cell, read as
//! `α_I / g_I^s`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Pow};
use serde::Serialize;

use crate::error::{EdrcError, Result};
use crate::gysin::{residue, GysinSetup, QuotientForm};
use crate::linsolve::{check_size, kernel_of_columns, Echelon, RowIndex, SparseVec};
use crate::poly::{Monomial, MultiPoly, Scalar, Vars};
use crate::ring::{index_tuples, AffineRing, DiffForm, FiltrationStamp, LocalizedElem, PolyForm, Reduction};

/// Relations imposed on numerators.
#[derive(Clone, Debug, Default)]
pub struct Relations {
    pub ideal: Vec<MultiPoly>,
    pub powers: Vec<MultiPoly>,
}

/// `(order s, filtration degree d)`: numerators of cell I have degree ≤ d + s·deg g_I.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Truncation {
    pub order: u32,
    pub degree: i64,
}

/// One numerator form per cell.
pub type Cochain = BTreeMap<Vec<usize>, PolyForm>;

type Key = (usize, Vec<usize>, Monomial);

#[derive(Clone, Debug)]
pub struct LocalizedComplex {
    pub vars: Vars,
    pub divisors: Vec<MultiPoly>,
    pub relations: Relations,
    cells: Vec<Vec<usize>>,
    cell_divisors: Vec<MultiPoly>,
}

/// Slice basis element: cell position, form index, monomial.
#[derive(Clone, Debug)]
struct BasisElem {
    cell: usize,
    idx: Vec<usize>,
    mono: Monomial,
    weight: i64,
}

impl LocalizedComplex {
    pub fn new(vars: &Vars, divisors: Vec<MultiPoly>, relations: Relations) -> Result<Self> {
        if divisors.is_empty() || divisors.iter().any(|g| g.is_zero()) {
            return Err(EdrcError::precondition("complex needs nonzero divisors"));
        }
        let t = divisors.len();
        let mut cells = Vec::new();
        for size in 1..=t {
            cells.extend(index_tuples(t, size));
        }
        let cell_divisors = cells
            .iter()
            .map(|c| c.iter().fold(MultiPoly::one(vars), |acc, &i| &acc * &divisors[i]))
            .collect();
        Ok(LocalizedComplex {
            vars: vars.clone(),
            divisors,
            relations,
            cells,
            cell_divisors,
        })
    }

    /// De Rham complex of `k[vars]_g / (ideal)`.
    pub fn single(vars: &Vars, divisor: MultiPoly, relations: Relations) -> Result<Self> {
        LocalizedComplex::new(vars, vec![divisor], relations)
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn cell_divisor(&self, cell: &[usize]) -> MultiPoly {
        let pos = self.cells.iter().position(|c| c == cell).expect("known cell");
        self.cell_divisors[pos].clone()
    }

    fn nvars(&self) -> usize {
        self.vars.len()
    }

    /// Form degree of cell `c` at total degree `k`, if any.
    fn cell_p(&self, k: usize, c: usize) -> Option<usize> {
        let q = self.cells[c].len() - 1;
        (k >= q && k - q <= self.nvars()).then(|| k - q)
    }

    fn numerator_cap(&self, c: usize, tr: Truncation) -> Option<u32> {
        let cap = tr.degree + tr.order as i64 * self.cell_divisors[c].deg0().max(0);
        (cap >= 0).then_some(cap as u32)
    }

    fn slack(&self) -> u32 {
        self.relations.ideal.iter().filter_map(|h| h.degree()).max().unwrap_or(0)
    }

    fn basis(&self, k: usize, tr: Truncation) -> Vec<BasisElem> {
        let mut out = Vec::new();
        for c in 0..self.cells.len() {
            let (Some(p), Some(cap)) = (self.cell_p(k, c), self.numerator_cap(c, tr)) else { continue };
            let gdeg = tr.order as i64 * self.cell_divisors[c].deg0().max(0);
            let monos = Monomial::up_to_degree(self.nvars(), cap);
            for idx in index_tuples(self.nvars(), p) {
                for m in &monos {
                    out.push(BasisElem {
                        cell: c,
                        idx: idx.clone(),
                        mono: m.clone(),
                        weight: m.degree() as i64 - gdeg,
                    });
                }
            }
        }
        // stable sort keeps cell/index/monomial order within a weight
        out.sort_by_key(|b| b.weight);
        out
    }

    fn elem_cochain(&self, b: &BasisElem) -> Cochain {
        let f = MultiPoly::monomial(&self.vars, b.mono.clone(), Scalar::one());
        BTreeMap::from([(self.cells[b.cell].clone(), PolyForm::basic(&self.vars, b.idx.clone(), f))])
    }

    /// `D_tot = δ + (−1)^q d` from order `s` to order `s+1` numerators.
    pub fn apply_d(&self, c: &Cochain, s: u32) -> Cochain {
        let mut out: Cochain = BTreeMap::new();
        let sc = Scalar::from_integer(BigInt::from(s));
        for (cell, a) in c {
            let q = cell.len() - 1;
            let gi = self.cell_divisor(cell);
            let dpart = a.d().mul_poly(&gi).sub(&PolyForm::df(&gi).wedge(a).scale(&sc));
            let dpart = if q % 2 == 0 { dpart } else { dpart.scale(&-Scalar::one()) };
            add_into(&mut out, cell.clone(), dpart);
            for i in 0..self.divisors.len() {
                if cell.contains(&i) {
                    continue;
                }
                let mut j = cell.clone();
                j.push(i);
                j.sort_unstable();
                let nu = j.iter().position(|&x| x == i).unwrap();
                let gj = self.cell_divisor(&j);
                let f = &self.divisors[i].pow(s) * &gj;
                let r = a.mul_poly(&f);
                add_into(&mut out, j, if nu % 2 == 0 { r } else { r.scale(&-Scalar::one()) });
            }
        }
        out
    }

    /// Lift numerators from order `s` to order `s + m`.
    pub fn lift_order(&self, c: &Cochain, m: u32) -> Cochain {
        c.iter()
            .map(|(cell, a)| (cell.clone(), a.mul_poly(&self.cell_divisor(cell).pow(m))))
            .collect()
    }

    /// Generators of the relation subspace at total degree `k`, order `s`, numerator degree ≤ cap + slack.
    fn relation_vectors(&self, k: usize, tr: Truncation, ix: &mut RowIndex<Key>) -> Vec<SparseVec> {
        let mut out = Vec::new();
        let n = self.nvars();
        for c in 0..self.cells.len() {
            let (Some(p), Some(cap)) = (self.cell_p(k, c), self.numerator_cap(c, tr)) else { continue };
            let cap = cap + self.slack();
            let mut gens: Vec<PolyForm> = Vec::new();
            for h in &self.relations.ideal {
                for idx in index_tuples(n, p) {
                    gens.push(PolyForm::basic(&self.vars, idx, h.clone()));
                }
                if p >= 1 {
                    let dh = PolyForm::df(h);
                    for idx in index_tuples(n, p - 1) {
                        gens.push(dh.wedge(&PolyForm::basic(&self.vars, idx, MultiPoly::one(&self.vars))));
                    }
                }
            }
            for h in &self.relations.powers {
                let hp = h.pow(tr.order);
                for idx in index_tuples(n, p) {
                    gens.push(PolyForm::basic(&self.vars, idx, hp.clone()));
                }
            }
            for gen in gens {
                if gen.is_zero() {
                    continue;
                }
                let gd = gen.coeff_degree().max(0) as u32;
                if gd > cap {
                    continue;
                }
                for m in Monomial::up_to_degree(n, cap - gd) {
                    let w = gen.map_coeffs(|f| f.mul_monomial(&m, &Scalar::one()));
                    out.push(self.vectorize(&BTreeMap::from([(self.cells[c].clone(), w)]), ix));
                }
            }
        }
        out
    }

    fn vectorize(&self, c: &Cochain, ix: &mut RowIndex<Key>) -> SparseVec {
        let mut entries = Vec::new();
        for (cell, w) in c {
            let pos = self.cells.iter().position(|x| x == cell).unwrap();
            for (idx, f) in &w.coeffs {
                for (m, v) in f.terms() {
                    entries.push(((pos, idx.clone(), m.clone()), v.clone()));
                }
            }
        }
        ix.vector(entries)
    }

    /// Closed elements at slice `(k, tr)`, filtered by ascending weight.
    pub fn closed_forms(&self, k: usize, tr: Truncation) -> Result<Vec<(Cochain, i64)>> {
        let basis = self.basis(k, tr);
        let next = Truncation {
            order: tr.order + 1,
            degree: tr.degree,
        };
        let has_target = (0..self.cells.len()).any(|c| self.cell_p(k + 1, c).is_some());
        if !has_target {
            return Ok(basis.iter().map(|b| (self.elem_cochain(b), b.weight)).collect());
        }
        let mut ix = RowIndex::new();
        let mut cols = self.relation_vectors(k + 1, next, &mut ix);
        let nrel = cols.len();
        for b in &basis {
            let img = self.apply_d(&self.elem_cochain(b), tr.order);
            cols.push(self.vectorize(&img, &mut ix));
        }
        check_size(ix.len(), cols.len())?;
        let ker = kernel_of_columns(ix.len(), &cols)?;
        let mut out = Vec::new();
        for v in ker.basis_vectors {
            let mut c: Cochain = BTreeMap::new();
            let mut w = i64::MIN;
            for (j, x) in v {
                if j < nrel {
                    continue;
                }
                let b = &basis[j - nrel];
                w = w.max(b.weight);
                let e = self.elem_cochain(b);
                for (cell, f) in e {
                    add_into(&mut c, cell, f.scale(&x));
                }
            }
            if !c.is_empty() {
                out.push((c, w));
            }
        }
        out.sort_by_key(|e| e.1);
        Ok(out)
    }

    /// Greedy classes among `closed` modulo boundaries and relations at margin `m`.
    fn classes_at_margin(&self, k: usize, tr: Truncation, closed: &[(Cochain, i64)], m: u32) -> Result<Vec<usize>> {
        let t = Truncation {
            order: tr.order + m,
            degree: tr.degree + m as i64,
        };
        let mut ix = RowIndex::new();
        let mut ech = Echelon::new();
        let rels = self.relation_vectors(k, t, &mut ix);
        let mut count = rels.len();
        for v in &rels {
            ech.insert(v);
        }
        if k >= 1 {
            let prev = Truncation {
                order: t.order - 1,
                degree: t.degree,
            };
            for b in self.basis(k - 1, prev) {
                let img = self.apply_d(&self.elem_cochain(&b), prev.order);
                ech.insert(&self.vectorize(&img, &mut ix));
                count += 1;
            }
        }
        check_size(ix.len(), count)?;
        let mut out = Vec::new();
        for (i, (c, _)) in closed.iter().enumerate() {
            if ech.insert(&self.vectorize(&self.lift_order(c, m), &mut ix)) {
                out.push(i);
            }
        }
        Ok(out)
    }

    /// Classes at total degree `k`: representatives from margin 1, certified when margin 2 agrees.
    pub fn truncated_cohomology(&self, k: usize, tr: Truncation) -> Result<LevelResult> {
        let closed = self.closed_forms(k, tr)?;
        let first = self.classes_at_margin(k, tr, &closed, 1)?;
        let second = self.classes_at_margin(k, tr, &closed, 2)?;
        Ok(LevelResult {
            level: k,
            truncation: tr,
            dims_by_margin: vec![first.len(), second.len()],
            certified: first.len() == second.len(),
            representatives: first.iter().map(|&i| closed[i].0.clone()).collect(),
            weights: first.iter().map(|&i| closed[i].1).collect(),
        })
    }

    /// Cell entries as forms over `ring` localized at the cell divisors.
    pub fn to_diff_forms(&self, ring: &AffineRing, c: &Cochain, order: u32) -> BTreeMap<Vec<usize>, DiffForm> {
        c.iter()
            .map(|(cell, w)| (cell.clone(), DiffForm::from_polyform(ring, &self.cell_divisor(cell), w, order)))
            .collect()
    }
}

fn add_into(c: &mut Cochain, cell: Vec<usize>, w: PolyForm) {
    if w.is_zero() {
        return;
    }
    match c.remove(&cell) {
        Some(old) => {
            let s = old.add(&w);
            if !s.is_zero() {
                c.insert(cell, s);
            }
        }
        None => {
            c.insert(cell, w);
        }
    }
}

/// Classes found at one total degree.
#[derive(Clone, Debug)]
pub struct LevelResult {
    pub level: usize,
    pub truncation: Truncation,
    /// Dimensions with boundary margins 1 and 2.
    pub dims_by_margin: Vec<usize>,
    pub certified: bool,
    /// Numerators at `truncation.order`.
    pub representatives: Vec<Cochain>,
    pub weights: Vec<i64>,
}

impl LevelResult {
    pub fn dim(&self) -> usize {
        self.representatives.len()
    }
}

/// Cohomology of a variety (or a patch) with representatives.
#[derive(Clone, Debug)]
pub struct CohomologyResult {
    pub dims: Vec<usize>,
    /// `representatives[p]`: closed p-forms.
    pub representatives: Vec<Vec<DiffForm>>,
    pub stamps: Vec<Vec<FiltrationStamp>>,
    pub certified: Vec<bool>,
}

impl CohomologyResult {
    pub fn empty() -> Self {
        CohomologyResult {
            dims: Vec::new(),
            representatives: Vec::new(),
            stamps: Vec::new(),
            certified: Vec::new(),
        }
    }

    pub fn push(&mut self, reps: Vec<DiffForm>, certified: bool) {
        self.dims.push(reps.len());
        self.stamps.push(reps.iter().map(|w| w.filtration_stamp()).collect());
        self.representatives.push(reps);
        self.certified.push(certified);
    }

    pub fn all_certified(&self) -> bool {
        self.certified.iter().all(|&c| c)
    }
}

/// Ring `k[vars]/(gens)` with the linear-system reduction (or the polynomial ring).
pub fn closed_ring(vars: &Vars, gens: &[MultiPoly], degree_cap: u32) -> Result<AffineRing> {
    let gens: Vec<MultiPoly> = gens.iter().filter(|g| !g.is_zero()).cloned().collect();
    if gens.is_empty() {
        return Ok(AffineRing::polynomial(vars));
    }
    AffineRing::new(vars, gens, Reduction::LinearSystem { degree_cap })
}

/// Default filtration degree for level p of a closed variety.
pub fn closed_default_degree(p: usize, gens: &[MultiPoly]) -> i64 {
    p as i64 + 1 + gens.iter().filter_map(|g| g.degree()).max().unwrap_or(0) as i64
}

/// Global-section de Rham cohomology of `A = k[vars]/(gens)` at truncated slices.
pub fn closed_variety_cohomology(vars: &Vars, gens: &[MultiPoly], degree: Option<i64>) -> Result<CohomologyResult> {
    let gens: Vec<MultiPoly> = gens.iter().filter(|g| !g.is_zero()).cloned().collect();
    if gens.iter().any(|g| g.is_constant()) {
        // empty variety
        let mut r = CohomologyResult::empty();
        for _ in 0..=vars.len() {
            r.push(Vec::new(), true);
        }
        return Ok(r);
    }
    let cx = LocalizedComplex::single(vars, MultiPoly::one(vars), Relations {
        ideal: gens.clone(),
        powers: Vec::new(),
    })?;
    let maxdeg = gens.iter().filter_map(|g| g.degree()).max().unwrap_or(1);
    let mut out = CohomologyResult::empty();
    for p in 0..=vars.len() {
        let d = degree.unwrap_or_else(|| closed_default_degree(p, &gens));
        let lr = cx.truncated_cohomology(p, Truncation { order: 0, degree: d })?;
        let ring = closed_ring(vars, &gens, d.max(0) as u32 + 2 * maxdeg + 2)?;
        let reps = lr
            .representatives
            .iter()
            .map(|c| cx.to_diff_forms(&ring, c, 0).remove(&vec![0]).unwrap_or_else(|| DiffForm::zero(&ring, &MultiPoly::one(vars), p)))
            .collect();
        out.push(reps, lr.certified);
    }
    Ok(out)
}

// ---------- quotient complex and the hypersurface route ----------

/// `Ω_{A_{f0 f1}} / (Ω_{A_{f0}} + Ω_{A_{f1}})` on `𝔸^{n+1}`.
pub fn quotient_complex(setup: &GysinSetup) -> Result<LocalizedComplex> {
    LocalizedComplex::single(&setup.avars, &setup.f0 * &setup.f1, Relations {
        ideal: Vec::new(),
        powers: vec![setup.f0.clone(), setup.f1.clone()],
    })
}

/// Default truncation for quotient level `k`: order 1 (the image of λ), degree `k − 2`.
pub fn quotient_default_truncation(k: usize) -> Truncation {
    Truncation {
        order: 1,
        degree: k as i64 - 2,
    }
}

/// Classes of the quotient complex at level `k`; level `p + 2` feeds `H^p(Z)`.
pub fn quotient_complex_cohomology(setup: &GysinSetup, k: usize, tr: Option<Truncation>) -> Result<LevelResult> {
    let cx = quotient_complex(setup)?;
    cx.truncated_cohomology(k, tr.unwrap_or_else(|| quotient_default_truncation(k)))
}

/// `(p+2)(d+d′+2)(2d′−d+3)^{2p+3}` (may be nonpositive for degenerate inputs).
pub fn thm71_bound(p: u32, d: i64, dprime: i64) -> BigInt {
    BigInt::from((p as i64 + 2) * (d + dprime + 2)) * Pow::pow(BigInt::from(2 * dprime - d + 3), 2 * p + 3)
}

/// Cohomology of `V = Z(f) \ Z(g)` through the quotient complex and the residue map.
#[derive(Clone, Debug)]
pub struct HypersurfaceResult {
    pub cohomology: CohomologyResult,
    pub truncations: Vec<Option<Truncation>>,
    pub bounds: Vec<BigInt>,
    /// Every representative stamp within the bound printed beside it.
    pub within_bounds: bool,
}

pub fn hypersurface_cohomology(
    setup: &GysinSetup,
    p_max: usize,
    truncation: Option<Truncation>,
) -> Result<HypersurfaceResult> {
    let dim_v = setup.n - 1;
    let mut coh = CohomologyResult::empty();
    let mut truncations = vec![None];
    let mut bounds = vec![thm71_bound(0, setup.d1 as i64, setup.g.deg0())];
    coh.push(vec![DiffForm::function(setup.b_one())], true);
    let mut within = true;
    for p in 1..=p_max {
        let bound = thm71_bound(p as u32, setup.d1 as i64, setup.g.deg0());
        bounds.push(bound.clone());
        if p > dim_v {
            coh.push(Vec::new(), true);
            truncations.push(None);
            continue;
        }
        let k = p + 2;
        let tr = truncation.unwrap_or_else(|| quotient_default_truncation(k));
        let lr = quotient_complex_cohomology(setup, k, Some(tr))?;
        let mut reps = Vec::new();
        for c in &lr.representatives {
            let num = c.values().next().cloned().unwrap_or_else(|| PolyForm::zero(&setup.avars, k));
            let r = residue(&QuotientForm { numerator: num, order: tr.order }, setup)?;
            let st = r.form.filtration_stamp();
            if BigInt::from(st.order_s) > bound || BigInt::from(st.degree_d) > bound {
                within = false;
            }
            reps.push(r.form);
        }
        truncations.push(Some(tr));
        coh.push(reps, lr.certified);
    }
    Ok(HypersurfaceResult {
        cohomology: coh,
        truncations,
        bounds,
        within_bounds: within,
    })
}

/// `H^p` of the localized ring `k[x]_g` (no relations), for small sanity checks.
pub fn localized_line_cohomology(vars: &Vars, g: &MultiPoly, tr: Truncation) -> Result<Vec<usize>> {
    let cx = LocalizedComplex::single(vars, g.clone(), Relations::default())?;
    (0..=vars.len()).map(|k| Ok(cx.truncated_cohomology(k, tr)?.dim())).collect()
}

/// Exact-form check in the closed complex: `w − Σ c_i reps_i` is a boundary at `degree`.
pub fn in_span_mod_exact(
    vars: &Vars,
    gens: &[MultiPoly],
    p: usize,
    w: &PolyForm,
    reps: &[PolyForm],
    degree: i64,
) -> Result<bool> {
    let cx = LocalizedComplex::single(vars, MultiPoly::one(vars), Relations {
        ideal: gens.to_vec(),
        powers: Vec::new(),
    })?;
    let tr = Truncation { order: 1, degree };
    let mut ix = RowIndex::new();
    let mut ech = Echelon::new();
    for v in cx.relation_vectors(p, tr, &mut ix) {
        ech.insert(&v);
    }
    if p >= 1 {
        for b in cx.basis(p - 1, Truncation { order: 0, degree }) {
            ech.insert(&cx.vectorize(&cx.apply_d(&cx.elem_cochain(&b), 0), &mut ix));
        }
    }
    for r in reps {
        ech.insert(&cx.vectorize(&BTreeMap::from([(vec![0], r.clone())]), &mut ix));
    }
    Ok(ech.contains(&cx.vectorize(&BTreeMap::from([(vec![0], w.clone())]), &mut ix)))
}

/// Element of `k[x]_g`-forms as a single-cell cochain.
pub fn single_cell(w: &PolyForm) -> Cochain {
    BTreeMap::from([(vec![0], w.clone())])
}

/// Numerator of a localized coefficient form at order `s` (helper for callers holding DiffForms).
pub fn numerator(w: &DiffForm, s: u32) -> PolyForm {
    w.numerator_at(s)
}

pub fn localized_one(ring: &AffineRing) -> LocalizedElem {
    LocalizedElem::one(ring, &ring.one())
}
