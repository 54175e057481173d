//! Gysin machinery for `Z = Z(g·X0 − 1, f) ⊂ 𝔸^{n+1}`.
//!
//! `B = k[Z]` is represented as `(k[X1..Xn]/(f))_g` (X0 ↦ 1/g), with coefficients reduced
//! by monic division in `Xn`. `Ω_B` is free on `dX1..dX_{n-1}`: `dXn` is eliminated through
//! `dXn = −(h/g)·Σ_{i<n} ∂f/∂Xi dXi` where `g = h·∂f/∂Xn`.
//!
//! Completions along `I = (f0, f1)` are truncated bi-power series in `T0 = f0`, `T1 = f1`.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_traits::{One, Pow};
use serde::Serialize;

use crate::error::{EdrcError, Result};
use crate::linsolve::{solve_columns, RowIndex, SparseVec};
use crate::poly::{Monomial, MultiPoly, Scalar, Vars};
use crate::ring::{exact_poly_division, loc_equal, merge_indices, AffineRing, DiffForm, LocalizedElem, PolyForm};

/// Polynomials in `T0, T1` with coefficients in `A`, truncated by total degree.
pub type TPoly = BTreeMap<(u32, u32), MultiPoly>;

/// The setup `f0 = g·X0 − 1`, `f1 = f`, with `f` monic in its last variable.
pub struct GysinSetup {
    /// Number of original variables.
    pub n: usize,
    /// `X0, X1, …, Xn`.
    pub avars: Vars,
    /// `X1, …, Xn`.
    pub bvars: Vars,
    pub f: MultiPoly,
    pub g: MultiPoly,
    pub h: MultiPoly,
    pub f0: MultiPoly,
    pub f1: MultiPoly,
    pub d0: u32,
    pub d1: u32,
    /// `2·d0 − d1 + 1`.
    pub gamma: i64,
    /// `k[X1..Xn]/(f)`.
    pub bring: AffineRing,
    xi_cache: Mutex<BTreeMap<(u32, u32), Arc<Vec<BiSeries>>>>,
}

impl std::fmt::Debug for GysinSetup {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(fm, "GysinSetup(f = {}, g = {})", self.f, self.g)
    }
}

fn fresh_name(taken: &[String]) -> String {
    let mut name = "X0".to_string();
    while taken.contains(&name) {
        name.push('_');
    }
    name
}

impl GysinSetup {
    pub fn new(f: &MultiPoly, g: &MultiPoly) -> Result<Self> {
        f.check_same(g)?;
        let n = f.nvars();
        if n == 0 || f.degree().unwrap_or(0) == 0 {
            return Err(EdrcError::precondition("f must be a nonconstant polynomial"));
        }
        if g.is_zero() {
            return Err(EdrcError::precondition("g must be nonzero"));
        }
        let bring = AffineRing::hypersurface(f, n - 1)?;
        let fx = f.partial_derivative(n - 1);
        let h = exact_poly_division(g, &fx).ok_or_else(|| {
            EdrcError::precondition(format!("∂f/∂{} does not divide g", f.vars()[n - 1]))
        })?;
        if bring.is_zero_mod(g)? {
            return Err(EdrcError::precondition("g vanishes identically on Z(f)"));
        }
        let mut names = vec![fresh_name(f.vars())];
        names.extend(f.vars().iter().cloned());
        let avars: Vars = Arc::new(names);
        let map: Vec<usize> = (1..=n).collect();
        let x0 = MultiPoly::var(&avars, 0);
        let f0 = &(&g.embed(&avars, &map) * &x0) - &MultiPoly::one(&avars);
        let f1 = f.embed(&avars, &map);
        let d0 = f0.degree().unwrap();
        let d1 = f1.degree().unwrap();
        Ok(GysinSetup {
            n,
            avars,
            bvars: f.vars().clone(),
            f: f.clone(),
            g: g.clone(),
            h,
            f0,
            f1,
            d0,
            d1,
            gamma: 2 * d0 as i64 - d1 as i64 + 1,
            bring,
            xi_cache: Mutex::new(BTreeMap::new()),
        })
    }

    /// `X1..Xn` into `A`.
    pub fn embed_b(&self, p: &MultiPoly) -> MultiPoly {
        let map: Vec<usize> = (1..=self.n).collect();
        p.embed(&self.avars, &map)
    }

    fn x0(&self) -> MultiPoly {
        MultiPoly::var(&self.avars, 0)
    }

    // ---------- arithmetic in B ----------

    pub fn b_zero(&self) -> LocalizedElem {
        LocalizedElem::zero(&self.bring, &self.g)
    }

    pub fn b_one(&self) -> LocalizedElem {
        LocalizedElem::one(&self.bring, &self.g)
    }

    pub fn b_const(&self, c: Scalar) -> LocalizedElem {
        LocalizedElem::new(&self.bring, &self.g, MultiPoly::constant(&self.bvars, c), 0)
    }

    /// Numerator reduced mod f, then g-powers cancelled where the division is exact.
    pub fn b_reduce(&self, e: &LocalizedElem) -> LocalizedElem {
        let (_, mut num) = e.numerator.monic_division(&self.f, self.n - 1).expect("f monic");
        if num.is_zero() {
            return self.b_zero();
        }
        let mut s = e.order;
        while s > 0 {
            match exact_poly_division(&num, &self.g) {
                Some(q) => {
                    num = q;
                    s -= 1;
                }
                None => break,
            }
        }
        LocalizedElem::new(&self.bring, &self.g, num, s)
    }

    pub fn b_add(&self, a: &LocalizedElem, b: &LocalizedElem) -> LocalizedElem {
        self.b_reduce(&a.add(b).expect("same ring"))
    }

    pub fn b_mul(&self, a: &LocalizedElem, b: &LocalizedElem) -> LocalizedElem {
        if a.is_syntactic_zero() || b.is_syntactic_zero() {
            return self.b_zero();
        }
        self.b_reduce(&a.mul(b).expect("same ring"))
    }

    pub fn b_equal(&self, a: &LocalizedElem, b: &LocalizedElem) -> Result<bool> {
        loc_equal(a, b)
    }

    /// Image of `a ∈ A` in B (X0 ↦ 1/g).
    pub fn to_b(&self, a: &MultiPoly) -> LocalizedElem {
        if a.is_zero() {
            return self.b_zero();
        }
        let cs = a.coefficients_in(0);
        let k = (cs.len() - 1) as u32;
        let back: Vec<usize> = std::iter::once(0).chain(0..self.n).collect();
        let mut num = MultiPoly::zero(&self.bvars);
        for (j, c) in cs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            // c does not involve X0; drop it by remapping X0 onto X1 (its exponent is 0)
            let cb = c.embed(&self.bvars, &back);
            num = &num + &(&cb * &self.g.pow(k - j as u32));
        }
        self.b_reduce(&LocalizedElem::new(&self.bring, &self.g, num, k))
    }

    /// Canonical lift `num·X0^s` of `num/g^s`.
    pub fn lift(&self, b: &LocalizedElem) -> MultiPoly {
        &self.embed_b(&b.numerator) * &self.x0().pow(b.order)
    }

    /// Degree of a low-degree lift (−∞ sentinel for zero): the canonical lift, lowered by a
    /// bisection over `L ∈ A_{≤δ} + (f0, f1)` with cofactors capped at `deg L`.
    pub fn b_degree(&self, b: &LocalizedElem) -> i64 {
        let r = self.b_reduce(b);
        if r.is_syntactic_zero() {
            return crate::ring::NEG_INF;
        }
        let l = self.lift(&r);
        let top = l.deg0().max(0) as u32;
        let (mut lo, mut hi) = (0u32, top);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.has_lift_within(&l, mid, top) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        hi as i64
    }

    fn has_lift_within(&self, l: &MultiPoly, delta: u32, cap: u32) -> bool {
        let k = self.avars.len();
        let mut rows: RowIndex<Monomial> = RowIndex::new();
        let mut cols: Vec<SparseVec> = Monomial::up_to_degree(k, delta)
            .into_iter()
            .map(|m| rows.vector([(m, Scalar::one())]))
            .collect();
        for (f, d) in [(&self.f0, self.d0), (&self.f1, self.d1)] {
            if d > cap {
                continue;
            }
            for m in Monomial::up_to_degree(k, cap - d) {
                let p = f.mul_monomial(&m, &Scalar::one());
                cols.push(rows.vector(p.terms().iter().map(|(k, c)| (k.clone(), c.clone()))));
            }
        }
        let rhs = rows.vector(l.terms().iter().map(|(k, c)| (k.clone(), c.clone())));
        matches!(solve_columns(rows.len(), &cols, &rhs), Ok(Some(_)))
    }

    /// `d_B b` in the basis `dX_j`, `j < n−1` (bvar indices).
    pub fn b_d(&self, b: &LocalizedElem) -> BTreeMap<usize, LocalizedElem> {
        let mut out: BTreeMap<usize, LocalizedElem> = BTreeMap::new();
        for (j, c) in b.differential() {
            for (k, e) in self.eliminate_dx(j, &c) {
                let acc = out.remove(&k).unwrap_or_else(|| self.b_zero());
                let s = self.b_add(&acc, &e);
                if !s.is_syntactic_zero() {
                    out.insert(k, s);
                }
            }
        }
        out
    }

    /// `c·dX_j` rewritten in the free basis.
    fn eliminate_dx(&self, j: usize, c: &LocalizedElem) -> Vec<(usize, LocalizedElem)> {
        let last = self.n - 1;
        if j != last {
            return vec![(j, c.clone())];
        }
        let mut out = Vec::new();
        for i in 0..last {
            let fi = self.f.partial_derivative(i);
            if fi.is_zero() {
                continue;
            }
            let coef = LocalizedElem::new(&self.bring, &self.g, -&(&self.h * &fi), 1);
            out.push((i, self.b_mul(c, &coef)));
        }
        out
    }

    /// Rewrite a form over B so that `dXn` does not occur.
    pub fn eliminate_last(&self, w: &DiffForm) -> DiffForm {
        let last = self.n - 1;
        let mut out = DiffForm::zero(&self.bring, &self.g, w.degree_p);
        for (idx, c) in &w.coefficients {
            if idx.last() != Some(&last) {
                out.insert(idx.clone(), self.b_reduce(c));
                continue;
            }
            let head = &idx[..idx.len() - 1];
            for (i, e) in self.eliminate_dx(last, c) {
                if let Some((sgn, nidx)) = merge_indices(head, &[i]) {
                    out.insert(nidx, if sgn > 0 { e } else { e.neg() });
                }
            }
        }
        self.b_form_reduce(&out)
    }

    pub fn b_form_reduce(&self, w: &DiffForm) -> DiffForm {
        let mut out = DiffForm::zero(&self.bring, &self.g, w.degree_p);
        for (k, c) in &w.coefficients {
            out.insert(k.clone(), self.b_reduce(c));
        }
        out
    }

    /// Exterior derivative on `Ω_B`.
    pub fn b_form_d(&self, w: &DiffForm) -> DiffForm {
        self.eliminate_last(&w.exterior_d())
    }

    pub fn b_form_is_zero(&self, w: &DiffForm) -> Result<bool> {
        self.eliminate_last(w).is_zero()
    }

    pub fn b_forms_equal(&self, a: &DiffForm, b: &DiffForm) -> Result<bool> {
        self.b_form_is_zero(&a.sub(b)?)
    }

    /// A polynomial form on `𝔸^{n+1}` restricted to Z, as a form over B.
    pub fn a_form_to_b(&self, w: &PolyForm) -> DiffForm {
        // dX0 = d(1/g) = −Σ ∂g/∂Xi dXi / g²
        let mut images: Vec<DiffForm> = Vec::new();
        let mut dx0 = DiffForm::zero(&self.bring, &self.g, 1);
        for i in 0..self.n {
            let gi = self.g.partial_derivative(i);
            if !gi.is_zero() {
                dx0.insert(vec![i], LocalizedElem::new(&self.bring, &self.g, -&gi, 2));
            }
        }
        images.push(dx0);
        for i in 0..self.n {
            images.push(DiffForm::dx(&self.bring, &self.g, i));
        }
        let mut out = DiffForm::zero(&self.bring, &self.g, w.p);
        for (idx, c) in &w.coeffs {
            let mut term = DiffForm::function(self.to_b(c));
            for &i in idx {
                term = term.wedge(&images[i]).expect("same ring");
            }
            out = out.add(&term).expect("same ring");
        }
        self.eliminate_last(&out)
    }

    /// Polynomial lift of a form over B to `𝔸^{n+1}`.
    pub fn lift_form(&self, w: &DiffForm) -> PolyForm {
        let mut out = PolyForm::zero(&self.avars, w.degree_p);
        for (idx, c) in &w.coefficients {
            out.add_term(idx.iter().map(|i| i + 1).collect(), self.lift(c));
        }
        out
    }

    // ---------- ideal I = (f0, f1) ----------

    /// `r = u·f0 + v·f1`, by monic division in Xn and solving along X0.
    pub fn split(&self, r: &MultiPoly) -> Result<(MultiPoly, MultiPoly)> {
        let xn = self.n;
        let (q, r1) = r.monic_division(&self.f1, xn)?;
        let not_in = || EdrcError::computation("gysin", "element is not in the ideal (f0, f1)");
        let ge = self.embed_b(&self.g);
        let mut u = MultiPoly::zero(&self.avars);
        if !r1.is_zero() {
            let cs = r1.coefficients_in(0);
            let kmax = cs.len() - 1;
            let mut prev = MultiPoly::zero(&self.avars);
            for (k, ck) in cs.iter().enumerate().take(kmax) {
                let uk = (&(&ge * &prev) - ck).monic_division(&self.f1, xn)?.1;
                u = &u + &(&uk * &self.x0().pow(k as u32));
                prev = uk;
            }
            let top = (&cs[kmax] - &(&ge * &prev)).monic_division(&self.f1, xn)?.1;
            if !top.is_zero() {
                return Err(not_in());
            }
        }
        let rest = &r1 - &(&u * &self.f0);
        let (q2, rem) = rest.monic_division(&self.f1, xn)?;
        if !rem.is_zero() {
            return Err(not_in());
        }
        Ok((u, &q + &q2))
    }

    /// Classes `b_{μν} ∈ B` with `Σ c_{μν} f0^μ f1^ν ≡ Σ lift(b_{μν}) f0^μ f1^ν mod I^{level+1}`.
    pub fn graded_classes(&self, t: &TPoly, level: u32) -> Result<BTreeMap<(u32, u32), LocalizedElem>> {
        let mut acc: TPoly = t.iter().filter(|(k, _)| k.0 + k.1 <= level).map(|(k, v)| (*k, v.clone())).collect();
        let mut out = BTreeMap::new();
        for l in 0..=level {
            for mu in 0..=l {
                let key = (mu, l - mu);
                let Some(c) = acc.remove(&key) else { continue };
                let b = self.to_b(&c);
                let r = &c - &self.lift(&b);
                if !b.is_syntactic_zero() {
                    out.insert(key, b);
                }
                if l == level || r.is_zero() {
                    continue;
                }
                let (u, v) = self.split(&r)?;
                for (k2, part) in [((key.0 + 1, key.1), u), ((key.0, key.1 + 1), v)] {
                    if part.is_zero() {
                        continue;
                    }
                    let e = acc.entry(k2).or_insert_with(|| MultiPoly::zero(&self.avars));
                    *e = &*e + &part;
                }
            }
        }
        Ok(out)
    }

    /// `t ∈ I^level`, decided exactly.
    pub fn in_power(&self, t: &MultiPoly, level: u32) -> Result<bool> {
        if level == 0 {
            return Ok(true);
        }
        let mut tp = TPoly::new();
        tp.insert((0, 0), t.clone());
        let cl = self.graded_classes(&tp, level - 1)?;
        Ok(cl.is_empty())
    }

    // ---------- expansions ----------

    /// `Ξ_i = ψ̂⁻¹(X_i)` for `i = 0..n`, truncated at bidegree `trunc`.
    pub fn xi(&self, trunc: (u32, u32)) -> Result<Arc<Vec<BiSeries>>> {
        if let Some(x) = self.xi_cache.lock().unwrap().get(&trunc) {
            return Ok(x.clone());
        }
        let n = self.n;
        let mut bx: Vec<BiSeries> = (0..n)
            .map(|i| BiSeries::constant(self.b_reduce(&LocalizedElem::from_poly(&self.bring, &self.g, MultiPoly::var(&self.bvars, i))), trunc))
            .collect();
        // Xn: f(X1..X_{n-1}, Y) = T1, fixed point with the inverse of ∂f/∂Xn = h/g
        let c = self.b_reduce(&LocalizedElem::new(&self.bring, &self.g, self.h.clone(), 1));
        let t1 = BiSeries::monomial(self.b_one(), (0, 1), trunc);
        for _ in 0..=trunc.1 {
            let fy = self.eval_series(&self.f, &bx)?;
            let defect = self.series_sub(&fy, &t1);
            if defect.coefficients.is_empty() {
                break;
            }
            let corr = self.series_scale_b(&defect, &c);
            bx[n - 1] = self.series_sub(&bx[n - 1], &corr);
        }
        let check = self.series_sub(&self.eval_series(&self.f, &bx)?, &t1);
        if !self.series_is_zero(&check)? {
            return Err(EdrcError::computation("gysin", "expansion of the last coordinate did not converge"));
        }
        // X0: g(Ξ)·Ξ0 = 1 + T0
        let u = self.eval_series(&self.g, &bx)?;
        let gbar = BiSeries::constant(self.b_reduce(&LocalizedElem::from_poly(&self.bring, &self.g, self.g.clone())), trunc);
        let inv_g = LocalizedElem::new(&self.bring, &self.g, MultiPoly::one(&self.bvars), 1);
        let one_t0 = self.series_add(&BiSeries::constant(self.b_one(), trunc), &BiSeries::monomial(self.b_one(), (1, 0), trunc));
        let tail = self.series_sub(&u, &gbar);
        let mut z = BiSeries::constant(inv_g.clone(), trunc);
        for _ in 0..=(trunc.0 + trunc.1) {
            let rhs = self.series_sub(&one_t0, &self.series_mul(&tail, &z));
            z = self.series_scale_b(&rhs, &inv_g);
        }
        let check = self.series_sub(&self.series_mul(&u, &z), &one_t0);
        if !self.series_is_zero(&check)? {
            return Err(EdrcError::computation("gysin", "expansion of X0 did not converge"));
        }
        let mut all = vec![z];
        all.extend(bx);
        let all = Arc::new(all);
        self.xi_cache.lock().unwrap().insert(trunc, all.clone());
        Ok(all)
    }

    /// `p(Ξ)` for a polynomial over either `A` (n+1 series) or `k[X1..Xn]` (n series).
    pub fn eval_series(&self, p: &MultiPoly, xs: &[BiSeries]) -> Result<BiSeries> {
        if xs.len() != p.nvars() {
            return Err(EdrcError::DimensionMismatch("one series per variable".into()));
        }
        let trunc = xs.first().map(|x| x.truncation).unwrap_or((0, 0));
        let mut powers: Vec<Vec<BiSeries>> = vec![Vec::new(); xs.len()];
        let mut out = BiSeries::zero(trunc);
        for (m, c) in p.terms() {
            let mut t = BiSeries::constant(self.b_const(c.clone()), trunc);
            for (i, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                if powers[i].is_empty() {
                    powers[i].push(BiSeries::constant(self.b_one(), trunc));
                }
                while powers[i].len() <= e as usize {
                    let next = self.series_mul(powers[i].last().unwrap(), &xs[i]);
                    powers[i].push(next);
                }
                t = self.series_mul(&t, &powers[i][e as usize]);
            }
            out = self.series_add(&out, &t);
        }
        Ok(out)
    }

    pub fn series_add(&self, a: &BiSeries, b: &BiSeries) -> BiSeries {
        let mut out = a.clone();
        for (k, v) in &b.coefficients {
            out.accumulate(*k, v, self);
        }
        out
    }

    pub fn series_sub(&self, a: &BiSeries, b: &BiSeries) -> BiSeries {
        let mut out = a.clone();
        for (k, v) in &b.coefficients {
            out.accumulate(*k, &v.neg(), self);
        }
        out
    }

    pub fn series_scale_b(&self, a: &BiSeries, c: &LocalizedElem) -> BiSeries {
        let mut out = BiSeries::zero(a.truncation);
        for (k, v) in &a.coefficients {
            out.accumulate(*k, &self.b_mul(v, c), self);
        }
        out
    }

    pub fn series_mul(&self, a: &BiSeries, b: &BiSeries) -> BiSeries {
        let trunc = (a.truncation.0.min(b.truncation.0), a.truncation.1.min(b.truncation.1));
        let mut acc: BTreeMap<(u32, u32), LocalizedElem> = BTreeMap::new();
        for (ka, va) in &a.coefficients {
            for (kb, vb) in &b.coefficients {
                let k = (ka.0 + kb.0, ka.1 + kb.1);
                if k.0 > trunc.0 || k.1 > trunc.1 {
                    continue;
                }
                let p = va.mul(vb).expect("same ring");
                match acc.remove(&k) {
                    Some(old) => {
                        acc.insert(k, old.add(&p).expect("same ring"));
                    }
                    None => {
                        acc.insert(k, p);
                    }
                }
            }
        }
        let mut out = BiSeries::zero(trunc);
        for (k, v) in acc {
            let r = self.b_reduce(&v);
            if !r.is_syntactic_zero() {
                out.coefficients.insert(k, r);
            }
        }
        out
    }

    pub fn series_is_zero(&self, a: &BiSeries) -> Result<bool> {
        for v in a.coefficients.values() {
            if !v.is_zero()? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Truncated series `Σ b_{μν} T0^μ T1^ν` over B, `μ ≤ M0`, `ν ≤ M1`.
#[derive(Clone, Debug)]
pub struct BiSeries {
    pub truncation: (u32, u32),
    pub coefficients: BTreeMap<(u32, u32), LocalizedElem>,
}

impl BiSeries {
    pub fn zero(truncation: (u32, u32)) -> Self {
        BiSeries {
            truncation,
            coefficients: BTreeMap::new(),
        }
    }

    pub fn constant(b: LocalizedElem, truncation: (u32, u32)) -> Self {
        BiSeries::monomial(b, (0, 0), truncation)
    }

    pub fn monomial(b: LocalizedElem, at: (u32, u32), truncation: (u32, u32)) -> Self {
        let mut s = BiSeries::zero(truncation);
        if !b.is_syntactic_zero() && at.0 <= truncation.0 && at.1 <= truncation.1 {
            s.coefficients.insert(at, b);
        }
        s
    }

    pub fn get(&self, mu: u32, nu: u32) -> Option<&LocalizedElem> {
        self.coefficients.get(&(mu, nu))
    }

    fn accumulate(&mut self, k: (u32, u32), v: &LocalizedElem, setup: &GysinSetup) {
        if k.0 > self.truncation.0 || k.1 > self.truncation.1 {
            return;
        }
        let s = match self.coefficients.remove(&k) {
            Some(old) => setup.b_add(&old, v),
            None => setup.b_reduce(v),
        };
        if !s.is_syntactic_zero() {
            self.coefficients.insert(k, s);
        }
    }

    pub fn truncate(&self, t: (u32, u32)) -> BiSeries {
        BiSeries {
            truncation: t,
            coefficients: self
                .coefficients
                .iter()
                .filter(|(k, _)| k.0 <= t.0 && k.1 <= t.1)
                .map(|(k, v)| (*k, v.clone()))
                .collect(),
        }
    }
}

// ---------- decomposition and ψ-lift ----------

/// Solve `t = Σ_{μ+ν=N} p_{μν} f0^μ f1^ν` with `deg p ≤ cap`, doubling the cap once.
pub fn i_decompose(
    t: &MultiPoly,
    level: u32,
    setup: &GysinSetup,
    degree_cap: Option<u32>,
) -> Result<BTreeMap<(u32, u32), MultiPoly>> {
    let base = (2 * setup.d0 as i64 - setup.d1 as i64).max(0) as u32;
    let slack = t.degree().unwrap_or(0).saturating_sub(level * setup.d0.min(setup.d1));
    let cap0 = degree_cap.unwrap_or(base.max(slack));
    let na = setup.avars.len();
    for cap in [cap0, 2 * cap0.max(1)] {
        let monos = Monomial::up_to_degree(na, cap);
        let mut keys: BTreeMap<Monomial, usize> = BTreeMap::new();
        let mut id = |m: &Monomial| {
            let l = keys.len();
            *keys.entry(m.clone()).or_insert(l)
        };
        let mut cols = Vec::new();
        let mut labels = Vec::new();
        for mu in 0..=level {
            let base_p = &setup.f0.pow(mu) * &setup.f1.pow(level - mu);
            for m in &monos {
                let p = base_p.mul_monomial(m, &Scalar::one());
                let mut v: Vec<(usize, Scalar)> = p.terms().iter().map(|(mm, c)| (id(mm), c.clone())).collect();
                v.sort_by_key(|e| e.0);
                cols.push(v);
                labels.push((mu, m.clone()));
            }
        }
        let mut rhs: Vec<(usize, Scalar)> = t.terms().iter().map(|(mm, c)| (id(mm), c.clone())).collect();
        rhs.sort_by_key(|e| e.0);
        if let Some(x) = solve_columns(keys.len(), &cols, &rhs)? {
            let mut out: BTreeMap<(u32, u32), MultiPoly> = BTreeMap::new();
            for mu in 0..=level {
                out.insert((mu, level - mu), MultiPoly::zero(&setup.avars));
            }
            for (j, c) in x {
                let (mu, m) = &labels[j];
                out.get_mut(&(*mu, level - mu)).unwrap().add_term(m.clone(), c);
            }
            return Ok(out);
        }
    }
    Err(EdrcError::computation("i_decompose", "element not in I^N at the degree cap"))
}

fn tpoly_mul(a: &TPoly, b: &TPoly, level: u32) -> TPoly {
    let mut out = TPoly::new();
    for (ka, va) in a {
        for (kb, vb) in b {
            let k = (ka.0 + kb.0, ka.1 + kb.1);
            if k.0 + k.1 > level {
                continue;
            }
            let p = va * vb;
            let e = out.entry(k).or_insert_with(|| MultiPoly::zero(va.vars()));
            *e = &*e + &p;
        }
    }
    out.retain(|_, v| !v.is_zero());
    out
}

fn tpoly_add(a: &mut TPoly, b: &TPoly) {
    for (k, v) in b {
        let e = a.entry(*k).or_insert_with(|| MultiPoly::zero(v.vars()));
        *e = &*e + v;
    }
    a.retain(|_, v| !v.is_zero());
}

/// `p(Y(T))` truncated at total T-degree `level`.
fn compose_tpoly(p: &MultiPoly, ys: &[TPoly], level: u32) -> TPoly {
    let vars = p.vars().clone();
    let mut powers: Vec<Vec<TPoly>> = vec![Vec::new(); ys.len()];
    let mut out = TPoly::new();
    for (m, c) in p.terms() {
        let mut t = TPoly::new();
        t.insert((0, 0), MultiPoly::constant(&vars, c.clone()));
        for (i, &e) in m.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if powers[i].is_empty() {
                let mut one = TPoly::new();
                one.insert((0, 0), MultiPoly::one(&vars));
                powers[i].push(one);
            }
            while powers[i].len() <= e as usize {
                let next = tpoly_mul(powers[i].last().unwrap(), &ys[i], level);
                powers[i].push(next);
            }
            t = tpoly_mul(&t, &powers[i][e as usize], level);
        }
        tpoly_add(&mut out, &t);
    }
    out
}

/// Layers `a^{(i)}_{μν}` (i = 0..n) of the lift `Y_i = X_i + Σ a^{(i)}_{μν} f0^μ f1^ν`.
#[derive(Clone, Debug)]
pub struct PsiLift {
    pub level: u32,
    pub layers: BTreeMap<(u32, u32), Vec<MultiPoly>>,
}

impl PsiLift {
    /// `Y_i(T)` as polynomials in T.
    pub fn y_tpolys(&self, setup: &GysinSetup) -> Vec<TPoly> {
        (0..=setup.n)
            .map(|i| {
                let mut t = TPoly::new();
                t.insert((0, 0), MultiPoly::var(&setup.avars, i));
                for (k, a) in &self.layers {
                    if !a[i].is_zero() {
                        t.insert(*k, a[i].clone());
                    }
                }
                t
            })
            .collect()
    }

    pub fn max_degree(&self) -> i64 {
        self.layers.values().flatten().map(|a| a.deg0()).max().unwrap_or(crate::ring::NEG_INF)
    }
}

/// `f0(Y), f1(Y) ∈ I^N` where N is the lift level.
pub fn verify_lift(lift: &PsiLift, setup: &GysinSetup) -> Result<bool> {
    let ys = lift.y_tpolys(setup);
    for fj in [&setup.f0, &setup.f1] {
        let t = compose_tpoly(fj, &ys, lift.level);
        if !setup.graded_classes(&t, lift.level - 1)?.is_empty() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Smaller-degree representative of `a` modulo I.
fn small_rep(a: &MultiPoly, setup: &GysinSetup) -> MultiPoly {
    let alt = setup.lift(&setup.to_b(a));
    if alt.deg0() < a.deg0() {
        alt
    } else {
        a.clone()
    }
}

pub fn psi_lift_step(lift: &PsiLift, setup: &GysinSetup) -> Result<PsiLift> {
    let nlev = lift.level;
    let ys = lift.y_tpolys(setup);
    let c0 = setup.graded_classes(&compose_tpoly(&setup.f0, &ys, nlev), nlev)?;
    let c1 = setup.graded_classes(&compose_tpoly(&setup.f1, &ys, nlev), nlev)?;
    if c0.keys().chain(c1.keys()).any(|k| k.0 + k.1 < nlev) {
        return Err(EdrcError::computation("psi_lift", "lift property lost below the current level"));
    }
    let x0 = MultiPoly::var(&setup.avars, 0);
    let h = setup.embed_b(&setup.h);
    let df0n = setup.f0.partial_derivative(setup.n);
    let zero = MultiPoly::zero(&setup.avars);
    let mut next = lift.clone();
    for mu in 0..=nlev {
        let key = (mu, nlev - mu);
        let p = c0.get(&key).map(|b| setup.lift(b)).unwrap_or_else(|| zero.clone());
        let q = c1.get(&key).map(|b| setup.lift(b)).unwrap_or_else(|| zero.clone());
        let an = small_rep(&-&(&(&q * &h) * &x0), setup);
        let a0 = small_rep(&-&(&x0 * &(&p + &(&df0n * &an))), setup);
        let mut layer = vec![zero.clone(); setup.n + 1];
        layer[0] = a0;
        layer[setup.n] = an;
        for a in &layer {
            if a.deg0() > setup.gamma {
                return Err(EdrcError::computation(
                    "psi_lift",
                    format!("layer degree {} exceeds 2d0 - d1 + 1 = {}", a.deg0(), setup.gamma),
                ));
            }
        }
        if layer.iter().any(|a| !a.is_zero()) {
            next.layers.insert(key, layer);
        }
    }
    next.level = nlev + 1;
    if !verify_lift(&next, setup)? {
        return Err(EdrcError::computation("psi_lift", "new layer does not lift to the next level"));
    }
    Ok(next)
}

/// Lift valid modulo `I^level`.
pub fn psi_lift(setup: &GysinSetup, level: u32) -> Result<PsiLift> {
    let mut lift = PsiLift {
        level: 1,
        layers: BTreeMap::new(),
    };
    while lift.level < level {
        lift = psi_lift_step(&lift, setup)?;
    }
    Ok(lift)
}

/// Expansion of `Ξ` obtained from the lift tables by `Ξ = X̄ − Σ a(Ξ) T^{μν}` (total degree < level).
pub fn xi_from_lift(lift: &PsiLift, setup: &GysinSetup) -> Result<Vec<BiSeries>> {
    let m = lift.level - 1;
    let trunc = (m, m);
    let consts: Vec<BiSeries> = (0..=setup.n)
        .map(|i| BiSeries::constant(setup.to_b(&MultiPoly::var(&setup.avars, i)), trunc))
        .collect();
    let mut xs = consts.clone();
    for _ in 0..=m {
        let mut next = consts.clone();
        for (k, a) in &lift.layers {
            for i in 0..=setup.n {
                if a[i].is_zero() {
                    continue;
                }
                let v = setup.eval_series(&a[i], &xs)?;
                let shifted = shift(&v, *k);
                next[i] = setup.series_sub(&next[i], &shifted);
            }
        }
        xs = next;
    }
    // keep total degree < level
    Ok(xs
        .into_iter()
        .map(|s| BiSeries {
            truncation: s.truncation,
            coefficients: s.coefficients.into_iter().filter(|(k, _)| k.0 + k.1 <= m).collect(),
        })
        .collect())
}

fn shift(s: &BiSeries, by: (u32, u32)) -> BiSeries {
    let mut out = BiSeries::zero(s.truncation);
    for (k, v) in &s.coefficients {
        let nk = (k.0 + by.0, k.1 + by.1);
        if nk.0 <= s.truncation.0 && nk.1 <= s.truncation.1 {
            out.coefficients.insert(nk, v.clone());
        }
    }
    out
}

/// `ψ̂⁻¹(a) = a(Ξ)`, with the coefficient bound `deg b_{μν} ≤ γ^{μ+ν}·deg a` asserted.
pub fn psihat_inverse(a: &MultiPoly, setup: &GysinSetup, truncation: (u32, u32)) -> Result<BiSeries> {
    let xs = setup.xi(truncation)?;
    let s = setup.eval_series(a, &xs)?;
    let da = a.deg0().max(0);
    for ((mu, nu), b) in &s.coefficients {
        let bound = (setup.gamma.max(1) as i128).pow(mu + nu) * da as i128;
        if setup.b_degree(b) as i128 > bound {
            return Err(EdrcError::computation(
                "psihat_inverse",
                format!("coefficient ({mu},{nu}) has degree {} above {bound}", setup.b_degree(b)),
            ));
        }
    }
    Ok(s)
}

/// `a ≡ Σ ψ(b_{μν}) f0^μ f1^ν mod I^{K+1}` for `K = min(M0, M1)`, with ψ from the lift tables.
pub fn reconstruction_check(a: &MultiPoly, series: &BiSeries, lift: &PsiLift, setup: &GysinSetup) -> Result<bool> {
    let k = series.truncation.0.min(series.truncation.1);
    if lift.level < k + 1 {
        return Err(EdrcError::precondition("lift level too small for the reconstruction check"));
    }
    let ys = lift.y_tpolys(setup);
    let mut t = TPoly::new();
    t.insert((0, 0), a.clone());
    for ((mu, nu), b) in &series.coefficients {
        if mu + nu > k {
            continue;
        }
        let psi_b = compose_tpoly(&setup.lift(b), &ys, k);
        let mut shifted = TPoly::new();
        for (kk, v) in psi_b {
            if kk.0 + kk.1 + mu + nu <= k {
                shifted.insert((kk.0 + mu, kk.1 + nu), -&v);
            }
        }
        tpoly_add(&mut t, &shifted);
    }
    Ok(setup.graded_classes(&t, k)?.is_empty())
}

// ---------- quotient forms, residue and λ ----------

/// `numerator / (f0·f1)^order` in `Ω_{A_{f0 f1}} / (Ω_{A_{f0}} + Ω_{A_{f1}})`.
#[derive(Clone, Debug)]
pub struct QuotientForm {
    pub numerator: PolyForm,
    pub order: u32,
}

impl QuotientForm {
    pub fn degree(&self) -> usize {
        self.numerator.p
    }

    /// `d(α/G^s) = (G dα − s dG∧α)/G^{s+1}`.
    pub fn d(&self, setup: &GysinSetup) -> QuotientForm {
        let gg = &setup.f0 * &setup.f1;
        let s = Scalar::from_integer(BigInt::from(self.order));
        let num = self.numerator.d().mul_poly(&gg).sub(&PolyForm::df(&gg).wedge(&self.numerator).scale(&s));
        QuotientForm {
            numerator: num,
            order: self.order + 1,
        }
    }
}

/// Zero in the quotient: every coefficient lies in `(f0^s, f1^s)`, decided on the expansion.
pub fn quotient_is_zero(w: &QuotientForm, setup: &GysinSetup) -> Result<bool> {
    if w.order == 0 {
        return Ok(true);
    }
    let t = (w.order - 1, w.order - 1);
    let xs = setup.xi(t)?;
    for c in w.numerator.coeffs.values() {
        if !setup.series_is_zero(&setup.eval_series(c, &xs)?)? {
            return Ok(false);
        }
    }
    Ok(true)
}

type ExtForm = BTreeMap<Vec<usize>, LocalizedElem>;

/// Truncated series of forms on `B[[T0,T1]]`; index 0 is dT0, 1 is dT1, `2+j` is dX_{j+1}.
#[derive(Clone, Debug)]
struct FormSeries {
    trunc: (u32, u32),
    terms: BTreeMap<(u32, u32), ExtForm>,
}

impl FormSeries {
    fn from_function(s: &BiSeries) -> Self {
        FormSeries {
            trunc: s.truncation,
            terms: s.coefficients.iter().map(|(k, v)| (*k, BTreeMap::from([(vec![], v.clone())]))).collect(),
        }
    }

    fn add_term(&mut self, k: (u32, u32), idx: Vec<usize>, v: LocalizedElem, setup: &GysinSetup) {
        if k.0 > self.trunc.0 || k.1 > self.trunc.1 || v.is_syntactic_zero() {
            return;
        }
        let e = self.terms.entry(k).or_default();
        let s = match e.remove(&idx) {
            Some(old) => setup.b_add(&old, &v),
            None => setup.b_reduce(&v),
        };
        if !s.is_syntactic_zero() {
            e.insert(idx, s);
        }
    }

    fn wedge(&self, other: &FormSeries, setup: &GysinSetup) -> FormSeries {
        let trunc = (self.trunc.0.min(other.trunc.0), self.trunc.1.min(other.trunc.1));
        let mut out = FormSeries {
            trunc,
            terms: BTreeMap::new(),
        };
        for (ka, fa) in &self.terms {
            for (kb, fb) in &other.terms {
                let k = (ka.0 + kb.0, ka.1 + kb.1);
                if k.0 > trunc.0 || k.1 > trunc.1 {
                    continue;
                }
                for (ia, va) in fa {
                    for (ib, vb) in fb {
                        if let Some((sgn, idx)) = merge_indices(ia, ib) {
                            let p = setup.b_mul(va, vb);
                            out.add_term(k, idx, if sgn > 0 { p } else { p.neg() }, setup);
                        }
                    }
                }
            }
        }
        out
    }

    fn add(&mut self, other: &FormSeries, setup: &GysinSetup) {
        for (k, f) in &other.terms {
            for (i, v) in f {
                self.add_term(*k, i.clone(), v.clone(), setup);
            }
        }
    }
}

/// `dΞ_i` truncated at `trunc` (needs Ξ one step further in each direction).
fn d_series(x: &BiSeries, trunc: (u32, u32), setup: &GysinSetup) -> FormSeries {
    let mut out = FormSeries {
        trunc,
        terms: BTreeMap::new(),
    };
    for (&(mu, nu), b) in &x.coefficients {
        if mu <= trunc.0 && nu <= trunc.1 {
            for (j, c) in setup.b_d(b) {
                out.add_term((mu, nu), vec![2 + j], c, setup);
            }
        }
        if mu >= 1 {
            out.add_term((mu - 1, nu), vec![0], b.scale(&Scalar::from_integer(BigInt::from(mu))), setup);
        }
        if nu >= 1 {
            out.add_term((mu, nu - 1), vec![1], b.scale(&Scalar::from_integer(BigInt::from(nu))), setup);
        }
    }
    out
}

/// Output of [`residue`].
#[derive(Clone, Debug)]
pub struct Residue {
    /// `(p−2)`-form over B.
    pub form: DiffForm,
    /// Largest lift degree among the coefficients.
    pub observed_degree: i64,
    /// `γ^{2s−1}·deg α`.
    pub bound: BigInt,
    pub within_bound: bool,
}

/// Coefficient of `T0^{-1} T1^{-1} dT0∧dT1` in the expansion of `α/(f0 f1)^s`.
pub fn residue(w: &QuotientForm, setup: &GysinSetup) -> Result<Residue> {
    let p = w.degree();
    if p < 2 {
        return Err(EdrcError::precondition("residue needs a form of degree at least 2"));
    }
    let out_p = p - 2;
    if w.order == 0 || w.numerator.is_zero() {
        return Ok(Residue {
            form: DiffForm::zero(&setup.bring, &setup.g, out_p),
            observed_degree: crate::ring::NEG_INF,
            bound: BigInt::from(0),
            within_bound: true,
        });
    }
    let s = w.order;
    if p < setup.avars.len() && !quotient_is_zero(&w.d(setup), setup)? {
        return Err(EdrcError::computation("residue", "form is not closed in the quotient complex"));
    }
    let t = (s - 1, s - 1);
    let xs_full = setup.xi((s, s))?;
    let xs: Vec<BiSeries> = xs_full.iter().map(|x| x.truncate(t)).collect();
    let dxs: Vec<FormSeries> = xs_full.iter().map(|x| d_series(x, t, setup)).collect();
    let mut total = FormSeries {
        trunc: t,
        terms: BTreeMap::new(),
    };
    let mut dcache: BTreeMap<Vec<usize>, FormSeries> = BTreeMap::new();
    for (idx, c) in &w.numerator.coeffs {
        let dx_i = match dcache.get(idx) {
            Some(v) => v.clone(),
            None => {
                let mut acc = FormSeries::from_function(&BiSeries::constant(setup.b_one(), t));
                for &i in idx {
                    acc = acc.wedge(&dxs[i], setup);
                }
                dcache.insert(idx.clone(), acc.clone());
                acc
            }
        };
        let cf = FormSeries::from_function(&setup.eval_series(c, &xs)?);
        total.add(&cf.wedge(&dx_i, setup), setup);
    }
    let mut form = DiffForm::zero(&setup.bring, &setup.g, out_p);
    if let Some(top) = total.terms.get(&t) {
        for (idx, v) in top {
            if idx.len() >= 2 && idx[0] == 0 && idx[1] == 1 {
                form.insert(idx[2..].iter().map(|j| j - 2).collect(), v.clone());
            }
        }
    }
    let form = setup.b_form_reduce(&form);
    if out_p < setup.n - 1 && !setup.b_form_is_zero(&setup.b_form_d(&form))? {
        return Err(EdrcError::computation("residue", "residue is not closed"));
    }
    let observed = form.coefficients.values().map(|c| setup.b_degree(c)).max().unwrap_or(crate::ring::NEG_INF);
    let dalpha = w.numerator.coeff_degree().max(0);
    let g = BigInt::from(setup.gamma.max(1));
    let bound = Pow::pow(g.clone(), 2 * s - 1) * BigInt::from(dalpha);
    let slack = Pow::pow(g, 2 * s - 1) * BigInt::from(dalpha + p as i64);
    Ok(Residue {
        within_bound: BigInt::from(observed) <= slack,
        form,
        observed_degree: observed,
        bound,
    })
}

/// `λ(ω) = df0/f0 ∧ df1/f1 ∧ ω̃`.
pub fn lambda_map(w: &DiffForm, setup: &GysinSetup) -> QuotientForm {
    let lifted = setup.lift_form(w);
    let num = PolyForm::df(&setup.f0).wedge(&PolyForm::df(&setup.f1)).wedge(&lifted);
    QuotientForm {
        numerator: num,
        order: 1,
    }
}

/// Serializable summary of a lift, for reports.
#[derive(Clone, Debug, Serialize)]
pub struct LiftReport {
    pub level: u32,
    pub gamma: i64,
    pub max_layer_degree: i64,
}
