//! Affine coordinate rings, localizations `A_g` with the (order, degree) filtration,
//! and differential forms.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use num_traits::One;
use serde::Serialize;

use crate::error::{EdrcError, Result};
use crate::linsolve::{solve_columns, Echelon, SparseVec};
use crate::poly::{same_vars, Monomial, MultiPoly, Scalar, Vars};

/// How residue classes modulo the ideal are made canonical.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Reduction {
    None,
    MonicInLast { var: usize, gen: usize },
    /// Cofactors of degree at most the cap (raised to cover the input degree).
    LinearSystem { degree_cap: u32 },
}

struct RingInner {
    vars: Vars,
    gens: Vec<MultiPoly>,
    strategy: Reduction,
    macaulay: Mutex<HashMap<u32, Arc<Macaulay>>>,
    form_rel: Mutex<HashMap<(usize, u32), Arc<FormRelations>>>,
}

/// `R/I` for `R = ℚ[vars]`.
#[derive(Clone)]
pub struct AffineRing {
    inner: Arc<RingInner>,
}

impl fmt::Debug for AffineRing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let gens: Vec<String> = self.inner.gens.iter().map(|g| g.to_string()).collect();
        write!(f, "AffineRing({:?} / {:?}, {:?})", self.inner.vars, gens, self.inner.strategy)
    }
}

impl PartialEq for AffineRing {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (same_vars(&self.inner.vars, &other.inner.vars)
                && self.inner.gens == other.inner.gens
                && self.inner.strategy == other.inner.strategy)
    }
}

/// Reduced echelon basis of the ideal slice `{Σ q_i f_i : deg(q_i f_i) ≤ D}`,
/// columns in descending grlex order so pivots are leading monomials.
struct Macaulay {
    index: HashMap<Monomial, usize>,
    monos: Vec<Monomial>,
    ech: Echelon,
}

impl AffineRing {
    pub fn new(vars: &Vars, gens: Vec<MultiPoly>, strategy: Reduction) -> Result<Self> {
        for g in &gens {
            g.check_same(&MultiPoly::zero(vars))?;
            if g.is_zero() {
                return Err(EdrcError::precondition("ideal generators must be nonzero"));
            }
        }
        if let Reduction::MonicInLast { var, gen } = strategy {
            let g = gens
                .get(gen)
                .ok_or_else(|| EdrcError::precondition("monic generator index out of range"))?;
            let d = g.degree_in(var).unwrap_or(0);
            if d == 0 || !g.coefficients_in(var)[d as usize].is_one() {
                return Err(EdrcError::NotMonic(vars[var].clone()));
            }
        }
        Ok(AffineRing {
            inner: Arc::new(RingInner {
                vars: vars.clone(),
                gens,
                strategy,
                macaulay: Mutex::new(HashMap::new()),
                form_rel: Mutex::new(HashMap::new()),
            }),
        })
    }

    pub fn polynomial(vars: &Vars) -> Self {
        AffineRing::new(vars, vec![], Reduction::None).unwrap()
    }

    /// `R/(f)` with `f` monic in `var`.
    pub fn hypersurface(f: &MultiPoly, var: usize) -> Result<Self> {
        AffineRing::new(f.vars(), vec![f.clone()], Reduction::MonicInLast { var, gen: 0 })
    }

    pub fn vars(&self) -> &Vars {
        &self.inner.vars
    }

    pub fn nvars(&self) -> usize {
        self.inner.vars.len()
    }

    pub fn gens(&self) -> &[MultiPoly] {
        &self.inner.gens
    }

    pub fn strategy(&self) -> &Reduction {
        &self.inner.strategy
    }

    pub fn is_polynomial(&self) -> bool {
        self.inner.gens.is_empty()
    }

    pub fn zero(&self) -> MultiPoly {
        MultiPoly::zero(&self.inner.vars)
    }

    pub fn one(&self) -> MultiPoly {
        MultiPoly::one(&self.inner.vars)
    }

    pub fn var(&self, i: usize) -> MultiPoly {
        MultiPoly::var(&self.inner.vars, i)
    }

    /// Canonical representative of the class of `f` (for the degree range the strategy covers).
    pub fn normal_form(&self, f: &MultiPoly) -> Result<MultiPoly> {
        self.normal_form_at(f, 0)
    }

    /// Normal form computed in a degree window of at least `dmin`; a fixed window
    /// makes the map linear across a batch of inputs.
    pub fn normal_form_at(&self, f: &MultiPoly, dmin: u32) -> Result<MultiPoly> {
        f.check_same(&self.zero())?;
        if self.inner.gens.is_empty() || f.is_zero() {
            return Ok(f.clone());
        }
        match &self.inner.strategy {
            Reduction::None => Err(EdrcError::precondition(
                "normal form requested for a ring with reduction strategy none",
            )),
            Reduction::MonicInLast { var, gen } => {
                Ok(f.monic_division(&self.inner.gens[*gen], *var)?.1)
            }
            Reduction::LinearSystem { degree_cap } => {
                let gmax = self.inner.gens.iter().map(|g| g.degree().unwrap()).max().unwrap();
                let dmax = f.degree().unwrap().max(gmax + degree_cap).max(dmin);
                let mac = self.macaulay(dmax);
                Ok(mac.reduce(f))
            }
        }
    }

    pub fn is_zero_mod(&self, f: &MultiPoly) -> Result<bool> {
        Ok(self.normal_form(f)?.is_zero())
    }

    fn macaulay(&self, d: u32) -> Arc<Macaulay> {
        let mut cache = self.inner.macaulay.lock().unwrap();
        if let Some(m) = cache.get(&d) {
            return m.clone();
        }
        let n = self.nvars();
        let mut monos = Monomial::up_to_degree(n, d);
        monos.reverse();
        let index: HashMap<Monomial, usize> = monos.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        let mut ech = Echelon::new();
        for g in &self.inner.gens {
            let dg = g.degree().unwrap();
            if dg > d {
                continue;
            }
            for m in Monomial::up_to_degree(n, d - dg) {
                let v = poly_to_vec(&g.mul_monomial(&m, &Scalar::one()), &index);
                ech.insert(&v);
            }
        }
        let mac = Arc::new(Macaulay { index, monos, ech });
        cache.insert(d, mac.clone());
        mac
    }

    /// Degree slack used when deciding membership in the relation module.
    fn relation_slack(&self) -> u32 {
        let gmax = self.inner.gens.iter().filter_map(|g| g.degree()).max().unwrap_or(0);
        match self.inner.strategy {
            Reduction::LinearSystem { degree_cap } => gmax + degree_cap,
            _ => 2 * gmax,
        }
    }

    /// Reduce a polynomial form modulo `I·Ω^p + dI ∧ Ω^{p-1}` (the Kähler relations of `R/I`).
    /// The result is zero exactly when the form vanishes in `Ω_A` (within the degree window).
    pub fn form_normal_form(&self, w: &PolyForm) -> Result<PolyForm> {
        self.form_normal_form_at(w, 0)
    }

    pub fn form_normal_form_at(&self, w: &PolyForm, dmin: u32) -> Result<PolyForm> {
        if self.inner.gens.is_empty() || w.is_zero() {
            return Ok(w.clone());
        }
        let d = (w.coeff_degree().max(0) as u32).max(self.relation_slack()).max(dmin);
        let rel = self.form_relations(w.p, d);
        Ok(rel.reduce(w))
    }

    fn form_relations(&self, p: usize, d: u32) -> Arc<FormRelations> {
        let mut cache = self.inner.form_rel.lock().unwrap();
        if let Some(r) = cache.get(&(p, d)) {
            return r.clone();
        }
        let n = self.nvars();
        let tuples = index_tuples(n, p);
        let mut keys: Vec<(Monomial, Vec<usize>)> = Vec::new();
        for m in Monomial::up_to_degree(n, d).into_iter().rev() {
            for t in &tuples {
                keys.push((m.clone(), t.clone()));
            }
        }
        let index: HashMap<(Monomial, Vec<usize>), usize> =
            keys.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
        let mut ech = Echelon::new();
        let push = |w: &PolyForm, ech: &mut Echelon| {
            let mut v: SparseVec = Vec::new();
            for (idx, c) in &w.coeffs {
                for (m, a) in c.terms() {
                    v.push((index[&(m.clone(), idx.clone())], a.clone()));
                }
            }
            v.sort_by_key(|e| e.0);
            ech.insert(&v);
        };
        for f in &self.inner.gens {
            let df = PolyForm::df(f);
            let df_deg = df.coeff_degree().max(0) as u32;
            let fd = f.degree().unwrap();
            for t in &tuples {
                if fd <= d {
                    for m in Monomial::up_to_degree(n, d - fd) {
                        push(&PolyForm::basic(self.vars(), t.clone(), f.mul_monomial(&m, &Scalar::one())), &mut ech);
                    }
                }
            }
            if p >= 1 && df_deg <= d {
                for t in index_tuples(n, p - 1) {
                    let base = df.wedge(&PolyForm::basic(self.vars(), t, self.one()));
                    if base.is_zero() {
                        continue;
                    }
                    for m in Monomial::up_to_degree(n, d - df_deg) {
                        push(&base.mul_poly(&MultiPoly::monomial(self.vars(), m, Scalar::one())), &mut ech);
                    }
                }
            }
        }
        let r = Arc::new(FormRelations { index, keys, ech, vars: self.vars().clone(), p });
        cache.insert((p, d), r.clone());
        r
    }

    /// Solve `q·g ≡ f` for `q` of degree at most `cap`; best effort.
    pub fn try_divide(&self, f: &MultiPoly, g: &MultiPoly, cap: u32) -> Result<Option<MultiPoly>> {
        if f.is_zero() {
            return Ok(Some(self.zero()));
        }
        if self.is_polynomial() {
            return Ok(exact_poly_division(f, g));
        }
        let monos = Monomial::up_to_degree(self.nvars(), cap);
        let mut keys: BTreeMap<Monomial, usize> = BTreeMap::new();
        let mut cols = Vec::new();
        let key = |m: &Monomial, keys: &mut BTreeMap<Monomial, usize>| {
            let n = keys.len();
            *keys.entry(m.clone()).or_insert(n)
        };
        let win = cap + g.degree().unwrap_or(0);
        for m in &monos {
            let p = self.normal_form_at(&g.mul_monomial(m, &Scalar::one()), win)?;
            cols.push(p.terms().iter().map(|(mm, c)| (key(mm, &mut keys), c.clone())).collect::<Vec<_>>());
        }
        let nf = self.normal_form_at(f, win)?;
        let mut rhs: SparseVec = nf.terms().iter().map(|(mm, c)| (key(mm, &mut keys), c.clone())).collect();
        rhs.sort_by_key(|e| e.0);
        for c in cols.iter_mut() {
            c.sort_by_key(|e| e.0);
        }
        let sol = solve_columns(keys.len(), &cols, &rhs)?;
        Ok(sol.map(|x| {
            MultiPoly::from_terms(self.vars(), x.into_iter().map(|(j, c)| (monos[j].clone(), c)))
        }))
    }
}

/// Exact division in the polynomial ring, `None` if `g` does not divide `f`.
pub fn exact_poly_division(f: &MultiPoly, g: &MultiPoly) -> Option<MultiPoly> {
    let (gm, gc) = g.leading()?;
    let (gm, gc) = (gm.clone(), gc.clone());
    let mut r = f.clone();
    let mut q = MultiPoly::zero(f.vars());
    while let Some((m, c)) = r.leading() {
        if !gm.divides(m) {
            return None;
        }
        let t = gm.quotient_of(m);
        let c = c / &gc;
        r = &r - &g.mul_monomial(&t, &c);
        q.add_term(t, c);
    }
    Some(q)
}

fn poly_to_vec(p: &MultiPoly, index: &HashMap<Monomial, usize>) -> SparseVec {
    let mut v: SparseVec = p.terms().iter().map(|(m, c)| (index[m], c.clone())).collect();
    v.sort_by_key(|e| e.0);
    v
}

impl Macaulay {
    fn reduce(&self, f: &MultiPoly) -> MultiPoly {
        let v = poly_to_vec(f, &self.index);
        let r = self.ech.reduce_exact(&v);
        MultiPoly::from_terms(f.vars(), r.into_iter().map(|(i, c)| (self.monos[i].clone(), c)))
    }
}

/// Echelon basis of the relation module slice, columns in descending monomial order.
struct FormRelations {
    index: HashMap<(Monomial, Vec<usize>), usize>,
    keys: Vec<(Monomial, Vec<usize>)>,
    ech: Echelon,
    vars: Vars,
    p: usize,
}

impl FormRelations {
    fn reduce(&self, w: &PolyForm) -> PolyForm {
        let mut v: SparseVec = Vec::new();
        for (idx, c) in &w.coeffs {
            for (m, a) in c.terms() {
                v.push((self.index[&(m.clone(), idx.clone())], a.clone()));
            }
        }
        v.sort_by_key(|e| e.0);
        let r = self.ech.reduce_exact(&v);
        let mut out = PolyForm::zero(&self.vars, self.p);
        for (i, c) in r {
            let (m, idx) = &self.keys[i];
            out.add_term(idx.clone(), MultiPoly::monomial(&self.vars, m.clone(), c));
        }
        out
    }
}

// ---------------- filtration stamps ----------------

/// Stand-in for the degree −∞ of zero.
pub const NEG_INF: i64 = i64::MIN / 4;

/// `(order, degree)` of a representative; compared componentwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct FiltrationStamp {
    pub order_s: i64,
    pub degree_d: i64,
}

impl FiltrationStamp {
    pub fn new(order_s: i64, degree_d: i64) -> Self {
        FiltrationStamp { order_s, degree_d }
    }

    pub fn zero_form() -> Self {
        FiltrationStamp::new(0, NEG_INF)
    }

    pub fn le(&self, other: &FiltrationStamp) -> bool {
        self.order_s <= other.order_s && self.degree_d <= other.degree_d
    }

    pub fn add(&self, other: &FiltrationStamp) -> FiltrationStamp {
        let d = if self.degree_d <= NEG_INF || other.degree_d <= NEG_INF {
            NEG_INF
        } else {
            self.degree_d + other.degree_d
        };
        FiltrationStamp::new(self.order_s + other.order_s, d)
    }

    pub fn join(&self, other: &FiltrationStamp) -> FiltrationStamp {
        FiltrationStamp::new(self.order_s.max(other.order_s), self.degree_d.max(other.degree_d))
    }
}

// ---------------- localized elements ----------------

/// `numerator / divisor^order` in `A_g`.
#[derive(Clone, Debug)]
pub struct LocalizedElem {
    pub ring: AffineRing,
    pub divisor: MultiPoly,
    pub numerator: MultiPoly,
    pub order: u32,
}

impl LocalizedElem {
    pub fn new(ring: &AffineRing, divisor: &MultiPoly, numerator: MultiPoly, order: u32) -> Self {
        LocalizedElem {
            ring: ring.clone(),
            divisor: divisor.clone(),
            numerator,
            order,
        }
    }

    pub fn from_poly(ring: &AffineRing, divisor: &MultiPoly, f: MultiPoly) -> Self {
        LocalizedElem::new(ring, divisor, f, 0)
    }

    pub fn zero(ring: &AffineRing, divisor: &MultiPoly) -> Self {
        LocalizedElem::new(ring, divisor, ring.zero(), 0)
    }

    pub fn one(ring: &AffineRing, divisor: &MultiPoly) -> Self {
        LocalizedElem::new(ring, divisor, ring.one(), 0)
    }

    fn check(&self, other: &LocalizedElem) -> Result<()> {
        if self.ring != other.ring || self.divisor != other.divisor {
            return Err(EdrcError::precondition("localized elements over different rings or divisors"));
        }
        Ok(())
    }

    /// Numerator at a larger order `s ≥ self.order`.
    pub fn numerator_at(&self, s: u32) -> MultiPoly {
        assert!(s >= self.order);
        if s == self.order {
            self.numerator.clone()
        } else {
            &self.numerator * &self.divisor.pow(s - self.order)
        }
    }

    pub fn lift_to(&self, s: u32) -> LocalizedElem {
        LocalizedElem::new(&self.ring, &self.divisor, self.numerator_at(s), s)
    }

    pub fn is_syntactic_zero(&self) -> bool {
        self.numerator.is_zero()
    }

    pub fn is_zero(&self) -> Result<bool> {
        self.ring.is_zero_mod(&self.numerator)
    }

    pub fn add(&self, other: &LocalizedElem) -> Result<LocalizedElem> {
        self.check(other)?;
        let s = self.order.max(other.order);
        Ok(LocalizedElem::new(
            &self.ring,
            &self.divisor,
            &self.numerator_at(s) + &other.numerator_at(s),
            s,
        ))
    }

    pub fn sub(&self, other: &LocalizedElem) -> Result<LocalizedElem> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> LocalizedElem {
        LocalizedElem::new(&self.ring, &self.divisor, -&self.numerator, self.order)
    }

    pub fn mul(&self, other: &LocalizedElem) -> Result<LocalizedElem> {
        self.check(other)?;
        Ok(LocalizedElem::new(
            &self.ring,
            &self.divisor,
            &self.numerator * &other.numerator,
            self.order + other.order,
        ))
    }

    pub fn mul_poly(&self, f: &MultiPoly) -> LocalizedElem {
        LocalizedElem::new(&self.ring, &self.divisor, &self.numerator * f, self.order)
    }

    pub fn scale(&self, c: &Scalar) -> LocalizedElem {
        LocalizedElem::new(&self.ring, &self.divisor, self.numerator.scale(c), self.order)
    }

    pub fn pow(&self, e: u32) -> LocalizedElem {
        LocalizedElem::new(&self.ring, &self.divisor, self.numerator.pow(e), self.order * e)
    }

    /// Numerator to normal form, then try to cancel divisor factors.
    pub fn normalize(&self) -> Result<LocalizedElem> {
        let mut num = self.ring.normal_form(&self.numerator)?;
        let mut s = self.order;
        if num.is_zero() {
            return Ok(LocalizedElem::zero(&self.ring, &self.divisor));
        }
        while s > 0 {
            let cap = num.degree().unwrap_or(0);
            match self.ring.try_divide(&num, &self.divisor, cap)? {
                Some(q) => {
                    num = self.ring.normal_form(&q)?;
                    s -= 1;
                }
                None => break,
            }
        }
        Ok(LocalizedElem::new(&self.ring, &self.divisor, num, s))
    }

    /// deg numerator − order·deg divisor.
    pub fn degree(&self) -> i64 {
        match self.numerator.degree() {
            None => NEG_INF,
            Some(d) => d as i64 - self.order as i64 * self.divisor.deg0(),
        }
    }

    pub fn stamp(&self) -> FiltrationStamp {
        FiltrationStamp::new(self.order as i64, self.degree())
    }

    /// Same element over divisor `g·extra`, order unchanged.
    pub fn restrict(&self, extra: &MultiPoly) -> LocalizedElem {
        LocalizedElem::new(
            &self.ring,
            &(&self.divisor * extra),
            &self.numerator * &extra.pow(self.order),
            self.order,
        )
    }

    /// Derivative as a list of `(variable, coefficient)` 1-form components.
    pub fn differential(&self) -> Vec<(usize, LocalizedElem)> {
        let n = self.ring.nvars();
        let a = &self.numerator;
        let mut out = Vec::new();
        if self.order == 0 {
            for j in 0..n {
                let da = a.partial_derivative(j);
                if !da.is_zero() {
                    out.push((j, LocalizedElem::new(&self.ring, &self.divisor, da, 0)));
                }
            }
            return out;
        }
        let g = &self.divisor;
        let s = Scalar::from_integer((self.order as i64).into());
        for j in 0..n {
            let num = &(g * &a.partial_derivative(j)) - &(a * &g.partial_derivative(j)).scale(&s);
            if !num.is_zero() {
                out.push((j, LocalizedElem::new(&self.ring, &self.divisor, num, self.order + 1)));
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        if self.order == 0 {
            self.numerator.to_string()
        } else if self.order == 1 {
            format!("({})/({})", self.numerator, self.divisor)
        } else {
            format!("({})/({})^{}", self.numerator, self.divisor, self.order)
        }
    }
}

/// `g^{max(s_a,s_b)}`-cross-multiplied difference reduces to zero.
pub fn loc_equal(a: &LocalizedElem, b: &LocalizedElem) -> Result<bool> {
    a.check(b)?;
    let s = a.order.max(b.order);
    let diff = &a.numerator_at(s) - &b.numerator_at(s);
    a.ring.is_zero_mod(&diff)
}

/// Compose `f` with localized values for each variable (all over one ring and divisor).
pub fn substitute(
    f: &MultiPoly,
    assignments: &[Option<LocalizedElem>],
    ring: &AffineRing,
    divisor: &MultiPoly,
) -> Result<LocalizedElem> {
    if assignments.len() != f.nvars() {
        return Err(EdrcError::DimensionMismatch("one assignment slot per variable".into()));
    }
    let mut powers: Vec<Vec<LocalizedElem>> = vec![Vec::new(); f.nvars()];
    let mut acc = LocalizedElem::zero(ring, divisor);
    for (m, c) in f.terms() {
        let mut t = LocalizedElem::new(ring, divisor, MultiPoly::constant(ring.vars(), c.clone()), 0);
        for (i, &e) in m.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            let v = assignments[i]
                .as_ref()
                .ok_or_else(|| EdrcError::precondition(format!("unassigned variable {}", f.vars()[i])))?;
            if powers[i].is_empty() {
                powers[i].push(LocalizedElem::one(ring, divisor));
            }
            while powers[i].len() <= e as usize {
                let next = powers[i].last().unwrap().mul(v)?;
                powers[i].push(next);
            }
            t = t.mul(&powers[i][e as usize])?;
        }
        acc = acc.add(&t)?;
    }
    Ok(acc)
}

// ---------------- index tuple helpers ----------------

/// Merge two increasing tuples; `None` if they overlap, else the sign of the shuffle.
pub fn merge_indices(a: &[usize], b: &[usize]) -> Option<(i32, Vec<usize>)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let mut inversions = 0usize;
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j >= b.len() || (i < a.len() && a[i] < b[j]) {
            out.push(a[i]);
            i += 1;
        } else if i >= a.len() || b[j] < a[i] {
            inversions += a.len() - i;
            out.push(b[j]);
            j += 1;
        } else {
            return None;
        }
    }
    Some((if inversions.is_multiple_of(2) { 1 } else { -1 }, out))
}

/// Sign of the permutation sorting `v` (entries distinct), by inversion count.
pub fn sort_sign(v: &[usize]) -> i32 {
    let mut inv = 0;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            if v[i] > v[j] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 {
        1
    } else {
        -1
    }
}

/// All increasing `p`-tuples from `0..n`.
pub fn index_tuples(n: usize, p: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, p: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == p {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, p, &mut Vec::new(), &mut out);
    out
}

// ---------------- polynomial forms ----------------

/// p-form with polynomial coefficients; used for numerators.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyForm {
    pub vars: Vars,
    pub p: usize,
    pub coeffs: BTreeMap<Vec<usize>, MultiPoly>,
}

impl PolyForm {
    pub fn zero(vars: &Vars, p: usize) -> Self {
        PolyForm {
            vars: vars.clone(),
            p,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn function(f: MultiPoly) -> Self {
        let mut w = PolyForm::zero(f.vars(), 0);
        w.add_term(vec![], f);
        w
    }

    pub fn basic(vars: &Vars, idx: Vec<usize>, f: MultiPoly) -> Self {
        let mut w = PolyForm::zero(vars, idx.len());
        w.add_term(idx, f);
        w
    }

    pub fn add_term(&mut self, idx: Vec<usize>, f: MultiPoly) {
        debug_assert_eq!(idx.len(), self.p);
        if f.is_zero() {
            return;
        }
        let e = self.coeffs.entry(idx.clone()).or_insert_with(|| MultiPoly::zero(&self.vars));
        *e = &*e + &f;
        if e.is_zero() {
            self.coeffs.remove(&idx);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add(&self, other: &PolyForm) -> PolyForm {
        assert_eq!(self.p, other.p);
        let mut out = self.clone();
        for (k, v) in &other.coeffs {
            out.add_term(k.clone(), v.clone());
        }
        out
    }

    pub fn sub(&self, other: &PolyForm) -> PolyForm {
        self.add(&other.scale(&-Scalar::one()))
    }

    pub fn scale(&self, c: &Scalar) -> PolyForm {
        let mut out = PolyForm::zero(&self.vars, self.p);
        for (k, v) in &self.coeffs {
            out.add_term(k.clone(), v.scale(c));
        }
        out
    }

    pub fn mul_poly(&self, f: &MultiPoly) -> PolyForm {
        let mut out = PolyForm::zero(&self.vars, self.p);
        for (k, v) in &self.coeffs {
            out.add_term(k.clone(), v * f);
        }
        out
    }

    pub fn map_coeffs(&self, f: impl Fn(&MultiPoly) -> MultiPoly) -> PolyForm {
        let mut out = PolyForm::zero(&self.vars, self.p);
        for (k, v) in &self.coeffs {
            out.add_term(k.clone(), f(v));
        }
        out
    }

    pub fn wedge(&self, other: &PolyForm) -> PolyForm {
        let mut out = PolyForm::zero(&self.vars, self.p + other.p);
        for (i, a) in &self.coeffs {
            for (j, b) in &other.coeffs {
                if let Some((sgn, idx)) = merge_indices(i, j) {
                    let c = a * b;
                    out.add_term(idx, if sgn > 0 { c } else { -c });
                }
            }
        }
        out
    }

    /// Exterior derivative of a polynomial form.
    pub fn d(&self) -> PolyForm {
        let n = self.vars.len();
        let mut out = PolyForm::zero(&self.vars, self.p + 1);
        for (idx, a) in &self.coeffs {
            for j in 0..n {
                let da = a.partial_derivative(j);
                if da.is_zero() {
                    continue;
                }
                if let Some((sgn, nidx)) = merge_indices(&[j], idx) {
                    out.add_term(nidx, if sgn > 0 { da } else { -da });
                }
            }
        }
        out
    }

    /// `df` as a 1-form.
    pub fn df(f: &MultiPoly) -> PolyForm {
        PolyForm::function(f.clone()).d()
    }

    /// Max coefficient degree, −∞ sentinel for zero.
    pub fn coeff_degree(&self) -> i64 {
        self.coeffs.values().map(|c| c.deg0()).max().unwrap_or(NEG_INF)
    }

    pub fn embed(&self, target: &Vars, map: &[usize]) -> PolyForm {
        let mut out = PolyForm::zero(target, self.p);
        for (k, v) in &self.coeffs {
            let mut idx: Vec<usize> = k.iter().map(|&i| map[i]).collect();
            let sgn = sort_sign(&idx);
            idx.sort();
            let c = v.embed(target, map);
            out.add_term(idx, if sgn > 0 { c } else { -c });
        }
        out
    }

    pub fn to_text(&self) -> String {
        form_text(self.p, self.coeffs.iter().map(|(k, v)| (k, v.to_string())), &self.vars)
    }
}

pub fn form_text<'a>(p: usize, terms: impl Iterator<Item = (&'a Vec<usize>, String)>, vars: &[String]) -> String {
    let parts: Vec<String> = terms
        .map(|(k, c)| {
            if p == 0 {
                c
            } else {
                let d: Vec<String> = k.iter().map(|&i| format!("d{}", vars[i])).collect();
                format!("({c})*{}", d.join("^"))
            }
        })
        .collect();
    if parts.is_empty() {
        "0".to_string()
    } else {
        parts.join(" + ")
    }
}

// ---------------- differential forms over A_g ----------------

/// p-form over `A_g` with localized coefficients, indexed by increasing tuples.
#[derive(Clone, Debug)]
pub struct DiffForm {
    pub ring: AffineRing,
    pub divisor: MultiPoly,
    pub degree_p: usize,
    pub coefficients: BTreeMap<Vec<usize>, LocalizedElem>,
}

impl DiffForm {
    pub fn zero(ring: &AffineRing, divisor: &MultiPoly, p: usize) -> Self {
        DiffForm {
            ring: ring.clone(),
            divisor: divisor.clone(),
            degree_p: p,
            coefficients: BTreeMap::new(),
        }
    }

    pub fn function(f: LocalizedElem) -> Self {
        let mut w = DiffForm::zero(&f.ring, &f.divisor, 0);
        w.insert(vec![], f);
        w
    }

    /// `coefficient · dx_idx`.
    pub fn basic(idx: Vec<usize>, coeff: LocalizedElem) -> Self {
        let mut w = DiffForm::zero(&coeff.ring, &coeff.divisor, idx.len());
        w.insert(idx, coeff);
        w
    }

    pub fn dx(ring: &AffineRing, divisor: &MultiPoly, i: usize) -> Self {
        DiffForm::basic(vec![i], LocalizedElem::one(ring, divisor))
    }

    /// Numerator form over `divisor^order` (polynomial coefficients).
    pub fn from_polyform(ring: &AffineRing, divisor: &MultiPoly, num: &PolyForm, order: u32) -> Self {
        let mut w = DiffForm::zero(ring, divisor, num.p);
        for (k, v) in &num.coeffs {
            w.insert(k.clone(), LocalizedElem::new(ring, divisor, v.clone(), order));
        }
        w
    }

    /// Accumulate a coefficient; syntactic zeros are dropped.
    pub fn insert(&mut self, idx: Vec<usize>, c: LocalizedElem) {
        assert_eq!(idx.len(), self.degree_p);
        if c.is_syntactic_zero() {
            return;
        }
        let merged = match self.coefficients.remove(&idx) {
            Some(old) => old.add(&c).expect("consistent divisor"),
            None => c,
        };
        if !merged.is_syntactic_zero() {
            self.coefficients.insert(idx, merged);
        }
    }

    fn check(&self, other: &DiffForm) -> Result<()> {
        if self.ring != other.ring || self.divisor != other.divisor {
            return Err(EdrcError::precondition("forms over different rings or divisors"));
        }
        Ok(())
    }

    pub fn max_order(&self) -> u32 {
        self.coefficients.values().map(|c| c.order).max().unwrap_or(0)
    }

    /// All coefficients brought to a common order `s`, as a polynomial numerator form.
    pub fn numerator_at(&self, s: u32) -> PolyForm {
        let mut out = PolyForm::zero(self.ring.vars(), self.degree_p);
        for (k, c) in &self.coefficients {
            out.add_term(k.clone(), c.numerator_at(s));
        }
        out
    }

    pub fn add(&self, other: &DiffForm) -> Result<DiffForm> {
        self.check(other)?;
        if self.degree_p != other.degree_p {
            return Err(EdrcError::precondition("adding forms of different degrees"));
        }
        let mut out = self.clone();
        for (k, c) in &other.coefficients {
            out.insert(k.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &DiffForm) -> Result<DiffForm> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> DiffForm {
        self.scale(&-Scalar::one())
    }

    pub fn scale(&self, c: &Scalar) -> DiffForm {
        let mut out = DiffForm::zero(&self.ring, &self.divisor, self.degree_p);
        for (k, v) in &self.coefficients {
            out.insert(k.clone(), v.scale(c));
        }
        out
    }

    pub fn mul_function(&self, f: &LocalizedElem) -> Result<DiffForm> {
        let mut out = DiffForm::zero(&self.ring, &self.divisor, self.degree_p);
        for (k, v) in &self.coefficients {
            out.insert(k.clone(), v.mul(f)?);
        }
        Ok(out)
    }

    pub fn wedge(&self, other: &DiffForm) -> Result<DiffForm> {
        self.check(other)?;
        let mut out = DiffForm::zero(&self.ring, &self.divisor, self.degree_p + other.degree_p);
        for (i, a) in &self.coefficients {
            for (j, b) in &other.coefficients {
                if let Some((sgn, idx)) = merge_indices(i, j) {
                    let c = a.mul(b)?;
                    out.insert(idx, if sgn > 0 { c } else { c.neg() });
                }
            }
        }
        Ok(out)
    }

    /// Quotient-rule exterior derivative.
    pub fn exterior_d(&self) -> DiffForm {
        let mut out = DiffForm::zero(&self.ring, &self.divisor, self.degree_p + 1);
        for (idx, c) in &self.coefficients {
            for (j, dc) in c.differential() {
                if let Some((sgn, nidx)) = merge_indices(&[j], idx) {
                    out.insert(nidx, if sgn > 0 { dc } else { dc.neg() });
                }
            }
        }
        out
    }

    pub fn restrict(&self, extra: &MultiPoly) -> DiffForm {
        let div = &self.divisor * extra;
        let mut out = DiffForm::zero(&self.ring, &div, self.degree_p);
        for (k, v) in &self.coefficients {
            out.insert(k.clone(), v.restrict(extra));
        }
        out
    }

    pub fn filtration_stamp(&self) -> FiltrationStamp {
        let mut st = FiltrationStamp::zero_form();
        for c in self.coefficients.values() {
            let s = c.stamp();
            st = st.join(&FiltrationStamp::new(s.order_s, s.degree_d + self.degree_p as i64));
        }
        st
    }

    /// Coefficients to normal form with best-effort order reduction; zeros dropped.
    pub fn normalize(&self) -> Result<DiffForm> {
        let mut out = DiffForm::zero(&self.ring, &self.divisor, self.degree_p);
        for (k, v) in &self.coefficients {
            let n = v.normalize()?;
            out.insert(k.clone(), n);
        }
        Ok(out)
    }

    /// Coefficientwise zero test in `A_g ⊗ Λ^p`.
    pub fn is_zero(&self) -> Result<bool> {
        for c in self.coefficients.values() {
            if !c.is_zero()? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Zero test in `Ω^p_{A_g}`, i.e. modulo the Kähler relations of the ring.
    pub fn is_zero_mod_relations(&self) -> Result<bool> {
        let s = self.max_order();
        Ok(self.ring.form_normal_form(&self.numerator_at(s))?.is_zero())
    }

    pub fn to_text(&self) -> String {
        form_text(
            self.degree_p,
            self.coefficients.iter().map(|(k, v)| (k, v.to_text())),
            self.ring.vars(),
        )
    }
}

/// Coefficientwise `loc_equal`.
pub fn forms_equal(a: &DiffForm, b: &DiffForm) -> Result<bool> {
    a.sub(b)?.is_zero()
}

/// Equality in `Ω_{A_g}` (Kähler relations taken into account).
pub fn forms_equal_mod_relations(a: &DiffForm, b: &DiffForm) -> Result<bool> {
    a.sub(b)?.is_zero_mod_relations()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_poly;
    use crate::poly::{int, vars};

    #[test]
    fn normal_forms() {
        let v = vars(&["x", "y"]);
        let p = |s: &str| parse_poly(s, &v).unwrap();
        let ell = AffineRing::hypersurface(&p("y^2 - x^3 + x"), 1).unwrap();
        assert_eq!(ell.normal_form(&p("y^2")).unwrap(), p("x^3 - x"));
        assert_eq!(ell.normal_form(&p("x*y + 1")).unwrap(), p("x*y + 1"));
        let hyp = AffineRing::new(&v, vec![p("x*y - 1")], Reduction::LinearSystem { degree_cap: 1 }).unwrap();
        assert!(hyp.normal_form(&p("x*(x*y - 1)")).unwrap().is_zero());
        let none = AffineRing::new(&v, vec![p("x")], Reduction::None).unwrap();
        assert!(none.normal_form(&p("y")).is_err());
    }

    #[test]
    fn localized_equality() {
        let v = vars(&["x", "y"]);
        let p = |s: &str| parse_poly(s, &v).unwrap();
        let r = AffineRing::new(&v, vec![p("x*y - 1")], Reduction::LinearSystem { degree_cap: 2 }).unwrap();
        let x = p("x");
        let a = LocalizedElem::new(&r, &x, p("x"), 1);
        assert!(loc_equal(&a, &a).unwrap());
        let y = LocalizedElem::from_poly(&r, &x, p("y"));
        let inv = LocalizedElem::new(&r, &x, p("1"), 1);
        assert!(loc_equal(&y, &inv).unwrap());
        assert!(!loc_equal(&inv, &inv.scale(&int(2))).unwrap());
    }

    #[test]
    fn derivative_examples() {
        let v = vars(&["x", "y"]);
        let p = |s: &str| parse_poly(s, &v).unwrap();
        let r = AffineRing::polynomial(&v);
        let one = r.one();
        let w = DiffForm::basic(vec![1], LocalizedElem::from_poly(&r, &one, p("x")));
        let dw = w.exterior_d();
        assert!(forms_equal(&dw, &DiffForm::basic(vec![0, 1], LocalizedElem::one(&r, &one))).unwrap());
        let x = p("x");
        let inv = DiffForm::function(LocalizedElem::new(&r, &x, one.clone(), 1));
        let d = inv.exterior_d();
        let expect = DiffForm::basic(vec![0], LocalizedElem::new(&r, &x, p("-1"), 2));
        assert!(forms_equal(&d, &expect).unwrap());
    }

    #[test]
    fn wedge_signs() {
        let v = vars(&["x", "y", "z"]);
        let p = |s: &str| parse_poly(s, &v).unwrap();
        let r = AffineRing::polynomial(&v);
        let one = r.one();
        let dx = DiffForm::dx(&r, &one, 0);
        let dy = DiffForm::dx(&r, &one, 1);
        assert!(dx.wedge(&dx).unwrap().coefficients.is_empty());
        assert!(forms_equal(&dx.wedge(&dy).unwrap(), &dy.wedge(&dx).unwrap().neg()).unwrap());
        let a = DiffForm::basic(vec![1], LocalizedElem::from_poly(&r, &one, p("x")));
        let b = DiffForm::basic(vec![0], LocalizedElem::from_poly(&r, &one, p("y")));
        let expect = DiffForm::basic(vec![0, 1], LocalizedElem::from_poly(&r, &one, p("-x*y")));
        assert!(forms_equal(&a.wedge(&b).unwrap(), &expect).unwrap());
    }

    #[test]
    fn restriction_and_stamps() {
        let v = vars(&["x", "y"]);
        let p = |s: &str| parse_poly(s, &v).unwrap();
        let r = AffineRing::polynomial(&v);
        let x = p("x");
        let w = DiffForm::basic(vec![0], LocalizedElem::new(&r, &x, p("x + y"), 2));
        let rw = w.restrict(&p("y"));
        assert_eq!(rw.divisor, p("x*y"));
        assert_eq!(rw.coefficients[&vec![0]].numerator, p("(x + y)*y^2"));
        assert_eq!(rw.max_order(), 2);
        assert_eq!(w.restrict(&r.one()).numerator_at(2), w.numerator_at(2));
        let dxx = DiffForm::basic(vec![0], LocalizedElem::new(&r, &x, r.one(), 1));
        assert_eq!(dxx.filtration_stamp(), FiltrationStamp::new(1, 0));
        assert_eq!(
            DiffForm::function(LocalizedElem::one(&r, &x)).filtration_stamp(),
            FiltrationStamp::new(0, 0)
        );
        let x2dx = DiffForm::basic(vec![0], LocalizedElem::from_poly(&r, &x, p("x^2")));
        assert_eq!(x2dx.filtration_stamp(), FiltrationStamp::new(0, 3));
    }

    #[test]
    fn substitution_orders() {
        let v = vars(&["x", "y"]);
        let p = |s: &str| parse_poly(s, &v).unwrap();
        let r = AffineRing::polynomial(&v);
        let x = p("x");
        let xv = LocalizedElem::from_poly(&r, &x, x.clone());
        let inv = LocalizedElem::new(&r, &x, r.one(), 1);
        let out = substitute(&p("x*y"), &[Some(xv.clone()), Some(inv.clone())], &r, &x).unwrap();
        assert!(out.order <= 1);
        assert!(loc_equal(&out, &LocalizedElem::one(&r, &x)).unwrap());
        assert_eq!(out.normalize().unwrap().order, 0);
        let c = substitute(&p("5"), &[None, None], &r, &x).unwrap();
        assert_eq!((c.order, c.numerator.clone()), (0, p("5")));
        assert!(substitute(&p("y"), &[Some(xv), None], &r, &x).is_err());
    }

    #[test]
    fn merge_signs() {
        assert_eq!(merge_indices(&[1], &[0]), Some((-1, vec![0, 1])));
        assert_eq!(merge_indices(&[0, 2], &[1]), Some((-1, vec![0, 1, 2])));
        assert_eq!(merge_indices(&[0], &[0]), None);
        assert_eq!(sort_sign(&[2, 0, 1]), 1);
        assert_eq!(index_tuples(3, 2).len(), 3);
    }
}
