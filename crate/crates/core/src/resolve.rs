//! Birational projections of an affine variety onto hypersurfaces, patch covers and
//! transport of forms from a patch back to the variety.

use std::sync::Arc;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cech::Cover;
use crate::error::{EdrcError, Result};
use crate::linsolve::{rank_dense, solve_columns, solve_particular, SparseMatrix, SparseVec};
use crate::poly::{int, linear_images, Monomial, MultiPoly, Scalar, Vars};
use crate::ring::{AffineRing, DiffForm, LocalizedElem, Reduction};

/// Chart `Y = M·x` with `X = Z(gens)` mapping birationally onto `Z(f) ⊂ 𝔸^{m+1}`.
#[derive(Clone, Debug)]
pub struct PatchChart {
    pub matrix: Vec<Vec<Scalar>>,
    pub inverse: Vec<Vec<Scalar>>,
    /// `Y1..Y_{m+1}`.
    pub chart_vars: Vars,
    /// Monic in the last chart variable.
    pub f: MultiPoly,
    /// `∂f/∂Y_{m+1}`.
    pub g: MultiPoly,
    /// `g·Y_{m+i} + w_i ≡ 0` on X, for `i = 2..=n−m`.
    pub w: Vec<MultiPoly>,
    /// `Y_j` as polynomials in the original variables.
    pub coords: Vec<MultiPoly>,
    /// `g` pulled back to X.
    pub g_on_x: MultiPoly,
    pub attempts: u32,
}

/// Input variety: generators in `vars`, dimension m, degree bound D.
#[derive(Clone, Debug)]
pub struct VarietyData {
    pub vars: Vars,
    pub generators: Vec<MultiPoly>,
    pub dim: usize,
    pub degree: u32,
}

impl VarietyData {
    pub fn ring(&self) -> Result<AffineRing> {
        let gens: Vec<MultiPoly> = self.generators.iter().filter(|g| !g.is_zero()).cloned().collect();
        if gens.is_empty() {
            return Ok(AffineRing::polynomial(&self.vars));
        }
        AffineRing::new(&self.vars, gens, Reduction::LinearSystem { degree_cap: 2 * self.degree + 2 })
    }
}

/// Upper limit on random retries per chart.
pub const RETRY_CAP: u32 = 24;

fn fresh_chart_vars(m1: usize, taken: &[String]) -> Vars {
    let mut prefix = "Y".to_string();
    while (1..=m1).any(|i| taken.contains(&format!("{prefix}{i}"))) {
        prefix.push('_');
    }
    Arc::new((1..=m1).map(|i| format!("{prefix}{i}")).collect())
}

/// Inverse of a small dense rational matrix.
pub fn invert(m: &[Vec<Scalar>]) -> Result<Vec<Vec<Scalar>>> {
    let n = m.len();
    if rank_dense(m) < n {
        return Err(EdrcError::Singular);
    }
    let sm = SparseMatrix::from_dense(m);
    let mut cols = Vec::new();
    for j in 0..n {
        let mut e = vec![Scalar::zero(); n];
        e[j] = Scalar::one();
        cols.push(solve_particular(&sm, &e)?.ok_or(EdrcError::Singular)?);
    }
    Ok((0..n).map(|i| (0..n).map(|j| cols[j][i].clone()).collect()).collect())
}

/// Sparse vector of a polynomial under a monomial index.
fn poly_vec(p: &MultiPoly, ix: &mut crate::linsolve::RowIndex<Monomial>) -> SparseVec {
    ix.vector(p.terms().iter().map(|(m, c)| (m.clone(), c.clone())))
}

/// `target ≡ Σ c_j cands_j mod (gens)` with ideal cofactors of degree ≤ cap; returns the c_j.
fn solve_mod_ideal(target: &MultiPoly, cands: &[MultiPoly], gens: &[MultiPoly], cap: u32) -> Result<Option<Vec<Scalar>>> {
    let vars = target.vars().clone();
    let n = vars.len();
    let mut ix = crate::linsolve::RowIndex::new();
    let mut cols: Vec<SparseVec> = cands.iter().map(|c| poly_vec(c, &mut ix)).collect();
    for g in gens {
        let gd = g.degree().unwrap_or(0);
        if gd > cap {
            continue;
        }
        for m in Monomial::up_to_degree(n, cap - gd) {
            cols.push(poly_vec(&g.mul_monomial(&m, &Scalar::one()), &mut ix));
        }
    }
    let rhs = poly_vec(target, &mut ix);
    let Some(x) = solve_columns(ix.len(), &cols, &rhs)? else { return Ok(None) };
    let mut out = vec![Scalar::zero(); cands.len()];
    for (j, v) in x {
        if j < cands.len() {
            out[j] = v;
        }
    }
    Ok(Some(out))
}

fn random_matrix(n: usize, bound: i64, rng: &mut ChaCha8Rng) -> Vec<Vec<Scalar>> {
    loop {
        let m: Vec<Vec<Scalar>> = (0..n).map(|_| (0..n).map(|_| int(rng.gen_range(-bound..=bound))).collect()).collect();
        if rank_dense(&m) == n {
            return m;
        }
    }
}

fn identity(n: usize) -> Vec<Vec<Scalar>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { Scalar::one() } else { Scalar::zero() }).collect()).collect()
}

/// Attempt one chart for a fixed coordinate change.
fn chart_for(x: &VarietyData, matrix: Vec<Vec<Scalar>>, attempts: u32) -> Result<Option<PatchChart>> {
    let n = x.vars.len();
    let m1 = x.dim + 1;
    let gens: Vec<MultiPoly> = x.generators.iter().filter(|g| !g.is_zero()).cloned().collect();
    let coords = linear_images(&x.vars, &matrix);
    let inverse = invert(&matrix)?;
    let cv = fresh_chart_vars(m1, &x.vars);
    let last = m1 - 1;
    // minimal monic relation of Y_{m+1} over k[Y_1..Y_m] modulo I(X)
    let mut found = None;
    for e in 1..=x.degree.max(1) {
        let mut labels = Vec::new();
        let mut cands = Vec::new();
        for mono in Monomial::up_to_degree(m1, e) {
            if mono.0[last] >= e {
                continue;
            }
            let img = MultiPoly::monomial(&cv, mono.clone(), Scalar::one()).compose(&coords[..m1], &x.vars);
            labels.push(mono);
            cands.push(img);
        }
        let lead = -&coords[last].pow(e);
        if let Some(c) = solve_mod_ideal(&lead, &cands, &gens, e + x.degree)? {
            let mut f = MultiPoly::monomial(&cv, Monomial({
                let mut v = vec![0; m1];
                v[last] = e;
                v
            }), Scalar::one());
            for (mono, v) in labels.into_iter().zip(c) {
                f.add_term(mono, v);
            }
            found = Some(f);
            break;
        }
    }
    let Some(f) = found else { return Ok(None) };
    let g = f.partial_derivative(last);
    let g_on_x = g.compose(&coords[..m1], &x.vars);
    let ring = x.ring()?;
    if ring.is_zero_mod(&g_on_x)? {
        return Ok(None);
    }
    let df = f.degree().unwrap_or(0);
    let mut w = Vec::new();
    for i in m1..n {
        let cands: Vec<MultiPoly> = Monomial::up_to_degree(m1, df)
            .into_iter()
            .map(|mono| MultiPoly::monomial(&cv, mono, Scalar::one()).compose(&coords[..m1], &x.vars))
            .collect();
        let target = -&(&g_on_x * &coords[i]);
        let Some(c) = solve_mod_ideal(&target, &cands, &gens, df + x.degree)? else { return Ok(None) };
        let mut wi = MultiPoly::zero(&cv);
        for (mono, v) in Monomial::up_to_degree(m1, df).into_iter().zip(c) {
            wi.add_term(mono, v);
        }
        w.push(wi);
    }
    let chart = PatchChart {
        matrix,
        inverse,
        chart_vars: cv,
        f,
        g,
        w,
        coords,
        g_on_x,
        attempts,
    };
    if !chart.consistent(x)? {
        return Ok(None);
    }
    Ok(Some(chart))
}

impl PatchChart {
    pub fn m(&self) -> usize {
        self.chart_vars.len() - 1
    }

    /// `k[Z(f)]` with reduction by monic division in the last chart variable.
    pub fn v_ring(&self) -> Result<AffineRing> {
        AffineRing::hypersurface(&self.f, self.m())
    }

    /// Original coordinates as elements of `k[Z(f)]_g`: `x = M⁻¹(Y_1..Y_{m+1}, −w/g)`.
    pub fn inverse_map(&self) -> Result<Vec<LocalizedElem>> {
        let ring = self.v_ring()?;
        let mut ys: Vec<LocalizedElem> = (0..=self.m())
            .map(|j| LocalizedElem::from_poly(&ring, &self.g, MultiPoly::var(&self.chart_vars, j)))
            .collect();
        for wi in &self.w {
            ys.push(LocalizedElem::new(&ring, &self.g, -wi, 1));
        }
        let mut out = Vec::new();
        for row in &self.inverse {
            let mut acc = LocalizedElem::zero(&ring, &self.g);
            for (c, y) in row.iter().zip(&ys) {
                if !c.is_zero() {
                    acc = acc.add(&y.scale(c))?;
                }
            }
            out.push(acc);
        }
        Ok(out)
    }

    fn substitute(&self, p: &MultiPoly, inv: &[LocalizedElem]) -> Result<LocalizedElem> {
        let ring = self.v_ring()?;
        let a: Vec<Option<LocalizedElem>> = inv.iter().cloned().map(Some).collect();
        crate::ring::substitute(p, &a, &ring, &self.g)
    }

    /// Every generator of X vanishes on the inverse parameterization.
    pub fn consistent(&self, x: &VarietyData) -> Result<bool> {
        let inv = self.inverse_map()?;
        for gen in &x.generators {
            let e = self.substitute(gen, &inv)?;
            if !e.is_zero()? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `H` with `h = H/g^{deg h}` on the patch.
    pub fn push_function(&self, h: &MultiPoly) -> Result<MultiPoly> {
        let inv = self.inverse_map()?;
        let e = self.substitute(h, &inv)?;
        let dh = h.degree().unwrap_or(0);
        Ok(e.numerator_at(dh.max(e.order)))
    }
}

/// Chart avoiding the points `avoid` (g nonzero there), retrying with fresh coordinates.
pub fn birational_projection(x: &VarietyData, avoid: &[Vec<Scalar>], seed: u64) -> Result<PatchChart> {
    let n = x.vars.len();
    if x.dim >= n {
        return Err(EdrcError::precondition("variety dimension must be below the ambient dimension"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bound = 7i64;
    for attempt in 0..RETRY_CAP {
        let matrix = if attempt == 0 && avoid.is_empty() { identity(n) } else { random_matrix(n, bound, &mut rng) };
        if attempt > 0 && attempt % 8 == 0 {
            bound *= 2;
        }
        if let Some(chart) = chart_for(x, matrix, attempt + 1)? {
            let ok = avoid.iter().all(|pt| !chart.g_on_x.eval(pt).is_zero());
            if ok {
                return Ok(chart);
            }
        }
    }
    Err(EdrcError::computation("resolve", "retry cap exhausted while searching for a chart"))
}

/// Charts whose opens cover X, with the certified cover.
#[derive(Debug)]
pub struct PatchCover {
    pub charts: Vec<PatchChart>,
    pub cover: Cover,
    /// Points used to steer later charts.
    pub residual_witnesses: Vec<Vec<Scalar>>,
}

/// Rational points of X ∩ Z(gs) found on random coordinate lines (best effort).
fn residual_points(x: &VarietyData, gs: &[MultiPoly], rng: &mut ChaCha8Rng) -> Vec<Vec<Scalar>> {
    let n = x.vars.len();
    let mut eqs: Vec<MultiPoly> = x.generators.clone();
    eqs.extend(gs.iter().cloned());
    let mut pts: Vec<Vec<Scalar>> = Vec::new();
    for _ in 0..8 {
        // fix all coordinates but one at small integers and solve the last one
        let free = rng.gen_range(0..n);
        let fixed: Vec<Scalar> = (0..n).map(|_| int(rng.gen_range(-3..=3))).collect();
        let tv: Vars = Arc::new(vec!["t".to_string()]);
        let t = MultiPoly::var(&tv, 0);
        let images: Vec<MultiPoly> =
            (0..n).map(|i| if i == free { t.clone() } else { MultiPoly::constant(&tv, fixed[i].clone()) }).collect();
        let unis: Vec<MultiPoly> = eqs.iter().map(|e| e.compose(&images, &tv)).filter(|u| !u.is_zero()).collect();
        for r in rational_roots(&unis) {
            let mut pt = fixed.clone();
            pt[free] = r;
            if eqs.iter().all(|e| e.eval(&pt).is_zero()) && !pts.contains(&pt) {
                pts.push(pt);
            }
        }
    }
    pts
}

/// Common rational roots of univariate polynomials (rational root test on the first one).
fn rational_roots(ps: &[MultiPoly]) -> Vec<Scalar> {
    use num_bigint::BigInt;
    use num_traits::Signed;
    let Some(p) = ps.iter().find(|p| !p.is_constant()) else { return Vec::new() };
    let p = p.primitive();
    let coeffs = p.coefficients_in(0);
    let at = |k: usize| -> BigInt { coeffs.get(k).map(|c| c.constant_term().numer().clone()).unwrap_or_default() };
    let low = (0..coeffs.len()).find(|&k| !at(k).is_zero()).unwrap_or(0);
    let a0 = at(low).abs();
    let an = at(coeffs.len() - 1).abs();
    let divisors = |v: &BigInt| -> Vec<BigInt> {
        let mut out = Vec::new();
        let mut d = BigInt::one();
        while &d * &d <= *v && out.len() < 64 {
            if (v % &d).is_zero() {
                out.push(d.clone());
                out.push(v / &d);
            }
            d += 1;
        }
        out
    };
    let mut cands: Vec<Scalar> = if low > 0 { vec![Scalar::zero()] } else { Vec::new() };
    if a0 < BigInt::from(1_000_000) && an < BigInt::from(1_000_000) {
        for a in divisors(&a0) {
            for b in divisors(&an) {
                for sgn in [1, -1] {
                    let r = Scalar::new(BigInt::from(sgn) * &a, b.clone());
                    if !cands.contains(&r) {
                        cands.push(r);
                    }
                }
            }
        }
    }
    cands.into_iter().filter(|r| ps.iter().all(|q| q.eval(std::slice::from_ref(r)).is_zero())).collect()
}

pub fn patch_cover(x: &VarietyData, seed: u64) -> Result<PatchCover> {
    let ring = x.ring()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut charts: Vec<PatchChart> = Vec::new();
    let mut witnesses: Vec<Vec<Scalar>> = Vec::new();
    let max_charts = x.dim + 1;
    let mut round = 0u64;
    while round < RETRY_CAP as u64 {
        let chart = birational_projection(x, &witnesses, seed.wrapping_add(round))?;
        round += 1;
        if charts.len() == max_charts {
            // the last slot did not close the cover; replace it
            charts.pop();
        }
        charts.push(chart);
        let gs: Vec<MultiPoly> = charts.iter().map(|c| c.g_on_x.clone()).collect();
        match Cover::new(&ring, gs.clone(), x.degree as u64, x.dim as u64) {
            Ok(cover) => {
                return Ok(PatchCover {
                    charts,
                    cover,
                    residual_witnesses: witnesses,
                })
            }
            Err(EdrcError::Computation { .. }) => {
                for p in residual_points(x, &gs, &mut rng) {
                    if !witnesses.contains(&p) {
                        witnesses.push(p);
                    }
                }
            }
            Err(e) => return Err(e),
        }
    }
    Err(EdrcError::computation("resolve", "could not complete the patch cover"))
}

/// Pull a form on `V′ = Z(f) \ Z(gH)` back to `U′ = X \ Z(g h)`, with `H = push(h)`.
pub fn transport_forms(chart: &PatchChart, x_ring: &AffineRing, h: &MultiPoly, forms: &[DiffForm]) -> Result<Vec<DiffForm>> {
    let m1 = chart.chart_vars.len();
    let dh = h.degree().unwrap_or(0);
    let divisor = &chart.g_on_x * h;
    let coords = &chart.coords[..m1];
    let mut out = Vec::new();
    for w in forms {
        let s = w.max_order();
        let s_new = s * (dh + 1);
        let hpow = h.pow(s * dh);
        let mut res = DiffForm::zero(x_ring, &divisor, w.degree_p);
        for (idx, c) in &w.coefficients {
            let num = &c.numerator_at(s).compose(coords, x_ring.vars()) * &hpow;
            let mut term = DiffForm::function(LocalizedElem::new(x_ring, &divisor, num, s_new));
            for &j in idx {
                let dy = crate::ring::PolyForm::df(&coords[j]);
                term = term.wedge(&DiffForm::from_polyform(x_ring, &divisor, &dy, 0))?;
            }
            res = res.add(&term)?;
        }
        out.push(res);
    }
    Ok(out)
}

/// Serializable chart summary.
#[derive(Clone, Debug, Serialize)]
pub struct ChartReport {
    pub matrix: Vec<Vec<String>>,
    pub f: String,
    pub g: String,
    pub w: Vec<String>,
    pub g_on_x: String,
    pub attempts: u32,
}

impl From<&PatchChart> for ChartReport {
    fn from(c: &PatchChart) -> Self {
        ChartReport {
            matrix: c.matrix.iter().map(|r| r.iter().map(crate::poly::fmt_scalar).collect()).collect(),
            f: c.f.to_string(),
            g: c.g.to_string(),
            w: c.w.iter().map(|p| p.to_string()).collect(),
            g_on_x: c.g_on_x.to_string(),
            attempts: c.attempts,
        }
    }
}
