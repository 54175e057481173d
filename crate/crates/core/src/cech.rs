//! Čech complexes of principal-open covers, the explicit cocycle preimage, the
//! Čech–de Rham total complex and the zig-zag collapse to global forms.

use std::collections::BTreeMap;
use std::sync::Mutex;

use num_bigint::BigInt;
use num_traits::{Pow, ToPrimitive};

use crate::certificates::{find_certificate, Certificate};
use crate::error::{EdrcError, Result};
use crate::poly::MultiPoly;
use crate::ring::{index_tuples, sort_sign, AffineRing, DiffForm, FiltrationStamp, PolyForm};

/// Cover of X by `U_i = X \ Z(g_i)`, certified by `Σ h_i g_i ≡ 1`.
#[derive(Debug)]
pub struct Cover {
    pub ring: AffineRing,
    pub divisors: Vec<MultiPoly>,
    pub degree_d: u64,
    pub dim_m: u64,
    pub certificate: Certificate,
    powers: Mutex<BTreeMap<u32, Certificate>>,
}

/// Search cap for certificates of the powers g_i^s (the ascent stops at the first hit).
const POWER_CAP_LIMIT: u32 = 48;

impl Cover {
    pub fn new(ring: &AffineRing, divisors: Vec<MultiPoly>, degree_d: u64, dim_m: u64) -> Result<Self> {
        if divisors.is_empty() || divisors.iter().any(|g| g.is_zero()) {
            return Err(EdrcError::precondition("cover needs nonzero divisors"));
        }
        let cap = cap_u32(&lemma51_n(degree_d, 1, max_degree(&divisors), dim_m));
        let certificate = find_certificate(ring, &divisors, cap)
            .map_err(|_| EdrcError::computation("cover", "divisors have a common zero on X"))?;
        Ok(Cover {
            ring: ring.clone(),
            divisors,
            degree_d,
            dim_m,
            certificate,
            powers: Mutex::new(BTreeMap::new()),
        })
    }

    /// Index of the last open set.
    pub fn t(&self) -> usize {
        self.divisors.len() - 1
    }

    pub fn d1(&self) -> u64 {
        max_degree(&self.divisors)
    }

    /// N = 2D(s·d₁)^m.
    pub fn lemma51_n(&self, s: u32) -> BigInt {
        lemma51_n(self.degree_d, s, self.d1(), self.dim_m)
    }

    /// `g_I = Π_{i∈I} g_i`.
    pub fn divisor(&self, idx: &[usize]) -> MultiPoly {
        idx.iter()
            .fold(self.ring.one(), |acc, &i| &acc * &self.divisors[i])
    }

    /// Cofactors with `Σ h_i g_i^s ≡ 1`.
    pub fn power_certificate(&self, s: u32) -> Result<Certificate> {
        if let Some(c) = self.powers.lock().unwrap().get(&s) {
            return Ok(c.clone());
        }
        let gs: Vec<MultiPoly> = self.divisors.iter().map(|g| g.pow(s)).collect();
        let cap = cap_u32(&self.lemma51_n(s));
        let cert = find_certificate(&self.ring, &gs, cap)?;
        self.powers.lock().unwrap().insert(s, cert.clone());
        Ok(cert)
    }
}

fn max_degree(ps: &[MultiPoly]) -> u64 {
    ps.iter().filter_map(|g| g.degree()).max().unwrap_or(0) as u64
}

fn cap_u32(n: &BigInt) -> u32 {
    n.to_u32().unwrap_or(u32::MAX).min(POWER_CAP_LIMIT)
}

pub fn lemma51_n(big_d: u64, s: u32, d1: u64, m: u64) -> BigInt {
    BigInt::from(2 * big_d) * Pow::pow(BigInt::from(s as u64 * d1), m as u32)
}

/// Family of p-forms indexed by increasing (q+1)-tuples.
#[derive(Clone, Debug)]
pub struct CechCochain {
    pub q: usize,
    pub p: usize,
    pub entries: BTreeMap<Vec<usize>, DiffForm>,
}

impl CechCochain {
    pub fn zero(q: usize, p: usize) -> Self {
        CechCochain {
            q,
            p,
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, idx: Vec<usize>, w: DiffForm) -> Result<()> {
        assert_eq!(idx.len(), self.q + 1);
        assert_eq!(w.degree_p, self.p);
        let merged = match self.entries.remove(&idx) {
            Some(old) => old.add(&w)?,
            None => w,
        };
        if !merged.coefficients.is_empty() {
            self.entries.insert(idx, merged);
        }
        Ok(())
    }

    pub fn add(&self, other: &CechCochain) -> Result<CechCochain> {
        let mut out = self.clone();
        for (k, v) in &other.entries {
            out.insert(k.clone(), v.clone())?;
        }
        Ok(out)
    }

    pub fn neg(&self) -> CechCochain {
        CechCochain {
            q: self.q,
            p: self.p,
            entries: self.entries.iter().map(|(k, v)| (k.clone(), v.neg())).collect(),
        }
    }

    pub fn sub(&self, other: &CechCochain) -> Result<CechCochain> {
        self.add(&other.neg())
    }

    /// Every entry vanishes in `Ω_{A_{g_I}}`.
    pub fn is_zero(&self) -> Result<bool> {
        for w in self.entries.values() {
            if !w.is_zero_mod_relations()? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn max_order(&self) -> u32 {
        self.entries.values().map(|w| w.max_order()).max().unwrap_or(0)
    }

    pub fn stamp(&self) -> FiltrationStamp {
        self.entries
            .values()
            .fold(FiltrationStamp::zero_form(), |acc, w| acc.join(&w.filtration_stamp()))
    }

    /// Exterior derivative entry by entry.
    pub fn d(&self) -> CechCochain {
        let mut out = CechCochain::zero(self.q, self.p + 1);
        for (k, v) in &self.entries {
            let dv = v.exterior_d();
            if !dv.coefficients.is_empty() {
                out.entries.insert(k.clone(), dv);
            }
        }
        out
    }
}

/// `(δc)_{j_0…j_{q+1}} = Σ_ν (−1)^ν c_{…ĵ_ν…}|U_J`.
pub fn cech_d(cover: &Cover, c: &CechCochain) -> Result<CechCochain> {
    let mut out = CechCochain::zero(c.q + 1, c.p);
    for j in index_tuples(cover.divisors.len(), c.q + 2) {
        let mut acc = DiffForm::zero(&cover.ring, &cover.divisor(&j), c.p);
        for nu in 0..j.len() {
            let mut face = j.clone();
            let dropped = face.remove(nu);
            if let Some(w) = c.entries.get(&face) {
                let r = w.restrict(&cover.divisors[dropped]);
                acc = if nu % 2 == 0 { acc.add(&r)? } else { acc.sub(&r)? };
            }
        }
        if !acc.coefficients.is_empty() {
            out.entries.insert(j, acc);
        }
    }
    Ok(out)
}

/// η with δη = w for a closed w at Čech level q ≥ 1, built from `Σ h_i g_i^s ≡ 1`:
/// η_{I'} = g_{I'}^{-s} Σ_i h_i ε α_{sort(i,I')} with α_J the order-s numerator of w_J.
pub fn cocycle_preimage(cover: &Cover, w: &CechCochain, s: u32) -> Result<CechCochain> {
    if w.q == 0 {
        return Err(EdrcError::precondition("cocycle_preimage needs Čech level q >= 1"));
    }
    if !cech_d(cover, w)?.is_zero()? {
        return Err(EdrcError::computation("cocycle_preimage", "input cochain is not closed"));
    }
    let s = s.max(w.max_order());
    let mut eta = CechCochain::zero(w.q - 1, w.p);
    if w.entries.is_empty() {
        return Ok(eta);
    }
    let cert = cover.power_certificate(s)?;
    let n = cover.divisors.len();
    let alphas: BTreeMap<&Vec<usize>, PolyForm> =
        w.entries.iter().map(|(k, v)| (k, v.numerator_at(s))).collect();
    for face in index_tuples(n, w.q) {
        let mut num = PolyForm::zero(cover.ring.vars(), w.p);
        for (i, h) in cert.cofactors.iter().enumerate() {
            if face.contains(&i) || h.is_zero() {
                continue;
            }
            let mut full = vec![i];
            full.extend(&face);
            let eps = sort_sign(&full);
            full.sort();
            if let Some(a) = alphas.get(&full) {
                let t = a.mul_poly(h);
                num = if eps > 0 { num.add(&t) } else { num.sub(&t) };
            }
        }
        if !num.is_zero() {
            eta.entries
                .insert(face.clone(), DiffForm::from_polyform(&cover.ring, &cover.divisor(&face), &num, s));
        }
    }
    // contract: δη = w and stamp(η) ≤ (s, d + N)
    if !cech_d(cover, &eta)?.sub(w)?.is_zero()? {
        return Err(EdrcError::computation("cocycle_preimage", "δη ≠ w"));
    }
    let st = eta.stamp();
    let bound = w.stamp().degree_d as i128 + cover.lemma51_n(s).to_i128().unwrap_or(i128::MAX / 2);
    if st.order_s > s as i64 || st.degree_d as i128 > bound {
        return Err(EdrcError::computation("cocycle_preimage", "stamp bound violated"));
    }
    Ok(eta)
}

/// Cells `q ↦ C^{ℓ−q, q}` of a total cochain of level ℓ.
#[derive(Clone, Debug)]
pub struct TotalCochain {
    pub level: usize,
    pub cells: BTreeMap<usize, CechCochain>,
}

impl TotalCochain {
    pub fn zero(level: usize) -> Self {
        TotalCochain {
            level,
            cells: BTreeMap::new(),
        }
    }

    pub fn single(level: usize, c: CechCochain) -> Self {
        assert_eq!(c.p + c.q, level);
        let mut t = TotalCochain::zero(level);
        t.cells.insert(c.q, c);
        t
    }

    pub fn add(&self, other: &TotalCochain) -> Result<TotalCochain> {
        assert_eq!(self.level, other.level);
        let mut out = self.clone();
        for (q, c) in &other.cells {
            let merged = match out.cells.remove(q) {
                Some(old) => old.add(c)?,
                None => c.clone(),
            };
            out.cells.insert(*q, merged);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &TotalCochain) -> Result<TotalCochain> {
        let neg = TotalCochain {
            level: other.level,
            cells: other.cells.iter().map(|(q, c)| (*q, c.neg())).collect(),
        };
        self.add(&neg)
    }

    pub fn is_zero(&self) -> Result<bool> {
        for c in self.cells.values() {
            if !c.is_zero()? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn stamp(&self) -> FiltrationStamp {
        self.cells
            .values()
            .fold(FiltrationStamp::zero_form(), |acc, c| acc.join(&c.stamp()))
    }
}

/// `d_tot = δ + (−1)^q d` on `C^{p,q}`.
pub fn total_d(cover: &Cover, c: &TotalCochain) -> Result<TotalCochain> {
    let mut out = TotalCochain::zero(c.level + 1);
    for (q, cell) in &c.cells {
        let dc = cell.d();
        let dc = if q % 2 == 0 { dc } else { dc.neg() };
        out = out.add(&TotalCochain::single(c.level + 1, dc))?;
        if *q < cover.t() {
            out = out.add(&TotalCochain::single(c.level + 1, cech_d(cover, cell)?))?;
        }
    }
    Ok(out)
}

/// Restrictions of a global form to every `U_i`, as a level-p total cochain.
pub fn embed_global(cover: &Cover, alpha: &DiffForm) -> Result<TotalCochain> {
    let mut c = CechCochain::zero(0, alpha.degree_p);
    for (i, g) in cover.divisors.iter().enumerate() {
        c.insert(vec![i], alpha.restrict(g))?;
    }
    Ok(TotalCochain::single(alpha.degree_p, c))
}

#[derive(Clone, Debug)]
pub struct ZigZag {
    /// Global closed form on X (divisor 1).
    pub alpha: DiffForm,
    /// `c − embed(α) = d_tot(chain)`.
    pub chain: TotalCochain,
    /// Stamp of the working cochain after each step.
    pub step_stamps: Vec<FiltrationStamp>,
}

/// Clear the Čech rows from the top down, then glue the bottom row with the certificate.
pub fn zigzag_collapse(cover: &Cover, c: &TotalCochain) -> Result<ZigZag> {
    let l = c.level;
    if !total_d(cover, c)?.is_zero()? {
        return Err(EdrcError::computation("zigzag", "input total cochain is not closed"));
    }
    let mut cur = c.clone();
    let mut chain = TotalCochain::zero(l.saturating_sub(1));
    let mut step_stamps = vec![cur.stamp()];
    let qmax = l.min(cover.t());
    for q in (1..=qmax).rev() {
        let Some(cell) = cur.cells.get(&q).cloned() else { continue };
        if cell.entries.is_empty() {
            cur.cells.remove(&q);
            continue;
        }
        let eta = cocycle_preimage(cover, &cell, cell.max_order())?;
        let eta_t = TotalCochain::single(l - 1, eta);
        cur = cur.sub(&total_d(cover, &eta_t)?)?;
        if !cur.cells.get(&q).map(|c| c.is_zero()).transpose()?.unwrap_or(true) {
            return Err(EdrcError::computation("zigzag", "top cell not cleared"));
        }
        cur.cells.remove(&q);
        chain = chain.add(&eta_t)?;
        step_stamps.push(cur.stamp());
    }
    let bottom = cur.cells.get(&0).cloned().unwrap_or_else(|| CechCochain::zero(0, l));
    let s = bottom.max_order();
    let cert = cover.power_certificate(s)?;
    let mut num = PolyForm::zero(cover.ring.vars(), l);
    for (i, h) in cert.cofactors.iter().enumerate() {
        if let Some(w) = bottom.entries.get(&vec![i]) {
            num = num.add(&w.numerator_at(s).mul_poly(h));
        }
    }
    let one = cover.ring.one();
    let alpha = DiffForm::from_polyform(&cover.ring, &one, &num, 0);
    if !alpha.exterior_d().is_zero_mod_relations()? {
        return Err(EdrcError::computation("zigzag", "glued form is not closed"));
    }
    let mut witness = c.sub(&embed_global(cover, &alpha)?)?;
    if l > 0 {
        witness = witness.sub(&total_d(cover, &chain)?)?;
    }
    if !witness.is_zero()? {
        return Err(EdrcError::computation("zigzag", "exactness witness failed"));
    }
    Ok(ZigZag {
        alpha,
        chain,
        step_stamps,
    })
}

/// d + 2D(ℓ+1)(s+ℓ)^m d₁^m.
pub fn thm53_bound(d: i64, big_d: u64, l: u64, s: u64, m: u64, d1: u64) -> BigInt {
    BigInt::from(d)
        + BigInt::from(2 * big_d * (l + 1)) * Pow::pow(BigInt::from(s + l), m as u32) * Pow::pow(BigInt::from(d1), m as u32)
}
