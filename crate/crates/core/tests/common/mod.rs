#![allow(dead_code)]

use edrc::cech::{CechCochain, Cover, TotalCochain};
use edrc::poly::{frac, Monomial, MultiPoly, Vars};
use edrc::ring::{index_tuples, AffineRing, DiffForm, LocalizedElem, PolyForm};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Up to `terms` monomials of degree ≤ `deg`, small rational coefficients.
pub fn poly(r: &mut ChaCha8Rng, v: &Vars, deg: u32, terms: usize) -> MultiPoly {
    let mons = Monomial::up_to_degree(v.len(), deg);
    let mut f = MultiPoly::zero(v);
    for _ in 0..r.gen_range(0..=terms) {
        let m = mons[r.gen_range(0..mons.len())].clone();
        let c = frac(r.gen_range(-5..=5), r.gen_range(1..=3));
        f.add_term(m, c);
    }
    f
}

pub fn nonzero_poly(r: &mut ChaCha8Rng, v: &Vars, deg: u32, terms: usize) -> MultiPoly {
    loop {
        let f = poly(r, v, deg, terms.max(1));
        if !f.is_zero() {
            return f;
        }
    }
}

pub fn polyform(r: &mut ChaCha8Rng, v: &Vars, p: usize, deg: u32) -> PolyForm {
    let mut w = PolyForm::zero(v, p);
    let idx = index_tuples(v.len(), p);
    for _ in 0..r.gen_range(1..=3) {
        if idx.is_empty() {
            break;
        }
        w.add_term(idx[r.gen_range(0..idx.len())].clone(), poly(r, v, deg, 3));
    }
    w
}

/// Random p-form with coefficients of order ≤ `order` over `divisor`.
pub fn diffform(r: &mut ChaCha8Rng, ring: &AffineRing, divisor: &MultiPoly, p: usize, deg: u32, order: u32) -> DiffForm {
    let mut w = DiffForm::zero(ring, divisor, p);
    let idx = index_tuples(ring.nvars(), p);
    for _ in 0..r.gen_range(1..=3) {
        if idx.is_empty() {
            break;
        }
        let s = r.gen_range(0..=order);
        let num = poly(r, ring.vars(), deg, 3);
        w.insert(idx[r.gen_range(0..idx.len())].clone(), LocalizedElem::new(ring, divisor, num, s));
    }
    w
}

pub fn cech(r: &mut ChaCha8Rng, cover: &Cover, q: usize, p: usize, deg: u32, order: u32) -> CechCochain {
    let mut c = CechCochain::zero(q, p);
    for face in index_tuples(cover.divisors.len(), q + 1) {
        if r.gen_bool(0.75) {
            let w = diffform(r, &cover.ring, &cover.divisor(&face), p, deg, order);
            c.insert(face, w).unwrap();
        }
    }
    c
}

pub fn total(r: &mut ChaCha8Rng, cover: &Cover, level: usize, deg: u32, order: u32) -> TotalCochain {
    let mut t = TotalCochain::zero(level);
    let n = cover.ring.nvars();
    for q in 0..=level.min(cover.divisors.len() - 1) {
        let p = level - q;
        if p > n {
            continue;
        }
        let c = cech(r, cover, q, p, deg, order);
        t = t.add(&TotalCochain::single(level, c)).unwrap();
    }
    t
}

/// `(−1)^{pq}`-graded comparison helper.
pub fn sign(p: usize, q: usize) -> i64 {
    if (p * q).is_multiple_of(2) {
        1
    } else {
        -1
    }
}
