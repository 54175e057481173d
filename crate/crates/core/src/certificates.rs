//! Nullstellensatz certificates by ascending-degree linear systems, and component idempotents.

use num_bigint::BigInt;
use num_traits::{One, Pow};
use serde::Serialize;

use crate::error::{EdrcError, Result};
use crate::linsolve::{solve_columns, RowIndex};
use crate::poly::{Monomial, MultiPoly, Scalar, Vars};
use crate::ring::{AffineRing, Reduction};

/// `1 ≡ Σ h_i g_i` modulo the ring's ideal.
#[derive(Clone, Debug)]
pub struct Certificate {
    pub cofactors: Vec<MultiPoly>,
    pub achieved_degree: u32,
    pub bound_used: u32,
}

impl Certificate {
    /// Exact re-check of the identity by normal form.
    pub fn verify(&self, ring: &AffineRing, g: &[MultiPoly]) -> Result<bool> {
        let mut s = ring.zero();
        for (h, gi) in self.cofactors.iter().zip(g) {
            s = &s + &(h * gi);
        }
        ring.is_zero_mod(&(&s - &ring.one()))
    }
}

/// Degree bound of the effective Nullstellensatz for `t` polynomials of degree ≤ d
/// on an m-dimensional X ⊆ 𝔸ⁿ of degree D.
pub fn ns_bound(big_d: u64, d: u64, t: u64, m: u64, n: u64) -> Result<BigInt> {
    if d < 1 {
        return Err(EdrcError::precondition("ns_bound needs d >= 1"));
    }
    let bd = BigInt::from(big_d);
    let bdeg = BigInt::from(d);
    Ok(if t <= m {
        &bd * Pow::pow(&bdeg, t as u32)
    } else if d >= 3 && m + 1 >= n {
        &bd * Pow::pow(&bdeg, m as u32)
    } else {
        BigInt::from(2) * &bd * Pow::pow(&bdeg, m as u32) - 1
    })
}

/// Cofactors with `deg(h_i g_i) ≤ delta`, if they exist.
pub fn certificate_at(ring: &AffineRing, g: &[MultiPoly], delta: u32) -> Result<Option<Vec<MultiPoly>>> {
    let n = ring.nvars();
    let mut rows: RowIndex<Monomial> = RowIndex::new();
    let mut cols = Vec::new();
    let mut owners: Vec<(usize, Monomial)> = Vec::new();
    for (i, gi) in g.iter().enumerate() {
        let Some(dg) = gi.degree() else { continue };
        if dg > delta {
            continue;
        }
        for m in Monomial::up_to_degree(n, delta - dg) {
            let p = ring.normal_form_at(&gi.mul_monomial(&m, &Scalar::one()), delta)?;
            cols.push(rows.vector(p.terms().iter().map(|(k, c)| (k.clone(), c.clone()))));
            owners.push((i, m));
        }
    }
    let one = ring.normal_form_at(&ring.one(), delta)?;
    let rhs = rows.vector(one.terms().iter().map(|(k, c)| (k.clone(), c.clone())));
    let Some(x) = solve_columns(rows.len(), &cols, &rhs)? else {
        return Ok(None);
    };
    let mut h = vec![ring.zero(); g.len()];
    for (j, c) in x {
        let (i, m) = &owners[j];
        h[*i].add_term(m.clone(), c);
    }
    Ok(Some(h))
}

/// Ascend δ = 0..=cap and return the first (minimal-δ) certificate.
pub fn find_certificate(ring: &AffineRing, g: &[MultiPoly], degree_cap: u32) -> Result<Certificate> {
    if g.iter().any(|p| p.is_zero()) {
        return Err(EdrcError::precondition("certificate inputs must be nonzero"));
    }
    for delta in 0..=degree_cap {
        if let Some(h) = certificate_at(ring, g, delta)? {
            let achieved = h
                .iter()
                .zip(g)
                .filter_map(|(hi, gi)| (hi * gi).degree())
                .max()
                .unwrap_or(0);
            let cert = Certificate {
                cofactors: h,
                achieved_degree: achieved,
                bound_used: degree_cap,
            };
            debug_assert!(cert.verify(ring, g)?);
            return Ok(cert);
        }
    }
    Err(EdrcError::computation(
        "certificate",
        format!("no certificate up to degree {degree_cap} (common zeros, or cap too small)"),
    ))
}

/// Ring of a component given by its generators, with linear-system reduction.
pub fn component_ring(vars: &Vars, gens: &[MultiPoly], cap: u32) -> Result<AffineRing> {
    AffineRing::new(vars, gens.to_vec(), Reduction::LinearSystem { degree_cap: cap })
}

#[derive(Clone, Debug)]
pub struct Component {
    pub generators: Vec<MultiPoly>,
    pub degree: u64,
    pub dim: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdempotentReport {
    pub idempotents: Vec<String>,
    pub degrees: Vec<u32>,
    pub max_degree: u32,
    pub bound: String,
}

#[derive(Clone, Debug)]
pub struct IdempotentSet {
    pub idempotents: Vec<MultiPoly>,
    pub component_generators: Vec<Vec<MultiPoly>>,
}

impl IdempotentSet {
    pub fn max_degree(&self) -> u32 {
        self.idempotents.iter().filter_map(|e| e.degree()).max().unwrap_or(0)
    }

    /// e_i ≡ δ_ik on every component Z_k, which gives all three identities on X = ⊔ Z_k.
    pub fn verify(&self, cap: u32) -> Result<bool> {
        let Some(first) = self.idempotents.first() else {
            return Ok(true);
        };
        let vars = first.vars().clone();
        for (k, gens) in self.component_generators.iter().enumerate() {
            let ring = component_ring(&vars, gens, cap)?;
            let mut total = ring.zero();
            for (i, e) in self.idempotents.iter().enumerate() {
                let sq = &(e * e) - e;
                if !ring.is_zero_mod(&sq)? {
                    return Ok(false);
                }
                for (j, f) in self.idempotents.iter().enumerate() {
                    if i < j && !ring.is_zero_mod(&(e * f))? {
                        return Ok(false);
                    }
                }
                let target = if i == k { ring.one() } else { ring.zero() };
                if !ring.is_zero_mod(&(e - &target))? {
                    return Ok(false);
                }
                total = &total + e;
            }
            if !ring.is_zero_mod(&(&total - &ring.one()))? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn check_components(components: &[Component]) -> Result<Vars> {
    let first = components
        .first()
        .and_then(|c| c.generators.first())
        .ok_or_else(|| EdrcError::precondition("at least one component with generators"))?;
    Ok(first.vars().clone())
}

/// φ_ij from certificates of Z_j's generators over Z_i; e_i = Π_{j≠i} φ_ij.
pub fn idempotents_jelonek(components: &[Component]) -> Result<IdempotentSet> {
    let t = components.len();
    let vars = check_components(components)?;
    if t == 1 {
        return Ok(IdempotentSet {
            idempotents: vec![MultiPoly::one(&vars)],
            component_generators: vec![components[0].generators.clone()],
        });
    }
    let mut e = vec![MultiPoly::one(&vars); t];
    let mut cap_used = 0;
    for i in 0..t {
        for j in 0..t {
            if i == j {
                continue;
            }
            let (zi, zj) = (&components[i], &components[j]);
            let dj = zj.generators.iter().filter_map(|g| g.degree()).max().unwrap_or(1).max(1) as u64;
            let cap = ns_bound(zi.degree, dj, zj.generators.len() as u64, zi.dim, vars.len() as u64)?;
            let cap: u32 = cap.try_into().unwrap_or(u32::MAX).min(64);
            let ring = component_ring(&vars, &zi.generators, cap)?;
            let cert = find_certificate(&ring, &zj.generators, cap).map_err(|_| {
                EdrcError::computation("idempotents", format!("components {i} and {j} likely intersect"))
            })?;
            let mut phi = MultiPoly::zero(&vars);
            for (h, g) in cert.cofactors.iter().zip(&zj.generators) {
                phi = &phi + &(h * g);
            }
            cap_used = cap_used.max(cap);
            e[i] = &e[i] * &phi;
        }
    }
    let set = IdempotentSet {
        idempotents: e,
        component_generators: components.iter().map(|c| c.generators.clone()).collect(),
    };
    if !set.verify(cap_used.max(set.max_degree()))? {
        return Err(EdrcError::computation("idempotents", "idempotent identities failed"));
    }
    Ok(set)
}

/// Split `1 = φ + ψ` with φ ∈ (a), ψ ∈ (b), ascending the common degree up to `cap`.
pub fn split_unity(a: &[MultiPoly], b: &[MultiPoly], cap: u32) -> Result<(MultiPoly, MultiPoly, u32)> {
    let vars = a
        .first()
        .or(b.first())
        .ok_or_else(|| EdrcError::precondition("empty generator lists"))?
        .vars()
        .clone();
    let poly = AffineRing::polynomial(&vars);
    let all: Vec<MultiPoly> = a.iter().chain(b).cloned().collect();
    for delta in 0..=cap {
        if let Some(h) = certificate_at(&poly, &all, delta)? {
            let mut phi = MultiPoly::zero(&vars);
            let mut psi = MultiPoly::zero(&vars);
            for (k, (hk, gk)) in h.iter().zip(&all).enumerate() {
                if k < a.len() {
                    phi = &phi + &(hk * gk);
                } else {
                    psi = &psi + &(hk * gk);
                }
            }
            return Ok((phi, psi, delta));
        }
    }
    Err(EdrcError::computation(
        "idempotents",
        format!("no splitting of unity up to degree {cap}; components likely intersect"),
    ))
}

/// e_i = Π_{j<i} φ_ji · Π_{j>i} ψ_ij with φ_ij + ψ_ij = 1, φ_ij ∈ I(Z_i), ψ_ij ∈ I(Z_j).
pub fn idempotents_kollar(components: &[Component]) -> Result<IdempotentSet> {
    let t = components.len();
    let vars = check_components(components)?;
    let n = vars.len() as u64;
    if t == 1 {
        return Ok(IdempotentSet {
            idempotents: vec![MultiPoly::one(&vars)],
            component_generators: vec![components[0].generators.clone()],
        });
    }
    let mut e = vec![MultiPoly::one(&vars); t];
    for i in 0..t {
        for j in i + 1..t {
            let cap = ((n + 1) * components[i].degree * components[j].degree).min(64) as u32;
            let (phi, psi, _) = split_unity(&components[i].generators, &components[j].generators, cap)?;
            // ψ_ij vanishes on Z_j and is 1 on Z_i; φ_ij the other way round
            e[i] = &e[i] * &psi;
            e[j] = &e[j] * &phi;
        }
    }
    let set = IdempotentSet {
        idempotents: e,
        component_generators: components.iter().map(|c| c.generators.clone()).collect(),
    };
    if !set.verify(set.max_degree())? {
        return Err(EdrcError::computation("idempotents", "idempotent identities failed"));
    }
    Ok(set)
}

/// Product Π_i D_i times (n+1), the ideal-version certificate bound.
pub fn split_bound(n: u64, degrees: &[u64]) -> BigInt {
    degrees.iter().fold(BigInt::from(n + 1), |acc, d| acc * BigInt::from(*d))
}

pub fn unit_bound() -> BigInt {
    BigInt::one()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_poly;
    use crate::poly::vars;

    #[test]
    fn ns_bound_branches() {
        assert_eq!(ns_bound(1, 1, 2, 1, 1).unwrap(), BigInt::from(1));
        assert_eq!(ns_bound(2, 3, 1, 2, 3).unwrap(), BigInt::from(6));
        assert_eq!(ns_bound(1, 3, 3, 2, 3).unwrap(), BigInt::from(9));
        assert!(ns_bound(1, 0, 1, 1, 1).is_err());
    }

    #[test]
    fn partition_of_unity_on_line() {
        let v = vars(&["x"]);
        let r = AffineRing::polynomial(&v);
        let g = vec![parse_poly("x", &v).unwrap(), parse_poly("1 - x", &v).unwrap()];
        let c = find_certificate(&r, &g, 3).unwrap();
        assert_eq!(c.cofactors, vec![MultiPoly::one(&v), MultiPoly::one(&v)]);
        assert_eq!(c.achieved_degree, 1);
        assert!(certificate_at(&r, &g, 0).unwrap().is_none());
    }

    #[test]
    fn hyperbola_certificate() {
        let v = vars(&["x", "y"]);
        let p = |s: &str| parse_poly(s, &v).unwrap();
        let r = AffineRing::new(&v, vec![p("x*y - 1")], Reduction::LinearSystem { degree_cap: 2 }).unwrap();
        let c = find_certificate(&r, &[p("x")], 4).unwrap();
        assert!(c.verify(&r, &[p("x")]).unwrap());
        assert!(r.is_zero_mod(&(&c.cofactors[0] - &p("y"))).unwrap());
    }

    #[test]
    fn common_zero_fails() {
        let v = vars(&["x"]);
        let r = AffineRing::polynomial(&v);
        let g = vec![parse_poly("x", &v).unwrap(), parse_poly("x^2", &v).unwrap()];
        assert!(find_certificate(&r, &g, 6).is_err());
    }

    fn two_points() -> Vec<Component> {
        let v = vars(&["x"]);
        vec![
            Component { generators: vec![parse_poly("x", &v).unwrap()], degree: 1, dim: 0 },
            Component { generators: vec![parse_poly("x - 1", &v).unwrap()], degree: 1, dim: 0 },
        ]
    }

    #[test]
    fn lagrange_idempotents() {
        let v = vars(&["x"]);
        for set in [idempotents_jelonek(&two_points()).unwrap(), idempotents_kollar(&two_points()).unwrap()] {
            assert_eq!(set.idempotents[0], parse_poly("1 - x", &v).unwrap());
            assert_eq!(set.idempotents[1], parse_poly("x", &v).unwrap());
        }
        let single = vec![two_points().remove(0)];
        assert!(idempotents_jelonek(&single).unwrap().idempotents[0].is_one());
        assert!(idempotents_kollar(&single).unwrap().idempotents[0].is_one());
    }
}
