//! Sparse multivariate polynomials over the rationals.
//!
//! Terms live in a `BTreeMap` keyed by graded-lex monomials, so iteration order
//! is deterministic and printing is canonical.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{EdrcError, Result};

pub type Scalar = BigRational;
pub type Vars = Arc<Vec<String>>;

pub fn int(n: i64) -> Scalar {
    BigRational::from_integer(BigInt::from(n))
}

pub fn frac(p: i64, q: i64) -> Scalar {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

/// Build a shared variable list.
pub fn vars(names: &[&str]) -> Vars {
    Arc::new(names.iter().map(|s| s.to_string()).collect())
}

/// Exponent vector, ordered graded-lex (total degree first, then lex with x1 > x2 > ...).
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn one(n: usize) -> Self {
        Monomial(vec![0; n])
    }

    pub fn var(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        Monomial(e)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn divides(&self, other: &Monomial) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// `other / self`, assuming `self` divides `other`.
    pub fn quotient_of(&self, other: &Monomial) -> Monomial {
        Monomial(other.0.iter().zip(&self.0).map(|(a, b)| a - b).collect())
    }

    /// All monomials in `n` variables of total degree exactly `d`, descending grlex.
    pub fn all_of_degree(n: usize, d: u32) -> Vec<Monomial> {
        fn rec(n: usize, i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Monomial>) {
            if i + 1 == n {
                cur[i] = left;
                out.push(Monomial(cur.clone()));
                return;
            }
            for e in (0..=left).rev() {
                cur[i] = e;
                rec(n, i + 1, left - e, cur, out);
            }
            cur[i] = 0;
        }
        if n == 0 {
            return if d == 0 { vec![Monomial(vec![])] } else { vec![] };
        }
        let mut out = Vec::new();
        rec(n, 0, d, &mut vec![0; n], &mut out);
        out
    }

    /// All monomials of total degree at most `d`, ascending grlex.
    pub fn up_to_degree(n: usize, d: u32) -> Vec<Monomial> {
        let mut out = Vec::new();
        for k in 0..=d {
            let mut layer = Monomial::all_of_degree(n, k);
            layer.reverse();
            out.extend(layer);
        }
        out
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse polynomial; zero coefficients are never stored.
#[derive(Clone, Debug)]
pub struct MultiPoly {
    vars: Vars,
    terms: BTreeMap<Monomial, Scalar>,
}

impl PartialEq for MultiPoly {
    fn eq(&self, other: &Self) -> bool {
        same_vars(&self.vars, &other.vars) && self.terms == other.terms
    }
}

impl Eq for MultiPoly {}

pub fn same_vars(a: &Vars, b: &Vars) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

impl MultiPoly {
    pub fn zero(vars: &Vars) -> Self {
        MultiPoly {
            vars: vars.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(vars: &Vars, c: Scalar) -> Self {
        let mut p = MultiPoly::zero(vars);
        if !c.is_zero() {
            p.terms.insert(Monomial::one(vars.len()), c);
        }
        p
    }

    pub fn one(vars: &Vars) -> Self {
        MultiPoly::constant(vars, Scalar::one())
    }

    pub fn var(vars: &Vars, i: usize) -> Self {
        MultiPoly::monomial(vars, Monomial::var(vars.len(), i), Scalar::one())
    }

    pub fn monomial(vars: &Vars, m: Monomial, c: Scalar) -> Self {
        let mut p = MultiPoly::zero(vars);
        if !c.is_zero() {
            p.terms.insert(m, c);
        }
        p
    }

    pub fn from_terms(vars: &Vars, terms: impl IntoIterator<Item = (Monomial, Scalar)>) -> Self {
        let mut p = MultiPoly::zero(vars);
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn vars(&self) -> &Vars {
        &self.vars
    }

    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, Scalar> {
        &self.terms
    }

    pub fn nterms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|m| m.degree() == 0)
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1 && self.constant_term().is_one()
    }

    pub fn constant_term(&self) -> Scalar {
        self.terms
            .get(&Monomial::one(self.nvars()))
            .cloned()
            .unwrap_or_else(Scalar::zero)
    }

    pub fn coeff(&self, m: &Monomial) -> Scalar {
        self.terms.get(m).cloned().unwrap_or_else(Scalar::zero)
    }

    /// In-place accumulation of one term.
    pub fn add_term(&mut self, m: Monomial, c: Scalar) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    /// Total degree; `None` stands for the −∞ degree of the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().next_back().map(|m| m.degree())
    }

    /// Degree as a signed integer with 0 mapped to 0 (for bound arithmetic on nonzero data).
    pub fn deg0(&self) -> i64 {
        self.degree().map(|d| d as i64).unwrap_or(0)
    }

    pub fn degree_in(&self, var: usize) -> Option<u32> {
        self.terms.keys().map(|m| m.0[var]).max()
    }

    pub fn leading(&self) -> Option<(&Monomial, &Scalar)> {
        self.terms.iter().next_back()
    }

    pub fn check_same(&self, other: &MultiPoly) -> Result<()> {
        if same_vars(&self.vars, &other.vars) {
            Ok(())
        } else {
            Err(EdrcError::AmbientMismatch)
        }
    }

    /// `op` in {add, sub, mul}; errors on ambient mismatch.
    pub fn arith(&self, other: &MultiPoly, op: ArithOp) -> Result<MultiPoly> {
        self.check_same(other)?;
        Ok(match op {
            ArithOp::Add => self + other,
            ArithOp::Sub => self - other,
            ArithOp::Mul => self * other,
        })
    }

    pub fn scale(&self, c: &Scalar) -> MultiPoly {
        if c.is_zero() {
            return MultiPoly::zero(&self.vars);
        }
        MultiPoly {
            vars: self.vars.clone(),
            terms: self.terms.iter().map(|(m, a)| (m.clone(), a * c)).collect(),
        }
    }

    pub fn mul_monomial(&self, m: &Monomial, c: &Scalar) -> MultiPoly {
        if c.is_zero() {
            return MultiPoly::zero(&self.vars);
        }
        MultiPoly {
            vars: self.vars.clone(),
            terms: self.terms.iter().map(|(k, a)| (k.mul(m), a * c)).collect(),
        }
    }

    pub fn pow(&self, e: u32) -> MultiPoly {
        let mut acc = MultiPoly::one(&self.vars);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    pub fn eval(&self, point: &[Scalar]) -> Scalar {
        let mut total = Scalar::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (x, &e) in point.iter().zip(&m.0) {
                if e > 0 {
                    t *= num_traits::pow(x.clone(), e as usize);
                }
            }
            total += t;
        }
        total
    }

    pub fn partial_derivative(&self, var: usize) -> MultiPoly {
        let mut out = MultiPoly::zero(&self.vars);
        for (m, c) in &self.terms {
            let e = m.0[var];
            if e > 0 {
                let mut m2 = m.clone();
                m2.0[var] -= 1;
                out.add_term(m2, c * int(e as i64));
            }
        }
        out
    }

    /// Coefficients as a univariate polynomial in `var`: entry k multiplies var^k.
    pub fn coefficients_in(&self, var: usize) -> Vec<MultiPoly> {
        let deg = self.degree_in(var).unwrap_or(0) as usize;
        let mut out = vec![MultiPoly::zero(&self.vars); deg + 1];
        for (m, c) in &self.terms {
            let e = m.0[var] as usize;
            let mut m2 = m.clone();
            m2.0[var] = 0;
            out[e].add_term(m2, c.clone());
        }
        out
    }

    /// Division by `g`, monic in `var`: `self = q*g + r` with `deg_var r < deg_var g`.
    pub fn monic_division(&self, g: &MultiPoly, var: usize) -> Result<(MultiPoly, MultiPoly)> {
        self.check_same(g)?;
        let dg = g
            .degree_in(var)
            .ok_or_else(|| EdrcError::NotMonic(self.vars[var].clone()))?;
        let lc = &g.coefficients_in(var)[dg as usize];
        if !lc.is_one() {
            return Err(EdrcError::NotMonic(self.vars[var].clone()));
        }
        let mut q = MultiPoly::zero(&self.vars);
        let mut r = self.clone();
        // tail = g - var^dg
        let mut tail = g.clone();
        let mut lead = Monomial::one(self.nvars());
        lead.0[var] = dg;
        tail.add_term(lead, -Scalar::one());
        loop {
            let top = r.terms.keys().filter(|m| m.0[var] >= dg).max().cloned();
            let Some(m) = top else { break };
            let c = r.terms.remove(&m).unwrap();
            let mut shift = m.clone();
            shift.0[var] -= dg;
            q.add_term(shift.clone(), c.clone());
            for (tm, tc) in &tail.terms {
                r.add_term(tm.mul(&shift), -(tc * &c));
            }
        }
        Ok((q, r))
    }

    /// Substitute polynomials (possibly in another ring) for each variable.
    pub fn compose(&self, images: &[MultiPoly], target: &Vars) -> MultiPoly {
        assert_eq!(images.len(), self.nvars());
        let mut powers: Vec<Vec<MultiPoly>> = images.iter().map(|p| vec![MultiPoly::one(target), p.clone()]).collect();
        let mut out = MultiPoly::zero(target);
        for (m, c) in &self.terms {
            let mut t = MultiPoly::constant(target, c.clone());
            for (i, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                while powers[i].len() <= e as usize {
                    let next = powers[i].last().unwrap() * &images[i];
                    powers[i].push(next);
                }
                t = &t * &powers[i][e as usize];
            }
            out = &out + &t;
        }
        out
    }

    /// Same polynomial viewed in a larger ambient list; `map[i]` is the new index of var i.
    pub fn embed(&self, target: &Vars, map: &[usize]) -> MultiPoly {
        let n = target.len();
        MultiPoly {
            vars: target.clone(),
            terms: self
                .terms
                .iter()
                .map(|(m, c)| {
                    let mut e = vec![0; n];
                    for (i, &k) in m.0.iter().enumerate() {
                        e[map[i]] += k;
                    }
                    (Monomial(e), c.clone())
                })
                .collect(),
        }
    }

    /// Polynomial with the same terms over a renamed but equal-length variable list.
    pub fn with_vars(&self, target: &Vars) -> MultiPoly {
        assert_eq!(target.len(), self.nvars());
        MultiPoly {
            vars: target.clone(),
            terms: self.terms.clone(),
        }
    }

    /// Compose with the linear substitution x_i ↦ Σ_j M_ij x_j; errors if M is singular.
    pub fn random_linear_change(&self, matrix: &[Vec<Scalar>]) -> Result<MultiPoly> {
        let n = self.nvars();
        if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
            return Err(EdrcError::DimensionMismatch(format!(
                "matrix must be {n}x{n}"
            )));
        }
        if crate::linsolve::rank_dense(matrix) < n {
            return Err(EdrcError::Singular);
        }
        Ok(self.compose(&linear_images(&self.vars, matrix), &self.vars))
    }

    /// Multiply through by the lcm of denominators and divide by the gcd of numerators.
    pub fn primitive(&self) -> MultiPoly {
        if self.is_zero() {
            return self.clone();
        }
        let mut l = BigInt::one();
        let mut g = BigInt::zero();
        for c in self.terms.values() {
            l = num_integer::Integer::lcm(&l, c.denom());
        }
        for c in self.terms.values() {
            let v = c.numer() * (&l / c.denom());
            g = num_integer::Integer::gcd(&g, &v);
        }
        let mut s = BigRational::new(l, g);
        if self.leading().unwrap().1.is_negative() {
            s = -s;
        }
        self.scale(&s)
    }

    pub fn make_monic(&self) -> MultiPoly {
        match self.leading() {
            Some((_, c)) => self.scale(&(Scalar::one() / c)),
            None => self.clone(),
        }
    }

    /// Largest coefficient height (max bit length of numerator or denominator).
    pub fn height_bits(&self) -> u64 {
        self.terms
            .values()
            .map(|c| c.numer().bits().max(c.denom().bits()))
            .max()
            .unwrap_or(0)
    }
}

pub fn linear_images(vars: &Vars, matrix: &[Vec<Scalar>]) -> Vec<MultiPoly> {
    let n = vars.len();
    (0..n)
        .map(|i| {
            let mut p = MultiPoly::zero(vars);
            for j in 0..n {
                p.add_term(Monomial::var(n, j), matrix[i][j].clone());
            }
            p
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}

impl<'a> Add<&'a MultiPoly> for &'a MultiPoly {
    type Output = MultiPoly;
    fn add(self, rhs: &MultiPoly) -> MultiPoly {
        assert!(same_vars(&self.vars, &rhs.vars), "ambient mismatch");
        let (mut big, small) = if self.terms.len() >= rhs.terms.len() {
            (self.clone(), rhs)
        } else {
            (rhs.clone(), self)
        };
        for (m, c) in &small.terms {
            big.add_term(m.clone(), c.clone());
        }
        big
    }
}

impl<'a> Sub<&'a MultiPoly> for &'a MultiPoly {
    type Output = MultiPoly;
    fn sub(self, rhs: &MultiPoly) -> MultiPoly {
        assert!(same_vars(&self.vars, &rhs.vars), "ambient mismatch");
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl<'a> Mul<&'a MultiPoly> for &'a MultiPoly {
    type Output = MultiPoly;
    fn mul(self, rhs: &MultiPoly) -> MultiPoly {
        assert!(same_vars(&self.vars, &rhs.vars), "ambient mismatch");
        let mut out = MultiPoly::zero(&self.vars);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }
}

impl Neg for &MultiPoly {
    type Output = MultiPoly;
    fn neg(self) -> MultiPoly {
        MultiPoly {
            vars: self.vars.clone(),
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect(),
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $f:ident) => {
        impl $tr<MultiPoly> for MultiPoly {
            type Output = MultiPoly;
            fn $f(self, rhs: MultiPoly) -> MultiPoly {
                (&self).$f(&rhs)
            }
        }
        impl<'a> $tr<&'a MultiPoly> for MultiPoly {
            type Output = MultiPoly;
            fn $f(self, rhs: &MultiPoly) -> MultiPoly {
                (&self).$f(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for MultiPoly {
    type Output = MultiPoly;
    fn neg(self) -> MultiPoly {
        -&self
    }
}

pub fn fmt_scalar(c: &Scalar) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

fn fmt_monomial(m: &Monomial, vars: &[String]) -> String {
    let mut parts = Vec::new();
    for (i, &e) in m.0.iter().enumerate() {
        match e {
            0 => {}
            1 => parts.push(vars[i].clone()),
            _ => parts.push(format!("{}^{}", vars[i], e)),
        }
    }
    parts.join("*")
}

impl fmt::Display for MultiPoly {
    /// Canonical form: descending grlex, explicit `*` and `^`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in self.terms.iter().rev() {
            let neg = c.is_negative();
            let a = c.abs();
            let body = if m.degree() == 0 {
                fmt_scalar(&a)
            } else if a.is_one() {
                fmt_monomial(m, &self.vars)
            } else {
                format!("{}*{}", fmt_scalar(&a), fmt_monomial(m, &self.vars))
            };
            if first {
                if neg {
                    write!(f, "-")?;
                }
                write!(f, "{body}")?;
                first = false;
            } else {
                write!(f, " {} {body}", if neg { "-" } else { "+" })?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_poly;

    fn p(s: &str, v: &Vars) -> MultiPoly {
        parse_poly(s, v).unwrap()
    }

    #[test]
    fn difference_of_squares() {
        let v = vars(&["x"]);
        assert_eq!(p("x+1", &v) * p("x-1", &v), p("x^2-1", &v));
        assert!((p("x^3+2", &v) * MultiPoly::zero(&v)).is_zero());
    }

    #[test]
    fn product_matches_hand_expansion() {
        let v = vars(&["x1", "x2", "x3"]);
        let prod = p("x2*x3 - 1", &v) * p("x1", &v);
        assert_eq!(prod, p("x1*x2*x3 - x1", &v));
        for k in 0..5 {
            let pt = vec![frac(k + 1, 3), frac(2 - k, 5), frac(7, k + 2)];
            let lhs = prod.eval(&pt);
            let rhs = (&pt[1] * &pt[2] - int(1)) * &pt[0];
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn ambient_mismatch_errors() {
        let a = p("x", &vars(&["x"]));
        let b = p("y", &vars(&["y"]));
        assert_eq!(a.arith(&b, ArithOp::Add), Err(EdrcError::AmbientMismatch));
    }

    #[test]
    fn derivatives() {
        let v = vars(&["x", "y"]);
        assert_eq!(p("y^2 - x^3 + x", &v).partial_derivative(1), p("2*y", &v));
        assert!(p("7/3", &v).partial_derivative(0).is_zero());
        let v3 = vars(&["x1", "x2", "x3"]);
        let f = p("x2*x3^2 - 1", &v3);
        let df = f.partial_derivative(2);
        assert_eq!(df, p("2*x2*x3", &v3));
        // symmetric difference quotient is exact for quadratics in x3
        let h = frac(1, 1000);
        let pt = vec![frac(1, 2), frac(3, 7), frac(-5, 4)];
        let mut up = pt.clone();
        up[2] += &h;
        let mut dn = pt.clone();
        dn[2] -= &h;
        assert_eq!((f.eval(&up) - f.eval(&dn)) / (int(2) * &h), df.eval(&pt));
    }

    #[test]
    fn monic_division_examples() {
        let v = vars(&["x", "y"]);
        let g = p("y^2 - x^3 + x", &v);
        let (q, r) = p("y^3", &v).monic_division(&g, 1).unwrap();
        assert_eq!(q, p("y", &v));
        assert_eq!(r, p("y*x^3 - y*x", &v));
        assert_eq!(&(&q * &g) + &r, p("y^3", &v));
        let (q, r) = g.monic_division(&g, 1).unwrap();
        assert!(q.is_one() && r.is_zero());
        let f = p("x^5*y + 3", &v);
        let (q, r) = f.monic_division(&g, 1).unwrap();
        assert!(q.is_zero());
        assert_eq!(r, f);
        assert!(matches!(
            f.monic_division(&p("2*y - x", &v), 1),
            Err(EdrcError::NotMonic(_))
        ));
    }

    #[test]
    fn linear_changes() {
        let v = vars(&["x", "y"]);
        let id = vec![vec![int(1), int(0)], vec![int(0), int(1)]];
        let swap = vec![vec![int(0), int(1)], vec![int(1), int(0)]];
        let shear = vec![vec![int(1), int(1)], vec![int(0), int(1)]];
        let f = p("x^2*y", &v);
        assert_eq!(f.random_linear_change(&id).unwrap(), f);
        assert_eq!(f.random_linear_change(&swap).unwrap(), p("y^2*x", &v));
        assert_eq!(
            p("x^2", &v).random_linear_change(&shear).unwrap(),
            p("x^2 + 2*x*y + y^2", &v)
        );
        let sing = vec![vec![int(1), int(2)], vec![int(2), int(4)]];
        assert_eq!(f.random_linear_change(&sing), Err(EdrcError::Singular));
    }

    #[test]
    fn canonical_printing() {
        let v = vars(&["x", "y"]);
        assert_eq!(p("1 - x + 3/2*x*y^2", &v).to_string(), "3/2*x*y^2 - x + 1");
        assert_eq!(p("-y^2 + x^2", &v).to_string(), "x^2 - y^2");
        assert_eq!(MultiPoly::zero(&v).to_string(), "0");
        assert_eq!(p("x - x", &v).nterms(), 0);
    }

    #[test]
    fn monomial_enumeration() {
        let all = Monomial::up_to_degree(3, 2);
        assert_eq!(all.len(), 10);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }
}
