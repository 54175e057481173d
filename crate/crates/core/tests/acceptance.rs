//! Acceptance suite: one line per criterion, then a single pass/fail verdict.

mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::One;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use edrc::cech::{cocycle_preimage, CechCochain, Cover};
use edrc::certificates::{find_certificate, idempotents_kollar, ns_bound, Component};
use edrc::engine::{bounds_report, full_pipeline, BoundInputs, PipelineOptions, FORMULAS};
use edrc::gysin::{lambda_map, psi_lift, psihat_inverse, reconstruction_check, residue, GysinSetup};
use edrc::hypercoh::{closed_variety_cohomology, hypersurface_cohomology, in_span_mod_exact};
use edrc::parse::parse_poly;
use edrc::poly::{int, vars, MultiPoly, Vars};
use edrc::resolve::VarietyData;
use edrc::ring::{forms_equal, index_tuples, AffineRing, DiffForm, FiltrationStamp, LocalizedElem, PolyForm};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: std::result::Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn p(v: &Vars, s: &str) -> MultiPoly {
    parse_poly(s, v).unwrap()
}

fn secs(d: Duration) -> String {
    format!("{:.2} s", d.as_secs_f64())
}

fn variety(v: &Vars, gens: &[&str], dim: usize, degree: u32) -> VarietyData {
    VarietyData {
        generators: gens.iter().map(|g| p(v, g)).collect(),
        vars: v.clone(),
        dim,
        degree,
    }
}

// 1. punctured line through both routes
fn punctured_line() -> Outcome {
    let t = Instant::now();
    let v = vars(&["x", "y"]);
    let gens = [p(&v, "x*y - 1")];
    let closed = ok(closed_variety_cohomology(&v, &gens, None))?;
    ensure!(closed.dims == vec![1, 1, 0], "closed route dims {:?}", closed.dims);
    let pipe = ok(full_pipeline(&[variety(&v, &["x*y - 1"], 1, 2)], &PipelineOptions::default()))?;
    ensure!(pipe.cohomology.dims == vec![1, 1], "pipeline dims {:?}", pipe.cohomology.dims);
    // dx/x = y dx on the curve
    let dlog = PolyForm::basic(&v, vec![0], p(&v, "y"));
    for (name, rep) in [
        ("closed", closed.representatives[1][0].numerator_at(0)),
        ("pipeline", pipe.cohomology.representatives[1][0].numerator_at(0)),
    ] {
        ensure!(ok(in_span_mod_exact(&v, &gens, 1, &rep, std::slice::from_ref(&dlog), 4))?, "{name} class is not a multiple of dx/x");
        ensure!(ok(in_span_mod_exact(&v, &gens, 1, &dlog, std::slice::from_ref(&rep), 4))?, "dx/x not in the {name} class");
        ensure!(!ok(in_span_mod_exact(&v, &gens, 1, &rep, &[], 4))?, "{name} representative is exact");
    }
    let el = t.elapsed();
    ensure!(el < Duration::from_secs(5), "took {}", secs(el));
    Ok(format!("dims (1,1) on both routes, H^1 class = dx/x mod exact, {}", secs(el)))
}

// 2. elliptic curve, genus formula 2g + r - 1 = 2
fn elliptic_curve() -> Outcome {
    let t = Instant::now();
    let v = vars(&["x", "y"]);
    let closed = ok(closed_variety_cohomology(&v, &[p(&v, "y^2 - x^3 + x")], None))?;
    ensure!(closed.dims.get(1) == Some(&2), "closed route dims {:?}", closed.dims);
    let pipe = ok(full_pipeline(&[variety(&v, &["y^2 - x^3 + x"], 1, 3)], &PipelineOptions::default()))?;
    ensure!(pipe.cohomology.dims.get(1) == Some(&2), "pipeline dims {:?}", pipe.cohomology.dims);
    let el = t.elapsed();
    ensure!(el < Duration::from_secs(60), "took {}", secs(el));
    Ok(format!("dim H^1 = 2 (closed {:?}, patch route {:?}), {}", closed.dims, pipe.cohomology.dims, secs(el)))
}

fn hypersurface_bound(p: i64, d: i64, dp: i64) -> BigInt {
    let mut b = BigInt::from((p + 2) * (d + dp + 2));
    for _ in 0..(2 * p + 3) {
        b *= 2 * dp - d + 3;
    }
    b
}

// 3. genus-1 curve with 4 punctures: chi = 2 - 2g - 4 = -4
fn hypersurface_minus_divisor() -> Outcome {
    let t = Instant::now();
    let v = vars(&["x", "y"]);
    let s = ok(GysinSetup::new(&p(&v, "y^2 - x^3 + x"), &p(&v, "2*y")))?;
    let r = ok(hypersurface_cohomology(&s, 1, None))?;
    ensure!(r.cohomology.dims == vec![1, 5], "dims {:?}", r.cohomology.dims);
    let (dims0, dims1) = (r.cohomology.dims[0] as i64, r.cohomology.dims[1] as i64);
    ensure!(dims0 - dims1 == -4, "Euler characteristic {}", dims0 - dims1);
    for (k, stamps) in r.cohomology.stamps.iter().enumerate() {
        let b = hypersurface_bound(k as i64, 3, 1);
        for st in stamps {
            ensure!(BigInt::from(st.order_s) <= b && BigInt::from(st.degree_d) <= b, "H^{k} stamp {st:?} above {b}");
        }
    }
    Ok(format!("dims (1,5), stamps within (p+2)(d+d'+2)(2d'-d+3)^(2p+3), {}", secs(t.elapsed())))
}

fn b_form(r: &mut ChaCha8Rng, s: &GysinSetup, allow_dx: bool) -> DiffForm {
    let ring = &s.bring;
    let k = if allow_dx { r.gen_range(0..=1) } else { 0 };
    let mut w = DiffForm::zero(ring, &s.g, k);
    // B is a curve or a point here, so the closed 0-forms are the constants
    let (order, num) = if k == 0 {
        (0, MultiPoly::constant(&s.bvars, edrc::poly::frac(r.gen_range(1..=9), r.gen_range(1..=4))))
    } else {
        (r.gen_range(0..=2), common::nonzero_poly(r, &s.bvars, 3, 3))
    };
    let idx = if k == 0 { vec![] } else { vec![0] };
    w.insert(idx, LocalizedElem::new(ring, &s.g, num, order));
    w
}

// 4. Res(lambda(w)) = w
fn gysin_identity() -> Outcome {
    let mut r = common::rng(4);
    let mut count = 0;
    for (f, g, vs, one_forms) in [("x", "1", vec!["x"], false), ("y", "x", vec!["x", "y"], true)] {
        let v = vars(&vs);
        let s = ok(GysinSetup::new(&p(&v, f), &p(&v, g)))?;
        let mut tested = 0;
        while tested < 25 {
            let w = b_form(&mut r, &s, one_forms);
            if ok(s.b_form_is_zero(&w))? {
                continue;
            }
            let res = ok(residue(&lambda_map(&w, &s), &s))?;
            ensure!(ok(s.b_forms_equal(&res.form, &w))?, "Res(lambda(w)) != w for w = {} on (f={f}, g={g})", w.to_text());
            ensure!(res.within_bound, "residue degree above its bound for {}", w.to_text());
            tested += 1;
        }
        count += tested;
    }
    Ok(format!("{count} random closed forms over (f=x, g=1) and (f=y, g=x), exact equality"))
}

// 5. lift layers and expansion stamps
fn psi_lift_bounds() -> Outcome {
    let mut r = common::rng(5);
    let mut layers = 0;
    let mut coeffs = 0;
    for (f, g, vs) in [("x", "1", vec!["x"]), ("y", "x", vec!["x", "y"])] {
        let v = vars(&vs);
        let s = ok(GysinSetup::new(&p(&v, f), &p(&v, g)))?;
        let gamma = 2 * s.d0 as i64 - s.d1 as i64 + 1;
        let lift = ok(psi_lift(&s, 4))?;
        for a in lift.layers.values().flatten() {
            ensure!(a.is_zero() || a.deg0() <= gamma, "layer degree {} above {gamma}", a.deg0());
            layers += 1;
        }
        for _ in 0..10 {
            let a = common::nonzero_poly(&mut r, &s.avars, 3, 4);
            let series = ok(psihat_inverse(&a, &s, (2, 2)))?;
            ensure!(ok(reconstruction_check(&a, &series, &lift, &s))?, "expansion of {a} does not reconstruct it");
            for ((mu, nu), b) in &series.coefficients {
                let bound = (gamma.max(1) as i128).pow(mu + nu) * a.deg0().max(0) as i128;
                ensure!((s.b_degree(b) as i128) <= bound, "b_({mu},{nu}) of {a} has degree above {bound}");
                coeffs += 1;
            }
        }
    }
    Ok(format!("{layers} lift layers <= 2d0-d1+1, {coeffs} expansion coefficients <= gamma^(mu+nu) deg a"))
}

fn pow(b: u64, e: u64) -> BigInt {
    (0..e).fold(BigInt::one(), |acc, _| acc * b)
}

// 6. Cech preimages on covers of the line and the plane
fn lemma51_contract() -> Outcome {
    let line = vars(&["x"]);
    let plane = vars(&["x", "y"]);
    let covers: Vec<(Vars, Vec<&str>)> = vec![
        (line.clone(), vec!["x", "x - 1"]),
        (line.clone(), vec!["x^2 + 1", "x"]),
        (plane.clone(), vec!["x", "x - 1"]),
        (plane.clone(), vec!["y", "x*y - 1"]),
        (plane.clone(), vec!["x + y", "x + y + 1"]),
    ];
    let mut r = common::rng(6);
    for case in 0..50 {
        let (v, divs) = &covers[case % covers.len()];
        let ring = AffineRing::polynomial(v);
        let gs: Vec<MultiPoly> = divs.iter().map(|d| p(v, d)).collect();
        let m = v.len() as u64;
        let cover = ok(Cover::new(&ring, gs.clone(), 1, m))?;
        let s: u32 = r.gen_range(1..=2);
        let k = r.gen_range(0..=v.len());
        let g01 = &gs[0] * &gs[1];
        let target_d: i64 = r.gen_range(0..=4);
        let num_deg = (target_d + s as i64 * g01.deg0()) as u32;
        let mut w = CechCochain::zero(1, k);
        let mut form = DiffForm::zero(&ring, &g01, k);
        for idx in index_tuples(v.len(), k) {
            let a = common::poly(&mut r, v, num_deg, 3);
            form.insert(idx, LocalizedElem::new(&ring, &g01, a, s));
        }
        ok(w.insert(vec![0, 1], form.clone()))?;
        let eta = ok(cocycle_preimage(&cover, &w, s))?;
        // eta_1 - eta_0 = w_01, checked on numerators over g0^s g1^s
        let w_deg = form.coefficients.values().map(|c| c.degree()).max().unwrap_or(i64::MIN);
        let d1 = gs.iter().map(|g| g.deg0()).max().unwrap() as u64;
        let n_bound = BigInt::from(2u64) * pow(s as u64 * d1, m);
        for idx in index_tuples(v.len(), k) {
            let num_of = |i: usize| -> MultiPoly {
                eta.entries
                    .get(&vec![i])
                    .and_then(|e| e.coefficients.get(&idx))
                    .map(|c| c.numerator_at(s))
                    .unwrap_or_else(|| MultiPoly::zero(v))
            };
            let lhs = &(&num_of(1) * &gs[0].pow(s)) - &(&num_of(0) * &gs[1].pow(s));
            let rhs = form.coefficients.get(&idx).map(|c| c.numerator_at(s)).unwrap_or_else(|| MultiPoly::zero(v));
            ensure!(lhs == rhs, "case {case}: delta(eta) != w at {idx:?}");
        }
        for (i, e) in &eta.entries {
            for c in e.coefficients.values() {
                ensure!(c.order <= s, "case {case}: order {} above {s}", c.order);
                if c.numerator.is_zero() {
                    continue;
                }
                let deg = c.numerator.deg0() - c.order as i64 * gs[i[0]].deg0();
                ensure!(
                    w_deg == i64::MIN || BigInt::from(deg) <= BigInt::from(w_deg) + &n_bound,
                    "case {case}: degree {deg} above {w_deg} + {n_bound}"
                );
            }
        }
    }
    Ok("50 random cochains, delta(eta) = w exactly, stamp <= (s, d + 2D(s d1)^m)".into())
}

// 7. idempotents of Z(x1, x2 x3 - 1) and Z(x1 x3 - x2^2)
fn idempotent_family() -> Outcome {
    let t = Instant::now();
    let v = vars(&["x1", "x2", "x3"]);
    let comps = vec![
        Component { generators: vec![p(&v, "x1"), p(&v, "x2*x3 - 1")], degree: 2, dim: 1 },
        Component { generators: vec![p(&v, "x1*x3 - x2^2")], degree: 2, dim: 2 },
    ];
    let set = ok(idempotents_kollar(&comps))?;
    ensure!(ok(set.verify(set.max_degree() + 4))?, "identities failed");
    // independent spot check at points of each component
    let (e0, e1) = (&set.idempotents[0], &set.idempotents[1]);
    for a in 1..5i64 {
        let z1 = [int(0), int(a), edrc::poly::frac(1, a)];
        let z2 = [int(a), int(a), int(a)];
        let z2b = [int(0), int(0), int(a)];
        for (pt, want) in [(&z1, (1, 0)), (&z2, (0, 1)), (&z2b, (0, 1))] {
            ensure!(e0.eval(pt) == int(want.0) && e1.eval(pt) == int(want.1), "idempotents wrong at {pt:?}");
        }
    }
    let deg = set.max_degree();
    ensure!((4..=16).contains(&deg), "max degree {deg} outside [4, 16]");
    let el = t.elapsed();
    ensure!(el < Duration::from_secs(60), "took {}", secs(el));
    Ok(format!("identities verified, max degree {deg} in [4, 16], {}", secs(el)))
}

fn nullstellensatz_instance(r: &mut ChaCha8Rng, v: &Vars, d: u32, t: usize) -> Vec<MultiPoly> {
    // g_t = c + sum a_i g_i has no common zero with g_1..g_{t-1}
    let mut gs: Vec<MultiPoly> = (0..t - 1)
        .map(|_| {
            let k = r.gen_range(1..=d);
            common::nonzero_poly(r, v, k, 3)
        })
        .collect();
    let mut last = MultiPoly::constant(v, edrc::poly::frac(r.gen_range(1..=4), r.gen_range(1..=3)));
    for g in &gs {
        let room = d - g.degree().unwrap_or(0);
        last = &last + &(&common::poly(r, v, room, 2) * g);
    }
    gs.push(last);
    gs
}

// 8. certificate battery
fn nullstellensatz_battery() -> Outcome {
    let mut r = common::rng(8);
    let names = ["x", "y", "z"];
    let mut worst = 0;
    for case in 0..30 {
        let n = 1 + case % 3;
        let v = vars(&names[..n]);
        let d = 1 + (case / 3) as u32 % 3;
        let t = 1 + r.gen_range(1..=3);
        let gs = nullstellensatz_instance(&mut r, &v, d, t);
        let dmax = gs.iter().filter_map(|g| g.degree()).max().unwrap_or(0).max(1) as u64;
        let bound = ok(ns_bound(1, dmax, t as u64, n as u64, n as u64))?;
        let cap: u32 = u32::try_from(&bound).unwrap_or(u32::MAX).min(40);
        let ring = AffineRing::polynomial(&v);
        let cert = ok(find_certificate(&ring, &gs, cap))?;
        let mut sum = MultiPoly::zero(&v);
        let mut achieved = 0;
        for (h, g) in cert.cofactors.iter().zip(&gs) {
            let hg = h * g;
            achieved = achieved.max(hg.degree().unwrap_or(0));
            sum = &sum + &hg;
        }
        ensure!(sum.is_one(), "case {case}: cofactors do not sum to 1");
        ensure!(BigInt::from(achieved) <= bound, "case {case}: degree {achieved} above bound {bound}");
        worst = worst.max(achieved);
    }
    // common zero at a random rational point
    let mut failures = 0;
    for case in 0..6 {
        let n = 1 + case % 2;
        let v = vars(&names[..n]);
        let pt: Vec<_> = (0..n).map(|_| int(r.gen_range(-3..=3))).collect();
        let t = 2;
        let gs: Vec<MultiPoly> = (0..t)
            .map(|_| {
                let g = common::nonzero_poly(&mut r, &v, 2, 3);
                &g - &MultiPoly::constant(&v, g.eval(&pt))
            })
            .collect();
        if gs.iter().any(|g| g.is_zero()) {
            continue;
        }
        let dmax = gs.iter().filter_map(|g| g.degree()).max().unwrap().max(1) as u64;
        let bound = ok(ns_bound(1, dmax, t as u64, n as u64, n as u64))?;
        let cap = u32::try_from(&bound).unwrap();
        ensure!(find_certificate(&AffineRing::polynomial(&v), &gs, cap).is_err(), "certificate found despite common zero");
        failures += 1;
    }
    ensure!(failures >= 4, "too few common-zero instances");
    Ok(format!("30 verified certificates (max degree {worst}), {failures} common-zero instances fail at the cap"))
}

fn field(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other["value"].as_str().unwrap_or_default().to_string(),
    }
}

// 9. bounds calculator against direct evaluation
fn bounds_calculator() -> Outcome {
    let t = Instant::now();
    let x = BoundInputs {
        p: Some(1),
        m: Some(1),
        big_d: Some(2),
        ..Default::default()
    };
    let r = ok(bounds_report(&x, &["main".to_string()]))?;
    ensure!(r["bounds"]["main"]["value"] == "33554436", "main = {}", r["bounds"]["main"]);
    let mut checked = 0;
    for (p, m, n, dd, d, dp, d0, d1, s, l, tt, da) in
        [(1u64, 1u64, 2u64, 2u64, 2u64, 1u64, 3u64, 1u64, 2u64, 1u64, 3u64, 5u64), (2, 2, 3, 3, 3, 2, 2, 2, 1, 2, 2, 4), (0, 1, 4, 1, 1, 3, 1, 1, 3, 0, 1, 1)]
    {
        let x = BoundInputs {
            p: Some(p),
            m: Some(m),
            n: Some(n),
            big_d: Some(dd),
            d: Some(d),
            dprime: Some(dp),
            d0: Some(d0),
            d1: Some(d1),
            s: Some(s),
            l: Some(l),
            t: Some(tt),
            deg_alpha: Some(da),
            component_degrees: Some(vec![dd, dd + 1]),
        };
        let all: Vec<String> = FORMULAS.iter().map(|f| f.to_string()).collect();
        let rep = ok(bounds_report(&x, &all))?;
        let b = &rep["bounds"];
        let e = 2 * p * m + 6 * m;
        let expect = [
            ("main", pow(2, e + 2) * pow(p, e + 1) * pow(dd, 4 * p * m + 10 * m + 1) + pow(dd, m + 1)),
            ("prop31", pow(dd, m + 1)),
            ("prop32", BigInt::from((n + 1) * dd * dd / 4)),
            ("thm22", BigInt::from(n + 1) * dd * (dd + 1)),
            ("lemma51_N", BigInt::from(2 * dd) * pow(s * d1, m)),
            ("thm53", BigInt::from(d) + BigInt::from(2 * dd * (l + 1)) * pow(s + l, m) * pow(d1, m)),
            ("thm62", {
                let base = 2 * d0 as i64 - d1 as i64 + 1;
                (0..2 * s - 1).fold(BigInt::one(), |acc, _| acc * base) * da
            }),
            ("thm71", hypersurface_bound(p as i64, d as i64, dp as i64)),
        ];
        for (name, val) in expect {
            ensure!(field(&b[name]) == val.to_string(), "{name}: got {} want {val}", b[name]);
            checked += 1;
        }
        let t21 = &b["thm21"];
        ensure!(t21["D_d_m"] == (BigInt::from(dd) * pow(d, m)).to_string(), "thm21 D d^m");
        ensure!(t21["2_D_d_m_minus_1"] == (BigInt::from(2 * dd) * pow(d, m) - BigInt::one()).to_string(), "thm21 2Dd^m - 1");
        ensure!(t21["D_d_t"] == (BigInt::from(dd) * pow(d, tt)).to_string(), "thm21 D d^t");
        let applicable = if tt <= m {
            BigInt::from(dd) * pow(d, tt)
        } else if d >= 3 && m + 1 >= n {
            BigInt::from(dd) * pow(d, m)
        } else {
            BigInt::from(2 * dd) * pow(d, m) - BigInt::one()
        };
        ensure!(t21["applicable"] == applicable.to_string(), "thm21 applicable branch");
        checked += 1;
    }
    let el = t.elapsed();
    ensure!(el < Duration::from_secs(1), "took {}", secs(el));
    ensure!(checked == 27, "checked {checked} values");
    Ok(format!("main(1,1,2) = 33554436, nine formulas match direct evaluation on 3 inputs, {}", secs(el)))
}

// 10. algebra identities
fn algebra_suite() -> Outcome {
    let t = Instant::now();
    let mut r = common::rng(10);
    let v = vars(&["x", "y", "z"]);
    let ring = AffineRing::polynomial(&v);
    let g = p(&v, "x*y + z^2 - 1");
    for i in 0..100 {
        let k = i % 3;
        let w = common::polyform(&mut r, &v, k, 4);
        ensure!(w.d().d().is_zero(), "d(d w) != 0 for {}", w.to_text());
        let lw = common::diffform(&mut r, &ring, &g, k.min(1), 3, 2);
        ensure!(ok(lw.exterior_d().exterior_d().is_zero())?, "d(d w) != 0 for {}", lw.to_text());
        let st = lw.filtration_stamp();
        ensure!(lw.exterior_d().filtration_stamp().le(&FiltrationStamp::new(st.order_s + 1, st.degree_d)), "d leaves F^(s+1,d)");
        let (a, b) = (i % 2, (i / 2) % 3);
        let u = common::polyform(&mut r, &v, a, 3);
        let z = common::polyform(&mut r, &v, b, 3);
        let second = u.wedge(&z.d());
        let rhs = if a % 2 == 0 { u.d().wedge(&z).add(&second) } else { u.d().wedge(&z).sub(&second) };
        ensure!(u.wedge(&z).d().sub(&rhs).is_zero(), "Leibniz rule");
        let swapped = z.wedge(&u);
        let diff = if common::sign(a, b) > 0 { u.wedge(&z).sub(&swapped) } else { u.wedge(&z).add(&swapped) };
        ensure!(diff.is_zero(), "graded commutativity");
        let lu = common::diffform(&mut r, &ring, &g, 1, 2, 1);
        let prod = ok(lw.wedge(&lu))?;
        ensure!(prod.filtration_stamp().le(&lw.filtration_stamp().add(&lu.filtration_stamp())), "wedge stamp");
        let lhs = prod.exterior_d();
        let sgn = if lw.degree_p.is_multiple_of(2) { 1 } else { -1 };
        let rhs = ok(ok(lw.exterior_d().wedge(&lu))?.add(&ok(lw.wedge(&lu.exterior_d()))?.scale(&int(sgn))))?;
        ensure!(ok(forms_equal(&lhs, &rhs))?, "localized Leibniz rule");
    }
    let pv = vars(&["x", "y"]);
    let cover = ok(Cover::new(&AffineRing::polynomial(&pv), vec![p(&pv, "x"), p(&pv, "x - 1"), p(&pv, "y^2 + 1")], 1, 2))?;
    for level in 0..3 {
        for _ in 0..6 {
            let c = common::cech(&mut r, &cover, 0, level.min(2), 2, 1);
            let dd = ok(edrc::cech::cech_d(&cover, &ok(edrc::cech::cech_d(&cover, &c))?))?;
            ensure!(ok(dd.is_zero())?, "delta(delta c) != 0");
            let tc = common::total(&mut r, &cover, level, 2, 1);
            let tt = ok(edrc::cech::total_d(&cover, &ok(edrc::cech::total_d(&cover, &tc))?))?;
            ensure!(ok(tt.is_zero())?, "d_tot(d_tot c) != 0");
        }
    }
    let el = t.elapsed();
    ensure!(el < Duration::from_secs(60), "took {}", secs(el));
    Ok(format!("d^2 = 0, Leibniz, graded commutativity, delta^2 = 0, d_tot^2 = 0, stamp laws, {}", secs(el)))
}

fn run_cli(args: &[&str]) -> std::result::Result<(Vec<u8>, i32), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_edrc")).args(args).output().map_err(|e| e.to_string())?;
    Ok((out.stdout, out.status.code().unwrap_or(-1)))
}

// 11. repeated CLI runs are byte-identical
fn cli_determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("edrc-accept-{}", std::process::id()));
    ok(std::fs::create_dir_all(&dir))?;
    let job = dir.join("job.json");
    ok(std::fs::write(&job, r#"{"mode": "certificate", "vars": ["x", "y"], "ideal": "x*y - 1", "g": "x; y"}"#))?;
    let job = job.to_string_lossy().to_string();
    let runs: Vec<Vec<&str>> = vec![
        vec!["bounds", "--p", "1", "--m", "1", "--D", "2"],
        vec!["certificate", "--vars", "x,y", "--ideal", "x*y-1", "--g", "x;y"],
        vec!["idempotents", "--vars", "x1,x2,x3", "--component", "x1;x2*x3-1", "--component", "x1*x3-x2^2"],
        vec!["cohomology", "--vars", "x,y", "--ideal", "x*y-1", "--route", "both", "--seed", "11"],
        vec!["hypersurface", "--vars", "x,y", "--f", "y", "--g", "x"],
        vec!["residue", "--vars", "x,y", "--f", "y", "--term", "0,2:1"],
        vec!["resolve", "--vars", "x,y", "--ideal", "y^2-x^3+x", "--seed", "3"],
        vec!["--job", job.as_str(), "--seed", "5"],
    ];
    for args in &runs {
        let a = run_cli(args)?;
        let b = run_cli(args)?;
        ensure!(a.1 == 0, "edrc {} exited with {}", args.join(" "), a.1);
        ensure!(!a.0.is_empty() && a == b, "edrc {} differs between runs", args.join(" "));
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok(format!("{} subcommand invocations byte-identical across two runs", runs.len()))
}

#[test]
fn acceptance() {
    let criteria: Vec<Criterion> = vec![
        ("punctured line, two routes", punctured_line),
        ("elliptic curve", elliptic_curve),
        ("hypersurface minus divisor", hypersurface_minus_divisor),
        ("residue inverts lambda", gysin_identity),
        ("lift and expansion bounds", psi_lift_bounds),
        ("cech preimage contract", lemma51_contract),
        ("idempotent family", idempotent_family),
        ("nullstellensatz battery", nullstellensatz_battery),
        ("bounds calculator", bounds_calculator),
        ("algebra properties", algebra_suite),
        ("cli determinism", cli_determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let f = *f;
        let h = std::thread::Builder::new().stack_size(64 << 20).spawn(f).expect("spawn");
        let outcome = h.join().unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(msg) => println!("criterion {:>2} PASS  {name}: {msg}", i + 1),
            Err(msg) => {
                println!("criterion {:>2} FAIL  {name}: {msg}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
