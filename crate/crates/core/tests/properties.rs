mod common;

use edrc::cech::{cech_d, total_d, Cover};
use edrc::parse::parse_poly;
use edrc::poly::{vars, MultiPoly, Vars};
use edrc::ring::{forms_equal, AffineRing, FiltrationStamp, PolyForm, Reduction};
use proptest::prelude::*;

fn plane() -> Vars {
    vars(&["x", "y", "z"])
}

fn p(v: &Vars, s: &str) -> MultiPoly {
    parse_poly(s, v).unwrap()
}

fn plane_cover() -> Cover {
    let v = vars(&["x", "y"]);
    let ring = AffineRing::polynomial(&v);
    Cover::new(&ring, vec![p(&v, "x"), p(&v, "x - 1"), p(&v, "y^2 + 1")], 1, 2).unwrap()
}

fn hyperbola_cover() -> Cover {
    let v = vars(&["x", "y"]);
    let ring = AffineRing::new(&v, vec![p(&v, "x*y - 1")], Reduction::LinearSystem { degree_cap: 6 }).unwrap();
    Cover::new(&ring, vec![p(&v, "x"), p(&v, "y")], 2, 1).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn polynomial_d_squares_to_zero(seed in any::<u64>(), k in 0usize..3) {
        let mut r = common::rng(seed);
        let w = common::polyform(&mut r, &plane(), k, 4);
        prop_assert!(w.d().d().is_zero());
    }

    #[test]
    fn localized_d_squares_to_zero(seed in any::<u64>(), k in 0usize..2, s in 0u32..3) {
        let v = plane();
        let ring = AffineRing::polynomial(&v);
        let g = p(&v, "x^2 + y - 1");
        let mut r = common::rng(seed);
        let w = common::diffform(&mut r, &ring, &g, k, 3, s);
        prop_assert!(w.exterior_d().exterior_d().is_zero().unwrap());
    }

    #[test]
    fn leibniz_rule(seed in any::<u64>(), a in 0usize..2, b in 0usize..2) {
        let v = plane();
        let mut r = common::rng(seed);
        let u = common::polyform(&mut r, &v, a, 3);
        let w = common::polyform(&mut r, &v, b, 3);
        let lhs = u.wedge(&w).d();
        let second = u.wedge(&w.d());
        let rhs = if a % 2 == 0 { u.d().wedge(&w).add(&second) } else { u.d().wedge(&w).sub(&second) };
        prop_assert!(lhs.sub(&rhs).is_zero());
    }

    #[test]
    fn localized_leibniz_rule(seed in any::<u64>(), s in 0u32..3) {
        let v = plane();
        let ring = AffineRing::polynomial(&v);
        let g = p(&v, "y*z + 2");
        let mut r = common::rng(seed);
        let u = common::diffform(&mut r, &ring, &g, 0, 3, s);
        let w = common::diffform(&mut r, &ring, &g, 1, 3, s);
        let lhs = u.wedge(&w).unwrap().exterior_d();
        let rhs = u.exterior_d().wedge(&w).unwrap().add(&u.wedge(&w.exterior_d()).unwrap()).unwrap();
        prop_assert!(forms_equal(&lhs, &rhs).unwrap());
    }

    #[test]
    fn wedge_graded_commutative(seed in any::<u64>(), a in 0usize..3, b in 0usize..3) {
        let v = plane();
        let mut r = common::rng(seed);
        let u = common::polyform(&mut r, &v, a, 3);
        let w = common::polyform(&mut r, &v, b, 3);
        let ab = u.wedge(&w);
        let ba = w.wedge(&u);
        let diff = if common::sign(a, b) > 0 { ab.sub(&ba) } else { ab.add(&ba) };
        prop_assert!(diff.is_zero());
    }

    #[test]
    fn d_raises_order_keeps_degree(seed in any::<u64>(), k in 0usize..2, s in 0u32..4) {
        let v = plane();
        let ring = AffineRing::polynomial(&v);
        let g = p(&v, "x*y - z^3");
        let mut r = common::rng(seed);
        let w = common::diffform(&mut r, &ring, &g, k, 5, s);
        let st = w.filtration_stamp();
        let bound = FiltrationStamp::new(st.order_s + 1, st.degree_d);
        prop_assert!(w.exterior_d().filtration_stamp().le(&bound));
    }

    #[test]
    fn wedge_stamps_add(seed in any::<u64>(), s in 0u32..3, t in 0u32..3) {
        let v = plane();
        let ring = AffineRing::polynomial(&v);
        let g = p(&v, "z + 1");
        let mut r = common::rng(seed);
        let u = common::diffform(&mut r, &ring, &g, 1, 3, s);
        let w = common::diffform(&mut r, &ring, &g, 1, 3, t);
        let prod = u.wedge(&w).unwrap();
        prop_assert!(prod.filtration_stamp().le(&u.filtration_stamp().add(&w.filtration_stamp())));
    }

    #[test]
    fn polyform_degree_drops_under_d(seed in any::<u64>(), k in 0usize..3) {
        let mut r = common::rng(seed);
        let w = common::polyform(&mut r, &plane(), k, 5);
        let dw = w.d();
        prop_assert!(dw.is_zero() || dw.coeff_degree() < w.coeff_degree());
    }

    #[test]
    fn restriction_commutes_with_d(seed in any::<u64>(), s in 0u32..3) {
        let v = plane();
        let ring = AffineRing::polynomial(&v);
        let g = p(&v, "x + z");
        let h = p(&v, "y - 2");
        let mut r = common::rng(seed);
        let w = common::diffform(&mut r, &ring, &g, 1, 3, s);
        prop_assert!(forms_equal(&w.restrict(&h).exterior_d(), &w.exterior_d().restrict(&h)).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cech_delta_squares_to_zero(seed in any::<u64>(), k in 0usize..3) {
        let cover = plane_cover();
        let mut r = common::rng(seed);
        let c = common::cech(&mut r, &cover, 0, k, 2, 1);
        prop_assert!(cech_d(&cover, &cech_d(&cover, &c).unwrap()).unwrap().is_zero().unwrap());
    }

    #[test]
    fn cech_delta_commutes_with_d(seed in any::<u64>()) {
        let cover = plane_cover();
        let mut r = common::rng(seed);
        let c = common::cech(&mut r, &cover, 1, 0, 2, 1);
        let a = cech_d(&cover, &c.d()).unwrap();
        let b = cech_d(&cover, &c).unwrap().d();
        prop_assert!(a.sub(&b).unwrap().is_zero().unwrap());
    }

    #[test]
    fn total_d_squares_to_zero(seed in any::<u64>(), level in 0usize..3) {
        let cover = plane_cover();
        let mut r = common::rng(seed);
        let t = common::total(&mut r, &cover, level, 2, 1);
        prop_assert!(total_d(&cover, &total_d(&cover, &t).unwrap()).unwrap().is_zero().unwrap());
    }

    #[test]
    fn total_d_squares_to_zero_on_curve(seed in any::<u64>(), level in 0usize..2) {
        let cover = hyperbola_cover();
        let mut r = common::rng(seed);
        let t = common::total(&mut r, &cover, level, 2, 1);
        prop_assert!(total_d(&cover, &total_d(&cover, &t).unwrap()).unwrap().is_zero().unwrap());
    }
}

#[test]
fn stamp_order_is_componentwise() {
    let a = FiltrationStamp::new(1, 3);
    assert!(a.le(&FiltrationStamp::new(1, 3)));
    assert!(a.le(&FiltrationStamp::new(2, 3)));
    assert!(!a.le(&FiltrationStamp::new(0, 5)));
    assert_eq!(a.add(&FiltrationStamp::new(2, -1)), FiltrationStamp::new(3, 2));
    assert_eq!(a.join(&FiltrationStamp::new(0, 5)), FiltrationStamp::new(1, 5));
}

#[test]
fn exact_one_form_is_closed() {
    let v = plane();
    let f = p(&v, "x^3*y - z^2 + 7");
    assert!(PolyForm::df(&f).d().is_zero());
}
