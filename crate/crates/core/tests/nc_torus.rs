use ncleaf::nc_torus::{
    default_smoothing, interior_defect, multiply, powers_rieffel_projection, represent, star, trace, NcElement,
};
use ncleaf::groupoid::operator_norm;
use ncleaf::periods::GOLDEN;
use ncleaf::{Error, C64};
use proptest::prelude::*;

const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq)]
enum Letter {
    U(i32),
    V(i32),
}

/// Normal-orders a word in `u^{±1}`, `v^{±1}` by swapping adjacent `v u`
/// pairs one at a time (`v^a u^b = e^{-2πiλab} u^b v^a`). Returns the
/// exponents and the accumulated integer multiple of `-λ` in the phase.
fn normal_order(word: &[Letter]) -> ((i32, i32), i64) {
    let mut w: Vec<Letter> = word
        .iter()
        .flat_map(|l| match *l {
            Letter::U(k) => vec![Letter::U(k.signum()); k.unsigned_abs() as usize],
            Letter::V(k) => vec![Letter::V(k.signum()); k.unsigned_abs() as usize],
        })
        .collect();
    let mut phase = 0i64;
    loop {
        let Some(i) = (0..w.len().saturating_sub(1)).find(|&i| matches!((w[i], w[i + 1]), (Letter::V(_), Letter::U(_)))) else {
            break;
        };
        if let (Letter::V(a), Letter::U(b)) = (w[i], w[i + 1]) {
            phase += (a * b) as i64;
            w.swap(i, i + 1);
        }
    }
    let m = w.iter().map(|l| if let Letter::U(k) = l { *k } else { 0 }).sum();
    let n = w.iter().map(|l| if let Letter::V(k) = l { *k } else { 0 }).sum();
    ((m, n), phase)
}

fn phase(k: i64, lambda: f64) -> C64 {
    let x = std::f64::consts::TAU * -(k as f64) * lambda;
    C64::new(x.cos(), x.sin())
}

/// Product by expanding every pair of monomials into a word.
fn oracle_product(a: &NcElement, b: &NcElement, lambda: f64) -> NcElement {
    NcElement::from_terms(a.terms().flat_map(|(&(m, n), ca)| {
        b.terms().map(move |(&(p, q), cb)| {
            let (key, k) = normal_order(&[Letter::U(m), Letter::V(n), Letter::U(p), Letter::V(q)]);
            (key, ca * cb * phase(k, lambda))
        })
    }))
}

fn max_gap(a: &NcElement, b: &NcElement) -> f64 {
    a.sub(b).max_norm()
}

fn element() -> impl Strategy<Value = NcElement> {
    prop::collection::vec(((-5i32..=5, -5i32..=5), -1.0f64..1.0, -1.0f64..1.0), 1..8)
        .prop_map(|terms| NcElement::from_terms(terms.into_iter().map(|(k, re, im)| (k, C64::new(re, im)))))
}

#[test]
fn commutation_examples() {
    let (u, v) = (NcElement::u(), NcElement::v());
    assert_eq!(multiply(&u, &v, GOLDEN), NcElement::monomial(1, 1, ONE));
    let vu = multiply(&v, &u, GOLDEN);
    assert!((vu.coeff(1, 1) - phase(1, GOLDEN)).norm() < 1e-15);
    // uv = e^{2πiλ} vu
    let uv = multiply(&u, &v, GOLDEN);
    assert!(max_gap(&uv, &vu.scale(phase(-1, GOLDEN))) < 1e-15);
}

#[test]
fn swap_oracle_agrees_on_the_listed_monomials() {
    let a = NcElement::monomial(3, 2, ONE);
    let b = NcElement::monomial(-1, 1, ONE);
    let (key, k) = normal_order(&[Letter::U(3), Letter::V(2), Letter::U(-1), Letter::V(1)]);
    assert_eq!((key, k), ((2, 3), -2));
    let ab = multiply(&a, &b, GOLDEN);
    assert!((ab.coeff(2, 3) - phase(-2, GOLDEN)).norm() < 1e-15);
}

#[test]
fn star_examples() {
    let u_star = star(&NcElement::u(), GOLDEN);
    assert_eq!(u_star, NcElement::monomial(-1, 0, ONE));
    assert_eq!(multiply(&NcElement::u(), &u_star, GOLDEN), NcElement::one());

    let uv_star = star(&NcElement::monomial(1, 1, ONE), GOLDEN);
    // (uv)* = v⁻¹u⁻¹, normal-ordered by the oracle
    let (key, k) = normal_order(&[Letter::V(-1), Letter::U(-1)]);
    assert_eq!(key, (-1, -1));
    assert!((uv_star.coeff(-1, -1) - phase(k, GOLDEN)).norm() < 1e-15);
    assert!((uv_star.coeff(-1, -1) - phase(1, GOLDEN)).norm() < 1e-15);
}

#[test]
fn unitaries() {
    for x in [NcElement::u(), NcElement::v()] {
        let xs = star(&x, GOLDEN);
        assert_eq!(multiply(&x, &xs, GOLDEN), NcElement::one());
        assert_eq!(multiply(&xs, &x, GOLDEN), NcElement::one());
    }
}

#[test]
fn trace_examples() {
    assert_eq!(trace(&NcElement::one()), ONE);
    for (m, n) in [(1, 0), (0, 1), (-2, 3), (4, -4)] {
        assert_eq!(trace(&NcElement::monomial(m, n, ONE)), C64::new(0.0, 0.0));
    }
}

#[test]
fn representation_examples() {
    let id = represent(&NcElement::one(), 6, GOLDEN).unwrap();
    assert_eq!(id, nalgebra::DMatrix::identity(13, 13));

    let n = 12;
    let uv = represent(&NcElement::monomial(1, 1, ONE), n, GOLDEN).unwrap();
    let vu = represent(&multiply(&NcElement::v(), &NcElement::u(), GOLDEN), n, GOLDEN).unwrap();
    assert!(interior_defect(&uv, &vu.map(|z| z * phase(-1, GOLDEN)), 1) < 1e-14);

    assert!(matches!(represent(&NcElement::monomial(3, 0, ONE), 3, GOLDEN), Err(Error::WindowTooSmall { .. })));
}

#[test]
fn operator_norm_grows_with_the_window_and_stays_below_l1() {
    let a = NcElement::from_terms([((1, 0), C64::new(0.7, 0.1)), ((0, 2), C64::new(-0.4, 0.0)), ((-2, 1), C64::new(0.0, 0.9))]);
    let mut last = 0.0;
    for n in [3, 6, 12, 24] {
        let norm = operator_norm(&represent(&a, n, GOLDEN).unwrap());
        assert!(norm >= last - 1e-12);
        assert!(norm <= a.l1_norm() + 1e-12);
        last = norm;
    }
}

#[test]
fn projection_at_golden_lambda() {
    let mut last = f64::INFINITY;
    for b in [16, 32, 48] {
        let p = powers_rieffel_projection(GOLDEN, default_smoothing(GOLDEN), b, f64::INFINITY).unwrap();
        assert!(p.residual < last);
        last = p.residual;
        assert!((p.trace - GOLDEN).abs() < 1e-6);
        assert!(max_gap(&star(&p.element, GOLDEN), &p.element) < 1e-15);
    }
    assert!(last <= 1e-3);
}

#[test]
fn projection_below_one_half() {
    let p = powers_rieffel_projection(0.3, default_smoothing(0.3), 48, 1e-3).unwrap();
    assert!((p.trace - 0.3).abs() < 1e-6);
    // the square agrees with the oracle product
    let sq = oracle_product(&p.element, &p.element, 0.3);
    assert!((sq.sub(&p.element).l1_norm() - p.residual).abs() < 1e-9);
}

#[test]
fn projection_rejects_bad_input() {
    assert!(matches!(powers_rieffel_projection(1.2, 0.1, 16, 1.0), Err(Error::PreconditionViolated(_))));
    assert!(matches!(powers_rieffel_projection(0.3, 0.5, 16, 1.0), Err(Error::PreconditionViolated(_))));
    assert!(matches!(
        powers_rieffel_projection(GOLDEN, default_smoothing(GOLDEN), 16, 1e-9),
        Err(Error::ProjectionResidualTooLarge { .. })
    ));
}

#[test]
fn json_is_a_list_of_coefficients() {
    let a = NcElement::from_terms([((1, -2), C64::new(0.5, -1.5))]);
    let text = serde_json::to_string(&a).unwrap();
    assert_eq!(text, r#"[{"m":1,"n":-2,"re":0.5,"im":-1.5}]"#);
    assert_eq!(serde_json::from_str::<NcElement>(&text).unwrap(), a);
}

proptest! {
    #[test]
    fn multiply_matches_the_swap_oracle(a in element(), b in element(), lambda in 0.01f64..0.99) {
        prop_assert!(max_gap(&multiply(&a, &b, lambda), &oracle_product(&a, &b, lambda)) < 1e-12);
    }

    #[test]
    fn multiply_is_associative(a in element(), b in element(), c in element()) {
        let left = multiply(&multiply(&a, &b, GOLDEN), &c, GOLDEN);
        let right = multiply(&a, &multiply(&b, &c, GOLDEN), GOLDEN);
        prop_assert!(max_gap(&left, &right) < 1e-12);
    }

    #[test]
    fn star_is_an_antimultiplicative_involution(a in element(), b in element()) {
        prop_assert!(max_gap(&star(&star(&a, GOLDEN), GOLDEN), &a) < 1e-15);
        let lhs = star(&multiply(&a, &b, GOLDEN), GOLDEN);
        let rhs = multiply(&star(&b, GOLDEN), &star(&a, GOLDEN), GOLDEN);
        prop_assert!(max_gap(&lhs, &rhs) < 1e-14);
    }

    #[test]
    fn trace_is_tracial_and_positive(a in element(), b in element()) {
        let ab = trace(&multiply(&a, &b, GOLDEN));
        let ba = trace(&multiply(&b, &a, GOLDEN));
        prop_assert!((ab - ba).norm() < 1e-15);
        let squares: f64 = a.terms().map(|(_, c)| c.norm_sqr()).sum();
        let t = trace(&multiply(&star(&a, GOLDEN), &a, GOLDEN));
        prop_assert!((t.re - squares).abs() < 1e-14 && t.re >= 0.0);
    }

    #[test]
    fn representation_is_multiplicative_on_the_interior(a in element(), b in element()) {
        let n = 24;
        let prod = represent(&multiply(&a, &b, GOLDEN), n, GOLDEN).unwrap();
        let split = represent(&a, n, GOLDEN).unwrap() * represent(&b, n, GOLDEN).unwrap();
        prop_assert!(interior_defect(&prod, &split, 10) < 1e-13);
    }
}
