use ncleaf::periods::{build_lift, cyclic_generator, is_discrete, iota_lambda, PeriodGroup, PeriodValue, GOLDEN};
use ncleaf::Error;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::Signed;
use proptest::prelude::*;

fn group(gens: &[(i64, i64, i64, i64)]) -> PeriodGroup {
    PeriodGroup::new(gens.iter().map(|&(an, ad, bn, bd)| PeriodValue::from_fractions(an, ad, bn, bd)).collect(), GOLDEN)
}

fn ints(gens: &[(i64, i64)]) -> PeriodGroup {
    PeriodGroup::new(gens.iter().map(|&(a, b)| PeriodValue::from_ints(a, b)).collect(), GOLDEN)
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// Smallest positive value among integer combinations with coefficients in
/// `[-bound, bound]`, in exact arithmetic.
fn smallest_positive_combination(gens: &[PeriodValue], bound: i64) -> Option<PeriodValue> {
    let mut combos = vec![PeriodValue::from_ints(0, 0)];
    for g in gens {
        combos = combos
            .iter()
            .flat_map(|c| (-bound..=bound).map(move |k| c.add(&g.scale(&BigRational::from_integer(k.into())))))
            .collect();
    }
    combos
        .into_iter()
        .filter(|c| c.numeric(GOLDEN) > 0.0)
        .min_by(|a, b| a.numeric(GOLDEN).total_cmp(&b.numeric(GOLDEN)))
}

#[test]
fn discreteness_examples() {
    assert!(is_discrete(&ints(&[(1, 0)])));
    assert!(!is_discrete(&ints(&[(1, 0), (0, 1)])));
    assert!(is_discrete(&ints(&[])));
    assert!(is_discrete(&group(&[(1, 2, 0, 1), (3, 2, 0, 1)])));
}

#[test]
fn half_integers_generated_by_one_half() {
    let g = group(&[(1, 2, 0, 1), (3, 2, 0, 1)]);
    let oracle = smallest_positive_combination(&g.generators, 20).unwrap();
    assert_eq!(oracle, PeriodValue::from_fractions(1, 2, 0, 1));
    assert_eq!(cyclic_generator(&g).unwrap(), oracle);
}

#[test]
fn cyclic_generator_examples() {
    assert_eq!(cyclic_generator(&ints(&[(1, 0)])).unwrap(), PeriodValue::from_ints(1, 0));
    assert_eq!(cyclic_generator(&ints(&[(0, 2), (0, 3)])).unwrap(), PeriodValue::from_ints(0, 1));
    assert_eq!(cyclic_generator(&ints(&[])), Err(Error::TrivialGroup));
    assert_eq!(cyclic_generator(&ints(&[(1, 0), (0, 1)])), Err(Error::NotDiscrete { rank: 2 }));
}

#[test]
fn negative_generator_is_flipped() {
    let gen = cyclic_generator(&ints(&[(-4, 0), (6, 0)])).unwrap();
    assert_eq!(gen, PeriodValue::from_ints(2, 0));
}

#[test]
fn lift_of_the_full_lattice() {
    let lift = build_lift(&ints(&[(1, 0), (0, 1)]));
    assert!(!lift.discrete);
    assert_eq!(lift.torus_dimension, 2);
    let basis = lift.lattice_basis.unwrap();
    assert_eq!(basis, vec![[q(1, 1), q(0, 1)], [q(0, 1), q(1, 1)]]);
}

#[test]
fn lift_of_the_circle_and_of_a_dependent_triple() {
    let circle = build_lift(&ints(&[(1, 0)]));
    assert!(circle.discrete);
    assert_eq!(circle.torus_dimension, 1);
    assert_eq!(circle.cyclic_generator, Some(PeriodValue::from_ints(1, 0)));

    let triple = build_lift(&ints(&[(1, 0), (0, 1), (1, 1)]));
    assert_eq!(triple.torus_dimension, 2);
    assert_eq!(triple.lattice_basis.unwrap(), vec![[q(1, 1), q(0, 1)], [q(0, 1), q(1, 1)]]);

    let trivial = build_lift(&ints(&[]));
    assert_eq!(trivial.torus_dimension, 0);
}

#[test]
fn json_reader_accepts_fractions() {
    let g = PeriodGroup::from_json(r#"[{"a":"1/2","b":"0"},{"a":"-3/2","b":"0"}]"#, GOLDEN).unwrap();
    assert_eq!(cyclic_generator(&g).unwrap(), PeriodValue::from_fractions(1, 2, 0, 1));
    assert!(matches!(PeriodGroup::from_json("[{\"a\":\"x\"}]", GOLDEN), Err(Error::Parse(_))));
}

#[test]
fn iota_examples() {
    let p = iota_lambda(0.0, GOLDEN);
    assert_eq!((p.x, p.y), (0.0, 0.0));
    let p = iota_lambda(1.0, GOLDEN);
    assert!(p.x.abs() < 1e-15 && (p.y - GOLDEN).abs() < 1e-15);
    let t = 1.0 / GOLDEN;
    let p = iota_lambda(t, GOLDEN);
    assert!((p.x - t.fract()).abs() < 1e-15);
    assert!(p.y.min(1.0 - p.y) < 1e-15);
}

fn small_value() -> impl Strategy<Value = (i64, i64, i64, i64)> {
    (-12i64..=12, 1i64..=6, -12i64..=12, 1i64..=6)
}

proptest! {
    #[test]
    fn rank_is_invariant_under_permutation_negation_and_shear(
        gens in prop::collection::vec(small_value(), 0..5),
        shear in -5i64..=5,
        flip in any::<bool>(),
    ) {
        let g = group(&gens);
        let rank = g.rational_rank();

        let mut reversed = g.generators.clone();
        reversed.reverse();
        prop_assert_eq!(PeriodGroup::new(reversed, GOLDEN).rational_rank(), rank);

        let negated: Vec<_> = g.generators.iter().enumerate().map(|(i, v)| if flip || i == 0 { v.neg() } else { v.clone() }).collect();
        prop_assert_eq!(PeriodGroup::new(negated, GOLDEN).rational_rank(), rank);

        // (x, y) ↦ (x, y + kx) adds k times the first generator to the second
        if g.generators.len() >= 2 {
            let mut sheared = g.generators.clone();
            sheared[1] = sheared[1].add(&sheared[0].scale(&BigRational::from_integer(shear.into())));
            prop_assert_eq!(PeriodGroup::new(sheared, GOLDEN).rational_rank(), rank);
        }
    }

    #[test]
    fn generator_divides_every_generator_and_is_reached(gens in prop::collection::vec((-8i64..=8, 1i64..=4), 1..3), b in 0i64..=2) {
        let values: Vec<_> = gens.iter().map(|&(n, d)| PeriodValue::from_fractions(n, d, b * n, d)).collect();
        let g = PeriodGroup::new(values, GOLDEN);
        prop_assume!(g.rational_rank() == 1);
        let gen = cyclic_generator(&g).unwrap();
        prop_assert!(gen.numeric(GOLDEN) > 0.0);
        for v in &g.generators {
            prop_assert!(v.integer_quotient(&gen).is_some());
        }
        let oracle = smallest_positive_combination(&g.generators, 40).unwrap();
        prop_assert_eq!(oracle, gen);
    }

    #[test]
    fn lift_dimension_matches_rank(gens in prop::collection::vec(small_value(), 0..4)) {
        let g = group(&gens);
        let lift = build_lift(&g);
        prop_assert_eq!(lift.torus_dimension, g.rational_rank());
        prop_assert_eq!(lift.discrete, is_discrete(&g));
    }

    #[test]
    fn lattice_basis_spans_every_generator(gens in prop::collection::vec(small_value(), 2..5)) {
        let g = group(&gens);
        prop_assume!(g.rational_rank() == 2);
        let basis = build_lift(&g).lattice_basis.unwrap();
        // solve v = x b0 + y b1 exactly and require integer coordinates
        let [a0, b0] = basis[0].clone();
        let [a1, b1] = basis[1].clone();
        let det = &a0 * &b1 - &a1 * &b0;
        prop_assert!(det != q(0, 1));
        for v in &g.generators {
            let x = (&v.a * &b1 - &a1 * &v.b) / &det;
            let y = (&a0 * &v.b - &v.a * &b0) / &det;
            prop_assert!(x.is_integer() && y.is_integer());
        }
        // the covolume equals the gcd of the 2x2 minors of the generators
        let mut minors = num_bigint::BigInt::from(0);
        let scale = g.generators.iter().fold(num_bigint::BigInt::from(1), |l, v| l.lcm(v.a.denom()).lcm(v.b.denom()));
        let s = BigRational::from_integer(scale);
        for (i, u) in g.generators.iter().enumerate() {
            for v in &g.generators[i + 1..] {
                let m = ((&u.a * &v.b - &u.b * &v.a) * &s * &s).to_integer();
                minors = minors.gcd(&m);
            }
        }
        prop_assert_eq!((det * &s * &s).abs(), BigRational::from_integer(minors));
    }
}
