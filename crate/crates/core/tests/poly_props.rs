//! Property-based checks of the exact Laurent–Fourier polynomial ring and
//! its Poisson structure.

use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use r4bp::nf_algebra::{Phase, Term};
use r4bp::RatPoly;

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn arb_term() -> impl Strategy<Value = Term> {
    (0i32..=2, 0u32..=1, 0u32..=1, 0u32..=2, any::<bool>()).prop_map(
        |(r, big_r, tc, m, sin)| {
            let phase = if m == 0 || !sin { Phase::Cos } else { Phase::Sin };
            Term::new(r, big_r, tc, m, phase)
        },
    )
}

fn arb_poly() -> impl Strategy<Value = RatPoly> {
    prop::collection::vec((arb_term(), -4i64..=4), 1..4).prop_map(|terms| {
        terms
            .into_iter()
            .fold(RatPoly::zero(), |acc, (t, c)| acc.add(&RatPoly::monomial(rat(c), t)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_commutative(f in arb_poly(), g in arb_poly()) {
        let fg = f.mul(&g).unwrap();
        let gf = g.mul(&f).unwrap();
        prop_assert!(fg.sub(&gf).is_zero());
    }

    #[test]
    fn ring_associative(f in arb_poly(), g in arb_poly(), h in arb_poly()) {
        let lhs = f.mul(&g).unwrap().mul(&h).unwrap();
        let rhs = f.mul(&g.mul(&h).unwrap()).unwrap();
        prop_assert!(lhs.sub(&rhs).is_zero());
    }

    #[test]
    fn ring_distributive(f in arb_poly(), g in arb_poly(), h in arb_poly()) {
        let lhs = f.mul(&g.add(&h)).unwrap();
        let rhs = f.mul(&g).unwrap().add(&f.mul(&h).unwrap());
        prop_assert!(lhs.sub(&rhs).is_zero());
    }

    #[test]
    fn products_stay_canonical(f in arb_poly(), g in arb_poly()) {
        prop_assert!(f.mul(&g).unwrap().is_canonical());
    }

    #[test]
    fn derivations_commute(f in arb_poly()) {
        // mixed partials agree for every pair of variables
        type Deriv = fn(&RatPoly) -> RatPoly;
        let pairs: [(Deriv, Deriv); 3] = [
            (RatPoly::d_r, RatPoly::d_big_r),
            (RatPoly::d_r, RatPoly::d_theta),
            (RatPoly::d_theta, RatPoly::d_theta_cap),
        ];
        for (da, db) in pairs {
            prop_assert!(da(&db(&f)).sub(&db(&da(&f))).is_zero());
        }
    }

    #[test]
    fn bracket_antisymmetric(f in arb_poly(), g in arb_poly()) {
        let fg = f.poisson_bracket(&g).unwrap();
        let gf = g.poisson_bracket(&f).unwrap();
        prop_assert!(fg.add(&gf).is_zero());
    }

    #[test]
    fn bracket_leibniz(f in arb_poly(), g in arb_poly(), h in arb_poly()) {
        let lhs = f.poisson_bracket(&g.mul(&h).unwrap()).unwrap();
        let rhs = f
            .poisson_bracket(&g)
            .unwrap()
            .mul(&h)
            .unwrap()
            .add(&g.mul(&f.poisson_bracket(&h).unwrap()).unwrap());
        prop_assert!(lhs.sub(&rhs).is_zero());
    }

    #[test]
    fn bracket_jacobi(f in arb_poly(), g in arb_poly(), h in arb_poly()) {
        let s = f
            .poisson_bracket(&g.poisson_bracket(&h).unwrap())
            .unwrap()
            .add(&g.poisson_bracket(&h.poisson_bracket(&f).unwrap()).unwrap())
            .add(&h.poisson_bracket(&f.poisson_bracket(&g).unwrap()).unwrap());
        prop_assert!(s.is_zero());
    }

    #[test]
    fn antiderivative_inverts_d_theta(f in arb_poly()) {
        // restrict to the zero-mean part, where the inverse exists
        let (_, prime) = f.split_mean();
        if let Ok(g) = prime.antiderivative_theta() {
            prop_assert!(g.d_theta().sub(&prime).is_zero());
        }
    }

    #[test]
    fn homological_solution_exact(f in arb_poly()) {
        let (_, rhs) = f.split_mean();
        if rhs.is_zero() {
            return Ok(());
        }
        let w = RatPoly::solve_homological(&rhs).unwrap();
        prop_assert!(w.d_theta().add(&w.op_ln()).sub(&rhs).is_zero());
    }
}
