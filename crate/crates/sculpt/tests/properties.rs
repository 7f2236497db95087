//! Randomized algebra and circuit laws. Each property runs 1000 cases
//! unless its per-case arithmetic is heavyweight, in which case the count
//! is stated at the property.

use num::rational::BigRational;
use num::BigInt;
use proptest::prelude::*;

use sculpt::circuit::{
    apply_element, beamsplitter_matrix, circuit_unitary, compile, dft_matrix, is_unitary_exact,
    unitarity_defect,
};
use sculpt::coeff::{Coeff, Exact, C64};
use sculpt::fock::{
    dicke_reference, DickeEncoding, FockPolynomial, InternalBasis, ModeLabel, Monomial, PathMode,
    ProductState, SiteId, Spin,
};
use sculpt::sim::{
    canonical_amplitude, dual_rail_dicke_fidelity, optimal_splitting, permanent, permanent_naive,
    success_probability_closed_form,
};

fn path_labels() -> Vec<ModeLabel> {
    let mut v = Vec::new();
    for m in 1..=2u16 {
        for r in 0..=1u8 {
            for b in 0..=1u8 {
                v.push(ModeLabel::Path(PathMode::Rail { m, r, b }));
            }
        }
    }
    for j in 1..=2u16 {
        for s in 1..=2u16 {
            v.push(ModeLabel::Path(PathMode::SBranch { j, s }));
        }
    }
    for t in 1..=2u16 {
        v.push(ModeLabel::Path(PathMode::TBranch { l: 1, t }));
    }
    v
}

fn label_strategy() -> impl Strategy<Value = ModeLabel> {
    prop::sample::select(path_labels())
}

fn monomial_strategy() -> impl Strategy<Value = Monomial> {
    prop::collection::vec((label_strategy(), 1u8..=2), 0..=3).prop_map(|parts| {
        let mut m = Monomial::unit();
        for (label, exp) in parts {
            m = m.mul_label(label, exp);
        }
        m
    })
}

fn exact_coeff_strategy() -> impl Strategy<Value = Exact> {
    (-3i64..=3, 1i64..=3, prop::bool::ANY).prop_map(|(p, q, radical)| {
        let base = Exact::from_ratio(p, q);
        if radical {
            base.mul(&Exact::sqrt_ratio(2, 1))
        } else {
            base
        }
    })
}

fn poly_strategy() -> impl Strategy<Value = FockPolynomial<Exact>> {
    prop::collection::vec((monomial_strategy(), exact_coeff_strategy()), 0..=3).prop_map(|terms| {
        let mut p = FockPolynomial::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn monomial_mul_commutes_and_associates(
        a in monomial_strategy(),
        b in monomial_strategy(),
        c in monomial_strategy(),
    ) {
        prop_assert_eq!(a.mul(&b), b.mul(&a));
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        prop_assert_eq!(a.mul(&b).degree(), a.degree() + b.degree());
    }

    #[test]
    fn polynomial_ring_laws(
        p in poly_strategy(),
        q in poly_strategy(),
        r in poly_strategy(),
    ) {
        prop_assert_eq!(p.add(&q), q.add(&p));
        prop_assert_eq!(p.mul(&q), q.mul(&p));
        prop_assert_eq!(p.mul(&q.add(&r)), p.mul(&q).add(&p.mul(&r)));
        prop_assert_eq!(p.sub(&p), FockPolynomial::zero());
    }

    #[test]
    fn annihilation_obeys_the_product_rule(
        p in poly_strategy(),
        q in poly_strategy(),
        mode in label_strategy(),
    ) {
        let lhs = p.mul(&q).annihilate(mode);
        let rhs = p.annihilate(mode).mul(&q).add(&p.mul(&q.annihilate(mode)));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn substitution_is_a_ring_homomorphism(
        p in poly_strategy(),
        q in poly_strategy(),
        src in label_strategy(),
        dst_a in label_strategy(),
        dst_b in label_strategy(),
        wa in exact_coeff_strategy(),
        wb in exact_coeff_strategy(),
    ) {
        let form = vec![(dst_a, wa), (dst_b, wb)];
        let lhs_mul = p.mul(&q).substitute(src, &form);
        let rhs_mul = p.substitute(src, &form).mul(&q.substitute(src, &form));
        prop_assert_eq!(lhs_mul, rhs_mul);
        let lhs_add = p.add(&q).substitute(src, &form);
        let rhs_add = p.substitute(src, &form).add(&q.substitute(src, &form));
        prop_assert_eq!(lhs_add, rhs_add);
    }

    #[test]
    fn internal_basis_change_round_trips(
        terms in prop::collection::vec(
            ((1u16..=3, prop::bool::ANY), exact_coeff_strategy()), 1..=3),
    ) {
        let mut p = FockPolynomial::<Exact>::zero();
        for ((site, one), c) in terms {
            let spin = if one { Spin::One } else { Spin::Zero };
            let label = ModeLabel::internal(SiteId::Sys(site), spin);
            p.add_term(Monomial::single(label, 1), c);
        }
        let there = p.change_internal_basis(InternalBasis::PlusMinus).unwrap();
        let back = there.change_internal_basis(InternalBasis::ZOne).unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn product_state_scalar_is_linear(
        p in poly_strategy(),
        q in poly_strategy(),
        c in exact_coeff_strategy(),
    ) {
        let plain = ProductState::new(Exact::one(), vec![p.clone(), q.clone()])
            .expand(100_000)
            .unwrap();
        let scaled = ProductState::new(c.clone(), vec![p, q])
            .expand(100_000)
            .unwrap();
        prop_assert_eq!(scaled, plain.scale(&c));
    }

    #[test]
    fn float_circuit_unitarity_defect_is_tiny(
        n in 2u32..=5,
        kf in 0.0f64..1.0,
        xf in 0.05f64..0.95,
    ) {
        let k = 1 + (kf * (n - 1) as f64) as u32;
        let k = k.min(n - 1);
        let alpha = (xf / k as f64).sqrt();
        let beta = (1.0 - xf).sqrt();
        let c = compile::<C64>(n, k, &C64::from_f64(alpha), &C64::from_f64(beta)).unwrap();
        prop_assert!(unitarity_defect(&circuit_unitary(&c)) < 1e-12);
    }

    #[test]
    fn exact_circuit_unitary_smallest_scheme(
        p in 1u64..=7,
        q in 8u64..=16,
    ) {
        let alpha = Exact::sqrt_ratio(p, q);
        let beta = Exact::sqrt_ratio(q - p, q);
        let c = compile::<Exact>(2, 1, &alpha, &beta).unwrap();
        prop_assert!(is_unitary_exact(&circuit_unitary(&c)));
    }

    #[test]
    fn photon_number_is_conserved(
        picks in prop::collection::vec((0usize..14, 1u8..=2), 1..=2),
    ) {
        let (alpha, beta) = optimal_splitting::<Exact>(2, 1);
        let c = compile::<Exact>(2, 1, &alpha, &beta).unwrap();
        let labels = path_labels();
        let mut m = Monomial::unit();
        for (idx, e) in picks {
            m = m.mul_label(labels[idx], e);
        }
        let degree = m.degree();
        let mut state = FockPolynomial::from_term(m, Exact::one());
        for e in &c.layers {
            state = apply_element(&state, e, &c).unwrap();
            prop_assert!(state.is_zero() || state.is_homogeneous());
            if !state.is_zero() {
                prop_assert_eq!(state.degree(), degree);
            }
        }
    }

    #[test]
    fn ryser_matches_naive_permanent(
        d in 0usize..=5,
        entries in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 25),
    ) {
        let m: Vec<Vec<C64>> = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        let (re, im) = entries[i * 5 + j];
                        C64(num::complex::Complex::new(re, im))
                    })
                    .collect()
            })
            .collect();
        let fast = permanent(&m).0;
        let slow = permanent_naive(&m).0;
        prop_assert!((fast - slow).norm() <= 1e-10 * (1.0 + slow.norm()));
    }

    #[test]
    fn success_probability_equals_pattern_count_times_amplitude(
        n in 1u32..=12,
        kf in 0.0f64..1.0,
    ) {
        let k = 1 + (kf * (n - 1) as f64) as u32;
        let k = k.min(n);
        let p = success_probability_closed_form(n, k);
        let (alpha, beta) = optimal_splitting::<Exact>(n, k);
        let amp = canonical_amplitude::<Exact>(n, k, &alpha, &beta);
        let amp_sq = amp.conj().mul(&amp).re_big_ratio().unwrap();
        let count = BigRational::from_integer(
            BigInt::from((1u64 << n) * n as u64 * (k + 1) as u64));
        prop_assert_eq!(p, count * amp_sq);
    }

    #[test]
    fn dicke_reference_is_normalized_in_both_encodings(
        n in 1u32..=6,
        kf in 0.0f64..=1.0,
    ) {
        let k = (kf * n as f64) as u32;
        let k = k.min(n);
        let tagged = dicke_reference::<Exact>(n, k, DickeEncoding::InternalTag).unwrap();
        prop_assert_eq!(tagged.norm_sqr().unwrap(), Exact::one());
        let rails = dicke_reference::<Exact>(n, k, DickeEncoding::DualRail).unwrap();
        prop_assert_eq!(rails.norm_sqr().unwrap(), Exact::one());
        prop_assert_eq!(dual_rail_dicke_fidelity(&rails, n, k).unwrap(), Exact::one());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    // Heavier exact arithmetic: 60 cases over the (n, k) grid with n up
    // to 4 complements the 1000-case fixed-size property above.
    #[test]
    fn exact_circuit_unitary_across_sizes(
        n in 2u32..=4,
        kf in 0.0f64..1.0,
        p in 1u64..=5,
        q in 6u64..=9,
    ) {
        let k = 1 + (kf * (n - 1) as f64) as u32;
        let k = k.min(n - 1);
        let alpha = Exact::sqrt_ratio(p, q * k as u64);
        let beta = Exact::sqrt_ratio(q - p, q);
        let c = compile::<Exact>(n, k, &alpha, &beta).unwrap();
        prop_assert!(is_unitary_exact(&circuit_unitary(&c)));
    }
}

#[test]
fn fixed_multiport_matrices_are_unitary() {
    assert!(is_unitary_exact(&beamsplitter_matrix::<Exact>()));
    for d in [2u32, 3, 4, 6, 8, 12, 24] {
        assert!(is_unitary_exact(&dft_matrix::<Exact>(d).unwrap()));
    }
}
