//! Randomized structural properties: exact algebraic identities the
//! implementation must satisfy for every input, not just the reference
//! rows. Each block states the invariant it pins down.

use std::sync::OnceLock;

use proptest::prelude::*;

use sieve_core::bounds::{compute_bound, TABLE3_REFERENCE};
use sieve_core::forms::{is_admissible, normalize, KTuple, LinearForm};
use sieve_core::jint::{compute_j, compute_j0, compute_j1, compute_j2, compute_j3, SieveParams};
use sieve_core::poly::{
    definite_integral_exact, inner_integral, InnerIntegralSpec, InnerKind, SievePoly,
    TruncMode, TruncatedPoly,
};
use sieve_core::primes::sieve_primes;
use sieve_core::quad::{gl16, integrate_adaptive, integrate_fixed};
use sieve_core::scanner::{scan, SpfTable};
use sieve_core::weights::{
    lambda_from_y, seeded_y, y_from_lambda, ystar_from_y, SieveContext,
};

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-20.0f64..20.0, 1..4)
        .prop_filter("needs a coefficient of real size", |c| {
            c.iter().any(|x| x.abs() > 0.1)
        })
}

fn poly(c: Vec<f64>) -> SievePoly {
    SievePoly::new(c).unwrap()
}

/// Shared factor table: 4e6 covers every product the tests below form.
fn spf() -> &'static SpfTable {
    static TABLE: OnceLock<SpfTable> = OnceLock::new();
    TABLE.get_or_init(|| SpfTable::build(4_000_000).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // J and every part of J0, J2, J3 are integrals of squares against
    // non-negative weights, so scaling P by c multiplies each by c^2
    // and none can go negative. J and J1 are closed forms and compare
    // tightly; the adaptive parts work to a fixed absolute tolerance,
    // so dividing the scale back out amplifies their quadrature error
    // by 1/c^2 and the window folds that in. Real homogeneity bugs are
    // order-one, far above either window.
    #[test]
    fn j_family_scales_quadratically_and_stays_nonnegative(
        c in coeffs(),
        scale in prop_oneof![0.05f64..0.9, 1.1f64..40.0],
        k in 2usize..=8,
    ) {
        let params = SieveParams::defaults(k, 3).unwrap();
        let p = poly(c.clone());
        let q = poly(c.into_iter().map(|x| scale * x).collect());
        let s2 = scale * scale;

        let jp = compute_j(&p, &params);
        let jq = compute_j(&q, &params);
        prop_assert!(jp >= 0.0);
        prop_assert!((jq / s2 - jp).abs() <= 1e-9 * (1.0 + jp.abs()));

        let quad_window = 1e-6 * (1.0 + jp.abs()) + 2e-6 * (1.0 + 1.0 / s2);
        let pairs = [
            (compute_j0(&p, &params).unwrap(), compute_j0(&q, &params).unwrap()),
            (compute_j2(&p, &params).unwrap(), compute_j2(&q, &params).unwrap()),
            (compute_j3(&p, &params).unwrap(), compute_j3(&q, &params).unwrap()),
        ];
        for (a, b) in pairs {
            for (pa, pb) in a.parts.iter().zip(&b.parts) {
                prop_assert!(*pa >= 0.0, "negative part {pa}");
                prop_assert!(
                    (pb / s2 - pa).abs() <= quad_window,
                    "part {pa} rescaled to {}",
                    pb / s2
                );
            }
        }
        let j1p = compute_j1(&p, &params).unwrap();
        let j1q = compute_j1(&q, &params).unwrap();
        prop_assert!(j1p >= 0.0);
        prop_assert!((j1q / s2 - j1p).abs() <= 1e-9 * (1.0 + j1p.abs()));
    }

    // The active-term filtering and per-piece exact rule must agree
    // with adaptive quadrature of the brute truncated evaluation. The
    // truncation steps where some 1-t-sum crosses zero, and a
    // defect-driven integrator is unreliable across a jump, so the
    // reference integrates between those crossings; inside each piece
    // the integrand is smooth and the quadrature is honest.
    #[test]
    fn inner_integral_matches_adaptive_quadrature(
        c in coeffs(),
        shifts in prop::collection::vec(0.0f64..0.6, 0..4),
        k in 2usize..=6,
        star in any::<bool>(),
    ) {
        let p = poly(c);
        let kind = if star { InnerKind::I1 } else { InnerKind::I0 };
        let spec = InnerIntegralSpec { shifts: shifts.clone(), k, kind };
        let e = spec.exponent().unwrap() as i32;
        let direct = inner_integral(&spec, &p).unwrap();

        let mode = if star { TruncMode::TildePlus } else { TruncMode::Plus };
        let trunc = TruncatedPoly::new(&p, mode);
        let m = shifts.len();
        let subset_sum = |mask: u32| {
            shifts
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &x)| x)
                .sum::<f64>()
        };
        let brute = |t: f64| {
            let mut g = 0.0;
            for mask in 0u32..(1 << m) {
                let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                g += sign * trunc.eval(1.0 - t - subset_sum(mask));
            }
            g * g * t.powi(e)
        };
        let mut cuts = vec![0.0, 1.0];
        cuts.extend((0u32..(1 << m)).map(|mask| 1.0 - subset_sum(mask)));
        cuts.retain(|&t| (0.0..=1.0).contains(&t));
        cuts.sort_by(f64::total_cmp);
        let mut reference = 0.0;
        for w in cuts.windows(2) {
            reference += integrate_adaptive(brute, w[0], w[1], 1e-12).value;
        }
        prop_assert!(
            (direct - reference).abs() <= 1e-9 * (1.0 + direct.abs()),
            "breakpoint {} vs adaptive {}",
            direct,
            reference
        );
    }

    // Sixteen Gauss nodes integrate degree <= 31 exactly, so the closed
    // form and the rule must agree on any cubic-or-lower polynomial.
    #[test]
    fn fixed_rule_is_exact_on_polynomials(
        c in prop::collection::vec(-10.0f64..10.0, 1..9),
        a in -3.0f64..3.0,
        width in 0.01f64..4.0,
    ) {
        let p = poly(c);
        let b = a + width;
        let exact = definite_integral_exact(&p, a, b);
        let rule = integrate_fixed(|x| p.eval(x), a, b, gl16());
        prop_assert!((exact - rule).abs() <= 1e-10 * (1.0 + exact.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    // Möbius inversion must be an exact bijection on any support.
    #[test]
    fn mobius_roundtrip_on_random_contexts(
        r2 in 20u64..=80,
        k in 2usize..=4,
        seed in any::<u64>(),
    ) {
        let radical = sieve_primes(k as u64);
        let ctx = SieveContext::new(r2, k, &radical).unwrap();
        let y = seeded_y(&ctx, seed);
        let lambda = lambda_from_y(&ctx, &y).unwrap();
        let back = y_from_lambda(&ctx, &lambda).unwrap();
        for (a, b) in y.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-11, "{a} came back as {b}");
        }
    }

    // The starred transform is a fixed linear map of the y vector.
    #[test]
    fn ystar_is_linear_in_y(
        r2 in 20u64..=60,
        seed in any::<u64>(),
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
    ) {
        let ctx = SieveContext::new(r2, 3, &[2, 3]).unwrap();
        let y = seeded_y(&ctx, seed);
        let z = seeded_y(&ctx, seed.wrapping_add(1));
        let combo: Vec<f64> =
            y.iter().zip(&z).map(|(a, b)| alpha * a + beta * b).collect();
        let lhs = ystar_from_y(&ctx, &combo).unwrap();
        let ys = ystar_from_y(&ctx, &y).unwrap();
        let zs = ystar_from_y(&ctx, &z).unwrap();
        for ((l, a), b) in lhs.iter().zip(&ys).zip(&zs) {
            let want = alpha * a + beta * b;
            prop_assert!((l - want).abs() <= 1e-10 * (1.0 + want.abs()));
        }
    }

    // Omega is completely additive.
    #[test]
    fn omega_is_completely_additive(a in 2u64..=2_000, b in 2u64..=2_000) {
        let t = spf();
        let product = t.omega(a * b).unwrap();
        prop_assert_eq!(product, t.omega(a).unwrap() + t.omega(b).unwrap());
    }

    // Every n in range lands in exactly one histogram bucket, the
    // minimum key is min_omega, and target_hits counts the buckets at
    // or below the target.
    #[test]
    fn scan_histogram_partitions_the_range(
        lo in 2u64..=1_000,
        len in 0u64..500,
        target in 2u32..=8,
    ) {
        let tuple = KTuple::new(vec![
            LinearForm::new(1, 0).unwrap(),
            LinearForm::new(1, 2).unwrap(),
        ])
        .unwrap();
        let hi = lo + len;
        let rep = scan(&tuple, lo, hi, target, spf()).unwrap();
        let total: u64 = rep.histogram.values().sum();
        prop_assert_eq!(total, hi - lo + 1);
        prop_assert_eq!(rep.histogram.keys().next().copied(), Some(rep.min_omega));
        let at_or_below: u64 = rep
            .histogram
            .iter()
            .filter(|(om, _)| **om <= target)
            .map(|(_, c)| c)
            .sum();
        prop_assert_eq!(rep.target_hits, at_or_below);
        prop_assert!(!rep.witnesses.is_empty());
        prop_assert!(rep.witnesses.iter().all(|n| (lo..=hi).contains(n)));
    }

    // Normal form must fold every prime up to k into the coefficient
    // product, keep the forms positive on n >= 1, and report a radical
    // that is consistent with divides_a.
    #[test]
    fn normalization_absorbs_small_primes(
        offsets in prop::collection::btree_set(0i64..=30, 2..=4),
    ) {
        let forms: Vec<LinearForm> =
            offsets.iter().map(|&c| LinearForm::new(1, 2 * c).unwrap()).collect();
        let tuple = KTuple::new(forms).unwrap();
        prop_assume!(is_admissible(&tuple).admissible);
        let nt = normalize(&tuple).unwrap();
        let k = nt.k() as u64;
        for p in sieve_primes(k) {
            prop_assert!(nt.divides_a(p), "prime {p} missing from A");
            prop_assert!(nt.radical().contains(&p));
        }
        for f in nt.tuple().forms() {
            prop_assert!(f.a > 0);
            prop_assert!(f.eval(1) > 0, "form not positive at the range start");
        }
        let mut sorted = nt.radical().to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.as_slice(), nt.radical());
    }
}

// Tightening the quadrature tolerance from 1e-6 to 1e-8 must not move
// any reference bound at the precision the tables print.
#[test]
fn reported_bounds_are_tolerance_stable() {
    for &(k, h, coeffs, _) in TABLE3_REFERENCE.iter().filter(|r| r.1 == 3) {
        let params = SieveParams::defaults(k, h).unwrap();
        let p = SievePoly::new(coeffs.to_vec()).unwrap();
        let coarse = compute_bound(&p, &params, None, 1e-6).unwrap();
        let fine = compute_bound(&p, &params, None, 1e-8).unwrap();
        assert!(
            (coarse.bound_real - fine.bound_real).abs() <= 1e-6,
            "k = {k}: {} vs {}",
            coarse.bound_real,
            fine.bound_real
        );
        assert_eq!(coarse.r_k, fine.r_k);
    }
}
