//! Acceptance gate: one test per criterion, each printing a single
//! pass line with the measured numbers (visible under --nocapture).

use std::time::Instant;

use sieve_core::bounds::{compute_bound, REFERENCE_RK, TABLE3_REFERENCE};
use sieve_core::forms::{normalize, singular_series, singular_series_for_radical, KTuple, LinearForm};
use sieve_core::jint::{
    compute_j, compute_j0, compute_j1, compute_j2, compute_j3, compute_jr_generic, McConfig,
    SieveParams,
};
use sieve_core::poly::SievePoly;
use sieve_core::scanner::{scan, SpfTable};
use sieve_core::weights::{
    identity_fuzz, lambda_from_y, s0_identity_check, seeded_y, trend_scan, y_from_lambda,
    SieveContext,
};

const TABLE3_SEED: u64 = 20260815;

fn announce(n: u32, detail: &str) {
    println!("criterion {n:02} PASS: {detail}");
}

fn tuple(pairs: &[(i64, i64)]) -> KTuple {
    KTuple::new(pairs.iter().map(|&(a, b)| LinearForm::new(a, b).unwrap()).collect()).unwrap()
}

fn h3_rows() -> Vec<(usize, Vec<f64>, f64)> {
    TABLE3_REFERENCE
        .iter()
        .filter(|&&(k, h, _, _)| h == 3 && k <= 9)
        .map(|&(k, _, coeffs, reference)| (k, coeffs.to_vec(), reference))
        .collect()
}

#[test]
fn criterion_01_reference_rows_within_tolerance() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (k, coeffs, reference) in h3_rows() {
        let params = SieveParams::defaults(k, 3).unwrap();
        let p = SievePoly::new(coeffs).unwrap();
        let report = compute_bound(&p, &params, None, 1e-6).unwrap();
        let delta = (report.bound_real - reference).abs();
        assert!(delta <= 0.02, "k = {k}: computed {} vs {reference}", report.bound_real);
        worst = worst.max(delta);
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "rows took {elapsed:.1}s, budget 120s");
    announce(1, &format!("seven rows within 0.02 (worst delta {worst:.5}) in {elapsed:.2}s"));
}

#[test]
fn criterion_02_floors_and_k10_monte_carlo() {
    let expected: Vec<i64> = REFERENCE_RK.iter().filter(|r| r.0 <= 9).map(|r| r.1).collect();
    assert_eq!(expected, vec![8, 11, 15, 18, 22, 26, 30]);
    for ((k, coeffs, _), want) in h3_rows().into_iter().zip(&expected) {
        let params = SieveParams::defaults(k, 3).unwrap();
        let p = SievePoly::new(coeffs).unwrap();
        let report = compute_bound(&p, &params, None, 1e-6).unwrap();
        assert_eq!(report.r_k, *want, "floor mismatch at k = {k}");
    }

    // The k = 10 entry comes from the h = 4 run with its Monte-Carlo
    // J_4; the sampling noise is folded into the comparison window.
    let params = SieveParams::defaults(10, 4).unwrap();
    let p = SievePoly::new(vec![1.0, 10.0, 150.0]).unwrap();
    let mc = McConfig { samples: 1_000_000, seed: TABLE3_SEED };
    let report = compute_bound(&p, &params, Some(&mc), 1e-6).unwrap();
    let delta = (report.bound_real - 34.77).abs();
    assert!(
        delta <= 0.05 + 3.0 * report.sigma,
        "k = 10 h = 4: computed {} (sigma {:.2e})",
        report.bound_real,
        report.sigma
    );
    assert_eq!(report.r_k, 34);
    announce(
        2,
        &format!(
            "floors {{8,11,15,18,22,26,30}}; k=10 h=4 gave {:.4} +- {:.1e} -> floor 34",
            report.bound_real, report.sigma
        ),
    );
}

#[test]
fn criterion_03_generic_jr_matches_explicit() {
    let cases: [(usize, &[f64]); 10] = [
        (2, &[1.0, 14.0]),
        (3, &[1.0, 5.0]),
        (3, &[2.0, 0.0, 9.0]),
        (4, &[1.0, 22.0]),
        (5, &[1.0, 0.0, 25.0]),
        (6, &[1.0, -2.0, 30.0]),
        (7, &[3.0, 8.0]),
        (8, &[1.0, 10.0, 80.0]),
        (9, &[1.0, 30.0, 0.0, 300.0]),
        (10, &[1.0, 10.0, 150.0]),
    ];
    let mut worst_pulls = 0.0f64;
    for (i, &(k, coeffs)) in cases.iter().enumerate() {
        let params = SieveParams::defaults(k, 3).unwrap();
        let p = SievePoly::new(coeffs.to_vec()).unwrap();
        let explicit = [
            compute_j1(&p, &params).unwrap(),
            compute_j2(&p, &params).unwrap().total,
            compute_j3(&p, &params).unwrap().total,
        ];
        for (r, want) in (1..=3).zip(explicit) {
            let mc = McConfig { samples: 200_000, seed: 1_000 + i as u64 };
            let est = compute_jr_generic(&p, &params, r, &mc).unwrap();
            let window = 3.0 * est.stderr + 1e-9 * (1.0 + want.abs());
            let diff = (est.value - want).abs();
            assert!(
                diff <= window,
                "case {i} (k = {k}) r = {r}: generic {} vs explicit {want} (3 sigma = {:.2e})",
                est.value,
                3.0 * est.stderr
            );
            if est.stderr > 0.0 {
                worst_pulls = worst_pulls.max(diff / est.stderr);
            }
        }
    }
    announce(3, &format!("30 generic-vs-explicit comparisons within 3 sigma (worst pull {worst_pulls:.2})"));
}

#[test]
fn criterion_04_diagonalization_identity() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut total = 0usize;
    for (k, radical) in [(2usize, vec![2u64]), (3, vec![2, 3])] {
        let ctx = SieveContext::new(60, k, &radical).unwrap();
        let cases = identity_fuzz(&ctx, 25, 4242).unwrap();
        for c in &cases {
            for r in &c.results {
                assert!(
                    r.rel_diff <= 1e-10,
                    "k = {k} case {} delta = {}: direct {} vs diagonal {}",
                    c.case,
                    c.delta,
                    r.direct,
                    r.diagonal
                );
                worst = worst.max(r.rel_diff);
                total += 1;
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "identity cases took {elapsed:.1}s, budget 60s");
    announce(
        4,
        &format!("{total} T comparisons across 50 cases agree (worst rel {worst:.2e}) in {elapsed:.2}s"),
    );
}

#[test]
fn criterion_05_mobius_roundtrip() {
    let ctx = SieveContext::new(100, 3, &[2, 3]).unwrap();
    let mut worst = 0.0f64;
    for seed in [1u64, 2, 3] {
        let y = seeded_y(&ctx, seed);
        let lambda = lambda_from_y(&ctx, &y).unwrap();
        let back = y_from_lambda(&ctx, &lambda).unwrap();
        for (a, b) in y.iter().zip(&back) {
            assert!((a - b).abs() <= 1e-12, "roundtrip moved {a} to {b}");
            worst = worst.max((a - b).abs());
        }
    }
    announce(5, &format!("y -> lambda -> y over three seeds, worst drift {worst:.2e}"));
}

#[test]
fn criterion_06_s0_double_count_identity() {
    let nt = normalize(&tuple(&[(2, 1), (2, 3)])).unwrap();
    let ss = singular_series(&nt, 1_000_000).unwrap().value;
    let p = SievePoly::new(vec![1.0, 14.0]).unwrap();
    let rep = s0_identity_check(&nt, 10_000, 50, &p, ss).unwrap();
    assert!(
        rep.rel_diff <= 1e-9,
        "scan {} vs lattice {} rel {}",
        rep.scan_value,
        rep.lattice_value,
        rep.rel_diff
    );
    announce(6, &format!("scan vs lattice rel diff {:.2e} at N = 10^4, R2 = 50", rep.rel_diff));
}

#[test]
fn criterion_07_analytic_spot_values() {
    let one = SievePoly::one();
    for k in 2..=10 {
        let params = SieveParams::defaults(k, 3).unwrap();
        let j = compute_j(&one, &params);
        assert!((j - 1.0 / k as f64).abs() <= 1e-12, "J(1, {k}) = {j}");
    }
    let expect = std::f64::consts::LN_2 - 0.5;
    for k in [2usize, 3, 7] {
        let params = SieveParams::defaults(k, 3).unwrap();
        let j0 = compute_j0(&one, &params).unwrap();
        assert!((j0.parts[2] - expect).abs() <= 1e-9, "k = {k}: J03 = {}", j0.parts[2]);
    }
    for k in [2usize, 4, 5] {
        let params = SieveParams::defaults(k, 3).unwrap();
        let p = SievePoly::new(vec![1.0, 14.0]).unwrap();
        let j3 = compute_j3(&p, &params).unwrap();
        assert_eq!(j3.parts[0], 0.0, "k = {k}: J31 must vanish at the default fractions");
    }
    announce(7, "J(1,k) = 1/k, J03(1) = ln 2 - 1/2, J31 = 0 all hold");
}

#[test]
fn criterion_08_nu_scale_invariance() {
    let mut worst = 0.0f64;
    for &(k, _, coeffs, _) in TABLE3_REFERENCE.iter().filter(|r| r.1 == 3) {
        let params = SieveParams::defaults(k, 3).unwrap();
        let base = compute_bound(&SievePoly::new(coeffs.to_vec()).unwrap(), &params, None, 1e-6)
            .unwrap()
            .nu;
        for c in [0.1, 7.0, 1000.0] {
            let scaled: Vec<f64> = coeffs.iter().map(|&x| c * x).collect();
            let nu =
                compute_bound(&SievePoly::new(scaled).unwrap(), &params, None, 1e-6).unwrap().nu;
            let rel = (nu - base).abs() / base.abs();
            assert!(rel <= 1e-10, "k = {k}, c = {c}: nu moved from {base} to {nu} (rel {rel:.2e})");
            worst = worst.max(rel);
        }
    }
    announce(8, &format!("nu(cP) = nu(P) for c in {{0.1, 7, 1000}}, worst rel {worst:.2e}"));
}

#[test]
fn criterion_09_singular_series_twin_value() {
    let nt = normalize(&tuple(&[(2, 1), (2, 3)])).unwrap();
    let got = singular_series(&nt, 10_000_000).unwrap();

    // Independent partial Euler product: 4 * prod over odd primes p of
    // (1 - 1/(p-1)^2), algebraically equal to the factor arrangement
    // the library multiplies out, but coded from scratch.
    let limit = 10_000_000usize;
    let mut composite = vec![false; limit + 1];
    let mut oracle = 4.0f64;
    for p in (3..=limit).step_by(2) {
        if !composite[p] {
            let mut m = p * p;
            while m <= limit {
                composite[m] = true;
                m += 2 * p;
            }
            let q = (p - 1) as f64;
            oracle *= 1.0 - 1.0 / (q * q);
        }
    }

    assert!((got.value - 2.64064).abs() <= 1e-3, "value {}", got.value);
    assert!(
        (got.value - oracle).abs() <= 1e-9,
        "library {} vs independent product {oracle}",
        got.value
    );
    announce(
        9,
        &format!("twin-tuple product {} agrees with the independent oracle {oracle:.10}", got.value),
    );
}

#[test]
fn criterion_10_scanner_existence() {
    let spf = SpfTable::build(2 * 10_000 + 8).unwrap();
    let t3 = tuple(&[(1, 0), (1, 2), (1, 6)]);
    let t4 = tuple(&[(1, 0), (1, 2), (1, 6), (1, 8)]);

    let rep3 = scan(&t3, 10_000, 20_000, 8, &spf).unwrap();
    assert!(rep3.target_hits > 0, "no n with Omega <= 8 in [10^4, 2*10^4]");
    let rep4 = scan(&t4, 10_000, 20_000, 11, &spf).unwrap();
    assert!(rep4.target_hits > 0, "no n with Omega <= 11 in [10^4, 2*10^4]");

    let small = scan(&t3, 2, 1_000, 8, &spf).unwrap();
    assert_eq!(small.min_omega, 3);
    assert_eq!(small.witnesses.first(), Some(&5), "witness n = 5 not found");
    announce(
        10,
        &format!(
            "target hits {} (k=3, target 8) and {} (k=4, target 11); witness n = 5 found",
            rep3.target_hits, rep4.target_hits
        ),
    );
}

#[test]
fn criterion_11_trend_gates() {
    let radical = [2u64];
    let ss = singular_series_for_radical(2, &radical, 1_000_000).unwrap().value;
    let p = SievePoly::new(vec![1.0, 14.0]).unwrap();
    let pts = trend_scan(&p, 2, &radical, ss, &[1_000, 1_000_000]).unwrap();
    let (a, b) = (&pts[0], &pts[1]);
    for (name, far, near) in
        [("T ratio", a.t_ratio, b.t_ratio), ("summatory ratio", a.sum_ratio, b.sum_ratio)]
    {
        assert!((0.5..=2.0).contains(&near), "{name} at 10^6 is {near}, outside [0.5, 2]");
        assert!(
            (near - 1.0).abs() < (far - 1.0).abs(),
            "{name} drifted: {far} at 10^3 vs {near} at 10^6"
        );
    }
    // The diagnostics-and-exit-2 side of this check is the CLI's job and
    // is exercised in the sieve-lab test suite.
    announce(
        11,
        &format!(
            "at u = R2 = 10^6: T ratio {:.4} (10^3: {:.4}), summatory ratio {:.4} (10^3: {:.4})",
            b.t_ratio, a.t_ratio, b.sum_ratio, a.sum_ratio
        ),
    );
}
