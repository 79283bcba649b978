//! Integer linear forms L_i(x) = a_i·x + b_i, tuple admissibility,
//! coefficient normalization, and the singular series.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::primes::{radical_u128, sieve_primes};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormsError {
    #[error("leading coefficient must be positive, got {a}")]
    NonPositiveLeading { a: i64 },
    #[error("tuple must contain at least one form")]
    EmptyTuple,
    #[error("duplicate form {a}n+{b}")]
    DuplicateForm { a: i64, b: i64 },
    #[error("tuple is inadmissible: nu_{p} = {nu} covers every residue")]
    Inadmissible { p: u64, nu: u32 },
    #[error("forms {i} and {j} describe the same line up to scaling (zero determinant)")]
    DegeneratePair { i: usize, j: usize },
    #[error("tuple is not in coefficient normal form: {}", violations.join("; "))]
    NotNormalized { violations: Vec<String> },
    #[error("normalized coefficients exceed the supported 64-bit range")]
    CoefficientOverflow,
    #[error("nonpositive Euler factor at p={p}: input is not a normalized admissible tuple")]
    CorruptSingularFactor { p: u64 },
}

/// One form a·x + b with a ≥ 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinearForm {
    pub a: i64,
    pub b: i64,
}

impl LinearForm {
    pub fn new(a: i64, b: i64) -> Result<Self, FormsError> {
        if a < 1 {
            return Err(FormsError::NonPositiveLeading { a });
        }
        Ok(LinearForm { a, b })
    }

    pub fn eval(&self, n: i64) -> i128 {
        self.a as i128 * n as i128 + self.b as i128
    }

    /// Value of the form at n, reduced mod p.
    fn eval_mod(&self, n: u64, p: u64) -> u64 {
        let a = self.a.rem_euclid(p as i64) as u128;
        let b = self.b.rem_euclid(p as i64) as u128;
        ((a * n as u128 + b) % p as u128) as u64
    }
}

/// A tuple of pairwise distinct forms; k is the length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KTuple {
    forms: Vec<LinearForm>,
}

impl KTuple {
    pub fn new(forms: Vec<LinearForm>) -> Result<Self, FormsError> {
        if forms.is_empty() {
            return Err(FormsError::EmptyTuple);
        }
        let mut seen = forms.clone();
        seen.sort();
        for w in seen.windows(2) {
            if w[0] == w[1] {
                return Err(FormsError::DuplicateForm { a: w[0].a, b: w[0].b });
            }
        }
        Ok(KTuple { forms })
    }

    pub fn k(&self) -> usize {
        self.forms.len()
    }

    pub fn forms(&self) -> &[LinearForm] {
        &self.forms
    }
}

/// Residue-count profile: p ↦ ν_p = #{0 ≤ n < p : Π(n) ≡ 0 mod p}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NuProfile {
    pub entries: BTreeMap<u64, u32>,
}

#[derive(Debug, Clone)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    pub profile: NuProfile,
}

/// Count residues n mod p at which the product of the forms vanishes.
pub fn nu_p(tuple: &KTuple, p: u64) -> u32 {
    let mut count = 0;
    for n in 0..p {
        if tuple.forms.iter().any(|f| f.eval_mod(n, p) == 0) {
            count += 1;
        }
    }
    count
}

/// ν_p < p for every prime p; only p ≤ k can fail, so the profile stops there.
pub fn is_admissible(tuple: &KTuple) -> AdmissibilityReport {
    let k = tuple.k() as u64;
    let mut entries = BTreeMap::new();
    let mut admissible = true;
    for p in sieve_primes(k) {
        let nu = nu_p(tuple, p);
        if nu as u64 >= p {
            admissible = false;
        }
        entries.insert(p, nu);
    }
    AdmissibilityReport { admissible, profile: NuProfile { entries } }
}

#[derive(Debug, Clone)]
pub struct NormalizationReport {
    pub ok: bool,
    pub violations: Vec<String>,
}

fn det(fi: &LinearForm, fj: &LinearForm) -> i128 {
    fi.a as i128 * fj.b as i128 - fj.a as i128 * fi.b as i128
}

/// Check the coefficient normal form: all leading coefficients share one
/// radical, no prime of that radical divides any constant term, and every
/// prime factor of each pairwise determinant divides every leading
/// coefficient. Admissibility is a separate question.
pub fn check_normalized(tuple: &KTuple) -> NormalizationReport {
    let mut violations = Vec::new();
    let forms = tuple.forms();
    let radicals: Vec<Vec<u128>> = forms.iter().map(|f| radical_u128(f.a as u128)).collect();
    for (i, r) in radicals.iter().enumerate().skip(1) {
        if *r != radicals[0] {
            violations.push(format!(
                "leading coefficients {} and {} have different radicals",
                forms[0].a, forms[i].a
            ));
        }
    }
    for r in &radicals {
        for &p in r {
            for f in forms {
                if (f.b.unsigned_abs() as u128).is_multiple_of(p) {
                    violations.push(format!("prime {p} divides both a-coefficients and {}", f.b));
                }
            }
        }
    }
    for i in 0..forms.len() {
        for j in (i + 1)..forms.len() {
            let d = det(&forms[i], &forms[j]);
            if d == 0 {
                violations.push(format!("forms {i} and {j} have zero determinant"));
                continue;
            }
            for p in radical_u128(d.unsigned_abs()) {
                for f in forms {
                    if !(f.a as u128).is_multiple_of(p) {
                        violations.push(format!(
                            "prime {p} of determinant({i},{j}) does not divide {}",
                            f.a
                        ));
                    }
                }
            }
        }
    }
    violations.sort();
    violations.dedup();
    NormalizationReport { ok: violations.is_empty(), violations }
}

/// An admissible tuple in coefficient normal form, with the substitution
/// (M, B) that produced it and A = ∏ a_i.
#[derive(Debug, Clone)]
pub struct NormalizedTuple {
    tuple: KTuple,
    m: u64,
    b_shift: i64,
    big_a: BigUint,
    radical: Vec<u64>,
}

impl NormalizedTuple {
    /// Wrap a tuple that is already admissible and in normal form.
    pub fn from_normal_form(tuple: KTuple, m: u64, b_shift: i64) -> Result<Self, FormsError> {
        let report = check_normalized(&tuple);
        if !report.ok {
            return Err(FormsError::NotNormalized { violations: report.violations });
        }
        let adm = is_admissible(&tuple);
        if !adm.admissible {
            let (&p, &nu) = adm.profile.entries.iter().find(|(&p, &nu)| nu as u64 >= p).unwrap();
            return Err(FormsError::Inadmissible { p, nu });
        }
        let big_a: BigUint = tuple
            .forms()
            .iter()
            .map(|f| BigUint::from(f.a as u64))
            .product();
        let mut radical: Vec<u64> = tuple
            .forms()
            .iter()
            .flat_map(|f| radical_u128(f.a as u128))
            .map(|p| p as u64)
            .collect();
        radical.sort_unstable();
        radical.dedup();
        Ok(NormalizedTuple { tuple, m, b_shift, big_a, radical })
    }

    pub fn tuple(&self) -> &KTuple {
        &self.tuple
    }

    pub fn k(&self) -> usize {
        self.tuple.k()
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn b_shift(&self) -> i64 {
        self.b_shift
    }

    pub fn big_a(&self) -> &BigUint {
        &self.big_a
    }

    /// Distinct primes dividing A, ascending.
    pub fn radical(&self) -> &[u64] {
        &self.radical
    }

    pub fn divides_a(&self, p: u64) -> bool {
        self.radical.binary_search(&p).is_ok()
    }
}

/// Substitute x ↦ Mx + B so the resulting tuple satisfies the normal-form
/// clauses. S collects every prime ≤ k, every prime of a leading
/// coefficient, and every prime of a pairwise determinant; M = ∏_{p∈S} p,
/// and B is the smallest non-negative CRT solution picking, for each p ∈ S,
/// the least residue at which the product of the forms is nonzero mod p.
pub fn normalize(tuple: &KTuple) -> Result<NormalizedTuple, FormsError> {
    for i in 0..tuple.k() {
        for j in (i + 1)..tuple.k() {
            if det(&tuple.forms()[i], &tuple.forms()[j]) == 0 {
                return Err(FormsError::DegeneratePair { i, j });
            }
        }
    }
    let adm = is_admissible(tuple);
    if !adm.admissible {
        let (&p, &nu) = adm.profile.entries.iter().find(|(&p, &nu)| nu as u64 >= p).unwrap();
        return Err(FormsError::Inadmissible { p, nu });
    }
    if check_normalized(tuple).ok {
        return NormalizedTuple::from_normal_form(tuple.clone(), 1, 0);
    }

    let k = tuple.k() as u64;
    let mut s: Vec<BigUint> = sieve_primes(k).into_iter().map(BigUint::from).collect();
    for f in tuple.forms() {
        s.extend(radical_u128(f.a as u128).into_iter().map(BigUint::from));
    }
    for i in 0..tuple.k() {
        for j in (i + 1)..tuple.k() {
            let d = det(&tuple.forms()[i], &tuple.forms()[j]).unsigned_abs();
            s.extend(radical_u128(d).into_iter().map(BigUint::from));
        }
    }
    s.sort();
    s.dedup();

    // Incremental CRT; the smallest admissible residue exists within the
    // first k+1 candidates because the product has at most k roots mod p.
    let mut m = BigUint::one();
    let mut b = BigUint::zero();
    for p in &s {
        let residue = smallest_open_residue(tuple, p);
        // b' ≡ b mod m, b' ≡ residue mod p with gcd(m, p) = 1:
        // b' = b + m·t, t ≡ (residue − b)·m⁻¹ mod p.
        let m_inv = mod_inverse(&(&m % p), p);
        let diff = (((&residue + p) - (&b % p)) % p * m_inv) % p;
        b = &b + &m * diff;
        m = &m * p;
    }

    let m_u64 = m.to_u64().ok_or(FormsError::CoefficientOverflow)?;
    let b_i64 = b.to_i64().ok_or(FormsError::CoefficientOverflow)?;
    let mut new_forms = Vec::with_capacity(tuple.k());
    for f in tuple.forms() {
        let a2 = BigInt::from(f.a) * BigInt::from(m_u64);
        let b2 = BigInt::from(f.a) * BigInt::from(b_i64) + BigInt::from(f.b);
        new_forms.push(LinearForm::new(
            a2.to_i64().ok_or(FormsError::CoefficientOverflow)?,
            b2.to_i64().ok_or(FormsError::CoefficientOverflow)?,
        )?);
    }
    NormalizedTuple::from_normal_form(KTuple::new(new_forms)?, m_u64, b_i64)
}

/// Least n ≥ 0 with Π(n) ≢ 0 mod p, searching candidates 0, 1, 2, …
fn smallest_open_residue(tuple: &KTuple, p: &BigUint) -> BigUint {
    let mut n = BigUint::zero();
    loop {
        let open = tuple.forms().iter().all(|f| {
            let v = BigInt::from(f.a) * BigInt::from(n.clone()) + BigInt::from(f.b);
            !v.mod_floor_big(p).is_zero()
        });
        if open {
            return n;
        }
        n += 1u32;
    }
}

trait ModFloorBig {
    fn mod_floor_big(&self, p: &BigUint) -> BigUint;
}

impl ModFloorBig for BigInt {
    fn mod_floor_big(&self, p: &BigUint) -> BigUint {
        let p = BigInt::from(p.clone());
        let r = ((self % &p) + &p) % &p;
        r.to_biguint().unwrap()
    }
}

/// a⁻¹ mod p for prime p and a ≢ 0, by Fermat.
fn mod_inverse(a: &BigUint, p: &BigUint) -> BigUint {
    a.modpow(&(p - 2u32), p)
}

/// Euler-product value with truncation metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularSeriesValue {
    pub value: f64,
    pub prime_bound: u64,
    pub tail_bound: f64,
}

/// ∏_{p|A} (1−1/p)^{−k} · ∏_{p∤A, p ≤ prime_bound} (1−k/p)(1−1/p)^{−k}.
/// The p | A factor is a finite product taken in full; only the p ∤ A
/// factor is truncated. The log-tail is Σ_{p>bound} O(k²/p²), reported as
/// exp(2k²/bound) − 1.
pub fn singular_series(
    nt: &NormalizedTuple,
    prime_bound: u64,
) -> Result<SingularSeriesValue, FormsError> {
    singular_series_for_radical(nt.k(), nt.radical(), prime_bound)
}

/// Same product for a bare (k, radical) pair; the radical must contain
/// every prime ≤ k or some p ∤ A factor goes non-positive.
pub fn singular_series_for_radical(
    k: usize,
    radical: &[u64],
    prime_bound: u64,
) -> Result<SingularSeriesValue, FormsError> {
    let kf = k as f64;
    let mut value = 1.0f64;
    for &p in radical {
        value *= (1.0 - 1.0 / p as f64).powi(-(k as i32));
    }
    for p in sieve_primes(prime_bound) {
        if radical.contains(&p) {
            continue;
        }
        let f = 1.0 - kf / p as f64;
        if f <= 0.0 {
            return Err(FormsError::CorruptSingularFactor { p });
        }
        // Division keeps the k=1 factor exactly 1.
        value *= f / (1.0 - 1.0 / p as f64).powi(k as i32);
    }
    let tail_bound = (2.0 * kf * kf / prime_bound as f64).exp_m1();
    Ok(SingularSeriesValue { value, prime_bound, tail_bound })
}
