//! Polynomial calculus: exact coefficient arithmetic, truncated
//! evaluation, and the shifted-difference inner integrals whose squared
//! integrands drive every J-value.

use thiserror::Error;

use crate::quad::gl16;

#[derive(Debug, Error, PartialEq)]
pub enum PolyError {
    #[error("degree {0} exceeds the supported cap of 8")]
    DegreeTooHigh(usize),
    #[error("coefficients must be finite")]
    NonFinite,
    #[error("antiderivative of a degree-8 polynomial would exceed the cap")]
    DegreeOverflow,
    #[error("k = {k} is too small for this integral kind (needs k ≥ {min})")]
    KTooSmall { k: usize, min: usize },
    #[error("shifts must be finite and non-negative")]
    InvalidShift,
}

/// Dense polynomial, ascending coefficients, no degree cap. Crate-internal
/// workhorse; the public `SievePoly` enforces the input cap.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Poly(pub(crate) Vec<f64>);

impl Poly {
    pub(crate) fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Poly(coeffs)
    }

    pub(crate) fn zero() -> Self {
        Poly(Vec::new())
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub(crate) fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.0.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub(crate) fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        let mut v = vec![0.0; n];
        for (i, &c) in self.0.iter().enumerate() {
            v[i] += c;
        }
        for (i, &c) in other.0.iter().enumerate() {
            v[i] += c;
        }
        Poly::new(v)
    }

    pub(crate) fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    pub(crate) fn scale(&self, c: f64) -> Poly {
        Poly::new(self.0.iter().map(|&a| a * c).collect())
    }

    pub(crate) fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut v = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, &a) in self.0.iter().enumerate() {
            for (j, &b) in other.0.iter().enumerate() {
                v[i + j] += a * b;
            }
        }
        Poly::new(v)
    }

    /// Termwise ∫₀^x, constant term 0.
    pub(crate) fn antiderivative(&self) -> Poly {
        let mut v = vec![0.0; self.0.len() + 1];
        for (i, &c) in self.0.iter().enumerate() {
            v[i + 1] = c / (i as f64 + 1.0);
        }
        Poly::new(v)
    }

    pub(crate) fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly::zero();
        }
        Poly::new(self.0.iter().enumerate().skip(1).map(|(i, &c)| c * i as f64).collect())
    }

    /// q(t) = self(c + s·t), by Horner with a linear multiplier.
    pub(crate) fn compose_affine(&self, c: f64, s: f64) -> Poly {
        let mut acc = Poly::zero();
        for &a in self.0.iter().rev() {
            // acc ← acc·(c + s·t) + a
            let mut v = vec![0.0; acc.0.len() + 1];
            for (i, &q) in acc.0.iter().enumerate() {
                v[i] += q * c;
                v[i + 1] += q * s;
            }
            if v.is_empty() {
                v.push(a);
            } else {
                v[0] += a;
            }
            acc = Poly::new(v);
        }
        acc
    }

    /// Multiply by x^e.
    pub(crate) fn mul_xpow(&self, e: usize) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        let mut v = vec![0.0; e];
        v.extend_from_slice(&self.0);
        Poly::new(v)
    }

    /// Exact ∫_lo^hi via the antiderivative.
    pub(crate) fn integral(&self, lo: f64, hi: f64) -> f64 {
        let f = self.antiderivative();
        f.eval(hi) - f.eval(lo)
    }
}

/// Sieve polynomial P: ascending 64-bit coefficients, degree ≤ 8.
#[derive(Debug, Clone, PartialEq)]
pub struct SievePoly {
    raw: Poly,
}

impl SievePoly {
    pub fn new(coeffs: Vec<f64>) -> Result<Self, PolyError> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(PolyError::NonFinite);
        }
        let raw = Poly::new(coeffs);
        if raw.degree() > 8 {
            return Err(PolyError::DegreeTooHigh(raw.degree()));
        }
        Ok(SievePoly { raw })
    }

    pub fn one() -> Self {
        SievePoly { raw: Poly::new(vec![1.0]) }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.raw.0
    }

    pub fn degree(&self) -> usize {
        self.raw.degree()
    }

    pub fn is_zero(&self) -> bool {
        self.raw.is_zero()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.raw.eval(x)
    }

    pub fn scale(&self, c: f64) -> Result<Self, PolyError> {
        SievePoly::new(self.raw.scale(c).0)
    }

    /// The antiderivative as a capped polynomial; degree-8 inputs overflow.
    pub fn antiderivative(&self) -> Result<SievePoly, PolyError> {
        if self.raw.degree() >= 8 && !self.raw.is_zero() {
            return Err(PolyError::DegreeOverflow);
        }
        Ok(SievePoly { raw: self.raw.antiderivative() })
    }

    pub(crate) fn raw(&self) -> &Poly {
        &self.raw
    }
}

/// Exact ∫_lo^hi p(x) dx; lo ≤ hi required.
pub fn definite_integral_exact(p: &SievePoly, lo: f64, hi: f64) -> f64 {
    assert!(lo <= hi, "integration bounds out of order");
    p.raw.integral(lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncMode {
    /// P⁺: P(x) for x ≥ 0, else 0.
    Plus,
    /// P̃⁺: ∫₀^x P for x ≥ 0, else 0.
    TildePlus,
}

/// Half-line truncation of P or of its antiderivative.
#[derive(Debug, Clone)]
pub struct TruncatedPoly {
    body: Poly,
    pub mode: TruncMode,
}

impl TruncatedPoly {
    pub fn new(base: &SievePoly, mode: TruncMode) -> Self {
        let body = match mode {
            TruncMode::Plus => base.raw.clone(),
            TruncMode::TildePlus => base.raw.antiderivative(),
        };
        TruncatedPoly { body, mode }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else {
            self.body.eval(x)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerKind {
    /// Exponent k−1, untruncated base P.
    I0,
    /// Exponent k−2, antiderivative base.
    I1,
}

/// The inner integral ∫₀¹ (Σ_J (−1)^{|J|} F⁺(1−t−Σ_{i∈J} xᵢ))² t^e dt
/// over all subsets J of the shift indices.
#[derive(Debug, Clone)]
pub struct InnerIntegralSpec {
    pub shifts: Vec<f64>,
    pub k: usize,
    pub kind: InnerKind,
}

impl InnerIntegralSpec {
    pub fn exponent(&self) -> Result<usize, PolyError> {
        match self.kind {
            InnerKind::I0 => {
                if self.k < 1 {
                    Err(PolyError::KTooSmall { k: self.k, min: 1 })
                } else {
                    Ok(self.k - 1)
                }
            }
            InnerKind::I1 => {
                if self.k < 2 {
                    Err(PolyError::KTooSmall { k: self.k, min: 2 })
                } else {
                    Ok(self.k - 2)
                }
            }
        }
    }
}

/// Breakpoints closer than this are merged to avoid zero-width pieces.
const BREAKPOINT_MERGE: f64 = 1e-12;

/// Evaluate the specified integral by splitting [0, 1] at every subset-sum
/// crossing 1−t−Σ_J xᵢ = 0; on each piece the integrand is one fixed
/// polynomial, integrated exactly by the 16-point rule (degree ≤ 31).
pub fn inner_integral(spec: &InnerIntegralSpec, p: &SievePoly) -> Result<f64, PolyError> {
    let e = spec.exponent()?;
    if spec.shifts.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(PolyError::InvalidShift);
    }
    let body = match spec.kind {
        InnerKind::I0 => p.raw().clone(),
        InnerKind::I1 => p.raw().antiderivative(),
    };

    // Subset sums with alternating signs; m ≤ ~20 keeps 2^m sane.
    let m = spec.shifts.len();
    assert!(m <= 20, "too many shifts");
    let mut terms: Vec<(f64, f64)> = Vec::with_capacity(1 << m); // (sum, sign)
    for mask in 0u32..(1 << m) {
        let mut s = 0.0;
        for (i, &x) in spec.shifts.iter().enumerate() {
            if mask >> i & 1 == 1 {
                s += x;
            }
        }
        let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        terms.push((s, sign));
    }

    let mut cuts: Vec<f64> = vec![0.0, 1.0];
    for &(s, _) in &terms {
        let c = 1.0 - s;
        if c > BREAKPOINT_MERGE && c < 1.0 - BREAKPOINT_MERGE {
            cuts.push(c);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= BREAKPOINT_MERGE);

    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mid = 0.5 * (lo + hi);
        let active: Vec<(f64, f64)> =
            terms.iter().copied().filter(|&(s, _)| 1.0 - s > mid).collect();
        if active.is_empty() {
            continue;
        }
        let piece = crate::quad::integrate_fixed(
            |t| {
                let mut g = 0.0;
                for &(s, sign) in &active {
                    g += sign * body.eval(1.0 - t - s);
                }
                g * g * t.powi(e as i32)
            },
            lo,
            hi,
            gl16(),
        );
        total += piece;
    }
    Ok(total)
}
