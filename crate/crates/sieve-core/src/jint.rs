//! The J-integral family. Inner x-integrals are exact polynomial
//! integrals; outer y- (and z-) integrals run on the deterministic
//! adaptive driver; J_r for r ≥ 4 is a seeded Monte-Carlo estimate over
//! the ordered-shift region shared with the explicit r ≤ 3 displays.

use std::cell::Cell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::poly::{inner_integral, InnerIntegralSpec, InnerKind, Poly, PolyError, SievePoly};
use crate::quad::{gauss_legendre_rule, integrate_adaptive, integrate_fixed};

#[derive(Debug, Error, PartialEq)]
pub enum JintError {
    #[error("invalid sieve parameters: {0}")]
    InvalidParams(String),
    #[error("{part}: tolerance not reached, achieved {achieved:.3e} (value {value:.12e})")]
    ToleranceNotReached { part: &'static str, achieved: f64, value: f64 },
    #[error("polynomial error: {0}")]
    Poly(#[from] PolyError),
    #[error("Monte-Carlo sample count {got} below the minimum {min}")]
    TooFewSamples { got: u64, min: u64 },
    #[error("non-finite integrand in the r={r} Monte-Carlo domain")]
    NanInIntegrand { r: usize },
    #[error("r must be at least 1")]
    BadR,
}

/// Exponent pair (k, h) plus the two level-of-distribution fractions.
/// ε is fixed at its limit 0 everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SieveParams {
    pub k: usize,
    pub h: usize,
    pub r1: f64,
    pub r2: f64,
}

impl SieveParams {
    /// Full validation: 0 < r2 ≤ r1 and r1 + 2·r2 ≤ 1.
    pub fn new(k: usize, h: usize, r1: f64, r2: f64) -> Result<Self, JintError> {
        let p = SieveParams { k, h, r1, r2 };
        p.validate(true)?;
        Ok(p)
    }

    /// Default fractions r1 = 1/2, r2 = 1/4.
    pub fn defaults(k: usize, h: usize) -> Result<Self, JintError> {
        SieveParams::new(k, h, 0.5, 0.25)
    }

    /// Waives the r1 + 2·r2 ≤ 1 constraint (exploration only; the bound
    /// interpretation requires the full constraint).
    pub fn new_relaxed(k: usize, h: usize, r1: f64, r2: f64) -> Result<Self, JintError> {
        let p = SieveParams { k, h, r1, r2 };
        p.validate(false)?;
        Ok(p)
    }

    fn validate(&self, strict: bool) -> Result<(), JintError> {
        if self.k < 2 {
            return Err(JintError::InvalidParams(format!("k = {} must be at least 2", self.k)));
        }
        if self.h < 1 {
            return Err(JintError::InvalidParams("h must be at least 1".into()));
        }
        if !(self.r2 > 0.0 && self.r2 <= self.r1 && self.r1 <= 1.0) {
            return Err(JintError::InvalidParams(format!(
                "need 0 < r2 <= r1 <= 1, got r1 = {}, r2 = {}",
                self.r1, self.r2
            )));
        }
        if strict && self.r1 + 2.0 * self.r2 > 1.0 + 1e-12 {
            return Err(JintError::InvalidParams(format!(
                "need r1 + 2*r2 <= 1, got {}",
                self.r1 + 2.0 * self.r2
            )));
        }
        Ok(())
    }
}

/// A weighted family total together with its displayed parts.
#[derive(Debug, Clone, PartialEq)]
pub struct JPartsTotal {
    pub total: f64,
    pub parts: Vec<f64>,
}

impl JPartsTotal {
    fn scaled(mut self, c: f64) -> Self {
        self.total *= c;
        for v in &mut self.parts {
            *v *= c;
        }
        self
    }
}

/// Monte-Carlo estimate for one r.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JrEstimate {
    pub r: usize,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JReport {
    pub j: f64,
    pub j0: JPartsTotal,
    pub j1: f64,
    pub j2: JPartsTotal,
    pub j3: JPartsTotal,
    /// Estimates for r = 4..=h when h exceeds the explicit range.
    pub jr_extra: Vec<JrEstimate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
}

pub const MC_MIN_SAMPLES: u64 = 10_000;

/// Outer integrands are swapped for their small-y expansions below this.
const Y_GUARD: f64 = 1e-6;
const TOL_J0: f64 = 1e-7;
const TOL_J2: f64 = 1e-7;
const TOL_J3: f64 = 1e-6;
const TOL_INNER: f64 = 1e-9;
const TOL_FACTOR: f64 = 1e-12;

/// The two one-variable weights and the ordered-shift region used by the
/// generic J_r path.
#[derive(Debug, Clone, Copy)]
pub struct WeightSpec {
    pub r1: f64,
    pub r2: f64,
}

/// The multi-shift weight is written with a support sum whose index does
/// not match its argument list; both readings are available. They agree
/// at j = r, the only case the integrals use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WjIndexReading {
    /// Sum only the j−1 coordinates the weight actually takes.
    SumToJMinus1,
    /// Sum all r−1 coordinates as printed.
    SumToRMinus1,
}

impl WeightSpec {
    pub fn from_params(p: &SieveParams) -> Self {
        WeightSpec { r1: p.r1, r2: p.r2 }
    }

    /// Linear taper on [0, r1/r2].
    pub fn w0(&self, y: f64) -> f64 {
        (self.r1 - self.r2 * y) / self.r1
    }

    /// The multi-shift weight for j ordered coordinates; zero off its
    /// support. `xs` holds all r−1 coordinates in increasing order.
    pub fn wj(&self, j: usize, xs: &[f64], reading: WjIndexReading) -> f64 {
        assert!(j >= 1 && j - 1 <= xs.len());
        if xs.windows(2).any(|w| w[0] >= w[1]) || xs.iter().any(|&x| x <= 0.0) {
            return 0.0;
        }
        let support_sum: f64 = match reading {
            WjIndexReading::SumToJMinus1 => xs[..j - 1].iter().sum(),
            WjIndexReading::SumToRMinus1 => xs.iter().sum(),
        };
        if support_sum >= 1.0 - self.r1 {
            return 0.0;
        }
        let arg_sum: f64 = xs[..j - 1].iter().sum();
        1.0 / self.r1 - 1.0 - arg_sum / self.r1
    }

    /// Ordered-shift region in the ε → 0 limit: 0 < x₁ < … < x_{r−1},
    /// each in [0,1], with Σxᵢ < min(1−r2, 1−x_{r−1}).
    pub fn in_ar(&self, xs: &[f64]) -> bool {
        if xs.is_empty() {
            return true;
        }
        if xs.iter().any(|&x| x <= 0.0 || x > 1.0) {
            return false;
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) {
            return false;
        }
        let sum: f64 = xs.iter().sum();
        let last = *xs.last().unwrap();
        sum < (1.0 - self.r2).min(1.0 - last)
    }
}

fn reflect(body: &Poly, c: f64) -> Poly {
    body.compose_affine(c, -1.0)
}

/// ∫₀¹ P(1−t)² t^{k−1} dt, exactly.
pub fn compute_j(p: &SievePoly, params: &SieveParams) -> f64 {
    let q = reflect(p.raw(), 1.0);
    q.mul(&q).mul_xpow(params.k - 1).integral(0.0, 1.0)
}

fn nonconverged(part: &'static str, r: crate::quad::AdaptiveResult) -> JintError {
    JintError::ToleranceNotReached { part, achieved: r.error_estimate, value: r.value }
}

/// J₀ = J₀₁ + J₀₂ + J₀₃ with the tapered single-shift weight.
pub fn compute_j0(p: &SievePoly, params: &SieveParams) -> Result<JPartsTotal, JintError> {
    compute_j0_tol(p, params, TOL_J0)
}

pub fn compute_j0_tol(
    p: &SievePoly,
    params: &SieveParams,
    tol: f64,
) -> Result<JPartsTotal, JintError> {
    let (k, r1, r2) = (params.k, params.r1, params.r2);
    let kf = k as f64;
    let w = WeightSpec::from_params(params);
    let body = p.raw().clone();
    let q1 = reflect(&body, 1.0); // P(1−x)

    // J01: inner ∫₀^{1−y} (P(1−x)−P(1−x−y))² x^{k−1} dx.
    // Small-y expansion: with a₂ = ∫₀¹P'(1−x)²x^{k−1}dx and
    // b = ∫₀¹P'(1−x)P''(1−x)x^{k−1}dx, the weighted integrand is
    // k·[a₂·y + (−P'(0)² − b − a₂·r2/r1)·y²] + O(y³).
    let dp = body.derivative();
    let ddp = dp.derivative();
    let dp1 = reflect(&dp, 1.0);
    let ddp1 = reflect(&ddp, 1.0);
    let a2 = dp1.mul(&dp1).mul_xpow(k - 1).integral(0.0, 1.0);
    let bco = dp1.mul(&ddp1).mul_xpow(k - 1).integral(0.0, 1.0);
    let dp0sq = dp.eval(0.0) * dp.eval(0.0);
    let j01 = {
        let f = |y: f64| {
            if y < Y_GUARD {
                kf * (a2 * y + (-dp0sq - bco - a2 * r2 / r1) * y * y)
            } else {
                let qy = reflect(&body, 1.0 - y);
                let d = q1.sub(&qy);
                let inner = d.mul(&d).mul_xpow(k - 1).integral(0.0, 1.0 - y);
                kf * w.w0(y) / y * inner
            }
        };
        let r = integrate_adaptive(f, 0.0, 1.0, tol);
        if !r.converged {
            return Err(nonconverged("J01", r));
        }
        r.value
    };

    // J02: inner ∫_{1−y}^1 P(1−x)² x^{k−1} dx via a hoisted
    // antiderivative. Small-y expansion via q(s) = P(s)²(1−s)^{k−1}.
    let integrand02 = q1.mul(&q1).mul_xpow(k - 1);
    let s02 = integrand02.antiderivative();
    let s02_at_1 = s02.eval(1.0);
    let qpoly = {
        let one_minus = Poly::new(vec![1.0, -1.0]);
        let mut pw = Poly::new(vec![1.0]);
        for _ in 0..(k - 1) {
            pw = pw.mul(&one_minus);
        }
        body.mul(&body).mul(&pw)
    };
    let q0 = qpoly.eval(0.0);
    let qd1 = qpoly.derivative().eval(0.0);
    let qd2 = qpoly.derivative().derivative().eval(0.0);
    let j02 = {
        let f = |y: f64| {
            if y < Y_GUARD {
                kf * (q0
                    + (qd1 / 2.0 - q0 * r2 / r1) * y
                    + (qd2 / 6.0 - (r2 / r1) * qd1 / 2.0) * y * y)
            } else {
                kf * w.w0(y) / y * (s02_at_1 - s02.eval(1.0 - y))
            }
        };
        let r = integrate_adaptive(f, 0.0, 1.0, tol);
        if !r.converged {
            return Err(nonconverged("J02", r));
        }
        r.value
    };

    // J03: y-independent inner over [0,1] times the weight factor on
    // [1, r1/r2].
    let j03 = {
        let inner = integrand02.integral(0.0, 1.0);
        let hi = r1 / r2;
        if hi <= 1.0 {
            0.0
        } else {
            let r = integrate_adaptive(|y| w.w0(y) / y, 1.0, hi, TOL_FACTOR);
            if !r.converged {
                return Err(nonconverged("J03", r));
            }
            kf * r.value * inner
        }
    };

    Ok(JPartsTotal { total: j01 + j02 + j03, parts: vec![j01, j02, j03] })
}

/// J₁ = ((1−r1)/r1)·∫₀¹ P̃(1−x)² x^{k−2} dx, exactly.
pub fn compute_j1(p: &SievePoly, params: &SieveParams) -> Result<f64, JintError> {
    let pt = p.raw().antiderivative();
    let q = reflect(&pt, 1.0);
    let inner = q.mul(&q).mul_xpow(params.k - 2).integral(0.0, 1.0);
    Ok((1.0 - params.r1) / params.r1 * inner)
}

fn w2(y: f64, r1: f64, r2: f64) -> f64 {
    (1.0 - r1 - r2 * y) / (r1 * y * (1.0 - r2 * y))
}

/// J₂ = J₂₁ + J₂₂ + J₂₃ with the antiderivative base.
pub fn compute_j2(p: &SievePoly, params: &SieveParams) -> Result<JPartsTotal, JintError> {
    compute_j2_tol(p, params, TOL_J2)
}

pub fn compute_j2_tol(
    p: &SievePoly,
    params: &SieveParams,
    tol: f64,
) -> Result<JPartsTotal, JintError> {
    let (k, r1, r2) = (params.k, params.r1, params.r2);
    let pt = p.raw().antiderivative();
    let q1 = reflect(&pt, 1.0); // P̃(1−x)

    // J21: inner ∫₀^{1−y} (P̃(1−x)−P̃(1−x−y))² x^{k−2} dx.
    // Small-y expansion: with ã₂ = ∫₀¹P(1−x)²x^{k−2}dx and
    // b̃ = ∫₀¹P(1−x)P'(1−x)x^{k−2}dx, the weighted integrand is
    // (1/r1)·[(1−r1)ã₂·y − ((1−r1)(P(0)²+b̃) + r1·r2·ã₂)·y²] + O(y³).
    let p1 = reflect(p.raw(), 1.0);
    let dp1 = reflect(&p.raw().derivative(), 1.0);
    let a2t = p1.mul(&p1).mul_xpow(k - 2).integral(0.0, 1.0);
    let bt = p1.mul(&dp1).mul_xpow(k - 2).integral(0.0, 1.0);
    let p0sq = p.eval(0.0) * p.eval(0.0);
    let j21 = {
        let f = |y: f64| {
            if y < Y_GUARD {
                ((1.0 - r1) * a2t * y - ((1.0 - r1) * (p0sq + bt) + r1 * r2 * a2t) * y * y) / r1
            } else {
                let qy = reflect(&pt, 1.0 - y);
                let d = q1.sub(&qy);
                let inner = d.mul(&d).mul_xpow(k - 2).integral(0.0, 1.0 - y);
                w2(y, r1, r2) * inner
            }
        };
        let r = integrate_adaptive(f, 0.0, 1.0, tol);
        if !r.converged {
            return Err(nonconverged("J21", r));
        }
        r.value
    };

    // J22: hoisted antiderivative of P̃(1−x)²x^{k−2}; leading term
    // (1−r1)·P(0)²·y²/(3·r1).
    let integrand22 = q1.mul(&q1).mul_xpow(k - 2);
    let s22 = integrand22.antiderivative();
    let s22_at_1 = s22.eval(1.0);
    let j22 = {
        let f = |y: f64| {
            if y < Y_GUARD {
                (1.0 - r1) * p0sq * y * y / (3.0 * r1)
            } else {
                w2(y, r1, r2) * (s22_at_1 - s22.eval(1.0 - y))
            }
        };
        let r = integrate_adaptive(f, 0.0, 1.0, tol);
        if !r.converged {
            return Err(nonconverged("J22", r));
        }
        r.value
    };

    // J23: y-independent inner hoisted; weight factor on [1, (1−r1)/r2].
    let j23 = {
        let hi = (1.0 - r1) / r2;
        if hi <= 1.0 {
            0.0
        } else {
            let inner = integrand22.integral(0.0, 1.0);
            let r = integrate_adaptive(|y| w2(y, r1, r2), 1.0, hi, TOL_FACTOR);
            if !r.converged {
                return Err(nonconverged("J23", r));
            }
            r.value * inner
        }
    };

    Ok(JPartsTotal { total: j21 + j22 + j23, parts: vec![j21, j22, j23] })
}

fn w3(y: f64, z: f64, r1: f64, r2: f64) -> f64 {
    let s = y + z;
    (1.0 - r1 - r2 * s) / (r1 * y * z * (1.0 - r2 * s))
}

/// Captures the worst inner-z nonconvergence seen under an outer integral.
struct ZFail(Cell<Option<(f64, f64)>>);

impl ZFail {
    fn new() -> Self {
        ZFail(Cell::new(None))
    }

    fn run(&self, f: impl FnMut(f64) -> f64, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let r = integrate_adaptive(f, lo, hi, TOL_INNER);
        if !r.converged && self.0.get().is_none() {
            self.0.set(Some((r.error_estimate, r.value)));
        }
        r.value
    }

    fn check(&self, part: &'static str) -> Result<(), JintError> {
        match self.0.get() {
            Some((achieved, value)) => {
                Err(JintError::ToleranceNotReached { part, achieved, value })
            }
            None => Ok(()),
        }
    }
}

/// J₃ = J₃₁ + … + J₃₈, nested adaptive over (y, z) with exact inner x.
pub fn compute_j3(p: &SievePoly, params: &SieveParams) -> Result<JPartsTotal, JintError> {
    compute_j3_tol(p, params, TOL_J3)
}

// Outer integrands diverge like 1/y at 0; below Y_GUARD the true values
// are O(y²·log y) or smaller, so a linear continuation from Y_GUARD keeps
// the adaptive driver stable and contributes under 1e−11 to the part.
fn run_part(
    name: &'static str,
    lo: f64,
    hi: f64,
    tol: f64,
    guard: bool,
    core: impl Fn(f64) -> f64,
    fail: &ZFail,
) -> Result<f64, JintError> {
    if hi <= lo {
        return Ok(0.0);
    }
    let f = |y: f64| {
        if guard && y < Y_GUARD {
            y / Y_GUARD * core(Y_GUARD)
        } else {
            core(y)
        }
    };
    let r = integrate_adaptive(f, lo, hi, tol);
    fail.check(name)?;
    if !r.converged {
        return Err(nonconverged(name, r));
    }
    Ok(r.value)
}

pub fn compute_j3_tol(
    p: &SievePoly,
    params: &SieveParams,
    tol: f64,
) -> Result<JPartsTotal, JintError> {
    let (k, r1, r2) = (params.k, params.r1, params.r2);
    let pt = p.raw().antiderivative();
    let q1 = reflect(&pt, 1.0);
    let s_plain = q1.mul(&q1).mul_xpow(k - 2).antiderivative();
    let s_plain_1 = s_plain.eval(1.0);
    let cap = (1.0 - r1) / r2;

    // The inner x-integrands are squared shift-differences of P̃ times
    // x^{k−2}: polynomials of degree 2·deg(P̃) + k − 2, so one fixed
    // Gauss rule of sufficient order integrates them exactly. Direct
    // evaluation keeps the error relative to the (nonnegative) value;
    // an antiderivative difference would carry absolute roundoff that
    // the 1/(yz) weight then amplifies without bound near the axes.
    let xrule = {
        let degree = 2 * pt.degree() + k.saturating_sub(2);
        gauss_legendre_rule(16.max(degree / 2 + 1))
    };
    let ptv = |u: f64| pt.eval(u);
    let xk = |x: f64| x.powi(k as i32 - 2);
    let plain2 = |lo: f64, hi: f64| {
        integrate_fixed(
            |x| {
                let d = ptv(1.0 - x);
                d * d * xk(x)
            },
            lo,
            hi,
            &xrule,
        )
    };
    let diff2 = |y: f64, lo: f64, hi: f64| {
        integrate_fixed(
            |x| {
                let d = ptv(1.0 - x) - ptv(1.0 - x - y);
                d * d * xk(x)
            },
            lo,
            hi,
            &xrule,
        )
    };
    let tri2 = |y: f64, z: f64, lo: f64, hi: f64| {
        integrate_fixed(
            |x| {
                let d = ptv(1.0 - x) - ptv(1.0 - x - y) - ptv(1.0 - x - z);
                d * d * xk(x)
            },
            lo,
            hi,
            &xrule,
        )
    };
    let quad2 = |y: f64, z: f64, lo: f64, hi: f64| {
        integrate_fixed(
            |x| {
                let d = ptv(1.0 - x) - ptv(1.0 - x - y) - ptv(1.0 - x - z)
                    + ptv(1.0 - x - y - z);
                d * d * xk(x)
            },
            lo,
            hi,
            &xrule,
        )
    };

    type PartFn<'a> = Box<dyn Fn() -> Result<f64, JintError> + Send + Sync + 'a>;
    let parts: Vec<PartFn> = vec![
        // J31: y ∈ [1, cap/2], z ∈ [y, cap−y], constant inner over [0,1].
        Box::new(|| {
            let fail = ZFail::new();
            let inner = s_plain_1 - s_plain.eval(0.0);
            let core = |y: f64| inner * fail.run(|z| w3(y, z, r1, r2), y, cap - y);
            run_part("J31", 1.0, cap / 2.0, tol, false, core, &fail)
        }),
        // J32: y ∈ [0,1], z ∈ [y, cap−y], inner ∫_{1−y}^1.
        Box::new(|| {
            let fail = ZFail::new();
            let core = |y: f64| {
                let inner = plain2(1.0 - y, 1.0);
                inner * fail.run(|z| w3(y, z, r1, r2), y, cap - y)
            };
            run_part("J32", 0.0, 1.0, tol, true, core, &fail)
        }),
        // J33: y ∈ [0,1], z ∈ [1, cap−y], inner ∫₀^{1−y} of the two-term
        // square.
        Box::new(|| {
            let fail = ZFail::new();
            let core = |y: f64| {
                let inner = diff2(y, 0.0, 1.0 - y);
                inner * fail.run(|z| w3(y, z, r1, r2), 1.0, cap - y)
            };
            run_part("J33", 0.0, 1.0, tol, true, core, &fail)
        }),
        // J34: y ∈ [0,1], z ∈ [y,1], inner ∫_{1−z}^{1−y} of the two-term
        // square.
        Box::new(|| {
            let fail = ZFail::new();
            let core = |y: f64| {
                fail.run(|z| w3(y, z, r1, r2) * diff2(y, 1.0 - z, 1.0 - y), y, 1.0)
            };
            run_part("J34", 0.0, 1.0, tol, true, core, &fail)
        }),
        // J35: y ∈ [1/2,1], z ∈ [y,1], inner ∫₀^{1−z} of the three-term
        // square.
        Box::new(|| {
            let fail = ZFail::new();
            let core = |y: f64| {
                fail.run(|z| w3(y, z, r1, r2) * tri2(y, z, 0.0, 1.0 - z), y, 1.0)
            };
            run_part("J35", 0.5, 1.0, tol, false, core, &fail)
        }),
        // J36: y ∈ [0,1/2], z ∈ [1−y,1], same inner as J35.
        Box::new(|| {
            let fail = ZFail::new();
            let core = |y: f64| {
                fail.run(|z| w3(y, z, r1, r2) * tri2(y, z, 0.0, 1.0 - z), 1.0 - y, 1.0)
            };
            run_part("J36", 0.0, 0.5, tol, true, core, &fail)
        }),
        // J37: y ∈ [0,1/2], z ∈ [y,1−y], inner ∫_{1−y−z}^{1−z}.
        Box::new(|| {
            let fail = ZFail::new();
            let core = |y: f64| {
                fail.run(
                    |z| w3(y, z, r1, r2) * tri2(y, z, 1.0 - y - z, 1.0 - z),
                    y,
                    1.0 - y,
                )
            };
            run_part("J37", 0.0, 0.5, tol, true, core, &fail)
        }),
        // J38: y ∈ [0,1/2], z ∈ [y,1−y], inner ∫₀^{1−y−z} of the
        // four-term square.
        Box::new(|| {
            let fail = ZFail::new();
            let core = |y: f64| {
                fail.run(
                    |z| w3(y, z, r1, r2) * quad2(y, z, 0.0, 1.0 - y - z),
                    y,
                    1.0 - y,
                )
            };
            run_part("J38", 0.0, 0.5, tol, true, core, &fail)
        }),
    ];

    let results: Vec<Result<f64, JintError>> = parts.par_iter().map(|f| f()).collect();
    let mut vals = Vec::with_capacity(8);
    for r in results {
        vals.push(r?);
    }
    let total = vals.iter().sum();
    Ok(JPartsTotal { total, parts: vals })
}

/// Monte-Carlo J_r over the substituted coordinates uᵢ = xᵢ/r2 shared
/// with the explicit displays: integrand
/// (1−r1−r2·Σu)·I₁(u) / (r1·Πuᵢ·(1−r2·Σu)) over the ordered region.
/// r = 1 is deterministic and returns stderr 0.
pub fn compute_jr_generic(
    p: &SievePoly,
    params: &SieveParams,
    r: usize,
    mc: &McConfig,
) -> Result<JrEstimate, JintError> {
    if r == 0 {
        return Err(JintError::BadR);
    }
    if mc.samples < MC_MIN_SAMPLES {
        return Err(JintError::TooFewSamples { got: mc.samples, min: MC_MIN_SAMPLES });
    }
    if r == 1 {
        return Ok(JrEstimate { r: 1, value: compute_j1(p, params)?, stderr: 0.0 });
    }
    let dims = r - 1;
    let (r1, r2) = (params.r1, params.r2);
    let w = WeightSpec::from_params(params);
    // Every coordinate is capped by the weight support Σu < (1−r1)/r2 and
    // the ordered-region constraint Σu + u_max < 1/r2 (so u_max < 1/(2·r2)).
    let u_cap = ((1.0 - r1) / r2).min(0.5 / r2);
    if u_cap <= 0.0 {
        return Ok(JrEstimate { r, value: 0.0, stderr: 0.0 });
    }

    // Density of the sorted iid-uniform vector is (r−1)!/u_cap^{r−1}.
    let volume_factor = {
        let mut v = 1.0;
        for i in 1..=dims {
            v *= u_cap / i as f64;
        }
        v
    };

    const CHUNK: u64 = 1 << 16;
    let n_chunks = mc.samples.div_ceil(CHUNK);
    let chunk_results: Vec<(f64, f64, u64, bool)> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
            rng.set_stream(ci + 1);
            let count = CHUNK.min(mc.samples - ci * CHUNK);
            let mut u = vec![0.0f64; dims];
            let mut x = vec![0.0f64; dims];
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            let mut bad = false;
            for _ in 0..count {
                for ui in u.iter_mut() {
                    *ui = rng.gen::<f64>() * u_cap;
                }
                u.sort_by(f64::total_cmp);
                for (xi, &ui) in x.iter_mut().zip(u.iter()) {
                    *xi = r2 * ui;
                }
                let weight = w.wj(r, &x, WjIndexReading::SumToJMinus1);
                let val = if weight > 0.0 && w.in_ar(&x) {
                    let spec =
                        InnerIntegralSpec { shifts: u.clone(), k: params.k, kind: InnerKind::I1 };
                    let i1 = match inner_integral(&spec, p) {
                        Ok(v) => v,
                        Err(_) => {
                            bad = true;
                            0.0
                        }
                    };
                    let su: f64 = u.iter().sum();
                    let prod: f64 = u.iter().product();
                    (1.0 - r1 - r2 * su) * i1 / (r1 * prod * (1.0 - r2 * su))
                } else {
                    0.0
                };
                if !val.is_finite() {
                    bad = true;
                } else {
                    sum += val;
                    sumsq += val * val;
                }
            }
            (sum, sumsq, count, bad)
        })
        .collect();

    let mut sum = 0.0;
    let mut sumsq = 0.0;
    let mut n = 0u64;
    for (s, s2, c, bad) in chunk_results {
        if bad {
            return Err(JintError::NanInIntegrand { r });
        }
        sum += s;
        sumsq += s2;
        n += c;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let sample_var = (sumsq / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
    let value = volume_factor * mean;
    let stderr = volume_factor * (sample_var / nf).sqrt();
    Ok(JrEstimate { r, value, stderr })
}

/// Everything in one pass: J, the explicit families, and Monte-Carlo
/// extras for r = 4..=h. `mc` is required only when h ≥ 4.
///
/// Every entry is a quadratic form in the coefficients of P, so the
/// polynomial is normalized to unit max-coefficient before integrating
/// and the results are scaled back by the square. This keeps the
/// quadrature tolerances effectively relative, making ratios of report
/// entries invariant under rescaling of P.
pub fn compute_jreport(
    p: &SievePoly,
    params: &SieveParams,
    mc: Option<&McConfig>,
) -> Result<JReport, JintError> {
    let scale = p.coeffs().iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let pn;
    let (p, sq) = if scale > 0.0 && scale != 1.0 {
        let coeffs = p.coeffs().iter().map(|c| c / scale).collect();
        pn = SievePoly::new(coeffs)?;
        (&pn, scale * scale)
    } else {
        (p, 1.0)
    };
    let j = sq * compute_j(p, params);
    let j0 = compute_j0(p, params)?.scaled(sq);
    let j1 = sq * compute_j1(p, params)?;
    let j2 = compute_j2(p, params)?.scaled(sq);
    let j3 = compute_j3(p, params)?.scaled(sq);
    let mut jr_extra = Vec::new();
    for r in 4..=params.h {
        let cfg = mc.ok_or_else(|| {
            JintError::InvalidParams("h >= 4 requires a Monte-Carlo seed and sample count".into())
        })?;
        let e = compute_jr_generic(p, params, r, cfg)?;
        jr_extra.push(JrEstimate { r: e.r, value: sq * e.value, stderr: sq * e.stderr });
    }
    Ok(JReport { j, j0, j1, j2, j3, jr_extra })
}
