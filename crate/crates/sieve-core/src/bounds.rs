//! ν and the integer bound: assembling J-values into
//! ν = (J₀ − r2·k(k−1)·Σ_{r=1}^h J_r)/J and r_k = ⌊ν + k/r1⌋, the
//! reference-table reproduction, an h sweep, and a Nelder–Mead search
//! over polynomial coefficients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::forms::NormalizedTuple;
use crate::jint::{compute_jreport, JReport, JintError, McConfig, SieveParams};
use crate::poly::{PolyError, SievePoly};

pub const DEFAULT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum BoundError {
    #[error("J-integral error: {0}")]
    Jint(#[from] JintError),
    #[error("polynomial error: {0}")]
    Poly(#[from] PolyError),
    #[error("the zero polynomial has no bound (J = 0)")]
    ZeroPolynomial,
    #[error(
        "Monte-Carlo noise too large to determine the floor: bound {bound_real:.6} with sigma {sigma:.3e}"
    )]
    IndeterminateFloor { bound_real: f64, sigma: f64 },
    #[error("tuple has k = {tuple_k} but params say k = {params_k}")]
    KMismatch { tuple_k: usize, params_k: usize },
    #[error("all {0} optimizer restarts failed")]
    AllRestartsFailed(usize),
}

#[derive(Debug, Clone)]
pub struct BoundReport {
    pub params: SieveParams,
    pub poly: SievePoly,
    pub jreport: JReport,
    pub nu: f64,
    pub bound_real: f64,
    pub r_k: i64,
    /// frac(bound_real) within 10·tolerance + 3·sigma of an integer step.
    pub boundary_warning: bool,
    /// Standard error of bound_real inherited from Monte-Carlo J_r terms;
    /// zero on the fully deterministic h ≤ 3 path.
    pub sigma: f64,
}

/// Sum of the J_r terms entering ν for this h, with the variance of the
/// Monte-Carlo members.
fn jr_sum(report: &JReport, h: usize) -> (f64, f64) {
    let mut sum = 0.0;
    if h >= 1 {
        sum += report.j1;
    }
    if h >= 2 {
        sum += report.j2.total;
    }
    if h >= 3 {
        sum += report.j3.total;
    }
    let mut var = 0.0;
    for est in &report.jr_extra {
        if est.r <= h {
            sum += est.value;
            var += est.stderr * est.stderr;
        }
    }
    (sum, var)
}

fn bound_from_report(
    p: &SievePoly,
    params: &SieveParams,
    jreport: JReport,
    tolerance: f64,
) -> Result<BoundReport, BoundError> {
    if jreport.j <= 0.0 {
        return Err(BoundError::ZeroPolynomial);
    }
    let kf = params.k as f64;
    let scale = params.r2 * kf * (kf - 1.0);
    let (sum, var) = jr_sum(&jreport, params.h);
    let nu = (jreport.j0.total - scale * sum) / jreport.j;
    let bound_real = nu + kf / params.r1;
    let sigma = scale * var.sqrt() / jreport.j;
    if sigma > 0.0
        && (bound_real - 3.0 * sigma).floor() != (bound_real + 3.0 * sigma).floor()
    {
        return Err(BoundError::IndeterminateFloor { bound_real, sigma });
    }
    let r_k = bound_real.floor() as i64;
    let frac = bound_real - bound_real.floor();
    let boundary_warning = frac < 10.0 * tolerance + 3.0 * sigma;
    Ok(BoundReport {
        params: *params,
        poly: p.clone(),
        jreport,
        nu,
        bound_real,
        r_k,
        boundary_warning,
        sigma,
    })
}

/// The full pipeline for one polynomial. `mc` is needed only when h ≥ 4.
pub fn compute_bound(
    p: &SievePoly,
    params: &SieveParams,
    mc: Option<&McConfig>,
    tolerance: f64,
) -> Result<BoundReport, BoundError> {
    if p.is_zero() {
        return Err(BoundError::ZeroPolynomial);
    }
    let jreport = compute_jreport(p, params, mc)?;
    bound_from_report(p, params, jreport, tolerance)
}

/// Same, anchored to an admissible tuple: its length must match params.k.
pub fn compute_bound_for_tuple(
    tuple: &NormalizedTuple,
    p: &SievePoly,
    params: &SieveParams,
    mc: Option<&McConfig>,
    tolerance: f64,
) -> Result<BoundReport, BoundError> {
    if tuple.k() != params.k {
        return Err(BoundError::KMismatch { tuple_k: tuple.k(), params_k: params.k });
    }
    compute_bound(p, params, mc, tolerance)
}

/// Reference rows: (k, h, coefficients, published bound on ν + k/r1).
/// The first eight rows use h = 3; the last revisits k = 10 with h = 4
/// and a quadratic, which is what drives the k = 10 entry of the final
/// r_k table.
pub const TABLE3_REFERENCE: [(usize, usize, &[f64], f64); 9] = [
    (3, 3, &[1.0, 14.0], 8.220),
    (4, 3, &[1.0, 22.0], 11.653),
    (5, 3, &[1.0, 33.0], 15.306),
    (6, 3, &[1.0, 10.0, 40.0], 18.936),
    (7, 3, &[1.0, 10.0, 60.0], 22.834),
    (8, 3, &[1.0, 10.0, 80.0], 26.860),
    (9, 3, &[1.0, 30.0, 0.0, 300.0], 30.942),
    (10, 3, &[1.0, 35.0, -10.0, 400.0], 35.158),
    (10, 4, &[1.0, 10.0, 150.0], 34.77),
];

/// r_k values implied by the reference table (k = 3..10; k = 10 via the
/// h = 4 row).
pub const REFERENCE_RK: [(usize, i64); 8] =
    [(3, 8), (4, 11), (5, 15), (6, 18), (7, 22), (8, 26), (9, 30), (10, 34)];

#[derive(Debug, Clone)]
pub struct Table3Row {
    pub k: usize,
    pub h: usize,
    pub coeffs: Vec<f64>,
    pub reference: f64,
    pub report: BoundReport,
}

/// Recomputes every reference row. The r1/r2 fractions are taken from
/// `base`; its k and h fields are ignored (each row carries its own).
/// `mc` feeds the single h = 4 row.
pub fn reproduce_table3(
    base: &SieveParams,
    mc: &McConfig,
    tolerance: f64,
) -> Result<Vec<Table3Row>, BoundError> {
    let rows: Vec<Result<Table3Row, BoundError>> = TABLE3_REFERENCE
        .par_iter()
        .map(|&(k, h, coeffs, reference)| {
            let params = SieveParams::new(k, h, base.r1, base.r2)?;
            let p = SievePoly::new(coeffs.to_vec())?;
            let report = compute_bound(&p, &params, Some(mc), tolerance)?;
            Ok(Table3Row { k, h, coeffs: coeffs.to_vec(), reference, report })
        })
        .collect();
    rows.into_iter().collect()
}

#[derive(Debug, Clone)]
pub struct OptimizationRun {
    pub degree: usize,
    pub restarts: usize,
    pub best: BoundReport,
    /// Best bound_real after each restart, merged in restart order.
    pub trace: Vec<(usize, f64)>,
}

/// Table-3 coefficients as a starting simplex seed, padded or truncated
/// to the requested degree (constant term excluded; it is pinned to 1).
fn seed_tail(k: usize, degree: usize) -> Vec<f64> {
    let row = TABLE3_REFERENCE
        .iter()
        .filter(|r| r.1 == 3)
        .min_by_key(|r| r.0.abs_diff(k))
        .expect("reference table is nonempty");
    let mut tail: Vec<f64> = row.2[1..].to_vec();
    tail.resize(degree, 0.0);
    tail
}

struct Objective<'a> {
    params: SieveParams,
    mc: Option<McConfig>,
    tolerance: f64,
    evals: std::cell::Cell<usize>,
    _marker: std::marker::PhantomData<&'a ()>,
}

impl Objective<'_> {
    fn eval(&self, tail: &[f64]) -> f64 {
        self.evals.set(self.evals.get() + 1);
        let mut coeffs = Vec::with_capacity(tail.len() + 1);
        coeffs.push(1.0);
        coeffs.extend_from_slice(tail);
        let p = match SievePoly::new(coeffs) {
            Ok(p) => p,
            Err(_) => return f64::INFINITY,
        };
        match compute_bound(&p, &self.params, self.mc.as_ref(), self.tolerance) {
            Ok(rep) if rep.bound_real.is_finite() => rep.bound_real,
            _ => f64::INFINITY,
        }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Lexicographic comparison on (objective, coefficient norm).
fn lex_better(fa: f64, na: f64, fb: f64, nb: f64) -> bool {
    fa < fb || (fa == fb && na < nb)
}

/// One Nelder–Mead run. Returns the best (tail, value) pair; value may be
/// infinite when the whole simplex degenerated.
fn nelder_mead(obj: &Objective, start: &[f64], max_iter: usize) -> (Vec<f64>, f64) {
    let n = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.to_vec(), obj.eval(start)));
    for i in 0..n {
        let mut v = start.to_vec();
        let step = if v[i].abs() > 1.0 { 0.15 * v[i].abs() } else { 1.0 };
        v[i] += step;
        let f = obj.eval(&v);
        simplex.push((v, f));
    }
    let sort = |s: &mut Vec<(Vec<f64>, f64)>| {
        s.sort_by(|a, b| {
            a.1.total_cmp(&b.1).then_with(|| norm2(&a.0).total_cmp(&norm2(&b.0)))
        })
    };
    sort(&mut simplex);
    for _ in 0..max_iter {
        if !simplex[0].1.is_finite() {
            break;
        }
        let spread = simplex[n].1 - simplex[0].1;
        if spread.is_finite() && spread < 1e-9 * (1.0 + simplex[0].1.abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|d| simplex[..n].iter().map(|(v, _)| v[d]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let at = |t: f64| -> Vec<f64> {
            (0..n).map(|d| centroid[d] + t * (centroid[d] - worst.0[d])).collect()
        };
        let xr = at(1.0);
        let fr = obj.eval(&xr);
        if fr < simplex[0].1 {
            let xe = at(2.0);
            let fe = obj.eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let xc = at(-0.5);
            let fc = obj.eval(&xc);
            if fc < simplex[n].1 {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    for (x, b) in v.0.iter_mut().zip(&best) {
                        *x = b + 0.5 * (*x - b);
                    }
                    v.1 = obj.eval(&v.0);
                }
            }
        }
        sort(&mut simplex);
    }
    (simplex[0].0.clone(), simplex[0].1)
}

/// Multi-start Nelder–Mead over the non-constant coefficients, constant
/// pinned to 1 (ν is scale invariant). Restart 0 starts from the
/// reference seed unperturbed, so the result never loses to its seed.
/// For h = 4 the objective runs a fixed-seed Monte-Carlo J₄ and the best
/// candidate is re-evaluated at 10× samples for the returned report.
pub fn optimize_poly(
    k: usize,
    degree: usize,
    h: usize,
    base: &SieveParams,
    restarts: usize,
    seed: u64,
    tolerance: f64,
) -> Result<OptimizationRun, BoundError> {
    assert!(degree >= 1, "need at least one free coefficient");
    assert!(restarts >= 1);
    let params = SieveParams::new(k, h, base.r1, base.r2)?;
    let obj_mc =
        if h >= 4 { Some(McConfig { samples: 100_000, seed }) } else { None };
    let seed_coeffs = seed_tail(k, degree);

    let runs: Vec<(Vec<f64>, f64)> = (0..restarts)
        .into_par_iter()
        .map(|ri| {
            let start: Vec<f64> = if ri == 0 {
                seed_coeffs.clone()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(ri as u64);
                seed_coeffs
                    .iter()
                    .map(|&c| {
                        let wobble: f64 = rng.gen_range(-0.5..0.5);
                        if c == 0.0 {
                            wobble * 20.0
                        } else {
                            c * (1.0 + wobble)
                        }
                    })
                    .collect()
            };
            let obj = Objective {
                params,
                mc: obj_mc,
                tolerance,
                evals: std::cell::Cell::new(0),
                _marker: std::marker::PhantomData,
            };
            nelder_mead(&obj, &start, 120)
        })
        .collect();

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut trace = Vec::with_capacity(restarts);
    for (i, (tail, f)) in runs.into_iter().enumerate() {
        let better = match &best {
            None => f.is_finite(),
            Some((btail, bf)) => lex_better(f, norm2(&tail), *bf, norm2(btail)),
        };
        if better {
            best = Some((tail, f));
        }
        if let Some((_, bf)) = &best {
            trace.push((i, *bf));
        }
    }
    let (tail, _) = best.ok_or(BoundError::AllRestartsFailed(restarts))?;

    let mut coeffs = vec![1.0];
    coeffs.extend_from_slice(&tail);
    let p = SievePoly::new(coeffs)?;
    let final_mc = obj_mc.map(|m| McConfig { samples: m.samples * 10, seed: m.seed });
    let best_report = compute_bound(&p, &params, final_mc.as_ref(), tolerance)?;
    Ok(OptimizationRun { degree, restarts, best: best_report, trace })
}

/// Bounds for h = 1, 2, 3 at fixed (k, P); non-increasing in h since
/// every J_r is non-negative.
pub fn h_sweep(
    k: usize,
    p: &SievePoly,
    base: &SieveParams,
    tolerance: f64,
) -> Result<Vec<BoundReport>, BoundError> {
    (1..=3)
        .map(|h| {
            let params = SieveParams::new(k, h, base.r1, base.r2)?;
            compute_bound(p, &params, None, tolerance)
        })
        .collect()
}
