//! Range scanner: factor Π(n) = L₁(n)⋯L_k(n) over [lo, hi] and report
//! the distribution of Ω, the number of prime factors counted with
//! multiplicity.

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::bounds::REFERENCE_RK;
use crate::forms::{is_admissible, KTuple};
use crate::primes::linear_sieve_spf;

#[derive(Debug, Error, PartialEq)]
pub enum ScanError {
    #[error("spf limit {limit} exceeds 2^31; the table would need {required_bytes} bytes")]
    LimitTooLarge { limit: u64, required_bytes: u64 },
    #[error("{n} is outside the factor table range 1..={limit}")]
    OutOfRange { n: u64, limit: u64 },
    #[error("empty range [{lo}, {hi}]")]
    EmptyRange { lo: u64, hi: u64 },
    #[error("form {form_index} is not positive at n = {n}; choose a range that keeps all forms positive")]
    NonPositiveForm { form_index: usize, n: u64 },
    #[error("form {form_index} reaches {value} at n = {n}, beyond the factor table limit {limit}")]
    ValueBeyondTable { form_index: usize, value: u128, n: u64, limit: u64 },
    #[error("tuple is not admissible: every residue mod {p} is covered")]
    NotAdmissible { p: u64 },
    #[error("no reference target for k = {0}; supported k are 3..=10")]
    NoReferenceTarget(usize),
}

/// Smallest-prime-factor table for 1..=limit.
#[derive(Debug)]
pub struct SpfTable {
    limit: u64,
    spf: Vec<u32>,
}

impl SpfTable {
    /// Linear sieve; the 2³¹ cap bounds the table at 8 GiB. Ranges
    /// whose form values exceed the cap must be scanned in pieces with
    /// smaller tables.
    pub fn build(limit: u64) -> Result<Self, ScanError> {
        if limit > 1 << 31 {
            return Err(ScanError::LimitTooLarge { limit, required_bytes: 4 * (limit + 1) });
        }
        Ok(SpfTable { limit, spf: linear_sieve_spf(limit as usize + 1) })
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn spf(&self, n: u64) -> Result<u64, ScanError> {
        if n < 2 || n > self.limit {
            return Err(ScanError::OutOfRange { n, limit: self.limit });
        }
        Ok(self.spf[n as usize] as u64)
    }

    /// Ω(n) with multiplicity; Ω(1) = 0.
    pub fn omega(&self, n: u64) -> Result<u32, ScanError> {
        if n == 0 || n > self.limit {
            return Err(ScanError::OutOfRange { n, limit: self.limit });
        }
        let mut m = n as usize;
        let mut count = 0;
        while m > 1 {
            m /= self.spf[m] as usize;
            count += 1;
        }
        Ok(count)
    }
}

/// Scan outcome over [lo, hi]: the full Ω-histogram, the minimum, the
/// first witnesses attaining it, and how many n meet the target.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub lo: u64,
    pub hi: u64,
    pub target: u32,
    pub histogram: BTreeMap<u32, u64>,
    pub min_omega: u32,
    pub witnesses: Vec<u64>,
    pub target_hits: u64,
}

const MAX_WITNESSES: usize = 10;
const CHUNK: u64 = 1 << 14;

/// Ω(Π(n)) for every n in [lo, hi], computed per form as Σᵢ Ω(Lᵢ(n)).
/// Forms must be positive on the range (checked at lo; they increase)
/// and stay within the factor table at hi.
pub fn scan(
    tuple: &KTuple,
    lo: u64,
    hi: u64,
    target: u32,
    spf: &SpfTable,
) -> Result<ScanReport, ScanError> {
    if hi < lo {
        return Err(ScanError::EmptyRange { lo, hi });
    }
    let forms = tuple.forms();
    for (i, form) in forms.iter().enumerate() {
        if form.eval(lo as i64) <= 0 {
            return Err(ScanError::NonPositiveForm { form_index: i, n: lo });
        }
        let top = form.eval(hi as i64);
        if top > spf.limit as i128 {
            return Err(ScanError::ValueBeyondTable {
                form_index: i,
                value: top as u128,
                n: hi,
                limit: spf.limit,
            });
        }
    }

    struct ChunkStat {
        histogram: BTreeMap<u32, u64>,
        min_omega: u32,
        witnesses: Vec<u64>,
        target_hits: u64,
    }

    let chunk_stats: Vec<ChunkStat> = (lo..=hi)
        .step_by(CHUNK as usize)
        .collect::<Vec<u64>>()
        .into_par_iter()
        .map(|start| {
            let end = hi.min(start + CHUNK - 1);
            let mut stat = ChunkStat {
                histogram: BTreeMap::new(),
                min_omega: u32::MAX,
                witnesses: Vec::new(),
                target_hits: 0,
            };
            for n in start..=end {
                let mut total = 0u32;
                for form in forms {
                    // Positive and within the table by the range checks.
                    total += spf.omega(form.eval(n as i64) as u64).unwrap();
                }
                *stat.histogram.entry(total).or_insert(0) += 1;
                if total <= target {
                    stat.target_hits += 1;
                }
                if total < stat.min_omega {
                    stat.min_omega = total;
                    stat.witnesses.clear();
                }
                if total == stat.min_omega && stat.witnesses.len() < MAX_WITNESSES {
                    stat.witnesses.push(n);
                }
            }
            stat
        })
        .collect();

    // Chunks arrive in range order, so concatenating witness lists of
    // the global minimum keeps witnesses ascending.
    let mut report = ScanReport {
        lo,
        hi,
        target,
        histogram: BTreeMap::new(),
        min_omega: u32::MAX,
        witnesses: Vec::new(),
        target_hits: 0,
    };
    for stat in &chunk_stats {
        for (&omega, &count) in &stat.histogram {
            *report.histogram.entry(omega).or_insert(0) += count;
        }
        report.target_hits += stat.target_hits;
        report.min_omega = report.min_omega.min(stat.min_omega);
    }
    for stat in &chunk_stats {
        if stat.min_omega == report.min_omega {
            for &n in &stat.witnesses {
                if report.witnesses.len() < MAX_WITNESSES {
                    report.witnesses.push(n);
                }
            }
        }
    }
    Ok(report)
}

/// Existence spot-check against the reference targets: admissibility
/// gate, then a scan of [n_lo, 2·n_lo] at the r_k for this k.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoremSample {
    pub k: usize,
    pub target: u32,
    pub hits_positive: bool,
    pub report: ScanReport,
}

pub fn verify_theorem_sample(
    tuple: &KTuple,
    n_lo: u64,
    spf: &SpfTable,
) -> Result<TheoremSample, ScanError> {
    let adm = is_admissible(tuple);
    if !adm.admissible {
        let p = adm
            .profile
            .entries
            .iter()
            .find(|&(&p, &nu)| nu as u64 >= p)
            .map(|(&p, _)| p)
            .unwrap_or(2);
        return Err(ScanError::NotAdmissible { p });
    }
    let k = tuple.k();
    let target = REFERENCE_RK
        .iter()
        .find(|&&(rk_k, _)| rk_k == k)
        .map(|&(_, rk)| rk as u32)
        .ok_or(ScanError::NoReferenceTarget(k))?;
    let report = scan(tuple, n_lo, 2 * n_lo, target, spf)?;
    Ok(TheoremSample { k, target, hits_positive: report.target_hits > 0, report })
}
