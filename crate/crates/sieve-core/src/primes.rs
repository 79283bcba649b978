//! Prime sieves and factorization helpers shared by the other modules.

/// Primes up to and including `limit`, ascending.
pub fn sieve_primes(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut primes = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            primes.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    primes
}

/// Smallest-prime-factor table for 0..=limit built by a linear sieve.
/// `spf[m]` is the least prime dividing m; entries 0 and 1 are 0.
/// Entries are u32, so `limit` must stay below 2^32.
pub fn linear_sieve_spf(limit: usize) -> Vec<u32> {
    assert!((limit as u128) < (1u128 << 32), "spf table limit exceeds u32");
    let mut spf = vec![0u32; limit + 1];
    let mut primes: Vec<usize> = Vec::new();
    for i in 2..=limit {
        if spf[i] == 0 {
            spf[i] = i as u32;
            primes.push(i);
        }
        for &p in &primes {
            if p > spf[i] as usize || i * p > limit {
                break;
            }
            spf[i * p] = p as u32;
        }
    }
    spf
}

/// Prime factorization of n as ascending (prime, multiplicity) pairs; empty for n ≤ 1.
pub fn factor_u128(n: u128) -> Vec<(u128, u32)> {
    if n <= 1 {
        return Vec::new();
    }
    num_prime::nt_funcs::factorize128(n)
        .into_iter()
        .map(|(p, e)| (p, e as u32))
        .collect()
}

/// Distinct prime divisors of n, ascending; empty for n ≤ 1.
pub fn radical_u128(n: u128) -> Vec<u128> {
    factor_u128(n).into_iter().map(|(p, _)| p).collect()
}
