//! Segmented sieve of Eratosthenes over odd numbers.

use crate::arith::isqrt;

const SEGMENT_LEN: u64 = 1 << 18;

fn small_primes(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let mut composite = vec![false; limit as usize + 1];
    let mut out = Vec::new();
    for n in 2..=limit {
        if composite[n as usize] {
            continue;
        }
        out.push(n);
        let mut k = n * n;
        while k <= limit {
            composite[k as usize] = true;
            k += n;
        }
    }
    out
}

/// All primes `<= x` in ascending order.
pub fn sieve_primes(x: u64) -> Vec<u64> {
    if x < 2 {
        return Vec::new();
    }
    let root = isqrt(x);
    let base: Vec<u64> = small_primes(root).into_iter().filter(|&p| p > 2).collect();
    let estimate = (x as f64 / (x as f64).ln().max(1.0) * 1.2) as usize + 8;
    let mut primes = Vec::with_capacity(estimate);
    primes.push(2);

    // segment covers odd n in [lo, lo + 2*SEGMENT_LEN); slot i is lo + 2i
    let mut is_composite = vec![false; SEGMENT_LEN as usize];
    let mut lo = 3u64;
    while lo <= x {
        let hi = (lo + 2 * SEGMENT_LEN).min(x + 1);
        let len = ((hi - lo).div_ceil(2)) as usize;
        is_composite[..len].fill(false);
        for &p in &base {
            if p * p >= hi {
                break;
            }
            let mut start = (p * p).max(lo.div_ceil(p) * p);
            if start % 2 == 0 {
                start += p;
            }
            let mut n = start;
            while n < hi {
                is_composite[((n - lo) / 2) as usize] = true;
                n += 2 * p;
            }
        }
        primes.extend(
            is_composite[..len]
                .iter()
                .enumerate()
                .filter(|(_, &c)| !c)
                .map(|(i, _)| lo + 2 * i as u64)
                .filter(|&n| n <= x),
        );
        lo = hi + (hi % 2 == 0) as u64;
    }
    primes
}
