//! Frobenius traces `a_E(p) = p + 1 - #E(F_p)`.
//!
//! Two independent routes: a character sum over all `x mod p` (linear in `p`),
//! and baby-step giant-step order finding inside the Hasse interval on the
//! curve and its quadratic twist (roughly `p^{1/4}` group operations).
//! [`frobenius_trace`] switches between them at [`NAIVE_CUTOFF`].

mod point;

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::arith::{isqrt, jacobi, mul_mod};
use crate::curve::ReducedCurve;
use crate::error::{Error, Result};

use point::{CurveFp, Point};

/// Largest prime handled by the character sum in [`frobenius_trace`].
pub const NAIVE_CUTOFF: u64 = 1 << 17;

/// Smallest prime for which [`trace_bsgs`] is defined.
pub const BSGS_MIN_PRIME: u64 = 230;

/// Number of curve/twist point pairs tried before falling back to the character sum.
const BSGS_ROUNDS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TraceRecord {
    pub p: u64,
    pub a: i64,
}

/// `a^2 <= 4p`.
pub fn hasse_check(record: TraceRecord) -> bool {
    let a2 = (record.a as i128) * (record.a as i128);
    a2 <= 4 * record.p as i128
}

/// Quadratic character table mod `p`: entry `v` is the Legendre symbol `(v/p)`.
fn residue_table(p: u64) -> Vec<i8> {
    let mut chi = vec![-1i8; p as usize];
    chi[0] = 0;
    let mut sq = 0u64;
    // (y+1)^2 = y^2 + 2y + 1
    for y in 0..p.div_ceil(2) {
        if y > 0 {
            chi[sq as usize] = 1;
        }
        sq += 2 * y + 1;
        while sq >= p {
            sq -= p;
        }
    }
    chi
}

/// `a_E(p) = -sum_x chi_p(x^3 + ax + b)`.
pub fn trace_naive(curve: &ReducedCurve) -> Result<i64> {
    let p = curve.p;
    if p < 5 {
        return Err(Error::pre("trace_naive", format!("p = {p} < 5")));
    }
    if p > u32::MAX as u64 {
        return Err(Error::pre("trace_naive", format!("p = {p} too large for a residue table")));
    }
    let chi = residue_table(p);
    let step = |v: u64, d: u64| {
        let s = v + d;
        if s >= p {
            s - p
        } else {
            s
        }
    };
    // f(x) = x^3 + ax + b advanced by forward differences:
    // d1(x) = 3x^2 + 3x + 1 + a, d2(x) = 6x + 6, d3 = 6.
    let mut f = curve.b_mod;
    let mut d1 = (1 + curve.a_mod) % p;
    let mut d2 = 6 % p;
    let d3 = 6 % p;
    let mut sum: i64 = 0;
    for _ in 0..p {
        sum += chi[f as usize] as i64;
        f = step(f, d1);
        d1 = step(d1, d2);
        d2 = step(d2, d3);
    }
    Ok(-sum)
}

/// All `k` in `[-w, w]` with `k * pt == target`.
fn hasse_candidates(e: &CurveFp, pt: Point, target: Point, w: i64) -> Vec<i64> {
    let m = ((2 * w + 1) as f64).sqrt().ceil() as i64;
    let mut baby: HashMap<u64, (i64, u64)> = HashMap::with_capacity(m as usize);
    let mut small_order = false;
    let mut cur = Point::Infinity;
    for j in 1..=m {
        cur = e.add(cur, pt);
        match cur {
            Point::Infinity => {
                small_order = true;
                break;
            }
            Point::Affine(x, y) => {
                if y == 0 || baby.insert(x, (j, y)).is_some() {
                    small_order = true;
                    break;
                }
            }
        }
    }

    if small_order {
        // ord(pt) <= 2m: find it and the discrete log of target directly.
        let mut ord = 0;
        let mut log = None;
        let mut cur = Point::Infinity;
        for k in 0..=(2 * m + 2) {
            if cur == target && log.is_none() {
                log = Some(k);
            }
            if k > 0 && cur == Point::Infinity {
                ord = k;
                break;
            }
            cur = e.add(cur, pt);
        }
        assert!(ord > 0, "small-order branch must find the order");
        let Some(k0) = log.filter(|&k| k < ord) else {
            return Vec::new();
        };
        let first = k0 - ((k0 + w) / ord) * ord;
        return (0..)
            .map(|i| first + i * ord)
            .take_while(|&k| k <= w)
            .filter(|&k| k >= -w)
            .collect();
    }

    let stride = 2 * m + 1;
    let giant = e.mul_scalar(pt, stride as i128);
    let mut center = -w + m;
    let mut r = e.sub(target, e.mul_scalar(pt, center as i128));
    let mut out = Vec::new();
    while center - m <= w {
        match r {
            Point::Infinity => out.push(center),
            Point::Affine(x, y) => {
                if let Some(&(j, yj)) = baby.get(&x) {
                    out.push(if y == yj { center + j } else { center - j });
                }
            }
        }
        r = e.sub(r, giant);
        center += stride;
    }
    out.retain(|k| (-w..=w).contains(k));
    out.sort_unstable();
    out
}

fn random_point<R: Rng>(e: &CurveFp, rng: &mut R) -> Point {
    loop {
        let x = rng.random_range(0..e.p);
        if let Some(pt) = e.lift_x(x) {
            return pt;
        }
    }
}

/// Trace by baby-step giant-step in the Hasse interval, using the quadratic
/// twist to disambiguate. Deterministic for a given reduced curve.
pub fn trace_bsgs(curve: &ReducedCurve) -> Result<i64> {
    let p = curve.p;
    if p < BSGS_MIN_PRIME {
        return Err(Error::pre("trace_bsgs", format!("p = {p} <= 229")));
    }
    let w = isqrt(4 * p) as i64;
    let e = CurveFp {
        p,
        a: curve.a_mod,
        b: curve.b_mod,
    };
    let d = (2..p)
        .find(|&d| jacobi(d as i128, p) == -1)
        .expect("odd prime has a non-residue");
    let d2 = mul_mod(d, d, p);
    let twist = CurveFp {
        p,
        a: mul_mod(curve.a_mod, d2, p),
        b: mul_mod(curve.b_mod, mul_mod(d2, d, p), p),
    };

    let seed = p
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .rotate_left(17)
        ^ curve.a_mod.wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ curve.b_mod;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut alive: Option<Vec<i64>> = None;

    for _ in 0..BSGS_ROUNDS {
        // #E = p + 1 - a, #E' = p + 1 + a
        for (ec, sign) in [(&e, 1i64), (&twist, -1i64)] {
            let pt = random_point(ec, &mut rng);
            let target = ec.mul_scalar(pt, p as i128 + 1);
            let mut cands: Vec<i64> = hasse_candidates(ec, pt, target, w)
                .into_iter()
                .map(|k| sign * k)
                .collect();
            cands.sort_unstable();
            let next = match alive.take() {
                None => cands,
                Some(prev) => prev
                    .into_iter()
                    .filter(|a| cands.binary_search(a).is_ok())
                    .collect(),
            };
            match next.len() {
                1 => return Ok(next[0]),
                0 => return fallback(curve),
                _ => alive = Some(next),
            }
        }
    }
    fallback(curve)
}

fn fallback(curve: &ReducedCurve) -> Result<i64> {
    if curve.p <= u32::MAX as u64 {
        trace_naive(curve)
    } else {
        Err(Error::InternalAmbiguity { p: curve.p })
    }
}

/// `a_E(p)` by the faster applicable route.
pub fn frobenius_trace(curve: &ReducedCurve) -> Result<i64> {
    if curve.p <= NAIVE_CUTOFF {
        trace_naive(curve)
    } else {
        trace_bsgs(curve)
    }
}
