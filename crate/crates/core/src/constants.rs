//! The constants `C_{E,r}`: main factor at level `m_E` times an Euler product
//! over the primes not dividing `m_E`.

use std::f64::consts::PI;

use num_rational::Ratio;

use crate::arith::{gcd_u64, prime_divisors};
use crate::config::CurveConfig;
use crate::error::{Error, Result};
use crate::galois::{empirical_main_factor, h_order, h_trace_count, main_factor, ratio_to_f64, CmOrder, GaloisImage};
use crate::sieve::sieve_primes;
use crate::table::TraceTable;

pub const DEFAULT_CUTOFF: u64 = 1_000_000;

/// Double-double accumulator for long products of factors near 1.
#[derive(Debug, Clone, Copy)]
struct Compensated {
    hi: f64,
    lo: f64,
}

impl Compensated {
    fn one() -> Self {
        Compensated { hi: 1.0, lo: 0.0 }
    }

    fn mul(self, f: f64) -> Self {
        let p = self.hi * f;
        let err = self.hi.mul_add(f, -p);
        let lo = self.lo.mul_add(f, err);
        let hi = p + lo;
        Compensated {
            hi,
            lo: lo - (hi - p),
        }
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// `l |H(l)_r| / |H(l)|` for `l` not dividing `m_E`.
pub fn euler_local(ell: u64, r_divisible: bool, cm: Option<&CmOrder>) -> Result<f64> {
    let l = ell as f64;
    Ok(match cm {
        None if r_divisible => 1.0 + 1.0 / (l * l - 1.0),
        None => 1.0 - 1.0 / ((l - 1.0) * (l * l - 1.0)),
        Some(order) => {
            let chi = order.chi(ell)? as f64;
            if r_divisible {
                1.0 + chi / (l - chi)
            } else {
                1.0 - chi / ((l - 1.0) * (l - chi))
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantValue {
    pub value: f64,
    /// Bound on `|value - C_{E,r}|` from truncating the Euler product.
    pub tail_bound: f64,
}

#[derive(Debug, Clone)]
pub struct ConstantProfile {
    pub m_e: u64,
    /// `phi_E(0)`: `2/pi` without CM, `1/(2 pi)` with CM.
    pub phi0: f64,
    /// `m_E |G_r| / |G|` indexed by `r mod m_E`.
    pub main_factors: Vec<Ratio<i128>>,
    /// Standard errors when the main factors were estimated from data.
    pub main_factor_stderr: Option<Vec<f64>>,
    pub cm: Option<CmOrder>,
    /// Primes `<= cutoff` enter the truncated product.
    pub cutoff: u64,
    /// Relative truncation error bound for `r != 0`.
    pub tail_bound: f64,
    coprime_product: f64,
    zero_product: Option<f64>,
}

impl ConstantProfile {
    pub fn new(m_e: u64, main_factors: Vec<Ratio<i128>>, cm: Option<CmOrder>, cutoff: u64) -> Result<Self> {
        if m_e == 0 || main_factors.len() as u64 != m_e {
            return Err(Error::pre(
                "constant profile",
                format!("{} main factors for m_E = {m_e}", main_factors.len()),
            ));
        }
        if cutoff < 1000 {
            return Err(Error::pre("constant profile", format!("cutoff {cutoff} < 1000")));
        }
        if let Some(order) = &cm {
            if let Some(&l) = order.ramified_primes().iter().find(|&&l| m_e % l != 0) {
                return Err(Error::RamifiedPrime { ell: l, disc: order.disc });
            }
        }
        let mut prod = Compensated::one();
        for ell in sieve_primes(cutoff) {
            if m_e % ell != 0 {
                prod = prod.mul(euler_local(ell, false, cm.as_ref())?);
            }
        }
        let (phi0, tail_bound, zero_product) = match cm {
            // sum_{n > L} 2/(n-1)^2 <= 2/(L-1)
            Some(_) => (1.0 / (2.0 * PI), (2.0 / (cutoff as f64 - 1.0)).exp_m1(), None),
            None => {
                // prod_l l^2/(l^2 - 1) = zeta(2), with the factors at l | m_E removed
                let zero = prime_divisors(m_e)
                    .iter()
                    .fold(PI * PI / 6.0, |acc, &l| acc * (1.0 - 1.0 / (l * l) as f64));
                // 1/((l-1)(l^2-1)) <= 2/l^3 and sum_{n > L} 2/n^3 <= 1/L^2
                let l = cutoff as f64;
                (2.0 / PI, (1.0 / (l * l)).exp_m1(), Some(zero))
            }
        };
        Ok(ConstantProfile {
            m_e,
            phi0,
            main_factors,
            main_factor_stderr: None,
            cm,
            cutoff,
            tail_bound,
            coprime_product: prod.value(),
            zero_product,
        })
    }

    pub fn from_image(image: &GaloisImage, cm: Option<CmOrder>, cutoff: u64) -> Result<Self> {
        let factors = (0..image.level as i64).map(|r| main_factor(image, r)).collect();
        Self::new(image.level, factors, cm, cutoff)
    }

    /// Main factors estimated from trace frequencies, with standard errors.
    pub fn from_table(table: &TraceTable, m_e: u64, cm: Option<CmOrder>, cutoff: u64) -> Result<Self> {
        let est = (0..m_e as i64)
            .map(|r| empirical_main_factor(table, m_e, r, cm.is_some()))
            .collect::<Result<Vec<_>>>()?;
        let mut profile = Self::new(m_e, est.iter().map(|e| e.estimate).collect(), cm, cutoff)?;
        profile.main_factor_stderr = Some(est.iter().map(|e| e.stderr).collect());
        Ok(profile)
    }

    /// Uses the exact image when the config provides one, otherwise the table.
    pub fn from_config(cfg: &CurveConfig, table: Option<&TraceTable>, cutoff: u64) -> Result<Self> {
        match (cfg.exact_image()?, table) {
            (Some(image), _) => Self::from_image(&image, cfg.cm_order, cutoff),
            (None, Some(t)) => Self::from_table(t, cfg.m_e, cfg.cm_order, cutoff),
            (None, None) => Err(Error::pre(
                "constant profile",
                "no exact image configured and no trace table to estimate from",
            )),
        }
    }

    pub fn is_cm(&self) -> bool {
        self.cm.is_some()
    }

    pub fn main_factor(&self, r: i64) -> Ratio<i128> {
        self.main_factors[r.rem_euclid(self.m_e as i64) as usize]
    }

    /// `C_{E,r}` with its truncation error bound.
    pub fn c_er(&self, r: i64) -> Result<ConstantValue> {
        if r == 0 && self.is_cm() {
            return Err(Error::CmZeroTrace);
        }
        let mf = self.main_factor(r);
        if *mf.numer() == 0 {
            return Ok(ConstantValue {
                value: 0.0,
                tail_bound: 0.0,
            });
        }
        let lead = self.phi0 * ratio_to_f64(&mf);
        if r == 0 {
            let zero = self.zero_product.expect("non-CM profile");
            return Ok(ConstantValue {
                value: lead * zero,
                tail_bound: 0.0,
            });
        }
        let mut prod = Compensated { hi: self.coprime_product, lo: 0.0 };
        for ell in prime_divisors(r.unsigned_abs()) {
            if self.m_e % ell == 0 {
                continue;
            }
            let div = euler_local(ell, true, self.cm.as_ref())?;
            prod = if ell <= self.cutoff {
                prod.mul(div / euler_local(ell, false, self.cm.as_ref())?)
            } else {
                prod.mul(div)
            };
        }
        let value = lead * prod.value();
        Ok(ConstantValue {
            value,
            tail_bound: value.abs() * self.tail_bound,
        })
    }
}

/// `f(r) = prod_{l | r, l not dividing m_E} |H(l)_0| / |H(l)_1|`.
pub fn f_of(r: i64, m_e: u64, cm: Option<&CmOrder>) -> Result<f64> {
    if r == 0 {
        return Err(Error::pre("f_of", "r must be nonzero"));
    }
    let mut f = 1.0;
    for ell in prime_divisors(r.unsigned_abs()) {
        if m_e % ell != 0 {
            f *= h_trace_count(ell, 0, cm)? as f64 / h_trace_count(ell, 1, cm)? as f64;
        }
    }
    Ok(f)
}

/// `g(d) = mu^2(d) prod_{l | d} (|H_0| - |H_1|)/|H_1|` for `gcd(d, m_E) = 1`, else 0.
pub fn g_of(d: u64, m_e: u64, cm: Option<&CmOrder>) -> Result<f64> {
    if d == 0 {
        return Err(Error::pre("g_of", "d must be positive"));
    }
    if gcd_u64(d, m_e) > 1 {
        return Ok(0.0);
    }
    let primes = prime_divisors(d);
    if primes.iter().product::<u64>() != d {
        return Ok(0.0);
    }
    let mut g = 1.0;
    for ell in primes {
        let h0 = h_trace_count(ell, 0, cm)? as f64;
        let h1 = h_trace_count(ell, 1, cm)? as f64;
        g *= (h0 - h1) / h1;
    }
    Ok(g)
}

/// `|C * prod_{l <= L} (1 + g(l)/l) - 1|` with `C = prod_{l <= L, l not dividing m_E} l |H_1| / |H|`.
pub fn verify_c_inverse(profile: &ConstantProfile, cutoff: u64) -> Result<f64> {
    if cutoff < 1000 {
        return Err(Error::pre("verify_C_inverse", format!("cutoff {cutoff} < 1000")));
    }
    let cm = profile.cm.as_ref();
    let mut c = Compensated::one();
    let mut inverse = Compensated::one();
    for ell in sieve_primes(cutoff) {
        if profile.m_e % ell == 0 {
            continue;
        }
        c = c.mul(ell as f64 * h_trace_count(ell, 1, cm)? as f64 / h_order(ell, cm)? as f64);
        inverse = inverse.mul(1.0 + g_of(ell, profile.m_e, cm)? / ell as f64);
    }
    Ok((c.value() * inverse.value() - 1.0).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galois::serre_image;

    fn serre_profile(cutoff: u64) -> ConstantProfile {
        ConstantProfile::from_image(&serre_image(-3, 6).unwrap(), None, cutoff).unwrap()
    }

    fn cm_profile(cutoff: u64) -> ConstantProfile {
        let mf = [0, 2, 1, 0, 1, 2, 0, 2, 1, 0, 1, 2].map(|v| Ratio::from_integer(v as i128));
        ConstantProfile::new(12, mf.to_vec(), Some(CmOrder::new(-27).unwrap()), cutoff).unwrap()
    }

    #[test]
    fn local_factor_examples() {
        assert_eq!(euler_local(5, true, None).unwrap(), 1.0 + 1.0 / 24.0);
        assert_eq!(euler_local(5, false, None).unwrap(), 1.0 - 1.0 / 96.0);
        let gauss = CmOrder::new(-4).unwrap();
        assert!((euler_local(7, false, Some(&gauss)).unwrap() - (1.0 + 1.0 / 48.0)).abs() < 1e-15);
        assert!(euler_local(2, false, Some(&gauss)).is_err());
    }

    #[test]
    fn local_factor_is_trace_fraction() {
        let orders: Vec<CmOrder> = [-3i64, -4, -7, -27].iter().map(|&d| CmOrder::new(d).unwrap()).collect();
        for ell in [5u64, 7, 11, 13, 101, 103] {
            for cm in std::iter::once(None).chain(orders.iter().filter(|o| !o.is_ramified(ell)).map(Some)) {
                for (r, div) in [(0i64, true), (1, false)] {
                    let exact = ell as f64 * h_trace_count(ell, r, cm).unwrap() as f64 / h_order(ell, cm).unwrap() as f64;
                    assert!((euler_local(ell, div, cm).unwrap() - exact).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn zero_main_factor_gives_zero() {
        let p = cm_profile(10_000);
        assert_eq!(p.c_er(3).unwrap().value, 0.0);
        assert_eq!(p.c_er(-30).unwrap().value, 0.0);
        assert!(matches!(p.c_er(0), Err(Error::CmZeroTrace)));
    }

    #[test]
    fn zeta_identity_for_zero_trace() {
        let p = serre_profile(10_000);
        let c0 = p.c_er(0).unwrap().value;
        let mut prod = 1.0;
        for ell in sieve_primes(2_000_000) {
            if ell > 3 {
                prod *= euler_local(ell, true, None).unwrap();
            }
        }
        let direct = p.phi0 * ratio_to_f64(&p.main_factor(0)) * prod;
        assert!((c0 / direct - 1.0).abs() < 1e-6, "{c0} vs {direct}");
    }

    #[test]
    fn depends_on_residue_and_radical() {
        let p = serre_profile(10_000);
        for (r1, r2) in [(5i64, 125), (7, 7 * 49), (35, 35 * 49), (-5, -125)] {
            assert_eq!((r1 - r2) % 6, 0);
            assert_eq!(p.c_er(r1).unwrap().value, p.c_er(r2).unwrap().value);
        }
        assert_eq!(p.c_er(12).unwrap().value, p.c_er(18 * 4).unwrap().value);
    }

    #[test]
    fn truncation_soundness() {
        for (lo, hi) in [(serre_profile(2_000), serre_profile(200_000)), (cm_profile(2_000), cm_profile(200_000))] {
            for r in [1i64, 2, 5, 7, 10, 1001, 9_699_690, 1_000_003] {
                let a = lo.c_er(r).unwrap();
                let b = hi.c_er(r).unwrap();
                assert!((a.value - b.value).abs() <= a.tail_bound + 1e-15, "r={r}");
            }
        }
    }

    #[test]
    fn non_cm_bounded_above_and_below() {
        let p = serre_profile(100_000);
        let values: Vec<f64> = (-10_000..=10_000).map(|r| p.c_er(r).unwrap().value).collect();
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(0.0, f64::max);
        // the Euler product lies in [prod (1 - 1/((l-1)(l^2-1))), zeta(2)] and the main factor in [1/2, 7/4]
        assert!(min > 0.5 * 2.0 / PI * 0.98 && max < 1.75 * 2.0 / PI * PI * PI / 6.0, "{min} {max}");
    }

    #[test]
    fn cm_grows_slowly() {
        let p = cm_profile(100_000);
        let scan: Vec<(i64, f64)> = (1..=10_000)
            .map(|r| (r, p.c_er(r).unwrap().value))
            .filter(|(_, v)| *v > 0.0)
            .collect();
        let ll = |r: i64| ((3.0 + r as f64).ln()).ln();
        let early = |f: &dyn Fn(i64, f64) -> f64| scan.iter().filter(|(r, _)| *r <= 100).map(|&(r, v)| f(r, v)).collect::<Vec<_>>();
        let hi = early(&|r, v| v / ll(r)).into_iter().fold(0.0, f64::max);
        let lo = early(&|r, v| v * ll(r)).into_iter().fold(f64::INFINITY, f64::min);
        for &(r, v) in &scan {
            assert!(v / ll(r) <= 2.0 * hi && v * ll(r) >= 0.5 * lo, "r={r} C={v}");
        }
    }

    #[test]
    fn f_and_g_examples() {
        assert!((g_of(5, 6, None).unwrap() - 1.0 / 19.0).abs() < 1e-16);
        assert_eq!(g_of(6, 6, None).unwrap(), 0.0);
        assert_eq!(g_of(15, 6, None).unwrap(), 0.0);
        assert_eq!(g_of(25, 6, None).unwrap(), 0.0);
        assert_eq!(f_of(1, 6, None).unwrap(), 1.0);
        let (a, b) = (35i64, 11i64);
        let prod = f_of(a, 6, None).unwrap() * f_of(b, 6, None).unwrap();
        assert!((f_of(a * b, 6, None).unwrap() - prod).abs() < 1e-14);
    }

    #[test]
    fn c_inverse_residuals() {
        let non_cm = verify_c_inverse(&serre_profile(1000), 100_000).unwrap();
        assert!(non_cm < 1e-9, "{non_cm}");
        let cm = verify_c_inverse(&cm_profile(1000), 100_000).unwrap();
        assert!(cm < 1e-6, "{cm}");
        assert!(verify_c_inverse(&cm_profile(1000), 200_000).unwrap() <= cm.max(1e-12));
    }

    #[test]
    fn ramified_prime_must_divide_level() {
        let mf = vec![Ratio::from_integer(1); 4];
        assert!(matches!(
            ConstantProfile::new(4, mf, Some(CmOrder::new(-27).unwrap()), 1000),
            Err(Error::RamifiedPrime { ell: 3, .. })
        ));
    }
}
