//! Finite Galois images: GL2(Z/n), Serre-curve subgroups, CM unit groups,
//! and the trace-class densities derived from them.

use std::collections::HashSet;

use num_rational::Ratio;

use crate::arith::{gcd_u64, is_prime, kronecker, prime_divisors, reduce_signed};
use crate::curve::RationalCurve;
use crate::error::{Error, Result};
use crate::table::TraceTable;

/// Largest group order enumerated before giving up.
pub const DEFAULT_BUDGET: u64 = 100_000_000;

/// Images up to this order keep their element list for projection.
const STORE_LIMIT: u64 = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageKind {
    Matrix,
    CmUnits,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Elements {
    /// Row-major `[a, b, c, d]` entries reduced mod the level.
    Matrices(Vec<[u32; 4]>),
    /// `x + y*tau` with `tau = (D + sqrt D)/2`.
    Units { disc: i64, elems: Vec<(u32, u32)> },
    NotStored,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GaloisImage {
    pub level: u64,
    pub kind: ImageKind,
    /// `trace_counts[a]` = number of elements with trace `a` mod `level`.
    pub trace_counts: Vec<u64>,
    pub order: u64,
    pub elements: Elements,
}

impl GaloisImage {
    /// Builds an image from a user-supplied trace-count table.
    pub fn from_trace_counts(level: u64, trace_counts: Vec<u64>, order: u64) -> Result<Self> {
        if level == 0 || trace_counts.len() as u64 != level {
            return Err(Error::pre(
                "trace counts",
                format!("{} residues given for level {level}", trace_counts.len()),
            ));
        }
        let total: u64 = trace_counts.iter().sum();
        if total != order || order == 0 {
            return Err(Error::pre(
                "trace counts",
                format!("counts sum to {total}, declared order {order}"),
            ));
        }
        Ok(GaloisImage {
            level,
            kind: ImageKind::Matrix,
            trace_counts,
            order,
            elements: Elements::NotStored,
        })
    }

    /// The trivial group at level 1.
    pub fn trivial() -> Self {
        GaloisImage {
            level: 1,
            kind: ImageKind::Matrix,
            trace_counts: vec![1],
            order: 1,
            elements: Elements::Matrices(vec![[0; 4]]),
        }
    }

    /// Image of the reduction map to level `q`; needs the element list.
    pub fn project(&self, q: u64) -> Result<GaloisImage> {
        if q == 0 || self.level % q != 0 {
            return Err(Error::Divisibility { q, level: self.level });
        }
        let mut counts = vec![0u64; q as usize];
        let order;
        let elements = match &self.elements {
            Elements::Matrices(ms) => {
                let set: HashSet<[u32; 4]> = ms.iter().map(|m| m.map(|v| (v as u64 % q) as u32)).collect();
                for m in &set {
                    counts[((m[0] + m[3]) as u64 % q) as usize] += 1;
                }
                order = set.len() as u64;
                Elements::Matrices(set.into_iter().collect())
            }
            Elements::Units { disc, elems } => {
                let set: HashSet<(u32, u32)> = elems
                    .iter()
                    .map(|&(x, y)| ((x as u64 % q) as u32, (y as u64 % q) as u32))
                    .collect();
                for &(x, y) in &set {
                    counts[unit_trace(x as u64, y as u64, *disc, q) as usize] += 1;
                }
                order = set.len() as u64;
                Elements::Units {
                    disc: *disc,
                    elems: set.into_iter().collect(),
                }
            }
            Elements::NotStored => {
                return Err(Error::pre("project", "image has no stored element list"));
            }
        };
        Ok(GaloisImage {
            level: q,
            kind: self.kind,
            trace_counts: counts,
            order,
            elements,
        })
    }
}

/// Imaginary quadratic order by its (negative) discriminant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CmOrder {
    pub disc: i64,
}

impl CmOrder {
    pub fn new(disc: i64) -> Result<Self> {
        if disc >= 0 || disc.rem_euclid(4) > 1 {
            return Err(Error::pre("CM order", format!("{disc} is not a negative discriminant")));
        }
        Ok(CmOrder { disc })
    }

    pub fn is_ramified(&self, ell: u64) -> bool {
        self.disc.unsigned_abs() % ell == 0
    }

    /// `+1` when `ell` splits, `-1` when inert.
    pub fn chi(&self, ell: u64) -> Result<i32> {
        if self.is_ramified(ell) {
            return Err(Error::RamifiedPrime { ell, disc: self.disc });
        }
        Ok(kronecker(self.disc, ell))
    }

    pub fn ramified_primes(&self) -> Vec<u64> {
        prime_divisors(self.disc.unsigned_abs())
    }
}

/// `|GL2(Z/nZ)| = n^4 prod_{l | n} (1 - 1/l)(1 - 1/l^2)`.
pub fn gl2_order(n: u64) -> u128 {
    let mut order = (n as u128).pow(4);
    for l in prime_divisors(n) {
        let l = l as u128;
        order = order / (l * l * l) * (l - 1) * (l * l - 1);
    }
    order
}

fn check_budget(level: u64, order: u128, budget: u64) -> Result<()> {
    if order > budget as u128 {
        return Err(Error::LevelTooLarge {
            level,
            order: u64::try_from(order).unwrap_or(u64::MAX),
            budget,
        });
    }
    Ok(())
}

fn unit_table(n: u64) -> Vec<bool> {
    (0..n).map(|k| gcd_u64(k, n) == 1).collect()
}

fn enumerate_matrices(n: u64, order: u128, keep: impl Fn(u64, u64, u64, u64, u64) -> bool) -> GaloisImage {
    let unit = unit_table(n);
    let store = order <= STORE_LIMIT as u128;
    let mut elems = Vec::new();
    let mut counts = vec![0u64; n as usize];
    let mut total = 0u64;
    for a in 0..n {
        for d in 0..n {
            let ad = a * d % n;
            let tr = ((a + d) % n) as usize;
            for b in 0..n {
                for c in 0..n {
                    let det = (ad + n - b * c % n) % n;
                    if !unit[det as usize] || !keep(a, b, c, d, det) {
                        continue;
                    }
                    counts[tr] += 1;
                    total += 1;
                    if store {
                        elems.push([a as u32, b as u32, c as u32, d as u32]);
                    }
                }
            }
        }
    }
    GaloisImage {
        level: n,
        kind: ImageKind::Matrix,
        trace_counts: counts,
        order: total,
        elements: if store { Elements::Matrices(elems) } else { Elements::NotStored },
    }
}

pub fn full_matrix_group(n: u64) -> Result<GaloisImage> {
    full_matrix_group_with_budget(n, DEFAULT_BUDGET)
}

pub fn full_matrix_group_with_budget(n: u64, budget: u64) -> Result<GaloisImage> {
    if n == 0 {
        return Err(Error::pre("full_matrix_group", "level must be >= 1"));
    }
    let order = gl2_order(n);
    check_budget(n, order, budget)?;
    Ok(enumerate_matrices(n, order, |_, _, _, _, _| true))
}

/// Sign of the permutation a matrix over F2 induces on the three nonzero vectors.
pub fn sign_mod2(a: u64, b: u64, c: u64, d: u64) -> i32 {
    let apply = |x: u64, y: u64| ((a * x + b * y) & 1, (c * x + d * y) & 1);
    let index = |v: (u64, u64)| match v {
        (1, 0) => 0,
        (0, 1) => 1,
        (1, 1) => 2,
        _ => unreachable!("invertible matrix fixes only the zero vector"),
    };
    let perm = [index(apply(1, 0)), index(apply(0, 1)), index(apply(1, 1))];
    let inversions = (0..3)
        .flat_map(|i| (i + 1..3).map(move |j| (i, j)))
        .filter(|&(i, j)| perm[i] > perm[j])
        .count();
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Discriminant of `Q(sqrt d)` for a squarefree `d`.
pub fn fundamental_discriminant(d: i64) -> i64 {
    if d.rem_euclid(4) == 1 {
        d
    } else {
        4 * d
    }
}

/// Smallest level at which a Serre curve with discriminant kernel `d` is visible.
pub fn serre_level(d: i64) -> u64 {
    fundamental_discriminant(d).unsigned_abs().max(1) * if d.rem_euclid(4) == 1 { 2 } else { 1 }
}

/// `{g in GL2(Z/n) : sign(g mod 2) = (D/det g)}` with `D` the discriminant of `Q(sqrt d)`.
pub fn serre_image(d: i64, n: u64) -> Result<GaloisImage> {
    serre_image_with_budget(d, n, DEFAULT_BUDGET)
}

pub fn serre_image_with_budget(d: i64, n: u64, budget: u64) -> Result<GaloisImage> {
    if d == 0 {
        return Err(Error::pre("serre_image", "d must be nonzero"));
    }
    let m = serre_level(d);
    if n == 0 || n % m != 0 {
        return Err(Error::pre(
            "serre_image",
            format!("Serre level {m} does not divide n = {n}"),
        ));
    }
    let order = gl2_order(n);
    check_budget(n, order / 2, budget)?;
    let disc = fundamental_discriminant(d);
    let chi: Vec<i32> = (0..n)
        .map(|k| if gcd_u64(k, n) == 1 { kronecker(disc, k) } else { 0 })
        .collect();
    Ok(enumerate_matrices(n, order / 2, |a, b, c, d, det| {
        sign_mod2(a, b, c, d) == chi[det as usize]
    }))
}

/// `tr(x + y tau) = 2x + yD` mod `q`.
fn unit_trace(x: u64, y: u64, disc: i64, q: u64) -> u64 {
    (2 * x % q + y * reduce_signed(disc as i128, q) % q) % q
}

/// `(O/lO)*` for the order `O = Z[tau]`, as multiplication-by-element matrices.
pub fn cm_unit_group(order: &CmOrder, ell: u64) -> Result<GaloisImage> {
    if !is_prime(ell) {
        return Err(Error::NotPrime(ell));
    }
    order.chi(ell)?;
    let d = reduce_signed(order.disc as i128, ell);
    let n_tau = reduce_signed((order.disc as i128 * order.disc as i128 - order.disc as i128) / 4, ell);
    let mut counts = vec![0u64; ell as usize];
    let mut elems = Vec::new();
    for x in 0..ell {
        for y in 0..ell {
            // N(x + y tau) = x^2 + Dxy + N(tau) y^2
            let norm = (x * x % ell + d * x % ell * y % ell + n_tau * y % ell * y % ell) % ell;
            if norm == 0 {
                continue;
            }
            counts[unit_trace(x, y, order.disc, ell) as usize] += 1;
            elems.push((x as u32, y as u32));
        }
    }
    Ok(GaloisImage {
        level: ell,
        kind: ImageKind::CmUnits,
        trace_counts: counts,
        order: elems.len() as u64,
        elements: Elements::Units {
            disc: order.disc,
            elems,
        },
    })
}

/// `|H_E(l)|` for a prime `l` not dividing `m_E`.
pub fn h_order(ell: u64, cm: Option<&CmOrder>) -> Result<u128> {
    let l = ell as u128;
    Ok(match cm {
        None => l * (l - 1) * (l - 1) * (l + 1),
        Some(o) => (l - 1) * (ell as i64 - o.chi(ell)? as i64) as u128,
    })
}

/// `|H_E(l)_r|`, the number of elements of trace `r` mod `l`.
pub fn h_trace_count(ell: u64, r: i64, cm: Option<&CmOrder>) -> Result<u128> {
    let zero = r.rem_euclid(ell as i64) == 0;
    let l = ell as u128;
    Ok(match (cm, zero) {
        (None, true) => l * l * (l - 1),
        (None, false) => l * (l * l - l - 1),
        (Some(o), true) => {
            o.chi(ell)?;
            l - 1
        }
        (Some(o), false) => (ell as i64 - 1 - o.chi(ell)? as i64) as u128,
    })
}

/// `delta_{a,q}`: fraction of the image with trace `a` mod `q`.
pub fn delta_aq(image: &GaloisImage, a: i64, q: u64) -> Result<Ratio<i128>> {
    if q == 0 || image.level % q != 0 {
        return Err(Error::Divisibility { q, level: image.level });
    }
    let target = a.rem_euclid(q as i64) as u64;
    let hits: u64 = image
        .trace_counts
        .iter()
        .enumerate()
        .filter(|(b, _)| *b as u64 % q == target)
        .map(|(_, c)| c)
        .sum();
    Ok(Ratio::new(hits as i128, image.order as i128))
}

/// Density of all primes with `a_p = a mod q`.
///
/// For CM curves the image describes primes split in the CM field, which are
/// half of all primes; the inert half has trace 0.
pub fn prime_density(image: &GaloisImage, cm: bool, a: i64, q: u64) -> Result<Ratio<i128>> {
    let split = delta_aq(image, a, q)?;
    if !cm {
        return Ok(split);
    }
    let atom = Ratio::from_integer((a.rem_euclid(q as i64) == 0) as i128);
    Ok((split + atom) / 2)
}

/// `m_E |G_r| / |G|` for an image at level `m_E`.
pub fn main_factor(image: &GaloisImage, r: i64) -> Ratio<i128> {
    let m = image.level;
    let idx = r.rem_euclid(m as i64) as usize;
    Ratio::new(m as i128 * image.trace_counts[idx] as i128, image.order as i128)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalFactor {
    /// `m_E * hits / sample`, exact.
    pub estimate: Ratio<i128>,
    pub stderr: f64,
    pub hits: u64,
    pub sample: u64,
}

impl EmpiricalFactor {
    pub fn value(&self) -> f64 {
        ratio_to_f64(&self.estimate)
    }
}

pub fn ratio_to_f64(r: &Ratio<i128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Estimates `m_E |G_r| / |G|` from trace frequencies in a table.
///
/// For CM curves the sample is restricted to ordinary primes (`a_p != 0`),
/// which are exactly the primes splitting in the CM field, so the frequency
/// estimates the density inside `Gal(K(E[m_E])/K)` directly.
pub fn empirical_main_factor(table: &TraceTable, m_e: u64, r: i64, cm: bool) -> Result<EmpiricalFactor> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    if m_e == 0 {
        return Err(Error::pre("empirical_main_factor", "m_E must be >= 1"));
    }
    let target = r.rem_euclid(m_e as i64);
    let (hits, sample) = table
        .records
        .iter()
        .filter(|rec| !cm || rec.a != 0)
        .fold((0u64, 0u64), |(h, n), rec| {
            (h + (rec.a.rem_euclid(m_e as i64) == target) as u64, n + 1)
        });
    if sample == 0 {
        return Err(Error::EmptyTable);
    }
    let freq = hits as f64 / sample as f64;
    Ok(EmpiricalFactor {
        estimate: Ratio::new(m_e as i128 * hits as i128, sample as i128),
        stderr: m_e as f64 * (freq * (1.0 - freq) / sample as f64).sqrt(),
        hits,
        sample,
    })
}

/// `(lambda_E, gamma(E, a, q))`.
pub fn lambda_gamma(curve: &RationalCurve, a: i64, q: u64) -> (u32, u32) {
    if curve.cm.is_cm() {
        (2, (a.rem_euclid(q.max(1) as i64) == 0) as u32)
    } else {
        (1, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i128, d: i128) -> Ratio<i128> {
        Ratio::new(n, d)
    }

    #[test]
    fn gl2_small_levels() {
        let g1 = full_matrix_group(1).unwrap();
        assert_eq!((g1.order, g1.trace_counts.clone()), (1, vec![1]));
        let g2 = full_matrix_group(2).unwrap();
        assert_eq!((g2.order, g2.trace_counts.clone()), (6, vec![4, 2]));
        let g5 = full_matrix_group(5).unwrap();
        assert_eq!(g5.order, 480);
        assert_eq!(&g5.trace_counts[..2], &[100, 95]);
        assert_eq!(full_matrix_group(6).unwrap().order, 288);
        assert_eq!(gl2_order(6), 288);
    }

    #[test]
    fn budget_rejects() {
        assert!(matches!(
            full_matrix_group_with_budget(7, 1000),
            Err(Error::LevelTooLarge { level: 7, order: 2016, .. })
        ));
        assert!(matches!(full_matrix_group(1000), Err(Error::LevelTooLarge { .. })));
    }

    #[test]
    fn serre_image_level_six() {
        assert_eq!(serre_level(-3), 6);
        assert_eq!(serre_level(5), 10);
        assert_eq!(serre_level(2), 8);
        assert_eq!(serre_level(-1), 4);
        let g = serre_image(-3, 6).unwrap();
        assert_eq!(g.order, 144);
        assert_eq!(g.trace_counts.iter().sum::<u64>(), 144);
        let mut values: Vec<Ratio<i128>> = (0..6).map(|r| main_factor(&g, r)).collect();
        values.sort();
        values.dedup();
        assert_eq!(values, vec![r(1, 2), r(3, 4), r(9, 8), r(7, 4)]);
        assert!(serre_image(-3, 4).is_err());
    }

    #[test]
    fn sign_is_a_homomorphism() {
        let g = full_matrix_group(2).unwrap();
        let Elements::Matrices(ms) = &g.elements else { panic!() };
        let mul = |x: [u32; 4], y: [u32; 4]| {
            [
                (x[0] * y[0] + x[1] * y[2]) & 1,
                (x[0] * y[1] + x[1] * y[3]) & 1,
                (x[2] * y[0] + x[3] * y[2]) & 1,
                (x[2] * y[1] + x[3] * y[3]) & 1,
            ]
        };
        let s = |m: [u32; 4]| sign_mod2(m[0] as u64, m[1] as u64, m[2] as u64, m[3] as u64);
        for &x in ms {
            for &y in ms {
                assert_eq!(s(mul(x, y)), s(x) * s(y));
            }
        }
        assert_eq!(ms.iter().filter(|m| s(**m) == 1).count(), 3);
    }

    #[test]
    fn delta_examples() {
        let g2 = full_matrix_group(2).unwrap();
        assert_eq!(delta_aq(&g2, 0, 2).unwrap(), r(2, 3));
        assert_eq!(delta_aq(&g2, 0, 1).unwrap(), r(1, 1));
        assert!(matches!(delta_aq(&g2, 0, 3), Err(Error::Divisibility { q: 3, level: 2 })));
        let s = serre_image(-3, 6).unwrap();
        let total: Ratio<i128> = (0..6).map(|a| delta_aq(&s, a, 6).unwrap()).sum();
        assert_eq!(total, r(1, 1));
    }

    #[test]
    fn cm_unit_examples() {
        let gauss = CmOrder::new(-4).unwrap();
        let h5 = cm_unit_group(&gauss, 5).unwrap();
        assert_eq!((h5.order, h5.trace_counts[0], h5.trace_counts[1]), (16, 4, 3));
        let h7 = cm_unit_group(&gauss, 7).unwrap();
        assert_eq!((h7.order, h7.trace_counts[0], h7.trace_counts[1]), (48, 6, 7));
        assert!(matches!(cm_unit_group(&gauss, 2), Err(Error::RamifiedPrime { ell: 2, disc: -4 })));
        let o27 = CmOrder::new(-27).unwrap();
        assert_eq!(o27.chi(2).unwrap(), -1);
        assert_eq!(o27.chi(7).unwrap(), 1);
        assert!(CmOrder::new(-5).is_err());
    }

    #[test]
    fn closed_forms_match_enumeration() {
        for ell in [2u64, 3, 5, 7, 11, 13] {
            let g = full_matrix_group(ell).unwrap();
            assert_eq!(g.order as u128, h_order(ell, None).unwrap());
            for rr in 0..ell as i64 {
                assert_eq!(g.trace_counts[rr as usize] as u128, h_trace_count(ell, rr, None).unwrap());
            }
            for disc in [-3i64, -4, -7, -8, -11, -12, -16, -19, -27, -28, -43, -67, -163] {
                let o = CmOrder::new(disc).unwrap();
                if o.is_ramified(ell) {
                    continue;
                }
                let h = cm_unit_group(&o, ell).unwrap();
                assert_eq!(h.order as u128, h_order(ell, Some(&o)).unwrap(), "D={disc} l={ell}");
                for rr in 0..ell as i64 {
                    assert_eq!(h.trace_counts[rr as usize] as u128, h_trace_count(ell, rr, Some(&o)).unwrap());
                }
            }
        }
    }

    #[test]
    fn projection_consistency() {
        let s = serre_image(-3, 6).unwrap();
        for q in [1u64, 2, 3, 6] {
            let proj = s.project(q).unwrap();
            for a in 0..q as i64 {
                let fibre: Ratio<i128> = (0..6)
                    .filter(|b| b % q as i64 == a)
                    .map(|b| r(s.trace_counts[b as usize] as i128, s.order as i128))
                    .sum();
                assert_eq!(delta_aq(&proj, a, q).unwrap(), fibre);
                assert_eq!(delta_aq(&s, a, q).unwrap(), fibre);
            }
        }
        // the Serre condition is invisible at levels 2 and 3 alone
        assert_eq!(s.project(2).unwrap().order, 6);
        assert_eq!(s.project(3).unwrap().order, 48);
    }

    #[test]
    fn main_factor_averages_to_one() {
        let s = serre_image(-3, 6).unwrap();
        let avg: Ratio<i128> = (0..6).map(|rr| main_factor(&s, rr)).sum::<Ratio<i128>>() / 6;
        assert_eq!(avg, r(1, 1));
        assert_eq!(main_factor(&GaloisImage::trivial(), 17), r(1, 1));
    }

    #[test]
    fn lambda_gamma_cases() {
        let cm = RationalCurve::new("cm", -768108000, 8194304162000).unwrap();
        let plain = RationalCurve::new("serre", 6, -2).unwrap();
        assert_eq!(lambda_gamma(&cm, 0, 5), (2, 1));
        assert_eq!(lambda_gamma(&cm, 3, 5), (2, 0));
        assert_eq!(lambda_gamma(&plain, 0, 5), (1, 0));
    }

    #[test]
    fn trace_counts_validation() {
        assert!(GaloisImage::from_trace_counts(2, vec![4, 2], 6).is_ok());
        assert!(GaloisImage::from_trace_counts(2, vec![4, 2], 7).is_err());
        assert!(GaloisImage::from_trace_counts(3, vec![4, 2], 6).is_err());
    }
}
