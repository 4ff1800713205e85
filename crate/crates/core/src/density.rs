//! Sato-Tate and Deuring densities and the main term `F_{E,r}(x)`.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::quad::integrate;

pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityModel {
    /// Semicircle `(2/pi) sqrt(1 - z^2)`.
    NonCm,
    /// Half an arcsine law, `1/(2 pi sqrt(1 - z^2))`; the other half is the atom at 0.
    Cm,
}

impl DensityModel {
    pub fn for_cm(cm: bool) -> Self {
        if cm {
            DensityModel::Cm
        } else {
            DensityModel::NonCm
        }
    }

    /// `phi_E(z)` on `(-1, 1)`.
    pub fn phi(self, z: f64) -> f64 {
        match self {
            DensityModel::NonCm => 2.0 / PI * (1.0 - z * z).max(0.0).sqrt(),
            DensityModel::Cm => 1.0 / (2.0 * PI * (1.0 - z * z).sqrt()),
        }
    }

    pub fn phi0(self) -> f64 {
        match self {
            DensityModel::NonCm => 2.0 / PI,
            DensityModel::Cm => 1.0 / (2.0 * PI),
        }
    }

    /// `Phi_E(z) = phi_E(z) / phi_E(0)`.
    pub fn big_phi(self, z: f64) -> f64 {
        match self {
            DensityModel::NonCm => (1.0 - z * z).max(0.0).sqrt(),
            DensityModel::Cm => 1.0 / (1.0 - z * z).sqrt(),
        }
    }

    /// Total mass of `phi_E` on `[-1, 1]`.
    pub fn mass(self) -> f64 {
        match self {
            DensityModel::NonCm => 1.0,
            DensityModel::Cm => 0.5,
        }
    }
}

/// `int_alpha^beta phi_E(z) dz` in closed form.
pub fn phi_integral(model: DensityModel, alpha: f64, beta: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&alpha) || !(-1.0..=1.0).contains(&beta) || alpha > beta {
        return Err(Error::Domain(format!("need -1 <= alpha <= beta <= 1, got [{alpha}, {beta}]")));
    }
    let arc = beta.asin() - alpha.asin();
    Ok(match model {
        DensityModel::NonCm => {
            let edge = |z: f64| z * (1.0 - z * z).sqrt();
            (arc + edge(beta) - edge(alpha)) / PI
        }
        DensityModel::Cm => arc / (2.0 * PI),
    })
}

/// `Li(x) = int_2^x dt / log t`.
pub fn li(x: f64) -> Result<f64> {
    if x < 2.0 {
        return Err(Error::Domain(format!("Li needs x >= 2, got {x}")));
    }
    Ok(integrate(|t| 1.0 / t.ln(), 2.0, x, 0.0, 1e-13)?.value)
}

/// `F_{E,r}(x) = C int_{max(2, r^2/4)}^x Phi_E(r / (2 sqrt t)) / (2 sqrt t log t) dt`.
///
/// Evaluated in `u = sqrt t`. When the lower limit is the edge `u = |r|/2`
/// the first panel switches to `u = (|r|/2) / cos(theta)`, which turns the
/// square-root behaviour there into a smooth integrand for both models.
pub fn f_er(c: f64, r: i64, x: f64, model: DensityModel, tol: f64) -> Result<f64> {
    if !(x >= 2.0) {
        return Err(Error::Domain(format!("x = {x} < 2")));
    }
    if !(c >= 0.0) {
        return Err(Error::Domain(format!("C = {c} must be nonnegative")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tol = {tol} must be positive")));
    }
    let half = r.unsigned_abs() as f64 / 2.0;
    let upper = x.sqrt();
    if half > upper * (1.0 + 1e-15) {
        return Err(Error::Domain(format!("|r| = {} exceeds 2 sqrt(x) = {}", r.unsigned_abs(), 2.0 * upper)));
    }
    if c == 0.0 || half >= upper {
        return Ok(0.0);
    }
    let epsabs = tol / c;
    let in_u = |u: f64| model.big_phi(half / u) / (2.0 * u.ln());

    let mut total = 0.0;
    let mut start = 2f64.sqrt();
    if half >= start {
        let split = (2.0 * half).min(upper);
        let theta_max = (half / split).clamp(-1.0, 1.0).acos();
        let in_theta = |theta: f64| {
            let (s, co) = theta.sin_cos();
            let u = half / co;
            let jac = half / (2.0 * co * co * u.ln());
            match model {
                DensityModel::NonCm => s * s * jac,
                DensityModel::Cm => jac,
            }
        };
        total += integrate(in_theta, 0.0, theta_max.min(FRAC_PI_2), epsabs, tol)?.value;
        start = split;
    }
    if start < upper {
        total += integrate(in_u, start, upper, epsabs, tol)?.value;
    }
    Ok(c * total)
}

/// `F <= K C sqrt(x) / log x` with `K = 2` without CM and `K = 4` with CM.
pub fn f_bound_check(c: f64, r: i64, x: f64, model: DensityModel) -> Result<bool> {
    let k = match model {
        DensityModel::NonCm => 2.0,
        DensityModel::Cm => 4.0,
    };
    let f = f_er(c, r, x, model, DEFAULT_TOL)?;
    Ok(f <= k * c * x.sqrt() / x.ln() * (1.0 + 1e-12))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_integral_values() {
        let nc = DensityModel::NonCm;
        let cm = DensityModel::Cm;
        assert!((phi_integral(nc, -1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((phi_integral(nc, 0.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((phi_integral(cm, 0.0, 1.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((phi_integral(cm, -1.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(phi_integral(nc, -1.5, 0.0).is_err());
        assert!(phi_integral(nc, 0.5, 0.0).is_err());
    }

    #[test]
    fn phi_integral_matches_quadrature() {
        for model in [DensityModel::NonCm, DensityModel::Cm] {
            for (a, b) in [(-0.3, 0.2), (0.1, 0.9), (-0.95, -0.5)] {
                let q = integrate(|z| model.phi(z), a, b, 0.0, 1e-13).unwrap().value;
                assert!((q - phi_integral(model, a, b).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normalized_density() {
        for model in [DensityModel::NonCm, DensityModel::Cm] {
            assert_eq!(model.big_phi(0.0), 1.0);
            assert_eq!(model.big_phi(0.3), model.big_phi(-0.3));
            assert!((model.phi(0.4) / model.phi0() - model.big_phi(0.4)).abs() < 1e-15);
        }
    }

    #[test]
    fn li_reference_values() {
        // li(x) - li(2) with li(2) = 1.04516378011749278
        assert!((li(1e6).unwrap() - (78627.549159462181919 - 1.045163780117493)).abs() < 1e-6);
        assert!((li(100.0).unwrap() - (30.126141584079629 - 1.045163780117493)).abs() < 1e-9);
    }

    #[test]
    fn trivial_cases() {
        assert_eq!(f_er(1.0, 20, 100.0, DensityModel::NonCm, 1e-9).unwrap(), 0.0);
        assert_eq!(f_er(1.0, 20, 100.0, DensityModel::Cm, 1e-9).unwrap(), 0.0);
        assert_eq!(f_er(0.0, 3, 100.0, DensityModel::NonCm, 1e-9).unwrap(), 0.0);
        assert!(f_er(1.0, 21, 100.0, DensityModel::NonCm, 1e-9).is_err());
        assert!(f_er(1.0, 0, 1.0, DensityModel::NonCm, 1e-9).is_err());
        assert!(f_er(-1.0, 0, 10.0, DensityModel::NonCm, 1e-9).is_err());
    }

    #[test]
    fn r_zero_is_plain_integral() {
        let direct = integrate(|t: f64| 1.0 / (2.0 * t.sqrt() * t.ln()), 2.0, 1e4, 0.0, 1e-13).unwrap().value;
        let f = f_er(1.0, 0, 1e4, DensityModel::NonCm, 1e-11).unwrap();
        assert!((f / direct - 1.0).abs() < 1e-10);
    }

    #[test]
    fn even_and_monotone() {
        for model in [DensityModel::NonCm, DensityModel::Cm] {
            for r in [1i64, 2, 3, 7, 50, 199] {
                let a = f_er(1.0, r, 1e4, model, 1e-10).unwrap();
                let b = f_er(1.0, -r, 1e4, model, 1e-10).unwrap();
                assert_eq!(a, b);
                let mut prev = 0.0;
                for x in [1e4, 2e4, 1e5, 1e6] {
                    let v = f_er(1.0, r, x, model, 1e-10).unwrap();
                    assert!(v >= prev);
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn halving_tolerance_is_stable() {
        for model in [DensityModel::NonCm, DensityModel::Cm] {
            for (r, x) in [(0i64, 1e6), (5, 1e5), (1999, 1e6), (3, 10.0)] {
                let tol = 1e-7;
                let coarse = f_er(1.0, r, x, model, tol).unwrap();
                let fine = f_er(1.0, r, x, model, tol / 2.0).unwrap();
                assert!((coarse - fine).abs() <= tol * coarse.max(1.0), "r={r} x={x}");
            }
        }
    }

    #[test]
    fn bound_holds_on_grid() {
        for model in [DensityModel::NonCm, DensityModel::Cm] {
            for x in [2.0, 3.0, 10.0, 100.0, 1e4, 1e6, 1e8] {
                let edge = (2.0 * f64::sqrt(x)).floor() as i64;
                for r in [0, 1, 2, 3, edge / 2, edge - 1, edge] {
                    if r > edge || (r == 0 && model == DensityModel::Cm) {
                        continue;
                    }
                    assert!(f_bound_check(1.3, r, x, model).unwrap(), "{model:?} r={r} x={x}");
                    assert!(f_bound_check(0.0, r, x, model).unwrap());
                }
            }
        }
    }

    #[test]
    fn large_x_ratio_approaches_one() {
        let ratio = |x: f64| f_er(1.0, 0, x, DensityModel::NonCm, 1e-10).unwrap() / (x.sqrt() / x.ln());
        let (a, b) = (ratio(1e6), ratio(1e8));
        assert!(b < a && (b - 1.0).abs() < 0.15, "{a} {b}");
    }
}
