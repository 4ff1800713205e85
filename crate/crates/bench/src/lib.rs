//! Shared fixtures for the criterion benches.

use ltlab_core::curve::RationalCurve;

/// `y^2 = x^3 + 6x - 2`, a Serre curve.
pub fn serre_curve() -> RationalCurve {
    RationalCurve::new("serre", 6, -2)
        .expect("nonsingular")
        .with_serre_curve(true)
}

/// `y^2 = x^3 - 768108000x + 8194304162000`, CM by the order of discriminant -27.
pub fn cm_curve() -> RationalCurve {
    RationalCurve::new("cm27", -768108000, 8194304162000).expect("nonsingular")
}
