//! Affine point arithmetic on `y^2 = x^3 + ax + b` over a prime field.

use crate::arith::{inv_mod, jacobi, mul_mod, pow_mod};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Point {
    Infinity,
    Affine(u64, u64),
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct CurveFp {
    pub p: u64,
    pub a: u64,
    pub b: u64,
}

impl CurveFp {
    #[inline]
    fn add_mod(&self, x: u64, y: u64) -> u64 {
        let s = x + y;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline]
    fn sub_mod(&self, x: u64, y: u64) -> u64 {
        if x >= y {
            x - y
        } else {
            x + self.p - y
        }
    }

    #[inline]
    fn mul(&self, x: u64, y: u64) -> u64 {
        mul_mod(x, y, self.p)
    }

    /// `x^3 + ax + b`.
    pub fn rhs(&self, x: u64) -> u64 {
        let x2 = self.mul(x, x);
        let x3 = self.mul(x2, x);
        self.add_mod(self.add_mod(x3, self.mul(self.a, x)), self.b)
    }

    pub fn neg(&self, pt: Point) -> Point {
        match pt {
            Point::Infinity => Point::Infinity,
            Point::Affine(x, y) => Point::Affine(x, self.sub_mod(0, y)),
        }
    }

    pub fn add(&self, lhs: Point, rhs: Point) -> Point {
        let (x1, y1, x2, y2) = match (lhs, rhs) {
            (Point::Infinity, q) => return q,
            (q, Point::Infinity) => return q,
            (Point::Affine(x1, y1), Point::Affine(x2, y2)) => (x1, y1, x2, y2),
        };
        let slope = if x1 == x2 {
            if self.add_mod(y1, y2) == 0 {
                return Point::Infinity;
            }
            // doubling: (3x^2 + a) / 2y
            let num = self.add_mod(self.mul(3, self.mul(x1, x1)), self.a);
            let den = inv_mod(self.add_mod(y1, y1), self.p).expect("2y invertible");
            self.mul(num, den)
        } else {
            let den = inv_mod(self.sub_mod(x2, x1), self.p).expect("dx invertible");
            self.mul(self.sub_mod(y2, y1), den)
        };
        let x3 = self.sub_mod(self.sub_mod(self.mul(slope, slope), x1), x2);
        let y3 = self.sub_mod(self.mul(slope, self.sub_mod(x1, x3)), y1);
        Point::Affine(x3, y3)
    }

    pub fn sub(&self, lhs: Point, rhs: Point) -> Point {
        self.add(lhs, self.neg(rhs))
    }

    /// `k * pt` for signed `k`.
    pub fn mul_scalar(&self, pt: Point, k: i128) -> Point {
        let mut base = if k < 0 { self.neg(pt) } else { pt };
        let mut k = k.unsigned_abs();
        let mut acc = Point::Infinity;
        while k > 0 {
            if k & 1 == 1 {
                acc = self.add(acc, base);
            }
            base = self.add(base, base);
            k >>= 1;
        }
        acc
    }

    /// Lifts `x` to a point when `x^3 + ax + b` is a square.
    pub fn lift_x(&self, x: u64) -> Option<Point> {
        let f = self.rhs(x);
        if f == 0 {
            return Some(Point::Affine(x, 0));
        }
        if jacobi(f as i128, self.p) != 1 {
            return None;
        }
        Some(Point::Affine(x, sqrt_mod(f, self.p)))
    }
}

/// Tonelli-Shanks square root of a quadratic residue modulo an odd prime.
pub(crate) fn sqrt_mod(n: u64, p: u64) -> u64 {
    if n == 0 {
        return 0;
    }
    if p % 4 == 3 {
        return pow_mod(n, (p + 1) / 4, p);
    }
    let s = (p - 1).trailing_zeros();
    let q = (p - 1) >> s;
    let mut z = 2;
    while jacobi(z as i128, p) != -1 {
        z += 1;
    }
    let mut m = s;
    let mut c = pow_mod(z, q, p);
    let mut t = pow_mod(n, q, p);
    let mut r = pow_mod(n, q.div_ceil(2), p);
    while t != 1 {
        let mut i = 0;
        let mut t2 = t;
        while t2 != 1 {
            t2 = mul_mod(t2, t2, p);
            i += 1;
        }
        let b = pow_mod(c, 1 << (m - i - 1), p);
        m = i;
        c = mul_mod(b, b, p);
        t = mul_mod(t, c, p);
        r = mul_mod(r, b, p);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_roundtrip() {
        for p in [13u64, 17, 97, 193, 257, 65537, 1_000_000_009] {
            for n in 1..200u64 {
                if jacobi(n as i128, p) == 1 {
                    let r = sqrt_mod(n % p, p);
                    assert_eq!(mul_mod(r, r, p), n % p, "p={p} n={n}");
                }
            }
        }
    }

    #[test]
    fn group_law_sanity() {
        // y^2 = x^3 + x + 1 over F_101
        let e = CurveFp { p: 101, a: 1, b: 1 };
        let pt = (0..101).find_map(|x| e.lift_x(x)).unwrap();
        let two = e.add(pt, pt);
        let three = e.add(two, pt);
        assert_eq!(e.mul_scalar(pt, 3), three);
        assert_eq!(e.mul_scalar(pt, -3), e.neg(three));
        assert_eq!(e.sub(three, pt), two);
        assert_eq!(e.add(pt, e.neg(pt)), Point::Infinity);
    }
}
