//! Double-double arithmetic: an unevaluated sum `hi + lo` of two `f64` with
//! `|lo| ≤ ulp(hi)/2`, giving about 106 bits of precision.

use num_traits::{Num, One, Zero};
use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Rem, Sub};

#[derive(Debug, Clone, Copy, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn split(a: f64) -> (f64, f64) {
    let t = 134_217_729.0 * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

/// Exact product `a b = p + e` by Dekker splitting.
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
}

impl Dd {
    pub const fn new(hi: f64, lo: f64) -> Self {
        Dd { hi, lo }
    }

    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn pi() -> Self {
        Dd::new(std::f64::consts::PI, 1.2246467991473532e-16)
    }

    pub fn ln2() -> Self {
        Dd::new(std::f64::consts::LN_2, 2.3190468138462996e-17)
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::from_f64(self.hi.max(0.0).sqrt());
        }
        let q = Dd::from_f64(self.hi.sqrt());
        q + (self - q * q) / (Dd::from_f64(2.0) * q)
    }

    pub fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    /// `sin θ` for `|θ| ≤ π`, by Taylor series after reflection into `[-π/2, π/2]`.
    pub fn sin(self) -> Self {
        let pi = Dd::pi();
        let half_pi = pi / Dd::from_f64(2.0);
        let t = if self > half_pi {
            pi - self
        } else if self < -half_pi {
            -pi - self
        } else {
            self
        };
        let t2 = t * t;
        let mut term = t;
        let mut sum = t;
        let mut k = 1.0;
        while term.hi.abs() > 1e-34 * sum.hi.abs() && term.hi != 0.0 {
            term = -term * t2 / Dd::from_f64((k + 1.0) * (k + 2.0));
            sum = sum + term;
            k += 2.0;
        }
        sum
    }

    /// `ln x` for `x > 0`, by binary range reduction and the `atanh` series.
    pub fn ln(self) -> Self {
        let mut m = self;
        let mut e = 0i32;
        while m.hi > 1.5 {
            m = m / Dd::from_f64(2.0);
            e += 1;
        }
        while m.hi < 0.75 {
            m = m * Dd::from_f64(2.0);
            e -= 1;
        }
        let one = Dd::from_f64(1.0);
        let z = (m - one) / (m + one);
        let z2 = z * z;
        let mut power = z;
        let mut sum = z;
        let mut k = 1.0;
        while power.hi.abs() > 1e-34 {
            power = power * z2;
            k += 2.0;
            sum = sum + power / Dd::from_f64(k);
        }
        Dd::from_f64(2.0) * sum + Dd::from_f64(e as f64) * Dd::ln2()
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd::from_f64(x)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd::new(-self.hi, -self.lo)
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Dd::new(hi, lo)
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, b.hi);
        let (hi, lo) = quick_two_sum(p1, p2 + (self.hi * b.lo + self.lo * b.hi));
        Dd::new(hi, lo)
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * Dd::from_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Dd::from_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd::new(hi, lo) + Dd::from_f64(q3)
    }
}

impl Rem for Dd {
    type Output = Dd;
    fn rem(self, b: Dd) -> Dd {
        let q = (self / b).to_f64().trunc();
        self - b * Dd::from_f64(q)
    }
}

impl PartialEq for Dd {
    fn eq(&self, o: &Dd) -> bool {
        self.hi == o.hi && self.lo == o.lo
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, o: &Dd) -> Option<Ordering> {
        match self.hi.partial_cmp(&o.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&o.lo),
            c => c,
        }
    }
}

impl Zero for Dd {
    fn zero() -> Dd {
        Dd::new(0.0, 0.0)
    }
    fn is_zero(&self) -> bool {
        self.hi == 0.0 && self.lo == 0.0
    }
}

impl One for Dd {
    fn one() -> Dd {
        Dd::new(1.0, 0.0)
    }
}

impl Num for Dd {
    type FromStrRadixErr = std::num::ParseFloatError;
    fn from_str_radix(s: &str, _radix: u32) -> Result<Dd, Self::FromStrRadixErr> {
        s.parse::<f64>().map(Dd::from_f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Dd, b: Dd, tol: f64) -> bool {
        (a - b).abs().to_f64() <= tol
    }

    #[test]
    fn arithmetic_is_double_double_accurate() {
        let three = Dd::from(3.0);
        assert!(close(Dd::from(1.0) / three * three, Dd::from(1.0), 1e-31));
        let r2 = Dd::from(2.0).sqrt();
        assert!(close(r2 * r2, Dd::from(2.0), 1e-31));
        // (1 + 2⁻⁶⁰)² keeps the 2⁻⁶⁰ cross term that f64 loses
        let x = Dd::from(1.0) + Dd::from(2f64.powi(-60));
        assert_eq!((x * x - Dd::from(1.0)).to_f64(), 2f64.powi(-59) + 2f64.powi(-120));
    }

    #[test]
    fn elementary_functions() {
        let pi = Dd::pi();
        assert!(close((pi / Dd::from(6.0)).sin(), Dd::from(0.5), 1e-31));
        let r = (pi / Dd::from(4.0)).sin();
        assert!(close(r * r, Dd::from(0.5), 1e-31));
        assert!(close(Dd::from(3.0).sin(), (pi - Dd::from(3.0)).sin(), 1e-31));
        assert!(close(Dd::from(2.0).ln(), Dd::ln2(), 1e-31));
        // ln 3 split into f64 head and tail from a 40-digit reference
        let ln3 = Dd::new(1.0986122886681098, -9.07129723500153e-17);
        assert!(close(Dd::from(3.0).ln(), ln3, 1e-30));
        assert!(close(Dd::from(12.0).ln() - Dd::from(3.0).ln(), Dd::from(2.0) * Dd::ln2(), 1e-30));
    }

    #[test]
    fn ordering_uses_the_low_word() {
        let a = Dd::new(1.0, 1e-20);
        assert!(a > Dd::from(1.0));
        assert!(-a < Dd::from(-1.0));
        assert_eq!(a.abs(), a);
    }
}
