//! Double-double arithmetic (about 32 significant digits), used where a
//! determinant must resolve terms many orders of magnitude below its largest
//! products.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct DoubleDouble {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub(crate) const ZERO: Self = DoubleDouble { hi: 0.0, lo: 0.0 };
    pub(crate) const ONE: Self = DoubleDouble { hi: 1.0, lo: 0.0 };

    pub(crate) fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub(crate) fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }
}

impl From<f64> for DoubleDouble {
    fn from(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        DoubleDouble { hi: -self.hi, lo: -self.lo }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let (s, e) = two_sum(self.hi, rhs.hi);
        let (t, f) = two_sum(self.lo, rhs.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        DoubleDouble { hi, lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let (p, e) = two_prod(self.hi, rhs.hi);
        let e = e + (self.hi * rhs.lo + self.lo * rhs.hi);
        let (hi, lo) = quick_two_sum(p, e);
        DoubleDouble { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        // long division: one f64 quotient, then a correction from the remainder
        let q1 = self.hi / rhs.hi;
        let r = self - rhs * DoubleDouble::from(q1);
        let q2 = r.hi / rhs.hi;
        let r = r - rhs * DoubleDouble::from(q2);
        let q3 = r.hi / rhs.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        DoubleDouble { hi, lo } + DoubleDouble::from(q3)
    }
}

/// Determinant of the `n×n` matrix with entries `entry(i, j)` (0-based), by
/// Gaussian elimination with partial pivoting carried out in double-double.
pub(crate) fn det(n: usize, mut entry: impl FnMut(usize, usize) -> DoubleDouble) -> DoubleDouble {
    let mut a: Vec<Vec<DoubleDouble>> = (0..n).map(|i| (0..n).map(|j| entry(i, j)).collect()).collect();
    let mut result = DoubleDouble::ONE;
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&x, &y| a[x][col].abs().to_f64().total_cmp(&a[y][col].abs().to_f64()))
            .expect("non-empty range");
        if a[pivot_row][col].hi == 0.0 {
            return DoubleDouble::ZERO;
        }
        if pivot_row != col {
            a.swap(pivot_row, col);
            result = -result;
        }
        let pivot = a[col][col];
        result = result * pivot;
        for row in col + 1..n {
            let factor = a[row][col] / pivot;
            if factor.hi == 0.0 {
                continue;
            }
            for j in col + 1..n {
                let delta = factor * a[col][j];
                a[row][j] = a[row][j] - delta;
            }
        }
    }
    result
}
