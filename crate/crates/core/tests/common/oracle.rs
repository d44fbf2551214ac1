//! Normal-equations least squares in double-double arithmetic.
//!
//! Deliberately unrelated to the production solver: it forms `X'X` and `X'y`
//! with error-free products, solves by Gauss-Jordan elimination with partial
//! pivoting, and carries about 32 significant digits throughout.

#![allow(dead_code)]

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    hi: f64,
    lo: f64,
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

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn sqrt(self) -> Dd {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        let x = Dd::from(self.hi.sqrt());
        // one Newton step doubles the precision
        x + (self - x * x) / (x + x)
    }

    /// Exact product of two doubles.
    pub fn prod(a: f64, b: f64) -> Dd {
        let p = a * b;
        let (hi, lo) = quick_two_sum(p, a.mul_add(b, -p));
        Dd { hi, lo }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let p = Dd::prod(self.hi, o.hi);
        let (hi, lo) = quick_two_sum(p.hi, p.lo + (self.hi * o.lo + self.lo * o.hi));
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * Dd::from(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Dd::from(q2);
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from(q3)
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, o: &Dd) -> Option<std::cmp::Ordering> {
        (self.hi, self.lo).partial_cmp(&(o.hi, o.lo))
    }
}

#[derive(Debug, Clone)]
pub struct OracleFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub r_squared: f64,
}

/// Least squares of `y` on the columns of `x` (rows of length `k`, intercept
/// included by the caller). R² is centered.
pub fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> OracleFit {
    let n = x.len();
    let k = x[0].len();
    // augmented [X'X | X'y | I]
    let width = 2 * k + 1;
    let mut a = vec![vec![Dd::ZERO; width]; k];
    for (row, &yi) in x.iter().zip(y) {
        for i in 0..k {
            for j in 0..k {
                a[i][j] = a[i][j] + Dd::prod(row[i], row[j]);
            }
            a[i][k] = a[i][k] + Dd::prod(row[i], yi);
        }
    }
    for (i, r) in a.iter_mut().enumerate() {
        r[k + 1 + i] = Dd::ONE;
    }
    for c in 0..k {
        let p = (c..k).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap()).unwrap();
        a.swap(c, p);
        let piv = a[c][c];
        for v in a[c].iter_mut() {
            *v = *v / piv;
        }
        let pivot_row = a[c].clone();
        for (r, row) in a.iter_mut().enumerate() {
            let f = row[c];
            if r != c && f.hi != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v = *v - f * *p;
                }
            }
        }
    }
    let beta: Vec<Dd> = (0..k).map(|i| a[i][k]).collect();
    let mut ssr = Dd::ZERO;
    let mut ybar = Dd::ZERO;
    for &yi in y {
        ybar = ybar + Dd::from(yi);
    }
    ybar = ybar / Dd::from(n as f64);
    let mut sst = Dd::ZERO;
    for (row, &yi) in x.iter().zip(y) {
        let mut fitted = Dd::ZERO;
        for j in 0..k {
            fitted = fitted + beta[j] * Dd::from(row[j]);
        }
        let e = Dd::from(yi) - fitted;
        ssr = ssr + e * e;
        let d = Dd::from(yi) - ybar;
        sst = sst + d * d;
    }
    let s2 = ssr / Dd::from((n - k) as f64);
    OracleFit {
        coefficients: beta.iter().map(|b| b.to_f64()).collect(),
        std_errors: (0..k).map(|i| (s2 * a[i][k + 1 + i]).sqrt().to_f64()).collect(),
        r_squared: (Dd::ONE - ssr / sst).to_f64(),
    }
}
