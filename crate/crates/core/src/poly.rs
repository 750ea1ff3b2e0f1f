//! Dense univariate polynomials with ascending coefficients.
//!
//! Segments store their closed forms in local time `s = t - t_start`, so every
//! polynomial here is meant to be evaluated over a short interval near zero.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn zero() -> Self {
        Poly(Vec::new())
    }

    pub fn constant(c: f64) -> Self {
        Poly(vec![c])
    }

    pub fn new(coeffs: impl Into<Vec<f64>>) -> Self {
        let mut p = Poly(coeffs.into());
        p.trim();
        p
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    /// Coefficient of `s^k`, zero past the stored degree.
    pub fn coeff(&self, k: usize) -> f64 {
        self.0.get(k).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    fn trim(&mut self) {
        while matches!(self.0.last(), Some(&c) if c == 0.0) {
            self.0.pop();
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * s + c)
    }

    /// Value with first and second derivatives, without allocating.
    pub fn eval2(&self, s: f64) -> (f64, f64, f64) {
        let (mut p, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for &c in self.0.iter().rev() {
            d2 = d2 * s + 2.0 * d1;
            d1 = d1 * s + p;
            p = p * s + c;
        }
        (p, d1, d2)
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect::<Vec<_>>(),
        )
    }

    /// Antiderivative vanishing at `s = 0`.
    pub fn antiderivative(&self) -> Poly {
        let mut out = Vec::with_capacity(self.0.len() + 1);
        out.push(0.0);
        out.extend(self.0.iter().enumerate().map(|(k, &c)| c / (k + 1) as f64));
        Poly::new(out)
    }

    /// Returns `q` with `q(s) = self(s + delta)`.
    pub fn shift(&self, delta: f64) -> Poly {
        if delta == 0.0 || self.0.len() < 2 {
            return self.clone();
        }
        // Repeated synthetic division (Taylor shift).
        let mut c = self.0.clone();
        let n = c.len();
        for i in 0..n {
            for j in (i..n - 1).rev() {
                c[j] += delta * c[j + 1];
            }
        }
        Poly::new(c)
    }

    pub fn scale(&self, k: f64) -> Poly {
        Poly::new(self.0.iter().map(|c| c * k).collect::<Vec<_>>())
    }

    /// Real roots inside `[lo, hi]` for degree <= 2, computed in closed form.
    pub fn real_roots_upto_quadratic(&self, lo: f64, hi: f64) -> Vec<f64> {
        if self.degree() >= 3 {
            panic!("real_roots_upto_quadratic called on degree {}", self.degree());
        }
        let (n, r) = quadratic_roots(self.coeff(2), self.coeff(1), self.coeff(0));
        let mut roots = r[..n].to_vec();
        roots.retain(|r| r.is_finite() && *r >= lo && *r <= hi);
        roots.sort_by(f64::total_cmp);
        roots
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let n = self.0.len().max(rhs.0.len());
        Poly::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect::<Vec<_>>())
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let n = self.0.len().max(rhs.0.len());
        Poly::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect::<Vec<_>>())
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.0.is_empty() || rhs.0.is_empty() {
            return Poly::zero();
        }
        let mut out = vec![0.0; self.0.len() + rhs.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in rhs.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(-1.0)
    }
}

/// Real roots of `a s² + b s + c` (linear when `a` vanishes), unsorted.
pub fn quadratic_roots(a: f64, b: f64, c: f64) -> (usize, [f64; 2]) {
    if a.abs() < 1e-300 {
        return if b != 0.0 { (1, [-c / b, 0.0]) } else { (0, [0.0; 2]) };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return (0, [0.0; 2]);
    }
    // Numerically stable pair.
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q != 0.0 {
        (2, [q / a, c / q])
    } else {
        (1, [0.0, 0.0])
    }
}

/// `∫_0^S p(s) e^{-λ s} ds` in closed form.
///
/// Uses the upward recurrence `I_k = (k I_{k-1} - S^k e^{-λS}) / λ` when `λS`
/// is not small, and the power series otherwise (the recurrence cancels badly
/// there).
pub fn integrate_poly_exp(p: &Poly, lambda: f64, span: f64) -> f64 {
    if p.is_zero() || span == 0.0 {
        return 0.0;
    }
    if lambda == 0.0 {
        return p.antiderivative().eval(span);
    }
    let n = p.0.len();
    let moments = exp_moments(lambda, span, n);
    p.0.iter().zip(&moments).map(|(c, m)| c * m).sum()
}

/// `[∫_0^S s^k e^{-λ s} ds for k in 0..n]`.
fn exp_moments(lambda: f64, span: f64, n: usize) -> Vec<f64> {
    let x = lambda * span;
    if x.abs() < 2.0 {
        // Series: Σ_j (-λ)^j S^{k+j+1} / (j! (k+j+1)).
        (0..n)
            .map(|k| {
                let mut sum = 0.0;
                let mut term = span.powi(k as i32 + 1); // (-λ)^j S^{k+j+1} / j!
                for j in 0..200 {
                    let contrib = term / (k + j + 1) as f64;
                    sum += contrib;
                    if contrib.abs() < 1e-18 * sum.abs() {
                        break;
                    }
                    term *= -lambda * span / (j + 1) as f64;
                }
                sum
            })
            .collect()
    } else {
        let e = (-x).exp();
        let mut out = Vec::with_capacity(n);
        let mut prev = (1.0 - e) / lambda;
        out.push(prev);
        let mut sk = 1.0;
        for k in 1..n {
            sk *= span;
            prev = (k as f64 * prev - sk * e) / lambda;
            out.push(prev);
        }
        out
    }
}
