//! Sparse multivariate polynomials and their calculus.
//!
//! Monomials are exponent vectors compared in graded lexicographic order
//! (total degree first, then lexicographic with earlier variables dominating).
//! That ordering fixes the canonical textual form and all monomial-basis
//! indexing used by the SOS compiler. Polynomials are immutable values;
//! every operation returns a fresh value cleaned of coefficients below
//! [`COEFF_CLEANUP`].

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::scalar::{real, Scalar};

/// Absolute coefficient threshold applied after every arithmetic operation.
pub const COEFF_CLEANUP: f64 = 1e-12;

/// A power product of the state variables, stored as an exponent vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial {
    exps: Vec<u32>,
}

impl Monomial {
    pub fn new(exps: Vec<u32>) -> Self {
        Monomial { exps }
    }

    /// The constant monomial `1`.
    pub fn one(nvars: usize) -> Self {
        Monomial { exps: vec![0; nvars] }
    }

    /// The monomial `x_i` (zero-based index).
    pub fn var(nvars: usize, i: usize) -> Self {
        assert!(i < nvars, "variable index {} out of range for {} vars", i, nvars);
        let mut exps = vec![0; nvars];
        exps[i] = 1;
        Monomial { exps }
    }

    pub fn nvars(&self) -> usize {
        self.exps.len()
    }

    pub fn exps(&self) -> &[u32] {
        &self.exps
    }

    pub fn degree(&self) -> u32 {
        self.exps.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.exps.iter().all(|&e| e == 0)
    }

    pub fn is_even(&self) -> bool {
        self.degree() % 2 == 0
    }

    /// Product of two monomials (exponent-wise sum).
    pub fn mul(&self, other: &Monomial) -> Monomial {
        assert_eq!(self.nvars(), other.nvars(), "monomial dimension mismatch");
        Monomial {
            exps: self
                .exps
                .iter()
                .zip(&other.exps)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Value of the monomial at a point.
    pub fn eval<T: Scalar>(&self, x: &[T]) -> T {
        assert_eq!(x.len(), self.nvars(), "point dimension mismatch");
        let mut v = T::one();
        for (xi, &e) in x.iter().zip(&self.exps) {
            if e > 0 {
                v = v * xi.powi(e as i32);
            }
        }
        v
    }

    /// Partial derivative with respect to `x_i`: returns the integer factor
    /// and the reduced monomial, or `None` if the variable is absent.
    pub fn partial(&self, i: usize) -> Option<(u32, Monomial)> {
        let e = self.exps[i];
        if e == 0 {
            return None;
        }
        let mut exps = self.exps.clone();
        exps[i] = e - 1;
        Some((e, Monomial { exps }))
    }

    /// Textual form like `x1^2*x3` using the given variable names.
    pub fn to_text(&self, names: &[String]) -> String {
        let mut parts = Vec::new();
        for (i, &e) in self.exps.iter().enumerate() {
            if e == 1 {
                parts.push(names[i].clone());
            } else if e > 1 {
                parts.push(format!("{}^{}", names[i], e));
            }
        }
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join("*")
        }
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        debug_assert_eq!(self.nvars(), other.nvars());
        match self.degree().cmp(&other.degree()) {
            Ordering::Equal => {
                // Within a grade, larger leading exponents come first, so
                // x1^2 < x1*x2 < x2^2.
                for (a, b) in self.exps.iter().zip(&other.exps) {
                    match b.cmp(a) {
                        Ordering::Equal => continue,
                        ord => return ord,
                    }
                }
                Ordering::Equal
            }
            ord => ord,
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = (1..=self.nvars()).map(|i| format!("x{}", i)).collect();
        write!(f, "{}", self.to_text(&names))
    }
}

/// Sparse multivariate polynomial over the scalar `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial<T: Scalar> {
    nvars: usize,
    terms: BTreeMap<Monomial, T>,
}

impl<T: Scalar> Polynomial<T> {
    pub fn zero(nvars: usize) -> Self {
        Polynomial { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: T) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::one(nvars), c);
        p
    }

    /// The polynomial `x_i`.
    pub fn variable(nvars: usize, i: usize) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::var(nvars, i), T::one());
        p
    }

    /// `sum_i x_i^2`, the margin carrier for strict positivity.
    pub fn sum_sq_vars(nvars: usize) -> Self {
        let mut p = Self::zero(nvars);
        for i in 0..nvars {
            let mut exps = vec![0; nvars];
            exps[i] = 2;
            p.add_term(Monomial::new(exps), T::one());
        }
        p
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Monomial, T)>) -> Self {
        let mut p = Self::zero(nvars);
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    /// Accumulates a term, dropping the entry if it falls below the cleanup
    /// threshold.
    pub fn add_term(&mut self, m: Monomial, c: T) {
        assert_eq!(m.nvars(), self.nvars, "monomial dimension mismatch");
        let cleaned = {
            let entry = self.terms.entry(m.clone()).or_insert_with(T::zero);
            *entry += c;
            entry.abs() < real::<T>(COEFF_CLEANUP)
        };
        if cleaned {
            self.terms.remove(&m);
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; the zero polynomial reports -1.
    pub fn degree(&self) -> i32 {
        self.terms
            .keys()
            .next_back()
            .map(|m| m.degree() as i32)
            .unwrap_or(-1)
    }

    /// Smallest term degree; -1 for the zero polynomial.
    pub fn min_degree(&self) -> i32 {
        self.terms
            .keys()
            .next()
            .map(|m| m.degree() as i32)
            .unwrap_or(-1)
    }

    pub fn coeff(&self, m: &Monomial) -> T {
        self.terms.get(m).copied().unwrap_or_else(T::zero)
    }

    /// Terms in canonical (graded-lex) order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &T)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn max_abs_coeff(&self) -> T {
        self.terms
            .values()
            .fold(T::zero(), |acc, c| acc.max(c.abs()))
    }

    pub fn evaluate(&self, x: &[T]) -> T {
        assert_eq!(x.len(), self.nvars, "point dimension mismatch");
        let mut v = T::zero();
        for (m, &c) in &self.terms {
            v += c * m.eval(x);
        }
        v
    }

    pub fn scale(&self, c: T) -> Self {
        let mut out = Self::zero(self.nvars);
        for (m, &v) in &self.terms {
            out.add_term(m.clone(), v * c);
        }
        out
    }

    /// Partial derivative with respect to `x_i`.
    pub fn partial(&self, i: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (m, &c) in &self.terms {
            if let Some((e, dm)) = m.partial(i) {
                out.add_term(dm, c * real::<T>(e as f64));
            }
        }
        out
    }

    /// Gradient as a vector of polynomials.
    pub fn gradient(&self) -> Vec<Self> {
        (0..self.nvars).map(|i| self.partial(i)).collect()
    }

    /// Lie derivative along the vector field `f`: `<grad(self), f>`.
    pub fn lie_derivative(&self, f: &[Self]) -> Self {
        assert_eq!(f.len(), self.nvars, "vector field dimension mismatch");
        let mut out = Self::zero(self.nvars);
        for (i, fi) in f.iter().enumerate() {
            assert_eq!(fi.nvars(), self.nvars, "vector field component dimension mismatch");
            out = &out + &(&self.partial(i) * fi);
        }
        out
    }

    /// Integer power by repeated multiplication.
    pub fn pow(&self, k: usize) -> Self {
        let mut out = Self::constant(self.nvars, T::one());
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// Largest absolute coefficient difference against `other`.
    pub fn max_coeff_diff(&self, other: &Self) -> T {
        assert_eq!(self.nvars, other.nvars, "dimension mismatch");
        let mut worst = T::zero();
        for (m, &c) in &self.terms {
            worst = worst.max((c - other.coeff(m)).abs());
        }
        for (m, &c) in &other.terms {
            if !self.terms.contains_key(m) {
                worst = worst.max(c.abs());
            }
        }
        worst
    }

    pub fn approx_eq(&self, other: &Self, tol: T) -> bool {
        self.max_coeff_diff(other) <= tol
    }

    /// Canonical textual form with explicit variable names.
    pub fn to_text(&self, names: &[String]) -> String {
        assert_eq!(names.len(), self.nvars, "name list dimension mismatch");
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (idx, (m, &c)) in self.terms.iter().enumerate() {
            let neg = c < T::zero();
            let mag = c.abs();
            if idx == 0 {
                if neg {
                    out.push('-');
                }
            } else if neg {
                out.push_str(" - ");
            } else {
                out.push_str(" + ");
            }
            if m.is_one() {
                out.push_str(&format!("{}", mag));
            } else if mag == T::one() {
                out.push_str(&m.to_text(names));
            } else {
                out.push_str(&format!("{}*{}", mag, m.to_text(names)));
            }
        }
        out
    }
}

impl<T: Scalar> Add for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn add(self, rhs: &Polynomial<T>) -> Polynomial<T> {
        assert_eq!(self.nvars, rhs.nvars, "polynomial dimension mismatch");
        let mut out = self.clone();
        for (m, &c) in &rhs.terms {
            out.add_term(m.clone(), c);
        }
        out
    }
}

impl<T: Scalar> Sub for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn sub(self, rhs: &Polynomial<T>) -> Polynomial<T> {
        assert_eq!(self.nvars, rhs.nvars, "polynomial dimension mismatch");
        let mut out = self.clone();
        for (m, &c) in &rhs.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }
}

impl<T: Scalar> Mul for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn mul(self, rhs: &Polynomial<T>) -> Polynomial<T> {
        assert_eq!(self.nvars, rhs.nvars, "polynomial dimension mismatch");
        let mut out = Polynomial::zero(self.nvars);
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl<T: Scalar> Neg for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn neg(self) -> Polynomial<T> {
        self.scale(-T::one())
    }
}

impl<T: Scalar> fmt::Display for Polynomial<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = (1..=self.nvars).map(|i| format!("x{}", i)).collect();
        write!(f, "{}", self.to_text(&names))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly2(terms: &[(&[u32], f64)]) -> Polynomial<f64> {
        Polynomial::from_terms(
            2,
            terms
                .iter()
                .map(|(e, c)| (Monomial::new(e.to_vec()), *c)),
        )
    }

    #[test]
    fn grlex_order_matches_canonical_listing() {
        // 1, x1, x2, x1^2, x1x2, x2^2
        let ms = vec![
            Monomial::new(vec![0, 0]),
            Monomial::new(vec![1, 0]),
            Monomial::new(vec![0, 1]),
            Monomial::new(vec![2, 0]),
            Monomial::new(vec![1, 1]),
            Monomial::new(vec![0, 2]),
        ];
        let mut sorted = ms.clone();
        sorted.sort();
        assert_eq!(sorted, ms);
    }

    #[test]
    fn add_cancels_and_keeps_identity() {
        let a = poly2(&[(&[1, 0], 1.0), (&[0, 0], 1.0)]); // x1 + 1
        let b = poly2(&[(&[1, 0], -1.0)]); // -x1
        let sum = &a + &b;
        assert_eq!(sum, poly2(&[(&[0, 0], 1.0)]));

        let p = poly2(&[(&[2, 0], 3.0), (&[0, 1], -2.0)]);
        let zero = Polynomial::zero(2);
        assert_eq!(&p + &zero, p);
    }

    #[test]
    fn add_hand_expansion() {
        // (x1^2 + x2) + (x1^2 - x2) = 2 x1^2
        let a = poly2(&[(&[2, 0], 1.0), (&[0, 1], 1.0)]);
        let b = poly2(&[(&[2, 0], 1.0), (&[0, 1], -1.0)]);
        assert_eq!(&a + &b, poly2(&[(&[2, 0], 2.0)]));
    }

    #[test]
    fn mul_difference_of_squares_and_identity() {
        let x1 = Polynomial::<f64>::variable(2, 0);
        let one = Polynomial::constant(2, 1.0);
        let prod = &(&x1 - &one) * &(&x1 + &one);
        assert_eq!(prod, poly2(&[(&[2, 0], 1.0), (&[0, 0], -1.0)]));

        let p = poly2(&[(&[1, 1], 2.0), (&[0, 2], -0.5)]);
        assert_eq!(&p * &one, p);
    }

    #[test]
    fn mul_square_hand_expansion() {
        // (x1 + x2)^2 = x1^2 + 2 x1 x2 + x2^2
        let s = poly2(&[(&[1, 0], 1.0), (&[0, 1], 1.0)]);
        let sq = &s * &s;
        assert_eq!(
            sq,
            poly2(&[(&[2, 0], 1.0), (&[1, 1], 2.0), (&[0, 2], 1.0)])
        );
    }

    #[test]
    fn evaluate_basics() {
        let p = poly2(&[(&[2, 0], 1.0), (&[0, 2], 1.0)]);
        assert_eq!(p.evaluate(&[0.0, 0.0]), 0.0);
        let q = poly2(&[(&[1, 1], 2.0)]);
        assert_eq!(q.evaluate(&[1.0, 1.0]), 2.0);
    }

    #[test]
    fn gradient_basics() {
        let p = poly2(&[(&[2, 0], 1.0), (&[0, 2], 1.0)]);
        let g = p.gradient();
        assert_eq!(g[0], poly2(&[(&[1, 0], 2.0)]));
        assert_eq!(g[1], poly2(&[(&[0, 1], 2.0)]));

        let c = Polynomial::<f64>::constant(2, 5.0);
        assert!(c.gradient().iter().all(|gi| gi.is_zero()));

        let q = poly2(&[(&[1, 1], 2.0)]);
        let gq = q.gradient();
        assert_eq!(gq[0], poly2(&[(&[0, 1], 2.0)]));
        assert_eq!(gq[1], poly2(&[(&[1, 0], 2.0)]));
    }

    #[test]
    fn lie_derivative_linear_contraction() {
        let v = poly2(&[(&[2, 0], 1.0), (&[0, 2], 1.0)]);
        let f = vec![
            poly2(&[(&[1, 0], -1.0)]),
            poly2(&[(&[0, 1], -1.0)]),
        ];
        let lv = v.lie_derivative(&f);
        assert_eq!(lv, poly2(&[(&[2, 0], -2.0), (&[0, 2], -2.0)]));

        let c = Polynomial::<f64>::constant(2, 3.0);
        assert!(c.lie_derivative(&f).is_zero());
    }

    #[test]
    fn lie_derivative_hand_expansion() {
        // V = x1 x2, f = (-x1(1 - x1 x2), -x2) => x1^2 x2^2 - 2 x1 x2
        let v = poly2(&[(&[1, 1], 1.0)]);
        let f = vec![
            poly2(&[(&[1, 0], -1.0), (&[2, 1], 1.0)]),
            poly2(&[(&[0, 1], -1.0)]),
        ];
        let lv = v.lie_derivative(&f);
        assert_eq!(lv, poly2(&[(&[2, 2], 1.0), (&[1, 1], -2.0)]));
    }

    #[test]
    fn degree_sentinels() {
        assert_eq!(Polynomial::<f64>::zero(2).degree(), -1);
        assert_eq!(Polynomial::<f64>::constant(2, 1.0).degree(), 0);
        assert_eq!(poly2(&[(&[2, 1], 1.0)]).degree(), 3);
    }

    #[test]
    fn cleanup_drops_tiny_coefficients() {
        let mut p = Polynomial::<f64>::zero(1);
        p.add_term(Monomial::var(1, 0), 1e-13);
        assert!(p.is_zero());
    }

    #[test]
    fn canonical_text_form() {
        let p = poly2(&[(&[1, 0], -0.42), (&[0, 1], -1.05), (&[2, 0], -2.3)]);
        assert_eq!(p.to_text(&names2()), "-0.42*x1 - 1.05*x2 - 2.3*x1^2");
        assert_eq!(Polynomial::<f64>::zero(2).to_text(&names2()), "0");
        let q = poly2(&[(&[1, 0], 1.0), (&[0, 1], -1.0)]);
        assert_eq!(q.to_text(&names2()), "x1 - x2");
    }

    fn names2() -> Vec<String> {
        vec!["x1".to_string(), "x2".to_string()]
    }

    #[test]
    fn generic_scalar_f32_instantiates() {
        let x = Polynomial::<f32>::variable(1, 0);
        let p = &(&x * &x) - &Polynomial::constant(1, 1.0f32);
        assert!((p.evaluate(&[2.0f32]) - 3.0).abs() < 1e-6);
    }
}
