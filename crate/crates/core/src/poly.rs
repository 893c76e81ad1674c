//! Multivariate polynomials with exact coefficients, the substrate for
//! symbolic generator computations.
//!
//! Variables cover the continuous coordinates (`X`), an auxiliary primed
//! coordinate set used by change-of-coordinate checks (`Prime`), the formal
//! reservoir temperatures, the formal parameter `m`, and a small coefficient
//! field extension: `sqrt2`, `sqrt3` and a formal sine/cosine pair reduced
//! by `s^2 + c^2 = 1`. Reduction happens on insertion, so equality is plain
//! coefficient-wise comparison of canonical forms.
//!
//! The coefficient ring is generic: exact rationals for identity checks,
//! `f64` for numeric-angle modes.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use std::collections::BTreeMap;
use std::fmt;

/// Polynomial variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    /// Continuous coordinate (site variable), 1-based for chains.
    X(u8),
    /// Primed coordinate of a rotated frame.
    Prime(u8),
    TLeft,
    TRight,
    /// Formal parameter m.
    M,
    Sqrt2,
    Sqrt3,
    /// Formal sine of the frame angle.
    SinPhi,
    /// Formal cosine of the frame angle.
    CosPhi,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X(i) => write!(f, "x{i}"),
            Var::Prime(i) => write!(f, "xp{i}"),
            Var::TLeft => write!(f, "Tl"),
            Var::TRight => write!(f, "Tr"),
            Var::M => write!(f, "m"),
            Var::Sqrt2 => write!(f, "sqrt2"),
            Var::Sqrt3 => write!(f, "sqrt3"),
            Var::SinPhi => write!(f, "s"),
            Var::CosPhi => write!(f, "c"),
        }
    }
}

/// Exponent vector, sparse over [`Var`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Monomial(pub BTreeMap<Var, u32>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(BTreeMap::new())
    }

    pub fn var(v: Var) -> Self {
        Monomial(BTreeMap::from([(v, 1)]))
    }

    pub fn exp(&self, v: Var) -> u32 {
        self.0.get(&v).copied().unwrap_or(0)
    }

    pub fn with_exp(mut self, v: Var, e: u32) -> Self {
        if e == 0 {
            self.0.remove(&v);
        } else {
            self.0.insert(v, e);
        }
        self
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = self.0.clone();
        for (v, e) in &other.0 {
            *out.entry(*v).or_insert(0) += e;
        }
        Monomial(out)
    }

    pub fn total_degree(&self) -> u32 {
        self.0.values().sum()
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|(v, e)| if *e == 1 { v.to_string() } else { format!("{v}^{e}") })
            .collect();
        write!(f, "{}", parts.join("*"))
    }
}

/// Coefficient ring abstraction: exact rationals or floats.
pub trait Coeff: Clone + PartialEq + fmt::Debug {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_ratio(numer: i64, denom: i64) -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn abs_f64(&self) -> f64;
    fn render(&self) -> String;
}

impl Coeff for BigRational {
    fn zero() -> Self {
        num_traits::Zero::zero()
    }
    fn one() -> Self {
        num_traits::One::one()
    }
    fn from_ratio(numer: i64, denom: i64) -> Self {
        BigRational::new(BigInt::from(numer), BigInt::from(denom))
    }
    fn is_zero(&self) -> bool {
        num_traits::Zero::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn abs_f64(&self) -> f64 {
        self.abs().to_f64().unwrap_or(f64::INFINITY)
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

impl Coeff for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_ratio(numer: i64, denom: i64) -> Self {
        numer as f64 / denom as f64
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn abs_f64(&self) -> f64 {
        self.abs()
    }
    fn render(&self) -> String {
        format!("{self:?}")
    }
}

/// Sparse multivariate polynomial in canonical reduced form.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial<C: Coeff> {
    terms: BTreeMap<Monomial, C>,
}

impl<C: Coeff> Polynomial<C> {
    pub fn zero() -> Self {
        Polynomial { terms: BTreeMap::new() }
    }

    pub fn constant(c: C) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn from_ratio(numer: i64, denom: i64) -> Self {
        Self::constant(C::from_ratio(numer, denom))
    }

    pub fn one() -> Self {
        Self::constant(C::one())
    }

    pub fn var(v: Var) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::var(v), C::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C)> {
        self.terms.iter()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.abs_f64()).fold(0.0, f64::max)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|m| m.total_degree()).max().unwrap_or(0)
    }

    /// Inserts `coeff * mono`, applying the canonical reductions
    /// `sqrt2^2 -> 2`, `sqrt3^2 -> 3` and `s^2 -> 1 - c^2`.
    pub fn add_term(&mut self, mono: Monomial, coeff: C) {
        if coeff.is_zero() {
            return;
        }
        let mut mono = mono;
        let mut coeff = coeff;
        for (radical, square) in [(Var::Sqrt2, 2i64), (Var::Sqrt3, 3i64)] {
            let e = mono.exp(radical);
            if e >= 2 {
                let pairs = e / 2;
                let mut factor = C::one();
                for _ in 0..pairs {
                    factor = factor.mul(&C::from_ratio(square, 1));
                }
                coeff = coeff.mul(&factor);
                mono = mono.with_exp(radical, e % 2);
            }
        }
        let s_exp = mono.exp(Var::SinPhi);
        if s_exp >= 2 {
            // s^2 = 1 - c^2, eliminate even powers of the sine.
            let reduced = mono.clone().with_exp(Var::SinPhi, s_exp - 2);
            let with_c = reduced
                .clone()
                .with_exp(Var::CosPhi, reduced.exp(Var::CosPhi) + 2);
            self.add_term(reduced, coeff.clone());
            self.add_term(with_c, coeff.neg());
            return;
        }
        let entry = self.terms.entry(mono.clone()).or_insert_with(C::zero);
        *entry = entry.add(&coeff);
        if entry.is_zero() {
            self.terms.remove(&mono);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.neg());
        }
        out
    }

    pub fn neg(&self) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c.neg());
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca.mul(cb));
            }
        }
        out
    }

    pub fn scale(&self, c: &C) -> Self {
        let mut out = Self::zero();
        for (m, v) in &self.terms {
            out.add_term(m.clone(), v.mul(c));
        }
        out
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut out = Self::one();
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// Exact partial derivative.
    pub fn derivative(&self, v: Var) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let e = m.exp(v);
            if e == 0 {
                continue;
            }
            let mono = m.clone().with_exp(v, e - 1);
            out.add_term(mono, c.mul(&C::from_ratio(e as i64, 1)));
        }
        out
    }

    /// Substitutes `replacement` for every occurrence of `v`.
    pub fn substitute(&self, v: Var, replacement: &Polynomial<C>) -> Self {
        let max_e = self.terms.keys().map(|m| m.exp(v)).max().unwrap_or(0);
        let mut powers = Vec::with_capacity(max_e as usize + 1);
        powers.push(Self::one());
        for e in 1..=max_e {
            let next = powers[e as usize - 1].mul(replacement);
            powers.push(next);
        }
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let e = m.exp(v);
            let rest = m.clone().with_exp(v, 0);
            let mut base = Self::zero();
            base.add_term(rest, c.clone());
            out = out.add(&base.mul(&powers[e as usize]));
        }
        out
    }

    /// Variables with nonzero exponent anywhere in the polynomial.
    pub fn variables(&self) -> Vec<Var> {
        let mut vars: Vec<Var> = self
            .terms
            .keys()
            .flat_map(|m| m.0.keys().copied())
            .collect();
        vars.sort();
        vars.dedup();
        vars
    }
}

impl<C: Coeff> fmt::Display for Polynomial<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(m, c)| {
                if m.0.is_empty() {
                    c.render()
                } else {
                    format!("{} {}", c.render(), m)
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Shorthand for the exact instantiation.
pub type RationalPolynomial = Polynomial<BigRational>;

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn x(i: u8) -> RationalPolynomial {
        Polynomial::var(Var::X(i))
    }

    #[test]
    fn arithmetic_and_cancellation() {
        let p = x(1).add(&x(2));
        let q_ = x(1).sub(&x(2));
        let prod = p.mul(&q_);
        // (x1 + x2)(x1 - x2) = x1^2 - x2^2.
        let expected = x(1).mul(&x(1)).sub(&x(2).mul(&x(2)));
        assert_eq!(prod, expected);
        assert!(p.sub(&p).is_zero());
    }

    #[test]
    fn radicals_reduce_to_integers() {
        let s2 = RationalPolynomial::var(Var::Sqrt2);
        assert_eq!(s2.mul(&s2), Polynomial::from_ratio(2, 1));
        let s3 = RationalPolynomial::var(Var::Sqrt3);
        let p = s2.mul(&s3);
        // (sqrt2 sqrt3)^2 = 6.
        assert_eq!(p.mul(&p), Polynomial::from_ratio(6, 1));
        // Odd powers keep one radical factor.
        let cube = s2.pow(3);
        let expected = s2.scale(&q(2, 1));
        assert_eq!(cube, expected);
    }

    #[test]
    fn sine_squares_eliminate() {
        let s = RationalPolynomial::var(Var::SinPhi);
        let c = RationalPolynomial::var(Var::CosPhi);
        // s^2 + c^2 = 1.
        let pythagoras = s.mul(&s).add(&c.mul(&c));
        assert_eq!(pythagoras, RationalPolynomial::one());
        // s^4 = (1 - c^2)^2.
        let lhs = s.pow(4);
        let rhs = RationalPolynomial::one().sub(&c.pow(2)).pow(2);
        assert_eq!(lhs, rhs);
        // s^3 keeps a single sine factor.
        let s_cubed = s.pow(3);
        let expected = s.mul(&RationalPolynomial::one().sub(&c.pow(2)));
        assert_eq!(s_cubed, expected);
    }

    #[test]
    fn derivative_of_products() {
        // d/dx1 (x1^3 x2) = 3 x1^2 x2.
        let p = x(1).pow(3).mul(&x(2));
        let d = p.derivative(Var::X(1));
        let expected = x(1).pow(2).mul(&x(2)).scale(&q(3, 1));
        assert_eq!(d, expected);
        assert!(p.derivative(Var::X(3)).is_zero());
    }

    #[test]
    fn substitution_is_a_ring_morphism() {
        // Substitute x1 -> x2 + 1 in x1^2 and check (x2 + 1)^2.
        let p = x(1).pow(2);
        let replacement = x(2).add(&RationalPolynomial::one());
        let sub = p.substitute(Var::X(1), &replacement);
        assert_eq!(sub, replacement.pow(2));
    }

    #[test]
    fn derivative_is_linear() {
        let p = x(1).pow(2).mul(&x(2));
        let r = x(2).pow(3);
        let lhs = p.scale(&q(3, 1)).add(&r.scale(&q(-2, 1))).derivative(Var::X(2));
        let rhs = p
            .derivative(Var::X(2))
            .scale(&q(3, 1))
            .add(&r.derivative(Var::X(2)).scale(&q(-2, 1)));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn float_instantiation_behaves() {
        let p: Polynomial<f64> = Polynomial::var(Var::X(1)).scale(&0.5);
        let sq = p.mul(&p);
        assert_eq!(sq.max_abs_coeff(), 0.25);
        assert_eq!(sq.total_degree(), 2);
    }
}
