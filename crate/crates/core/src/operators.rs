//! Differential operators with polynomial coefficients and dual jump
//! operators with exact (possibly `m`-formal) rates. Together they express
//! both sides of a generator-level duality identity symbolically.

use num_rational::Ratio;
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::jump::sip_rate_pairs;
use crate::model::{Boundary, ChainSpec, DualConfig, Family};
use crate::poly::{Coeff, Monomial, Polynomial, Var};

/// The duality parameter, either carried formally or fixed to a rational.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MParam {
    Formal,
    Fixed(Ratio<i64>),
}

impl MParam {
    /// `m/2` as a polynomial.
    pub fn half<C: Coeff>(&self) -> Polynomial<C> {
        match self {
            MParam::Formal => Polynomial::var(Var::M).scale(&C::from_ratio(1, 2)),
            MParam::Fixed(m) => Polynomial::from_ratio(*m.numer(), 2 * *m.denom()),
        }
    }
}

/// Formal sum of terms `coefficient(x) * d^alpha`, `alpha` a derivative
/// multi-index over continuous variables.
#[derive(Debug, Clone)]
pub struct DiffOperator<C: Coeff> {
    terms: Vec<(Polynomial<C>, Monomial)>,
}

fn binomial(n: u32, k: u32) -> i64 {
    let mut acc = 1i64;
    for j in 0..k {
        acc = acc * (n - j) as i64 / (j + 1) as i64;
    }
    acc
}

impl<C: Coeff> DiffOperator<C> {
    pub fn zero() -> Self {
        DiffOperator { terms: Vec::new() }
    }

    /// Zero-order term: multiplication by a polynomial.
    pub fn mult(p: Polynomial<C>) -> Self {
        DiffOperator { terms: vec![(p, Monomial::one())] }
    }

    /// First-order term `coeff * d/dv`.
    pub fn first_order(coeff: Polynomial<C>, v: Var) -> Self {
        DiffOperator { terms: vec![(coeff, Monomial::var(v))] }
    }

    /// Pure derivative `d^order / dv^order`.
    pub fn derivative(v: Var, order: u32) -> Self {
        DiffOperator {
            terms: vec![(Polynomial::one(), Monomial::one().with_exp(v, order))],
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        DiffOperator { terms }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().map(|(p, m)| (p.neg(), m.clone())));
        DiffOperator { terms }
    }

    pub fn scale_ratio(&self, numer: i64, denom: i64) -> Self {
        let c = C::from_ratio(numer, denom);
        DiffOperator {
            terms: self.terms.iter().map(|(p, m)| (p.scale(&c), m.clone())).collect(),
        }
    }

    /// Multiplies every coefficient polynomial from the left.
    pub fn scale_poly(&self, factor: &Polynomial<C>) -> Self {
        DiffOperator {
            terms: self.terms.iter().map(|(p, m)| (p.mul(factor), m.clone())).collect(),
        }
    }

    /// Operator composition `self . other` by the Leibniz rule.
    pub fn compose(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        for (p, alpha) in &self.terms {
            for (q, beta) in &other.terms {
                // d^alpha (q d^beta f) expands over subsets gamma <= alpha.
                for (gamma, coeff) in enumerate_sub_indices(alpha) {
                    let mut dq = q.clone();
                    for (v, e) in &gamma.0 {
                        for _ in 0..*e {
                            dq = dq.derivative(*v);
                        }
                    }
                    if dq.is_zero() {
                        continue;
                    }
                    // Residual derivative order alpha - gamma + beta.
                    let mut residual = beta.clone();
                    for (v, e) in &alpha.0 {
                        let rem = e - gamma.exp(*v);
                        if rem > 0 {
                            let prior = residual.exp(*v);
                            residual = residual.with_exp(*v, prior + rem);
                        }
                    }
                    out.push((p.mul(&dq).scale(&C::from_ratio(coeff, 1)), residual));
                }
            }
        }
        DiffOperator { terms: out }
    }

    /// Applies the operator to a polynomial, exactly.
    pub fn apply(&self, f: &Polynomial<C>) -> Polynomial<C> {
        let mut out = Polynomial::zero();
        for (p, alpha) in &self.terms {
            let mut df = f.clone();
            for (v, e) in &alpha.0 {
                for _ in 0..*e {
                    df = df.derivative(*v);
                }
                if df.is_zero() {
                    break;
                }
            }
            if !df.is_zero() {
                out = out.add(&p.mul(&df));
            }
        }
        out
    }

    /// Continuous variables the operator touches.
    pub fn continuous_domain(&self) -> BTreeSet<Var> {
        let mut vars = BTreeSet::new();
        for (p, alpha) in &self.terms {
            vars.extend(alpha.0.keys().copied());
            vars.extend(
                p.variables()
                    .into_iter()
                    .filter(|v| matches!(v, Var::X(_) | Var::Prime(_))),
            );
        }
        vars
    }
}

/// All multi-indices `gamma <= alpha` with the product of binomial weights.
fn enumerate_sub_indices(alpha: &Monomial) -> Vec<(Monomial, i64)> {
    let vars: Vec<(Var, u32)> = alpha.0.iter().map(|(v, e)| (*v, *e)).collect();
    let mut out = vec![(Monomial::one(), 1i64)];
    for (v, e) in vars {
        let mut next = Vec::with_capacity(out.len() * (e as usize + 1));
        for (m, w) in &out {
            for g in 0..=e {
                next.push((m.clone().with_exp(v, g), w * binomial(e, g)));
            }
        }
        out = next;
    }
    out
}

/// Checked application: every continuous variable of `f` must be inside the
/// operator's variable set.
pub fn apply_generator<C: Coeff>(
    op: &DiffOperator<C>,
    f: &Polynomial<C>,
) -> Result<Polynomial<C>> {
    let domain = op.continuous_domain();
    for v in f.variables() {
        if matches!(v, Var::X(_) | Var::Prime(_)) && !domain.contains(&v) {
            return Err(Error::VariableMismatch(v.to_string()));
        }
    }
    Ok(op.apply(f))
}

/// Rotation field `x_i d_j - x_j d_i` on the given variables.
pub fn rotation_field<C: Coeff>(vi: Var, vj: Var) -> DiffOperator<C> {
    DiffOperator::first_order(Polynomial::var(vi), vj)
        .sub(&DiffOperator::first_order(Polynomial::var(vj), vi))
}

/// Ornstein-Uhlenbeck reservoir generator `-x d + T d^2` at one site.
pub fn ou_reservoir<C: Coeff>(site: Var, temperature: Var) -> DiffOperator<C> {
    let second = DiffOperator {
        terms: vec![(
            Polynomial::var(temperature),
            Monomial::one().with_exp(site, 2),
        )],
    };
    second.sub(&DiffOperator::first_order(Polynomial::var(site), site))
}

/// Bulk generator of the velocity-exchange chain: the squared rotation
/// field summed over nearest-neighbor edges, plus OU reservoirs when
/// requested (temperatures carried as formal variables).
pub fn velocity_exchange_generator<C: Coeff>(l: usize, reservoirs: bool) -> DiffOperator<C> {
    let mut op = DiffOperator::zero();
    for i in 1..l {
        let rot = rotation_field(Var::X(i as u8), Var::X(i as u8 + 1));
        op = op.add(&rot.compose(&rot));
    }
    if reservoirs {
        op = op.add(&ou_reservoir(Var::X(1), Var::TLeft));
        op = op.add(&ou_reservoir(Var::X(l as u8), Var::TRight));
    }
    op
}

/// Bulk generator of the energy-exchange diffusion:
/// `sum_i z_i z_{i+1} (d_i - d_{i+1})^2 - (m/2)(z_i - z_{i+1})(d_i - d_{i+1})`.
pub fn energy_exchange_generator<C: Coeff>(l: usize, m: MParam) -> DiffOperator<C> {
    let mut op = DiffOperator::zero();
    for i in 1..l {
        let (zi, zj) = (Var::X(i as u8), Var::X(i as u8 + 1));
        let grad = DiffOperator::derivative(zi, 1).sub(&DiffOperator::derivative(zj, 1));
        let second = grad.compose(&grad);
        let weighted = DiffOperator {
            terms: second
                .terms
                .iter()
                .map(|(p, mono)| {
                    (p.mul(&Polynomial::var(zi)).mul(&Polynomial::var(zj)), mono.clone())
                })
                .collect(),
        };
        let drift_coeff = Polynomial::var(zi).sub(&Polynomial::var(zj)).mul(&m.half()).neg();
        let drift = DiffOperator {
            terms: grad
                .terms
                .iter()
                .map(|(p, mono)| (p.mul(&drift_coeff), mono.clone()))
                .collect(),
        };
        op = op.add(&weighted).add(&drift);
    }
    op
}

/// Generator of the three-site rotor: the square of the sum of the three
/// coordinate rotation fields, i.e. rotation about the diagonal.
pub fn rotor_generator<C: Coeff>() -> DiffOperator<C> {
    let (x, y, z) = (Var::X(0), Var::X(1), Var::X(2));
    let field = rotation_field::<C>(x, y)
        .add(&rotation_field(y, z))
        .add(&rotation_field(z, x));
    field.compose(&field)
}

/// `factor * (a d_b - b d_a)^2`, the two-site rotation generator in an
/// arbitrary pair of variables.
pub fn scaled_rotation_squared<C: Coeff>(a: Var, b: Var, factor: i64) -> DiffOperator<C> {
    let rot = rotation_field::<C>(a, b);
    rot.compose(&rot).scale_ratio(factor, 1)
}

/// Dual jump operator: finite transition lists with polynomial rates.
///
/// `clock` is the rate multiple relating the walker clock to the diffusion
/// clock of the paired generator, so that the duality identity holds with
/// zero residual rather than up to a global time change.
#[derive(Debug, Clone)]
pub struct JumpOperator {
    pub l: usize,
    pub m: MParam,
    pub absorbing: bool,
    pub clock: i64,
}

impl JumpOperator {
    pub fn sip_absorbing(l: usize, m: MParam, clock: i64) -> Self {
        JumpOperator { l, m, absorbing: true, clock }
    }

    pub fn sip_closed(l: usize, m: MParam, clock: i64) -> Self {
        JumpOperator { l, m, absorbing: false, clock }
    }

    /// Outgoing transitions of `eta` with exact polynomial rates.
    pub fn transitions<C: Coeff>(&self, eta: &DualConfig) -> Result<Vec<(DualConfig, Polynomial<C>)>> {
        match self.m {
            MParam::Fixed(m) => {
                // Shared code path with the simulator's rate table.
                let spec = ChainSpec::new(Family::Sip, self.l).with_m(m).with_boundary(
                    if self.absorbing { Boundary::Absorbing } else { Boundary::Closed },
                );
                Ok(sip_rate_pairs(eta, &spec)?
                    .into_iter()
                    .map(|t| {
                        let rate = Polynomial::from_ratio(
                            *t.rate.numer() * self.clock,
                            *t.rate.denom(),
                        );
                        (eta.hop(t.from, t.to), rate)
                    })
                    .collect())
            }
            MParam::Formal => {
                if eta.len() != self.l + 2 {
                    return Err(Error::DimensionMismatch {
                        expected: self.l + 2,
                        got: eta.len(),
                    });
                }
                let half_m: Polynomial<C> = MParam::Formal.half();
                let clock = Polynomial::from_ratio(self.clock, 1);
                let mut out: Vec<(DualConfig, Polynomial<C>)> = Vec::new();
                let mut push = |from: usize, to: usize, rate: Polynomial<C>| {
                    if !rate.is_zero() {
                        out.push((eta.hop(from, to), rate.mul(&clock)));
                    }
                };
                for i in 1..self.l {
                    let ni = Polynomial::from_ratio(eta.0[i] as i64, 1);
                    let nj = Polynomial::from_ratio(eta.0[i + 1] as i64, 1);
                    if eta.0[i] > 0 {
                        push(i, i + 1, ni.mul(&half_m.add(&nj)));
                    }
                    if eta.0[i + 1] > 0 {
                        push(i + 1, i, nj.mul(&half_m.add(&ni)));
                    }
                }
                if self.absorbing {
                    if eta.0[1] > 0 {
                        push(1, 0, half_m.scale(&C::from_ratio(eta.0[1] as i64, 1)));
                    }
                    if eta.0[self.l] > 0 {
                        push(
                            self.l,
                            self.l + 1,
                            half_m.scale(&C::from_ratio(eta.0[self.l] as i64, 1)),
                        );
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Applies a dual jump generator to a duality column:
/// `sum rate(eta -> eta') (D(., eta') - D(., eta))`.
pub fn apply_dual_generator<C: Coeff, F>(
    op: &JumpOperator,
    d_column: F,
    eta: &DualConfig,
) -> Result<Polynomial<C>>
where
    F: Fn(&DualConfig) -> Result<Polynomial<C>>,
{
    let d_eta = d_column(eta)?;
    let mut out = Polynomial::zero();
    for (target, rate) in op.transitions::<C>(eta)? {
        let d_target = d_column(&target)?;
        out = out.add(&rate.mul(&d_target.sub(&d_eta)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::RationalPolynomial;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    fn x(i: u8) -> RationalPolynomial {
        Polynomial::var(Var::X(i))
    }

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn edge_generator_annihilates_pair_energy() {
        let rot = rotation_field::<BigRational>(Var::X(1), Var::X(2));
        let gen = rot.compose(&rot);
        let energy = x(1).pow(2).add(&x(2).pow(2));
        assert!(gen.apply(&energy).is_zero());
    }

    #[test]
    fn edge_generator_on_single_site_energy() {
        // (x1 d2 - x2 d1)^2 x1^2 = 2 (x2^2 - x1^2).
        let rot = rotation_field::<BigRational>(Var::X(1), Var::X(2));
        let gen = rot.compose(&rot);
        let out = gen.apply(&x(1).pow(2));
        let expected = x(2).pow(2).sub(&x(1).pow(2)).scale(&q(2, 1));
        assert_eq!(out, expected);
    }

    #[test]
    fn rotor_generator_conserves_momentum_and_energy() {
        let gen = rotor_generator::<BigRational>();
        let momentum = x(0).add(&x(1)).add(&x(2));
        let energy = x(0).pow(2).add(&x(1).pow(2)).add(&x(2).pow(2));
        assert!(gen.apply(&momentum).is_zero());
        assert!(gen.apply(&energy).is_zero());
    }

    #[test]
    fn ou_reservoir_generator_on_x_squared() {
        // (-x d + T d^2) x^2 = -2 x^2 + 2 T.
        let gen = ou_reservoir::<BigRational>(Var::X(1), Var::TLeft);
        let out = gen.apply(&x(1).pow(2));
        let expected = x(1)
            .pow(2)
            .scale(&q(-2, 1))
            .add(&Polynomial::var(Var::TLeft).scale(&q(2, 1)));
        assert_eq!(out, expected);
    }

    #[test]
    fn composition_follows_leibniz() {
        // (x d)^2 x^n = n^2 x^n.
        let xd = DiffOperator::first_order(x(1), Var::X(1));
        let sq = xd.compose(&xd);
        for n in 1..6u32 {
            let out = sq.apply(&x(1).pow(n));
            let expected = x(1).pow(n).scale(&q((n * n) as i64, 1));
            assert_eq!(out, expected, "degree {n}");
        }
    }

    #[test]
    fn application_is_linear() {
        let gen = velocity_exchange_generator::<BigRational>(3, true);
        let f = x(1).pow(2).mul(&x(2).pow(2));
        let g = x(3).pow(4);
        let combo = f.scale(&q(3, 2)).add(&g.scale(&q(-5, 1)));
        let lhs = gen.apply(&combo);
        let rhs = gen.apply(&f).scale(&q(3, 2)).add(&gen.apply(&g).scale(&q(-5, 1)));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn generator_application_checks_variables() {
        let gen = velocity_exchange_generator::<BigRational>(2, false);
        let f = x(5).pow(2);
        assert!(matches!(
            apply_generator(&gen, &f),
            Err(Error::VariableMismatch(_))
        ));
        assert!(apply_generator(&gen, &x(1).pow(2)).is_ok());
    }

    #[test]
    fn formal_rates_match_fixed_rates_at_m_two() {
        let eta = DualConfig::parse("0;2,1,0;0").unwrap();
        let formal = JumpOperator::sip_absorbing(3, MParam::Formal, 1);
        let fixed = JumpOperator::sip_absorbing(3, MParam::Fixed(Ratio::from_integer(2)), 1);
        let ft: Vec<(DualConfig, RationalPolynomial)> = formal.transitions(&eta).unwrap();
        let xt: Vec<(DualConfig, RationalPolynomial)> = fixed.transitions(&eta).unwrap();
        assert_eq!(ft.len(), xt.len());
        let two = Polynomial::from_ratio(2, 1);
        for ((ta, ra), (tb, rb)) in ft.iter().zip(&xt) {
            assert_eq!(ta, tb);
            assert_eq!(ra.substitute(Var::M, &two), *rb);
        }
    }

    #[test]
    fn absorbed_configurations_have_no_transitions() {
        let mut eta = DualConfig::empty(3);
        eta.0[0] = 2;
        let op = JumpOperator::sip_absorbing(3, MParam::Formal, 1);
        let t: Vec<(DualConfig, RationalPolynomial)> = op.transitions(&eta).unwrap();
        assert!(t.is_empty());
        let applied: RationalPolynomial =
            apply_dual_generator(&op, |_| Ok(Polynomial::one()), &eta).unwrap();
        assert!(applied.is_zero());
    }

    #[test]
    fn clock_scales_every_rate() {
        let eta = DualConfig::parse("0;1,1;0").unwrap();
        let base = JumpOperator::sip_closed(2, MParam::Fixed(Ratio::from_integer(1)), 1);
        let scaled = JumpOperator::sip_closed(2, MParam::Fixed(Ratio::from_integer(1)), 4);
        let bt: Vec<(DualConfig, RationalPolynomial)> = base.transitions(&eta).unwrap();
        let st: Vec<(DualConfig, RationalPolynomial)> = scaled.transitions(&eta).unwrap();
        for ((_, rb), (_, rs)) in bt.iter().zip(&st) {
            assert_eq!(rb.scale(&q(4, 1)), *rs);
        }
    }
}
