//! Symbolic verification of the duality identities and the su(1,1) ladder
//! structure, in exact arithmetic wherever the inputs are rational.
//!
//! Each check computes both sides of the generator identity
//! `L D(., eta) = L_dual D(x, .)` as polynomials and compares coefficients.
//! Exact modes demand identically zero residuals; numeric-angle modes allow
//! residual coefficients up to `1e-10` relative to the largest coefficient.
//!
//! A note on clocks: the dual jump rates carry an explicit rate multiple
//! (4 for the velocity chain, 12 for the rotor) that aligns the walker
//! clock with the diffusion clock. Absorption probabilities and stationary
//! moments are invariant under this time change; the generator identity is
//! not, so the verifier pins the multiple explicitly.

use num_rational::{BigRational, Ratio};
use serde::Serialize;

use crate::absorb::DualStateSpace;
use crate::error::{Error, Result};
use crate::model::DualConfig;
use crate::operators::{
    apply_dual_generator, apply_generator, energy_exchange_generator, rotor_generator,
    scaled_rotation_squared, velocity_exchange_generator, DiffOperator, JumpOperator, MParam,
};
use crate::poly::{Coeff, Polynomial, RationalPolynomial, Var};

/// Largest total walker degree accepted by the symbolic checks.
pub const DEGREE_BUDGET: u32 = 8;

/// Rate multiple aligning the dual walker clock with the velocity-exchange
/// diffusion clock.
pub const VELOCITY_DUAL_CLOCK: i64 = 4;

/// Rate multiple for the rotor / two-walker pair (3 from the rotated
/// generator times the velocity multiple).
pub const ROTOR_DUAL_CLOCK: i64 = 12;

/// Relative residual tolerance for numeric-angle modes.
pub const FLOAT_TOL: f64 = 1e-10;

/// All configurations with `1..=max_total` walkers over bulk sites and
/// cemeteries, for exercising boundary-walker cases.
pub fn configs_with_cemeteries(l: usize, max_total: u32) -> Vec<DualConfig> {
    let mut out = Vec::new();
    for k in 1..=max_total {
        out.extend(DualStateSpace::new(l, k).states);
    }
    out
}

/// Bulk-only configurations with `1..=max_total` walkers.
pub fn bulk_only_configs(l: usize, max_total: u32) -> Vec<DualConfig> {
    let mut out = Vec::new();
    for k in 1..=max_total {
        out.extend(crate::jump::enumerate_bulk_configs(l, k));
    }
    out
}

/// Outcome of one verified identity.
#[derive(Debug, Clone, Serialize)]
pub struct CaseResult {
    pub inputs: String,
    pub pass: bool,
    /// Nonzero residual terms as (monomial, coefficient) strings.
    pub residual_terms: Vec<(String, String)>,
    /// Largest residual coefficient relative to the sides' scale.
    pub relative_residual: f64,
}

/// A named family of verified identities.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub check: String,
    pub pass: bool,
    pub cases: Vec<CaseResult>,
}

impl Report {
    pub fn new(check: impl Into<String>) -> Self {
        Report { check: check.into(), pass: true, cases: Vec::new() }
    }

    pub fn push(&mut self, case: CaseResult) {
        self.pass &= case.pass;
        self.cases.push(case);
    }

    pub fn failures(&self) -> impl Iterator<Item = &CaseResult> {
        self.cases.iter().filter(|c| !c.pass)
    }
}

fn residual_case<C: Coeff>(
    inputs: String,
    lhs: &Polynomial<C>,
    rhs: &Polynomial<C>,
    float_tol: Option<f64>,
) -> CaseResult {
    let residual = lhs.sub(rhs);
    let scale = lhs.max_abs_coeff().max(rhs.max_abs_coeff()).max(1.0);
    let rel = residual.max_abs_coeff() / scale;
    let pass = match float_tol {
        None => residual.is_zero(),
        Some(tol) => rel <= tol,
    };
    let residual_terms = if pass {
        Vec::new()
    } else {
        residual
            .terms()
            .map(|(m, c)| (m.to_string(), c.render()))
            .collect()
    };
    CaseResult { inputs, pass, residual_terms, relative_residual: rel }
}

/// Odd double factorial as an i64; fine for the degree budget.
fn double_factorial_odd_i64(n: u32) -> i64 {
    (1..=n).map(|j| (2 * j - 1) as i64).product()
}

/// Duality column of the velocity chain:
/// `Tl^eta0 * prod_i x_i^(2 eta_i) / (2 eta_i - 1)!! * Tr^etaL1`.
pub fn velocity_duality_column<C: Coeff>(eta: &DualConfig) -> Result<Polynomial<C>> {
    let l = eta.bulk_len();
    let mut mono = crate::poly::Monomial::one();
    let mut denom = 1i64;
    for (i, &n) in eta.0.iter().enumerate() {
        if n == 0 {
            continue;
        }
        if i == 0 {
            mono = mono.with_exp(Var::TLeft, n);
        } else if i == l + 1 {
            mono = mono.with_exp(Var::TRight, n);
        } else {
            mono = mono.with_exp(Var::X(i as u8), 2 * n);
            denom *= double_factorial_odd_i64(n);
        }
    }
    let mut p = Polynomial::zero();
    p.add_term(mono, C::from_ratio(1, denom));
    Ok(p)
}

/// Scaled duality column of the energy chain with formal `m`. The exact
/// column carries `Gamma(m/2) / (2^n Gamma(m/2 + n))` per site; multiplying
/// by the eta-independent factor `(2^cap w(cap))^L` turns it into the
/// polynomial `prod_i z_i^n 2^(cap-n) prod_{j=n}^{cap-1} (m/2 + j)`, which
/// satisfies the same generator identity.
pub fn energy_duality_column_scaled<C: Coeff>(
    eta: &DualConfig,
    cap: u32,
) -> Result<Polynomial<C>> {
    let l = eta.bulk_len();
    if eta.0[0] != 0 || eta.0[l + 1] != 0 {
        return Err(Error::DomainGap(format!(
            "energy duality is bulk-only, got cemetery walkers in {eta}"
        )));
    }
    let mut out = Polynomial::one();
    for (i, &n) in eta.0[1..=l].iter().enumerate() {
        if n > cap {
            return Err(Error::DomainGap(format!(
                "site occupation {n} exceeds the scaling cap {cap}"
            )));
        }
        let mut site = Polynomial::var(Var::X(i as u8 + 1)).pow(n);
        site = site.scale(&C::from_ratio(1i64 << (cap - n), 1));
        let half_m: Polynomial<C> = MParam::Formal.half();
        for j in n..cap {
            site = site.mul(&half_m.add(&Polynomial::from_ratio(j as i64, 1)));
        }
        out = out.mul(&site);
    }
    Ok(out)
}

/// Rotation frame for the rotor duality: the angle is carried formally, as
/// exact radicals for the distinguished angles, or as a float.
#[derive(Debug, Clone)]
pub enum RotationFrame {
    /// Formal (sin, cos) pair reduced by `s^2 + c^2 = 1`; verifies every
    /// angle at once.
    Symbolic,
    /// Exact sine and cosine in the radical-extended rationals.
    ExactAngle { label: String, s: RationalPolynomial, c: RationalPolynomial },
    /// Floating-point angle.
    Numeric { phi: f64 },
}

impl RotationFrame {
    pub fn symbolic() -> Self {
        RotationFrame::Symbolic
    }

    pub fn exact_zero() -> Self {
        RotationFrame::ExactAngle {
            label: "0".into(),
            s: Polynomial::zero(),
            c: Polynomial::one(),
        }
    }

    pub fn exact_pi_over_6() -> Self {
        RotationFrame::ExactAngle {
            label: "pi/6".into(),
            s: Polynomial::from_ratio(1, 2),
            c: Polynomial::var(Var::Sqrt3).scale(&Coeff::from_ratio(1, 2)),
        }
    }

    pub fn exact_pi_over_4() -> Self {
        RotationFrame::ExactAngle {
            label: "pi/4".into(),
            s: Polynomial::var(Var::Sqrt2).scale(&Coeff::from_ratio(1, 2)),
            c: Polynomial::var(Var::Sqrt2).scale(&Coeff::from_ratio(1, 2)),
        }
    }

    pub fn numeric(phi: f64) -> Self {
        RotationFrame::Numeric { phi }
    }

    pub fn label(&self) -> String {
        match self {
            RotationFrame::Symbolic => "symbolic".into(),
            RotationFrame::ExactAngle { label, .. } => format!("exact {label}"),
            RotationFrame::Numeric { phi } => format!("phi={phi}"),
        }
    }

    fn sc_rational(&self) -> Option<(RationalPolynomial, RationalPolynomial)> {
        match self {
            RotationFrame::Symbolic => Some((
                Polynomial::var(Var::SinPhi),
                Polynomial::var(Var::CosPhi),
            )),
            RotationFrame::ExactAngle { s, c, .. } => Some((s.clone(), c.clone())),
            RotationFrame::Numeric { .. } => None,
        }
    }
}

/// Columns of the rotation matrix taking the third axis to the diagonal:
/// entries as polynomials in the coefficient ring.
fn rotation_columns<C: Coeff>(
    s: &Polynomial<C>,
    c: &Polynomial<C>,
    sqrt2: &Polynomial<C>,
    sqrt3: &Polynomial<C>,
) -> [[Polynomial<C>; 3]; 3] {
    let a = sqrt2.scale(&C::from_ratio(1, 2)); // sqrt2 / 2
    let b = sqrt2.mul(sqrt3).scale(&C::from_ratio(1, 6)); // sqrt2 / (2 sqrt3)
    let d = sqrt2.mul(sqrt3).scale(&C::from_ratio(1, 3)); // sqrt2 / sqrt3
    let e = sqrt3.scale(&C::from_ratio(1, 3)); // 1 / sqrt3
    let col1 = [
        a.mul(c).neg().sub(&b.mul(s)),
        a.mul(c).sub(&b.mul(s)),
        d.mul(s),
    ];
    let col2 = [
        a.mul(s).sub(&b.mul(c)),
        a.mul(s).neg().sub(&b.mul(c)),
        d.mul(c),
    ];
    let col3 = [e.clone(), e.clone(), e];
    [col1, col2, col3]
}

fn rational_rotation_columns(frame: &RotationFrame) -> Option<[[RationalPolynomial; 3]; 3]> {
    let (s, c) = frame.sc_rational()?;
    Some(rotation_columns(
        &s,
        &c,
        &Polynomial::var(Var::Sqrt2),
        &Polynomial::var(Var::Sqrt3),
    ))
}

fn float_rotation_columns(phi: f64) -> [[Polynomial<f64>; 3]; 3] {
    rotation_columns(
        &Polynomial::constant(phi.sin()),
        &Polynomial::constant(phi.cos()),
        &Polynomial::constant(2.0f64.sqrt()),
        &Polynomial::constant(3.0f64.sqrt()),
    )
}

/// Largest deviation of `R^T R` from the identity (exact zero in the
/// rational modes).
pub fn orthogonality_residual(frame: &RotationFrame) -> f64 {
    fn residual<C: Coeff>(cols: &[[Polynomial<C>; 3]; 3]) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let mut dot = Polynomial::zero();
                for k in 0..3 {
                    dot = dot.add(&cols[i][k].mul(&cols[j][k]));
                }
                if i == j {
                    dot = dot.sub(&Polynomial::one());
                }
                worst = worst.max(dot.max_abs_coeff());
            }
        }
        worst
    }
    match frame {
        RotationFrame::Numeric { phi } => residual(&float_rotation_columns(*phi)),
        _ => residual(&rational_rotation_columns(frame).expect("rational frame")),
    }
}

fn linear_form<C: Coeff>(col: &[Polynomial<C>; 3]) -> Polynomial<C> {
    let mut out = Polynomial::zero();
    for (k, entry) in col.iter().enumerate() {
        out = out.add(&entry.mul(&Polynomial::var(Var::X(k as u8))));
    }
    out
}

fn rotated_duality_generic<C: Coeff>(
    cols: &[[Polynomial<C>; 3]; 3],
    n1: u32,
    n2: u32,
) -> Polynomial<C> {
    let xp = linear_form(&cols[0]);
    let yp = linear_form(&cols[1]);
    let denom = double_factorial_odd_i64(n1) * double_factorial_odd_i64(n2);
    xp.pow(2 * n1).mul(&yp.pow(2 * n2)).scale(&C::from_ratio(1, denom))
}

/// The rotor duality function `(x')^{2 n1} (y')^{2 n2} / ((2n1-1)!!(2n2-1)!!)`
/// with the rotated coordinates substituted, in the frame's arithmetic.
pub fn rotated_duality_function(
    frame: &RotationFrame,
    n1: u32,
    n2: u32,
) -> Result<RationalPolynomial> {
    let cols = rational_rotation_columns(frame).ok_or_else(|| {
        Error::InvalidConfig("numeric frames have no exact duality function".into())
    })?;
    Ok(rotated_duality_generic(&cols, n1, n2))
}

/// Float twin of [`rotated_duality_function`].
pub fn rotated_duality_function_numeric(phi: f64, n1: u32, n2: u32) -> Polynomial<f64> {
    rotated_duality_generic(&float_rotation_columns(phi), n1, n2)
}

/// The duality pairs the verifier understands.
#[derive(Debug, Clone)]
pub enum DualityPair {
    /// Velocity chain with reservoirs against absorbing walkers (m = 1).
    BmpSip1 { l: usize },
    /// Energy diffusion against inclusion walkers, `m` formal, closed.
    BepSip { l: usize },
    /// Three-site rotor against the two-walker chain through a rotated frame.
    L3Rotated { frame: RotationFrame },
}

fn check_budget(eta: &DualConfig) -> Result<()> {
    let total = eta.total();
    if total > DEGREE_BUDGET {
        return Err(Error::DegreeBudgetExceeded { got: total, max: DEGREE_BUDGET });
    }
    Ok(())
}

/// Verifies the generator identity for every configuration in `eta_list`.
pub fn check_duality(pair: &DualityPair, eta_list: &[DualConfig]) -> Result<Report> {
    match pair {
        DualityPair::BmpSip1 { l } => {
            let mut report = Report::new(format!("duality bmp-sip1 L={l}"));
            let op = velocity_exchange_generator::<BigRational>(*l, true);
            let jump = JumpOperator::sip_absorbing(
                *l,
                MParam::Fixed(Ratio::from_integer(1)),
                VELOCITY_DUAL_CLOCK,
            );
            for eta in eta_list {
                check_budget(eta)?;
                let d = velocity_duality_column::<BigRational>(eta)?;
                let lhs = apply_generator(&op, &d)?;
                let rhs = apply_dual_generator(&jump, velocity_duality_column, eta)?;
                report.push(residual_case(format!("eta={eta}"), &lhs, &rhs, None));
            }
            Ok(report)
        }
        DualityPair::BepSip { l } => {
            let mut report = Report::new(format!("duality bep-sip m-formal L={l}"));
            let op = energy_exchange_generator::<BigRational>(*l, MParam::Formal);
            let jump = JumpOperator::sip_closed(*l, MParam::Formal, 1);
            for eta in eta_list {
                check_budget(eta)?;
                let cap = eta.total();
                let column = |e: &DualConfig| energy_duality_column_scaled::<BigRational>(e, cap);
                let lhs = apply_generator(&op, &column(eta)?)?;
                let rhs = apply_dual_generator(&jump, column, eta)?;
                report.push(residual_case(format!("eta={eta}"), &lhs, &rhs, None));
            }
            Ok(report)
        }
        DualityPair::L3Rotated { frame } => {
            let mut report = Report::new(format!("duality l3-rotated {}", frame.label()));
            for eta in eta_list {
                check_budget(eta)?;
                if eta.bulk_len() != 2 || eta.0[0] != 0 || eta.0[3] != 0 {
                    return Err(Error::DomainGap(format!(
                        "rotor duality wants two bulk walker slots, got {eta}"
                    )));
                }
                let (n1, n2) = (eta.0[1], eta.0[2]);
                let case = rotor_duality_case(frame, n1, n2)?;
                report.push(case);
            }
            Ok(report)
        }
    }
}

fn rotor_duality_case(frame: &RotationFrame, n1: u32, n2: u32) -> Result<CaseResult> {
    let jump = JumpOperator::sip_closed(2, MParam::Fixed(Ratio::from_integer(1)), ROTOR_DUAL_CLOCK);
    let label = format!("{} n=({n1},{n2})", frame.label());
    match frame {
        RotationFrame::Numeric { phi } => {
            let cols = float_rotation_columns(*phi);
            let op = rotor_generator::<f64>();
            let column = |e: &DualConfig| -> Result<Polynomial<f64>> {
                Ok(rotated_duality_generic(&cols, e.0[1], e.0[2]))
            };
            let eta = DualConfig::at_sites(2, &site_list(n1, n2));
            let lhs = apply_generator(&op, &column(&eta)?)?;
            let rhs = apply_dual_generator(&jump, column, &eta)?;
            Ok(residual_case(label, &lhs, &rhs, Some(FLOAT_TOL)))
        }
        _ => {
            let cols = rational_rotation_columns(frame).expect("rational frame");
            let op = rotor_generator::<BigRational>();
            let column = |e: &DualConfig| -> Result<RationalPolynomial> {
                Ok(rotated_duality_generic(&cols, e.0[1], e.0[2]))
            };
            let eta = DualConfig::at_sites(2, &site_list(n1, n2));
            let lhs = apply_generator(&op, &column(&eta)?)?;
            let rhs = apply_dual_generator(&jump, column, &eta)?;
            Ok(residual_case(label, &lhs, &rhs, None))
        }
    }
}

fn site_list(n1: u32, n2: u32) -> Vec<usize> {
    let mut sites = vec![1; n1 as usize];
    sites.extend(std::iter::repeat(2).take(n2 as usize));
    sites
}

/// The four ladder representations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Su11Rep {
    /// `K+ = x^2/2, K- = d^2/2, K0 = (x d)/2 + 1/4` per site.
    VelocityDifferential,
    /// `K+ = z, K- = z d^2 + (m/2) d, K0 = z d + m/4` per site.
    EnergyDifferential(MParam),
    /// Occupation ladder `K+|n> = (n + m/2)|n+1>`, `K-|n> = n|n-1>`,
    /// `K0|n> = (n + m/4)|n>`; `m = 1` gives the walker ladder.
    OccupationDiscrete(MParam),
}

impl Su11Rep {
    pub fn label(&self) -> String {
        fn m_label(m: &MParam) -> String {
            match m {
                MParam::Formal => "formal".into(),
                MParam::Fixed(r) => r.to_string(),
            }
        }
        match self {
            Su11Rep::VelocityDifferential => "velocity-differential".into(),
            Su11Rep::EnergyDifferential(m) => format!("energy-differential m={}", m_label(m)),
            Su11Rep::OccupationDiscrete(m) => format!("occupation-discrete m={}", m_label(m)),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum Ladder {
    Plus,
    Minus,
    Zero,
}

impl Ladder {
    fn symbol(&self) -> &'static str {
        match self {
            Ladder::Plus => "K+",
            Ladder::Minus => "K-",
            Ladder::Zero => "K0",
        }
    }
}

fn differential_ladder(rep: &Su11Rep, site: u8, ladder: Ladder) -> DiffOperator<BigRational> {
    let x = Var::X(site);
    match rep {
        Su11Rep::VelocityDifferential => match ladder {
            Ladder::Plus => DiffOperator::mult(
                Polynomial::var(x).pow(2).scale(&Coeff::from_ratio(1, 2)),
            ),
            Ladder::Minus => DiffOperator::derivative(x, 2).scale_ratio(1, 2),
            Ladder::Zero => DiffOperator::first_order(Polynomial::var(x), x)
                .scale_ratio(1, 2)
                .add(&DiffOperator::mult(Polynomial::from_ratio(1, 4))),
        },
        Su11Rep::EnergyDifferential(m) => match ladder {
            Ladder::Plus => DiffOperator::mult(Polynomial::var(x)),
            Ladder::Minus => {
                let zd2 = DiffOperator::mult(Polynomial::var(x))
                    .compose(&DiffOperator::derivative(x, 2));
                let half_md = DiffOperator::derivative(x, 1).scale_poly(&m.half::<BigRational>());
                zd2.add(&half_md)
            }
            Ladder::Zero => DiffOperator::first_order(Polynomial::var(x), x)
                .add(&DiffOperator::mult(m.half::<BigRational>().scale(&Coeff::from_ratio(1, 2)))),
        },
        Su11Rep::OccupationDiscrete(_) => unreachable!("discrete rep has no differential form"),
    }
}

/// Action of a ladder operator word on an occupation basis vector; the
/// result is a combination of basis vectors with `m`-polynomial weights.
fn discrete_action(
    m: &MParam,
    ladder: Ladder,
    site: usize,
    eta: &[u32],
) -> Vec<(Vec<u32>, RationalPolynomial)> {
    let half_m: RationalPolynomial = m.half();
    let n = eta[site] as i64;
    match ladder {
        Ladder::Plus => {
            let mut target = eta.to_vec();
            target[site] += 1;
            vec![(target, half_m.add(&Polynomial::from_ratio(n, 1)))]
        }
        Ladder::Minus => {
            if eta[site] == 0 {
                return Vec::new();
            }
            let mut target = eta.to_vec();
            target[site] -= 1;
            vec![(target, Polynomial::from_ratio(n, 1))]
        }
        Ladder::Zero => vec![(
            eta.to_vec(),
            half_m
                .scale(&Coeff::from_ratio(1, 2))
                .add(&Polynomial::from_ratio(n, 1)),
        )],
    }
}

fn discrete_compose(
    m: &MParam,
    first: (Ladder, usize),
    second: (Ladder, usize),
    eta: &[u32],
) -> Vec<(Vec<u32>, RationalPolynomial)> {
    // Applies `first . second` to |eta>.
    let mut out: Vec<(Vec<u32>, RationalPolynomial)> = Vec::new();
    for (mid, w) in discrete_action(m, second.0, second.1, eta) {
        for (fin, v) in discrete_action(m, first.0, first.1, &mid) {
            merge_term(&mut out, fin, w.mul(&v));
        }
    }
    out
}

fn merge_term(
    acc: &mut Vec<(Vec<u32>, RationalPolynomial)>,
    key: Vec<u32>,
    value: RationalPolynomial,
) {
    if let Some((_, existing)) = acc.iter_mut().find(|(k, _)| *k == key) {
        *existing = existing.add(&value);
    } else {
        acc.push((key, value));
    }
}

fn discrete_combination_is_zero(mut terms: Vec<(Vec<u32>, RationalPolynomial)>) -> bool {
    terms.retain(|(_, v)| !v.is_zero());
    terms.is_empty()
}

/// Verifies the commutation relations `[K-, K+] = 2 K0 delta_ij` and
/// `[K0, K+-] = +- K+- delta_ij` on a spanning set.
pub fn check_su11(rep: &Su11Rep, site_count: usize, degree_max: u32) -> Result<Report> {
    let mut report = Report::new(format!("su11 {} sites={site_count}", rep.label()));
    match rep {
        Su11Rep::OccupationDiscrete(m) => {
            let basis = occupation_basis(site_count, degree_max);
            for i in 0..site_count {
                for j in 0..site_count {
                    for (name, lhs_pair, rhs) in commutator_table(i, j) {
                        let mut ok = true;
                        let mut witness = None;
                        for eta in &basis {
                            let ab = discrete_compose(m, lhs_pair.0, lhs_pair.1, eta);
                            let ba = discrete_compose(m, lhs_pair.1, lhs_pair.0, eta);
                            let mut comm = ab;
                            for (k, v) in ba {
                                merge_term(&mut comm, k, v.neg());
                            }
                            let mut expected: Vec<(Vec<u32>, RationalPolynomial)> = Vec::new();
                            if i == j {
                                for (target, w) in rhs(m, i, eta) {
                                    merge_term(&mut expected, target, w);
                                }
                            }
                            for (k, v) in expected {
                                merge_term(&mut comm, k, v.neg());
                            }
                            if !discrete_combination_is_zero(comm) {
                                ok = false;
                                witness = Some(format!("eta={eta:?}"));
                                break;
                            }
                        }
                        report.push(CaseResult {
                            inputs: format!("{name} i={i} j={j} {}", witness.unwrap_or_default()),
                            pass: ok,
                            residual_terms: Vec::new(),
                            relative_residual: if ok { 0.0 } else { f64::INFINITY },
                        });
                    }
                }
            }
        }
        _ => {
            let monomials = spanning_monomials(site_count, degree_max);
            for i in 0..site_count as u8 {
                for j in 0..site_count as u8 {
                    let kp_j = differential_ladder(rep, j + 1, Ladder::Plus);
                    let km_i = differential_ladder(rep, i + 1, Ladder::Minus);
                    let km_j = differential_ladder(rep, j + 1, Ladder::Minus);
                    let k0_i = differential_ladder(rep, i + 1, Ladder::Zero);
                    let kp_i = differential_ladder(rep, i + 1, Ladder::Plus);
                    let checks: Vec<(String, Box<dyn Fn(&RationalPolynomial) -> RationalPolynomial>)> = vec![
                        (
                            format!("[K-,K+] i={i} j={j}"),
                            Box::new({
                                let (km_i, kp_j, k0_i) = (km_i.clone(), kp_j.clone(), k0_i.clone());
                                let delta = i == j;
                                move |f: &RationalPolynomial| {
                                    let comm = km_i.apply(&kp_j.apply(f)).sub(&kp_j.apply(&km_i.apply(f)));
                                    let target = if delta {
                                        k0_i.apply(f).scale(&Coeff::from_ratio(2, 1))
                                    } else {
                                        Polynomial::zero()
                                    };
                                    comm.sub(&target)
                                }
                            }),
                        ),
                        (
                            format!("[K0,K+] i={i} j={j}"),
                            Box::new({
                                let (k0_i, kp_j, kp_i) = (k0_i.clone(), kp_j.clone(), kp_i.clone());
                                let delta = i == j;
                                move |f: &RationalPolynomial| {
                                    let comm = k0_i.apply(&kp_j.apply(f)).sub(&kp_j.apply(&k0_i.apply(f)));
                                    let target = if delta { kp_i.apply(f) } else { Polynomial::zero() };
                                    comm.sub(&target)
                                }
                            }),
                        ),
                        (
                            format!("[K0,K-] i={i} j={j}"),
                            Box::new({
                                let (k0_i, km_j, km_i) = (k0_i.clone(), km_j.clone(), km_i.clone());
                                let delta = i == j;
                                move |f: &RationalPolynomial| {
                                    let comm = k0_i.apply(&km_j.apply(f)).sub(&km_j.apply(&k0_i.apply(f)));
                                    let target = if delta {
                                        km_i.apply(f).neg()
                                    } else {
                                        Polynomial::zero()
                                    };
                                    comm.sub(&target)
                                }
                            }),
                        ),
                    ];
                    for (name, residual_of) in checks {
                        let mut ok = true;
                        let mut witness = String::new();
                        for mono in &monomials {
                            let res = residual_of(mono);
                            if !res.is_zero() {
                                ok = false;
                                witness = format!(" fails on {mono}");
                                break;
                            }
                        }
                        report.push(CaseResult {
                            inputs: format!("{name}{witness}"),
                            pass: ok,
                            residual_terms: Vec::new(),
                            relative_residual: if ok { 0.0 } else { f64::INFINITY },
                        });
                    }
                }
            }
        }
    }
    Ok(report)
}

type DiscreteRhs = fn(&MParam, usize, &[u32]) -> Vec<(Vec<u32>, RationalPolynomial)>;

fn commutator_table(
    i: usize,
    j: usize,
) -> Vec<(String, ((Ladder, usize), (Ladder, usize)), DiscreteRhs)> {
    fn two_k0(m: &MParam, site: usize, eta: &[u32]) -> Vec<(Vec<u32>, RationalPolynomial)> {
        discrete_action(m, Ladder::Zero, site, eta)
            .into_iter()
            .map(|(t, w)| (t, w.scale(&Coeff::from_ratio(2, 1))))
            .collect()
    }
    fn plus_one(m: &MParam, site: usize, eta: &[u32]) -> Vec<(Vec<u32>, RationalPolynomial)> {
        discrete_action(m, Ladder::Plus, site, eta)
    }
    fn minus_neg(m: &MParam, site: usize, eta: &[u32]) -> Vec<(Vec<u32>, RationalPolynomial)> {
        discrete_action(m, Ladder::Minus, site, eta)
            .into_iter()
            .map(|(t, w)| (t, w.neg()))
            .collect()
    }
    vec![
        (
            "[K-,K+]=2K0".to_string(),
            ((Ladder::Minus, i), (Ladder::Plus, j)),
            two_k0 as DiscreteRhs,
        ),
        (
            "[K0,K+]=K+".to_string(),
            ((Ladder::Zero, i), (Ladder::Plus, j)),
            plus_one as DiscreteRhs,
        ),
        (
            "[K0,K-]=-K-".to_string(),
            ((Ladder::Zero, i), (Ladder::Minus, j)),
            minus_neg as DiscreteRhs,
        ),
    ]
}

fn spanning_monomials(site_count: usize, degree_max: u32) -> Vec<RationalPolynomial> {
    let mut out = Vec::new();
    let mut exps = vec![0u32; site_count];
    fn rec(
        site: usize,
        left: u32,
        exps: &mut Vec<u32>,
        out: &mut Vec<RationalPolynomial>,
    ) {
        if site == exps.len() {
            let mut p = RationalPolynomial::one();
            for (k, e) in exps.iter().enumerate() {
                p = p.mul(&Polynomial::var(Var::X(k as u8 + 1)).pow(*e));
            }
            out.push(p);
            return;
        }
        for e in 0..=left {
            exps[site] = e;
            rec(site + 1, left - e, exps, out);
        }
    }
    rec(0, degree_max, &mut exps, &mut out);
    out
}

fn occupation_basis(site_count: usize, degree_max: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut eta = vec![0u32; site_count];
    fn rec(site: usize, cap: u32, eta: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if site == eta.len() {
            out.push(eta.clone());
            return;
        }
        for n in 0..=cap {
            eta[site] = n;
            rec(site + 1, cap, eta, out);
        }
    }
    // Full product basis is wasteful beyond two sites; cap the off-pair
    // occupancy to keep the case count linear.
    if site_count <= 2 {
        rec(0, degree_max, &mut eta, &mut out);
    } else {
        rec(0, 2.min(degree_max), &mut eta, &mut out);
    }
    out
}

/// Intertwining checks: the single-site duality factors carry each ladder
/// operator from the differential representation to the occupation ladder.
///
/// The velocity pair uses `d(x, n) = x^{2n} / (2n-1)!!`. The energy pair
/// uses the 2-power-free normalization `d(z, n) = z^n Gamma(m/2) /
/// Gamma(m/2 + n)` (carried in scaled polynomial form), which is the exact
/// intertwiner of the two printed representations.
pub fn check_intertwiner(m: MParam, degree_max: u32) -> Result<Report> {
    if degree_max > 10 {
        return Err(Error::DegreeBudgetExceeded { got: degree_max, max: 10 });
    }
    let mut report = Report::new(format!("intertwiner degree<={degree_max}"));
    let x = Var::X(1);

    // Velocity representation, m = 1 ladder.
    let vel_d = |n: u32| -> RationalPolynomial {
        Polynomial::var(x)
            .pow(2 * n)
            .scale(&Coeff::from_ratio(1, double_factorial_odd_i64(n)))
    };
    let vel = Su11Rep::VelocityDifferential;
    let walker = MParam::Fixed(Ratio::from_integer(1));
    for n in 0..=degree_max {
        for ladder in [Ladder::Plus, Ladder::Minus, Ladder::Zero] {
            let lhs = differential_ladder(&vel, 1, ladder).apply(&vel_d(n));
            let mut rhs = Polynomial::zero();
            for (target, w) in discrete_action(&walker, ladder, 0, &[n]) {
                rhs = rhs.add(&vel_d(target[0]).mul(&w));
            }
            report.push(residual_case(
                format!("velocity {} n={n}", ladder.symbol()),
                &lhs,
                &rhs,
                None,
            ));
        }
    }

    // Energy representation with the requested m. The scaled column
    // `z^n prod_{j=n}^{cap-1}(m/2 + j)` equals the intertwiner up to the
    // n-independent factor `w(cap)`.
    let cap = degree_max + 1;
    let energy_d = |n: u32| -> RationalPolynomial {
        let mut p = Polynomial::var(x).pow(n);
        let half_m: RationalPolynomial = m.half();
        for j in n..cap {
            p = p.mul(&half_m.add(&Polynomial::from_ratio(j as i64, 1)));
        }
        p
    };
    let energy = Su11Rep::EnergyDifferential(m);
    for n in 0..=degree_max {
        for ladder in [Ladder::Plus, Ladder::Minus, Ladder::Zero] {
            let lhs = differential_ladder(&energy, 1, ladder).apply(&energy_d(n));
            let mut rhs = Polynomial::zero();
            for (target, w) in discrete_action(&m, ladder, 0, &[n]) {
                rhs = rhs.add(&energy_d(target[0]).mul(&w));
            }
            report.push(residual_case(
                format!("energy {} n={n}", ladder.symbol()),
                &lhs,
                &rhs,
                None,
            ));
        }
    }
    Ok(report)
}

/// Change-of-coordinates verification: the rotor generator conjugated by
/// the frame rotation equals three times the two-site rotation generator,
/// and the pulled-back duality function satisfies the rotor duality.
pub fn check_change_of_coordinates(frame: &RotationFrame, max_n: u32) -> Result<Report> {
    let mut report = Report::new(format!("change-of-coordinates {}", frame.label()));

    // Part 1: conjugation identity on all primed monomials of degree <= 4:
    // L (f' o R^T) = (L' f') o R^T with L' = 3 (x' d_y' - y' d_x')^2.
    let primed_monomials = primed_monomials(4);
    match frame {
        RotationFrame::Numeric { phi } => {
            let cols = float_rotation_columns(*phi);
            let rotor = rotor_generator::<f64>();
            let lprime = scaled_rotation_squared::<f64>(Var::Prime(0), Var::Prime(1), 3);
            for f in &primed_monomials {
                let f_float = to_float_poly(f);
                let lhs = rotor.apply(&substitute_primed(&f_float, &cols));
                let rhs = substitute_primed(&lprime.apply(&f_float), &cols);
                report.push(residual_case(
                    format!("conjugation {}", f_float),
                    &lhs,
                    &rhs,
                    Some(FLOAT_TOL),
                ));
            }
        }
        _ => {
            let cols = rational_rotation_columns(frame).expect("rational frame");
            let rotor = rotor_generator::<BigRational>();
            let lprime = scaled_rotation_squared::<BigRational>(Var::Prime(0), Var::Prime(1), 3);
            for f in &primed_monomials {
                let lhs = rotor.apply(&substitute_primed(f, &cols));
                let rhs = substitute_primed(&lprime.apply(f), &cols);
                report.push(residual_case(format!("conjugation {f}"), &lhs, &rhs, None));
            }
        }
    }

    // Part 2: the constructed duality function satisfies the rotor duality.
    for n1 in 0..=max_n {
        for n2 in 0..=(max_n - n1) {
            report.push(rotor_duality_case(frame, n1, n2)?);
        }
    }
    Ok(report)
}

fn primed_monomials(degree_max: u32) -> Vec<RationalPolynomial> {
    let mut out = Vec::new();
    for a in 0..=degree_max {
        for b in 0..=(degree_max - a) {
            for c in 0..=(degree_max - a - b) {
                let p = RationalPolynomial::var(Var::Prime(0))
                    .pow(a)
                    .mul(&Polynomial::var(Var::Prime(1)).pow(b))
                    .mul(&Polynomial::var(Var::Prime(2)).pow(c));
                out.push(p);
            }
        }
    }
    out
}

fn substitute_primed<C: Coeff>(
    f: &Polynomial<C>,
    cols: &[[Polynomial<C>; 3]; 3],
) -> Polynomial<C> {
    let mut out = f.clone();
    for k in 0..3 {
        out = out.substitute(Var::Prime(k as u8), &linear_form(&cols[k]));
    }
    out
}

fn to_float_poly(p: &RationalPolynomial) -> Polynomial<f64> {
    use num_traits::ToPrimitive;
    let mut out = Polynomial::zero();
    for (m, c) in p.terms() {
        out.add_term(m.clone(), c.to_f64().unwrap_or(0.0));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bulk_configs(l: usize, max_total: u32) -> Vec<DualConfig> {
        bulk_only_configs(l, max_total)
    }

    #[test]
    fn velocity_duality_is_exact_including_boundary_walkers() {
        for l in [2usize, 3] {
            let etas = configs_with_cemeteries(l, 3);
            let report = check_duality(&DualityPair::BmpSip1 { l }, &etas).unwrap();
            for case in report.failures() {
                panic!("L={l} failed: {} {:?}", case.inputs, case.residual_terms);
            }
            assert!(report.pass);
        }
    }

    #[test]
    fn velocity_duality_clock_is_essential() {
        // Replacing the aligned clock by the bare walker rates leaves a
        // nonzero residual: the identity really fixes the rate multiple.
        let l = 2;
        let op = velocity_exchange_generator::<BigRational>(l, true);
        let jump = JumpOperator::sip_absorbing(l, MParam::Fixed(Ratio::from_integer(1)), 1);
        let eta = DualConfig::single(l, 1);
        let d = velocity_duality_column::<BigRational>(&eta).unwrap();
        let lhs = apply_generator(&op, &d).unwrap();
        let rhs = apply_dual_generator(&jump, velocity_duality_column, &eta).unwrap();
        assert!(!lhs.sub(&rhs).is_zero());
    }

    #[test]
    fn mutated_duality_function_fails() {
        // Dropping the double-factorial normalization must break the identity.
        let l = 2;
        let op = velocity_exchange_generator::<BigRational>(l, true);
        let jump = JumpOperator::sip_absorbing(
            l,
            MParam::Fixed(Ratio::from_integer(1)),
            VELOCITY_DUAL_CLOCK,
        );
        let mutated = |eta: &DualConfig| -> Result<RationalPolynomial> {
            let mut mono = crate::poly::Monomial::one();
            for (i, &n) in eta.0.iter().enumerate() {
                if n == 0 {
                    continue;
                }
                if i == 0 {
                    mono = mono.with_exp(Var::TLeft, n);
                } else if i == eta.0.len() - 1 {
                    mono = mono.with_exp(Var::TRight, n);
                } else {
                    mono = mono.with_exp(Var::X(i as u8), 2 * n);
                }
            }
            let mut p = Polynomial::zero();
            p.add_term(mono, num_traits::One::one());
            Ok(p)
        };
        let eta = DualConfig::at_sites(l, &[1, 1]);
        let lhs = apply_generator(&op, &mutated(&eta).unwrap()).unwrap();
        let rhs = apply_dual_generator(&jump, mutated, &eta).unwrap();
        assert!(!lhs.sub(&rhs).is_zero());
    }

    #[test]
    fn energy_duality_is_exact_in_formal_m() {
        for l in [2usize, 3] {
            let etas = bulk_configs(l, 3);
            let report = check_duality(&DualityPair::BepSip { l }, &etas).unwrap();
            for case in report.failures() {
                panic!("L={l} failed: {} {:?}", case.inputs, case.residual_terms);
            }
        }
    }

    #[test]
    fn rotor_duality_exact_frames() {
        let etas: Vec<DualConfig> = bulk_configs(2, 3);
        for frame in [
            RotationFrame::symbolic(),
            RotationFrame::exact_zero(),
            RotationFrame::exact_pi_over_6(),
            RotationFrame::exact_pi_over_4(),
        ] {
            let report =
                check_duality(&DualityPair::L3Rotated { frame: frame.clone() }, &etas).unwrap();
            for case in report.failures() {
                panic!("{} failed: {} {:?}", frame.label(), case.inputs, case.residual_terms);
            }
        }
    }

    #[test]
    fn rotor_duality_numeric_frames() {
        let etas: Vec<DualConfig> = bulk_configs(2, 3);
        for phi in [0.0, std::f64::consts::FRAC_PI_6, std::f64::consts::FRAC_PI_4, 0.73] {
            let report = check_duality(
                &DualityPair::L3Rotated { frame: RotationFrame::numeric(phi) },
                &etas,
            )
            .unwrap();
            assert!(report.pass, "phi={phi}");
        }
    }

    #[test]
    fn scaled_sine_cosine_pair_is_still_conformal() {
        // Scaling (s, c) uniformly scales the duality function by a factor
        // that is constant on each conserved walker sector, so the identity
        // survives even though R^T R is off the identity. The orthogonality
        // check still flags the frame.
        let frame = RotationFrame::ExactAngle {
            label: "scaled".into(),
            s: Polynomial::from_ratio(1, 2),
            c: Polynomial::from_ratio(9, 10),
        };
        assert!(orthogonality_residual(&frame) > 0.0);
        assert!(rotor_duality_case(&frame, 1, 0).unwrap().pass);
    }

    #[test]
    fn broken_rotation_matrix_fails() {
        // A genuinely sheared matrix (second column replaced by the
        // conserved diagonal direction) leaves a nonzero residual.
        let frame = RotationFrame::exact_zero();
        let mut cols = rational_rotation_columns(&frame).unwrap();
        cols[1] = cols[2].clone();
        let op = rotor_generator::<BigRational>();
        let jump = JumpOperator::sip_closed(
            2,
            MParam::Fixed(Ratio::from_integer(1)),
            ROTOR_DUAL_CLOCK,
        );
        let column =
            |e: &DualConfig| -> Result<RationalPolynomial> {
                Ok(rotated_duality_generic(&cols, e.0[1], e.0[2]))
            };
        let eta = DualConfig::single(2, 2);
        let lhs = apply_generator(&op, &column(&eta).unwrap()).unwrap();
        let rhs = apply_dual_generator(&jump, column, &eta).unwrap();
        assert!(!lhs.sub(&rhs).is_zero());
    }

    #[test]
    fn frames_are_orthogonal() {
        assert_eq!(orthogonality_residual(&RotationFrame::symbolic()), 0.0);
        assert_eq!(orthogonality_residual(&RotationFrame::exact_zero()), 0.0);
        assert_eq!(orthogonality_residual(&RotationFrame::exact_pi_over_6()), 0.0);
        assert_eq!(orthogonality_residual(&RotationFrame::exact_pi_over_4()), 0.0);
        assert!(orthogonality_residual(&RotationFrame::numeric(0.37)) <= 1e-14);
    }

    #[test]
    fn rotated_duality_at_zero_angle() {
        // phi = 0, n = (1, 0): ((-sqrt2/2) x + (sqrt2/2) y)^2.
        let d = rotated_duality_function(&RotationFrame::exact_zero(), 1, 0).unwrap();
        let x = RationalPolynomial::var(Var::X(0));
        let y = RationalPolynomial::var(Var::X(1));
        let s2 = RationalPolynomial::var(Var::Sqrt2);
        let form = s2
            .scale(&Coeff::from_ratio(-1, 2))
            .mul(&x)
            .add(&s2.scale(&Coeff::from_ratio(1, 2)).mul(&y));
        assert_eq!(d, form.pow(2));
        let trivial = rotated_duality_function(&RotationFrame::symbolic(), 0, 0).unwrap();
        assert_eq!(trivial, RationalPolynomial::one());
    }

    #[test]
    fn su11_holds_for_all_four_representations() {
        let reps = [
            Su11Rep::VelocityDifferential,
            Su11Rep::EnergyDifferential(MParam::Formal),
            Su11Rep::OccupationDiscrete(MParam::Fixed(Ratio::from_integer(1))),
            Su11Rep::OccupationDiscrete(MParam::Formal),
        ];
        for rep in reps {
            let report = check_su11(&rep, 2, 5).unwrap();
            for case in report.failures() {
                panic!("{}: {}", rep.label(), case.inputs);
            }
        }
    }

    #[test]
    fn discrete_k0_eigenvalue_matches_quarter_shift() {
        // K0 |n> = (n + m/4) |n>; at m = 1 the eigenvalue is n + 1/4.
        let m = MParam::Fixed(Ratio::from_integer(1));
        for n in 0..5u32 {
            let action = discrete_action(&m, Ladder::Zero, 0, &[n]);
            assert_eq!(action.len(), 1);
            let expected = RationalPolynomial::from_ratio(4 * n as i64 + 1, 4);
            assert_eq!(action[0].1, expected);
            assert_eq!(action[0].0, vec![n]);
        }
    }

    #[test]
    fn intertwiner_relations_hold() {
        let report = check_intertwiner(MParam::Formal, 5).unwrap();
        for case in report.failures() {
            panic!("{}", case.inputs);
        }
        let report = check_intertwiner(MParam::Fixed(Ratio::new(3, 2)), 5).unwrap();
        assert!(report.pass);
    }

    #[test]
    fn lowest_weight_annihilates() {
        // n = 0: the lowering side vanishes in both representations.
        let vel = differential_ladder(&Su11Rep::VelocityDifferential, 1, Ladder::Minus);
        assert!(vel.apply(&RationalPolynomial::one()).is_zero());
        assert!(discrete_action(&MParam::Formal, Ladder::Minus, 0, &[0]).is_empty());
    }

    #[test]
    fn change_of_coordinates_holds_symbolically_and_numerically() {
        let report = check_change_of_coordinates(&RotationFrame::symbolic(), 2).unwrap();
        for case in report.failures() {
            panic!("symbolic: {} {:?}", case.inputs, case.residual_terms);
        }
        for phi in [0.0, std::f64::consts::FRAC_PI_6, std::f64::consts::FRAC_PI_4] {
            let report =
                check_change_of_coordinates(&RotationFrame::numeric(phi), 2).unwrap();
            assert!(report.pass, "phi={phi}");
        }
    }
}
