//! Exact dual absorption distributions and the steady-state moments they
//! encode.
//!
//! The dual walkers of a boundary-driven chain perform an absorbing SIP.
//! Enumerating the finite state space of `k` walkers and solving the
//! harmonic system of the embedded jump chain gives the exact probability
//! `p(a, b)` that `a` walkers exit left and `b` exit right, and with it
//! every steady-state moment `sum_{a+b=k} T_l^a T_r^b p(a, b)`.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Zero};
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::jump::sip_rate_pairs;
use crate::model::{AbsorptionDistribution, Boundary, ChainSpec, DualConfig, Family};

/// Largest walker count the solver accepts by default.
pub const DEFAULT_WALKER_BUDGET: usize = 4;

/// Above this many transient states the dense LU backend hands over to the
/// sparse iterative one.
const DENSE_LIMIT: usize = 4096;

const RESIDUAL_TOL: f64 = 1e-12;

/// Canonical enumeration of all dual configurations with a fixed walker
/// count over sites `0..=L+1`, in lexicographic order.
pub struct DualStateSpace {
    pub l: usize,
    pub k: u32,
    pub states: Vec<DualConfig>,
    index: HashMap<DualConfig, usize>,
}

impl DualStateSpace {
    pub fn new(l: usize, k: u32) -> Self {
        let mut states = Vec::new();
        let slots = l + 2;
        let mut current = vec![0u32; slots];
        fn rec(slot: usize, left: u32, current: &mut Vec<u32>, out: &mut Vec<DualConfig>) {
            let slots = current.len();
            if slot == slots - 1 {
                current[slot] = left;
                out.push(DualConfig(current.clone()));
                return;
            }
            for n in 0..=left {
                current[slot] = n;
                rec(slot + 1, left - n, current, out);
            }
        }
        rec(0, k, &mut current, &mut states);
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        DualStateSpace { l, k, states, index }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, eta: &DualConfig) -> Option<usize> {
        self.index.get(eta).copied()
    }
}

enum Target {
    Transient(usize),
    Absorbed(u32, u32),
}

/// The embedded jump chain restricted to transient states, with outgoing
/// probabilities kept as exact rationals.
struct HarmonicSystem {
    space: DualStateSpace,
    /// Row index of each transient state in `space`.
    row_of_state: HashMap<usize, usize>,
    /// Per row: jump probabilities `rate / total_rate`.
    rows: Vec<Vec<(Target, Ratio<i64>)>>,
    splits: Vec<(u32, u32)>,
}

impl HarmonicSystem {
    fn build(spec: &ChainSpec, k: u32) -> Result<Self> {
        let space = DualStateSpace::new(spec.l, k);
        let mut transient_states = Vec::new();
        let mut row_of_state = HashMap::new();
        for (idx, eta) in space.states.iter().enumerate() {
            if eta.bulk_total() > 0 {
                row_of_state.insert(idx, transient_states.len());
                transient_states.push(idx);
            }
        }
        let mut rows = Vec::with_capacity(transient_states.len());
        for &idx in &transient_states {
            let eta = &space.states[idx];
            let transitions = sip_rate_pairs(eta, spec)?;
            let total: Ratio<i64> = transitions.iter().map(|t| t.rate).sum();
            if total.is_zero() {
                return Err(Error::SingularSystem(format!(
                    "transient state {eta} has no outgoing transitions"
                )));
            }
            let mut row = Vec::with_capacity(transitions.len());
            for t in transitions {
                let target = eta.hop(t.from, t.to);
                let target_idx = space.index_of(&target).ok_or_else(|| {
                    Error::SingularSystem(format!("target {target} missing from state space"))
                })?;
                let entry = if target.bulk_total() == 0 {
                    Target::Absorbed(target.0[0], target.0[spec.l + 1])
                } else {
                    Target::Transient(row_of_state[&target_idx])
                };
                row.push((entry, t.rate / total));
            }
            rows.push(row);
        }
        let splits = (0..=k).map(|a| (a, k - a)).collect();
        Ok(HarmonicSystem { space, row_of_state, rows, splits })
    }

    fn n(&self) -> usize {
        self.rows.len()
    }

    fn row_of(&self, eta: &DualConfig) -> Option<usize> {
        self.space.index_of(eta).and_then(|i| self.row_of_state.get(&i).copied())
    }

    /// Absorption probabilities toward each split, for every transient
    /// state at once. One factorization, `k + 1` right-hand sides.
    fn solve_f64(&self) -> Result<Vec<Vec<f64>>> {
        if self.n() <= DENSE_LIMIT {
            self.solve_dense()
        } else {
            self.solve_gauss_seidel()
        }
    }

    fn rhs_for(&self, split: (u32, u32)) -> Vec<f64> {
        let mut rhs = vec![0.0; self.n()];
        for (row, entries) in self.rows.iter().enumerate() {
            for (target, p) in entries {
                if let Target::Absorbed(a, b) = target {
                    if (*a, *b) == split {
                        rhs[row] += ratio_f64(*p);
                    }
                }
            }
        }
        rhs
    }

    fn solve_dense(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.n();
        let mut a = DMatrix::<f64>::identity(n, n);
        for (row, entries) in self.rows.iter().enumerate() {
            for (target, p) in entries {
                if let Target::Transient(col) = target {
                    a[(row, *col)] -= ratio_f64(*p);
                }
            }
        }
        let lu = a.clone().lu();
        let mut out = Vec::with_capacity(self.splits.len());
        for &split in &self.splits {
            let rhs = DVector::from_vec(self.rhs_for(split));
            let h = lu
                .solve(&rhs)
                .ok_or_else(|| Error::SingularSystem("dense LU solve failed".into()))?;
            let residual = (&a * &h - &rhs).amax();
            if residual > RESIDUAL_TOL {
                return Err(Error::SingularSystem(format!(
                    "dense residual {residual:.3e} exceeds {RESIDUAL_TOL:.0e}"
                )));
            }
            out.push(h.iter().copied().collect());
        }
        Ok(out)
    }

    fn solve_gauss_seidel(&self) -> Result<Vec<Vec<f64>>> {
        let float_rows: Vec<Vec<(usize, f64)>> = self
            .rows
            .iter()
            .map(|entries| {
                entries
                    .iter()
                    .filter_map(|(t, p)| match t {
                        Target::Transient(col) => Some((*col, ratio_f64(*p))),
                        Target::Absorbed(..) => None,
                    })
                    .collect()
            })
            .collect();
        let mut out = Vec::with_capacity(self.splits.len());
        for &split in &self.splits {
            let rhs = self.rhs_for(split);
            let mut h = rhs.clone();
            let mut converged = false;
            for _ in 0..200_000 {
                let mut max_delta = 0.0f64;
                for (i, entries) in float_rows.iter().enumerate() {
                    let mut v = rhs[i];
                    for &(col, p) in entries {
                        v += p * h[col];
                    }
                    max_delta = max_delta.max((v - h[i]).abs());
                    h[i] = v;
                }
                if max_delta <= RESIDUAL_TOL / 10.0 {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::SingularSystem(
                    "iterative solve did not reach the residual tolerance".into(),
                ));
            }
            out.push(h);
        }
        Ok(out)
    }

    /// Exact rational elimination. The oracle for the float backends; kept
    /// to small systems because the elimination is dense.
    fn solve_exact(&self) -> Result<Vec<Vec<BigRational>>> {
        let n = self.n();
        if n > 2000 {
            return Err(Error::InvalidConfig(format!(
                "exact solve limited to 2000 transient states, got {n}"
            )));
        }
        let big = |r: Ratio<i64>| BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()));
        let n_rhs = self.splits.len();
        // Augmented matrix [I - P | R].
        let mut a = vec![vec![BigRational::zero(); n + n_rhs]; n];
        for i in 0..n {
            a[i][i] = BigRational::one();
        }
        for (row, entries) in self.rows.iter().enumerate() {
            for (target, p) in entries {
                match target {
                    Target::Transient(col) => {
                        let v = a[row][*col].clone() - big(*p);
                        a[row][*col] = v;
                    }
                    Target::Absorbed(ta, tb) => {
                        let col = n + self.splits.iter().position(|s| *s == (*ta, *tb)).unwrap();
                        let v = a[row][col].clone() + big(*p);
                        a[row][col] = v;
                    }
                }
            }
        }
        // Gaussian elimination with first-nonzero pivoting.
        for col in 0..n {
            let pivot = (col..n)
                .find(|&r| !a[r][col].is_zero())
                .ok_or_else(|| Error::SingularSystem("exact elimination hit a zero column".into()))?;
            a.swap(col, pivot);
            let inv = a[col][col].clone();
            for val in a[col][col..].iter_mut() {
                *val /= &inv;
            }
            for r in 0..n {
                if r == col || a[r][col].is_zero() {
                    continue;
                }
                let factor = a[r][col].clone();
                for c in col..n + n_rhs {
                    let delta = &factor * &a[col][c];
                    a[r][c] -= delta;
                }
            }
        }
        let mut out = vec![vec![BigRational::zero(); n]; n_rhs];
        for (s, col_out) in out.iter_mut().enumerate() {
            for row in 0..n {
                col_out[row] = a[row][n + s].clone();
            }
        }
        Ok(out)
    }
}

fn ratio_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// The absorbing-SIP chain dual to `spec`. SIP specs must already be
/// absorbing; diffusion specs map onto their dual walker chain.
fn dual_chain(spec: &ChainSpec) -> Result<ChainSpec> {
    match spec.family {
        Family::Sip => {
            if spec.boundary != Boundary::Absorbing {
                return Err(Error::InvalidConfig(
                    "absorption solves need boundary=absorbing".into(),
                ));
            }
            Ok(spec.clone())
        }
        _ => Ok(spec.dual()),
    }
}

fn check_budget(eta0: &DualConfig, spec: &ChainSpec, k_max: usize) -> Result<u32> {
    if eta0.len() != spec.dual_len() {
        return Err(Error::DimensionMismatch {
            expected: spec.dual_len(),
            got: eta0.len(),
        });
    }
    let k = eta0.total();
    if k as usize > k_max {
        return Err(Error::WalkerBudgetExceeded {
            got: k as usize,
            max: k_max,
        });
    }
    if eta0.bulk_total() == 0 {
        return Err(Error::InvalidConfig(
            "start configuration has no bulk walkers".into(),
        ));
    }
    Ok(k)
}

/// Exact (to solver tolerance) distribution of how the walkers of `eta0`
/// split between the two cemeteries.
pub fn absorption_distribution(eta0: &DualConfig, spec: &ChainSpec) -> Result<AbsorptionDistribution> {
    absorption_distribution_with_budget(eta0, spec, DEFAULT_WALKER_BUDGET)
}

pub fn absorption_distribution_with_budget(
    eta0: &DualConfig,
    spec: &ChainSpec,
    k_max: usize,
) -> Result<AbsorptionDistribution> {
    let chain = dual_chain(spec)?;
    let k = check_budget(eta0, &chain, k_max)?;
    let system = HarmonicSystem::build(&chain, k)?;
    let row = system
        .row_of(eta0)
        .ok_or_else(|| Error::InvalidConfig(format!("state {eta0} not transient")))?;
    let solutions = system.solve_f64()?;
    let p: Vec<((u32, u32), f64)> = system
        .splits
        .iter()
        .zip(&solutions)
        .map(|(&split, h)| (split, h[row]))
        .collect();
    let dist = AbsorptionDistribution { k, p };
    let total = dist.total_probability();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::SingularSystem(format!(
            "absorption probabilities sum to {total}, expected 1"
        )));
    }
    Ok(dist)
}

/// Rational-arithmetic twin of [`absorption_distribution`]. Serves as the
/// oracle for the float backends and for symmetry identities that must
/// hold exactly.
pub fn absorption_distribution_exact(
    eta0: &DualConfig,
    spec: &ChainSpec,
) -> Result<Vec<((u32, u32), BigRational)>> {
    let chain = dual_chain(spec)?;
    let k = check_budget(eta0, &chain, DEFAULT_WALKER_BUDGET)?;
    let system = HarmonicSystem::build(&chain, k)?;
    let row = system
        .row_of(eta0)
        .ok_or_else(|| Error::InvalidConfig(format!("state {eta0} not transient")))?;
    let solutions = system.solve_exact()?;
    Ok(system
        .splits
        .iter()
        .zip(&solutions)
        .map(|(&split, h)| (split, h[row].clone()))
        .collect())
}

/// Steady-state duality moment `sum_{a+b=k} T_l^a T_r^b p(a, b)`.
pub fn stationary_moment(eta0: &DualConfig, spec: &ChainSpec) -> Result<f64> {
    let dist = absorption_distribution(eta0, spec)?;
    Ok(dist
        .p
        .iter()
        .map(|((a, b), p)| spec.t_left.powi(*a as i32) * spec.t_right.powi(*b as i32) * p)
        .sum())
}

/// Steady-state energy profile `<x_i^2>` for `i = 1..=L`, from one-walker
/// absorption probabilities. A single factorization serves every site.
pub fn temperature_profile(spec: &ChainSpec) -> Result<Vec<f64>> {
    let chain = dual_chain(spec)?;
    let system = HarmonicSystem::build(&chain, 1)?;
    let solutions = system.solve_f64()?;
    let left = &solutions[1]; // split (1, 0)
    let right = &solutions[0]; // split (0, 1)
    debug_assert_eq!(system.splits[1], (1, 0));
    let mut profile = Vec::with_capacity(chain.l);
    for i in 1..=chain.l {
        let row = system
            .row_of(&DualConfig::single(chain.l, i))
            .expect("single-walker states are transient");
        profile.push(spec.t_left * left[row] + spec.t_right * right[row]);
    }
    Ok(profile)
}

/// Steady-state covariance of the site energies `x_i^2` and `x_j^2`.
pub fn energy_covariance(i: usize, j: usize, spec: &ChainSpec) -> Result<f64> {
    let pairs = covariance_pairs(spec, &[(i, j)])?;
    Ok(pairs[0].2)
}

/// Covariances for many site pairs off one two-walker factorization.
pub fn covariance_pairs(
    spec: &ChainSpec,
    pairs: &[(usize, usize)],
) -> Result<Vec<(usize, usize, f64)>> {
    let chain = dual_chain(spec)?;
    for &(i, j) in pairs {
        if !(1 <= i && i < j && j <= chain.l) {
            return Err(Error::SiteOrderViolation { i, j });
        }
    }
    let profile = temperature_profile(spec)?;
    let system = HarmonicSystem::build(&chain, 2)?;
    let solutions = system.solve_f64()?;
    let mut out = Vec::with_capacity(pairs.len());
    for &(i, j) in pairs {
        let row = system
            .row_of(&DualConfig::at_sites(chain.l, &[i, j]))
            .expect("two-walker bulk states are transient");
        let mut joint = 0.0;
        for (&(a, b), h) in system.splits.iter().zip(&solutions) {
            joint += spec.t_left.powi(a as i32) * spec.t_right.powi(b as i32) * h[row];
        }
        out.push((i, j, joint - profile[i - 1] * profile[j - 1]));
    }
    Ok(out)
}

/// Closed-form covariance `2 i (L+1-j) (T_l - T_r)^2 / ((L+3)(L+1)^2)`.
pub fn covariance_closed_form(i: usize, j: usize, spec: &ChainSpec) -> f64 {
    let l = spec.l as f64;
    let dt = spec.t_left - spec.t_right;
    2.0 * i as f64 * (l + 1.0 - j as f64) * dt * dt / ((l + 3.0) * (l + 1.0) * (l + 1.0))
}

/// Closed-form profile `T_l + (T_r - T_l) i / (L+1)`.
pub fn profile_closed_form(i: usize, spec: &ChainSpec) -> f64 {
    spec.t_left + (spec.t_right - spec.t_left) * i as f64 / (spec.l as f64 + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    fn absorbing(l: usize, t_left: f64, t_right: f64) -> ChainSpec {
        ChainSpec::new(Family::Sip, l)
            .with_temperatures(t_left, t_right)
            .with_boundary(Boundary::Absorbing)
    }

    #[test]
    fn state_space_counts_and_round_trips() {
        // C(k + L + 1, k) states over L + 2 slots.
        let space = DualStateSpace::new(3, 2);
        assert_eq!(space.len(), 15);
        let space = DualStateSpace::new(2, 4);
        assert_eq!(space.len(), 35);
        for (i, s) in space.states.iter().enumerate() {
            assert_eq!(space.index_of(s), Some(i));
        }
        assert!(space.states.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn single_walker_probabilities_are_linear() {
        let spec = absorbing(3, 1.0, 1.0);
        for i in 1..=3 {
            let eta = DualConfig::single(3, i);
            let dist = absorption_distribution(&eta, &spec).unwrap();
            let expected = 1.0 - i as f64 / 4.0;
            assert!((dist.probability(1, 0) - expected).abs() < 1e-13, "site {i}");
            assert!((dist.probability(0, 1) - (1.0 - expected)).abs() < 1e-13);
        }
    }

    #[test]
    fn midpoint_walker_splits_evenly() {
        let spec = absorbing(5, 1.0, 1.0);
        let eta = DualConfig::single(5, 3);
        let dist = absorption_distribution(&eta, &spec).unwrap();
        assert!((dist.probability(1, 0) - 0.5).abs() < 1e-13);
    }

    #[test]
    fn exact_two_walker_values_match_hand_computation() {
        // L=2, walkers at (1,2). Solving the seven-state harmonic system by
        // hand gives p(1,1) = 7/15 and p(2,0) = p(0,2) = 4/15.
        let spec = absorbing(2, 1.0, 1.0);
        let eta = DualConfig::at_sites(2, &[1, 2]);
        let exact = absorption_distribution_exact(&eta, &spec).unwrap();
        let get = |a: u32, b: u32| {
            exact
                .iter()
                .find(|((pa, pb), _)| (*pa, *pb) == (a, b))
                .map(|(_, v)| v.clone())
                .unwrap()
        };
        assert_eq!(get(1, 1), BigRational::new(7.into(), 15.into()));
        assert_eq!(get(2, 0), BigRational::new(4.into(), 15.into()));
        assert_eq!(get(0, 2), BigRational::new(4.into(), 15.into()));

        // Float backend agrees with the rational oracle.
        let dist = absorption_distribution(&eta, &spec).unwrap();
        for ((a, b), p) in &exact {
            assert!((dist.probability(*a, *b) - p.to_f64().unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn reflection_swaps_the_split_exactly() {
        let spec = absorbing(4, 1.0, 1.0);
        let eta = DualConfig::at_sites(4, &[1, 3]);
        let mirrored = DualConfig::at_sites(4, &[4 + 1 - 1, 4 + 1 - 3]);
        let a = absorption_distribution_exact(&eta, &spec).unwrap();
        let b = absorption_distribution_exact(&mirrored, &spec).unwrap();
        for ((pa, pb), v) in &a {
            let mirror = b.iter().find(|((qa, qb), _)| (qa, qb) == (pb, pa)).unwrap();
            assert_eq!(*v, mirror.1, "split ({pa},{pb})");
        }
    }

    #[test]
    fn left_exit_probability_decreases_along_the_chain() {
        let spec = absorbing(6, 1.0, 1.0);
        let mut prev = f64::INFINITY;
        for i in 1..=6 {
            let dist = absorption_distribution(&DualConfig::single(6, i), &spec).unwrap();
            let p = dist.probability(1, 0);
            assert!(p < prev, "site {i}");
            prev = p;
        }
    }

    #[test]
    fn profile_matches_documented_values() {
        let spec = ChainSpec::new(Family::Bmp, 3)
            .with_temperatures(1.0, 2.0)
            .with_boundary(Boundary::Reservoirs);
        let profile = temperature_profile(&spec).unwrap();
        let expected = [1.25, 1.5, 1.75];
        for (p, e) in profile.iter().zip(expected) {
            assert!((p - e).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_temperature_profile_is_flat_and_moment_is_power() {
        let spec = absorbing(4, 1.5, 1.5);
        for p in temperature_profile(&spec).unwrap() {
            assert!((p - 1.5).abs() < 1e-12);
        }
        // With equal temperatures the moment is T^k for any start.
        let eta = DualConfig::at_sites(4, &[2, 2]);
        let m = stationary_moment(&eta, &spec).unwrap();
        assert!((m - 1.5 * 1.5).abs() < 1e-12);
    }

    #[test]
    fn profile_reflection_symmetry() {
        let fwd = temperature_profile(&absorbing(5, 1.0, 2.0)).unwrap();
        let rev = temperature_profile(&absorbing(5, 2.0, 1.0)).unwrap();
        for (a, b) in fwd.iter().zip(rev.iter().rev()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn covariance_matches_closed_form() {
        // L=2, temperatures (1, 0): 2*1*1/(5*9) = 2/45.
        let spec = absorbing(2, 1.0, 0.0);
        let cov = energy_covariance(1, 2, &spec).unwrap();
        assert!((cov - 2.0 / 45.0).abs() < 1e-13, "cov {cov}");

        // L=4, (1,3), temperatures (2,1): 2*1*2/(7*25) = 4/175.
        let spec = absorbing(4, 2.0, 1.0);
        let cov = energy_covariance(1, 3, &spec).unwrap();
        assert!((cov - 4.0 / 175.0).abs() < 1e-12);
        assert!((cov - covariance_closed_form(1, 3, &spec)).abs() < 1e-12);
    }

    #[test]
    fn covariance_vanishes_at_equilibrium_and_is_positive_otherwise() {
        let eq = absorbing(4, 1.3, 1.3);
        for (_, _, c) in covariance_pairs(&eq, &[(1, 2), (2, 4)]).unwrap() {
            assert!(c.abs() < 1e-12);
        }
        let neq = absorbing(4, 2.0, 1.0);
        for (_, _, c) in covariance_pairs(&neq, &[(1, 2), (1, 4), (2, 3)]).unwrap() {
            assert!(c > 0.0);
        }
    }

    #[test]
    fn site_order_is_enforced() {
        let spec = absorbing(4, 2.0, 1.0);
        assert!(matches!(
            energy_covariance(3, 3, &spec),
            Err(Error::SiteOrderViolation { .. })
        ));
        assert!(matches!(
            energy_covariance(2, 1, &spec),
            Err(Error::SiteOrderViolation { .. })
        ));
    }

    #[test]
    fn walker_budget_is_enforced() {
        let spec = absorbing(2, 1.0, 2.0);
        let eta = DualConfig::at_sites(2, &[1, 1, 2, 2, 2]);
        assert!(matches!(
            absorption_distribution(&eta, &spec),
            Err(Error::WalkerBudgetExceeded { got: 5, max: 4 })
        ));
    }

    #[test]
    fn iterative_backend_agrees_with_dense() {
        let spec = absorbing(5, 1.0, 2.0);
        let system = HarmonicSystem::build(&spec, 3).unwrap();
        let dense = system.solve_dense().unwrap();
        let gs = system.solve_gauss_seidel().unwrap();
        for (hd, hg) in dense.iter().zip(&gs) {
            for (a, b) in hd.iter().zip(hg) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn dense_backend_agrees_with_exact_oracle() {
        let spec = absorbing(4, 1.0, 2.0);
        let eta = DualConfig::at_sites(4, &[2, 3]);
        let exact = absorption_distribution_exact(&eta, &spec).unwrap();
        let float = absorption_distribution(&eta, &spec).unwrap();
        for ((a, b), v) in &exact {
            assert!((float.probability(*a, *b) - v.to_f64().unwrap()).abs() < 1e-13);
        }
    }
}
