//! Continuous-time jump chains: the symmetric inclusion process SIP(m) with
//! closed or absorbing boundaries, and the energy redistribution chains
//! (KMP and its Beta(m/2, m/2) generalization).

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Zero};
use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Boundary, ChainSpec, DualConfig, EnergyConfig, Family};
use crate::rng::trajectory_stream;

/// Default event budget for a single absorption run.
pub const DEFAULT_EVENT_BUDGET: u64 = 100_000_000;

/// One admissible walker move and its exact rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub rate: Ratio<i64>,
}

/// All transitions out of a dual configuration, with rates from the SIP
/// generator: `eta_i (m/2 + eta_j)` across each bulk edge, plus `(m/2) eta`
/// into the cemeteries when boundaries are absorbing. No moves leave a
/// cemetery.
#[derive(Debug, Clone)]
pub struct RateTable {
    pub transitions: Vec<Transition>,
    pub total_rate: f64,
}

/// Exact transition rates out of `eta`. Shared by the simulator and the
/// symbolic duality checks.
pub fn sip_rate_pairs(eta: &DualConfig, spec: &ChainSpec) -> Result<Vec<Transition>> {
    spec.require_family(Family::Sip)?;
    if eta.len() != spec.dual_len() {
        return Err(Error::DimensionMismatch {
            expected: spec.dual_len(),
            got: eta.len(),
        });
    }
    let l = spec.l;
    let half_m = spec.m / 2;
    let mut out = Vec::new();
    let mut push = |from: usize, to: usize, rate: Ratio<i64>| {
        if !rate.is_zero() {
            out.push(Transition { from, to, rate });
        }
    };
    for i in 1..l {
        let (ni, nj) = (eta.0[i] as i64, eta.0[i + 1] as i64);
        push(i, i + 1, Ratio::from_integer(ni) * (half_m + Ratio::from_integer(nj)));
        push(i + 1, i, Ratio::from_integer(nj) * (half_m + Ratio::from_integer(ni)));
    }
    if spec.boundary == Boundary::Absorbing {
        push(1, 0, Ratio::from_integer(eta.0[1] as i64) * half_m);
        push(l, l + 1, Ratio::from_integer(eta.0[l] as i64) * half_m);
    }
    Ok(out)
}

/// Builds the float-valued rate table used by the Gillespie loop.
pub fn sip_rates(eta: &DualConfig, spec: &ChainSpec) -> Result<RateTable> {
    let transitions = sip_rate_pairs(eta, spec)?;
    let total_rate = transitions
        .iter()
        .map(|t| ratio_f64(t.rate))
        .sum();
    Ok(RateTable { transitions, total_rate })
}

fn ratio_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// One Gillespie event: exponential holding time at the total rate, then a
/// transition chosen proportionally to its rate. Walker count is conserved.
pub fn gillespie_step<R: Rng>(
    eta: &DualConfig,
    table: &RateTable,
    rng: &mut R,
) -> Result<(DualConfig, f64)> {
    if table.total_rate <= 0.0 || table.transitions.is_empty() {
        return Err(Error::AbsorbedState);
    }
    let holding = Exp::new(table.total_rate)
        .expect("positive total rate")
        .sample(rng);
    let mut pick = rng.gen_range(0.0..table.total_rate);
    let mut chosen = table.transitions.last().expect("nonempty");
    for t in &table.transitions {
        let r = ratio_f64(t.rate);
        if pick < r {
            chosen = t;
            break;
        }
        pick -= r;
    }
    Ok((eta.hop(chosen.from, chosen.to), holding))
}

/// Where the walkers of one absorption run ended up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsorptionOutcome {
    /// Walkers absorbed at cemetery 0.
    pub a: u32,
    /// Walkers absorbed at cemetery L+1.
    pub b: u32,
    pub n_events: u64,
    pub total_time: f64,
}

/// Runs the absorbing SIP chain until every walker sits in a cemetery.
pub fn run_until_absorbed<R: Rng>(
    eta0: &DualConfig,
    spec: &ChainSpec,
    rng: &mut R,
    max_events: u64,
) -> Result<AbsorptionOutcome> {
    spec.require_family(Family::Sip)?;
    if spec.boundary != Boundary::Absorbing {
        return Err(Error::InvalidConfig(
            "absorption runs need boundary=absorbing".into(),
        ));
    }
    let mut eta = eta0.clone();
    let mut n_events = 0;
    let mut total_time = 0.0;
    loop {
        if eta.bulk_total() == 0 {
            return Ok(AbsorptionOutcome {
                a: eta.0[0],
                b: eta.0[spec.l + 1],
                n_events,
                total_time,
            });
        }
        if n_events >= max_events {
            return Err(Error::EventBudgetExceeded(max_events));
        }
        let table = sip_rates(&eta, spec)?;
        let (next, dt) = gillespie_step(&eta, &table, rng)?;
        eta = next;
        total_time += dt;
        n_events += 1;
    }
}

/// Independent absorption runs with per-run derived RNG streams, reduced in
/// run order regardless of scheduling.
pub fn run_absorption_ensemble(
    eta0: &DualConfig,
    spec: &ChainSpec,
    seed: u64,
    runs: u64,
    max_events: u64,
) -> Result<Vec<AbsorptionOutcome>> {
    (0..runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = trajectory_stream(seed, run);
            run_until_absorbed(eta0, spec, &mut rng, max_events)
        })
        .collect()
}

/// One redistribution event: a uniformly chosen bulk edge pools its energy
/// and resplits it by a Beta(m/2, m/2) fraction. For m = 2 the fraction is
/// uniform on [0, 1].
pub fn kmp_step<R: Rng>(z: &EnergyConfig, m: Ratio<i64>, rng: &mut R) -> Result<EnergyConfig> {
    if m <= Ratio::zero() {
        return Err(Error::NonPositiveM(m.to_string()));
    }
    if let Some(i) = z.0.iter().position(|v| *v < 0.0) {
        return Err(Error::NegativeEnergyInput(i));
    }
    let l = z.len();
    if l < 2 {
        return Err(Error::InvalidConfig("redistribution needs at least 2 sites".into()));
    }
    let i = rng.gen_range(0..l - 1);
    let p = beta_symmetric(m, rng);
    let total = z.0[i] + z.0[i + 1];
    let mut out = z.clone();
    out.0[i] = p * total;
    out.0[i + 1] = total - out.0[i];
    Ok(out)
}

/// Beta(m/2, m/2) sample built from two Gamma(m/2) draws, mirroring the fact
/// that the ratio of two equal-shape Gammas is Beta distributed.
pub fn beta_symmetric<R: Rng>(m: Ratio<i64>, rng: &mut R) -> f64 {
    let shape = ratio_f64(m) / 2.0;
    let gamma = Gamma::new(shape, 1.0).expect("positive shape");
    loop {
        let g1 = gamma.sample(rng);
        let g2 = gamma.sample(rng);
        let sum = g1 + g2;
        if sum > 0.0 {
            return g1 / sum;
        }
    }
}

/// Unnormalized negative-binomial stationary weight `p^n prod_{j<n}(m/2 + j) / n!`.
///
/// The missing normalization is configuration-independent, so it cancels in
/// every reversibility identity.
pub fn negbin_weight(n: u32, m: Ratio<i64>, p: Ratio<i64>) -> BigRational {
    let big = |r: Ratio<i64>| BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()));
    let mut acc = BigRational::one();
    for j in 0..n {
        acc *= big(m) / BigRational::from(BigInt::from(2))
            + BigRational::from(BigInt::from(j));
        acc *= big(p);
        acc /= BigRational::from(BigInt::from(j + 1));
    }
    acc
}

/// Checks `mu(eta) rate(eta -> eta') = mu(eta') rate(eta' -> eta)` exactly
/// for every transition of every closed-SIP configuration with bulk total
/// up to `max_total`. Returns the violating pairs (empty means reversible).
pub fn detailed_balance_violations(
    spec: &ChainSpec,
    max_total: u32,
    p: Ratio<i64>,
) -> Result<Vec<(DualConfig, DualConfig)>> {
    spec.require_family(Family::Sip)?;
    let big = |r: Ratio<i64>| BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()));
    let mu = |eta: &DualConfig| -> BigRational {
        eta.0[1..=spec.l]
            .iter()
            .map(|&n| negbin_weight(n, spec.m, p))
            .product()
    };
    let mut violations = Vec::new();
    for k in 1..=max_total {
        for eta in enumerate_bulk_configs(spec.l, k) {
            for t in sip_rate_pairs(&eta, spec)? {
                let target = eta.hop(t.from, t.to);
                let back = sip_rate_pairs(&target, spec)?
                    .into_iter()
                    .find(|r| r.from == t.to && r.to == t.from)
                    .map(|r| r.rate)
                    .unwrap_or_else(Ratio::zero);
                if mu(&eta) * big(t.rate) != mu(&target) * big(back) {
                    violations.push((eta.clone(), target));
                }
            }
        }
    }
    Ok(violations)
}

/// All bulk configurations with exactly `k` walkers on `l` sites
/// (cemeteries empty), in lexicographic order.
pub fn enumerate_bulk_configs(l: usize, k: u32) -> Vec<DualConfig> {
    let mut out = Vec::new();
    let mut current = vec![0u32; l];
    fn rec(site: usize, left: u32, current: &mut Vec<u32>, l: usize, out: &mut Vec<DualConfig>) {
        if site == l - 1 {
            current[site] = left;
            let mut eta = vec![0u32];
            eta.extend_from_slice(current);
            eta.push(0);
            out.push(DualConfig(eta));
            return;
        }
        for n in 0..=left {
            current[site] = n;
            rec(site + 1, left - n, current, l, out);
        }
    }
    rec(0, k, &mut current, l, &mut out);
    out
}
