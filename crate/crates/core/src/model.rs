//! Model catalog, configuration and state types, and the duality weight
//! functions shared by every other module.
//!
//! A [`ChainSpec`] is the single source of truth for a run: model family,
//! lattice size, parameter `m`, reservoir temperatures and boundary kind.
//! State vectors come in three flavors: real velocities ([`VelocityConfig`]),
//! non-negative site energies ([`EnergyConfig`]) and integer dual-walker
//! occupations ([`DualConfig`], which always carries the two cemetery slots
//! at indices `0` and `L+1` so that one indexing convention serves every
//! family).

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

use crate::error::{Error, Result};

/// Model family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "BMP")]
    Bmp,
    #[serde(rename = "BEP")]
    Bep,
    #[serde(rename = "SIP")]
    Sip,
    #[serde(rename = "KMP")]
    Kmp,
    #[serde(rename = "L3")]
    L3,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::Bmp => "BMP",
            Family::Bep => "BEP",
            Family::Sip => "SIP",
            Family::Kmp => "KMP",
            Family::L3 => "L3",
        };
        f.write_str(s)
    }
}

/// Boundary condition of the chain. `Closed` means bulk dynamics only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Reservoirs,
    Absorbing,
    Closed,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Boundary::Reservoirs => "reservoirs",
            Boundary::Absorbing => "absorbing",
            Boundary::Closed => "closed",
        };
        f.write_str(s)
    }
}

/// Full specification of a chain run.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub family: Family,
    /// Number of bulk sites.
    pub l: usize,
    /// Inclusion/energy parameter. Fixed to 1 for BMP duality, ignored by L3.
    pub m: Ratio<i64>,
    pub t_left: f64,
    pub t_right: f64,
    pub boundary: Boundary,
}

impl ChainSpec {
    pub fn new(family: Family, l: usize) -> Self {
        ChainSpec {
            family,
            l,
            m: Ratio::one(),
            t_left: 1.0,
            t_right: 1.0,
            boundary: Boundary::Closed,
        }
    }

    pub fn with_m(mut self, m: Ratio<i64>) -> Self {
        self.m = m;
        self
    }

    pub fn with_temperatures(mut self, t_left: f64, t_right: f64) -> Self {
        self.t_left = t_left;
        self.t_right = t_right;
        self
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    /// Checks every type invariant, returning `self` on success.
    pub fn validated(self) -> Result<Self> {
        if self.l == 0 {
            return Err(Error::NonPositiveSize(0));
        }
        if self.m <= Ratio::zero() {
            return Err(Error::NonPositiveM(self.m.to_string()));
        }
        if self.t_left <= 0.0 || !self.t_left.is_finite() {
            return Err(Error::NonPositiveTemperature(self.t_left));
        }
        if self.t_right <= 0.0 || !self.t_right.is_finite() {
            return Err(Error::NonPositiveTemperature(self.t_right));
        }
        if self.family == Family::L3 && (self.l != 3 || self.boundary != Boundary::Closed) {
            return Err(Error::L3SizeMismatch);
        }
        Ok(self)
    }

    /// Number of slots in a dual occupation vector (bulk plus cemeteries).
    pub fn dual_len(&self) -> usize {
        self.l + 2
    }

    pub fn require_family(&self, family: Family) -> Result<()> {
        if self.family != family {
            return Err(Error::WrongFamily {
                expected: family.to_string(),
                got: self.family.to_string(),
            });
        }
        Ok(())
    }

    /// The SIP chain dual to this spec: same geometry and temperatures,
    /// absorbing cemeteries in place of reservoirs.
    pub fn dual(&self) -> ChainSpec {
        ChainSpec {
            family: Family::Sip,
            l: self.l,
            m: self.m,
            t_left: self.t_left,
            t_right: self.t_right,
            boundary: Boundary::Absorbing,
        }
    }
}

/// Raw on-disk form. Exactly the documented field names, unknown keys rejected.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChainSpec {
    family: Family,
    #[serde(rename = "L")]
    l: i64,
    m: Option<RationalField>,
    #[serde(rename = "T_left")]
    t_left: Option<f64>,
    #[serde(rename = "T_right")]
    t_right: Option<f64>,
    boundary: Option<Boundary>,
}

/// Accepts an integer, an exactly-representable float, or a "p/q" string.
#[derive(Deserialize)]
#[serde(untagged)]
enum RationalField {
    Int(i64),
    Float(f64),
    Frac(String),
}

impl RationalField {
    fn to_ratio(&self) -> Result<Ratio<i64>> {
        match self {
            RationalField::Int(n) => Ok(Ratio::from_integer(*n)),
            RationalField::Float(x) => {
                let big = BigRational::from_float(*x)
                    .ok_or_else(|| Error::Parse(format!("non-finite m: {x}")))?;
                let numer = big.numer().to_i64();
                let denom = big.denom().to_i64();
                match (numer, denom) {
                    (Some(n), Some(d)) => Ok(Ratio::new(n, d)),
                    _ => Err(Error::Parse(format!(
                        "m = {x} has no small exact rational form; use a \"p/q\" string"
                    ))),
                }
            }
            RationalField::Frac(s) => parse_ratio(s),
        }
    }
}

/// Parses "p/q" or a plain integer into an exact rational.
pub fn parse_ratio(s: &str) -> Result<Ratio<i64>> {
    let bad = |_| Error::Parse(format!("invalid rational: {s}"));
    match s.split_once('/') {
        Some((p, q)) => {
            let p: i64 = p.trim().parse().map_err(bad)?;
            let q: i64 = q.trim().parse().map_err(bad)?;
            if q == 0 {
                return Err(Error::Parse(format!("zero denominator: {s}")));
            }
            Ok(Ratio::new(p, q))
        }
        None => Ok(Ratio::from_integer(s.trim().parse().map_err(bad)?)),
    }
}

/// Builds a validated [`ChainSpec`] from a flat JSON document.
///
/// `family` and `L` are required; `m` defaults to 1, temperatures to 1,
/// boundary to `closed`. Unknown keys are an error.
pub fn validate_spec(raw: &str) -> Result<ChainSpec> {
    let raw: RawChainSpec =
        serde_json::from_str(raw).map_err(|e| Error::Parse(format!("spec JSON: {e}")))?;
    if raw.l <= 0 {
        return Err(Error::NonPositiveSize(raw.l));
    }
    let m = match &raw.m {
        Some(v) => v.to_ratio()?,
        None => Ratio::one(),
    };
    let boundary = raw.boundary.unwrap_or(Boundary::Closed);
    ChainSpec {
        family: raw.family,
        l: raw.l as usize,
        m,
        t_left: raw.t_left.unwrap_or(1.0),
        t_right: raw.t_right.unwrap_or(1.0),
        boundary,
    }
    .validated()
}

impl Serialize for ChainSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("ChainSpec", 6)?;
        st.serialize_field("family", &self.family)?;
        st.serialize_field("L", &(self.l as u64))?;
        if self.m.is_integer() {
            st.serialize_field("m", &self.m.to_integer())?;
        } else {
            st.serialize_field("m", &self.m.to_string())?;
        }
        st.serialize_field("T_left", &self.t_left)?;
        st.serialize_field("T_right", &self.t_right)?;
        st.serialize_field("boundary", &self.boundary)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for ChainSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = RawChainSpec::deserialize(deserializer)?;
        if raw.l <= 0 {
            return Err(D::Error::custom(Error::NonPositiveSize(raw.l)));
        }
        let m = match &raw.m {
            Some(v) => v.to_ratio().map_err(D::Error::custom)?,
            None => Ratio::one(),
        };
        ChainSpec {
            family: raw.family,
            l: raw.l as usize,
            m,
            t_left: raw.t_left.unwrap_or(1.0),
            t_right: raw.t_right.unwrap_or(1.0),
            boundary: raw.boundary.unwrap_or(Boundary::Closed),
        }
        .validated()
        .map_err(D::Error::custom)
    }
}

/// Velocities of the `L` bulk particles.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityConfig(pub Vec<f64>);

impl VelocityConfig {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("non-finite velocity at site {i}")));
        }
        Ok(VelocityConfig(x))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total kinetic energy in the `x^2` convention.
    pub fn total_energy(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }
}

/// Non-negative site energies.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyConfig(pub Vec<f64>);

impl EnergyConfig {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if let Some(i) = z.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NegativeEnergyInput(i));
        }
        Ok(EnergyConfig(z))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Dual walker occupation over sites `0..=L+1`. Slots `0` and `L+1` are the
/// absorbing cemeteries; families without boundaries keep them at zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DualConfig(pub Vec<u32>);

impl DualConfig {
    /// All-zero configuration for a chain of `l` bulk sites.
    pub fn empty(l: usize) -> Self {
        DualConfig(vec![0; l + 2])
    }

    /// Single walker at bulk site `i` (1-based).
    pub fn single(l: usize, i: usize) -> Self {
        let mut eta = Self::empty(l);
        eta.0[i] += 1;
        eta
    }

    /// Walkers at the given bulk sites (1-based, duplicates allowed).
    pub fn at_sites(l: usize, sites: &[usize]) -> Self {
        let mut eta = Self::empty(l);
        for &i in sites {
            eta.0[i] += 1;
        }
        eta
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of bulk sites this configuration is sized for.
    pub fn bulk_len(&self) -> usize {
        self.0.len() - 2
    }

    /// Total walker count including cemeteries.
    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Walkers on bulk sites only.
    pub fn bulk_total(&self) -> u32 {
        self.0[1..self.0.len() - 1].iter().sum()
    }

    /// Moves one walker from `from` to `to`. Panics if `from` is empty.
    pub fn hop(&self, from: usize, to: usize) -> DualConfig {
        let mut eta = self.clone();
        assert!(eta.0[from] > 0, "no walker to move at site {from}");
        eta.0[from] -= 1;
        eta.0[to] += 1;
        eta
    }

    /// Parses the "eta0;eta1,...,etaL;etaL+1" command-line format.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(';').collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!(
                "dual configuration must have three ';'-separated parts, got {s:?}"
            )));
        }
        let num = |t: &str| -> Result<u32> {
            t.trim()
                .parse()
                .map_err(|_| Error::Parse(format!("invalid walker count {t:?} in {s:?}")))
        };
        let mut eta = vec![num(parts[0])?];
        for t in parts[1].split(',') {
            eta.push(num(t)?);
        }
        eta.push(num(parts[2])?);
        Ok(DualConfig(eta))
    }
}

impl fmt::Display for DualConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.0.len();
        let bulk: Vec<String> = self.0[1..n - 1].iter().map(|v| v.to_string()).collect();
        write!(f, "{};{};{}", self.0[0], bulk.join(","), self.0[n - 1])
    }
}

/// Exact probabilities for how `k` dual walkers split between the cemeteries.
#[derive(Debug, Clone, Serialize)]
pub struct AbsorptionDistribution {
    /// Total walker count of the bulk start.
    pub k: u32,
    /// `(a, b) -> probability`, over all splits with `a + b = k`.
    pub p: Vec<((u32, u32), f64)>,
}

impl AbsorptionDistribution {
    pub fn probability(&self, a: u32, b: u32) -> f64 {
        self.p
            .iter()
            .find(|((pa, pb), _)| *pa == a && *pb == b)
            .map(|(_, v)| *v)
            .unwrap_or(0.0)
    }

    pub fn total_probability(&self) -> f64 {
        self.p.iter().map(|(_, v)| v).sum()
    }
}

/// Odd double factorial `(2n-1)!!` with `(-1)!! = 1`.
pub fn double_factorial_odd(n: u32) -> BigInt {
    let mut acc = BigInt::one();
    for j in 1..=n {
        acc *= BigInt::from(2 * j - 1);
    }
    acc
}

/// `Gamma(m/2 + n) / Gamma(m/2)` as the exact product `prod_{j<n} (m/2 + j)`.
pub fn gamma_ratio(m: Ratio<i64>, n: u32) -> BigRational {
    let half_m = BigRational::new(BigInt::from(*m.numer()), BigInt::from(2 * *m.denom()));
    let mut acc = BigRational::one();
    for j in 0..n {
        acc *= &half_m + BigRational::from(BigInt::from(j));
    }
    acc
}

/// Duality weight between a velocity configuration and a dual walker
/// configuration: `T_l^eta0 * prod_i x_i^(2 eta_i) / (2 eta_i - 1)!! * T_r^etaL1`.
pub fn bmp_duality_weight(x: &VelocityConfig, eta: &DualConfig, spec: &ChainSpec) -> Result<f64> {
    spec.require_family(Family::Bmp)?;
    if x.len() != spec.l || eta.len() != spec.dual_len() {
        return Err(Error::DimensionMismatch {
            expected: spec.l,
            got: if x.len() != spec.l { x.len() } else { eta.len() },
        });
    }
    let mut weight = spec.t_left.powi(eta.0[0] as i32);
    for (i, &n) in eta.0[1..=spec.l].iter().enumerate() {
        if n == 0 {
            continue;
        }
        let norm = rational_to_f64(&BigRational::from(double_factorial_odd(n)));
        weight *= x.0[i].powi(2 * n as i32) / norm;
    }
    weight *= spec.t_right.powi(eta.0[spec.l + 1] as i32);
    Ok(weight)
}

/// Duality weight between an energy configuration and a bulk dual walker
/// configuration: `prod_i z_i^eta_i * Gamma(m/2) / (2^eta_i Gamma(m/2 + eta_i))`.
///
/// Cemetery entries of `eta` are ignored; the weight is a bulk product.
pub fn bep_duality_weight(z: &EnergyConfig, eta: &DualConfig, m: Ratio<i64>) -> Result<f64> {
    if m <= Ratio::zero() {
        return Err(Error::NonPositiveM(m.to_string()));
    }
    if eta.bulk_len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            got: eta.bulk_len(),
        });
    }
    let mut weight = 1.0;
    for (i, &n) in eta.0[1..=z.len()].iter().enumerate() {
        if n == 0 {
            continue;
        }
        let norm = BigRational::from(BigInt::from(1u64 << n)) * gamma_ratio(m, n);
        weight *= z.0[i].powi(n as i32) / rational_to_f64(&norm);
    }
    Ok(weight)
}

/// Lossy conversion used only at the float boundary of exact computations.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Fall back to a sign times infinity for values out of f64 range.
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}
