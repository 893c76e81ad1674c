//! Steady-state estimates with batch-means error bars, boundary-flux
//! accounting, and the small statistics toolbox used by the test suites.

use serde::Serialize;

use crate::diffusion::{ObservationSeries, COL_LEFT, COL_RIGHT};
use crate::error::{Error, Result};
use crate::model::{ChainSpec, Family};

/// A time-average with its batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub burn_in: usize,
}

/// Default number of batches for error bars.
pub const DEFAULT_BATCHES: usize = 32;

/// Batch-means time average: drop `burn_in` samples, split the rest into
/// `n_batches` equal blocks (truncating the remainder) and use the spread
/// of the block averages for the error bar.
pub fn time_average(series: &[f64], burn_in: usize, n_batches: usize) -> Result<MomentEstimate> {
    if n_batches < 2 {
        return Err(Error::InvalidConfig("need at least 2 batches".into()));
    }
    if series.len() <= burn_in {
        return Err(Error::SeriesTooShort { len: series.len(), required: burn_in });
    }
    let post = &series[burn_in..];
    let batch_len = post.len() / n_batches;
    if batch_len == 0 {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            required: burn_in + n_batches,
        });
    }
    let used = batch_len * n_batches;
    let means: Vec<f64> = (0..n_batches)
        .map(|b| post[b * batch_len..(b + 1) * batch_len].iter().sum::<f64>() / batch_len as f64)
        .collect();
    let value = means.iter().sum::<f64>() / n_batches as f64;
    let var = means.iter().map(|m| (m - value) * (m - value)).sum::<f64>()
        / (n_batches as f64 - 1.0);
    Ok(MomentEstimate {
        value,
        stderr: (var / n_batches as f64).sqrt(),
        n_samples: used,
        burn_in,
    })
}

/// Combines independent estimates of the same quantity, in input order.
pub fn pool_estimates(parts: &[MomentEstimate]) -> Result<MomentEstimate> {
    if parts.is_empty() {
        return Err(Error::SeriesTooShort { len: 0, required: 1 });
    }
    let n = parts.len() as f64;
    let value = parts.iter().map(|p| p.value).sum::<f64>() / n;
    let stderr = parts.iter().map(|p| p.stderr * p.stderr).sum::<f64>().sqrt() / n;
    Ok(MomentEstimate {
        value,
        stderr,
        n_samples: parts.iter().map(|p| p.n_samples).sum(),
        burn_in: parts[0].burn_in,
    })
}

/// Boundary-flux summary of a reservoir run.
#[derive(Debug, Clone, Serialize)]
pub struct TransportEstimate {
    /// Mean boundary energy flux per unit time, positive left to right.
    pub j: MomentEstimate,
    /// `J (L+1) / (T_l - T_r)`; `None` at equal temperatures.
    pub kappa_l: Option<f64>,
    pub profile: Vec<MomentEstimate>,
}

impl TransportEstimate {
    pub fn kappa(&self) -> Result<f64> {
        self.kappa_l.ok_or(Error::EqualTemperaturesForKappa)
    }
}

/// Flux, conductivity and profile estimates from a recorded trajectory that
/// carries ledger and per-site energy columns.
///
/// The flux is measured from ledger increments over batch windows: energy
/// entering from the left counts positive, energy entering from the right
/// negative, and the two boundaries are averaged.
pub fn transport_summary(
    series: &ObservationSeries,
    spec: &ChainSpec,
    burn_in: usize,
    n_batches: usize,
) -> Result<TransportEstimate> {
    let e_left = series
        .column(COL_LEFT)
        .ok_or_else(|| Error::InvalidConfig("series lacks ledger columns".into()))?;
    let e_right = series
        .column(COL_RIGHT)
        .ok_or_else(|| Error::InvalidConfig("series lacks ledger columns".into()))?;
    let burn_in = burn_in.max(1);
    if n_batches < 2 {
        return Err(Error::InvalidConfig("need at least 2 batches".into()));
    }
    if series.rows.len() <= burn_in + n_batches {
        return Err(Error::SeriesTooShort {
            len: series.rows.len(),
            required: burn_in + n_batches,
        });
    }
    let post = series.rows.len() - burn_in;
    let window = post / n_batches;
    let anchor = |b: usize| burn_in + b * window - 1;
    let mut j_batches = Vec::with_capacity(n_batches);
    for b in 0..n_batches {
        let (s, e) = (anchor(b), anchor(b + 1));
        let dt = series.times[e] - series.times[s];
        if dt <= 0.0 {
            return Err(Error::InvalidConfig("non-increasing time column".into()));
        }
        let d_left = e_left[e] - e_left[s];
        let d_right = e_right[e] - e_right[s];
        j_batches.push((d_left - d_right) / (2.0 * dt));
    }
    let value = j_batches.iter().sum::<f64>() / n_batches as f64;
    let var = j_batches.iter().map(|j| (j - value) * (j - value)).sum::<f64>()
        / (n_batches as f64 - 1.0);
    let j = MomentEstimate {
        value,
        stderr: (var / n_batches as f64).sqrt(),
        n_samples: window * n_batches,
        burn_in,
    };

    let site_prefix = match spec.family {
        Family::Bep | Family::Kmp => "z",
        _ => "x2",
    };
    let mut profile = Vec::with_capacity(spec.l);
    for i in 1..=spec.l {
        let col = series
            .column(&format!("{site_prefix}_{i}"))
            .ok_or_else(|| Error::InvalidConfig(format!("series lacks column {site_prefix}_{i}")))?;
        profile.push(time_average(&col, burn_in, n_batches)?);
    }

    let dt_res = spec.t_left - spec.t_right;
    let kappa_l = if dt_res != 0.0 {
        Some(j.value * (spec.l as f64 + 1.0) / dt_res)
    } else {
        None
    };
    Ok(TransportEstimate { j, kappa_l, profile })
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (n, m) = (a.len(), b.len());
    let mut d: f64 = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    while i < n && j < m {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        let fa = i as f64 / n as f64;
        let fb = j as f64 / m as f64;
        d = d.max((fa - fb).abs());
    }
    d
}

/// One-sample Kolmogorov-Smirnov statistic against a CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(|x, y| x.total_cmp(y));
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in s.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at level `alpha`.
pub fn ks_critical_two_sample(alpha: f64, n: usize, m: usize) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Asymptotic one-sample KS critical value at level `alpha`.
pub fn ks_critical_one_sample(alpha: f64, n: usize) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c / (n as f64).sqrt()
}

/// Pearson chi-square statistic for observed counts against expected counts.
pub fn chi_square_statistic(observed: &[f64], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{
        run_trajectory, Observable, State, StepParams, COL_TOTAL,
    };
    use crate::model::{Boundary, VelocityConfig};
    use crate::rng::trajectory_stream;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn constant_series_has_zero_error() {
        let est = time_average(&vec![2.5; 100], 10, 4).unwrap();
        assert_eq!(est.value, 2.5);
        assert_eq!(est.stderr, 0.0);
        assert_eq!(est.n_samples, 88);
    }

    #[test]
    fn alternating_series_averages_to_zero() {
        let series: Vec<f64> = (0..64).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let est = time_average(&series, 0, 2).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn short_series_is_rejected() {
        assert!(matches!(
            time_average(&[1.0, 2.0], 5, 2),
            Err(Error::SeriesTooShort { .. })
        ));
        assert!(matches!(
            time_average(&[1.0, 2.0, 3.0], 2, 4),
            Err(Error::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn ou_variance_is_recovered_within_error_bars() {
        // Exact OU kernel samples at T = 1; the x^2 average must come out
        // at 1 within 3 batch-means standard errors.
        let mut rng = trajectory_stream(31, 0);
        let dt = 0.05;
        let decay = (-dt as f64).exp();
        let spread = (1.0 - (-2.0 * dt as f64).exp()).sqrt();
        let mut x = 0.0f64;
        let series: Vec<f64> = (0..200_000)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                x = x * decay + spread * g;
                x * x
            })
            .collect();
        let est = time_average(&series, 2_000, DEFAULT_BATCHES).unwrap();
        assert!(
            (est.value - 1.0).abs() <= 3.0 * est.stderr,
            "value {} stderr {}",
            est.value,
            est.stderr
        );
        assert!(est.stderr > 0.0);
    }

    #[test]
    fn estimates_are_deterministic() {
        let series: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        assert_eq!(
            time_average(&series, 100, 8).unwrap(),
            time_average(&series, 100, 8).unwrap()
        );
    }

    fn reservoir_run(
        l: usize,
        t_left: f64,
        t_right: f64,
        n_steps: u64,
        seed: u64,
    ) -> (ObservationSeries, ChainSpec, f64) {
        let spec = ChainSpec::new(Family::Bmp, l)
            .with_temperatures(t_left, t_right)
            .with_boundary(Boundary::Reservoirs);
        let init = State::Velocities(VelocityConfig::new(vec![1.0; l]).unwrap());
        let series = run_trajectory(
            &spec,
            &init,
            StepParams::new(1e-3, seed),
            n_steps,
            10,
            &[Observable::SiteEnergies, Observable::TotalEnergy, Observable::Ledger],
        )
        .unwrap();
        (series, spec, l as f64)
    }

    #[test]
    fn ledger_accounts_for_every_joule() {
        let (series, _spec, l) = reservoir_run(4, 1.0, 2.0, 100_000, 71);
        let e_left = series.column(COL_LEFT).unwrap();
        let e_right = series.column(COL_RIGHT).unwrap();
        let total = series.column(COL_TOTAL).unwrap();
        let injected = e_left.last().unwrap() + e_right.last().unwrap();
        let initial_energy = l; // init is all ones
        let delta = total.last().unwrap() - initial_energy;
        let scale = total.last().unwrap().abs().max(injected.abs()).max(1.0);
        assert!(
            (injected - delta).abs() <= 1e-9 * scale,
            "injected {injected}, delta {delta}"
        );
    }

    #[test]
    fn equilibrium_flux_is_zero_within_errors() {
        let (series, spec, _) = reservoir_run(4, 1.5, 1.5, 400_000, 72);
        let est = transport_summary(&series, &spec, 4_000, DEFAULT_BATCHES).unwrap();
        assert!(est.j.value.abs() <= 3.0 * est.j.stderr, "J {} +- {}", est.j.value, est.j.stderr);
        assert!(est.kappa_l.is_none());
        assert!(matches!(est.kappa(), Err(Error::EqualTemperaturesForKappa)));
    }

    #[test]
    fn gradient_drives_positive_flux_and_profile_matches_dual_solver() {
        let (series, spec, _) = reservoir_run(4, 2.0, 1.0, 2_000_000, 73);
        let est = transport_summary(&series, &spec, 20_000, DEFAULT_BATCHES).unwrap();
        assert!(
            est.j.value > 3.0 * est.j.stderr,
            "flux {} +- {} not positive",
            est.j.value,
            est.j.stderr
        );
        let exact = crate::absorb::temperature_profile(&spec).unwrap();
        for (i, (e, m)) in exact.iter().zip(&est.profile).enumerate() {
            assert!(
                (m.value - e).abs() <= 3.0 * m.stderr,
                "site {}: {} +- {} vs {}",
                i + 1,
                m.value,
                m.stderr,
                e
            );
        }
    }

    #[test]
    fn conductivity_is_stable_across_sizes() {
        // The exact dual computation gives kappa_L = 2 for every L; the two
        // measured sizes must agree within combined error bars.
        let mut kappas = Vec::new();
        for (l, seed) in [(4usize, 81u64), (8, 82)] {
            let (series, spec, _) = reservoir_run(l, 2.0, 1.0, 2_000_000, seed);
            let est = transport_summary(&series, &spec, 20_000, DEFAULT_BATCHES).unwrap();
            let kappa = est.kappa().unwrap();
            let kappa_se = est.j.stderr * (l as f64 + 1.0) / (spec.t_left - spec.t_right);
            kappas.push((kappa, kappa_se));
        }
        let (k4, s4) = kappas[0];
        let (k8, s8) = kappas[1];
        assert!(
            (k4 - k8).abs() <= 3.0 * (s4 * s4 + s8 * s8).sqrt(),
            "kappa_4 {k4} +- {s4}, kappa_8 {k8} +- {s8}"
        );
    }

    #[test]
    fn ks_statistics_detect_the_right_things() {
        let mut rng = trajectory_stream(37, 0);
        let uniform: Vec<f64> = (0..4000).map(|_| rand::Rng::gen::<f64>(&mut rng)).collect();
        let d = ks_one_sample(&uniform, |x| x.clamp(0.0, 1.0));
        assert!(d <= ks_critical_one_sample(0.01, 4000), "uniform rejected: {d}");

        let shifted: Vec<f64> = uniform.iter().map(|x| 0.5 * x).collect();
        let d = ks_one_sample(&shifted, |x| x.clamp(0.0, 1.0));
        assert!(d > ks_critical_one_sample(0.01, 4000));

        let other: Vec<f64> = (0..3000).map(|_| rand::Rng::gen::<f64>(&mut rng)).collect();
        let d = ks_two_sample(&uniform, &other);
        assert!(d <= ks_critical_two_sample(0.01, 4000, 3000), "same-law rejected: {d}");
    }

    #[test]
    fn chi_square_statistic_matches_hand_computation() {
        let stat = chi_square_statistic(&[12.0, 8.0], &[10.0, 10.0]);
        assert!((stat - 0.8).abs() < 1e-12);
    }
}
