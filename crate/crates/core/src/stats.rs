//! Reference laws for visible-singularity counts and the Monte Carlo harness
//! that measures them on sampled planes.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::explorer::{visible_singularities, ExploreError, LocatedPoint};
use crate::poisson_plane::{sample_plane, PlaneError, FORMAT_VERSION};
use crate::rng::{stream, trial_seed};
use crate::Vec2;

/// Relative extra radius sampled beyond what a trial looks at.
pub const SAMPLE_MARGIN: f64 = 0.01;
/// Smallest expected count per χ² bin after tail merging.
pub const MIN_EXPECTED: f64 = 5.0;
pub const MIN_TRIALS: usize = 100;
pub const MIN_ANGLES: usize = 20;

const PLANT_SALT: u64 = 0x91a7;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("outside the domain of the formula: {0}")]
    OutOfDomain(String),
    #[error("not enough data for a χ² test: {0}")]
    InsufficientData(String),
    #[error("need at least {need} samples, got {have}")]
    TooFewSamples { have: usize, need: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("trial {trial}: {source}")]
    Explore { trial: usize, source: ExploreError },
    #[error("trial {trial}: {source}")]
    Plane { trial: usize, source: PlaneError },
}

/// ln Γ(n + 1) − (n + ½) ln n + n − ½ ln 2π, without the cancellation of the
/// direct difference at large n.
fn stirling_remainder(n: f64) -> f64 {
    if n <= 15.0 {
        return ln_gamma(n + 1.0) - (n + 0.5) * n.ln() + n - 0.5 * TAU.ln();
    }
    let n2 = n * n;
    (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - (1.0 / 1680.0 - 1.0 / (1188.0 * n2)) / n2) / n2) / n2) / n
}

/// Deviance term x ln(x / m) + m − x.
fn deviance(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        for j in 1..1000 {
            ej *= v * v;
            let next = s + ej / (2 * j + 1) as f64;
            if next == s {
                break;
            }
            s = next;
        }
        s
    } else {
        x * (x / m).ln() + m - x
    }
}

/// Binomial(n, q) pmf in saddle-point form, accurate for n in the millions.
fn binomial_pmf(n: u64, k: u64, q: f64) -> f64 {
    if k == 0 {
        return (n as f64 * (-q).ln_1p()).exp();
    }
    if k == n {
        return (n as f64 * q.ln()).exp();
    }
    let (nf, kf, rest) = (n as f64, k as f64, (n - k) as f64);
    let ln = stirling_remainder(nf)
        - stirling_remainder(kf)
        - stirling_remainder(rest)
        - deviance(kf, nf * q)
        - deviance(rest, nf - nf * q);
    ln.exp() * (nf / (TAU * kf * rest)).sqrt()
}

/// `C(2g−3, k) · q^k · (1 − q)^(2g−k−3)` with `q = 4πR²/g`, the law of the
/// number of singularities visible within `R` of a given one in genus `g`.
pub fn binomial_reference(g: u64, k: u64, r: f64) -> Result<f64, StatsError> {
    if g < 2 {
        return Err(StatsError::OutOfDomain(format!("genus {g} is below 2")));
    }
    let n = 2 * g - 3;
    if k > n {
        return Err(StatsError::OutOfDomain(format!("k = {k} exceeds 2g − 3 = {n}")));
    }
    if !(r.is_finite() && r >= 0.0) {
        return Err(StatsError::OutOfDomain(format!("radius {r}")));
    }
    let q = 4.0 * PI * r * r / g as f64;
    if q >= 1.0 {
        return Err(StatsError::OutOfDomain(format!("4πR²/g = {q} is not below 1")));
    }
    if q == 0.0 {
        return Ok(if k == 0 { 1.0 } else { 0.0 });
    }
    Ok(binomial_pmf(n, k, q))
}

pub fn poisson_pmf(mean: f64, k: u64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (k as f64 * mean.ln() - mean - ln_gamma(k as f64 + 1.0)).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum ReferenceLaw {
    Poisson { mean: f64 },
    BinomialFormula { g: u64, r: f64 },
    /// Distance to the nearest point of an intensity-λ Poisson process:
    /// `P(D ≤ r) = 1 − exp(−λπr²)`.
    ExponentialArea { lambda: f64 },
}

impl ReferenceLaw {
    pub fn validate(&self) -> Result<(), StatsError> {
        let ok = match *self {
            ReferenceLaw::Poisson { mean } => mean.is_finite() && mean > 0.0,
            ReferenceLaw::BinomialFormula { g, r } => g >= 2 && r.is_finite() && r > 0.0,
            ReferenceLaw::ExponentialArea { lambda } => lambda.is_finite() && lambda > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(StatsError::InvalidParameter(format!("{self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ReferenceLaw::Poisson { mean } => mean,
            ReferenceLaw::BinomialFormula { g, r } => (2 * g - 3) as f64 * 4.0 * PI * r * r / g as f64,
            ReferenceLaw::ExponentialArea { lambda } => 0.5 / lambda.sqrt(),
        }
    }

    /// Probability of count `k`, for the discrete laws.
    pub fn pmf(&self, k: u64) -> Result<f64, StatsError> {
        match *self {
            ReferenceLaw::Poisson { mean } => Ok(poisson_pmf(mean, k)),
            ReferenceLaw::BinomialFormula { g, r } => {
                if k > 2 * g - 3 {
                    Ok(0.0)
                } else {
                    binomial_reference(g, k, r)
                }
            }
            ReferenceLaw::ExponentialArea { .. } => {
                Err(StatsError::InvalidParameter("the exponential-area law is continuous".into()))
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            ReferenceLaw::ExponentialArea { lambda } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-lambda * PI * x * x).exp_m1()
                }
            }
            _ => {
                if x < 0.0 {
                    return 0.0;
                }
                (0..=x.floor() as u64).map(|k| self.pmf(k).unwrap_or(0.0)).sum::<f64>().min(1.0)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chi2 {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// `(first count, last count or None for an open tail, observed, expected)` per merged bin.
    pub bins: Vec<(u64, Option<u64>, u64, f64)>,
}

/// Pearson χ² goodness of fit of `histogram[k]` = number of trials with
/// count `k` against a discrete law, merging tails until every bin expects
/// at least five trials.
pub fn chi2_gof(histogram: &[u64], law: &ReferenceLaw) -> Result<Chi2, StatsError> {
    law.validate()?;
    let n: u64 = histogram.iter().sum();
    if n == 0 {
        return Err(StatsError::InsufficientData("empty histogram".into()));
    }
    let nf = n as f64;
    // Bins depend only on the law and n: single counts while the remaining
    // upper tail still expects enough trials, then one open tail bin.
    let observed = |lo: u64, hi: Option<u64>| -> u64 {
        let end = hi.map_or(histogram.len(), |h| (h as usize + 1).min(histogram.len()));
        histogram.get(lo as usize..end).map_or(0, |s| s.iter().sum())
    };
    let mut bins: Vec<(u64, Option<u64>, u64, f64)> = Vec::new();
    let mut below = 0.0;
    let mut k = 0u64;
    loop {
        let p = law.pmf(k)?;
        if nf * (1.0 - below - p) < MIN_EXPECTED || k > 10_000 {
            bins.push((k, None, observed(k, None), nf * (1.0 - below).max(0.0)));
            break;
        }
        bins.push((k, Some(k), observed(k, Some(k)), nf * p));
        below += p;
        k += 1;
    }

    let mut merged: Vec<(u64, Option<u64>, u64, f64)> = Vec::new();
    for b in bins {
        match merged.last_mut() {
            Some(last) if last.3 < MIN_EXPECTED => {
                last.1 = b.1;
                last.2 += b.2;
                last.3 += b.3;
            }
            _ => merged.push(b),
        }
    }
    while merged.len() > 1 && merged.last().is_some_and(|b| b.3 < MIN_EXPECTED) {
        let b = merged.pop().expect("non-empty");
        let last = merged.last_mut().expect("non-empty");
        last.1 = b.1;
        last.2 += b.2;
        last.3 += b.3;
    }
    if merged.len() < 2 {
        return Err(StatsError::InsufficientData(format!("{} bin(s) after tail merging", merged.len())));
    }
    let statistic: f64 = merged.iter().map(|b| (b.2 as f64 - b.3).powi(2) / b.3).sum();
    let dof = merged.len() - 1;
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    let p_value = dist.sf(statistic).clamp(0.0, 1.0);
    Ok(Chi2 { statistic, dof, p_value, bins: merged })
}

/// `P(K > z)` for the limiting Kolmogorov distribution.
pub fn kolmogorov_sf(z: f64) -> f64 {
    if z <= 0.0 {
        return 1.0;
    }
    if z < 1.0 {
        // theta-function form converges fast for small z
        let c = (TAU).sqrt() / z;
        let s: f64 = (1..=6)
            .map(|k| {
                let m = (2 * k - 1) as f64;
                (-m * m * PI * PI / (8.0 * z * z)).exp()
            })
            .sum();
        return (1.0 - c * s).clamp(0.0, 1.0);
    }
    let s: f64 = (1..=100)
        .map(|k| {
            let kf = k as f64;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * kf * kf * z * z).exp()
        })
        .sum();
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov test. Returns the sup distance and the
/// asymptotic p-value with Stephens' small-sample correction.
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    (d, ks_p_value(d, xs.len()))
}

fn ks_p_value(d: f64, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let sn = (n as f64).sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

/// Kolmogorov–Smirnov test of holonomy directions against the uniform law
/// on `[0, 2π)`.
pub fn ks_uniform_angles(holonomies: &[Vec2]) -> Result<(f64, f64), StatsError> {
    if holonomies.len() < MIN_ANGLES {
        return Err(StatsError::TooFewSamples { have: holonomies.len(), need: MIN_ANGLES });
    }
    let angles: Vec<f64> = holonomies.iter().map(|h| crate::geom::normalize_angle(h.arg(), 0.0)).collect();
    Ok(ks_test(&angles, |a| (a / TAU).clamp(0.0, 1.0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Viewpoint {
    /// The origin of the root chart.
    Regular,
    /// A cone point spawned by a point planted uniformly in the unit disk.
    Singularity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ks {
    pub statistic: f64,
    pub p_value: f64,
    pub samples: usize,
    pub against: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NearestSummary {
    /// Trials with no visible singularity within the radius.
    pub censored: usize,
    pub median: Option<f64>,
    pub median_std_error: Option<f64>,
    pub reference_median: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub format_version: u32,
    pub experiment: String,
    pub viewpoint: Viewpoint,
    pub lambda: f64,
    pub radius: f64,
    pub seed: u64,
    pub trials: usize,
    /// Plane seed of every trial, in order.
    pub trial_seeds: Vec<u64>,
    /// `histogram[k]` = number of trials seeing exactly `k` singularities.
    pub histogram: Vec<u64>,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    pub reference: ReferenceLaw,
    pub reference_mean: f64,
    /// `λπR²` and `λ·2πR²`, the two candidate means for a regular viewpoint.
    pub candidate_means: [f64; 2],
    /// `mean / (λπR²)` for a regular viewpoint.
    pub disk_factor: Option<f64>,
    pub chi2: Option<Chi2>,
    /// Isotropy of pooled holonomy directions.
    pub angles_ks: Option<Ks>,
    /// Nearest-distance law, for the nearest-distance experiment.
    pub nearest_ks: Option<Ks>,
    pub nearest: Option<NearestSummary>,
}

impl McReport {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    /// `count,frequency` rows, frequency being the number of trials.
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("count,frequency\n");
        for (k, f) in self.histogram.iter().enumerate() {
            out.push_str(&format!("{k},{f}\n"));
        }
        out
    }
}

/// What one trial saw.
#[derive(Clone, Debug)]
struct TrialOutcome {
    holonomies: Vec<Vec2>,
}

fn uniform_in_unit_disk<R: Rng + ?Sized>(rng: &mut R) -> Vec2 {
    let r = rng.random::<f64>().sqrt();
    Vec2::from_polar(r, rng.random::<f64>() * TAU)
}

fn run_trial(i: usize, seed: u64, lambda: f64, radius: f64, from: Viewpoint) -> Result<TrialOutcome, StatsError> {
    let plane_err = |source| StatsError::Plane { trial: i, source };
    let explore_err = |source| StatsError::Explore { trial: i, source };
    let sighted = match from {
        Viewpoint::Regular => {
            let plane = sample_plane(seed, lambda, radius * (1.0 + SAMPLE_MARGIN)).map_err(plane_err)?;
            visible_singularities(&plane, &LocatedPoint::root(), radius).map_err(explore_err)?
        }
        Viewpoint::Singularity => {
            let mut rng = stream(seed, &[], PLANT_SALT);
            loop {
                let x = uniform_in_unit_disk(&mut rng);
                let base =
                    sample_plane(seed, lambda, x.norm() + radius * (1.0 + SAMPLE_MARGIN)).map_err(plane_err)?;
                match base.plant(x) {
                    Ok((plane, cone)) => {
                        let p = LocatedPoint::cone(&plane, &cone).map_err(explore_err)?;
                        break visible_singularities(&plane, &p, radius).map_err(explore_err)?;
                    }
                    Err(PlaneError::DegeneratePlant(x)) => {
                        log::debug!("trial {i}: planted point {x:?} is degenerate, redrawing");
                    }
                    Err(e) => return Err(plane_err(e)),
                }
            }
        }
    };
    Ok(TrialOutcome { holonomies: sighted.into_iter().map(|s| s.holonomy).collect() })
}

fn check_experiment(lambda: f64, radius: f64, trials: usize) -> Result<(), StatsError> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(StatsError::InvalidParameter(format!("intensity must be positive, got {lambda}")));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(StatsError::InvalidParameter(format!("radius must be positive, got {radius}")));
    }
    if trials < MIN_TRIALS {
        return Err(StatsError::InvalidParameter(format!("need at least {MIN_TRIALS} trials, got {trials}")));
    }
    Ok(())
}

fn run_trials(
    lambda: f64,
    radius: f64,
    from: Viewpoint,
    trials: usize,
    seed: u64,
) -> Result<(Vec<u64>, Vec<TrialOutcome>), StatsError> {
    let seeds: Vec<u64> = (0..trials as u64).map(|i| trial_seed(seed, i)).collect();
    let outcomes = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| run_trial(i, s, lambda, radius, from))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((seeds, outcomes))
}

fn base_report(
    experiment: &str,
    lambda: f64,
    radius: f64,
    from: Viewpoint,
    seed: u64,
    trial_seeds: Vec<u64>,
    outcomes: &[TrialOutcome],
) -> McReport {
    let counts: Vec<u64> = outcomes.iter().map(|o| o.holonomies.len() as u64).collect();
    let trials = counts.len();
    let mut histogram = vec![0u64; counts.iter().max().map_or(1, |&m| m as usize + 1)];
    for &c in &counts {
        histogram[c as usize] += 1;
    }
    let n = trials as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    let variance = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let disk = lambda * PI * radius * radius;
    let reference_mean = match from {
        Viewpoint::Regular => disk,
        Viewpoint::Singularity => 2.0 * disk,
    };
    let reference = ReferenceLaw::Poisson { mean: reference_mean };
    let chi2 = match chi2_gof(&histogram, &reference) {
        Ok(c) => Some(c),
        Err(e) => {
            log::debug!("{experiment}: no χ² test: {e}");
            None
        }
    };
    let pooled: Vec<Vec2> = outcomes.iter().flat_map(|o| o.holonomies.iter().copied()).collect();
    let angles_ks = ks_uniform_angles(&pooled).ok().map(|(statistic, p_value)| Ks {
        statistic,
        p_value,
        samples: pooled.len(),
        against: "uniform angle on [0, 2π)".into(),
    });
    McReport {
        format_version: FORMAT_VERSION,
        experiment: experiment.into(),
        viewpoint: from,
        lambda,
        radius,
        seed,
        trials,
        trial_seeds,
        histogram,
        mean,
        variance,
        std_error: (variance / n).sqrt(),
        reference,
        reference_mean,
        candidate_means: [disk, 2.0 * disk],
        disk_factor: (from == Viewpoint::Regular).then(|| mean / disk),
        chi2,
        angles_ks,
        nearest_ks: None,
        nearest: None,
    }
}

/// Counts singularities visible within `radius` over independently sampled
/// planes, and fits the counts to the Poisson law of the construction.
pub fn mc_visible_count(
    lambda: f64,
    radius: f64,
    from: Viewpoint,
    trials: usize,
    seed: u64,
) -> Result<McReport, StatsError> {
    check_experiment(lambda, radius, trials)?;
    let (seeds, outcomes) = run_trials(lambda, radius, from, trials, seed)?;
    Ok(base_report("visible-count", lambda, radius, from, seed, seeds, &outcomes))
}

/// Distance from the root origin to the nearest visible singularity,
/// censored at `radius`, compared with `1 − exp(−λπr²)`.
pub fn mc_nearest_distance(lambda: f64, radius: f64, trials: usize, seed: u64) -> Result<McReport, StatsError> {
    check_experiment(lambda, radius, trials)?;
    let (seeds, outcomes) = run_trials(lambda, radius, Viewpoint::Regular, trials, seed)?;
    let mut report = base_report("nearest-distance", lambda, radius, Viewpoint::Regular, seed, seeds, &outcomes);
    let law = ReferenceLaw::ExponentialArea { lambda };
    let mut nearest: Vec<f64> = outcomes
        .iter()
        .map(|o| o.holonomies.iter().map(|h| h.norm()).fold(f64::INFINITY, f64::min))
        .collect();
    nearest.sort_by(f64::total_cmp);
    let censored = nearest.iter().filter(|d| d.is_infinite()).count();
    let n = trials as f64;

    // sup |F_n − F| over [0, R); censored trials only enter through n
    let mut d: f64 = 0.0;
    let seen = trials - censored;
    for (i, &x) in nearest[..seen].iter().enumerate() {
        let f = law.cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d = d.max((law.cdf(radius) - seen as f64 / n).abs());
    report.nearest_ks = Some(Ks {
        statistic: d,
        p_value: ks_p_value(d, trials),
        samples: trials,
        against: format!("1 − exp(−{lambda}πr²) on [0, {radius})"),
    });

    let reference_median = (2f64.ln() / (lambda * PI)).sqrt();
    let median = (censored * 2 < trials).then(|| {
        let k = trials / 2;
        if trials % 2 == 1 {
            nearest[k]
        } else {
            0.5 * (nearest[k - 1] + nearest[k])
        }
    });
    // asymptotic standard error 1/(2 f(m) √n) with the reference density at the median
    let density = |r: f64| 2.0 * lambda * PI * r * (-lambda * PI * r * r).exp();
    let median_std_error = median.map(|m| 1.0 / (2.0 * density(m) * n.sqrt()));
    report.nearest = Some(NearestSummary { censored, median, median_std_error, reference_median });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Poisson};

    #[test]
    fn binomial_reference_domain() {
        assert!(matches!(binomial_reference(3, 4, 0.1), Err(StatsError::OutOfDomain(_))));
        assert!(matches!(binomial_reference(2, 0, 1.0), Err(StatsError::OutOfDomain(_))));
        assert!(matches!(binomial_reference(1, 0, 0.1), Err(StatsError::OutOfDomain(_))));
    }

    #[test]
    fn binomial_reference_values() {
        let v = binomial_reference(1_000_000, 0, 0.5).unwrap();
        assert_relative_eq!(v, 1.8674e-3, max_relative = 1e-4);
        let direct = (1999997.0 * (-PI / 1e6f64).ln_1p()).exp();
        assert_relative_eq!(v, direct, max_relative = 1e-12);
        for g in [2u64, 5, 40] {
            let total: f64 = (0..=2 * g - 3).map(|k| binomial_reference(g, k, 0.2).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-10, "g {g}: {total}");
        }
        for k in 0..=10 {
            let b = binomial_reference(1_000_000, k, 0.5).unwrap();
            assert!((b - poisson_pmf(TAU, k)).abs() < 1e-3);
        }
    }

    #[test]
    fn saddle_point_matches_direct_product() {
        for (n, q) in [(7u64, 0.3f64), (40, 0.05), (201, 0.6)] {
            for k in 0..=n {
                let mut direct = 1.0;
                for i in 0..k {
                    direct *= (n - i) as f64 / (i + 1) as f64;
                }
                direct *= q.powi(k as i32) * (1.0 - q).powi((n - k) as i32);
                let got = binomial_pmf(n, k, q);
                assert!((got - direct).abs() <= 1e-12 * direct.max(1e-300) + 1e-300, "n {n} k {k}: {got} vs {direct}");
            }
        }
        let total: f64 = (0..=1_999_997).map(|k| binomial_reference(1_000_000, k, 0.5).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-10, "{total}");
    }

    #[test]
    fn poisson_pmf_normalisation_and_mean() {
        let m = 8.0 * PI * 0.25;
        assert_eq!(poisson_pmf(m, 0), (-m).exp());
        let total: f64 = (0..=200).map(|k| poisson_pmf(m, k)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let mean: f64 = (0..=200).map(|k| k as f64 * poisson_pmf(m, k)).sum();
        assert!((mean - m).abs() < 1e-10);
    }

    fn poisson_histogram(rng: &mut ChaCha8Rng, mean: f64, n: usize) -> Vec<u64> {
        let d = Poisson::new(mean).unwrap();
        let mut h = vec![];
        for _ in 0..n {
            let k = d.sample(rng) as usize;
            if h.len() <= k {
                h.resize(k + 1, 0);
            }
            h[k] += 1;
        }
        h
    }

    #[test]
    fn chi2_is_calibrated() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let law = ReferenceLaw::Poisson { mean: 3.0 };
        let rejected = (0..1000)
            .filter(|_| chi2_gof(&poisson_histogram(&mut rng, 3.0, 10_000), &law).unwrap().p_value < 0.05)
            .count();
        assert!((20..=80).contains(&rejected), "{rejected}");
    }

    #[test]
    fn chi2_has_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let h = poisson_histogram(&mut rng, 3.0, 10_000);
        assert!(chi2_gof(&h, &ReferenceLaw::Poisson { mean: 6.0 }).unwrap().p_value < 1e-6);
    }

    #[test]
    fn chi2_rejects_a_single_bin() {
        assert!(matches!(
            chi2_gof(&[1000], &ReferenceLaw::Poisson { mean: 1e-6 }),
            Err(StatsError::InsufficientData(_))
        ));
        assert!(matches!(chi2_gof(&[3], &ReferenceLaw::Poisson { mean: 1.0 }), Err(StatsError::InsufficientData(_))));
    }

    #[test]
    fn chi2_bins_account_for_every_trial() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = poisson_histogram(&mut rng, 2.0, 500);
        let c = chi2_gof(&h, &ReferenceLaw::Poisson { mean: 2.0 }).unwrap();
        assert_eq!(c.bins.iter().map(|b| b.2).sum::<u64>(), 500);
        assert!((c.bins.iter().map(|b| b.3).sum::<f64>() - 500.0).abs() < 1e-9);
        assert!(c.bins.iter().all(|b| b.3 >= MIN_EXPECTED));
        assert_eq!(c.bins.last().unwrap().1, None);
    }

    #[test]
    fn kolmogorov_distribution() {
        // reference values of the limiting law
        assert_relative_eq!(kolmogorov_sf(1.3581), 0.05, max_relative = 1e-3);
        assert_relative_eq!(kolmogorov_sf(1.6276), 0.01, max_relative = 1e-3);
        assert_relative_eq!(kolmogorov_sf(0.5), 0.9639, max_relative = 1e-3);
        // the two series agree where they meet
        let lo = kolmogorov_sf(1.0 - 1e-12);
        let hi = kolmogorov_sf(1.0);
        assert!((lo - hi).abs() < 1e-9);
    }

    #[test]
    fn ks_uniform_angles_cases() {
        let grid: Vec<Vec2> = (0..100).map(|k| Vec2::polar(TAU * (k as f64 + 0.5) / 100.0)).collect();
        let (d, p) = ks_uniform_angles(&grid).unwrap();
        assert!(d <= 0.01 + 1e-12 && p > 0.99, "{d} {p}");
        let same = vec![Vec2::new(1.0, 1.0); 50];
        assert!(ks_uniform_angles(&same).unwrap().1 < 1e-6);
        assert!(matches!(ks_uniform_angles(&grid[..10]), Err(StatsError::TooFewSamples { .. })));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let iso: Vec<Vec2> = (0..2000).map(|_| uniform_in_unit_disk(&mut rng)).collect();
        assert!(ks_uniform_angles(&iso).unwrap().1 > 0.01);
    }

    #[test]
    fn reference_law_cdf() {
        let law = ReferenceLaw::ExponentialArea { lambda: 4.0 };
        let m = (2f64.ln() / (4.0 * PI)).sqrt();
        assert_relative_eq!(law.cdf(m), 0.5, max_relative = 1e-12);
        assert_relative_eq!(ReferenceLaw::Poisson { mean: 2.0 }.cdf(1.0), 3.0 * (-2f64).exp(), max_relative = 1e-12);
        assert!(ReferenceLaw::Poisson { mean: 0.0 }.validate().is_err());
    }

    #[test]
    fn tiny_intensity_sees_nothing() {
        let r = mc_visible_count(1e-6, 0.5, Viewpoint::Regular, 100, 0).unwrap();
        assert_eq!(r.histogram, vec![100]);
        assert!(r.chi2.is_none());
        let r = mc_visible_count(1e-6, 0.5, Viewpoint::Singularity, 100, 0).unwrap();
        assert_eq!(r.histogram, vec![100]);
        let r = mc_nearest_distance(1e-6, 1.0, 100, 0).unwrap();
        assert_eq!(r.nearest.unwrap().censored, 100);
    }

    #[test]
    fn reports_are_reproducible_and_consistent() {
        let a = mc_visible_count(4.0, 0.3, Viewpoint::Singularity, 100, 5).unwrap();
        let b = mc_visible_count(4.0, 0.3, Viewpoint::Singularity, 100, 5).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(a.histogram.iter().sum::<u64>(), 100);
        assert_relative_eq!(a.reference_mean, 4.0 * TAU * 0.09, max_relative = 1e-12);
        let csv = a.histogram_csv();
        assert!(csv.starts_with("count,frequency\n0,"));
        assert_eq!(csv.lines().count(), a.histogram.len() + 1);
    }

    #[test]
    fn too_few_trials() {
        assert!(matches!(
            mc_visible_count(4.0, 0.5, Viewpoint::Regular, 99, 0),
            Err(StatsError::InvalidParameter(_))
        ));
    }
}
