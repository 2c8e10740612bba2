//! Boundary-rate fits `|u| ~ C d^mu`, pointwise bound checks and Hölder
//! seminorm estimates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{Grid, SolverState};

pub const MIN_FIT_POINTS: usize = 8;
pub const MIN_FIT_OCTAVES: f64 = 2.0;
pub const DEFAULT_PAIR_COUNT: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub mu_theory: Option<f64>,
    pub mu_fitted: f64,
    #[serde(rename = "C_fitted")]
    pub c_fitted: f64,
    pub fit_range: [f64; 2],
    pub points: usize,
    pub residual_rms: f64,
    /// `min (C_fitted d^mu_fitted - |u|)` over the fitted points.
    pub bound_slack: f64,
}

impl RateReport {
    pub fn with_theory(mut self, mu: f64) -> Self {
        self.mu_theory = Some(mu);
        self
    }
}

fn check_pairs(values: &[(f64, f64)]) -> Result<()> {
    if let Some(&(d, u)) = values.iter().find(|(d, u)| !(*d > 0.0 && *u > 0.0 && d.is_finite() && u.is_finite())) {
        return Err(Error::InsufficientData(format!("pair (d = {d}, |u| = {u}) is not strictly positive")));
    }
    Ok(())
}

/// Least squares of `log|u|` on `log d`.
pub fn fit_rate(values: &[(f64, f64)]) -> Result<RateReport> {
    check_pairs(values)?;
    if values.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} points, at least {MIN_FIT_POINTS} needed",
            values.len()
        )));
    }
    let lo = values.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = values.iter().map(|p| p.0).fold(0.0, f64::max);
    if (hi / lo).log2() < MIN_FIT_OCTAVES {
        return Err(Error::InsufficientData(format!(
            "d spans [{lo}, {hi}], under {MIN_FIT_OCTAVES} octaves"
        )));
    }
    let n = values.len() as f64;
    let xs: Vec<f64> = values.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let c = intercept.exp();
    let slack = values
        .iter()
        .map(|&(d, u)| c * d.powf(slope) - u)
        .fold(f64::INFINITY, f64::min);
    Ok(RateReport {
        mu_theory: None,
        mu_fitted: slope,
        c_fitted: c,
        fit_range: [lo, hi],
        points: values.len(),
        residual_rms: (rss / n).sqrt(),
        bound_slack: slack,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub passed: bool,
    pub mu: f64,
    #[serde(rename = "C")]
    pub c: f64,
    /// Largest `|u| / (C d^mu)`.
    pub worst_ratio: f64,
    pub worst_pair: (f64, f64),
}

/// `|u| <= C d^mu` at every pair.
pub fn check_bound(values: &[(f64, f64)], mu: f64, c: f64) -> BoundCheck {
    let mut worst = (f64::NEG_INFINITY, (f64::NAN, f64::NAN));
    for &(d, u) in values {
        let r = u / (c * d.powf(mu));
        if r > worst.0 || r.is_nan() {
            worst = (if r.is_nan() { f64::INFINITY } else { r }, (d, u));
        }
    }
    BoundCheck { passed: worst.0 <= 1.0, mu, c, worst_ratio: worst.0, worst_pair: worst.1 }
}

/// `C (1 + diam^mu)`.
pub fn holder_constant(c: f64, mu: f64, diameter: f64) -> f64 {
    c * (1.0 + diameter.powf(mu))
}

/// `max |u(x) - u(y)| / |x - y|^mu` over `pairs` random node pairs, or over
/// all pairs when there are fewer than that.
pub fn empirical_holder_seminorm(points: &[[f64; 2]], u: &[f64], mu: f64, pairs: usize, seed: u64) -> f64 {
    let n = points.len().min(u.len());
    if n < 2 {
        return 0.0;
    }
    let quotient = |i: usize, j: usize| {
        let dx = points[i][0] - points[j][0];
        let dy = points[i][1] - points[j][1];
        (u[i] - u[j]).abs() / (dx * dx + dy * dy).sqrt().powf(mu)
    };
    let mut best: f64 = 0.0;
    if n * (n - 1) / 2 <= pairs {
        for i in 0..n {
            for j in i + 1..n {
                best = best.max(quotient(i, j));
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..pairs {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            best = best.max(quotient(i, j));
        }
    }
    best
}

/// Which part of a boundary profile enters the fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitWindow {
    /// Drop `d < skip_layers * h`.
    pub skip_layers: f64,
    /// Drop `d > max_fraction * diameter`.
    pub max_fraction: f64,
}

impl Default for FitWindow {
    fn default() -> Self {
        FitWindow { skip_layers: 3.0, max_fraction: 0.125 }
    }
}

impl FitWindow {
    pub fn select(&self, values: &[(f64, f64)], h: f64, diameter: f64) -> Vec<(f64, f64)> {
        values
            .iter()
            .copied()
            .filter(|&(d, _)| d >= self.skip_layers * h && d <= self.max_fraction * diameter)
            .collect()
    }
}

/// `(d_x, |u|)` at the nodes on the ray `x0 + t v`, `t > 0`, sorted by `t`
/// and cut where `d_x` stops increasing: beyond that point the nearest
/// boundary is no longer the one at `x0`. Only nodes within `1e-9 h` of the
/// ray count, so `x0` and `v` should be lattice-aligned.
pub fn ray_profile(grid: &Grid, u: &[f64], x0: &[f64], v: &[f64]) -> Vec<(f64, f64)> {
    let norm = (v[0] * v[0] + v[1] * v[1]).sqrt();
    let dir = [v[0] / norm, v[1] / norm];
    let mut out: Vec<(f64, f64, f64)> = grid
        .points()
        .iter()
        .zip(grid.distances())
        .zip(u)
        .filter_map(|((p, &d), &val)| {
            let r = [p[0] - x0[0], p[1] - x0[1]];
            let t = r[0] * dir[0] + r[1] * dir[1];
            let off = (r[0] * dir[1] - r[1] * dir[0]).abs();
            (t > 0.0 && off <= 1e-9 * grid.h() && val < 0.0).then_some((t, d, -val))
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    let keep = out.windows(2).position(|w| w[1].1 <= w[0].1).map_or(out.len(), |i| i + 1);
    out.into_iter().take(keep).map(|(_, d, a)| (d, a)).collect()
}

/// Fits the solved field along the inward ray from `x0`.
pub fn fit_solution_rate(
    grid: &Grid,
    state: &SolverState,
    x0: &[f64],
    normal: &[f64],
    diameter: f64,
    window: FitWindow,
) -> Result<(RateReport, Vec<(f64, f64)>)> {
    let profile = ray_profile(grid, &state.u, x0, normal);
    let sel = window.select(&profile, grid.h(), diameter);
    Ok((fit_rate(&sel)?, sel))
}

/// Geometric samples `d_j = lo (hi/lo)^(j/(count-1))`.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|j| lo * (hi / lo).powf(j as f64 / (count.max(2) - 1) as f64))
        .collect()
}

/// CSV `d,abs_u` at 17 significant digits.
pub fn write_pairs_csv<W: std::io::Write>(out: &mut W, values: &[(f64, f64)]) -> Result<()> {
    writeln!(out, "d,abs_u")?;
    for (d, u) in values {
        writeln!(out, "{d:.16e},{u:.16e}")?;
    }
    Ok(())
}
