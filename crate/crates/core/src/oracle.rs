//! Exact solutions of `det D^2 u = |u|^-(n+2)` and finite-difference
//! differential oracles.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactKind {
    /// `-sqrt(1 - |x|^2)` on the unit ball.
    Ball,
    /// `-c x_n^(1/(n+1)) (1 - |x'|^2)^(n/(2(n+1)))` on `{|x'| < 1, x_n > 0}`.
    Cylinder,
    /// `-[kappa x_n^2 - |x'|^2]^(n/(2(n+1)))` inside the cone `kappa x_n^2 > |x'|^2`.
    Cone,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactSolution {
    pub kind: ExactKind,
    pub n: usize,
}

/// How a residual check obtains the Hessian.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HessianSource {
    ClosedForm,
    FiniteDifference,
}

fn split(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    let r2: f64 = x[..n - 1].iter().map(|v| v * v).sum();
    (r2, x[n - 1])
}

impl ExactSolution {
    pub fn ball(n: usize) -> Self {
        ExactSolution { kind: ExactKind::Ball, n }
    }

    pub fn cylinder(n: usize) -> Self {
        ExactSolution { kind: ExactKind::Cylinder, n }
    }

    pub fn cone(n: usize) -> Self {
        ExactSolution { kind: ExactKind::Cone, n }
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    /// Cylinder prefactor `(n+1)^(1/2) n^(-n/(2(n+1)))`.
    fn cylinder_constant(&self) -> f64 {
        let n = self.nf();
        (n + 1.0).sqrt() * n.powf(-n / (2.0 * (n + 1.0)))
    }

    /// Cone opening `(n+1)^(n+1) / n^n`.
    pub fn cone_kappa(&self) -> f64 {
        let n = self.nf();
        (n + 1.0).powf(n + 1.0) / n.powf(n)
    }

    /// Boundary decay exponent of the solution's natural rate.
    pub fn boundary_exponent(&self) -> f64 {
        let n = self.nf();
        match self.kind {
            ExactKind::Ball => 0.5,
            ExactKind::Cylinder => 1.0 / (n + 1.0),
            ExactKind::Cone => n / (n + 1.0),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.n {
            return false;
        }
        let (r2, xn) = split(x);
        match self.kind {
            ExactKind::Ball => r2 + xn * xn < 1.0,
            ExactKind::Cylinder => r2 < 1.0 && xn > 0.0,
            ExactKind::Cone => xn > 0.0 && self.cone_kappa() * xn * xn - r2 > 0.0,
        }
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain(format!("{x:?} is outside the domain of the {:?} solution", self.kind)))
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let (r2, xn) = split(x);
        let n = self.nf();
        let q = n / (2.0 * (n + 1.0));
        Ok(match self.kind {
            ExactKind::Ball => -(1.0 - r2 - xn * xn).sqrt(),
            ExactKind::Cylinder => -self.cylinder_constant() * xn.powf(1.0 / (n + 1.0)) * (1.0 - r2).powf(q),
            ExactKind::Cone => -(self.cone_kappa() * xn * xn - r2).powf(q),
        })
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let m = self.n;
        let (r2, xn) = split(x);
        let n = self.nf();
        let q = n / (2.0 * (n + 1.0));
        let mut g = vec![0.0; m];
        match self.kind {
            ExactKind::Ball => {
                let s = (1.0 - r2 - xn * xn).sqrt();
                for i in 0..m {
                    g[i] = x[i] / s;
                }
            }
            ExactKind::Cylinder => {
                let c = self.cylinder_constant();
                let p = 1.0 / (n + 1.0);
                let w = 1.0 - r2;
                for i in 0..m - 1 {
                    g[i] = 2.0 * c * q * xn.powf(p) * w.powf(q - 1.0) * x[i];
                }
                g[m - 1] = -c * p * xn.powf(p - 1.0) * w.powf(q);
            }
            ExactKind::Cone => {
                let kappa = self.cone_kappa();
                let s = kappa * xn * xn - r2;
                let f = -q * s.powf(q - 1.0);
                for i in 0..m - 1 {
                    g[i] = f * (-2.0 * x[i]);
                }
                g[m - 1] = f * 2.0 * kappa * xn;
            }
        }
        Ok(g)
    }

    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check(x)?;
        let m = self.n;
        let (r2, xn) = split(x);
        let n = self.nf();
        let q = n / (2.0 * (n + 1.0));
        let mut h = DMatrix::zeros(m, m);
        match self.kind {
            ExactKind::Ball => {
                // D^2 of -sqrt(1-|x|^2) is (I + x x^T / s^2) / s.
                let s2 = 1.0 - r2 - xn * xn;
                let s = s2.sqrt();
                for i in 0..m {
                    for j in 0..m {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        h[(i, j)] = (delta + x[i] * x[j] / s2) / s;
                    }
                }
            }
            ExactKind::Cylinder => {
                let c = self.cylinder_constant();
                let p = 1.0 / (n + 1.0);
                let w = 1.0 - r2;
                let f = xn.powf(p);
                for i in 0..m - 1 {
                    for j in 0..m - 1 {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        h[(i, j)] = 2.0 * c * q * f
                            * (w.powf(q - 1.0) * delta - 2.0 * (q - 1.0) * w.powf(q - 2.0) * x[i] * x[j]);
                    }
                    let mixed = 2.0 * c * q * p * xn.powf(p - 1.0) * w.powf(q - 1.0) * x[i];
                    h[(i, m - 1)] = mixed;
                    h[(m - 1, i)] = mixed;
                }
                h[(m - 1, m - 1)] = -c * p * (p - 1.0) * xn.powf(p - 2.0) * w.powf(q);
            }
            ExactKind::Cone => {
                let kappa = self.cone_kappa();
                let s = kappa * xn * xn - r2;
                let mut ds = vec![0.0; m];
                for i in 0..m - 1 {
                    ds[i] = -2.0 * x[i];
                }
                ds[m - 1] = 2.0 * kappa * xn;
                let outer = -q * (q - 1.0) * s.powf(q - 2.0);
                let lin = -q * s.powf(q - 1.0);
                for i in 0..m {
                    for j in 0..m {
                        h[(i, j)] = outer * ds[i] * ds[j];
                    }
                    h[(i, i)] += lin * if i == m - 1 { 2.0 * kappa } else { -2.0 };
                }
            }
        }
        Ok(h)
    }

    /// Distance from `x` to the edge of the solution's natural domain along
    /// which differences stay well defined (used to scale FD steps).
    fn local_scale(&self, x: &[f64]) -> f64 {
        let (r2, xn) = split(x);
        match self.kind {
            ExactKind::Ball => 1.0 - (r2 + xn * xn).sqrt(),
            ExactKind::Cylinder => xn.min(1.0 - r2.sqrt()),
            ExactKind::Cone => {
                let kappa = self.cone_kappa();
                let s = kappa * xn * xn - r2;
                let grad = (4.0 * kappa * kappa * xn * xn + 4.0 * r2).sqrt();
                (s / grad).min(xn)
            }
        }
    }

    /// Sixth-order FD Hessian (two Richardson levels) with a step tied to
    /// the local distance to the singular set. At `1e-3` of that distance a
    /// single level already loses ~1e-5 of `det` to rounding in the flat
    /// direction of the cone.
    pub fn fd_hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let h = 0.04 * self.local_scale(x);
        let f = |p: &[f64]| self.value(p);
        let coarse = fd_hessian_richardson(f, x, h)?;
        let fine = fd_hessian_richardson(f, x, 0.5 * h)?;
        Ok((fine * 16.0 - coarse) / 15.0)
    }

    /// Random points of a bounded part of the domain, kept a fixed fraction
    /// away from the singular set: `|x| < 0.9` for the ball, `|x'| < 0.9`,
    /// `x_n in (0.05, 2)` for the cylinder, and `x_n in (0.1, 2)` inside 0.9
    /// of the opening for the cone.
    pub fn sample_points<R: Rng>(&self, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let m = self.n - 1;
        let in_disk = |rng: &mut R, radius: f64| -> Vec<f64> {
            loop {
                let p: Vec<f64> = (0..m).map(|_| rng.random_range(-radius..radius)).collect();
                if p.iter().map(|v| v * v).sum::<f64>() < radius * radius {
                    return p;
                }
            }
        };
        (0..count)
            .map(|_| match self.kind {
                ExactKind::Ball => loop {
                    let p: Vec<f64> = (0..self.n).map(|_| rng.random_range(-0.9..0.9)).collect();
                    if p.iter().map(|v| v * v).sum::<f64>() < 0.81 {
                        break p;
                    }
                },
                ExactKind::Cylinder => {
                    let mut p = in_disk(rng, 0.9);
                    p.push(rng.random_range(0.05..2.0));
                    p
                }
                ExactKind::Cone => {
                    let xn = rng.random_range(0.1..2.0);
                    let mut p = in_disk(rng, 0.9 * self.cone_kappa().sqrt() * xn);
                    p.push(xn);
                    p
                }
            })
            .collect()
    }

    /// `(d_x, |u|)` along the canonical normal ray: up the axis from the
    /// south pole (ball), from the centre of the bottom face (cylinder), or
    /// from the vertex (cone).
    pub fn normal_profile(&self, distances: &[f64]) -> Result<Vec<(f64, f64)>> {
        let mut p = vec![0.0; self.n];
        distances
            .iter()
            .map(|&d| {
                p[self.n - 1] = match self.kind {
                    ExactKind::Ball => d - 1.0,
                    ExactKind::Cylinder => d,
                    ExactKind::Cone => {
                        let k = self.cone_kappa();
                        d * ((1.0 + k) / k).sqrt()
                    }
                };
                Ok((d, self.value(&p)?.abs()))
            })
            .collect()
    }

    /// `|det D^2 u * |u|^(n+2) - 1|`.
    pub fn residual(&self, x: &[f64], source: HessianSource) -> Result<f64> {
        let hess = match source {
            HessianSource::ClosedForm => self.hessian(x)?,
            HessianSource::FiniteDifference => self.fd_hessian(x)?,
        };
        let u = self.value(x)?;
        Ok((hess.determinant() * u.abs().powi(self.n as i32 + 2) - 1.0).abs())
    }
}

/// Wraps a stencil evaluation failure as a domain error.
fn stencil<F>(f: &F, p: &[f64]) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    f(p).map_err(|e| match e {
        Error::Domain(m) => Error::Domain(format!("finite-difference stencil left the domain: {m}")),
        other => other,
    })
}

/// Default FD step `1e-5 max(1, |x|)`.
pub fn default_step(x: &[f64]) -> f64 {
    1e-5 * x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0)
}

pub fn fd_gradient<F>(f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut p = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        p[i] = x[i] + h;
        let fp = stencil(&f, &p)?;
        p[i] = x[i] - h;
        let fm = stencil(&f, &p)?;
        p[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

pub fn fd_hessian<F>(f: F, x: &[f64], h: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let n = x.len();
    let f0 = stencil(&f, x)?;
    let mut hess = DMatrix::zeros(n, n);
    let mut p = x.to_vec();
    for i in 0..n {
        p[i] = x[i] + h;
        let fp = stencil(&f, &p)?;
        p[i] = x[i] - h;
        let fm = stencil(&f, &p)?;
        p[i] = x[i];
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| {
                p[i] = x[i] + si * h;
                p[j] = x[j] + sj * h;
                let v = stencil(&f, &p);
                p[i] = x[i];
                p[j] = x[j];
                v
            };
            let v = (corner(1.0, 1.0)? - corner(1.0, -1.0)? - corner(-1.0, 1.0)? + corner(-1.0, -1.0)?)
                / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok(hess)
}

/// Fourth-order Hessian: `(4 D(h/2) - D(h)) / 3`.
pub fn fd_hessian_richardson<F>(f: F, x: &[f64], h: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let coarse = fd_hessian(&f, x, h)?;
    let fine = fd_hessian(&f, x, 0.5 * h)?;
    Ok((fine * 4.0 - coarse) / 3.0)
}

/// Jacobian of a vector field by central differences; used to check a
/// closed-form Hessian against a closed-form gradient.
pub fn fd_jacobian<F>(f: F, x: &[f64], h: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = x.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut p = x.to_vec();
    for j in 0..n {
        p[j] = x[j] + h;
        let fp = f(&p)?;
        p[j] = x[j] - h;
        let fm = f(&p)?;
        p[j] = x[j];
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ball_values() {
        let b = ExactSolution::ball(2);
        assert_eq!(b.value(&[0.0, 0.0]).unwrap(), -1.0);
        assert!((b.value(&[0.6, 0.0]).unwrap() + 0.8).abs() < 1e-15);
        assert!(b.value(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn cylinder_and_cone_values() {
        let c = ExactSolution::cylinder(2);
        let v = c.value(&[0.0, 1.0]).unwrap();
        assert!((v + 3f64.sqrt() * 2f64.powf(-1.0 / 3.0)).abs() < 1e-14);
        assert!(c.value(&[0.0, 1e-12]).unwrap().abs() < 1e-3);
        let k = ExactSolution::cone(2);
        assert!((k.value(&[0.0, 1.0]).unwrap() + (27.0f64 / 4.0).powf(1.0 / 3.0)).abs() < 1e-14);
        for t in [0.1f64, 0.5, 2.0] {
            let expect = -k.cone_kappa().powf(1.0 / 3.0) * t.powf(2.0 / 3.0);
            assert!((k.value(&[0.0, t]).unwrap() - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn closed_forms_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [2, 3] {
            for sol in [ExactSolution::ball(n), ExactSolution::cylinder(n), ExactSolution::cone(n)] {
                let mut tested = 0;
                while tested < 20 {
                    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-0.9..0.9)).collect();
                    let mut x = x;
                    if sol.kind != ExactKind::Ball {
                        x[n - 1] = x[n - 1].abs() + 0.05;
                    }
                    if !sol.contains(&x) || sol.local_scale(&x) < 0.05 {
                        continue;
                    }
                    tested += 1;
                    let g = sol.gradient(&x).unwrap();
                    let fg = fd_gradient(|p| sol.value(p), &x, 1e-6).unwrap();
                    for i in 0..n {
                        assert!((g[i] - fg[i]).abs() < 1e-6 * (1.0 + g[i].abs()), "{:?}", sol.kind);
                    }
                    let h = sol.hessian(&x).unwrap();
                    let fh = sol.fd_hessian(&x).unwrap();
                    assert!((&h - &fh).amax() < 1e-6 * (1.0 + h.amax()), "{:?} {h} {fh}", sol.kind);
                }
            }
        }
    }

    #[test]
    fn residuals_vanish() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for sol in [ExactSolution::ball(2), ExactSolution::cylinder(3), ExactSolution::cone(2)] {
            for _ in 0..50 {
                let x: Vec<f64> = loop {
                    let mut x: Vec<f64> = (0..sol.n).map(|_| rng.random_range(-0.95..0.95)).collect();
                    if sol.kind != ExactKind::Ball {
                        x[sol.n - 1] = x[sol.n - 1].abs();
                    }
                    if sol.contains(&x) {
                        break x;
                    }
                };
                assert!(sol.residual(&x, HessianSource::ClosedForm).unwrap() < 1e-8);
            }
        }
    }

    #[test]
    fn fd_on_polynomials() {
        let q = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, -1.0, 0.5, 3.0, 0.25, -1.0, 0.25, 1.0]);
        let f = |x: &[f64]| -> Result<f64> {
            let v = nalgebra::DVector::from_column_slice(x);
            Ok((v.transpose() * &q * &v)[(0, 0)])
        };
        let h = fd_hessian(f, &[0.3, -0.2, 0.7], 0.125).unwrap();
        assert!((h - &q * 2.0).amax() < 1e-10);
        let lin = |x: &[f64]| -> Result<f64> { Ok(3.0 * x[0] - 2.0 * x[1] + 0.5) };
        assert!(fd_hessian(lin, &[1.0, 2.0], 0.125).unwrap().amax() < 1e-10);
        let b = ExactSolution::ball(2);
        let h0 = fd_hessian(|p| b.value(p), &[0.0, 0.0], 1e-4).unwrap();
        assert!((h0 - DMatrix::<f64>::identity(2, 2)).amax() < 1e-6);
    }

    #[test]
    fn stencil_outside_is_a_domain_error() {
        let b = ExactSolution::ball(2);
        assert!(matches!(fd_hessian(|p| b.value(p), &[0.9999, 0.0], 1e-3), Err(Error::Domain(_))));
    }
}
