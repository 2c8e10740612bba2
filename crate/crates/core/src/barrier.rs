//! Explicit strict subsolutions near a boundary point.
//!
//! In the canonical frame at a contact point (strict directions first, then
//! the inward normal at index `k`, then flat directions) with `t = y_k / eps`:
//!
//! * `H = -sum_i [t^(2/a_i) - y_i^2]^(1/b_i)`,
//! * `G = -t^mu sqrt(Lambda^2 - |y''|^2)`, `y''` the flat coordinates,
//! * `W = M (H + G)`.
//!
//! For flat contact the barrier is `W = -M y_n^mu0 (N^2 - |y'|^2)`.
//! Everything is evaluated in closed form; `F[W] = det D^2 W / F(x, W, DW)`
//! is then checked directly on a sample concentrated near the contact point.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::GrowthParams;
use crate::geometry::{BoundaryFrame, ConvexDomain, ConvexityCertificate};
use crate::rhs::RightHandSide;

/// Default strictness margin: certification needs `min F[W] > 1 + margin`.
pub const DEFAULT_MARGIN: f64 = 1e-6;
/// Last index of the epsilon ladder.
pub const LADDER_DEPTH: usize = 60;

/// Value, gradient and Hessian at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

impl Jet {
    fn zeros(n: usize) -> Self {
        Jet { value: 0.0, gradient: DVector::zeros(n), hessian: DMatrix::zeros(n, n) }
    }

    fn scaled(mut self, m: f64) -> Self {
        self.value *= m;
        self.gradient *= m;
        self.hessian *= m;
        self
    }

    fn add(mut self, other: &Jet) -> Self {
        self.value += other.value;
        self.gradient += &other.gradient;
        self.hessian += &other.hessian;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierKind {
    Anisotropic,
    Flat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierParams {
    pub growth: GrowthParams,
    pub frame: BoundaryFrame,
    /// Unused (stored as 1) for the flat kind.
    pub epsilon: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub d: f64,
    /// `Lambda = sqrt(2 d^2 + 1)`; doubles as `N` for the flat kind.
    pub lambda: f64,
}

/// Epsilon-dependent constants of the determinant and gradient bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierDiagnostics {
    pub epsilon: f64,
    pub delta_eps: f64,
    /// `(1 - delta)^(1/b_i)`, the lower end of the `xi_i` range.
    pub xi_lower: Vec<f64>,
    /// `c_1 .. c_k` followed by `c_{k+1}`.
    pub c: Vec<f64>,
    pub c_tilde: Vec<f64>,
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    pub a_hat: f64,
    pub a_check: f64,
}

impl BarrierDiagnostics {
    pub fn tau1_limit(growth: &GrowthParams) -> Result<f64> {
        let mu = growth.mu()?;
        let prod: f64 = growth.a.iter().product();
        Ok(growth.k as f64 * prod * mu.powi(growth.k as i32 + 1) * (1.0 - mu))
    }

    /// `min{1, (2 + 2 sqrt2 Lambda / (mu k))^-gamma} (mu k)^-gamma`.
    pub fn tau3_limit(growth: &GrowthParams, lambda: f64) -> Result<f64> {
        let mu = growth.mu()?;
        let g = growth.gamma;
        let xb = mu * growth.k as f64;
        Ok((2.0 + 2.0 * 2f64.sqrt() * lambda / xb).powf(-g).min(1.0) * xb.powf(-g))
    }

    pub fn bound_available(&self) -> bool {
        self.tau1 > 0.0 && self.tau1.is_finite() && self.tau3 > 0.0 && self.tau3.is_finite()
    }
}

/// `delta(eps) = max_i (eps / eta_i)^(2/a_i)`, zero without strict directions.
pub fn delta_eps(growth: &GrowthParams, epsilon: f64) -> f64 {
    growth
        .a
        .iter()
        .zip(&growth.eta)
        .map(|(a, e)| (epsilon / e).powf(2.0 / a))
        .fold(0.0, f64::max)
}

/// Worst case of `(1/mu - b) xi^(1-b) + (b-1) xi^(1-2b)` over `xi in [lo, 1]`.
fn worst_ck1_term(mu: f64, b: f64, lo: f64) -> f64 {
    let f = |xi: f64| (1.0 / mu - b) * xi.powf(1.0 - b) + (b - 1.0) * xi.powf(1.0 - 2.0 * b);
    let mut best = f(lo).min(f(1.0));
    let denom = 1.0 / mu - b;
    if denom != 0.0 {
        let r = (1.0 - 2.0 * b) / denom;
        if r > 0.0 {
            let crit = r.powf(1.0 / b);
            if crit > lo && crit < 1.0 {
                best = best.min(f(crit));
            }
        }
    }
    best
}

/// Diagnostics as functions of epsilon alone, taking worst cases over the
/// admissible range of every `xi_i`.
pub fn diagnostics(growth: &GrowthParams, epsilon: f64, d: f64) -> Result<BarrierDiagnostics> {
    let mu = growth.mu()?;
    let b = growth.b_coeffs()?;
    let k = growth.k;
    let a = &growth.a;
    let lambda = (2.0 * d * d + 1.0).sqrt();
    let delta = delta_eps(growth, epsilon);
    let one_m = 1.0 - delta;
    let xi_lower: Vec<f64> = b.iter().map(|bi| one_m.powf(1.0 / bi)).collect();
    let mut c: Vec<f64> = (0..k)
        .map(|j| {
            let bj = b[j];
            let lo = one_m.powf((1.0 - bj) / bj).min(1.0);
            let hi = one_m.powf((1.0 - 2.0 * bj) / bj).max(1.0);
            2.0 / bj * (lo - delta * 2.0 * (bj - 1.0).abs() / bj * hi)
        })
        .collect();
    let ck1 = mu * mu * (0..k).map(|j| worst_ck1_term(mu, b[j], xi_lower[j])).sum::<f64>();
    let c_tilde: Vec<f64> = (0..k)
        .map(|j| {
            let bj = b[j];
            4.0 * (bj - 1.0).abs() / (a[j] * bj * bj) * xi_lower[j].powf(1.0 - 2.0 * bj).max(1.0)
        })
        .collect();
    let tau1 = if c.iter().all(|&cj| cj > 0.0) {
        let prod: f64 = c.iter().product();
        let cross: f64 = (0..k).map(|j| c_tilde[j] * c_tilde[j] / c[j]).sum();
        prod * (ck1 - delta * cross)
    } else {
        c.iter().copied().fold(f64::INFINITY, f64::min)
    };
    c.push(ck1);
    let a_hat = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let a_check = 1.0 / a_hat;
    let tau2 = a_hat * epsilon.powf(a_check) * delta.sqrt() * d.powf(1.0 - a_check);
    let gamma = growth.gamma;
    let tau3_at = |xb: f64| -> f64 {
        (2.0 + 2.0 * 2f64.sqrt() * lambda / xb).powf(-gamma).min(1.0)
            * (1.0 + tau2).powf(-gamma).min(1.0)
            * xb.powf(-gamma)
    };
    let xb_lo = mu * (0..k).map(|j| xi_lower[j].powf(1.0 - b[j]).min(1.0)).sum::<f64>();
    let xb_hi = mu * (0..k).map(|j| xi_lower[j].powf(1.0 - b[j]).max(1.0)).sum::<f64>();
    let tau3 = tau3_at(xb_lo).min(tau3_at(xb_hi));
    Ok(BarrierDiagnostics {
        epsilon,
        delta_eps: delta,
        xi_lower,
        c,
        c_tilde,
        tau1,
        tau2,
        tau3,
        a_hat,
        a_check,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarrierFunction {
    params: BarrierParams,
    kind: BarrierKind,
    /// `mu` for the anisotropic kind, `mu0` for the flat kind.
    mu: f64,
    b: Vec<f64>,
}

impl BarrierFunction {
    /// `W = M (H + G)` at the frame's contact point.
    pub fn anisotropic(growth: GrowthParams, frame: BoundaryFrame, epsilon: f64, m: f64, d: f64) -> Result<Self> {
        let mu = growth.mu()?;
        let b = growth.b_coeffs()?;
        let n = growth.n;
        if frame.dim() != n {
            return Err(Error::Frame(format!("frame dimension {} differs from n = {n}", frame.dim())));
        }
        if frame.normal_axis != growth.k {
            return Err(Error::Frame(format!(
                "frame normal axis {} must equal k = {}",
                frame.normal_axis, growth.k
            )));
        }
        let eta_min = growth.eta.iter().copied().fold(f64::INFINITY, f64::min);
        let cap = 1f64.min(d).min(eta_min);
        if !(epsilon > 0.0 && epsilon < cap) {
            return Err(Error::Config(format!("epsilon = {epsilon} must lie in (0, {cap})")));
        }
        if !(m >= 1.0) {
            return Err(Error::Config(format!("M = {m} must be at least 1")));
        }
        let lambda = (2.0 * d * d + 1.0).sqrt();
        Ok(BarrierFunction {
            params: BarrierParams { growth, frame, epsilon, m, d, lambda },
            kind: BarrierKind::Anisotropic,
            mu,
            b,
        })
    }

    /// `W = -M y_n^mu0 (N^2 - |y'|^2)` with `N^2 = 2 d^2 + 1`; the frame's
    /// normal must be its last axis.
    pub fn flat(growth: GrowthParams, frame: BoundaryFrame, m: f64, d: f64) -> Result<Self> {
        let flat = growth.flattened();
        let mu = flat.mu()?;
        let n = flat.n;
        if frame.dim() != n || frame.normal_axis != n - 1 {
            return Err(Error::Frame("flat barrier needs an n-dimensional frame with the normal last".into()));
        }
        if !(m >= 1.0) {
            return Err(Error::Config(format!("M = {m} must be at least 1")));
        }
        let lambda = (2.0 * d * d + 1.0).sqrt();
        Ok(BarrierFunction {
            params: BarrierParams { growth: flat, frame, epsilon: 1.0, m, d, lambda },
            kind: BarrierKind::Flat,
            mu,
            b: Vec::new(),
        })
    }

    /// Same barrier with another multiplier. Any `M > 0` is accepted so that
    /// under-scaled negative controls can be evaluated.
    pub fn with_multiplier(&self, m: f64) -> Result<Self> {
        if !(m > 0.0) {
            return Err(Error::Config(format!("multiplier M = {m} must be positive")));
        }
        let mut out = self.clone();
        out.params.m = m;
        Ok(out)
    }

    pub fn params(&self) -> &BarrierParams {
        &self.params
    }

    pub fn kind(&self) -> BarrierKind {
        self.kind
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn frame(&self) -> &BoundaryFrame {
        &self.params.frame
    }

    pub fn dim(&self) -> usize {
        self.params.growth.n
    }

    fn normal_axis(&self) -> usize {
        self.params.frame.normal_axis
    }

    pub fn delta_eps(&self) -> f64 {
        match self.kind {
            BarrierKind::Anisotropic => delta_eps(&self.params.growth, self.params.epsilon),
            BarrierKind::Flat => 0.0,
        }
    }

    pub fn diagnostics(&self) -> Result<BarrierDiagnostics> {
        match self.kind {
            BarrierKind::Anisotropic => diagnostics(&self.params.growth, self.params.epsilon, self.params.d),
            BarrierKind::Flat => Err(Error::Config("flat barriers carry no epsilon diagnostics".into())),
        }
    }

    fn t_of(&self, y: &[f64]) -> Result<f64> {
        let yk = y[self.normal_axis()];
        if !(yk > 0.0) {
            return Err(Error::OutsideBarrier(format!("normal coordinate {yk} is not positive")));
        }
        Ok(yk / self.params.epsilon)
    }

    /// `H` and its derivatives in frame coordinates (without the factor `M`).
    pub fn eval_h(&self, y: &[f64]) -> Result<Jet> {
        self.expect_anisotropic()?;
        let n = self.dim();
        let k = self.normal_axis();
        let eps = self.params.epsilon;
        let t = self.t_of(y)?;
        let mut jet = Jet::zeros(n);
        for i in 0..k {
            let c = 2.0 / self.params.growth.a[i];
            let p = 1.0 / self.b[i];
            let tc = t.powf(c);
            let s = tc - y[i] * y[i];
            if !(s > 0.0) {
                return Err(Error::OutsideBarrier(format!(
                    "bracket t^(2/a) - y_{i}^2 = {s} is not positive"
                )));
            }
            let si = -2.0 * y[i];
            let sk = c * tc / t / eps;
            let sii = -2.0;
            let skk = c * (c - 1.0) * tc / (t * t) / (eps * eps);
            let sp = s.powf(p);
            let d1 = -p * sp / s;
            let d2 = -p * (p - 1.0) * sp / (s * s);
            jet.value -= sp;
            jet.gradient[i] += d1 * si;
            jet.gradient[k] += d1 * sk;
            jet.hessian[(i, i)] += d2 * si * si + d1 * sii;
            jet.hessian[(i, k)] += d2 * si * sk;
            jet.hessian[(k, i)] += d2 * si * sk;
            jet.hessian[(k, k)] += d2 * sk * sk + d1 * skk;
        }
        Ok(jet)
    }

    /// `G` and its derivatives in frame coordinates (without the factor `M`).
    pub fn eval_g(&self, y: &[f64]) -> Result<Jet> {
        self.expect_anisotropic()?;
        let n = self.dim();
        let k = self.normal_axis();
        let eps = self.params.epsilon;
        let mu = self.mu;
        let t = self.t_of(y)?;
        let lam2 = self.params.lambda * self.params.lambda;
        let tail: f64 = y[k + 1..].iter().map(|v| v * v).sum();
        let s2 = lam2 - tail;
        if !(s2 > 0.0) {
            return Err(Error::OutsideBarrier("flat coordinates exceed Lambda".into()));
        }
        let s = s2.sqrt();
        let tm = t.powf(mu);
        let mut jet = Jet::zeros(n);
        jet.value = -tm * s;
        jet.gradient[k] = -mu * tm / t * s / eps;
        jet.hessian[(k, k)] = mu * (1.0 - mu) * tm / (t * t) * s / (eps * eps);
        for j in k + 1..n {
            jet.gradient[j] = tm * y[j] / s;
            let mixed = mu * tm / t * y[j] / (eps * s);
            jet.hessian[(k, j)] = mixed;
            jet.hessian[(j, k)] = mixed;
            for i in k + 1..n {
                let delta = if i == j { 1.0 } else { 0.0 };
                jet.hessian[(i, j)] = tm * (delta / s + y[i] * y[j] / (s * s2));
            }
        }
        Ok(jet)
    }

    fn eval_flat(&self, y: &[f64]) -> Result<Jet> {
        let n = self.dim();
        let last = n - 1;
        let yn = y[last];
        if !(yn > 0.0) {
            return Err(Error::OutsideBarrier(format!("normal coordinate {yn} is not positive")));
        }
        let mu = self.mu;
        let n2 = self.params.lambda * self.params.lambda;
        let p = n2 - y[..last].iter().map(|v| v * v).sum::<f64>();
        let ym = yn.powf(mu);
        let mut jet = Jet::zeros(n);
        jet.value = -ym * p;
        jet.gradient[last] = -mu * ym / yn * p;
        jet.hessian[(last, last)] = mu * (1.0 - mu) * ym / (yn * yn) * p;
        for i in 0..last {
            jet.gradient[i] = 2.0 * ym * y[i];
            jet.hessian[(i, i)] = 2.0 * ym;
            let mixed = 2.0 * mu * ym / yn * y[i];
            jet.hessian[(i, last)] = mixed;
            jet.hessian[(last, i)] = mixed;
        }
        Ok(jet)
    }

    fn expect_anisotropic(&self) -> Result<()> {
        match self.kind {
            BarrierKind::Anisotropic => Ok(()),
            BarrierKind::Flat => Err(Error::Config("H and G exist only for the anisotropic barrier".into())),
        }
    }

    /// `W` and its derivatives in frame coordinates.
    pub fn eval_frame(&self, y: &[f64]) -> Result<Jet> {
        if y.len() != self.dim() {
            return Err(Error::Domain("point has wrong dimension".into()));
        }
        let jet = match self.kind {
            BarrierKind::Anisotropic => self.eval_h(y)?.add(&self.eval_g(y)?),
            BarrierKind::Flat => self.eval_flat(y)?,
        };
        Ok(jet.scaled(self.params.m))
    }

    /// `W` at a world point, derivatives rotated to world axes.
    pub fn eval(&self, x: &[f64]) -> Result<Jet> {
        let y = self.params.frame.to_frame(x);
        let jet = self.eval_frame(&y)?;
        let r = self.params.frame.matrix();
        Ok(Jet {
            value: jet.value,
            gradient: r.transpose() * jet.gradient,
            hessian: r.transpose() * jet.hessian * &r,
        })
    }

    /// Value only, in world coordinates.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        let y = self.params.frame.to_frame(x);
        let n = self.dim();
        match self.kind {
            BarrierKind::Flat => {
                let yn = y[n - 1];
                if !(yn > 0.0) {
                    return Err(Error::OutsideBarrier(format!("normal coordinate {yn} is not positive")));
                }
                let n2 = self.params.lambda * self.params.lambda;
                let p = n2 - y[..n - 1].iter().map(|v| v * v).sum::<f64>();
                Ok(-self.params.m * yn.powf(self.mu) * p)
            }
            BarrierKind::Anisotropic => {
                let k = self.normal_axis();
                let t = self.t_of(&y)?;
                let mut h = 0.0;
                for i in 0..k {
                    let s = t.powf(2.0 / self.params.growth.a[i]) - y[i] * y[i];
                    if !(s > 0.0) {
                        return Err(Error::OutsideBarrier(format!("bracket {s} is not positive")));
                    }
                    h -= s.powf(1.0 / self.b[i]);
                }
                let lam2 = self.params.lambda * self.params.lambda;
                let s = (lam2 - y[k + 1..].iter().map(|v| v * v).sum::<f64>()).sqrt();
                Ok(self.params.m * (h - t.powf(self.mu) * s))
            }
        }
    }

    /// `xi_i = |H_i| t^-mu` at a frame point.
    pub fn xi(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.expect_anisotropic()?;
        let t = self.t_of(y)?;
        (0..self.normal_axis())
            .map(|i| {
                let s = t.powf(2.0 / self.params.growth.a[i]) - y[i] * y[i];
                if !(s > 0.0) {
                    return Err(Error::OutsideBarrier(format!("bracket {s} is not positive")));
                }
                Ok(s.powf(1.0 / self.b[i]) * t.powf(-self.mu))
            })
            .collect()
    }

    /// Analytic eigenvalues of the flat-flat block of `D^2 G`: `t^mu / S`
    /// repeated, then `t^mu Lambda^2 / S^3`.
    pub fn g_tail_eigenvalues(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.expect_anisotropic()?;
        let n = self.dim();
        let k = self.normal_axis();
        let t = self.t_of(y)?;
        let tm = t.powf(self.mu);
        let lam2 = self.params.lambda * self.params.lambda;
        let s2 = lam2 - y[k + 1..].iter().map(|v| v * v).sum::<f64>();
        let m = n - k - 1;
        let mut out = vec![tm / s2.sqrt(); m.saturating_sub(1)];
        if m > 0 {
            out.push(tm * lam2 / (s2 * s2.sqrt()));
        }
        Ok(out)
    }

    /// Lower bound `M^n Lambda^(k+1-n) eps^-2 tau1 t^(n mu - abar - 2)` for
    /// `det D^2 W` at frame point `y`.
    pub fn schur_det_lower_bound(&self, y: &[f64]) -> Result<f64> {
        let diag = self.diagnostics()?;
        if !(diag.tau1 > 0.0) {
            return Err(Error::BoundUnavailable { tau1: diag.tau1, epsilon: self.params.epsilon });
        }
        let p = &self.params;
        let n = p.growth.n as f64;
        let k = p.growth.k as f64;
        let t = self.t_of(y)?;
        Ok(p.m.powf(n)
            * p.lambda.powf(k + 1.0 - n)
            * diag.tau1
            / (p.epsilon * p.epsilon)
            * t.powf(n * self.mu - p.growth.abar() - 2.0))
    }

    /// `A^-1 M^(n+alpha-gamma) eps^(n-1-beta+gamma) Lambda^(k+1-n)
    /// min{1, (Lambda+k)^alpha} tau1 tau3`, the uniform lower bound for
    /// `F[W]` once `|DH| >= 1`.
    pub fn fw_lower_bound(&self) -> Result<f64> {
        let diag = self.diagnostics()?;
        let p = &self.params;
        let g = &p.growth;
        let n = g.n as f64;
        let k = g.k as f64;
        Ok(p.m.powf(n + g.alpha - g.gamma) * p.epsilon.powf(n - 1.0 - g.beta + g.gamma)
            * p.lambda.powf(k + 1.0 - n)
            * (p.lambda + k).powf(g.alpha).min(1.0)
            * diag.tau1
            * diag.tau3
            / g.scale)
    }

    /// `F[W]` at a world point with a precomputed `d_x`.
    fn fw_at<R: RightHandSide + ?Sized>(&self, model: &R, x: &[f64], d_x: f64) -> Result<(f64, f64)> {
        let y = self.params.frame.to_frame(x);
        let jet = self.eval_frame(&y)?;
        let q: Vec<f64> = jet.gradient.iter().copied().collect();
        if !(jet.value < 0.0) {
            return Err(Error::OutsideBarrier(format!("W = {} is not negative", jet.value)));
        }
        let f = model.eval_at_distance(d_x, jet.value, &q)?;
        let grad_h = match self.kind {
            BarrierKind::Anisotropic => self.eval_h(&y)?.gradient.norm(),
            BarrierKind::Flat => f64::NAN,
        };
        Ok((jet.hessian.determinant() / f, grad_h))
    }

    /// `F[W] = det D^2 W / F(x, W, DW)` at a world point.
    pub fn fw<R: RightHandSide + ?Sized>(&self, model: &R, x: &[f64]) -> Result<f64> {
        let dom = model.domain();
        if !dom.contains(x) {
            return Err(Error::Domain(format!("sample {x:?} is not inside the domain")));
        }
        let d = if model.uses_distance() { dom.distance_to_boundary(x)? } else { 1.0 };
        Ok(self.fw_at(model, x, d)?.0)
    }

    pub fn record(&self, check: Option<&SubsolutionCheck>) -> BarrierRecord {
        let (lambda, n_const) = match self.kind {
            BarrierKind::Anisotropic => (Some(self.params.lambda), None),
            BarrierKind::Flat => (None, Some(self.params.lambda)),
        };
        BarrierRecord {
            kind: self.kind,
            growth_params: self.params.growth.clone(),
            frame: self.params.frame.clone(),
            epsilon: (self.kind == BarrierKind::Anisotropic).then_some(self.params.epsilon),
            m: self.params.m,
            d: self.params.d,
            lambda,
            n_const,
            mu: self.mu,
            min_fw: check.map(|c| c.min_fw),
            worst_point: check.map(|c| c.worst_point.clone()),
        }
    }

    pub fn from_record(r: &BarrierRecord) -> Result<Self> {
        match r.kind {
            BarrierKind::Anisotropic => {
                let eps = r.epsilon.ok_or_else(|| Error::Config("anisotropic barrier needs epsilon".into()))?;
                BarrierFunction::anisotropic(r.growth_params.clone(), r.frame.clone(), eps, r.m.max(1.0), r.d)?
                    .with_multiplier(r.m)
            }
            BarrierKind::Flat => {
                BarrierFunction::flat(r.growth_params.clone(), r.frame.clone(), r.m.max(1.0), r.d)?
                    .with_multiplier(r.m)
            }
        }
    }
}

/// Serialized certified barrier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierRecord {
    pub kind: BarrierKind,
    pub growth_params: GrowthParams,
    pub frame: BoundaryFrame,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub epsilon: Option<f64>,
    #[serde(rename = "M")]
    pub m: f64,
    pub d: f64,
    #[serde(rename = "Lambda", skip_serializing_if = "Option::is_none", default)]
    pub lambda: Option<f64>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none", default)]
    pub n_const: Option<f64>,
    pub mu: f64,
    #[serde(rename = "min_FW")]
    pub min_fw: Option<f64>,
    pub worst_point: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsolutionCheck {
    pub passed: bool,
    pub margin: f64,
    pub min_fw: f64,
    pub worst_point: Vec<f64>,
    pub samples: usize,
    /// Smallest `|DH|` seen (NaN for flat barriers); recorded, not required.
    pub min_grad_h: f64,
}

/// Distances for each sample, or ones when the model ignores `d_x`.
fn sample_distances<R: RightHandSide + ?Sized>(model: &R, samples: &[Vec<f64>]) -> Result<Vec<f64>> {
    let dom = model.domain();
    samples
        .par_iter()
        .map(|x| {
            if !dom.contains(x) {
                return Err(Error::Domain(format!("sample {x:?} is not inside the domain")));
            }
            if model.uses_distance() {
                dom.distance_to_boundary(x)
            } else {
                Ok(1.0)
            }
        })
        .collect()
}

fn check_with_distances<R: RightHandSide + ?Sized>(
    barrier: &BarrierFunction,
    model: &R,
    samples: &[Vec<f64>],
    dist: &[f64],
    margin: f64,
) -> Result<SubsolutionCheck> {
    if samples.is_empty() {
        return Err(Error::Config("no certification samples".into()));
    }
    let vals: Vec<(f64, f64)> = samples
        .par_iter()
        .zip(dist.par_iter())
        .map(|(x, &d)| barrier.fw_at(model, x, d))
        .collect::<Result<_>>()?;
    // deterministic reduction: first index attaining the minimum, NaN counts as -inf
    let mut worst = 0;
    let mut min_fw = f64::INFINITY;
    let mut min_grad_h = f64::INFINITY;
    for (i, &(fw, gh)) in vals.iter().enumerate() {
        let v = if fw.is_nan() { f64::NEG_INFINITY } else { fw };
        if v < min_fw {
            min_fw = v;
            worst = i;
        }
        min_grad_h = min_grad_h.min(gh);
    }
    Ok(SubsolutionCheck {
        passed: min_fw > 1.0 + margin,
        margin,
        min_fw,
        worst_point: samples[worst].clone(),
        samples: samples.len(),
        min_grad_h,
    })
}

/// Evaluates `F[W]` on every sample; passes iff the minimum exceeds `1 + margin`.
pub fn certify_subsolution<R: RightHandSide + ?Sized>(
    barrier: &BarrierFunction,
    model: &R,
    samples: &[Vec<f64>],
    margin: f64,
) -> Result<SubsolutionCheck> {
    let dist = sample_distances(model, samples)?;
    check_with_distances(barrier, model, samples, &dist, margin)
}

/// Tangential offsets, as fractions of the available chord on each side.
const FRACTIONS: [f64; 11] = [0.0, 0.25, -0.25, 0.5, -0.5, 0.75, -0.75, 0.95, -0.95, 0.999, -0.999];

/// Sample set for certification: a dyadic ladder along the inward normal,
/// a tensor grid of tangential offsets at each level, and seeded uniform
/// interior points. Only points strictly inside the domain are kept.
pub fn certification_samples(
    domain: &ConvexDomain,
    frame: &BoundaryFrame,
    levels: usize,
    random_count: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    use rand::SeedableRng;
    let n = domain.dim();
    let k = frame.normal_axis;
    let normal = &frame.rotation[k];
    let start: Vec<f64> = frame.inward_ray(1e-9 * domain.diameter());
    let depth = domain.ray_exit(&start, normal);
    let mut out = Vec::new();
    let tangents: Vec<usize> = (0..n).filter(|&i| i != k).collect();
    let mut heights: Vec<f64> = (1..=levels).map(|j| depth * 0.5f64.powi(j as i32)).collect();
    heights.push(0.75 * depth);
    heights.push(0.95 * depth);
    for &yk in &heights {
        let base = frame.inward_ray(yk);
        if !domain.contains(&base) {
            continue;
        }
        let reach: Vec<(f64, f64)> = tangents
            .iter()
            .map(|&i| {
                let e = &frame.rotation[i];
                let neg: Vec<f64> = e.iter().map(|v| -v).collect();
                (domain.ray_exit(&base, e), domain.ray_exit(&base, &neg))
            })
            .collect();
        let m = tangents.len();
        let total = FRACTIONS.len().pow(m as u32);
        for code in 0..total {
            let mut c = code;
            let mut p = base.clone();
            for (slot, &i) in tangents.iter().enumerate() {
                let f = FRACTIONS[c % FRACTIONS.len()];
                c /= FRACTIONS.len();
                let len = if f >= 0.0 { reach[slot].0 } else { reach[slot].1 };
                let e = &frame.rotation[i];
                for j in 0..n {
                    p[j] += f * len * e[j];
                }
            }
            if domain.contains(&p) {
                out.push(p);
            }
        }
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    out.extend(domain.sample_interior(random_count, &mut rng));
    out
}

/// Default sample set: 40 dyadic levels (fewer tangential points above 3D)
/// and 512 random interior points.
pub fn default_samples(domain: &ConvexDomain, frame: &BoundaryFrame, seed: u64) -> Vec<Vec<f64>> {
    let levels = if domain.dim() <= 3 { 40 } else { 12 };
    certification_samples(domain, frame, levels, 512, seed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertifiedBarrier {
    pub barrier: BarrierFunction,
    pub check: SubsolutionCheck,
    pub diagnostics: Option<BarrierDiagnostics>,
    /// Ladder index `j` with `eps = eps_max 2^-j` (anisotropic kind).
    pub ladder_index: Option<usize>,
    /// Doubling exponent: `M = 2^m_exponent`.
    pub m_exponent: i32,
}

impl CertifiedBarrier {
    pub fn record(&self) -> BarrierRecord {
        self.barrier.record(Some(&self.check))
    }
}

/// Smallest `M = 2^m >= 1` passing certification, or `None` if `det D^2 W`
/// is not positive on the whole sample (then no multiplier helps).
fn search_multiplier<R: RightHandSide + ?Sized>(
    base: &BarrierFunction,
    model: &R,
    samples: &[Vec<f64>],
    dist: &[f64],
    margin: f64,
) -> Result<Option<(i32, SubsolutionCheck)>> {
    let g = &base.params.growth;
    let homogeneity = g.n as f64 + g.alpha - g.gamma;
    let at = |m: i32| -> Result<SubsolutionCheck> {
        let b = base.with_multiplier(2f64.powi(m))?;
        check_with_distances(&b, model, samples, dist, margin)
    };
    let first = at(0)?;
    if first.passed {
        return Ok(Some((0, first)));
    }
    if !(first.min_fw > 0.0) || !first.min_fw.is_finite() {
        return Ok(None);
    }
    // F[W] grows at least like M^(n+alpha-gamma); start just below the prediction.
    let predicted = ((1.0 + margin) / first.min_fw).log2() / homogeneity;
    let mut m = (predicted.ceil() as i32 - 2).max(1);
    let mut last = at(m)?;
    while last.passed && m > 1 {
        let prev = at(m - 1)?;
        if !prev.passed {
            break;
        }
        m -= 1;
        last = prev;
    }
    while !last.passed {
        if m > 1000 {
            return Ok(None);
        }
        m += 1;
        last = at(m)?;
    }
    Ok(Some((m, last)))
}

/// Walks `eps_j = eps_max 2^-j` (`eps_max = min{1, d, min eta}/2`) until the
/// diagnostics allow a bound, then doubles `M` from 1 until `F[W] > 1 + margin`
/// on every sample.
pub fn find_eps_m<R: RightHandSide + ?Sized>(
    domain: &ConvexDomain,
    cert: &ConvexityCertificate,
    model: &R,
    growth: &GrowthParams,
    samples: Option<&[Vec<f64>]>,
    margin: f64,
) -> Result<CertifiedBarrier> {
    let growth = GrowthParams::new(
        growth.n,
        cert.k,
        cert.a.clone(),
        cert.eta.clone(),
        growth.alpha,
        growth.beta,
        growth.gamma,
        growth.scale,
    )?;
    growth.ensure_admissible()?;
    if cert.k == 0 {
        return Err(Error::Config("anisotropic barrier needs k >= 1; use the flat barrier".into()));
    }
    let d = domain.diameter();
    let eta_min = cert.eta.iter().copied().fold(f64::INFINITY, f64::min);
    let eps_max = 1f64.min(d).min(eta_min) / 2.0;
    let owned;
    let samples = match samples {
        Some(s) => s,
        None => {
            owned = default_samples(domain, &cert.frame, 0x5a3c);
            &owned
        }
    };
    let dist = sample_distances(model, samples)?;
    let mut notes = Vec::new();
    for j in 0..=LADDER_DEPTH {
        let eps = eps_max * 0.5f64.powi(j as i32);
        let diag = diagnostics(&growth, eps, d)?;
        if !diag.bound_available() {
            notes.push(format!("j={j}: tau1={:.3e} tau3={:.3e}", diag.tau1, diag.tau3));
            continue;
        }
        let base = BarrierFunction::anisotropic(growth.clone(), cert.frame.clone(), eps, 1.0, d)?;
        match search_multiplier(&base, model, samples, &dist, margin)? {
            Some((m, check)) => {
                return Ok(CertifiedBarrier {
                    barrier: base.with_multiplier(2f64.powi(m))?,
                    check,
                    diagnostics: Some(diag),
                    ladder_index: Some(j),
                    m_exponent: m,
                });
            }
            None => notes.push(format!("j={j}: det D^2 W not positive on the sample")),
        }
    }
    Err(Error::SearchFailure(format!(
        "epsilon ladder exhausted after {} steps; {}",
        LADDER_DEPTH + 1,
        notes.last().cloned().unwrap_or_default()
    )))
}

/// Flat-contact barrier at `frame` (normal last) with `M` from the same
/// doubling search.
pub fn flat_barrier<R: RightHandSide + ?Sized>(
    domain: &ConvexDomain,
    model: &R,
    growth: &GrowthParams,
    frame: &BoundaryFrame,
    samples: Option<&[Vec<f64>]>,
    margin: f64,
) -> Result<CertifiedBarrier> {
    let d = domain.diameter();
    let base = BarrierFunction::flat(growth.clone(), frame.clone(), 1.0, d)?;
    let owned;
    let samples = match samples {
        Some(s) => s,
        None => {
            owned = default_samples(domain, frame, 0x5a3c);
            &owned
        }
    };
    let dist = sample_distances(model, samples)?;
    match search_multiplier(&base, model, samples, &dist, margin)? {
        Some((m, check)) => Ok(CertifiedBarrier {
            barrier: base.with_multiplier(2f64.powi(m))?,
            check,
            diagnostics: None,
            ladder_index: None,
            m_exponent: m,
        }),
        None => Err(Error::SearchFailure("flat barrier is not strictly convex on the sample".into())),
    }
}
