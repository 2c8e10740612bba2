//! Right-hand sides `F(x, z, q)` of the power-law structure class and a
//! randomized checker for the structure conditions (positivity,
//! monotonicity in `z`, rotation invariance in `q`).

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::GrowthParams;
use crate::geometry::{random_rotation, ConvexDomain};

pub const DEFAULT_CLAMP_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsKind {
    /// `A d_x^(beta-n-1) |z|^(-alpha) (1+|q|^2)^(gamma/2)`.
    PowerLaw,
    /// `|z|^(-(n+2))`.
    PureHyperbolic,
}

/// Anything usable as the right-hand side of `det D^2 u = F(x, u, Du)`.
///
/// Implementors provide `eval_at_distance`; `eval` adds the interior check
/// and the distance lookup.
pub trait RightHandSide: Sync {
    fn domain(&self) -> &ConvexDomain;

    /// Whether `F` actually depends on `d_x` (lets callers skip the distance).
    fn uses_distance(&self) -> bool {
        true
    }

    /// `F` with a precomputed `d_x`. Requires `z < 0`.
    fn eval_at_distance(&self, d_x: f64, z: f64, q: &[f64]) -> Result<f64>;

    /// `(F, dF/dz)`; the default differentiates numerically.
    fn eval_dz_at_distance(&self, d_x: f64, z: f64, q: &[f64]) -> Result<(f64, f64)> {
        let f = self.eval_at_distance(d_x, z, q)?;
        let h = 1e-6 * z.abs();
        let zp = (z + h).min(0.5 * z);
        let up = self.eval_at_distance(d_x, zp, q)?;
        let dn = self.eval_at_distance(d_x, z - h, q)?;
        Ok((f, (up - dn) / (zp - (z - h))))
    }

    fn eval(&self, x: &[f64], z: f64, q: &[f64]) -> Result<f64> {
        if !(z < 0.0) {
            return Err(Error::Singularity(z));
        }
        let dom = self.domain();
        if !dom.contains(x) {
            return Err(Error::Domain(format!("point {x:?} is not strictly inside the domain")));
        }
        let d = if self.uses_distance() { dom.distance_to_boundary(x)? } else { 1.0 };
        self.eval_at_distance(d, z, q)
    }
}

/// The extremal model of the structure class on a given domain.
#[derive(Clone, Debug)]
pub struct RhsModel {
    kind: RhsKind,
    params: GrowthParams,
    domain: Arc<ConvexDomain>,
    clamp_floor: f64,
}

/// JSON form: the domain is supplied separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhsSpec {
    pub kind: RhsKind,
    pub growth_params: GrowthParams,
    #[serde(default = "default_floor")]
    pub clamp_floor: f64,
}

fn default_floor() -> f64 {
    DEFAULT_CLAMP_FLOOR
}

impl RhsModel {
    /// Accepts any `alpha`; the solver separately insists on monotonicity.
    pub fn new(kind: RhsKind, params: GrowthParams, domain: Arc<ConvexDomain>) -> Result<Self> {
        if params.n != domain.dim() {
            return Err(Error::Config(format!(
                "growth params have n = {} but the domain has dimension {}",
                params.n,
                domain.dim()
            )));
        }
        if !(params.scale > 0.0) {
            return Err(Error::Config("structure constant A must be positive".into()));
        }
        if kind == RhsKind::PureHyperbolic {
            let n = params.n as f64;
            if params.alpha != n + 2.0 || params.beta != n + 1.0 || params.gamma != 0.0 || params.scale != 1.0 {
                return Err(Error::Config(
                    "pure_hyperbolic requires alpha = n+2, beta = n+1, gamma = 0, A = 1".into(),
                ));
            }
        }
        Ok(RhsModel { kind, params, domain, clamp_floor: DEFAULT_CLAMP_FLOOR })
    }

    /// `|z|^(-(n+2))` on `domain`, with the given convexity data.
    pub fn pure_hyperbolic(domain: Arc<ConvexDomain>, a: Vec<f64>, eta: Vec<f64>) -> Result<Self> {
        let p = GrowthParams::hyperbolic(domain.dim(), a, eta)?;
        RhsModel::new(RhsKind::PureHyperbolic, p, domain)
    }

    pub fn from_spec(spec: RhsSpec, domain: Arc<ConvexDomain>) -> Result<Self> {
        if !(spec.clamp_floor > 0.0) {
            return Err(Error::Config("clamp_floor must be positive".into()));
        }
        Ok(RhsModel::new(spec.kind, spec.growth_params, domain)?.with_clamp_floor(spec.clamp_floor))
    }

    pub fn spec(&self) -> RhsSpec {
        RhsSpec { kind: self.kind, growth_params: self.params.clone(), clamp_floor: self.clamp_floor }
    }

    pub fn with_clamp_floor(mut self, floor: f64) -> Self {
        self.clamp_floor = floor;
        self
    }

    pub fn kind(&self) -> RhsKind {
        self.kind
    }

    pub fn params(&self) -> &GrowthParams {
        &self.params
    }

    pub fn domain_arc(&self) -> &Arc<ConvexDomain> {
        &self.domain
    }

    pub fn clamp_floor(&self) -> f64 {
        self.clamp_floor
    }

    /// The solver path needs `F` non-decreasing in `z`, i.e. `alpha >= 0`.
    pub fn ensure_monotone(&self) -> Result<()> {
        if self.params.alpha < 0.0 {
            return Err(Error::Config(format!(
                "alpha = {} < 0 makes F decreasing in z; the comparison principle fails",
                self.params.alpha
            )));
        }
        Ok(())
    }
}

impl RightHandSide for RhsModel {
    fn domain(&self) -> &ConvexDomain {
        &self.domain
    }

    fn uses_distance(&self) -> bool {
        self.kind == RhsKind::PowerLaw && self.params.beta != (self.params.n + 1) as f64
    }

    fn eval_at_distance(&self, d_x: f64, z: f64, q: &[f64]) -> Result<f64> {
        if !(z < 0.0) {
            return Err(Error::Singularity(z));
        }
        let p = &self.params;
        match self.kind {
            RhsKind::PureHyperbolic => Ok((-z).powi(-(p.n as i32 + 2))),
            RhsKind::PowerLaw => {
                let dist = if self.uses_distance() { d_x.powf(p.beta - (p.n + 1) as f64) } else { 1.0 };
                let grad = if p.gamma == 0.0 {
                    1.0
                } else {
                    let q2: f64 = q.iter().map(|v| v * v).sum();
                    (1.0 + q2).powf(0.5 * p.gamma)
                };
                Ok(p.scale * dist * (-z).powf(-p.alpha) * grad)
            }
        }
    }

    fn eval_dz_at_distance(&self, d_x: f64, z: f64, q: &[f64]) -> Result<(f64, f64)> {
        let f = self.eval_at_distance(d_x, z, q)?;
        let alpha = match self.kind {
            RhsKind::PureHyperbolic => (self.params.n + 2) as f64,
            RhsKind::PowerLaw => self.params.alpha,
        };
        Ok((f, alpha * f / -z))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "property", rename_all = "snake_case")]
pub enum StructureViolation {
    Positivity { x: Vec<f64>, z: f64, value: f64 },
    Monotonicity { x: Vec<f64>, z: f64, z_prime: f64, f_z: f64, f_z_prime: f64 },
    RotationInvariance { x: Vec<f64>, z: f64, q: Vec<f64>, relative_gap: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub assertions: usize,
    pub violations: Vec<StructureViolation>,
}

impl StructureReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Samples `(x, z, z', q, R)` and checks `F > 0`, `F(z) <= F(z')` for
/// `z < z' < 0`, and `F(Rq) = F(q)` to `1e-12` relative. Each sample makes
/// three assertions.
pub fn check_structure<R: RightHandSide + ?Sized>(model: &R, sample_count: usize, seed: u64) -> StructureReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dom = model.domain();
    let n = dom.dim();
    let xs = dom.sample_interior(sample_count, &mut rng);
    let mut report = StructureReport::default();
    for x in xs {
        let d = if model.uses_distance() { dom.distance_to_boundary(&x).unwrap_or(f64::NAN) } else { 1.0 };
        // log-uniform magnitudes over several decades
        let mut z1 = -(10f64).powf(rng.random_range(-3.0..2.0));
        let mut z2 = -(10f64).powf(rng.random_range(-3.0..2.0));
        if z1 > z2 {
            std::mem::swap(&mut z1, &mut z2);
        }
        let scale = (10f64).powf(rng.random_range(-2.0..2.0));
        let q: Vec<f64> = (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
        let rot = random_rotation(n, &mut rng);
        let rq: Vec<f64> = (0..n).map(|i| (0..n).map(|j| rot[(i, j)] * q[j]).sum()).collect();

        let f1 = model.eval_at_distance(d, z1, &q).unwrap_or(f64::NAN);
        let f2 = model.eval_at_distance(d, z2, &q).unwrap_or(f64::NAN);
        let fr = model.eval_at_distance(d, z1, &rq).unwrap_or(f64::NAN);
        report.assertions += 3;
        if !(f1 > 0.0) {
            report.violations.push(StructureViolation::Positivity { x: x.clone(), z: z1, value: f1 });
        }
        if !(f1 <= f2) {
            report.violations.push(StructureViolation::Monotonicity {
                x: x.clone(),
                z: z1,
                z_prime: z2,
                f_z: f1,
                f_z_prime: f2,
            });
        }
        let gap = (fr - f1).abs() / f1.abs().max(f64::MIN_POSITIVE);
        if !(gap <= 1e-12) {
            report.violations.push(StructureViolation::RotationInvariance { x, z: z1, q, relative_gap: gap });
        }
    }
    report
}
