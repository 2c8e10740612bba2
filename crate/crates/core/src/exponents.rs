//! Structure constants of the right-hand side and the exponent calculus.
//!
//! A [`GrowthParams`] record carries the dimension `n`, the number `k` of
//! strictly convex boundary directions with their powers `a_i` and moduli
//! `eta_i`, and the growth constants `alpha`, `beta`, `gamma`, `A` of the
//! upper bound
//!
//! ```text
//! 0 < F(x, z, q) <= A d_x^(beta - n - 1) |z|^(-alpha) (1 + |q|^2)^(gamma / 2).
//! ```
//!
//! From these the boundary exponent
//!
//! ```text
//! mu = (abar + beta - n - gamma + 1) / (n + alpha - gamma),   abar = sum 2 / a_i
//! ```
//!
//! and the barrier powers `b_i` follow.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrowthParams", into = "RawGrowthParams")]
pub struct GrowthParams {
    pub n: usize,
    pub k: usize,
    pub a: Vec<f64>,
    pub eta: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// The structure constant `A`.
    pub scale: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrowthParams {
    n: usize,
    k: usize,
    a: Vec<f64>,
    eta: Vec<f64>,
    alpha: f64,
    beta: f64,
    gamma: f64,
    #[serde(rename = "A")]
    scale: f64,
}

impl TryFrom<RawGrowthParams> for GrowthParams {
    type Error = String;

    fn try_from(r: RawGrowthParams) -> std::result::Result<Self, String> {
        GrowthParams::new(r.n, r.k, r.a, r.eta, r.alpha, r.beta, r.gamma, r.scale)
            .map_err(|e| e.to_string())
    }
}

impl From<GrowthParams> for RawGrowthParams {
    fn from(p: GrowthParams) -> Self {
        RawGrowthParams {
            n: p.n,
            k: p.k,
            a: p.a,
            eta: p.eta,
            alpha: p.alpha,
            beta: p.beta,
            gamma: p.gamma,
            scale: p.scale,
        }
    }
}

/// One failed admissibility inequality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    /// `a_i >= 1` fails.
    PowerBelowOne { index: usize, value: f64 },
    /// `eta_i > 0` fails.
    ModulusNotPositive { index: usize, value: f64 },
    /// `A > 0` fails.
    ScaleNotPositive { value: f64 },
    /// `beta >= n + 1` fails.
    BetaBelowThreshold { beta: f64, threshold: f64 },
    /// `0 < abar + beta - n - gamma + 1` fails.
    NumeratorNotPositive { value: f64 },
    /// `abar + beta - n - gamma + 1 < n + alpha - gamma` fails.
    NumeratorNotBelowDenominator { numerator: f64, denominator: f64 },
    /// An operation needing `k >= 1` was called with `k = 0`.
    NoStrictDirections,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::PowerBelowOne { index, value } => write!(f, "a[{index}] = {value} < 1"),
            Violation::ModulusNotPositive { index, value } => {
                write!(f, "eta[{index}] = {value} is not positive")
            }
            Violation::ScaleNotPositive { value } => write!(f, "A = {value} is not positive"),
            Violation::BetaBelowThreshold { beta, threshold } => {
                write!(f, "beta = {beta} < n + 1 = {threshold}")
            }
            Violation::NumeratorNotPositive { value } => {
                write!(f, "abar + beta - n - gamma + 1 = {value} is not positive")
            }
            Violation::NumeratorNotBelowDenominator { numerator, denominator } => write!(
                f,
                "abar + beta - n - gamma + 1 = {numerator} is not below n + alpha - gamma = {denominator}"
            ),
            Violation::NoStrictDirections => write!(f, "k = 0: no strictly convex directions"),
        }
    }
}

impl GrowthParams {
    /// Builds a record after checking its shape (dimension and array lengths).
    /// Admissibility of the values is a separate question, see [`GrowthParams::validate`].
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        k: usize,
        a: Vec<f64>,
        eta: Vec<f64>,
        alpha: f64,
        beta: f64,
        gamma: f64,
        scale: f64,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!("dimension n = {n} must be at least 2")));
        }
        if k > n - 1 {
            return Err(Error::Config(format!("k = {k} exceeds n - 1 = {}", n - 1)));
        }
        if a.len() != k || eta.len() != k {
            return Err(Error::Config(format!(
                "arrays a and eta must have length k = {k} (got {} and {})",
                a.len(),
                eta.len()
            )));
        }
        Ok(GrowthParams { n, k, a, eta, alpha, beta, gamma, scale })
    }

    /// The extremal right-hand side `|z|^-(n+2)` with `k` strict directions.
    pub fn hyperbolic(n: usize, a: Vec<f64>, eta: Vec<f64>) -> Result<Self> {
        let k = a.len();
        let nf = n as f64;
        GrowthParams::new(n, k, a, eta, nf + 2.0, nf + 1.0, 0.0, 1.0)
    }

    /// Same structure constants with the strictly convex directions removed.
    pub fn flattened(&self) -> GrowthParams {
        GrowthParams { k: 0, a: Vec::new(), eta: Vec::new(), ..self.clone() }
    }

    pub fn abar(&self) -> f64 {
        self.a.iter().map(|ai| 2.0 / ai).sum()
    }

    fn numerator(&self) -> f64 {
        self.abar() + self.beta - self.n as f64 - self.gamma + 1.0
    }

    fn denominator(&self) -> f64 {
        self.n as f64 + self.alpha - self.gamma
    }

    /// Every violated admissibility inequality; empty when admissible.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (index, &value) in self.a.iter().enumerate() {
            if !(value >= 1.0) {
                out.push(Violation::PowerBelowOne { index, value });
            }
        }
        for (index, &value) in self.eta.iter().enumerate() {
            if !(value > 0.0) {
                out.push(Violation::ModulusNotPositive { index, value });
            }
        }
        if !(self.scale > 0.0) {
            out.push(Violation::ScaleNotPositive { value: self.scale });
        }
        let threshold = self.n as f64 + 1.0;
        if !(self.beta >= threshold) {
            out.push(Violation::BetaBelowThreshold { beta: self.beta, threshold });
        }
        let numerator = self.numerator();
        let denominator = self.denominator();
        if !(numerator > 0.0) {
            out.push(Violation::NumeratorNotPositive { value: numerator });
        }
        if !(numerator < denominator) {
            out.push(Violation::NumeratorNotBelowDenominator { numerator, denominator });
        }
        out
    }

    pub fn is_admissible(&self) -> bool {
        self.validate().is_empty()
    }

    pub fn ensure_admissible(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::ParamDomain(v))
        }
    }

    /// Boundary exponent `mu`, in `(0, 1)` for admissible parameters.
    pub fn mu(&self) -> Result<f64> {
        self.ensure_admissible()?;
        Ok(self.numerator() / self.denominator())
    }

    /// Exponent for flat contact, i.e. `mu` with `abar` dropped.
    pub fn mu_flat(&self) -> Result<f64> {
        self.flattened().mu()
    }

    /// Barrier powers `b_i`; they satisfy `mu * a_i * b_i = 2`.
    pub fn b_coeffs(&self) -> Result<Vec<f64>> {
        self.ensure_admissible()?;
        if self.k == 0 {
            return Err(Error::ParamDomain(vec![Violation::NoStrictDirections]));
        }
        let ratio = self.denominator() / self.numerator();
        Ok(self.a.iter().map(|ai| 2.0 / ai * ratio).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> GrowthParams {
        GrowthParams::new(2, 1, vec![2.0], vec![1.0], 4.0, 3.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn abar_values() {
        let flat = reference().flattened();
        assert_eq!(flat.abar(), 0.0);
        assert_eq!(reference().abar(), 1.0);
        let p = GrowthParams::new(3, 2, vec![1.0, 1.0], vec![1.0, 1.0], 5.0, 4.0, 0.0, 1.0).unwrap();
        assert_eq!(p.abar(), 4.0);
    }

    #[test]
    fn validate_reports_each_violation() {
        assert!(reference().validate().is_empty());

        let mut p = reference();
        p.beta = 2.0;
        let v = p.validate();
        assert!(v.iter().any(|x| matches!(x, Violation::BetaBelowThreshold { .. })));

        let mut p = reference();
        p.alpha = -4.0;
        assert_eq!(
            p.validate(),
            vec![Violation::NumeratorNotBelowDenominator { numerator: 3.0, denominator: -2.0 }]
        );

        let p = GrowthParams::new(2, 1, vec![0.5], vec![-1.0], 4.0, 2.0, 0.0, 0.0).unwrap();
        assert_eq!(p.validate().len(), 4);
    }

    #[test]
    fn shape_errors() {
        assert!(GrowthParams::new(2, 1, vec![], vec![1.0], 4.0, 3.0, 0.0, 1.0).is_err());
        assert!(GrowthParams::new(2, 2, vec![2.0; 2], vec![1.0; 2], 4.0, 3.0, 0.0, 1.0).is_err());
        assert!(GrowthParams::new(1, 0, vec![], vec![], 4.0, 3.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn exponent_examples() {
        assert!((reference().mu().unwrap() - 0.5).abs() < 1e-12);
        let cyl = GrowthParams::hyperbolic(3, vec![2.0], vec![1.0]).unwrap();
        assert!((cyl.mu().unwrap() - 3.0 / 8.0).abs() < 1e-12);
        let cone = GrowthParams::hyperbolic(2, vec![1.0], vec![1.0]).unwrap();
        assert!((cone.mu().unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((reference().mu_flat().unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((cyl.mu_flat().unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn b_coefficients() {
        assert_eq!(reference().b_coeffs().unwrap(), vec![2.0]);
        let cone = GrowthParams::hyperbolic(2, vec![1.0], vec![1.0]).unwrap();
        assert_eq!(cone.b_coeffs().unwrap(), vec![3.0]);
        let p = GrowthParams::hyperbolic(3, vec![2.0, 2.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(p.b_coeffs().unwrap(), vec![2.0, 2.0]);
        assert!(reference().flattened().b_coeffs().is_err());
    }

    #[test]
    fn inadmissible_mu_is_an_error() {
        let mut p = reference();
        p.beta = 2.0;
        assert!(matches!(p.mu(), Err(Error::ParamDomain(_))));
    }

    #[test]
    fn large_power_approaches_flat_exponent() {
        let mut p = reference();
        p.a[0] = 1e6;
        assert!((p.mu().unwrap() - p.mu_flat().unwrap()).abs() <= 1e-5);
    }

    #[test]
    fn json_keys() {
        let s = serde_json::to_string(&reference()).unwrap();
        assert_eq!(s, r#"{"n":2,"k":1,"a":[2.0],"eta":[1.0],"alpha":4.0,"beta":3.0,"gamma":0.0,"A":1.0}"#);
        let bad = r#"{"n":2,"k":1,"a":[],"eta":[1.0],"alpha":4.0,"beta":3.0,"gamma":0.0,"A":1.0}"#;
        assert!(serde_json::from_str::<GrowthParams>(bad).is_err());
    }
}
