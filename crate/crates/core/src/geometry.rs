//! Bounded convex domains given as intersections of convex constraints,
//! boundary distance, canonical boundary frames and the k-strict convexity
//! certificate.
//!
//! A domain is `{x : g_j(x) < 0 for all j}`. Every primitive constraint
//! returns a convex `g_j`; the intersection is bounded as soon as each
//! coordinate is bounded by some primitive (balls, superellipses, boxes).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `g_j(x0)` when deciding that a point lies on the boundary.
pub const ON_BOUNDARY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Constraint {
    /// `normal . x < offset`.
    Halfspace { normal: Vec<f64>, offset: f64 },
    /// `|P(x - center)| < radius`, with `P` the projection onto `axes`
    /// (all coordinates when absent). A proper subset of axes gives a cylinder.
    Ball {
        center: Vec<f64>,
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        axes: Option<Vec<usize>>,
    },
    /// `sum_i |(x_i - c_i) / s_i|^(p_i) < 1` with every `p_i >= 1`.
    Superellipse {
        powers: Vec<f64>,
        scales: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
    /// `x_axis > sum_i eta_i |x_i|^(a_i)` over the remaining coordinates in
    /// increasing order; `axis` defaults to the last coordinate. A zero
    /// `eta_i` leaves that direction flat.
    PowerCup {
        eta: Vec<f64>,
        a: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        axis: Option<usize>,
    },
    /// Open axis-aligned box `lo < x < hi`.
    #[serde(rename = "box")]
    AxisBox { lo: Vec<f64>, hi: Vec<f64> },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(x: &[f64], t: f64, u: &[f64]) -> Vec<f64> {
    x.iter().zip(u).map(|(a, b)| a + t * b).collect()
}

fn normalized(v: &[f64]) -> Option<Vec<f64>> {
    let l = norm(v);
    if l > 0.0 && l.is_finite() {
        Some(v.iter().map(|x| x / l).collect())
    } else {
        None
    }
}

impl Constraint {
    fn check_dim(&self, dim: usize) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("{what} has wrong length for dimension {dim}")));
        match self {
            Constraint::Halfspace { normal, .. } => {
                if normal.len() != dim {
                    return bad("halfspace normal");
                }
                if norm(normal) == 0.0 {
                    return Err(Error::Config("halfspace normal is zero".into()));
                }
            }
            Constraint::Ball { center, radius, axes } => {
                if center.len() != dim {
                    return bad("ball center");
                }
                if !(*radius > 0.0) {
                    return Err(Error::Config("ball radius must be positive".into()));
                }
                if let Some(ax) = axes {
                    if ax.is_empty() || ax.iter().any(|&i| i >= dim) {
                        return Err(Error::Config("ball axes out of range".into()));
                    }
                }
            }
            Constraint::Superellipse { powers, scales, center } => {
                if powers.len() != dim || scales.len() != dim {
                    return bad("superellipse powers/scales");
                }
                if center.as_ref().is_some_and(|c| c.len() != dim) {
                    return bad("superellipse center");
                }
                if powers.iter().any(|&p| !(p >= 1.0)) || scales.iter().any(|&s| !(s > 0.0)) {
                    return Err(Error::Config("superellipse needs powers >= 1 and positive scales".into()));
                }
            }
            Constraint::PowerCup { eta, a, axis } => {
                if eta.len() + 1 != dim || a.len() + 1 != dim {
                    return bad("power cup eta/a");
                }
                if axis.is_some_and(|ax| ax >= dim) {
                    return Err(Error::Config("power cup axis out of range".into()));
                }
                if a.iter().any(|&p| !(p >= 1.0)) || eta.iter().any(|&e| !(e >= 0.0)) {
                    return Err(Error::Config("power cup needs a_i >= 1 and eta_i >= 0".into()));
                }
            }
            Constraint::AxisBox { lo, hi } => {
                if lo.len() != dim || hi.len() != dim {
                    return bad("box bounds");
                }
                if lo.iter().zip(hi).any(|(l, h)| !(l < h)) {
                    return Err(Error::Config("box needs lo < hi".into()));
                }
            }
        }
        Ok(())
    }

    fn cup_axes(dim: usize, axis: Option<usize>) -> (usize, Vec<usize>) {
        let ax = axis.unwrap_or(dim - 1);
        (ax, (0..dim).filter(|&i| i != ax).collect())
    }

    fn ball_axes(dim: usize, axes: &Option<Vec<usize>>) -> Vec<usize> {
        axes.clone().unwrap_or_else(|| (0..dim).collect())
    }

    /// The convex function `g` whose negative set is the constraint region.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Constraint::Halfspace { normal, offset } => (dot(normal, x) - offset) / norm(normal),
            Constraint::Ball { center, radius, axes } => {
                let r2: f64 = Self::ball_axes(x.len(), axes)
                    .iter()
                    .map(|&i| (x[i] - center[i]).powi(2))
                    .sum();
                r2.sqrt() - radius
            }
            Constraint::Superellipse { powers, scales, center } => {
                let mut s = 0.0;
                for i in 0..x.len() {
                    let c = center.as_ref().map_or(0.0, |c| c[i]);
                    s += ((x[i] - c) / scales[i]).abs().powf(powers[i]);
                }
                s - 1.0
            }
            Constraint::PowerCup { eta, a, axis } => {
                let (ax, rest) = Self::cup_axes(x.len(), *axis);
                let s: f64 = rest
                    .iter()
                    .enumerate()
                    .map(|(m, &i)| eta[m] * x[i].abs().powf(a[m]))
                    .sum();
                s - x[ax]
            }
            Constraint::AxisBox { lo, hi } => (0..x.len())
                .map(|i| (lo[i] - x[i]).max(x[i] - hi[i]))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let mut g = vec![0.0; n];
        match self {
            Constraint::Halfspace { normal, .. } => {
                let l = norm(normal);
                for i in 0..n {
                    g[i] = normal[i] / l;
                }
            }
            Constraint::Ball { center, axes, .. } => {
                let ax = Self::ball_axes(n, axes);
                let r = ax.iter().map(|&i| (x[i] - center[i]).powi(2)).sum::<f64>().sqrt();
                if r > 0.0 {
                    for &i in &ax {
                        g[i] = (x[i] - center[i]) / r;
                    }
                }
            }
            Constraint::Superellipse { powers, scales, center } => {
                for i in 0..n {
                    let c = center.as_ref().map_or(0.0, |c| c[i]);
                    let u = (x[i] - c) / scales[i];
                    g[i] = powers[i] / scales[i] * u.abs().powf(powers[i] - 1.0) * u.signum();
                }
            }
            Constraint::PowerCup { eta, a, axis } => {
                let (ax, rest) = Self::cup_axes(n, *axis);
                for (m, &i) in rest.iter().enumerate() {
                    if eta[m] > 0.0 {
                        g[i] = eta[m] * a[m] * x[i].abs().powf(a[m] - 1.0) * x[i].signum();
                    }
                }
                g[ax] = -1.0;
            }
            Constraint::AxisBox { lo, hi } => {
                let mut best = f64::NEG_INFINITY;
                let mut which = (0, 1.0);
                for i in 0..n {
                    if lo[i] - x[i] > best {
                        best = lo[i] - x[i];
                        which = (i, -1.0);
                    }
                    if x[i] - hi[i] > best {
                        best = x[i] - hi[i];
                        which = (i, 1.0);
                    }
                }
                g[which.0] = which.1;
            }
        }
        g
    }

    /// Hessian of `g`; entries that blow up (powers below 2 at a zero
    /// coordinate) are capped.
    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        const CAP: f64 = 1e12;
        let n = x.len();
        let mut h = DMatrix::zeros(n, n);
        match self {
            Constraint::Halfspace { .. } | Constraint::AxisBox { .. } => {}
            Constraint::Ball { center, axes, .. } => {
                let ax = Self::ball_axes(n, axes);
                let r = ax.iter().map(|&i| (x[i] - center[i]).powi(2)).sum::<f64>().sqrt();
                if r > 0.0 {
                    for &i in &ax {
                        for &j in &ax {
                            let ui = (x[i] - center[i]) / r;
                            let uj = (x[j] - center[j]) / r;
                            let delta = if i == j { 1.0 } else { 0.0 };
                            h[(i, j)] = (delta - ui * uj) / r;
                        }
                    }
                }
            }
            Constraint::Superellipse { powers, scales, center } => {
                for i in 0..n {
                    let c = center.as_ref().map_or(0.0, |c| c[i]);
                    let u = ((x[i] - c) / scales[i]).abs();
                    let p = powers[i];
                    let v = p * (p - 1.0) / scales[i].powi(2) * u.powf(p - 2.0);
                    h[(i, i)] = if v.is_finite() { v.min(CAP) } else if p == 1.0 { 0.0 } else { CAP };
                }
            }
            Constraint::PowerCup { eta, a, axis } => {
                let (_, rest) = Self::cup_axes(n, *axis);
                for (m, &i) in rest.iter().enumerate() {
                    let p = a[m];
                    let v = eta[m] * p * (p - 1.0) * x[i].abs().powf(p - 2.0);
                    h[(i, i)] = if v.is_finite() { v.min(CAP) } else if p == 1.0 { 0.0 } else { CAP };
                }
            }
        }
        h
    }

    /// Per-coordinate interval this constraint confines the domain to.
    fn coordinate_bounds(&self, dim: usize) -> Vec<Option<(f64, f64)>> {
        let mut out = vec![None; dim];
        match self {
            Constraint::Ball { center, radius, axes } => {
                for i in Self::ball_axes(dim, axes) {
                    out[i] = Some((center[i] - radius, center[i] + radius));
                }
            }
            Constraint::Superellipse { scales, center, .. } => {
                for i in 0..dim {
                    let c = center.as_ref().map_or(0.0, |c| c[i]);
                    out[i] = Some((c - scales[i], c + scales[i]));
                }
            }
            Constraint::AxisBox { lo, hi } => {
                for i in 0..dim {
                    out[i] = Some((lo[i], hi[i]));
                }
            }
            Constraint::Halfspace { .. } | Constraint::PowerCup { .. } => {}
        }
        out
    }

    /// First parameter `t > 0` with `g(x + t u) = 0` for `x` inside, or
    /// `None` if the ray never leaves this constraint within `t_max`.
    fn ray_exit(&self, x: &[f64], u: &[f64], t_max: f64) -> Option<f64> {
        match self {
            Constraint::Halfspace { normal, offset } => {
                let rate = dot(normal, u);
                if rate <= 0.0 {
                    None
                } else {
                    Some((offset - dot(normal, x)) / rate)
                }
            }
            Constraint::Ball { center, radius, axes } => {
                let ax = Self::ball_axes(x.len(), axes);
                let (mut aa, mut bb, mut cc) = (0.0, 0.0, -radius * radius);
                for &i in &ax {
                    let w = x[i] - center[i];
                    aa += u[i] * u[i];
                    bb += 2.0 * w * u[i];
                    cc += w * w;
                }
                if aa == 0.0 {
                    return None;
                }
                let disc = (bb * bb - 4.0 * aa * cc).max(0.0);
                // cc < 0 inside, so exactly one root is positive.
                let sq = disc.sqrt();
                let t = if bb > 0.0 { 2.0 * cc / (-bb - sq) } else { (-bb + sq) / (2.0 * aa) };
                Some(t)
            }
            Constraint::AxisBox { lo, hi } => {
                let mut t = f64::INFINITY;
                for i in 0..x.len() {
                    if u[i] > 0.0 {
                        t = t.min((hi[i] - x[i]) / u[i]);
                    } else if u[i] < 0.0 {
                        t = t.min((lo[i] - x[i]) / u[i]);
                    }
                }
                t.is_finite().then_some(t)
            }
            _ => {
                if self.value(&axpy(x, t_max, u)) < 0.0 {
                    return None;
                }
                let (mut lo, mut hi) = (0.0, t_max);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.value(&axpy(x, mid, u)) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Some(0.5 * (lo + hi))
            }
        }
    }

    /// Distance from an interior point to the boundary of this constraint region.
    fn boundary_distance(&self, x: &[f64], t_max: f64) -> f64 {
        match self {
            Constraint::Halfspace { .. } | Constraint::Ball { .. } | Constraint::AxisBox { .. } => {
                self.value(x).abs()
            }
            _ => self.boundary_distance_numeric(x, t_max),
        }
    }

    /// Minimizes the exit distance over unit directions by projected descent:
    /// at the exit point the outward normal equals the ray direction exactly
    /// when the ray is the shortest one.
    fn boundary_distance_numeric(&self, x: &[f64], t_max: f64) -> f64 {
        let n = x.len();
        let exit = |u: &[f64]| self.ray_exit(x, u, t_max).unwrap_or(f64::INFINITY);
        let mut u = normalized(&self.gradient(x)).unwrap_or_else(|| {
            let mut e = vec![0.0; n];
            e[0] = 1.0;
            e
        });
        let mut t = exit(&u);
        // Coarse start: the gradient direction can be far off for strongly
        // anisotropic level sets.
        for i in 0..n {
            for s in [-1.0, 1.0] {
                let mut e = vec![0.0; n];
                e[i] = s;
                let te = exit(&e);
                if te < t {
                    t = te;
                    u = e;
                }
            }
        }
        let mut step = 1.0;
        for _ in 0..2000 {
            let p = axpy(x, t, &u);
            let Some(nrm) = normalized(&self.gradient(&p)) else { break };
            let c = dot(&nrm, &u);
            let w: Vec<f64> = nrm.iter().zip(&u).map(|(a, b)| a - c * b).collect();
            if norm(&w) < 1e-10 {
                break;
            }
            let mut improved = false;
            while step > 1e-14 {
                let cand = normalized(&axpy(&u, step, &w)).unwrap();
                let tc = exit(&cand);
                if tc < t {
                    t = tc;
                    u = cand;
                    improved = true;
                    step = (step * 2.0).min(1.0);
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        t
    }
}

/// Bounded convex domain. Immutable after construction.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "DomainSpec", into = "DomainSpec")]
pub struct ConvexDomain {
    dim: usize,
    constraints: Vec<Constraint>,
    bbox_lo: Vec<f64>,
    bbox_hi: Vec<f64>,
    center: Vec<f64>,
    diameter: f64,
}

/// JSON form of a domain: the primitive constraints intersected together.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DomainSpec {
    pub dim: usize,
    pub constraints: Vec<Constraint>,
}

impl TryFrom<DomainSpec> for ConvexDomain {
    type Error = Error;
    fn try_from(s: DomainSpec) -> Result<Self> {
        ConvexDomain::new(s.dim, s.constraints)
    }
}

impl From<ConvexDomain> for DomainSpec {
    fn from(d: ConvexDomain) -> Self {
        DomainSpec { dim: d.dim, constraints: d.constraints }
    }
}

impl ConvexDomain {
    pub fn new(dim: usize, constraints: Vec<Constraint>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Config("domain dimension must be at least 2".into()));
        }
        if constraints.is_empty() {
            return Err(Error::Config("domain needs at least one constraint".into()));
        }
        for c in &constraints {
            c.check_dim(dim)?;
        }
        let mut lo = vec![f64::NEG_INFINITY; dim];
        let mut hi = vec![f64::INFINITY; dim];
        for c in &constraints {
            for (i, b) in c.coordinate_bounds(dim).into_iter().enumerate() {
                if let Some((l, h)) = b {
                    lo[i] = lo[i].max(l);
                    hi[i] = hi[i].min(h);
                }
            }
        }
        if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
            return Err(Error::Domain(
                "domain is not bounded by its primitives; add a ball, superellipse or box".into(),
            ));
        }
        if lo.iter().zip(&hi).any(|(l, h)| l >= h) {
            return Err(Error::Domain("bounding box is empty".into()));
        }
        let mut dom = ConvexDomain {
            dim,
            constraints,
            bbox_lo: lo,
            bbox_hi: hi,
            center: Vec::new(),
            diameter: 0.0,
        };
        dom.center = dom.find_interior_point()?;
        let samples = dom.boundary_samples(match dim {
            2 => 2048,
            3 => 3000,
            _ => 2000,
        });
        let mut diam: f64 = 0.0;
        for (i, p) in samples.iter().enumerate() {
            for q in &samples[i + 1..] {
                let d2: f64 = p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum();
                diam = diam.max(d2);
            }
        }
        dom.diameter = diam.sqrt();
        Ok(dom)
    }

    /// Open disk/ball of radius `r` centred at the origin.
    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        ConvexDomain::new(dim, vec![Constraint::Ball { center: vec![0.0; dim], radius, axes: None }])
    }

    pub fn cube(dim: usize, half_side: f64) -> Result<Self> {
        ConvexDomain::new(
            dim,
            vec![Constraint::AxisBox { lo: vec![-half_side; dim], hi: vec![half_side; dim] }],
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn bbox(&self) -> (&[f64], &[f64]) {
        (&self.bbox_lo, &self.bbox_hi)
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    fn bbox_diagonal(&self) -> f64 {
        self.bbox_lo.iter().zip(&self.bbox_hi).map(|(l, h)| (h - l).powi(2)).sum::<f64>().sqrt()
    }

    /// Largest constraint value; negative exactly inside.
    pub fn max_constraint(&self, x: &[f64]) -> f64 {
        self.constraints.iter().map(|c| c.value(x)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim && self.constraints.iter().all(|c| c.value(x) < 0.0)
    }

    fn find_interior_point(&self) -> Result<Vec<f64>> {
        let margin = |x: &[f64]| -> f64 {
            self.constraints
                .iter()
                .map(|c| {
                    let g = c.value(x);
                    let gn = norm(&c.gradient(x)).max(1e-12);
                    -g / gn
                })
                .fold(f64::INFINITY, f64::min)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut best: Vec<f64> =
            self.bbox_lo.iter().zip(&self.bbox_hi).map(|(l, h)| 0.5 * (l + h)).collect();
        let mut best_m = margin(&best);
        for _ in 0..4000 {
            let x: Vec<f64> = (0..self.dim)
                .map(|i| rng.random_range(self.bbox_lo[i]..self.bbox_hi[i]))
                .collect();
            let m = margin(&x);
            if m > best_m {
                best_m = m;
                best = x;
            }
        }
        let mut step = 0.1 * self.bbox_diagonal();
        while step > 1e-9 * self.bbox_diagonal() {
            let mut moved = false;
            for i in 0..self.dim {
                for s in [-1.0, 1.0] {
                    let mut x = best.clone();
                    x[i] += s * step;
                    let m = margin(&x);
                    if m > best_m {
                        best_m = m;
                        best = x;
                        moved = true;
                    }
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        if !self.contains(&best) {
            return Err(Error::Domain("domain appears to be empty".into()));
        }
        Ok(best)
    }

    /// Exit distance along direction `u` from an interior point.
    pub fn ray_exit(&self, x: &[f64], u: &[f64]) -> f64 {
        let t_max = 2.0 * self.bbox_diagonal();
        self.constraints
            .iter()
            .filter_map(|c| c.ray_exit(x, u, t_max))
            .fold(f64::INFINITY, f64::min)
    }

    /// `d_x = dist(x, boundary)` for a strictly interior point.
    pub fn distance_to_boundary(&self, x: &[f64]) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::Domain(format!("point {x:?} is not strictly inside the domain")));
        }
        let t_max = 2.0 * self.bbox_diagonal();
        Ok(self
            .constraints
            .iter()
            .map(|c| c.boundary_distance(x, t_max))
            .fold(f64::INFINITY, f64::min))
    }

    /// Unit directions: uniform angles in 2D, a Fibonacci lattice in 3D,
    /// seeded Gaussian directions above.
    fn directions(&self, count: usize) -> Vec<Vec<f64>> {
        match self.dim {
            2 => (0..count)
                .map(|i| {
                    let th = std::f64::consts::TAU * i as f64 / count as f64;
                    vec![th.cos(), th.sin()]
                })
                .collect(),
            3 => {
                let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
                (0..count)
                    .map(|i| {
                        let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                        let r = (1.0 - z * z).sqrt();
                        let th = golden * i as f64;
                        vec![r * th.cos(), r * th.sin(), z]
                    })
                    .collect()
            }
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(0xd1ec);
                (0..count)
                    .map(|_| loop {
                        let v: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
                        if let Some(u) = normalized(&v) {
                            break u;
                        }
                    })
                    .collect()
            }
        }
    }

    /// Boundary points found by casting rays from the interior centre.
    pub fn boundary_samples(&self, count: usize) -> Vec<Vec<f64>> {
        self.directions(count)
            .into_iter()
            .map(|u| {
                let t = self.ray_exit(&self.center, &u);
                axpy(&self.center, t, &u)
            })
            .collect()
    }

    /// Boundary points clustered around `x0`: rays from the centre aimed at
    /// `x0 + s w` for tangent directions `w` and geometric offsets `s`.
    fn boundary_samples_near(&self, x0: &[f64], tangents: &[Vec<f64>], count: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x0c1a5e);
        let d = self.diameter;
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            let s = d * 0.5f64.powf(1.0 + 30.0 * (i as f64 / count as f64));
            let mut w = vec![0.0; self.dim];
            // mix of axis-aligned tangents and random tangent combinations
            if i % 2 == 0 && !tangents.is_empty() {
                let t = &tangents[(i / 2) % tangents.len()];
                let sign = if (i / 2 / tangents.len()) % 2 == 0 { 1.0 } else { -1.0 };
                for j in 0..self.dim {
                    w[j] = sign * t[j];
                }
            } else {
                for t in tangents {
                    let c: f64 = rng.sample(StandardNormal);
                    for j in 0..self.dim {
                        w[j] += c * t[j];
                    }
                }
                match normalized(&w) {
                    Some(v) => w = v,
                    None => continue,
                }
            }
            let target = axpy(x0, s, &w);
            let dir: Vec<f64> = target.iter().zip(&self.center).map(|(a, b)| a - b).collect();
            if let Some(u) = normalized(&dir) {
                let t = self.ray_exit(&self.center, &u);
                out.push(axpy(&self.center, t, &u));
            }
        }
        out
    }

    /// Uniform interior samples by rejection in the bounding box.
    pub fn sample_interior<R: Rng>(&self, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(count);
        let mut tries = 0usize;
        while out.len() < count && tries < 1000 * count.max(1) {
            tries += 1;
            let x: Vec<f64> = (0..self.dim)
                .map(|i| rng.random_range(self.bbox_lo[i]..self.bbox_hi[i]))
                .collect();
            if self.contains(&x) {
                out.push(x);
            }
        }
        out
    }

    fn active_constraints(&self, x0: &[f64]) -> Result<Vec<&Constraint>> {
        if x0.len() != self.dim {
            return Err(Error::Domain("point has wrong dimension".into()));
        }
        let values: Vec<f64> = self.constraints.iter().map(|c| c.value(x0)).collect();
        if values.iter().any(|&g| g > ON_BOUNDARY_TOL) {
            return Err(Error::Domain(format!("point {x0:?} lies outside the domain")));
        }
        let active: Vec<&Constraint> = self
            .constraints
            .iter()
            .zip(&values)
            .filter(|(_, g)| g.abs() <= ON_BOUNDARY_TOL)
            .map(|(c, _)| c)
            .collect();
        if active.is_empty() {
            return Err(Error::Domain(format!("point {x0:?} is not on the boundary")));
        }
        Ok(active)
    }
}

/// Rigid frame erected at a boundary point. Frame coordinates are
/// `y = R (x - origin)`; row `normal_axis` of `R` is the inward normal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFrame {
    pub origin: Vec<f64>,
    /// Row-major rows of the orthogonal matrix `R`.
    pub rotation: Vec<Vec<f64>>,
    pub normal_axis: usize,
}

impl BoundaryFrame {
    /// Canonical frame at `x0` with the inward normal as axis `normal_axis`
    /// (zero based). Tangent axes are ordered by decreasing boundary
    /// curvature, so strictly convex directions come first.
    pub fn at(domain: &ConvexDomain, x0: &[f64], normal_axis: usize) -> Result<Self> {
        let n = domain.dim();
        if normal_axis >= n {
            return Err(Error::Frame(format!("normal axis {normal_axis} out of range")));
        }
        let active = domain.active_constraints(x0)?;
        let mut outward = vec![0.0; n];
        let mut shape = DMatrix::<f64>::zeros(n, n);
        for c in &active {
            let g = c.gradient(x0);
            let gn = norm(&g);
            if gn == 0.0 {
                continue;
            }
            for i in 0..n {
                outward[i] += g[i] / gn;
            }
            shape += c.hessian(x0) / gn;
        }
        let outward = normalized(&outward)
            .ok_or_else(|| Error::Frame("degenerate normal at boundary point".into()))?;
        let inward: Vec<f64> = outward.iter().map(|v| -v).collect();

        // Gram-Schmidt against the standard basis, least aligned axes first.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| inward[i].abs().partial_cmp(&inward[j].abs()).unwrap());
        let mut basis: Vec<Vec<f64>> = vec![inward.clone()];
        for &i in &order {
            if basis.len() == n {
                break;
            }
            let mut v = vec![0.0; n];
            v[i] = 1.0;
            for b in &basis {
                let c = dot(&v, b);
                for j in 0..n {
                    v[j] -= c * b[j];
                }
            }
            if let Some(u) = normalized(&v) {
                if norm(&v) > 1e-8 {
                    basis.push(u);
                }
            }
        }
        let mut tangents: Vec<Vec<f64>> = basis[1..].to_vec();
        // Restore natural axis order among tangents before curvature sorting.
        tangents.sort_by_key(|t| {
            t.iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
                .map(|(i, _)| i)
                .unwrap()
        });

        let m = tangents.len();
        let tmat = DMatrix::from_fn(n, m, |i, j| tangents[j][i]);
        let curv = tmat.transpose() * &shape * &tmat;
        let off_diag = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| curv[(i, j)].abs())
            .fold(0.0, f64::max);
        let mut ranked: Vec<(f64, Vec<f64>)> = if off_diag <= 1e-12 * (1.0 + curv.amax()) {
            (0..m).map(|j| (curv[(j, j)], tangents[j].clone())).collect()
        } else {
            let eig = SymmetricEigen::new(curv);
            (0..m)
                .map(|j| {
                    let v = &tmat * eig.eigenvectors.column(j);
                    (eig.eigenvalues[j], v.iter().copied().collect())
                })
                .collect()
        };
        ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let mut rows: Vec<Vec<f64>> = ranked.into_iter().map(|(_, v)| v).collect();
        rows.insert(normal_axis, inward);
        Ok(BoundaryFrame { origin: x0.to_vec(), rotation: rows, normal_axis })
    }

    /// Identity rotation at `origin`, normal along `normal_axis`.
    pub fn axis_aligned(origin: Vec<f64>, normal_axis: usize) -> Self {
        let n = origin.len();
        let rotation = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        BoundaryFrame { origin, rotation, normal_axis }
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.rotation[i][j])
    }

    pub fn to_frame(&self, x: &[f64]) -> Vec<f64> {
        self.rotation
            .iter()
            .map(|row| row.iter().zip(x.iter().zip(&self.origin)).map(|(r, (a, o))| r * (a - o)).sum())
            .collect()
    }

    pub fn to_world(&self, y: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x = self.origin.clone();
        for (i, row) in self.rotation.iter().enumerate() {
            for j in 0..n {
                x[j] += row[j] * y[i];
            }
        }
        x
    }

    /// Rotates a frame-coordinate vector (e.g. a gradient) to world axes.
    pub fn vector_to_world(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n];
        for (i, row) in self.rotation.iter().enumerate() {
            for j in 0..n {
                out[j] += row[j] * v[i];
            }
        }
        out
    }

    /// World point at frame coordinates `t e_normal`.
    pub fn inward_ray(&self, t: f64) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        y[self.normal_axis] = t;
        self.to_world(&y)
    }

    /// `max |R^T R - I|`.
    pub fn orthogonality_defect(&self) -> f64 {
        let r = self.matrix();
        let n = self.dim();
        (r.transpose() * &r - DMatrix::<f64>::identity(n, n)).amax()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityCertificate {
    pub frame: BoundaryFrame,
    pub k: usize,
    pub a: Vec<f64>,
    pub eta: Vec<f64>,
    /// Smallest `y_{k+1} - sum eta_i |y_i|^a_i` over the boundary sample,
    /// with round-off level negatives reported as zero.
    pub margin: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum KConvexity {
    Certified(ConvexityCertificate),
    Violated { worst_point: Vec<f64>, slack: f64, samples: usize },
}

impl KConvexity {
    pub fn certificate(&self) -> Option<&ConvexityCertificate> {
        match self {
            KConvexity::Certified(c) => Some(c),
            KConvexity::Violated { .. } => None,
        }
    }
}

/// Default boundary sample density for certification.
pub fn default_sample_count(dim: usize) -> usize {
    if dim <= 2 {
        4096
    } else {
        16384
    }
}

fn cup_slack(y: &[f64], k: usize, a: &[f64], eta: &[f64]) -> f64 {
    y[k] - (0..k).map(|i| eta[i] * y[i].abs().powf(a[i])).sum::<f64>()
}

/// Checks `Omega subset {y_{k+1} > sum eta_i |y_i|^a_i}` in the canonical
/// frame at `x0` on a dense boundary sample.
pub fn certify_k_convexity(
    domain: &ConvexDomain,
    x0: &[f64],
    k: usize,
    a: &[f64],
    eta: &[f64],
    sample_count: usize,
) -> Result<KConvexity> {
    let n = domain.dim();
    if k >= n {
        return Err(Error::Config(format!("k = {k} must be below n = {n}")));
    }
    if a.len() != k || eta.len() != k {
        return Err(Error::Config("a and eta must have length k".into()));
    }
    if a.iter().any(|&p| !(p >= 1.0)) || eta.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Config("certification needs a_i >= 1 and eta_i > 0".into()));
    }
    let frame = BoundaryFrame::at(domain, x0, k)?;
    let tangents: Vec<Vec<f64>> = (0..n)
        .filter(|&i| i != k)
        .map(|i| frame.rotation[i].clone())
        .collect();
    let mut samples = domain.boundary_samples(sample_count);
    samples.extend(domain.boundary_samples_near(x0, &tangents, sample_count / 2));
    let tol = 1e-9 * domain.diameter();
    let mut worst = (f64::INFINITY, Vec::new());
    for p in &samples {
        let y = frame.to_frame(p);
        let s = cup_slack(&y, k, a, eta);
        if s < worst.0 {
            worst = (s, p.clone());
        }
    }
    let count = samples.len();
    if worst.0 >= -tol {
        Ok(KConvexity::Certified(ConvexityCertificate {
            frame,
            k,
            a: a.to_vec(),
            eta: eta.to_vec(),
            margin: worst.0.max(0.0),
            samples: count,
        }))
    } else {
        Ok(KConvexity::Violated { worst_point: worst.1, slack: worst.0, samples: count })
    }
}

/// Inverse map used by tests: random orthogonal matrix via QR.
pub fn random_rotation<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let signs = DVector::from_fn(n, |i, _| if r[(i, i)] < 0.0 { -1.0 } else { 1.0 });
    DMatrix::from_fn(n, n, |i, j| q[(i, j)] * signs[j])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk() -> ConvexDomain {
        ConvexDomain::ball(2, 1.0).unwrap()
    }

    fn quartic_cup() -> ConvexDomain {
        ConvexDomain::new(
            2,
            vec![
                Constraint::PowerCup { eta: vec![1.0], a: vec![4.0], axis: None },
                Constraint::AxisBox { lo: vec![-1.5, -0.5], hi: vec![1.5, 1.0] },
            ],
        )
        .unwrap()
    }

    #[test]
    fn distances_on_simple_domains() {
        let d = disk();
        assert!((d.distance_to_boundary(&[0.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((d.distance_to_boundary(&[0.5, 0.0]).unwrap() - 0.5).abs() < 1e-12);
        let sq = ConvexDomain::cube(2, 1.0).unwrap();
        assert!((sq.distance_to_boundary(&[0.25, 0.5]).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(d.distance_to_boundary(&[1.0, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn numeric_distance_matches_closed_form_ellipse() {
        // A superellipse with powers 2 is a disk of radius 1 when scales are 1.
        let d = ConvexDomain::new(
            2,
            vec![Constraint::Superellipse { powers: vec![2.0, 2.0], scales: vec![1.0, 1.0], center: None }],
        )
        .unwrap();
        for &(x, y) in &[(0.3, 0.1), (-0.7, 0.2), (0.0, 0.95), (0.1, -0.4)] {
            let exact = 1.0 - f64::hypot(x, y);
            let got = d.distance_to_boundary(&[x, y]).unwrap();
            assert!((got - exact).abs() <= 1e-8 * exact, "{got} vs {exact}");
        }
    }

    #[test]
    fn cup_distance_along_axis() {
        let d = quartic_cup();
        // nearest boundary point of (0, t) is the origin while t < 3/4
        for &t in &[1e-3, 0.01, 0.1, 0.3] {
            let got = d.distance_to_boundary(&[0.0, t]).unwrap();
            assert!((got - t).abs() <= 1e-8 * t, "{got} vs {t}");
        }
    }

    #[test]
    fn inward_normal_distance_equals_parameter() {
        let d = disk();
        let f = BoundaryFrame::at(&d, &[0.0, -1.0], 1).unwrap();
        for &t in &[1e-4, 0.01, 0.2, 0.6] {
            let x = f.inward_ray(t);
            assert!((d.distance_to_boundary(&x).unwrap() - t).abs() < 1e-6);
        }
    }

    #[test]
    fn frame_at_disk_bottom() {
        let f = BoundaryFrame::at(&disk(), &[0.0, -1.0], 1).unwrap();
        assert!(f.orthogonality_defect() < 1e-12);
        let x = f.inward_ray(0.3);
        assert!((x[0]).abs() < 1e-15 && (x[1] + 0.7).abs() < 1e-15);
        assert_eq!(f.inward_ray(0.0), vec![0.0, -1.0]);
        let id = BoundaryFrame::axis_aligned(vec![0.0, 0.0], 1);
        assert_eq!(id.inward_ray(0.25), vec![0.0, 0.25]);
    }

    #[test]
    fn frame_round_trip() {
        let d = ConvexDomain::ball(3, 2.0).unwrap();
        let x0 = [2.0 / 3f64.sqrt(); 3];
        let f = BoundaryFrame::at(&d, &x0, 1).unwrap();
        assert!(f.orthogonality_defect() < 1e-12);
        let p = [0.3, -0.4, 1.1];
        let back = f.to_world(&f.to_frame(&p));
        for i in 0..3 {
            assert!((back[i] - p[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn disk_is_one_convex_with_parabola() {
        let out = certify_k_convexity(&disk(), &[0.0, -1.0], 1, &[2.0], &[0.5], 4096).unwrap();
        let cert = out.certificate().expect("disk should certify");
        assert!(cert.margin >= 0.0);
    }

    #[test]
    fn square_side_is_flat() {
        let sq = ConvexDomain::cube(2, 1.0).unwrap();
        let out = certify_k_convexity(&sq, &[0.0, -1.0], 1, &[2.0], &[0.1], 4096).unwrap();
        assert!(matches!(out, KConvexity::Violated { .. }));
    }

    #[test]
    fn quartic_cup_certifies() {
        let out = certify_k_convexity(&quartic_cup(), &[0.0, 0.0], 1, &[4.0], &[1.0], 4096).unwrap();
        assert!(out.certificate().unwrap().margin >= 0.0);
    }

    #[test]
    fn off_boundary_point_is_rejected() {
        assert!(matches!(
            certify_k_convexity(&disk(), &[0.0, -0.5], 1, &[2.0], &[0.5], 256),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn cylinder_frame_orders_curved_direction_first() {
        let cyl = ConvexDomain::new(
            3,
            vec![
                Constraint::Ball { center: vec![0.0, 1.0, 0.0], radius: 1.0, axes: Some(vec![0, 1]) },
                Constraint::AxisBox { lo: vec![-2.0, -1.0, -1.0], hi: vec![2.0, 3.0, 1.0] },
            ],
        )
        .unwrap();
        let f = BoundaryFrame::at(&cyl, &[0.0, 0.0, 0.0], 1).unwrap();
        assert!((f.rotation[0][0].abs() - 1.0).abs() < 1e-12);
        assert!((f.rotation[1][1] - 1.0).abs() < 1e-12);
        assert!((f.rotation[2][2].abs() - 1.0).abs() < 1e-12);
        let out = certify_k_convexity(&cyl, &[0.0, 0.0, 0.0], 1, &[2.0], &[0.5], 4000).unwrap();
        assert!(out.certificate().is_some());
    }

    #[test]
    fn diameter_of_disk() {
        assert!((disk().diameter() - 2.0).abs() < 1e-5);
    }

    #[test]
    fn unbounded_domain_is_rejected() {
        let r = ConvexDomain::new(2, vec![Constraint::PowerCup { eta: vec![1.0], a: vec![2.0], axis: None }]);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn domain_json_round_trip() {
        let d = quartic_cup();
        let s = serde_json::to_string(&d).unwrap();
        let back: ConvexDomain = serde_json::from_str(&s).unwrap();
        assert_eq!(back.constraints(), d.constraints());
        assert!(s.contains("\"power_cup\"") && s.contains("\"box\""));
    }
}
