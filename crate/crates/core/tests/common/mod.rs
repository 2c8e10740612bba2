//! Fixtures and reusable measurements for the integration tests and the
//! acceptance report.
#![allow(dead_code)]

use std::sync::Arc;

use kconvex::barrier::{self, BarrierFunction, CertifiedBarrier, DEFAULT_MARGIN};
use kconvex::geometry::{certify_k_convexity, BoundaryFrame, Constraint, ConvexDomain};
use kconvex::oracle::{fd_gradient, fd_hessian_richardson, ExactSolution};
use kconvex::solver::{self, Grid, Init, Pairing, SolveConfig, SolverState};
use kconvex::{GrowthParams, RhsModel};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn disk() -> Arc<ConvexDomain> {
    Arc::new(ConvexDomain::ball(2, 1.0).unwrap())
}

/// `{x2 > x1^4}` cut off by a box; contact point at the origin.
pub fn quartic_cup() -> Arc<ConvexDomain> {
    Arc::new(
        ConvexDomain::new(
            2,
            vec![
                Constraint::PowerCup { eta: vec![1.0], a: vec![4.0], axis: None },
                Constraint::AxisBox { lo: vec![-1.5, -0.5], hi: vec![1.5, 1.0] },
            ],
        )
        .unwrap(),
    )
}

/// Solid cylinder `x1^2 + (x3 - 1)^2 < 1`, `|x2| < 1`: curved in `x1`, flat
/// in `x2`, touching the origin from above.
pub fn cylinder3() -> Arc<ConvexDomain> {
    Arc::new(
        ConvexDomain::new(
            3,
            vec![
                Constraint::Ball { center: vec![0.0, 0.0, 1.0], radius: 1.0, axes: Some(vec![0, 2]) },
                Constraint::AxisBox { lo: vec![-1.5, -1.0, -0.5], hi: vec![1.5, 1.0, 2.5] },
            ],
        )
        .unwrap(),
    )
}

pub struct Case {
    pub name: &'static str,
    pub domain: Arc<ConvexDomain>,
    pub x0: Vec<f64>,
    pub a: Vec<f64>,
    pub eta: Vec<f64>,
}

pub fn disk_case() -> Case {
    Case { name: "disk", domain: disk(), x0: vec![0.0, -1.0], a: vec![2.0], eta: vec![0.5] }
}

pub fn cup_case() -> Case {
    Case { name: "quartic cup", domain: quartic_cup(), x0: vec![0.0, 0.0], a: vec![4.0], eta: vec![1.0] }
}

pub fn cylinder_case() -> Case {
    Case { name: "3d cylinder", domain: cylinder3(), x0: vec![0.0, 0.0, 0.0], a: vec![2.0], eta: vec![0.5] }
}

impl Case {
    pub fn model(&self) -> RhsModel {
        RhsModel::pure_hyperbolic(self.domain.clone(), self.a.clone(), self.eta.clone()).unwrap()
    }

    pub fn certify(&self) -> kconvex::ConvexityCertificate {
        let n = self.domain.dim();
        let count = kconvex::geometry::default_sample_count(n);
        certify_k_convexity(&self.domain, &self.x0, self.a.len(), &self.a, &self.eta, count)
            .unwrap()
            .certificate()
            .expect("fixture domain certifies")
            .clone()
    }

    /// Certified barrier plus the sample set it was checked on.
    pub fn barrier(&self) -> (RhsModel, CertifiedBarrier, Vec<Vec<f64>>) {
        let model = self.model();
        let cert = self.certify();
        let samples = barrier::default_samples(&self.domain, &cert.frame, 0x5a3c);
        let cb = barrier::find_eps_m(&self.domain, &cert, &model, model.params(), Some(&samples), DEFAULT_MARGIN)
            .unwrap();
        (model, cb, samples)
    }
}

/// Worst normwise relative FD-vs-closed-form errors over `H`, `G` and `W`.
#[derive(Debug, Default, Clone, Copy)]
pub struct DerivativeErrors {
    pub gradient: f64,
    pub hessian: f64,
    pub points: usize,
}

fn rel(fd: &DMatrix<f64>, exact: &DMatrix<f64>) -> f64 {
    (fd - exact).amax() / exact.amax().max(1e-300)
}

/// Hyperbolic barrier in an axis frame with random `a_i` from {1, 1.5, 2, 3, 4}.
pub fn random_barrier(n: usize, k: usize, rng: &mut ChaCha8Rng) -> BarrierFunction {
    let powers = [1.0, 1.5, 2.0, 3.0, 4.0];
    let a: Vec<f64> = (0..k).map(|_| powers[rng.random_range(0..powers.len())]).collect();
    let eta: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..2.0)).collect();
    let g = GrowthParams::hyperbolic(n, a, eta).unwrap();
    let frame = BoundaryFrame::axis_aligned(vec![0.0; n], k);
    BarrierFunction::anisotropic(g, frame, 0.05, 1.0, 2.0).unwrap()
}

/// A frame point where every bracket of `H` is at least 30% open and the
/// normal coordinate is in `(0.05, 1)`; returns it with a length scale for
/// finite differences.
pub fn random_frame_point(w: &BarrierFunction, rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
    let n = w.dim();
    let k = w.frame().normal_axis;
    let eps = w.params().epsilon;
    let mut y = vec![0.0; n];
    y[k] = rng.random_range(0.05..1.0);
    let t = y[k] / eps;
    let mut scale = y[k];
    for i in 0..k {
        let half = t.powf(1.0 / w.params().growth.a[i]);
        let r = 0.7 * half.min(1.0);
        y[i] = rng.random_range(-r..r);
        scale = scale.min(half - y[i].abs());
    }
    for yj in y.iter_mut().skip(k + 1) {
        *yj = rng.random_range(-1.0..1.0);
    }
    (y, scale)
}

pub fn derivative_errors(n: usize, k: usize, points: usize, seed: u64) -> DerivativeErrors {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DerivativeErrors::default();
    let mut w = random_barrier(n, k, &mut rng);
    for p in 0..points {
        if p % 50 == 0 {
            w = random_barrier(n, k, &mut rng);
        }
        let (y, scale) = random_frame_point(&w, &mut rng);
        let parts: [&dyn Fn(&[f64]) -> kconvex::Result<kconvex::barrier::Jet>; 3] =
            [&|q| w.eval_h(q), &|q| w.eval_g(q), &|q| w.eval_frame(q)];
        for part in parts {
            let jet = part(&y).unwrap();
            let f = |q: &[f64]| part(q).map(|j| j.value);
            let g = fd_gradient(f, &y, 1e-4 * scale).unwrap();
            let gm = DMatrix::from_column_slice(n, 1, &g);
            let ge = DMatrix::from_column_slice(n, 1, jet.gradient.as_slice());
            out.gradient = out.gradient.max(rel(&gm, &ge));
            let hf = fd_hessian_richardson(f, &y, 1e-2 * scale).unwrap();
            out.hessian = out.hessian.max(rel(&hf, &jet.hessian));
        }
        out.points += 1;
    }
    out
}

/// Largest relative gap between `det E_{k+1}` and
/// `det A_k (H_kk - v' A_k^-1 v)` for the leading block of `D^2 H`.
pub fn schur_gap(n: usize, k: usize, points: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = random_barrier(n, k, &mut rng);
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let (y, _) = random_frame_point(&w, &mut rng);
        let hess = w.eval_h(&y).unwrap().hessian;
        let e = hess.view((0, 0), (k + 1, k + 1)).into_owned();
        let a = e.view((0, 0), (k, k)).into_owned();
        let v = e.view((0, k), (k, 1)).into_owned();
        let ainv_v = a.clone().lu().solve(&v).unwrap();
        let schur = e[(k, k)] - (v.transpose() * ainv_v)[(0, 0)];
        let lhs = e.determinant();
        let rhs = a.determinant() * schur;
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()));
    }
    worst
}

/// Largest relative gap between the dense eigenvalues of the trailing
/// `(n-k-1)`-block of `D^2 G` and the closed-form pair.
pub fn g_eigen_gap(n: usize, k: usize, points: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = random_barrier(n, k, &mut rng);
    let m = n - k - 1;
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let (y, _) = random_frame_point(&w, &mut rng);
        let hess = w.eval_g(&y).unwrap().hessian;
        let block = hess.view((k + 1, k + 1), (m, m)).into_owned();
        let mut dense: Vec<f64> = SymmetricEigen::new(block).eigenvalues.iter().copied().collect();
        let mut exact = w.g_tail_eigenvalues(&y).unwrap();
        dense.sort_by(f64::total_cmp);
        exact.sort_by(f64::total_cmp);
        for (d, e) in dense.iter().zip(&exact) {
            worst = worst.max((d - e).abs() / e.abs());
        }
    }
    worst
}

/// `(tau1 / limit - 1, tau2)` at `eps_max 2^-60`.
pub fn tau_limits(g: &GrowthParams, d: f64) -> (f64, f64) {
    let eta_min = g.eta.iter().copied().fold(f64::INFINITY, f64::min);
    let eps = 1f64.min(d).min(eta_min) / 2.0 * 0.5f64.powi(barrier::LADDER_DEPTH as i32);
    let diag = barrier::diagnostics(g, eps, d).unwrap();
    let lim = barrier::BarrierDiagnostics::tau1_limit(g).unwrap();
    (diag.tau1 / lim - 1.0, diag.tau2)
}

/// Failures among `trials` random perturbations of the wide-stencil
/// determinant: raising the centre value must not increase it, raising a
/// stencil neighbour must not decrease it.
pub fn monotonicity_failures(trials: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dom = disk();
    let mut failures = 0;
    for width in [1usize, 2, 3] {
        let grid = Grid::build(&dom, 1.0 / 16.0, width).unwrap();
        let ndir = if width == 3 { 8 } else { 2 * width };
        for pairing in [Pairing::Orthogonal, Pairing::Conjugate] {
            for _ in 0..trials.div_ceil(6) {
                let u: Vec<f64> = grid
                    .points()
                    .iter()
                    .map(|p| 0.5 * (p[0] * p[0] + p[1] * p[1] - 1.0) + rng.random_range(-0.02..0.02))
                    .collect();
                let node = rng.random_range(0..grid.len());
                let delta = 10f64.powf(rng.random_range(-6.0..-1.0));
                let base = solver::ma_ws_with(&grid, &u, node, width, pairing);
                let mut up = u.clone();
                up[node] += delta;
                if solver::ma_ws_with(&grid, &up, node, width, pairing) > base {
                    failures += 1;
                }
                let dir = rng.random_range(0..ndir);
                let (p, m) = grid.leg(node, dir);
                let end = if rng.random_bool(0.5) { p } else { m };
                if !end.is_cut() {
                    let mut nb = u.clone();
                    nb[end.node as usize] += delta;
                    if solver::ma_ws_with(&grid, &nb, node, width, pairing) < base {
                        failures += 1;
                    }
                }
            }
        }
    }
    failures
}

/// Solution of the disk problem with `F = |u|^-4`, barrier initialized.
pub fn solve_disk(h: f64, pairing: Pairing, width: usize) -> (Grid, SolverState) {
    let case = disk_case();
    let (model, cb, _) = case.barrier();
    let grid = Grid::build(&case.domain, h, width).unwrap();
    let cfg = SolveConfig { stencil_width: width, pairing, tol: 1e-10, max_iters: 2_000_000, ..Default::default() };
    let state = solver::solve(&grid, &model, &cfg, Init::Barrier(&cb.barrier)).unwrap();
    (grid, state)
}

/// Errors against `-sqrt(1 - |x|^2)` on nodes with `d >= d_min`:
/// `(max |u_h - u| / max |u|, max |u_h - u| / |u|)`.
pub fn disk_errors(grid: &Grid, state: &SolverState, d_min: f64) -> (f64, f64) {
    let ball = ExactSolution::ball(2);
    let (mut err, mut scale, mut pointwise) = (0.0f64, 0.0f64, 0.0f64);
    for (n, p) in grid.points().iter().enumerate() {
        if grid.distances()[n] < d_min {
            continue;
        }
        let exact = ball.value(p).unwrap();
        let e = (state.u[n] - exact).abs();
        err = err.max(e);
        scale = scale.max(exact.abs());
        pointwise = pointwise.max(e / exact.abs());
    }
    (err / scale, pointwise)
}
