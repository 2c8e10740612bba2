//! Monotone wide-stencil scheme for `det D^2 u = F(x, u, Du)`, `u = 0` on
//! the boundary, in two dimensions, solved by nonlinear Gauss-Seidel.
//!
//! At each node the determinant is replaced by
//! `min over pairs (v, w) of max(D_vv u, 0) max(D_ww u, 0)`, with second
//! differences that shorten their legs at boundary cuts; see [`Pairing`].

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barrier::BarrierFunction;
use crate::error::{Error, Result};
use crate::geometry::ConvexDomain;
use crate::rhs::{check_structure, RightHandSide};

/// Marker for a leg that ends on the boundary.
const CUT: u32 = u32::MAX;

/// Lattice directions, paired with their orthogonal partner.
const DIRECTIONS: [(i64, i64); 8] = [(1, 0), (0, 1), (1, 1), (1, -1), (1, 2), (-2, 1), (2, 1), (-1, 2)];

fn direction_count(width: usize) -> Result<usize> {
    match width {
        1 => Ok(2),
        2 => Ok(4),
        3 => Ok(8),
        _ => Err(Error::Config(format!("stencil width {width} must be 1, 2 or 3"))),
    }
}

/// One end of a stencil leg: a neighbour index (or `CUT`) and the leg length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LegEnd {
    pub node: u32,
    pub len: f64,
}

impl LegEnd {
    pub fn is_cut(&self) -> bool {
        self.node == CUT
    }
}

#[derive(Clone, Debug)]
pub struct Grid {
    h: f64,
    width: usize,
    points: Vec<[f64; 2]>,
    lattice: Vec<(i64, i64)>,
    /// `legs[node * 2 * ndir + 2 * dir + side]`, side 0 = `+v`, 1 = `-v`.
    legs: Vec<LegEnd>,
    distance: Vec<f64>,
    colors: [Vec<u32>; 4],
}

impl Grid {
    /// Lattice `h Z^2` restricted to the domain. Every stencil leg ends at
    /// an interior node or at a boundary cut located to `1e-10`.
    pub fn build(domain: &ConvexDomain, h: f64, width: usize) -> Result<Self> {
        if domain.dim() != 2 {
            return Err(Error::Config("the solver is two-dimensional".into()));
        }
        let ndir = direction_count(width)?;
        if !(h > 0.0 && h <= domain.diameter() / 4.0) {
            return Err(Error::Resolution(format!(
                "h = {h} must be positive and at most diameter/4 = {}",
                domain.diameter() / 4.0
            )));
        }
        let (lo, hi) = domain.bbox();
        let i0 = (lo[0] / h).floor() as i64 - 1;
        let i1 = (hi[0] / h).ceil() as i64 + 1;
        let j0 = (lo[1] / h).floor() as i64 - 1;
        let j1 = (hi[1] / h).ceil() as i64 + 1;
        let nx = (i1 - i0 + 1) as usize;
        let ny = (j1 - j0 + 1) as usize;
        let mut index = vec![CUT; nx * ny];
        let mut points = Vec::new();
        let mut lattice = Vec::new();
        for j in j0..=j1 {
            for i in i0..=i1 {
                let p = [i as f64 * h, j as f64 * h];
                if domain.contains(&p) {
                    index[(i - i0) as usize + (j - j0) as usize * nx] = points.len() as u32;
                    points.push(p);
                    lattice.push((i, j));
                }
            }
        }
        if points.is_empty() {
            return Err(Error::Resolution(format!("no lattice point of spacing {h} lies inside the domain")));
        }
        let lookup = |i: i64, j: i64| -> u32 {
            if i < i0 || i > i1 || j < j0 || j > j1 {
                CUT
            } else {
                index[(i - i0) as usize + (j - j0) as usize * nx]
            }
        };
        let legs: Vec<LegEnd> = lattice
            .par_iter()
            .zip(points.par_iter())
            .flat_map_iter(|(&(i, j), p)| {
                let mut out = Vec::with_capacity(2 * ndir);
                for &(di, dj) in &DIRECTIONS[..ndir] {
                    let full = h * ((di * di + dj * dj) as f64).sqrt();
                    for s in [1i64, -1] {
                        let nb = lookup(i + s * di, j + s * dj);
                        if nb != CUT {
                            out.push(LegEnd { node: nb, len: full });
                        } else {
                            let u = [s as f64 * di as f64 * h / full, s as f64 * dj as f64 * h / full];
                            let cut = domain.ray_exit(p, &u).min(full);
                            out.push(LegEnd { node: CUT, len: cut.max(1e-12) });
                        }
                    }
                }
                out
            })
            .collect();
        let distance: Vec<f64> =
            points.par_iter().map(|p| domain.distance_to_boundary(p)).collect::<Result<_>>()?;
        let mut colors: [Vec<u32>; 4] = Default::default();
        for (n, &(i, j)) in lattice.iter().enumerate() {
            colors[(i.rem_euclid(2) + 2 * j.rem_euclid(2)) as usize].push(n as u32);
        }
        Ok(Grid { h, width, points, lattice, legs, distance, colors })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn lattice(&self) -> &[(i64, i64)] {
        &self.lattice
    }

    /// Memoized `d_x` per node.
    pub fn distances(&self) -> &[f64] {
        &self.distance
    }

    fn ndir(&self) -> usize {
        2 * self.width.min(2) + if self.width == 3 { 4 } else { 0 }
    }

    /// `(+v, -v)` ends of direction `dir` at `node`.
    pub fn leg(&self, node: usize, dir: usize) -> (LegEnd, LegEnd) {
        let base = node * 2 * self.ndir() + 2 * dir;
        (self.legs[base], self.legs[base + 1])
    }

    /// Index of the node at lattice offset `(di, dj)` from `node`, if interior.
    pub fn neighbor(&self, node: usize, di: i64, dj: i64) -> Option<usize> {
        for dir in 0..self.ndir() {
            let (a, b) = DIRECTIONS[dir];
            let (p, m) = self.leg(node, dir);
            if (a, b) == (di, dj) && p.node != CUT {
                return Some(p.node as usize);
            }
            if (-a, -b) == (di, dj) && m.node != CUT {
                return Some(m.node as usize);
            }
        }
        None
    }

    /// Number of legs ending at a boundary cut.
    pub fn cut_count(&self) -> usize {
        self.legs.iter().filter(|l| l.node == CUT).count()
    }

    /// Samples a function at the nodes.
    pub fn sample<F: Fn(&[f64]) -> Result<f64> + Sync>(&self, f: F) -> Result<Vec<f64>> {
        self.points.par_iter().map(|p| f(p)).collect()
    }

    /// Second difference along `dir` as `a - b u0`.
    #[inline]
    fn second_difference(&self, u: &[f64], node: usize, dir: usize) -> (f64, f64) {
        let (p, m) = self.leg(node, dir);
        let up = if p.node == CUT { 0.0 } else { u[p.node as usize] };
        let um = if m.node == CUT { 0.0 } else { u[m.node as usize] };
        let w = 2.0 / (p.len + m.len);
        (w * (up / p.len + um / m.len), w * (1.0 / p.len + 1.0 / m.len))
    }

    /// Centred gradient `(u+ - u-) / (l+ + l-)` along the axes.
    fn gradient(&self, u: &[f64], node: usize) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (axis, gi) in g.iter_mut().enumerate() {
            let (p, m) = self.leg(node, axis);
            let up = if p.node == CUT { 0.0 } else { u[p.node as usize] };
            let um = if m.node == CUT { 0.0 } else { u[m.node as usize] };
            *gi = (up - um) / (p.len + m.len);
        }
        g
    }
}

/// Which direction pairs enter the minimum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// Orthogonal pairs `(v, v_perp)` only.
    #[default]
    Orthogonal,
    /// Every pair of distinct stencil directions, each product divided by
    /// `sin^2` of the angle between them. Since
    /// `det H = min over v, w of (v'Hv)(w'Hw) / sin^2(v, w)` with equality at
    /// H-conjugate pairs, this keeps the scheme monotone and cuts the
    /// directional error for strongly anisotropic Hessians.
    Conjugate,
}

/// `(dir_a, dir_b, 1 / sin^2)` for the first `ndir` directions.
pub fn pair_table(ndir: usize, pairing: Pairing) -> Vec<(usize, usize, f64)> {
    match pairing {
        Pairing::Orthogonal => (0..ndir / 2).map(|p| (2 * p, 2 * p + 1, 1.0)).collect(),
        Pairing::Conjugate => {
            let mut out = Vec::new();
            for i in 0..ndir {
                for j in i + 1..ndir {
                    let (a, b) = DIRECTIONS[i];
                    let (c, d) = DIRECTIONS[j];
                    let cross = (a * d - b * c) as f64;
                    let norms = ((a * a + b * b) * (c * c + d * d)) as f64;
                    out.push((i, j, norms / (cross * cross)));
                }
            }
            out
        }
    }
}

/// Coefficients of the local operator at one node with frozen neighbours.
struct Local<'t> {
    a: [f64; 8],
    b: [f64; 8],
    pairs: &'t [(usize, usize, f64)],
}

impl<'t> Local<'t> {
    fn new(grid: &Grid, u: &[f64], node: usize, pairs: &'t [(usize, usize, f64)]) -> Self {
        let mut a = [0.0; 8];
        let mut b = [0.0; 8];
        for dir in 0..grid.ndir() {
            let (ai, bi) = grid.second_difference(u, node, dir);
            a[dir] = ai;
            b[dir] = bi;
        }
        Local { a, b, pairs }
    }

    /// Determinant and its one-sided slope in `u0` along the active pair.
    #[inline]
    fn det_slope(&self, u0: f64) -> (f64, f64) {
        let mut d = [0.0; 8];
        for i in 0..8 {
            d[i] = (self.a[i] - self.b[i] * u0).max(0.0);
        }
        let (mut best, mut slope) = (f64::INFINITY, 0.0);
        for &(i, j, w) in self.pairs {
            let v = d[i] * d[j] * w;
            if v < best {
                best = v;
                let bi = if d[i] > 0.0 { self.b[i] } else { 0.0 };
                let bj = if d[j] > 0.0 { self.b[j] } else { 0.0 };
                slope = -w * (bi * d[j] + d[i] * bj);
            }
        }
        (best, slope)
    }

    #[inline]
    fn det(&self, u0: f64) -> f64 {
        let mut d = [0.0; 8];
        for i in 0..8 {
            d[i] = (self.a[i] - self.b[i] * u0).max(0.0);
        }
        let mut best = f64::INFINITY;
        for &(i, j, w) in self.pairs {
            best = best.min(d[i] * d[j] * w);
        }
        best
    }
}

/// Wide-stencil determinant at `node` over orthogonal pairs. The grid's own
/// width caps `stencil_width`.
pub fn ma_ws(grid: &Grid, u: &[f64], node: usize, stencil_width: usize) -> f64 {
    ma_ws_with(grid, u, node, stencil_width, Pairing::Orthogonal)
}

pub fn ma_ws_with(grid: &Grid, u: &[f64], node: usize, stencil_width: usize, pairing: Pairing) -> f64 {
    let nd = direction_count(stencil_width.min(grid.width)).unwrap_or(2);
    let table = pair_table(nd, pairing);
    Local::new(grid, u, node, &table).det(u[node])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    #[serde(default = "d_width")]
    pub stencil_width: usize,
    #[serde(default = "d_damping")]
    pub damping: f64,
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default = "d_iters")]
    pub max_iters: usize,
    #[serde(default = "d_floor")]
    pub z_floor: f64,
    #[serde(default)]
    pub pairing: Pairing,
}

fn d_width() -> usize {
    2
}
fn d_damping() -> f64 {
    1.0
}
fn d_tol() -> f64 {
    1e-10
}
fn d_iters() -> usize {
    200_000
}
fn d_floor() -> f64 {
    crate::rhs::DEFAULT_CLAMP_FLOOR
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            stencil_width: d_width(),
            damping: d_damping(),
            tol: d_tol(),
            max_iters: d_iters(),
            z_floor: d_floor(),
            pairing: Pairing::default(),
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        direction_count(self.stencil_width)?;
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(format!("damping {} must lie in (0, 1]", self.damping)));
        }
        if !(self.tol > 0.0) || !(self.z_floor > 0.0) || self.max_iters == 0 {
            return Err(Error::Config("tol, z_floor and max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Starting field for the iteration.
#[derive(Clone, Debug)]
pub enum Init<'a> {
    Zero,
    Barrier(&'a BarrierFunction),
    Field(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverState {
    pub u: Vec<f64>,
    pub iterations: usize,
    pub last_update: f64,
    /// Sup-norm update of every sweep.
    pub history: Vec<f64>,
    /// `ma_ws(u) - F(x, u~, D_h u)` per node.
    pub residual: Vec<f64>,
}

struct Problem<'a, R: RightHandSide + ?Sized> {
    grid: &'a Grid,
    model: &'a R,
    floor: f64,
    pairs: Vec<(usize, usize, f64)>,
}

impl<R: RightHandSide + ?Sized> Problem<'_, R> {
    fn rhs(&self, node: usize, z: f64, q: &[f64; 2]) -> f64 {
        let z = z.min(-self.floor);
        self.model
            .eval_at_distance(self.grid.distance[node], z, q)
            .unwrap_or(f64::INFINITY)
    }

    fn residual(&self, u: &[f64], node: usize) -> f64 {
        let loc = Local::new(self.grid, u, node, &self.pairs);
        let q = self.grid.gradient(u, node);
        loc.det(u[node]) - self.rhs(node, u[node], &q)
    }

    fn rhs_dz(&self, node: usize, z: f64, q: &[f64; 2]) -> (f64, f64) {
        if z >= -self.floor {
            return (self.rhs(node, z, q), 0.0);
        }
        self.model
            .eval_dz_at_distance(self.grid.distance[node], z, q)
            .unwrap_or((f64::INFINITY, 0.0))
    }

    /// Root of the non-increasing map `u0 -> det(u0) - F(u0)`: Newton from
    /// the current value, falling back to bisection whenever a step leaves
    /// the bracket known so far.
    fn local_solve(&self, u: &[f64], node: usize) -> f64 {
        let loc = Local::new(self.grid, u, node, self.pairs.as_slice());
        let q = self.grid.gradient(u, node);
        let g = |v: f64| {
            let (det, ddet) = loc.det_slope(v);
            let (f, df) = self.rhs_dz(node, v, &q);
            (det - f, ddet - df, 4.0 * f64::EPSILON * (det + f))
        };
        // bracket g(lo) > 0 > g(hi); Illinois regula falsi when Newton leaves it
        let (mut lo, mut glo) = (f64::NEG_INFINITY, f64::NAN);
        let (mut hi, mut ghi) = (0.0f64, f64::NAN);
        let mut side = 0i8;
        let mut x = u[node].min(0.0);
        for _ in 0..200 {
            let (gx, dg, noise) = g(x);
            if gx.abs() <= noise {
                return x;
            }
            if gx > 0.0 {
                lo = x;
                glo = gx;
                if side == 1 {
                    ghi *= 0.5;
                }
                side = 1;
            } else if gx < 0.0 {
                hi = x;
                ghi = gx;
                if side == -1 {
                    glo *= 0.5;
                }
                side = -1;
            } else {
                return x;
            }
            let mut next = if dg < 0.0 { x - gx / dg } else { f64::NAN };
            if (next - x).abs() <= 2.0 * f64::EPSILON * x.abs() {
                return x;
            }
            if !(next > lo && next < hi) {
                next = if !lo.is_finite() {
                    if x < 0.0 { 2.0 * x } else { -1.0 }
                } else if ghi.is_nan() {
                    0.5 * (lo + hi)
                } else {
                    let rf = hi - ghi * (hi - lo) / (ghi - glo);
                    if rf > lo && rf < hi { rf } else { 0.5 * (lo + hi) }
                };
            }
            if lo.is_finite() && hi - lo <= 2.0 * f64::EPSILON * lo.abs() {
                return next;
            }
            x = next;
        }
        x
    }
}

/// Damped nonlinear Gauss-Seidel in four-colour order: nodes of one colour
/// never share a stencil, so each colour is updated in parallel from the
/// current field.
pub fn solve<R: RightHandSide + ?Sized>(
    grid: &Grid,
    model: &R,
    config: &SolveConfig,
    init: Init<'_>,
) -> Result<SolverState> {
    config.validate()?;
    if config.stencil_width != grid.width {
        return Err(Error::Config(format!(
            "grid was built for stencil width {}, config asks for {}",
            grid.width, config.stencil_width
        )));
    }
    let structure = check_structure(model, 200, 0x57c7);
    if !structure.is_ok() {
        return Err(Error::Config(format!(
            "right-hand side fails the structure conditions: {:?}",
            structure.violations[0]
        )));
    }
    let mut u = match init {
        Init::Zero => vec![0.0; grid.len()],
        Init::Barrier(w) => grid.sample(|p| w.value(p).map(|v| v.min(0.0)))?,
        Init::Field(f) => {
            if f.len() != grid.len() {
                return Err(Error::Config("initial field has the wrong length".into()));
            }
            f.into_iter().map(|v| v.min(0.0)).collect()
        }
    };
    let prob = Problem { grid, model, floor: config.z_floor, pairs: pair_table(grid.ndir(), config.pairing) };
    let omega = config.damping;
    let mut history = Vec::new();
    let mut last = f64::INFINITY;
    for sweep in 1..=config.max_iters {
        let mut sup: f64 = 0.0;
        for color in &grid.colors {
            let updates: Vec<(f64, f64)> = color
                .par_iter()
                .map(|&n| {
                    let n = n as usize;
                    let star = prob.local_solve(&u, n);
                    let new = (u[n] + omega * (star - u[n])).min(0.0);
                    (new, (new - u[n]).abs())
                })
                .collect();
            for (&n, &(v, du)) in color.iter().zip(&updates) {
                u[n as usize] = v;
                sup = sup.max(du);
            }
        }
        history.push(sup);
        last = sup;
        if sup < config.tol {
            let residual = (0..grid.len()).into_par_iter().map(|n| prob.residual(&u, n)).collect();
            return Ok(SolverState { u, iterations: sweep, last_update: sup, history, residual });
        }
    }
    let residual = (0..grid.len()).into_par_iter().map(|n| prob.residual(&u, n)).collect();
    Err(Error::IterationLimit { iterations: config.max_iters, last_update: last, history, residual })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub passed: bool,
    pub tol_geom: f64,
    /// Largest `W - tol (1 + |W|) - u`; positive means a violation.
    pub worst_excess: f64,
    pub worst_node: usize,
    pub worst_point: [f64; 2],
    /// `u <= 0` holds at every node.
    pub nonpositive: bool,
}

/// Checks `u >= W - tol_geom (1 + |W|)` at every node.
pub fn discrete_comparison_check(
    grid: &Grid,
    state: &SolverState,
    barrier: &BarrierFunction,
    tol_geom: f64,
) -> Result<ComparisonReport> {
    let w = grid.sample(|p| barrier.value(p))?;
    let mut worst = (f64::NEG_INFINITY, 0);
    for (n, (&wn, &un)) in w.iter().zip(&state.u).enumerate() {
        let excess = wn - tol_geom * (1.0 + wn.abs()) - un;
        if excess > worst.0 {
            worst = (excess, n);
        }
    }
    Ok(ComparisonReport {
        passed: worst.0 <= 0.0,
        tol_geom,
        worst_excess: worst.0,
        worst_node: worst.1,
        worst_point: grid.points[worst.1],
        nonpositive: state.u.iter().all(|&v| v <= 0.0),
    })
}

/// `tol_geom = c h^(1/2)`.
pub fn default_tol_geom(h: f64, c: f64) -> f64 {
    c * h.sqrt()
}

/// CSV with columns `x,y,u,residual,d_x` at 17 significant digits.
pub fn write_field_csv<W: Write>(out: &mut W, grid: &Grid, state: &SolverState) -> Result<()> {
    writeln!(out, "x,y,u,residual,d_x")?;
    for n in 0..grid.len() {
        let p = grid.points[n];
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            p[0], p[1], state.u[n], state.residual[n], grid.distance[n]
        )?;
    }
    Ok(())
}
