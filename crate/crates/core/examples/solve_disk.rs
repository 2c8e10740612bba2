//! Solves `det D^2 u = |u|^-4` on the unit disk and compares with the exact
//! solution `-sqrt(1 - |x|^2)`.
//!
//! `cargo run --release --example solve_disk -- 32`

use std::sync::Arc;

use kconvex::barrier::{find_eps_m, DEFAULT_MARGIN};
use kconvex::geometry::certify_k_convexity;
use kconvex::oracle::ExactSolution;
use kconvex::solver::{discrete_comparison_check, solve, Grid, Init, Pairing, SolveConfig};
use kconvex::{ConvexDomain, RhsModel};

fn main() -> kconvex::Result<()> {
    let inv: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(16.0);
    let h = 1.0 / inv;
    let disk = Arc::new(ConvexDomain::ball(2, 1.0)?);
    let model = RhsModel::pure_hyperbolic(disk.clone(), vec![2.0], vec![0.5])?;
    let cert = certify_k_convexity(&disk, &[0.0, -1.0], 1, &[2.0], &[0.5], 4096)?;
    let cb = find_eps_m(&disk, cert.certificate().unwrap(), &model, model.params(), None, DEFAULT_MARGIN)?;

    let grid = Grid::build(&disk, h, 3)?;
    let cfg = SolveConfig { stencil_width: 3, pairing: Pairing::Conjugate, max_iters: 2_000_000, ..Default::default() };
    let t = std::time::Instant::now();
    let state = solve(&grid, &model, &cfg, Init::Barrier(&cb.barrier))?;
    println!("h = 1/{inv}: {} nodes, {} sweeps, {:.2?}", grid.len(), state.iterations, t.elapsed());

    let ball = ExactSolution::ball(2);
    let (mut err, mut scale) = (0.0f64, 0.0f64);
    for (n, p) in grid.points().iter().enumerate() {
        if grid.distances()[n] >= 4.0 * h {
            let exact = ball.value(p)?;
            err = err.max((state.u[n] - exact).abs());
            scale = scale.max(exact.abs());
        }
    }
    println!("relative sup-error on d >= 4h: {:.3e}", err / scale);
    let cmp = discrete_comparison_check(&grid, &state, &cb.barrier, h.sqrt())?;
    println!("barrier below the solution: {} (worst excess {:.3e})", cmp.passed, cmp.worst_excess);
    Ok(())
}
