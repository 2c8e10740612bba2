//! Boundary rate on the quartic cup `{x2 > x1^4}`: along the normal the
//! solution obeys `|u| <= C d^(5/12)`.
//!
//! `cargo run --release --example rate -- 64`

use std::sync::Arc;

use kconvex::analysis::{check_bound, empirical_holder_seminorm, fit_solution_rate, FitWindow, DEFAULT_PAIR_COUNT};
use kconvex::barrier::{find_eps_m, DEFAULT_MARGIN};
use kconvex::geometry::{certify_k_convexity, Constraint};
use kconvex::solver::{solve, Grid, Init, Pairing, SolveConfig};
use kconvex::{ConvexDomain, RhsModel};

fn main() -> kconvex::Result<()> {
    let inv: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(64.0);
    let cup = Arc::new(ConvexDomain::new(
        2,
        vec![
            Constraint::PowerCup { eta: vec![1.0], a: vec![4.0], axis: None },
            Constraint::AxisBox { lo: vec![-1.5, -0.5], hi: vec![1.5, 1.0] },
        ],
    )?);
    let model = RhsModel::pure_hyperbolic(cup.clone(), vec![4.0], vec![1.0])?;
    let mu = model.params().mu()?;
    let cert = certify_k_convexity(&cup, &[0.0, 0.0], 1, &[4.0], &[1.0], 4096)?;
    let cb = find_eps_m(&cup, cert.certificate().unwrap(), &model, model.params(), None, DEFAULT_MARGIN)?;

    let grid = Grid::build(&cup, 1.0 / inv, 3)?;
    let cfg = SolveConfig { stencil_width: 3, pairing: Pairing::Conjugate, max_iters: 2_000_000, ..Default::default() };
    let state = solve(&grid, &model, &cfg, Init::Barrier(&cb.barrier))?;
    let (fit, pairs) = fit_solution_rate(&grid, &state, &[0.0, 0.0], &[0.0, 1.0], cup.diameter(), FitWindow::default())?;
    println!("theory mu = {mu:.4}; fitted mu = {:.4}, C = {:.4} over d in {:.3?}", fit.mu_fitted, fit.c_fitted, fit.fit_range);
    let bound = check_bound(&pairs, mu, 1.1 * fit.c_fitted);
    println!("|u| <= 1.1 C d^mu: {} (worst ratio {:.4})", bound.passed, bound.worst_ratio);
    let semi = empirical_holder_seminorm(grid.points(), &state.u, mu, DEFAULT_PAIR_COUNT, 1);
    println!("empirical C^mu seminorm over the grid: {semi:.4}");
    Ok(())
}
