//! Builds and certifies the explicit subsolution at the bottom of the disk,
//! then shows that a much smaller multiplier no longer works.
//!
//! `cargo run --example barrier`

use std::sync::Arc;

use kconvex::barrier::{certify_subsolution, default_samples, find_eps_m, DEFAULT_MARGIN};
use kconvex::geometry::certify_k_convexity;
use kconvex::{ConvexDomain, RhsModel};

fn main() -> kconvex::Result<()> {
    let disk = Arc::new(ConvexDomain::ball(2, 1.0)?);
    let cert = certify_k_convexity(&disk, &[0.0, -1.0], 1, &[2.0], &[0.5], 4096)?;
    let cert = cert.certificate().expect("the disk is 1-convex").clone();
    let model = RhsModel::pure_hyperbolic(disk.clone(), vec![2.0], vec![0.5])?;
    let samples = default_samples(&disk, &cert.frame, 1);
    let cb = find_eps_m(&disk, &cert, &model, model.params(), Some(&samples), DEFAULT_MARGIN)?;
    let p = cb.barrier.params();
    println!("epsilon = {} (ladder step {:?}), M = {}", p.epsilon, cb.ladder_index, p.m);
    println!("min F[W] = {:.4} over {} samples", cb.check.min_fw, cb.check.samples);
    if let Some(d) = &cb.diagnostics {
        println!("tau1 = {:.4}, tau2 = {:.3e}, tau3 = {:.4}", d.tau1, d.tau2, d.tau3);
    }
    for t in [1e-4, 1e-2, 0.5] {
        let x = [0.0, -1.0 + t];
        println!("W(0, -1 + {t}) = {:.6}", cb.barrier.value(&x)?);
    }
    let weak = cb.barrier.with_multiplier(p.m / 1024.0)?;
    let control = certify_subsolution(&weak, &model, &samples, DEFAULT_MARGIN)?;
    println!("M / 1024: passed = {}, min F[W] = {:.3e}", control.passed, control.min_fw);
    Ok(())
}
