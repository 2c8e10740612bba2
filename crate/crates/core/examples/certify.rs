//! k-strict convexity certificates: which power cups fit under a domain.
//!
//! `cargo run --example certify`

use kconvex::geometry::{certify_k_convexity, Constraint, ConvexDomain, KConvexity};

fn main() -> kconvex::Result<()> {
    let disk = ConvexDomain::ball(2, 1.0)?;
    let cup = ConvexDomain::new(
        2,
        vec![
            Constraint::PowerCup { eta: vec![1.0], a: vec![4.0], axis: None },
            Constraint::AxisBox { lo: vec![-1.5, -0.5], hi: vec![1.5, 1.0] },
        ],
    )?;
    let trials: [(&str, &ConvexDomain, [f64; 2], f64, f64); 4] = [
        ("disk, a = 2, eta = 1/2", &disk, [0.0, -1.0], 2.0, 0.5),
        ("disk, a = 2, eta = 1", &disk, [0.0, -1.0], 2.0, 1.0),
        ("cup,  a = 4, eta = 1", &cup, [0.0, 0.0], 4.0, 1.0),
        ("cup,  a = 2, eta = 1", &cup, [0.0, 0.0], 2.0, 1.0),
    ];
    for (name, dom, x0, a, eta) in trials {
        match certify_k_convexity(dom, &x0, 1, &[a], &[eta], 4096)? {
            KConvexity::Certified(c) => println!("{name}: certified, margin {:.3e} on {} samples", c.margin, c.samples),
            KConvexity::Violated { worst_point, slack, .. } => {
                println!("{name}: violated, slack {slack:.3e} at {worst_point:.3?}")
            }
        }
    }
    Ok(())
}
