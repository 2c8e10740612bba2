//! Sharp boundary exponents for a few growth classes.
//!
//! `cargo run --example exponents`

use kconvex::GrowthParams;

fn main() -> kconvex::Result<()> {
    let cases = [
        ("disk, F = |u|^-4", GrowthParams::new(2, 1, vec![2.0], vec![0.5], 4.0, 3.0, 0.0, 1.0)?),
        ("quartic cup", GrowthParams::new(2, 1, vec![4.0], vec![1.0], 4.0, 3.0, 0.0, 1.0)?),
        ("3d, one curved direction", GrowthParams::new(3, 1, vec![2.0], vec![1.0], 5.0, 4.0, 0.0, 1.0)?),
        ("gradient growth gamma = 1", GrowthParams::new(2, 1, vec![2.0], vec![1.0], 4.0, 3.0, 1.0, 1.0)?),
        ("beta below n + 1", GrowthParams::new(2, 1, vec![2.0], vec![1.0], 4.0, 2.5, 0.0, 1.0)?),
    ];
    for (name, g) in &cases {
        match g.mu() {
            Ok(mu) => println!(
                "{name:<28} mu = {mu:.6}  flat mu = {:.6}  b = {:?}",
                g.mu_flat().unwrap_or(f64::NAN),
                g.b_coeffs()?
            ),
            Err(e) => println!("{name:<28} {e}"),
        }
    }
    Ok(())
}
