//! Residuals and boundary rates of the three closed-form solutions.
//!
//! `cargo run --example verify_examples`

fn main() -> kconvex::Result<()> {
    for row in kconvex::cli::example_table(&[2, 3, 4], 1000, 7)? {
        println!(
            "{:<9} n={}  max residual {:.2e} ({})  mu {:.4} vs {:.4}",
            format!("{:?}", row.example),
            row.n,
            row.max_residual,
            row.hessian,
            row.mu_fitted,
            row.mu_expected
        );
    }
    Ok(())
}
