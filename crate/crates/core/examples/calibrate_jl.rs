//! Prints the smallest JL constant on a grid that keeps projected solution
//! costs within `1 ± γ` for 90% of random instances.

use privbary_core::jl::{calibrate_jl_constant, jl_dimension, jl_pass_rate, JlInstanceFamily};

fn main() -> privbary_core::Result<()> {
    let family = JlInstanceFamily::default();
    let (gamma, xi, trials, seed) = (0.2, 0.1, 300, 2024);
    let grid: Vec<f64> = (1..=100).map(|i| i as f64 * 1e-4).collect();
    for &c in grid.iter().step_by(5) {
        let dp = jl_dimension(family.p, gamma, xi, family.n as f64, c, family.d)?;
        let rate = jl_pass_rate(&family, gamma, xi, c, trials, seed)?;
        println!("C = {c:.4}  d' = {dp:3}  pass = {rate:.2}");
    }
    match calibrate_jl_constant(&family, gamma, xi, &grid, trials, 0.9, seed)? {
        Some(c) => println!("calibrated C = {c}"),
        None => println!("no grid value reaches the target"),
    }
    Ok(())
}
