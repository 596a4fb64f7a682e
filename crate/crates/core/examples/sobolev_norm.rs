//! `‖μ‖²_{H^{-α}}` for the two-atom measure (δ₊₁ + δ₋₁)/2 with α = 1,
//! against the closed form (1 + e⁻²)/4.

use fluctlab::sobolev::{empirical_fourier, h_neg_alpha_norm, FrequencyLattice};

fn main() -> fluctlab::Result<()> {
    let lattice = FrequencyLattice::new(1, 256.0, 1 << 16)?;
    let spec = empirical_fourier(&[1.0, -1.0], &lattice)?;
    let norm = h_neg_alpha_norm(&spec, 1.0)?;
    let exact = (1.0 + (-2.0f64).exp()) / 4.0;
    println!("lattice      {:.10}", norm.norm_sq);
    println!("closed form  {exact:.10}");
    println!("|diff|       {:.3e}  (tail bound {:.3e})", (norm.norm_sq - exact).abs(), norm.residual_bound);
    Ok(())
}
