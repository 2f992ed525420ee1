//! Semiclassical hold in the long-wavelength lattice: asymmetry of the
//! first-order diffraction peaks for right and left trimerizations.
//!
//! cargo run --release --example diffraction_asymmetry

use kagome_bh::experiments::{diffraction_scan, DiffractionConfig};
use kagome_bh::geometry::Trimerization;

fn main() -> kagome_bh::Result<()> {
    let right = DiffractionConfig::standard(Trimerization::Right)?;
    let left = DiffractionConfig::standard(Trimerization::Left)?;
    println!("packet width σ = {:.2} nm", right.sigma_nm);
    let r = diffraction_scan(&right)?;
    let l = diffraction_scan(&left)?;
    println!("{:>8} {:>12} {:>12}", "τ (μs)", "A right", "A left");
    for (a, b) in r.iter().zip(&l).step_by(5) {
        println!("{:8.1} {:12.6} {:12.6}", a.tau * 1e6, a.asymmetry, b.asymmetry);
    }
    let worst = r
        .iter()
        .zip(&l)
        .map(|(a, b)| (a.asymmetry + b.asymmetry).abs())
        .fold(0.0, f64::max);
    println!("max |A_right + A_left| = {worst:.2e}");
    Ok(())
}
