//! Momentum image of one coherent trimer with an imprinted phase on site A,
//! and the phase recovered by the coherence fit.
//!
//! cargo run --release --example trimer_interference [out.pgm]

use kagome_bh::fit::{fit_coherence, FitOptions};
use kagome_bh::geometry::{build_cluster, SuperlatticeSpec, Trimerization};
use kagome_bh::io::write_pgm;
use kagome_bh::observables::{trimer_interference, GridSpec, WannierEnvelope};

fn main() -> kagome_bh::Result<()> {
    let spec = SuperlatticeSpec::standard(45e3, 15e3, Trimerization::Right)?;
    let graph = build_cluster(&spec, 1, 1, false)?;
    let env = WannierEnvelope::new(0.011, 1.0)?;
    let grid = GridSpec::square(0.03, 81)?;
    for phi in [0.0, 0.5, 1.0, std::f64::consts::FRAC_PI_2, 2.5] {
        let img = trimer_interference(phi, env, 0.9, &graph, grid)?;
        let fit = fit_coherence(&img, &graph.bond_directions(), &FitOptions::default())?;
        let got = fit.params.beta[0].atan2(fit.params.alpha[0]);
        println!("φ = {phi:5.3}  fitted atan2(β_AB, α_AB) = {got:7.4}");
        if let Some(path) = std::env::args().nth(1).filter(|_| phi == 0.5) {
            write_pgm(std::path::Path::new(&path), &img)?;
            println!("  wrote {path}");
        }
    }
    Ok(())
}
