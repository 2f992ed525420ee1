//! Synthesizes noisy momentum images from the fitting formula and fits the
//! nearest-neighbour coherences back.
//!
//! cargo run --release --example coherence_fit

use kagome_bh::fit::{average_alpha, fit_batch, model_grid, FitModelParams, FitOptions};
use kagome_bh::geometry::{build_cluster, SuperlatticeSpec, Trimerization};
use kagome_bh::observables::{add_peak_noise, GridSpec};

fn main() -> kagome_bh::Result<()> {
    let spec = SuperlatticeSpec::standard(45e3, 15e3, Trimerization::Right)?;
    let graph = build_cluster(&spec, 1, 1, false)?;
    let d = graph.bond_directions();
    let dirs = [d[0], d[1], d[2]];
    let grid = GridSpec::square(0.03, 81)?;
    let mut images = Vec::new();
    let mut truth = Vec::new();
    for (i, alpha) in [0.2, 0.5, 1.0].iter().enumerate() {
        for seed in 0..4u64 {
            let params = FitModelParams {
                alpha: [*alpha; 3],
                beta: [0.0; 3],
                k_width: 0.011,
                bond_length: graph.bond_length(),
                amplitude: 3.0,
                background: 0.0,
            };
            let mut img = model_grid(&params, &dirs, grid)?;
            add_peak_noise(&mut img, 0.01, 100 * i as u64 + seed)?;
            images.push(img);
            truth.push(*alpha);
        }
    }
    let fits = fit_batch(&images, &d, &FitOptions::default());
    println!("{:>6} {:>10} {:>10} {:>10}", "true α", "fitted", "±", "σ_k");
    for (t, f) in truth.iter().zip(fits) {
        let f = f?;
        let err = f.uncertainty.alpha.iter().map(|e| e * e).sum::<f64>().sqrt() / 3.0;
        println!("{t:6.2} {:10.5} {err:10.5} {:10.6}", average_alpha(&f), f.params.k_width);
    }
    Ok(())
}
