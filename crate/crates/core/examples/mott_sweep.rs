//! Ground-state nearest-neighbour coherence versus U/J for a dimer and a
//! trimer (log-log slope near -1), then the two-trimer cluster where only
//! the weak bond is suppressed.
//!
//! cargo run --release --example mott_sweep

use kagome_bh::experiments::{coherence_sweep, log_log_slope, ClusterSpec, Solver, SweepConfig, SweepPoint};
use kagome_bh::geometry::{SuperlatticeSpec, Trimerization};
use kagome_bh::spectral::LanczosOptions;

fn main() -> kagome_bh::Result<()> {
    let spec = SuperlatticeSpec::standard(45e3, 15e3, Trimerization::Right)?;
    let ratios: Vec<f64> = (0..10).map(|i| 50.0 * 10f64.powf(i as f64 / 9.0)).collect();
    let uniform: Vec<SweepPoint> = ratios
        .iter()
        .map(|r| SweepPoint { j_strong: 1.0, j_weak: 1.0, u: *r })
        .collect();
    let trimer = ClusterSpec::Lattice { spec: spec.clone(), rows: 1, cols: 1, include_d: false };
    for (name, cluster, n) in [("dimer", ClusterSpec::Dimer { bond_length: 354.67 }, 2), ("trimer", trimer, 3)] {
        let rows = coherence_sweep(&SweepConfig {
            cluster,
            n_particles: n,
            points: uniform.clone(),
            solver: Solver::Dense,
            lanczos: LanczosOptions::default(),
        })?;
        let alpha: Vec<f64> = rows.iter().map(|r| r.alpha_mean).collect();
        println!("{name}: slope of ln α vs ln(U/J) = {:.4}", log_log_slope(&ratios, &alpha)?);
    }

    let u = 5.9;
    let weak: Vec<SweepPoint> = [5.9, 20.0, 60.0, 200.0, 500.0]
        .iter()
        .map(|r| SweepPoint { j_strong: 1.0, j_weak: u / r, u })
        .collect();
    let rows = coherence_sweep(&SweepConfig {
        cluster: ClusterSpec::Lattice { spec, rows: 1, cols: 2, include_d: false },
        n_particles: 6,
        points: weak,
        solver: Solver::Lanczos,
        lanczos: LanczosOptions::default(),
    })?;
    println!("\ntwo trimers, U/J = 5.9\n{:>8} {:>10} {:>10}", "U/J'", "ζ strong", "ζ weak");
    for r in rows {
        println!("{:8.1} {:10.5} {:10.5}", r.u_over_j_weak, r.zeta_strong_mean, r.zeta_weak_mean);
    }
    Ok(())
}
