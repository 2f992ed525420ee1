//! Exact diagonalization of two bosons on two sites, checked against the
//! closed-form ground energy, plus the one-atom trimer spectrum.
//!
//! cargo run --example two_site_ed

use std::sync::Arc;

use kagome_bh::bosehubbard::{build_hamiltonian, ground_state_energy_perturbative_check, HubbardParams};
use kagome_bh::fockspace::FockBasis;
use kagome_bh::geometry::{build_cluster, ClusterGraph, SuperlatticeSpec, Trimerization};
use kagome_bh::spectral::diagonalize_dense;

fn main() -> kagome_bh::Result<()> {
    let dimer = ClusterGraph::dimer(354.67);
    let basis = Arc::new(FockBasis::new(2, 2)?);
    println!("{:>8} {:>22} {:>22}", "U/J", "E0 (ED)", "E0 (closed form)");
    for u in [0.0, 1.0, 5.0, 20.0, 100.0] {
        let h = build_hamiltonian(&dimer, basis.clone(), &HubbardParams::uniform(1.0, u)?)?;
        let e0 = diagonalize_dense(&h)?.eigenvalues()[0];
        println!("{u:8.1} {e0:22.15} {:22.15}", ground_state_energy_perturbative_check(u, 1.0));
    }

    let spec = SuperlatticeSpec::standard(45e3, 15e3, Trimerization::Right)?;
    let trimer = build_cluster(&spec, 1, 1, false)?;
    let h = build_hamiltonian(&trimer, Arc::new(FockBasis::new(1, 3)?), &HubbardParams::uniform(2.5, 0.0)?)?;
    println!("\none atom on a trimer, J = 2.5 Hz: {:?}", diagonalize_dense(&h)?.eigenvalues());
    Ok(())
}
