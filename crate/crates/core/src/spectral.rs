//! Eigen-decomposition and spectral time evolution.
//!
//! Dense decompositions carry a fixed gauge: eigenvectors within a degenerate
//! cluster are replaced by the Gram-Schmidt orthonormalization of the
//! projected coordinate vectors `e_0, e_1, …` (first independent ones win),
//! and every eigenvector is scaled so its largest-magnitude component is
//! positive.

use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bosehubbard::SparseHamiltonian;
use crate::error::{invalid, Error, Result};
use crate::fockspace::{FockBasis, FockVector};
use crate::C64;

pub const DEFAULT_DENSE_CAP: usize = 5000;

/// Relative energy window inside which eigenvalues count as degenerate.
const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    basis: Arc<FockBasis>,
}

impl SpectralDecomposition {
    /// Ascending eigenvalues (Hz).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors as columns.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvector(&self, n: usize) -> FockVector {
        let col = self.eigenvectors.column(n);
        FockVector::from_real(Arc::clone(&self.basis), col.as_slice()).expect("matching basis")
    }

    pub fn ground_state(&self) -> (f64, FockVector) {
        (self.eigenvalues[0], self.eigenvector(0))
    }
}

pub fn diagonalize_dense(h: &SparseHamiltonian) -> Result<SpectralDecomposition> {
    diagonalize_dense_with_cap(h, DEFAULT_DENSE_CAP)
}

pub fn diagonalize_dense_with_cap(h: &SparseHamiltonian, cap: usize) -> Result<SpectralDecomposition> {
    let dim = h.dimension();
    if dim > cap {
        return Err(Error::Capacity {
            what: "dense diagonalization (use the Lanczos ground-state solver instead)".into(),
            dimension: dim as u128,
            cap,
        });
    }
    let eig = SymmetricEigen::new(h.to_dense());
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(dim, dim);
    for (n, &i) in order.iter().enumerate() {
        vectors.set_column(n, &eig.eigenvectors.column(i));
    }

    let tol = DEGENERACY_TOL * h.norm().max(f64::MIN_POSITIVE);
    let mut start = 0;
    while start < dim {
        let mut end = start + 1;
        while end < dim && eigenvalues[end] - eigenvalues[end - 1] <= tol {
            end += 1;
        }
        if end - start > 1 {
            canonicalize_cluster(&mut vectors, start, end);
        }
        start = end;
    }
    for n in 0..dim {
        let mut col = vectors.column_mut(n);
        fix_sign(col.as_mut_slice());
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors: vectors,
        basis: Arc::clone(h.basis()),
    })
}

fn canonicalize_cluster(vectors: &mut DMatrix<f64>, start: usize, end: usize) {
    let dim = vectors.nrows();
    let k = end - start;
    let sub = vectors.columns(start, k).into_owned();
    let mut chosen: Vec<DVector<f64>> = Vec::with_capacity(k);
    for i in 0..dim {
        if chosen.len() == k {
            break;
        }
        // P e_i = V (V^T e_i)
        let mut w = &sub * sub.row(i).transpose();
        for _ in 0..2 {
            for c in &chosen {
                let d = c.dot(&w);
                w.axpy(-d, c, 1.0);
            }
        }
        let n = w.norm();
        if n > 1e-6 {
            chosen.push(w / n);
        }
    }
    for (j, c) in chosen.into_iter().enumerate() {
        vectors.set_column(start + j, &c);
    }
}

/// Scales `v` so the largest-magnitude component (first one on ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(x) = v.iter().find(|x| x.abs() >= max * (1.0 - 1e-9)) {
        if *x < 0.0 {
            v.iter_mut().for_each(|y| *y = -*y);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    /// Residual target relative to the Frobenius norm of H.
    pub tol: f64,
    pub max_iter: usize,
    /// Seed of the random starting vector.
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 400,
            seed: 0x5eed,
        }
    }
}

/// Lowest eigenpair by Lanczos with full reorthogonalization.
pub fn ground_state_iterative(h: &SparseHamiltonian, tol: f64) -> Result<(f64, FockVector)> {
    ground_state_lanczos(
        h,
        &LanczosOptions {
            tol,
            ..LanczosOptions::default()
        },
    )
}

pub fn ground_state_lanczos(
    h: &SparseHamiltonian,
    opts: &LanczosOptions,
) -> Result<(f64, FockVector)> {
    let dim = h.dimension();
    if dim == 0 {
        return Err(invalid("empty Hamiltonian"));
    }
    let basis = Arc::clone(h.basis());
    if dim == 1 {
        let e = h.diagonal()[0];
        return Ok((e, FockVector::from_real(basis, &[1.0])?));
    }
    let hnorm = h.norm().max(f64::MIN_POSITIVE);
    let target = opts.tol * hnorm;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut q: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalize(&mut q);

    let mut krylov: Vec<Vec<f64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut best_residual = f64::INFINITY;
    let limit = opts.max_iter.min(dim).max(1);

    for j in 0..limit {
        let mut w = h.matvec(&q);
        let alpha = dot(&w, &q);
        krylov.push(q);
        alphas.push(alpha);
        for _ in 0..2 {
            for v in &krylov {
                let d = dot(&w, v);
                axpy(-d, v, &mut w);
            }
        }
        let beta = norm(&w);
        let exhausted = beta <= 1e-13 * hnorm || j + 1 == limit;
        if j % 4 == 3 || exhausted {
            let (theta, y) = lowest_ritz(&alphas, &betas);
            let estimate = beta * y[y.len() - 1].abs();
            if estimate <= target || exhausted {
                let mut x = vec![0.0; dim];
                for (c, v) in y.iter().zip(&krylov) {
                    axpy(*c, v, &mut x);
                }
                normalize(&mut x);
                let hx = h.matvec(&x);
                let r = hx
                    .iter()
                    .zip(&x)
                    .map(|(a, b)| (a - theta * b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                best_residual = best_residual.min(r);
                if r <= target || (beta <= 1e-13 * hnorm && r <= 1e-12 * hnorm) {
                    fix_sign(&mut x);
                    return Ok((theta, FockVector::from_real(basis, &x)?));
                }
                if exhausted {
                    return Err(Error::Convergence {
                        iterations: j + 1,
                        best_residual: best_residual / hnorm,
                    });
                }
            }
        }
        betas.push(beta);
        q = w.into_iter().map(|x| x / beta).collect();
    }
    Err(Error::Convergence {
        iterations: limit,
        best_residual: best_residual / hnorm,
    })
}

fn lowest_ritz(alphas: &[f64], betas: &[f64]) -> (f64, Vec<f64>) {
    let m = alphas.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let i = eig.eigenvalues.argmin().0;
    (eig.eigenvalues[i], eig.eigenvectors.column(i).iter().copied().collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(a: &mut [f64]) {
    let n = norm(a);
    a.iter_mut().for_each(|x| *x /= n);
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Overlaps `c_n = ⟨v_n|ψ⟩` of a state with a decomposition.
#[derive(Debug, Clone)]
pub struct ProjectionTable {
    pub overlaps: Vec<C64>,
    /// `Σ |c_n|² E_n` (Hz).
    pub source_energy: f64,
}

impl ProjectionTable {
    pub fn weights(&self) -> Vec<f64> {
        self.overlaps.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.overlaps.iter().map(|c| c.norm_sqr()).sum()
    }
}

pub fn project(state: &FockVector, spec: &SpectralDecomposition) -> Result<ProjectionTable> {
    if **state.basis() != *spec.basis {
        return Err(invalid("state and decomposition live in different Fock sectors"));
    }
    let amps = state.amplitudes();
    let overlaps: Vec<C64> = (0..spec.len())
        .map(|n| {
            spec.eigenvectors
                .column(n)
                .iter()
                .zip(amps)
                .map(|(v, a)| a * *v)
                .sum()
        })
        .collect();
    let source_energy = overlaps
        .iter()
        .zip(&spec.eigenvalues)
        .map(|(c, e)| c.norm_sqr() * e)
        .sum();
    Ok(ProjectionTable {
        overlaps,
        source_energy,
    })
}

/// `ψ(t) = Σ_n c_n e^{−i2πE_n t} v_n` with `E_n` in Hz and `t` in seconds.
pub fn evolve(table: &ProjectionTable, spec: &SpectralDecomposition, t: f64) -> Result<FockVector> {
    if table.overlaps.len() != spec.len() {
        return Err(invalid("projection table does not match the decomposition"));
    }
    if t < 0.0 {
        return Err(invalid(format!("evolution time must be >= 0, got {t}")));
    }
    let dim = spec.basis.dimension();
    let mut out = vec![C64::new(0.0, 0.0); dim];
    for (n, (c, e)) in table.overlaps.iter().zip(&spec.eigenvalues).enumerate() {
        if c.norm_sqr() == 0.0 {
            continue;
        }
        let coef = c * C64::from_polar(1.0, -TAU * e * t);
        for (o, v) in out.iter_mut().zip(spec.eigenvectors.column(n).iter()) {
            *o += coef * *v;
        }
    }
    FockVector::new(Arc::clone(&spec.basis), out)
}

/// `⟨ψ|H|ψ⟩` (Hz).
pub fn energy_expectation(h: &SparseHamiltonian, state: &FockVector) -> f64 {
    let a = state.amplitudes();
    h.entries()
        .iter()
        .map(|&(r, c, v)| (a[r].conj() * a[c] * v).re)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bosehubbard::{build_hamiltonian, ground_state_energy_perturbative_check, HubbardParams};
    use crate::geometry::{build_cluster, ClusterGraph, SuperlatticeSpec, Trimerization};
    use approx::assert_relative_eq;

    fn spec() -> SuperlatticeSpec {
        SuperlatticeSpec::standard(45e3, 15e3, Trimerization::Right).unwrap()
    }

    fn hamiltonian(g: &ClusterGraph, n: usize, p: &HubbardParams) -> SparseHamiltonian {
        let basis = Arc::new(FockBasis::new(n, g.n_sites()).unwrap());
        build_hamiltonian(g, basis, p).unwrap()
    }

    fn check_invariants(h: &SparseHamiltonian, d: &SpectralDecomposition) {
        let dense = h.to_dense();
        let v = d.eigenvectors();
        let gram = v.transpose() * v;
        assert!((gram - DMatrix::identity(d.len(), d.len())).amax() < 1e-9);
        for n in 0..d.len() {
            let col = v.column(n);
            let r = (&dense * col - col * d.eigenvalues()[n]).norm();
            assert!(r <= 1e-8 * h.norm().max(1.0));
        }
        assert!(d.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
        let trace: f64 = h.diagonal().iter().sum();
        let sum: f64 = d.eigenvalues().iter().sum();
        assert!((trace - sum).abs() <= 1e-6 * trace.abs().max(1.0));
    }

    #[test]
    fn trimer_single_particle_spectrum() {
        let g = build_cluster(&spec(), 1, 1, false).unwrap();
        let j = 2.5;
        let h = hamiltonian(&g, 1, &HubbardParams::uniform(j, 9.0).unwrap());
        let d = diagonalize_dense(&h).unwrap();
        check_invariants(&h, &d);
        for (x, y) in d.eigenvalues().iter().zip([-2.0 * j, j, j]) {
            assert_relative_eq!(*x, y, max_relative = 1e-12);
        }
    }

    #[test]
    fn diagonal_matrix_is_its_own_decomposition() {
        let g = build_cluster(&spec(), 1, 1, false).unwrap();
        let p = HubbardParams::new(0.0, 0.0, 3.0)
            .unwrap()
            .with_offsets(vec![0.7, -0.2, 0.1])
            .unwrap();
        let h = hamiltonian(&g, 2, &p);
        let d = diagonalize_dense(&h).unwrap();
        let mut diag = h.diagonal();
        diag.sort_by(f64::total_cmp);
        for (x, y) in d.eigenvalues().iter().zip(&diag) {
            assert_relative_eq!(*x, *y, epsilon = 1e-14);
        }
        for n in 0..d.len() {
            let col = d.eigenvectors().column(n);
            assert_eq!(col.iter().filter(|x| x.abs() > 1e-12).count(), 1);
            assert!(col.amax() > 1.0 - 1e-12 && col.max() > 0.0);
        }
    }

    #[test]
    fn degenerate_clusters_are_canonical() {
        // two trimer levels at +J are degenerate; result must not depend on
        // the order sites are listed in
        let g = build_cluster(&spec(), 1, 1, false).unwrap();
        let h = hamiltonian(&g, 1, &HubbardParams::uniform(1.0, 0.0).unwrap());
        let d = diagonalize_dense(&h).unwrap();
        let v = d.eigenvectors();
        // first projected coordinate vector e_0 → (2, −1, −1)/√6
        let s6 = 6f64.sqrt();
        assert_relative_eq!(v[(0, 1)], 2.0 / s6, epsilon = 1e-12);
        assert_relative_eq!(v[(1, 1)], -1.0 / s6, epsilon = 1e-12);
        assert_relative_eq!(v[(2, 2)], -v[(1, 2)], epsilon = 1e-12);
        assert_relative_eq!(v[(0, 2)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn two_site_ground_energy_matches_closed_form() {
        let g = ClusterGraph::dimer(355.0);
        for (u, j) in [(10.0, 1.0), (0.5, 2.0), (300.0, 1.0)] {
            let h = hamiltonian(&g, 2, &HubbardParams::uniform(j, u).unwrap());
            let d = diagonalize_dense(&h).unwrap();
            let e = ground_state_energy_perturbative_check(u, j);
            assert_relative_eq!(d.eigenvalues()[0], e, max_relative = 1e-10);
        }
    }

    #[test]
    fn dense_cap_is_enforced() {
        let g = build_cluster(&spec(), 1, 1, false).unwrap();
        let h = hamiltonian(&g, 4, &HubbardParams::uniform(1.0, 1.0).unwrap());
        let err = diagonalize_dense_with_cap(&h, 5).unwrap_err();
        assert!(matches!(err, Error::Capacity { dimension: 15, .. }));
    }

    #[test]
    fn lanczos_matches_dense() {
        let g = build_cluster(&spec(), 2, 1, false).unwrap();
        let p = HubbardParams::new(1.0, 0.4, 3.0).unwrap();
        let h = hamiltonian(&g, 4, &p);
        let d = diagonalize_dense(&h).unwrap();
        let tol = 1e-10;
        let (e, v) = ground_state_iterative(&h, tol).unwrap();
        assert!((e - d.eigenvalues()[0]).abs() <= tol * h.norm());
        let overlap = v.inner(&d.eigenvector(0)).norm();
        assert_relative_eq!(overlap, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn lanczos_on_diagonal_matrix() {
        let g = build_cluster(&spec(), 1, 1, false).unwrap();
        let p = HubbardParams::new(0.0, 0.0, 2.0)
            .unwrap()
            .with_offsets(vec![0.3, -0.45, 0.9])
            .unwrap();
        let h = hamiltonian(&g, 3, &p);
        let min = h.diagonal().into_iter().fold(f64::INFINITY, f64::min);
        let (e, _) = ground_state_iterative(&h, 1e-12).unwrap();
        assert_relative_eq!(e, min, max_relative = 1e-12);
    }

    #[test]
    fn lanczos_free_bosons_on_two_trimers() {
        let g = build_cluster(&spec(), 2, 1, false).unwrap();
        let j = 1.0;
        let h = hamiltonian(&g, 6, &HubbardParams::uniform(j, 0.0).unwrap());
        // one-particle hopping matrix built directly from the bond list
        let mut t = DMatrix::zeros(6, 6);
        for b in g.bonds() {
            t[(b.p, b.q)] = -j;
            t[(b.q, b.p)] = -j;
        }
        let lowest = SymmetricEigen::new(t).eigenvalues.min();
        let (e, _) = ground_state_iterative(&h, 1e-10).unwrap();
        assert_relative_eq!(e, 6.0 * lowest, max_relative = 1e-9);
    }

    #[test]
    fn projection_and_evolution() {
        let g = build_cluster(&spec(), 1, 1, false).unwrap();
        let p = HubbardParams::uniform(3.0, 1700.0)
            .unwrap()
            .with_offsets(vec![12.4e3, 0.0, 0.0])
            .unwrap();
        let h = hamiltonian(&g, 3, &p);
        let d = diagonalize_dense(&h).unwrap();
        // eigenstates project onto themselves
        for k in [0, 4, 9] {
            let t = project(&d.eigenvector(k), &d).unwrap();
            for (n, c) in t.overlaps.iter().enumerate() {
                let expect = if n == k { 1.0 } else { 0.0 };
                assert!((c.norm() - expect).abs() < 1e-12);
            }
        }
        // Mott state lands mostly on the ΔV + O(U) level
        let basis = d.basis().clone();
        let mott = basis.basis_vector(basis.rank(&[1, 1, 1]).unwrap());
        let table = project(&mott, &d).unwrap();
        assert_relative_eq!(table.total_weight(), 1.0, epsilon = 1e-9);
        let w = table.weights();
        let top = (0..w.len()).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap();
        assert!(w[top] > 0.99);
        let e = d.eigenvalues()[top];
        assert!((e - 12.4e3).abs() < 2.0 * 1700.0);
        // t = 0 reconstructs, evolution is unitary and conserves energy
        let back = evolve(&table, &d, 0.0).unwrap();
        for (a, b) in back.amplitudes().iter().zip(mott.amplitudes()) {
            assert!((a - b).norm() < 1e-10);
        }
        let e0 = energy_expectation(&h, &mott);
        for t in [1e-6, 3.3e-5, 1e-3] {
            let psi = evolve(&table, &d, t).unwrap();
            assert_relative_eq!(psi.norm_sqr(), 1.0, epsilon = 1e-9);
            assert_relative_eq!(energy_expectation(&h, &psi), e0, max_relative = 1e-8);
        }
    }

    #[test]
    fn eigenstate_only_picks_up_global_phase() {
        let g = build_cluster(&spec(), 1, 1, false).unwrap();
        let h = hamiltonian(&g, 2, &HubbardParams::uniform(1.0, 4.0).unwrap());
        let d = diagonalize_dense(&h).unwrap();
        let v = d.eigenvector(2);
        let table = project(&v, &d).unwrap();
        let psi = evolve(&table, &d, 0.37).unwrap();
        for p in 0..3 {
            assert_relative_eq!(
                psi.number_expectation(p).unwrap(),
                v.number_expectation(p).unwrap(),
                epsilon = 1e-12
            );
        }
        assert_relative_eq!(psi.inner(&v).norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn two_level_beat_has_the_splitting_frequency() {
        // dimer with N=1: levels ∓J, splitting 2J
        let g = ClusterGraph::dimer(355.0);
        let j = 250.0;
        let h = hamiltonian(&g, 1, &HubbardParams::uniform(j, 0.0).unwrap());
        let d = diagonalize_dense(&h).unwrap();
        let basis = d.basis().clone();
        let start = basis.basis_vector(0);
        let table = project(&start, &d).unwrap();
        let dt = 1e-5;
        let n = 400;
        let series: Vec<f64> = (0..n)
            .map(|i| {
                evolve(&table, &d, i as f64 * dt)
                    .unwrap()
                    .number_expectation(0)
                    .unwrap()
            })
            .collect();
        let mean = series.iter().sum::<f64>() / n as f64;
        // DFT over the sampled window; 2J = 500 Hz falls on bin 2
        let power: Vec<f64> = (1..n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, x) in series.iter().enumerate() {
                    let ph = TAU * (k * i) as f64 / n as f64;
                    re += (x - mean) * ph.cos();
                    im += (x - mean) * ph.sin();
                }
                re * re + im * im
            })
            .collect();
        let kmax = 1 + (0..power.len()).max_by(|&a, &b| power[a].total_cmp(&power[b])).unwrap();
        let f = kmax as f64 / (n as f64 * dt);
        assert_relative_eq!(f, 2.0 * j, max_relative = 1e-12);
    }
}
