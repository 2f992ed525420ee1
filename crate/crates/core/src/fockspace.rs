//! Fixed-N bosonic occupation basis.
//!
//! States are stored in lexicographically descending order, so the first state
//! is `(N, 0, …, 0)` and the last `(0, …, 0, N)`. The rank of a state is the
//! number of states that precede it; for up to [`COMBINATORIAL_MAX_SITES`]
//! sites it is computed in O(M) with the combinatorial number system, beyond
//! that a hash map is used.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::C64;

/// Default maximal basis dimension.
pub const DEFAULT_DIMENSION_CAP: usize = 200_000;
pub const COMBINATORIAL_MAX_SITES: usize = 16;

pub type Occupation = u16;

/// Number of ways to put `n` bosons on `m` sites, `C(n+m−1, m−1)`, saturating.
pub fn sector_dimension(n: usize, m: usize) -> u128 {
    if m == 0 {
        return u128::from(n == 0);
    }
    // C(n+m-1, min(n, m-1)) evaluated incrementally; exact at every step
    let k = n.min(m - 1) as u128;
    let top = (n + m - 1) as u128;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(top - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

#[derive(Debug, Clone)]
enum Ranker {
    /// `table[n][m]` = number of states of `n` bosons on `m` sites.
    Combinatorial(Vec<Vec<usize>>),
    Hashed(HashMap<Vec<Occupation>, usize>),
}

#[derive(Debug, Clone)]
pub struct FockBasis {
    n_particles: usize,
    n_sites: usize,
    occupations: Vec<Occupation>,
    ranker: Ranker,
}

impl PartialEq for FockBasis {
    fn eq(&self, other: &Self) -> bool {
        self.n_particles == other.n_particles && self.n_sites == other.n_sites
    }
}

impl FockBasis {
    /// Enumerates the sector with the default dimension cap.
    pub fn new(n_particles: usize, n_sites: usize) -> Result<Self> {
        Self::with_cap(n_particles, n_sites, DEFAULT_DIMENSION_CAP)
    }

    pub fn with_cap(n_particles: usize, n_sites: usize, cap: usize) -> Result<Self> {
        let hashed = n_sites > COMBINATORIAL_MAX_SITES;
        Self::build(n_particles, n_sites, cap, hashed)
    }

    /// Same basis, always ranked through a hash map.
    pub fn with_hashed_rank(n_particles: usize, n_sites: usize, cap: usize) -> Result<Self> {
        Self::build(n_particles, n_sites, cap, true)
    }

    fn build(n_particles: usize, n_sites: usize, cap: usize, hashed: bool) -> Result<Self> {
        if n_sites == 0 {
            return Err(invalid("a Fock basis needs at least one site"));
        }
        if n_particles > Occupation::MAX as usize {
            return Err(invalid(format!("at most {} particles supported", Occupation::MAX)));
        }
        let dim = sector_dimension(n_particles, n_sites);
        if dim > cap as u128 {
            return Err(Error::Capacity {
                what: format!("Fock basis N={n_particles}, M={n_sites}"),
                dimension: dim,
                cap,
            });
        }
        let dim = dim as usize;
        let mut occupations = Vec::with_capacity(dim * n_sites);
        let mut state = vec![0 as Occupation; n_sites];
        state[0] = n_particles as Occupation;
        loop {
            occupations.extend_from_slice(&state);
            if !next_descending(&mut state) {
                break;
            }
        }
        debug_assert_eq!(occupations.len(), dim * n_sites);

        let ranker = if hashed {
            Ranker::Hashed(
                occupations
                    .chunks_exact(n_sites)
                    .enumerate()
                    .map(|(i, s)| (s.to_vec(), i))
                    .collect(),
            )
        } else {
            let table = (0..=n_particles)
                .map(|n| (0..=n_sites).map(|m| sector_dimension(n, m) as usize).collect())
                .collect();
            Ranker::Combinatorial(table)
        };
        Ok(Self {
            n_particles,
            n_sites,
            occupations,
            ranker,
        })
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dimension(&self) -> usize {
        self.occupations.len() / self.n_sites
    }

    pub fn state(&self, index: usize) -> &[Occupation] {
        &self.occupations[index * self.n_sites..(index + 1) * self.n_sites]
    }

    pub fn states(&self) -> impl ExactSizeIterator<Item = &[Occupation]> {
        self.occupations.chunks_exact(self.n_sites)
    }

    /// Index of an occupation vector, or `None` if it is not in this sector.
    pub fn rank(&self, occ: &[Occupation]) -> Option<usize> {
        if occ.len() != self.n_sites
            || occ.iter().map(|&n| n as usize).sum::<usize>() != self.n_particles
        {
            return None;
        }
        match &self.ranker {
            Ranker::Hashed(map) => map.get(occ).copied(),
            Ranker::Combinatorial(table) => {
                let mut rank = 0;
                let mut remaining = self.n_particles;
                for (i, &n) in occ.iter().enumerate().take(self.n_sites - 1) {
                    let n = n as usize;
                    // states with a larger occupation at site i come first
                    if remaining > n {
                        rank += table[remaining - n - 1][self.n_sites - i];
                    }
                    remaining -= n;
                }
                Some(rank)
            }
        }
    }

    fn check_site(&self, p: usize) -> Result<()> {
        if p >= self.n_sites {
            return Err(invalid(format!("site {p} out of range 0..{}", self.n_sites)));
        }
        Ok(())
    }

    /// Applies `b†_p b_q` to basis state `index`.
    ///
    /// Returns the target index and the matrix element `√n_q·√(n_p+1)`, or
    /// `None` when site `q` is empty.
    pub fn apply_hop(&self, index: usize, p: usize, q: usize) -> Result<Option<(usize, f64)>> {
        self.check_site(p)?;
        self.check_site(q)?;
        if p == q {
            return Err(invalid(format!("hop needs two distinct sites, got {p} twice")));
        }
        if index >= self.dimension() {
            return Err(invalid(format!("state index {index} out of range")));
        }
        Ok(self.hop_unchecked(index, p, q))
    }

    pub(crate) fn hop_unchecked(&self, index: usize, p: usize, q: usize) -> Option<(usize, f64)> {
        let s = self.state(index);
        let (np, nq) = (s[p] as usize, s[q] as usize);
        if nq == 0 {
            return None;
        }
        let mut t = s.to_vec();
        t[q] -= 1;
        t[p] += 1;
        let target = self.rank(&t).expect("hop stays in the sector");
        Some((target, ((nq * (np + 1)) as f64).sqrt()))
    }

    /// Coordinate vector of basis state `index`.
    pub fn basis_vector(self: &Arc<Self>, index: usize) -> FockVector {
        let mut amps = vec![C64::new(0.0, 0.0); self.dimension()];
        amps[index] = C64::new(1.0, 0.0);
        FockVector {
            basis: Arc::clone(self),
            amplitudes: amps,
        }
    }
}

/// Advances `state` to the next occupation vector in descending lexicographic
/// order. Returns `false` after the last state.
fn next_descending(state: &mut [Occupation]) -> bool {
    let m = state.len();
    if m < 2 {
        return false;
    }
    // rightmost non-last site holding a particle
    let Some(i) = (0..m - 1).rev().find(|&i| state[i] > 0) else {
        return false;
    };
    let tail: Occupation = state[i + 1..].iter().sum();
    state[i] -= 1;
    state[i + 1] = tail + 1;
    for s in &mut state[i + 2..] {
        *s = 0;
    }
    true
}

/// Complex state vector in a [`FockBasis`].
#[derive(Debug, Clone)]
pub struct FockVector {
    basis: Arc<FockBasis>,
    amplitudes: Vec<C64>,
}

impl FockVector {
    pub fn new(basis: Arc<FockBasis>, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != basis.dimension() {
            return Err(invalid(format!(
                "amplitude length {} does not match basis dimension {}",
                amplitudes.len(),
                basis.dimension()
            )));
        }
        Ok(Self { basis, amplitudes })
    }

    pub fn from_real(basis: Arc<FockBasis>, amplitudes: &[f64]) -> Result<Self> {
        Self::new(basis, amplitudes.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            for a in &mut self.amplitudes {
                *a /= n;
            }
        }
        self
    }

    pub fn inner(&self, other: &FockVector) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `⟨b†_p b_q⟩`; for `p == q` this is `⟨n_p⟩`.
    pub fn correlator(&self, p: usize, q: usize) -> Result<C64> {
        self.basis.check_site(p)?;
        self.basis.check_site(q)?;
        if p == q {
            return Ok(C64::new(self.number_expectation(p)?, 0.0));
        }
        let mut acc = C64::new(0.0, 0.0);
        for (s, amp) in self.amplitudes.iter().enumerate() {
            if amp.norm_sqr() == 0.0 {
                continue;
            }
            if let Some((t, m)) = self.basis.hop_unchecked(s, p, q) {
                acc += self.amplitudes[t].conj() * amp * m;
            }
        }
        Ok(acc)
    }

    /// Full one-body density matrix `ρ[p][q] = ⟨b†_p b_q⟩`.
    pub fn one_body_matrix(&self) -> Vec<Vec<C64>> {
        let m = self.basis.n_sites();
        let mut rho = vec![vec![C64::new(0.0, 0.0); m]; m];
        for p in 0..m {
            for q in 0..m {
                if q < p {
                    rho[p][q] = rho[q][p].conj();
                } else {
                    rho[p][q] = self.correlator(p, q).expect("sites in range");
                }
            }
        }
        rho
    }

    /// `Σ_s |ψ_s|² n_p(s)`.
    pub fn number_expectation(&self, p: usize) -> Result<f64> {
        self.basis.check_site(p)?;
        Ok(self
            .basis
            .states()
            .zip(&self.amplitudes)
            .map(|(s, a)| a.norm_sqr() * s[p] as f64)
            .sum())
    }
}

/// Free-standing form of [`FockVector::number_expectation`].
pub fn number_expectation(v: &FockVector, p: usize) -> Result<f64> {
    v.number_expectation(p)
}

/// Free-standing form of [`FockBasis::new`].
pub fn enumerate_basis(n_particles: usize, n_sites: usize) -> Result<FockBasis> {
    FockBasis::new(n_particles, n_sites)
}
