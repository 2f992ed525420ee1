//! Sparse Bose-Hubbard Hamiltonian on a cluster graph.
//!
//! `H = −Σ_⟨pq⟩ J_pq (b†_p b_q + h.c.) + (U/2) Σ_p n_p(n_p − 1) + Σ_p ε_p n_p`
//! with `J_pq` taken from the bond class. Entries are real, in Hz.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fockspace::FockBasis;
use crate::geometry::{BondClass, ClusterGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HubbardParams {
    /// Intra-trimer tunnelling J (Hz).
    pub j_strong: f64,
    /// Inter-trimer tunnelling J′ (Hz).
    pub j_weak: f64,
    /// On-site interaction U (Hz).
    pub u: f64,
    /// Per-site energy offsets (Hz); empty means all zero.
    #[serde(default)]
    pub site_offsets: Vec<f64>,
}

impl HubbardParams {
    pub fn new(j_strong: f64, j_weak: f64, u: f64) -> Result<Self> {
        let p = Self {
            j_strong,
            j_weak,
            u,
            site_offsets: Vec::new(),
        };
        p.validate()?;
        Ok(p)
    }

    /// Same tunnelling on every bond.
    pub fn uniform(j: f64, u: f64) -> Result<Self> {
        Self::new(j, j, u)
    }

    pub fn with_offsets(mut self, offsets: Vec<f64>) -> Result<Self> {
        self.site_offsets = offsets;
        self.validate()?;
        Ok(self)
    }

    /// Adds `delta` to the offset of one site.
    pub fn with_offset_on(mut self, n_sites: usize, site: usize, delta: f64) -> Result<Self> {
        if site >= n_sites {
            return Err(invalid(format!("offset site {site} out of range 0..{n_sites}")));
        }
        if self.site_offsets.is_empty() {
            self.site_offsets = vec![0.0; n_sites];
        }
        self.site_offsets[site] += delta;
        self.validate()?;
        Ok(self)
    }

    pub fn tunnelling(&self, class: BondClass) -> f64 {
        match class {
            BondClass::Strong => self.j_strong,
            BondClass::Weak => self.j_weak,
        }
    }

    pub fn offset(&self, site: usize) -> f64 {
        self.site_offsets.get(site).copied().unwrap_or(0.0)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("J", self.j_strong), ("J'", self.j_weak), ("U", self.u)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if let Some(bad) = self.site_offsets.iter().find(|v| !v.is_finite()) {
            return Err(invalid(format!("site offset {bad} is not finite")));
        }
        Ok(())
    }
}

/// Real symmetric Hamiltonian in coordinate format.
///
/// Entries are grouped by row in basis order; within a row the column order is
/// ascending. The same data backs a CSR view used for products.
#[derive(Debug, Clone)]
pub struct SparseHamiltonian {
    dimension: usize,
    entries: Vec<(usize, usize, f64)>,
    row_start: Vec<usize>,
    basis: Arc<FockBasis>,
    params: HubbardParams,
}

impl SparseHamiltonian {
    /// Builds a Hamiltonian from explicit entries (e.g. for tests); rows are
    /// sorted and duplicates summed.
    pub fn from_entries(
        basis: Arc<FockBasis>,
        params: HubbardParams,
        mut entries: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        let dim = basis.dimension();
        if let Some(e) = entries.iter().find(|e| e.0 >= dim || e.1 >= dim) {
            return Err(invalid(format!("entry ({}, {}) outside dimension {dim}", e.0, e.1)));
        }
        entries.sort_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for e in entries {
            match merged.last_mut() {
                Some(last) if last.0 == e.0 && last.1 == e.1 => last.2 += e.2,
                _ => merged.push(e),
            }
        }
        Ok(Self::from_sorted(basis, params, merged))
    }

    fn from_sorted(
        basis: Arc<FockBasis>,
        params: HubbardParams,
        entries: Vec<(usize, usize, f64)>,
    ) -> Self {
        let dimension = basis.dimension();
        let mut row_start = vec![0; dimension + 1];
        for e in &entries {
            row_start[e.0 + 1] += 1;
        }
        for i in 0..dimension {
            row_start[i + 1] += row_start[i];
        }
        Self {
            dimension,
            entries,
            row_start,
            basis,
            params,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn params(&self) -> &HubbardParams {
        &self.params
    }

    pub fn row(&self, r: usize) -> &[(usize, usize, f64)] {
        &self.entries[self.row_start[r]..self.row_start[r + 1]]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dimension)
            .map(|r| {
                self.row(r)
                    .iter()
                    .filter(|e| e.1 == r)
                    .map(|e| e.2)
                    .sum()
            })
            .collect()
    }

    /// `y = H x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dimension);
        (0..self.dimension)
            .map(|r| self.row(r).iter().map(|&(_, c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dimension, self.dimension);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|e| e.2 * e.2).sum::<f64>().sqrt()
    }

    /// True when every off-diagonal entry has a bitwise-equal transpose.
    pub fn is_symmetric(&self) -> bool {
        self.entries.iter().all(|&(r, c, v)| {
            r == c
                || self
                    .row(c)
                    .binary_search_by_key(&r, |e| e.1)
                    .map(|i| self.row(c)[i].2 == v)
                    .unwrap_or(false)
        })
    }

    /// Writes `row col value` lines.
    pub fn write_coordinate<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# dimension {}", self.dimension)?;
        for &(r, c, v) in &self.entries {
            writeln!(out, "{r} {c} {v:.16e}")?;
        }
        Ok(())
    }
}

/// Assembles the Hamiltonian row by row (rows in parallel, collected in order).
pub fn build_hamiltonian(
    graph: &ClusterGraph,
    basis: Arc<FockBasis>,
    params: &HubbardParams,
) -> Result<SparseHamiltonian> {
    let m = graph.n_sites();
    if basis.n_sites() != m {
        return Err(invalid(format!(
            "basis has {} sites but the graph has {m}",
            basis.n_sites()
        )));
    }
    if !params.site_offsets.is_empty() && params.site_offsets.len() != m {
        return Err(invalid(format!(
            "{} site offsets given for {m} sites",
            params.site_offsets.len()
        )));
    }
    for b in graph.bonds() {
        if b.p >= m || b.q >= m {
            return Err(invalid(format!("bond ({}, {}) references an unknown site", b.p, b.q)));
        }
    }
    let hops: Vec<(usize, usize, f64)> = graph
        .bonds()
        .iter()
        .map(|b| (b.p, b.q, params.tunnelling(b.class)))
        .filter(|h| h.2 != 0.0)
        .collect();

    let rows: Vec<Vec<(usize, usize, f64)>> = (0..basis.dimension())
        .into_par_iter()
        .map(|s| {
            let occ = basis.state(s);
            let mut diag = 0.0;
            for (p, &n) in occ.iter().enumerate() {
                let n = n as f64;
                diag += 0.5 * params.u * n * (n - 1.0) + params.offset(p) * n;
            }
            let mut row = vec![(s, s, diag)];
            for &(p, q, j) in &hops {
                for (a, b) in [(p, q), (q, p)] {
                    if let Some((t, amp)) = basis.hop_unchecked(s, a, b) {
                        row.push((s, t, -j * amp));
                    }
                }
            }
            row.sort_by_key(|e| e.1);
            let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(row.len());
            for e in row {
                match merged.last_mut() {
                    Some(last) if last.1 == e.1 => last.2 += e.2,
                    _ => merged.push(e),
                }
            }
            merged
        })
        .collect();

    let entries: Vec<_> = rows.into_iter().flatten().collect();
    if let Some(e) = entries.iter().find(|e| !e.2.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite entry at ({}, {})", e.0, e.1)));
    }
    Ok(SparseHamiltonian::from_sorted(basis, params.clone(), entries))
}

/// Exact N=2 two-site ground energy `(U − √(U² + 16J²))/2`.
pub fn ground_state_energy_perturbative_check(u: f64, j: f64) -> f64 {
    (u - (u * u + 16.0 * j * j).sqrt()) / 2.0
}
