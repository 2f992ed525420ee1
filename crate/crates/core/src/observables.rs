//! Bond coherences, time-of-flight momentum distributions, diffraction-peak
//! populations and the inversion asymmetry parameter.
//!
//! Two conventions are used throughout:
//!
//! * `ζ_pq = (2/ν)⟨b†_p b_q⟩` per bond, with `a_pq = r_p − r_q`.
//! * In the fit-style decomposition `α cos(k·a) + β sin(k·a)` of the term
//!   `Re[ζ e^{ik·a}]` one has `α = Re ζ` and `β = −Im ζ`.

use std::f64::consts::{PI, TAU};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::fockspace::FockVector;
use crate::geometry::{BondClass, ClusterGraph, Vec2};
use crate::C64;

/// Fraction of clipped cells above which a grid carries a quality warning.
const CLIP_WARN_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct BondCoherence {
    pub p: usize,
    pub q: usize,
    pub class: BondClass,
    /// `r_p − r_q`.
    pub displacement: Vec2,
    pub zeta: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceRecord {
    bonds: Vec<BondCoherence>,
    filling: f64,
    n_particles: f64,
}

/// Real and imaginary fit observables of one bond direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionObservables {
    pub alpha: f64,
    pub beta: f64,
    /// Mean aligned ζ of the strong bonds along this direction.
    pub zeta_strong: C64,
    /// Mean aligned ζ of the weak bonds; `None` when the cluster has none.
    pub zeta_weak: Option<C64>,
}

impl CoherenceRecord {
    pub fn new(bonds: Vec<BondCoherence>, filling: f64, n_particles: f64) -> Result<Self> {
        if !(filling > 0.0 && filling.is_finite()) {
            return Err(invalid(format!("filling must be > 0, got {filling}")));
        }
        if !(n_particles >= 0.0) {
            return Err(invalid(format!("atom number must be >= 0, got {n_particles}")));
        }
        Ok(Self {
            bonds,
            filling,
            n_particles,
        })
    }

    /// Uniform record with the same ζ on every strong bond and ζ′ on every
    /// weak bond of `graph`.
    pub fn uniform(graph: &ClusterGraph, zeta: C64, zeta_weak: C64, filling: f64, n_particles: f64) -> Result<Self> {
        let bonds = graph
            .bonds()
            .iter()
            .map(|b| BondCoherence {
                p: b.p,
                q: b.q,
                class: b.class,
                displacement: b.displacement,
                zeta: match b.class {
                    BondClass::Strong => zeta,
                    BondClass::Weak => zeta_weak,
                },
            })
            .collect();
        Self::new(bonds, filling, n_particles)
    }

    pub fn bonds(&self) -> &[BondCoherence] {
        &self.bonds
    }

    pub fn filling(&self) -> f64 {
        self.filling
    }

    pub fn n_particles(&self) -> f64 {
        self.n_particles
    }

    /// ζ_pq, with ζ_qp = conj(ζ_pq) for the reversed pair.
    pub fn zeta(&self, p: usize, q: usize) -> Option<C64> {
        self.bonds.iter().find_map(|b| {
            if b.p == p && b.q == q {
                Some(b.zeta)
            } else if b.p == q && b.q == p {
                Some(b.zeta.conj())
            } else {
                None
            }
        })
    }

    /// Mean of `Re ζ` over bonds of one class.
    pub fn class_mean(&self, class: BondClass) -> Option<f64> {
        let v: Vec<f64> = self
            .bonds
            .iter()
            .filter(|b| b.class == class)
            .map(|b| b.zeta.re)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Per-direction `α ≃ Re(ζ + ζ′)`, `β ≃ −Im(ζ + ζ′)` where ζ and ζ′ are the
    /// class means of bonds parallel or antiparallel to each direction. An
    /// antiparallel bond enters as its conjugate (the reversed pair).
    pub fn direction_observables(&self, directions: &[Vec2]) -> Vec<DirectionObservables> {
        directions
            .iter()
            .map(|d| {
                let mean = |class: BondClass| -> Option<C64> {
                    let mut acc = C64::new(0.0, 0.0);
                    let mut n = 0usize;
                    for b in self.bonds.iter().filter(|b| b.class == class) {
                        let c = b.displacement.dot(d) / b.displacement.norm();
                        if c > 0.99 {
                            acc += b.zeta;
                        } else if c < -0.99 {
                            acc += b.zeta.conj();
                        } else {
                            continue;
                        }
                        n += 1;
                    }
                    (n > 0).then(|| acc / n as f64)
                };
                let zeta_strong = mean(BondClass::Strong).unwrap_or_default();
                let zeta_weak = mean(BondClass::Weak);
                let total = zeta_strong + zeta_weak.unwrap_or_default();
                DirectionObservables {
                    alpha: total.re,
                    beta: -total.im,
                    zeta_strong,
                    zeta_weak,
                }
            })
            .collect()
    }
}

/// `ζ_pq = (2/ν)⟨b†_p b_q⟩` on every bond of `graph`.
pub fn bond_coherences(state: &FockVector, graph: &ClusterGraph, filling: f64) -> Result<CoherenceRecord> {
    if state.basis().n_sites() != graph.n_sites() {
        return Err(invalid(format!(
            "state has {} sites but the cluster has {}",
            state.basis().n_sites(),
            graph.n_sites()
        )));
    }
    if !(filling > 0.0) {
        return Err(invalid(format!("filling must be > 0, got {filling}")));
    }
    let mut bonds = Vec::with_capacity(graph.bonds().len());
    for b in graph.bonds() {
        let c = state.correlator(b.p, b.q)?;
        bonds.push(BondCoherence {
            p: b.p,
            q: b.q,
            class: b.class,
            displacement: b.displacement,
            zeta: c * (2.0 / filling),
        });
    }
    CoherenceRecord::new(bonds, filling, state.basis().n_particles() as f64)
}

/// Isotropic Gaussian `|w̃(k)|² = amplitude · exp(−|k|²/(2 k_width²))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WannierEnvelope {
    k_width: f64,
    amplitude: f64,
}

impl WannierEnvelope {
    pub fn new(k_width: f64, amplitude: f64) -> Result<Self> {
        if !(k_width > 0.0 && k_width.is_finite()) {
            return Err(invalid(format!("envelope width must be > 0, got {k_width}")));
        }
        if !amplitude.is_finite() {
            return Err(invalid("envelope amplitude must be finite"));
        }
        Ok(Self { k_width, amplitude })
    }

    /// Envelope of a Gaussian orbital `ψ(r) ∝ exp(−r²/(2σ²))` of position
    /// width `σ` (nm), unit peak.
    pub fn from_position_width(sigma_nm: f64) -> Result<Self> {
        if !(sigma_nm > 0.0) {
            return Err(invalid(format!("position width must be > 0, got {sigma_nm}")));
        }
        Self::new(1.0 / (2f64.sqrt() * sigma_nm), 1.0)
    }

    pub fn k_width(&self) -> f64 {
        self.k_width
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// `|w̃(k)|²`.
    pub fn density(&self, k: Vec2) -> f64 {
        self.amplitude * (-k.norm_squared() / (2.0 * self.k_width * self.k_width)).exp()
    }

    /// `∫ |w̃(k)|² d²k`.
    pub fn integral(&self) -> f64 {
        self.amplitude * TAU * self.k_width * self.k_width
    }
}

/// Uniform axis with samples `center + (i − (len−1)/2)·step`. Samples of a
/// zero-centred axis are exact negatives of each other.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub center: f64,
    pub step: f64,
    pub len: usize,
}

impl Axis {
    pub fn new(center: f64, step: f64, len: usize) -> Result<Self> {
        if len < 2 || !(step > 0.0) || !center.is_finite() {
            return Err(invalid(format!(
                "axis needs >= 2 samples and a positive step (len {len}, step {step})"
            )));
        }
        Ok(Self { center, step, len })
    }

    /// `len` samples spanning `[−half_width, half_width]`.
    pub fn symmetric(half_width: f64, len: usize) -> Result<Self> {
        if len < 2 {
            return Err(invalid("axis needs >= 2 samples"));
        }
        Self::new(0.0, 2.0 * half_width / (len - 1) as f64, len)
    }

    pub fn value(&self, i: usize) -> f64 {
        self.center + (i as f64 - (self.len - 1) as f64 / 2.0) * self.step
    }

    pub fn min(&self) -> f64 {
        self.value(0)
    }

    pub fn max(&self) -> f64 {
        self.value(self.len - 1)
    }

    /// Fractional index of coordinate `x`.
    fn position(&self, x: f64) -> f64 {
        (x - self.center) / self.step + (self.len - 1) as f64 / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub kx: Axis,
    pub ky: Axis,
}

impl GridSpec {
    /// Square `n × n` grid over `[−half_width, half_width]²` (1/nm).
    pub fn square(half_width: f64, n: usize) -> Result<Self> {
        let a = Axis::symmetric(half_width, n)?;
        Ok(Self { kx: a, ky: a })
    }

    pub fn len(&self) -> usize {
        self.kx.len * self.ky.len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, ix: usize, iy: usize) -> Vec2 {
        Vec2::new(self.kx.value(ix), self.ky.value(iy))
    }

    pub fn cell_area(&self) -> f64 {
        self.kx.step * self.ky.step
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMeta {
    pub envelope: WannierEnvelope,
    /// Atom number `N` the pattern is normalized to.
    pub n_particles: f64,
    pub reciprocal: [Vec2; 3],
    /// Unit bond directions of the generating cluster.
    pub directions: Vec<Vec2>,
    pub clipped: usize,
    pub warnings: Vec<String>,
}

/// `n(k)` sampled on a uniform grid, row-major with `kx` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumGrid {
    spec: GridSpec,
    values: Vec<f64>,
    meta: GridMeta,
}

impl MomentumGrid {
    pub fn from_values(spec: GridSpec, values: Vec<f64>, meta: GridMeta) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(invalid(format!(
                "grid expects {} values, got {}",
                spec.len(),
                values.len()
            )));
        }
        Ok(Self { spec, values, meta })
    }

    /// Evaluates `f` on every grid point (rows in parallel), clips negative
    /// values to zero and records quality warnings.
    pub fn evaluate<F>(spec: GridSpec, mut meta: GridMeta, f: F) -> Self
    where
        F: Fn(Vec2) -> f64 + Sync,
    {
        let nx = spec.kx.len;
        let mut values = vec![0.0; spec.len()];
        values
            .par_chunks_mut(nx)
            .enumerate()
            .for_each(|(iy, row)| {
                for (ix, v) in row.iter_mut().enumerate() {
                    *v = f(spec.point(ix, iy));
                }
            });
        let mut clipped = 0;
        for v in &mut values {
            if *v < 0.0 {
                *v = 0.0;
                clipped += 1;
            }
        }
        meta.clipped = clipped;
        if clipped as f64 > CLIP_WARN_FRACTION * values.len() as f64 {
            meta.warnings.push(format!(
                "{clipped} of {} cells were negative and clipped to zero",
                values.len()
            ));
        }
        let g = meta.reciprocal[0].norm();
        if spec.kx.step > g / 4.0 || spec.ky.step > g / 4.0 {
            meta.warnings.push(format!(
                "grid step exceeds |G|/4 = {:.4e} 1/nm; diffraction structure is under-resolved",
                g / 4.0
            ));
        }
        Self { spec, values, meta }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn meta(&self) -> &GridMeta {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut GridMeta {
        &mut self.meta
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.spec.kx.len + ix]
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Trapezoid estimate of `∫ n(k) d²k` over the window.
    pub fn integral(&self) -> f64 {
        let (nx, ny) = (self.spec.kx.len, self.spec.ky.len);
        let mut s = 0.0;
        for iy in 0..ny {
            let wy = if iy == 0 || iy == ny - 1 { 0.5 } else { 1.0 };
            for ix in 0..nx {
                let wx = if ix == 0 || ix == nx - 1 { 0.5 } else { 1.0 };
                s += wx * wy * self.at(ix, iy);
            }
        }
        s * self.spec.cell_area()
    }

    /// Sixth-order Lagrange interpolation; `None` outside the usable interior.
    pub fn interpolate(&self, k: Vec2) -> Option<f64> {
        let (ix, wx) = stencil(&self.spec.kx, k.x)?;
        let (iy, wy) = stencil(&self.spec.ky, k.y)?;
        let mut s = 0.0;
        for (j, wyj) in wy.iter().enumerate() {
            let mut row = 0.0;
            for (i, wxi) in wx.iter().enumerate() {
                row += wxi * self.at(ix + i, iy + j);
            }
            s += wyj * row;
        }
        Some(s)
    }
}

const STENCIL: usize = 6;

fn stencil(axis: &Axis, x: f64) -> Option<(usize, [f64; STENCIL])> {
    let f = axis.position(x);
    let i0 = f.floor();
    let start = i0 - (STENCIL / 2 - 1) as f64;
    if start < 0.0 || start + (STENCIL - 1) as f64 > (axis.len - 1) as f64 {
        return None;
    }
    let t = f - start;
    let mut w = [1.0; STENCIL];
    for (j, wj) in w.iter_mut().enumerate() {
        for m in 0..STENCIL {
            if m != j {
                *wj *= (t - m as f64) / (j as f64 - m as f64);
            }
        }
    }
    Some((start as usize, w))
}

fn grid_meta(graph: &ClusterGraph, env: WannierEnvelope, n_particles: f64) -> GridMeta {
    GridMeta {
        envelope: env,
        n_particles,
        reciprocal: graph.reciprocal(),
        directions: graph.bond_directions(),
        clipped: 0,
        warnings: Vec::new(),
    }
}

/// `n(k) = |w̃(k)|² Σ_{p,q} e^{ik·(r_p − r_q)} ρ_pq` from a one-body matrix.
pub fn momentum_full(
    rho: &[Vec<C64>],
    graph: &ClusterGraph,
    env: WannierEnvelope,
    grid: GridSpec,
) -> Result<MomentumGrid> {
    let m = graph.n_sites();
    if rho.len() != m || rho.iter().any(|r| r.len() != m) {
        return Err(invalid(format!("coherence matrix must be {m}x{m}")));
    }
    let n: f64 = (0..m).map(|p| rho[p][p].re).sum();
    let pos: Vec<Vec2> = (0..m).map(|i| graph.position(i)).collect();
    let scale = rho.iter().flatten().map(|c| c.norm()).sum::<f64>().max(1.0);
    let worst = std::sync::Mutex::new(0.0f64);
    let mut out = MomentumGrid::evaluate(grid, grid_meta(graph, env, n), |k| {
        let mut s = C64::new(0.0, 0.0);
        for p in 0..m {
            for q in 0..m {
                s += rho[p][q] * C64::from_polar(1.0, k.dot(&(pos[p] - pos[q])));
            }
        }
        let rel = s.im.abs() / scale;
        if rel > 1e-10 {
            let mut w = worst.lock().unwrap();
            *w = w.max(rel);
        }
        env.density(k) * s.re
    });
    let worst = worst.into_inner().unwrap();
    if worst > 0.0 {
        out.meta.warnings.push(format!(
            "imaginary residue up to {worst:.2e} (relative); coherence matrix is not Hermitian"
        ));
    }
    Ok(out)
}

/// [`momentum_full`] from a state's one-body matrix.
pub fn momentum_full_state(
    state: &FockVector,
    graph: &ClusterGraph,
    env: WannierEnvelope,
    grid: GridSpec,
) -> Result<MomentumGrid> {
    momentum_full(&state.one_body_matrix(), graph, env, grid)
}

/// Nearest-neighbour truncation:
/// `n(k) = |w̃(k)|² (N + ν Σ_bonds Re[ζ_pq e^{ik·a_pq}])`.
///
/// With `ν` the filling per trimer this is `n/N = |w̃|²(1 + Σ_cell …)`, the
/// per-cell form; it equals [`momentum_full`] exactly whenever only
/// nearest-neighbour coherences are present.
pub fn momentum_nn(
    record: &CoherenceRecord,
    graph: &ClusterGraph,
    env: WannierEnvelope,
    grid: GridSpec,
) -> Result<MomentumGrid> {
    for b in record.bonds() {
        if b.p >= graph.n_sites() || b.q >= graph.n_sites() {
            return Err(invalid(format!("record bond ({}, {}) is not in the cluster", b.p, b.q)));
        }
    }
    let n = record.n_particles();
    let nu = record.filling();
    let bonds = record.bonds().to_vec();
    Ok(MomentumGrid::evaluate(grid, grid_meta(graph, env, n), |k| {
        let s: f64 = bonds
            .iter()
            .map(|b| (b.zeta * C64::from_polar(1.0, k.dot(&b.displacement))).re)
            .sum();
        env.density(k) * (n + nu * s)
    }))
}

/// Coherences of the three site pairs of an infinite trimerized lattice, in
/// the order of [`ClusterGraph::cell_pairs`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CellCoherences {
    pub intra: [C64; 3],
    pub inter: [C64; 3],
}

/// Per-cell form on the periodic lattice:
/// `n/N = |w̃|² (1 + Σ_pairs Re[ζ e^{ik·a} + ζ′ e^{ik·a′}])`.
pub fn momentum_periodic(
    coh: &CellCoherences,
    graph: &ClusterGraph,
    env: WannierEnvelope,
    n_particles: f64,
    grid: GridSpec,
) -> Result<MomentumGrid> {
    let pairs = graph.cell_pairs();
    if pairs.len() != 3 {
        return Err(invalid("cluster carries no periodic cell pairs (build it from a superlattice)"));
    }
    let terms: Vec<(Vec2, C64)> = pairs
        .iter()
        .zip(coh.intra.iter().zip(&coh.inter))
        .flat_map(|(cp, (z, zp))| [(cp.intra, *z), (cp.inter, *zp)])
        .collect();
    Ok(MomentumGrid::evaluate(grid, grid_meta(graph, env, n_particles), |k| {
        let s: f64 = terms
            .iter()
            .map(|(a, z)| (z * C64::from_polar(1.0, k.dot(a))).re)
            .sum();
        n_particles * env.density(k) * (1.0 + s)
    }))
}

/// Adds independent Gaussian noise of standard deviation
/// `relative · max(n)` to every cell, drawn from a ChaCha8 stream seeded with
/// `seed`. Returns the absolute standard deviation used.
pub fn add_peak_noise(grid: &mut MomentumGrid, relative: f64, seed: u64) -> Result<f64> {
    if !(relative >= 0.0 && relative.is_finite()) {
        return Err(invalid(format!("noise level must be >= 0, got {relative}")));
    }
    let sd = relative * grid.max_value();
    if sd == 0.0 {
        return Ok(0.0);
    }
    let normal = Normal::new(0.0, sd).map_err(|e| invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in grid.values_mut() {
        *v += normal.sample(&mut rng);
    }
    Ok(sd)
}

/// Populations of the six first-order peaks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakPopulations {
    /// `P_{+G_i}`.
    pub plus: [f64; 3],
    /// `P_{−G_i}`.
    pub minus: [f64; 3],
}

impl PeakPopulations {
    pub fn all(&self) -> [f64; 6] {
        [
            self.plus[0],
            self.minus[0],
            self.plus[1],
            self.minus[1],
            self.plus[2],
            self.minus[2],
        ]
    }
}

const RADIAL_NODES: usize = 24;
const ANGULAR_NODES: usize = 96;

/// Default peak-disc radius, a quarter of `|G|`.
pub fn default_peak_radius(graph: &ClusterGraph) -> f64 {
    0.25 * graph.reciprocal()[0].norm()
}

/// Integrates `n(k)` over discs of `radius` around each `±G_i`.
pub fn peak_populations(grid: &MomentumGrid, graph: &ClusterGraph, radius: f64) -> Result<PeakPopulations> {
    if !(radius > 0.0) {
        return Err(invalid(format!("peak radius must be > 0, got {radius}")));
    }
    let g = graph.reciprocal();
    let mut plus = [0.0; 3];
    let mut minus = [0.0; 3];
    for i in 0..3 {
        plus[i] = disc_integral(grid, g[i], radius)?;
        minus[i] = disc_integral(grid, -g[i], radius)?;
    }
    Ok(PeakPopulations { plus, minus })
}

/// Polar Gauss-Legendre × trapezoid quadrature of the interpolated grid over
/// a disc.
pub fn disc_integral(grid: &MomentumGrid, center: Vec2, radius: f64) -> Result<f64> {
    let (nodes, weights) = gauss_legendre(RADIAL_NODES);
    let mut total = 0.0;
    for (x, w) in nodes.iter().zip(&weights) {
        let r = 0.5 * radius * (x + 1.0);
        let mut ring = 0.0;
        for m in 0..ANGULAR_NODES {
            let th = TAU * m as f64 / ANGULAR_NODES as f64;
            let k = center + Vec2::new(r * th.cos(), r * th.sin());
            ring += grid.interpolate(k).ok_or_else(|| {
                invalid(format!(
                    "peak disc at ({:.4e}, {:.4e}) with radius {radius:.4e} is clipped by the grid window",
                    center.x, center.y
                ))
            })?;
        }
        total += w * r * ring * TAU / ANGULAR_NODES as f64;
    }
    Ok(total * 0.5 * radius)
}

/// Gauss-Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// `𝒜 = Σ(P_{G_i} − P_{−G_i}) / Σ(P_{G_i} + P_{−G_i})`.
pub fn asymmetry(pop: &PeakPopulations) -> Result<f64> {
    let num: f64 = (0..3).map(|i| pop.plus[i] - pop.minus[i]).sum();
    let den: f64 = (0..3).map(|i| pop.plus[i] + pop.minus[i]).sum();
    if den <= 0.0 {
        return Err(invalid("peak populations sum to zero"));
    }
    Ok(num / den)
}

/// Single trimer in a coherent superposition with phase `φ` on site A, unit
/// weight per site and off-diagonal contrast scaled by `visibility`.
/// Normalized to one atom: `n(k) = |w̃|²(1 + (2V/3) Σ_{p<q} cos(k·a_pq + φ_q − φ_p))`.
pub fn trimer_interference(
    phi: f64,
    env: WannierEnvelope,
    visibility: f64,
    graph: &ClusterGraph,
    grid: GridSpec,
) -> Result<MomentumGrid> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(invalid(format!("visibility must lie in [0, 1], got {visibility}")));
    }
    let sites = graph.trimer_sites(0);
    if sites.len() != 3 {
        return Err(invalid("cluster has no three-site trimer"));
    }
    let pos: Vec<Vec2> = sites.iter().map(|&i| graph.position(i)).collect();
    let phases = [phi, 0.0, 0.0];
    let mut terms = Vec::new();
    for p in 0..3 {
        for q in (p + 1)..3 {
            terms.push((pos[p] - pos[q], phases[q] - phases[p]));
        }
    }
    let c = 2.0 * visibility / 3.0;
    Ok(MomentumGrid::evaluate(grid, grid_meta(graph, env, 1.0), |k| {
        let s: f64 = terms.iter().map(|(a, dp)| (k.dot(a) + dp).cos()).sum();
        env.density(k) * (1.0 + c * s)
    }))
}
