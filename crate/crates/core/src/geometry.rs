//! Two-colour triangular superlattice and the trimerized kagome cluster it
//! defines.
//!
//! Each triangular lattice comes from three in-plane beams at 120°. Beam `j`
//! travels along angle `2πj/3`, so with zero phases the short-wavelength (SW)
//! lattice has sites at `m·a1 + n·a2`, `a1 = a△(1, 0)`, `a2 = a△(1/2, √3/2)`,
//! `a△ = 2λ/3`. The long-wavelength (LW) lattice has twice the spacing and its
//! site is placed at the centroid of one SW triangle, which selects the
//! trimerization.
//!
//! Within one superlattice cell the four SW sites are labelled
//! `A = 0`, `B = a1`, `C = a2`, `D = a1 + a2`. Right trimerization binds the
//! up-triangle A-B-C; left trimerization binds the down-triangle A-C-D, using
//! the image of D at `a2 − a1`.

use std::f64::consts::{PI, TAU};
use std::fmt;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type Vec2 = Vector2<f64>;

/// Standard SW wavelength (nm).
pub const SW_WAVELENGTH_NM: f64 = 532.0;
/// Standard LW wavelength (nm).
pub const LW_WAVELENGTH_NM: f64 = 1064.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    InPlane,
    OutOfPlane,
}

/// Three coplanar beams at mutual 120° forming one triangular lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSet {
    wavelength_nm: f64,
    polarization: Polarization,
    depth_hz: f64,
    phase_offsets: [f64; 3],
}

impl BeamSet {
    pub fn new(wavelength_nm: f64, polarization: Polarization, depth_hz: f64) -> Result<Self> {
        if !(wavelength_nm.is_finite() && wavelength_nm > 0.0) {
            return Err(invalid(format!("wavelength must be positive, got {wavelength_nm}")));
        }
        if !(depth_hz.is_finite() && depth_hz >= 0.0) {
            return Err(invalid(format!("lattice depth must be >= 0, got {depth_hz}")));
        }
        Ok(Self {
            wavelength_nm,
            polarization,
            depth_hz,
            phase_offsets: [0.0; 3],
        })
    }

    pub fn with_phases(mut self, phases: [f64; 3]) -> Self {
        self.phase_offsets = phases;
        self
    }

    /// Chooses beam phases so that a lattice site sits at `r0`.
    pub fn centered_at(self, r0: Vec2) -> Self {
        let k = self.wavevectors();
        let phases = [-k[0].dot(&r0), -k[1].dot(&r0), -k[2].dot(&r0)];
        self.with_phases(phases)
    }

    pub fn wavelength_nm(&self) -> f64 {
        self.wavelength_nm
    }

    pub fn polarization(&self) -> Polarization {
        self.polarization
    }

    pub fn depth_hz(&self) -> f64 {
        self.depth_hz
    }

    pub fn phase_offsets(&self) -> [f64; 3] {
        self.phase_offsets
    }

    pub fn wavenumber(&self) -> f64 {
        TAU / self.wavelength_nm
    }

    pub fn wavevectors(&self) -> [Vec2; 3] {
        let k = self.wavenumber();
        std::array::from_fn(|j| {
            let th = TAU * j as f64 / 3.0;
            Vec2::new(k * th.cos(), k * th.sin())
        })
    }

    /// First-order reciprocal vectors `G_i = k_j − k_k` (cyclic).
    pub fn reciprocal(&self) -> [Vec2; 3] {
        let k = self.wavevectors();
        [k[1] - k[2], k[2] - k[0], k[0] - k[1]]
    }

    /// Nearest-neighbour distance of the intensity lattice, `2λ/3`.
    pub fn lattice_spacing(&self) -> f64 {
        2.0 * self.wavelength_nm / 3.0
    }

    /// Primitive vectors `(a1, a2)` dual to the reciprocal vectors.
    pub fn lattice_vectors(&self) -> (Vec2, Vec2) {
        let g = self.reciprocal();
        // a1: G1·a1 = 0, G3·a1 = 2π. a2: G1·a2 = 2π, G2·a2 = −2π.
        let a1 = solve2(g[0], g[2], 0.0, TAU);
        let a2 = solve2(g[0], g[1], TAU, -TAU);
        (a1, a2)
    }

    /// Position of the lattice site selected by the current phases.
    pub fn origin(&self) -> Vec2 {
        let g = self.reciprocal();
        let p = self.phase_offsets;
        solve2(g[0], g[1], p[2] - p[1], p[0] - p[2])
    }

    fn polarization_vector(&self, k: &Vec2) -> [f64; 3] {
        match self.polarization {
            Polarization::OutOfPlane => [0.0, 0.0, 1.0],
            Polarization::InPlane => {
                let n = k.norm();
                [-k.y / n, k.x / n, 0.0]
            }
        }
    }

    fn overlaps(&self) -> [[f64; 3]; 3] {
        let k = self.wavevectors();
        let e: [[f64; 3]; 3] = std::array::from_fn(|j| self.polarization_vector(&k[j]));
        std::array::from_fn(|i| {
            std::array::from_fn(|j| e[i][0] * e[j][0] + e[i][1] * e[j][1] + e[i][2] * e[j][2])
        })
    }

    /// Raw interference intensity `|Σ_j e_j exp(i(k_j·r + φ_j))|²` for unit
    /// beam amplitudes.
    pub fn intensity(&self, r: Vec2) -> f64 {
        let k = self.wavevectors();
        let o = self.overlaps();
        let mut total = o[0][0] + o[1][1] + o[2][2];
        for i in 0..3 {
            for j in (i + 1)..3 {
                let th = (k[i] - k[j]).dot(&r) + self.phase_offsets[i] - self.phase_offsets[j];
                total += 2.0 * o[i][j] * th.cos();
            }
        }
        total
    }

    fn intensity_gradient(&self, r: Vec2) -> Vec2 {
        let k = self.wavevectors();
        let o = self.overlaps();
        let mut g = Vec2::zeros();
        for i in 0..3 {
            for j in (i + 1)..3 {
                let dk = k[i] - k[j];
                let th = dk.dot(&r) + self.phase_offsets[i] - self.phase_offsets[j];
                g -= dk * (2.0 * o[i][j] * th.sin());
            }
        }
        g
    }

    /// Intensity at a site (all beams in phase) and at the point of maximal
    /// destructive interference.
    fn intensity_extremes(&self) -> (f64, f64) {
        let o = self.overlaps();
        let diag = o[0][0] + o[1][1] + o[2][2];
        let pair = o[0][1] + o[0][2] + o[1][2];
        // all pairwise phases 0 at a site, ±2π/3 at the anti-site
        (diag + 2.0 * pair, diag - pair)
    }

    /// Intensity rescaled so sites map to 0 and the full modulation to 1.
    pub fn normalized(&self, r: Vec2) -> f64 {
        let (site, anti) = self.intensity_extremes();
        (self.intensity(r) - site) / (anti - site)
    }

    fn normalized_gradient(&self, r: Vec2) -> Vec2 {
        let (site, anti) = self.intensity_extremes();
        self.intensity_gradient(r) / (anti - site)
    }

    /// This lattice's contribution to the potential (Hz).
    pub fn potential(&self, r: Vec2) -> f64 {
        self.depth_hz * self.normalized(r)
    }

    /// Gradient of [`BeamSet::potential`] (Hz/nm).
    pub fn potential_gradient(&self, r: Vec2) -> Vec2 {
        self.normalized_gradient(r) * self.depth_hz
    }
}

fn solve2(u: Vec2, v: Vec2, bu: f64, bv: f64) -> Vec2 {
    let m = Matrix2::new(u.x, u.y, v.x, v.y);
    m.try_inverse().expect("reciprocal vectors are independent") * Vec2::new(bu, bv)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trimerization {
    /// LW site at the A-B-C centroid.
    Right,
    /// LW site at the A-C-D centroid.
    Left,
}

impl Trimerization {
    pub fn mirrored(self) -> Self {
        match self {
            Trimerization::Right => Trimerization::Left,
            Trimerization::Left => Trimerization::Right,
        }
    }
}

impl std::str::FromStr for Trimerization {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "right" => Ok(Trimerization::Right),
            "left" => Ok(Trimerization::Left),
            other => Err(invalid(format!("unknown trimerization '{other}' (right|left)"))),
        }
    }
}

impl fmt::Display for Trimerization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Trimerization::Right => "right",
            Trimerization::Left => "left",
        })
    }
}

/// Two commensurate triangular lattices plus the trimerization choice.
///
/// The LW beam phases are always derived from the SW origin and the
/// trimerization so the LW site sits on the selected trimer centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperlatticeSpec {
    sw: BeamSet,
    lw: BeamSet,
    trimerization: Trimerization,
    breathing: f64,
}

impl SuperlatticeSpec {
    pub fn new(
        sw: BeamSet,
        lw: BeamSet,
        trimerization: Trimerization,
        breathing: f64,
    ) -> Result<Self> {
        let ratio = lw.wavelength_nm / sw.wavelength_nm;
        if (ratio - 2.0).abs() > 1e-9 {
            return Err(invalid(format!(
                "LW/SW wavelength ratio must be 2, got {ratio}"
            )));
        }
        check_breathing(breathing)?;
        let mut spec = Self {
            sw,
            lw,
            trimerization,
            breathing,
        };
        let centre = spec.sw.origin() + spec.centroid_offset();
        spec.lw = spec.lw.clone().centered_at(centre);
        Ok(spec)
    }

    /// 532/1064 nm lattices, in-plane SW, out-of-plane LW, SW site at origin.
    pub fn standard(v_sw_hz: f64, v_lw_hz: f64, trimerization: Trimerization) -> Result<Self> {
        Self::new(
            BeamSet::new(SW_WAVELENGTH_NM, Polarization::InPlane, v_sw_hz)?,
            BeamSet::new(LW_WAVELENGTH_NM, Polarization::OutOfPlane, v_lw_hz)?,
            trimerization,
            0.0,
        )
    }

    pub fn with_breathing(self, breathing: f64) -> Result<Self> {
        Self::new(self.sw, self.lw, self.trimerization, breathing)
    }

    pub fn with_trimerization(self, trimerization: Trimerization) -> Self {
        Self::new(self.sw, self.lw, trimerization, self.breathing)
            .expect("already validated")
    }

    pub fn with_depths(self, v_sw_hz: f64, v_lw_hz: f64) -> Result<Self> {
        let sw = BeamSet::new(self.sw.wavelength_nm, self.sw.polarization, v_sw_hz)?
            .with_phases(self.sw.phase_offsets);
        let lw = BeamSet::new(self.lw.wavelength_nm, self.lw.polarization, v_lw_hz)?;
        Self::new(sw, lw, self.trimerization, self.breathing)
    }

    pub fn sw(&self) -> &BeamSet {
        &self.sw
    }

    pub fn lw(&self) -> &BeamSet {
        &self.lw
    }

    pub fn trimerization(&self) -> Trimerization {
        self.trimerization
    }

    pub fn breathing(&self) -> f64 {
        self.breathing
    }

    /// SW nearest-neighbour spacing a△ (nm).
    pub fn site_spacing(&self) -> f64 {
        self.sw.lattice_spacing()
    }

    pub fn sw_vectors(&self) -> (Vec2, Vec2) {
        self.sw.lattice_vectors()
    }

    /// Superlattice primitive vectors `(2 a1, 2 a2)`.
    pub fn cell_vectors(&self) -> (Vec2, Vec2) {
        let (a1, a2) = self.sw_vectors();
        (a1 * 2.0, a2 * 2.0)
    }

    /// First-order diffraction vectors of the LW lattice.
    pub fn reciprocal(&self) -> [Vec2; 3] {
        self.lw.reciprocal()
    }

    /// Labels and in-cell offsets of the three trimer sites.
    pub fn trimer_offsets(&self) -> [(SiteLabel, Vec2); 3] {
        let (a1, a2) = self.sw_vectors();
        match self.trimerization {
            Trimerization::Right => [
                (SiteLabel::A, Vec2::zeros()),
                (SiteLabel::B, a1),
                (SiteLabel::C, a2),
            ],
            Trimerization::Left => [
                (SiteLabel::A, Vec2::zeros()),
                (SiteLabel::C, a2),
                (SiteLabel::D, a2 - a1),
            ],
        }
    }

    /// The SW site of the cell that does not belong to the trimer.
    pub fn fourth_offset(&self) -> (SiteLabel, Vec2) {
        let (a1, a2) = self.sw_vectors();
        match self.trimerization {
            Trimerization::Right => (SiteLabel::D, a1 + a2),
            Trimerization::Left => (SiteLabel::B, a1),
        }
    }

    pub fn centroid_offset(&self) -> Vec2 {
        let (a1, a2) = self.sw_vectors();
        match self.trimerization {
            Trimerization::Right => (a1 + a2) / 3.0,
            Trimerization::Left => (a2 * 2.0 - a1) / 3.0,
        }
    }

    /// LW lattice site of cell (0, 0).
    pub fn lw_site(&self) -> Vec2 {
        self.sw.origin() + self.centroid_offset()
    }

    /// SW bond midpoint that maps the right trimer of cell (0, 0) onto the
    /// left one under inversion.
    pub fn inversion_center(&self) -> Vec2 {
        let (_, a2) = self.sw_vectors();
        self.sw.origin() + a2 / 2.0
    }
}

fn check_breathing(delta: f64) -> Result<()> {
    if !(0.0..0.5).contains(&delta) {
        return Err(invalid(format!("breathing must lie in [0, 0.5), got {delta}")));
    }
    Ok(())
}

/// Total potential `V_SW·u_SW(r) + V_LW·u_LW(r)` in Hz; lattice sites are minima.
pub fn potential(spec: &SuperlatticeSpec, r: Vec2) -> f64 {
    spec.sw.potential(r) + spec.lw.potential(r)
}

/// Analytic gradient ∇V (Hz/nm). The force on an atom is `−h·∇V`.
pub fn potential_gradient(spec: &SuperlatticeSpec, r: Vec2) -> Vec2 {
    spec.sw.potential_gradient(r) + spec.lw.potential_gradient(r)
}

/// Force direction field `−∇V` (Hz/nm).
pub fn force(spec: &SuperlatticeSpec, r: Vec2) -> Vec2 {
    -potential_gradient(spec, r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SiteLabel {
    A,
    B,
    C,
    D,
}

impl fmt::Display for SiteLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BondClass {
    Strong,
    Weak,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Site {
    pub label: SiteLabel,
    pub position: Vec2,
    /// `None` for the fourth (non-trimer) site of a cell.
    pub trimer: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bond {
    pub p: usize,
    pub q: usize,
    pub class: BondClass,
    /// `position(p) − position(q)`.
    pub displacement: Vec2,
}

/// Intra- and inter-trimer displacement vectors of one site pair of the
/// periodic lattice, as used in the per-cell momentum formula.
#[derive(Debug, Clone, PartialEq)]
pub struct CellPair {
    pub p: SiteLabel,
    pub q: SiteLabel,
    /// `a_pq = r_p − r_q` inside the trimer.
    pub intra: Vec2,
    /// `a'_pq`, displacement of the inter-trimer bond joining a `p` site to a
    /// `q` site of the neighbouring cell.
    pub inter: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterGraph {
    sites: Vec<Site>,
    bonds: Vec<Bond>,
    reciprocal: [Vec2; 3],
    bond_length: f64,
    n_cells: usize,
    cell_pairs: Vec<CellPair>,
}

impl ClusterGraph {
    /// Builds a graph from explicit sites and `(p, q, class)` bonds.
    /// Displacements are computed from the site positions.
    pub fn from_parts(
        sites: Vec<Site>,
        bonds: &[(usize, usize, BondClass)],
        reciprocal: [Vec2; 3],
        bond_length: f64,
        n_cells: usize,
    ) -> Result<Self> {
        let mut out = Vec::with_capacity(bonds.len());
        for &(p, q, class) in bonds {
            if p >= sites.len() || q >= sites.len() {
                return Err(invalid(format!(
                    "bond ({p}, {q}) references a site outside 0..{}",
                    sites.len()
                )));
            }
            if p == q {
                return Err(invalid(format!("bond ({p}, {q}) is a self loop")));
            }
            let same = sites[p].trimer.is_some() && sites[p].trimer == sites[q].trimer;
            match class {
                BondClass::Strong if !same => {
                    return Err(invalid(format!("strong bond ({p}, {q}) crosses trimers")))
                }
                BondClass::Weak if same => {
                    return Err(invalid(format!("weak bond ({p}, {q}) lies inside a trimer")))
                }
                _ => {}
            }
            out.push(Bond {
                p,
                q,
                class,
                displacement: sites[p].position - sites[q].position,
            });
        }
        Ok(Self {
            sites,
            bonds: out,
            reciprocal,
            bond_length,
            n_cells: n_cells.max(1),
            cell_pairs: Vec::new(),
        })
    }

    /// Two sites joined by one strong bond along x.
    pub fn dimer(bond_length: f64) -> Self {
        let sites = vec![
            Site {
                label: SiteLabel::A,
                position: Vec2::zeros(),
                trimer: Some(0),
            },
            Site {
                label: SiteLabel::B,
                position: Vec2::new(bond_length, 0.0),
                trimer: Some(0),
            },
        ];
        Self::from_parts(
            sites,
            &[(0, 1, BondClass::Strong)],
            reciprocal_for_spacing(bond_length),
            bond_length,
            1,
        )
        .expect("valid dimer")
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn reciprocal(&self) -> [Vec2; 3] {
        self.reciprocal
    }

    /// Undistorted nearest-neighbour spacing a△.
    pub fn bond_length(&self) -> f64 {
        self.bond_length
    }

    /// Periodic-lattice pair vectors; empty for hand-built graphs.
    pub fn cell_pairs(&self) -> &[CellPair] {
        &self.cell_pairs
    }

    pub fn bonds_of(&self, class: BondClass) -> impl Iterator<Item = &Bond> {
        self.bonds.iter().filter(move |b| b.class == class)
    }

    /// Site indices of trimer `id` in construction order.
    pub fn trimer_sites(&self, id: usize) -> Vec<usize> {
        (0..self.sites.len())
            .filter(|&i| self.sites[i].trimer == Some(id))
            .collect()
    }

    /// Unit vectors of the strong bonds of the first trimer, in bond order.
    /// These are the fit directions `a_pq/|a_pq|`.
    pub fn bond_directions(&self) -> Vec<Vec2> {
        let first = self.sites.iter().find_map(|s| s.trimer);
        self.bonds
            .iter()
            .filter(|b| b.class == BondClass::Strong && self.sites[b.p].trimer == first)
            .map(|b| b.displacement.normalize())
            .collect()
    }

    pub fn position(&self, i: usize) -> Vec2 {
        self.sites[i].position
    }
}

/// Reciprocal vectors of a triangular lattice with spacing `2a`, oriented as
/// the standard beam geometry.
pub fn reciprocal_for_spacing(a: f64) -> [Vec2; 3] {
    let g = 2.0 * PI / (3f64.sqrt() * a);
    std::array::from_fn(|i| {
        let th = PI / 2.0 + TAU * i as f64 / 3.0;
        Vec2::new(g * th.cos(), g * th.sin())
    })
}

/// Builds `rows × cols` superlattice cells (cols along `a1`, rows along `a2`).
///
/// Without the fourth site the cluster is a patch of kagome lattice. Bonds join
/// every pair of sites one SW spacing apart (before breathing); pairs in the
/// same trimer are strong, all others weak. Breathing moves each trimer site a
/// fraction `δ` of the way toward its centroid.
pub fn build_cluster(
    spec: &SuperlatticeSpec,
    rows: usize,
    cols: usize,
    include_d_site: bool,
) -> Result<ClusterGraph> {
    if rows == 0 || cols == 0 {
        return Err(invalid(format!("cluster needs at least 1x1 cells, got {rows}x{cols}")));
    }
    check_breathing(spec.breathing)?;
    let a = spec.site_spacing();
    let (c1, c2) = spec.cell_vectors();
    let origin = spec.sw.origin();
    let delta = spec.breathing;
    let centroid = spec.centroid_offset();

    let mut undistorted = Vec::new();
    let mut sites = Vec::new();
    for j in 0..rows {
        for i in 0..cols {
            let cell = j * cols + i;
            let r0 = origin + c1 * i as f64 + c2 * j as f64;
            let centre = r0 + centroid;
            for (label, off) in spec.trimer_offsets() {
                let u = r0 + off;
                undistorted.push(u);
                sites.push(Site {
                    label,
                    position: u + (centre - u) * delta,
                    trimer: Some(cell),
                });
            }
            if include_d_site {
                let (label, off) = spec.fourth_offset();
                undistorted.push(r0 + off);
                sites.push(Site {
                    label,
                    position: r0 + off,
                    trimer: None,
                });
            }
        }
    }

    let mut bonds = Vec::new();
    for p in 0..sites.len() {
        for q in (p + 1)..sites.len() {
            let d = (undistorted[p] - undistorted[q]).norm();
            if (d - a).abs() < 1e-9 * a {
                let same = sites[p].trimer.is_some() && sites[p].trimer == sites[q].trimer;
                let class = if same { BondClass::Strong } else { BondClass::Weak };
                bonds.push((p, q, class));
            }
        }
    }

    let mut graph = ClusterGraph::from_parts(sites, &bonds, spec.reciprocal(), a, rows * cols)?;
    graph.cell_pairs = cell_pairs(spec);
    Ok(graph)
}

fn cell_pairs(spec: &SuperlatticeSpec) -> Vec<CellPair> {
    let a = spec.site_spacing();
    let (c1, c2) = spec.cell_vectors();
    let centroid = spec.centroid_offset();
    let offs = spec.trimer_offsets();
    let moved: Vec<Vec2> = offs
        .iter()
        .map(|(_, u)| u + (centroid - u) * spec.breathing)
        .collect();
    let mut out = Vec::new();
    for p in 0..3 {
        for q in (p + 1)..3 {
            let mut inter = None;
            'search: for m in -1i32..=1 {
                for n in -1i32..=1 {
                    if m == 0 && n == 0 {
                        continue;
                    }
                    let shift = c1 * m as f64 + c2 * n as f64;
                    let d = offs[p].1 + shift - offs[q].1;
                    if (d.norm() - a).abs() < 1e-9 * a {
                        inter = Some(moved[p] + shift - moved[q]);
                        break 'search;
                    }
                }
            }
            out.push(CellPair {
                p: offs[p].0,
                q: offs[q].0,
                intra: moved[p] - moved[q],
                inter: inter.expect("every kagome pair type has one inter-trimer bond"),
            });
        }
    }
    out
}

/// Rotation by angle `theta` about the origin.
pub fn rotate(v: Vec2, theta: f64) -> Vec2 {
    let (s, c) = theta.sin_cos();
    Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}
