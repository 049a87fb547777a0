//! Per-mode quadratic forms: ideal energy K0, viscous dissipation K1 (unit s)
//! and the density-weighted mass M, with the vacuum energy condensed onto the
//! plasma-edge displacement.
//!
//! Every energy density is a weighted sum of squares
//! `w(r) * (a · u' + b · u)²` with `u = (ξ, η, ζ)`; assembly, the
//! Euler–Lagrange residual and the tests all share that single description.

use crate::banded::BandMatrix;
use crate::equilibrium::Equilibrium;
use crate::error::{Error, Result};
use crate::mesh::{make_grid, quadrature, FemSpace, Pin, RadialGrid, Region};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const TWO_PI_SQ: f64 = 2.0 * PI * PI;

pub const XI: usize = 0;
pub const ETA: usize = 1;
pub const ZETA: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModePair {
    pub m: i64,
    pub k: i64,
}

impl ModePair {
    pub fn new(m: i64, k: i64) -> Self {
        Self { m, k }
    }

    pub fn reflected(self) -> Self {
        Self { m: -self.m, k: -self.k }
    }
}

impl std::fmt::Display for ModePair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.m, self.k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viscosity {
    pub epsilon: f64,
    pub delta: f64,
}

impl Viscosity {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon > 0.0 && self.delta > 0.0 {
            Ok(())
        } else {
            Err(Error::NonPositiveViscosity { epsilon: self.epsilon, delta: self.delta })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub n_elements_plasma: usize,
    pub n_elements_vacuum: usize,
    pub fem_order: usize,
    pub grading_ratio: f64,
}

/// Equilibrium quantities at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub r: f64,
    pub p: f64,
    pub dp: f64,
    pub b: f64,
    pub rho: f64,
    pub gamma: f64,
}

impl Sample {
    pub fn at(eq: &Equilibrium, r: f64) -> Self {
        Self {
            r,
            p: eq.p(r),
            dp: eq.dp(r),
            b: eq.btheta(r),
            rho: eq.rho(r),
            gamma: eq.gamma,
        }
    }
}

/// One weighted square `weight * (a · u' + b · u)²`; the weight includes the
/// 2π² prefactor and the radial measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub weight: f64,
    pub a: [f64; 3],
    pub b: [f64; 3],
}

impl Term {
    fn new(weight: f64, a: [f64; 3], b: [f64; 3]) -> Self {
        Self { weight, a, b }
    }

    pub fn combination(&self, u: [f64; 3], du: [f64; 3]) -> f64 {
        (0..3).map(|c| self.a[c] * du[c] + self.b[c] * u[c]).sum()
    }
}

/// s-independent plasma terms of the energy.
pub fn ideal_terms(mode: ModePair, s: &Sample) -> Vec<Term> {
    let (m, k) = (mode.m as f64, mode.k as f64);
    let r = s.r;
    let b = s.b;
    let gp = s.gamma * s.p;
    let mut t = Vec::with_capacity(4);
    if mode.m == 0 {
        t.push(Term::new(TWO_PI_SQ * 2.0 * s.dp, [0.0; 3], [1.0, 0.0, 0.0]));
        t.push(Term::new(TWO_PI_SQ * b * b * r, [-1.0, 0.0, 0.0], [1.0 / r, k, 0.0]));
        t.push(Term::new(TWO_PI_SQ * gp * r, [1.0, 0.0, 0.0], [1.0 / r, -k, 0.0]));
    } else {
        let d = m * m + k * k * r * r;
        t.push(Term::new(TWO_PI_SQ * d * r, [-k * b * r / d, 0.0, 0.0], [k * b / d, b / r, 0.0]));
        t.push(Term::new(TWO_PI_SQ * gp * r, [1.0, 0.0, 0.0], [1.0 / r, -k, m / r]));
        t.push(Term::new(TWO_PI_SQ * m * m * b * b / (r * d), [-r, 0.0, 0.0], [1.0, 0.0, 0.0]));
        t.push(Term::new(
            TWO_PI_SQ * (2.0 * s.dp + m * m * b * b / r),
            [0.0; 3],
            [1.0, 0.0, 0.0],
        ));
    }
    t
}

/// Viscous dissipation terms for unit s.
pub fn dissipation_terms(mode: ModePair, visc: Viscosity, s: &Sample) -> Vec<Term> {
    let (m, k) = (mode.m as f64, mode.k as f64);
    let r = s.r;
    let we = TWO_PI_SQ * visc.epsilon * r;
    let ws = we * 2.0 / 9.0;
    vec![
        Term::new(ws, [-2.0, 0.0, 0.0], [1.0 / r, -k, m / r]),
        Term::new(ws, [1.0, 0.0, 0.0], [-2.0 / r, -k, -2.0 * m / r]),
        Term::new(ws, [1.0, 0.0, 0.0], [1.0 / r, 2.0 * k, m / r]),
        Term::new(we, [0.0, 0.0, -1.0], [m / r, 0.0, 1.0 / r]),
        Term::new(we, [0.0, 1.0, 0.0], [k, 0.0, 0.0]),
        Term::new(we, [0.0; 3], [0.0, m / r, -k]),
        Term::new(TWO_PI_SQ * visc.delta * r, [1.0, 0.0, 0.0], [1.0 / r, -k, m / r]),
    ]
}

pub fn mass_terms(s: &Sample) -> Vec<Term> {
    let w = TWO_PI_SQ * s.rho * s.r;
    vec![
        Term::new(w, [0.0; 3], [1.0, 0.0, 0.0]),
        Term::new(w, [0.0; 3], [0.0, 1.0, 0.0]),
        Term::new(w, [0.0; 3], [0.0, 0.0, 1.0]),
    ]
}

/// Vacuum energy density for the scalar Q̂_r (stored in component 0).
fn vacuum_terms(mode: ModePair, r: f64) -> Vec<Term> {
    let (m, k) = (mode.m as f64, mode.k as f64);
    let d = m * m + k * k * r * r;
    vec![
        Term::new(TWO_PI_SQ * r, [0.0; 3], [1.0, 0.0, 0.0]),
        Term::new(TWO_PI_SQ * r / d, [r, 0.0, 0.0], [1.0, 0.0, 0.0]),
    ]
}

/// Half-bandwidth of node-interleaved dofs.
fn band_of(space: &FemSpace) -> usize {
    space.components * (space.order + 1) - 1
}

/// Generic assembly of `Σ_q Σ_terms` over a space; `terms` is called once per
/// quadrature point with the point's global index and radius.
fn assemble_with<F>(space: &FemSpace, n: usize, kd: usize, dof_of: impl Fn(usize, usize) -> Option<(usize, f64)>, terms: F) -> BandMatrix
where
    F: Fn(usize, f64) -> Vec<Term>,
{
    let nc = space.components;
    let nloc = nc * (space.order + 1);
    let mut out = BandMatrix::zeros(n, kd);
    let mut local = vec![0.0; nloc * nloc];
    let mut l = vec![0.0; nloc];
    let qp = quadrature(space);
    let per = space.quadrature_points();
    for (e, chunk) in qp.chunks(per).enumerate() {
        local.iter_mut().for_each(|v| *v = 0.0);
        for (iq, q) in chunk.iter().enumerate() {
            let (phi, dphi) = space.basis_at(e, q.r);
            for t in terms(e * per + iq, q.r) {
                if t.weight == 0.0 {
                    continue;
                }
                for j in 0..=space.order {
                    for c in 0..nc {
                        l[j * nc + c] = t.a[c] * dphi[j] + t.b[c] * phi[j];
                    }
                }
                let w = q.weight * t.weight;
                for i in 0..nloc {
                    if l[i] == 0.0 {
                        continue;
                    }
                    let wi = w * l[i];
                    for j in 0..nloc {
                        local[i * nloc + j] += wi * l[j];
                    }
                }
            }
        }
        let nodes: Vec<usize> = space.element_nodes(e).collect();
        let map: Vec<Option<(usize, f64)>> = (0..nloc).map(|i| dof_of(nodes[i / nc], i % nc)).collect();
        for i in 0..nloc {
            let Some((gi, si)) = map[i] else { continue };
            for j in 0..nloc {
                let Some((gj, sj)) = map[j] else { continue };
                let v = local[i * nloc + j] * si * sj;
                if v != 0.0 {
                    out.add(gi, gj, v);
                }
            }
        }
    }
    out
}

fn plasma_assembly<F>(space: &FemSpace, terms: F) -> BandMatrix
where
    F: Fn(usize, f64) -> Vec<Term>,
{
    assemble_with(space, space.n_free(), band_of(space), |node, c| space.dof(node, c).map(|i| (i, 1.0)), terms)
}

/// Axis pins required by the mode: ξ and ζ vanish on the axis for m = 0, all
/// three components for m ≠ 0.
pub fn required_pins(mode: ModePair) -> Vec<Pin> {
    if mode.m == 0 {
        vec![(0, XI), (0, ZETA)]
    } else {
        vec![(0, XI), (0, ETA), (0, ZETA)]
    }
}

pub fn plasma_space(grid: RadialGrid, order: usize, mode: ModePair) -> Result<FemSpace> {
    FemSpace::new(grid, order, 3, required_pins(mode))
}

/// Scalar vacuum space with Q̂_r pinned at the wall.
pub fn vacuum_space(grid: RadialGrid, order: usize) -> Result<FemSpace> {
    let last = order * grid.n_elements();
    FemSpace::new(grid, order, 1, vec![(last, 0)])
}

fn check_pins(space: &FemSpace, mode: ModePair) -> Result<()> {
    let mut want = required_pins(mode);
    let mut have = space.pins.clone();
    want.sort_unstable();
    have.sort_unstable();
    if space.components != 3 || want != have {
        return Err(Error::ModeSpaceMismatch(format!(
            "mode {mode} needs axis pins {want:?}, space has {have:?}"
        )));
    }
    Ok(())
}

/// Mass form with an arbitrary density; used to test the constraint in isolation.
pub fn assemble_mass_with_density(space: &FemSpace, rho: impl Fn(f64) -> f64) -> BandMatrix {
    plasma_assembly(space, |_, r| {
        let w = TWO_PI_SQ * rho(r) * r;
        vec![
            Term::new(w, [0.0; 3], [1.0, 0.0, 0.0]),
            Term::new(w, [0.0; 3], [0.0, 1.0, 0.0]),
            Term::new(w, [0.0; 3], [0.0, 0.0, 1.0]),
        ]
    })
}

pub fn assemble_constraint(eq: &Equilibrium, space: &FemSpace, mode: ModePair) -> Result<BandMatrix> {
    check_pins(space, mode)?;
    Ok(plasma_assembly(space, |_, r| mass_terms(&Sample::at(eq, r))))
}

pub fn assemble_dissipation(
    eq: &Equilibrium,
    space: &FemSpace,
    mode: ModePair,
    visc: Viscosity,
) -> Result<BandMatrix> {
    visc.validate()?;
    check_pins(space, mode)?;
    Ok(plasma_assembly(space, |_, r| dissipation_terms(mode, visc, &Sample::at(eq, r))))
}

/// Ideal energy including the condensed vacuum energy on the edge ξ dof.
pub fn assemble_ideal(
    eq: &Equilibrium,
    space: &FemSpace,
    vac_space: &FemSpace,
    mode: ModePair,
) -> Result<BandMatrix> {
    check_pins(space, mode)?;
    let mut k0 = plasma_assembly(space, |_, r| ideal_terms(mode, &Sample::at(eq, r)));
    if mode.m != 0 {
        let w = condense_vacuum(eq, vac_space, mode)?.weight;
        let t = edge_xi_dof(space);
        k0.add(t, t, w);
    }
    Ok(k0)
}

fn edge_xi_dof(space: &FemSpace) -> usize {
    space.dof(space.n_nodes() - 1, XI).expect("edge displacement is never pinned")
}

/// Result of eliminating the interior vacuum unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct VacuumCondensation {
    /// coefficient of ξ(r0)² added to the ideal energy
    pub weight: f64,
    /// Schur complement for a unit Q̂_r(r0)
    pub unit_trace_weight: f64,
    /// Q̂_r(r0) per unit ξ(r0): m B̂_θ(r0) / r0
    pub coupling: f64,
    /// minimizing interior Q̂_r for a unit trace, at vacuum nodes 1..n-2
    pub interior: Vec<f64>,
    pub interior_radii: Vec<f64>,
}

impl VacuumCondensation {
    /// Full vacuum field profile (trace, interior, wall) for a given edge
    /// displacement.
    pub fn field(&self, xi_edge: f64, r0: f64, rw: f64) -> Vec<(f64, f64)> {
        let q0 = self.coupling * xi_edge;
        let mut out = vec![(r0, q0)];
        out.extend(self.interior_radii.iter().zip(&self.interior).map(|(&r, &q)| (r, q * q0)));
        out.push((rw, 0.0));
        out
    }
}

pub fn condense_vacuum(eq: &Equilibrium, vac_space: &FemSpace, mode: ModePair) -> Result<VacuumCondensation> {
    if mode.m == 0 {
        return Err(Error::ModeSpaceMismatch("vacuum condensation requires m ≠ 0".into()));
    }
    let n = vac_space.n_free();
    let v = assemble_with(vac_space, n, band_of(vac_space), |node, c| vac_space.dof(node, c).map(|i| (i, 1.0)), |_, r| vacuum_terms(mode, r));
    // dof 0 is the trace at r0; the remaining free dofs are interior
    let ni = n - 1;
    let mut vii = BandMatrix::zeros(ni, v.bandwidth());
    for i in 0..ni {
        for j in i.saturating_sub(v.bandwidth())..(i + v.bandwidth() + 1).min(ni) {
            let x = v.get(i + 1, j + 1);
            if x != 0.0 {
                vii.add(i, j, x);
            }
        }
    }
    let vi0: Vec<f64> = (0..ni).map(|i| v.get(i + 1, 0)).collect();
    let chol = vii.cholesky().map_err(|_| Error::SingularVacuumBlock)?;
    let sol = chol.solve(&vi0);
    let schur = v.get(0, 0) - vi0.iter().zip(&sol).map(|(a, b)| a * b).sum::<f64>();
    let r0 = eq.r0();
    let coupling = mode.m as f64 * eq.bhat(r0) / r0;
    let interior_radii = (1..=ni).map(|node| vac_space.node_position(node)).collect();
    Ok(VacuumCondensation {
        weight: schur.max(0.0) * coupling * coupling,
        unit_trace_weight: schur,
        coupling,
        interior: sol.iter().map(|x| -x).collect(),
        interior_radii,
    })
}

/// Assembled forms of one mode.
#[derive(Debug, Clone)]
pub struct ModeForms {
    pub mode: ModePair,
    pub k0: BandMatrix,
    pub k1: BandMatrix,
    pub mass: BandMatrix,
    /// Schur weight on the edge ξ dof (zero for m = 0 and for the coupled variant)
    pub vacuum_weight: f64,
    pub space: FemSpace,
    pub viscosity: Viscosity,
    /// index of ξ(r0)
    pub edge_dof: usize,
    /// number of plasma unknowns; vacuum unknowns (coupled variant) follow
    pub n_plasma: usize,
    pub vacuum: Option<VacuumCondensation>,
}

impl ModeForms {
    pub fn dim(&self) -> usize {
        self.k0.dim()
    }

    /// vᵀ(K0 + sK1)v.
    pub fn energy(&self, v: &[f64], s: f64) -> f64 {
        self.k0.quad(v) + s * self.k1.quad(v)
    }

    pub fn dissipation(&self, v: &[f64]) -> f64 {
        self.k1.quad(v)
    }

    pub fn constraint(&self, v: &[f64]) -> f64 {
        self.mass.quad(v)
    }

    pub fn pencil(&self, s: f64) -> BandMatrix {
        self.k0.combine(1.0, &self.k1, s)
    }

    /// ‖K0‖ + s‖K1‖ in the infinity norm.
    pub fn scale(&self, s: f64) -> f64 {
        self.k0.norm_inf() + s * self.k1.norm_inf()
    }

    /// Field component values at the finite-element nodes, zero at pins.
    pub fn nodal_field(&self, v: &[f64], component: usize) -> Vec<(f64, f64)> {
        (0..self.space.n_nodes())
            .map(|node| {
                let val = self.space.dof(node, component).map_or(0.0, |i| v[i]);
                (self.space.node_position(node), val)
            })
            .collect()
    }

    /// Diagonal sign matrix mapping this mode's forms onto the reflected mode's:
    /// ξ is even, η and ζ are odd under (m, k) → (-m, -k).
    pub fn reflection_signs(&self) -> Vec<f64> {
        let mut s = vec![1.0; self.dim()];
        for node in 0..self.space.n_nodes() {
            for c in [ETA, ZETA] {
                if let Some(i) = self.space.dof(node, c) {
                    s[i] = -1.0;
                }
            }
        }
        s
    }
}

/// Assembler with a fixed equilibrium, meshes and viscosity; the equilibrium
/// is sampled once at all plasma quadrature nodes and reused for every mode.
#[derive(Debug, Clone)]
pub struct FormAssembler {
    pub eq: Equilibrium,
    pub disc: Discretization,
    pub viscosity: Viscosity,
    pub plasma_grid: RadialGrid,
    pub vacuum_grid: RadialGrid,
    // samples indexed by quadrature order (element-major)
    samples: Vec<Sample>,
}

impl FormAssembler {
    pub fn new(eq: &Equilibrium, disc: Discretization, viscosity: Viscosity) -> Result<Self> {
        viscosity.validate()?;
        let plasma_grid = make_grid(Region::Plasma, 0.0, eq.r0(), disc.n_elements_plasma, disc.grading_ratio)?;
        let vacuum_grid = make_grid(Region::Vacuum, eq.r0(), eq.rw, disc.n_elements_vacuum, disc.grading_ratio)?;
        let probe = plasma_space(plasma_grid.clone(), disc.fem_order, ModePair::new(0, 0))?;
        let samples = quadrature(&probe).iter().map(|q| Sample::at(eq, q.r)).collect();
        Ok(Self { eq: eq.clone(), disc, viscosity, plasma_grid, vacuum_grid, samples })
    }

    pub fn space(&self, mode: ModePair) -> Result<FemSpace> {
        plasma_space(self.plasma_grid.clone(), self.disc.fem_order, mode)
    }

    pub fn vacuum_space(&self) -> Result<FemSpace> {
        vacuum_space(self.vacuum_grid.clone(), self.disc.fem_order)
    }

    fn cached<F>(&self, space: &FemSpace, n: usize, kd: usize, dof_of: impl Fn(usize, usize) -> Option<(usize, f64)>, f: F) -> BandMatrix
    where
        F: Fn(&Sample) -> Vec<Term>,
    {
        assemble_with(space, n, kd, dof_of, |i, r| {
            let s = &self.samples[i];
            debug_assert!((s.r - r).abs() <= 1e-14 * (1.0 + r));
            f(s)
        })
    }

    /// Forms with the vacuum condensed onto ξ(r0).
    pub fn assemble(&self, mode: ModePair) -> Result<ModeForms> {
        let space = self.space(mode)?;
        let n = space.n_free();
        let kd = band_of(&space);
        let dof = |node, c| space.dof(node, c).map(|i| (i, 1.0));
        let mut k0 = self.cached(&space, n, kd, dof, |s| ideal_terms(mode, s));
        let k1 = self.cached(&space, n, kd, dof, |s| dissipation_terms(mode, self.viscosity, s));
        let mass = self.cached(&space, n, kd, dof, mass_terms);
        let edge_dof = edge_xi_dof(&space);
        let vacuum = if mode.m != 0 {
            Some(condense_vacuum(&self.eq, &self.vacuum_space()?, mode)?)
        } else {
            None
        };
        let vacuum_weight = vacuum.as_ref().map_or(0.0, |v| v.weight);
        k0.add(edge_dof, edge_dof, vacuum_weight);
        Ok(ModeForms { mode, k0, k1, mass, vacuum_weight, space, viscosity: self.viscosity, edge_dof, n_plasma: n, vacuum })
    }

    /// Forms with the interior vacuum unknowns kept (zero mass rows), for
    /// cross-validating the condensation.
    pub fn assemble_coupled(&self, mode: ModePair) -> Result<ModeForms> {
        if mode.m == 0 {
            return self.assemble(mode);
        }
        let space = self.space(mode)?;
        let np = space.n_free();
        let vspace = self.vacuum_space()?;
        let nv = vspace.n_free() - 1;
        let n = np + nv;
        let kd = band_of(&space).max(6);
        let dof = |node, c| space.dof(node, c).map(|i| (i, 1.0));
        let widen = |m: BandMatrix| {
            let mut out = BandMatrix::zeros(n, kd);
            for i in 0..np {
                for j in i.saturating_sub(kd)..(i + kd + 1).min(np) {
                    let v = m.get(i, j);
                    if v != 0.0 {
                        out.add(i, j, v);
                    }
                }
            }
            out
        };
        let mut k0 = widen(self.cached(&space, np, band_of(&space), dof, |s| ideal_terms(mode, s)));
        let k1 = widen(self.cached(&space, np, band_of(&space), dof, |s| dissipation_terms(mode, self.viscosity, s)));
        let mass = widen(self.cached(&space, np, band_of(&space), dof, mass_terms));
        let edge_dof = edge_xi_dof(&space);
        let r0 = self.eq.r0();
        let coupling = mode.m as f64 * self.eq.bhat(r0) / r0;
        let vmat = assemble_with(
            &vspace,
            n,
            kd,
            |node, _| {
                if node == 0 {
                    Some((edge_dof, coupling))
                } else {
                    vspace.dof(node, 0).map(|i| (np + i - 1, 1.0))
                }
            },
            |_, r| vacuum_terms(mode, r),
        );
        k0 = k0.combine(1.0, &vmat, 1.0);
        Ok(ModeForms { mode, k0, k1, mass, vacuum_weight: 0.0, space, viscosity: self.viscosity, edge_dof, n_plasma: np, vacuum: None })
    }
}
