//! Graded radial grids, Lagrange finite-element spaces and element quadrature.

use crate::error::{Error, Result};
use crate::integrate::gauss_legendre;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    Plasma,
    Vacuum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    pub region: Region,
    pub nodes: Vec<f64>,
    pub grading: f64,
}

/// Geometrically graded grid on `[start, end]`. The ratio is largest over
/// smallest element width; plasma grids cluster toward both ends, vacuum grids
/// toward `start` (the plasma edge).
pub fn make_grid(
    region: Region,
    start: f64,
    end: f64,
    n_elements: usize,
    grading_ratio: f64,
) -> Result<RadialGrid> {
    if !(1.0..=20.0).contains(&grading_ratio) {
        return Err(Error::BadGrading(grading_ratio));
    }
    if n_elements < 4 {
        return Err(Error::InvalidGrid(format!("need at least 4 elements, got {n_elements}")));
    }
    if !(end > start) {
        return Err(Error::InvalidGrid(format!("empty interval [{start}, {end}]")));
    }
    let n = n_elements;
    let level = |i: usize| match region {
        Region::Plasma => i.min(n - 1 - i),
        Region::Vacuum => i,
    };
    let top = (0..n).map(level).max().unwrap_or(0).max(1);
    let q = grading_ratio.powf(1.0 / top as f64);
    let widths: Vec<f64> = (0..n).map(|i| q.powi(level(i) as i32)).collect();
    let total: f64 = widths.iter().sum();
    let mut nodes = Vec::with_capacity(n + 1);
    nodes.push(start);
    let mut acc = 0.0;
    for w in &widths[..n - 1] {
        acc += w;
        nodes.push(start + (end - start) * acc / total);
    }
    nodes.push(end);
    Ok(RadialGrid { region, nodes, grading: grading_ratio })
}

impl RadialGrid {
    pub fn n_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn start(&self) -> f64 {
        self.nodes[0]
    }

    pub fn end(&self) -> f64 {
        *self.nodes.last().expect("grid has nodes")
    }

    /// Element midpoints, all strictly inside the region.
    pub fn midpoints(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

/// Lagrange basis values and derivatives on the reference element `[-1, 1]`.
pub fn reference_basis(order: usize, x: f64) -> ([f64; 3], [f64; 3]) {
    match order {
        1 => ([0.5 * (1.0 - x), 0.5 * (1.0 + x), 0.0], [-0.5, 0.5, 0.0]),
        _ => (
            [0.5 * x * (x - 1.0), 1.0 - x * x, 0.5 * x * (x + 1.0)],
            [x - 0.5, -2.0 * x, x + 0.5],
        ),
    }
}

/// A pinned (node, component) pair removed from the unknowns.
pub type Pin = (usize, usize);

/// Continuous Lagrange space with `components` scalar fields per node.
#[derive(Debug, Clone, PartialEq)]
pub struct FemSpace {
    pub grid: RadialGrid,
    pub order: usize,
    pub components: usize,
    pub pins: Vec<Pin>,
    // (node, component) -> free dof index
    dof: Vec<Option<usize>>,
    n_free: usize,
}

impl FemSpace {
    pub fn new(grid: RadialGrid, order: usize, components: usize, pins: Vec<Pin>) -> Result<Self> {
        if order != 1 && order != 2 {
            return Err(Error::InvalidParameter(format!("fem_order must be 1 or 2, got {order}")));
        }
        let n_nodes = order * grid.n_elements() + 1;
        let mut dof = vec![None; n_nodes * components];
        let mut next = 0;
        for node in 0..n_nodes {
            for c in 0..components {
                if !pins.contains(&(node, c)) {
                    dof[node * components + c] = Some(next);
                    next += 1;
                }
            }
        }
        Ok(Self { grid, order, components, pins, dof, n_free: next })
    }

    pub fn n_nodes(&self) -> usize {
        self.order * self.grid.n_elements() + 1
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn dof(&self, node: usize, component: usize) -> Option<usize> {
        self.dof[node * self.components + component]
    }

    /// Radius of a finite-element node (vertices and, for P2, midpoints).
    pub fn node_position(&self, node: usize) -> f64 {
        let e = (node / self.order).min(self.grid.n_elements() - 1);
        let local = node - e * self.order;
        let (a, b) = (self.grid.nodes[e], self.grid.nodes[e + 1]);
        a + (b - a) * local as f64 / self.order as f64
    }

    /// Global node indices of an element.
    pub fn element_nodes(&self, e: usize) -> impl Iterator<Item = usize> {
        let o = self.order;
        (0..=o).map(move |j| e * o + j)
    }

    /// Values and radial derivatives of the element basis at radius `r`.
    pub fn basis_at(&self, e: usize, r: f64) -> ([f64; 3], [f64; 3]) {
        let (a, b) = (self.grid.nodes[e], self.grid.nodes[e + 1]);
        let x = (2.0 * r - a - b) / (b - a);
        let (v, mut d) = reference_basis(self.order, x);
        d.iter_mut().for_each(|g| *g *= 2.0 / (b - a));
        (v, d)
    }

    /// Field value and derivative of component `c` at radius `r` in element `e`.
    pub fn eval(&self, u: &[f64], e: usize, c: usize, r: f64) -> (f64, f64) {
        let (v, d) = self.basis_at(e, r);
        let mut val = 0.0;
        let mut der = 0.0;
        for (j, node) in self.element_nodes(e).enumerate() {
            if let Some(i) = self.dof(node, c) {
                val += v[j] * u[i];
                der += d[j] * u[i];
            }
        }
        (val, der)
    }

    /// Element containing `r` (the last one for the right endpoint).
    pub fn locate(&self, r: f64) -> usize {
        let nodes = &self.grid.nodes;
        match nodes.binary_search_by(|v| v.total_cmp(&r)) {
            Ok(i) | Err(i) => i.saturating_sub(1).min(nodes.len() - 2),
        }
    }

    /// Gauss points per element; exact for polynomials of degree 2·order+4.
    pub fn quadrature_points(&self) -> usize {
        self.order + 3
    }
}

/// Quadrature point in physical coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub element: usize,
    pub r: f64,
    pub weight: f64,
    /// reference coordinate in [-1, 1]
    pub x: f64,
}

pub fn quadrature(space: &FemSpace) -> Vec<QuadPoint> {
    let rule = gauss_legendre(space.quadrature_points());
    let mut out = Vec::with_capacity(rule.len() * space.grid.n_elements());
    for (e, w) in space.grid.nodes.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let half = 0.5 * (b - a);
        for &(x, wt) in &rule {
            out.push(QuadPoint { element: e, r: 0.5 * (a + b) + half * x, weight: half * wt, x });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grids() {
        let g = make_grid(Region::Plasma, 0.0, 1.0, 4, 1.0).unwrap();
        assert_eq!(g.nodes, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let v = make_grid(Region::Vacuum, 1.0, 2.0, 4, 1.0).unwrap();
        assert_eq!(v.nodes, vec![1.0, 1.25, 1.5, 1.75, 2.0]);
    }

    #[test]
    fn graded_plasma_grid_halves_toward_ends() {
        let g = make_grid(Region::Plasma, 0.0, 1.0, 8, 2.0).unwrap();
        let w: Vec<f64> = g.nodes.windows(2).map(|p| p[1] - p[0]).collect();
        // geometric sum oracle: widths w0 q^{0,1,2,3,3,2,1,0}, q = 2^{1/3}
        let q = 2f64.powf(1.0 / 3.0);
        let w0 = 1.0 / (2.0 * (1.0 + q + q * q + q * q * q));
        for i in 0..8 {
            let lvl = i.min(7 - i) as i32;
            assert!((w[i] - w0 * q.powi(lvl)).abs() < 1e-14);
            assert!((w[i] - w[7 - i]).abs() < 1e-14);
        }
        assert!((w[3] / w[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn grid_errors() {
        assert!(matches!(make_grid(Region::Plasma, 0.0, 1.0, 8, 0.5), Err(Error::BadGrading(_))));
        assert!(matches!(make_grid(Region::Plasma, 0.0, 1.0, 8, 21.0), Err(Error::BadGrading(_))));
        assert!(matches!(make_grid(Region::Plasma, 0.0, 1.0, 3, 1.0), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn quadrature_exactness() {
        let g = make_grid(Region::Plasma, 0.0, 1.0, 16, 3.0).unwrap();
        let s = FemSpace::new(g, 2, 1, vec![]).unwrap();
        let q = quadrature(&s);
        assert!(q.iter().all(|p| p.r > 0.0));
        let int = |f: &dyn Fn(f64) -> f64| q.iter().map(|p| p.weight * f(p.r)).sum::<f64>();
        assert!((int(&|r| r) - 0.5).abs() < 1e-15);
        assert!((int(&|r| r.powi(3)) - 0.25).abs() < 1e-15);
        assert!((int(&|r| r.powi(6)) - 1.0 / 7.0).abs() < 1e-15);
        let sing = int(&|r| (r * (1.0 - r)).powi(2) / r);
        assert!((sing - 1.0 / 12.0).abs() < 1e-10);
    }

    #[test]
    fn dof_counts_and_partition_of_unity() {
        let g = make_grid(Region::Plasma, 0.0, 1.0, 10, 2.0).unwrap();
        let s = FemSpace::new(g.clone(), 2, 3, vec![(0, 0), (0, 2)]).unwrap();
        assert_eq!(s.n_free(), 3 * 21 - 2);
        assert!(s.dof(0, 0).is_none() && s.dof(0, 1).is_some());
        for &x in &[-1.0, -0.3, 0.4, 1.0] {
            for order in [1, 2] {
                let (v, d) = reference_basis(order, x);
                assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-15);
                assert!(d.iter().sum::<f64>().abs() < 1e-15);
            }
        }
        let p1 = FemSpace::new(g, 1, 1, vec![(10, 0)]).unwrap();
        assert_eq!(p1.n_free(), 10);
        assert!((p1.node_position(10) - 1.0).abs() < 1e-15);
    }
}
