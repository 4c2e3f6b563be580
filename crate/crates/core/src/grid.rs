//! Auxiliary lattices, point classification and the discrete grid boundary.

use crate::error::{DpmError, Result};
use crate::geometry::{CurvePoint, Geometry, Point};
use crate::operators::{DiscreteOperator, EdgeClosure, StencilKind};

/// Uniform square lattice of `nx * ny` nodes. The outermost ring of nodes
/// carries closure data; the remaining nodes are the interior.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxiliaryGrid {
    pub xmin: f64,
    pub ymin: f64,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl AuxiliaryGrid {
    /// Lattice covering `[x0, x1] x [y0, y1]` with `nx` nodes along x. The
    /// y-extent must be an integer multiple of the resulting spacing.
    pub fn new((x0, x1): (f64, f64), (y0, y1): (f64, f64), nx: usize) -> Result<AuxiliaryGrid> {
        if nx < 3 || !(x1 > x0) || !(y1 > y0) {
            return Err(DpmError::InvalidInput("lattice needs at least 3 nodes and a positive extent".into()));
        }
        let h = (x1 - x0) / (nx - 1) as f64;
        let cells = (y1 - y0) / h;
        let ny_cells = cells.round();
        if (cells - ny_cells).abs() > 1e-9 * cells.max(1.0) || ny_cells < 2.0 {
            return Err(DpmError::InvalidInput(format!(
                "y-extent {} is not a multiple of the spacing {h}",
                y1 - y0
            )));
        }
        Ok(AuxiliaryGrid { xmin: x0, ymin: y0, h, nx, ny: ny_cells as usize + 1 })
    }

    pub fn with_spacing(xmin: f64, ymin: f64, h: f64, nx: usize, ny: usize) -> Result<AuxiliaryGrid> {
        if nx < 3 || ny < 3 || !(h > 0.0) {
            return Err(DpmError::InvalidInput("lattice needs at least 3x3 nodes and positive spacing".into()));
        }
        Ok(AuxiliaryGrid { xmin, ymin, h, nx, ny })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn xmax(&self) -> f64 {
        self.xmin + (self.nx - 1) as f64 * self.h
    }

    pub fn ymax(&self) -> f64 {
        self.ymin + (self.ny - 1) as f64 * self.h
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    pub fn point(&self, i: usize, j: usize) -> Point {
        Point::new(self.xmin + i as f64 * self.h, self.ymin + j as f64 * self.h)
    }

    pub fn point_of(&self, k: usize) -> Point {
        let (i, j) = self.coords(k);
        self.point(i, j)
    }

    pub fn is_ring(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ny
    }

    pub fn is_ring_index(&self, k: usize) -> bool {
        let (i, j) = self.coords(k);
        self.is_ring(i, j)
    }

    /// Lattice indices of the interior nodes, row by row.
    pub fn interior(&self) -> Vec<usize> {
        let mut v = Vec::with_capacity((self.nx - 2) * (self.ny - 2));
        for j in 1..self.ny - 1 {
            for i in 1..self.nx - 1 {
                v.push(self.index(i, j));
            }
        }
        v
    }

    /// Lattice indices of the ring.
    pub fn ring(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.is_ring_index(k)).collect()
    }

    /// Index-aligned sub-lattice over columns `i0..=i1` and rows `j0..=j1`.
    pub fn sub_grid(&self, i0: usize, i1: usize, j0: usize, j1: usize) -> Result<AuxiliaryGrid> {
        if i1 >= self.nx || j1 >= self.ny || i1 < i0 + 2 || j1 < j0 + 2 {
            return Err(DpmError::InvalidInput("sub-lattice range out of bounds".into()));
        }
        let p = self.point(i0, j0);
        AuxiliaryGrid::with_spacing(p.x, p.y, self.h, i1 - i0 + 1, j1 - j0 + 1)
    }

    /// Smallest index-aligned sub-lattice containing `[-r, r]^2`.
    pub fn centered_sub_grid(&self, r: f64) -> Result<AuxiliaryGrid> {
        let tol = 1e-9;
        let i0 = ((-r - self.xmin) / self.h + tol).floor().max(0.0) as usize;
        let i1 = (((r - self.xmin) / self.h - tol).ceil() as usize).min(self.nx - 1);
        let j0 = ((-r - self.ymin) / self.h + tol).floor().max(0.0) as usize;
        let j1 = (((r - self.ymin) / self.h - tol).ceil() as usize).min(self.ny - 1);
        self.sub_grid(i0, i1, j0, j1)
    }
}

/// Which side of the interface a subdomain occupies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Inside,
    Outside,
}

/// Interior nodes belonging to the closed subdomain. Nodes within
/// `1e-12 h` of the curve are included.
pub fn classify_points(grid: &AuxiliaryGrid, geometry: &Geometry, region: Region) -> Vec<bool> {
    let tol = 1e-12 * grid.h;
    let mut m = vec![false; grid.len()];
    for k in grid.interior() {
        let d = geometry.indicator(grid.point_of(k));
        m[k] = match region {
            Region::Inside => d < tol,
            Region::Outside => -d < tol,
        };
    }
    m
}

/// Point sets of one subdomain on its lattice.
#[derive(Clone, Debug)]
pub struct PointSets {
    pub m_plus: Vec<bool>,
    pub m_minus: Vec<bool>,
    pub n_plus: Vec<bool>,
    pub n_minus: Vec<bool>,
    /// Discrete grid boundary, ordered by x-index then y-index.
    pub gamma: Vec<usize>,
    pub m_plus_nodes: Vec<usize>,
    pub n_plus_nodes: Vec<usize>,
}

impl PointSets {
    pub fn gamma_mask(&self) -> Vec<bool> {
        let mut g = vec![false; self.m_plus.len()];
        for &k in &self.gamma {
            g[k] = true;
        }
        g
    }
}

/// Build `N+`, `N-` and `gamma` from `M+` using the actual operator rows.
pub fn build_stencil_sets(
    grid: &AuxiliaryGrid,
    m_plus: Vec<bool>,
    kind: StencilKind,
    closure: EdgeClosure,
) -> Result<PointSets> {
    let op = DiscreteOperator::new(grid.clone(), kind, closure, 1.0, 0.0)?;
    let n = grid.len();
    let mut m_minus = vec![false; n];
    let mut n_plus = vec![false; n];
    let mut n_minus = vec![false; n];
    for k in grid.interior() {
        let plus = m_plus[k];
        m_minus[k] = !plus;
        for s in op.row_support(k) {
            if plus {
                n_plus[s] = true;
            } else {
                n_minus[s] = true;
            }
        }
    }
    let mut gamma: Vec<usize> = (0..n).filter(|&k| n_plus[k] && n_minus[k]).collect();
    gamma.sort_by_key(|&k| {
        let (i, j) = grid.coords(k);
        (i, j)
    });
    if let Some(&k) = gamma.iter().find(|&&k| grid.is_ring_index(k)) {
        let p = grid.point_of(k);
        return Err(DpmError::Clearance(format!(
            "grid boundary reaches the lattice edge at ({:.4}, {:.4})",
            p.x, p.y
        )));
    }
    if closure == EdgeClosure::OddReflection {
        if let Some(k) = (0..n).find(|&k| n_plus[k] && grid.is_ring_index(k)) {
            let p = grid.point_of(k);
            return Err(DpmError::Clearance(format!(
                "subdomain stencils reach the lattice edge at ({:.4}, {:.4})",
                p.x, p.y
            )));
        }
    }
    let m_plus_nodes = (0..n).filter(|&k| m_plus[k]).collect();
    let n_plus_nodes = (0..n).filter(|&k| n_plus[k]).collect();
    Ok(PointSets { m_plus, m_minus, n_plus, n_minus, gamma, m_plus_nodes, n_plus_nodes })
}

/// A grid-boundary node with its closest point on the interface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaNode {
    pub node: usize,
    pub position: Point,
    pub foot: CurvePoint,
    /// Signed distance along the outward normal of the enclosed region.
    pub distance: f64,
    pub dkappa: f64,
    pub ddkappa: f64,
}

pub fn attach_projections(grid: &AuxiliaryGrid, sets: &PointSets, geometry: &Geometry) -> Result<Vec<GammaNode>> {
    sets.gamma
        .iter()
        .map(|&k| {
            let p = grid.point_of(k);
            let pr = geometry.project(p)?;
            let (dkappa, ddkappa) = geometry.curvature_derivatives(pr.foot.arclength);
            Ok(GammaNode { node: k, position: p, foot: pr.foot, distance: pr.distance, dkappa, ddkappa })
        })
        .collect()
}
