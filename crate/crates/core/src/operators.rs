//! Finite-difference stencils, the implicit operator `lambda * lap_h - sigma`
//! and BDF time weights.

use crate::error::{DpmError, Result};
use crate::grid::AuxiliaryGrid;

/// Spatial discretization of the Laplacian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StencilKind {
    /// Second order, radius one.
    FivePoint,
    /// Fourth order, radius two along each axis.
    NinePoint,
}

impl StencilKind {
    pub fn for_order(order: usize) -> Result<StencilKind> {
        match order {
            2 => Ok(StencilKind::FivePoint),
            4 => Ok(StencilKind::NinePoint),
            o => Err(DpmError::UnsupportedOrder(o)),
        }
    }

    pub fn radius(self) -> usize {
        match self {
            StencilKind::FivePoint => 1,
            StencilKind::NinePoint => 2,
        }
    }
}

/// How wide-stencil rows next to the outer ring of the lattice are closed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeClosure {
    /// Odd reflection through the ring node. Keeps the operator diagonal in the
    /// sine basis; used where the ring is not a physical boundary.
    OddReflection,
    /// One-sided fourth-order rows; the ring carries physical boundary values.
    Physical,
}

/// Weights of a one-dimensional second-difference row at index `i` of an axis
/// with `n` lattice nodes, as `(offset, weight)` pairs scaled by `h^2`.
pub fn axis_weights(kind: StencilKind, closure: EdgeClosure, i: usize, n: usize) -> Result<Vec<(isize, f64)>> {
    if i == 0 || i + 1 >= n {
        return Err(DpmError::InvalidInput(format!("index {i} is not interior on an axis of {n} nodes")));
    }
    match kind {
        StencilKind::FivePoint => Ok(vec![(-1, 1.0), (0, -2.0), (1, 1.0)]),
        StencilKind::NinePoint => {
            let left = i == 1;
            let right = i + 2 == n;
            if left && right {
                return Err(DpmError::InvalidInput("wide stencil needs at least two interior nodes per axis".into()));
            }
            let one_sided: &[f64] = match closure {
                EdgeClosure::OddReflection => &[14.0, -29.0, 16.0, -1.0],
                EdgeClosure::Physical => &[10.0, -15.0, -4.0, 14.0, -6.0, 1.0],
            };
            if left || right {
                if one_sided.len() > n {
                    return Err(DpmError::InvalidInput(format!("axis of {n} nodes too short for the boundary row")));
                }
                let sign = if left { 1 } else { -1 };
                Ok(one_sided
                    .iter()
                    .enumerate()
                    .map(|(k, w)| (sign * (k as isize - 1), w / 12.0))
                    .collect())
            } else {
                Ok(vec![
                    (-2, -1.0 / 12.0),
                    (-1, 16.0 / 12.0),
                    (0, -30.0 / 12.0),
                    (1, 16.0 / 12.0),
                    (2, -1.0 / 12.0),
                ])
            }
        }
    }
}

/// Row of the discrete Laplacian at an interior node: `(di, dj, weight)`
/// with weights in units of `1/h^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct RowStencil {
    pub entries: Vec<(isize, isize, f64)>,
}

pub fn row_stencil(grid: &AuxiliaryGrid, i: usize, j: usize, kind: StencilKind, closure: EdgeClosure) -> Result<RowStencil> {
    let wx = axis_weights(kind, closure, i, grid.nx)?;
    let wy = axis_weights(kind, closure, j, grid.ny)?;
    let mut entries: Vec<(isize, isize, f64)> = Vec::with_capacity(wx.len() + wy.len());
    for (o, w) in wx {
        entries.push((o, 0, w));
    }
    for (o, w) in wy {
        if o == 0 {
            let c = entries.iter_mut().find(|e| e.0 == 0 && e.1 == 0).expect("centre entry");
            c.2 += w;
        } else {
            entries.push((0, o, w));
        }
    }
    Ok(RowStencil { entries })
}

/// The one-sided fourth-order row at a node adjacent to the lattice ring.
pub fn boundary_corrected_row(grid: &AuxiliaryGrid, i: usize, j: usize) -> Result<RowStencil> {
    let near = i == 1 || j == 1 || i + 2 == grid.nx || j + 2 == grid.ny;
    if !near || grid.is_ring(i, j) {
        return Err(DpmError::NotApplicable(format!("node ({i}, {j}) is not adjacent to the boundary")));
    }
    row_stencil(grid, i, j, StencilKind::NinePoint, EdgeClosure::Physical)
}

/// `h^2 lap_h u` at node `(i, j)` for a lattice vector `u`.
pub fn apply_laplacian(grid: &AuxiliaryGrid, u: &[f64], i: usize, j: usize, kind: StencilKind, closure: EdgeClosure) -> Result<f64> {
    let row = row_stencil(grid, i, j, kind, closure)?;
    Ok(row
        .entries
        .iter()
        .map(|&(di, dj, w)| w * u[grid.index((i as isize + di) as usize, (j as isize + dj) as usize)])
        .sum::<f64>()
        / (grid.h * grid.h))
}

/// `L = lambda * lap_h - sigma * I` on the interior of a lattice.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub grid: AuxiliaryGrid,
    pub kind: StencilKind,
    pub closure: EdgeClosure,
    pub lambda: f64,
    pub sigma: f64,
    wx: Vec<Vec<(isize, f64)>>,
    wy: Vec<Vec<(isize, f64)>>,
}

impl DiscreteOperator {
    pub fn new(grid: AuxiliaryGrid, kind: StencilKind, closure: EdgeClosure, lambda: f64, sigma: f64) -> Result<DiscreteOperator> {
        let table = |n: usize| -> Result<Vec<Vec<(isize, f64)>>> {
            (0..n)
                .map(|i| if i == 0 || i + 1 == n { Ok(Vec::new()) } else { axis_weights(kind, closure, i, n) })
                .collect()
        };
        let wx = table(grid.nx)?;
        let wy = table(grid.ny)?;
        Ok(DiscreteOperator { grid, kind, closure, lambda, sigma, wx, wy })
    }

    /// Row entries `(lattice index, coefficient)` of `L` at an interior node.
    pub fn row(&self, node: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (i, j) = self.grid.coords(node);
        let s = self.lambda / (self.grid.h * self.grid.h);
        let nx = self.grid.nx as isize;
        let xs = self.wx[i].iter().map(move |&(o, w)| ((node as isize + o) as usize, s * w));
        let ys = self.wy[j].iter().map(move |&(o, w)| ((node as isize + o * nx) as usize, s * w));
        xs.chain(ys).chain(std::iter::once((node, -self.sigma)))
    }

    /// Lattice indices touched by the row at `node`.
    pub fn row_support(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(node).map(|(k, _)| k)
    }

    pub fn apply_at(&self, u: &[f64], node: usize) -> f64 {
        self.row(node).map(|(k, c)| c * u[k]).sum()
    }

    /// `out[k] = (L u)[k]` for every `k` in `nodes`; other entries are zero.
    pub fn apply_on(&self, u: &[f64], nodes: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for &k in nodes {
            out[k] = self.apply_at(u, k);
        }
        out
    }

    /// One-dimensional weights along x at column `i`.
    pub fn x_weights(&self, i: usize) -> &[(isize, f64)] {
        &self.wx[i]
    }

    pub fn y_weights(&self, j: usize) -> &[(isize, f64)] {
        &self.wy[j]
    }
}

/// Finite-difference weights for derivatives `0..=m` at `z` from nodes `xs`.
pub fn fornberg_weights(z: f64, xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Backward weights for the `deriv`-th derivative at the newest of `levels`
/// equally spaced levels, newest first, for unit spacing.
pub fn backward_weights(deriv: usize, levels: usize) -> Result<Vec<f64>> {
    if levels <= deriv {
        return Err(DpmError::InsufficientHistory { have: levels, need: deriv + 1 });
    }
    let xs: Vec<f64> = (0..levels).map(|k| -(k as f64)).collect();
    Ok(fornberg_weights(0.0, &xs, deriv)[deriv].clone())
}

/// BDF weights `[a0, a1, ..., ak]`, newest level first, so that
/// `u_t ~ (a0 u^{n+1} + a1 u^n + ...) / dt`.
pub fn bdf_weights(k: usize) -> Result<Vec<f64>> {
    if !(1..=6).contains(&k) {
        return Err(DpmError::UnsupportedOrder(k));
    }
    backward_weights(1, k + 1)
}

/// Number of time levels used by the second-derivative surrogate of a given
/// spatial order.
pub fn second_derivative_levels(order: usize) -> Result<usize> {
    match order {
        2 => Ok(4),
        4 => Ok(6),
        o => Err(DpmError::UnsupportedOrder(o)),
    }
}

/// Diagonal shift `sigma = a0 / dt`.
pub fn sigma_of(k: usize, dt: f64) -> Result<f64> {
    Ok(bdf_weights(k)?[0] / dt)
}

/// Right-hand side `F = -f + (1/dt) sum_{j>=1} a_j u^{n+1-j}` of the implicit
/// step `(lambda lap_h - sigma) u^{n+1} = F`. `history` is newest first.
pub fn bdf_rhs(history: &[&[f64]], f: &[f64], k: usize, dt: f64) -> Result<Vec<f64>> {
    if history.len() < k {
        return Err(DpmError::InsufficientHistory { have: history.len(), need: k });
    }
    let a = bdf_weights(k)?;
    let mut out: Vec<f64> = f.iter().map(|v| -v).collect();
    for (j, u) in history.iter().take(k).enumerate() {
        let c = a[j + 1] / dt;
        for (o, v) in out.iter_mut().zip(u.iter()) {
            *o += c * v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn bdf_weights_match_reference_coefficients() {
        assert!(close(&bdf_weights(1).unwrap(), &[1.0, -1.0], 1e-14));
        assert!(close(&bdf_weights(2).unwrap(), &[1.5, -2.0, 0.5], 1e-14));
        assert!(close(&bdf_weights(3).unwrap(), &[11.0 / 6.0, -3.0, 1.5, -1.0 / 3.0], 1e-13));
        assert!(close(&bdf_weights(4).unwrap(), &[25.0 / 12.0, -4.0, 3.0, -4.0 / 3.0, 0.25], 1e-13));
        assert!((sigma_of(2, 0.1).unwrap() - 15.0).abs() < 1e-12);
        assert!((sigma_of(4, 0.5).unwrap() - 25.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn second_derivative_surrogates() {
        let w2 = backward_weights(2, second_derivative_levels(2).unwrap()).unwrap();
        assert!(close(&w2, &[2.0, -5.0, 4.0, -1.0], 1e-12));
        let w4 = backward_weights(2, second_derivative_levels(4).unwrap()).unwrap();
        let expect = [15.0 / 4.0, -77.0 / 6.0, 107.0 / 6.0, -13.0, 61.0 / 12.0, -5.0 / 6.0];
        assert!(close(&w4, &expect, 1e-11));
        assert!(matches!(backward_weights(2, 2), Err(DpmError::InsufficientHistory { .. })));
    }

    #[test]
    fn bdf2_rhs_matches_closed_form() {
        let dt = 0.2;
        let un = [1.0, 2.0];
        let unm1 = [0.5, -1.0];
        let f = [3.0, 4.0];
        let rhs = bdf_rhs(&[&un, &unm1], &f, 2, dt).unwrap();
        let sigma = 1.5 / dt;
        for i in 0..2 {
            let expect = -f[i] - sigma / 3.0 * (4.0 * un[i] - unm1[i]);
            assert!((rhs[i] - expect).abs() < 1e-12);
        }
        let un3 = [0.1, 0.2];
        let un4 = [0.3, 0.4];
        let rhs4 = bdf_rhs(&[&un, &unm1, &un3, &un4], &f, 4, dt).unwrap();
        let sigma = 25.0 / 12.0 / dt;
        for i in 0..2 {
            let expect = -f[i] - sigma / 25.0 * (48.0 * un[i] - 36.0 * unm1[i] + 16.0 * un3[i] - 3.0 * un4[i]);
            assert!((rhs4[i] - expect).abs() < 1e-11);
        }
        assert!(bdf_rhs(&[&un], &f, 2, dt).is_err());
    }

    #[test]
    fn corrected_row_is_exact_for_quintics() {
        let w = axis_weights(StencilKind::NinePoint, EdgeClosure::Physical, 1, 10).unwrap();
        for p in 0..=5i32 {
            let x0 = 1.0;
            let approx: f64 = w.iter().map(|&(o, c)| c * (x0 + o as f64).powi(p)).sum();
            let exact = if p >= 2 { (p * (p - 1)) as f64 * x0.powi(p - 2) } else { 0.0 };
            assert!((approx - exact).abs() < 1e-10, "degree {p}: {approx} vs {exact}");
        }
        let right = axis_weights(StencilKind::NinePoint, EdgeClosure::Physical, 8, 10).unwrap();
        assert_eq!(right[0], (1, 10.0 / 12.0));
    }

    #[test]
    fn five_point_rejects_boundary_correction_semantics() {
        let g = AuxiliaryGrid::new((0.0, 1.0), (0.0, 1.0), 11).unwrap();
        assert!(boundary_corrected_row(&g, 5, 5).is_err());
        let r = boundary_corrected_row(&g, 1, 1).unwrap();
        assert_eq!(r.entries.len(), 11);
        let r = boundary_corrected_row(&g, 1, 5).unwrap();
        assert_eq!(r.entries.len(), 10);
    }

    fn laplacian_error(n: usize, kind: StencilKind, closure: EdgeClosure) -> f64 {
        let g = AuxiliaryGrid::new((0.0, 1.0), (0.0, 1.0), n).unwrap();
        let u: Vec<f64> = (0..g.len())
            .map(|k| {
                let p = g.point_of(k);
                (1.3 * p.x).sin() * (0.7 * p.y + 0.2).exp()
            })
            .collect();
        let mut err: f64 = 0.0;
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let p = g.point(i, j);
                let exact = (0.49 - 1.69) * (1.3 * p.x).sin() * (0.7 * p.y + 0.2).exp();
                err = err.max((apply_laplacian(&g, &u, i, j, kind, closure).unwrap() - exact).abs());
            }
        }
        err
    }

    #[test]
    fn stencil_convergence_slopes() {
        let slope = |kind, closure| {
            let e1 = laplacian_error(21, kind, closure);
            let e2 = laplacian_error(41, kind, closure);
            (e1 / e2).log2()
        };
        let s2 = slope(StencilKind::FivePoint, EdgeClosure::Physical);
        let s4 = slope(StencilKind::NinePoint, EdgeClosure::Physical);
        assert!((s2 - 2.0).abs() <= 0.25, "five-point slope {s2}");
        assert!((s4 - 4.0).abs() <= 0.25, "nine-point slope {s4}");
    }

    #[test]
    fn operator_rows_match_apply() {
        let g = AuxiliaryGrid::new((-1.0, 1.0), (-1.0, 1.0), 9).unwrap();
        let op = DiscreteOperator::new(g.clone(), StencilKind::NinePoint, EdgeClosure::OddReflection, 2.0, 3.0).unwrap();
        let u: Vec<f64> = (0..g.len()).map(|k| (k as f64 * 0.37).sin()).collect();
        for j in 1..8 {
            for i in 1..8 {
                let k = g.index(i, j);
                let direct = 2.0 * apply_laplacian(&g, &u, i, j, StencilKind::NinePoint, EdgeClosure::OddReflection).unwrap()
                    - 3.0 * u[k];
                assert!((op.apply_at(&u, k) - direct).abs() < 1e-10);
            }
        }
    }
}
