//! Auxiliary problem solvers and the difference-potential operators built on
//! them.

use std::sync::Arc;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{DpmError, Result};
use crate::grid::PointSets;
use crate::operators::{DiscreteOperator, EdgeClosure, StencilKind};

/// Linear solver used for the auxiliary problem.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ApBackend {
    /// Spectral when admissible, sparse LU otherwise.
    #[default]
    Auto,
    /// Fast sine transform; requires an operator diagonal in the sine basis.
    Spectral,
    /// Sparse direct factorization.
    SparseLu,
}

/// Values imposed on the lattice ring by the auxiliary problem.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum ApClosure {
    #[default]
    Zero,
    Constant(f64),
}

struct DstEngine {
    mx: usize,
    my: usize,
    fx: Arc<dyn Fft<f64>>,
    fy: Arc<dyn Fft<f64>>,
    inv_eig: Vec<f64>,
}

fn axis_symbol(kind: StencilKind, theta: f64) -> f64 {
    match kind {
        StencilKind::FivePoint => 2.0 * theta.cos() - 2.0,
        StencilKind::NinePoint => (-2.0 * (2.0 * theta).cos() + 32.0 * theta.cos() - 30.0) / 12.0,
    }
}

/// In-place unnormalized DST-I of `count` contiguous sequences of length `m`.
fn dst_batch(data: &mut [f64], m: usize, fft: &dyn Fft<f64>) {
    let n = 2 * (m + 1);
    let count = data.len() / m;
    let pairs = count.div_ceil(2);
    let mut buf = vec![Complex::new(0.0, 0.0); pairs * n];
    for p in 0..pairs {
        let a = &data[2 * p * m..(2 * p + 1) * m];
        let b = if 2 * p + 1 < count { Some(&data[(2 * p + 1) * m..(2 * p + 2) * m]) } else { None };
        let chunk = &mut buf[p * n..(p + 1) * n];
        for k in 0..m {
            let z = Complex::new(a[k], b.map_or(0.0, |b| b[k]));
            chunk[k + 1] = z;
            chunk[n - 1 - k] = -z;
        }
    }
    fft.process(&mut buf);
    for p in 0..pairs {
        let chunk = &buf[p * n..(p + 1) * n];
        let has_b = 2 * p + 1 < count;
        for k in 0..m {
            let z = chunk[k + 1];
            data[2 * p * m + k] = -0.5 * z.im;
            if has_b {
                data[(2 * p + 1) * m + k] = 0.5 * z.re;
            }
        }
    }
}

fn transpose(src: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = src[r * cols + c];
        }
    }
    out
}

impl DstEngine {
    fn new(op: &DiscreteOperator) -> Result<DstEngine> {
        let (mx, my) = (op.grid.nx - 2, op.grid.ny - 2);
        let mut planner = FftPlanner::new();
        let fx = planner.plan_fft_forward(2 * (mx + 1));
        let fy = planner.plan_fft_forward(2 * (my + 1));
        let h2 = op.grid.h * op.grid.h;
        let sx: Vec<f64> = (1..=mx)
            .map(|k| axis_symbol(op.kind, std::f64::consts::PI * k as f64 / (mx + 1) as f64))
            .collect();
        let sy: Vec<f64> = (1..=my)
            .map(|k| axis_symbol(op.kind, std::f64::consts::PI * k as f64 / (my + 1) as f64))
            .collect();
        let scale = 4.0 / ((mx + 1) * (my + 1)) as f64;
        let mut inv_eig = Vec::with_capacity(mx * my);
        for b in &sy {
            for a in &sx {
                let e = op.lambda * (a + b) / h2 - op.sigma;
                if e.abs() < 1e-300 {
                    return Err(DpmError::Solver("singular auxiliary operator".into()));
                }
                inv_eig.push(scale / e);
            }
        }
        Ok(DstEngine { mx, my, fx, fy, inv_eig })
    }

    /// Solve in place on interior data laid out row by row.
    fn solve(&self, data: &mut Vec<f64>) {
        dst_batch(data, self.mx, &*self.fx);
        let mut t = transpose(data, self.my, self.mx);
        dst_batch(&mut t, self.my, &*self.fy);
        // `t` is indexed [i][j]
        for i in 0..self.mx {
            for j in 0..self.my {
                t[i * self.my + j] *= self.inv_eig[j * self.mx + i];
            }
        }
        dst_batch(&mut t, self.my, &*self.fy);
        *data = transpose(&t, self.mx, self.my);
        dst_batch(data, self.mx, &*self.fx);
    }
}

struct SparseEngine {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

enum Engine {
    Spectral(DstEngine),
    Sparse(SparseEngine),
}

/// Solver for the auxiliary problem `L u = q` on the lattice interior with
/// prescribed ring values.
pub struct ApSolver {
    op: DiscreteOperator,
    closure: ApClosure,
    interior: Vec<usize>,
    engine: Engine,
}

impl std::fmt::Debug for ApSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ApSolver")
            .field("backend", &self.backend())
            .field("closure", &self.closure)
            .field("nx", &self.op.grid.nx)
            .field("ny", &self.op.grid.ny)
            .finish()
    }
}

impl ApSolver {
    pub fn new(op: DiscreteOperator, backend: ApBackend, closure: ApClosure) -> Result<ApSolver> {
        let spectral_ok = op.kind == StencilKind::FivePoint || op.closure == EdgeClosure::OddReflection;
        let use_spectral = match backend {
            ApBackend::Auto => spectral_ok,
            ApBackend::Spectral if !spectral_ok => {
                return Err(DpmError::NotApplicable(
                    "spectral backend needs an operator diagonal in the sine basis".into(),
                ))
            }
            ApBackend::Spectral => true,
            ApBackend::SparseLu => false,
        };
        let interior = op.grid.interior();
        let engine = if use_spectral {
            Engine::Spectral(DstEngine::new(&op)?)
        } else {
            Engine::Sparse(Self::factor(&op, &interior)?)
        };
        Ok(ApSolver { op, closure, interior, engine })
    }

    fn factor(op: &DiscreteOperator, interior: &[usize]) -> Result<SparseEngine> {
        let n = interior.len();
        let mut pos = vec![usize::MAX; op.grid.len()];
        for (r, &k) in interior.iter().enumerate() {
            pos[k] = r;
        }
        let mut triplets = Vec::with_capacity(n * 13);
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(16);
        for (r, &k) in interior.iter().enumerate() {
            row.clear();
            for (c, w) in op.row(k) {
                if pos[c] == usize::MAX {
                    continue;
                }
                match row.iter_mut().find(|e| e.0 == pos[c]) {
                    Some(e) => e.1 += w,
                    None => row.push((pos[c], w)),
                }
            }
            for &(c, w) in &row {
                triplets.push(Triplet::new(r, c, w));
            }
        }
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| DpmError::Solver(format!("{e:?}")))?;
        let lu = a.sp_lu().map_err(|e| DpmError::Solver(format!("{e:?}")))?;
        Ok(SparseEngine { lu })
    }

    pub fn operator(&self) -> &DiscreteOperator {
        &self.op
    }

    pub fn closure(&self) -> ApClosure {
        self.closure
    }

    /// Backend actually in use.
    pub fn backend(&self) -> ApBackend {
        match self.engine {
            Engine::Spectral(_) => ApBackend::Spectral,
            Engine::Sparse(_) => ApBackend::SparseLu,
        }
    }

    /// True when the solution operator is linear, i.e. the ring is zero.
    pub fn is_linear(&self) -> bool {
        matches!(self.closure, ApClosure::Zero) || self.closure == ApClosure::Constant(0.0)
    }

    /// Solve with a zero ring for several right-hand sides. Entries of `q` on
    /// the ring are ignored.
    pub fn solve_homogeneous_many(&self, qs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let len = self.op.grid.len();
        if let Some(q) = qs.iter().find(|q| q.len() != len) {
            return Err(DpmError::InvalidInput(format!("right-hand side has length {}, expected {len}", q.len())));
        }
        match &self.engine {
            Engine::Spectral(e) => Ok(qs
                .iter()
                .map(|q| {
                    let mut d: Vec<f64> = self.interior.iter().map(|&k| q[k]).collect();
                    e.solve(&mut d);
                    self.scatter(&d)
                })
                .collect()),
            Engine::Sparse(e) => {
                let n = self.interior.len();
                let mut out = Vec::with_capacity(qs.len());
                for chunk in qs.chunks(32) {
                    let mut b = Mat::<f64>::from_fn(n, chunk.len(), |r, c| chunk[c][self.interior[r]]);
                    e.lu.solve_in_place(b.as_mut());
                    for c in 0..chunk.len() {
                        let d: Vec<f64> = (0..n).map(|r| b[(r, c)]).collect();
                        out.push(self.scatter(&d));
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn solve_homogeneous(&self, q: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve_homogeneous_many(&[q.to_vec()])?.pop().expect("one solution"))
    }

    /// Solve the auxiliary problem, ring values set by the closure.
    pub fn solve_ap(&self, q: &[f64]) -> Result<Vec<f64>> {
        match self.closure {
            ApClosure::Zero => self.solve_homogeneous(q),
            ApClosure::Constant(c) => {
                let grid = &self.op.grid;
                let mut ring = vec![0.0; grid.len()];
                for k in grid.ring() {
                    ring[k] = c;
                }
                let mut shifted = q.to_vec();
                for &k in &self.interior {
                    shifted[k] = q[k] - self.op.apply_at(&ring, k);
                }
                let mut u = self.solve_homogeneous(&shifted)?;
                for k in grid.ring() {
                    u[k] = c;
                }
                Ok(u)
            }
        }
    }

    fn scatter(&self, d: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.op.grid.len()];
        for (&k, v) in self.interior.iter().zip(d) {
            u[k] = *v;
        }
        u
    }
}

/// Difference potentials of one subdomain.
pub struct DifferencePotentials<'a> {
    ap: &'a ApSolver,
    sets: &'a PointSets,
}

impl<'a> DifferencePotentials<'a> {
    pub fn new(ap: &'a ApSolver, sets: &'a PointSets) -> DifferencePotentials<'a> {
        DifferencePotentials { ap, sets }
    }

    pub fn gamma_len(&self) -> usize {
        self.sets.gamma.len()
    }

    /// Lattice vector equal to `v` on the grid boundary and zero elsewhere.
    pub fn extend_by_zero(&self, v: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.ap.op.grid.len()];
        for (&k, x) in self.sets.gamma.iter().zip(v) {
            u[k] = *x;
        }
        u
    }

    pub fn trace(&self, u: &[f64]) -> Vec<f64> {
        self.sets.gamma.iter().map(|&k| u[k]).collect()
    }

    fn restrict_n_plus(&self, mut u: Vec<f64>) -> Vec<f64> {
        for (x, &keep) in u.iter_mut().zip(&self.sets.n_plus) {
            if !keep {
                *x = 0.0;
            }
        }
        u
    }

    fn chi_plus(&self, f: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; f.len()];
        for &k in &self.sets.m_plus_nodes {
            q[k] = f[k];
        }
        q
    }

    fn chi_plus_l(&self, v: &[f64]) -> Vec<f64> {
        self.ap.op.apply_on(v, &self.sets.m_plus_nodes)
    }

    fn check_gamma(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.gamma_len() {
            return Err(DpmError::InvalidInput(format!(
                "grid function has length {}, grid boundary has {} nodes",
                v.len(),
                self.gamma_len()
            )));
        }
        Ok(())
    }

    /// `G(chi+ F)` on `N+`.
    pub fn particular_solution(&self, f: &[f64]) -> Result<Vec<f64>> {
        Ok(self.restrict_n_plus(self.ap.solve_ap(&self.chi_plus(f))?))
    }

    /// `P v = v - G(chi+ L v)` on `N+` for a density `v` on the grid boundary.
    pub fn difference_potential(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_gamma(v)?;
        let ve = self.extend_by_zero(v);
        let g = self.ap.solve_ap(&self.chi_plus_l(&ve))?;
        let u: Vec<f64> = ve.iter().zip(&g).map(|(a, b)| a - b).collect();
        Ok(self.restrict_n_plus(u))
    }

    /// Trace of the difference potential.
    pub fn projection(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(&self.difference_potential(v)?))
    }

    /// `(I - P_gamma) v = Tr G(chi+ L v)`.
    pub fn boundary_residual(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_gamma(v)?;
        let ve = self.extend_by_zero(v);
        Ok(self.trace(&self.ap.solve_ap(&self.chi_plus_l(&ve))?))
    }

    /// Linear part of `I - P_gamma` applied to each column.
    pub fn boundary_columns(&self, cols: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let qs: Vec<Vec<f64>> = cols
            .iter()
            .map(|v| {
                self.check_gamma(v)?;
                Ok(self.chi_plus_l(&self.extend_by_zero(v)))
            })
            .collect::<Result<_>>()?;
        let sols = self.ap.solve_homogeneous_many(&qs)?;
        Ok(sols.iter().map(|u| self.trace(u)).collect())
    }

    /// Right-hand side `Tr G(chi+ F) - (I - P_gamma) e0` of the boundary
    /// equations for `u_gamma = e0 + E c`.
    pub fn bep_rhs(&self, f: &[f64], e0: &[f64]) -> Result<Vec<f64>> {
        self.check_gamma(e0)?;
        if self.ap.is_linear() {
            let le = self.chi_plus_l(&self.extend_by_zero(e0));
            let mut q = self.chi_plus(f);
            for &k in &self.sets.m_plus_nodes {
                q[k] -= le[k];
            }
            return Ok(self.trace(&self.ap.solve_homogeneous(&q)?));
        }
        let a = self.trace(&self.ap.solve_ap(&self.chi_plus(f))?);
        let b = self.boundary_residual(e0)?;
        Ok(a.iter().zip(&b).map(|(x, y)| x - y).collect())
    }

    /// Generalized Green's formula `u = P u_gamma + G(chi+ F)` on `N+`.
    pub fn reconstruct(&self, u_gamma: &[f64], f: &[f64]) -> Result<Vec<f64>> {
        self.check_gamma(u_gamma)?;
        if self.ap.is_linear() {
            let ve = self.extend_by_zero(u_gamma);
            let lv = self.chi_plus_l(&ve);
            let mut q = self.chi_plus(f);
            for &k in &self.sets.m_plus_nodes {
                q[k] -= lv[k];
            }
            let g = self.ap.solve_homogeneous(&q)?;
            let u: Vec<f64> = ve.iter().zip(&g).map(|(a, b)| a + b).collect();
            return Ok(self.restrict_n_plus(u));
        }
        let p = self.difference_potential(u_gamma)?;
        let g = self.particular_solution(f)?;
        Ok(p.iter().zip(&g).map(|(a, b)| a + b).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Circle, Geometry};
    use crate::grid::{build_stencil_sets, classify_points, AuxiliaryGrid, Region};
    use nalgebra::{DMatrix, DVector};

    /// Dense reference solve of the same interior system.
    fn dense_solve(op: &DiscreteOperator, q: &[f64]) -> Vec<f64> {
        let interior = op.grid.interior();
        let n = interior.len();
        let mut pos = vec![usize::MAX; op.grid.len()];
        for (r, &k) in interior.iter().enumerate() {
            pos[k] = r;
        }
        let mut a = DMatrix::<f64>::zeros(n, n);
        for (r, &k) in interior.iter().enumerate() {
            for (c, w) in op.row(k) {
                if pos[c] != usize::MAX {
                    a[(r, pos[c])] += w;
                }
            }
        }
        let b = DVector::from_iterator(n, interior.iter().map(|&k| q[k]));
        let x = a.lu().solve(&b).unwrap();
        let mut u = vec![0.0; op.grid.len()];
        for (r, &k) in interior.iter().enumerate() {
            u[k] = x[r];
        }
        u
    }

    fn rhs(n: usize) -> Vec<f64> {
        (0..n).map(|k| ((k * 7919) % 101) as f64 / 50.0 - 1.0).collect()
    }

    #[test]
    fn spectral_matches_dense_for_both_stencils() {
        let g = AuxiliaryGrid::new((-1.2, 1.2), (-1.2, 1.0), 13).unwrap();
        for kind in [StencilKind::FivePoint, StencilKind::NinePoint] {
            let op = DiscreteOperator::new(g.clone(), kind, EdgeClosure::OddReflection, 1.7, 40.0).unwrap();
            let ap = ApSolver::new(op.clone(), ApBackend::Spectral, ApClosure::Zero).unwrap();
            let q = rhs(g.len());
            let a = ap.solve_ap(&q).unwrap();
            let b = dense_solve(&op, &q);
            let err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(err < 1e-12, "{kind:?}: {err}");
        }
    }

    #[test]
    fn sparse_matches_dense_with_physical_rows() {
        let g = AuxiliaryGrid::new((-1.0, 1.0), (-1.0, 1.0), 12).unwrap();
        let op = DiscreteOperator::new(g.clone(), StencilKind::NinePoint, EdgeClosure::Physical, 1.0, 25.0).unwrap();
        assert!(matches!(
            ApSolver::new(op.clone(), ApBackend::Spectral, ApClosure::Zero),
            Err(DpmError::NotApplicable(_))
        ));
        let ap = ApSolver::new(op.clone(), ApBackend::Auto, ApClosure::Zero).unwrap();
        assert_eq!(ap.backend(), ApBackend::SparseLu);
        let q = rhs(g.len());
        let a = ap.solve_ap(&q).unwrap();
        let b = dense_solve(&op, &q);
        let err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn ap_solution_satisfies_operator_and_closure() {
        let g = AuxiliaryGrid::new((0.0, 1.0), (0.0, 1.0), 11).unwrap();
        let op = DiscreteOperator::new(g.clone(), StencilKind::FivePoint, EdgeClosure::OddReflection, 1.0, 10.0).unwrap();
        let ap = ApSolver::new(op.clone(), ApBackend::SparseLu, ApClosure::Constant(0.5)).unwrap();
        let q = rhs(g.len());
        let u = ap.solve_ap(&q).unwrap();
        for k in g.interior() {
            assert!((op.apply_at(&u, k) - q[k]).abs() < 1e-10);
        }
        for k in g.ring() {
            assert_eq!(u[k], 0.5);
        }
    }

    fn disk_setup(n: usize, kind: StencilKind) -> (ApSolver, PointSets) {
        let g = AuxiliaryGrid::new((-1.4, 1.4), (-1.4, 1.4), n).unwrap();
        let geom = Geometry::Circle(Circle::unit());
        let m = classify_points(&g, &geom, Region::Inside);
        let sets = build_stencil_sets(&g, m, kind, EdgeClosure::OddReflection).unwrap();
        let op = DiscreteOperator::new(g, kind, EdgeClosure::OddReflection, 1.0, 30.0).unwrap();
        (ApSolver::new(op, ApBackend::Auto, ApClosure::Zero).unwrap(), sets)
    }

    #[test]
    fn projection_is_idempotent_and_fixes_traces_of_solutions() {
        let (ap, sets) = disk_setup(22, StencilKind::NinePoint);
        let dp = DifferencePotentials::new(&ap, &sets);
        let v: Vec<f64> = (0..dp.gamma_len()).map(|k| (k as f64 * 0.71).cos()).collect();
        let pv = dp.projection(&v).unwrap();
        let ppv = dp.projection(&pv).unwrap();
        let err = pv.iter().zip(&ppv).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
        assert!(dp.projection(&vec![0.0; dp.gamma_len()]).unwrap().iter().all(|x| *x == 0.0));

        // Any grid function solving the homogeneous equation on M+ is reproduced.
        let u = dp.difference_potential(&v).unwrap();
        let tr = dp.trace(&u);
        let back = dp.projection(&tr).unwrap();
        let err = tr.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn reconstruction_solves_discrete_problem_when_bep_holds() {
        let (ap, sets) = disk_setup(20, StencilKind::FivePoint);
        let dp = DifferencePotentials::new(&ap, &sets);
        let op = ap.operator().clone();
        let n = op.grid.len();
        // Manufacture a discrete solution on N+.
        let mut w = vec![0.0; n];
        for &k in &sets.n_plus_nodes {
            let p = op.grid.point_of(k);
            w[k] = (p.x * 1.3).sin() + p.y * p.y;
        }
        let f = op.apply_on(&w, &sets.m_plus_nodes);
        let wg = dp.trace(&w);
        let zero = vec![0.0; wg.len()];
        let lhs = dp.boundary_residual(&wg).unwrap();
        let rhs = dp.bep_rhs(&f, &zero).unwrap();
        let err = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "boundary equation residual {err}");
        let u = dp.reconstruct(&wg, &f).unwrap();
        for &k in &sets.n_plus_nodes {
            assert!((u[k] - w[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_closure_gives_same_reconstruction() {
        let (ap0, sets) = disk_setup(20, StencilKind::NinePoint);
        let op = ap0.operator().clone();
        let ap1 = ApSolver::new(op.clone(), ApBackend::Auto, ApClosure::Constant(1.0)).unwrap();
        let d0 = DifferencePotentials::new(&ap0, &sets);
        let d1 = DifferencePotentials::new(&ap1, &sets);
        let f: Vec<f64> = rhs(op.grid.len());
        let v: Vec<f64> = (0..d0.gamma_len()).map(|k| (k as f64).sin()).collect();
        let a = d0.reconstruct(&v, &f).unwrap();
        let b = d1.reconstruct(&v, &f).unwrap();
        let err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
        let ra = d0.bep_rhs(&f, &v).unwrap();
        let rb = d1.bep_rhs(&f, &v).unwrap();
        let err = ra.iter().zip(&rb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }
}
