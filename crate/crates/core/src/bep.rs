//! Boundary equations: interface coupling and the least-squares solve for the
//! unknown Cauchy coefficients.

use faer::prelude::*;
use faer::Mat;

use crate::basis::{axpy_padded, CauchyCoefficients};
use crate::error::{DpmError, Result};
use crate::problems::Side;

/// Relative threshold on the pivoted `R` diagonal below which a column counts
/// as dependent.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Dense least-squares solver with column equilibration and column-pivoted QR.
pub struct LeastSquares {
    qr: faer::linalg::solvers::ColPivQr<f64>,
    scale: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl LeastSquares {
    /// Factor the matrix whose columns are `cols` (each of equal length).
    pub fn new(cols: &[Vec<f64>]) -> Result<LeastSquares> {
        let n = cols.len();
        let m = cols.first().map_or(0, |c| c.len());
        if n == 0 || m < n {
            return Err(DpmError::InvalidInput(format!("least-squares system is {m}x{n}")));
        }
        if cols.iter().any(|c| c.len() != m) {
            return Err(DpmError::InvalidInput("columns of unequal length".into()));
        }
        let scale: Vec<f64> = cols
            .iter()
            .map(|c| {
                let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 { 1.0 / norm } else { 1.0 }
            })
            .collect();
        let a = Mat::<f64>::from_fn(m, n, |i, j| cols[j][i] * scale[j]);
        let qr = a.col_piv_qr();
        let r = qr.thin_R();
        let r0 = r[(0, 0)].abs();
        let rank = (0..n).filter(|&k| r[(k, k)].abs() > RANK_TOLERANCE * r0).count();
        if rank < n {
            return Err(DpmError::RankDeficient { rank, cols: n });
        }
        Ok(LeastSquares { qr, scale, rows: m, cols: n })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.rows {
            return Err(DpmError::InvalidInput(format!(
                "right-hand side has length {}, expected {}",
                rhs.len(),
                self.rows
            )));
        }
        let mut b = Mat::<f64>::from_fn(self.rows, 1, |i, _| rhs[i]);
        self.qr.solve_lstsq_in_place(b.as_mut());
        Ok((0..self.cols).map(|j| b[(j, 0)] * self.scale[j]).collect())
    }
}

/// Stack per-subdomain column blocks into one least-squares system.
pub fn stack_columns(blocks: &[Vec<Vec<f64>>]) -> Result<Vec<Vec<f64>>> {
    let n = blocks.first().map_or(0, |b| b.len());
    if blocks.iter().any(|b| b.len() != n) {
        return Err(DpmError::InvalidInput("blocks have different numbers of unknowns".into()));
    }
    Ok((0..n).map(|j| blocks.iter().flat_map(|b| b[j].iter().copied()).collect()).collect())
}

pub fn residual_norm(cols: &[Vec<f64>], x: &[f64], rhs: &[f64]) -> f64 {
    let mut r = rhs.to_vec();
    for (c, xj) in cols.iter().zip(x) {
        for (ri, ci) in r.iter_mut().zip(c) {
            *ri -= ci * xj;
        }
    }
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Interface relations `u1 - u2 = m1` and `lambda1 du1/dn - lambda2 du2/dn = m2`
/// expressed through the coefficients of one independent side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterfaceCoupling {
    pub independent: Side,
    pub lambda_outer: f64,
    pub lambda_inner: f64,
}

impl InterfaceCoupling {
    pub fn dependent(&self) -> Side {
        self.independent.other()
    }

    /// Factor applied to independent Neumann coefficients on the dependent side.
    pub fn neumann_scale(&self) -> f64 {
        match self.independent {
            Side::Inner => self.lambda_inner / self.lambda_outer,
            Side::Outer => self.lambda_outer / self.lambda_inner,
        }
    }

    /// Coefficients of the dependent side when the independent side is zero.
    pub fn dependent_constants(&self, m1: &[f64], m2: &[f64]) -> CauchyCoefficients {
        match self.independent {
            Side::Inner => CauchyCoefficients {
                dirichlet: m1.to_vec(),
                neumann: m2.iter().map(|v| v / self.lambda_outer).collect(),
            },
            Side::Outer => CauchyCoefficients {
                dirichlet: m1.iter().map(|v| -v).collect(),
                neumann: m2.iter().map(|v| -v / self.lambda_inner).collect(),
            },
        }
    }

    /// Dependent coefficients from independent ones.
    pub fn dependent_from(&self, independent: &CauchyCoefficients, m1: &[f64], m2: &[f64]) -> CauchyCoefficients {
        let k = self.dependent_constants(m1, m2);
        CauchyCoefficients {
            dirichlet: axpy_padded(&k.dirichlet, 1.0, &independent.dirichlet),
            neumann: axpy_padded(&k.neumann, self.neumann_scale(), &independent.neumann),
        }
    }

    /// Return `(outer, inner)` coefficients.
    pub fn couple(&self, independent: &CauchyCoefficients, m1: &[f64], m2: &[f64]) -> (CauchyCoefficients, CauchyCoefficients) {
        let dep = self.dependent_from(independent, m1, m2);
        match self.independent {
            Side::Inner => (dep, independent.clone()),
            Side::Outer => (independent.clone(), dep),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn least_squares_recovers_consistent_solution() {
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|j| (0..12).map(|i| ((i * (j + 2)) as f64 * 0.37).sin() * 10f64.powi(j as i32)).collect())
            .collect();
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut rhs = vec![0.0; 12];
        for (c, xj) in cols.iter().zip(&x) {
            for (r, v) in rhs.iter_mut().zip(c) {
                *r += v * xj;
            }
        }
        let ls = LeastSquares::new(&cols).unwrap();
        let got = ls.solve(&rhs).unwrap();
        for (a, b) in got.iter().zip(&x) {
            assert!((a - b).abs() < 1e-10, "{got:?}");
        }
        assert!(residual_norm(&cols, &got, &rhs) < 1e-10);
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let a: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let b: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
        assert!(matches!(LeastSquares::new(&[a, b]), Err(DpmError::RankDeficient { rank: 1, cols: 2 })));
    }

    #[test]
    fn coupling_satisfies_jump_relations() {
        let m1 = [0.3, -0.1];
        let m2 = [1.0, 2.0, 0.5];
        for side in [Side::Inner, Side::Outer] {
            let c = InterfaceCoupling { independent: side, lambda_outer: 10.0, lambda_inner: 1.0 };
            let ind = CauchyCoefficients { dirichlet: vec![1.0, 2.0, 3.0], neumann: vec![-1.0, 0.25, 4.0] };
            let (o, i) = c.couple(&ind, &m1, &m2);
            for k in 0..3 {
                let jd = o.dirichlet[k] - i.dirichlet[k] - m1.get(k).copied().unwrap_or(0.0);
                let jn = 10.0 * o.neumann[k] - i.neumann[k] - m2[k];
                assert!(jd.abs() < 1e-14 && jn.abs() < 1e-13, "{side:?} {k}");
            }
        }
    }
}
