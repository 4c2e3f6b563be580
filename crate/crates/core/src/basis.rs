//! Trigonometric basis on the interface, parametrized by arclength.

use std::f64::consts::{FRAC_PI_2, TAU};

use crate::error::{DpmError, Result};
use crate::geometry::{CurvePoint, Geometry};

/// `phi_1 = 1`, `phi_{2k} = cos(2 pi k s / L)`, `phi_{2k+1} = sin(2 pi k s / L)`.
/// Indices here are zero-based: index `i` is `phi_{i+1}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrigBasis {
    pub length: f64,
}

/// Dirichlet and Neumann coefficient vectors of Cauchy data on the interface.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CauchyCoefficients {
    pub dirichlet: Vec<f64>,
    pub neumann: Vec<f64>,
}

impl CauchyCoefficients {
    pub fn zeros(n_dirichlet: usize, n_neumann: usize) -> CauchyCoefficients {
        CauchyCoefficients { dirichlet: vec![0.0; n_dirichlet], neumann: vec![0.0; n_neumann] }
    }
}

/// `a + s * b` over the longer of the two lengths.
pub fn axpy_padded(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or(0.0) + s * b.get(i).copied().unwrap_or(0.0))
        .collect()
}

impl TrigBasis {
    pub fn new(length: f64) -> Result<TrigBasis> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(DpmError::InvalidInput(format!("basis period must be positive, got {length}")));
        }
        Ok(TrigBasis { length })
    }

    /// Frequency index `k` of basis function `i`.
    pub fn frequency(i: usize) -> usize {
        i.div_ceil(2)
    }

    /// `d^m phi_i / ds^m` at `s`.
    pub fn eval(&self, i: usize, s: f64, m: usize) -> f64 {
        if i == 0 {
            return if m == 0 { 1.0 } else { 0.0 };
        }
        let w = TAU * Self::frequency(i) as f64 / self.length;
        let phase = w * s + m as f64 * FRAC_PI_2;
        let amp = w.powi(m as i32);
        if i % 2 == 1 {
            amp * phase.cos()
        } else {
            amp * phase.sin()
        }
    }

    /// Derivatives `0..=4` of the first `n` basis functions, laid out
    /// `out[i * 5 + m]`.
    pub fn table_row(&self, n: usize, s: f64) -> Vec<f64> {
        let mut out = vec![0.0; n * 5];
        if n == 0 {
            return out;
        }
        out[0] = 1.0;
        for k in 1..=n / 2 {
            let w = TAU * k as f64 / self.length;
            let (sn, cs) = (w * s).sin_cos();
            let w2 = w * w;
            let c = [cs, -w * sn, -w2 * cs, w2 * w * sn, w2 * w2 * cs];
            let si = [sn, w * cs, -w2 * sn, -w2 * w * cs, w2 * w2 * sn];
            let ic = 2 * k - 1;
            if ic < n {
                out[ic * 5..ic * 5 + 5].copy_from_slice(&c);
            }
            if 2 * k < n {
                out[2 * k * 5..2 * k * 5 + 5].copy_from_slice(&si);
            }
        }
        out
    }

    /// `d^m/ds^m` of `sum c_i phi_i` at `s`.
    pub fn synthesize(&self, coeffs: &[f64], s: f64, m: usize) -> f64 {
        let row = self.table_row(coeffs.len(), s);
        coeffs.iter().enumerate().map(|(i, c)| c * row[i * 5 + m]).sum()
    }
}

/// Quadrature size used to project onto `n` basis functions.
pub fn quadrature_size(n: usize) -> usize {
    64.max(8 * n)
}

/// Discrete least-squares coefficients from samples at `s_q = q L / Q`.
pub fn project_samples(samples: &[f64], n_coeffs: usize) -> Result<Vec<f64>> {
    let q = samples.len();
    let kmax = n_coeffs / 2;
    if q < 2 * kmax + 2 {
        return Err(DpmError::InvalidInput(format!(
            "{q} quadrature nodes cannot resolve {n_coeffs} basis functions"
        )));
    }
    let mut c = vec![0.0; n_coeffs];
    if n_coeffs == 0 {
        return Ok(c);
    }
    c[0] = samples.iter().sum::<f64>() / q as f64;
    for k in 1..=kmax {
        let (mut a, mut b) = (0.0, 0.0);
        for (j, v) in samples.iter().enumerate() {
            let t = TAU * ((k * j) % q) as f64 / q as f64;
            let (sn, cs) = t.sin_cos();
            a += v * cs;
            b += v * sn;
        }
        if 2 * k - 1 < n_coeffs {
            c[2 * k - 1] = 2.0 * a / q as f64;
        }
        if 2 * k < n_coeffs {
            c[2 * k] = 2.0 * b / q as f64;
        }
    }
    Ok(c)
}

/// Project a function on the curve onto the first `n_coeffs` basis functions
/// using `n_quad` equispaced nodes.
pub fn project(
    geometry: &Geometry,
    n_coeffs: usize,
    n_quad: usize,
    mut f: impl FnMut(&CurvePoint) -> Result<f64>,
) -> Result<Vec<f64>> {
    let nodes = geometry.curve_quadrature(n_quad)?;
    let samples: Vec<f64> = nodes.iter().map(|(p, _)| f(p)).collect::<Result<_>>()?;
    project_samples(&samples, n_coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Circle;

    #[test]
    fn basis_ordering_and_derivatives() {
        let b = TrigBasis::new(TAU).unwrap();
        assert_eq!(b.eval(0, 0.3, 0), 1.0);
        assert!((b.eval(1, 0.3, 0) - 0.3f64.cos()).abs() < 1e-15);
        assert!((b.eval(2, 0.3, 0) - 0.3f64.sin()).abs() < 1e-15);
        assert!((b.eval(4, 0.3, 1) - 2.0 * 0.6f64.cos()).abs() < 1e-14);
        let row = b.table_row(7, 0.3);
        for i in 0..7 {
            for m in 0..5 {
                assert!((row[i * 5 + m] - b.eval(i, 0.3, m)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn projection_of_trace_on_unit_circle() {
        let g = Geometry::Circle(Circle::unit());
        let c = project(&g, 20, quadrature_size(20), |p| {
            let (x, y) = (p.position.x, p.position.y);
            Ok(x * x - y * y + 3.0 * y)
        })
        .unwrap();
        let mut expect = vec![0.0; 20];
        expect[2] = 3.0;
        expect[3] = 1.0;
        for (a, b) in c.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-14, "{c:?}");
        }
    }

    #[test]
    fn projection_rejects_under_resolution() {
        assert!(project_samples(&[1.0; 10], 21).is_err());
    }

    #[test]
    fn synthesis_inverts_projection() {
        let b = TrigBasis::new(5.0).unwrap();
        let coeffs: Vec<f64> = (0..11).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let q = quadrature_size(11);
        let samples: Vec<f64> = (0..q).map(|j| b.synthesize(&coeffs, 5.0 * j as f64 / q as f64, 0)).collect();
        let back = project_samples(&samples, 11).unwrap();
        for (a, c) in back.iter().zip(&coeffs) {
            assert!((a - c).abs() < 1e-13);
        }
    }
}
