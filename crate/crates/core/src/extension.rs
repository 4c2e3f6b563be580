//! Extension of Cauchy data from the interface to nearby grid nodes.
//!
//! Near the curve `x = gamma(s) + d n(s)` with `H = 1 + d kappa`,
//! `lap u = u_dd + (kappa/H) u_d + u_ss/H^2 - d kappa' u_s / H^3`. Higher normal
//! derivatives follow from the equation `u_t = lambda lap u + f` and its
//! normal derivatives, all expressed through the Dirichlet trace, the Neumann
//! trace, their tangential and time derivatives, and the forcing.

use crate::basis::{CauchyCoefficients, TrigBasis};
use crate::error::{DpmError, Result};
use crate::grid::GammaNode;

/// Local frame data at the foot point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Frame {
    /// Signed distance along the normal.
    pub d: f64,
    pub kappa: f64,
    pub dkappa: f64,
    pub ddkappa: f64,
}

impl Frame {
    pub fn of(node: &GammaNode) -> Frame {
        Frame { d: node.distance, kappa: node.foot.curvature, dkappa: node.dkappa, ddkappa: node.ddkappa }
    }
}

/// Traces at the foot point. `u*` fields refer to the Dirichlet trace,
/// `un*` to the normal derivative, `f*` to the forcing. Subscripts `s` are
/// arclength derivatives and `t` time derivatives.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BoundaryJet {
    pub u: f64,
    pub u_s: f64,
    pub u_ss: f64,
    pub u_ssss: f64,
    pub ut: f64,
    pub ut_ss: f64,
    pub utt: f64,
    pub un: f64,
    pub un_s: f64,
    pub un_ss: f64,
    pub unt: f64,
    pub f: f64,
    pub f_n: f64,
    pub f_nn: f64,
    pub f_t: f64,
    pub f_ss: f64,
}

/// Forcing values at a foot point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ForcingJet {
    pub f: f64,
    pub f_n: f64,
    pub f_nn: f64,
    pub f_t: f64,
    pub f_ss: f64,
}

/// Conductivity and its time derivative at the current level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coefficient {
    pub lambda: f64,
    pub dlambda: f64,
}

/// `u_nn` on the curve.
pub fn normal_derivative_2(fr: &Frame, j: &BoundaryJet, c: &Coefficient) -> f64 {
    (j.ut - j.f) / c.lambda - fr.kappa * j.un - j.u_ss
}

/// `u_nnn` on the curve.
pub fn normal_derivative_3(fr: &Frame, j: &BoundaryJet, c: &Coefficient) -> f64 {
    let k = fr.kappa;
    let u2 = normal_derivative_2(fr, j, c);
    (j.unt - j.f_n) / c.lambda - k * u2 + k * k * j.un - j.un_ss + 2.0 * k * j.u_ss + fr.dkappa * j.u_s
}

/// `u_nnnn` on the curve.
pub fn normal_derivative_4(fr: &Frame, j: &BoundaryJet, c: &Coefficient) -> f64 {
    let (k, k1, k2) = (fr.kappa, fr.dkappa, fr.ddkappa);
    let lam = c.lambda;
    let u2 = normal_derivative_2(fr, j, c);
    let u3 = normal_derivative_3(fr, j, c);
    let g_t = (j.utt - j.f_t) / lam - c.dlambda * (j.ut - j.f) / (lam * lam);
    let u_tdd = g_t - k * j.unt - j.ut_ss;
    let g_dd = (u_tdd - j.f_nn) / lam;
    let u_ddss = (j.ut_ss - j.f_ss) / lam - (k2 * j.un + 2.0 * k1 * j.un_s + k * j.un_ss) - j.u_ssss;
    g_dd - k * u3 + 2.0 * k * k * u2 - 2.0 * k * k * k * j.un - u_ddss + 4.0 * k * j.un_ss
        - 6.0 * k * k * j.u_ss
        + 2.0 * k1 * j.un_s
        - 6.0 * k * k1 * j.u_s
}

/// Taylor extension of order `p` (2 or 4) to distance `d` along the normal.
pub fn extend(p: usize, fr: &Frame, j: &BoundaryJet, c: &Coefficient) -> Result<f64> {
    let d = fr.d;
    let base = j.u + d * j.un + 0.5 * d * d * normal_derivative_2(fr, j, c);
    match p {
        2 => Ok(base),
        4 => Ok(base
            + d * d * d / 6.0 * normal_derivative_3(fr, j, c)
            + d * d * d * d / 24.0 * normal_derivative_4(fr, j, c)),
        o => Err(DpmError::UnsupportedOrder(o)),
    }
}

/// Backward time-difference weights used by the extension, newest level
/// (the current one) first, already divided by powers of `dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeWeights {
    pub first: Vec<f64>,
    pub second: Option<Vec<f64>>,
}

/// Coefficient vectors whose syntheses give the jet entries.
#[derive(Clone, Debug, Default)]
pub struct JetCoefficients {
    pub dir: Vec<f64>,
    pub dir_t: Vec<f64>,
    pub dir_tt: Vec<f64>,
    pub neu: Vec<f64>,
    pub neu_t: Vec<f64>,
}

impl JetCoefficients {
    /// Combine the known current-level data with the history, newest first.
    pub fn from_history(current: &CauchyCoefficients, history: &[CauchyCoefficients], tw: &TimeWeights) -> JetCoefficients {
        let lin = |w: &[f64], pick: &dyn Fn(&CauchyCoefficients) -> &Vec<f64>| {
            let mut acc = crate::basis::axpy_padded(&[], w[0], pick(current));
            for (wk, h) in w[1..].iter().zip(history) {
                acc = crate::basis::axpy_padded(&acc, *wk, pick(h));
            }
            acc
        };
        let dir_t = lin(&tw.first, &|c| &c.dirichlet);
        let neu_t = lin(&tw.first, &|c| &c.neumann);
        let dir_tt = match &tw.second {
            Some(w) => lin(w, &|c| &c.dirichlet),
            None => Vec::new(),
        };
        JetCoefficients { dir: current.dirichlet.clone(), dir_t, dir_tt, neu: current.neumann.clone(), neu_t }
    }
}

/// Basis values and derivatives at the foot points of a grid boundary.
#[derive(Clone, Debug)]
pub struct BasisTable {
    pub n: usize,
    rows: Vec<Vec<f64>>,
}

impl BasisTable {
    pub fn new(basis: &TrigBasis, nodes: &[GammaNode], n: usize) -> BasisTable {
        let rows = nodes.iter().map(|g| basis.table_row(n, g.foot.arclength)).collect();
        BasisTable { n, rows }
    }

    fn synth(&self, point: usize, c: &[f64], m: usize) -> f64 {
        assert!(c.len() <= self.n, "coefficient vector longer than basis table");
        let row = &self.rows[point];
        c.iter().enumerate().map(|(i, v)| v * row[i * 5 + m]).sum()
    }

    fn value(&self, point: usize, i: usize, m: usize) -> f64 {
        self.rows[point][i * 5 + m]
    }
}

/// Jet of the affine part at one point.
pub fn affine_jet(table: &BasisTable, point: usize, jc: &JetCoefficients, forcing: &ForcingJet) -> BoundaryJet {
    BoundaryJet {
        u: table.synth(point, &jc.dir, 0),
        u_s: table.synth(point, &jc.dir, 1),
        u_ss: table.synth(point, &jc.dir, 2),
        u_ssss: table.synth(point, &jc.dir, 4),
        ut: table.synth(point, &jc.dir_t, 0),
        ut_ss: table.synth(point, &jc.dir_t, 2),
        utt: table.synth(point, &jc.dir_tt, 0),
        un: table.synth(point, &jc.neu, 0),
        un_s: table.synth(point, &jc.neu, 1),
        un_ss: table.synth(point, &jc.neu, 2),
        unt: table.synth(point, &jc.neu_t, 0),
        f: forcing.f,
        f_n: forcing.f_n,
        f_nn: forcing.f_nn,
        f_t: forcing.f_t,
        f_ss: forcing.f_ss,
    }
}

/// Layout of the unknown coefficients: `n_dir` Dirichlet columns followed by
/// `n_neu` Neumann columns. Neumann columns are multiplied by `neu_scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColumnLayout {
    pub n_dir: usize,
    pub n_neu: usize,
    pub neu_scale: f64,
}

impl ColumnLayout {
    pub fn cols(&self) -> usize {
        self.n_dir + self.n_neu
    }
}

/// Extension operator `u_gamma = e0 + E c` on one grid boundary.
pub struct Extension<'a> {
    pub nodes: &'a [GammaNode],
    pub table: &'a BasisTable,
    pub order: usize,
    pub coefficient: Coefficient,
    pub weights: &'a TimeWeights,
}

impl Extension<'_> {
    /// Columns of `E`, each of length `|gamma|`.
    pub fn columns(&self, layout: &ColumnLayout) -> Result<Vec<Vec<f64>>> {
        if layout.n_dir.max(layout.n_neu) > self.table.n {
            return Err(DpmError::InvalidInput("basis table too small for the unknowns".into()));
        }
        let a0 = self.weights.first[0];
        let b0 = self.weights.second.as_ref().map_or(0.0, |w| w[0]);
        let mut cols = Vec::with_capacity(layout.cols());
        for i in 0..layout.n_dir {
            let col = self
                .nodes
                .iter()
                .enumerate()
                .map(|(p, g)| {
                    let t = self.table;
                    let j = BoundaryJet {
                        u: t.value(p, i, 0),
                        u_s: t.value(p, i, 1),
                        u_ss: t.value(p, i, 2),
                        u_ssss: t.value(p, i, 4),
                        ut: a0 * t.value(p, i, 0),
                        ut_ss: a0 * t.value(p, i, 2),
                        utt: b0 * t.value(p, i, 0),
                        ..Default::default()
                    };
                    extend(self.order, &Frame::of(g), &j, &self.coefficient)
                })
                .collect::<Result<Vec<f64>>>()?;
            cols.push(col);
        }
        for i in 0..layout.n_neu {
            let s = layout.neu_scale;
            let col = self
                .nodes
                .iter()
                .enumerate()
                .map(|(p, g)| {
                    let t = self.table;
                    let j = BoundaryJet {
                        un: s * t.value(p, i, 0),
                        un_s: s * t.value(p, i, 1),
                        un_ss: s * t.value(p, i, 2),
                        unt: s * a0 * t.value(p, i, 0),
                        ..Default::default()
                    };
                    extend(self.order, &Frame::of(g), &j, &self.coefficient)
                })
                .collect::<Result<Vec<f64>>>()?;
            cols.push(col);
        }
        Ok(cols)
    }

    /// Affine part `e0` from known data, history and forcing.
    pub fn affine(&self, jc: &JetCoefficients, forcing: &[ForcingJet]) -> Result<Vec<f64>> {
        if forcing.len() != self.nodes.len() {
            return Err(DpmError::InvalidInput("forcing must be given at every grid-boundary node".into()));
        }
        self.nodes
            .iter()
            .enumerate()
            .map(|(p, g)| {
                let j = affine_jet(self.table, p, jc, &forcing[p]);
                extend(self.order, &Frame::of(g), &j, &self.coefficient)
            })
            .collect()
    }
}
