//! Manufactured test problems with separable exact solutions `u = T(t) p(x, y)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{DpmError, Result};

/// Subdomain label. `Outer` is the region between the circle and the box,
/// `Inner` is the disk. Single-domain problems live on `Inner`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Outer,
    Inner,
}

impl Side {
    pub fn index(self) -> usize {
        match self {
            Side::Outer => 1,
            Side::Inner => 2,
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Outer => Side::Inner,
            Side::Inner => Side::Outer,
        }
    }

    pub fn from_index(i: usize) -> Result<Side> {
        match i {
            1 => Ok(Side::Outer),
            2 => Ok(Side::Inner),
            _ => Err(DpmError::InvalidInput(format!("side must be 1 or 2, got {i}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProblemId {
    Tp1a,
    Tp3a,
    Tp2a,
    Tp2b,
    Tp2c,
}

impl ProblemId {
    pub const ALL: [ProblemId; 5] = [
        ProblemId::Tp1a,
        ProblemId::Tp3a,
        ProblemId::Tp2a,
        ProblemId::Tp2b,
        ProblemId::Tp2c,
    ];

    pub fn is_composite(self) -> bool {
        matches!(self, ProblemId::Tp2a | ProblemId::Tp2b | ProblemId::Tp2c)
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ProblemId::Tp1a => "TP-1A",
            ProblemId::Tp3a => "TP-3A",
            ProblemId::Tp2a => "TP-2A",
            ProblemId::Tp2b => "TP-2B",
            ProblemId::Tp2c => "TP-2C",
        };
        f.write_str(s)
    }
}

impl FromStr for ProblemId {
    type Err = DpmError;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_uppercase();
        match key.as_str() {
            "TP1A" => Ok(ProblemId::Tp1a),
            "TP3A" => Ok(ProblemId::Tp3a),
            "TP2A" => Ok(ProblemId::Tp2a),
            "TP2B" => Ok(ProblemId::Tp2b),
            "TP2C" => Ok(ProblemId::Tp2c),
            _ => Err(DpmError::InvalidInput(format!("unknown problem '{s}'"))),
        }
    }
}

/// Which time-dependent conductivity TP-3A uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LambdaVariant {
    /// `11/10 + sin(10 pi t)`
    #[default]
    Fast,
    /// `1.1 + sin(pi t)`
    Slow,
}

/// Temporal factor `T(t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeFactor {
    /// `e^{-t}`
    Decay,
    /// `a sin(w t)`
    Sine { amplitude: f64, omega: f64 },
    Zero,
}

impl TimeFactor {
    /// `d^k T / dt^k`
    pub fn derivative(&self, k: usize, t: f64) -> f64 {
        match *self {
            TimeFactor::Decay => {
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                s * (-t).exp()
            }
            TimeFactor::Sine { amplitude, omega } => {
                amplitude * omega.powi(k as i32) * (omega * t + k as f64 * std::f64::consts::FRAC_PI_2).sin()
            }
            TimeFactor::Zero => 0.0,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.derivative(0, t)
    }
}

/// Spatial factor `p(x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    /// Sum of `c x^i y^j` terms.
    Polynomial(Vec<(f64, u32, u32)>),
    /// `sin(a x) cos(b y)`
    SinCos { a: f64, b: f64 },
    Zero,
}

fn monomial_partial(p: u32, k: u32, x: f64) -> f64 {
    if k > p {
        return 0.0;
    }
    let mut c = 1.0;
    for m in 0..k {
        c *= (p - m) as f64;
    }
    c * x.powi((p - k) as i32)
}

impl Profile {
    /// `d^{ix+iy} p / dx^ix dy^iy`
    pub fn partial(&self, ix: u32, iy: u32, x: f64, y: f64) -> f64 {
        match self {
            Profile::Polynomial(terms) => terms
                .iter()
                .map(|&(c, px, py)| c * monomial_partial(px, ix, x) * monomial_partial(py, iy, y))
                .sum(),
            Profile::SinCos { a, b } => {
                let h = std::f64::consts::FRAC_PI_2;
                a.powi(ix as i32)
                    * (a * x + ix as f64 * h).sin()
                    * b.powi(iy as i32)
                    * (b * y + iy as f64 * h).cos()
            }
            Profile::Zero => 0.0,
        }
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.partial(0, 0, x, y)
    }

    pub fn laplacian(&self, x: f64, y: f64) -> f64 {
        self.partial(2, 0, x, y) + self.partial(0, 2, x, y)
    }

    /// Partial derivative of the Laplacian.
    pub fn laplacian_partial(&self, ix: u32, iy: u32, x: f64, y: f64) -> f64 {
        self.partial(ix + 2, iy, x, y) + self.partial(ix, iy + 2, x, y)
    }
}

/// Conductivity `lambda(t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Conductivity {
    Constant(f64),
    /// `base + sin(omega t)`
    Oscillating { base: f64, omega: f64 },
}

impl Conductivity {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Conductivity::Constant(c) => c,
            Conductivity::Oscillating { base, omega } => base + (omega * t).sin(),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            Conductivity::Constant(_) => 0.0,
            Conductivity::Oscillating { omega, .. } => omega * (omega * t).cos(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Conductivity::Constant(_))
    }
}

/// Exact solution and coefficient on one side.
#[derive(Clone, Debug, PartialEq)]
pub struct SideSolution {
    pub time: TimeFactor,
    pub profile: Profile,
    pub lambda: Conductivity,
}

impl SideSolution {
    pub fn value(&self, x: f64, y: f64, t: f64) -> f64 {
        self.time.value(t) * self.profile.value(x, y)
    }

    pub fn partial(&self, ix: u32, iy: u32, x: f64, y: f64, t: f64) -> f64 {
        self.time.value(t) * self.profile.partial(ix, iy, x, y)
    }

    pub fn gradient(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let tv = self.time.value(t);
        [tv * self.profile.partial(1, 0, x, y), tv * self.profile.partial(0, 1, x, y)]
    }

    /// `d^k u / dt^k`
    pub fn time_derivative(&self, k: usize, x: f64, y: f64, t: f64) -> f64 {
        self.time.derivative(k, t) * self.profile.value(x, y)
    }

    /// Source term `f = u_t - lambda(t) lap u`.
    pub fn forcing(&self, x: f64, y: f64, t: f64) -> f64 {
        self.forcing_partial(0, 0, x, y, t)
    }

    /// Spatial partial of the source term.
    pub fn forcing_partial(&self, ix: u32, iy: u32, x: f64, y: f64, t: f64) -> f64 {
        self.time.derivative(1, t) * self.profile.partial(ix, iy, x, y)
            - self.lambda.value(t) * self.time.value(t) * self.profile.laplacian_partial(ix, iy, x, y)
    }

    /// `df/dt`
    pub fn forcing_dt(&self, x: f64, y: f64, t: f64) -> f64 {
        let lap = self.profile.laplacian(x, y);
        self.time.derivative(2, t) * self.profile.value(x, y)
            - self.lambda.derivative(t) * self.time.value(t) * lap
            - self.lambda.value(t) * self.time.derivative(1, t) * lap
    }
}

/// A manufactured benchmark problem.
#[derive(Clone, Debug)]
pub struct Problem {
    pub id: ProblemId,
    outer: Option<SideSolution>,
    inner: SideSolution,
}

impl Problem {
    pub fn new(id: ProblemId, variant: LambdaVariant) -> Problem {
        use std::f64::consts::PI;
        let x9y8 = Profile::Polynomial(vec![(1.0, 9, 8)]);
        let saddle = Profile::Polynomial(vec![(1.0, 2, 0), (-1.0, 0, 2)]);
        match id {
            ProblemId::Tp1a => Problem {
                id,
                outer: None,
                inner: SideSolution {
                    time: TimeFactor::Decay,
                    profile: x9y8,
                    lambda: Conductivity::Constant(1.0),
                },
            },
            ProblemId::Tp3a => {
                let omega = match variant {
                    LambdaVariant::Fast => 10.0 * PI,
                    LambdaVariant::Slow => PI,
                };
                Problem {
                    id,
                    outer: None,
                    inner: SideSolution {
                        time: TimeFactor::Decay,
                        profile: x9y8,
                        lambda: Conductivity::Oscillating { base: 1.1, omega },
                    },
                }
            }
            ProblemId::Tp2a => Problem {
                id,
                outer: Some(SideSolution {
                    time: TimeFactor::Decay,
                    profile: Profile::SinCos { a: 1.0, b: 1.0 },
                    lambda: Conductivity::Constant(10.0),
                }),
                inner: SideSolution {
                    time: TimeFactor::Decay,
                    profile: saddle,
                    lambda: Conductivity::Constant(1.0),
                },
            },
            ProblemId::Tp2b => Problem {
                id,
                outer: Some(SideSolution {
                    time: TimeFactor::Decay,
                    profile: Profile::SinCos { a: 3.0 * PI, b: 7.0 * PI },
                    lambda: Conductivity::Constant(10.0),
                }),
                inner: SideSolution {
                    time: TimeFactor::Decay,
                    profile: saddle,
                    lambda: Conductivity::Constant(1.0),
                },
            },
            ProblemId::Tp2c => Problem {
                id,
                outer: Some(SideSolution {
                    time: TimeFactor::Zero,
                    profile: Profile::Zero,
                    lambda: Conductivity::Constant(1000.0),
                }),
                inner: SideSolution {
                    time: TimeFactor::Sine { amplitude: 1000.0, omega: 10.0 },
                    profile: Profile::Polynomial(vec![(1.0, 4, 5)]),
                    lambda: Conductivity::Constant(1.0),
                },
            },
        }
    }

    pub fn is_composite(&self) -> bool {
        self.outer.is_some()
    }

    pub fn side(&self, side: Side) -> Result<&SideSolution> {
        match side {
            Side::Inner => Ok(&self.inner),
            Side::Outer => self.outer.as_ref().ok_or_else(|| {
                DpmError::SideMismatch(format!("{} has no outer subdomain", self.id))
            }),
        }
    }

    pub fn lambda(&self, side: Side, t: f64) -> Result<f64> {
        Ok(self.side(side)?.lambda.value(t))
    }

    pub fn exact(&self, side: Side, x: f64, y: f64, t: f64) -> Result<f64> {
        Ok(self.side(side)?.value(x, y, t))
    }

    pub fn forcing(&self, side: Side, x: f64, y: f64, t: f64) -> Result<f64> {
        Ok(self.side(side)?.forcing(x, y, t))
    }

    /// Interface jumps `(u1 - u2, lambda1 du1/dn - lambda2 du2/dn)` at a point of the
    /// interface with unit normal `n` pointing out of the inner disk.
    pub fn jumps(&self, x: f64, y: f64, n: [f64; 2], t: f64) -> Result<(f64, f64)> {
        let outer = self.side(Side::Outer)?;
        let inner = &self.inner;
        let g1 = outer.gradient(x, y, t);
        let g2 = inner.gradient(x, y, t);
        let dn1 = g1[0] * n[0] + g1[1] * n[1];
        let dn2 = g2[0] * n[0] + g2[1] * n[1];
        let m1 = outer.value(x, y, t) - inner.value(x, y, t);
        let m2 = outer.lambda.value(t) * dn1 - inner.lambda.value(t) * dn2;
        Ok((m1, m2))
    }

    /// Dirichlet data on the physical boundary.
    pub fn boundary_value(&self, x: f64, y: f64, t: f64) -> f64 {
        match &self.outer {
            Some(o) => o.value(x, y, t),
            None => self.inner.value(x, y, t),
        }
    }

    /// True when some conductivity depends on time.
    pub fn has_time_dependent_lambda(&self) -> bool {
        !self.inner.lambda.is_constant()
            || self.outer.as_ref().is_some_and(|o| !o.lambda.is_constant())
    }
}
