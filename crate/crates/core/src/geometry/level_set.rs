//! Curves given implicitly as the zero set of sampled level-set data.

use std::fmt::Write as _;

use super::spline::PeriodicSpline;
use super::{CurvePoint, Point, Projection};
use crate::error::{DpmError, Result};

const NEWTON_ITERS: usize = 50;
const NEWTON_TOL: f64 = 1e-12;
const TRACE_SAMPLES: usize = 4096;
const CURVATURE_SAMPLES: usize = 256;
const CURVATURE_MODES: usize = 64;

const GL_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Level-set samples on a uniform rectangular grid, stored row by row with
/// rows indexed by `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSetGrid {
    pub nx: usize,
    pub ny: usize,
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    pub values: Vec<f64>,
}

impl LevelSetGrid {
    pub fn from_fn(
        nx: usize,
        ny: usize,
        (xmin, xmax): (f64, f64),
        (ymin, ymax): (f64, f64),
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<LevelSetGrid> {
        if nx < 2 || ny < 2 || !(xmax > xmin) || !(ymax > ymin) {
            return Err(DpmError::InvalidInput("level-set grid needs at least 2x2 nodes and a positive extent".into()));
        }
        let dx = (xmax - xmin) / (nx - 1) as f64;
        let dy = (ymax - ymin) / (ny - 1) as f64;
        let mut values = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                values.push(f(xmin + i as f64 * dx, ymin + j as f64 * dy));
            }
        }
        Ok(LevelSetGrid { nx, ny, xmin, xmax, ymin, ymax, values })
    }

    /// Registry of built-in level sets.
    pub fn builtin(
        name: &str,
        nx: usize,
        ny: usize,
        xr: (f64, f64),
        yr: (f64, f64),
    ) -> Result<LevelSetGrid> {
        match name {
            "unit_circle" => LevelSetGrid::from_fn(nx, ny, xr, yr, |x, y| x * x + y * y - 1.0),
            _ => Err(DpmError::InvalidInput(format!("unknown built-in level set '{name}'"))),
        }
    }

    /// Parse `nx ny xmin xmax ymin ymax` followed by `nx * ny` values.
    pub fn parse(text: &str) -> Result<LevelSetGrid> {
        let mut tokens = text.lines().enumerate().flat_map(|(ln, line)| {
            let line = line.split('#').next().unwrap_or("");
            line.split_whitespace().map(move |t| (ln + 1, t)).collect::<Vec<_>>()
        });
        let mut next = |what: &str| {
            tokens.next().ok_or_else(|| DpmError::Parse {
                line: 0,
                message: format!("unexpected end of input while reading {what}"),
            })
        };
        let parse_usize = |(ln, t): (usize, &str)| {
            t.parse::<usize>().map_err(|e| DpmError::Parse { line: ln, message: format!("'{t}': {e}") })
        };
        let parse_f64 = |(ln, t): (usize, &str)| {
            t.parse::<f64>().map_err(|e| DpmError::Parse { line: ln, message: format!("'{t}': {e}") })
        };
        let nx = parse_usize(next("nx")?)?;
        let ny = parse_usize(next("ny")?)?;
        let xmin = parse_f64(next("xmin")?)?;
        let xmax = parse_f64(next("xmax")?)?;
        let ymin = parse_f64(next("ymin")?)?;
        let ymax = parse_f64(next("ymax")?)?;
        if nx < 2 || ny < 2 || !(xmax > xmin) || !(ymax > ymin) {
            return Err(DpmError::Parse { line: 1, message: "invalid grid header".into() });
        }
        let mut values = Vec::with_capacity(nx * ny);
        for _ in 0..nx * ny {
            values.push(parse_f64(next("values")?)?);
        }
        if let Some((ln, t)) = tokens.next() {
            return Err(DpmError::Parse { line: ln, message: format!("trailing token '{t}'") });
        }
        Ok(LevelSetGrid { nx, ny, xmin, xmax, ymin, ymax, values })
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{} {} {:e} {:e} {:e} {:e}\n",
            self.nx, self.ny, self.xmin, self.xmax, self.ymin, self.ymax
        );
        for row in self.values.chunks(self.nx) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn dx(&self) -> f64 {
        (self.xmax - self.xmin) / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.ymax - self.ymin) / (self.ny - 1) as f64
    }
}

/// Value, gradient and Hessian of the interpolated level set.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LevelSetJet {
    pub f: f64,
    pub fx: f64,
    pub fy: f64,
    pub fxx: f64,
    pub fxy: f64,
    pub fyy: f64,
}

impl LevelSetJet {
    pub fn grad(&self) -> Point {
        Point::new(self.fx, self.fy)
    }

    pub fn curvature(&self) -> f64 {
        let g2 = self.fx * self.fx + self.fy * self.fy;
        (self.fxx * self.fy * self.fy - 2.0 * self.fxy * self.fx * self.fy + self.fyy * self.fx * self.fx)
            / (g2 * g2.sqrt())
    }
}

/// Local tensor-product Lagrange interpolant of fixed degree.
#[derive(Clone, Debug)]
pub struct LevelSetInterpolant {
    grid: LevelSetGrid,
    degree: usize,
}

/// Lagrange basis values, first and second derivatives at `x` for nodes `xs`.
fn lagrange_weights(xs: &[f64], x: f64) -> [Vec<f64>; 3] {
    let n = xs.len();
    let mut w0 = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    for i in 0..n {
        let denom: f64 = (0..n).filter(|&j| j != i).map(|j| xs[i] - xs[j]).product();
        let prod_except = |skip: &[usize]| -> f64 {
            (0..n).filter(|j| *j != i && !skip.contains(j)).map(|j| x - xs[j]).product()
        };
        w0[i] = prod_except(&[]) / denom;
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for k in (0..n).filter(|&k| k != i) {
            d1 += prod_except(&[k]);
            for m in (0..n).filter(|&m| m != i && m != k) {
                d2 += prod_except(&[k, m]);
            }
        }
        w1[i] = d1 / denom;
        w2[i] = d2 / denom;
    }
    [w0, w1, w2]
}

impl LevelSetInterpolant {
    pub fn new(grid: LevelSetGrid, degree: usize) -> Result<LevelSetInterpolant> {
        if degree < 2 || degree + 1 > grid.nx.min(grid.ny) {
            return Err(DpmError::InvalidInput(format!(
                "interpolation degree {degree} not supported on a {}x{} grid",
                grid.nx, grid.ny
            )));
        }
        Ok(LevelSetInterpolant { grid, degree })
    }

    pub fn grid(&self) -> &LevelSetGrid {
        &self.grid
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    fn window(&self, coord: f64, min: f64, step: f64, n: usize) -> usize {
        let count = self.degree + 1;
        let r = (coord - min) / step;
        let start = if count % 2 == 1 {
            r.round() as isize - (count / 2) as isize
        } else {
            r.floor() as isize - (count / 2 - 1) as isize
        };
        start.clamp(0, (n - count) as isize) as usize
    }

    pub fn eval(&self, p: Point) -> LevelSetJet {
        let g = &self.grid;
        let (dx, dy) = (g.dx(), g.dy());
        let count = self.degree + 1;
        let i0 = self.window(p.x, g.xmin, dx, g.nx);
        let j0 = self.window(p.y, g.ymin, dy, g.ny);
        let xs: Vec<f64> = (0..count).map(|k| g.xmin + (i0 + k) as f64 * dx).collect();
        let ys: Vec<f64> = (0..count).map(|k| g.ymin + (j0 + k) as f64 * dy).collect();
        let wx = lagrange_weights(&xs, p.x);
        let wy = lagrange_weights(&ys, p.y);
        let mut jet = LevelSetJet::default();
        for b in 0..count {
            let row = &g.values[(j0 + b) * g.nx + i0..(j0 + b) * g.nx + i0 + count];
            let r0: f64 = row.iter().zip(&wx[0]).map(|(v, w)| v * w).sum();
            let r1: f64 = row.iter().zip(&wx[1]).map(|(v, w)| v * w).sum();
            let r2: f64 = row.iter().zip(&wx[2]).map(|(v, w)| v * w).sum();
            jet.f += wy[0][b] * r0;
            jet.fx += wy[0][b] * r1;
            jet.fy += wy[1][b] * r0;
            jet.fxx += wy[0][b] * r2;
            jet.fxy += wy[1][b] * r1;
            jet.fyy += wy[2][b] * r0;
        }
        jet
    }

    /// Newton projection of `p` onto the zero set, solving `F(q) = 0` and
    /// `(p - q) x grad F(q) = 0`.
    pub fn project_point(&self, p: Point) -> Result<Point> {
        let mut q = p;
        for _ in 0..2 {
            let j = self.eval(q);
            let g2 = j.fx * j.fx + j.fy * j.fy;
            if g2 < 1e-28 {
                return Err(DpmError::DegenerateLevelSet { x: q.x, y: q.y });
            }
            q = q - (j.f / g2) * j.grad();
        }
        let scale = 1.0 + p.norm();
        let mut residual = f64::INFINITY;
        for _ in 0..NEWTON_ITERS {
            let j = self.eval(q);
            if j.fx * j.fx + j.fy * j.fy < 1e-28 {
                return Err(DpmError::DegenerateLevelSet { x: q.x, y: q.y });
            }
            let r = p - q;
            let g0 = j.f;
            let g1 = r.x * j.fy - r.y * j.fx;
            let a11 = j.fx;
            let a12 = j.fy;
            let a21 = -j.fy + r.x * j.fxy - r.y * j.fxx;
            let a22 = r.x * j.fyy + j.fx - r.y * j.fxy;
            let det = a11 * a22 - a12 * a21;
            if det.abs() < 1e-300 {
                return Err(DpmError::DegenerateLevelSet { x: q.x, y: q.y });
            }
            let sx = (g0 * a22 - a12 * g1) / det;
            let sy = (a11 * g1 - a21 * g0) / det;
            q = Point::new(q.x - sx, q.y - sy);
            residual = sx.hypot(sy);
            if residual <= NEWTON_TOL * scale {
                return Ok(q);
            }
        }
        Err(DpmError::ProjectionDiverged { iterations: NEWTON_ITERS, residual })
    }
}

/// Closed curve traced from level-set data, parametrized by arclength.
#[derive(Clone, Debug)]
pub struct LevelSetCurve {
    interp: LevelSetInterpolant,
    tube: f64,
    sx: PeriodicSpline,
    sy: PeriodicSpline,
    /// Arclength at each spline knot, with the total length appended.
    arc: Vec<f64>,
    curvature_coeffs: Vec<f64>,
}

fn unit_tangent(interp: &LevelSetInterpolant, q: Point) -> Result<Point> {
    let j = interp.eval(q);
    let g = j.grad().norm();
    if g < 1e-14 {
        return Err(DpmError::DegenerateLevelSet { x: q.x, y: q.y });
    }
    Ok(Point::new(-j.fy / g, j.fx / g))
}

/// One Dormand-Prince step of `q' = tangent(q)`; returns the 5th-order
/// solution and the embedded error estimate.
fn dp_step(interp: &LevelSetInterpolant, q: Point, h: f64) -> Result<(Point, f64)> {
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const E: [f64; 7] = [
        35.0 / 384.0 - 5179.0 / 57600.0,
        0.0,
        500.0 / 1113.0 - 7571.0 / 16695.0,
        125.0 / 192.0 - 393.0 / 640.0,
        -2187.0 / 6784.0 + 92097.0 / 339200.0,
        11.0 / 84.0 - 187.0 / 2100.0,
        -1.0 / 40.0,
    ];
    let mut k = [Point::default(); 7];
    k[0] = unit_tangent(interp, q)?;
    for s in 0..6 {
        let mut y = q;
        for (m, km) in k.iter().enumerate().take(s + 1) {
            y = y + (h * A[s][m]) * *km;
        }
        k[s + 1] = unit_tangent(interp, y)?;
    }
    let mut y5 = q;
    for m in 0..6 {
        y5 = y5 + (h * A[5][m]) * k[m];
    }
    let mut err = Point::default();
    for m in 0..7 {
        err = err + (h * E[m]) * k[m];
    }
    Ok((y5, err.norm()))
}

impl LevelSetCurve {
    /// Trace the closed component of the zero set that crosses the positive
    /// x-axis first, using an interpolant of the given degree.
    pub fn new(grid: LevelSetGrid, degree: usize) -> Result<LevelSetCurve> {
        let tube = 8.0 * grid.dx().max(grid.dy());
        let interp = LevelSetInterpolant::new(grid, degree)?;
        let p0 = Self::reference_point(&interp)?;
        let t0 = unit_tangent(&interp, p0)?;
        let hmax = 0.5 * interp.grid().dx().min(interp.grid().dy());
        let tol = 1e-11;

        // First pass: find the length of the closed curve.
        let mut q = p0;
        let mut s = 0.0;
        let mut h = 0.25 * hmax;
        let extent = (interp.grid().xmax - interp.grid().xmin) + (interp.grid().ymax - interp.grid().ymin);
        let max_len = 4.0 * extent;
        let length = loop {
            let (qn, err) = dp_step(&interp, q, h)?;
            if err > tol && h > 1e-8 {
                h *= (0.9 * (tol / err).powf(0.2)).max(0.2);
                continue;
            }
            let qn = interp.project_point(qn)?;
            let g_prev = (q - p0).dot(t0);
            let g_new = (qn - p0).dot(t0);
            if s > 4.0 * hmax && g_prev < 0.0 && g_new >= 0.0 && (qn - p0).norm() < 4.0 * hmax {
                let mut eps = h * (-g_prev) / (g_new - g_prev);
                for _ in 0..8 {
                    let (qe, _) = dp_step(&interp, q, eps)?;
                    let qe = interp.project_point(qe)?;
                    let g = (qe - p0).dot(t0);
                    let dg = unit_tangent(&interp, qe)?.dot(t0);
                    let step = g / dg;
                    eps -= step;
                    if step.abs() < 1e-15 {
                        break;
                    }
                }
                break s + eps;
            }
            q = qn;
            s += h;
            if s > max_len {
                return Err(DpmError::InvalidInput("level-set curve does not close inside the grid".into()));
            }
            if err > 0.0 {
                h *= (0.9 * (tol / err).powf(0.2)).clamp(0.2, 5.0);
            }
            h = h.min(hmax);
        };

        // Second pass: sample at equal parameter spacing.
        let step = length / TRACE_SAMPLES as f64;
        let mut xs = Vec::with_capacity(TRACE_SAMPLES);
        let mut ys = Vec::with_capacity(TRACE_SAMPLES);
        xs.push(p0.x);
        ys.push(p0.y);
        let mut q = p0;
        let mut h = step.min(hmax);
        for k in 1..TRACE_SAMPLES {
            let target = step;
            let mut done = 0.0;
            while done < target {
                let hh = h.min(target - done);
                let (qn, err) = dp_step(&interp, q, hh)?;
                if err > tol && hh > 1e-8 {
                    h = hh * (0.9 * (tol / err).powf(0.2)).max(0.2);
                    continue;
                }
                q = interp.project_point(qn)?;
                done += hh;
                if err > 0.0 {
                    h = (hh * (0.9 * (tol / err).powf(0.2)).clamp(0.2, 5.0)).min(hmax);
                }
            }
            debug_assert!(k == xs.len());
            xs.push(q.x);
            ys.push(q.y);
        }
        let sx = PeriodicSpline::new(xs, step);
        let sy = PeriodicSpline::new(ys, step);
        let mut curve = LevelSetCurve { interp, tube, sx, sy, arc: Vec::new(), curvature_coeffs: Vec::new() };
        curve.build_arclength();
        curve.build_curvature_series()?;
        Ok(curve)
    }

    fn reference_point(interp: &LevelSetInterpolant) -> Result<Point> {
        let g = interp.grid();
        let x0 = g.xmin.max(0.0);
        let dx = 0.25 * g.dx();
        let f = |x: f64| interp.eval(Point::new(x, 0.0)).f;
        let mut a = x0;
        let mut fa = f(a);
        while a + dx <= g.xmax {
            let b = a + dx;
            let fb = f(b);
            if fa == 0.0 {
                return Ok(Point::new(a, 0.0));
            }
            if fa.signum() != fb.signum() {
                let (mut lo, mut hi) = (a, b);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid).signum() == fa.signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-15 * (1.0 + hi.abs()) {
                        break;
                    }
                }
                return interp.project_point(Point::new(0.5 * (lo + hi), 0.0));
            }
            a = b;
            fa = fb;
        }
        Err(DpmError::InvalidInput("level set does not cross the positive x-axis".into()))
    }

    fn speed(&self, t: f64) -> f64 {
        self.sx.eval(t)[1].hypot(self.sy.eval(t)[1])
    }

    fn partial_arc(&self, a: f64, b: f64) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut sum = 0.0;
        for (x, w) in GL_NODES.iter().zip(&GL_WEIGHTS) {
            sum += w * (self.speed(mid + half * x) + self.speed(mid - half * x));
        }
        sum * half
    }

    fn build_arclength(&mut self) {
        let n = self.sx.knots();
        let h = self.sx.step();
        let mut arc = Vec::with_capacity(n + 1);
        arc.push(0.0);
        for k in 0..n {
            let next = arc[k] + self.partial_arc(k as f64 * h, (k + 1) as f64 * h);
            arc.push(next);
        }
        self.arc = arc;
    }

    fn build_curvature_series(&mut self) -> Result<()> {
        let m = CURVATURE_SAMPLES;
        let len = self.length();
        let kappa: Vec<f64> = (0..m)
            .map(|i| Ok(self.frame_at(i as f64 * len / m as f64)?.curvature))
            .collect::<Result<_>>()?;
        let mut coeffs = vec![0.0; 2 * CURVATURE_MODES + 1];
        coeffs[0] = kappa.iter().sum::<f64>() / m as f64;
        for k in 1..=CURVATURE_MODES {
            let (mut c, mut s) = (0.0, 0.0);
            for (i, v) in kappa.iter().enumerate() {
                let a = std::f64::consts::TAU * (k * i) as f64 / m as f64;
                c += v * a.cos();
                s += v * a.sin();
            }
            coeffs[2 * k - 1] = 2.0 * c / m as f64;
            coeffs[2 * k] = 2.0 * s / m as f64;
        }
        self.curvature_coeffs = coeffs;
        Ok(())
    }

    pub fn length(&self) -> f64 {
        *self.arc.last().expect("arclength table")
    }

    pub fn tube_width(&self) -> f64 {
        self.tube
    }

    pub fn interpolant(&self) -> &LevelSetInterpolant {
        &self.interp
    }

    pub fn indicator(&self, p: Point) -> f64 {
        let j = self.interp.eval(p);
        let g = j.grad().norm();
        if g > 0.0 {
            j.f / g
        } else {
            j.f
        }
    }

    /// Spline parameter for arclength `s`.
    fn param_of_arclength(&self, s: f64) -> f64 {
        let len = self.length();
        let s = s.rem_euclid(len);
        let k = match self.arc.binary_search_by(|a| a.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(self.arc.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.arc.len() - 2),
        };
        let h = self.sx.step();
        let tk = k as f64 * h;
        let mut t = tk + h * (s - self.arc[k]) / (self.arc[k + 1] - self.arc[k]);
        for _ in 0..20 {
            let f = self.arc[k] + self.partial_arc(tk, t) - s;
            let dt = f / self.speed(t);
            t -= dt;
            if dt.abs() < 1e-15 * (1.0 + t.abs()) {
                break;
            }
        }
        t
    }

    fn arclength_of_param(&self, t: f64) -> f64 {
        let p = self.sx.period();
        let t = t.rem_euclid(p);
        let h = self.sx.step();
        let k = ((t / h).floor() as usize).min(self.sx.knots() - 1);
        (self.arc[k] + self.partial_arc(k as f64 * h, t)).rem_euclid(self.length())
    }

    fn frame_at(&self, s: f64) -> Result<CurvePoint> {
        let t = self.param_of_arclength(s);
        let p = Point::new(self.sx.eval(t)[0], self.sy.eval(t)[0]);
        let q = self.interp.project_point(p)?;
        let j = self.interp.eval(q);
        let g = j.grad().norm();
        Ok(CurvePoint {
            position: q,
            arclength: s.rem_euclid(self.length()),
            normal: (1.0 / g) * j.grad(),
            curvature: j.curvature(),
        })
    }

    pub fn point_at(&self, s: f64) -> Result<CurvePoint> {
        self.frame_at(s)
    }

    pub fn project(&self, p: Point) -> Result<Projection> {
        let approx = self.indicator(p);
        if approx.abs() > self.tube {
            return Err(DpmError::OutOfTube { x: p.x, y: p.y, distance: approx, tube: self.tube });
        }
        let q = self.interp.project_point(p)?;
        let j = self.interp.eval(q);
        let g = j.grad().norm();
        if g < 1e-14 {
            return Err(DpmError::DegenerateLevelSet { x: q.x, y: q.y });
        }
        let n = (1.0 / g) * j.grad();
        let distance = (p - q).dot(n);
        if distance.abs() > self.tube {
            return Err(DpmError::OutOfTube { x: p.x, y: p.y, distance, tube: self.tube });
        }
        // Locate the spline parameter of the foot point.
        let h = self.sx.step();
        let mut best = (f64::INFINITY, 0usize);
        for k in 0..self.sx.knots() {
            let t = k as f64 * h;
            let d = (self.sx.eval(t)[0] - q.x).powi(2) + (self.sy.eval(t)[0] - q.y).powi(2);
            if d < best.0 {
                best = (d, k);
            }
        }
        let mut t = best.1 as f64 * h;
        for _ in 0..20 {
            let x = self.sx.eval(t);
            let y = self.sy.eval(t);
            let g1 = (x[0] - q.x) * x[1] + (y[0] - q.y) * y[1];
            let g2 = x[1] * x[1] + y[1] * y[1] + (x[0] - q.x) * x[2] + (y[0] - q.y) * y[2];
            let dt = g1 / g2;
            t -= dt;
            if dt.abs() < 1e-15 {
                break;
            }
        }
        let foot = CurvePoint {
            position: q,
            arclength: self.arclength_of_param(t),
            normal: n,
            curvature: j.curvature(),
        };
        Ok(Projection { foot, distance })
    }

    pub fn curvature_derivatives(&self, s: f64) -> (f64, f64) {
        let w = std::f64::consts::TAU / self.length();
        let (mut d1, mut d2) = (0.0, 0.0);
        for k in 1..=CURVATURE_MODES {
            let kw = k as f64 * w;
            let (c, sn) = (self.curvature_coeffs[2 * k - 1], self.curvature_coeffs[2 * k]);
            let (sa, ca) = (kw * s).sin_cos();
            d1 += kw * (-c * sa + sn * ca);
            d2 -= kw * kw * (c * ca + sn * sa);
        }
        (d1, d2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_curve(n: usize, degree: usize) -> LevelSetCurve {
        let g = LevelSetGrid::builtin("unit_circle", n, n, (-2.0, 2.0), (-2.0, 2.0)).unwrap();
        LevelSetCurve::new(g, degree).unwrap()
    }

    #[test]
    fn lagrange_weights_reproduce_cubic() {
        let xs = [0.0, 0.5, 1.0, 1.5];
        let w = lagrange_weights(&xs, 0.7);
        let f = |x: f64| 2.0 * x * x * x - x + 3.0;
        let v: f64 = xs.iter().zip(&w[0]).map(|(x, w)| f(*x) * w).sum();
        let d: f64 = xs.iter().zip(&w[1]).map(|(x, w)| f(*x) * w).sum();
        let dd: f64 = xs.iter().zip(&w[2]).map(|(x, w)| f(*x) * w).sum();
        assert!((v - f(0.7)).abs() < 1e-13);
        assert!((d - (6.0 * 0.49 - 1.0)).abs() < 1e-12);
        assert!((dd - 12.0 * 0.7).abs() < 1e-11);
    }

    #[test]
    fn traced_circle_matches_exact_geometry() {
        let c = circle_curve(41, 2);
        assert!((c.length() - std::f64::consts::TAU).abs() < 1e-9, "{}", c.length());
        let pr = c.project(Point::new(0.6, 0.9)).unwrap();
        let r = 0.6f64.hypot(0.9);
        assert!((pr.distance - (r - 1.0)).abs() < 1e-12);
        assert!((pr.foot.curvature - 1.0).abs() < 1e-10);
        assert!((pr.foot.arclength - 0.9f64.atan2(0.6)).abs() < 1e-9);
        let back = pr.foot.position + pr.distance * pr.foot.normal;
        assert!((back - Point::new(0.6, 0.9)).norm() < 1e-10);
        let (k1, k2) = c.curvature_derivatives(1.3);
        assert!(k1.abs() < 1e-8 && k2.abs() < 1e-6, "{k1} {k2}");
        let p = c.point_at(std::f64::consts::PI).unwrap();
        assert!((p.position - Point::new(-1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn ellipse_projection_reconstructs_point() {
        let g = LevelSetGrid::from_fn(81, 81, (-2.0, 2.0), (-2.0, 2.0), |x, y| x * x / 1.44 + y * y / 0.64 - 1.0)
            .unwrap();
        let c = LevelSetCurve::new(g, 4).unwrap();
        for &(x, y) in &[(1.3, 0.1), (0.2, 0.7), (-0.9, -0.5)] {
            let p = Point::new(x, y);
            let pr = c.project(p).unwrap();
            let back = pr.foot.position + pr.distance * pr.foot.normal;
            assert!((back - p).norm() < 1e-8);
            let again = c.point_at(pr.foot.arclength).unwrap();
            assert!((again.position - pr.foot.position).norm() < 1e-8);
        }
    }

    #[test]
    fn parse_round_trip_and_errors() {
        let g = LevelSetGrid::builtin("unit_circle", 5, 4, (-2.0, 2.0), (-1.5, 1.5)).unwrap();
        let back = LevelSetGrid::parse(&g.to_text()).unwrap();
        assert_eq!(back.nx, 5);
        assert_eq!(back.ny, 4);
        for (a, b) in back.values.iter().zip(&g.values) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(LevelSetGrid::parse("3 3 0 1 0 1\n1 2 3\n").is_err());
        assert!(LevelSetGrid::parse("2 2 0 1 0 1\n1 2 x 4\n").is_err());
        assert!(LevelSetGrid::builtin("square", 5, 5, (0.0, 1.0), (0.0, 1.0)).is_err());
    }

    #[test]
    fn degenerate_gradient_is_reported() {
        let g = LevelSetGrid::from_fn(21, 21, (-1.0, 1.0), (-1.0, 1.0), |_, _| 1.0).unwrap();
        let i = LevelSetInterpolant::new(g, 2).unwrap();
        assert!(matches!(i.project_point(Point::new(0.1, 0.2)), Err(DpmError::DegenerateLevelSet { .. })));
    }
}
