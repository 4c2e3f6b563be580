//! Periodic cubic spline on uniform knots.

#[derive(Clone, Debug)]
pub struct PeriodicSpline {
    step: f64,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl PeriodicSpline {
    /// Interpolate `values[k]` at `t = k * step`, period `values.len() * step`.
    pub fn new(values: Vec<f64>, step: f64) -> PeriodicSpline {
        let n = values.len();
        assert!(n >= 3, "periodic spline needs at least three knots");
        let rhs: Vec<f64> = (0..n)
            .map(|i| {
                let prev = values[(i + n - 1) % n];
                let next = values[(i + 1) % n];
                6.0 * (next - 2.0 * values[i] + prev) / (step * step)
            })
            .collect();
        let second = solve_cyclic(1.0, 4.0, 1.0, &rhs);
        PeriodicSpline { step, values, second }
    }

    pub fn period(&self) -> f64 {
        self.step * self.values.len() as f64
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn knots(&self) -> usize {
        self.values.len()
    }

    /// Value, first and second derivative at `t`.
    pub fn eval(&self, t: f64) -> [f64; 3] {
        let n = self.values.len();
        let p = self.period();
        let tt = t.rem_euclid(p);
        let mut k = (tt / self.step).floor() as usize;
        if k >= n {
            k = n - 1;
        }
        let h = self.step;
        let a = (k as f64 + 1.0) * h - tt;
        let b = tt - k as f64 * h;
        let (y0, y1) = (self.values[k], self.values[(k + 1) % n]);
        let (m0, m1) = (self.second[k], self.second[(k + 1) % n]);
        let v = m0 * a.powi(3) / (6.0 * h)
            + m1 * b.powi(3) / (6.0 * h)
            + (y0 / h - m0 * h / 6.0) * a
            + (y1 / h - m1 * h / 6.0) * b;
        let d1 = -m0 * a * a / (2.0 * h) + m1 * b * b / (2.0 * h) - (y0 / h - m0 * h / 6.0)
            + (y1 / h - m1 * h / 6.0);
        let d2 = m0 * a / h + m1 * b / h;
        [v, d1, d2]
    }
}

/// Solve the cyclic tridiagonal system with constant bands `a, b, c`
/// via Sherman-Morrison.
fn solve_cyclic(a: f64, b: f64, c: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let gamma = -b;
    let mut diag = vec![b; n];
    diag[0] = b - gamma;
    diag[n - 1] = b - a * c / gamma;
    let x = solve_tridiagonal(a, &diag, c, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = c;
    let z = solve_tridiagonal(a, &diag, c, &u);
    let fact = (x[0] + a * x[n - 1] / gamma) / (1.0 + z[0] + a * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

fn solve_tridiagonal(a: f64, diag: &[f64], c: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c / diag[0];
    dp[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - a * cp[i - 1];
        cp[i] = c / m;
        dp[i] = (rhs[i] - a * dp[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn reproduces_knots_and_is_periodic() {
        let n = 40;
        let step = 0.1;
        let vals: Vec<f64> = (0..n).map(|k| (TAU * k as f64 / n as f64).sin()).collect();
        let s = PeriodicSpline::new(vals.clone(), step);
        for (k, v) in vals.iter().enumerate() {
            assert!((s.eval(k as f64 * step)[0] - v).abs() < 1e-14);
        }
        let a = s.eval(0.123);
        let b = s.eval(0.123 + s.period());
        assert!((a[0] - b[0]).abs() < 1e-13 && (a[1] - b[1]).abs() < 1e-11);
    }

    #[test]
    fn fourth_order_accuracy_on_trig() {
        let err = |n: usize| {
            let step = TAU / n as f64;
            let vals: Vec<f64> = (0..n).map(|k| (k as f64 * step).cos()).collect();
            let s = PeriodicSpline::new(vals, step);
            (0..997)
                .map(|i| {
                    let t = TAU * i as f64 / 997.0;
                    (s.eval(t)[0] - t.cos()).abs()
                })
                .fold(0.0, f64::max)
        };
        let rate = (err(32) / err(64)).log2();
        assert!(rate > 3.7, "rate {rate}");
    }
}
