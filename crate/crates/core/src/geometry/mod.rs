//! Interface curves: an analytic circle and a traced level-set curve.
//!
//! Conventions: the unit normal points out of the enclosed region, the signed
//! distance is positive outside, curvature is the divergence of the normal
//! (positive on a circle), and arclength runs counter-clockwise from the point
//! where the curve crosses the positive x-axis through the centre.

mod level_set;
mod spline;

pub use level_set::{LevelSetCurve, LevelSetGrid, LevelSetInterpolant, LevelSetJet};
pub use spline::PeriodicSpline;

use std::ops::{Add, Mul, Sub};

use crate::error::{DpmError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Point {
        Point { x, y }
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<Point> for f64 {
    type Output = Point;
    fn mul(self, p: Point) -> Point {
        Point::new(self * p.x, self * p.y)
    }
}

/// A point on the curve with its local frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub position: Point,
    pub arclength: f64,
    /// Unit outward normal.
    pub normal: Point,
    pub curvature: f64,
}

impl CurvePoint {
    /// Unit tangent, counter-clockwise.
    pub fn tangent(&self) -> Point {
        Point::new(-self.normal.y, self.normal.x)
    }
}

/// Closest-point projection of a nearby point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub foot: CurvePoint,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
}

impl Circle {
    pub fn new(center: Point, radius: f64) -> Result<Circle> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(DpmError::InvalidInput(format!("circle radius must be positive, got {radius}")));
        }
        Ok(Circle { center, radius })
    }

    pub fn unit() -> Circle {
        Circle { center: Point::new(0.0, 0.0), radius: 1.0 }
    }

    fn at_angle(&self, theta: f64) -> CurvePoint {
        let theta = theta.rem_euclid(std::f64::consts::TAU);
        let n = Point::new(theta.cos(), theta.sin());
        CurvePoint {
            position: self.center + self.radius * n,
            arclength: self.radius * theta,
            normal: n,
            curvature: 1.0 / self.radius,
        }
    }
}

/// Interface curve backing a subdomain.
#[derive(Clone, Debug)]
pub enum Geometry {
    Circle(Circle),
    LevelSet(Box<LevelSetCurve>),
}

impl Geometry {
    pub fn length(&self) -> f64 {
        match self {
            Geometry::Circle(c) => std::f64::consts::TAU * c.radius,
            Geometry::LevelSet(l) => l.length(),
        }
    }

    /// Maximum distance from the curve at which projection is supported.
    pub fn tube_width(&self) -> f64 {
        match self {
            Geometry::Circle(c) => 0.5 * c.radius,
            Geometry::LevelSet(l) => l.tube_width(),
        }
    }

    /// Cheap inside/outside indicator scaled like a distance: negative inside.
    /// Exact for a circle, first-order accurate for a level set.
    pub fn indicator(&self, p: Point) -> f64 {
        match self {
            Geometry::Circle(c) => (p - c.center).norm() - c.radius,
            Geometry::LevelSet(l) => l.indicator(p),
        }
    }

    pub fn project(&self, p: Point) -> Result<Projection> {
        match self {
            Geometry::Circle(c) => {
                let r = p - c.center;
                let d = r.norm() - c.radius;
                if d.abs() > self.tube_width() {
                    return Err(DpmError::OutOfTube {
                        x: p.x,
                        y: p.y,
                        distance: d,
                        tube: self.tube_width(),
                    });
                }
                let foot = c.at_angle(r.y.atan2(r.x));
                Ok(Projection { foot, distance: d })
            }
            Geometry::LevelSet(l) => l.project(p),
        }
    }

    pub fn signed_distance(&self, p: Point) -> Result<f64> {
        Ok(self.project(p)?.distance)
    }

    /// Curve point at arclength `s` (taken modulo the length).
    pub fn point_at(&self, s: f64) -> Result<CurvePoint> {
        match self {
            Geometry::Circle(c) => {
                let mut cp = c.at_angle(s / c.radius);
                cp.arclength = s.rem_euclid(self.length());
                Ok(cp)
            }
            Geometry::LevelSet(l) => l.point_at(s),
        }
    }

    pub fn curvature_at(&self, s: f64) -> Result<f64> {
        Ok(self.point_at(s)?.curvature)
    }

    /// First and second arclength derivatives of the curvature.
    pub fn curvature_derivatives(&self, s: f64) -> (f64, f64) {
        match self {
            Geometry::Circle(_) => (0.0, 0.0),
            Geometry::LevelSet(l) => l.curvature_derivatives(s),
        }
    }

    /// `n` equispaced arclength nodes with trapezoid weights.
    pub fn curve_quadrature(&self, n: usize) -> Result<Vec<(CurvePoint, f64)>> {
        if n == 0 {
            return Err(DpmError::InvalidInput("quadrature needs at least one node".into()));
        }
        let len = self.length();
        let w = len / n as f64;
        (0..n)
            .map(|k| Ok((self.point_at(k as f64 * w)?, w)))
            .collect()
    }
}
