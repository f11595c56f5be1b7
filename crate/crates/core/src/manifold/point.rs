use std::f64::consts::{PI, TAU};

/// A point in chart coordinates.
///
/// * circle: arclength coordinate in `[0, 1)` (the circle has length 1)
/// * torus: `(x, y)` in `[0, 1)^2`
/// * sphere: colatitude `theta` in `[0, pi]`, azimuth `phi` in `[0, 2pi)`
/// * product: one point per factor
///
/// The constructors wrap coordinates into their canonical ranges.
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Circle(f64),
    Torus([f64; 2]),
    Sphere { theta: f64, phi: f64 },
    Product(Box<Point>, Box<Point>),
}

/// Reduces `x` modulo 1 into `[0, 1)`.
pub(crate) fn wrap_unit(x: f64) -> f64 {
    let y = x - x.floor();
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

/// Periodic distance between two coordinates on a circle of length 1.
pub(crate) fn periodic_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % 1.0;
    d.min(1.0 - d)
}

impl Point {
    pub fn circle(t: f64) -> Self {
        Point::Circle(wrap_unit(t))
    }

    pub fn torus(x: f64, y: f64) -> Self {
        Point::Torus([wrap_unit(x), wrap_unit(y)])
    }

    /// Builds a sphere point, folding colatitudes outside `[0, pi]` back
    /// through the poles.
    pub fn sphere(theta: f64, phi: f64) -> Self {
        let mut theta = theta.rem_euclid(TAU);
        let mut phi = phi;
        if theta > PI {
            theta = TAU - theta;
            phi += PI;
        }
        let mut phi = phi.rem_euclid(TAU);
        if phi >= TAU {
            phi = 0.0;
        }
        Point::Sphere { theta, phi }
    }

    /// Sphere point from a (not necessarily normalized) Cartesian vector.
    pub fn from_unit_vector(v: [f64; 3]) -> Self {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let z = (v[2] / norm).clamp(-1.0, 1.0);
        let theta = v[0].hypot(v[1]).atan2(v[2]).clamp(0.0, PI);
        let phi = if z.abs() == 1.0 { 0.0 } else { v[1].atan2(v[0]) };
        Point::sphere(theta, phi)
    }

    pub fn product(a: Point, b: Point) -> Self {
        Point::Product(Box::new(a), Box::new(b))
    }

    /// Cartesian unit vector of a sphere point.
    ///
    /// # Panics
    /// If the point is not a sphere point.
    pub fn unit_vector(&self) -> [f64; 3] {
        match self {
            Point::Sphere { theta, phi } => {
                let (st, ct) = theta.sin_cos();
                let (sp, cp) = phi.sin_cos();
                [st * cp, st * sp, ct]
            }
            _ => panic!("unit_vector called on a non-sphere point"),
        }
    }

    /// Flattened chart coordinates, factor by factor.
    pub fn coords(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.push_coords(&mut out);
        out
    }

    fn push_coords(&self, out: &mut Vec<f64>) {
        match self {
            Point::Circle(t) => out.push(*t),
            Point::Torus(xy) => out.extend_from_slice(xy),
            Point::Sphere { theta, phi } => {
                out.push(*theta);
                out.push(*phi);
            }
            Point::Product(a, b) => {
                a.push_coords(out);
                b.push_coords(out);
            }
        }
    }
}
