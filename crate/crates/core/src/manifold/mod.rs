//! Compact manifolds with closed-form Laplacian eigendata.
//!
//! The catalogue is the circle of length 1, the flat torus `[0,1)^2`, the
//! unit round sphere and finite products of these. Every member is
//! homogeneous, so ball volumes do not depend on the center.

mod basis;
mod point;
mod rules;

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_interval;

pub use basis::{eigenbasis, evaluate_mode, BasisEntry, EigenBasis, Mode};
pub use point::Point;
pub(crate) use point::periodic_gap;
pub use rules::{ball_quadrature, global_quadrature, BallResolution, Exactness, QuadratureRule};

/// Nodes used by the 1-d quadratures inside product ball volumes and
/// product sphere measures.
const PRODUCT_ANGLE_NODES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum Manifold {
    Circle,
    Torus2,
    Sphere2,
    Product(Box<Manifold>, Box<Manifold>),
}

impl Manifold {
    pub fn product(a: Manifold, b: Manifold) -> Self {
        Manifold::Product(Box::new(a), Box::new(b))
    }

    pub fn dimension(&self) -> usize {
        match self {
            Manifold::Circle => 1,
            Manifold::Torus2 | Manifold::Sphere2 => 2,
            Manifold::Product(a, b) => a.dimension() + b.dimension(),
        }
    }

    pub fn total_volume(&self) -> f64 {
        match self {
            Manifold::Circle | Manifold::Torus2 => 1.0,
            Manifold::Sphere2 => 4.0 * PI,
            Manifold::Product(a, b) => a.total_volume() * b.total_volume(),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Manifold::Circle => 0.5,
            Manifold::Torus2 => 0.5f64.sqrt(),
            Manifold::Sphere2 => PI,
            Manifold::Product(a, b) => a.diameter().hypot(b.diameter()),
        }
    }

    /// Largest radius for which [`Manifold::ball_volume`] has a closed form
    /// (flat-disc regime on the torus and circle, whole sphere on `S^2`).
    pub fn max_ball_radius(&self) -> f64 {
        match self {
            Manifold::Circle | Manifold::Torus2 => 0.5,
            Manifold::Sphere2 => PI,
            Manifold::Product(a, b) => a.max_ball_radius().min(b.max_ball_radius()),
        }
    }

    /// Number of chart coordinates of a point.
    pub fn coord_count(&self) -> usize {
        match self {
            Manifold::Circle => 1,
            Manifold::Torus2 | Manifold::Sphere2 => 2,
            Manifold::Product(a, b) => a.coord_count() + b.coord_count(),
        }
    }

    pub fn point_from_coords(&self, coords: &[f64]) -> Result<Point> {
        if coords.len() != self.coord_count() {
            return Err(Error::InvalidArgument(format!(
                "{self} points have {} coordinates, got {}",
                self.coord_count(),
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coordinate".into()));
        }
        Ok(match self {
            Manifold::Circle => Point::circle(coords[0]),
            Manifold::Torus2 => Point::torus(coords[0], coords[1]),
            Manifold::Sphere2 => Point::sphere(coords[0], coords[1]),
            Manifold::Product(a, b) => {
                let (ca, cb) = coords.split_at(a.coord_count());
                Point::product(a.point_from_coords(ca)?, b.point_from_coords(cb)?)
            }
        })
    }

    /// Whether `p` is a point of this manifold.
    pub fn contains(&self, p: &Point) -> bool {
        match (self, p) {
            (Manifold::Circle, Point::Circle(_))
            | (Manifold::Torus2, Point::Torus(_))
            | (Manifold::Sphere2, Point::Sphere { .. }) => true,
            (Manifold::Product(a, b), Point::Product(pa, pb)) => a.contains(pa) && b.contains(pb),
            _ => false,
        }
    }

    /// Geodesic distance.
    ///
    /// # Panics
    /// If a point does not belong to the manifold.
    pub fn distance(&self, z: &Point, w: &Point) -> f64 {
        match (self, z, w) {
            (Manifold::Circle, Point::Circle(a), Point::Circle(b)) => periodic_gap(*a, *b),
            (Manifold::Torus2, Point::Torus(a), Point::Torus(b)) => {
                periodic_gap(a[0], b[0]).hypot(periodic_gap(a[1], b[1]))
            }
            (Manifold::Sphere2, Point::Sphere { .. }, Point::Sphere { .. }) => {
                sphere_angle(z.unit_vector(), w.unit_vector())
            }
            (Manifold::Product(ma, mb), Point::Product(za, zb), Point::Product(wa, wb)) => {
                ma.distance(za, wa).hypot(mb.distance(zb, wb))
            }
            _ => panic!("point does not belong to {self}"),
        }
    }

    /// Volume of a geodesic ball of radius `r` (any center).
    pub fn ball_volume(&self, r: f64) -> Result<f64> {
        self.check_radius(r)?;
        Ok(match self {
            Manifold::Circle => 2.0 * r,
            Manifold::Torus2 => PI * r * r,
            Manifold::Sphere2 => TAU * (1.0 - r.cos()),
            Manifold::Product(a, b) => {
                // ball = {(x, y): d_a^2 + d_b^2 <= r^2}; with d_a = r sin t
                // the integrand is smooth on [0, pi/2].
                let (ts, ws) = gauss_legendre_interval(PRODUCT_ANGLE_NODES, 0.0, PI / 2.0);
                ts.iter()
                    .zip(&ws)
                    .map(|(&t, &w)| {
                        let (s, c) = t.sin_cos();
                        w * a.sphere_measure(r * s) * b.ball_volume_unchecked(r * c) * r * c
                    })
                    .sum()
            }
        })
    }

    fn ball_volume_unchecked(&self, r: f64) -> f64 {
        self.ball_volume(r).expect("radius checked by caller")
    }

    pub(crate) fn check_radius(&self, r: f64) -> Result<()> {
        let max = self.max_ball_radius();
        if !(r >= 0.0) || r > max {
            return Err(Error::RadiusTooLarge {
                manifold: self.to_string(),
                radius: r,
                max,
            });
        }
        Ok(())
    }

    /// Measure of the geodesic sphere of radius `rho`, i.e. the derivative
    /// of the ball volume.
    pub fn sphere_measure(&self, rho: f64) -> f64 {
        match self {
            Manifold::Circle => 2.0,
            Manifold::Torus2 => TAU * rho,
            Manifold::Sphere2 => TAU * rho.sin(),
            Manifold::Product(a, b) => {
                let (ts, ws) = gauss_legendre_interval(PRODUCT_ANGLE_NODES, 0.0, PI / 2.0);
                rho * ts
                    .iter()
                    .zip(&ws)
                    .map(|(&t, &w)| {
                        let (s, c) = t.sin_cos();
                        w * a.sphere_measure(rho * s) * b.sphere_measure(rho * c)
                    })
                    .sum::<f64>()
            }
        }
    }

    /// Points on the geodesic sphere of radius `rho > 0` about `center`,
    /// with weights summing to [`Manifold::sphere_measure`].
    ///
    /// `directions` controls the angular resolution; the circle always
    /// returns its two points.
    pub fn geodesic_sphere(&self, center: &Point, rho: f64, directions: usize) -> Vec<(Point, f64)> {
        let directions = directions.max(1);
        match (self, center) {
            (Manifold::Circle, Point::Circle(c)) => {
                vec![(Point::circle(c + rho), 1.0), (Point::circle(c - rho), 1.0)]
            }
            (Manifold::Torus2, Point::Torus(c)) => {
                let w = TAU * rho / directions as f64;
                (0..directions)
                    .map(|j| {
                        let (s, co) = (TAU * j as f64 / directions as f64).sin_cos();
                        (Point::torus(c[0] + rho * co, c[1] + rho * s), w)
                    })
                    .collect()
            }
            (Manifold::Sphere2, Point::Sphere { .. }) => {
                let w = TAU * rho.sin() / directions as f64;
                (0..directions)
                    .map(|j| (sphere_offset(center, rho, TAU * j as f64 / directions as f64), w))
                    .collect()
            }
            (Manifold::Product(ma, mb), Point::Product(ca, cb)) => {
                let nt = (directions / 4).max(4);
                let sub = (directions / 2).max(4);
                let (ts, wts) = gauss_legendre_interval(nt, 0.0, PI / 2.0);
                let mut out = Vec::new();
                for (&t, &wt) in ts.iter().zip(&wts) {
                    let (s, c) = t.sin_cos();
                    let sa = ma.geodesic_sphere(ca, rho * s, sub);
                    let sb = mb.geodesic_sphere(cb, rho * c, sub);
                    for (pa, wa) in &sa {
                        for (pb, wb) in &sb {
                            out.push((Point::product(pa.clone(), pb.clone()), rho * wt * wa * wb));
                        }
                    }
                }
                out
            }
            _ => panic!("point does not belong to {self}"),
        }
    }

    /// Uniform random point.
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match self {
            Manifold::Circle => Point::circle(rng.random::<f64>()),
            Manifold::Torus2 => Point::torus(rng.random::<f64>(), rng.random::<f64>()),
            Manifold::Sphere2 => {
                let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
                Point::sphere(z.clamp(-1.0, 1.0).acos(), TAU * rng.random::<f64>())
            }
            Manifold::Product(a, b) => Point::product(a.random_point(rng), b.random_point(rng)),
        }
    }

    /// Uniform random point in the geodesic ball `B(center, r)`.
    pub fn sample_ball<R: Rng + ?Sized>(&self, center: &Point, r: f64, rng: &mut R) -> Result<Point> {
        self.check_radius(r)?;
        Ok(self.sample_ball_unchecked(center, r, rng))
    }

    fn sample_ball_unchecked<R: Rng + ?Sized>(&self, center: &Point, r: f64, rng: &mut R) -> Point {
        match (self, center) {
            (Manifold::Circle, Point::Circle(c)) => Point::circle(c + r * (2.0 * rng.random::<f64>() - 1.0)),
            (Manifold::Torus2, Point::Torus(c)) => {
                let rho = r * rng.random::<f64>().sqrt();
                let (s, co) = (TAU * rng.random::<f64>()).sin_cos();
                Point::torus(c[0] + rho * co, c[1] + rho * s)
            }
            (Manifold::Sphere2, Point::Sphere { .. }) => {
                let cos_r = r.cos();
                let u = cos_r + (1.0 - cos_r) * rng.random::<f64>();
                sphere_offset(center, u.clamp(-1.0, 1.0).acos(), TAU * rng.random::<f64>())
            }
            (Manifold::Product(ma, mb), Point::Product(ca, cb)) => loop {
                let pa = ma.sample_ball_unchecked(ca, r, rng);
                let pb = mb.sample_ball_unchecked(cb, r, rng);
                let (da, db) = (ma.distance(ca, &pa), mb.distance(cb, &pb));
                if da * da + db * db <= r * r {
                    break Point::product(pa, pb);
                }
            },
            _ => panic!("point does not belong to {self}"),
        }
    }

    /// Deterministic near-uniform point set of size `n`.
    ///
    /// Torus: additive recurrence with the plastic-number generators.
    /// Sphere: Fibonacci spiral. Circle: midpoint grid. Products: seeded
    /// uniform samples (seed 0).
    pub fn low_discrepancy_points(&self, n: usize) -> Vec<Point> {
        match self {
            Manifold::Circle => (0..n).map(|i| Point::circle((i as f64 + 0.5) / n as f64)).collect(),
            Manifold::Torus2 => {
                const G: f64 = 1.324_717_957_244_746;
                let (a1, a2) = (1.0 / G, 1.0 / (G * G));
                (0..n)
                    .map(|i| Point::torus(0.5 + a1 * i as f64, 0.5 + a2 * i as f64))
                    .collect()
            }
            Manifold::Sphere2 => fibonacci_sphere(n),
            Manifold::Product(..) => {
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
                (0..n).map(|_| self.random_point(&mut rng)).collect()
            }
        }
    }

    /// A fixed, documented reference point: torus `(0,0)`, circle `0`,
    /// sphere north pole, products factorwise.
    pub fn reference_point(&self) -> Point {
        match self {
            Manifold::Circle => Point::circle(0.0),
            Manifold::Torus2 => Point::torus(0.0, 0.0),
            Manifold::Sphere2 => Point::sphere(0.0, 0.0),
            Manifold::Product(a, b) => Point::product(a.reference_point(), b.reference_point()),
        }
    }
}

/// Fibonacci spiral with `n` points on the unit sphere.
pub fn fibonacci_sphere(n: usize) -> Vec<Point> {
    let golden_angle = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            Point::sphere(z.clamp(-1.0, 1.0).acos(), golden_angle * i as f64)
        })
        .collect()
}

/// Great-circle angle between unit vectors; `atan2` keeps full relative
/// precision for nearby points.
fn sphere_angle(u: [f64; 3], v: [f64; 3]) -> f64 {
    let cross = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    let cos = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    sin.atan2(cos)
}

/// Point at geodesic distance `rho` from `center` in direction `alpha`,
/// measured in the tangent frame (e_theta, e_phi).
fn sphere_offset(center: &Point, rho: f64, alpha: f64) -> Point {
    let Point::Sphere { theta, phi } = center else {
        panic!("sphere_offset needs a sphere point")
    };
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let n = [st * cp, st * sp, ct];
    let e1 = [ct * cp, ct * sp, -st];
    let e2 = [-sp, cp, 0.0];
    let (sr, cr) = rho.sin_cos();
    let (sa, ca) = alpha.sin_cos();
    let v = [
        cr * n[0] + sr * (ca * e1[0] + sa * e2[0]),
        cr * n[1] + sr * (ca * e1[1] + sa * e2[1]),
        cr * n[2] + sr * (ca * e1[2] + sa * e2[2]),
    ];
    Point::from_unit_vector(v)
}

impl fmt::Display for Manifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Manifold::Circle => write!(f, "circle"),
            Manifold::Torus2 => write!(f, "torus2"),
            Manifold::Sphere2 => write!(f, "sphere2"),
            Manifold::Product(a, b) => write!(f, "product({a},{b})"),
        }
    }
}

/// Names that denote manifolds outside the closed-form catalogue.
const KNOWN_UNSUPPORTED: &[&str] = &["klein", "rp2", "cp2", "hp2", "projective", "cayley", "sphere3", "torus3"];

impl FromStr for Manifold {
    type Err = Error;

    /// Grammar: `circle | torus2 | sphere2 | product(M,M)`, whitespace ignored.
    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let (m, rest) = parse_manifold(&compact).ok_or_else(|| unsupported_or_syntax(&compact))?;
        if !rest.is_empty() {
            return Err(Error::ManifoldSyntax(s.to_string()));
        }
        Ok(m)
    }
}

fn unsupported_or_syntax(s: &str) -> Error {
    let lower = s.to_ascii_lowercase();
    if KNOWN_UNSUPPORTED.iter().any(|name| lower.contains(name)) {
        Error::UnimplementedManifold(s.to_string())
    } else {
        Error::ManifoldSyntax(s.to_string())
    }
}

fn parse_manifold(s: &str) -> Option<(Manifold, &str)> {
    for (name, m) in [
        ("circle", Manifold::Circle),
        ("torus2", Manifold::Torus2),
        ("sphere2", Manifold::Sphere2),
    ] {
        if let Some(rest) = s.strip_prefix(name) {
            return Some((m, rest));
        }
    }
    let rest = s.strip_prefix("product(")?;
    let (a, rest) = parse_manifold(rest)?;
    let rest = rest.strip_prefix(',')?;
    let (b, rest) = parse_manifold(rest)?;
    let rest = rest.strip_prefix(')')?;
    Some((Manifold::product(a, b), rest))
}
