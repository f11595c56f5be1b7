//! Global and geodesic-ball quadrature rules.

use std::f64::consts::TAU;

use super::{Manifold, Point};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, gauss_legendre_interval};

/// Relative tolerance on the weight sum of a ball rule before the
/// resolution is doubled.
const BALL_WEIGHT_TOLERANCE: f64 = 1e-8;
const MAX_DOUBLINGS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exactness {
    /// Exact for products of two modes of frequency at most this value.
    MaxFrequency(f64),
    /// Observed relative error of the weight sum against the closed-form
    /// measure.
    WeightSumError(f64),
}

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
    pub exactness: Exactness,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate<F: Fn(&Point) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }
}

/// Polar resolution of a ball rule: Gauss-Legendre nodes in the radius and
/// uniformly spaced directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BallResolution {
    pub radial: usize,
    pub angular: usize,
}

impl Default for BallResolution {
    fn default() -> Self {
        BallResolution {
            radial: 64,
            angular: 128,
        }
    }
}

impl BallResolution {
    /// Reduced resolution used for double integrals.
    pub fn reduced() -> Self {
        BallResolution {
            radial: 32,
            angular: 64,
        }
    }

    fn doubled(self) -> Self {
        BallResolution {
            radial: 2 * self.radial,
            angular: 2 * self.angular,
        }
    }
}

/// Rule integrating `φ_i φ_j` exactly for all modes with frequency at most
/// `max_frequency`.
///
/// Torus and circle use uniform grids with more points per axis than twice
/// the largest integer frequency; the sphere uses Gauss-Legendre in
/// `cos θ` times a uniform azimuth grid; products are tensorized.
pub fn global_quadrature(manifold: &Manifold, max_frequency: f64) -> Result<QuadratureRule> {
    if !(max_frequency >= 1.0) || !max_frequency.is_finite() {
        return Err(Error::BandwidthTooSmall(max_frequency));
    }
    let (nodes, weights) = global_nodes(manifold, max_frequency);
    Ok(QuadratureRule {
        nodes,
        weights,
        exactness: Exactness::MaxFrequency(max_frequency),
    })
}

fn integer_frequency_cap(max_frequency: f64) -> usize {
    (max_frequency * (1.0 + 1e-12) / TAU).floor() as usize
}

fn global_nodes(manifold: &Manifold, max_frequency: f64) -> (Vec<Point>, Vec<f64>) {
    match manifold {
        Manifold::Circle => {
            let n = 2 * integer_frequency_cap(max_frequency) + 1;
            let nodes = (0..n).map(|i| Point::circle(i as f64 / n as f64)).collect();
            (nodes, vec![1.0 / n as f64; n])
        }
        Manifold::Torus2 => {
            let n = 2 * integer_frequency_cap(max_frequency) + 1;
            let mut nodes = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    nodes.push(Point::torus(i as f64 / n as f64, j as f64 / n as f64));
                }
            }
            (nodes, vec![1.0 / (n * n) as f64; n * n])
        }
        Manifold::Sphere2 => {
            let mut max_l = 0usize;
            while (((max_l + 1) * (max_l + 2)) as f64) <= max_frequency * max_frequency * (1.0 + 1e-12) {
                max_l += 1;
            }
            let (us, ws) = gauss_legendre(max_l + 1);
            let n_phi = 2 * max_l + 1;
            let mut nodes = Vec::with_capacity(us.len() * n_phi);
            let mut weights = Vec::with_capacity(us.len() * n_phi);
            for (u, w) in us.iter().zip(&ws) {
                let theta = u.clamp(-1.0, 1.0).acos();
                for j in 0..n_phi {
                    nodes.push(Point::sphere(theta, TAU * j as f64 / n_phi as f64));
                    weights.push(w * TAU / n_phi as f64);
                }
            }
            (nodes, weights)
        }
        Manifold::Product(a, b) => {
            let (na, wa) = global_nodes(a, max_frequency);
            let (nb, wb) = global_nodes(b, max_frequency);
            let mut nodes = Vec::with_capacity(na.len() * nb.len());
            let mut weights = Vec::with_capacity(na.len() * nb.len());
            for (pa, va) in na.iter().zip(&wa) {
                for (pb, vb) in nb.iter().zip(&wb) {
                    nodes.push(Point::product(pa.clone(), pb.clone()));
                    weights.push(va * vb);
                }
            }
            (nodes, weights)
        }
    }
}

/// Polar rule on the geodesic ball `B(center, radius)`.
///
/// The resolution is doubled (up to three times) while the weight sum
/// misses the closed-form ball volume by more than `1e-8` relative.
pub fn ball_quadrature(
    manifold: &Manifold,
    center: &Point,
    radius: f64,
    resolution: BallResolution,
) -> Result<QuadratureRule> {
    manifold.check_radius(radius)?;
    if radius == 0.0 {
        return Ok(QuadratureRule {
            nodes: Vec::new(),
            weights: Vec::new(),
            exactness: Exactness::WeightSumError(0.0),
        });
    }
    let volume = manifold.ball_volume(radius)?;
    let mut res = resolution;
    let mut doublings = 0;
    loop {
        let (nodes, weights) = polar_nodes(manifold, center, radius, res);
        let sum: f64 = weights.iter().sum();
        let err = (sum - volume).abs() / volume;
        if err <= BALL_WEIGHT_TOLERANCE || doublings == MAX_DOUBLINGS {
            if err > BALL_WEIGHT_TOLERANCE {
                log::warn!("ball rule on {manifold} r={radius}: weight-sum error {err:.3e} after doublings");
            }
            return Ok(QuadratureRule {
                nodes,
                weights,
                exactness: Exactness::WeightSumError(err),
            });
        }
        res = res.doubled();
        doublings += 1;
    }
}

fn polar_nodes(manifold: &Manifold, center: &Point, radius: f64, res: BallResolution) -> (Vec<Point>, Vec<f64>) {
    let (rhos, wr) = gauss_legendre_interval(res.radial, 0.0, radius);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for (&rho, &w) in rhos.iter().zip(&wr) {
        for (p, ws) in manifold.geodesic_sphere(center, rho, res.angular) {
            nodes.push(p);
            weights.push(w * ws);
        }
    }
    (nodes, weights)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::eigenbasis;
    use std::f64::consts::{PI, SQRT_2};

    #[test]
    fn sphere_constant_integral() {
        let rule = global_quadrature(&Manifold::Sphere2, 10.0).unwrap();
        assert!((rule.total_weight() - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn torus_cosine_square() {
        let rule = global_quadrature(&Manifold::Torus2, 7.0).unwrap();
        let v = rule.integrate(|p| {
            let Point::Torus(xy) = p else { unreachable!() };
            let c = SQRT_2 * (TAU * xy[0]).cos();
            c * c
        });
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn torus_gram_at_seven() {
        let m = Manifold::Torus2;
        let b = eigenbasis(&m, 7.0).unwrap();
        let rule = global_quadrature(&m, 7.0).unwrap();
        for i in 0..b.len() {
            for j in 0..b.len() {
                let v = rule.integrate(|p| {
                    let e = b.evaluate(p);
                    e[i] * e[j]
                });
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ball_rule_weight_sums() {
        let t = Manifold::Torus2;
        let rule = ball_quadrature(&t, &Point::torus(0.3, 0.9), 0.25, BallResolution::default()).unwrap();
        assert!((rule.total_weight() - PI / 16.0).abs() < 1e-8);
        let s = Manifold::Sphere2;
        let rule = ball_quadrature(&s, &Point::sphere(1.0, 2.0), 0.5, BallResolution::default()).unwrap();
        assert!((rule.total_weight() - TAU * (1.0 - 0.5f64.cos())).abs() < 1e-8);
        let p: Manifold = "product(torus2,circle)".parse().unwrap();
        let c = p.reference_point();
        let rule = ball_quadrature(&p, &c, 0.2, BallResolution::reduced()).unwrap();
        assert!((rule.total_weight() - p.ball_volume(0.2).unwrap()).abs() < 1e-8 * rule.total_weight());
        assert!(matches!(
            ball_quadrature(&t, &Point::torus(0.0, 0.0), 0.6, BallResolution::default()),
            Err(Error::RadiusTooLarge { .. })
        ));
    }

    #[test]
    fn ball_rule_integrates_constant_mode() {
        let t = Manifold::Torus2;
        let b = eigenbasis(&t, 7.0).unwrap();
        let r = 0.25;
        let rule = ball_quadrature(&t, &Point::torus(0.5, 0.5), r, BallResolution::default()).unwrap();
        let v = rule.integrate(|p| b.evaluate(p)[0].powi(2));
        assert!((v - PI * r * r).abs() < 1e-12);
    }

    #[test]
    fn ball_rule_integrates_off_center_mode() {
        // ∫_{|x-c|<r} cos(2π k·x) dx = cos(2π k·c) · 2π r J1(2π|k| r)/(2π|k|)
        // checked here through the analytic series of J1.
        fn bessel_j1(x: f64) -> f64 {
            let mut term = x / 2.0;
            let mut sum = term;
            for k in 1..60 {
                term *= -(x * x / 4.0) / (k as f64 * (k as f64 + 1.0));
                sum += term;
            }
            sum
        }
        let t = Manifold::Torus2;
        let (c, r) = ([0.2, 0.7], 0.2);
        let rule = ball_quadrature(&t, &Point::torus(c[0], c[1]), r, BallResolution::default()).unwrap();
        let k = [3.0, 2.0];
        let kn = (k[0] * k[0] + k[1] * k[1]) as f64;
        let kn = kn.sqrt();
        let v = rule.integrate(|p| {
            let Point::Torus(xy) = p else { unreachable!() };
            (TAU * (k[0] * xy[0] + k[1] * xy[1])).cos()
        });
        let expect = (TAU * (k[0] * c[0] + k[1] * c[1])).cos() * r * bessel_j1(TAU * kn * r) / kn;
        assert!((v - expect).abs() < 1e-12, "{v} vs {expect}");
    }
}
