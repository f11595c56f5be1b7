//! Spectral kernels on `E_L`: reproducing, Bochner-Riesz and smooth cutoff.
//!
//! Every kernel has the form `Σ_i h(λ_i/L) φ_i(z) φ_i(w)` for a filter `h`
//! on `[0, 1]`, evaluated by direct summation in the basis order.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::manifold::{eigenbasis, global_quadrature, EigenBasis, Manifold, Point};

/// Spectral filter defining a kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Filter {
    /// Indicator of `[0, 1]`: the reproducing kernel `K_L`.
    Sharp,
    /// `(1 - x)^N`.
    BochnerRiesz(u32),
    /// `β_ε(x)`.
    Smooth(f64),
    /// `β_ε(x)²`.
    SmoothSquared(f64),
}

impl Filter {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Filter::Smooth(eps) | Filter::SmoothSquared(eps) if !(eps > 0.0 && eps < 1.0) => Err(
                Error::InvalidArgument(format!("smooth cutoff needs 0 < eps < 1, got {eps}")),
            ),
            _ => Ok(()),
        }
    }

    /// Filter value at `x = λ/L`.
    pub fn weight(&self, x: f64) -> f64 {
        if x > 1.0 {
            return 0.0;
        }
        match *self {
            Filter::Sharp => 1.0,
            Filter::BochnerRiesz(n) => (1.0 - x).max(0.0).powi(n as i32),
            Filter::Smooth(eps) => smooth_cutoff(eps, x),
            Filter::SmoothSquared(eps) => smooth_cutoff(eps, x).powi(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub filter: Filter,
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn new(filter: Filter, bandwidth: f64) -> Self {
        KernelSpec { filter, bandwidth }
    }

    pub fn sharp(bandwidth: f64) -> Self {
        Self::new(Filter::Sharp, bandwidth)
    }
}

fn bump(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smoothstep `s(t) = σ(t)/(σ(t)+σ(1-t))` with `σ(t) = exp(-1/t)`; equals 0
/// for `t <= 0` and 1 for `t >= 1`.
fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let (a, b) = (bump(t), bump(1.0 - t));
        a / (a + b)
    }
}

/// C∞ cutoff `β_ε`: 1 on `[0, 1-ε]`, 0 on `[1, ∞)`, strictly decreasing in
/// between.
pub fn smooth_cutoff(eps: f64, x: f64) -> f64 {
    smoothstep((1.0 - x) / eps)
}

/// A kernel bound to its eigenbasis; filter weights are precomputed.
#[derive(Debug, Clone)]
pub struct Kernel {
    spec: KernelSpec,
    basis: EigenBasis,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn new(manifold: &Manifold, spec: KernelSpec) -> Result<Self> {
        spec.filter.validate()?;
        let basis = eigenbasis(manifold, spec.bandwidth)?;
        Ok(Self::from_basis(basis, spec.filter))
    }

    /// Kernel on an existing basis; the bandwidth is the basis bandwidth.
    pub fn from_basis(basis: EigenBasis, filter: Filter) -> Self {
        let l = basis.bandwidth();
        let weights = basis.frequencies().map(|f| filter.weight(f / l)).collect();
        Kernel {
            spec: KernelSpec::new(filter, l),
            basis,
            weights,
        }
    }

    pub fn spec(&self) -> KernelSpec {
        self.spec
    }

    pub fn basis(&self) -> &EigenBasis {
        &self.basis
    }

    pub fn manifold(&self) -> &Manifold {
        self.basis.manifold()
    }

    /// Filter values `h(λ_i/L)` in basis order.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn value(&self, z: &Point, w: &Point) -> f64 {
        let (a, b) = (self.basis.evaluate(z), self.basis.evaluate(w));
        self.pair_sum(&a, &b)
    }

    /// Kernel value from precomputed feature vectors `φ(z)`, `φ(w)`.
    pub fn pair_sum(&self, a: &[f64], b: &[f64]) -> f64 {
        // h * (a * b) keeps the value exactly symmetric in (z, w)
        self.weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(h, (x, y))| h * (x * y))
            .sum()
    }

    pub fn diagonal(&self, z: &Point) -> f64 {
        let a = self.basis.evaluate(z);
        self.pair_sum(&a, &a)
    }

    /// Matrix `[k(z_i, w_j)]`.
    pub fn matrix(&self, zs: &[Point], ws: &[Point]) -> DMatrix<f64> {
        let a = self.basis.evaluation_matrix(zs);
        let b = self.basis.evaluation_matrix(ws);
        self.matrix_from_features(&a, &b)
    }

    /// `A diag(h) Bᵀ` from evaluation matrices whose rows are features.
    pub fn matrix_from_features(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        let h = DVector::from_column_slice(&self.weights);
        let mut scaled = b.clone();
        for (mut col, w) in scaled.column_iter_mut().zip(h.iter()) {
            col *= *w;
        }
        a * scaled.transpose()
    }

    /// Coefficients of `k(z, ·)` in the basis.
    pub fn section_coefficients(&self, z: &Point) -> Vec<f64> {
        self.basis
            .evaluate(z)
            .iter()
            .zip(&self.weights)
            .map(|(p, h)| p * h)
            .collect()
    }
}

/// `Σ_i h(λ_i/L) φ_i(z) φ_i(w)`.
pub fn kernel_value(manifold: &Manifold, spec: KernelSpec, z: &Point, w: &Point) -> Result<f64> {
    Ok(Kernel::new(manifold, spec)?.value(z, w))
}

/// `⟨f, K_L(z, ·)⟩` computed by exact quadrature, for `f = Σ coeffs_i φ_i`.
pub fn reproduce(basis: &EigenBasis, coeffs: &[f64], z: &Point) -> Result<f64> {
    Reproducer::new(basis)?.reproduce(coeffs, z)
}

/// Quadrature-side evaluation of `⟨f, K_L(z, ·)⟩` with the node features
/// computed once.
#[derive(Debug, Clone)]
pub struct Reproducer {
    basis: EigenBasis,
    weights: DVector<f64>,
    features: DMatrix<f64>,
}

impl Reproducer {
    pub fn new(basis: &EigenBasis) -> Result<Self> {
        let rule = global_quadrature(basis.manifold(), basis.bandwidth())?;
        Ok(Reproducer {
            basis: basis.clone(),
            weights: DVector::from_vec(rule.weights),
            features: basis.evaluation_matrix(&rule.nodes),
        })
    }

    pub fn reproduce(&self, coeffs: &[f64], z: &Point) -> Result<f64> {
        if coeffs.len() != self.basis.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} coefficients, got {}",
                self.basis.len(),
                coeffs.len()
            )));
        }
        let f = &self.features * DVector::from_column_slice(coeffs);
        let k = &self.features * DVector::from_vec(self.basis.evaluate(z));
        Ok(f.iter().zip(k.iter()).zip(self.weights.iter()).map(|((a, b), w)| w * a * b).sum())
    }
}

/// Off-diagonal decay constants `C_N(L) = max |k(z,w)| (1 + L d)^N / L^m`.
#[derive(Debug, Clone)]
pub struct DecayFit {
    pub exponent: u32,
    pub levels: Vec<DecayLevel>,
}

#[derive(Debug, Clone)]
pub struct DecayLevel {
    pub bandwidth: f64,
    pub constant: f64,
    /// `(distance, kernel value)` for every probe pair.
    pub samples: Vec<(f64, f64)>,
}

impl DecayFit {
    pub fn max_constant(&self) -> f64 {
        self.levels.iter().map(|l| l.constant).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_constant(&self) -> f64 {
        self.levels.iter().map(|l| l.constant).fold(f64::INFINITY, f64::min)
    }

    /// `max_L C_N / min_L C_N`.
    pub fn spread(&self) -> f64 {
        self.max_constant() / self.min_constant()
    }

    /// `C L^m / (1 + L d)^N` with the largest fitted constant.
    pub fn bound(&self, manifold: &Manifold, bandwidth: f64, distance: f64) -> f64 {
        self.max_constant() * bandwidth.powi(manifold.dimension() as i32)
            / (1.0 + bandwidth * distance).powi(self.exponent as i32)
    }
}

const DECAY_RADII: usize = 400;
const DECAY_DIRECTIONS: usize = 8;
const DECAY_RANDOM_PAIRS: usize = 500;
const PROBE_SEED: u64 = 42;

/// Deterministic probe pairs: the reference point against rays of
/// `DECAY_RADII` radii from 0 to the diameter in `DECAY_DIRECTIONS`
/// directions, plus `DECAY_RANDOM_PAIRS` uniform pairs from a ChaCha8
/// stream seeded with 42.
pub fn decay_probe_pairs(manifold: &Manifold) -> Vec<(Point, Point)> {
    let center = manifold.reference_point();
    let mut pairs = vec![(center.clone(), center.clone())];
    let diameter = manifold.diameter();
    for j in 1..=DECAY_RADII {
        let rho = diameter * j as f64 / DECAY_RADII as f64;
        for (p, _) in manifold.geodesic_sphere(&center, rho, DECAY_DIRECTIONS) {
            pairs.push((center.clone(), p));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    for _ in 0..DECAY_RANDOM_PAIRS {
        let z = manifold.random_point(&mut rng);
        let w = manifold.random_point(&mut rng);
        pairs.push((z, w));
    }
    pairs
}

/// Fits `C_N(L)` for each bandwidth over [`decay_probe_pairs`].
pub fn decay_fit(manifold: &Manifold, filter: Filter, bandwidths: &[f64], exponent: u32) -> Result<DecayFit> {
    filter.validate()?;
    if bandwidths.is_empty() {
        return Err(Error::InvalidArgument("decay fit needs at least one bandwidth".into()));
    }
    let m = manifold.dimension() as i32;
    if matches!(filter, Filter::Smooth(_) | Filter::SmoothSquared(_)) && (exponent as i32) < m {
        return Err(Error::InvalidArgument(format!(
            "smooth filters need N >= dimension {m}, got {exponent}"
        )));
    }
    let pairs = decay_probe_pairs(manifold);
    let mut levels = Vec::with_capacity(bandwidths.len());
    for &l in bandwidths {
        let kernel = Kernel::new(manifold, KernelSpec::new(filter, l))?;
        let samples: Vec<(f64, f64)> = pairs
            .par_iter()
            .map(|(z, w)| (manifold.distance(z, w), kernel.value(z, w)))
            .collect();
        let lm = l.powi(m);
        let constant = samples
            .iter()
            .map(|(d, v)| v.abs() * (1.0 + l * d).powi(exponent as i32) / lm)
            .fold(0.0, f64::max);
        levels.push(DecayLevel {
            bandwidth: l,
            constant,
            samples,
        });
    }
    Ok(DecayFit { exponent, levels })
}

/// Points at which sup-norms are sampled: spacing about `1/(density L)`.
///
/// Torus and circle use uniform grids, the sphere a Fibonacci spiral of
/// matching density, products the product of the factor probe sets.
pub fn probe_points(manifold: &Manifold, bandwidth: f64, density: f64) -> Vec<Point> {
    let per_unit = (density * bandwidth).ceil().max(8.0);
    match manifold {
        Manifold::Circle => {
            let n = per_unit as usize;
            (0..n).map(|i| Point::circle(i as f64 / n as f64)).collect()
        }
        Manifold::Torus2 => {
            let n = per_unit as usize;
            let mut pts = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    pts.push(Point::torus(i as f64 / n as f64, j as f64 / n as f64));
                }
            }
            pts
        }
        Manifold::Sphere2 => {
            let n = (4.0 * std::f64::consts::PI * per_unit * per_unit).ceil() as usize;
            crate::manifold::fibonacci_sphere(n)
        }
        Manifold::Product(a, b) => {
            let pa = probe_points(a, bandwidth, density);
            let pb = probe_points(b, bandwidth, density);
            let mut out = Vec::with_capacity(pa.len() * pb.len());
            for x in &pa {
                for y in &pb {
                    out.push(Point::product(x.clone(), y.clone()));
                }
            }
            out
        }
    }
}

/// Diagonal of the inverse metric in chart coordinates at `z`.
fn inverse_metric_diagonal(manifold: &Manifold, z: &Point, out: &mut Vec<f64>) {
    match (manifold, z) {
        (Manifold::Circle, _) => out.push(1.0),
        (Manifold::Torus2, _) => out.extend([1.0, 1.0]),
        (Manifold::Sphere2, Point::Sphere { theta, .. }) => {
            let s = theta.sin();
            out.extend([1.0, 1.0 / (s * s)]);
        }
        (Manifold::Product(a, b), Point::Product(za, zb)) => {
            inverse_metric_diagonal(a, za, out);
            inverse_metric_diagonal(b, zb, out);
        }
        _ => panic!("point does not belong to {manifold}"),
    }
}

/// Finite-difference step in chart coordinates.
pub const GRADIENT_STEP: f64 = 1e-5;

/// Precomputed values and chart-direction differences of the basis on a
/// probe set.
struct GradientProbe {
    values: DMatrix<f64>,
    /// One matrix per chart coordinate: central difference quotients.
    derivatives: Vec<DMatrix<f64>>,
    /// Per probe point, inverse-metric diagonal.
    metric: Vec<Vec<f64>>,
}

impl GradientProbe {
    fn new(basis: &EigenBasis, probes: &[Point]) -> Result<Self> {
        let manifold = basis.manifold();
        let dims = manifold.coord_count();
        let values = basis.evaluation_matrix(probes);
        let mut derivatives = Vec::with_capacity(dims);
        for c in 0..dims {
            let shifted = |sign: f64| -> Result<Vec<Point>> {
                probes
                    .iter()
                    .map(|p| {
                        let mut coords = p.coords();
                        coords[c] += sign * GRADIENT_STEP;
                        manifold.point_from_coords(&coords)
                    })
                    .collect()
            };
            let plus = basis.evaluation_matrix(&shifted(1.0)?);
            let minus = basis.evaluation_matrix(&shifted(-1.0)?);
            derivatives.push((plus - minus) / (2.0 * GRADIENT_STEP));
        }
        let metric = probes
            .iter()
            .map(|p| {
                let mut g = Vec::with_capacity(dims);
                inverse_metric_diagonal(manifold, p, &mut g);
                g
            })
            .collect();
        Ok(GradientProbe {
            values,
            derivatives,
            metric,
        })
    }

    /// `(max |∇f|, max |f|)` over the probes.
    fn sup_norms(&self, coeffs: &[f64]) -> (f64, f64) {
        let c = DVector::from_column_slice(coeffs);
        let f = &self.values * &c;
        let grads: Vec<DVector<f64>> = self.derivatives.iter().map(|d| d * &c).collect();
        let mut max_grad: f64 = 0.0;
        for (i, g) in self.metric.iter().enumerate() {
            let sq: f64 = grads.iter().zip(g).map(|(d, gi)| gi * d[i] * d[i]).sum();
            max_grad = max_grad.max(sq.sqrt());
        }
        (max_grad, f.amax())
    }
}

/// Largest `‖∇f‖∞ / (L ‖f‖∞)` over the given coefficient vectors, sup-norms
/// sampled on [`probe_points`] with density 4.
pub fn gradient_ratio(basis: &EigenBasis, coefficient_sets: &[Vec<f64>]) -> Result<f64> {
    let probes = probe_points(basis.manifold(), basis.bandwidth(), 4.0);
    let probe = GradientProbe::new(basis, &probes)?;
    let l = basis.bandwidth();
    let mut ratio: f64 = 0.0;
    for coeffs in coefficient_sets {
        if coeffs.len() != basis.len() {
            return Err(Error::InvalidArgument("coefficient length mismatch".into()));
        }
        let (grad, sup) = probe.sup_norms(coeffs);
        if sup > 0.0 {
            ratio = ratio.max(grad / (l * sup));
        }
    }
    Ok(ratio)
}

/// Bernstein ratio over `trials` random Gaussian-coefficient `f ∈ E_L`.
pub fn bernstein_ratio(manifold: &Manifold, bandwidth: f64, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let basis = eigenbasis(manifold, bandwidth)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sets: Vec<Vec<f64>> = (0..trials)
        .map(|_| (0..basis.len()).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    gradient_ratio(&basis, &sets)
}
