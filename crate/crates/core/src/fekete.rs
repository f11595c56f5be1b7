//! Approximate Fekete points: greedy volume maximization over a candidate
//! set followed by single-swap exchange, plus the diagnostics built on them.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::families::{minimum_distance, Level, Provenance, TriangularFamily};
use crate::kernels::{Filter, Kernel};
use crate::manifold::{eigenbasis, global_quadrature, EigenBasis, Manifold, Mode, Point};
use crate::sampling::{frame_bounds, riesz_bounds, FrameBounds, RieszBounds};

/// Minimum gain in `log|det|` for a swap to be accepted.
pub const SWAP_GAIN: f64 = 1e-10;

/// Relative residual norm below which the greedy stage gives up.
const GREEDY_STALL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeketeOptions {
    /// Defaults to `4 k_L`.
    pub candidate_count: Option<usize>,
    pub exchange_rounds: usize,
    pub seed: u64,
}

impl Default for FeketeOptions {
    fn default() -> Self {
        FeketeOptions {
            candidate_count: None,
            exchange_rounds: 20,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FeketeResult {
    pub bandwidth: f64,
    pub nodes: Vec<Point>,
    /// Indices of the nodes in the candidate set.
    pub node_indices: Vec<usize>,
    /// Indices chosen by the greedy stage.
    pub initial_indices: Vec<usize>,
    /// Accepted swaps `(node slot, candidate index)` in order.
    pub swaps: Vec<(usize, usize)>,
    /// `log|det V|`, recomputed from scratch for the final nodes.
    pub log_det: f64,
    /// Greedy value followed by the value after every accepted swap.
    pub log_det_history: Vec<f64>,
    pub exchange_passes: usize,
    /// `L min_{i≠j} d(z_i, z_j)`.
    pub separation: f64,
    /// `max_{i,z} |l_i(z)|` over the nodes and `8 k_L` low-discrepancy probes.
    pub lagrange_sup: f64,
    pub candidate_count: usize,
    pub candidate_set: String,
}

/// Near-uniform deterministic candidates: the manifold's low-discrepancy
/// points moved by a seeded isometry (translation on tori and circles, a
/// rotation on the sphere); products use seeded uniform points.
pub fn candidate_set(manifold: &Manifold, n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = manifold.low_discrepancy_points(n);
    match manifold {
        Manifold::Circle => {
            let s: f64 = rand::Rng::random(&mut rng);
            base.iter()
                .map(|p| Point::circle(p.coords()[0] + s))
                .collect()
        }
        Manifold::Torus2 => {
            let (sx, sy): (f64, f64) = (rand::Rng::random(&mut rng), rand::Rng::random(&mut rng));
            base.iter()
                .map(|p| {
                    let c = p.coords();
                    Point::torus(c[0] + sx, c[1] + sy)
                })
                .collect()
        }
        Manifold::Sphere2 => {
            let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
            let rot = rotation_from_quaternion(q);
            base.iter()
                .map(|p| {
                    let v = p.unit_vector();
                    let w: [f64; 3] = std::array::from_fn(|i| (0..3).map(|j| rot[i][j] * v[j]).sum());
                    Point::from_unit_vector(w)
                })
                .collect()
        }
        Manifold::Product(..) => (0..n).map(|_| manifold.random_point(&mut rng)).collect(),
    }
}

fn rotation_from_quaternion(q: [f64; 4]) -> [[f64; 3]; 3] {
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let [w, x, y, z] = q.map(|v| v / n);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

/// `log|det|` through an LU factorization; `-∞` when singular.
pub fn log_abs_det(m: &DMatrix<f64>) -> f64 {
    let lu = m.clone().lu();
    let u = lu.u();
    u.diagonal().iter().map(|d| d.abs().ln()).sum()
}

/// Row-pivoted Gram-Schmidt: repeatedly takes the candidate row with the
/// largest residual norm and projects it out of the others.
fn greedy_rows(a: &DMatrix<f64>, k: usize) -> Result<Vec<usize>> {
    let n = a.nrows();
    let mut rows: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).iter().copied().collect()).collect();
    let initial = rows
        .iter()
        .map(|r| r.iter().map(|x| x * x).sum::<f64>())
        .fold(0.0, f64::max)
        .sqrt();
    let mut used = vec![false; n];
    let mut chosen = Vec::with_capacity(k);
    for step in 0..k {
        let mut best = None;
        let mut best_norm = -1.0;
        for (i, r) in rows.iter().enumerate() {
            if used[i] {
                continue;
            }
            let norm: f64 = r.iter().map(|x| x * x).sum();
            if norm > best_norm {
                best_norm = norm;
                best = Some(i);
            }
        }
        let best_norm = best_norm.max(0.0).sqrt();
        let Some(best) = best.filter(|_| best_norm > GREEDY_STALL * initial) else {
            return Err(Error::EnlargeCandidates(format!(
                "greedy stage stalled after {step} of {k} nodes with {n} candidates (residual {best_norm:.3e})"
            )));
        };
        used[best] = true;
        chosen.push(best);
        let q: Vec<f64> = rows[best].iter().map(|x| x / best_norm).collect();
        for (i, r) in rows.iter_mut().enumerate() {
            if used[i] {
                continue;
            }
            let c: f64 = r.iter().zip(&q).map(|(x, y)| x * y).sum();
            for (x, y) in r.iter_mut().zip(&q) {
                *x -= c * y;
            }
        }
    }
    Ok(chosen)
}

fn select_rows(a: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), a.ncols(), |i, j| a[(idx[i], j)])
}

/// `W = A V⁻¹` where `V` holds the node rows of `A`.
fn exchange_matrix(a: &DMatrix<f64>, nodes: &[usize]) -> Result<DMatrix<f64>> {
    let v = select_rows(a, nodes);
    let inv = v
        .try_inverse()
        .ok_or_else(|| Error::SingularConfiguration("node Vandermonde matrix is singular".into()))?;
    Ok(a * inv)
}

/// Greedy selection and exchange over an explicit candidate list.
pub fn fekete_from_candidates(basis: &EigenBasis, candidates: &[Point], exchange_rounds: usize) -> Result<FeketeResult> {
    let k = basis.len();
    if candidates.len() < k {
        return Err(Error::EnlargeCandidates(format!(
            "{} candidates cannot host {k} nodes",
            candidates.len()
        )));
    }
    let a = basis.evaluation_matrix(candidates);
    let initial = greedy_rows(&a, k)?;
    let mut nodes = initial.clone();
    let mut log_det = log_abs_det(&select_rows(&a, &nodes));
    if !log_det.is_finite() {
        return Err(Error::EnlargeCandidates("greedy nodes are linearly dependent".into()));
    }
    let mut history = vec![log_det];
    let mut swaps = Vec::new();
    let mut passes = 0;
    let n = a.nrows();
    for _ in 0..exchange_rounds {
        passes += 1;
        let mut w = exchange_matrix(&a, &nodes)?;
        let mut swapped = false;
        for j in 0..k {
            let col = w.column(j);
            let mut best = 0;
            let mut best_abs = 0.0;
            for (c, &v) in col.iter().enumerate() {
                if v.abs() > best_abs {
                    best_abs = v.abs();
                    best = c;
                }
            }
            let gain = best_abs.ln();
            if !(gain > SWAP_GAIN) {
                continue;
            }
            // W ← W - W[:,j] (W[c,:] - e_j) / W[c,j]
            let pivot = w[(best, j)];
            let wj: DVector<f64> = w.column(j).into_owned();
            let mut r: Vec<f64> = w.row(best).iter().map(|x| x / pivot).collect();
            r[j] -= 1.0 / pivot;
            for (l, &rl) in r.iter().enumerate() {
                if rl != 0.0 {
                    let mut col = w.column_mut(l);
                    for i in 0..n {
                        col[i] -= wj[i] * rl;
                    }
                }
            }
            nodes[j] = best;
            log_det += gain;
            history.push(log_det);
            swaps.push((j, best));
            swapped = true;
        }
        if !swapped {
            break;
        }
    }
    let v = select_rows(&a, &nodes);
    let log_det = log_abs_det(&v);
    let node_points: Vec<Point> = nodes.iter().map(|&i| candidates[i].clone()).collect();
    let lagrange = LagrangeBasis::new(basis.clone(), node_points.clone())?;
    let mut probes = basis.manifold().low_discrepancy_points(8 * k);
    probes.extend(node_points.iter().cloned());
    let lagrange_sup = lagrange.sup_norm(&probes);
    Ok(FeketeResult {
        bandwidth: basis.bandwidth(),
        separation: basis.bandwidth() * minimum_distance(basis.manifold(), &node_points),
        nodes: node_points,
        node_indices: nodes,
        initial_indices: initial,
        swaps,
        log_det,
        log_det_history: history,
        exchange_passes: passes,
        lagrange_sup,
        candidate_count: candidates.len(),
        candidate_set: "explicit".into(),
    })
}

/// Approximate Fekete points at bandwidth `L` over [`candidate_set`].
pub fn approximate_fekete(manifold: &Manifold, bandwidth: f64, options: &FeketeOptions) -> Result<FeketeResult> {
    let basis = eigenbasis(manifold, bandwidth)?;
    let k = basis.len();
    let n = options.candidate_count.unwrap_or(4 * k);
    if n < 4 * k {
        return Err(Error::InvalidArgument(format!(
            "candidate count {n} is below 4 k_L = {}",
            4 * k
        )));
    }
    let candidates = candidate_set(manifold, n, options.seed);
    let mut result = fekete_from_candidates(&basis, &candidates, options.exchange_rounds)?;
    result.candidate_set = format!("low-discrepancy n={n} seed={}", options.seed);
    Ok(result)
}

/// Fekete levels for each bandwidth, as a family.
pub fn fekete_family(manifold: &Manifold, bandwidths: &[f64], options: &FeketeOptions) -> Result<(TriangularFamily, Vec<FeketeResult>)> {
    let mut results = Vec::with_capacity(bandwidths.len());
    for &l in bandwidths {
        results.push(approximate_fekete(manifold, l, options)?);
    }
    let levels = results
        .iter()
        .map(|r| Level {
            bandwidth: r.bandwidth,
            points: r.nodes.clone(),
        })
        .collect();
    Ok((
        TriangularFamily::new(manifold.clone(), levels, Provenance::Fekete)?,
        results,
    ))
}

/// Lagrange functions `l = V⁻¹ φ(z)` for nodes `x_j`, `V_ij = φ_i(x_j)`.
#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    basis: EigenBasis,
    nodes: Vec<Point>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl LagrangeBasis {
    pub fn new(basis: EigenBasis, nodes: Vec<Point>) -> Result<Self> {
        if nodes.len() != basis.len() {
            return Err(Error::InvalidArgument(format!(
                "{} nodes for a space of dimension {}",
                nodes.len(),
                basis.len()
            )));
        }
        let v = basis.evaluation_matrix(&nodes).transpose();
        let lu = v.lu();
        if !lu.is_invertible() || !log_abs_det(&basis.evaluation_matrix(&nodes)).is_finite() {
            return Err(Error::SingularConfiguration("nodes are not unisolvent".into()));
        }
        Ok(LagrangeBasis { basis, nodes, lu })
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    /// `(l_1(z), ..., l_k(z))`.
    pub fn values(&self, z: &Point) -> Vec<f64> {
        let phi = DVector::from_vec(self.basis.evaluate(z));
        self.lu.solve(&phi).expect("factorization checked at construction").iter().copied().collect()
    }

    pub fn eval(&self, i: usize, z: &Point) -> f64 {
        self.values(z)[i]
    }

    /// `Σ_j values_j l_j(z)`.
    pub fn interpolate(&self, values: &[f64], z: &Point) -> f64 {
        self.values(z).iter().zip(values).map(|(l, v)| l * v).sum()
    }

    /// `max_{i, z} |l_i(z)|` over the probes.
    pub fn sup_norm(&self, probes: &[Point]) -> f64 {
        let phi = self.basis.evaluation_matrix(probes).transpose();
        let l = self.lu.solve(&phi).expect("factorization checked at construction");
        l.amax()
    }
}

/// `l_i(z)` for the nodes of a Fekete result.
pub fn lagrange_eval(manifold: &Manifold, result: &FeketeResult, i: usize, z: &Point) -> Result<f64> {
    let basis = eigenbasis(manifold, result.bandwidth)?;
    Ok(LagrangeBasis::new(basis, result.nodes.clone())?.eval(i, z))
}

/// Default smooth-cutoff parameter of the weight kernel.
pub const WEIGHT_DELTA: f64 = 0.5;

/// `p(z, w) = B(z, w) / B(z, z)` with `B` the smooth-cutoff kernel at
/// bandwidth `Lε/C`.
#[derive(Debug, Clone)]
pub struct WeightedKernel {
    kernel: Kernel,
}

impl WeightedKernel {
    pub fn new(manifold: &Manifold, bandwidth: f64, eps: f64, c_prod: f64) -> Result<Self> {
        Self::with_delta(manifold, bandwidth, eps, c_prod, WEIGHT_DELTA)
    }

    pub fn with_delta(manifold: &Manifold, bandwidth: f64, eps: f64, c_prod: f64, delta: f64) -> Result<Self> {
        if !(c_prod > 0.0) || !(eps > 0.0) {
            return Err(Error::InvalidArgument("weighted kernel needs eps > 0 and C > 0".into()));
        }
        let reduced = bandwidth * eps / c_prod;
        if !(reduced >= 1.0) {
            return Err(Error::BandwidthTooSmall(reduced));
        }
        let kernel = Kernel::new(manifold, crate::kernels::KernelSpec::new(Filter::Smooth(delta), reduced))?;
        Ok(WeightedKernel { kernel })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn value(&self, z: &Point, w: &Point) -> f64 {
        if z == w {
            return 1.0;
        }
        let a = self.kernel.basis().evaluate(z);
        let b = self.kernel.basis().evaluate(w);
        self.kernel.pair_sum(&a, &b) / self.kernel.pair_sum(&a, &a)
    }

    /// Coefficients of `p(z, ·)` in the basis of bandwidth `Lε/C`.
    pub fn coefficients(&self, z: &Point) -> Vec<f64> {
        let d = self.kernel.diagonal(z);
        self.kernel.section_coefficients(z).iter().map(|c| c / d).collect()
    }
}

pub fn weighted_kernel(manifold: &Manifold, bandwidth: f64, eps: f64, c_prod: f64, z: &Point, w: &Point) -> Result<f64> {
    Ok(WeightedKernel::new(manifold, bandwidth, eps, c_prod)?.value(z, w))
}

/// `⌊(1 + ε) L⌋`.
pub fn dilated_bandwidth(bandwidth: f64, eps: f64) -> f64 {
    ((1.0 + eps) * bandwidth + 1e-9).floor()
}

#[derive(Debug, Clone)]
pub struct DilatedRow {
    pub bandwidth: f64,
    /// Frame bounds of `Z_ε(L) = Z(⌊(1+ε)L⌋)` at bandwidth `L`.
    pub frame: FrameBounds,
    /// Riesz bounds of `Z_{-ε}(L) = Z(⌊(1-ε)L⌋)` at bandwidth `L`.
    pub riesz: RieszBounds,
    pub m_plus: usize,
    pub m_minus: usize,
}

pub fn dilated_family_check(family: &TriangularFamily, bandwidths: &[f64], eps: f64) -> Result<Vec<DilatedRow>> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidArgument(format!("eps must lie in [0, 1), got {eps}")));
    }
    let m = family.manifold();
    bandwidths
        .iter()
        .map(|&l| {
            let basis = eigenbasis(m, l)?;
            let plus = family.points(dilated_bandwidth(l, eps))?;
            let minus = family.points(dilated_bandwidth(l, -eps))?;
            Ok(DilatedRow {
                bandwidth: l,
                frame: frame_bounds(&basis, plus),
                riesz: riesz_bounds(&basis, minus)?,
                m_plus: plus.len(),
                m_minus: minus.len(),
            })
        })
        .collect()
}

/// Test functions for moment errors.
#[derive(Debug, Clone, PartialEq)]
pub enum PanelFunction {
    Mode(Mode),
    /// Monomial in chart coordinates on tori and circles, in Cartesian
    /// coordinates of the unit vector on the sphere.
    Monomial(Vec<u32>),
}

impl PanelFunction {
    fn eval(&self, manifold: &Manifold, z: &Point) -> f64 {
        match self {
            PanelFunction::Mode(mode) => crate::manifold::evaluate_mode(manifold, mode, z),
            PanelFunction::Monomial(powers) => {
                let x = match manifold {
                    Manifold::Sphere2 => z.unit_vector().to_vec(),
                    _ => z.coords(),
                };
                x.iter().zip(powers).map(|(v, &p)| v.powi(p as i32)).product()
            }
        }
    }

    /// `σ(f) = (1/vol M) ∫ f`.
    fn volume_mean(&self, manifold: &Manifold) -> Result<f64> {
        match (self, manifold) {
            (PanelFunction::Mode(mode), _) => {
                let rule = global_quadrature(manifold, 2.0 * mode_frequency(mode).max(1.0))?;
                Ok(rule.integrate(|z| self.eval(manifold, z)) / manifold.total_volume())
            }
            (PanelFunction::Monomial(p), Manifold::Torus2 | Manifold::Circle) => {
                Ok(p.iter().map(|&e| 1.0 / (e as f64 + 1.0)).product())
            }
            (PanelFunction::Monomial(p), Manifold::Sphere2) => {
                let degree: u32 = p.iter().sum();
                let d = degree as f64 + 1.0;
                let rule = global_quadrature(manifold, (d * (d + 1.0)).sqrt())?;
                Ok(rule.integrate(|z| self.eval(manifold, z)) / manifold.total_volume())
            }
            (PanelFunction::Monomial(_), _) => Err(Error::InvalidArgument(format!(
                "monomial test functions are not defined on {manifold}"
            ))),
        }
    }
}

fn mode_frequency(mode: &Mode) -> f64 {
    use std::f64::consts::TAU;
    match mode {
        Mode::Circle { n } => TAU * n.unsigned_abs() as f64,
        Mode::Torus { k, .. } => TAU * ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt(),
        Mode::Sphere { l, .. } => ((*l as f64) * (*l as f64 + 1.0)).sqrt(),
        Mode::Product(a, b) => mode_frequency(a).hypot(mode_frequency(b)),
    }
}

/// Four lowest nonconstant modes plus coordinate monomials where defined.
pub fn default_function_panel(manifold: &Manifold) -> Result<Vec<PanelFunction>> {
    let basis = eigenbasis(manifold, 20.0)?;
    let mut panel: Vec<PanelFunction> = basis
        .entries()
        .iter()
        .filter(|e| e.eigenvalue > 0.0)
        .take(4)
        .map(|e| PanelFunction::Mode(e.mode.clone()))
        .collect();
    match manifold {
        Manifold::Torus2 => panel.extend([vec![1, 0], vec![0, 1], vec![1, 1]].map(PanelFunction::Monomial)),
        Manifold::Circle => panel.extend([vec![1], vec![2]].map(PanelFunction::Monomial)),
        Manifold::Sphere2 => panel.extend([vec![0, 0, 1], vec![1, 0, 0], vec![0, 0, 2]].map(PanelFunction::Monomial)),
        Manifold::Product(..) => {}
    }
    Ok(panel)
}

/// Caps `B(ξ, r)`: 8 low-discrepancy centers times radii that are 10%,
/// 20% and 40% of the largest admissible radius.
pub fn default_cap_panel(manifold: &Manifold) -> Vec<(Point, f64)> {
    let rmax = manifold.max_ball_radius();
    let mut caps = Vec::new();
    for c in manifold.low_discrepancy_points(8) {
        for f in [0.1, 0.2, 0.4] {
            caps.push((c.clone(), f * rmax));
        }
    }
    caps
}

#[derive(Debug, Clone)]
pub struct EquidistRow {
    pub bandwidth: f64,
    /// `max_B |μ_L(B) - σ(B)|` over the cap panel.
    pub discrepancy: f64,
    /// `|μ_L(f) - σ(f)|` per panel function.
    pub moment_errors: Vec<f64>,
    /// `|μ_L(M) - 1|` with `μ_L = (1/k_L) Σ δ_{z_j}`.
    pub mass_error: f64,
}

pub fn equidistribution_test(
    family: &TriangularFamily,
    bandwidths: &[f64],
    caps: &[(Point, f64)],
    functions: &[PanelFunction],
) -> Result<Vec<EquidistRow>> {
    if caps.is_empty() || functions.is_empty() {
        return Err(Error::InvalidArgument("equidistribution panels must be nonempty".into()));
    }
    let m = family.manifold();
    let vol = m.total_volume();
    let cap_volumes = caps
        .iter()
        .map(|(_, r)| m.ball_volume(*r).map(|v| v / vol))
        .collect::<Result<Vec<_>>>()?;
    let means = functions.iter().map(|f| f.volume_mean(m)).collect::<Result<Vec<_>>>()?;
    bandwidths
        .iter()
        .map(|&l| {
            let pts = family.points(l)?;
            let k_l = eigenbasis(m, l)?.len() as f64;
            let weight = 1.0 / k_l;
            let discrepancy = caps
                .iter()
                .zip(&cap_volumes)
                .map(|((c, r), s)| {
                    let count = crate::concentration::count_in_ball(m, pts, c, *r);
                    (count as f64 * weight - s).abs()
                })
                .fold(0.0, f64::max);
            let moment_errors = functions
                .iter()
                .zip(&means)
                .map(|(f, s)| (pts.iter().map(|z| f.eval(m, z)).sum::<f64>() * weight - s).abs())
                .collect();
            Ok(EquidistRow {
                bandwidth: l,
                discrepancy,
                moment_errors,
                mass_error: (pts.len() as f64 * weight - 1.0).abs(),
            })
        })
        .collect()
}

/// Threshold on the relative energy of `f g` outside `E_{L(1+Cε)}`.
pub const PRODUCT_RESIDUAL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct AdmissibilityReport {
    pub bandwidth: f64,
    pub eps: f64,
    /// Smallest grid value meeting the residual threshold for every sample.
    pub constant: Option<f64>,
    /// `(C, worst relative residual over the samples)`.
    pub residuals: Vec<(f64, f64)>,
}

/// `0.05, 0.10, ..., 5.00`.
pub fn default_c_grid() -> Vec<f64> {
    (1..=100).map(|i| i as f64 * 0.05).collect()
}

/// Expands products of random `f ∈ E_L`, `g ∈ E_{εL}` in the eigenbasis up
/// to bandwidth `3L` and finds the smallest `C` with negligible energy
/// beyond `L(1 + Cε)`.
pub fn product_property_check(
    manifold: &Manifold,
    bandwidth: f64,
    eps: f64,
    c_grid: &[f64],
    samples: usize,
    seed: u64,
) -> Result<AdmissibilityReport> {
    if !(eps > 0.0) || c_grid.is_empty() || samples == 0 {
        return Err(Error::InvalidArgument("admissibility needs eps > 0, a C grid and samples".into()));
    }
    let fb = eigenbasis(manifold, bandwidth)?;
    let gb = eigenbasis(manifold, eps * bandwidth)?;
    let big = eigenbasis(manifold, 3.0 * bandwidth)?;
    // integrands f g φ have frequencies up to (1 + ε + 3) L
    let rule = global_quadrature(manifold, (4.0 + eps) * bandwidth / 2.0 + std::f64::consts::TAU)?;
    let fphi = fb.evaluation_matrix(&rule.nodes);
    let gphi = gb.evaluation_matrix(&rule.nodes);
    let bphi = big.evaluation_matrix(&rule.nodes);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let freqs: Vec<f64> = big.frequencies().collect();
    let mut worst = vec![0.0f64; c_grid.len()];
    for _ in 0..samples {
        let cf = DVector::from_iterator(fb.len(), (0..fb.len()).map(|_| StandardNormal.sample(&mut rng)));
        let cg = DVector::from_iterator(gb.len(), (0..gb.len()).map(|_| StandardNormal.sample(&mut rng)));
        let f = &fphi * cf;
        let g = &gphi * cg;
        let weighted = DVector::from_iterator(
            rule.len(),
            f.iter().zip(g.iter()).zip(&rule.weights).map(|((a, b), w)| a * b * w),
        );
        let total: f64 = f
            .iter()
            .zip(g.iter())
            .zip(&rule.weights)
            .map(|((a, b), w)| w * (a * b).powi(2))
            .sum();
        let coeffs = bphi.tr_mul(&weighted);
        for (slot, &c) in worst.iter_mut().zip(c_grid) {
            let cut = bandwidth * (1.0 + c * eps) * (1.0 + 1e-12);
            let outside: f64 = coeffs
                .iter()
                .zip(&freqs)
                .filter(|(_, &f)| f > cut)
                .map(|(x, _)| x * x)
                .sum();
            // energy beyond 3L is whatever the expansion missed
            let captured: f64 = coeffs.iter().map(|x| x * x).sum();
            let rel = (outside + (total - captured).max(0.0)) / total;
            *slot = slot.max(rel);
        }
    }
    let residuals: Vec<(f64, f64)> = c_grid.iter().copied().zip(worst).collect();
    let constant = residuals
        .iter()
        .find(|(_, r)| *r < PRODUCT_RESIDUAL)
        .map(|(c, _)| *c);
    Ok(AdmissibilityReport {
        bandwidth,
        eps,
        constant,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidate_sets_are_deterministic() {
        for m in ["torus2", "sphere2", "circle", "product(torus2,circle)"] {
            let m: Manifold = m.parse().unwrap();
            assert_eq!(candidate_set(&m, 30, 3), candidate_set(&m, 30, 3));
            assert_ne!(candidate_set(&m, 30, 3), candidate_set(&m, 30, 4));
        }
    }

    #[test]
    fn rotation_is_orthogonal() {
        let r = rotation_from_quaternion([0.3, -1.2, 0.5, 2.0]);
        for i in 0..3 {
            for j in 0..3 {
                let d: f64 = (0..3).map(|k| r[i][k] * r[j][k]).sum();
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn lagrange_is_kronecker_at_nodes() {
        let t = Manifold::Torus2;
        let res = approximate_fekete(&t, 13.0, &FeketeOptions::default()).unwrap();
        let lag = LagrangeBasis::new(eigenbasis(&t, 13.0).unwrap(), res.nodes.clone()).unwrap();
        for (j, z) in res.nodes.iter().enumerate() {
            let v = lag.values(z);
            for (i, x) in v.iter().enumerate() {
                assert!((x - if i == j { 1.0 } else { 0.0 }).abs() < 1e-8);
            }
        }
        assert!(res.lagrange_sup >= 1.0 - 1e-12);
    }

    #[test]
    fn exchange_increases_log_det() {
        let s = Manifold::Sphere2;
        let res = approximate_fekete(&s, 6.0, &FeketeOptions::default()).unwrap();
        for w in res.log_det_history.windows(2) {
            assert!(w[1] > w[0]);
        }
        assert!((res.log_det - res.log_det_history.last().unwrap()).abs() < 1e-8);
    }

    #[test]
    fn too_few_candidates() {
        let t = Manifold::Torus2;
        let opts = FeketeOptions {
            candidate_count: Some(10),
            ..FeketeOptions::default()
        };
        assert!(matches!(approximate_fekete(&t, 7.0, &opts), Err(Error::InvalidArgument(_))));
        let basis = eigenbasis(&t, 7.0).unwrap();
        let dup = vec![Point::torus(0.1, 0.2); 8];
        assert!(matches!(fekete_from_candidates(&basis, &dup, 5), Err(Error::EnlargeCandidates(_))));
    }

    #[test]
    fn weighted_kernel_examples() {
        let t = Manifold::Torus2;
        let z = Point::torus(0.3, 0.4);
        assert_eq!(weighted_kernel(&t, 40.0, 0.5, 1.0, &z, &z).unwrap(), 1.0);
        assert!(matches!(
            WeightedKernel::new(&t, 3.0, 0.25, 1.0),
            Err(Error::BandwidthTooSmall(_))
        ));
        let p = WeightedKernel::new(&t, 40.0, 0.5, 1.0).unwrap();
        assert_eq!(p.kernel().basis().bandwidth(), 20.0);
        let c = p.coefficients(&z);
        let w = Point::torus(0.35, 0.1);
        let direct = p.kernel().basis().evaluate_function(&c, &w);
        assert!((direct - p.value(&z, &w)).abs() < 1e-12);
        let top = p.kernel().basis().frequencies().zip(&c).filter(|(f, _)| *f > 20.0).count();
        assert_eq!(top, 0);
    }

    #[test]
    fn circle_product_constant() {
        let c = Manifold::Circle;
        let rep = product_property_check(&c, 40.0, 0.5, &default_c_grid(), 3, 1).unwrap();
        assert!(rep.constant.unwrap() <= 1.0);
    }

    #[test]
    fn dilation_by_zero_is_identity() {
        assert_eq!(dilated_bandwidth(20.0, 0.0), 20.0);
        assert_eq!(dilated_bandwidth(20.0, 0.3), 26.0);
        assert_eq!(dilated_bandwidth(20.0, -0.3), 14.0);
        assert_eq!(dilated_bandwidth(15.0, 0.3), 19.0);
    }
}
