//! Classical and modified concentration operators on geodesic balls.
//!
//! In the eigenbasis the classical operator is `D_ij = ∫_A φ_i φ_j` and the
//! modified one is `T_ik = β_ε(λ_i/L) D_ik β_ε(λ_k/L)`.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::families::TriangularFamily;
use crate::kernels::smooth_cutoff;
use crate::manifold::{ball_quadrature, eigenbasis, global_quadrature, BallResolution, EigenBasis, Manifold, Point, QuadratureRule};

/// Integration region `A`.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Ball { center: Point, radius: f64 },
    Whole,
}

impl Region {
    pub fn ball(center: Point, radius: f64) -> Self {
        Region::Ball { center, radius }
    }

    pub fn volume(&self, manifold: &Manifold) -> Result<f64> {
        match self {
            Region::Ball { radius, .. } => manifold.ball_volume(*radius),
            Region::Whole => Ok(manifold.total_volume()),
        }
    }

    fn rule(&self, basis: &EigenBasis, resolution: BallResolution) -> Result<QuadratureRule> {
        match self {
            Region::Ball { center, radius } => ball_quadrature(basis.manifold(), center, *radius, resolution),
            Region::Whole => global_quadrature(basis.manifold(), basis.bandwidth()),
        }
    }
}

/// Mirrors the upper triangle into the lower one.
fn symmetrize_upper(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in j + 1..n {
            m[(i, j)] = m[(j, i)];
        }
    }
}

/// `Φᵀ W Φ` for the rule's nodes and weights.
fn weighted_gram(basis: &EigenBasis, rule: &QuadratureRule) -> DMatrix<f64> {
    let k = basis.len();
    if rule.is_empty() {
        return DMatrix::zeros(k, k);
    }
    let phi = basis.evaluation_matrix(&rule.nodes);
    let mut scaled = phi.clone();
    for (mut row, w) in scaled.row_iter_mut().zip(&rule.weights) {
        row *= *w;
    }
    let mut d = phi.tr_mul(&scaled);
    symmetrize_upper(&mut d);
    d
}

pub fn classical_matrix(basis: &EigenBasis, region: &Region) -> Result<DMatrix<f64>> {
    classical_matrix_with(basis, region, BallResolution::default())
}

pub fn classical_matrix_with(basis: &EigenBasis, region: &Region, resolution: BallResolution) -> Result<DMatrix<f64>> {
    Ok(weighted_gram(basis, &region.rule(basis, resolution)?))
}

/// `β_ε(λ_i/L)` per basis entry; all ones for `ε = 0`.
pub fn cutoff_weights(basis: &EigenBasis, eps: f64) -> Vec<f64> {
    let l = basis.bandwidth();
    basis
        .frequencies()
        .map(|f| if eps == 0.0 { 1.0 } else { smooth_cutoff(eps, f / l) })
        .collect()
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidArgument(format!("eps must lie in [0, 1), got {eps}")));
    }
    Ok(())
}

/// `diag(β) D diag(β)`, exactly symmetric.
pub fn modify(classical: &DMatrix<f64>, beta: &[f64]) -> DMatrix<f64> {
    let n = classical.nrows();
    let mut t = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            t[(i, j)] = beta[i] * classical[(i, j)] * beta[j];
        }
    }
    symmetrize_upper(&mut t);
    t
}

/// Modified concentration matrix; `ε = 0` gives the classical one.
pub fn modified_matrix(basis: &EigenBasis, eps: f64, region: &Region) -> Result<DMatrix<f64>> {
    check_eps(eps)?;
    let d = classical_matrix(basis, region)?;
    Ok(modify(&d, &cutoff_weights(basis, eps)))
}

/// Allowed excursion of eigenvalues outside `[0, 1]`.
pub const SPECTRUM_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct ConcentrationSpectrum {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// `Σ λ_j`.
    pub t1: f64,
    /// `Σ λ_j²`.
    pub t2: f64,
}

impl ConcentrationSpectrum {
    /// `#{λ_j > γ}`.
    pub fn count_above(&self, gamma: f64) -> usize {
        self.eigenvalues.iter().filter(|&&l| l > gamma).count()
    }

    /// `#{λ_j ≥ δ}`.
    pub fn count_at_least(&self, delta: f64) -> usize {
        self.eigenvalues.iter().filter(|&&l| l >= delta).count()
    }
}

/// Full symmetric eigendecomposition; raw eigenvalues are kept, and any
/// outside `[-1e-8, 1 + 1e-8]` is a numerical-integrity error.
pub fn spectrum(matrix: &DMatrix<f64>) -> Result<ConcentrationSpectrum> {
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(matrix.clone()).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    if let Some(bad) = eigenvalues
        .iter()
        .find(|&&l| !(-SPECTRUM_TOLERANCE..=1.0 + SPECTRUM_TOLERANCE).contains(&l))
    {
        return Err(Error::NumericalIntegrity(format!(
            "concentration eigenvalue {bad:e} outside [0, 1]"
        )));
    }
    let t1 = eigenvalues.iter().sum();
    let t2 = eigenvalues.iter().map(|l| l * l).sum();
    Ok(ConcentrationSpectrum { eigenvalues, t1, t2 })
}

/// Traces of `T` and `T∘T` computed from the matrix and from kernel-side
/// integrals of `B̃` (filter `β²`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceIdentities {
    pub t1_matrix: f64,
    pub t1_kernel: f64,
    pub t2_matrix: f64,
    pub t2_kernel: f64,
}

/// The kernel side uses the reduced ball resolution, so the two columns
/// come from independent quadratures.
pub fn trace_identities(basis: &EigenBasis, eps: f64, region: &Region) -> Result<TraceIdentities> {
    check_eps(eps)?;
    let t = modified_matrix(basis, eps, region)?;
    let t1_matrix = t.trace();
    let t2_matrix = t.iter().map(|x| x * x).sum();

    let alpha: Vec<f64> = cutoff_weights(basis, eps).iter().map(|b| b * b).collect();
    let rule = region.rule(basis, BallResolution::reduced())?;
    if rule.is_empty() {
        return Ok(TraceIdentities {
            t1_matrix,
            t1_kernel: 0.0,
            t2_matrix,
            t2_kernel: 0.0,
        });
    }
    let phi = basis.evaluation_matrix(&rule.nodes);
    // rows scaled by √w: F diag(α) Fᵀ holds √w_z B̃(z,w) √w_w
    let mut f = phi;
    for (mut row, w) in f.row_iter_mut().zip(&rule.weights) {
        row *= w.sqrt();
    }
    let mut fa = f.clone();
    for (mut col, a) in fa.column_iter_mut().zip(&alpha) {
        col *= *a;
    }
    let t1_kernel = f
        .row_iter()
        .zip(fa.row_iter())
        .map(|(r, s)| r.dot(&s))
        .sum();
    let n = f.nrows();
    let t2_kernel: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let zi = fa.row(i);
            (0..n).map(|j| zi.dot(&f.row(j)).powi(2)).sum::<f64>()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    Ok(TraceIdentities {
        t1_matrix,
        t1_kernel,
        t2_matrix,
        t2_kernel,
    })
}

/// Parameters of [`plateau_scan`].
#[derive(Debug, Clone)]
pub struct PlateauOptions {
    pub eps: f64,
    pub gammas: Vec<f64>,
    pub deltas: Vec<f64>,
    /// Annulus width; `None` means `3/s` from the family's separation.
    pub t: Option<f64>,
    /// Bandwidth dilation for the interpolation-side spectrum.
    pub rho: f64,
    /// Ball center; `None` means the manifold's reference point.
    pub center: Option<Point>,
}

impl Default for PlateauOptions {
    fn default() -> Self {
        PlateauOptions {
            eps: 0.2,
            gammas: vec![0.1, 0.5, 0.9],
            deltas: vec![0.1, 0.5, 0.9],
            t: None,
            rho: 0.2,
            center: None,
        }
    }
}

/// Point counts and dilated-spectrum counts for a supplied family.
#[derive(Debug, Clone, PartialEq)]
pub struct LandauCounts {
    pub t: f64,
    /// `#(Z(L) ∩ B(ξ, (R+t)/L))`.
    pub n_plus: usize,
    /// `#(Z(L) ∩ B(ξ, (R-t)/L))`, zero when `R <= t`.
    pub n_minus: usize,
    /// `#{λ^{L(1+ρ)}_j ≥ δ}` per δ.
    pub dilated_counts: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct PlateauRow {
    pub bandwidth: f64,
    pub r: f64,
    pub k_l: usize,
    pub t1: f64,
    pub t2: f64,
    /// `T₁ / (k_L vol(B)/vol(M))`.
    pub trace_ratio: f64,
    /// `#{λ_j > γ}` per γ.
    pub counts: Vec<usize>,
    pub landau: Option<LandauCounts>,
}

impl PlateauRow {
    pub fn gap(&self) -> f64 {
        self.t1 - self.t2
    }
}

/// Log-log fit of `T₁ - T₂` against `R` at one bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapFit {
    pub bandwidth: f64,
    pub exponent: f64,
    pub constant: f64,
    /// `max / min` of `(T₁ - T₂)/R^{m-1}` over the scanned radii.
    pub spread: f64,
}

#[derive(Debug, Clone)]
pub struct PlateauReport {
    pub eps: f64,
    pub gammas: Vec<f64>,
    pub deltas: Vec<f64>,
    pub rows: Vec<PlateauRow>,
    pub fits: Vec<GapFit>,
}

/// `#{z ∈ points : d(center, z) ≤ radius}` with a closed ball.
pub fn count_in_ball(manifold: &Manifold, points: &[Point], center: &Point, radius: f64) -> usize {
    let limit = radius * (1.0 + 1e-12);
    points.iter().filter(|z| manifold.distance(center, z) <= limit).count()
}

/// Spectra of the modified operator on `B(ξ, R/L)` over an `(L, R)` grid,
/// ordered by `(L, R)`.
pub fn plateau_scan(
    manifold: &Manifold,
    family: Option<&TriangularFamily>,
    bandwidths: &[f64],
    radii: &[f64],
    options: &PlateauOptions,
) -> Result<PlateauReport> {
    check_eps(options.eps)?;
    if bandwidths.is_empty() || radii.is_empty() {
        return Err(Error::InvalidArgument("plateau scan needs nonempty L and R grids".into()));
    }
    let center = options.center.clone().unwrap_or_else(|| manifold.reference_point());
    let m = manifold.dimension() as i32;
    let vol_m = manifold.total_volume();
    let mut rows = Vec::new();
    for &l in bandwidths {
        let basis = eigenbasis(manifold, l)?;
        let dilated = match family {
            Some(_) => Some(eigenbasis(manifold, l * (1.0 + options.rho))?),
            None => None,
        };
        let landau_t = match (family, options.t) {
            (Some(_), Some(t)) => Some(t),
            (Some(f), None) => {
                let s = l * crate::families::minimum_distance(manifold, f.points(l)?);
                Some(if s.is_finite() && s > 0.0 { 3.0 / s } else { 0.0 })
            }
            (None, _) => None,
        };
        for &r in radii {
            let region = Region::ball(center.clone(), r / l);
            let spec = spectrum(&modified_matrix(&basis, options.eps, &region)?)?;
            let vol_b = region.volume(manifold)?;
            let landau = match (family, &dilated, landau_t) {
                (Some(f), Some(db), Some(t)) => {
                    let pts = f.points(l)?;
                    let dspec = spectrum(&modified_matrix(db, options.eps, &region)?)?;
                    Some(LandauCounts {
                        t,
                        n_plus: count_in_ball(manifold, pts, &center, (r + t) / l),
                        n_minus: if r > t {
                            count_in_ball(manifold, pts, &center, (r - t) / l)
                        } else {
                            0
                        },
                        dilated_counts: options.deltas.iter().map(|&d| dspec.count_at_least(d)).collect(),
                    })
                }
                _ => None,
            };
            rows.push(PlateauRow {
                bandwidth: l,
                r,
                k_l: basis.len(),
                t1: spec.t1,
                t2: spec.t2,
                trace_ratio: spec.t1 / (basis.len() as f64 * vol_b / vol_m),
                counts: options.gammas.iter().map(|&g| spec.count_above(g)).collect(),
                landau,
            });
        }
    }
    let fits = bandwidths
        .iter()
        .filter_map(|&l| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|row| row.bandwidth == l && row.gap() > 0.0)
                .map(|row| (row.r, row.gap()))
                .collect();
            gap_fit(l, &pts, m)
        })
        .collect();
    Ok(PlateauReport {
        eps: options.eps,
        gammas: options.gammas.clone(),
        deltas: options.deltas.clone(),
        rows,
        fits,
    })
}

fn gap_fit(bandwidth: f64, points: &[(f64, f64)], m: i32) -> Option<GapFit> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let exponent = sxy / sxx;
    let scaled: Vec<f64> = points.iter().map(|(r, g)| g / r.powi(m - 1)).collect();
    let hi = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
    Some(GapFit {
        bandwidth,
        exponent,
        constant: (my - exponent * mx).exp(),
        spread: hi / lo,
    })
}
