//! Marcinkiewicz-Zygmund frame bounds, Riesz bounds of normalized kernels
//! and minimal-norm interpolation at a single level.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::families::{minimum_distance, separation_report, TriangularFamily};
use crate::manifold::{eigenbasis, EigenBasis, Point};

/// Extreme values of `((1/k_L) Σ_j |f(z_j)|²) / ‖f‖²` over `f ∈ E_L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameBounds {
    pub lower: f64,
    pub upper: f64,
}

impl FrameBounds {
    /// `B/A`; infinite when `A = 0`.
    pub fn condition(&self) -> f64 {
        if self.lower > 0.0 {
            self.upper / self.lower
        } else {
            f64::INFINITY
        }
    }
}

/// Extreme eigenvalues of the normalized kernel Gram matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RieszBounds {
    pub lower: f64,
    pub upper: f64,
}

fn extreme_eigenvalues(m: DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(m).eigenvalues;
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Frame bounds from the `k_L × k_L` matrix `(1/k_L) Φᵀ Φ`, `Φ_ji = φ_i(z_j)`.
/// Roundoff-negative eigenvalues are reported as 0.
pub fn frame_bounds(basis: &EigenBasis, points: &[Point]) -> FrameBounds {
    let k = basis.len() as f64;
    let phi = basis.evaluation_matrix(points);
    let g = phi.tr_mul(&phi) / k;
    let (lo, hi) = extreme_eigenvalues(g);
    FrameBounds {
        lower: lo.max(0.0),
        upper: hi.max(0.0),
    }
}

/// Optimal Plancherel-Pólya constant at this level, the upper frame bound.
pub fn plancherel_polya_bound(basis: &EigenBasis, points: &[Point]) -> f64 {
    frame_bounds(basis, points).upper
}

fn reject_duplicates(basis: &EigenBasis, points: &[Point]) -> Result<()> {
    if minimum_distance(basis.manifold(), points) == 0.0 {
        return Err(Error::SingularConfiguration(
            "duplicate points make the kernel Gram matrix singular".into(),
        ));
    }
    Ok(())
}

/// Riesz bounds of `K_L(·, z_j)/√K_L(z_j, z_j)`.
///
/// With more points than `k_L` the Gram matrix has rank at most `k_L`, so
/// the lower bound is 0 and the upper bound comes from the `k_L × k_L`
/// form `Φᵀ D⁻¹ Φ`, which has the same nonzero spectrum.
pub fn riesz_bounds(basis: &EigenBasis, points: &[Point]) -> Result<RieszBounds> {
    reject_duplicates(basis, points)?;
    let phi = basis.evaluation_matrix(points);
    let diag: Vec<f64> = phi.row_iter().map(|r| r.norm_squared()).collect();
    if diag.iter().any(|&d| d <= 0.0) {
        return Err(Error::SingularConfiguration("a point annihilates every mode".into()));
    }
    let mut scaled = phi;
    for (mut row, d) in scaled.row_iter_mut().zip(&diag) {
        row /= d.sqrt();
    }
    if points.len() <= basis.len() {
        let g = &scaled * scaled.transpose();
        let (lo, hi) = extreme_eigenvalues(g);
        Ok(RieszBounds {
            lower: lo.max(0.0),
            upper: hi,
        })
    } else {
        log::warn!(
            "riesz bounds with m_L = {} > k_L = {}: lower bound is 0",
            points.len(),
            basis.len()
        );
        let (_, hi) = extreme_eigenvalues(scaled.tr_mul(&scaled));
        Ok(RieszBounds { lower: 0.0, upper: hi })
    }
}

/// `f = Σ_j c_j K_L(·, z_j)`.
#[derive(Debug, Clone)]
pub struct Interpolant {
    pub coefficients: Vec<f64>,
    /// Coefficients of `f` in the eigenbasis, `Φᵀ c`.
    pub basis_coefficients: Vec<f64>,
    /// `max_j |f(z_j) - v_j|`.
    pub residual: f64,
    /// `‖f‖² = cᵀ G c`.
    pub norm_squared: f64,
    /// Set when the Gram matrix failed the pivot test and a truncated
    /// pseudo-inverse was used.
    pub degenerate: bool,
}

/// Relative pivot and spectral truncation tolerance.
pub const PIVOT_TOLERANCE: f64 = 1e-10;

/// Minimal-norm `f ∈ E_L` with `f(z_j) = values_j`.
pub fn min_norm_interpolant(basis: &EigenBasis, points: &[Point], values: &[f64]) -> Result<Interpolant> {
    if values.len() != points.len() {
        return Err(Error::InvalidArgument(format!(
            "{} values for {} points",
            values.len(),
            points.len()
        )));
    }
    let phi = basis.evaluation_matrix(points);
    let g = &phi * phi.transpose();
    let v = DVector::from_column_slice(values);
    let scale = g.diagonal().amax();

    let cholesky = g.clone().cholesky().filter(|ch| {
        let l = ch.l_dirty();
        (0..l.nrows()).all(|i| l[(i, i)] * l[(i, i)] >= PIVOT_TOLERANCE * scale)
    });
    let (c, degenerate) = match cholesky {
        Some(ch) => (ch.solve(&v), false),
        None => {
            log::warn!("kernel Gram matrix numerically singular, using truncated pseudo-inverse");
            let eig = SymmetricEigen::new(g.clone());
            let cut = PIVOT_TOLERANCE * eig.eigenvalues.amax();
            let proj = eig.eigenvectors.tr_mul(&v);
            let inv = DVector::from_iterator(
                proj.len(),
                proj.iter()
                    .zip(eig.eigenvalues.iter())
                    .map(|(p, &e)| if e > cut { p / e } else { 0.0 }),
            );
            (&eig.eigenvectors * inv, true)
        }
    };
    let gc = &g * &c;
    let residual = (&gc - &v).amax();
    let norm_squared = c.dot(&gc).max(0.0);
    let basis_coefficients = phi.tr_mul(&c);
    Ok(Interpolant {
        coefficients: c.iter().copied().collect(),
        basis_coefficients: basis_coefficients.iter().copied().collect(),
        residual,
        norm_squared,
        degenerate,
    })
}

/// Per-level summary of a family.
#[derive(Debug, Clone)]
pub struct SamplingRow {
    pub bandwidth: f64,
    pub k_l: usize,
    pub m_l: usize,
    pub frame: FrameBounds,
    /// `None` when the level contains duplicate points.
    pub riesz: Option<RieszBounds>,
    pub separation: f64,
    pub mesh: f64,
}

pub fn sampling_table(family: &TriangularFamily) -> Result<Vec<SamplingRow>> {
    let m = family.manifold();
    let report = separation_report(family)?;
    family
        .levels()
        .iter()
        .zip(report)
        .map(|(level, sep)| {
            let basis = eigenbasis(m, level.bandwidth)?;
            let riesz = match riesz_bounds(&basis, &level.points) {
                Ok(r) => Some(r),
                Err(Error::SingularConfiguration(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(SamplingRow {
                bandwidth: level.bandwidth,
                k_l: basis.len(),
                m_l: level.points.len(),
                frame: frame_bounds(&basis, &level.points),
                riesz,
                separation: sep.separation,
                mesh: sep.mesh,
            })
        })
        .collect()
}

/// Default spread factor for [`is_empirically_mz`].
pub const MZ_SPREAD_FACTOR: f64 = 10.0;

/// Relative size below which a lower frame bound counts as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Every level has `A > 0` (relative to `B`) and `B/A` varies by less than
/// `factor` across the levels.
pub fn is_empirically_mz(rows: &[SamplingRow], factor: f64) -> bool {
    if rows.is_empty() || rows.iter().any(|r| !(r.frame.lower > RANK_TOLERANCE * r.frame.upper)) {
        return false;
    }
    let conds: Vec<f64> = rows.iter().map(|r| r.frame.condition()).collect();
    let hi = conds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = conds.iter().copied().fold(f64::INFINITY, f64::min);
    hi / lo < factor
}
