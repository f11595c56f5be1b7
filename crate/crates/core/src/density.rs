//! Beurling-Landau density estimates over finite `(R, L)` grids.

use rayon::prelude::*;

use crate::concentration::count_in_ball;
use crate::error::{Error, Result};
use crate::families::TriangularFamily;
use crate::manifold::{eigenbasis, Manifold, Point};

/// `(#(Z(L) ∩ B(ξ, R/L)) / k_L) / (vol B(ξ, R/L) / vol M)`, closed ball.
pub fn local_ratio(manifold: &Manifold, points: &[Point], bandwidth: f64, center: &Point, r: f64) -> Result<f64> {
    let k_l = eigenbasis(manifold, bandwidth)?.len();
    ratio_with(manifold, points, bandwidth, k_l, center, r)
}

fn ratio_with(manifold: &Manifold, points: &[Point], bandwidth: f64, k_l: usize, center: &Point, r: f64) -> Result<f64> {
    let radius = r / bandwidth;
    let vol = manifold.ball_volume(radius)?;
    let count = count_in_ball(manifold, points, center, radius);
    Ok((count as f64 / k_l as f64) / (vol / manifold.total_volume()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityCell {
    pub center: usize,
    pub r: f64,
    pub bandwidth: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct DensityReport {
    pub centers: Vec<Point>,
    pub bandwidths: Vec<f64>,
    pub radii: Vec<f64>,
    /// Ordered by `(center, R, L)`.
    pub cells: Vec<DensityCell>,
    /// `min` over the two largest `R` of `min` over the two largest `L` of
    /// `min_ξ ratio`.
    pub dminus: f64,
    /// Same with `max`.
    pub dplus: f64,
    /// Surrogates with the `R` and `L` reductions swapped.
    pub dminus_r_first: f64,
    pub dplus_r_first: f64,
}

/// Up to 64 points of the family's finest level, evenly strided, followed
/// by 64 low-discrepancy points of the manifold.
pub fn default_probe_centers(family: &TriangularFamily) -> Vec<Point> {
    let mut centers = Vec::new();
    if let Some(level) = family.levels().last() {
        let n = level.points.len();
        let take = n.min(64);
        for i in 0..take {
            centers.push(level.points[i * n / take].clone());
        }
    }
    centers.extend(family.manifold().low_discrepancy_points(64));
    centers
}

fn two_largest(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v.dedup();
    v.truncate(2);
    v
}

pub fn density_estimate(
    family: &TriangularFamily,
    bandwidths: &[f64],
    radii: &[f64],
    centers: &[Point],
) -> Result<DensityReport> {
    if bandwidths.is_empty() || radii.is_empty() || centers.is_empty() {
        return Err(Error::InvalidArgument("density estimate needs nonempty L, R and center grids".into()));
    }
    let m = family.manifold();
    let mut levels = Vec::with_capacity(bandwidths.len());
    for &l in bandwidths {
        levels.push((l, family.points(l)?, eigenbasis(m, l)?.len()));
    }
    let mut tasks = Vec::new();
    for c in 0..centers.len() {
        for &r in radii {
            for &(l, pts, k_l) in &levels {
                tasks.push((c, r, l, pts, k_l));
            }
        }
    }
    let cells = tasks
        .par_iter()
        .map(|&(c, r, l, pts, k_l)| {
            Ok(DensityCell {
                center: c,
                r,
                bandwidth: l,
                ratio: ratio_with(m, pts, l, k_l, &centers[c], r)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let top_r = two_largest(radii);
    let top_l = two_largest(bandwidths);
    let extreme = |r: f64, l: f64, pick: fn(f64, f64) -> f64, init: f64| {
        cells
            .iter()
            .filter(|c| c.r == r && c.bandwidth == l)
            .fold(init, |acc, c| pick(acc, c.ratio))
    };
    let nested = |outer: &[f64], inner: &[f64], l_inner: bool, pick: fn(f64, f64) -> f64, init: f64| {
        outer.iter().fold(init, |acc, &o| {
            let v = inner.iter().fold(init, |acc2, &i| {
                let (r, l) = if l_inner { (o, i) } else { (i, o) };
                pick(acc2, extreme(r, l, pick, init))
            });
            pick(acc, v)
        })
    };
    Ok(DensityReport {
        centers: centers.to_vec(),
        bandwidths: bandwidths.to_vec(),
        radii: radii.to_vec(),
        dminus: nested(&top_r, &top_l, true, f64::min, f64::INFINITY),
        dplus: nested(&top_r, &top_l, true, f64::max, f64::NEG_INFINITY),
        dminus_r_first: nested(&top_l, &top_r, false, f64::min, f64::INFINITY),
        dplus_r_first: nested(&top_l, &top_r, false, f64::max, f64::NEG_INFINITY),
        cells,
    })
}

/// `μ_L(M) = m_L / k_L`.
pub fn counting_mass(family: &TriangularFamily, bandwidth: f64) -> Result<f64> {
    let k_l = eigenbasis(family.manifold(), bandwidth)?.len();
    Ok(family.points(bandwidth)?.len() as f64 / k_l as f64)
}
