//! Triangular point families `Z = {Z(L)}` with separation and mesh-norm
//! diagnostics.

use std::fmt::Write as _;
use std::io::BufRead;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::probe_points;
use crate::manifold::{eigenbasis, fibonacci_sphere, Manifold, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Grid,
    Random,
    Perturbed,
    Fekete,
    Loaded,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Provenance::Grid => "grid",
            Provenance::Random => "random",
            Provenance::Perturbed => "perturbed",
            Provenance::Fekete => "fekete",
            Provenance::Loaded => "loaded",
        };
        f.write_str(s)
    }
}

/// One level `Z(L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub bandwidth: f64,
    pub points: Vec<Point>,
}

#[derive(Debug, Clone)]
pub struct TriangularFamily {
    manifold: Manifold,
    levels: Vec<Level>,
    provenance: Provenance,
}

impl TriangularFamily {
    /// Levels are sorted by bandwidth; each must be nonempty, lie on the
    /// manifold and have a distinct bandwidth.
    pub fn new(manifold: Manifold, mut levels: Vec<Level>, provenance: Provenance) -> Result<Self> {
        levels.sort_by(|a, b| a.bandwidth.total_cmp(&b.bandwidth));
        for w in levels.windows(2) {
            if w[0].bandwidth == w[1].bandwidth {
                return Err(Error::InvalidArgument(format!("duplicate level L = {}", w[0].bandwidth)));
            }
        }
        for level in &levels {
            if level.points.is_empty() {
                return Err(Error::InvalidArgument(format!("level L = {} is empty", level.bandwidth)));
            }
            if let Some(p) = level.points.iter().find(|p| !manifold.contains(p)) {
                return Err(Error::InvalidArgument(format!("{p:?} is not a point of {manifold}")));
            }
        }
        Ok(TriangularFamily {
            manifold,
            levels,
            provenance,
        })
    }

    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn bandwidths(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.bandwidth).collect()
    }

    pub fn level(&self, bandwidth: f64) -> Option<&Level> {
        self.levels
            .iter()
            .find(|l| (l.bandwidth - bandwidth).abs() <= 1e-12 * bandwidth.abs().max(1.0))
    }

    /// Points of `Z(L)`, or a missing-level error.
    pub fn points(&self, bandwidth: f64) -> Result<&[Point]> {
        self.level(bandwidth)
            .map(|l| l.points.as_slice())
            .ok_or(Error::MissingLevel(bandwidth))
    }

    /// Level-wise union with another family on the same bandwidths.
    pub fn union(&self, other: &TriangularFamily) -> Result<TriangularFamily> {
        let mut levels = Vec::with_capacity(self.levels.len());
        for level in &self.levels {
            let mut points = level.points.clone();
            points.extend_from_slice(other.points(level.bandwidth)?);
            levels.push(Level {
                bandwidth: level.bandwidth,
                points,
            });
        }
        TriangularFamily::new(self.manifold.clone(), levels, self.provenance)
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }
}

fn grid_count(nu: f64, l: f64) -> usize {
    ((nu * l) - 1e-9).ceil().max(1.0) as usize
}

fn grid_points(manifold: &Manifold, l: f64, nu: f64) -> Vec<Point> {
    match manifold {
        Manifold::Circle => {
            let n = grid_count(nu, l);
            (0..n).map(|i| Point::circle(i as f64 / n as f64)).collect()
        }
        Manifold::Torus2 => {
            let n = grid_count(nu, l);
            let mut pts = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    pts.push(Point::torus(i as f64 / n as f64, j as f64 / n as f64));
                }
            }
            pts
        }
        Manifold::Sphere2 => {
            let n = ((nu * l).powi(2) - 1e-9).ceil().max(1.0) as usize;
            fibonacci_sphere(n)
        }
        Manifold::Product(a, b) => {
            let (pa, pb) = (grid_points(a, l, nu), grid_points(b, l, nu));
            let mut pts = Vec::with_capacity(pa.len() * pb.len());
            for x in &pa {
                for y in &pb {
                    pts.push(Point::product(x.clone(), y.clone()));
                }
            }
            pts
        }
    }
}

/// Deterministic near-uniform family: a `⌈νL⌉ × ⌈νL⌉` lattice on the torus,
/// `⌈νL⌉` equispaced points on the circle, `⌈(νL)²⌉` Fibonacci-spiral
/// points on the sphere, and tensor products of these on products.
pub fn make_grid_family(manifold: &Manifold, bandwidths: &[f64], nu: f64) -> Result<TriangularFamily> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::InvalidArgument(format!("oversampling must be positive, got {nu}")));
    }
    let levels = bandwidths
        .iter()
        .map(|&l| Level {
            bandwidth: l,
            points: grid_points(manifold, l, nu),
        })
        .collect();
    TriangularFamily::new(manifold.clone(), levels, Provenance::Grid)
}

/// Independent uniform points, as many per level as the grid family with
/// the same `ν` would have.
pub fn make_random_family(manifold: &Manifold, bandwidths: &[f64], nu: f64, seed: u64) -> Result<TriangularFamily> {
    let grid = make_grid_family(manifold, bandwidths, nu)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = grid
        .levels
        .iter()
        .map(|level| Level {
            bandwidth: level.bandwidth,
            points: (0..level.points.len()).map(|_| manifold.random_point(&mut rng)).collect(),
        })
        .collect();
    TriangularFamily::new(manifold.clone(), levels, Provenance::Random)
}

/// Per-level separation and mesh data.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationEntry {
    pub bandwidth: f64,
    /// `L min_{j≠k} d(z_j, z_k)`; infinite for a single point.
    pub separation: f64,
    /// `L sup_ξ d(ξ, Z(L))` estimated on a probe grid.
    pub mesh: f64,
    pub m_l: usize,
    pub k_l: usize,
}

impl SeparationEntry {
    pub fn ratio(&self) -> f64 {
        self.m_l as f64 / self.k_l as f64
    }
}

/// `min_{j≠k} d(z_j, z_k)` by exhaustive scan; infinite for fewer than two
/// points.
pub fn minimum_distance(manifold: &Manifold, points: &[Point]) -> f64 {
    (0..points.len())
        .into_par_iter()
        .map(|i| {
            points[i + 1..]
                .iter()
                .map(|q| manifold.distance(&points[i], q))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// `sup_ξ d(ξ, Z)` over probes with spacing about `1/(4L)`.
pub fn mesh_norm(manifold: &Manifold, points: &[Point], bandwidth: f64) -> f64 {
    let probes = probe_points(manifold, bandwidth, 4.0);
    probes
        .par_iter()
        .map(|xi| {
            points
                .iter()
                .map(|z| manifold.distance(xi, z))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max)
}

pub fn separation_report(family: &TriangularFamily) -> Result<Vec<SeparationEntry>> {
    let m = family.manifold();
    family
        .levels()
        .iter()
        .map(|level| {
            let l = level.bandwidth;
            let k_l = eigenbasis(m, l)?.len();
            Ok(SeparationEntry {
                bandwidth: l,
                separation: l * minimum_distance(m, &level.points),
                mesh: l * mesh_norm(m, &level.points, l),
                m_l: level.points.len(),
                k_l,
            })
        })
        .collect()
}

/// Greedy first-fit pass in index order: a point is kept iff it lies at
/// distance at least `target_s / L` from every point kept before it.
pub fn extract_separated_subfamily(family: &TriangularFamily, target_s: f64) -> Result<TriangularFamily> {
    if !(target_s > 0.0) {
        return Err(Error::InvalidArgument(format!("target separation must be positive, got {target_s}")));
    }
    let m = family.manifold();
    let levels = family
        .levels()
        .iter()
        .map(|level| {
            let radius = target_s / level.bandwidth;
            let threshold = radius * (1.0 - 1e-9);
            let mut kept: Vec<Point> = Vec::new();
            for p in &level.points {
                if kept.iter().all(|q| m.distance(p, q) >= threshold) {
                    kept.push(p.clone());
                }
            }
            Level {
                bandwidth: level.bandwidth,
                points: kept,
            }
        })
        .collect();
    TriangularFamily::new(m.clone(), levels, family.provenance())
}

/// Moves every point uniformly inside its geodesic ball of radius `δ/L`.
pub fn perturb_family(family: &TriangularFamily, delta: f64, seed: u64) -> Result<TriangularFamily> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("perturbation must be nonnegative, got {delta}")));
    }
    let m = family.manifold();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut levels = Vec::with_capacity(family.levels().len());
    for level in family.levels() {
        let radius = delta / level.bandwidth;
        if delta == 0.0 {
            levels.push(level.clone());
            continue;
        }
        m.check_radius(radius)?;
        let points = level
            .points
            .iter()
            .map(|p| m.sample_ball(p, radius, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        levels.push(Level {
            bandwidth: level.bandwidth,
            points,
        });
    }
    TriangularFamily::new(m.clone(), levels, Provenance::Perturbed)
}

/// Serializes as `L j coord...` lines, sorted by `(L, j)` with 1-based `j`.
pub fn format_family(family: &TriangularFamily) -> String {
    let mut out = String::new();
    for level in family.levels() {
        for (j, p) in level.points.iter().enumerate() {
            write!(out, "{} {}", level.bandwidth, j + 1).unwrap();
            for c in p.coords() {
                write!(out, " {c}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

/// Parses the `L j coord...` format. Blank lines and `#` comments are
/// skipped.
pub fn parse_family<R: BufRead>(manifold: &Manifold, reader: R) -> Result<TriangularFamily> {
    let expected = manifold.coord_count();
    let mut levels: Vec<Level> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let fail = |message: String| Error::FamilyFormat { line: lineno, message };
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != expected + 2 {
            return Err(fail(format!("expected {} fields, found {}", expected + 2, fields.len())));
        }
        let l: f64 = fields[0].parse().map_err(|_| fail(format!("bad bandwidth {:?}", fields[0])))?;
        let j: usize = fields[1].parse().map_err(|_| fail(format!("bad index {:?}", fields[1])))?;
        let coords = fields[2..]
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| fail(format!("bad coordinate {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let point = manifold
            .point_from_coords(&coords)
            .map_err(|e| fail(e.to_string()))?;
        match levels.last_mut() {
            Some(level) if level.bandwidth == l => {
                if j != level.points.len() + 1 {
                    return Err(fail(format!("index {j} out of order")));
                }
                level.points.push(point);
            }
            last => {
                if let Some(prev) = last {
                    if l < prev.bandwidth {
                        return Err(fail(format!("level {l} out of order")));
                    }
                }
                if j != 1 {
                    return Err(fail(format!("level {l} must start at index 1")));
                }
                levels.push(Level {
                    bandwidth: l,
                    points: vec![point],
                });
            }
        }
    }
    if levels.is_empty() {
        return Err(Error::FamilyFormat {
            line: 0,
            message: "no points".into(),
        });
    }
    TriangularFamily::new(manifold.clone(), levels, Provenance::Loaded)
}
