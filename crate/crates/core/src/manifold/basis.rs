//! Orthonormal Laplacian eigenbases truncated at a frequency.
//!
//! Eigenfunctions satisfy `Δφ = -λ²φ`; a basis of bandwidth `L` holds every
//! mode with frequency `λ <= L`, ordered by `λ` with ties broken by the
//! lexicographic order of [`Mode`].

use std::f64::consts::{PI, SQRT_2, TAU};

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{Manifold, Point};
use crate::error::{Error, Result};

/// Relative slack on `λ² <= L²` so that frequencies landing exactly on the
/// cutoff are not lost to rounding.
const CUTOFF_SLACK: f64 = 1e-12;

/// Descriptor of a single real eigenfunction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    /// `n = 0`: constant; `n > 0`: `√2 cos(2πnx)`; `n < 0`: `√2 sin(2π|n|x)`.
    Circle { n: i64 },
    /// `k = 0`: constant; otherwise `√2 cos(2πk·x)` or `√2 sin(2πk·x)` for
    /// `k` in the half-lattice `k1 > 0` or `k1 = 0, k2 > 0`.
    Torus { k: [i64; 2], sine: bool },
    /// Real orthonormal spherical harmonic: `m > 0` cosine, `m < 0` sine.
    Sphere { l: u32, m: i32 },
    Product(Box<Mode>, Box<Mode>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisEntry {
    /// Laplacian eigenvalue `λ²` (kept exactly; products add factor values).
    pub eigenvalue: f64,
    /// Frequency `λ = sqrt(eigenvalue)`.
    pub frequency: f64,
    pub mode: Mode,
}

impl BasisEntry {
    fn new(eigenvalue: f64, mode: Mode) -> Self {
        BasisEntry {
            eigenvalue,
            frequency: eigenvalue.sqrt(),
            mode,
        }
    }
}

#[derive(Debug, Clone)]
enum Evaluator {
    Circle {
        max_n: usize,
        /// per entry: (|n|, kind) with kind 0 const, 1 cos, 2 sin
        terms: Vec<(usize, u8)>,
    },
    Torus {
        max_k: usize,
        terms: Vec<TorusTerm>,
    },
    Sphere {
        max_l: usize,
        terms: Vec<(usize, i32)>,
    },
    Product {
        a: Box<EigenBasis>,
        b: Box<EigenBasis>,
        pairs: Vec<(usize, usize)>,
    },
}

#[derive(Debug, Clone, Copy)]
struct TorusTerm {
    k1: usize,
    k2: usize,
    s2: f64,
    sine: bool,
    constant: bool,
}

/// All eigenpairs of a manifold with frequency at most the bandwidth.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    manifold: Manifold,
    bandwidth: f64,
    entries: Vec<BasisEntry>,
    evaluator: Evaluator,
}

/// Eigenbasis of `E_L`.
pub fn eigenbasis(manifold: &Manifold, bandwidth: f64) -> Result<EigenBasis> {
    EigenBasis::new(manifold, bandwidth)
}

impl EigenBasis {
    pub fn new(manifold: &Manifold, bandwidth: f64) -> Result<Self> {
        if !(bandwidth >= 1.0) || !bandwidth.is_finite() {
            return Err(Error::BandwidthTooSmall(bandwidth));
        }
        Ok(Self::build(manifold, bandwidth))
    }

    fn build(manifold: &Manifold, bandwidth: f64) -> Self {
        let limit = bandwidth * bandwidth * (1.0 + CUTOFF_SLACK);
        let four_pi_sq = 4.0 * PI * PI;
        let (entries, evaluator) = match manifold {
            Manifold::Circle => {
                let max_n = (bandwidth / TAU).floor() as i64 + 1;
                let mut entries: Vec<BasisEntry> = (-max_n..=max_n)
                    .map(|n| BasisEntry::new(four_pi_sq * (n * n) as f64, Mode::Circle { n }))
                    .filter(|e| e.eigenvalue <= limit)
                    .collect();
                sort_entries(&mut entries);
                let terms = entries
                    .iter()
                    .map(|e| match e.mode {
                        Mode::Circle { n } => {
                            let kind = match n.signum() {
                                0 => 0,
                                1 => 1,
                                _ => 2,
                            };
                            (n.unsigned_abs() as usize, kind)
                        }
                        _ => unreachable!(),
                    })
                    .collect::<Vec<(usize, u8)>>();
                let max_n = terms.iter().map(|t| t.0).max().unwrap_or(0);
                (entries, Evaluator::Circle { max_n, terms })
            }
            Manifold::Torus2 => {
                let kmax = (bandwidth / TAU).floor() as i64 + 1;
                let mut entries = vec![BasisEntry::new(0.0, Mode::Torus { k: [0, 0], sine: false })];
                for k1 in 0..=kmax {
                    for k2 in -kmax..=kmax {
                        if k1 == 0 && k2 <= 0 {
                            continue;
                        }
                        let ev = four_pi_sq * (k1 * k1 + k2 * k2) as f64;
                        if ev <= limit {
                            entries.push(BasisEntry::new(ev, Mode::Torus { k: [k1, k2], sine: false }));
                            entries.push(BasisEntry::new(ev, Mode::Torus { k: [k1, k2], sine: true }));
                        }
                    }
                }
                sort_entries(&mut entries);
                let terms: Vec<TorusTerm> = entries
                    .iter()
                    .map(|e| match e.mode {
                        Mode::Torus { k, sine } => TorusTerm {
                            k1: k[0].unsigned_abs() as usize,
                            k2: k[1].unsigned_abs() as usize,
                            s2: if k[1] < 0 { -1.0 } else { 1.0 },
                            sine,
                            constant: k == [0, 0],
                        },
                        _ => unreachable!(),
                    })
                    .collect();
                let max_k = terms.iter().map(|t| t.k1.max(t.k2)).max().unwrap_or(0);
                (entries, Evaluator::Torus { max_k, terms })
            }
            Manifold::Sphere2 => {
                let mut entries = Vec::new();
                let mut l: i64 = 0;
                while ((l * (l + 1)) as f64) <= limit {
                    for m in -l..=l {
                        entries.push(BasisEntry::new(
                            (l * (l + 1)) as f64,
                            Mode::Sphere { l: l as u32, m: m as i32 },
                        ));
                    }
                    l += 1;
                }
                sort_entries(&mut entries);
                let terms: Vec<(usize, i32)> = entries
                    .iter()
                    .map(|e| match e.mode {
                        Mode::Sphere { l, m } => (l as usize, m),
                        _ => unreachable!(),
                    })
                    .collect();
                let max_l = terms.iter().map(|t| t.0).max().unwrap_or(0);
                (entries, Evaluator::Sphere { max_l, terms })
            }
            Manifold::Product(ma, mb) => {
                let a = Self::build(ma, bandwidth);
                let b = Self::build(mb, bandwidth);
                let mut combined: Vec<(BasisEntry, (usize, usize))> = Vec::new();
                for (i, ea) in a.entries.iter().enumerate() {
                    for (j, eb) in b.entries.iter().enumerate() {
                        let ev = ea.eigenvalue + eb.eigenvalue;
                        if ev <= limit {
                            let mode = Mode::Product(Box::new(ea.mode.clone()), Box::new(eb.mode.clone()));
                            combined.push((BasisEntry::new(ev, mode), (i, j)));
                        }
                    }
                }
                combined.sort_by(|x, y| entry_order(&x.0, &y.0));
                let (entries, pairs) = combined.into_iter().unzip();
                (
                    entries,
                    Evaluator::Product {
                        a: Box::new(a),
                        b: Box::new(b),
                        pairs,
                    },
                )
            }
        };
        EigenBasis {
            manifold: manifold.clone(),
            bandwidth,
            entries,
            evaluator,
        }
    }

    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// `k_L`, the dimension of `E_L`.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[BasisEntry] {
        &self.entries
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.frequency)
    }

    /// Writes `φ_i(z)` for every entry into `out`.
    ///
    /// # Panics
    /// If `out.len() != self.len()` or `z` is not a point of the manifold.
    pub fn evaluate_into(&self, z: &Point, out: &mut [f64]) {
        assert_eq!(out.len(), self.entries.len());
        match (&self.evaluator, z) {
            (Evaluator::Circle { max_n, terms }, Point::Circle(x)) => {
                let (c, s) = trig_table(*x, *max_n);
                for (o, &(n, kind)) in out.iter_mut().zip(terms) {
                    *o = match kind {
                        0 => 1.0,
                        1 => SQRT_2 * c[n],
                        _ => SQRT_2 * s[n],
                    };
                }
            }
            (Evaluator::Torus { max_k, terms }, Point::Torus(xy)) => {
                let (cx, sx) = trig_table(xy[0], *max_k);
                let (cy, sy) = trig_table(xy[1], *max_k);
                for (o, t) in out.iter_mut().zip(terms) {
                    *o = if t.constant {
                        1.0
                    } else {
                        let (a, b) = (t.k1, t.k2);
                        let syb = t.s2 * sy[b];
                        if t.sine {
                            SQRT_2 * (sx[a] * cy[b] + cx[a] * syb)
                        } else {
                            SQRT_2 * (cx[a] * cy[b] - sx[a] * syb)
                        }
                    };
                }
            }
            (Evaluator::Sphere { max_l, terms }, Point::Sphere { theta, phi }) => {
                let table = NormalizedLegendre::new(*max_l, theta.cos(), theta.sin());
                let (cp, sp) = angle_table(*phi, *max_l);
                for (o, &(l, m)) in out.iter_mut().zip(terms) {
                    let am = m.unsigned_abs() as usize;
                    let p = table.get(l, am);
                    *o = match m.signum() {
                        0 => p,
                        1 => SQRT_2 * p * cp[am],
                        _ => SQRT_2 * p * sp[am],
                    };
                }
            }
            (Evaluator::Product { a, b, pairs }, Point::Product(za, zb)) => {
                let va = a.evaluate(za);
                let vb = b.evaluate(zb);
                for (o, &(i, j)) in out.iter_mut().zip(pairs) {
                    *o = va[i] * vb[j];
                }
            }
            _ => panic!("point does not belong to {}", self.manifold),
        }
    }

    pub fn evaluate(&self, z: &Point) -> Vec<f64> {
        let mut out = vec![0.0; self.entries.len()];
        self.evaluate_into(z, &mut out);
        out
    }

    /// Matrix with rows `φ(z_j)` for each point.
    pub fn evaluation_matrix(&self, points: &[Point]) -> DMatrix<f64> {
        let k = self.len();
        let rows: Vec<Vec<f64>> = points.par_iter().map(|p| self.evaluate(p)).collect();
        DMatrix::from_fn(points.len(), k, |r, c| rows[r][c])
    }

    /// `Σ_i coeffs_i φ_i(z)`.
    pub fn evaluate_function(&self, coeffs: &[f64], z: &Point) -> f64 {
        assert_eq!(coeffs.len(), self.len());
        self.evaluate(z).iter().zip(coeffs).map(|(a, b)| a * b).sum()
    }
}

fn entry_order(a: &BasisEntry, b: &BasisEntry) -> std::cmp::Ordering {
    a.eigenvalue.total_cmp(&b.eigenvalue).then_with(|| a.mode.cmp(&b.mode))
}

fn sort_entries(entries: &mut [BasisEntry]) {
    entries.sort_by(entry_order);
}

/// `cos(2πnx)`, `sin(2πnx)` for `n = 0..=max`.
fn trig_table(x: f64, max: usize) -> (Vec<f64>, Vec<f64>) {
    angle_table(TAU * x, max)
}

fn angle_table(angle: f64, max: usize) -> (Vec<f64>, Vec<f64>) {
    let mut c = Vec::with_capacity(max + 1);
    let mut s = Vec::with_capacity(max + 1);
    for n in 0..=max {
        let (sn, cn) = (n as f64 * angle).sin_cos();
        c.push(cn);
        s.push(sn);
    }
    (c, s)
}

/// Fully normalized associated Legendre functions
/// `P̄_l^m(cos θ) = sqrt((2l+1)/(4π) (l-m)!/(l+m)!) P_l^m(cos θ)`, without
/// the Condon-Shortley phase, for `0 <= m <= l <= max_l`.
struct NormalizedLegendre {
    values: Vec<f64>,
}

impl NormalizedLegendre {
    fn new(max_l: usize, x: f64, sin_theta: f64) -> Self {
        let idx = |l: usize, m: usize| l * (l + 1) / 2 + m;
        let mut values = vec![0.0; idx(max_l, max_l) + 1];
        let u = sin_theta.abs();
        let mut pmm = 1.0 / (4.0 * PI).sqrt();
        for m in 0..=max_l {
            if m > 0 {
                pmm *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * u;
            }
            values[idx(m, m)] = pmm;
            if m < max_l {
                let mut prev2 = pmm;
                let mut prev1 = ((2 * m + 3) as f64).sqrt() * x * pmm;
                values[idx(m + 1, m)] = prev1;
                for l in (m + 2)..=max_l {
                    let (lf, mf) = (l as f64, m as f64);
                    let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                    let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
                    let cur = a * (x * prev1 - b * prev2);
                    values[idx(l, m)] = cur;
                    prev2 = prev1;
                    prev1 = cur;
                }
            }
        }
        NormalizedLegendre { values }
    }

    fn get(&self, l: usize, m: usize) -> f64 {
        self.values[l * (l + 1) / 2 + m]
    }
}

/// Value of a single eigenfunction at `z`.
pub fn evaluate_mode(manifold: &Manifold, mode: &Mode, z: &Point) -> f64 {
    match (manifold, mode, z) {
        (Manifold::Circle, Mode::Circle { n }, Point::Circle(x)) => {
            let arg = TAU * n.unsigned_abs() as f64 * x;
            match n.signum() {
                0 => 1.0,
                1 => SQRT_2 * arg.cos(),
                _ => SQRT_2 * arg.sin(),
            }
        }
        (Manifold::Torus2, Mode::Torus { k, sine }, Point::Torus(xy)) => {
            if *k == [0, 0] {
                return 1.0;
            }
            let arg = TAU * (k[0] as f64 * xy[0] + k[1] as f64 * xy[1]);
            if *sine {
                SQRT_2 * arg.sin()
            } else {
                SQRT_2 * arg.cos()
            }
        }
        (Manifold::Sphere2, Mode::Sphere { l, m }, Point::Sphere { theta, phi }) => {
            let (l, am) = (*l as usize, m.unsigned_abs() as usize);
            let p = NormalizedLegendre::new(l, theta.cos(), theta.sin()).get(l, am);
            let arg = am as f64 * phi;
            match m.signum() {
                0 => p,
                1 => SQRT_2 * p * arg.cos(),
                _ => SQRT_2 * p * arg.sin(),
            }
        }
        (Manifold::Product(ma, mb), Mode::Product(a, b), Point::Product(za, zb)) => {
            evaluate_mode(ma, a, za) * evaluate_mode(mb, b, zb)
        }
        _ => panic!("mode {mode:?} does not belong to {manifold}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::global_quadrature;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive count of integer vectors with 4π²|k|² <= L².
    fn lattice_count(l: f64) -> usize {
        let r = (l / TAU).ceil() as i64 + 1;
        let mut count = 0;
        for a in -r..=r {
            for b in -r..=r {
                if 4.0 * PI * PI * ((a * a + b * b) as f64) <= l * l {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn torus_counts() {
        assert_eq!(eigenbasis(&Manifold::Torus2, 7.0).unwrap().len(), 5);
        assert_eq!(eigenbasis(&Manifold::Torus2, 13.0).unwrap().len(), 13);
        for l in [1.0, 6.2, 6.3, 25.0, 40.0, 60.0, 80.0] {
            assert_eq!(eigenbasis(&Manifold::Torus2, l).unwrap().len(), lattice_count(l), "L={l}");
        }
    }

    #[test]
    fn sphere_counts() {
        assert_eq!(eigenbasis(&Manifold::Sphere2, 2.0).unwrap().len(), 4);
        for l in [1.0, 1.5, 3.0, 10.0, 40.0] {
            let mut lstar = 0u64;
            while ((lstar + 1) * (lstar + 2)) as f64 <= l * l {
                lstar += 1;
            }
            let k = eigenbasis(&Manifold::Sphere2, l).unwrap().len() as u64;
            assert_eq!(k, (lstar + 1) * (lstar + 1), "L={l}");
        }
    }

    #[test]
    fn rejects_small_bandwidth() {
        assert!(matches!(eigenbasis(&Manifold::Torus2, 0.5), Err(Error::BandwidthTooSmall(_))));
    }

    #[test]
    fn ordering_is_nondecreasing_and_within_bandwidth() {
        for m in ["circle", "torus2", "sphere2", "product(torus2,circle)"] {
            let m: Manifold = m.parse().unwrap();
            let b = eigenbasis(&m, 20.0).unwrap();
            assert!(b.entries().windows(2).all(|w| entry_order(&w[0], &w[1]).is_lt()));
            assert!(b.frequencies().all(|f| f <= 20.0 * (1.0 + 1e-12)));
        }
    }

    #[test]
    fn product_eigenvalues_add_exactly() {
        let m: Manifold = "product(sphere2,circle)".parse().unwrap();
        let b = eigenbasis(&m, 9.0).unwrap();
        for e in b.entries() {
            let Mode::Product(ma, mb) = &e.mode else { panic!() };
            let Mode::Sphere { l, .. } = **ma else { panic!() };
            let Mode::Circle { n } = **mb else { panic!() };
            let ea = (l as f64) * (l as f64 + 1.0);
            let eb = 4.0 * PI * PI * (n * n) as f64;
            assert_eq!(e.eigenvalue, ea + eb);
        }
    }

    #[test]
    fn constant_modes() {
        let t = eigenbasis(&Manifold::Torus2, 7.0).unwrap();
        assert_eq!(t.evaluate(&Point::torus(0.3, 0.7))[0], 1.0);
        let s = eigenbasis(&Manifold::Sphere2, 2.0).unwrap();
        assert!((s.evaluate(&Point::sphere(0.4, 1.0))[0] - 1.0 / (4.0 * PI).sqrt()).abs() < 1e-16);
        let v = evaluate_mode(&Manifold::Torus2, &Mode::Torus { k: [1, 0], sine: false }, &Point::torus(0.0, 0.0));
        assert_eq!(v, SQRT_2);
    }

    #[test]
    fn table_evaluation_matches_single_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for m in ["circle", "torus2", "sphere2", "product(torus2,circle)", "product(sphere2,sphere2)"] {
            let m: Manifold = m.parse().unwrap();
            let b = eigenbasis(&m, 15.0).unwrap();
            for _ in 0..5 {
                let z = m.random_point(&mut rng);
                let v = b.evaluate(&z);
                for (e, val) in b.entries().iter().zip(&v) {
                    let direct = evaluate_mode(&m, &e.mode, &z);
                    assert!((direct - val).abs() < 1e-12, "{m} {:?}", e.mode);
                }
            }
        }
    }

    #[test]
    fn gram_is_identity() {
        for (m, l) in [("circle", 40.0), ("torus2", 30.0), ("sphere2", 20.0), ("product(torus2,circle)", 14.0)] {
            let m: Manifold = m.parse().unwrap();
            let b = eigenbasis(&m, l).unwrap();
            let rule = global_quadrature(&m, l).unwrap();
            let phi = b.evaluation_matrix(&rule.nodes);
            let w = nalgebra::DVector::from_vec(rule.weights.clone());
            let gram = phi.transpose() * DMatrix::from_diagonal(&w) * &phi;
            let err = (gram - DMatrix::identity(b.len(), b.len())).abs().max();
            assert!(err < 1e-10, "{m}: {err}");
        }
    }

    #[test]
    fn spherical_harmonics_are_eigenfunctions() {
        // Finite-difference Laplace-Beltrami check: Δ Y = -l(l+1) Y.
        let m = Manifold::Sphere2;
        let b = eigenbasis(&m, 6.0).unwrap();
        let (theta, phi, h) = (1.1, 0.7, 1e-4);
        let at = |t: f64, p: f64| b.evaluate(&Point::sphere(t, p));
        let c = at(theta, phi);
        let (tp, tm) = (at(theta + h, phi), at(theta - h, phi));
        let (pp, pm) = (at(theta, phi + h), at(theta, phi - h));
        for (i, e) in b.entries().iter().enumerate() {
            let d_theta = (tp[i] - tm[i]) / (2.0 * h);
            let d2_theta = (tp[i] - 2.0 * c[i] + tm[i]) / (h * h);
            let d2_phi = (pp[i] - 2.0 * c[i] + pm[i]) / (h * h);
            let lap = d2_theta + theta.cos() / theta.sin() * d_theta + d2_phi / theta.sin().powi(2);
            assert!((lap + e.eigenvalue * c[i]).abs() < 1e-5, "{:?}", e.mode);
        }
    }
}
